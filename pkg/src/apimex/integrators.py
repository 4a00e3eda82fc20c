"""IMEX Runge-Kutta time stepping for relaxation systems.

Two formulations are provided.

* ``BPR``: the first equation carries ``-(v + mu p(u)_x)_x`` explicitly and
  ``mu p(u)_xx`` implicitly, so the eps -> 0 limit is an IMEX scheme with
  implicit diffusion.
* ``Partitioned``: the first equation is explicit and the second implicit
  with no added terms; its limit is an explicit scheme.

Every stage solves the relaxation equation for V in closed form.  The new v
is recovered from the stage values without dividing by eps^2, so eps = 0 is
an ordinary input.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from . import mesh
from .errors import NewtonDivergenceError, NonFiniteStateError, SingularBandedMatrixError
from .mesh import Grid1D, Recon
from .models import RelaxProblem, RelaxState
from .tableaux import IMEXTableau, TableauClass, classify

NEWTON_TOL = 1e-12
NEWTON_MAXIT = 50
BLOWUP_FACTOR = 1e8


class Mode(enum.Enum):
    BPR = "BPR"
    PARTITIONED = "Partitioned"

    @classmethod
    def parse(cls, name) -> "Mode":
        if isinstance(name, cls):
            return name
        for m in cls:
            if m.value.lower() == str(name).lower():
                return m
        raise ValueError(f"unknown mode {name!r}")


@dataclass
class StepReport:
    residual: float
    newton_iterations: int
    dt: float


@dataclass
class StageWorkspace:
    U: list = field(default_factory=list)
    V: list = field(default_factory=list)
    f1: list = field(default_factory=list)
    f2: list = field(default_factory=list)
    g: list = field(default_factory=list)


class RelaxationDiscretization:
    """Spatial operators of a relaxation problem on a fixed grid.

    ``derivative`` picks the pointwise derivative used for p(u)_x
    (``"central"`` or ``"weno"``); ``split="laplacian"`` evaluates the
    explicit ``-mu p(u)_xx`` with the same Laplacian as the implicit term.
    """

    def __init__(
        self,
        prob: RelaxProblem,
        grid: Grid1D,
        recon=Recon.CDS2,
        mu: Optional[float] = None,
        alpha: float = mesh.DEFAULT_ALPHA,
        derivative: str = "central",
        split: str = "flux",
        laplacian_order: Optional[int] = None,
    ):
        if grid.bc is not prob.bc:
            grid = grid.with_bc(prob.bc)
        self.prob = prob
        self.grid = grid
        self.recon = Recon.parse(recon)
        self.mu = mesh.mu_of_eps(prob.eps, grid.dx) if mu is None else float(mu)
        self.alpha = alpha
        self.derivative = derivative
        if split not in ("flux", "laplacian"):
            raise ValueError("split must be 'flux' or 'laplacian'")
        self.split = split
        self.lap_order = laplacian_order or self.recon.central_order
        self.L = mesh.laplacian_matrix(grid, self.lap_order, parity=1)
        self._lu_cache: dict = {}

    # -- pointwise pieces -------------------------------------------------
    def D(self, w):
        return mesh.first_derivative(w, self.recon, self.grid, parity=1, kind=self.derivative)

    def Dp(self, u):
        return self.D(self.prob.p(u))

    def G(self, u):
        """Equilibrium v for the discrete derivative."""
        return self.prob.equilibrium_v(u, self.Dp(u))

    def g(self, u, v):
        return self.prob.g(u, v, self.Dp(u))

    def div(self, F, u):
        return mesh.weno_flux_divergence(F, u, self.alpha, self.recon, self.grid, flux_parity=-1, state_parity=1)

    def f1(self, u, v):
        if self.split == "laplacian":
            return -self.div(v, u) - self.mu * (self.L @ self.prob.p(u))
        return -self.div(v + self.mu * self.Dp(u), u)

    def f2(self, u):
        return self.mu * (self.L @ self.prob.p(u))

    def f1_limit(self, u):
        return self.f1(u, self.G(u))

    # -- staggered pieces for the partitioned scheme ----------------------
    def _staggered(self) -> bool:
        return self.recon is Recon.CDS2 and self.grid.is_uniform

    def D_partitioned(self, w):
        """Derivative of p(u) inside G for the partitioned scheme (forward for Cds2)."""
        if self._staggered():
            wp = mesh.pad(w, self.grid, 1, 1)
            return (wp[2:] - wp[1:-1]) / self.grid.dx
        return self.D(w)

    def flux_partitioned(self, v, u):
        """F(V) = -V_x for the partitioned scheme (backward for Cds2)."""
        if self._staggered():
            vp = mesh.pad(v, self.grid, 1, -1)
            return -(vp[1:-1] - vp[:-2]) / self.grid.dx
        return -self.div(v, u)

    def g_partitioned(self, u, v):
        return self.prob.g(u, v, self.D_partitioned(self.prob.p(u)))

    def G_partitioned(self, u):
        return self.prob.equilibrium_v(u, self.D_partitioned(self.prob.p(u)))

    # -- implicit diffusion solve ----------------------------------------
    def solve_diffusion(self, rhs, coef: float, guess=None):
        """Solve U - coef * L p(U) = rhs; returns (U, newton iterations)."""
        if coef == 0.0:
            return rhs.copy(), 0
        prob = self.prob
        n = self.grid.n
        if prob.p_linear is not None:
            key = coef * prob.p_linear
            lu = self._lu_cache.get(key)
            if lu is None:
                mat = (sp.identity(n, format="csc") - key * self.L).tocsc()
                try:
                    lu = splu(mat)
                except RuntimeError as exc:
                    raise SingularBandedMatrixError(str(exc)) from exc
                self._lu_cache[key] = lu
            return lu.solve(rhs), 0
        U = rhs.copy() if guess is None else guess.copy()
        scale = max(1.0, float(np.max(np.abs(rhs))))
        for it in range(1, NEWTON_MAXIT + 1):
            res = U - coef * (self.L @ prob.p(U)) - rhs
            if np.max(np.abs(res)) <= NEWTON_TOL * scale:
                return U, it - 1
            jac = (sp.identity(n, format="csc") - coef * self.L @ sp.diags(prob.dp(U))).tocsc()
            try:
                delta = splu(jac).solve(res)
            except RuntimeError as exc:
                raise SingularBandedMatrixError(str(exc)) from exc
            U = U - delta
            if not np.all(np.isfinite(U)):
                break
        res = U - coef * (self.L @ prob.p(U)) - rhs
        if np.all(np.isfinite(res)) and np.max(np.abs(res)) <= NEWTON_TOL * scale:
            return U, NEWTON_MAXIT
        raise NewtonDivergenceError(f"Newton did not converge in {NEWTON_MAXIT} iterations")


def _solve_relaxation(prob: RelaxProblem, R, Q, coef: float):
    """Solve eps^2 V = R + coef * kappa (Q - V - gamma2 eps^2 V^2) for V.

    ``coef = dt * a_kk``.  Returns ``(V, g)`` with ``g`` the stage value of
    the relaxation term implied by the solve.
    """
    e2 = prob.eps * prob.eps
    k = prob.kappa * coef
    a2 = k * prob.gamma2 * e2
    b = e2 + k
    c = R + k * Q
    if a2 == 0.0:
        V = c / b
    else:
        disc = b * b + 4.0 * a2 * c
        if np.any(disc < 0):
            raise NonFiniteStateError("relaxation stage has no real root")
        V = 2.0 * c / (b + np.sqrt(disc))
    g = (e2 * V - R) / coef
    return V, g


class _Elimination:
    """Weights recovering v_{n+1} from the stage values without 1/eps^2."""

    def __init__(self, tab: IMEXTableau):
        self.kind = classify(tab)
        self.sa = tab.implicit_stiffly_accurate()
        self.tab = tab
        b, A = tab.b_im, tab.a_im
        if self.kind is TableauClass.TYPE_A:
            self.w = np.linalg.solve(A.T, b)  # b^T A^{-1}
            self.w_first = None
            self.residual = 0.0
        else:
            A_hat = A[1:, 1:]
            self.w = np.linalg.solve(A_hat.T, b[1:])
            self.residual = float(b[0] - self.w @ A[1:, 0])

    def combine(self, v_n, V, g, dt, eps):
        if self.sa:
            return V[-1].copy()
        if self.kind is TableauClass.TYPE_A:
            return v_n + sum(w * (Vk - v_n) for w, Vk in zip(self.w, V))
        out = v_n + sum(w * (Vk - v_n) for w, Vk in zip(self.w, V[1:]))
        if abs(self.residual) > 1e-14:
            if eps == 0.0:
                raise ZeroDivisionError("tableau needs b_1 = b^T A^{-1} a to reach eps = 0")
            out = out + (dt / eps**2) * self.residual * g[0]
        return out


def _check_finite(*arrays):
    for a in arrays:
        if not np.all(np.isfinite(a)):
            raise NonFiniteStateError("state became non-finite")


def _check_dirk(tab: IMEXTableau):
    if np.any(np.triu(tab.a_im, 1) != 0.0) or np.any(np.triu(tab.a_ex) != 0.0):
        raise ValueError("tableau must be explicit/diagonally implicit")


class Stepper:
    """Reusable single-step driver holding operator caches."""

    def __init__(self, tab: IMEXTableau, disc: RelaxationDiscretization, mode=Mode.BPR):
        _check_dirk(tab)
        self.tab = tab
        self.disc = disc
        self.mode = Mode.parse(mode)
        self.elim = _Elimination(tab)
        self.last_workspace: Optional[StageWorkspace] = None

    def step(self, state: RelaxState, dt: float):
        if dt == 0.0:
            return RelaxState(state.u.copy(), state.v.copy(), state.t), StepReport(self._residual(state.u, state.v), 0, 0.0)
        if self.mode is Mode.BPR:
            u, v, its = self._step_bpr(state.u, state.v, dt)
        else:
            u, v, its = self._step_partitioned(state.u, state.v, dt)
        _check_finite(u, v)
        return RelaxState(u, v, state.t + dt), StepReport(self._residual(u, v), its, dt)

    def _residual(self, u, v):
        g = self.disc.g(u, v) if self.mode is Mode.BPR else self.disc.g_partitioned(u, v)
        return float(np.max(np.abs(g)))

    def _step_bpr(self, u_n, v_n, dt):
        tab, d, prob = self.tab, self.disc, self.disc.prob
        e2 = prob.eps**2
        ws = StageWorkspace()
        its = 0
        for k in range(tab.s):
            acc = u_n.copy()
            R = e2 * v_n
            for j in range(k):
                if tab.a_ex[k, j] != 0.0:
                    acc = acc + dt * tab.a_ex[k, j] * ws.f1[j]
                if tab.a_im[k, j] != 0.0:
                    acc = acc + dt * tab.a_im[k, j] * ws.f2[j]
                    R = R + dt * tab.a_im[k, j] * ws.g[j]
            akk = tab.a_im[k, k]
            U, it = d.solve_diffusion(acc, dt * akk * d.mu)
            its += it
            if akk != 0.0:
                V, g = _solve_relaxation(prob, R, prob.q(U) - d.Dp(U), dt * akk)
            else:
                V = v_n.copy() if k == 0 else R / e2
                g = d.g(U, V)
            ws.U.append(U)
            ws.V.append(V)
            ws.g.append(g)
            ws.f1.append(d.f1(U, V))
            ws.f2.append(d.f2(U))
        u_new = u_n.copy()
        for j in range(tab.s):
            if tab.b_ex[j] != 0.0:
                u_new = u_new + dt * tab.b_ex[j] * ws.f1[j]
            if tab.b_im[j] != 0.0:
                u_new = u_new + dt * tab.b_im[j] * ws.f2[j]
        v_new = self.elim.combine(v_n, ws.V, ws.g, dt, prob.eps)
        self.last_workspace = ws
        return u_new, v_new, its

    def _step_partitioned(self, u_n, v_n, dt):
        tab, d, prob = self.tab, self.disc, self.disc.prob
        e2 = prob.eps**2
        ws = StageWorkspace()
        for k in range(tab.s):
            U = u_n.copy()
            R = e2 * v_n
            for j in range(k):
                if tab.a_ex[k, j] != 0.0:
                    U = U + dt * tab.a_ex[k, j] * ws.f1[j]
                if tab.a_im[k, j] != 0.0:
                    R = R + dt * tab.a_im[k, j] * ws.g[j]
            akk = tab.a_im[k, k]
            if akk != 0.0:
                Q = prob.q(U) - d.D_partitioned(prob.p(U))
                V, g = _solve_relaxation(prob, R, Q, dt * akk)
            else:
                V = v_n.copy() if k == 0 else R / e2
                g = d.g_partitioned(U, V)
            ws.U.append(U)
            ws.V.append(V)
            ws.g.append(g)
            ws.f1.append(d.flux_partitioned(V, U))
        u_new = u_n.copy()
        for j in range(tab.s):
            if tab.b_ex[j] != 0.0:
                u_new = u_new + dt * tab.b_ex[j] * ws.f1[j]
        v_new = self.elim.combine(v_n, ws.V, ws.g, dt, prob.eps)
        self.last_workspace = ws
        return u_new, v_new, 0


def step_bpr(state, tab, prob, dt, grid, recon=Recon.CDS2, **disc_options):
    stepper = Stepper(tab, RelaxationDiscretization(prob, grid, recon, **disc_options), Mode.BPR)
    return stepper.step(state, dt)


def step_partitioned(state, tab, prob, dt, grid, recon=Recon.CDS2, **disc_options):
    stepper = Stepper(tab, RelaxationDiscretization(prob, grid, recon, **disc_options), Mode.PARTITIONED)
    return stepper.step(state, dt)


def limit_step(u, tab: IMEXTableau, disc: RelaxationDiscretization, dt: float):
    """One step of the IMEX scheme on u' = f1(u, G(u)) + f2(u), the eps = 0 limit."""
    f1, f2 = [], []
    for k in range(tab.s):
        acc = u.copy()
        for j in range(k):
            acc = acc + dt * tab.a_ex[k, j] * f1[j] + dt * tab.a_im[k, j] * f2[j]
        U, _ = disc.solve_diffusion(acc, dt * tab.a_im[k, k] * disc.mu)
        f1.append(disc.f1_limit(U))
        f2.append(disc.f2(U))
    out = u.copy()
    for j in range(tab.s):
        out = out + dt * tab.b_ex[j] * f1[j] + dt * tab.b_im[j] * f2[j]
    return out


@dataclass
class Trajectory:
    states: list
    reports: list
    grid: Grid1D

    @property
    def final(self) -> RelaxState:
        return self.states[-1]

    def at(self, t: float) -> RelaxState:
        for s in self.states:
            if math.isclose(s.t, t, rel_tol=0, abs_tol=1e-12):
                return s
        raise KeyError(t)


def time_levels(t_end: float, dt: float) -> list:
    """Step sizes of constant ``dt`` with the last one truncated to land on t_end."""
    if t_end <= 0.0:
        return []
    n = max(1, math.ceil(t_end / dt - 1e-9))
    steps = [dt] * (n - 1)
    steps.append(t_end - (n - 1) * dt)
    if steps[-1] <= 0.0:  # pragma: no cover - guarded by the ceil tolerance
        steps.pop()
    return steps


def integrate(
    prob: RelaxProblem,
    tab: IMEXTableau,
    grid: Grid1D,
    recon=Recon.CDS2,
    t_end: float = 1.0,
    cfl: float = 0.5,
    mode=Mode.BPR,
    dt: Optional[float] = None,
    initial: Optional[RelaxState] = None,
    snapshots: Sequence[float] = (),
    blowup_factor: float = BLOWUP_FACTOR,
    max_steps: Optional[int] = None,
    **disc_options,
) -> Trajectory:
    """March from ``initial`` (default: the problem data) to ``t_end``.

    ``dt = cfl * dx`` unless given.  Snapshot times are hit exactly by
    shortening the step that would overshoot them.  A state exceeding
    ``blowup_factor * (max|initial| + 1)`` raises ``NonFiniteStateError``.
    """
    disc = RelaxationDiscretization(prob, grid, recon, **disc_options)
    stepper = Stepper(tab, disc, mode)
    state = initial if initial is not None else prob.initial_state(disc.grid)
    step = cfl * disc.grid.dx if dt is None else dt
    bound = blowup_factor * (max(np.max(np.abs(state.u)), np.max(np.abs(state.v))) + 1.0)
    marks = sorted({float(t) for t in snapshots if 0.0 < t < t_end} | ({float(t_end)} if t_end > 0.0 else set()))
    states = [state] if 0.0 in snapshots or t_end <= 0.0 else []
    reports = []
    t0 = state.t
    n_steps = 0
    for mark in marks:
        for h in time_levels(mark - (state.t - t0), step):
            state, rep = stepper.step(state, h)
            reports.append(rep)
            n_steps += 1
            if np.max(np.abs(state.u)) > bound or np.max(np.abs(state.v)) > bound:
                raise NonFiniteStateError(f"blow-up detected at step {n_steps} (t = {state.t:.6g})")
            if max_steps is not None and n_steps >= max_steps:
                return Trajectory(states + [state], reports, disc.grid)
        state = RelaxState(state.u, state.v, t0 + mark)
        states.append(state)
    if not states:
        states.append(state)
    return Trajectory(states, reports, disc.grid)
