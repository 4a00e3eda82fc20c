"""Relaxation problems of the form

    u_t + v_x = 0,
    eps^2 v_t = kappa [q(u) - p(u)_x - v - gamma2 eps^2 v^2]

together with their limit and reference solutions.

The affine problems have ``kappa = 1`` and ``gamma2 = 0``.  The Ruijgrok-Wu
model fits the same template with ``p = u/(2 k0)``, ``q = C u^2 / 2``,
``kappa = 2 k0`` and ``gamma2 = C/2``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np
from scipy.linalg import expm
from scipy.special import erfc

from .mesh import BC, Grid1D

Array = np.ndarray


@dataclass(frozen=True)
class RelaxState:
    u: Array
    v: Array
    t: float = 0.0

    def __post_init__(self):
        if np.shape(self.u) != np.shape(self.v):
            raise ValueError("u and v must live on the same grid")


@dataclass(frozen=True)
class RelaxProblem:
    name: str
    eps: float
    domain: tuple
    bc: BC
    p: Callable[[Array], Array]
    dp: Callable[[Array], Array]
    q: Callable[[Array], Array]
    dq: Callable[[Array], Array]
    u0: Callable[[Array], Array]
    v0: Callable[[Array, float], Array]  # v0(x, eps)
    kappa: float = 1.0
    gamma2: float = 0.0
    p_linear: Optional[float] = None  # c when p(u) = c u
    well_prepared: bool = True
    params: dict = field(default_factory=dict)

    def with_eps(self, eps: float) -> "RelaxProblem":
        if eps < 0:
            raise ValueError("eps must be non-negative")
        return replace(self, eps=float(eps))

    def grid(self, n: int) -> Grid1D:
        return Grid1D.uniform(self.domain[0], self.domain[1], n, self.bc)

    def initial_state(self, grid: Grid1D) -> RelaxState:
        x = grid.x
        return RelaxState(np.asarray(self.u0(x), dtype=float), np.asarray(self.v0(x, self.eps), dtype=float), 0.0)

    def g(self, u, v, dpu):
        """Relaxation term with the pointwise derivative ``dpu`` of p(u) supplied."""
        eps2 = self.eps * self.eps
        return self.kappa * (self.q(u) - dpu - v - self.gamma2 * eps2 * v * v)

    def equilibrium_v(self, u, dpu):
        """Root of g(u, v) = 0 that stays bounded as eps -> 0."""
        c = self.q(u) - dpu
        a2 = self.gamma2 * self.eps**2
        if a2 == 0.0:
            return c
        disc = 1.0 + 4.0 * a2 * c
        return 2.0 * c / (1.0 + np.sqrt(disc))

    def equilibrium_slope(self, u):
        """Derivative of the equilibrium v with respect to u for constant states."""
        a2 = self.gamma2 * self.eps**2
        qu, dqu = self.q(u), self.dq(u)
        if a2 == 0.0:
            return dqu
        return dqu / np.sqrt(1.0 + 4.0 * a2 * qu)

    def subcharacteristic_margin(self, u) -> Array:
        """kappa p'(u)/eps^2 - (dv_eq/du)^2; positive where the condition holds."""
        if self.eps == 0.0:
            return np.full(np.shape(u), np.inf)
        return self.kappa * self.dp(u) / self.eps**2 - self.equilibrium_slope(u) ** 2


DEFAULT_EPS = 1e-3  # eps^2 = 1e-6


def _const(c):
    return lambda u: np.full(np.shape(u), float(c))


def make_linear_diffusion(eps: float = DEFAULT_EPS) -> RelaxProblem:
    """p(u) = u, q = 0 on a periodic [0, 2 pi] with u0 = cos x, v0 = sin x."""
    return RelaxProblem(
        name="linear_diffusion",
        eps=eps,
        domain=(0.0, 2.0 * math.pi),
        bc=BC.PERIODIC,
        p=lambda u: u,
        dp=_const(1.0),
        q=lambda u: 0.0 * u,
        dq=_const(0.0),
        u0=np.cos,
        v0=lambda x, eps: np.sin(x),
        p_linear=1.0,
    )


def linear_diffusion_exact(x, t):
    """Solution cos(x) exp(-t) of the limit heat equation."""
    return np.cos(x) * math.exp(-t)


ADVECTION_SIGMA = 0.05


def make_advection_diffusion(eps: float = DEFAULT_EPS, sigma: float = ADVECTION_SIGMA) -> RelaxProblem:
    """p(u) = q(u) = u with the periodic bump data; v0 uses mu = 1."""

    def u0(x):
        return np.exp(-(1.0 + np.cos(x - math.pi)) / sigma)

    def v0(x, eps):
        return u0(x) * (1.0 - np.sin(x - math.pi) / sigma)

    return RelaxProblem(
        name="advection_diffusion",
        eps=eps,
        domain=(0.0, 2.0 * math.pi),
        bc=BC.PERIODIC,
        p=lambda u: u,
        dp=_const(1.0),
        q=lambda u: u,
        dq=_const(1.0),
        u0=u0,
        v0=v0,
        p_linear=1.0,
        params={"sigma": sigma},
    )


def make_riemann_heat(eps: float = DEFAULT_EPS, u_left: float = 2.0, u_right: float = 1.0) -> RelaxProblem:
    def u0(x):
        return np.where(x < 0.0, u_left, u_right)

    return RelaxProblem(
        name="riemann_heat",
        eps=eps,
        domain=(-1.0, 1.0),
        bc=BC.REFLECTING,
        p=lambda u: u,
        dp=_const(1.0),
        q=lambda u: 0.0 * u,
        dq=_const(0.0),
        u0=u0,
        v0=lambda x, eps: np.zeros_like(x),
        p_linear=1.0,
        well_prepared=False,
        params={"u_left": u_left, "u_right": u_right},
    )


def riemann_heat_free_space(x, t, u_left: float = 2.0, u_right: float = 1.0):
    """Heat-equation solution of the step on the whole line."""
    x = np.asarray(x, dtype=float)
    if t == 0.0:
        return np.where(x < 0.0, u_left, u_right)
    return u_right + 0.5 * (u_left - u_right) * erfc(x / (2.0 * math.sqrt(t)))


def ruijgrok_wu_v0(u, eps: float, C: float):
    """Bounded root of (C/2) eps^2 v^2 + v - C u^2 / 2 = 0 (well conditioned)."""
    u = np.asarray(u, dtype=float)
    return C * u * u / (1.0 + np.sqrt(1.0 + (C * eps * u) ** 2))


def make_ruijgrok_wu(
    k0: float = 1.0, C: float = 1.0, eps: float = DEFAULT_EPS, u_left: float = 2.0, u_right: float = 1.0
) -> RelaxProblem:
    if k0 <= 0:
        raise ValueError("k0 must be positive")

    def u0(x):
        return np.where(x < 0.0, u_left, u_right)

    return RelaxProblem(
        name="ruijgrok_wu",
        eps=eps,
        domain=(-10.0, 10.0),
        bc=BC.EXTRAPOLATE,
        p=lambda u: u / (2.0 * k0),
        dp=_const(1.0 / (2.0 * k0)),
        q=lambda u: 0.5 * C * u * u,
        dq=lambda u: C * u,
        u0=u0,
        v0=lambda x, eps: ruijgrok_wu_v0(u0(x), eps, C),
        kappa=2.0 * k0,
        gamma2=0.5 * C,
        p_linear=1.0 / (2.0 * k0),
        well_prepared=False,
        params={"k0": k0, "C": C, "u_left": u_left, "u_right": u_right},
    )


def burgers_traveling_wave(x, t, k0: float = 1.0, u_left: float = 2.0, u_right: float = 1.0, shift: float = 0.0):
    """Viscous Burgers (viscosity 1/(2 k0)) shock profile joining u_left to u_right."""
    s = 0.5 * (u_left + u_right)
    amp = 0.5 * (u_left - u_right)
    return s - amp * np.tanh(amp * k0 * (np.asarray(x) - s * t - shift))


def burgers_cole_hopf(x, t, k0: float = 1.0, u_left: float = 2.0, u_right: float = 1.0):
    """Exact viscous Burgers solution from step data, via the Cole-Hopf transform."""
    nu = 1.0 / (2.0 * k0)
    x = np.asarray(x, dtype=float)
    if t == 0.0:
        return np.where(x < 0.0, u_left, u_right)
    r = 2.0 * math.sqrt(nu * t)
    # log of the two half-line contributions to the heat solution
    log_a = (-u_left * x + 0.5 * u_left**2 * t) / (2 * nu) + _log_half_erfc((x - u_left * t) / r)
    log_b = (-u_right * x + 0.5 * u_right**2 * t) / (2 * nu) + _log_half_erfc(-(x - u_right * t) / r)
    w = 1.0 / (1.0 + np.exp(log_b - log_a))
    return u_left * w + u_right * (1.0 - w)


def _log_half_erfc(z):
    from scipy.special import log_ndtr

    return log_ndtr(-np.sqrt(2.0) * np.asarray(z))


# ----------------------------------------------------- Fourier reference


class DegenerateEigenpairError(ArithmeticError):
    pass


def _mode_propagator(k: int, t: float, eps: float, pc: float, qc: float) -> np.ndarray:
    """exp(t M_k) for U' = -ik V, eps^2 V' = -ik pc U + qc U - V."""
    if eps == 0.0:
        lam = -1j * k * (qc - 1j * k * pc)
        # V follows the limit relation; return the map acting on (U, V) from U only
        return np.array([[np.exp(lam * t), 0.0], [(qc - 1j * k * pc) * np.exp(lam * t), 0.0]])
    e2 = eps * eps
    m = np.array([[0.0, -1j * k], [(qc - 1j * k * pc) / e2, -1.0 / e2]], dtype=complex)
    try:
        w, vecs = np.linalg.eig(m)
        cond = np.linalg.cond(vecs)
        if not np.isfinite(cond) or cond > 1e8:
            raise DegenerateEigenpairError(k)
        return (vecs * np.exp(w * t)) @ np.linalg.inv(vecs)
    except (DegenerateEigenpairError, np.linalg.LinAlgError):
        return expm(m * t)


def fourier_reference(prob: RelaxProblem, x, t: float, modes: int = 256):
    """Truncated Fourier solution of a linear periodic problem at the points ``x``.

    The initial data are sampled on ``2*modes`` equispaced points and
    transformed with the FFT; each mode then evolves through the exact 2x2
    exponential.  Returns ``(u, v)`` evaluated at ``x``.
    """
    if prob.bc is not BC.PERIODIC or prob.p_linear is None or prob.gamma2 != 0.0:
        raise ValueError("Fourier reference needs a linear periodic problem")
    a, b = prob.domain
    length = b - a
    m = 2 * modes
    xs = a + length * np.arange(m) / m
    qc = float(prob.q(np.array(1.0)) - prob.q(np.array(0.0)))
    pc = prob.p_linear
    uh = np.fft.fft(prob.u0(xs)) / m
    vh = np.fft.fft(prob.v0(xs, prob.eps)) / m
    ks = np.fft.fftfreq(m, d=1.0 / m).astype(int)
    scale = 2.0 * math.pi / length
    u_t = np.empty(m, dtype=complex)
    v_t = np.empty(m, dtype=complex)
    for idx, k in enumerate(ks):
        prop = _mode_propagator(int(k) * scale, t, prob.eps, pc, qc)
        u_t[idx], v_t[idx] = prop @ np.array([uh[idx], vh[idx]])
    x = np.asarray(x, dtype=float)
    phase = np.exp(1j * scale * np.outer(x - a, ks))
    # drop the unpaired Nyquist mode so the series is real
    nyq = ks == -modes
    u_t[nyq] = 0.0
    v_t[nyq] = 0.0
    return (phase @ u_t).real, (phase @ v_t).real


PROBLEMS = {
    "linear_diffusion": make_linear_diffusion,
    "advection_diffusion": make_advection_diffusion,
    "riemann_heat": make_riemann_heat,
    "ruijgrok_wu": make_ruijgrok_wu,
}


def make_problem(name: str, **overrides) -> RelaxProblem:
    try:
        factory = PROBLEMS[name]
    except KeyError:
        raise KeyError(f"unknown problem {name!r}; known: {', '.join(PROBLEMS)}") from None
    return factory(**overrides)
