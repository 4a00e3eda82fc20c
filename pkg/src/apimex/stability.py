"""Fourier-mode stability of the first-order IMEX (explicit/implicit Euler) scheme.

For the linear problem p(u) = u, q = 0 a single mode exp(i xi x) evolves
under a 2x2 amplification matrix acting on (u_hat, w_hat) with
w_hat = -i v_hat / xi.  This module evaluates that matrix, its eigenvalues
and the printed time-step bound, and measures the actual blow-up threshold
of the time stepper for comparison.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import NonFiniteStateError, ZeroDenominatorError

UNBOUNDED = math.inf


@dataclass(frozen=True)
class ModeParams:
    eps: float
    xi: float
    dt: float
    mu: float = 1.0

    def __post_init__(self):
        for name in ("eps", "xi", "dt", "mu"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")

    @property
    def alpha(self) -> float:
        return self.eps**2 / (self.eps**2 + self.dt)

    @property
    def beta(self) -> float:
        x2dt = self.dt * self.xi**2
        return x2dt / (1.0 + self.mu * x2dt)


def amplification_matrix(p: ModeParams) -> np.ndarray:
    return amplification_matrix_symbols(p.eps, p.dt, p.mu, p.xi**2, p.xi**2)


def amplification_matrix_symbols(eps: float, dt: float, mu: float, s2: float, l2: float) -> np.ndarray:
    """Amplification matrix with separate symbols for the two second-derivative terms.

    ``s2`` replaces xi^2 where it comes from two first derivatives (the
    explicit flux and the w change of variable) and ``l2`` where it comes
    from the implicit Laplacian.  With ``s2 = l2 = xi^2`` this is the
    continuous-in-space matrix.
    """
    e2 = eps * eps
    d1 = 1.0 + dt * l2 * mu
    d2 = e2 + dt
    if d1 == 0.0 or d2 == 0.0:
        raise ZeroDenominatorError("amplification matrix has a vanishing denominator")
    # u_new = [(1 + dt mu s2) u + dt s2 w] / d1,  (e2 + dt) w_new = e2 w - dt u_new
    r11 = (1.0 + dt * mu * s2) / d1
    r12 = dt * s2 / d1
    return np.array(
        [
            [r11, r12],
            [-dt * r11 / d2, (e2 - dt * r12) / d2],
        ]
    )


def eigenvalues(p: ModeParams) -> tuple[complex, complex]:
    """Closed-form eigenvalues from the trace 1 + alpha(1+beta) - beta and determinant alpha."""
    a, b = p.alpha, p.beta
    tr = 1.0 + a * (1.0 + b) - b
    # tr^2 - 4 alpha factored as (1+beta)^2 (1-alpha) (r^2 - alpha), r = (1-beta)/(1+beta),
    # which avoids the cancellation of the expanded form near a double root
    r = (1.0 - b) / (1.0 + b)
    one_minus_a = p.dt / (p.eps**2 + p.dt)
    disc = (1.0 + b) ** 2 * one_minus_a * (r - math.sqrt(a)) * (r + math.sqrt(a))
    if disc < 0.0:
        im = 0.5 * math.sqrt(-disc)
        return complex(0.5 * tr, im), complex(0.5 * tr, -im)
    # real pair: take the large root without cancellation and the other from the product
    big = 0.5 * (tr + math.copysign(math.sqrt(disc), tr))
    if big == 0.0:
        return 0j, 0j
    small = a / big
    return (complex(big), complex(small)) if tr >= 0.0 else (complex(small), complex(big))


def spectral_radius(p: ModeParams) -> float:
    return float(max(abs(z) for z in eigenvalues(p)))


def max_stable_dt(eps: float, xi: float, mu: float = 1.0) -> float:
    """Printed time-step bound: the smaller positive root T_- of the cubic.

    Returns ``UNBOUNDED`` for eps = 0 and 0 when 2 eps |xi| >= 1.  The root
    is evaluated in the rationalised form
    T_- = (1 - 4 eps^2 xi^2) / (xi^2 [2 eps^2 xi^2 mu - mu + 1 + 2 eps |xi| sqrt(eps^2 xi^2 mu^2 - mu + 1)]),
    which equals the printed closed form for mu < 1 and its mu -> 1 limit
    xi^2 dt < (1 - 4 xi^2 eps^2)/(4 eps^2 xi^2) without the 0/0.
    """
    if xi == 0.0:
        raise ValueError("xi must be nonzero")
    if eps == 0.0:
        return UNBOUNDED
    ax = abs(xi)
    if 2.0 * eps * ax >= 1.0:
        return 0.0
    e2x2 = eps * eps * xi * xi
    root = math.sqrt(e2x2 * mu * mu - mu + 1.0)
    denom = xi * xi * (2.0 * e2x2 * mu - mu + 1.0 + 2.0 * eps * ax * root)
    return (1.0 - 4.0 * e2x2) / denom


def t_roots(eps: float, xi: float, mu: float) -> tuple[float, float]:
    """(T_-, T_+) of the cubic as printed; requires mu != 1."""
    if mu == 1.0:
        raise ZeroDenominatorError("T_+ is unbounded at mu = 1")
    e2x2 = eps * eps * xi * xi
    base = 2.0 * e2x2 * mu - mu + 1.0
    spread = 2.0 * eps * abs(xi) * math.sqrt(e2x2 * mu * mu - mu + 1.0)
    scale = (mu - 1.0) ** 2 * xi * xi
    return (base - spread) / scale, (base + spread) / scale


def discriminant_bound_holds(p: ModeParams) -> bool:
    """alpha < ((1 - beta)/(1 + beta))^2, the printed stability inequality."""
    b = p.beta
    return p.alpha < ((1.0 - b) / (1.0 + b)) ** 2


def spectral_radius_threshold(eps: float, xi: float, mu: float, dt_max: float = 1e8, rtol: float = 1e-10) -> float:
    """Smallest dt with rho(R) > 1, by scanning then bisection; UNBOUNDED if none up to ``dt_max``."""
    unstable = lambda dt: spectral_radius(ModeParams(eps, xi, dt, mu)) > 1.0 + 1e-12  # noqa: E731
    grid = np.geomspace(1e-8, dt_max, 400)
    hi = next((dt for dt in grid if unstable(dt)), None)
    if hi is None:
        return UNBOUNDED
    lo = grid[np.searchsorted(grid, hi) - 1] if hi > grid[0] else 0.0
    while hi - lo > rtol * hi:
        mid = 0.5 * (lo + hi)
        if unstable(mid):
            hi = mid
        else:
            lo = mid
    return hi


# ------------------------------------------------------- empirical threshold


def single_mode_growth(
    eps: float, xi: float, dt: float, mu: float = 1.0, cells: int = 128, steps: int = 400
) -> float:
    """Per-step growth factor of the IMEX-Euler time stepper on one Fourier mode.

    Runs the BPR stepper with the EULER_IMEX tableau on a periodic grid
    holding exactly one wavelength, projecting the state back onto the mode
    after every step so round-off cannot seed other modes.
    """
    from .integrators import RelaxationDiscretization, Stepper, Mode
    from .mesh import Grid1D, Recon
    from .models import RelaxState, make_linear_diffusion
    from .tableaux import builtin

    length = 2.0 * math.pi / abs(xi)
    grid = Grid1D.uniform(0.0, length, cells)
    prob = make_linear_diffusion(eps)
    disc = RelaxationDiscretization(prob, grid, Recon.CDS2, mu=mu)
    stepper = Stepper(builtin("EULER_IMEX"), disc, Mode.BPR)
    basis_c = np.cos(abs(xi) * grid.x)
    basis_s = np.sin(abs(xi) * grid.x)
    nrm = basis_c @ basis_c

    def project(w):
        return (w @ basis_c) / nrm * basis_c + (w @ basis_s) / nrm * basis_s

    rng = np.random.default_rng(12345)
    cu, su, cv, sv = rng.standard_normal(4)
    state = RelaxState(cu * basis_c + su * basis_s, cv * basis_c + sv * basis_s)

    def size(s):
        return math.sqrt(float(s.u @ s.u + s.v @ s.v))

    log_growth = 0.0
    warm = steps // 4
    for k in range(steps):
        try:
            state, _ = stepper.step(state, dt)
        except NonFiniteStateError:
            return math.inf
        state = RelaxState(project(state.u), project(state.v), state.t)
        s = size(state)
        if s == 0.0:
            return 0.0
        if k == warm - 1:
            log_growth = -math.log(s)
        state = RelaxState(state.u / s, state.v / s, state.t)
        if k >= warm:
            log_growth += math.log(s)
    # growth per step measured after a warm-up that lets the dominant eigenvector take over
    return math.exp(log_growth / (steps - warm)) if steps > warm else 1.0


def empirical_blowup_threshold(
    eps: float,
    xi: float,
    mu: float = 1.0,
    dt_hi: Optional[float] = None,
    rtol: float = 1e-3,
    growth_tol: float = 1e-6,
    **kw,
) -> float:
    """Smallest dt at which the stepper amplifies a single mode; UNBOUNDED if none up to ``dt_hi``."""
    guess = max_stable_dt(eps, xi, mu)
    if dt_hi is None:
        dt_hi = 1e3 * (guess if math.isfinite(guess) and guess > 0 else 1.0 / xi**2)
    unstable = lambda dt: single_mode_growth(eps, xi, dt, mu, **kw) > 1.0 + growth_tol  # noqa: E731
    if not unstable(dt_hi):
        return UNBOUNDED
    lo, hi = 0.0, dt_hi
    while hi - lo > rtol * hi:
        mid = 0.5 * (lo + hi)
        if unstable(mid):
            hi = mid
        else:
            lo = mid
    return hi
