"""Tests for the Fourier stability analysis of the first-order IMEX scheme."""
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from apimex.errors import ZeroDenominatorError
from apimex.integrators import Mode, RelaxationDiscretization, Stepper, integrate
from apimex.mesh import Recon
from apimex.models import RelaxState, make_linear_diffusion
from apimex.stability import (
    UNBOUNDED,
    ModeParams,
    amplification_matrix,
    amplification_matrix_symbols,
    discriminant_bound_holds,
    eigenvalues,
    empirical_blowup_threshold,
    max_stable_dt,
    single_mode_growth,
    spectral_radius,
    spectral_radius_threshold,
    t_roots,
)
from apimex.tableaux import builtin


def random_params(rng, n):
    for _ in range(n):
        yield ModeParams(
            eps=rng.uniform(0.0, 2.0),
            xi=rng.uniform(0.05, 20.0),
            dt=10.0 ** rng.uniform(-4, 2),
            mu=rng.uniform(0.0, 1.0),
        )


# ------------------------------------------------------ eigen-structure


def test_closed_form_eigenvalues_match_direct_solve():
    rng = np.random.default_rng(2024)
    worst = 0.0
    for p in random_params(rng, 10_000):
        direct = np.sort_complex(np.linalg.eigvals(amplification_matrix(p)).astype(complex))
        closed = np.sort_complex(np.array(eigenvalues(p)))
        scale = max(1.0, float(np.max(np.abs(direct))))
        worst = max(worst, float(np.max(np.abs(direct - closed))) / scale)
    assert worst <= 1e-12


def test_eigenvalue_product_is_alpha():
    rng = np.random.default_rng(99)
    for p in random_params(rng, 10_000):
        lp, lm = eigenvalues(p)
        assert abs(lp * lm - p.alpha) <= 1e-12 * max(1.0, abs(lp), abs(lm))


def test_matrix_trace_and_determinant():
    p = ModeParams(eps=0.3, xi=2.0, dt=0.1, mu=0.4)
    M = amplification_matrix(p)
    a, b = p.alpha, p.beta
    assert np.trace(M) == pytest.approx(1.0 + a * (1.0 + b) - b, abs=1e-14)
    assert np.linalg.det(M) == pytest.approx(a, abs=1e-14)


def test_zero_wavenumber_matrix():
    eps, dt = 0.5, 0.2
    M = amplification_matrix(ModeParams(eps, 0.0, dt, 0.7))
    d = eps**2 + dt
    np.testing.assert_allclose(M, [[1.0, 0.0], [-dt / d, eps**2 / d]], atol=1e-15)


def test_eps_zero_eigenvalues():
    p = ModeParams(eps=0.0, xi=3.0, dt=0.05, mu=1.0)
    lam = sorted(eigenvalues(p), key=abs)
    assert lam[0] == pytest.approx(0.0, abs=1e-15)
    assert lam[1] == pytest.approx(1.0 - p.beta, abs=1e-15)


def test_large_eps_limit():
    # eps -> infinity freezes w, and u obeys an implicit diffusion step
    xi, dt, mu = 1.5, 0.3, 0.2
    M = amplification_matrix(ModeParams(1e8, xi, dt, mu))
    d1 = 1.0 + dt * mu * xi**2
    np.testing.assert_allclose(M, [[1.0, dt * xi**2 / d1], [0.0, 1.0]], atol=1e-12)


def test_vanishing_denominator():
    with pytest.raises(ZeroDenominatorError):
        amplification_matrix_symbols(0.0, 0.0, 1.0, 1.0, 1.0)


def test_mode_params_reject_nonfinite():
    with pytest.raises(ValueError):
        ModeParams(math.nan, 1.0, 0.1)


def test_symbols_match_stepper_on_fourier_modes():
    """The matrix with discrete symbols is the Euler IMEX stepper mode by mode."""
    eps, n = 0.4, 32
    prob = make_linear_diffusion(eps=eps)
    grid = prob.grid(n)
    dt = 0.5 * grid.dx
    disc = RelaxationDiscretization(prob, grid, Recon.CDS2)
    stepper = Stepper(builtin("EULER_IMEX"), disc, Mode.BPR)
    for k in (1, 3, 7):
        theta = 2.0 * math.pi * k / n
        s = math.sin(theta) / grid.dx
        l2 = (2.0 - 2.0 * math.cos(theta)) / grid.dx**2
        M = amplification_matrix_symbols(eps, dt, disc.mu, s * s, l2)
        # u = cos(kx), w = a cos(kx)  <=>  v = -s a sin(kx)
        a = 0.7
        x = 2.0 * math.pi * k * np.arange(n) / n
        state = RelaxState(np.cos(x), -s * a * np.sin(x))
        out, _ = stepper.step(state, dt)
        u_new, w_new = M @ np.array([1.0, a])
        np.testing.assert_allclose(out.u, u_new * np.cos(x), atol=1e-12)
        np.testing.assert_allclose(out.v, -s * w_new * np.sin(x), atol=1e-12)


# ---------------------------------------------------------- printed bound


def test_max_stable_dt_example():
    assert max_stable_dt(0.1, 1.0, 1.0) == pytest.approx(24.0, rel=1e-14)


def test_max_stable_dt_edge_cases():
    assert max_stable_dt(0.5, 1.0) == 0.0
    assert max_stable_dt(0.6, -1.0) == 0.0
    assert max_stable_dt(0.0, 5.0) == UNBOUNDED
    with pytest.raises(ValueError):
        max_stable_dt(0.1, 0.0)


@settings(max_examples=200, deadline=None)
@given(
    eps=st.floats(1e-3, 1.0),
    xi=st.floats(0.1, 10.0),
    mu=st.floats(0.0, 0.95),
)
def test_rationalized_root_matches_printed_form(eps, xi, mu):
    if 2 * eps * xi >= 0.99:
        return
    t_minus, t_plus = t_roots(eps, xi, mu)
    assert max_stable_dt(eps, xi, mu) == pytest.approx(t_minus, rel=1e-8, abs=1e-12)
    assert t_plus >= t_minus


def test_t_roots_reject_mu_one():
    with pytest.raises(ZeroDenominatorError):
        t_roots(0.1, 1.0, 1.0)


def test_bound_increases_with_mu():
    rng = np.random.default_rng(5)
    for _ in range(500):
        eps, xi = rng.uniform(0, 1), rng.uniform(0.1, 5)
        if 2 * eps * xi >= 1:
            continue
        bounds = [max_stable_dt(eps, xi, m) for m in np.linspace(0, 1, 11)]
        assert np.all(np.diff(bounds) >= 0)


@pytest.mark.parametrize("eps, xi, mu", [(0.1, 1.0, 0.0), (0.2, 2.0, 0.3), (0.05, 3.0, 0.0), (0.1, 1.0, 1.0)])
def test_bound_is_where_the_discriminant_changes_sign(eps, xi, mu):
    T = max_stable_dt(eps, xi, mu)
    assert discriminant_bound_holds(ModeParams(eps, xi, 0.99 * T, mu))
    assert not discriminant_bound_holds(ModeParams(eps, xi, 1.01 * T, mu))


@settings(max_examples=300, deadline=None)
@given(
    eps=st.floats(1e-3, 1.0),
    xi=st.floats(0.1, 10.0),
    mu=st.floats(0.0, 1.0),
    frac=st.floats(1e-3, 0.999),
)
def test_bound_is_sufficient(eps, xi, mu, frac):
    T = max_stable_dt(eps, xi, mu)
    if not (0 < T < math.inf):
        return
    assert spectral_radius(ModeParams(eps, xi, frac * T, mu)) <= 1.0 + 1e-12


def test_spectral_threshold_exceeds_bound():
    for eps, xi, mu in [(0.1, 1.0, 0.0), (0.2, 2.0, 0.3), (0.05, 3.0, 0.0)]:
        assert spectral_radius_threshold(eps, xi, mu) >= max_stable_dt(eps, xi, mu)


# ------------------------------------------------------ measured thresholds


def test_empirical_threshold_matches_spectral_radius():
    for eps, xi, mu in [(0.1, 2.0, 0.0), (0.05, 3.0, 0.0)]:
        measured = empirical_blowup_threshold(eps, xi, mu)
        predicted = spectral_radius_threshold(eps, xi, mu)
        assert measured == pytest.approx(predicted, rel=1e-2)


def test_growth_below_and_above_threshold():
    eps, xi, mu = 0.1, 2.0, 0.0
    thr = spectral_radius_threshold(eps, xi, mu)
    assert single_mode_growth(eps, xi, 0.9 * thr, mu) <= 1.0
    assert single_mode_growth(eps, xi, 1.2 * thr, mu) > 1.0


@pytest.mark.xfail(strict=True, reason="the printed bound is a sufficient condition, not the blow-up threshold")
@pytest.mark.parametrize("eps, xi, mu", [(0.1, 2.0, 0.0), (0.1, 1.0, 1.0)])
def test_empirical_threshold_matches_printed_bound(eps, xi, mu):
    measured = empirical_blowup_threshold(eps, xi, mu)
    assert measured == pytest.approx(max_stable_dt(eps, xi, mu), rel=0.02)


def test_limit_scheme_has_no_step_restriction():
    n = 64
    dx = 2.0 * math.pi / n
    dt = 1e6 * dx**2
    assert single_mode_growth(0.0, 3.0, dt, 1.0, cells=n) <= 1.0
    prob = make_linear_diffusion(eps=0.0)
    grid = prob.grid(n)
    rng = np.random.default_rng(0)
    init = RelaxState(rng.standard_normal(n), rng.standard_normal(n))
    tr = integrate(prob, builtin("EULER_IMEX"), grid, t_end=20 * dt, dt=dt, initial=init)
    assert np.max(np.abs(tr.final.u)) <= np.max(np.abs(init.u))
