"""Tests for the even-odd transport solver and its diffusion limit."""
import math

import numpy as np
import pytest
import scipy.sparse as sp
from scipy.sparse.linalg import spsolve

from apimex.errors import NonFiniteStateError
from apimex.mesh import BC, Grid1D
from apimex.tableaux import builtin
from apimex.transport import (
    JG,
    RG,
    AngularGrid,
    Material,
    TransportProblem,
    TransportSolver,
    TransportState,
    apply_boundary_conditions,
    diffusion_limit_reference,
    even_odd_decompose,
    even_odd_reconstruct,
    make_problem_I,
    make_problem_II,
    make_problem_III,
    moment_flux,
    moment_rho,
    run_transport,
    steady_diffusion_profile,
    step_transport_bpr,
    transport_blocks,
    zero_state,
)

ANG = AngularGrid.gauss(8)


def const(c):
    return lambda v: np.full(np.shape(v), float(c))


def slab(n=10, eps=0.5, sigma_s=1.0, sigma_a=0.0, source=0.0, F_L=1.0, F_R=1.0):
    grid = Grid1D.uniform(0.0, 1.0, n, BC.TRANSPORT_INFLOW)
    mats = (Material(0.0, 1.0, eps=eps, sigma_s=sigma_s, sigma_a=sigma_a, source=source),)
    fl = F_L if callable(F_L) else const(F_L)
    fr = F_R if callable(F_R) else const(F_R)
    return TransportProblem("slab", grid, mats, fl, fr)


# ----------------------------------------------------------- quadrature


def test_quadrature_is_exact_for_even_powers():
    v, w = ANG.nodes, ANG.weights
    for k in range(16):
        assert abs(np.sum(w * v ** (2 * k)) - 1.0 / (2 * k + 1)) <= 1e-13


def test_quadrature_low_moments():
    assert ANG.nv == 8
    assert np.all(ANG.nodes > 0) and np.all(ANG.nodes < 1)
    assert ANG.weights.sum() == pytest.approx(1.0, abs=1e-15)
    assert ANG.integrate(ANG.nodes**2) == pytest.approx(1.0 / 3.0, abs=1e-15)


def test_even_odd_round_trip():
    rng = np.random.default_rng(0)
    fp, fm = rng.standard_normal((2, 5, 3))
    r, j = even_odd_decompose(fp, fm, 0.1)
    back_p, back_m = even_odd_reconstruct(r, j, 0.1)
    np.testing.assert_allclose(back_p, fp, atol=1e-14)
    np.testing.assert_allclose(back_m, fm, atol=1e-14)
    with pytest.raises(ValueError):
        even_odd_decompose(fp, fm, 0.0)


def test_moments():
    prob = slab(n=4, eps=0.2)
    n, nv = prob.grid.n, ANG.nv
    state = TransportState(np.tile(ANG.nodes**2, (n, 1)), np.ones((n, nv)))
    np.testing.assert_allclose(moment_rho(state, ANG), 1.0 / 3.0, atol=1e-15)
    # the half-range rule is not exact for odd integrands, so compare with its own sum
    mean_v = float(np.sum(ANG.weights * ANG.nodes))
    assert mean_v == pytest.approx(0.5, abs=5e-3)
    np.testing.assert_allclose(moment_flux(state, ANG, prob), 0.2 * mean_v, atol=1e-15)


# ------------------------------------------------------------- problems


def test_zero_cross_section_rejected():
    grid = Grid1D.uniform(0.0, 1.0, 4, BC.TRANSPORT_INFLOW)
    with pytest.raises(ValueError):
        TransportProblem("void", grid, (Material(0.0, 1.0, eps=1.0, sigma_s=0.0, sigma_a=0.0),), const(1), const(0))
    with pytest.raises(ValueError):
        TransportProblem("neg", grid, (Material(0.0, 1.0, eps=1.0, sigma_s=2.0, sigma_a=-1.0),), const(1), const(0))


def test_problem_definitions():
    p1 = make_problem_I(40)
    assert p1.grid.n == 40 and p1.eps[0] == 1e-8 and p1.sigma_s[0] == 1.0
    assert p1.boundary_rho(ANG) == pytest.approx((1.0, 0.0))

    p2 = make_problem_II("graded")
    assert p2.grid.n == 30
    assert p2.sigma[0] == pytest.approx(1.0) and p2.sigma_a[0] == 1.0 and p2.sigma_s[0] == 0.0
    assert p2.eps[-1] == 0.01 and p2.sigma[-1] == pytest.approx(1.0)
    assert p2.boundary_rho(ANG)[0] == pytest.approx(5.0)
    assert [(b.start, b.stop) for b in transport_blocks(p2)] == [(0, 20), (20, 30)]
    assert len(transport_blocks(make_problem_II("uniform", 440))) == 2
    with pytest.raises(ValueError):
        make_problem_II("other")

    p3 = make_problem_III(1e-4)
    assert p3.eps[0] == 1e-4
    np.testing.assert_allclose(p3.F_L(ANG.nodes), ANG.nodes)
    assert p3.boundary_rho(ANG)[0] == pytest.approx(float(np.sum(ANG.weights * ANG.nodes)), abs=1e-15)


def test_material_boundary_must_lie_on_an_edge():
    with pytest.raises(ValueError):
        transport_blocks(make_problem_II("uniform", 25))


# ------------------------------------------------------------ boundaries


def test_inflow_ghost_for_matching_data():
    prob = slab(n=6, F_L=1.0, F_R=1.0)
    state = TransportState(np.ones((6, ANG.nv)), np.zeros((6, ANG.nv)))
    ((rp, jp),) = apply_boundary_conditions(state, prob, ANG)
    np.testing.assert_allclose(rp, 1.0, atol=1e-15)
    np.testing.assert_allclose(jp[:JG], 0.0, atol=1e-15)


def test_zero_eps_boundary_is_dirichlet():
    prob = make_problem_III(1e-2, n=8)
    rng = np.random.default_rng(1)
    state = TransportState(rng.standard_normal((8, ANG.nv)), np.zeros((8, ANG.nv)))
    ((rp, _),) = apply_boundary_conditions(state, prob, ANG, eps=0.0)
    edge = 0.5 * (rp[RG - 1] + rp[RG])
    np.testing.assert_allclose(edge, ANG.nodes, atol=1e-14)
    edge_r = 0.5 * (rp[RG + 7] + rp[RG + 8])
    np.testing.assert_allclose(edge_r, 0.0, atol=1e-14)


def test_boundary_relation_holds_at_the_edge():
    """The ghost makes r - (eps v / sigma) r_x = F at the left edge."""
    prob = make_problem_III(0.3, n=8)
    rng = np.random.default_rng(2)
    state = TransportState(rng.standard_normal((8, ANG.nv)), np.zeros((8, ANG.nv)))
    ((rp, _),) = apply_boundary_conditions(state, prob, ANG)
    h, v = prob.grid.dx, ANG.nodes
    edge = 0.5 * (rp[RG - 1] + rp[RG])
    slope = (rp[RG] - rp[RG - 1]) / h
    np.testing.assert_allclose(edge - 0.3 * v / prob.sigma[0] * slope, v, atol=1e-13)


# ------------------------------------------------------------ stepping


@pytest.mark.parametrize("tab", ["SSP2_332", "ARS222"])
@pytest.mark.parametrize("eps", [1.0, 1e-2, 1e-8])
def test_uniform_state_is_a_fixed_point(tab, eps):
    c = 0.7
    prob = slab(n=12, eps=eps, F_L=c, F_R=c)
    state = TransportState(np.full((12, ANG.nv), c), np.zeros((12, ANG.nv)))
    solver = TransportSolver(prob, ANG, builtin(tab))
    for _ in range(3):
        state = solver.step(state, 0.01)
        assert np.max(np.abs(state.r - c)) <= 1e-13
        assert np.max(np.abs(state.j)) <= 1e-13


@pytest.mark.parametrize("eps", [1.0, 1e-2])
def test_uniform_state_is_kept_by_coupled_closure(eps):
    # the coupled solve carries sigma_s dt / eps^2 in its matrix, so round-off grows like 1/eps^2
    c = 0.7
    prob = slab(n=12, eps=eps, F_L=c, F_R=c)
    state = TransportState(np.full((12, ANG.nv), c), np.zeros((12, ANG.nv)))
    solver = TransportSolver(prob, ANG, builtin("SSP2_332"), closure="coupled")
    for _ in range(3):
        state = solver.step(state, 0.01)
    assert np.max(np.abs(state.r - c)) <= 1e-13
    assert np.max(np.abs(state.j)) <= 1e-12


def test_zero_step_is_identity():
    prob = make_problem_I(10)
    rng = np.random.default_rng(0)
    state = TransportState(rng.random((10, ANG.nv)), rng.random((10, ANG.nv)))
    out = step_transport_bpr(state, builtin("SSP2_332"), prob, ANG, 0.0)
    np.testing.assert_array_equal(out.r, state.r)
    np.testing.assert_array_equal(out.j, state.j)


def test_run_to_time_zero_returns_initial_state():
    prob = make_problem_I(10)
    out = run_transport(prob, ANG, builtin("SSP2_332"), 0.01, 0.0)
    assert list(out) == [0.0]
    np.testing.assert_array_equal(out[0.0].r, zero_state(prob, ANG).r)


def test_unknown_closure():
    with pytest.raises(ValueError):
        TransportSolver(make_problem_I(10), ANG, builtin("SSP2_332"), closure="exact")


def euler_imex_oracle(r, j, prob, ang, dt):
    """One IMEX Euler step for mu = 0, Cds2 fluxes and sigma_s = 0, written cell by cell."""
    n, nv = r.shape
    h = prob.grid.dx
    eps, sig, sa, Q = prob.eps[0], prob.sigma[0], prob.sigma_a[0], prob.source[0]
    v = ang.nodes
    FL, FR = prob.F_L(v) * np.ones(nv), prob.F_R(v) * np.ones(nv)

    def ghosts(rr):
        a = 2.0 * eps * v / (sig * h)
        gl = (2.0 * FL + (a - 1.0) * rr[0]) / (1.0 + a)
        gr = (2.0 * FR + (a - 1.0) * rr[-1]) / (1.0 + a)
        return gl, gr

    gl, gr = ghosts(r)
    jl = -(v / sig) * (r[0] - gl) / h
    jr = -(v / sig) * (gr - r[-1]) / h
    jpad = np.vstack([jl, j, jr])
    flux = v * jpad
    edges = 0.5 * (flux[:-1] + flux[1:])
    E = -(edges[1:] - edges[:-1]) / h

    r_new = (r + dt * E + dt * Q) / (1.0 + dt * sa)
    gl, gr = ghosts(r_new)
    rpad = np.vstack([gl, r_new, gr])
    dr = (rpad[2:] - rpad[:-2]) / (2.0 * h)
    j_new = (eps**2 * j - dt * v * dr) / (eps**2 + dt * sig)
    return r_new, j_new


def test_euler_step_matches_cellwise_oracle():
    grid = Grid1D.uniform(0.0, 1.0, 4, BC.TRANSPORT_INFLOW)
    mats = (Material(0.0, 1.0, eps=1.0, sigma_s=0.0, sigma_a=1.0, source=0.5),)
    prob = TransportProblem("oracle", grid, mats, const(1.0), const(0.25))
    ang = AngularGrid.gauss(2)
    rng = np.random.default_rng(4)
    r, j = rng.random((4, 2)), rng.standard_normal((4, 2))
    solver = TransportSolver(prob, ang, builtin("EULER_IMEX"), mu=0.0, recon="Cds2")
    out = solver.step(TransportState(r, j), 0.01)
    r_exp, j_exp = euler_imex_oracle(r, j, prob, ang, 0.01)
    np.testing.assert_allclose(out.r, r_exp, atol=1e-14)
    np.testing.assert_allclose(out.j, j_exp, atol=1e-14)


def test_blowup_is_reported():
    prob = make_problem_III(1.0, n=20)
    # an explicit step far beyond the hyperbolic limit
    with pytest.raises(NonFiniteStateError):
        run_transport(prob, ANG, builtin("SSP2_332"), 5.0, 500.0, mu=0.0, blowup=1e3)


# ---------------------------------------------------- diffusion reference


def test_reference_steady_state_is_linear():
    prob = make_problem_I(10)
    grid, out = diffusion_limit_reference(prob, n=50, dt=0.05, t_end=20.0)
    np.testing.assert_allclose(out[20.0], 1.0 - grid.x, atol=1e-10)
    np.testing.assert_allclose(steady_diffusion_profile(prob, grid.x), 1.0 - grid.x, atol=1e-15)


def test_reference_steady_state_with_source():
    Q = 2.0
    prob = slab(n=10, eps=1e-8, source=Q, F_L=0.0, F_R=0.0)
    grid, out = diffusion_limit_reference(prob, n=100, dt=0.05, t_end=20.0)
    exact = 1.5 * Q * grid.x * (1.0 - grid.x)
    np.testing.assert_allclose(steady_diffusion_profile(prob, grid.x), exact, atol=1e-14)
    # cell-centred ghosts make the quadratic exact up to the O(h^2) boundary closure
    assert np.max(np.abs(out[20.0] - exact)) <= 1e-3


def test_reference_transient_matches_series():
    """rho_t = rho_xx / 3 on (0,1), rho(0)=1, rho(1)=0, zero start, against the sine series."""
    prob = make_problem_I(10)
    t = 0.05
    grid, out = diffusion_limit_reference(prob, n=400, dt=1e-4, t_end=t)
    x = grid.x
    k = np.arange(1, 400)[:, None]
    series = 1.0 - x - np.sum(2.0 / (np.pi * k) * np.sin(np.pi * k * x) * np.exp(-((np.pi * k) ** 2) * t / 3.0), axis=0)
    assert np.max(np.abs(out[t] - series)) <= 2e-3


# ------------------------------------------------------- problem runs


@pytest.fixture(scope="module")
def problem_I_long():
    prob = make_problem_I(20)
    dt = 0.035 * prob.grid.dx
    out = run_transport(prob, ANG, builtin("SSP2_332"), dt, 8.0, snapshots=(2.0,))
    return prob, dt, out


def steady_increment(prob, dt, state):
    new = TransportSolver(prob, ANG, builtin("SSP2_332")).step(state, dt)
    return float(np.max(np.abs(moment_rho(new, ANG) - moment_rho(state, ANG))))


def test_problem_I_transients_follow_diffusion_limit():
    prob = make_problem_I(40)
    dt = 0.035 * prob.grid.dx
    times = (0.01, 0.05, 0.15)
    out = run_transport(prob, ANG, builtin("SSP2_332"), dt, 0.15, snapshots=times)
    grid, ref = diffusion_limit_reference(prob, n=200, dt=1e-5, t_end=0.15, snapshots=times)
    for t in times:
        rho = moment_rho(out[t], ANG)
        ref_on_coarse = np.interp(prob.grid.x, grid.x, ref[t])
        assert np.max(np.abs(rho - ref_on_coarse)) <= 5e-2
        assert np.min(rho) >= -1e-8


def test_problem_I_reaches_linear_steady_state(problem_I_long):
    prob, _, out = problem_I_long
    rho = moment_rho(out[2.0], ANG)
    assert np.max(np.abs(rho - steady_diffusion_profile(prob, prob.grid.x))) <= 5e-2


@pytest.mark.xfail(strict=True, reason="the slowest diffusive mode still decays visibly at t = 2")
def test_problem_I_steady_increment_at_t2(problem_I_long):
    prob, dt, out = problem_I_long
    assert steady_increment(prob, dt, out[2.0]) <= 1e-8


def test_problem_I_steady_increment_after_settling(problem_I_long):
    prob, dt, out = problem_I_long
    assert steady_increment(prob, dt, out[8.0]) <= 1e-8


def steady_even_parity(prob, ang):
    """Independent steady solve of the even-parity diffusion form, one unknown per cell and ordinate.

    Finite volumes with harmonic-mean diffusivity eps v^2 / sigma across faces and
    the half-cell Marshak-type inflow relation at the ends.
    """
    g = prob.grid
    n, h = g.n, g.widths
    nv, v, w = ang.nv, ang.nodes, ang.weights
    eps, sig, ss, sa, q = prob.eps, prob.sigma, prob.sigma_s, prob.sigma_a, prob.source
    FL = prob.F_L(v) * np.ones(nv)
    FR = prob.F_R(v) * np.ones(nv)
    rows, cols, vals = [], [], []
    b = np.zeros(n * nv)

    def add(i, k, x):
        rows.append(i)
        cols.append(k)
        vals.append(x)

    for m in range(nv):
        K = eps * v[m] ** 2 / sig
        for i in range(n):
            I = m * n + i
            for side in (-1, 1):
                k = i + side
                if 0 <= k < n:
                    Ke = (h[i] + h[k]) / (h[i] / K[i] + h[k] / K[k])
                    c = Ke / (0.5 * (h[i] + h[k])) / h[i]
                    add(I, I, c)
                    add(I, m * n + k, -c)
                else:
                    a = 2 * eps[i] * v[m] / (sig[i] * h[i])
                    F = FL[m] if side < 0 else FR[m]
                    c = K[i] / (h[i] / 2) / h[i]
                    add(I, I, c * (1 - a / (1 + a)))
                    b[I] += c * F / (1 + a)
            add(I, I, ss[i] / eps[i] + eps[i] * sa[i])
            for mm in range(nv):
                add(I, mm * n + i, -ss[i] / eps[i] * w[mm])
            b[I] += eps[i] * q[i]
    A = sp.csc_matrix((vals, (rows, cols)), shape=(n * nv, n * nv))
    r = spsolve(A, b).reshape(nv, n).T
    return r @ w


def test_problem_II_steady_state_matches_even_parity_solve():
    prob = make_problem_II("graded")
    out = run_transport(prob, ANG, builtin("SSP2_332"), 0.05, 150.0)
    rho = moment_rho(out[150.0], ANG)
    oracle = steady_even_parity(prob, ANG)
    assert np.max(np.abs(rho - oracle)) <= 5e-2
    assert np.min(rho) >= -1e-8
    assert math.isclose(oracle[0], rho[0], rel_tol=5e-2)
