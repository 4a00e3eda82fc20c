"""One-dimensional grids and finite-difference spatial operators.

Nodes sit at cell centres.  Boundary conditions are realised through ghost
cells: every operator pads its input (``pad``) and then works on the padded
array, so periodic, reflecting and extrapolating boundaries share the same
stencil code.  Reflection takes a ``parity`` argument: +1 for even fields
such as ``u`` and -1 for odd ones such as ``v`` or fluxes.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .errors import GridTooSmallError, NonUniformStencilError

NGHOST = 3
WENO_EPS = 1e-6
DEFAULT_ALPHA = 1.0


class BC(enum.Enum):
    PERIODIC = "periodic"
    REFLECTING = "reflecting"
    EXTRAPOLATE = "extrapolate"
    TRANSPORT_INFLOW = "transport_inflow"


class Recon(enum.Enum):
    CDS2 = "Cds2"
    WENO32 = "WENO32"
    WENO53 = "WENO53"

    @classmethod
    def parse(cls, name) -> "Recon":
        if isinstance(name, cls):
            return name
        for member in cls:
            if member.value.lower() == str(name).lower():
                return member
        raise ValueError(f"unknown reconstruction {name!r}")

    @property
    def central_order(self) -> int:
        """Order of the central stencils paired with this reconstruction."""
        return 4 if self is Recon.WENO53 else 2


@dataclass(frozen=True)
class Grid1D:
    """Piecewise-uniform cell-centred grid.

    ``segments`` is a sequence of ``(x_start, x_end, n_cells)``; consecutive
    segments must touch.
    """

    segments: tuple
    bc: BC = BC.PERIODIC

    def __post_init__(self):
        segs = tuple((float(a), float(b), int(n)) for a, b, n in self.segments)
        if not segs:
            raise ValueError("grid needs at least one segment")
        for k, (a, b, n) in enumerate(segs):
            if n < 1 or not b > a:
                raise ValueError(f"segment {k} must have b > a and n >= 1, got {(a, b, n)}")
            if k and not math.isclose(segs[k - 1][1], a, rel_tol=0, abs_tol=1e-12):
                raise ValueError("segments must be contiguous and ordered")
        object.__setattr__(self, "segments", segs)
        object.__setattr__(self, "bc", BC(self.bc))

    @classmethod
    def uniform(cls, a: float, b: float, n: int, bc=BC.PERIODIC) -> "Grid1D":
        return cls(((a, b, n),), bc)

    @property
    def n(self) -> int:
        return sum(s[2] for s in self.segments)

    @property
    def a(self) -> float:
        return self.segments[0][0]

    @property
    def b(self) -> float:
        return self.segments[-1][1]

    @property
    def is_uniform(self) -> bool:
        return len(self.segments) == 1

    @cached_property
    def widths(self) -> np.ndarray:
        return np.concatenate([np.full(n, (b - a) / n) for a, b, n in self.segments])

    @cached_property
    def x(self) -> np.ndarray:
        return np.concatenate([a + (b - a) / n * (np.arange(n) + 0.5) for a, b, n in self.segments])

    @cached_property
    def edges(self) -> np.ndarray:
        return np.concatenate([[self.a], self.a + np.cumsum(self.widths)])

    @property
    def dx(self) -> float:
        """Spacing of a uniform grid (smallest spacing otherwise)."""
        return float(self.widths.min())

    def segment_index(self) -> np.ndarray:
        return np.concatenate([np.full(n, k) for k, (_, _, n) in enumerate(self.segments)])

    def with_bc(self, bc) -> "Grid1D":
        return Grid1D(self.segments, BC(bc))


# ----------------------------------------------------------------- ghosts


def ghost_map(n: int, bc: BC, ng: int = NGHOST, parity: int = 1):
    """Interior index and sign for each padded position ``-ng .. n+ng-1``."""
    pos = np.arange(-ng, n + ng)
    sign = np.ones(pos.size)
    if bc is BC.PERIODIC:
        idx = pos % n
    elif bc is BC.REFLECTING:
        idx = pos.copy()
        left, right = pos < 0, pos >= n
        idx[left] = -pos[left] - 1
        idx[right] = 2 * n - 1 - pos[right]
        sign[left | right] = parity
        if np.any((idx < 0) | (idx >= n)):
            raise GridTooSmallError(f"{n} cells cannot host {ng} reflected ghosts")
    elif bc in (BC.EXTRAPOLATE, BC.TRANSPORT_INFLOW):
        idx = np.clip(pos, 0, n - 1)
    else:  # pragma: no cover
        raise ValueError(bc)
    return idx, sign


def pad(u: np.ndarray, grid: Grid1D, ng: int = NGHOST, parity: int = 1) -> np.ndarray:
    if u.shape[0] != grid.n:
        raise ValueError(f"field has {u.shape[0]} values, grid has {grid.n} cells")
    if grid.n < ng:
        raise GridTooSmallError(f"grid with {grid.n} cells is smaller than stencil half-width {ng}")
    idx, sign = ghost_map(grid.n, grid.bc, ng, parity)
    if u.ndim == 1:
        return u[idx] * sign
    return u[idx] * sign.reshape((-1,) + (1,) * (u.ndim - 1))


def padded_widths(grid: Grid1D, ng: int = NGHOST) -> np.ndarray:
    idx, _ = ghost_map(grid.n, grid.bc, ng, 1)
    return grid.widths[idx]


# ------------------------------------------------------------ basic pieces


def mu_of_eps(eps: float, dx: float) -> float:
    """Blending weight exp(-eps^2/dx); equals 1 in the diffusive limit."""
    return math.exp(-(eps * eps) / dx)


def lax_friedrichs_split(F, U, alpha: float = DEFAULT_ALPHA):
    F = np.asarray(F, dtype=float)
    U = np.asarray(U, dtype=float)
    if F.shape != U.shape:
        raise ValueError("F and U must have the same shape")
    fp = 0.5 * (F + alpha * U)
    # complement instead of (F - alpha U)/2 keeps fp + fm within an ulp of F
    fm = F - fp
    return fp, fm


def _weno5_left(fm2, fm1, f0, fp1, fp2):
    """Fifth-order WENO value at x_{i+1/2} from the upwind-left stencil."""
    q0 = (2 * fm2 - 7 * fm1 + 11 * f0) / 6.0
    q1 = (-fm1 + 5 * f0 + 2 * fp1) / 6.0
    q2 = (2 * f0 + 5 * fp1 - fp2) / 6.0
    b0 = 13.0 / 12.0 * (fm2 - 2 * fm1 + f0) ** 2 + 0.25 * (fm2 - 4 * fm1 + 3 * f0) ** 2
    b1 = 13.0 / 12.0 * (fm1 - 2 * f0 + fp1) ** 2 + 0.25 * (fm1 - fp1) ** 2
    b2 = 13.0 / 12.0 * (f0 - 2 * fp1 + fp2) ** 2 + 0.25 * (3 * f0 - 4 * fp1 + fp2) ** 2
    a0 = 0.1 / (WENO_EPS + b0) ** 2
    a1 = 0.6 / (WENO_EPS + b1) ** 2
    a2 = 0.3 / (WENO_EPS + b2) ** 2
    return (a0 * q0 + a1 * q1 + a2 * q2) / (a0 + a1 + a2)


def _weno3_left(fm1, f0, fp1, d0=1.0 / 3.0, hl=None, hc=None, hr=None):
    """Third-order WENO value at the right edge of the centre cell.

    On a uniform grid the candidates are ``-fm1/2 + 3 f0/2`` and
    ``(f0 + fp1)/2`` with linear weights 1/3, 2/3.  When widths are given the
    candidate slopes and weights account for unequal cells.
    """
    if hc is None:
        s0 = f0 - fm1
        s1 = fp1 - f0
    else:
        s0 = (f0 - fm1) / (0.5 * (hl + hc)) * hc
        s1 = (fp1 - f0) / (0.5 * (hc + hr)) * hc
    q0 = f0 + 0.5 * s0
    q1 = f0 + 0.5 * s1
    a0 = d0 / (WENO_EPS + s0 * s0) ** 2
    a1 = (1.0 - d0) / (WENO_EPS + s1 * s1) ** 2
    return (a0 * q0 + a1 * q1) / (a0 + a1)


def weno3_linear_weight(hl, hc, hr):
    """Weight of the left candidate that makes WENO3 exact on quadratics.

    Cell averages of x^2 on cells of widths ``hl, hc, hr`` (centre cell on
    [-hc/2, hc/2]) are reconstructed at x = hc/2 by both candidates; the
    weight blending them to the exact value hc^2/4 is returned.
    """
    def avg(lo, hi):
        return (hi**3 - lo**3) / (3.0 * (hi - lo))

    xl0 = -hc / 2 - hl
    fm1 = avg(xl0, -hc / 2)
    f0 = avg(-hc / 2, hc / 2)
    fp1 = avg(hc / 2, hc / 2 + hr)
    s0 = (f0 - fm1) / (0.5 * (hl + hc)) * hc
    s1 = (fp1 - f0) / (0.5 * (hc + hr)) * hc
    p0 = f0 + 0.5 * s0
    p1 = f0 + 0.5 * s1
    return (hc * hc / 4.0 - p1) / (p0 - p1)


def edge_fluxes_padded(Fp, Up, alpha: float, order: Recon, ng: int = NGHOST, widths_p=None):
    """Numerical fluxes at the n+1 edges of the interior from padded arrays.

    ``Fp``/``Up`` have ``ng`` ghosts on each side; leading axis is space.
    ``widths_p`` (padded cell widths) switches WENO32 to its non-uniform form.
    """
    order = Recon.parse(order)
    n = Fp.shape[0] - 2 * ng
    # edge e sits between padded cells ng-1+e and ng+e, e = 0..n
    i = np.arange(ng - 1, ng + n)

    if order is Recon.CDS2:
        return 0.5 * (Fp[i] + Fp[i + 1])
    Fp_plus, Fp_minus = lax_friedrichs_split(Fp, Up, alpha)
    if order is Recon.WENO53:
        left = _weno5_left(Fp_plus[i - 2], Fp_plus[i - 1], Fp_plus[i], Fp_plus[i + 1], Fp_plus[i + 2])
        right = _weno5_left(Fp_minus[i + 3], Fp_minus[i + 2], Fp_minus[i + 1], Fp_minus[i], Fp_minus[i - 1])
        return left + right
    # WENO32
    if widths_p is None:
        left = _weno3_left(Fp_plus[i - 1], Fp_plus[i], Fp_plus[i + 1])
        right = _weno3_left(Fp_minus[i + 2], Fp_minus[i + 1], Fp_minus[i])
        return left + right
    w = widths_p
    extra = (slice(None),) + (None,) * (Fp.ndim - 1)
    hl, hc, hr = w[i - 1][extra], w[i][extra], w[i + 1][extra]
    d_left = weno3_linear_weight(hl, hc, hr)
    left = _weno3_left(Fp_plus[i - 1], Fp_plus[i], Fp_plus[i + 1], d_left, hl, hc, hr)
    hl, hc, hr = w[i + 2][extra], w[i + 1][extra], w[i][extra]
    d_right = weno3_linear_weight(hl, hc, hr)
    right = _weno3_left(Fp_minus[i + 2], Fp_minus[i + 1], Fp_minus[i], d_right, hl, hc, hr)
    return left + right


def _check_size(grid: Grid1D, order: Recon):
    need = {Recon.CDS2: 2, Recon.WENO32: 3, Recon.WENO53: 5}[order]
    if grid.n < need:
        raise GridTooSmallError(f"{order.value} needs at least {need} cells, grid has {grid.n}")


def weno_flux_divergence(
    F,
    U,
    alpha: float,
    order,
    grid: Grid1D,
    flux_parity: int = 1,
    state_parity: int = 1,
) -> np.ndarray:
    """Conservative approximation of dF/dx at the nodes.

    Fluxes are split with local Lax-Friedrichs (``alpha``) and reconstructed
    at cell edges by WENO5 (``WENO53``), WENO3 (``WENO32``) or simple
    averaging (``Cds2``, giving the second-order central difference).
    """
    order = Recon.parse(order)
    _check_size(grid, order)
    F = np.asarray(F, dtype=float)
    U = np.asarray(U, dtype=float)
    Fp = pad(F, grid, NGHOST, flux_parity)
    Up = pad(U, grid, NGHOST, state_parity)
    widths_p = None if grid.is_uniform else padded_widths(grid)
    fhat = edge_fluxes_padded(Fp, Up, alpha, order, NGHOST, widths_p)
    h = grid.widths if F.ndim == 1 else grid.widths.reshape((-1,) + (1,) * (F.ndim - 1))
    return (fhat[1:] - fhat[:-1]) / h


def central_derivative_padded(up, h, order: int, ng: int = NGHOST):
    n = up.shape[0] - 2 * ng
    i = np.arange(ng, ng + n)
    if order == 2:
        return (up[i + 1] - up[i - 1]) / (2.0 * h)
    if order == 4:
        return (-up[i + 2] + 8.0 * up[i + 1] - 8.0 * up[i - 1] + up[i - 2]) / (12.0 * h)
    raise ValueError("central derivative order must be 2 or 4")


def _node_spacings(grid: Grid1D, ng: int = 1):
    wp = padded_widths(grid, ng)
    # distance between node k and node k+1 in padded indexing
    return 0.5 * (wp[:-1] + wp[1:])


def first_derivative(u, order, grid: Grid1D, parity: int = 1, kind: str = "central") -> np.ndarray:
    """Pointwise derivative at the nodes.

    ``kind="central"`` uses the central stencil whose order matches the
    reconstruction (2 for Cds2/WENO32, 4 for WENO53).  ``kind="weno"``
    differentiates with the WENO flux divergence itself (no dissipation).
    """
    order = Recon.parse(order)
    u = np.asarray(u, dtype=float)
    if kind == "weno":
        return weno_flux_divergence(u, u, 0.0, order, grid, parity, parity)
    if kind != "central":
        raise ValueError(f"unknown derivative kind {kind!r}")
    _check_size(grid, order)
    p = order.central_order
    if grid.is_uniform:
        return central_derivative_padded(pad(u, grid, NGHOST, parity), grid.dx, p)
    if p != 2:
        raise NonUniformStencilError("fourth-order derivative needs a uniform grid")
    up = pad(u, grid, 1, parity)
    h = _node_spacings(grid, 1)
    hm, hp = h[:-1], h[1:]
    um, u0, uq = up[:-2], up[1:-1], up[2:]
    return (hm * hm * (uq - u0) + hp * hp * (u0 - um)) / (hm * hp * (hm + hp))


def laplacian(u, accuracy: int, grid: Grid1D, parity: int = 1) -> np.ndarray:
    u = np.asarray(u, dtype=float)
    if accuracy not in (2, 4):
        raise ValueError("accuracy must be 2 or 4")
    if grid.n < accuracy + 1:
        raise GridTooSmallError(f"Laplacian of accuracy {accuracy} needs {accuracy + 1} cells")
    if grid.is_uniform:
        up = pad(u, grid, NGHOST, parity)
        n, h2 = grid.n, grid.dx**2
        i = np.arange(NGHOST, NGHOST + n)
        if accuracy == 2:
            return (up[i - 1] - 2.0 * up[i] + up[i + 1]) / h2
        return (-up[i - 2] + 16.0 * up[i - 1] - 30.0 * up[i] + 16.0 * up[i + 1] - up[i + 2]) / (12.0 * h2)
    if accuracy == 4:
        raise NonUniformStencilError("fourth-order Laplacian stencil straddles a segment break")
    up = pad(u, grid, 1, parity)
    h = _node_spacings(grid, 1)
    hm, hp = h[:-1], h[1:]
    return 2.0 * ((up[2:] - up[1:-1]) / hp - (up[1:-1] - up[:-2]) / hm) / (hm + hp)


def laplacian_matrix(grid: Grid1D, accuracy: int, parity: int = 1) -> sp.csc_matrix:
    """Sparse matrix of ``laplacian`` acting on interior values (ghosts folded in)."""
    n = grid.n
    if grid.is_uniform:
        h2 = grid.dx**2
        if accuracy == 2:
            offsets, coef = (-1, 0, 1), np.array([1.0, -2.0, 1.0]) / h2
        else:
            offsets, coef = (-2, -1, 0, 1, 2), np.array([-1.0, 16.0, -30.0, 16.0, -1.0]) / (12.0 * h2)
        coefs = [np.full(n, c) for c in coef]
    else:
        if accuracy == 4:
            raise NonUniformStencilError("fourth-order Laplacian stencil straddles a segment break")
        h = _node_spacings(grid, 1)
        hm, hp = h[:-1], h[1:]
        offsets = (-1, 0, 1)
        coefs = [2.0 / (hm * (hm + hp)), -2.0 / (hm * hp), 2.0 / (hp * (hm + hp))]
    if grid.n < accuracy + 1:
        raise GridTooSmallError(f"Laplacian of accuracy {accuracy} needs {accuracy + 1} cells")
    ng = max(abs(o) for o in offsets)
    idx, sign = ghost_map(n, grid.bc, ng, parity)
    rows, cols, vals = [], [], []
    base = np.arange(n)
    for off, c in zip(offsets, coefs):
        padded_pos = base + off + ng
        rows.append(base)
        cols.append(idx[padded_pos])
        vals.append(c * sign[padded_pos])
    m = sp.coo_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(n, n))
    return m.tocsc()


def total_variation(u) -> float:
    return float(np.sum(np.abs(np.diff(np.asarray(u, dtype=float)))))


def write_field_csv(path, grid: Grid1D, columns: dict) -> None:
    """Write ``x`` plus named nodal columns with 17 significant digits."""
    names = ["x", *columns]
    data = np.column_stack([grid.x, *[np.asarray(v, dtype=float) for v in columns.values()]])
    np.savetxt(Path(path), data, fmt="%.17g", delimiter=",", header=",".join(names), comments="")


def read_field_csv(path) -> dict:
    data = np.loadtxt(Path(path), delimiter=",", skiprows=1, ndmin=2)
    with open(path) as fh:
        names = fh.readline().strip().split(",")
    return {name: data[:, k] for k, name in enumerate(names)}
