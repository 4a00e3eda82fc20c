"""Double Butcher tableaux for IMEX Runge-Kutta schemes.

An IMEX scheme pairs an explicit tableau (strictly lower triangular ``a_ex``)
with a diagonally implicit one (lower triangular ``a_im``) that share stages.
This module builds the builtin schemes, checks order and algebraic
conditions, classifies the implicit part and evaluates R(inf).
"""
from __future__ import annotations

import enum
import hashlib
import math
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import (
    DegenerateTableauError,
    NotStifflyAccurateError,
    SingularMatrixError,
    UnknownSchemeError,
)

ROW_SUM_TOL = 1e-13
CONDITION_TOL = 1e-12
INVERTIBILITY_RTOL = 1e-12


class TableauClass(enum.Enum):
    TYPE_A = "A"
    TYPE_CK = "CK"
    TYPE_ARS = "ARS"


@dataclass(frozen=True, eq=False)
class IMEXTableau:
    name: str
    declared_order: int
    a_ex: np.ndarray
    b_ex: np.ndarray
    c_ex: np.ndarray
    a_im: np.ndarray
    b_im: np.ndarray
    c_im: np.ndarray

    def __post_init__(self):
        for key in ("a_ex", "b_ex", "c_ex", "a_im", "b_im", "c_im"):
            arr = np.array(getattr(self, key), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, key, arr)
        s = self.b_ex.size
        shapes_ok = (
            self.a_ex.shape == (s, s)
            and self.a_im.shape == (s, s)
            and self.b_im.shape == (s,)
            and self.c_ex.shape == (s,)
            and self.c_im.shape == (s,)
        )
        if s == 0 or not shapes_ok:
            raise ValueError(f"inconsistent tableau shapes for {self.name!r}")
        if np.any(np.triu(self.a_ex) != 0.0):
            raise ValueError(f"{self.name}: explicit matrix must be strictly lower triangular")
        if np.any(np.triu(self.a_im, 1) != 0.0):
            raise ValueError(f"{self.name}: implicit matrix must be lower triangular")

    @property
    def s(self) -> int:
        return self.b_ex.size

    def row_sum_defects(self) -> tuple[float, float]:
        """Max deviation of c from the row sums of each matrix."""
        ex = np.max(np.abs(self.c_ex - self.a_ex.sum(axis=1)))
        im = np.max(np.abs(self.c_im - self.a_im.sum(axis=1)))
        return float(ex), float(im)

    def implicit_stiffly_accurate(self, tol: float = ROW_SUM_TOL) -> bool:
        return bool(np.max(np.abs(self.b_im - self.a_im[-1])) <= tol)

    def explicit_fsal(self, tol: float = ROW_SUM_TOL) -> bool:
        return bool(np.max(np.abs(self.b_ex - self.a_ex[-1])) <= tol)

    def checksum(self) -> str:
        return hashlib.sha256(format_catalog([self]).encode()).hexdigest()

    def __eq__(self, other):
        if not isinstance(other, IMEXTableau):
            return NotImplemented
        return (
            self.name == other.name
            and self.declared_order == other.declared_order
            and all(
                np.array_equal(getattr(self, k), getattr(other, k))
                for k in ("a_ex", "b_ex", "c_ex", "a_im", "b_im", "c_im")
            )
        )

    __hash__ = object.__hash__


# ---------------------------------------------------------------- builtins


def _f(rows) -> np.ndarray:
    return np.array([[float(x) for x in row] for row in rows])


def _v(values) -> np.ndarray:
    return np.array([float(x) for x in values])


def _ars222() -> IMEXTableau:
    gamma = (2.0 - math.sqrt(2.0)) / 2.0
    delta = 1.0 - 1.0 / (2.0 * gamma)
    return IMEXTableau(
        name="ARS222",
        declared_order=2,
        a_ex=[[0, 0, 0], [gamma, 0, 0], [delta, 1 - delta, 0]],
        b_ex=[delta, 1 - delta, 0],
        c_ex=[0, gamma, 1],
        a_im=[[0, 0, 0], [0, gamma, 0], [0, 1 - gamma, gamma]],
        b_im=[0, 1 - gamma, gamma],
        c_im=[0, gamma, 1],
    )


def _ssp2_332() -> IMEXTableau:
    F = Fraction
    return IMEXTableau(
        name="SSP2_332",
        declared_order=2,
        a_ex=_f([[0, 0, 0], [F(1, 2), 0, 0], [F(1, 2), F(1, 2), 0]]),
        b_ex=_v([F(1, 3)] * 3),
        c_ex=_v([0, F(1, 2), 1]),
        a_im=_f([[F(1, 4), 0, 0], [0, F(1, 4), 0], [F(1, 3), F(1, 3), F(1, 3)]]),
        b_im=_v([F(1, 3)] * 3),
        c_im=_v([F(1, 4), F(1, 4), 1]),
    )


def _ars443() -> IMEXTableau:
    F = Fraction
    a_ex = [
        [0, 0, 0, 0, 0],
        [F(1, 2), 0, 0, 0, 0],
        [F(11, 18), F(1, 18), 0, 0, 0],
        [F(5, 6), F(-5, 6), F(1, 2), 0, 0],
        [F(1, 4), F(7, 4), F(3, 4), F(-7, 4), 0],
    ]
    a_im = [
        [0, 0, 0, 0, 0],
        [0, F(1, 2), 0, 0, 0],
        [0, F(1, 6), F(1, 2), 0, 0],
        [0, F(-1, 2), F(1, 2), F(1, 2), 0],
        [0, F(3, 2), F(-3, 2), F(1, 2), F(1, 2)],
    ]
    c = [0, F(1, 2), F(2, 3), F(1, 2), 1]
    return IMEXTableau(
        name="ARS443",
        declared_order=3,
        a_ex=_f(a_ex),
        b_ex=_v(a_ex[-1]),
        c_ex=_v(c),
        a_im=_f(a_im),
        b_im=_v(a_im[-1]),
        c_im=_v(c),
    )


def _bpr353() -> IMEXTableau:
    F = Fraction
    a_ex = [
        [0, 0, 0, 0, 0],
        [1, 0, 0, 0, 0],
        [F(4, 9), F(2, 9), 0, 0, 0],
        [F(1, 4), 0, F(3, 4), 0, 0],
        [F(1, 4), 0, F(3, 4), 0, 0],
    ]
    a_im = [
        [0, 0, 0, 0, 0],
        [F(1, 2), F(1, 2), 0, 0, 0],
        [F(5, 18), F(-1, 9), F(1, 2), 0, 0],
        [F(1, 2), 0, 0, F(1, 2), 0],
        [F(1, 4), 0, F(3, 4), F(-1, 2), F(1, 2)],
    ]
    c = [0, 1, F(2, 3), 1, 1]
    return IMEXTableau(
        name="BPR353",
        declared_order=3,
        a_ex=_f(a_ex),
        b_ex=_v(a_ex[-1]),
        c_ex=_v(c),
        a_im=_f(a_im),
        b_im=_v(a_im[-1]),
        c_im=_v(c),
    )


def _euler_imex() -> IMEXTableau:
    # explicit Euler on the old stage, implicit Euler on the new one
    return IMEXTableau(
        name="EULER_IMEX",
        declared_order=1,
        a_ex=[[0, 0], [1, 0]],
        b_ex=[1, 0],
        c_ex=[0, 1],
        a_im=[[0, 0], [0, 1]],
        b_im=[0, 1],
        c_im=[0, 1],
    )


_BUILTINS = {
    "ARS222": _ars222,
    "SSP2_332": _ssp2_332,
    "ARS443": _ars443,
    "BPR353": _bpr353,
    "EULER_IMEX": _euler_imex,
}

BUILTIN_NAMES = tuple(_BUILTINS)


def builtin(name: str) -> IMEXTableau:
    key = name.upper().replace("-", "_")
    try:
        return _BUILTINS[key]()
    except KeyError:
        raise UnknownSchemeError(f"unknown scheme {name!r}; known: {', '.join(BUILTIN_NAMES)}") from None


# ---------------------------------------------------------- classification


def is_invertible(m: np.ndarray, rtol: float = INVERTIBILITY_RTOL) -> bool:
    if m.size == 0:
        return False
    sv = np.linalg.svd(m, compute_uv=False)
    return bool(sv[-1] > rtol * sv[0])


def classify(tab: IMEXTableau) -> TableauClass:
    a = tab.a_im
    if is_invertible(a):
        return TableauClass.TYPE_A
    if tab.s > 1 and a[0, 0] == 0.0 and is_invertible(a[1:, 1:]):
        if np.all(a[1:, 0] == 0.0):
            return TableauClass.TYPE_ARS
        return TableauClass.TYPE_CK
    raise DegenerateTableauError(f"{tab.name}: implicit matrix is neither invertible nor of CK form")


# --------------------------------------------------------- order conditions


@dataclass
class ConditionResult:
    condition: str
    order: int
    residual: float
    passed: bool
    external: bool = False


@dataclass
class ValidationReport:
    tableau: str
    entries: list[ConditionResult] = field(default_factory=list)
    order_achieved: int = 0
    tolerance: float = CONDITION_TOL

    @property
    def passed(self) -> bool:
        return all(e.passed for e in self.entries)

    def failures(self) -> list[ConditionResult]:
        return [e for e in self.entries if not e.passed]

    def summary(self) -> str:
        lines = [f"{self.tableau}: order achieved {self.order_achieved}"]
        for e in self.entries:
            tag = " (external-reference condition)" if e.external else ""
            status = "pass" if e.passed else "FAIL"
            lines.append(f"  [{status}] {e.condition:<28s} residual {e.residual: .3e}{tag}")
        return "\n".join(lines)


def _order_conditions(tab: IMEXTableau, p: int):
    parts = {"ex": (tab.b_ex, tab.a_ex, tab.c_ex), "im": (tab.b_im, tab.a_im, tab.c_im)}
    one = np.ones(tab.s)
    out = []
    for w in ("ex", "im"):
        out.append((f"b_{w}.1", 1, parts[w][0] @ one - 1.0, False))
    if p >= 2:
        for w in ("ex", "im"):
            for c in ("ex", "im"):
                out.append((f"b_{w}.c_{c}", 2, parts[w][0] @ parts[c][2] - 0.5, False))
    if p >= 3:
        for w in ("ex", "im"):
            b = parts[w][0]
            for c1, c2 in (("ex", "ex"), ("ex", "im"), ("im", "im")):
                val = b @ (parts[c1][2] * parts[c2][2]) - 1.0 / 3.0
                classical = c1 == c2 == w
                out.append((f"b_{w}.c_{c1}*c_{c2}", 3, val, not classical))
            for m in ("ex", "im"):
                for c in ("ex", "im"):
                    val = b @ parts[m][1] @ parts[c][2] - 1.0 / 6.0
                    classical = m == c == w
                    out.append((f"b_{w}.A_{m}.c_{c}", 3, val, not classical))
    return out


def validate_order(tab: IMEXTableau, p: int, tol: float = CONDITION_TOL) -> ValidationReport:
    """Residuals of the classical and coupled order conditions up to order ``p``.

    Third-order conditions mixing the two tableaux are flagged ``external``:
    they are the standard additive Runge-Kutta set, not derived here.
    """
    if p not in (1, 2, 3):
        raise ValueError("order conditions are available for p in {1, 2, 3}")
    report = ValidationReport(tableau=tab.name, tolerance=tol)
    for cid, order, residual, external in _order_conditions(tab, p):
        residual = float(residual)
        report.entries.append(ConditionResult(cid, order, residual, abs(residual) <= tol, external))
    achieved = 0
    for q in range(1, p + 1):
        if all(e.passed for e in report.entries if e.order == q):
            achieved = q
        else:
            break
    report.order_achieved = achieved
    return report


def check_algebraic_conditions(tab: IMEXTableau, tol: float = CONDITION_TOL) -> ValidationReport:
    """Index-1 algebraic conditions ``c_ex[s] = 1`` and ``e_s^T A_ex c_ex = 1/2``."""
    if not tab.implicit_stiffly_accurate():
        defect = float(np.max(np.abs(tab.b_im - tab.a_im[-1])))
        raise NotStifflyAccurateError(
            f"{tab.name}: implicit weights differ from the last row of A_im (max defect {defect:.3e})"
        )
    report = ValidationReport(tableau=tab.name, tolerance=tol)
    r2 = float(tab.c_ex[-1] - 1.0)
    r3 = float(tab.a_ex[-1] @ tab.c_ex - 0.5)
    report.entries.append(ConditionResult("c_ex[s]=1", 2, r2, abs(r2) <= tol))
    report.entries.append(ConditionResult("e_s.A_ex.c_ex=1/2", 3, r3, abs(r3) <= tol))
    report.order_achieved = 3 if report.passed else (2 if abs(r2) <= tol else 0)
    return report


def is_globally_stiffly_accurate(tab: IMEXTableau, tol: float = ROW_SUM_TOL) -> bool:
    return bool(
        tab.implicit_stiffly_accurate(tol)
        and tab.explicit_fsal(tol)
        and abs(tab.c_im[-1] - 1.0) <= tol
        and abs(tab.c_ex[-1] - 1.0) <= tol
    )


# ---------------------------------------------------------- stability limits


def stability_function(tab: IMEXTableau, z: complex) -> complex:
    """R(z) = 1 + z b^T (I - z A)^{-1} 1 of the implicit part."""
    s = tab.s
    lhs = np.eye(s) - z * tab.a_im
    return complex(1.0 + z * (tab.b_im @ np.linalg.solve(lhs, np.ones(s))))


def r_infinity(tab: IMEXTableau) -> float:
    kind = classify(tab)
    b, a = tab.b_im, tab.a_im
    if kind is TableauClass.TYPE_A:
        try:
            return float(1.0 - b @ np.linalg.solve(a, np.ones(tab.s)))
        except np.linalg.LinAlgError as exc:
            raise SingularMatrixError(str(exc)) from exc
    a_hat, a_col, b_hat = a[1:, 1:], a[1:, 0], b[1:]
    if not is_invertible(a_hat):
        raise SingularMatrixError(f"{tab.name}: trailing implicit block is singular")
    y = np.linalg.solve(a_hat.T, b_hat)  # y^T = b_hat^T A_hat^{-1}
    linear = b[0] - y @ a_col
    if abs(linear) > CONDITION_TOL:
        # R(z) grows linearly in z
        return math.copysign(math.inf, -linear)
    z = np.linalg.solve(a_hat.T, y)  # z^T = b_hat^T A_hat^{-2}
    return float(1.0 - y.sum() - z @ a_col)


def ck_limit_quantity(tab: IMEXTableau) -> float:
    """-e_{s-1}^T A_hat^{-1} a for a CK-type implicit part (zero gives R(inf)=0)."""
    a_hat, a_col = tab.a_im[1:, 1:], tab.a_im[1:, 0]
    if not is_invertible(a_hat):
        raise SingularMatrixError(f"{tab.name}: trailing implicit block is singular")
    return float(-np.linalg.solve(a_hat, a_col)[-1])


# ------------------------------------------------------- catalog file format


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def format_catalog(tableaux: Iterable[IMEXTableau]) -> str:
    blocks = []
    for tab in tableaux:
        lines = [
            f"name = {tab.name}",
            f"declared_order = {tab.declared_order}",
            f"s = {tab.s}",
        ]
        for key in ("a_ex", "b_ex", "c_ex", "a_im", "b_im", "c_im"):
            values = getattr(tab, key).ravel()
            lines.append(f"{key} = " + " ".join(_fmt(x) for x in values))
        blocks.append("\n".join(lines))
    return "\n\n".join(blocks) + "\n"


def parse_catalog(text: str) -> list[IMEXTableau]:
    out = []
    for block in text.strip().split("\n\n"):
        fields: dict[str, str] = {}
        for raw in block.splitlines():
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            key, sep, value = line.partition("=")
            if not sep:
                raise ValueError(f"malformed catalog line: {raw!r}")
            fields[key.strip()] = value.strip()
        if not fields:
            continue
        missing = {"name", "s", "a_ex", "b_ex", "c_ex", "a_im", "b_im", "c_im"} - fields.keys()
        if missing:
            raise ValueError(f"catalog entry missing keys: {sorted(missing)}")
        s = int(fields["s"])

        def vec(key, n):
            vals = [float(tok) for tok in fields[key].split()]
            if len(vals) != n:
                raise ValueError(f"{key}: expected {n} values, got {len(vals)}")
            return np.array(vals)

        out.append(
            IMEXTableau(
                name=fields["name"],
                declared_order=int(fields.get("declared_order", 0)),
                a_ex=vec("a_ex", s * s).reshape(s, s),
                b_ex=vec("b_ex", s),
                c_ex=vec("c_ex", s),
                a_im=vec("a_im", s * s).reshape(s, s),
                b_im=vec("b_im", s),
                c_im=vec("c_im", s),
            )
        )
    return out


def save_catalog(path: str | Path, tableaux: Sequence[IMEXTableau]) -> None:
    Path(path).write_text(format_catalog(tableaux))


def load_catalog(path: str | Path) -> list[IMEXTableau]:
    return parse_catalog(Path(path).read_text())


def resolve(name_or_path: str) -> IMEXTableau:
    """Builtin scheme by name, or the first entry of a catalog file."""
    try:
        return builtin(name_or_path)
    except UnknownSchemeError:
        path = Path(name_or_path)
        if not path.is_file():
            raise
    entries = load_catalog(path)
    if not entries:
        raise UnknownSchemeError(f"catalog {path} is empty")
    return entries[0]


# ------------------------------------------- three-stage type A obstruction


@dataclass
class FeasibilityReport:
    """Outcome of the sweep over three-stage stiffly accurate type A candidates."""

    n_points: int
    n_converged: int
    min_abs_gamma: float
    max_abs_gamma: float
    max_residual: float
    samples: np.ndarray  # columns: c_ex2, c1, a22, b_ex2, b2, c2, gamma

    @property
    def infeasible(self) -> bool:
        return self.n_converged > 0 and self.max_abs_gamma <= 1e-10


def _system_811(x, c_ex2, c1):
    """Order-2 conditions of a three-stage stiffly accurate type A pair.

    Unknowns ``x = (b_ex2, b2, c2, gamma)``; the explicit pair has
    ``c_ex = (0, c_ex2, 1)`` and ``b_ex = (1 - b_ex2, b_ex2, 0)``; the implicit
    weights are ``(1 - gamma - b2, b2, gamma)`` with ``c = (c1, c2, 1)``.
    """
    bt2, b2, c2, g = x
    res = np.stack(
        [
            bt2 * c_ex2 - 0.5,
            (1.0 - g - b2) * c1 + b2 * c2 + g - 0.5,
            (1.0 - bt2) * c1 + bt2 * c2 - 0.5,
            b2 * c_ex2 + g - 0.5,
        ]
    )
    zero = np.zeros_like(bt2)
    one = np.ones_like(bt2)
    jac = np.array(
        [
            [c_ex2 * one, zero, zero, zero],
            [zero, c2 - c1, b2 * one, one - c1],
            [c2 - c1, zero, bt2 * one, zero],
            [zero, c_ex2 * one, zero, one],
        ]
    )
    return res, jac


def theorem81_infeasibility(grid_resolution: int = 50, max_iter: int = 60, tol: float = 1e-13) -> FeasibilityReport:
    """Sweep three-stage stiffly accurate type A candidates and solve the order-2 system.

    For every starting point on a ``grid_resolution``-sized lattice of
    ``(c_ex2, c1, gamma0)`` (and ``a22``, which only enters det A) a batched
    Newton iteration solves for ``(b_ex2, b2, c2, gamma)``.  Converged points
    all have ``gamma = 0``, so ``det A = c1 a22 gamma`` vanishes.
    """
    if grid_resolution < 10:
        raise ValueError("grid_resolution must be at least 10")
    n = grid_resolution
    c_ex2_axis = np.linspace(0.1, 1.0, n)
    c1_axis = np.concatenate([np.linspace(-1.0, -0.05, n // 2), np.linspace(0.05, 1.0, n - n // 2)])
    g0_axis = np.linspace(-1.0, 1.0, n)
    ce, c1, g0 = (m.ravel() for m in np.meshgrid(c_ex2_axis, c1_axis, g0_axis, indexing="ij"))
    a22 = np.resize(np.linspace(0.1, 1.0, n), ce.size)
    x = np.stack([np.full_like(ce, 0.5), np.full_like(ce, 0.25), np.full_like(ce, 0.5), g0])
    for _ in range(max_iter):
        res, jac = _system_811(x, ce, c1)
        jac_t = np.moveaxis(jac, (0, 1), (-2, -1))
        det = np.linalg.det(jac_t)
        ok = np.abs(det) > 1e-14
        step = np.zeros_like(x)
        step[:, ok] = np.linalg.solve(jac_t[ok], res.T[ok][..., None])[..., 0].T
        x = x - step
        if np.max(np.abs(res[:, ok]), initial=0.0) < tol:
            break
    res, _ = _system_811(x, ce, c1)
    rnorm = np.max(np.abs(res), axis=0)
    conv = np.isfinite(rnorm) & (rnorm < 1e-11)
    gam = np.abs(x[3, conv])
    samples = np.column_stack([ce, c1, a22, *x])[conv]
    return FeasibilityReport(
        n_points=ce.size,
        n_converged=int(conv.sum()),
        min_abs_gamma=float(gam.min()) if gam.size else math.nan,
        max_abs_gamma=float(gam.max()) if gam.size else math.nan,
        max_residual=float(rnorm[conv].max()) if conv.any() else math.nan,
        samples=samples,
    )


def _sa_type_a_from_params(theta: np.ndarray, s: int) -> IMEXTableau:
    il = np.tril_indices(s, -1)
    ii = np.tril_indices(s)
    a_ex = np.zeros((s, s))
    a_im = np.zeros((s, s))
    n_ex = len(il[0])
    a_ex[il] = theta[:n_ex]
    a_im[ii] = theta[n_ex:]
    return IMEXTableau(
        name=f"SA_TYPE_A_{s}",
        declared_order=2,
        a_ex=a_ex,
        b_ex=a_ex[-1],
        c_ex=a_ex.sum(axis=1),
        a_im=a_im,
        b_im=a_im[-1],
        c_im=a_im.sum(axis=1),
    )


def search_stiffly_accurate_type_a(s: int, min_diagonal: float = 0.1, n_starts: int = 20, seed: int = 0):
    """Least-squares search for a globally stiffly accurate type A pair of order 2.

    Diagonal entries of the implicit matrix are bounded below by
    ``min_diagonal`` so any solution has an invertible implicit part.
    Returns ``(tableau, residual_norm)`` for the best start.
    """
    from scipy.optimize import least_squares

    n_ex = s * (s - 1) // 2
    n_im = s * (s + 1) // 2
    diag_pos = [n_ex + k * (k + 1) // 2 + k for k in range(s)]
    lo = np.full(n_ex + n_im, -np.inf)
    hi = np.full(n_ex + n_im, np.inf)
    lo[diag_pos] = min_diagonal
    hi[diag_pos] = 1.0

    def residual(theta):
        tab = _sa_type_a_from_params(theta, s)
        conds = [r for _, q, r, _ in _order_conditions(tab, 2)]
        conds.append(tab.c_ex[-1] - 1.0)
        conds.append(tab.c_im[-1] - 1.0)
        return np.array(conds)

    rng = np.random.default_rng(seed)
    best = None
    for _ in range(n_starts):
        theta0 = np.clip(rng.uniform(-0.5, 1.0, n_ex + n_im), lo + 1e-3, hi - 1e-3)
        sol = least_squares(residual, theta0, bounds=(lo, hi), xtol=1e-15, ftol=1e-15, gtol=1e-15)
        norm = float(np.max(np.abs(sol.fun)))
        if best is None or norm < best[1]:
            best = (sol.x, norm)
    return _sa_type_a_from_params(best[0], s), best[1]
