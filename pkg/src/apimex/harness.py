"""Experiment driver: configs, error norms, convergence studies and run artifacts.

Configs are flat ``key = value`` text files.  Lists are comma separated and
``#`` starts a comment.  Unknown keys are rejected so that a typo in, say,
an epsilon exponent cannot silently fall back to a default.
"""
from __future__ import annotations

import csv
import dataclasses
import hashlib
import io
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
from scipy.interpolate import PchipInterpolator

from . import models, stability, transport
from .errors import ConfigError, ShapeMismatchError
from .integrators import Mode, integrate
from .mesh import Recon, total_variation
from .tableaux import resolve

NORMS = ("Linf", "L1", "L2")
KINDS = ("converge", "sweep-eps", "stability", "shock", "transport")
REFERENCES = ("analytic", "fourier", "finegrid", "golden", "tanh", "diffusion", "none")


# ------------------------------------------------------------------ config


def _floats(text: str) -> tuple:
    return tuple(float(t) for t in text.split(",") if t.strip())


def _ints(text: str) -> tuple:
    return tuple(int(t) for t in text.split(",") if t.strip())


def _opt_float(text: str):
    return None if text.strip().lower() in ("", "none") else float(text)


def _opt_int(text: str):
    return None if text.strip().lower() in ("", "none") else int(text)


def _string(text: str) -> str:
    return text.strip()


@dataclass
class ExperimentConfig:
    """One experiment; field names double as config keys."""

    kind: str = "converge"
    name: str = ""
    problem: str = ""
    tableau: str = "ARS222"
    recon: str = "Cds2"
    mode: str = "bpr"
    sizes: tuple = (20, 40, 80, 160, 320)
    cfl: float = 0.5
    dt: Optional[float] = None
    t_end: float = 1.0
    times: tuple = ()
    eps: Optional[float] = None
    eps2: Optional[float] = None
    eps2_list: tuple = (1e-6, 1e-5, 1e-4, 1e-3, 1e-2, 1e-1, 1.0)
    k0: Optional[float] = None
    C: Optional[float] = None
    sigma: Optional[float] = None
    split: str = "flux"
    derivative: str = "central"
    laplacian_order: Optional[int] = None
    alpha: float = 1.0
    norm: str = "Linf"
    reference: str = "analytic"
    reference_n: Optional[int] = None
    reference_dt: Optional[float] = None
    fourier_modes: int = 64
    golden: str = ""
    variant: str = "graded"
    nv: int = 8
    closure: str = "density"
    window: Optional[float] = None
    exclude_interface: int = 0
    mu_list: tuple = (1.0, 0.75, 0.5, 0.25, 0.0)
    samples: int = 20
    seed: int = 0
    rate_min: Optional[float] = None
    rate_max: Optional[float] = None
    check_pairs: int = 1
    tolerance: Optional[float] = None
    tv_slack: Optional[float] = None
    output: str = "out"

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError(f"kind must be one of {KINDS}, got {self.kind!r}")
        if self.norm not in NORMS:
            raise ConfigError(f"norm must be one of {NORMS}, got {self.norm!r}")
        if self.reference not in REFERENCES:
            raise ConfigError(f"reference must be one of {REFERENCES}, got {self.reference!r}")
        sizes = tuple(int(n) for n in self.sizes)
        if any(b <= a for a, b in zip(sizes, sizes[1:])):
            raise ConfigError("sizes must be strictly increasing")
        if self.kind in ("converge", "sweep-eps") and len(sizes) < 2:
            raise ConfigError("a rate study needs at least two grid sizes")
        self.sizes = sizes
        if self.eps is not None and self.eps2 is not None:
            raise ConfigError("give eps or eps2, not both")
        if self.kind != "stability" and not self.problem:
            raise ConfigError("missing required key 'problem'")

    @property
    def eps_value(self) -> Optional[float]:
        if self.eps2 is not None:
            return math.sqrt(self.eps2)
        return self.eps

    def problem_overrides(self) -> dict:
        out = {}
        if self.eps_value is not None:
            out["eps"] = self.eps_value
        for key in ("k0", "C", "sigma"):
            if getattr(self, key) is not None:
                out[key] = getattr(self, key)
        return out

    def disc_options(self) -> dict:
        out = {"split": self.split, "derivative": self.derivative, "alpha": self.alpha}
        if self.laplacian_order is not None:
            out["laplacian_order"] = self.laplacian_order
        return out

    def to_text(self) -> str:
        lines = []
        for f in dataclasses.fields(self):
            value = getattr(self, f.name)
            if isinstance(value, tuple):
                value = ", ".join(repr(v) if isinstance(v, float) else str(v) for v in value)
            elif value is None:
                value = "none"
            elif isinstance(value, float):
                value = repr(value)
            lines.append(f"{f.name} = {value}")
        return "\n".join(lines) + "\n"


_PARSERS: dict = {
    "kind": _string,
    "name": _string,
    "problem": _string,
    "tableau": _string,
    "recon": _string,
    "mode": _string,
    "sizes": _ints,
    "cfl": float,
    "dt": _opt_float,
    "t_end": float,
    "times": _floats,
    "eps": _opt_float,
    "eps2": _opt_float,
    "eps2_list": _floats,
    "k0": _opt_float,
    "C": _opt_float,
    "sigma": _opt_float,
    "split": _string,
    "derivative": _string,
    "laplacian_order": _opt_int,
    "alpha": float,
    "norm": _string,
    "reference": _string,
    "reference_n": _opt_int,
    "reference_dt": _opt_float,
    "fourier_modes": int,
    "golden": _string,
    "variant": _string,
    "nv": int,
    "closure": _string,
    "window": _opt_float,
    "exclude_interface": int,
    "mu_list": _floats,
    "samples": int,
    "seed": int,
    "rate_min": _opt_float,
    "rate_max": _opt_float,
    "check_pairs": int,
    "tolerance": _opt_float,
    "tv_slack": _opt_float,
    "output": _string,
}
assert set(_PARSERS) == {f.name for f in dataclasses.fields(ExperimentConfig)}


def parse_config(text: str, **overrides) -> ExperimentConfig:
    values: dict = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, _, value = (s.strip() for s in line.partition("="))
        if key not in _PARSERS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in values:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        try:
            values[key] = _PARSERS[key](value)
        except ValueError as exc:
            raise ConfigError(f"line {lineno}: bad value for {key!r}: {exc}") from None
    for key in overrides:
        if key not in _PARSERS:
            raise ConfigError(f"unknown key {key!r}")
    values.update(overrides)
    return ExperimentConfig(**values)


def load_config(path) -> ExperimentConfig:
    """Read a config file, or the config embedded in a run manifest (``.json``)."""
    path = Path(path)
    text = path.read_text()
    if path.suffix == ".json":
        try:
            text = json.loads(text)["config"]
        except (KeyError, json.JSONDecodeError) as exc:
            raise ConfigError(f"{path} is not a run manifest") from exc
    return parse_config(text)


# ------------------------------------------------------------------ norms


def error_norm(numeric, reference, norm: str = "Linf", dx: float = 1.0) -> float:
    """Discrete norm of ``numeric - reference``; L1 and L2 carry dx and sqrt(dx)."""
    a = np.asarray(numeric, dtype=float)
    b = np.asarray(reference, dtype=float)
    if a.shape != b.shape:
        raise ShapeMismatchError(f"shapes differ: {a.shape} vs {b.shape}")
    d = np.abs(a - b)
    if d.size == 0:
        return 0.0
    if norm == "Linf":
        return float(d.max())
    if norm == "L1":
        return float(d.sum() * dx)
    if norm == "L2":
        return float(math.sqrt(float(d @ d)) * math.sqrt(dx))
    raise ValueError(f"unknown norm {norm!r}")


def interpolate_reference(x_ref, u_ref, x) -> np.ndarray:
    """Monotone piecewise-cubic (PCHIP) interpolation of fine-grid data."""
    return PchipInterpolator(np.asarray(x_ref), np.asarray(u_ref), extrapolate=True)(np.asarray(x))


def observed_rate(e_coarse: float, e_fine: float) -> float:
    if e_coarse <= 0.0 or e_fine <= 0.0:
        return math.nan
    return math.log2(e_coarse / e_fine)


@dataclass(frozen=True)
class ConvergenceRow:
    n: int
    error: float
    rate: Optional[float] = None  # defined from the second row on


def convergence_rows(sizes: Sequence[int], errors: Sequence[float]) -> list:
    rows = []
    for k, (n, e) in enumerate(zip(sizes, errors)):
        rows.append(ConvergenceRow(int(n), float(e), None if k == 0 else observed_rate(errors[k - 1], e)))
    return rows


def shock_center(x, u, level: float) -> float:
    """First crossing of ``level`` by linear interpolation."""
    s = np.asarray(u) - level
    idx = np.nonzero(s[:-1] * s[1:] <= 0.0)[0]
    if idx.size == 0:
        raise ValueError("profile does not cross the requested level")
    i = idx[0]
    if s[i + 1] == s[i]:
        return float(x[i])
    return float(x[i] - s[i] * (x[i + 1] - x[i]) / (s[i + 1] - s[i]))


# --------------------------------------------------------------- relaxation


def build_problem(cfg: ExperimentConfig):
    try:
        return models.make_problem(cfg.problem, **cfg.problem_overrides())
    except KeyError as exc:
        raise ConfigError(f"problem: {exc.args[0]}") from None
    except TypeError as exc:
        raise ConfigError(f"problem {cfg.problem!r} does not accept these overrides: {exc}") from None


def solve_relaxation(cfg: ExperimentConfig, n: int, prob=None, t_end: Optional[float] = None):
    prob = prob or build_problem(cfg)
    grid = prob.grid(n)
    dt = None if cfg.dt is None else cfg.dt
    return integrate(
        prob,
        resolve(cfg.tableau),
        grid,
        Recon.parse(cfg.recon),
        cfg.t_end if t_end is None else t_end,
        cfl=cfg.cfl,
        mode=Mode.parse(cfg.mode),
        dt=dt,
        **cfg.disc_options(),
    )


def _finegrid_reference(cfg: ExperimentConfig, prob, cache: dict):
    n_ref = cfg.reference_n or 8 * cfg.sizes[-1]
    key = ("fine", n_ref, prob.eps)
    if key not in cache:
        traj = solve_relaxation(cfg, n_ref, prob)
        cache[key] = (traj.grid.x, traj.final.u)
    return cache[key]


def reference_u(cfg: ExperimentConfig, prob, x, t: float, numeric_u=None, cache: Optional[dict] = None):
    """Reference values of u at nodes ``x`` according to ``cfg.reference``."""
    cache = {} if cache is None else cache
    kind = cfg.reference
    if kind == "analytic":
        if prob.name == "linear_diffusion":
            return models.linear_diffusion_exact(x, t)
        if prob.name == "riemann_heat":
            return models.riemann_heat_free_space(x, t, prob.params["u_left"], prob.params["u_right"])
        if prob.name == "ruijgrok_wu":
            pr = prob.params
            return models.burgers_cole_hopf(x, t, pr["k0"], pr["u_left"], pr["u_right"])
        raise ConfigError(f"no analytic solution for problem {prob.name!r}")
    if kind == "fourier":
        return models.fourier_reference(prob, x, t, modes=cfg.fourier_modes)[0]
    if kind == "finegrid":
        xf, uf = _finegrid_reference(cfg, prob, cache)
        return interpolate_reference(xf, uf, x)
    if kind == "golden":
        if not cfg.golden:
            raise ConfigError("reference = golden needs the key 'golden'")
        cols = read_csv_columns(cfg.golden)
        return interpolate_reference(cols["x"], cols["u"], x)
    if kind == "tanh":
        if prob.name != "ruijgrok_wu":
            raise ConfigError("the tanh traveling wave exists only for ruijgrok_wu")
        pr = prob.params
        level = 0.5 * (pr["u_left"] + pr["u_right"])
        speed = level
        shift = 0.0
        if numeric_u is not None:
            shift = shock_center(x, numeric_u, level) - speed * t
        return models.burgers_traveling_wave(x, t, pr["k0"], pr["u_left"], pr["u_right"], shift=shift)
    raise ConfigError(f"reference {kind!r} is not available for relaxation problems")


def convergence_study(cfg: ExperimentConfig, cache: Optional[dict] = None) -> list:
    """Errors at each grid size and successive observed rates."""
    prob = build_problem(cfg)
    cache = {} if cache is None else cache
    errors = []
    for n in cfg.sizes:
        traj = solve_relaxation(cfg, n, prob)
        x = traj.grid.x
        ref = reference_u(cfg, prob, x, cfg.t_end, traj.final.u, cache)
        errors.append(error_norm(traj.final.u, ref, cfg.norm, traj.grid.dx))
    return convergence_rows(cfg.sizes, errors)


@dataclass(frozen=True)
class SweepRow:
    eps2: float
    n_coarse: int
    n_fine: int
    error_coarse: float
    error_fine: float
    rate: float


def epsilon_sweep(cfg: ExperimentConfig, eps2_list: Optional[Sequence[float]] = None) -> list:
    """Two-grid rate (two finest sizes) for each eps^2."""
    rows = []
    for e2 in (cfg.eps2_list if eps2_list is None else eps2_list):
        sub = dataclasses.replace(cfg, kind="converge", eps=None, eps2=float(e2), sizes=tuple(cfg.sizes[-2:]))
        c, f = convergence_study(sub)
        rows.append(SweepRow(float(e2), c.n, f.n, c.error, f.error, f.rate))
    return rows


@dataclass(frozen=True)
class ShockResult:
    n: int
    x: np.ndarray
    u: np.ndarray
    reference: np.ndarray
    error: float
    tv: float
    tv_initial: float


def shock_study(cfg: ExperimentConfig, cache: Optional[dict] = None) -> list:
    """One ``ShockResult`` per grid size: error against the reference and total variation."""
    prob = build_problem(cfg)
    out = []
    for n in cfg.sizes:
        traj = solve_relaxation(cfg, n, prob)
        x = traj.grid.x
        ref = reference_u(cfg, prob, x, cfg.t_end, traj.final.u, cache)
        u0 = prob.initial_state(traj.grid).u
        out.append(
            ShockResult(n, x, traj.final.u, ref, error_norm(traj.final.u, ref, cfg.norm, traj.grid.dx), total_variation(traj.final.u), total_variation(u0))
        )
    return out


# ---------------------------------------------------------------- stability


@dataclass(frozen=True)
class StabilityRow:
    eps: float
    xi: float
    mu: float
    printed_bound: float
    spectral_threshold: float
    empirical_threshold: float

    @property
    def relative_gap(self) -> float:
        a, b = self.empirical_threshold, self.printed_bound
        if math.isinf(a) and math.isinf(b):
            return 0.0
        if math.isinf(a) or math.isinf(b) or b == 0.0:
            return math.inf
        return abs(a - b) / b


def stability_samples(n: int, seed: int = 0):
    """``n`` (eps, xi) draws with 2 eps |xi| < 1."""
    rng = np.random.default_rng(seed)
    out = []
    while len(out) < n:
        eps = 10.0 ** rng.uniform(-2.0, -0.5)
        xi = float(rng.integers(1, 8))
        if 2.0 * eps * xi < 0.95:
            out.append((float(eps), xi))
    return out


def stability_study(cfg: ExperimentConfig) -> list:
    rows = []
    for eps, xi in stability_samples(cfg.samples, cfg.seed):
        for mu in cfg.mu_list:
            rows.append(
                StabilityRow(
                    eps,
                    xi,
                    mu,
                    stability.max_stable_dt(eps, xi, mu),
                    stability.spectral_radius_threshold(eps, xi, mu),
                    stability.empirical_blowup_threshold(eps, xi, mu),
                )
            )
    return rows


# ---------------------------------------------------------------- transport


def build_transport_problem(cfg: ExperimentConfig, n: Optional[int] = None, variant: Optional[str] = None):
    name = cfg.problem
    if name == "problem_I":
        return transport.make_problem_I(n or cfg.sizes[0])
    if name == "problem_II":
        return transport.make_problem_II(variant or cfg.variant, n or cfg.sizes[0])
    if name == "problem_III":
        eps = cfg.eps_value if cfg.eps_value is not None else 1e-2
        return transport.make_problem_III(eps, n or cfg.sizes[0])
    raise ConfigError(f"problem: unknown transport problem {name!r}")


@dataclass(frozen=True)
class TransportResult:
    t: float
    x: np.ndarray
    rho: np.ndarray
    flux: np.ndarray
    reference: Optional[np.ndarray]
    error: Optional[float]


def _transport_dt(cfg: ExperimentConfig, prob) -> float:
    return cfg.dt if cfg.dt is not None else cfg.cfl * prob.grid.dx


def transport_reference(cfg: ExperimentConfig, prob, ang, times):
    """{t: (x_ref, rho_ref)} for ``cfg.reference`` in {diffusion, finegrid}."""
    if cfg.reference == "diffusion":
        n_ref = cfg.reference_n or 200
        dt_ref = cfg.reference_dt or 1e-5
        grid, rho = transport.diffusion_limit_reference(prob, n_ref, dt_ref, max(times), ang=ang, snapshots=times)
        return {t: (grid.x, rho[t]) for t in times}
    if cfg.reference == "finegrid":
        n_ref = cfg.reference_n or 400
        ref_prob = build_transport_problem(cfg, n_ref, variant="uniform")
        dt_ref = cfg.reference_dt or _transport_dt(cfg, ref_prob)
        states = transport.run_transport(
            ref_prob, ang, resolve(cfg.tableau), dt_ref, max(times), snapshots=times, closure="coupled", recon=cfg.recon
        )
        return {t: (ref_prob.grid.x, transport.moment_rho(states[t], ang)) for t in times}
    return None


def transport_study(cfg: ExperimentConfig, reference_cache: Optional[dict] = None) -> list:
    """Profiles of rho (and the flux moment) at ``cfg.times`` plus errors against the reference."""
    prob = build_transport_problem(cfg)
    ang = transport.AngularGrid.gauss(cfg.nv)
    times = tuple(cfg.times) if cfg.times else (cfg.t_end,)
    states = transport.run_transport(
        prob, ang, resolve(cfg.tableau), _transport_dt(cfg, prob), max(times), snapshots=times, closure=cfg.closure, recon=cfg.recon
    )
    key = (cfg.problem, cfg.variant, cfg.eps_value, cfg.reference, cfg.reference_n, cfg.reference_dt, times)
    if reference_cache is not None and key in reference_cache:
        refs = reference_cache[key]
    else:
        refs = transport_reference(cfg, prob, ang, times)
        if reference_cache is not None:
            reference_cache[key] = refs
    x = prob.grid.x
    mask = np.ones(x.size, dtype=bool)
    if cfg.window is not None:
        mask &= x <= cfg.window
    if cfg.exclude_interface:
        for blk in transport.transport_blocks(prob)[1:]:
            k = cfg.exclude_interface
            mask[max(blk.start - k, 0) : blk.start + k] = False
    out = []
    for t in times:
        st = states[t]
        rho = transport.moment_rho(st, ang)
        flux = transport.moment_flux(st, ang, prob)
        ref = err = None
        if refs is not None:
            xr, rr = refs[t]
            ref = interpolate_reference(xr, rr, x)
            err = error_norm(rho[mask], ref[mask], cfg.norm, prob.grid.dx)
        out.append(TransportResult(float(t), x, rho, flux, ref, err))
    return out


# --------------------------------------------------------------------- checks


@dataclass(frozen=True)
class Check:
    label: str
    value: float
    passed: bool

    def line(self) -> str:
        return f"{'PASS' if self.passed else 'FAIL'}  {self.label}: {self.value:.6g}"


def rate_checks(cfg: ExperimentConfig, rows: Sequence[ConvergenceRow]) -> list:
    checks = []
    if cfg.rate_min is None and cfg.rate_max is None:
        return checks
    lo = -math.inf if cfg.rate_min is None else cfg.rate_min
    hi = math.inf if cfg.rate_max is None else cfg.rate_max
    rated = [r for r in rows if r.rate is not None]
    for r in rated[-cfg.check_pairs :]:
        checks.append(Check(f"rate at N={r.n} in [{lo}, {hi}]", r.rate, lo <= r.rate <= hi))
    return checks


def tolerance_checks(cfg: ExperimentConfig, labels_errors) -> list:
    if cfg.tolerance is None:
        return []
    return [Check(f"{label} <= {cfg.tolerance}", e, e <= cfg.tolerance) for label, e in labels_errors]


# ----------------------------------------------------------------------- I/O


def format_csv(header: Sequence[str], rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow(["" if v is None else (format(v, ".17g") if isinstance(v, (float, np.floating)) else v) for v in row])
    return buf.getvalue()


def read_csv_columns(path) -> dict:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        data = [[float(v) if v != "" else math.nan for v in row] for row in reader]
    arr = np.array(data, dtype=float).reshape(len(data), len(header))
    return {h: arr[:, k] for k, h in enumerate(header)}


def _sha256(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


@dataclass
class RunOutput:
    files: dict = field(default_factory=dict)  # name -> text
    checks: list = field(default_factory=list)
    summary: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)


def execute(cfg: ExperimentConfig) -> RunOutput:
    """Run the experiment in memory; ``run`` writes the result to disk."""
    out = RunOutput()
    if cfg.kind == "converge":
        rows = convergence_study(cfg)
        out.files["convergence.csv"] = format_csv(("N", "error", "rate"), [(r.n, r.error, r.rate) for r in rows])
        out.summary += [f"N={r.n:5d}  {cfg.norm} error={r.error:.4e}  rate={'' if r.rate is None else f'{r.rate:.3f}'}" for r in rows]
        out.checks += rate_checks(cfg, rows)
        out.checks += tolerance_checks(cfg, [(f"error at N={rows[-1].n}", rows[-1].error)])
    elif cfg.kind == "sweep-eps":
        rows = epsilon_sweep(cfg)
        out.files["sweep.csv"] = format_csv(
            ("eps2", "n_coarse", "n_fine", "error_coarse", "error_fine", "rate"),
            [(r.eps2, r.n_coarse, r.n_fine, r.error_coarse, r.error_fine, r.rate) for r in rows],
        )
        out.summary += [f"eps2={r.eps2:.1e}  rate={r.rate:.3f}" for r in rows]
        if cfg.rate_min is not None:
            out.checks += [Check(f"rate at eps2={r.eps2:g} >= {cfg.rate_min}", r.rate, r.rate >= cfg.rate_min) for r in rows]
    elif cfg.kind == "stability":
        rows = stability_study(cfg)
        out.files["stability.csv"] = format_csv(
            ("eps", "xi", "mu", "printed_bound", "spectral_threshold", "empirical_threshold", "relative_gap"),
            [(r.eps, r.xi, r.mu, r.printed_bound, r.spectral_threshold, r.empirical_threshold, r.relative_gap) for r in rows],
        )
        gap = max(r.relative_gap for r in rows)
        out.summary.append(f"{len(rows)} samples; largest relative gap between blow-up threshold and printed bound {gap:.3g}")
        if cfg.tolerance is not None:
            out.checks.append(Check(f"max relative gap <= {cfg.tolerance}", gap, gap <= cfg.tolerance))
    elif cfg.kind == "shock":
        results = shock_study(cfg)
        for r in results:
            out.files[f"solution_N{r.n}.csv"] = format_csv(("x", "u", "reference"), zip(r.x, r.u, r.reference))
            out.summary.append(f"N={r.n}  {cfg.norm} error={r.error:.4e}  TV={r.tv:.10f}  TV0={r.tv_initial:.10f}")
            out.checks += tolerance_checks(cfg, [(f"error at N={r.n}", r.error)])
            if cfg.tv_slack is not None:
                growth = r.tv - r.tv_initial
                out.checks.append(Check(f"TV growth at N={r.n} <= {cfg.tv_slack:g}", growth, growth <= cfg.tv_slack))
    elif cfg.kind == "transport":
        results = transport_study(cfg)
        for r in results:
            cols = [r.x, r.rho, r.flux] + ([r.reference] if r.reference is not None else [])
            header = ["x", "rho", "flux_moment"] + (["reference"] if r.reference is not None else [])
            out.files[f"rho_t{r.t:g}.csv"] = format_csv(header, zip(*cols))
            if r.error is not None:
                out.summary.append(f"t={r.t:g}  {cfg.norm} error={r.error:.4e}")
                out.checks += tolerance_checks(cfg, [(f"error at t={r.t:g}", r.error)])
            else:
                out.summary.append(f"t={r.t:g}  max rho={np.max(r.rho):.6g}")
    out.summary += [c.line() for c in out.checks]
    return out


def run(cfg: ExperimentConfig, outdir=None) -> dict:
    """Write CSVs, ``summary.txt`` and ``manifest.json``; returns the manifest."""
    outdir = Path(outdir if outdir is not None else cfg.output)
    outdir.mkdir(parents=True, exist_ok=True)
    res = execute(cfg)
    files = dict(res.files)
    files["summary.txt"] = "\n".join(res.summary) + "\n"
    hashes = {}
    for name in sorted(files):
        data = files[name].encode()
        (outdir / name).write_bytes(data)
        hashes[name] = _sha256(data)
    manifest = {
        "config": cfg.to_text(),
        "kind": cfg.kind,
        "outputs": hashes,
        "passed": res.passed,
    }
    if cfg.kind != "stability":
        try:
            manifest["tableau_checksum"] = resolve(cfg.tableau).checksum()
        except Exception:  # tableau is informational here
            manifest["tableau_checksum"] = None
    manifest["grid"] = {"sizes": list(cfg.sizes), "cfl": cfg.cfl, "dt": cfg.dt}
    (outdir / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return manifest


def verify_manifest(manifest_path, outdir) -> bool:
    """Re-run the config stored in a manifest and compare output hashes."""
    manifest = json.loads(Path(manifest_path).read_text())
    cfg = parse_config(manifest["config"])
    new = run(cfg, outdir)
    return new["outputs"] == manifest["outputs"]
