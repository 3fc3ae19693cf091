"""Named end-to-end studies, their configuration format and reports.

Configuration files are flat ``key = value`` text, one entry per line, ``#``
starting a comment and lists separated by commas::

    study = lap-zero
    problem = identity-dipole
    L = 8
    n = 513
    eps_ladder = 0.1, 0.025, 0.00625
    tol.cauchy = 1e-3

Every study returns a :class:`StudyReport`.  Each pass/fail verdict is a
:class:`Check` carrying the measured value and the tolerance it was held
to.  Wall-clock times live in a separate ``timing`` section so that two
runs of the same configuration can be compared for bitwise-identical
numerics.
"""
import csv
import json
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

from .analysis import (compute_norms, difference_norm, fit_decay, ladder,
                       source_norms)
from .errors import ConfigurationError, DomainError, SolverError
from .exterior import (exterior_eval, flux, radiation_residual, trace_on_circle,
                       circle_angles)
from .fd_solver import (BoundaryClosure, CLOSURE_KINDS, assemble, conv_oracle,
                        default_trace_radius, discrete_flux_balance, solve)
from .grid import Grid, GridField
from .problem import (SourceTerm, SpectralShift, dipole_source, get_problem, is_identity,
                      monopole_source)
from . import special_functions as sf

STUDIES = ("lap-zero", "lap-helmholtz", "k-to-zero", "decay", "flux", "kernels")
DEFAULT_EPS_LADDER = tuple(0.1 * 4.0 ** -j for j in range(8))
DEFAULT_HELMHOLTZ_EPS_LADDER = tuple(0.1 * 4.0 ** -j for j in range(6))
DEFAULT_K_LADDER = (0.5, 0.25, 0.125, 0.0625)
DEFAULT_TOLERANCES = {
    "cauchy": 1e-3,            # final ladder diff, weighted sup norm
    "helmholtz_ladder": 1e-3,  # final ladder diff, both Helmholtz norms
    "flux": 1e-3,
    "decay_zero": 0.15,        # |p - 1|
    "decay_helmholtz": 0.1,    # |p - 1/2|
    "bound_drift": 0.01,       # relative change of the norm ratio over the last rung
    "blowup": 0.10,            # relative deviation from the ln-ratio / 4 pi law
    "oracle": 0.02,
    "representation": 0.01,
    "radiation_exponent": 1.0,
    "k_limit": 5e-3,
    "balance": 1e-9,
}
RAY_NOTE = ("complex wave numbers are approached only along the absorption ray "
            "k^2 + i eps and along real k; other rays are not implemented")
ORACLE_STRIDE = 4


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class StudyConfig:
    study: str = "lap-zero"
    problem: str = "identity-dipole"
    half_width: float = 8.0
    n: int = 513
    eps_ladder: tuple = None
    k_ladder: tuple = DEFAULT_K_LADDER
    k: float = 1.0
    b: float = 2.0
    tolerances: dict = field(default_factory=dict)
    out_dir: str = "lap2d-out"
    closure: str = "representation"
    trace_samples: int = 128
    coarse_n: int = 129

    def __post_init__(self):
        if self.study not in STUDIES:
            raise ConfigurationError(f"unknown study {self.study!r}; choose from {', '.join(STUDIES)}")
        if self.eps_ladder is None:
            default = (DEFAULT_HELMHOLTZ_EPS_LADDER if self.study == "lap-helmholtz"
                       else DEFAULT_EPS_LADDER)
            object.__setattr__(self, "eps_ladder", default)
        for name in ("eps_ladder", "k_ladder"):
            values = tuple(float(v) for v in getattr(self, name))
            if not values or any(v <= 0 for v in values) or any(
                    q >= p for p, q in zip(values, values[1:])):
                raise ConfigurationError(f"{name} must be positive and strictly decreasing")
            object.__setattr__(self, name, values)
        unknown = set(self.tolerances) - set(DEFAULT_TOLERANCES)
        if unknown:
            raise ConfigurationError(f"unknown tolerance keys: {', '.join(sorted(unknown))}")
        if any(not v > 0 for v in self.tolerances.values()):
            raise ConfigurationError("tolerances must be positive")
        if not self.b > 1:
            raise ConfigurationError("b must exceed 1")
        if not self.k > 0:
            raise ConfigurationError("k must be positive")
        if self.closure not in CLOSURE_KINDS:
            raise ConfigurationError(f"unknown closure {self.closure!r}")
        if self.closure == "robin-radiation" and self.study in ("lap-zero", "decay", "flux"):
            raise ConfigurationError("robin-radiation closure needs k > 0; use it for Helmholtz studies")
        if self.trace_samples < 64 or self.trace_samples % 2:
            raise ConfigurationError("trace_samples must be even and at least 64")
        try:
            Grid(self.half_width, self.n)
            Grid(self.half_width, self.coarse_n)
        except DomainError as exc:
            raise ConfigurationError(str(exc)) from None

    def tol(self, name):
        return float(self.tolerances.get(name, DEFAULT_TOLERANCES[name]))

    def grid(self):
        return Grid(self.half_width, self.n)

    def echo(self):
        out = {f.name: getattr(self, f.name) for f in fields(self)}
        out["tolerances"] = {k: self.tol(k) for k in DEFAULT_TOLERANCES}
        return _jsonable(out)


_KEY_ALIASES = {"L": "half_width", "half_width": "half_width", "grid": "grid"}
_LIST_KEYS = ("eps_ladder", "k_ladder")
_FLOAT_KEYS = ("half_width", "k", "b")
_INT_KEYS = ("n", "trace_samples", "coarse_n")
_STR_KEYS = ("study", "problem", "out_dir", "closure")


def parse_config(text):
    """``key = value`` lines to a dict of raw strings."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigurationError(f"line {lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        if not key:
            raise ConfigurationError(f"line {lineno}: empty key")
        out[key] = value
    return out


def config_from_mapping(mapping):
    """Build a :class:`StudyConfig` from raw string (or already typed) values."""
    kwargs, tolerances = {}, {}
    try:
        for key, value in mapping.items():
            if value is None:
                continue
            key = _KEY_ALIASES.get(key, key)
            if key.startswith("tol."):
                tolerances[key[4:]] = float(value)
            elif key == "grid":
                parts = _as_list(value)
                if len(parts) != 2:
                    raise ConfigurationError("grid expects 'L, n'")
                kwargs["half_width"], kwargs["n"] = float(parts[0]), _as_int(parts[1])
            elif key in _LIST_KEYS:
                kwargs[key] = tuple(float(v) for v in _as_list(value))
            elif key in _FLOAT_KEYS:
                kwargs[key] = float(value)
            elif key in _INT_KEYS:
                kwargs[key] = _as_int(value)
            elif key in _STR_KEYS:
                kwargs[key] = str(value)
            elif key == "tolerances":
                tolerances.update({k: float(v) for k, v in dict(value).items()})
            else:
                raise ConfigurationError(f"unknown configuration key {key!r}")
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigurationError):
            raise
        raise ConfigurationError(f"malformed value: {exc}") from None
    if tolerances:
        kwargs["tolerances"] = tolerances
    return StudyConfig(**kwargs)


def _as_list(value):
    if isinstance(value, str):
        return [v.strip() for v in value.split(",") if v.strip()]
    return list(value)


def _as_int(value):
    f = float(value)
    if f != int(f):
        raise ConfigurationError(f"expected an integer, got {value!r}")
    return int(f)


def load_config(path, overrides=None):
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigurationError(f"cannot read config {path}: {exc}") from None
    mapping = parse_config(text)
    mapping.update({k: v for k, v in (overrides or {}).items() if v is not None})
    return config_from_mapping(mapping)


# ---------------------------------------------------------------------------
# reports
# ---------------------------------------------------------------------------

@dataclass
class Check:
    name: str
    value: float
    tolerance: float
    comparison: str
    passed: bool
    detail: str = ""


@dataclass
class StudyReport:
    study: str
    config: dict
    entries: list = field(default_factory=list)
    ladders: dict = field(default_factory=dict)
    fits: dict = field(default_factory=dict)
    fluxes: dict = field(default_factory=dict)
    checks: list = field(default_factory=list)
    notes: list = field(default_factory=list)
    tables: dict = field(default_factory=dict)
    timing: dict = field(default_factory=dict)

    @property
    def passed(self):
        return all(c.passed for c in self.checks)

    def add_check(self, name, value, tolerance, comparison, passed, detail=""):
        self.checks.append(Check(name, float(value), float(tolerance), comparison,
                                 bool(passed), detail))

    def numerics(self):
        """Everything except wall-clock timing, as plain JSON data."""
        return _jsonable({
            "study": self.study, "config": self.config, "entries": self.entries,
            "ladders": self.ladders, "fits": self.fits, "fluxes": self.fluxes,
            "checks": [c.__dict__ for c in self.checks], "notes": self.notes,
            "passed": self.passed,
        })

    def to_json(self):
        doc = self.numerics()
        doc["timing"] = _jsonable(self.timing)
        return json.dumps(doc, indent=2, sort_keys=True)

    def summary_lines(self):
        lines = []
        for c in self.checks:
            verdict = "PASS" if c.passed else "FAIL"
            lines.append(f"[{verdict}] {self.study}:{c.name} value={c.value:.6g} "
                         f"{c.comparison} tol={c.tolerance:.6g} {c.detail}".rstrip())
        return lines


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (complex, np.complexfloating)):
        return [float(obj.real), float(obj.imag)]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def write_report(report, out_dir):
    """Write ``<study>.json`` and one CSV per table into ``out_dir``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / f"{report.study}.json").write_text(report.to_json())
    for name, (header, rows) in report.tables.items():
        with open(out / f"{report.study}-{name}.csv", "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(header)
            writer.writerows([[_csv_cell(v) for v in row] for row in rows])
    return out


def _csv_cell(v):
    return repr(float(v)) if isinstance(v, (float, np.floating)) else v


# ---------------------------------------------------------------------------
# shared machinery
# ---------------------------------------------------------------------------

def max_workers():
    raw = os.environ.get("LAP2D_THREADS", "1")
    try:
        value = int(raw)
    except ValueError:
        raise ConfigurationError(f"LAP2D_THREADS must be an integer, got {raw!r}") from None
    if value < 1:
        raise ConfigurationError("LAP2D_THREADS must be at least 1")
    return value


def _closure(config, shift):
    if config.closure == "robin-radiation":
        return BoundaryClosure("robin-radiation", k=shift.k, samples=config.trace_samples)
    return BoundaryClosure(config.closure, samples=config.trace_samples)


def solve_problem(problem, shift, grid, config):
    """Assemble and solve one parameter point; returns ``(field, seconds)``."""
    start = time.perf_counter()
    try:
        system = assemble(problem.coefficients, shift, grid, _closure(config, shift))
        u = solve(system, problem.source)
    except SolverError as exc:
        raise SolverError(f"{shift.kind} eps={shift.eps:g} k={shift.k:g}: {exc}",
                          exc.residual, exc.iterations) from None
    u.meta["system"] = system
    return u, time.perf_counter() - start


def solve_many(problem, shifts, grid, config):
    workers = min(max_workers(), len(shifts))
    if workers <= 1:
        return [solve_problem(problem, s, grid, config) for s in shifts]
    with ThreadPoolExecutor(workers) as pool:
        return list(pool.map(lambda s: solve_problem(problem, s, grid, config), shifts))


def trace_radius(grid, problem):
    return default_trace_radius(grid, problem.perturbation_radius)


def representation_error(u, shift, radius, m=128):
    """Relative max mismatch between the exterior formula and the field on ``|x| = 2 radius``."""
    trace = trace_on_circle(u, radius, m)
    angles = circle_angles(64)
    pts = 2.0 * radius * np.column_stack([np.cos(angles), np.sin(angles)])
    rep = exterior_eval(trace, pts, shift)
    direct = u.interpolator()(pts[:, 0], pts[:, 1])
    scale = np.max(np.abs(direct))
    if scale == 0:
        return float(np.max(np.abs(rep)))
    return float(np.max(np.abs(rep - direct)) / scale)


def oracle_error(u, problem, shift, stride=ORACLE_STRIDE):
    """Relative max-norm gap between a field and the convolution oracle on ``B_2R``."""
    grid = u.grid
    x1, x2 = grid.mesh()
    c = grid.n // 2
    sub = (slice(c % stride, None, stride),) * 2  # keeps the origin
    mask = np.hypot(x1, x2)[sub] <= 2.0 * problem.perturbation_radius
    pts = np.column_stack([x1[sub][mask], x2[sub][mask]])
    ref = conv_oracle(problem.source, shift, pts, problem.coefficients)
    fd = u.data[sub][mask]
    scale = np.max(np.abs(ref))
    return float(np.max(np.abs(fd - ref)) / scale) if scale > 0 else float(np.max(np.abs(fd)))


def truncation_sensitivity(problem, shift, config):
    """Weighted-sup gap on ``B_{L/2}`` between coarse solves at ``L`` and ``2L``."""
    small = Grid(config.half_width, config.coarse_n)
    big = Grid(2.0 * config.half_width, 2 * config.coarse_n - 1)
    u_small, _ = solve_problem(problem, shift, small, config)
    u_big, _ = solve_problem(problem, shift, big, config)
    q = (config.coarse_n - 1) // 2
    inner = GridField(small, u_big.data[q:q + config.coarse_n, q:q + config.coarse_n])
    region = (0.0, 0.5 * config.half_width)
    gap = difference_norm(inner - u_small, "sup_weighted", region)
    scale = difference_norm(u_small, "sup_weighted", region)
    return {"parameter": shift.eps if shift.eps else shift.k, "kind": shift.kind,
            "coarse_n": config.coarse_n, "absolute": gap,
            "relative": gap / scale if scale else gap}


def _is_zero(fields_):
    return all(not np.any(u.data) for u in fields_)


def _drift(values):
    if len(values) < 2 or values[-1] == 0:
        return 0.0
    return abs(values[-1] - values[-2]) / abs(values[-1])


def _fit_slope(x, y):
    A = np.column_stack([np.ones_like(x), x])
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    return float(coef[1])


def _new_report(config, problem=None):
    report = StudyReport(config.study, config.echo())
    report.notes.append(RAY_NOTE)
    if problem is not None:
        report.notes.append(f"problem {problem.name}: {problem.notes}")
    if config.closure == "representation":
        report.notes.append(
            "boundary closure: Robin rows with data from the exterior representation of "
            "the solution's own trace; the L >= 10/sqrt(eps) truncation rule does not apply")
    return report


def _truncation_rule(config, eps_values, report):
    """Drop ladder rungs violating ``L >= 10/sqrt(eps)`` under the Dirichlet closure."""
    if config.closure != "dirichlet-zero":
        return list(eps_values)
    floor = (10.0 / config.half_width) ** 2
    kept = [e for e in eps_values if e >= floor]
    if len(kept) < len(eps_values):
        report.notes.append(
            f"truncation-dominated: eps below {floor:.3g} violates L >= 10/sqrt(eps); "
            f"ladder floor raised from {min(eps_values):.3g} to {min(kept) if kept else 'none'}")
    if len(kept) < 3:
        raise ConfigurationError("fewer than three ladder rungs satisfy L >= 10/sqrt(eps)")
    return kept


def _resolve_problem(config, problem):
    return get_problem(config.problem) if problem is None else problem


# ---------------------------------------------------------------------------
# studies
# ---------------------------------------------------------------------------

def study_lap_zero(config, problem=None):
    """Zero-energy limiting absorption over the eps ladder."""
    problem = _resolve_problem(config, problem)
    grid = config.grid()
    report = _new_report(config, problem)
    eps = _truncation_rule(config, config.eps_ladder, report)
    shifts = [SpectralShift.zero_energy(e) for e in eps]
    solved = solve_many(problem, shifts, grid, config)
    fields_ = [u for u, _ in solved]
    rho = trace_radius(grid, problem)
    half = (0.0, 0.5 * config.half_width)
    f_norm, _ = source_norms(problem.source, config.b)
    centre = grid.n // 2
    ratios, rep_errors, rows = [], [], []
    for e, (u, seconds) in zip(eps, solved):
        norms = compute_norms(u, config.b, half)
        ratio = norms.sup_weighted / f_norm if f_norm else 0.0
        fl = flux(trace_on_circle(u, rho, config.trace_samples))
        rep = representation_error(u, SpectralShift.zero_energy(e), rho, config.trace_samples)
        ratios.append(ratio)
        rep_errors.append(rep)
        origin = u.data[centre, centre]
        report.entries.append({"eps": e, "sup_weighted": norms.sup_weighted,
                               "bound_ratio": ratio, "flux": fl, "u_origin": origin,
                               "representation_error": rep,
                               "iterations": u.meta.get("iterations"),
                               "sweeps": u.meta.get("sweeps")})
        report.timing[f"solve eps={e:.6g}"] = seconds
        rows.append((e, norms.sup_weighted, ratio, fl.real, fl.imag, origin.real, origin.imag, rep))
    report.tables["ladder"] = (("eps", "sup_weighted", "bound_ratio", "flux_re", "flux_im",
                                "u0_re", "u0_im", "representation_error"), rows)
    lad = ladder(fields_, eps, "sup_weighted", half, config.b, config.tol("cauchy"))
    report.ladders["sup_weighted"] = {"parameters": lad.parameters,
                                      "diffs": lad.pairwise_norm_diffs,
                                      "decreasing": lad.decreasing, "cauchy": lad.cauchy}
    origin_ladder = ladder(fields_, eps, "origin")
    report.ladders["origin"] = {"parameters": origin_ladder.parameters,
                                "diffs": origin_ladder.pairwise_norm_diffs}
    finest = fields_[-1]
    report.fluxes["finest"] = {"radius": rho, "value": report.entries[-1]["flux"]}
    trivial = _is_zero(fields_)
    rep_worst = max(rep_errors)
    report.add_check("representation", rep_worst, config.tol("representation"), "<",
                     rep_worst < config.tol("representation") or trivial,
                     "max over the ladder at |x| = 2 x trace radius")
    mean = problem.mean
    if problem.compatible:
        report.add_check("cauchy", lad.pairwise_norm_diffs[-1], config.tol("cauchy"), "<",
                         lad.cauchy, f"weighted sup on B_L/2; diffs decreasing={lad.decreasing}")
        fl = abs(report.entries[-1]["flux"])
        report.add_check("flux", fl, config.tol("flux"), "<", fl < config.tol("flux"),
                         f"outward flux through |x| = {rho:.4g} at the ladder floor")
        drift = _drift(ratios)
        report.add_check("uniform_bound", drift, config.tol("bound_drift"), "<=",
                         drift <= config.tol("bound_drift"),
                         f"c = max ||u_eps|| / |||f||| = {max(ratios):.6g}")
        if trivial:
            report.add_check("decay", 0.0, config.tol("decay_zero"), "<=", True, "zero field")
        else:
            fit = fit_decay(finest, (2.0 * problem.perturbation_radius, 0.5 * config.half_width),
                            16, problem.perturbation_radius)
            report.fits["decay"] = _fit_record(fit)
            report.tables["decay"] = _decay_table(fit)
            dev = abs(fit.exponent - 1.0)
            report.add_check("decay", dev, config.tol("decay_zero"), "<=",
                             dev <= config.tol("decay_zero"), f"p = {fit.exponent:.4f}")
    else:
        report.add_check("no_cauchy", lad.pairwise_norm_diffs[-1], config.tol("cauchy"), ">=",
                         not lad.cauchy, "ladder must fail to converge without zero mean")
        ratio_eps = eps[-2] / eps[-1]
        expected = np.log(ratio_eps) / (4.0 * np.pi) * abs(mean)
        step = origin_ladder.pairwise_norm_diffs[-1]
        dev = abs(step / expected - 1.0)
        report.add_check("blowup_fd", dev, config.tol("blowup"), "<=",
                         dev <= config.tol("blowup"),
                         f"|u(0) step| = {step:.6g}, law ln(ratio)|mean|/4pi = {expected:.6g}")
        if is_identity(problem.coefficients):
            o = [conv_oracle(problem.source, s, np.zeros((1, 2)))[0] for s in shifts[-2:]]
            step_o = abs(o[1] - o[0])
            dev_o = abs(step_o / expected - 1.0)
            report.entries[-1]["oracle_u_origin"] = o[1]
            report.add_check("blowup_oracle", dev_o, config.tol("blowup"), "<=",
                             dev_o <= config.tol("blowup"),
                             f"convolution-oracle step {step_o:.6g}")
        tail = slice(max(0, len(eps) - 4), None)
        slope = _fit_slope(np.log(1.0 / np.asarray(eps[tail])),
                           np.array([r["u_origin"].real for r in report.entries[tail]]))
        law = mean / (4.0 * np.pi)
        dev = abs(slope / law - 1.0)
        report.fits["log_divergence"] = {"slope": slope, "law": law}
        report.add_check("log_divergence", dev, config.tol("blowup"), "<=",
                         dev <= config.tol("blowup"),
                         f"d Re u(0) / d ln(1/eps) = {slope:.6g}, law mean/4pi = {law:.6g}")
        drift = _drift(ratios)
        report.add_check("bound_grows", drift, config.tol("bound_drift"), ">",
                         drift > config.tol("bound_drift"),
                         "no uniform bound without zero mean")
    if is_identity(problem.coefficients) and not trivial:
        err = oracle_error(finest, problem, shifts[-1])
        report.entries[-1]["oracle_error"] = err
        report.add_check("oracle", err, config.tol("oracle"), "<", err < config.tol("oracle"),
                         "ladder floor vs convolution oracle on B_2R")
    report.timing["truncation"] = -time.perf_counter()
    report.entries.append({"truncation_sensitivity": truncation_sensitivity(
        problem, shifts[-1], config)})
    report.timing["truncation"] += time.perf_counter()
    return report


def study_lap_helmholtz(config, problem=None):
    """Helmholtz limiting absorption at fixed ``k`` plus the limit itself."""
    problem = _resolve_problem(config, problem)
    grid = config.grid()
    report = _new_report(config, problem)
    k = config.k
    eps = list(config.eps_ladder) + [0.0]
    shifts = [SpectralShift.helmholtz(k, e) for e in eps]
    solved = solve_many(problem, shifts, grid, config)
    fields_ = [u for u, _ in solved]
    rho = trace_radius(grid, problem)
    f_norm, f_b = source_norms(problem.source, config.b)
    c_l2, c_sup, rep_errors, rows = [], [], [], []
    for e, s, (u, seconds) in zip(eps, shifts, solved):
        norms = compute_norms(u, config.b)
        rep = representation_error(u, s, rho, config.trace_samples)
        r1 = norms.l2_minus_b / f_b if f_b else 0.0
        r2 = norms.sup_weighted_half / f_norm if f_norm else 0.0
        c_l2.append(r1)
        c_sup.append(r2)
        rep_errors.append(rep)
        report.entries.append({"eps": e, "k": k, "l2_minus_b": norms.l2_minus_b,
                               "sup_weighted_half": norms.sup_weighted_half,
                               "ratio_l2": r1, "ratio_sup_half": r2,
                               "representation_error": rep,
                               "iterations": u.meta.get("iterations"),
                               "sweeps": u.meta.get("sweeps")})
        report.timing[f"solve eps={e:.6g}"] = seconds
        rows.append((e, norms.l2_minus_b, norms.sup_weighted_half, r1, r2, rep))
    report.tables["ladder"] = (("eps", "l2_minus_b", "sup_weighted_half", "ratio_l2",
                                "ratio_sup_half", "representation_error"), rows)
    trivial = _is_zero(fields_)
    tol = config.tol("helmholtz_ladder")
    for kind in ("l2_minus_b", "sup_weighted_half"):
        lad = ladder(fields_, eps, kind, None, config.b, tol)
        report.ladders[kind] = {"parameters": lad.parameters, "diffs": lad.pairwise_norm_diffs,
                                "decreasing": lad.decreasing, "cauchy": lad.cauchy}
        report.add_check(f"ladder_{kind}", lad.pairwise_norm_diffs[-1], tol, "<", lad.cauchy,
                         f"last rung is the eps = 0 limit; diffs decreasing={lad.decreasing}")
    drift = _drift(c_l2[:-1])
    report.add_check("bound_l2_minus_b", drift, config.tol("bound_drift"), "<=",
                     drift <= config.tol("bound_drift"),
                     f"c = max ||w_eps||_-b / ||f||_b = {max(c_l2):.6g}")
    drift = _drift(c_sup)
    report.add_check("bound_sup_weighted_half", drift, config.tol("bound_drift"), "<=",
                     drift <= config.tol("bound_drift"),
                     f"c = max sup (1+|x|^1/2)|w| / |||f||| = {max(c_sup):.6g}")
    rep_worst = max(rep_errors)
    report.add_check("representation", rep_worst, config.tol("representation"), "<",
                     rep_worst < config.tol("representation") or trivial,
                     "max over the ladder at |x| = 2 x trace radius")
    w = fields_[-1]
    if trivial:
        for name in ("decay", "radiation_decreasing", "radiation_exponent", "incoming_control"):
            report.add_check(name, 0.0, 0.0, "trivial", True, "zero field")
        return report
    R = problem.perturbation_radius
    window = (2.0 * R, 0.5 * config.half_width)
    fit = fit_decay(w, window, 16, R)
    report.fits["decay"] = _fit_record(fit)
    report.tables["decay"] = _decay_table(fit)
    dev = abs(fit.exponent - 0.5)
    report.add_check("decay", dev, config.tol("decay_helmholtz"), "<=",
                     dev <= config.tol("decay_helmholtz"), f"p = {fit.exponent:.4f}")
    radii = np.linspace(R + 1.0, 0.5 * config.half_width, 9)
    out_res = radiation_residual(w, k, radii, config.trace_samples)
    in_res = radiation_residual(GridField(grid, np.conj(w.data)), k, radii, config.trace_samples)
    report.tables["radiation"] = (("radius", "outgoing", "incoming_control"),
                                  list(zip(radii, out_res, in_res)))
    dec = bool(np.all(np.diff(out_res) < 0))
    expo = -_fit_slope(np.log(radii), np.log(out_res))
    in_dec = bool(np.all(np.diff(in_res) < 0))
    in_expo = -_fit_slope(np.log(radii), np.log(in_res))
    report.fits["radiation"] = {"exponent": expo, "control_exponent": in_expo}
    report.add_check("radiation_decreasing", float(np.max(np.diff(out_res))), 0.0, "<", dec,
                     "largest step of the residual across radii")
    tol_e = config.tol("radiation_exponent")
    report.add_check("radiation_exponent", expo, tol_e, ">=", expo >= tol_e)
    control_fails = not (in_dec and in_expo >= tol_e)
    report.add_check("incoming_control", in_expo, tol_e, "fails >=", control_fails,
                     "conjugate (incoming) field must violate the radiation condition")
    if is_identity(problem.coefficients):
        err = oracle_error(w, problem, shifts[-1])
        report.entries[-1]["oracle_error"] = err
        report.add_check("oracle", err, config.tol("oracle"), "<", err < config.tol("oracle"),
                         "eps = 0 field vs Helmholtz convolution oracle on B_2R")
    report.timing["truncation"] = -time.perf_counter()
    report.entries.append({"truncation_sensitivity": truncation_sensitivity(
        problem, shifts[-1], config)})
    report.timing["truncation"] += time.perf_counter()
    return report


def study_k_to_zero(config, problem=None):
    """Low-frequency limit of the outgoing solution toward the zero-energy one."""
    problem = _resolve_problem(config, problem)
    if not problem.compatible:
        raise ConfigurationError(
            f"k-to-zero needs a zero-mean source; {problem.name} has mean {problem.mean}")
    grid = config.grid()
    report = _new_report(config, problem)
    R = problem.perturbation_radius
    annulus = (2.0 * R, 0.5 * config.half_width)
    rho = trace_radius(grid, problem)
    limit_shift = SpectralShift.zero_energy(0.0)
    shifts = [limit_shift] + [SpectralShift.helmholtz(k) for k in config.k_ladder]
    solved = solve_many(problem, shifts, grid, config)
    u, seconds = solved[0]
    report.timing["solve zero-energy limit"] = seconds
    rep_errors = [representation_error(u, limit_shift, rho, config.trace_samples)]
    values, rows = [], []
    for k, s, (w, seconds) in zip(config.k_ladder, shifts[1:], solved[1:]):
        gap = difference_norm(w - u, "sup_sqrt_radius", annulus)
        rep = representation_error(w, s, rho, config.trace_samples)
        rep_errors.append(rep)
        values.append(gap)
        report.entries.append({"k": k, "weighted_difference": gap, "representation_error": rep,
                               "iterations": w.meta.get("iterations")})
        report.timing[f"solve k={k:.6g}"] = seconds
        rows.append((k, gap, rep))
    report.tables["ladder"] = (("k", "weighted_difference", "representation_error"), rows)
    report.ladders["k_to_zero"] = {"parameters": config.k_ladder, "differences": values,
                                   "norm": "sup |x|^1/2 |w - u| on the annulus"}
    if len(values) < 2:
        report.notes.append("insufficient ladder: a single k cannot show a trend")
    else:
        dec = all(b < a for a, b in zip(values, values[1:]))
        report.add_check("k_decreasing", float(np.max(np.diff(values))), 0.0, "<", dec,
                         "largest step of the weighted difference along the ladder")
    report.add_check("k_limit", values[-1], config.tol("k_limit"), "<",
                     values[-1] < config.tol("k_limit"),
                     f"annulus [{annulus[0]:.3g}, {annulus[1]:.3g}]")
    rep_worst = max(rep_errors)
    report.add_check("representation", rep_worst, config.tol("representation"), "<",
                     rep_worst < config.tol("representation"))
    return report


def study_decay(config, problem=None):
    """Decay exponents of the zero-energy and Helmholtz limits."""
    problem = _resolve_problem(config, problem)
    grid = config.grid()
    report = _new_report(config, problem)
    R = problem.perturbation_radius
    window = (2.0 * R, 0.5 * config.half_width)
    shifts = [SpectralShift.zero_energy(0.0), SpectralShift.helmholtz(config.k)]
    solved = solve_many(problem, shifts, grid, config)
    rows = []
    for label, s, (u, seconds), target, tol_key in zip(
            ("zero_energy", "helmholtz"), shifts, solved, (1.0, 0.5),
            ("decay_zero", "decay_helmholtz")):
        report.timing[f"solve {label}"] = seconds
        fit = fit_decay(u, window, 16, R)
        report.fits[label] = _fit_record(fit)
        rows.extend((label,) + row for row in _decay_table(fit)[1])
        if label == "zero_energy" and not problem.compatible:
            report.add_check("zero_energy_logarithmic", fit.residual, 0.0, "flagged",
                             fit.logarithmic or fit.exponent < 0,
                             f"p = {fit.exponent:.4f}; a nonzero mean gives ln|x| growth")
            continue
        dev = abs(fit.exponent - target)
        report.add_check(f"{label}_exponent", dev, config.tol(tol_key), "<=",
                         dev <= config.tol(tol_key), f"p = {fit.exponent:.4f}, target {target}")
    report.tables["decay"] = (("field", "ray_x", "ray_y", "radius", "abs_value"), rows)
    return report


def study_flux(config, problem=None):
    """Flux through circles for the zero-energy limit and the discrete balance."""
    problem = _resolve_problem(config, problem)
    grid = config.grid()
    report = _new_report(config, problem)
    rho = trace_radius(grid, problem)
    shift = SpectralShift.zero_energy(0.0)
    (u, seconds), = solve_many(problem, [shift], grid, config)
    report.timing["solve zero-energy limit"] = seconds
    radii = np.linspace(rho, 0.5 * config.half_width, 8)
    values = [flux(trace_on_circle(u, r, config.trace_samples)) for r in radii]
    report.fluxes["by_radius"] = {"radii": radii, "values": values}
    report.tables["flux"] = (("radius", "flux_re", "flux_im"),
                             [(r, v.real, v.imag) for r, v in zip(radii, values)])
    expected = -problem.mean
    worst = max(abs(v - expected) for v in values)
    report.add_check("flux_value", worst, config.tol("flux"), "<", worst < config.tol("flux"),
                     f"outward flux vs -mean = {expected:g} at every radius")
    spread = max(abs(v - values[0]) for v in values)
    report.add_check("flux_conservation", spread, config.tol("flux"), "<",
                     spread < config.tol("flux"), "max spread across radii")
    if config.closure != "dirichlet-zero":
        out, vol, src = discrete_flux_balance(u.meta["system"], u, problem.source)
        gap = abs(-out + vol - src)
        report.fluxes["discrete_balance"] = {"boundary": out, "volume": vol, "source": src}
        report.add_check("discrete_balance", gap, config.tol("balance"), "<",
                         gap < config.tol("balance"), "summed discrete equations")
    return report


# ---------------------------------------------------------------------------
# kernel suite
# ---------------------------------------------------------------------------

RESOLVENT_EPS = (1e-2, 1e-3, 1e-4, 1e-5)


def resolvent_remainder(eps, radii=None):
    """``sup |g_eps - alpha(eps) - g0|`` over ``0.5 <= |x - y| <= 2``."""
    radii = np.linspace(0.5, 2.0, 64) if radii is None else np.asarray(radii)
    x = np.column_stack([radii, np.zeros_like(radii)])
    y = np.zeros_like(x)
    rem = sf.regularized_green(x, y, eps) - sf.alpha(eps) - sf.log_green(x, y)
    return float(np.max(np.abs(rem)))


def study_kernels(config=None, problem=None):
    """Self-checks of the Bessel machinery and the kernels."""
    config = config or StudyConfig(study="kernels")
    report = StudyReport("kernels", config.echo())
    start = time.perf_counter()
    x = np.logspace(-1, 2, 100)
    j0, j1, y0, y1 = sf.bessel_jy(x)
    wr = np.max(np.abs((j1 * y0 - j0 * y1) * np.pi * x / 2.0 - 1.0))
    report.add_check("wronskian", wr, 1e-9, "<", wr < 1e-9,
                     "J1 Y0 - J0 Y1 = 2/(pi x) at 100 log-spaced points in [0.1, 100]")
    z = np.linspace(sf.CROSSOVER_RADIUS, sf.CROSSOVER_RADIUS + 4.0, 200)
    s0, s1 = sf.hankel1_series(z)
    a0, a1 = sf.hankel1_asymptotic(z)
    overlap = max(np.max(np.abs(s0 / a0 - 1.0)), np.max(np.abs(s1 / a1 - 1.0)))
    report.add_check("branch_overlap", overlap, 1e-9, "<", overlap < 1e-9,
                     "series vs asymptotic on the real overlap [12, 16]")
    small = 1e-6
    limit = abs(0.25j * sf.hankel1_0(small)
                + (np.log(small / 2.0) + sf.EULER_GAMMA) / (2.0 * np.pi) - 0.25j)
    report.add_check("small_argument", limit, 1e-10, "<", limit < 1e-10,
                     "(i/4)H0(z) + (ln(z/2) + gamma)/(2 pi) - i/4 at z = 1e-6")
    far = _far_field_bounds()
    bound = 10.0 / 9.0 / (2.0 * np.pi)
    report.add_check("log_far_field", far[0], bound, "<=", far[0] <= bound,
                     "|x| |g0(x,y) - ln(1/|x|)/(2 pi)| for |x| in [10, 1000], |y| <= 1")
    report.add_check("normal_derivative_far_field", far[1], bound, "<=", far[1] <= bound,
                     "|x| |dg0/dN_y| for |x| in [10, 1000], |y| <= 1")
    rems = [resolvent_remainder(e) for e in RESOLVENT_EPS]
    rows = []
    for label, rate in (("eps2_log", lambda e: e * e * np.log(1.0 / e)),
                        ("eps_log", lambda e: e * np.log(1.0 / e))):
        ratios = [r / rate(e) for r, e in zip(rems, RESOLVENT_EPS)]
        c = ratios[0]
        worst = max(ratios) / c
        report.fits[f"resolvent_{label}"] = {"eps": RESOLVENT_EPS, "remainder": rems,
                                             "ratio": ratios, "constant": c}
        report.add_check(f"resolvent_rate_{label}", worst, 2.0, "<=", worst <= 2.0,
                         f"max ratio / ratio at eps=1e-2, constant {c:.6g}")
        rows.extend((label, e, r, q) for e, r, q in zip(RESOLVENT_EPS, rems, ratios))
    report.tables["resolvent"] = (("rate", "eps", "remainder", "ratio"), rows)
    report.timing["suite"] = time.perf_counter() - start
    return report


def _far_field_bounds():
    r = np.logspace(1, 3, 60)
    th = np.linspace(0.0, 2.0 * np.pi, 24, endpoint=False)
    R, T = np.meshgrid(r, th, indexing="ij")
    x = np.stack([R * np.cos(T), R * np.sin(T)], axis=-1)
    worst_g = worst_n = 0.0
    for ys in (0.25, 0.5, 1.0):
        for phi in np.linspace(0.0, 2.0 * np.pi, 8, endpoint=False):
            y = np.array([ys * np.cos(phi), ys * np.sin(phi)])
            g = sf.log_green(x, np.broadcast_to(y, x.shape))
            worst_g = max(worst_g, np.max(R * np.abs(g - np.log(1.0 / R) / (2.0 * np.pi))))
            normal = np.array([np.cos(phi + 0.3), np.sin(phi + 0.3)])
            dn = sf.log_green_normal_deriv(x, np.broadcast_to(y, x.shape),
                                           np.broadcast_to(normal, x.shape))
            worst_n = max(worst_n, np.max(R * np.abs(dn)))
    return float(worst_g), float(worst_n)


# ---------------------------------------------------------------------------
# helpers and dispatch
# ---------------------------------------------------------------------------

def _fit_record(fit):
    return {"exponent": fit.exponent, "prefactor": fit.prefactor, "window": fit.fit_window,
            "residual": fit.residual, "rays_used": fit.rays_used,
            "logarithmic": fit.logarithmic}


def _decay_table(fit):
    return (("ray_x", "ray_y", "radius", "abs_value"),
            [(d[0], d[1], r, v) for d, r, v in fit.samples])


STUDY_FUNCTIONS = {
    "lap-zero": study_lap_zero,
    "lap-helmholtz": study_lap_helmholtz,
    "k-to-zero": study_k_to_zero,
    "decay": study_decay,
    "flux": study_flux,
    "kernels": study_kernels,
}


def run_study(config, problem=None, write=True):
    """Run the configured study; optionally write the report to ``config.out_dir``."""
    try:
        report = STUDY_FUNCTIONS[config.study](config, problem)
    except DomainError as exc:
        raise ConfigurationError(str(exc)) from None
    if write:
        write_report(report, config.out_dir)
    return report


def oracle_suite():
    """Quick checks of the convolution oracle and one coarse FD comparison."""
    report = StudyReport("oracle", {})
    shift = SpectralShift.zero_energy(0.01)
    f1 = monopole_source()
    f2 = SourceTerm(dipole_source(), 1.0)  # same support square, same nodes
    pts = np.array([[0.3, -0.2], [1.5, 0.7], [-2.0, 1.0]])
    both = SourceTerm(lambda a, b: f1(a, b) + f2(a, b), 1.0)
    lin = np.max(np.abs(conv_oracle(both, shift, pts, step=1 / 32)
                        - conv_oracle(f1, shift, pts, step=1 / 32)
                        - conv_oracle(f2, shift, pts, step=1 / 32)))
    report.add_check("oracle_linearity", lin, 1e-12, "<", lin < 1e-12)
    coarse = conv_oracle(f1, shift, pts, step=1 / 8)
    mid = conv_oracle(f1, shift, pts, step=1 / 16)
    fine = conv_oracle(f1, shift, pts, step=1 / 32)
    order = float(np.log2(np.max(np.abs(coarse - mid)) / np.max(np.abs(mid - fine))))
    report.add_check("oracle_order", order, 1.7, ">=", order >= 1.7,
                     "Richardson order on halving the quadrature step")
    config = StudyConfig(half_width=4.0, n=129)
    problem = get_problem("identity-monopole")
    u, _ = solve_problem(problem, shift, config.grid(), config)
    err = oracle_error(u, problem, shift)
    report.add_check("fd_vs_oracle", err, 0.02, "<", err < 0.02,
                     "identity-monopole, eps = 0.01, L = 4, n = 129")
    return report


__all__ = ["StudyConfig", "StudyReport", "Check", "parse_config", "config_from_mapping",
           "load_config", "run_study", "write_report", "study_lap_zero",
           "study_lap_helmholtz", "study_k_to_zero", "study_kernels", "study_decay",
           "study_flux", "oracle_suite", "STUDIES", "DEFAULT_TOLERANCES"]
