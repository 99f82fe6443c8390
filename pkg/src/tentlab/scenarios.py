"""Scenario configs, the checker registry, report writing and golden diffs.

A config is an INI file. ``[run]`` holds defaults (``seed``, ``tol``); every
``[scenario:NAME]`` section names a ``checker`` and its parameters, plus the
optional keys ``seed``, ``expect`` (``holds`` or ``violated``) and tolerance
overrides ``tol`` / ``tol_<field>`` used by :func:`golden_diff`. Values are
literals only: numbers, comma lists, and ``a:b`` interval lists.
"""
from __future__ import annotations

import configparser
import csv
import json
import math
import re
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from . import concentration as conc
from . import families as fam
from .exceptions import LabError, SchemaMismatchError
from .functional import LOG_2PI, recenter
from .gaussian import (equality_family_gap, noncentered_counterexample, random_equality_case)
from .inequalities import (SantaloPair, duality_backward, duality_forward, km_product, reverse_gap,
                           santalo_check, santalo_optimal_partner, talagrand_gap, ulc_gap_1d)
from .measures import (ConvexPotential, DiscreteMeasure, GapReport, GaussianParams, Grid, GridDensity,
                       GridFunction, Verdict)
from .moment_map import (centered_values, l1_distance, lsi_deficit, reverse_lsi_gap, solve_moment_map_1d,
                         x_dot_grad_phi_check)
from .transport import quantile_w2_1d, solve_exact, solve_sinkhorn

CONFIG_DIR = Path(__file__).parent / "configs"
REPORT_KEYS = ("scenario", "case", "checker", "seed", "expect", "status", "lhs", "rhs", "gap",
               "discretization_error_estimate", "verdict", "tolerance", "details")
SUMMARY_KEYS = ("scenario", "case", "checker", "seed", "expect", "status", "verdict", "lhs", "rhs", "gap",
                "discretization_error_estimate")
DEFAULT_SEED = 20240101
DEFAULT_TOL = 1e-9
DIFF_FIELDS = ("lhs", "rhs", "gap", "discretization_error_estimate")


class ConfigError(LabError):
    """Malformed config; ``location`` reads ``file:line [section] key``."""

    def __init__(self, message: str, location: str = ""):
        super().__init__(f"{location}: {message}" if location else message)
        self.location = location


# --- parameter parsing -------------------------------------------------------------

def _floats(text: str) -> list:
    return [float(t) for t in text.replace(" ", "").split(",") if t]


def _intervals(text: str) -> list:
    out = []
    for part in text.replace(" ", "").split(","):
        a, b = part.split(":")
        out.append((float(a), float(b)))
    return out


PARSERS = {"int": int, "float": float, "floats": _floats, "intervals": _intervals, "str": str}


@dataclass(frozen=True)
class Checker:
    name: str
    fn: Callable
    doc: str
    params: dict = field(default_factory=dict)  # name -> (type, default)


REGISTRY: dict = {}


def checker(name: str, doc: str, **params):
    def deco(fn):
        REGISTRY[name] = Checker(name, fn, doc, params)
        return fn
    return deco


# --- checkers ----------------------------------------------------------------------
# Each returns a list of (case label, GapReport).

@checker("equality_family", "Gaussian equality cases N(0,A), N(m,A^-1): gap zero",
         cases=("int", 1000), dims=("floats", [1, 2, 3]))
def _equality_family(p, seed):
    dims = [int(d) for d in p["dims"]]
    out = []
    for i in range(p["cases"]):
        rng = fam.case_rng(seed, i)
        d = dims[i % len(dims)]
        out.append((f"{i}:d{d}", equality_family_gap(random_equality_case(rng, d))))
    return out


@checker("noncentered_counterexample", "|m1-m2|^2 <= |m1|^2 + |m2|^2 for unit-covariance Gaussians",
         m1=("floats", [1.0]), m2=("floats", [-1.0]))
def _noncentered(p, seed):
    return [("means", noncentered_counterexample(p["m1"], p["m2"]))]


@checker("talagrand_sweep", "symmetrised Talagrand on random centred/arbitrary pairs, d in {1,2}",
         cases=("int", 500), start=("int", 0))
def _talagrand_sweep(p, seed):
    out = []
    for i in range(p["start"], p["start"] + p["cases"]):
        c = fam.sweep_case(seed, i)
        out.append((f"{i}:{c.label}", talagrand_gap(*c.items)))
    return out


@checker("talagrand_mixture", "two-bump mixture against the standard Gaussian on a 1D grid",
         separation=("float", 2.0), variance=("float", 0.5), n=("int", 4096), half_width=("float", 12.0))
def _talagrand_mixture(p, seed):
    g = Grid.regular(-p["half_width"], p["half_width"], p["n"])
    s, v = p["separation"], p["variance"]
    mu = GridDensity.from_function(lambda x: np.exp(-(x - s) ** 2 / (2 * v)) + np.exp(-(x + s) ** 2 / (2 * v)), g)
    return [("mixture", talagrand_gap(mu, GaussianParams.standard(1)))]


def _quadratic(grid, shift=0.0):
    return GridFunction(grid, -0.5 * grid.sq_norm() + shift)


@checker("santalo_gaussian", "f = -|x|^2/2 + shift with g = -|y|^2/2",
         dim=("int", 1), shift=("float", 0.0), n=("int", 2048), half_width=("float", 10.0))
def _santalo_gaussian(p, seed):
    d, L, n = p["dim"], p["half_width"], p["n"]
    grid = Grid.regular(-L, L, n) if d == 1 else Grid.regular((-L,) * d, (L,) * d, (n,) * d)
    pair = SantaloPair(_quadratic(grid, p["shift"]), _quadratic(grid))
    return [(f"d{d}", santalo_check(pair))]


@checker("santalo_partner", "f = -|x|^power recentred, paired with its optimal partner",
         power=("float", 4.0), n=("int", 2049), half_width=("float", 4.0))
def _santalo_partner(p, seed):
    g = Grid.regular(-p["half_width"], p["half_width"], p["n"])
    x = g.axis(0)
    f = GridFunction(g, -np.abs(x) ** p["power"] + 0.3 * x)
    f = recenter(f).f_tilde
    return [("optimal", santalo_check(SantaloPair(f, santalo_optimal_partner(f))))]


@checker("duality_forward_gaussian", "transport form with mu = nu = standard Gaussian on a grid",
         n=("int", 2048), half_width=("float", 10.0))
def _duality_forward(p, seed):
    g = Grid.regular(-p["half_width"], p["half_width"], p["n"])
    gam = GaussianParams.standard(1).on_grid(g)
    return [("gamma", duality_forward(gam, gam))]


@checker("duality_backward_sweep", "recentering construction on random admissible pairs",
         cases=("int", 50))
def _duality_backward(p, seed):
    out = []
    for i in range(p["cases"]):
        c = fam.random_admissible_pair(seed, i)
        out.append((f"{i}:{c.label}", duality_backward(*c.items)))
    return out


@checker("ulc_sweep", "uniformly log-concave reference V = x^2/2 + x^4/4",
         cases=("int", 20), alpha=("float", 1.0), n=("int", 4096), half_width=("float", 8.0))
def _ulc(p, seed):
    g = Grid.regular(-p["half_width"], p["half_width"], p["n"])
    x = g.axis(0)
    V = GridFunction(g, x ** 2 / 2 + x ** 4 / 4)
    out = []
    for i in range(p["cases"]):
        c = fam.ulc_pair(seed, i, g)
        out.append((f"{i}:{c.label}", ulc_gap_1d(V, p["alpha"], *c.items)))
    return out


def _named_potential(name: str, grid: Grid) -> ConvexPotential:
    x = grid.mesh()
    r2 = sum(z ** 2 for z in x)
    absx = sum(np.abs(z) for z in x)
    table = {
        "quadratic": 0.5 * r2,
        "abs": absx,
        "abs_plus_quadratic": 0.5 * r2 + absx,
        "gaussian": 0.5 * r2 + 0.5 * grid.dim * LOG_2PI,
        "laplace": absx + grid.dim * math.log(2),
    }
    if name not in table:
        raise LabError(f"unknown potential {name!r}")
    return ConvexPotential(grid, table[name])


@checker("km_product", "log int e^-f + log int e^-f* against d log 4",
         potential=("str", "abs"), n=("int", 2 ** 16 + 1), half_width=("float", 24.0))
def _km(p, seed):
    g = Grid.regular(-p["half_width"], p["half_width"], p["n"])
    return [(p["potential"], km_product(_named_potential(p["potential"], g)))]


@checker("km_sweep", "d log 4 <= log-product <= d log 2 pi on random unconditional convex f",
         cases=("int", 50), every_2d=("int", 5))
def _km_sweep(p, seed):
    out = []
    for i in range(p["cases"]):
        d = 2 if p["every_2d"] and i % p["every_2d"] == 0 else 1
        c = fam.random_unconditional_convex(seed, i, d)
        r = km_product(*c.items)
        upper = GapReport.from_sides(r.rhs, r.details["santalo_bound"], r.discretization_error_estimate)
        out += [(f"{i}:{c.label}:lower", r), (f"{i}:{c.label}:upper", upper)]
    return out


@checker("reverse_gap", "Ent(mu) + Ent(mu*) <= W2^2/2 + (d/2) log(pi/2), normalised",
         potential=("str", "laplace"), n=("int", 8193), half_width=("float", 40.0))
def _reverse(p, seed):
    g = Grid.regular(-p["half_width"], p["half_width"], p["n"])
    return [(p["potential"], reverse_gap(_named_potential(p["potential"], g)))]


def _mm_target(name: str, variance: float):
    if name == "two_point":
        return DiscreteMeasure([[-1.0], [1.0]], [0.5, 0.5]), Grid.regular(-40.0, 40.0, 16384)
    if name == "gaussian":
        s = math.sqrt(variance)
        return GaussianParams([0.0], [[variance]]).on_grid(Grid.regular(-12 * s, 12 * s, 2 ** 16)), None
    if name == "uniform":
        return GridDensity(Grid.regular(-1.0, 1.0, 512), np.ones(512)), None
    raise LabError(f"unknown moment-map target {name!r}")


def _mm_exact(name: str, variance: float, x: np.ndarray):
    """Analytic density of the moment map, when one is known."""
    if name == "two_point":
        return 0.5 * np.exp(-np.abs(x))
    if name == "gaussian":
        return np.exp(-0.5 * variance * x ** 2) * math.sqrt(variance / (2 * math.pi))
    return None


@checker("moment_map", "pushforward residual, L1 error against the analytic density and the "
         "x.phi' <= d step of a 1D moment map",
         target=("str", "two_point"), variance=("float", 4.0), tol=("float", 1e-6),
         l1_tol=("float", 1e-4), x_dot_tol=("float", 1e-5))
def _moment_map(p, seed):
    mu, grid = _mm_target(p["target"], p["variance"])
    sol = solve_moment_map_1d(mu, grid, tol=p["tol"])
    out = [("pushforward", GapReport.from_sides(sol.pushforward_residual, p["tol"], 0.0, method=sol.method,
                                                iterations=sol.iterations, ma_residual=sol.ma_residual))]
    exact = _mm_exact(p["target"], p["variance"], sol.grid.axis(0))
    if exact is not None:
        err = float(np.sum(np.abs(centered_values(sol.rho) - exact)) * sol.grid.cell_volume)
        out.append(("l1_exact", GapReport.from_sides(err, p["l1_tol"], 0.0)))
    dev = x_dot_grad_phi_check(sol)
    out.append(("x_dot_grad_phi", GapReport.from_sides(1.0 - dev, 1.0, p["x_dot_tol"], deviation=dev)))
    return out


@checker("moment_map_crosscheck", "fixed point against the variational solver, L1 distance of rho",
         cases=("int", 10), n=("int", 4096), tol=("float", 1e-4))
def _mm_cross(p, seed):
    out = []
    for i in range(p["cases"]):
        c = fam.moment_map_target(seed, i)
        a = solve_moment_map_1d(c.items[0], method="fixed_point", n=p["n"], accept_floor=True)
        b = solve_moment_map_1d(c.items[0], a.grid, method="variational")
        rep = GapReport.from_sides(l1_distance(a.rho, b.rho), p["tol"], 0.0,
                                   fixed_point_residual=a.pushforward_residual,
                                   variational_residual=b.pushforward_residual)
        out.append((f"{i}:{c.label}", rep))
    return out


@checker("reverse_lsi", "(1/2) int log phi'' drho <= S(gamma) - S(rho) for log-concave rho",
         rho=("str", "quartic"), variance=("float", 0.25), n=("int", 4001), half_width=("float", 5.0))
def _reverse_lsi(p, seed):
    g = Grid.regular(-p["half_width"], p["half_width"], p["n"])
    if p["rho"] == "quartic":
        rho = GridDensity.from_function(lambda x: np.exp(-x ** 4), g)
    elif p["rho"] == "gaussian":
        rho = GaussianParams([0.0], [[p["variance"]]]).on_grid(g)
    else:
        raise LabError(f"unknown density {p['rho']!r}")
    return [(p["rho"], reverse_lsi_gap(rho))]


@checker("lsi_deficit", "Ent(mu) + Ent(nu) - W2^2/2 for mu = gamma and nu = N(0, diag(var, 1))",
         variance=("float", 2.0))
def _deficit(p, seed):
    mu = GaussianParams.standard(2)
    nu = GaussianParams([0.0, 0.0], np.diag([p["variance"], 1.0]))
    eps = lsi_deficit(mu, nu)
    return [("gaussian", GapReport.from_sides(0.0, eps, 0.0, deficit=eps))]


def _as_report(row: conc.EnlargementResult, slack: float) -> GapReport:
    err = slack if row.stderr == 0 else conc.Z_CONFIDENCE * row.stderr
    return GapReport.from_sides(row.tail, row.bound, err, gamma_A=row.gamma_A, maurey_bound=row.maurey_bound,
                                stderr=row.stderr, maurey_holds=row.maurey_holds)


@checker("concentration_1d", "1 - gamma(A_r) <= exp(-r^2/2) / gamma(A), exact CDF arithmetic",
         intervals=("intervals", []), radii=("floats", [0.25 * k for k in range(17)]),
         slack=("float", 1e-12))
def _conc_1d(p, seed):
    sets = [conc.CenteredSet.intervals(p["intervals"])] if p["intervals"] else conc.corpus_1d()
    out = []
    for s in sets:
        for row in conc.concentration_check(s, p["radii"], slack=p["slack"]):
            out.append((f"{s.label()}:r={row.r:g}", _as_report(row, p["slack"])))
    return out


@checker("concentration_mc", "Monte Carlo concentration for symmetric sets in d >= 2",
         kind=("str", "ball"), radius=("float", 1.0), dim=("int", 2), radii=("floats", [0.5, 1.0, 2.0]),
         samples=("int", 10 ** 6))
def _conc_mc(p, seed):
    if p["kind"] == "ball":
        A = conc.CenteredSet.ball(p["radius"], p["dim"])
    elif p["kind"] == "slab":
        A = conc.CenteredSet.slab(p["radius"], np.eye(p["dim"])[0])
    elif p["kind"] == "symmetric_union":
        A = conc.CenteredSet.symmetric_union([np.eye(p["dim"])[0] * 2.0], p["radius"])
    else:
        raise LabError(f"unknown set kind {p['kind']!r}")
    rows = conc.concentration_check(A, p["radii"], n=p["samples"], seed=seed)
    return [(f"r={row.r:g}", _as_report(row, 0.0)) for row in rows]


@checker("marton", "both links of the transport proof of concentration, 1D",
         intervals=("intervals", [(-1.0, 1.0)]), r=("float", 1.0), h=("float", 0.002))
def _marton(p, seed):
    dist, ent = conc.marton_demo(conc.CenteredSet.intervals(p["intervals"]), p["r"], h=p["h"])
    return [("distance", dist), ("entropy", ent)]


@checker("transport_backends", "rounded Sinkhorn against the exact LP, relative to the squared diameter",
         cases=("int", 100), max_atoms=("int", 30), epsilon=("float", 1e-4), tol=("float", 1e-3))
def _backends(p, seed):
    out = []
    for i in range(p["cases"]):
        rng = fam.case_rng(seed, i)
        n, m = rng.integers(1, p["max_atoms"] + 1, size=2)
        d = int(rng.integers(1, 3))
        mu = DiscreteMeasure.from_unnormalized(rng.uniform(0, 1, (n, d)), rng.uniform(0.1, 1, n))
        nu = DiscreteMeasure.from_unnormalized(rng.uniform(0, 1, (m, d)), rng.uniform(0.1, 1, m))
        exact = solve_exact(mu, nu).cost
        sk = solve_sinkhorn(mu, nu, epsilon=p["epsilon"]).cost_rounded_upper
        pts = np.vstack([mu.points, nu.points])
        diam2 = float(np.max(np.sum((pts[:, None] - pts[None]) ** 2, axis=-1)))
        out.append((f"{i}:{n}x{m}:d{d}", GapReport.from_sides(abs(sk - exact), p["tol"] * diam2, 0.0,
                                                               exact=exact, sinkhorn=sk)))
    return out


@checker("quantile_vs_lp", "1D quantile W2 against the exact LP", cases=("int", 100),
         max_atoms=("int", 30), tol=("float", 1e-8))
def _quantile_lp(p, seed):
    out = []
    for i in range(p["cases"]):
        rng = fam.case_rng(seed, i)
        n, m = rng.integers(1, p["max_atoms"] + 1, size=2)
        mu = DiscreteMeasure.from_unnormalized(rng.normal(size=(n, 1)), rng.uniform(0.1, 1, n))
        nu = DiscreteMeasure.from_unnormalized(rng.normal(size=(m, 1)), rng.uniform(0.1, 1, m))
        q, lp = quantile_w2_1d(mu, nu), solve_exact(mu, nu).cost
        out.append((f"{i}:{n}x{m}", GapReport.from_sides(abs(q - lp), p["tol"], 0.0, quantile=q, exact=lp)))
    return out


# --- configs --------------------------------------------------------------------------

@dataclass(frozen=True)
class Scenario:
    name: str
    checker: str
    params: dict
    seed: int
    expect: str = "holds"
    tolerance: dict = field(default_factory=dict)


def _locate(lines, section: str, key: str | None = None) -> int:
    """1-based line of ``[section]`` (or of ``key`` inside it); 0 if unknown."""
    head = re.compile(r"^\s*\[(.+)\]\s*$")
    inside = False
    for i, line in enumerate(lines, 1):
        m = head.match(line)
        if m:
            inside = m.group(1).strip() == section
            if inside and key is None:
                return i
            continue
        if inside and key is not None and re.match(rf"^\s*{re.escape(key)}\s*[=:]", line):
            return i
    return 0


def resolve_config(path) -> Path:
    """``path`` itself if it is a file, else a bundled config of that name."""
    path = Path(path)
    if path.is_file():
        return path
    for name in (path.name, path.name + ".cfg"):
        if (CONFIG_DIR / name).is_file():
            return CONFIG_DIR / name
    return path


def load_config(path, seed: int | None = None) -> list:
    """Parse a config into scenarios sorted by name; raises :class:`ConfigError`."""
    path = resolve_config(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config ({exc.strerror})", str(path)) from exc
    lines = text.splitlines()
    cp = configparser.ConfigParser(interpolation=None)
    try:
        cp.read_string(text, source=str(path))
    except configparser.Error as exc:
        line = getattr(exc, "lineno", None) or getattr(exc, "errors", [[0]])[0][0]
        raise ConfigError(exc.message.splitlines()[0] if hasattr(exc, "message") else str(exc),
                          f"{path}:{line}") from exc

    def where(section, key=None):
        return f"{path}:{_locate(lines, section, key)} [{section}]" + (f" {key}" if key else "")

    run = cp["run"] if cp.has_section("run") else {}
    try:
        base_seed = int(run.get("seed", DEFAULT_SEED)) if seed is None else int(seed)
        base_tol = float(run.get("tol", DEFAULT_TOL))
    except ValueError as exc:
        raise ConfigError(str(exc), where("run")) from exc
    out = []
    for sec in cp.sections():
        if sec == "run":
            continue
        if not sec.startswith("scenario:") or not sec[len("scenario:"):].strip():
            raise ConfigError("sections must be [run] or [scenario:NAME]", where(sec))
        name = sec[len("scenario:"):].strip()
        body = dict(cp[sec])
        ck = body.pop("checker", None)
        if ck is None:
            raise ConfigError("missing 'checker'", where(sec))
        if ck not in REGISTRY:
            raise ConfigError(f"unknown checker {ck!r}", where(sec, "checker"))
        spec = REGISTRY[ck]
        expect = body.pop("expect", "holds").strip().lower()
        if expect not in ("holds", "violated"):
            raise ConfigError("expect must be 'holds' or 'violated'", where(sec, "expect"))
        try:
            sc_seed = int(body.pop("seed")) if "seed" in body and seed is None else base_seed
        except ValueError as exc:
            raise ConfigError("seed must be an integer", where(sec, "seed")) from exc
        body.pop("seed", None)
        tolerance = {"default": base_tol}
        params = {k: v[1] for k, v in spec.params.items()}
        for key, raw in body.items():
            try:
                if key == "tol" and "tol" not in spec.params:
                    tolerance["default"] = float(raw)
                elif key.startswith("tol_"):
                    tolerance[key[4:]] = float(raw)
                elif key in spec.params:
                    params[key] = PARSERS[spec.params[key][0]](raw)
                else:
                    raise ConfigError(f"unknown parameter for checker {ck!r}", where(sec, key))
            except (ValueError, TypeError) as exc:
                raise ConfigError(f"bad value {raw!r} ({exc})", where(sec, key)) from exc
        out.append(Scenario(name, ck, params, sc_seed, expect, tolerance))
    if not out:
        raise ConfigError("no [scenario:NAME] sections", str(path))
    return sorted(out, key=lambda s: s.name)


# --- running ------------------------------------------------------------------------------

def _status(verdict: str, expect: str) -> str:
    violated = verdict == Verdict.VIOLATED.value
    return "pass" if violated == (expect == "violated") else "fail"


def run_scenario(sc: Scenario) -> list:
    """Rows for one scenario; a checker exception becomes a single error row."""
    base = {"scenario": sc.name, "checker": sc.checker, "seed": sc.seed, "expect": sc.expect}
    try:
        results = REGISTRY[sc.checker].fn(sc.params, sc.seed)
    except Exception as exc:  # noqa: BLE001 - recorded per scenario, run continues
        row = dict.fromkeys(REPORT_KEYS)
        row.update(base, case="-", status="error", tolerance=sc.tolerance,
                   details={"error": f"{type(exc).__name__}: {exc}"})
        return [row]
    rows = []
    for case, rep in results:
        d = rep.to_dict()
        row = {**base, "case": case, "status": _status(d["verdict"], sc.expect), **d,
               "tolerance": sc.tolerance}
        row.setdefault("details", {})
        rows.append({k: row.get(k) for k in REPORT_KEYS})
    return rows


def _strict(v):
    """Non-finite floats become ``null`` / ``"inf"`` / ``"-inf"`` so rows stay strict JSON."""
    if isinstance(v, float) and not math.isfinite(v):
        return None if math.isnan(v) else ("inf" if v > 0 else "-inf")
    if isinstance(v, dict):
        return {k: _strict(x) for k, x in v.items()}
    if isinstance(v, list):
        return [_strict(x) for x in v]
    return v


def _dumps(row: dict) -> str:
    return json.dumps(_strict(row), allow_nan=False, separators=(", ", ": "))


def run(config, out_dir, seed: int | None = None, jobs: int = 1) -> int:
    """Execute a config; writes ``<scenario>.jsonl`` per scenario and
    ``summary.csv``. Returns the exit code (0 all pass, 1 otherwise)."""
    scenarios = load_config(config, seed)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if jobs > 1 and len(scenarios) > 1:
        with ProcessPoolExecutor(min(jobs, len(scenarios))) as ex:
            results = list(ex.map(run_scenario, scenarios))
    else:
        results = [run_scenario(s) for s in scenarios]
    summary = []
    for sc, rows in zip(scenarios, results):
        with open(out / f"{sc.name}.jsonl", "w") as fh:
            for row in rows:
                fh.write(_dumps(row) + "\n")
        summary += rows
    with open(out / "summary.csv", "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=SUMMARY_KEYS, extrasaction="ignore", lineterminator="\n")
        w.writeheader()
        for row in summary:
            w.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in row.items()})
    return 0 if all(r["status"] == "pass" for r in summary) else 1


# --- golden files ------------------------------------------------------------------------

def _read_rows(path) -> list:
    rows = []
    with open(path) as fh:
        for i, line in enumerate(fh, 1):
            if line.strip():
                try:
                    rows.append(json.loads(line))
                except json.JSONDecodeError as exc:
                    raise SchemaMismatchError(f"{path}:{i}: not a JSON object ({exc.msg})") from exc
    return rows


def _close(a, b, tol: float) -> bool:
    if not all(isinstance(v, (int, float)) for v in (a, b)):
        return a == b
    if a == b:
        return True
    return abs(a - b) <= tol * max(1.0, abs(b))


def golden_diff(report, golden) -> tuple:
    """Compare a report with a golden file; returns ``(ok, message)``.

    Rows must match in order, keys and ``(scenario, case)``; otherwise
    :class:`SchemaMismatchError`. Numeric fields use the golden row's
    tolerance (``tolerance[field]`` or ``tolerance['default']``, relative for
    magnitudes above one); verdict and status must match exactly.
    """
    a, b = _read_rows(report), _read_rows(golden)
    if len(a) != len(b):
        raise SchemaMismatchError(f"row count differs: {len(a)} vs {len(b)}")
    for i, (ra, rb) in enumerate(zip(a, b), 1):
        if list(ra) != list(rb):
            raise SchemaMismatchError(f"row {i}: keys differ: {list(ra)} vs {list(rb)}")
        if (ra.get("scenario"), ra.get("case")) != (rb.get("scenario"), rb.get("case")):
            raise SchemaMismatchError(f"row {i}: ({ra.get('scenario')}, {ra.get('case')}) vs "
                                      f"({rb.get('scenario')}, {rb.get('case')})")
        where = f"scenario {rb['scenario']!r} case {rb['case']!r}"
        tol = rb.get("tolerance") or {"default": DEFAULT_TOL}
        for key in ("verdict", "status"):
            if ra.get(key) != rb.get(key):
                return False, f"{where}: {key} {rb.get(key)} -> {ra.get(key)}"
        for key in DIFF_FIELDS:
            t = tol.get(key, tol.get("default", DEFAULT_TOL))
            if not _close(ra.get(key), rb.get(key), t):
                return False, f"{where}: {key} {rb.get(key)!r} -> {ra.get(key)!r} (tol {t:g})"
    return True, f"{len(a)} rows match"
