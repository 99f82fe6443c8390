"""The acceptance criteria, one test each, at their stated tolerances.

Each test runs the matching scenarios of the bundled ``acceptance`` config
(the same rows ``lab run acceptance`` writes) plus any direct checks, logs a
pass/fail line and then asserts.
"""
import math
import time

import numpy as np
import pytest

from tentlab.functional import LOG_2PI
from tentlab.measures import GaussianParams, Grid
from tentlab.moment_map import entropy_identity_gap, solve_moment_map_1d
from tentlab.scenarios import load_config, run_scenario

SCENARIOS = {s.name: s for s in load_config("acceptance")}


def _run(*names):
    t0 = time.perf_counter()
    rows = {n: run_scenario(SCENARIOS[n]) for n in names}
    return rows, time.perf_counter() - t0


def _no_errors(rows):
    return all(r["status"] != "error" for rs in rows.values() for r in rs)


def _not_violated(rs):
    return all(r["verdict"] != "Violated" for r in rs)


def _finish(log, k, checks, detail):
    failed = [name for name, ok in checks.items() if not ok]
    ok = not failed
    log.append((k, ok, detail + ("" if ok else f"; failed: {', '.join(failed)}")))
    assert ok, failed


def test_c01_equality_family(acceptance_log):
    rows, secs = _run("c01_equality_family")
    rs = rows["c01_equality_family"]
    worst = max(abs(r["gap"]) for r in rs)
    _finish(acceptance_log, 1, {"1000 cases": len(rs) == 1000, "|gap| <= 1e-8": worst <= 1e-8,
                                "runtime < 5 s": secs < 5, "no errors": _no_errors(rows)},
            f"equality family: max |gap| {worst:.2e} over {len(rs)} cases in {secs:.1f} s")


def test_c02_talagrand_sweep(acceptance_log):
    rows, secs = _run("c02_talagrand_sweep")
    rs = rows["c02_talagrand_sweep"]
    violated = sum(r["verdict"] == "Violated" for r in rs)
    _finish(acceptance_log, 2, {"500 cases": len(rs) == 500, "no Violated": violated == 0,
                                "runtime < 2 min": secs < 120, "no errors": _no_errors(rows)},
            f"transport-entropy sweep: {violated} violated of {len(rs)} in {secs:.1f} s")


def test_c03_counterexample(acceptance_log):
    rows, _ = _run("c03_counterexample")
    r, = rows["c03_counterexample"]
    _finish(acceptance_log, 3, {"lhs 4": r["lhs"] == pytest.approx(4.0), "rhs 2": r["rhs"] == pytest.approx(2.0),
                                "Violated": r["verdict"] == "Violated", "expectation met": r["status"] == "pass"},
            f"non-centred pair: lhs {r['lhs']:g} rhs {r['rhs']:g} verdict {r['verdict']} status {r['status']}")


def test_c04_santalo_equality(acceptance_log):
    rows, _ = _run("c04_santalo_1d", "c04_santalo_2d")
    r1, = rows["c04_santalo_1d"]
    r2, = rows["c04_santalo_2d"]
    e1, e2 = abs(r1["lhs"] - LOG_2PI), abs(r2["lhs"] - 2 * LOG_2PI)
    _finish(acceptance_log, 4, {"1D within 1e-6": e1 <= 1e-6, "2D within 1e-5": e2 <= 1e-5,
                                "no errors": _no_errors(rows)},
            f"log-product error {e1:.1e} (d=1, n=2048), {e2:.1e} (d=2, n=256)")


def test_c05_duality_backward(acceptance_log):
    rows, _ = _run("c05_duality_backward")
    rs = rows["c05_duality_backward"]
    bary = max(r["details"]["barycenter_norm"] for r in rs)
    mass = max(r["details"]["mass_invariance_error"] for r in rs)
    _finish(acceptance_log, 5, {"50 pairs": len(rs) == 50, "barycenter <= 1e-7": bary <= 1e-7,
                                "chain holds": _not_violated(rs), "mass <= 1e-9": mass <= 1e-9},
            f"recentering: max barycenter {bary:.1e}, max mass error {mass:.1e}")


def _case(rs, name):
    return next(r for r in rs if r["case"] == name)


def test_c06_moment_map(acceptance_log):
    rows, secs = _run("c06_moment_map_two_point", "c06_moment_map_gaussian", "c06_moment_map_crosscheck")
    tp, ga, cc = (rows[n] for n in ("c06_moment_map_two_point", "c06_moment_map_gaussian",
                                     "c06_moment_map_crosscheck"))
    push = _case(tp, "pushforward")["lhs"]
    l1_tp = _case(tp, "l1_exact")["lhs"]
    l1_g = _case(ga, "l1_exact")["lhs"]
    cross = max(r["lhs"] for r in cc)
    _finish(acceptance_log, 6, {
        "two-point residual <= 1e-6": push <= 1e-6,
        "two-point density recovered": l1_tp <= 1e-4,
        "Gaussian L1 <= 1e-4": l1_g <= 1e-4,
        "solvers agree on 10 targets": len(cc) == 10 and cross <= 1e-4,
        "runtime < 1 min": secs < 60, "no errors": _no_errors(rows)},
        f"moment map: two-point residual {push:.1e}, Gaussian L1 {l1_g:.1e}, "
        f"solver L1 gap {cross:.1e}, {secs:.1f} s")


def test_c07_entropy_identity_and_reverse_lsi(acceptance_log):
    rows, _ = _run("c07_reverse_lsi_gaussian", "c07_reverse_lsi_quartic")
    rg, = rows["c07_reverse_lsi_gaussian"]
    rq, = rows["c07_reverse_lsi_quartic"]
    gaps = []
    for var, half in ((4.0, 4.0), (1.0, 8.0)):
        s = math.sqrt(var)
        mu = GaussianParams([0.0], [[var]]).on_grid(Grid.regular(-12 * s, 12 * s, 2 ** 16))
        gaps.append(entropy_identity_gap(solve_moment_map_1d(mu, Grid.regular(-half, half, 8192), tol=1e-8)))
    _finish(acceptance_log, 7, {
        "entropy identity <= 1e-6": max(gaps) <= 1e-6,
        "Gaussian reverse LSI <= 1e-6": abs(rg["gap"]) <= 1e-6,
        "quartic gap > 10 x error": rq["gap"] > 10 * rq["discretization_error_estimate"]},
        f"entropy identity {max(gaps):.1e}; reverse LSI Gaussian {rg['gap']:.1e}, "
        f"quartic {rq['gap']:.4f} (error {rq['discretization_error_estimate']:.1e})")


def test_c08_x_dot_grad_phi(acceptance_log):
    rows, _ = _run("c06_moment_map_two_point", "c06_moment_map_gaussian")
    devs = [abs(_case(rows[n], "x_dot_grad_phi")["details"]["deviation"]) for n in rows]
    _finish(acceptance_log, 8, {"both within 1e-5": max(devs) <= 1e-5},
            f"|d - int x phi' drho|: two-point {devs[0]:.1e}, Gaussian {devs[1]:.1e}")


def test_c09_ulc(acceptance_log):
    rows, _ = _run("c09_ulc")
    rs = rows["c09_ulc"]
    lip = max(r["details"]["lipschitz"] for r in rs)
    _finish(acceptance_log, 9, {"20 pairs": len(rs) == 20, "no Violated": _not_violated(rs),
                                "Lipschitz <= 1 + 1e-6": lip <= 1 + 1e-6},
            f"log-concave reference: {len(rs)} pairs hold, map Lipschitz {lip:.8f}")


def test_c10_reverse_inequalities(acceptance_log):
    rows, _ = _run("c10_km_abs", "c10_reverse_laplace", "c10_km_sweep")
    km, = rows["c10_km_abs"]
    rev, = rows["c10_reverse_laplace"]
    sweep = rows["c10_km_sweep"]
    product_err = abs(math.exp(km["rhs"]) - 4.0)
    _finish(acceptance_log, 10, {
        "product 4 within 1e-6": product_err <= 1e-6,
        "Laplace gap positive": rev["gap"] > 0 and rev["verdict"] == "Holds",
        "sandwich on 50 potentials": len(sweep) == 100 and _not_violated(sweep),
        "no errors": _no_errors(rows)},
        f"|product - 4| {product_err:.1e}; Laplace/uniform gap {rev['gap']:.6f}; "
        f"sandwich holds on {len(sweep) // 2} potentials")


def test_c11_concentration(acceptance_log):
    rows, secs = _run("c11_concentration_corpus", "c11_concentration_ball", "c11_marton")
    corpus, ball, marton = (rows[n] for n in ("c11_concentration_corpus", "c11_concentration_ball", "c11_marton"))
    _finish(acceptance_log, 11, {
        "1D corpus to 1e-12": _not_violated(corpus) and max(r["gap"] * -1 for r in corpus) <= 1e-12,
        "ball within 3 s.e.": len(ball) == 3 and _not_violated(ball),
        "Marton links": len(marton) == 2 and _not_violated(marton),
        "runtime < 3 min": secs < 180, "no errors": _no_errors(rows)},
        f"concentration: {len(corpus)} exact rows, {len(ball)} Monte Carlo rows, Marton links "
        f"{[r['verdict'] for r in marton]}, {secs:.1f} s")


def test_c12_transport_backends(acceptance_log):
    rows, _ = _run("c12_sinkhorn", "c12_quantile")
    sk, qt = rows["c12_sinkhorn"], rows["c12_quantile"]
    worst_sk = max(r["lhs"] / r["rhs"] for r in sk)
    worst_q = max(r["lhs"] for r in qt)
    _finish(acceptance_log, 12, {
        "Sinkhorn within 1e-3 diam^2": len(sk) == 100 and _not_violated(sk),
        "quantile within 1e-8": len(qt) == 100 and worst_q <= 1e-8},
        f"Sinkhorn error up to {worst_sk:.2f} of budget; quantile vs LP up to {worst_q:.1e}")
