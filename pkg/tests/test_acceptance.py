"""Acceptance gate: one test per headline criterion, each printing a
single PASS/FAIL line (run with -s to see them on success)."""

import math
import time

import numpy as np
import pytest

from qpvlab import approx_search, errmodel, exact_search, graphs, qcore
from qpvlab.approx_search import ApproxConfig, minimize_multibase, minimize_p_err, sweep_theta
from qpvlab.exact_search import ExactSearchConfig, fold_theta, least_squares_search
from qpvlab.qcore import ProtocolSpec

from conftest import random_unitary


def _report(name, ok, detail=""):
    tail = f" -- {detail}" if detail else ""
    print(f"{'PASS' if ok else 'FAIL'}: {name}{tail}", flush=True)
    assert ok, f"{name}{tail}"


# -- criterion 1: explicit solutions ------------------------------------------

def test_explicit_solution_verification():
    t0 = time.perf_counter()
    worst = {"unitarity": 0.0, "ddc": 0.0, "p_err": 0.0}
    ok = True
    for name in sorted(exact_search.EXPLICIT_SOLUTIONS):
        report, _ = exact_search.verify_explicit(name)
        ok &= report["passed"]
        worst["unitarity"] = max(
            worst["unitarity"], report["unitarity_u"], report["unitarity_v"]
        )
        worst["ddc"] = max(worst["ddc"], report["ddc_worst"])
        worst["p_err"] = max(worst["p_err"], report["p_err"])
    elapsed = time.perf_counter() - t0
    ok &= worst["unitarity"] <= 1e-10
    ok &= worst["ddc"] <= 1e-10
    ok &= worst["p_err"] <= 1e-12
    ok &= elapsed < 1.0
    _report(
        "explicit-solution verification",
        ok,
        f"worst unitarity {worst['unitarity']:.1e}, worst DDC "
        f"{worst['ddc']:.1e}, worst p_err {worst['p_err']:.1e}, "
        f"{elapsed:.2f} s",
    )


# -- criterion 2: exact-attack recovery ---------------------------------------

RECOVERY_CASES = [
    # (d, theta, restarts, seed)
    (2, math.pi / 4, 1000, 0),
    (4, math.pi / 8, 1000, 0),
    (4, math.pi / 4, 1000, 0),
    (4, 3 * math.pi / 8, 1000, 0),
    (6, math.pi / 12, 10_000, 20260826),
]


@pytest.fixture(scope="module")
def recovered():
    results = []
    for d, theta, restarts, seed in RECOVERY_CASES:
        config = ExactSearchConfig(restarts=restarts, seed=seed)
        results.append(least_squares_search(d, fold_theta(theta), config))
    return results


def test_exact_attack_recovery(recovered):
    ok = True
    details = []
    for (d, theta, _, _), res in zip(RECOVERY_CASES, recovered):
        ok &= res.found and res.best_f_projected < 1e-18
        details.append(
            f"(d={d}, theta={theta:.4g}): F={res.best_f_projected:.1e} "
            f"after {res.restarts_used} restarts"
        )
    _report("exact-attack recovery", ok, "; ".join(details))


# -- criterion 3: no-go consistency -------------------------------------------

def test_nogo_consistency():
    details = []
    ok = True
    for d, theta in ((2, math.pi / 8), (3, math.pi / 4)):
        config = ExactSearchConfig(restarts=5000, seed=0, stop_on_found=False)
        res = least_squares_search(d, theta, config)
        min_f = min(res.per_restart_f)
        ok &= (not res.found) and min_f > 1e-6
        details.append(f"(d={d}, theta={theta:.4g}): min F={min_f:.2e}")
    scan2 = graphs.nogo_scan(2)
    scan3 = graphs.nogo_scan(3)
    ok &= scan2["consistent_pairs"] == 1
    ok &= scan3["consistent_pairs"] == 0
    details.append(
        f"consistent pair classes d=2: {scan2['consistent_pairs']}, "
        f"d=3: {scan3['consistent_pairs']}"
    )
    _report("no-go consistency", ok, "; ".join(details))


# -- criterion 4: d=2 curve ---------------------------------------------------

def test_d2_curve():
    t0 = time.perf_counter()
    thetas = np.linspace(0.0, math.pi / 4, 65)
    sweep = sweep_theta(
        2, thetas, ApproxConfig(restarts=1000, seed=0, mode="real")
    )
    elapsed = time.perf_counter() - t0
    expect = np.array([errmodel.d2_piecewise_p_err(t) for t in thetas])
    dev = np.abs(sweep.p_err - expect).max()
    max_dev = abs(sweep.p_err.max() - math.sin(math.pi / 16) ** 2)
    ok = dev < 2e-4 and max_dev < 2e-4 and elapsed < 600
    _report(
        "d=2 curve vs piecewise formula",
        ok,
        f"max pointwise dev {dev:.2e}, max-value dev {max_dev:.2e}, "
        f"{elapsed:.0f} s",
    )


# -- criterion 5: d=4 headline number -----------------------------------------

def _d4_grid_max(restarts):
    thetas = np.linspace(0.0, math.pi / 4, 17)
    sweep = sweep_theta(
        4, thetas, ApproxConfig(restarts=restarts, seed=0, mode="real")
    )
    return float(sweep.p_err.max())


@pytest.mark.slow
def test_d4_headline_reduced():
    best = _d4_grid_max(10_000)
    ok = best <= 1e-2
    _report("d=4 17-point grid (1e4 restarts)", ok, f"max p_err {best:.3e}")


@pytest.mark.slow
def test_d4_headline_full():
    best = _d4_grid_max(100_000)
    ok = best <= 6e-3
    _report("d=4 17-point grid (1e5 restarts)", ok, f"max p_err {best:.3e}")


# -- criterion 6: multibase closed form ---------------------------------------

def test_multibase_closed_form():
    ok = True
    worst = 0.0
    for n in range(2, 9):
        res = minimize_multibase(1, n, ApproxConfig(restarts=200, seed=0))
        dev = abs(res.p_err - errmodel.multibase_d1_p_err(n))
        worst = max(worst, dev)
        ok &= dev < 1e-6
    res22 = minimize_multibase(2, 2, ApproxConfig(restarts=100, seed=0))
    ok &= res22.p_err <= 1e-10
    _report(
        "multibase closed form",
        ok,
        f"d=1 worst deviation {worst:.1e} (n=2..8), "
        f"d=2 n=2 p_err {res22.p_err:.1e}",
    )


# -- criterion 7: KAK ---------------------------------------------------------

def test_kak_invariants():
    rng = np.random.default_rng(7)
    worst = 0.0
    for theta in rng.uniform(1e-3, math.pi / 2 - 1e-3, 20):
        got = qcore.kak_nonlocal_params(qcore.u_theta_gate(theta))
        expect = np.sort([0.0, theta / 2, math.pi / 4])
        worst = max(worst, np.abs(np.asarray(got) - expect).max())
    _report("KAK nonlocal parameters", worst < 1e-10, f"worst dev {worst:.1e}")


# -- criterion 8: property suites ---------------------------------------------

def test_property_gradient_finite_difference():
    rng = np.random.default_rng(11)
    worst = 0.0
    protocol = ProtocolSpec.single(0.47)
    for kind in approx_search.RETRACTION_KINDS:
        for mode in ("real", "complex"):
            n = approx_search.n_coords(2, protocol, mode)
            for _ in range(3):
                x = 0.6 * rng.standard_normal(n)
                _, grad = approx_search.objective_and_gradient(
                    x, 2, protocol, kind=kind, mode=mode
                )
                eps = 1e-6
                for i in range(n):
                    dx = np.zeros(n)
                    dx[i] = eps
                    fp, _ = approx_search.objective_and_gradient(
                        x + dx, 2, protocol, kind=kind, mode=mode
                    )
                    fm, _ = approx_search.objective_and_gradient(
                        x - dx, 2, protocol, kind=kind, mode=mode
                    )
                    fd = (fp - fm) / (2 * eps)
                    worst = max(
                        worst, abs(grad[i] - fd) / max(1.0, abs(fd))
                    )
    _report(
        "gradient vs finite differences", worst < 1e-4,
        f"worst relative dev {worst:.1e}",
    )


def test_property_spacetime_vs_reduced():
    rng = np.random.default_rng(13)
    worst = 0.0
    for _ in range(100):
        d = int(rng.integers(1, 4))
        theta = float(rng.uniform(0, math.pi / 2))
        st = qcore.SpacetimeStrategy(
            d=d,
            v_prime=random_unitary(rng, 2 * d),
            w0=random_unitary(rng, d),
            w1=random_unitary(rng, d),
        )
        _, p_success = qcore.simulate_spacetime(st, theta)
        reduced = qcore.reduce_spacetime(st)
        p = errmodel.p_err(reduced, ProtocolSpec.single(theta)).p_err
        worst = max(worst, abs(p_success - (1.0 - p)))
    _report(
        "full-spacetime vs reduced-circuit oracle", worst < 1e-10,
        f"worst dev {worst:.1e} over 100 instances",
    )


def test_property_balanced_on_found_solutions(recovered):
    worst = 0.0
    for res in recovered:
        if not res.found:
            continue
        dev = errmodel.balanced_check(
            res.strategy, ProtocolSpec.single(res.theta)
        )
        worst = max(worst, dev)
    _report(
        "balanced condition on found exact attacks", worst <= 1e-5,
        f"worst deviation {worst:.1e}",
    )


def test_property_symmetry_mapped_optima():
    theta = 0.29
    a = minimize_p_err(
        2, ProtocolSpec.single(theta), ApproxConfig(restarts=200, seed=0)
    )
    b = minimize_p_err(
        2, ProtocolSpec.single(math.pi / 2 - theta),
        ApproxConfig(restarts=200, seed=1),
    )
    dev = abs(a.p_err - b.p_err)
    _report(
        "symmetry-mapped optima equality", dev < 2e-4,
        f"|p_err({theta:.3g}) - p_err(pi/2-{theta:.3g})| = {dev:.2e}",
    )


# -- larger attack-dimension recovery (slow) ----------------------------------

LARGE_D_CASES = [
    # (d, k, restarts): search every angle n*pi/k
    (5, 4, 20_000),
    (7, 4, 50_000),
    (8, 16, 50_000),
]


@pytest.mark.slow
@pytest.mark.parametrize("d,k,restarts", LARGE_D_CASES)
def test_large_d_recovery(d, k, restarts):
    config = ExactSearchConfig(restarts=restarts, seed=20260826)
    table = exact_search.classify_angles(d, [k], config)
    entry = table[0]
    detail = ", ".join(
        f"theta={t:.4g}: {'FOUND' if r.found else 'NOT-FOUND'}"
        for t, r in entry["angles"].items()
    )
    _report(f"exact-attack recovery d={d}, k={k}", entry["found_all"], detail)
