"""Acceptance checks 1-10 at their stated tolerances.

Each test records a one-line summary; the terminal summary prints one
PASS/FAIL line per criterion.
"""
import math
import time
from pathlib import Path

import numpy as np
import pytest

from diew import bisep_sdp as sdp
from diew import lhv
from diew import polytope as pt
from diew import quantum as qm
from diew import witness as wt
from diew.scenario import (Scenario, all_subsets, behavior_from_correlators,
                           correlators_from_behavior)
from diew.search import AngleVector, SearchConfig, minimize_threshold

SQRT3 = math.sqrt(3)
BISEP3 = 6 * SQRT3
DATA = Path(__file__).parent / "data"


def number(n):
    def mark(fn):
        fn.criterion_number = n
        return fn
    return mark


def ghz(meas, v):
    return qm.born_behavior(qm.noisy(qm.ghz_state(3), v), meas)


class Timer:
    def __enter__(self):
        self.start = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.seconds = time.perf_counter() - self.start


@number(1)
def test_criterion_01_witness_values(criterion):
    entry = criterion(1, "I_3 on GHZ = 3^(5/2), linear in V, equals 6*sqrt3 at V=2/3")
    w = wt.build_In(3)
    meas = wt.reference_ghz_settings(3)
    with Timer() as t:
        full = wt.evaluate_behavior(w, ghz(meas, 1.0))
    assert abs(full - 3 ** 2.5) <= 1e-9 and t.seconds < 1
    for v in np.linspace(0, 1, 11):
        with Timer() as t:
            val = wt.evaluate_behavior(w, ghz(meas, v))
        assert abs(val - 3 ** 2.5 * v) <= 1e-9 and t.seconds < 1
    at = wt.evaluate_behavior(w, ghz(meas, 2 / 3))
    assert abs(at - BISEP3) <= 1e-9
    entry["details"].append(f"V=1: {full:.12f}; V=2/3: {at:.12f}")


@number(2)
def test_criterion_02_tightness(criterion):
    entry = criterion(2, "tight biseparable constructions reach 6*sqrt3 (n=3) and 2*3^(5/2) (n=4)")
    for n, target in ((3, BISEP3), (4, 2 * 3 ** 2.5)):
        with Timer() as t:
            rho, meas = wt.tight_bisep_construction(n)
            val = wt.evaluate_behavior(wt.build_In(n), qm.born_behavior(rho, meas))
        assert abs(val - target) <= 1e-9 and t.seconds < 1
        entry["details"].append(f"n={n}: {val:.12f} (target {target:.12f}, {t.seconds:.2f} s)")


@number(3)
def test_criterion_03_qutrit(criterion):
    entry = criterion(3, "qutrit GHZ example gives 6*sqrt3 + 8/3")
    with Timer() as t:
        rho, meas = wt.qutrit_example()
        val = wt.evaluate_behavior(wt.build_In(3), qm.born_behavior(rho, meas))
    assert abs(val - (BISEP3 + 8 / 3)) <= 1e-9 and t.seconds < 1
    entry["details"].append(f"value {val:.12f}")


@number(4)
def test_criterion_04_mermin(criterion):
    entry = criterion(4, "Mermin on GHZ X/Y = 4; biased demo = 2 sqrt(1 + sin^2 theta)")
    with Timer() as t:
        val = wt.evaluate_behavior(wt.mermin_witness(), ghz(wt.mermin_xy_settings(), 1.0))
        demos = [(th, *wt.biased_mermin_demo(th)) for th in (0.1, 0.3, math.pi / 4)]
    assert abs(val - 4) <= 1e-9 and t.seconds < 1
    for th, analytic, born in demos:
        assert abs(born - 2 * math.sqrt(1 + math.sin(th) ** 2)) <= 1e-9
        assert abs(analytic - born) <= 1e-9
    entry["details"].append("biased: " + ", ".join(f"{th:.3f}->{born:.10f}" for th, _, born in demos))


@number(5)
def test_criterion_05_bound_oracles(criterion):
    entry = criterion(5, "Svetlichny and local bounds by enumeration")
    with Timer() as t:
        sv_i3 = pt.svetlichny_bound(wt.build_In(3))
        sv_m = pt.svetlichny_bound(wt.mermin_witness())
        loc_m = pt.local_bound(wt.mermin_witness())
        loc_i3 = pt.local_bound(wt.build_In(3))
    assert t.seconds < 10
    assert sv_i3 == 12 == 4 * 3 ** (3 - 2)
    assert sv_m == 4
    assert loc_m == 2
    assert 8 <= loc_i3 <= BISEP3
    entry["details"].append(f"S(I_3)={sv_i3:g} S(M)={sv_m:g} L(M)={loc_m:g} L(I_3)={loc_i3:g}")


@number(6)
def test_criterion_06_lhv(criterion):
    entry = criterion(6, "hidden-variable model equals GHZ at V=1/2; Monte Carlo within 4 sigma")
    rng = np.random.default_rng(6)
    with Timer() as t:
        worst = 0.0
        for _ in range(100):
            dirs = lhv.MeasurementDirections.random(rng)
            a = lhv.analytic_correlators(dirs)
            b = correlators_from_behavior(qm.born_behavior(qm.noisy(qm.ghz_state(3), 0.5),
                                                           qm.observables_from_angles(dirs.angles)))
            worst = max(worst, max(float(np.abs(a.terms[s] - b.terms[s]).max()) for s in all_subsets(3)))
        dirs = lhv.MeasurementDirections.random(rng)
        mc = lhv.monte_carlo_correlators(dirs, 1_000_000, seed=2024)
        exact = lhv.analytic_correlators(dirs)
        z = max(float(np.max(np.abs(mc.correlators.terms[s] - exact.terms[s]) / mc.std_errors[s]))
                for s in all_subsets(3))
        signs = lhv._sample_batch(np.random.default_rng(7), 1_000_000)["signs"]
        p_plus = float(np.mean(signs[:, 0] == 1))
    assert worst <= 1e-12
    assert z <= 4
    assert abs(p_plus - lhv.SIGN_PLUS_PROB) <= 3e-3
    assert t.seconds < 30
    entry["details"].append(f"max |analytic - Born| {worst:.1e}; max z {z:.2f}; "
                            f"P(s=+1) {p_plus:.4f}; {t.seconds:.1f} s")


@pytest.mark.slow
@number(7)
def test_criterion_07_sdp_thresholds(criterion):
    entry = criterion(7, "level-2 visibility thresholds: GHZ m=3 0.6667, GHZ m=2 0.7071, W m=2 0.7500")
    ref = wt.reference_ghz_settings(3)
    # the GHZ behavior with these settings is invariant under party permutations
    assert sdp.membership(ghz(ref, 0.70), 2, certificate=False, symmetric=True).status == "infeasible"
    assert sdp.membership(ghz(ref, 0.50), 2, certificate=False, symmetric=True).status == "feasible_at_level"
    g3 = sdp.visibility_threshold(qm.ghz_state(3), ref, 2, tol_v=1e-3, symmetric=True)
    entry["details"].append(f"GHZ m=3: {g3.value:.5f} in [{g3.lower:.5f}, {g3.upper:.5f}]")
    assert abs(g3.value - 2 / 3) <= 0.005

    g2 = sdp.visibility_threshold(qm.ghz_state(3), wt.mermin_xy_settings(), 2, tol_v=1e-3)
    entry["details"].append(f"GHZ m=2: {g2.value:.5f} in [{g2.lower:.5f}, {g2.upper:.5f}]")
    assert abs(g2.value - 1 / math.sqrt(2)) <= 0.005

    cfg = SearchConfig(restarts=4, max_evals=400, seed=0, mode="full_bloch", symmetric=True, min_step=1e-3)
    w2 = minimize_threshold(qm.w_state(), Scenario(3, 2), 2, cfg)
    entry["details"].append(f"W m=2: {w2.threshold.value:.5f} after {w2.search.evaluations} evaluations")
    assert abs(w2.threshold.value - 0.75) <= 0.005

    # three-setting W row: reported only
    path = DATA / "w3_angles.json"
    if path.exists():
        angles = AngleVector.load(path)
        t3 = sdp.direct_threshold(qm.w_state(), angles.measurements(), 2, symmetric=True)
        entry["details"].append(f"W m=3 (stored search optimum, not a gate): {t3:.5f}; reference 0.7158")
    else:
        entry["details"].append("W m=3: no stored search optimum; run scripts/table1.py --rows w3")


@number(8)
def test_criterion_08_certificates(criterion):
    entry = criterion(8, "extracted DIEWs hold on 200 random biseparable behaviors and are violated")
    cases = [
        ("GHZ X/Y V=0.8, m=2", ghz(wt.mermin_xy_settings(), 0.8), False),
        ("GHZ m=3 V=0.70", ghz(wt.reference_ghz_settings(3), 0.70), True),
    ]
    rng = np.random.default_rng(8)
    for label, b, symmetric in cases:
        r = sdp.membership(b, 2, symmetric=symmetric)
        assert r.status == "infeasible"
        w = sdp.extract_diew(r)
        bound = w.bound("biseparable")
        m = b.scenario.m_settings
        samples = [wt.random_biseparable_product(3, m, rng, pure=True) for _ in range(100)]
        samples += [wt.random_biseparable_mixture(3, m, rng) for _ in range(100)]
        if m == 3:
            # a biseparable behavior on the boundary of the I_3 bound
            samples.append(qm.born_behavior(*wt.tight_bisep_construction(3)))
        with Timer() as t:
            worst = max(wt.evaluate_behavior(w, s) for s in samples)
            on_target = wt.evaluate_behavior(w, b)
        assert worst <= bound + 1e-6
        assert on_target > bound
        assert t.seconds < 1
        entry["details"].append(f"{label}: bound {bound:.6f}, worst sample {worst:.6f}, "
                                f"tested {on_target:.6f} ({t.seconds * 1e3:.0f} ms)")


@number(9)
def test_criterion_09_svetlichny(criterion):
    entry = criterion(9, "Svetlichny LP threshold 1/sqrt2 and L inside S_2/1 and the relaxation")
    with Timer() as t:
        value, lo, hi = pt.svetlichny_visibility(qm.ghz_state(3), wt.svetlichny_xy_settings(), tol_v=1e-4)
    assert abs(value - 1 / math.sqrt(2)) <= 1e-3 and t.seconds < 10
    entry["details"].append(f"GHZ threshold {value:.5f} in [{lo:.5f}, {hi:.5f}] ({t.seconds:.1f} s)")

    rng = np.random.default_rng(9)
    local_members = sdp_only = 0
    for _ in range(50):
        rho = qm.noisy(qm.random_pure_state((2, 2, 2), rng), rng.uniform(0.2, 1.0))
        meas = qm.observables_from_angles(np.stack(
            [np.arccos(rng.uniform(-1, 1, (3, 2))), rng.uniform(0, 2 * np.pi, (3, 2))], axis=-1))
        b = qm.born_behavior(rho, meas)
        loc = pt.lp_membership(b, "local")
        sv = pt.lp_membership(b, "svetlichny")
        feas = sdp.membership(b, 2, certificate=False)
        if loc.member:
            local_members += 1
            assert sv.member
            assert feas.status != "infeasible"
        if feas.status != "infeasible" and not sv.member:
            sdp_only += 1
    entry["details"].append(f"{local_members}/50 local members, all inside S_2/1 and feasible; "
                            f"{sdp_only} feasible outside S_2/1 (allowed)")


@number(10)
def test_criterion_10_properties(criterion):
    entry = criterion(10, "periodicity, correlator bijection, biseparable bound, nesting, induction")
    for k in range(-30, 31):
        assert wt.f_coeff(k + 3) == -wt.f_coeff(k)

    rng = np.random.default_rng(10)
    worst = 0.0
    for _ in range(100):
        m = int(rng.integers(1, 4))
        rho = qm.random_mixed_state((2, 2, 2), rng)
        meas = qm.observables_from_angles(np.stack(
            [np.arccos(rng.uniform(-1, 1, (3, m))), rng.uniform(0, 2 * np.pi, (3, m))], axis=-1))
        b = qm.born_behavior(rho, meas)
        back = behavior_from_correlators(correlators_from_behavior(b))
        worst = max(worst, float(np.abs(back.probabilities - b.probabilities).max()))
    assert worst <= 1e-12

    w = wt.build_In(3)
    best = max(wt.evaluate_behavior(w, wt.random_biseparable_product(3, 3, rng, pure=k % 2 == 0))
               for k in range(200))
    assert best <= BISEP3 + 1e-7

    grid = (0.5, 0.6, 0.68, 0.7, 0.72, 0.8, 0.9, 1.0)
    for v in grid:
        b = ghz(wt.mermin_xy_settings(), v)
        r2 = sdp.membership(b, 2, certificate=False)
        r1 = sdp.membership(b, 1, certificate=False)
        if r2.feasible:
            assert r1.status == "feasible_at_level"

    rep = wt.induction_check(3, samples=100, seed=10)
    assert rep.all_within
    entry["details"].append(f"bijection error {worst:.1e}; max I_3 on biseparable {best:.6f}; "
                            f"induction max {rep.max_value:.4f} <= {rep.bound:.4f}")
