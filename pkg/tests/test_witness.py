import itertools
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from diew import quantum as qm
from diew import witness as wt
from diew.scenario import CorrelatorSet, Scenario, ScenarioError, correlators_from_behavior, mix_with_noise

SQRT3 = math.sqrt(3)


def test_f_values():
    assert [wt.f_coeff(k) for k in range(6)] == [1, 1, 0, -1, -1, 0]
    assert wt.f_coeff(3) == -1
    assert wt.f_coeff(8) == 0


def test_f_periodicity_exhaustive():
    for k in range(-12, 13):
        assert wt.f_coeff(k + 3) == -wt.f_coeff(k)
        assert wt.f_coeff(k + 6) == wt.f_coeff(k)


def test_e_sum():
    sc = Scenario(3, 3)
    ones = CorrelatorSet(sc, {(0, 1, 2): np.ones((3, 3, 3))})
    assert wt.e_sum(ones, 4) == 3
    assert wt.e_sum(ones, 2) == 0 and wt.e_sum(ones, 10) == 0
    c = correlators_from_behavior(qm.born_behavior(qm.ghz_state(3), wt.reference_ghz_settings(3)))
    assert wt.e_sum(c, 9) == pytest.approx(c.full[2, 2, 2])
    total = sum(wt.f_coeff(k - 3) * wt.e_sum(c, k) for k in range(3, 10))
    assert total == pytest.approx(wt.evaluate(wt.build_In(3), c))


def test_build_I3_pattern():
    w = wt.build_In(3)
    assert w.n_nonzero() == 18
    s = np.indices((3, 3, 3)).sum(axis=0) + 3
    for k in range(3, 10):
        vals = set(w.coeffs[s == k].tolist())
        expected = {3: 1, 4: 1, 5: 0, 6: -1, 7: -1, 8: 0, 9: 1}[k]
        assert vals == {expected}
    assert w.bound("biseparable") == pytest.approx(6 * SQRT3)
    assert w.bound("svetlichny") == 12
    assert w.algebraic_max() == 18


def test_build_In_bounds():
    assert wt.build_In(4).bound("biseparable") == pytest.approx(2 * 3 ** 2.5)
    assert wt.build_In(4).bound("svetlichny") == 36
    with pytest.raises(ValueError):
        wt.build_In(1)


def test_bound_ordering_enforced():
    with pytest.raises(ValueError):
        wt.WitnessCoefficients(Scenario(3, 2), {}, {"local": 3.0, "biseparable": 2.0})


def test_evaluate_uniform_and_mismatch():
    w = wt.build_In(3)
    zero = CorrelatorSet(Scenario(3, 3), {(0, 1, 2): np.zeros((3, 3, 3))})
    assert wt.evaluate(w, zero) == 0
    with pytest.raises(ScenarioError):
        wt.evaluate(w, CorrelatorSet(Scenario(3, 2), {(0, 1, 2): np.zeros((2, 2, 2))}))


def test_reference_phase():
    assert wt.reference_phase(3, 1) == pytest.approx(-np.pi / 18)


@pytest.mark.parametrize("n", [2, 3, 4])
def test_ghz_quantum_value(n):
    b = qm.born_behavior(qm.ghz_state(n), wt.reference_ghz_settings(n))
    assert wt.evaluate_behavior(wt.build_In(n), b) == pytest.approx(3 ** (n - 0.5), abs=1e-9)


@given(st.floats(0, 1))
def test_noise_linearity(v):
    b = qm.born_behavior(qm.ghz_state(3), wt.reference_ghz_settings(3))
    w = wt.build_In(3)
    assert wt.evaluate_behavior(w, mix_with_noise(b, v)) == pytest.approx(v * 3 ** 2.5, abs=1e-9)


@pytest.mark.parametrize("n", [3, 4])
def test_tight_biseparable_construction(n):
    rho, meas = wt.tight_bisep_construction(n)
    value = wt.evaluate_behavior(wt.build_In(n), qm.born_behavior(rho, meas))
    assert value == pytest.approx(2 * 3 ** (n - 1.5), abs=1e-9)


def test_tight_state_is_product():
    rho, _ = wt.tight_bisep_construction(3)
    ab, c = rho.partial_trace([0, 1]), rho.partial_trace([2])
    assert np.allclose(ab.tensor(c).entries, rho.entries)
    with pytest.raises(ValueError):
        wt.tight_bisep_construction(2)


def test_qutrit_example():
    rho, meas = wt.qutrit_example()
    value = wt.evaluate_behavior(wt.build_In(3), qm.born_behavior(rho, meas))
    assert value == pytest.approx(6 * SQRT3 + 8 / 3, abs=1e-9)


def test_mermin():
    m = wt.mermin_witness()
    assert m.bound("biseparable") == pytest.approx(2 * math.sqrt(2))
    assert m.notes["qubit_bisep"] == 2
    b = qm.born_behavior(qm.ghz_state(3), wt.mermin_xy_settings())
    assert wt.evaluate_behavior(m, b) == pytest.approx(4.0, abs=1e-9)
    zero = CorrelatorSet(Scenario(3, 2), {(0, 1, 2): np.zeros((2, 2, 2))})
    assert wt.evaluate(m, zero) == 0


@pytest.mark.parametrize("theta", [0.0, 0.1, 0.3, np.pi / 4, np.pi / 2])
def test_biased_mermin(theta):
    analytic, numeric = wt.biased_mermin_demo(theta)
    assert analytic == pytest.approx(2 * math.sqrt(1 + math.sin(theta) ** 2))
    assert numeric == pytest.approx(analytic, abs=1e-9)


def test_biased_mermin_endpoints():
    assert wt.biased_mermin_demo(0.0)[1] == pytest.approx(2.0)
    assert wt.biased_mermin_demo(np.pi / 2)[1] == pytest.approx(2 * math.sqrt(2))


def test_biseparable_products_respect_bound(rng):
    w = wt.build_In(3)
    bound = 6 * SQRT3 + 1e-7
    for _ in range(200):
        for block in [(0, 1), (0, 2), (1, 2)]:
            rho_ab = qm.random_mixed_state((2, 2), rng)
            rho_c = qm.random_mixed_state((2,), rng)
            order = block + tuple(i for i in range(3) if i not in block)
            rho = rho_ab.tensor(rho_c).permute(np.argsort(order))
            phis = rng.uniform(0, 2 * np.pi, size=(3, 3))
            meas = qm.MeasurementAssignment.from_observables(
                [[qm.equatorial_observable(p) for p in row] for row in phis])
            assert wt.evaluate_behavior(w, qm.born_behavior(rho, meas)) <= bound


@pytest.mark.parametrize("n", [3, 4])
def test_relabelling_maps_shifted_witnesses(n):
    for j in range(6):
        mapped = wt.relabel_last_party_cyclic(wt.shifted_In_coefficients(n, j + 1))
        assert np.array_equal(mapped, wt.shifted_In_coefficients(n, j))


def test_chained_reduction():
    zero, nonzero = [], []
    for g in wt.SignVector.all():
        table = wt.chained_reduction(g).terms[(0, 1)]
        (nonzero if np.any(table) else zero).append(g.gamma)
        if np.any(table):
            assert np.abs(table).sum() == 12
            assert wt.find_chained_relabelling(table) is not None
    assert sorted(zero) == sorted([(1, -1, 1), (-1, 1, -1)])
    assert len(nonzero) == 6


def test_g_gamma_formula():
    g = wt.SignVector((1, 1, 1))
    for k in range(2, 7):
        assert wt.g_gamma(g, k) == sum(wt.f_coeff(k + z - 3) for z in (1, 2, 3))
    with pytest.raises(ValueError):
        wt.SignVector((1, 0, 1))


def test_chained_quantum_max_numeric():
    """Twice the chained Tsirelson value 3*sqrt3 is reached on a Bell state."""
    table = wt.chained_reduction((1, 1, 1)).terms[(0, 1)]
    rho = qm.ghz_state(2)
    best = -np.inf
    grid = np.linspace(0, 2 * np.pi, 13)[:-1]
    for a0, b0 in itertools.product(grid, grid):
        for step in (np.pi / 3, -np.pi / 3):
            phis = [[a0 + step * x for x in range(3)], [b0 + step * x for x in range(3)]]
            meas = qm.MeasurementAssignment.from_observables(
                [[qm.equatorial_observable(p) for p in row] for row in phis])
            c = correlators_from_behavior(qm.born_behavior(rho, meas))
            best = max(best, float((table * c.full).sum()))
    assert best <= 6 * SQRT3 + 1e-9
    assert best == pytest.approx(6 * SQRT3, abs=1e-9)


def test_induction_check():
    rep = wt.induction_check(3, samples=100, seed=1)
    assert rep.all_within
    assert rep.bound == pytest.approx(3 * 6 * SQRT3)
    rho, meas = wt.tight_bisep_construction(4)
    assert wt.evaluate_behavior(wt.build_In(4), qm.born_behavior(rho, meas)) <= rep.bound


def test_witness_json_round_trip(tmp_path):
    w = wt.build_In(3)
    path = tmp_path / "w.json"
    wt.save_witness(w, path)
    back = wt.load_witness(path)
    assert np.array_equal(back.coeffs, w.coeffs)
    assert back.bounds == w.bounds


def test_witness_json_marginals_and_order():
    d = {"scenario": {"parties": 3, "settings": 2},
         "coeffs": [{"x": [1, 2], "c": 0.5, "parties": [3, 1]}, {"x": [1, 1, 2], "c": -1}]}
    w = wt.witness_from_dict(d)
    assert w.terms[(0, 2)][1, 0] == 0.5
    assert w.coeffs[0, 0, 1] == -1
    again = wt.witness_from_dict(wt.witness_to_dict(w))
    assert np.array_equal(again.terms[(0, 2)], w.terms[(0, 2)])
    with pytest.raises(ScenarioError):
        wt.witness_from_dict({"scenario": {"parties": 3, "settings": 2}, "coeffs": [{"x": [3, 1, 1], "c": 1}]})
