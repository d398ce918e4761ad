import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from diew import lhv
from diew import quantum as qm
from diew.scenario import all_subsets, correlators_from_behavior
from diew.witness import build_In, evaluate, reference_phase

SQRT3 = math.sqrt(3)


def born_correlators(dirs: lhv.MeasurementDirections, v: float = 0.5):
    rho = qm.noisy(qm.ghz_state(3), v)
    return correlators_from_behavior(qm.born_behavior(rho, qm.observables_from_angles(dirs.angles)))


def test_hidden_state_invariants():
    for seed in range(20):
        h = lhv.sample_hidden(seed)
        assert np.linalg.norm(h.lam) == pytest.approx(1.0, abs=1e-12)
        assert np.linalg.norm(h.pair_state) == pytest.approx(1.0, abs=1e-12)
        assert set(h.signs) <= {1, -1}
        assert h.alone not in h.pair


def test_hidden_sampler_statistics():
    batch = lhv._sample_batch(np.random.default_rng(7), 1_000_000)
    assert np.mean(batch["signs"][:, 0] == 1) == pytest.approx(lhv.SIGN_PLUS_PROB, abs=3e-3)
    assert np.mean(np.cos(batch["alpha"])) == pytest.approx(0.0, abs=3e-3)
    assert np.mean(batch["alone"] == 0) == pytest.approx(1 / 3, abs=3e-3)


def test_isolated_party_sign():
    h = lhv.HiddenState(alone=2, alpha=0.0, beta=0.0, signs=(1, 1, 1))
    a, b, c = lhv.simulate_round(h, [[0, 0], [0, 0], [0, 0]], 0)
    assert c == 1
    # alpha = 0 pairs share |00>; z measurements give +1 each
    assert (a, b) == (1, 1)
    down = lhv.simulate_round(h, [[0, 0], [0, 0], [np.pi, 0]], 0)
    assert down[2] == -1


@pytest.mark.parametrize("alone", [0, 1, 2])
def test_sign_dressing(alone):
    dirs = [[0, 0]] * 3
    plain = lhv.simulate_round(lhv.HiddenState(alone, 0.0, 0.0, (1, 1, 1)), dirs, 0)
    assert plain == (1, 1, 1)
    # flipping s_AB flips A and B only
    assert lhv.simulate_round(lhv.HiddenState(alone, 0.0, 0.0, (-1, 1, 1)), dirs, 0) == (-1, -1, 1)
    assert lhv.simulate_round(lhv.HiddenState(alone, 0.0, 0.0, (1, -1, 1)), dirs, 0) == (-1, 1, -1)
    assert lhv.simulate_round(lhv.HiddenState(alone, 0.0, 0.0, (1, 1, -1)), dirs, 0) == (1, -1, -1)


def test_pair_statistics_match_matrix():
    rng = np.random.default_rng(3)
    for _ in range(20):
        alpha, beta = rng.uniform(0, np.pi), rng.uniform(0, 2 * np.pi)
        di, dj = lhv.MeasurementDirections.random(rng).angles[:2, 0]
        psi = lhv.HiddenState(2, alpha, beta, (1, 1, 1)).pair_state
        oi = qm.bloch_observable(*di).matrix
        oj = qm.bloch_observable(*dj).matrix
        expect = lambda op: float(np.real(psi.conj() @ op @ psi))
        mi, mj, cij = lhv.pair_statistics(alpha, beta, di, dj)
        assert mi == pytest.approx(expect(np.kron(oi, np.eye(2))), abs=1e-12)
        assert mj == pytest.approx(expect(np.kron(np.eye(2), oj)), abs=1e-12)
        assert cij == pytest.approx(expect(np.kron(oi, oj)), abs=1e-12)


def test_analytic_examples():
    z = lhv.MeasurementDirections(np.zeros((3, 1, 2)))
    c = lhv.analytic_correlators(z)
    assert c.terms[(0, 1)][0, 0] == 0.5
    assert c.terms[(0, 1, 2)][0, 0, 0] == 0
    eq = lhv.MeasurementDirections([[np.pi / 2, 0.4], [np.pi / 2, -1.0], [np.pi / 2, 0.6]])
    assert lhv.analytic_correlators(eq).terms[(0, 1, 2)][0, 0, 0] == pytest.approx(0.5)


def test_analytic_equals_born_random_triples():
    rng = np.random.default_rng(11)
    worst = 0.0
    for _ in range(100):
        dirs = lhv.MeasurementDirections.random(rng)
        a, b = lhv.analytic_correlators(dirs), born_correlators(dirs)
        for s in all_subsets(3):
            worst = max(worst, float(np.max(np.abs(a.terms[s] - b.terms[s]))))
    assert worst <= 1e-12


@pytest.mark.parametrize("hemisphere", [0.3, 2.6])
def test_both_hemispheres(hemisphere):
    dirs = lhv.MeasurementDirections([[hemisphere, 0.2], [1.1, 0.7], [hemisphere, 2.0]])
    mc = lhv.monte_carlo_correlators(dirs, 200_000, seed=5)
    a = lhv.analytic_correlators(dirs)
    for s in all_subsets(3):
        assert np.all(np.abs(mc.correlators.terms[s] - a.terms[s]) <= 4 * mc.std_errors[s] + 1e-12)


def test_monte_carlo_within_four_sigma():
    dirs = lhv.MeasurementDirections.random(np.random.default_rng(2), m=2)
    mc = lhv.monte_carlo_correlators(dirs, 200_000, seed=9)
    a = lhv.analytic_correlators(dirs)
    for s in all_subsets(3):
        assert np.all(np.abs(mc.correlators.terms[s] - a.terms[s]) <= 4 * mc.std_errors[s])


def test_monte_carlo_rate():
    dirs = lhv.MeasurementDirections([[1.0, 0.1], [0.7, 2.0], [2.0, -0.4]])
    a = lhv.analytic_correlators(dirs).terms[(0, 1, 2)][0, 0, 0]

    def rms(n):
        errs = [lhv.monte_carlo_correlators(dirs, n, seed=s).correlators.terms[(0, 1, 2)][0, 0, 0] - a
                for s in range(60)]
        return math.sqrt(np.mean(np.square(errs)))

    ratio = rms(4000) / rms(16000)
    assert 1.5 < ratio < 2.7


def test_monte_carlo_determinism_and_single_round():
    dirs = lhv.MeasurementDirections.random(np.random.default_rng(4), m=2)
    r1 = lhv.monte_carlo_correlators(dirs, 1000, seed=3)
    r2 = lhv.monte_carlo_correlators(dirs, 1000, seed=3)
    assert lhv.correlators_csv(r1.correlators, r1) == lhv.correlators_csv(r2.correlators, r2)
    one = lhv.monte_carlo_correlators(dirs, 1, seed=0)
    assert set(np.unique(one.correlators.terms[(0, 1, 2)])) <= {-1.0, 1.0}
    with pytest.raises(ValueError):
        lhv.monte_carlo_correlators(dirs, 0)


def test_batching_does_not_change_statistics_shape():
    dirs = lhv.MeasurementDirections.random(np.random.default_rng(8))
    mc = lhv.monte_carlo_correlators(dirs, 10_001, seed=1, batch_size=1000)
    assert mc.n_rounds == 10_001
    assert mc.correlators.terms[(0, 1, 2)].shape == (1, 1, 1)


def test_witness_value_below_biseparable_bound():
    angles = np.array([[[np.pi / 2, reference_phase(3, x)] for x in range(1, 4)]] * 3)
    c = lhv.analytic_correlators(lhv.MeasurementDirections(angles))
    value = evaluate(build_In(3), c)
    assert value == pytest.approx(3 ** 2.5 / 2, abs=1e-9)
    assert value <= 6 * SQRT3


@settings(max_examples=30)
@given(st.lists(st.floats(0, 2 * np.pi), min_size=9, max_size=9))
def test_equatorial_witness_bound(phis):
    angles = np.stack([np.full(9, np.pi / 2), phis], axis=-1).reshape(3, 3, 2)
    c = lhv.analytic_correlators(lhv.MeasurementDirections(angles))
    assert evaluate(build_In(3), c) <= 6 * SQRT3 + 1e-9


@settings(max_examples=20)
@given(st.floats(0, 0.5), st.integers(0, 2**32 - 1))
def test_further_noise_is_affine(v, seed):
    dirs = lhv.MeasurementDirections.random(np.random.default_rng(seed), m=2)
    a = lhv.analytic_correlators(dirs)
    b = born_correlators(dirs, v)
    for s in all_subsets(3):
        assert np.allclose(2 * v * a.terms[s], b.terms[s], atol=1e-12)


def test_csv_layout():
    dirs = lhv.MeasurementDirections.random(np.random.default_rng(0), m=2)
    text = lhv.correlators_csv(lhv.analytic_correlators(dirs), n_rounds=0, seed=1)
    lines = text.strip().split("\n")
    assert lines[0] == "subset,settings,analytic,estimate,std_error,n_rounds,seed"
    assert len(lines) == 1 + 3 * 2 + 3 * 4 + 8
    assert lines[1].startswith("A,1,")
    assert any(line.startswith("ABC,2 1 2,") for line in lines)


def test_directions_validation():
    with pytest.raises(ValueError):
        lhv.MeasurementDirections(np.zeros((2, 1, 2)))
    assert lhv.MeasurementDirections(np.zeros((3, 2))).m_settings == 1
    unit = np.linalg.norm(lhv.MeasurementDirections.random(np.random.default_rng(0), 3).vectors(), axis=-1)
    assert np.allclose(unit, 1.0)
