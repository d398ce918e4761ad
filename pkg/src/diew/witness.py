"""Correlator witnesses: the I_n family, the Mermin expression and their bounds."""
from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping

import numpy as np

from . import quantum as qm
from .scenario import (Behavior, CorrelatorSet, Scenario, ScenarioError,
                       correlators_from_behavior)

BOUND_ORDER = ("local", "biseparable", "svetlichny", "algebraic")
BOUND_NAMES = BOUND_ORDER + ("quantum_max",)


@dataclass(frozen=True)
class WitnessCoefficients:
    """Linear functional ``sum_S sum_x c_S(x) E_S(x)`` on correlators.

    ``terms`` uses the same keys as :class:`CorrelatorSet`.  ``bounds`` holds
    the named maxima (``None`` when unknown); ``notes`` carries any extra
    metadata such as the hierarchy level of an SDP-derived witness.
    """

    scenario: Scenario
    terms: Mapping[tuple[int, ...], np.ndarray] = field(repr=False)
    bounds: Mapping[str, float | None] = field(default_factory=dict)
    notes: Mapping[str, object] = field(default_factory=dict)

    def __post_init__(self):
        m, n = self.scenario.m_settings, self.scenario.n_parties
        clean = {}
        for parties, arr in self.terms.items():
            parties = tuple(sorted(int(i) for i in parties))
            arr = np.array(arr, dtype=float)
            if arr.shape != (m,) * len(parties) or not parties or parties[-1] >= n:
                raise ScenarioError(f"coefficient table for {parties} has shape {arr.shape}")
            arr.setflags(write=False)
            clean[parties] = arr
        object.__setattr__(self, "terms", clean)
        bounds = {k: (None if v is None else float(v)) for k, v in self.bounds.items()}
        unknown = set(bounds) - set(BOUND_NAMES)
        if unknown:
            raise ValueError(f"unknown bound names {sorted(unknown)}")
        present = [bounds[k] for k in BOUND_ORDER if bounds.get(k) is not None]
        if any(a > b + 1e-12 for a, b in zip(present, present[1:])):
            raise ValueError(f"bounds violate local <= biseparable <= svetlichny <= algebraic: {bounds}")
        object.__setattr__(self, "bounds", bounds)
        object.__setattr__(self, "notes", dict(self.notes))

    @property
    def full_parties(self) -> tuple[int, ...]:
        return tuple(range(self.scenario.n_parties))

    @property
    def coeffs(self) -> np.ndarray:
        """Full-correlator coefficient table (zeros if absent)."""
        m, n = self.scenario.m_settings, self.scenario.n_parties
        return self.terms.get(self.full_parties, np.zeros((m,) * n))

    @property
    def is_full_correlator(self) -> bool:
        return all(p == self.full_parties or not np.any(c) for p, c in self.terms.items())

    def n_nonzero(self) -> int:
        return int(sum(np.count_nonzero(c) for c in self.terms.values()))

    def algebraic_max(self) -> float:
        return float(sum(np.abs(c).sum() for c in self.terms.values()))

    def bound(self, name: str) -> float | None:
        return self.bounds.get(name)


def evaluate(w: WitnessCoefficients, c: CorrelatorSet) -> float:
    if w.scenario != c.scenario:
        raise ScenarioError(f"witness scenario {w.scenario} does not match correlators {c.scenario}")
    total = 0.0
    for parties, coeff in w.terms.items():
        if parties not in c.terms:
            raise ScenarioError(f"correlators lack the table for parties {parties}")
        total += float(np.sum(coeff * c.terms[parties]))
    return total


def evaluate_behavior(w: WitnessCoefficients, b: Behavior) -> float:
    return evaluate(w, correlators_from_behavior(b))


# -- the I_n family -------------------------------------------------------------

def f_coeff(k: int) -> int:
    """``f_k``: values 1, 1, 0 on k = 0, 1, 2 and ``f_{k+3} = -f_k``."""
    return (1, 1, 0)[k % 3] * (-1 if (k // 3) % 2 else 1)


def e_sum(c: CorrelatorSet, k: int) -> float:
    """Sum of full correlators whose 1-based settings add up to ``k``."""
    full = c.full
    n = c.scenario.n_parties
    idx_sum = np.indices(full.shape).sum(axis=0) + n
    return float(full[idx_sum == k].sum())


def _setting_sums(n: int, m: int) -> np.ndarray:
    """0-based sum of settings for every entry of an ``(m,)*n`` table."""
    return np.indices((m,) * n).sum(axis=0)


def shifted_In_coefficients(n: int, j: int = 0) -> np.ndarray:
    """Coefficient table of ``I_n^j = sum_k f_{k-n+j} E_n^k``."""
    s = _setting_sums(n, 3)
    return np.vectorize(f_coeff)(s + j).astype(float)


def build_In(n: int) -> WitnessCoefficients:
    if n < 2:
        raise ValueError(f"I_n is defined for n >= 2, got {n}")
    coeffs = shifted_In_coefficients(n)
    bounds = {
        "biseparable": 2 * 3 ** (n - 1.5),
        "svetlichny": 4 * 3 ** (n - 2),
        "algebraic": float(np.abs(coeffs).sum()),
        "quantum_max": 3 ** (n - 0.5),
    }
    return WitnessCoefficients(Scenario(n, 3, 2), {tuple(range(n)): coeffs}, bounds,
                               {"name": f"I_{n}"})


def relabel_last_party_cyclic(coeffs: np.ndarray) -> np.ndarray:
    """Apply ``x_n -> (x_n mod 3) + 1`` with the outcome flipped when ``x_n = 3``.

    Returns the coefficient table expressed in the new labels.
    """
    old = np.moveaxis(coeffs, -1, 0)
    new = np.empty_like(old)
    new[0] = -old[2]
    new[1] = old[0]
    new[2] = old[1]
    return np.moveaxis(new, 0, -1)


def reference_phase(n: int, x: int) -> float:
    """Equatorial angle of 1-based setting ``x`` that maximises I_n on GHZ_n."""
    return ((x - 1) / 3 - 1 / (6 * n)) * np.pi


def reference_ghz_settings(n: int) -> qm.MeasurementAssignment:
    if n < 2:
        raise ValueError("need n >= 2")
    party = [qm.equatorial_observable(reference_phase(n, x)) for x in (1, 2, 3)]
    return qm.MeasurementAssignment.from_observables([party] * n)


def tight_bisep_phase(n: int, x: int) -> float:
    return ((x - 1) / 3 + 1 / (6 * (n - 1))) * np.pi


def tight_bisep_construction(n: int) -> tuple[qm.DensityMatrix, qm.MeasurementAssignment]:
    """``|GHZ_{n-1}> x |0>`` with the settings reaching the biseparable bound of I_n."""
    if n < 3:
        raise ValueError("the tight biseparable construction needs n >= 3")
    ket0 = qm.pure_state([1, 0], (2,))
    rho = qm.ghz_state(n - 1).tensor(ket0)
    eq = [qm.equatorial_observable(tight_bisep_phase(n, x)) for x in (1, 2, 3)]
    z = qm.BinaryObservable(qm.SIGMA_Z)
    meas = qm.MeasurementAssignment.from_observables([eq] * (n - 1) + [[z, z, z]])
    return rho, meas


def qutrit_example() -> tuple[qm.DensityMatrix, qm.MeasurementAssignment]:
    rho = qm.ghz_state(3, local_dim=3)
    party = [qm.qutrit_observable(x) for x in (1, 2, 3)]
    return rho, qm.MeasurementAssignment.from_observables([party] * 3)


# -- Mermin -----------------------------------------------------------------------

def mermin_witness() -> WitnessCoefficients:
    """``E(1,1,1) - E(1,2,2) - E(2,1,2) - E(2,2,1)`` with X as setting 1, Y as setting 2."""
    c = np.zeros((2, 2, 2))
    c[0, 0, 0] = 1
    c[0, 1, 1] = c[1, 0, 1] = c[1, 1, 0] = -1
    bounds = {"local": 2.0, "biseparable": 2 * math.sqrt(2), "svetlichny": 4.0,
              "algebraic": 4.0}
    return WitnessCoefficients(Scenario(3, 2, 2), {(0, 1, 2): c}, bounds,
                               {"name": "Mermin", "qubit_bisep": 2.0})


def mermin_xy_settings() -> qm.MeasurementAssignment:
    x, y = qm.BinaryObservable(qm.SIGMA_X), qm.BinaryObservable(qm.SIGMA_Y)
    return qm.MeasurementAssignment.from_observables([[x, y]] * 3)


def svetlichny_xy_settings() -> qm.MeasurementAssignment:
    """Equatorial settings maximising the Svetlichny expression on GHZ_3.

    Party 1 uses angles (0, pi/2), party 2 (-pi/4, pi/4), party 3 (0, pi/2).
    """
    eq = qm.equatorial_observable
    return qm.MeasurementAssignment.from_observables([
        [eq(0.0), eq(np.pi / 2)], [eq(-np.pi / 4), eq(np.pi / 4)], [eq(0.0), eq(np.pi / 2)]])


def biased_mermin_demo(theta: float) -> tuple[float, float]:
    """Biseparable state beating the qubit bound 2 when Y_3 is tilted towards x.

    Returns ``(2*sqrt(1 + sin^2 theta), Born-rule value)``.
    """
    phi = math.atan(math.sin(theta))
    ab = qm.pure_state([1, 0, 0, np.exp(-1j * phi)], (2, 2))
    c = qm.pure_state([1, 1], (2,))
    rho = ab.tensor(c)
    x, y = qm.BinaryObservable(qm.SIGMA_X), qm.BinaryObservable(qm.SIGMA_Y)
    y3 = qm.BinaryObservable(math.cos(theta) * qm.SIGMA_Y + math.sin(theta) * qm.SIGMA_X)
    meas = qm.MeasurementAssignment.from_observables([[x, y], [x, y], [x, y3]])
    numeric = evaluate_behavior(mermin_witness(), qm.born_behavior(rho, meas))
    return 2 * math.sqrt(1 + math.sin(theta) ** 2), numeric


# -- chained Bell reduction ---------------------------------------------------

@dataclass(frozen=True)
class SignVector:
    gamma: tuple[int, int, int]

    def __post_init__(self):
        g = tuple(int(v) for v in self.gamma)
        if len(g) != 3 or any(v not in (-1, 1) for v in g):
            raise ValueError(f"gamma must be a triple of +-1, got {self.gamma}")
        object.__setattr__(self, "gamma", g)

    @classmethod
    def all(cls) -> list["SignVector"]:
        return [cls(g) for g in itertools.product((1, -1), repeat=3)]


def g_gamma(gamma: SignVector, k: int) -> int:
    return sum(gz * f_coeff(k + z - 3) for z, gz in zip((1, 2, 3), gamma.gamma))


def chained_reduction(gamma: SignVector | tuple) -> WitnessCoefficients:
    """Bipartite expression obtained from I_3 when party 3 answers ``gamma_z``."""
    gamma = gamma if isinstance(gamma, SignVector) else SignVector(tuple(gamma))
    table = np.array([[g_gamma(gamma, x + y) for y in (1, 2, 3)] for x in (1, 2, 3)], float)
    return WitnessCoefficients(Scenario(2, 3, 2), {(0, 1): table}, {},
                               {"gamma": gamma.gamma})


def chained_bell_table() -> np.ndarray:
    """3-input chained Bell expression, local bound 4, Tsirelson bound 3*sqrt(3)."""
    t = np.zeros((3, 3))
    for k in range(3):
        t[k, k] += 1
        if k + 1 < 3:
            t[k + 1, k] += 1
    t[0, 2] -= 1
    return t


@dataclass(frozen=True)
class Relabelling:
    swap_parties: bool
    perm_a: tuple[int, ...]
    perm_b: tuple[int, ...]
    flip_a: tuple[int, ...]
    flip_b: tuple[int, ...]

    def apply(self, table: np.ndarray) -> np.ndarray:
        t = table.T if self.swap_parties else table
        t = t[np.ix_(self.perm_a, self.perm_b)]
        return t * np.outer(self.flip_a, self.flip_b)


def find_chained_relabelling(table: np.ndarray, scale: float = 2.0) -> Relabelling | None:
    """Search input/output relabellings mapping ``scale * chained`` onto ``table``."""
    base = scale * chained_bell_table()
    for swap in (False, True):
        for pa in itertools.permutations(range(3)):
            for pb in itertools.permutations(range(3)):
                for fa in itertools.product((1, -1), repeat=3):
                    for fb in itertools.product((1, -1), repeat=3):
                        r = Relabelling(swap, pa, pb, fa, fb)
                        if np.array_equal(r.apply(base), table):
                            return r
    return None


# -- induction sanity check ----------------------------------------------------

@dataclass(frozen=True)
class InductionReport:
    n: int
    samples: int
    bound: float
    max_value: float
    all_within: bool


def random_biseparable_product(n: int, m: int, rng: np.random.Generator,
                               block: tuple[int, ...] | None = None, pure: bool = False) -> Behavior:
    """Born behavior of a random qubit state that is product across a bipartition.

    Each party gets ``m`` random Bloch-sphere measurements.  ``pure=True``
    draws both factors as pure states.
    """
    if block is None:
        size = int(rng.integers(1, n))
        block = tuple(sorted(rng.choice(n, size=size, replace=False).tolist()))
    rest = tuple(i for i in range(n) if i not in block)

    def factor(k: int) -> qm.DensityMatrix:
        rank = 1 if pure else int(rng.integers(1, 2 ** k + 1))
        return qm.random_mixed_state((2,) * k, rng, rank=rank)

    rho_t, rho_r = factor(len(block)), factor(len(rest))
    order = block + rest
    rho = rho_t.tensor(rho_r).permute(np.argsort(order))
    theta = np.arccos(rng.uniform(-1, 1, size=(n, m)))
    phi = rng.uniform(0, 2 * np.pi, size=(n, m))
    angles = np.stack([theta, phi], axis=-1)
    return qm.born_behavior(rho, qm.observables_from_angles(angles))


def random_biseparable_mixture(n: int, m: int, rng: np.random.Generator,
                               terms: int = 3) -> Behavior:
    """Random convex mixture of :func:`random_biseparable_product` behaviors.

    Each term draws its own bipartition, state and measurements, so the
    result lies in the relaxation with independent measurements per term.
    """
    weights = rng.dirichlet(np.ones(terms))
    p = sum(wt * random_biseparable_product(n, m, rng).probabilities for wt in weights)
    return Behavior(Scenario(n, m, 2), p)


def induction_check(n: int, samples: int = 100, seed=0) -> InductionReport:
    """Check ``I_{n+1} <= 3 * (2 * 3^(n - 3/2))`` on random biseparable products."""
    if n < 3:
        raise ValueError("induction step starts at n = 3")
    rng = np.random.default_rng(seed)
    w = build_In(n + 1)
    bound = 3 * 2 * 3 ** (n - 1.5)
    best = -np.inf
    for _ in range(samples):
        best = max(best, evaluate_behavior(w, random_biseparable_product(n + 1, 3, rng)))
    return InductionReport(n, samples, bound, float(best), bool(best <= bound + 1e-7))


# -- JSON ------------------------------------------------------------------------

def witness_to_dict(w: WitnessCoefficients) -> dict:
    coeffs = []
    for parties, table in sorted(w.terms.items(), key=lambda kv: (len(kv[0]), kv[0])):
        for idx in zip(*np.nonzero(table)):
            entry = {"x": [int(i) + 1 for i in idx], "c": float(table[idx])}
            if parties != w.full_parties:
                entry["parties"] = [p + 1 for p in parties]
            coeffs.append(entry)
    out = {"scenario": w.scenario.to_dict(), "coeffs": coeffs,
           "bounds": {k: v for k, v in w.bounds.items() if v is not None}}
    notes = {k: v for k, v in w.notes.items() if isinstance(v, (str, int, float, list, tuple))}
    if notes:
        out["notes"] = notes
    return out


def witness_from_dict(d: Mapping) -> WitnessCoefficients:
    scenario = Scenario.from_dict(d["scenario"])
    n, m = scenario.n_parties, scenario.m_settings
    terms: dict[tuple[int, ...], np.ndarray] = {}
    for entry in d["coeffs"]:
        parties = tuple(int(p) - 1 for p in entry.get("parties", range(1, n + 1)))
        x = tuple(int(v) - 1 for v in entry["x"])
        if (len(x) != len(parties) or len(set(parties)) != len(parties)
                or any(not 0 <= p < n for p in parties) or any(not 0 <= v < m for v in x)):
            raise ScenarioError(f"coefficient entry {entry} does not fit scenario {scenario}")
        # settings follow the listed party order; store them in sorted party order
        pairs = sorted(zip(parties, x))
        key = tuple(p for p, _ in pairs)
        table = terms.setdefault(key, np.zeros((m,) * len(key)))
        table[tuple(v for _, v in pairs)] += float(entry["c"])
    return WitnessCoefficients(scenario, terms, dict(d.get("bounds", {})), dict(d.get("notes", {})))


def save_witness(w: WitnessCoefficients, path) -> None:
    Path(path).write_text(json.dumps(witness_to_dict(w)))


def load_witness(path) -> WitnessCoefficients:
    return witness_from_dict(json.loads(Path(path).read_text()))
