"""Bell scenarios, probability tables and correlator tables.

Index conventions
-----------------
A :class:`Behavior` stores ``P(a_1..a_n | x_1..x_n)`` as an array with one
axis per party outcome followed by one axis per party setting, i.e. shape
``(d,)*n + (m,)*n``.  Settings and outcomes are 0-based internally.  For
binary outcomes index 0 is the outcome ``+1`` and index 1 is ``-1``.

The flat table view (used by the JSON format) has one row per settings
tuple and one column per outcome tuple, both enumerated with party 1
varying fastest.  Settings are rendered 1-based wherever they leave the
process (JSON, CSV, CLI output).
"""
from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np

TOL_NEG = 1e-9
TOL_NORM = 1e-9

#: value of the binary outcome stored at index 0 / 1
OUTCOME_SIGNS = np.array([1.0, -1.0])


class ScenarioError(ValueError):
    """Raised when objects from incompatible scenarios are combined."""


class IncompleteCorrelatorsError(ValueError):
    pass


@dataclass(frozen=True)
class Scenario:
    n_parties: int
    m_settings: int
    d_outcomes: int = 2

    def __post_init__(self):
        if self.n_parties < 1:
            raise ValueError(f"n_parties must be >= 1, got {self.n_parties}")
        if self.m_settings < 1:
            raise ValueError(f"m_settings must be >= 1, got {self.m_settings}")
        if self.d_outcomes < 2:
            raise ValueError(f"d_outcomes must be >= 2, got {self.d_outcomes}")

    @property
    def shape(self) -> tuple[int, ...]:
        n, m, d = self.n_parties, self.m_settings, self.d_outcomes
        return (d,) * n + (m,) * n

    @property
    def n_settings_tuples(self) -> int:
        return self.m_settings ** self.n_parties

    def settings_tuples(self) -> Iterable[tuple[int, ...]]:
        """All 0-based settings tuples, party 1 varying fastest."""
        for rev in itertools.product(range(self.m_settings), repeat=self.n_parties):
            yield rev[::-1]

    def to_dict(self) -> dict:
        return {"parties": self.n_parties, "settings": self.m_settings,
                "outcomes": self.d_outcomes}

    @classmethod
    def from_dict(cls, d: Mapping) -> "Scenario":
        return cls(int(d["parties"]), int(d["settings"]), int(d.get("outcomes", 2)))


def proper_subsets(n: int) -> list[tuple[int, ...]]:
    """Nonempty proper party subsets, ordered by size then lexicographically."""
    return [s for k in range(1, n) for s in itertools.combinations(range(n), k)]


def all_subsets(n: int) -> list[tuple[int, ...]]:
    """Nonempty party subsets including the full set."""
    return [s for k in range(1, n + 1) for s in itertools.combinations(range(n), k)]


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class Behavior:
    scenario: Scenario
    probabilities: np.ndarray = field(repr=False)

    def __post_init__(self):
        p = _readonly(self.probabilities)
        if p.shape != self.scenario.shape:
            raise ScenarioError(
                f"probability array has shape {p.shape}, scenario needs {self.scenario.shape}")
        object.__setattr__(self, "probabilities", p)

    @property
    def n(self) -> int:
        return self.scenario.n_parties

    def table(self) -> np.ndarray:
        """Flat ``(m**n, d**n)`` view, party 1 fastest on both axes."""
        n = self.n
        m, d = self.scenario.m_settings, self.scenario.d_outcomes
        # settings axes first, then a Fortran-order flatten keeps party 1 fastest
        t = np.moveaxis(self.probabilities, list(range(n, 2 * n)), list(range(n)))
        return t.reshape((m ** n, d ** n), order="F").copy()

    @classmethod
    def from_table(cls, scenario: Scenario, table) -> "Behavior":
        n, m, d = scenario.n_parties, scenario.m_settings, scenario.d_outcomes
        table = np.asarray(table, dtype=float)
        if table.shape != (m ** n, d ** n):
            raise ScenarioError(f"table shape {table.shape} != {(m ** n, d ** n)}")
        t = table.reshape((m,) * n + (d,) * n, order="F")
        return cls(scenario, np.moveaxis(t, list(range(n)), list(range(n, 2 * n))))

    def vector(self) -> np.ndarray:
        return self.probabilities.ravel()


def uniform_behavior(scenario: Scenario) -> Behavior:
    d, n = scenario.d_outcomes, scenario.n_parties
    return Behavior(scenario, np.full(scenario.shape, 1.0 / d ** n))


def deterministic_behavior(scenario: Scenario, outputs) -> Behavior:
    """Local deterministic point; ``outputs[i][x]`` is party i's outcome index."""
    n, m, d = scenario.n_parties, scenario.m_settings, scenario.d_outcomes
    outputs = np.asarray(outputs, dtype=int).reshape(n, m)
    p = np.ones(scenario.shape)
    for i in range(n):
        onehot = np.zeros((d, m))
        onehot[outputs[i], np.arange(m)] = 1.0
        shape = [1] * (2 * n)
        shape[i], shape[n + i] = d, m
        p = p * onehot.reshape(shape)
    return Behavior(scenario, p)


@dataclass(frozen=True)
class CorrelatorSet:
    """Full and marginal correlators of a binary-outcome scenario.

    ``terms`` maps a sorted tuple of 0-based party indices to an array of
    shape ``(m,)*len(parties)`` holding ``E_parties(x_parties)``.
    """

    scenario: Scenario
    terms: Mapping[tuple[int, ...], np.ndarray] = field(repr=False)

    def __post_init__(self):
        if self.scenario.d_outcomes != 2:
            raise ScenarioError("correlators are defined for binary outcomes only (d=2)")
        m, n = self.scenario.m_settings, self.scenario.n_parties
        clean = {}
        for parties, arr in self.terms.items():
            parties = tuple(sorted(int(i) for i in parties))
            if not parties or parties[-1] >= n or len(set(parties)) != len(parties):
                raise ScenarioError(f"bad party subset {parties}")
            arr = _readonly(arr)
            if arr.shape != (m,) * len(parties):
                raise ScenarioError(f"correlator table for {parties} has shape {arr.shape}")
            clean[parties] = arr
        object.__setattr__(self, "terms", clean)

    @property
    def full(self) -> np.ndarray:
        return self.terms[tuple(range(self.scenario.n_parties))]

    def marginal(self, parties: Iterable[int]) -> np.ndarray:
        return self.terms[tuple(sorted(parties))]

    @property
    def is_complete(self) -> bool:
        return all(s in self.terms for s in all_subsets(self.scenario.n_parties))

    def e_value(self, settings: Iterable[int], parties: Iterable[int] | None = None) -> float:
        """Correlator at 1-based ``settings`` for ``parties`` (default: all)."""
        parties = tuple(range(self.scenario.n_parties)) if parties is None else tuple(parties)
        idx = tuple(int(x) - 1 for x in settings)
        return float(self.terms[tuple(sorted(parties))][idx])


def _signs_tensor(n: int, axes: Iterable[int]) -> np.ndarray:
    """Product of outcome signs over ``axes``, broadcastable over ``n`` outcome axes."""
    out = np.ones((1,) * n)
    for i in axes:
        shape = [1] * n
        shape[i] = 2
        out = out * OUTCOME_SIGNS.reshape(shape)
    return out


def correlators_from_behavior(b: Behavior) -> CorrelatorSet:
    """Compute all full and marginal correlators of a binary-outcome behavior.

    Marginal correlators are averaged over the settings of the parties that
    are summed out; for no-signalling behaviors that average is immaterial.
    """
    if b.scenario.d_outcomes != 2:
        raise ScenarioError(
            f"correlator conversion needs binary outcomes (d=2); behavior has d={b.scenario.d_outcomes}")
    n = b.n
    p = b.probabilities
    terms = {}
    for parties in all_subsets(n):
        sign = _signs_tensor(n, parties)
        weighted = p * sign.reshape(sign.shape + (1,) * n)
        e = weighted.sum(axis=tuple(range(n)))
        others = tuple(i for i in range(n) if i not in parties)
        if others:
            e = e.mean(axis=others)
        terms[parties] = e
    return CorrelatorSet(b.scenario, terms)


def behavior_from_correlators(c: CorrelatorSet) -> Behavior:
    """Inverse of :func:`correlators_from_behavior` on no-signalling behaviors.

    ``P(a|x) = 2**-n * sum_S E_S(x_S) prod_{i in S} a_i`` with ``E_{} = 1``.
    """
    n, m = c.scenario.n_parties, c.scenario.m_settings
    missing = [s for s in all_subsets(n) if s not in c.terms]
    if missing:
        raise IncompleteCorrelatorsError(f"missing correlator tables for parties {missing}")
    p = np.ones(c.scenario.shape)
    for parties in all_subsets(n):
        e_shape = [1] * n
        for i in parties:
            e_shape[i] = m
        e = c.terms[parties].reshape(e_shape)
        sign = _signs_tensor(n, parties)
        p = p + sign.reshape(sign.shape + (1,) * n) * e.reshape((1,) * n + tuple(e_shape))
    return Behavior(c.scenario, p / 2 ** n)


@dataclass(frozen=True)
class ValidationReport:
    max_negativity: float
    max_normalization_residual: float
    max_no_signalling_residual: float

    def ok(self, tol_neg: float = TOL_NEG, tol_norm: float = TOL_NORM,
           tol_ns: float | None = None) -> bool:
        tol_ns = tol_norm if tol_ns is None else tol_ns
        return (self.max_negativity <= tol_neg
                and self.max_normalization_residual <= tol_norm
                and self.max_no_signalling_residual <= tol_ns)


def validate(b: Behavior) -> ValidationReport:
    n = b.n
    p = b.probabilities
    neg = max(0.0, -float(p.min()))
    norm = float(np.abs(p.sum(axis=tuple(range(n))) - 1.0).max())
    ns = 0.0
    for i in range(n):
        # marginal over party i's outcome must not depend on party i's setting
        marg = p.sum(axis=i, keepdims=True)
        setting_axis = n + i
        spread = marg.max(axis=setting_axis) - marg.min(axis=setting_axis)
        ns = max(ns, float(spread.max()))
    return ValidationReport(neg, norm, ns)


def mix_with_noise(b: Behavior, visibility: float) -> Behavior:
    """``V*b + (1-V)*uniform``."""
    if not 0.0 <= visibility <= 1.0:
        raise ValueError(f"visibility must lie in [0, 1], got {visibility}")
    u = uniform_behavior(b.scenario).probabilities
    return Behavior(b.scenario, visibility * b.probabilities + (1.0 - visibility) * u)


# -- JSON ---------------------------------------------------------------------

def behavior_to_dict(b: Behavior) -> dict:
    return {"scenario": b.scenario.to_dict(), "probabilities": b.table().tolist()}


def behavior_from_dict(d: Mapping) -> Behavior:
    scenario = Scenario.from_dict(d["scenario"])
    return Behavior.from_table(scenario, d["probabilities"])


def save_behavior(b: Behavior, path) -> None:
    # json writes floats with repr(), the shortest string that round-trips exactly
    Path(path).write_text(json.dumps(behavior_to_dict(b)))


def load_behavior(path) -> Behavior:
    return behavior_from_dict(json.loads(Path(path).read_text()))
