"""Local and Svetlichny polytopes: exact bounds and LP membership.

The Svetlichny set here is the hull of products of an unconstrained
(possibly signalling) deterministic box on one side of a bipartition and a
deterministic box on the other.  For full-correlator functionals the two
sides simply contribute independent sign tables ``E_t`` and ``E_t'``.
"""
from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy.optimize import linprog

from . import quantum as qm
from .scenario import (Behavior, CorrelatorSet, Scenario, ScenarioError, behavior_from_correlators,
                       correlators_from_behavior, proper_subsets, uniform_behavior, validate)
from .witness import WitnessCoefficients

LOCAL_GUARD = 10 ** 7
#: largest vertex count for which an LP is attempted
VERTEX_GUARD = 200_000
TOL_LP = 1e-9
T_MAX = 10.0


class GuardExceededError(RuntimeError):
    """The requested enumeration or LP exceeds its size guard."""


class UnsupportedRepresentationError(ValueError):
    pass


# -- exact bounds -----------------------------------------------------------------

def _sign_tables(m: int) -> np.ndarray:
    """All ``2**m`` maps setting -> +-1, shape ``(2**m, m)``."""
    return np.array(list(itertools.product((1.0, -1.0), repeat=m)))


def local_values(w: WitnessCoefficients) -> np.ndarray:
    """Witness value of every deterministic local strategy, shape ``(2**m,)*n``."""
    sc = w.scenario
    n, m = sc.n_parties, sc.m_settings
    if sc.d_outcomes != 2:
        raise ScenarioError("local bound needs binary outcomes")
    k = 2 ** m
    if k ** n > LOCAL_GUARD:
        raise GuardExceededError(f"{k ** n} local strategies exceed the guard {LOCAL_GUARD}")
    signs = _sign_tables(m)
    total = np.zeros((k,) * n)
    for parties, table in w.terms.items():
        t = np.asarray(table)
        # contract one setting axis at a time; strategy axes accumulate at the end
        for _ in parties:
            t = np.tensordot(t, signs, axes=([0], [1]))
        shape = [1] * n
        for i in parties:
            shape[i] = k
        total = total + t.reshape(shape)
    return total


def local_bound(w: WitnessCoefficients) -> float:
    """Exact maximum over the ``(2**m)**n`` deterministic local strategies."""
    return float(local_values(w).max())


def _require_full_correlator(w: WitnessCoefficients) -> np.ndarray:
    full = tuple(range(w.scenario.n_parties))
    for parties, table in w.terms.items():
        if parties != full and np.any(np.asarray(table) != 0):
            raise UnsupportedRepresentationError(
                "the Svetlichny bound is computed for full-correlator witnesses only")
    return np.asarray(w.terms.get(full, np.zeros((w.scenario.m_settings,) * len(full))))


def _block_max(mat: np.ndarray) -> tuple[float, np.ndarray, np.ndarray]:
    """``max_{s, r in +-1} s^T mat r`` by enumerating the shorter side."""
    flip = mat.shape[0] > mat.shape[1]
    if flip:
        mat = mat.T
    rows = mat.shape[0]
    if 2 ** rows > LOCAL_GUARD:
        raise GuardExceededError(f"2**{rows} sign patterns exceed the guard")
    s = _sign_tables(rows)
    vals = np.abs(s @ mat).sum(axis=1)
    best = int(np.argmax(vals))
    s_best = s[best]
    r_best = np.where(s_best @ mat >= 0, 1.0, -1.0)
    if flip:
        s_best, r_best = r_best, s_best
    return float(vals[best]), s_best, r_best


def _split(scenario: Scenario):
    """Bipartitions ``(t, rest)`` with party 0 in ``t``; each appears once."""
    n = scenario.n_parties
    for t in proper_subsets(n):
        if 0 in t:
            yield t, tuple(i for i in range(n) if i not in t)


def svetlichny_bound(w: WitnessCoefficients) -> float:
    """Exact maximum of a full-correlator witness over the Svetlichny set."""
    return svetlichny_optimum(w)[0]


def svetlichny_optimum(w: WitnessCoefficients) -> tuple[float, np.ndarray]:
    """Maximum and a maximising full-correlator table ``E_t * E_t'``."""
    coeffs = _require_full_correlator(w)
    n, m = w.scenario.n_parties, w.scenario.m_settings
    best, table = -np.inf, None
    for t, rest in _split(w.scenario):
        mat = np.transpose(coeffs, t + rest).reshape(m ** len(t), m ** len(rest))
        val, s, r = _block_max(mat)
        if val > best:
            e = np.outer(s, r).reshape((m,) * n)
            best, table = val, np.transpose(e, np.argsort(t + rest))
    return best, table


def svetlichny_model_behavior(w: WitnessCoefficients) -> Behavior:
    """A member of the Svetlichny set attaining :func:`svetlichny_optimum`.

    Only three-party witnesses are supported.  The full correlators are the
    optimal ``E_t * E_t'`` table; all marginals vanish.  Membership is
    explicit: the behavior is the uniform mixture of one deterministic
    vertex with outcomes flipped on the pairs {}, {1,2}, {1,3}, {2,3},
    which keeps the triple product and cancels every marginal.
    """
    if w.scenario.n_parties != 3:
        raise ScenarioError("model behavior construction is implemented for three parties")
    _, table = svetlichny_optimum(w)
    sc = w.scenario
    terms = {s: np.zeros((sc.m_settings,) * len(s)) for s in proper_subsets(3)}
    terms[(0, 1, 2)] = table
    return behavior_from_correlators(CorrelatorSet(sc, terms))


# -- vertex models ----------------------------------------------------------------

def local_vertex_behaviors(scenario: Scenario) -> np.ndarray:
    """Deterministic local behaviors as columns of ``(dim, (2**m)**n)``."""
    n, m = scenario.n_parties, scenario.m_settings
    if scenario.d_outcomes != 2:
        raise ScenarioError("vertex enumeration implemented for binary outcomes")
    count = (2 ** m) ** n
    if count > VERTEX_GUARD:
        raise GuardExceededError(f"{count} local vertices exceed the guard {VERTEX_GUARD}")
    # onehot[s, a, x]: strategy s answers a at setting x
    tables = ((1 - _sign_tables(m)) / 2).astype(int)
    onehot = np.zeros((2 ** m, 2, m))
    for s, row in enumerate(tables):
        onehot[s, row, np.arange(m)] = 1.0
    cols = []
    for strat in itertools.product(range(2 ** m), repeat=n):
        p = np.ones(scenario.shape)
        for i, s in enumerate(strat):
            shape = [1] * (2 * n)
            shape[i], shape[n + i] = 2, m
            p = p * onehot[s].reshape(shape)
        cols.append(p.ravel())
    return np.array(cols).T


def svetlichny_vertex_behaviors(scenario: Scenario) -> np.ndarray:
    """Full-behavior Svetlichny vertices for three parties (m <= 2)."""
    n, m = scenario.n_parties, scenario.m_settings
    if n != 3 or scenario.d_outcomes != 2:
        raise ScenarioError("Svetlichny vertices implemented for three binary-outcome parties")
    count = 3 * 4 ** (m * m) * 2 ** m
    if m > 2 or count > VERTEX_GUARD:
        raise GuardExceededError(
            f"{count} full-behavior Svetlichny vertices; use the correlator projection")
    pair_outcomes = list(itertools.product(range(2), repeat=2))
    cols = []
    for k in (2, 1, 0):
        i, j = (p for p in range(3) if p != k)
        for pair_map in itertools.product(range(4), repeat=m * m):
            for single in itertools.product(range(2), repeat=m):
                p = np.zeros(scenario.shape)
                for xs in itertools.product(range(m), repeat=3):
                    ai, aj = pair_outcomes[pair_map[xs[i] * m + xs[j]]]
                    a = [0, 0, 0]
                    a[i], a[j], a[k] = ai, aj, single[xs[k]]
                    p[tuple(a) + xs] = 1.0
                cols.append(p.ravel())
    return np.array(cols).T


def local_vertex_correlators(scenario: Scenario) -> np.ndarray:
    """Full correlator tables of deterministic local strategies, flattened."""
    n, m = scenario.n_parties, scenario.m_settings
    count = (2 ** m) ** n
    if count > VERTEX_GUARD:
        raise GuardExceededError(f"{count} local vertices exceed the guard {VERTEX_GUARD}")
    signs = _sign_tables(m)
    cols = []
    for strat in itertools.product(range(2 ** m), repeat=n):
        e = np.ones(())
        for s in strat:
            e = np.multiply.outer(e, signs[s])
        cols.append(e.ravel())
    return np.array(cols).T


def svetlichny_vertex_correlators(scenario: Scenario) -> np.ndarray:
    """Full correlator tables ``E_t * E_t'`` over every bipartition, flattened."""
    n, m = scenario.n_parties, scenario.m_settings
    count = sum(2 ** (m ** len(t)) * 2 ** (m ** len(r)) for t, r in _split(scenario))
    if count > VERTEX_GUARD:
        raise GuardExceededError(f"{count} Svetlichny correlator vertices exceed the guard")
    cols = []
    for t, rest in _split(scenario):
        perm = np.argsort(t + rest)
        for s in _sign_tables(m ** len(t)):
            for r in _sign_tables(m ** len(rest)):
                e = np.outer(s, r).reshape((m,) * n)
                cols.append(np.transpose(e, perm).ravel())
    return np.array(cols).T


@dataclass
class PolytopeModel:
    scenario: Scenario
    kind: str                          # local | svetlichny
    representation: str = "full_behavior"   # or full_correlators_only

    def __post_init__(self):
        if self.kind not in ("local", "svetlichny"):
            raise ValueError(f"unknown polytope kind {self.kind!r}")
        if self.representation not in ("full_behavior", "full_correlators_only"):
            raise ValueError(f"unknown representation {self.representation!r}")

    @cached_property
    def vertices(self) -> np.ndarray:
        full = self.representation == "full_behavior"
        if self.kind == "local":
            return local_vertex_behaviors(self.scenario) if full else local_vertex_correlators(self.scenario)
        if full:
            return svetlichny_vertex_behaviors(self.scenario)
        return svetlichny_vertex_correlators(self.scenario)

    @property
    def n_vertices(self) -> int:
        return self.vertices.shape[1]

    def point(self, b: Behavior) -> np.ndarray:
        if b.scenario != self.scenario:
            raise ScenarioError(f"behavior scenario {b.scenario} differs from model scenario {self.scenario}")
        if self.representation == "full_behavior":
            return b.probabilities.ravel().copy()
        return correlators_from_behavior(b).full.ravel().copy()

    @property
    def center(self) -> np.ndarray:
        return self.point(uniform_behavior(self.scenario))


def default_model(scenario: Scenario, kind: str) -> PolytopeModel:
    """Full behaviors where enumerable; Svetlichny with m >= 3 falls back to correlators."""
    if kind == "svetlichny" and scenario.m_settings > 2:
        return PolytopeModel(scenario, kind, "full_correlators_only")
    return PolytopeModel(scenario, kind)


# -- LP membership -----------------------------------------------------------------

@dataclass
class LPCertificate:
    """Linear functional ``coefficients . point + offset`` bounded by 1 on the polytope."""

    representation: str
    coefficients: np.ndarray = field(repr=False)
    offset: float
    value: float                       # functional on the tested behavior

    bound: float = 1.0

    def __call__(self, point: np.ndarray) -> float:
        return float(self.coefficients @ point + self.offset)

    def witness(self, scenario: Scenario) -> WitnessCoefficients:
        """Correlator-form witness (correlator representation only)."""
        if self.representation != "full_correlators_only":
            raise UnsupportedRepresentationError("probability-space certificate has no correlator form here")
        n, m = scenario.n_parties, scenario.m_settings
        terms = {tuple(range(n)): self.coefficients.reshape((m,) * n)}
        return WitnessCoefficients(scenario, terms, {"svetlichny": self.bound - self.offset})

    def to_dict(self) -> dict:
        return {"representation": self.representation, "coefficients": self.coefficients.tolist(),
                "offset": self.offset, "bound": self.bound, "value": self.value}


@dataclass
class LPResult:
    kind: str
    member: bool
    robustness: float
    n_vertices: int
    representation: str
    certificate: LPCertificate | None = None

    @property
    def verdict(self) -> str:
        return "member" if self.member else "non_member"

    def to_dict(self) -> dict:
        out = {"model": self.kind, "verdict": self.verdict, "robustness": self.robustness,
               "n_vertices": self.n_vertices, "representation": self.representation}
        if self.certificate is not None:
            out["certificate"] = self.certificate.to_dict()
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


def lp_robustness(model: PolytopeModel, point: np.ndarray) -> tuple[float, np.ndarray]:
    """``max t`` with ``center + t (point - center)`` in the hull; returns (t*, dual)."""
    verts = model.vertices
    center = model.center
    direction = point - center
    n_v = verts.shape[1]
    a_eq = np.hstack([verts, -direction[:, None]])
    cost = np.zeros(n_v + 1)
    cost[-1] = -1.0
    bounds = [(0, None)] * n_v + [(None, T_MAX)]
    # the weights must also sum to one; for full behaviors this is implied by normalisation
    a_eq = np.vstack([a_eq, np.r_[np.ones(n_v), 0.0]])
    b_eq = np.r_[center, 1.0]
    res = linprog(cost, A_eq=a_eq, b_eq=b_eq, bounds=bounds, method="highs")
    if res.status != 0:
        raise RuntimeError(f"LP failed: {res.message}")
    dual = np.asarray(res.eqlin.marginals, float)
    return float(res.x[-1]), dual


def lp_membership(b: Behavior, model: str | PolytopeModel = "local") -> LPResult:
    """Is ``b`` (or its correlator projection) a convex mixture of vertices?

    Non-members come with a functional that is at most 1 on every vertex
    and exceeds 1 on ``b``.
    """
    if isinstance(model, str):
        model = default_model(b.scenario, model)
    report = validate(b)
    if not report.ok(tol_ns=1e-8):
        raise ScenarioError(f"behavior is not a valid no-signalling table: {report}")
    point = model.point(b)
    t, dual = lp_robustness(model, point)
    member = t >= 1.0 - TOL_LP
    result = LPResult(model.kind, member, t, model.n_vertices, model.representation)
    if not member:
        result.certificate = _lp_certificate(model, point, dual)
    return result


def _lp_certificate(model: PolytopeModel, point: np.ndarray, dual: np.ndarray) -> LPCertificate:
    y = dual[:-1]
    center = model.center
    if y @ (point - center) < 0:
        y = -y
    y = y / (y @ (point - center))
    vertex_max = float((y @ model.vertices).max())
    # shift so that the maximum over vertices is exactly 1
    offset = 1.0 - vertex_max
    return LPCertificate(model.representation, y, offset, float(y @ point + offset))


def svetlichny_visibility(state: qm.DensityMatrix, meas: qm.MeasurementAssignment,
                          tol_v: float = 1e-6, model: str = "svetlichny") -> tuple[float, float, float]:
    """Bisection of LP membership over the visibility; returns (value, lower, upper)."""
    if meas.m_settings != 2:
        raise GuardExceededError("Svetlichny visibility is offered for two settings only")

    def member(v: float) -> bool:
        return lp_membership(qm.born_behavior(qm.noisy(state, v), meas), model).member

    if not member(0.0):
        raise RuntimeError("the fully mixed point is not a member")
    if member(1.0):
        return 1.0, 1.0, 1.0
    lo, hi = 0.0, 1.0
    while hi - lo > tol_v:
        mid = 0.5 * (lo + hi)
        if member(mid):
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi), lo, hi
