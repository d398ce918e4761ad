"""Biseparability test for tripartite behaviors via moment-matrix relaxations.

For each bipartition ``s`` (AB/C, AC/B, BC/A) a moment matrix ``Gamma^s`` is
indexed by words in projectors ``M^s_{+|x}`` (one projector per binary
setting; the other outcome is ``1 - M``).  Operators of different parties
commute, operators of the isolated party also commute among themselves, and
projectors are idempotent.  The behavior must equal the sum of the three
moment functionals.

Membership is decided through the noise-robustness program

    maximise t  s.t.  sum_s moments^s = u + t (q - u),  Gamma^s PSD,

where ``q`` are the behavior's projector moments and ``u`` those of the
uniform behavior.  ``t* >= 1`` means the behavior lies in the level-``k``
relaxation.  For a noisy state ``V rho + (1-V) 1/d`` the optimum ``t*`` of
the noiseless behavior is the certified visibility threshold.
"""
from __future__ import annotations

import itertools
import json
import logging
import warnings
from contextlib import contextmanager
from dataclasses import dataclass, field
from typing import Protocol, Sequence

import cvxpy as cp
import numpy as np
import scipy.sparse as sps

from . import quantum as qm
from .scenario import Behavior, Scenario, ScenarioError, validate
from .witness import WitnessCoefficients, witness_to_dict

log = logging.getLogger(__name__)

EPS_SDP = 1e-7
#: indeterminate band used when the solver stops short of its tolerances
EPS_INACCURATE = 1e-5
T_MAX = 10.0
#: party swaps carrying the isolated party C onto B and A respectively
_SWAPS = ((0, 1, 2), (0, 2, 1), (2, 1, 0))

Word = tuple[int, ...]


class IndeterminateError(RuntimeError):
    """The solver could not produce a trustworthy verdict."""


class MonotonicityError(ValueError):
    pass


@dataclass(frozen=True)
class Bipartition:
    label: str
    isolated: int


BIPARTITIONS = (Bipartition("AB/C", 2), Bipartition("AC/B", 1), Bipartition("BC/A", 0))


def _party(letter: int, m: int) -> int:
    return letter // m


def canonicalize(word: Sequence[int], isolated: int, m: int) -> Word:
    """Normal form of a word of projectors ``letter = party * m + setting``."""
    blocks: dict[int, list[int]] = {}
    for letter in word:
        blocks.setdefault(_party(letter, m), []).append(letter)
    out: list[int] = []
    for party in sorted(blocks):
        letters = blocks[party]
        if party == isolated:
            out.extend(sorted(set(letters)))
            continue
        collapsed: list[int] = []
        for letter in letters:
            if not collapsed or collapsed[-1] != letter:
                collapsed.append(letter)
        out.extend(collapsed)
    return tuple(out)


def moment_key(word: Sequence[int], isolated: int, m: int) -> Word:
    """Key identifying ``<word>``; a word and its adjoint share a real moment."""
    a = canonicalize(word, isolated, m)
    b = canonicalize(tuple(reversed(word)), isolated, m)
    return min(a, b, key=lambda w: (len(w), w))


def product_words(scenario: Scenario) -> list[Word]:
    """One-letter-per-party words ``A_x B_y C_z``."""
    m = scenario.m_settings
    return [tuple(p * m + x for p, x in enumerate(xs))
            for xs in itertools.product(range(m), repeat=scenario.n_parties)]


def build_basis(scenario: Scenario, level: int, s: Bipartition) -> list[Word]:
    """Canonical words of length <= level plus the ``A_x B_y C_z`` products."""
    if scenario.n_parties != 3:
        raise ScenarioError("the biseparability hierarchy is implemented for three parties")
    if scenario.d_outcomes != 2:
        raise ScenarioError("the biseparability hierarchy needs binary outcomes")
    if level < 1:
        raise ValueError("level must be >= 1")
    m = scenario.m_settings
    letters = range(3 * m)
    seen: dict[Word, None] = {(): None}
    for length in range(1, level + 1):
        for word in itertools.product(letters, repeat=length):
            seen.setdefault(canonicalize(word, s.isolated, m), None)
    for word in product_words(scenario):
        seen.setdefault(canonicalize(word, s.isolated, m), None)
    return sorted(seen, key=lambda w: (len(w), w))


def target_labels(scenario: Scenario) -> list[tuple[tuple[int, ...], tuple[int, ...]]]:
    """(parties, settings) of every projector moment fixed by the behavior.

    The empty subset is the normalisation.
    """
    m, n = scenario.m_settings, scenario.n_parties
    out = [((), ())]
    for k in range(1, n + 1):
        for parties in itertools.combinations(range(n), k):
            for xs in itertools.product(range(m), repeat=k):
                out.append((parties, xs))
    return out


def projector_moments(b: Behavior) -> np.ndarray:
    """``P(all parties in S answer +1 | x_S)`` for every target label."""
    n = b.n
    p = b.probabilities
    out = []
    for parties, xs in target_labels(b.scenario):
        if not parties:
            out.append(1.0)
            continue
        idx: list = [slice(None)] * (2 * n)
        for i, x in zip(parties, xs):
            idx[i] = 0
            idx[n + i] = x
        sub = p[tuple(idx)]
        # remaining axes: outcomes of other parties, then settings of other parties
        k = n - len(parties)
        sub = sub.sum(axis=tuple(range(k))) if k else sub
        out.append(float(np.mean(sub)))
    return np.array(out)


@dataclass
class MomentBlock:
    bipartition: Bipartition
    basis: list[Word]
    keys: list[Word]
    index: np.ndarray                 # basis x basis -> key index
    target_cells: np.ndarray          # (target label, copy) -> key index

    @property
    def size(self) -> int:
        return len(self.basis)

    def lift(self) -> sps.csr_matrix:
        """Sparse map from distinct moments to the row-major flattened matrix."""
        flat = self.index.ravel()
        return sps.csr_matrix((np.ones(flat.size), (np.arange(flat.size), flat)),
                              shape=(flat.size, len(self.keys)))

    def pick(self) -> sps.csr_matrix:
        """Sparse map from distinct moments to the summed target moments."""
        rows, cols = np.indices(self.target_cells.shape)
        return sps.csr_matrix((np.ones(rows.size), (rows.ravel(), self.target_cells.ravel())),
                              shape=(self.target_cells.shape[0], len(self.keys)))


@dataclass
class MomentProgram:
    scenario: Scenario
    level: int
    blocks: list[MomentBlock]
    labels: list
    targets: np.ndarray = field(repr=False)
    uniform: np.ndarray = field(repr=False)
    symmetric: bool = False

    def full_moments(self, g: np.ndarray) -> np.ndarray:
        """Dual coefficients made permutation invariant in the symmetric program.

        Averaging keeps ``g . (q - u)`` because the tested behavior is invariant.
        """
        return symmetrize_moments(self.scenario, g) if self.symmetric else g


def _permute_word(word: Word, perm: Sequence[int], m: int) -> Word:
    return tuple(perm[letter // m] * m + letter % m for letter in word)


def _build_block(scenario: Scenario, level: int, s: Bipartition,
                 symmetric: bool = False) -> MomentBlock:
    m = scenario.m_settings
    basis = build_basis(scenario, level, s)
    key_index: dict[Word, int] = {}
    size = len(basis)
    index = np.empty((size, size), dtype=np.int64)
    for i, u in enumerate(basis):
        u_dag = tuple(reversed(u))
        for j in range(i, size):
            key = moment_key(u_dag + basis[j], s.isolated, m)
            k = key_index.setdefault(key, len(key_index))
            index[i, j] = index[j, i] = k
    labels = target_labels(scenario)
    perms = _SWAPS if symmetric else (tuple(range(3)),)
    cells = []
    for parties, xs in labels:
        word = tuple(p * m + x for p, x in zip(parties, xs))
        row = []
        for perm in perms:
            key = moment_key(_permute_word(word, perm, m), s.isolated, m)
            if key not in key_index:
                raise AssertionError(f"probability moment {key} missing from block {s.label}")
            row.append(key_index[key])
        cells.append(row)
    keys = [None] * len(key_index)
    for key, k in key_index.items():
        keys[k] = key
    return MomentBlock(s, basis, keys, index, np.array(cells, dtype=np.int64))


_BLOCK_CACHE: dict[tuple[Scenario, int, bool], list[MomentBlock]] = {}


def _blocks(scenario: Scenario, level: int, symmetric: bool = False) -> list[MomentBlock]:
    """Moment blocks; the symmetric variant keeps AB/C only and sums its three images."""
    key = (scenario, level, symmetric)
    if key not in _BLOCK_CACHE:
        parts = BIPARTITIONS[:1] if symmetric else BIPARTITIONS
        _BLOCK_CACHE[key] = [_build_block(scenario, level, s, symmetric) for s in parts]
    return _BLOCK_CACHE[key]


def is_permutation_invariant(b: Behavior, tol: float = 1e-9) -> bool:
    p = b.probabilities
    for perm in itertools.permutations(range(3)):
        if np.abs(p.transpose(list(perm) + [3 + i for i in perm]) - p).max() > tol:
            return False
    return True


def assemble(b: Behavior, level: int = 2, symmetric: bool = False) -> MomentProgram:
    """Moment program for ``b``.

    ``symmetric=True`` is valid only for behaviors invariant under every
    party permutation; a symmetric feasible point can then be assumed, which
    leaves a single moment block.
    """
    if b.scenario.n_parties != 3 or b.scenario.d_outcomes != 2:
        raise ScenarioError("assemble expects a tripartite binary-outcome behavior")
    report = validate(b)
    if not report.ok(tol_ns=1e-8):
        raise ScenarioError(f"behavior is not a valid no-signalling table: {report}")
    if symmetric and not is_permutation_invariant(b):
        raise ScenarioError("symmetric reduction requested for a behavior that is not permutation invariant")
    blocks = _blocks(b.scenario, level, symmetric)
    labels = target_labels(b.scenario)
    targets = projector_moments(b)
    uniform = np.array([0.5 ** len(parties) for parties, _ in labels])
    return MomentProgram(b.scenario, level, blocks, labels, targets, uniform, symmetric)


# -- conic solver interface -------------------------------------------------------

@dataclass
class SolveResult:
    status: str                       # "optimal", "inaccurate" or the backend's failure status
    t: float | None
    dual: np.ndarray | None           # multipliers of the moment-matching equalities
    residual: float

    @property
    def usable(self) -> bool:
        return self.status in ("optimal", "inaccurate") and self.t is not None


class ConicBackend(Protocol):
    def solve(self, program: MomentProgram) -> SolveResult: ...


#: interior-point solver used unless one is named; CVXOPT reaches ~1e-8 on these
#: programs where Clarabel stalls near 1e-6
DEFAULT_SOLVER = "CVXOPT" if "CVXOPT" in cp.installed_solvers() else "CLARABEL"

_CLARABEL_DEFAULTS = {"tol_feas": EPS_SDP, "tol_gap_abs": EPS_SDP, "tol_gap_rel": EPS_SDP}


_FEASIBILITY_OPTS = {"CLARABEL": _CLARABEL_DEFAULTS, "SCS": {"eps": 1e-9, "max_iters": 200_000}}


@contextmanager
def _quiet():
    # inaccurate statuses are handled explicitly; cvxpy's warning adds nothing
    with warnings.catch_warnings():
        warnings.filterwarnings("ignore", message="Solution may be inaccurate")
        yield


def _solver_opts(solver: str, opts: dict) -> dict:
    return {**_CLARABEL_DEFAULTS, **opts} if solver == "CLARABEL" else dict(opts)


class CvxpyBackend:
    """Solves the robustness program with cvxpy.

    One parametrised cvxpy problem is compiled per (scenario, level,
    symmetry) and reused across behaviors.  Solutions the solver flags as
    inaccurate are kept only if the matching residual is below
    ``EPS_INACCURATE``.
    """

    def __init__(self, solver: str | None = None, **solver_opts):
        solver = solver or DEFAULT_SOLVER
        self.solver = solver
        self.solver_opts = _solver_opts(solver, solver_opts)
        self._cache: dict = {}

    def _compiled(self, program: MomentProgram):
        key = (program.scenario, program.level, program.symmetric)
        if key in self._cache:
            return self._cache[key]
        n_targets = len(program.labels)
        q = cp.Parameter(n_targets)
        t = cp.Variable()
        constraints = []
        total = 0
        for block in program.blocks:
            y = cp.Variable(len(block.keys))
            gamma = cp.reshape(block.lift() @ y, (block.size, block.size), order="C")
            constraints.append(gamma >> 0)
            total = total + block.pick() @ y
        u = program.uniform
        match = total == u + t * (q - u)
        constraints += [match, t <= T_MAX]
        problem = cp.Problem(cp.Maximize(t), constraints)
        self._cache[key] = (problem, q, t, match)
        return self._cache[key]

    def solve(self, program: MomentProgram) -> SolveResult:
        problem, q, t, match = self._compiled(program)
        q.value = program.targets
        try:
            with _quiet():
                problem.solve(solver=self.solver, **self.solver_opts)
        except Exception as exc:      # solver crashes are reported, never turned into verdicts
            if self.solver != "CVXOPT" or "kktsolver" in self.solver_opts:
                log.warning("solver failure: %s", exc)
                return SolveResult("solver_error", None, None, np.inf)
            # the default Cholesky path probes for redundant rows with ARPACK,
            # which occasionally fails to converge; LDL needs no such probe
            log.info("retrying with the robust KKT solver: %s", exc)
            try:
                with _quiet():
                    problem.solve(solver=self.solver, kktsolver="robust", **self.solver_opts)
            except Exception as exc2:
                log.warning("solver failure: %s", exc2)
                return SolveResult("solver_error", None, None, np.inf)
        if problem.status not in (cp.OPTIMAL, cp.OPTIMAL_INACCURATE) or t.value is None:
            return SolveResult(str(problem.status), None, None, np.inf)
        residual = float(np.abs(match.residual).max()) if match.residual is not None else 0.0
        dual = None if match.dual_value is None else np.asarray(match.dual_value, float)
        if problem.status == cp.OPTIMAL:
            return SolveResult("optimal", float(t.value), dual, residual)
        if residual <= EPS_INACCURATE:
            log.info("accepting inaccurate solve (residual %.2e)", residual)
            return SolveResult("inaccurate", float(t.value), dual, residual)
        return SolveResult(str(problem.status), None, None, residual)


    def _compiled_feasibility(self, program: MomentProgram):
        key = ("feasibility", program.scenario, program.level, program.symmetric)
        if key in self._cache:
            return self._cache[key]
        q = cp.Parameter(len(program.labels))
        constraints, gammas = [], []
        total = 0
        for block in program.blocks:
            y = cp.Variable(len(block.keys))
            gamma = cp.reshape(block.lift() @ y, (block.size, block.size), order="C")
            gammas.append(gamma)
            constraints.append(gamma >> 0)
            total = total + block.pick() @ y
        match = total == q
        problem = cp.Problem(cp.Minimize(0), constraints + [match])
        self._cache[key] = (problem, q, match, gammas)
        return self._cache[key]

    def check_feasible(self, program: MomentProgram) -> bool:
        """Exact-match feasibility solve, verified on the returned point."""
        problem, q, match, gammas = self._compiled_feasibility(program)
        q.value = program.targets
        # boundary points have no strictly feasible neighbourhood, which CVXOPT's
        # path-following does not handle; Clarabel's homogeneous embedding does
        installed = cp.installed_solvers()
        solvers = [x for x in ("CLARABEL", "SCS") if x in installed]
        solvers += [self.solver] if self.solver not in solvers else []
        for solver in solvers:
            opts = self.solver_opts if solver == self.solver else _FEASIBILITY_OPTS.get(solver, {})
            try:
                with _quiet():
                    problem.solve(solver=solver, **opts)
            except Exception as exc:
                log.info("feasibility solve with %s failed: %s", solver, exc)
                continue
            if problem.status not in (cp.OPTIMAL, cp.OPTIMAL_INACCURATE) or match.residual is None:
                continue
            if np.abs(match.residual).max() > EPS_SDP:
                continue
            if all(np.linalg.eigvalsh(0.5 * (g.value + g.value.T)).min() >= -EPS_SDP for g in gammas):
                return True
        return False


_DEFAULT_BACKEND: CvxpyBackend | None = None


def default_backend() -> CvxpyBackend:
    global _DEFAULT_BACKEND
    if _DEFAULT_BACKEND is None:
        _DEFAULT_BACKEND = CvxpyBackend()
    return _DEFAULT_BACKEND


# -- membership, certificates -------------------------------------------------

@dataclass
class MembershipResult:
    status: str                        # feasible_at_level | infeasible | indeterminate
    level: int
    robustness: float | None           # t*
    dual_certificate: tuple[WitnessCoefficients, float, float] | None = None
    residual: float = 0.0
    dual_moments: np.ndarray | None = field(default=None, repr=False)

    @property
    def feasible(self) -> bool:
        return self.status == "feasible_at_level"

    def to_dict(self) -> dict:
        out = {"status": self.status, "level": self.level, "robustness": self.robustness,
               "residual": self.residual}
        if self.dual_certificate is not None:
            w, bound, violation = self.dual_certificate
            out["certificate"] = {"witness": witness_to_dict(w), "bound": bound,
                                  "violation": violation}
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


def moments_to_correlator_witness(scenario: Scenario, labels, g: np.ndarray,
                                  bound: float) -> WitnessCoefficients:
    """Turn ``g . q <= bound`` on projector moments into correlator form.

    Uses ``q(S, x_S) = 2^-|S| sum_{T subset S} E_T(x_T)`` with ``E_{} = 1``;
    the constant part is moved into the bound.
    """
    m, n = scenario.m_settings, scenario.n_parties
    terms = {parties: np.zeros((m,) * len(parties))
             for k in range(1, n + 1) for parties in itertools.combinations(range(n), k)}
    constant = 0.0
    for (parties, xs), coeff in zip(labels, g):
        scale = coeff * 0.5 ** len(parties)
        for k in range(len(parties) + 1):
            for sub in itertools.combinations(range(len(parties)), k):
                if not sub:
                    constant += scale
                    continue
                key = tuple(parties[i] for i in sub)
                terms[key][tuple(xs[i] for i in sub)] += scale
    return WitnessCoefficients(scenario, terms, {"biseparable": bound - constant})


def correlator_witness_to_moments(w: WitnessCoefficients) -> np.ndarray:
    """Coefficients on projector moments (constant on the empty label).

    ``E_T = sum_{S subset T} 2^|S| (-1)^{|T|-|S|} q_S``.
    """
    scenario = w.scenario
    labels = target_labels(scenario)
    lab_index = {lab: i for i, lab in enumerate(labels)}
    g = np.zeros(len(labels))
    for parties, table in w.terms.items():
        for xs in itertools.product(range(scenario.m_settings), repeat=len(parties)):
            c = table[xs]
            if c == 0:
                continue
            for k in range(len(parties) + 1):
                for sub in itertools.combinations(range(len(parties)), k):
                    lab = (tuple(parties[i] for i in sub), tuple(xs[i] for i in sub))
                    g[lab_index[lab]] += c * 2 ** k * (-1) ** (len(parties) - k)
    return g


def symmetrize_moments(scenario: Scenario, g: np.ndarray) -> np.ndarray:
    """Average moment coefficients over all party permutations."""
    labels = target_labels(scenario)
    lab_index = {lab: i for i, lab in enumerate(labels)}
    out = np.zeros_like(g)
    perms = list(itertools.permutations(range(scenario.n_parties)))
    for perm in perms:
        for i, (parties, xs) in enumerate(labels):
            pairs = sorted(zip((perm[p] for p in parties), xs))
            image = (tuple(p for p, _ in pairs), tuple(x for _, x in pairs))
            out[lab_index[image]] += g[i]
    return out / len(perms)


def bound_over_relaxation(w: WitnessCoefficients, level: int, solver: str | None = None,
                          symmetric: bool = False, **solver_opts) -> float:
    """Maximum of a correlator witness over the level-``k`` relaxation.

    ``symmetric=True`` requires a permutation-invariant witness.
    """
    scenario = w.scenario
    solver = solver or DEFAULT_SOLVER
    g = correlator_witness_to_moments(w)
    if symmetric and np.abs(symmetrize_moments(scenario, g) - g).max() > 1e-9:
        raise ValueError("symmetric bound requested for a witness that is not permutation invariant")
    total = 0
    constraints = []
    for block in _blocks(scenario, level, symmetric):
        y = cp.Variable(len(block.keys))
        constraints.append(cp.reshape(block.lift() @ y, (block.size, block.size), order="C") >> 0)
        total = total + block.pick() @ y
    constraints.append(total[0] == 1)
    problem = cp.Problem(cp.Maximize(g @ total), constraints)
    with _quiet():
        problem.solve(solver=solver, **_solver_opts(solver, solver_opts))
    if problem.status == cp.OPTIMAL_INACCURATE:
        log.info("bound computation flagged inaccurate")
    elif problem.status != cp.OPTIMAL:
        raise IndeterminateError(f"bound computation ended with status {problem.status}")
    return float(problem.value)


def solve_membership(program: MomentProgram, backend: ConicBackend | None = None,
                     eps: float = EPS_SDP, certificate: bool = True) -> MembershipResult:
    backend = backend or default_backend()
    res = backend.solve(program)
    if not res.usable:
        return MembershipResult("indeterminate", program.level, None, residual=res.residual)
    t = res.t
    band = eps if res.status == "optimal" else max(eps, EPS_INACCURATE)
    if abs(t - 1.0) <= band:
        # boundary points (e.g. deterministic behaviors) get a direct feasibility check
        check = getattr(backend, "check_feasible", None)
        status = "feasible_at_level" if check is not None and check(program) else "indeterminate"
    else:
        status = "feasible_at_level" if t > 1.0 else "infeasible"
    result = MembershipResult(status, program.level, t, residual=res.residual)
    if status == "infeasible" and res.dual is not None:
        g = res.dual
        # fix the sign so that g . (q - u) > 0 on the tested behavior
        if g @ (program.targets - program.uniform) < 0:
            g = -g
        result.dual_moments = program.full_moments(g)
        if certificate:
            result.dual_certificate = _certificate(program, result.dual_moments)
    return result


def _certificate(program: MomentProgram, g: np.ndarray):
    """Correlator witness from moment coefficients ``g`` over all target labels."""
    w0 = moments_to_correlator_witness(program.scenario, program.labels, g, 0.0)
    scale = max(np.abs(c).max() for c in w0.terms.values())
    terms = {k: v / scale for k, v in w0.terms.items()}
    w = WitnessCoefficients(program.scenario, terms, {})
    bound = bound_over_relaxation(w, program.level, symmetric=program.symmetric)
    w = WitnessCoefficients(program.scenario, terms, {"biseparable": bound},
                            {"level": program.level, "source": "sdp_dual"})
    value = float(correlator_witness_to_moments(w) @ program.targets)
    return w, bound, value - bound


def extract_diew(r: MembershipResult) -> WitnessCoefficients:
    if r.status != "infeasible" or r.dual_certificate is None:
        raise ValueError(f"no certificate: membership status is {r.status}")
    return r.dual_certificate[0]


def membership(b: Behavior, level: int = 2, backend: ConicBackend | None = None,
               certificate: bool = True, symmetric: bool = False) -> MembershipResult:
    return solve_membership(assemble(b, level, symmetric), backend, certificate=certificate)


# -- visibility thresholds ------------------------------------------------------

def robustness(b: Behavior, level: int = 2, backend: ConicBackend | None = None,
               symmetric: bool = False) -> float:
    """``t*``: largest ``t`` with ``u + t (b - u)`` inside the relaxation."""
    res = (backend or default_backend()).solve(assemble(b, level, symmetric))
    if not res.usable:
        raise IndeterminateError(f"solver status {res.status}")
    return res.t


@dataclass(frozen=True)
class ThresholdResult:
    value: float
    lower: float                       # largest visibility found feasible
    upper: float                       # smallest visibility found infeasible
    evaluations: int

    def to_dict(self) -> dict:
        return {"value": self.value, "lower": self.lower, "upper": self.upper,
                "evaluations": self.evaluations}


def visibility_threshold(state: qm.DensityMatrix, meas: qm.MeasurementAssignment,
                         level: int = 2, tol_v: float = 1e-3,
                         backend: ConicBackend | None = None, symmetric: bool = False,
                         guided: bool = True) -> ThresholdResult:
    """Bisection over the visibility of ``V rho + (1-V) 1/d``.

    Both endpoints are tested first.  With ``guided=True`` the robustness
    value of the noiseless behavior (a by-product of the ``V = 1`` solve)
    seeds a bracket of width ``tol_v`` around the predicted threshold; the
    two bracket points are then verified by their own solves, and plain
    bisection takes over whenever a verdict contradicts the prediction.
    """
    backend = backend or default_backend()
    evals = 0

    def solve(v: float) -> MembershipResult:
        nonlocal evals
        evals += 1
        b = qm.born_behavior(qm.noisy(state, v), meas)
        return solve_membership(assemble(b, level, symmetric), backend, certificate=False)

    top = solve(1.0)
    bottom = solve(0.0)
    if (bottom.status, top.status) != ("feasible_at_level", "infeasible"):
        raise MonotonicityError(
            f"endpoint verdicts ({bottom.status}, {top.status}) do not bracket a threshold")
    lo, hi = 0.0, 1.0
    if guided and top.robustness is not None:
        guess = top.robustness
        for v in (guess - tol_v / 2, guess + tol_v / 2):
            if not lo < v < hi:
                continue
            status = solve(v).status
            if status == "feasible_at_level":
                lo = v
            elif status == "infeasible":
                hi = v
    while hi - lo > tol_v:
        mid = 0.5 * (lo + hi)
        status = solve(mid).status
        if status == "indeterminate":
            # boundary within solver tolerance of mid
            return ThresholdResult(mid, lo, hi, evals)
        if status == "feasible_at_level":
            lo = mid
        else:
            hi = mid
    return ThresholdResult(0.5 * (lo + hi), lo, hi, evals)


def direct_threshold(state: qm.DensityMatrix, meas: qm.MeasurementAssignment,
                     level: int = 2, backend: ConicBackend | None = None,
                     symmetric: bool = False) -> float:
    """Threshold from a single robustness solve on the noiseless behavior."""
    b = qm.born_behavior(state, meas)
    return min(1.0, robustness(b, level, backend, symmetric))
