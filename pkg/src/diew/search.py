"""Derivative-free search over measurement angles.

Coordinate pattern search: try +-step along each coordinate, move on the
first improvement, halve the step when no coordinate improves.  Restarts
start from seeded uniform angles; restart ``r`` uses child ``r`` of
``SeedSequence(seed)`` so results do not depend on how restarts are
scheduled across workers.
"""
from __future__ import annotations

import json
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from . import bisep_sdp as sdp
from . import quantum as qm
from .scenario import Scenario
from .witness import WitnessCoefficients, evaluate_behavior

log = logging.getLogger(__name__)

MODES = ("equatorial", "full_bloch")


@dataclass(frozen=True)
class AngleVector:
    """Bloch angles ``(theta, phi)`` of shape ``(n, m, 2)``."""

    angles: np.ndarray = field(repr=False)

    def __post_init__(self):
        a = np.array(self.angles, dtype=float)
        if a.ndim != 3 or a.shape[-1] != 2:
            raise ValueError(f"angles must have shape (n, m, 2), got {a.shape}")
        if not np.all(np.isfinite(a)):
            raise ValueError("angles must be finite")
        a.setflags(write=False)
        object.__setattr__(self, "angles", a)

    @property
    def n_parties(self) -> int:
        return self.angles.shape[0]

    @property
    def m_settings(self) -> int:
        return self.angles.shape[1]

    def reduced(self) -> np.ndarray:
        return np.mod(self.angles, 2 * np.pi)

    def measurements(self) -> qm.MeasurementAssignment:
        return qm.observables_from_angles(self.angles)

    def to_dict(self) -> dict:
        return {"theta": self.angles[..., 0].tolist(), "phi": self.angles[..., 1].tolist()}

    @classmethod
    def from_dict(cls, d) -> "AngleVector":
        return cls(np.stack([np.asarray(d["theta"], float), np.asarray(d["phi"], float)], axis=-1))

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict()))

    @classmethod
    def load(cls, path) -> "AngleVector":
        return cls.from_dict(json.loads(Path(path).read_text()))


@dataclass(frozen=True)
class SearchConfig:
    restarts: int = 4
    max_evals: int = 4000              # per restart
    tol: float = 1e-12                 # minimum objective gain counted as an improvement
    seed: int = 0
    mode: str = "equatorial"
    symmetric: bool = False            # one settings list shared by all parties
    initial_step: float = np.pi / 6
    shrink: float = 0.5
    min_step: float = 1e-6
    threads: int = 1

    def __post_init__(self):
        if self.restarts < 1 or self.max_evals < 1:
            raise ValueError("restarts and max_evals must be positive")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")
        if not 0 < self.shrink < 1:
            raise ValueError("shrink must lie in (0, 1)")


class AngleParametrisation:
    """Maps a flat parameter vector to an :class:`AngleVector`."""

    def __init__(self, n: int, m: int, mode: str, symmetric: bool):
        self.n, self.m, self.mode, self.symmetric = n, m, mode, symmetric

    @property
    def size(self) -> int:
        per_party = self.m * (1 if self.mode == "equatorial" else 2)
        return per_party * (1 if self.symmetric else self.n)

    def angles(self, x: np.ndarray) -> AngleVector:
        parties = 1 if self.symmetric else self.n
        if self.mode == "equatorial":
            phi = x.reshape(parties, self.m)
            theta = np.full_like(phi, np.pi / 2)
        else:
            theta, phi = np.moveaxis(x.reshape(parties, self.m, 2), -1, 0)
        a = np.stack([theta, phi], axis=-1)
        if self.symmetric:
            a = np.repeat(a, self.n, axis=0)
        return AngleVector(a)

    def params(self, av: AngleVector) -> np.ndarray:
        a = av.angles[:1] if self.symmetric else av.angles
        return (a[..., 1] if self.mode == "equatorial" else a).ravel().copy()

    def random(self, rng: np.random.Generator) -> np.ndarray:
        return rng.uniform(0, 2 * np.pi, size=self.size)


@dataclass
class SearchResult:
    angles: AngleVector
    value: float
    evaluations: int
    failures: int = 0
    trace: list[tuple[int, int, float]] = field(default_factory=list)   # (restart, evals, best)

    def trace_csv(self) -> str:
        rows = ["restart,evals,best_value"]
        rows += [f"{r},{e},{v!r}" for r, e, v in self.trace]
        return "\n".join(rows) + "\n"


def pattern_search(f: Callable[[np.ndarray], float], x0: np.ndarray, cfg: SearchConfig
                   ) -> tuple[np.ndarray, float, int]:
    """Maximise ``f`` from ``x0``; returns (x, f(x), evaluations)."""
    x = np.array(x0, dtype=float)
    fx = f(x)
    evals = 1
    step = cfg.initial_step
    while step >= cfg.min_step and evals < cfg.max_evals:
        improved = False
        for i in range(x.size):
            for sign in (1.0, -1.0):
                y = x.copy()
                y[i] += sign * step
                fy = f(y)
                evals += 1
                if fy > fx + cfg.tol:
                    x, fx, improved = y, fy, True
                    break
            if evals >= cfg.max_evals:
                break
        if not improved:
            step *= cfg.shrink
    return x, fx, evals


class _Objective:
    """Picklable objective wrapper counting failed evaluations."""

    def __init__(self, kind: str, state: qm.DensityMatrix, par: AngleParametrisation,
                 witness: WitnessCoefficients | None = None, level: int = 2,
                 solver: str | None = None):
        self.kind, self.state, self.par = kind, state, par
        self.witness, self.level, self.solver = witness, level, solver
        self.failures = 0
        self._backend = None

    def __call__(self, x: np.ndarray) -> float:
        meas = self.par.angles(x).measurements()
        b = qm.born_behavior(self.state, meas)
        if self.kind == "witness":
            return evaluate_behavior(self.witness, b)
        if self._backend is None:
            self._backend = sdp.CvxpyBackend(self.solver)
        try:
            return -sdp.robustness(b, self.level, self._backend, symmetric=self.par.symmetric)
        except sdp.IndeterminateError:
            self.failures += 1
            return -np.inf


def _run_restart(args) -> tuple[np.ndarray, float, int, int]:
    objective, cfg, seed_seq, x0 = args
    rng = np.random.default_rng(seed_seq)
    start = objective.par.random(rng) if x0 is None else x0
    x, fx, evals = pattern_search(objective, start, cfg)
    return x, fx, evals, objective.failures


def _multistart(objective: _Objective, cfg: SearchConfig, x0: np.ndarray | None) -> SearchResult:
    seeds = np.random.SeedSequence(cfg.seed).spawn(cfg.restarts)
    # the first restart starts from x0 when one is given
    tasks = [(objective, cfg, s, x0 if (r == 0 and x0 is not None) else None)
             for r, s in enumerate(seeds)]
    if cfg.threads > 1 and cfg.restarts > 1:
        with ProcessPoolExecutor(max_workers=cfg.threads) as pool:
            runs = list(pool.map(_run_restart, tasks))
    else:
        runs = [_run_restart(t) for t in tasks]
    best_x, best_f, total, failures = None, -np.inf, 0, 0
    trace = []
    for r, (x, fx, evals, fails) in enumerate(runs):
        total += evals
        failures += fails
        if best_x is None or fx > best_f:
            best_x, best_f = x, fx
        trace.append((r, total, best_f))
    return SearchResult(objective.par.angles(best_x), best_f, total, failures, trace)


def maximize_witness(state: qm.DensityMatrix, w: WitnessCoefficients, cfg: SearchConfig = SearchConfig(),
                     x0: AngleVector | None = None) -> SearchResult:
    """Largest witness value over qubit projective measurements."""
    sc = w.scenario
    if sc.d_outcomes != 2:
        raise ValueError("witness search needs binary outcomes")
    if state.local_dims != (2,) * sc.n_parties:
        raise ValueError("angle search is defined for qubit states")
    par = AngleParametrisation(sc.n_parties, sc.m_settings, cfg.mode, cfg.symmetric)
    obj = _Objective("witness", state, par, witness=w)
    return _multistart(obj, cfg, None if x0 is None else par.params(x0))


@dataclass
class ThresholdSearchResult:
    angles: AngleVector
    robustness: float                   # best t* found during the search
    threshold: sdp.ThresholdResult      # bisection refined at the returned angles
    search: SearchResult

    def to_dict(self) -> dict:
        return {"angles": self.angles.to_dict(), "robustness": self.robustness,
                "threshold": self.threshold.to_dict(), "evaluations": self.search.evaluations,
                "failed_trials": self.search.failures}


def minimize_threshold(state: qm.DensityMatrix, scenario: Scenario, level: int = 2,
                       cfg: SearchConfig = SearchConfig(), x0: AngleVector | None = None,
                       tol_v: float = 1e-3, solver: str | None = None) -> ThresholdSearchResult:
    """Lowest certified visibility threshold over measurement angles.

    The inner objective is the robustness ``t*`` of the noiseless behavior,
    which equals the visibility threshold of the relaxation.  The returned
    optimum is refined by :func:`bisep_sdp.visibility_threshold`.
    """
    if state.local_dims != (2,) * scenario.n_parties:
        raise ValueError("angle search is defined for qubit states")
    par = AngleParametrisation(scenario.n_parties, scenario.m_settings, cfg.mode, cfg.symmetric)
    obj = _Objective("threshold", state, par, level=level, solver=solver)
    res = _multistart(obj, cfg, None if x0 is None else par.params(x0))
    if not np.isfinite(res.value):
        raise sdp.IndeterminateError("every threshold evaluation failed")
    thr = sdp.visibility_threshold(state, res.angles.measurements(), level, tol_v,
                                   backend=sdp.CvxpyBackend(solver), symmetric=cfg.symmetric)
    return ThresholdSearchResult(res.angles, -res.value, thr, res)


def config_to_dict(cfg: SearchConfig) -> dict:
    return asdict(cfg)
