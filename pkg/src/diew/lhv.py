"""Biseparable hidden-variable model for von Neumann measurements on the
noisy three-qubit GHZ state at visibility 1/2.

A source picks the isolated party ``p`` uniformly and a unit vector
``lambda = (sin a cos b, sin a sin b, cos a)`` uniformly on the sphere.  The
other two parties share ``cos(a/2)|00> + sin(a/2) e^{-ib}|11>`` and measure
it; the isolated party answers ``sign(lambda . direction)``.  Three shared
signs, each +1 with probability (2+sqrt3)/4, dress the outputs so that each
party's answer is multiplied by the two signs carrying its name.
"""
from __future__ import annotations

import csv
import io
import itertools
from dataclasses import dataclass

import numpy as np

from .scenario import CorrelatorSet, Scenario, all_subsets

PARTY_NAMES = "ABC"
SIGN_PLUS_PROB = (2 + np.sqrt(3)) / 4
#: sign index carried by each party: A <- (s_AB, s_AC), B <- (s_AB, s_BC), C <- (s_AC, s_BC)
_SIGNS_OF = ((0, 1), (0, 2), (1, 2))


@dataclass(frozen=True)
class HiddenState:
    alone: int                        # 0, 1, 2 for A, B, C
    alpha: float                      # polar angle of lambda
    beta: float                       # azimuth of lambda
    signs: tuple[int, int, int]       # (s_AB, s_AC, s_BC)

    @property
    def lam(self) -> np.ndarray:
        a, b = self.alpha, self.beta
        return np.array([np.sin(a) * np.cos(b), np.sin(a) * np.sin(b), np.cos(a)])

    @property
    def pair(self) -> tuple[int, int]:
        return tuple(i for i in range(3) if i != self.alone)

    @property
    def pair_state(self) -> np.ndarray:
        psi = np.zeros(4, dtype=complex)
        psi[0] = np.cos(self.alpha / 2)
        psi[3] = np.sin(self.alpha / 2) * np.exp(-1j * self.beta)
        return psi


@dataclass(frozen=True)
class MeasurementDirections:
    """Bloch angles ``(theta, phi)`` per party and setting, shape ``(3, m, 2)``."""

    angles: np.ndarray

    def __post_init__(self):
        a = np.array(self.angles, dtype=float)
        if a.ndim == 2:
            a = a[:, None, :]
        if a.shape[0] != 3 or a.shape[-1] != 2:
            raise ValueError(f"expected angles of shape (3, m, 2), got {a.shape}")
        a.setflags(write=False)
        object.__setattr__(self, "angles", a)

    @property
    def m_settings(self) -> int:
        return self.angles.shape[1]

    def vectors(self) -> np.ndarray:
        t, p = self.angles[..., 0], self.angles[..., 1]
        return np.stack([np.sin(t) * np.cos(p), np.sin(t) * np.sin(p), np.cos(t)], axis=-1)

    @classmethod
    def random(cls, rng: np.random.Generator, m: int = 1) -> "MeasurementDirections":
        theta = np.arccos(rng.uniform(-1, 1, size=(3, m)))
        phi = rng.uniform(0, 2 * np.pi, size=(3, m))
        return cls(np.stack([theta, phi], axis=-1))


def _sign(x):
    return np.where(x >= 0, 1, -1)


def sample_hidden(rng) -> HiddenState:
    rng = np.random.default_rng(rng)
    batch = _sample_batch(rng, 1)
    return HiddenState(int(batch["alone"][0]), float(batch["alpha"][0]), float(batch["beta"][0]),
                       tuple(int(s) for s in batch["signs"][0]))


def _sample_batch(rng: np.random.Generator, size: int) -> dict[str, np.ndarray]:
    return {
        "alone": rng.integers(0, 3, size=size),
        "alpha": np.arccos(rng.uniform(-1.0, 1.0, size=size)),
        "beta": rng.uniform(0.0, 2 * np.pi, size=size),
        "signs": np.where(rng.random(size=(size, 3)) < SIGN_PLUS_PROB, 1, -1),
    }


def pair_statistics(alpha, beta, dir_i, dir_j):
    """Marginals and correlator of the two paired parties' raw outcomes.

    ``dir_*`` hold ``(theta, phi)`` in the last axis.
    """
    ti, pi = dir_i[..., 0], dir_i[..., 1]
    tj, pj = dir_j[..., 0], dir_j[..., 1]
    mi = np.cos(alpha) * np.cos(ti)
    mj = np.cos(alpha) * np.cos(tj)
    cij = np.cos(ti) * np.cos(tj) + np.sin(alpha) * np.sin(ti) * np.sin(tj) * np.cos(beta + pi + pj)
    return mi, mj, cij


def _simulate(batch: dict[str, np.ndarray], dirs: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Outputs ``(N, 3)`` for per-round directions ``dirs`` of shape ``(N, 3, 2)``."""
    size = batch["alone"].size
    alone = batch["alone"]
    alpha, beta = batch["alpha"], batch["beta"]
    first = np.where(alone == 0, 1, 0)
    second = np.where(alone == 2, 1, 2)
    rows = np.arange(size)
    mi, mj, cij = pair_statistics(alpha, beta, dirs[rows, first], dirs[rows, second])
    # sample a from its marginal, then b from P(b|a)
    a = np.where(rng.random(size) < (1 + mi) / 2, 1, -1)
    p_joint_plus = (1 + a * mi + mj + a * cij) / 4
    p_a = (1 + a * mi) / 2
    with np.errstate(invalid="ignore", divide="ignore"):
        p_b_plus = np.where(p_a > 0, p_joint_plus / p_a, 0.5)
    b = np.where(rng.random(size) < p_b_plus, 1, -1)
    lam = np.stack([np.sin(alpha) * np.cos(beta), np.sin(alpha) * np.sin(beta), np.cos(alpha)], axis=-1)
    d_alone = dirs[rows, alone]
    vec = np.stack([np.sin(d_alone[:, 0]) * np.cos(d_alone[:, 1]),
                    np.sin(d_alone[:, 0]) * np.sin(d_alone[:, 1]),
                    np.cos(d_alone[:, 0])], axis=-1)
    c = _sign(np.einsum("ij,ij->i", lam, vec))
    raw = np.empty((size, 3), dtype=np.int64)
    raw[rows, first] = a
    raw[rows, second] = b
    raw[rows, alone] = c
    s = batch["signs"]
    dress = np.stack([s[:, i] * s[:, j] for i, j in _SIGNS_OF], axis=-1)
    return raw * dress


def simulate_round(h: HiddenState, dirs, rng) -> tuple[int, int, int]:
    """One round; ``dirs`` is ``(3, 2)`` Bloch angles (one setting per party)."""
    rng = np.random.default_rng(rng)
    dirs = np.asarray(dirs, dtype=float).reshape(1, 3, 2)
    batch = {"alone": np.array([h.alone]), "alpha": np.array([h.alpha]),
             "beta": np.array([h.beta]), "signs": np.array([h.signs])}
    out = _simulate(batch, dirs, rng)[0]
    return int(out[0]), int(out[1]), int(out[2])


def analytic_correlators(dirs: MeasurementDirections) -> CorrelatorSet:
    """Closed-form correlators of the model (equal to GHZ at visibility 1/2)."""
    m = dirs.m_settings
    theta, phi = dirs.angles[..., 0], dirs.angles[..., 1]
    terms = {(i,): np.zeros(m) for i in range(3)}
    for i, j in itertools.combinations(range(3), 2):
        terms[(i, j)] = 0.5 * np.outer(np.cos(theta[i]), np.cos(theta[j]))
    s = np.sin(theta)
    terms[(0, 1, 2)] = 0.5 * (np.einsum("x,y,z->xyz", s[0], s[1], s[2])
                              * np.cos(phi[0][:, None, None] + phi[1][None, :, None] + phi[2][None, None, :]))
    return CorrelatorSet(Scenario(3, m, 2), terms)


@dataclass(frozen=True)
class MonteCarloResult:
    correlators: CorrelatorSet
    std_errors: dict[tuple[int, ...], np.ndarray]
    n_rounds: int
    seed: int


def monte_carlo_correlators(dirs: MeasurementDirections, n_rounds: int, seed: int = 0,
                            batch_size: int = 250_000) -> MonteCarloResult:
    """Estimate every correlator from ``n_rounds`` rounds per settings tuple.

    Each settings tuple draws from its own child of ``SeedSequence(seed)``.
    Marginal correlators pool the rounds of all tuples that share the
    relevant settings.
    """
    if n_rounds < 1:
        raise ValueError("n_rounds must be >= 1")
    m = dirs.m_settings
    sums = {s: np.zeros((m,) * len(s)) for s in all_subsets(3)}
    sq = {s: np.zeros((m,) * len(s)) for s in all_subsets(3)}
    counts = {s: np.zeros((m,) * len(s)) for s in all_subsets(3)}
    tuples = list(itertools.product(range(m), repeat=3))
    children = np.random.SeedSequence(seed).spawn(len(tuples))
    for xs, child in zip(tuples, children):
        rng = np.random.default_rng(child)
        d = np.stack([dirs.angles[p, xs[p]] for p in range(3)])
        done = 0
        while done < n_rounds:
            size = min(batch_size, n_rounds - done)
            out = _simulate(_sample_batch(rng, size), np.broadcast_to(d, (size, 3, 2)), rng)
            for s in sums:
                prod = np.prod(out[:, list(s)], axis=1)
                key = tuple(xs[i] for i in s)
                sums[s][key] += prod.sum()
                sq[s][key] += (prod.astype(float) ** 2).sum()
                counts[s][key] += size
            done += size
    est, err = {}, {}
    for s in sums:
        mean = sums[s] / counts[s]
        var = np.maximum(sq[s] / counts[s] - mean ** 2, 0.0)
        est[s] = mean
        err[s] = np.sqrt(var / counts[s])
    return MonteCarloResult(CorrelatorSet(Scenario(3, m, 2), est), err, n_rounds, seed)


def correlators_csv(analytic: CorrelatorSet, mc: MonteCarloResult | None = None,
                    n_rounds: int | None = None, seed: int | None = None) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["subset", "settings", "analytic", "estimate", "std_error", "n_rounds", "seed"])
    for s in all_subsets(3):
        table = analytic.terms[s]
        for idx in itertools.product(range(analytic.scenario.m_settings), repeat=len(s)):
            row = ["".join(PARTY_NAMES[i] for i in s), " ".join(str(x + 1) for x in idx),
                   repr(float(table[idx]))]
            if mc is not None:
                row += [repr(float(mc.correlators.terms[s][idx])), repr(float(mc.std_errors[s][idx])),
                        mc.n_rounds, mc.seed]
            else:
                row += ["", "", "" if n_rounds is None else n_rounds, "" if seed is None else seed]
            writer.writerow(row)
    return buf.getvalue()
