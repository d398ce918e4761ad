"""States, projective measurements and Born-rule behaviors.

Tensor products put party 1 in the leftmost (most significant) factor.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import reduce
from typing import Sequence

import numpy as np

from .scenario import Behavior, Scenario, ScenarioError

SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)
IDENTITY_2 = np.eye(2, dtype=complex)


def kron_all(mats: Sequence[np.ndarray]) -> np.ndarray:
    return reduce(np.kron, mats)


def _frozen(a, dtype=complex) -> np.ndarray:
    a = np.array(a, dtype=dtype)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class DensityMatrix:
    entries: np.ndarray = field(repr=False)
    local_dims: tuple[int, ...] = ()

    def __post_init__(self):
        rho = _frozen(self.entries)
        if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
            raise ValueError("density matrix must be square")
        dims = tuple(int(k) for k in self.local_dims) or (rho.shape[0],)
        if int(np.prod(dims)) != rho.shape[0]:
            raise ValueError(f"local dims {dims} do not multiply to {rho.shape[0]}")
        object.__setattr__(self, "entries", rho)
        object.__setattr__(self, "local_dims", dims)

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    @property
    def n_parties(self) -> int:
        return len(self.local_dims)

    def check(self, tol: float = 1e-12, tol_eig: float = 1e-10) -> None:
        rho = self.entries
        if np.abs(rho - rho.conj().T).max() > tol:
            raise ValueError("density matrix is not Hermitian")
        if abs(np.trace(rho) - 1.0) > tol:
            raise ValueError("density matrix trace differs from 1")
        if np.linalg.eigvalsh(rho).min() < -tol_eig:
            raise ValueError("density matrix has a negative eigenvalue")

    def purity(self) -> float:
        return float(np.real(np.trace(self.entries @ self.entries)))

    def expectation(self, op: np.ndarray) -> float:
        return float(np.real(np.trace(self.entries @ op)))

    def partial_trace(self, keep: Sequence[int]) -> "DensityMatrix":
        n = self.n_parties
        keep = sorted(keep)
        t = self.entries.reshape(self.local_dims * 2)
        letters = "abcdefghijklmnop"
        rows = list(letters[:n])
        cols = [letters[i] if i not in keep else letters[n + i] for i in range(n)]
        out = "".join(rows[i] for i in keep) + "".join(cols[i] for i in keep)
        red = np.einsum("".join(rows) + "".join(cols) + "->" + out, t)
        k = int(np.prod([self.local_dims[i] for i in keep]))
        return DensityMatrix(red.reshape(k, k), tuple(self.local_dims[i] for i in keep))

    def permute(self, order: Sequence[int]) -> "DensityMatrix":
        """Reorder tensor factors so that new party j is old party ``order[j]``."""
        n = self.n_parties
        t = self.entries.reshape(self.local_dims * 2)
        t = t.transpose(list(order) + [n + i for i in order])
        return DensityMatrix(t.reshape(self.dim, self.dim), tuple(self.local_dims[i] for i in order))

    def tensor(self, other: "DensityMatrix") -> "DensityMatrix":
        return DensityMatrix(np.kron(self.entries, other.entries), self.local_dims + other.local_dims)


def pure_state(psi, local_dims: Sequence[int]) -> DensityMatrix:
    psi = np.asarray(psi, dtype=complex).ravel()
    psi = psi / np.linalg.norm(psi)
    return DensityMatrix(np.outer(psi, psi.conj()), tuple(local_dims))


def ghz_state(n: int, local_dim: int = 2) -> DensityMatrix:
    """``(1/sqrt(d)) sum_j |j...j>`` on ``n`` parties of local dimension ``d``."""
    if n < 2:
        raise ValueError("GHZ state needs n >= 2")
    if local_dim not in (2, 3):
        raise ValueError(f"unsupported local dimension {local_dim}; use 2 or 3")
    dim = local_dim ** n
    psi = np.zeros(dim, dtype=complex)
    step = sum(local_dim ** k for k in range(n))
    psi[np.arange(local_dim) * step] = 1.0
    return pure_state(psi, (local_dim,) * n)


def w_state() -> DensityMatrix:
    psi = np.zeros(8, dtype=complex)
    psi[[1, 2, 4]] = 1.0
    return pure_state(psi, (2, 2, 2))


def maximally_mixed(local_dims: Sequence[int]) -> DensityMatrix:
    dim = int(np.prod(local_dims))
    return DensityMatrix(np.eye(dim) / dim, tuple(local_dims))


def noisy(rho: DensityMatrix, visibility: float) -> DensityMatrix:
    if not 0.0 <= visibility <= 1.0:
        raise ValueError(f"visibility must lie in [0, 1], got {visibility}")
    mixed = np.eye(rho.dim) / rho.dim
    return DensityMatrix(visibility * rho.entries + (1 - visibility) * mixed, rho.local_dims)


def random_pure_state(local_dims: Sequence[int], rng: np.random.Generator) -> DensityMatrix:
    dim = int(np.prod(local_dims))
    psi = rng.normal(size=dim) + 1j * rng.normal(size=dim)
    return pure_state(psi, local_dims)


def random_mixed_state(local_dims: Sequence[int], rng: np.random.Generator,
                       rank: int | None = None) -> DensityMatrix:
    dim = int(np.prod(local_dims))
    rank = dim if rank is None else rank
    g = rng.normal(size=(dim, rank)) + 1j * rng.normal(size=(dim, rank))
    rho = g @ g.conj().T
    return DensityMatrix(rho / np.trace(rho).real, tuple(local_dims))


# -- observables ----------------------------------------------------------------

@dataclass(frozen=True)
class BinaryObservable:
    """Hermitian observable with eigenvalues +-1."""

    matrix: np.ndarray = field(repr=False)

    def __post_init__(self):
        o = _frozen(self.matrix)
        if o.ndim != 2 or o.shape[0] != o.shape[1]:
            raise ValueError("observable must be a square matrix")
        if np.abs(o - o.conj().T).max() > 1e-10:
            raise ValueError("observable is not Hermitian")
        if np.abs(o @ o - np.eye(o.shape[0])).max() > 1e-10:
            raise ValueError("observable does not square to the identity")
        object.__setattr__(self, "matrix", o)

    @property
    def local_dim(self) -> int:
        return self.matrix.shape[0]

    def projectors(self) -> np.ndarray:
        """``[(1+O)/2, (1-O)/2]``: outcome +1 at index 0."""
        eye = np.eye(self.local_dim)
        return np.stack([(eye + self.matrix) / 2, (eye - self.matrix) / 2])


def equatorial_observable(phi: float) -> BinaryObservable:
    return BinaryObservable(np.cos(phi) * SIGMA_X + np.sin(phi) * SIGMA_Y)


def bloch_observable(theta: float, phi: float) -> BinaryObservable:
    return BinaryObservable(np.sin(theta) * np.cos(phi) * SIGMA_X
                            + np.sin(theta) * np.sin(phi) * SIGMA_Y
                            + np.cos(theta) * SIGMA_Z)


def qutrit_phase(x: int) -> float:
    return (6 * x - 7) * np.pi / 18


def qutrit_observable(x: int) -> BinaryObservable:
    """``2|phi(x)><phi(x)| - 1`` on a qutrit, ``|phi(x)> = (|0> + e^{i(6x-7)pi/18}|1>)/sqrt2``."""
    if x not in (1, 2, 3):
        raise ValueError(f"qutrit setting must be 1, 2 or 3, got {x}")
    v = np.array([1.0, np.exp(1j * qutrit_phase(x)), 0.0]) / np.sqrt(2)
    return BinaryObservable(2 * np.outer(v, v.conj()) - np.eye(3))


@dataclass(frozen=True)
class MeasurementAssignment:
    """Projective measurements for every party and setting.

    ``projectors[i]`` has shape ``(m, d, k_i, k_i)``: setting, outcome, matrix.
    """

    projectors: tuple[np.ndarray, ...] = field(repr=False)

    def __post_init__(self):
        projs = tuple(_frozen(p) for p in self.projectors)
        shapes = {p.shape[:2] for p in projs}
        if len(shapes) != 1:
            raise ValueError("all parties need the same number of settings and outcomes")
        object.__setattr__(self, "projectors", projs)

    @classmethod
    def from_observables(cls, observables: Sequence[Sequence[BinaryObservable]]):
        return cls(tuple(np.stack([o.projectors() for o in party]) for party in observables))

    @property
    def n_parties(self) -> int:
        return len(self.projectors)

    @property
    def m_settings(self) -> int:
        return self.projectors[0].shape[0]

    @property
    def d_outcomes(self) -> int:
        return self.projectors[0].shape[1]

    @property
    def local_dims(self) -> tuple[int, ...]:
        return tuple(p.shape[-1] for p in self.projectors)

    @property
    def scenario(self) -> Scenario:
        return Scenario(self.n_parties, self.m_settings, self.d_outcomes)

    def check(self, tol: float = 1e-10) -> None:
        for party in self.projectors:
            for setting in party:
                k = setting.shape[-1]
                if np.abs(setting.sum(axis=0) - np.eye(k)).max() > tol:
                    raise ValueError("projectors do not sum to the identity")
                for a, pa in enumerate(setting):
                    for b, pb in enumerate(setting):
                        target = pa if a == b else np.zeros_like(pa)
                        if np.abs(pa @ pb - target).max() > tol:
                            raise ValueError("projectors are not orthogonal idempotents")

    def observable(self, party: int, setting: int) -> np.ndarray:
        """``M_{+|x} - M_{-|x}`` for binary outcomes."""
        p = self.projectors[party][setting]
        return p[0] - p[1]


def observables_from_angles(angles) -> MeasurementAssignment:
    """Qubit measurements from Bloch angles of shape ``(n, m, 2)`` = (theta, phi)."""
    angles = np.asarray(angles, dtype=float)
    return MeasurementAssignment.from_observables(
        [[bloch_observable(t, p) for t, p in party] for party in angles])


def born_behavior(rho: DensityMatrix, meas: MeasurementAssignment) -> Behavior:
    """``P(a|x) = tr[(M_{a1|x1} x ... x M_{an|xn}) rho]``."""
    n = meas.n_parties
    dims = meas.local_dims
    if int(np.prod(dims)) != rho.dim:
        raise ScenarioError(f"measurement dimensions {dims} do not match state dimension {rho.dim}")
    # tensor with axes (row_1..row_n, col_1..col_n); contract party by party
    t = rho.entries.reshape(dims * 2)
    for i, proj in enumerate(meas.projectors):
        # tr over party i of M rho: sum_{r,c} M[c, r] rho[r, c]; result axes appended
        t = np.tensordot(t, proj, axes=([0, n - i], [3, 2]))
    # t now has axes (x1, a1, x2, a2, ...); reorder to (a1..an, x1..xn)
    order = [2 * i + 1 for i in range(n)] + [2 * i for i in range(n)]
    p = np.real(t.transpose(order))
    return Behavior(meas.scenario, p)


def full_correlator(rho: DensityMatrix, observables: Sequence[np.ndarray]) -> float:
    return rho.expectation(kron_all(observables))
