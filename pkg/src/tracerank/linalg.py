"""Sparse vectors, scatter eigendecompositions, densities, projectors.

Everything is rank-limited: decompositions go through the Gram matrix
G_ij = phi_i . phi_j (size = number of vectors, never vocabulary size)
and map eigenvectors back into term space.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .errors import DegenerateDensityError

# Eigenvalues at or below this floor count as null dimensions.
EIG_FLOOR = 1e-12
DEFAULT_BATCH = 256


class SparseVector:
    """Term-id -> weight map stored as aligned sorted arrays, with the
    Euclidean norm cached at construction.  Zero weights are dropped."""

    __slots__ = ("ids", "weights", "norm")

    def __init__(self, ids, weights):
        ids = np.asarray(ids, dtype=np.int64)
        weights = np.asarray(weights, dtype=np.float64)
        if ids.shape != weights.shape:
            raise ValueError("ids and weights must be aligned")
        nonzero = weights != 0.0
        ids, weights = ids[nonzero], weights[nonzero]
        order = np.argsort(ids, kind="stable")
        self.ids = ids[order]
        self.weights = weights[order]
        if np.unique(self.ids).size != self.ids.size:
            raise ValueError("duplicate term ids in sparse vector")
        self.norm = float(np.sqrt(self.weights @ self.weights))

    @classmethod
    def from_mapping(cls, mapping: dict[int, float]) -> "SparseVector":
        if not mapping:
            return cls(np.empty(0, dtype=np.int64), np.empty(0))
        ids = np.fromiter(mapping.keys(), dtype=np.int64, count=len(mapping))
        weights = np.fromiter(mapping.values(), dtype=np.float64, count=len(mapping))
        return cls(ids, weights)

    def to_mapping(self) -> dict[int, float]:
        return {int(i): float(w) for i, w in zip(self.ids, self.weights)}

    def to_dense(self, dim: int) -> np.ndarray:
        out = np.zeros(dim)
        out[self.ids] = self.weights
        return out

    def scaled(self, factor: float) -> "SparseVector":
        return SparseVector(self.ids, self.weights * factor)

    def unit(self) -> "SparseVector":
        if self.norm == 0.0:
            raise ValueError("cannot normalize a zero vector")
        return self.scaled(1.0 / self.norm)

    def __len__(self) -> int:
        return len(self.ids)

    def __repr__(self) -> str:
        return f"SparseVector(nnz={len(self.ids)}, norm={self.norm:.6g})"


def dot(a: SparseVector, b: SparseVector) -> float:
    if len(a.ids) == 0 or len(b.ids) == 0:
        return 0.0
    _, ia, ib = np.intersect1d(a.ids, b.ids, assume_unique=True, return_indices=True)
    if len(ia) == 0:
        return 0.0
    return float(a.weights[ia] @ b.weights[ib])


def stack_dense(vectors) -> tuple[np.ndarray, np.ndarray]:
    """Stack sparse vectors into a dense (n, |union support|) matrix;
    returns the matrix and the sorted union of term ids (the columns)."""
    vectors = list(vectors)
    if not vectors:
        return np.zeros((0, 0)), np.empty(0, dtype=np.int64)
    union = np.unique(np.concatenate([v.ids for v in vectors]))
    X = np.zeros((len(vectors), len(union)))
    for row, vec in enumerate(vectors):
        X[row, np.searchsorted(union, vec.ids)] = vec.weights
    return X, union


def _rows_to_sparse(rows: np.ndarray, union: np.ndarray) -> list[SparseVector]:
    return [SparseVector(union, row) for row in rows]


def _orthonormalize(rows: np.ndarray) -> tuple[np.ndarray, list[int]]:
    """Two-pass modified Gram-Schmidt; returns kept rows and their
    original indices (rows that collapse numerically are dropped)."""
    out: list[np.ndarray] = []
    kept: list[int] = []
    for i in range(rows.shape[0]):
        v = rows[i].copy()
        for _ in range(2):
            for u in out:
                v -= (u @ v) * u
        norm = np.linalg.norm(v)
        if norm > 1e-10:
            out.append(v / norm)
            kept.append(i)
    if not out:
        return np.zeros((0, rows.shape[1])), []
    return np.vstack(out), kept


def _gram_eigenpairs(X: np.ndarray, union: np.ndarray, max_rank: int):
    """Eigenpairs of X^T X (the scatter of the rows of X) via the Gram
    matrix, mapped back to term space: v_k = lambda_k^{-1/2} sum e_ki phi_i."""
    gram = X @ X.T
    evals, evecs = np.linalg.eigh(gram)
    order = np.argsort(evals)[::-1]
    evals, evecs = evals[order], evecs[:, order]
    keep = evals > EIG_FLOOR
    evals, evecs = evals[keep], evecs[:, keep]
    if max_rank is not None:
        evals, evecs = evals[:max_rank], evecs[:, :max_rank]
    if evals.size == 0:
        return np.empty(0), []
    rows = (evecs / np.sqrt(evals)).T @ X
    rows, kept = _orthonormalize(rows)
    return evals[kept], _rows_to_sparse(rows, union)


def scatter_eigendecomposition(
    vectors: Iterable[SparseVector], max_rank: int | None = None
):
    """Descending eigenpairs of the scatter operator sum phi phi^T.

    Returns (eigenvalues, eigenvectors); at most min(max_rank, n) pairs
    with eigenvalue above the floor.  All-zero input yields an empty
    decomposition.
    """
    vectors = [v for v in vectors if v.norm > 0.0]
    if not vectors:
        return np.empty(0), []
    X, union = stack_dense(vectors)
    return _gram_eigenpairs(X, union, max_rank)


class IncrementalScatter:
    """Truncated eigendecomposition of a streamed scatter operator.

    Vectors accumulate in batches (default 256); each flush appends the
    batch to the current rank-r factor, eigensolves the combined Gram,
    and truncates to ``max_rank``.  The trace sum ||phi||^2 and the mean
    (1/N) sum phi are tracked exactly, independent of truncation.
    """

    def __init__(self, max_rank: int, batch_size: int = DEFAULT_BATCH):
        if max_rank < 1:
            raise ValueError("max_rank must be >= 1")
        self.max_rank = max_rank
        self.batch_size = batch_size
        self._factor: list[SparseVector] = []
        self._buffer: list[SparseVector] = []
        self._trace = 0.0
        self._mean_sums: dict[int, float] = {}
        self.count = 0

    def push(self, vec: SparseVector) -> None:
        self.count += 1
        self._trace += vec.norm**2
        for tid, weight in zip(vec.ids, vec.weights):
            key = int(tid)
            self._mean_sums[key] = self._mean_sums.get(key, 0.0) + float(weight)
        if vec.norm > 0.0:
            self._buffer.append(vec)
        if len(self._buffer) >= self.batch_size:
            self._flush()

    def _flush(self) -> None:
        if not self._buffer:
            return
        combined = self._factor + self._buffer
        X, union = stack_dense(combined)
        evals, vectors = _gram_eigenpairs(X, union, self.max_rank)
        # factor rows carry sqrt(lambda) so the factor Gram reproduces
        # the truncated scatter
        self._factor = [
            vec.scaled(np.sqrt(lam)) for lam, vec in zip(evals, vectors)
        ]
        self._buffer = []

    def result(self):
        """(eigenvalues, eigenvectors, exact trace, exact mean, count)."""
        self._flush()
        if self._factor:
            X, union = stack_dense(self._factor)
            evals, vectors = _gram_eigenpairs(X, union, self.max_rank)
        else:
            evals, vectors = np.empty(0), []
        if self.count > 0:
            mean = SparseVector.from_mapping(
                {tid: s / self.count for tid, s in self._mean_sums.items()}
            )
        else:
            mean = SparseVector.from_mapping({})
        return evals, vectors, self._trace, mean, self.count


def incremental_truncated_eigendecomposition(
    stream: Iterable[SparseVector], max_rank: int, batch_size: int = DEFAULT_BATCH
):
    acc = IncrementalScatter(max_rank, batch_size=batch_size)
    for vec in stream:
        acc.push(vec)
    return acc.result()


@dataclass(frozen=True)
class LowRankDensity:
    """Density operator sum lambda_i v_i v_i^T in eigenpair form with
    descending eigenvalues summing to 1 over an orthonormal basis."""

    eigenvalues: np.ndarray
    vectors: tuple[SparseVector, ...]

    @property
    def rank(self) -> int:
        return len(self.vectors)

    def trace(self) -> float:
        return float(np.sum(self.eigenvalues))


@dataclass(frozen=True)
class Projector:
    """Orthogonal projector given by an orthonormal basis; an empty
    basis is the zero projector."""

    basis: tuple[SparseVector, ...]

    @property
    def rank(self) -> int:
        return len(self.basis)


def normalize_trace(eigenvalues, vectors) -> LowRankDensity:
    """Divide eigenvalues by their sum so the density has trace 1."""
    eigenvalues = np.asarray(eigenvalues, dtype=np.float64)
    total = float(np.sum(eigenvalues))
    if eigenvalues.size == 0 or total <= 0.0:
        raise DegenerateDensityError("cannot normalize a density with trace <= 0")
    return LowRankDensity(eigenvalues=eigenvalues / total, vectors=tuple(vectors))


def pure_density(vec: SparseVector) -> LowRankDensity:
    if vec.norm == 0.0:
        raise DegenerateDensityError("zero vector has no pure density")
    return LowRankDensity(eigenvalues=np.ones(1), vectors=(vec.unit(),))


def trace_product(rho: LowRankDensity, projector: Projector) -> float:
    """tr(rho P) = sum_i lambda_i sum_j (v_i . u_j)^2, the probability
    that the density assigns to the projector's subspace."""
    if rho.rank == 0 or projector.rank == 0:
        return 0.0
    X, union = stack_dense(list(rho.vectors) + list(projector.basis))
    V, U = X[: rho.rank], X[rho.rank:]
    overlap = V @ U.T
    return float(rho.eigenvalues @ np.einsum("ij,ij->i", overlap, overlap))


def validate_density(rho: LowRankDensity, tol: float = 1e-9) -> None:
    """Raise if the eigenvalues or basis violate the density contract."""
    evals = rho.eigenvalues
    if np.any(evals < -tol):
        raise ValueError("negative eigenvalue in density")
    if np.any(np.diff(evals) > 1e-12):
        raise ValueError("eigenvalues not in descending order")
    if abs(float(np.sum(evals)) - 1.0) > tol:
        raise ValueError(f"density trace {float(np.sum(evals))!r} != 1")
    _check_orthonormal(rho.vectors, tol)


def validate_projector(projector: Projector, tol: float = 1e-9) -> None:
    _check_orthonormal(projector.basis, tol)


def _check_orthonormal(vectors, tol: float) -> None:
    if not vectors:
        return
    X, _ = stack_dense(vectors)
    gram = X @ X.T
    deviation = np.max(np.abs(gram - np.eye(len(vectors))))
    if deviation > tol:
        raise ValueError(f"basis not orthonormal (deviation {deviation:.3e})")
