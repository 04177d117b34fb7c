"""Deterministic vector and matrix kernels.

Embedding vectors are 1-D float32 numpy arrays throughout the package;
all accumulations (norms, means, covariances, distances) run in float64
so results stay stable over 10k+ rows, and only vector-valued results
are cast back to float32 storage.

Every function here is a pure function of its inputs: identical inputs
give bit-identical outputs within a build, which the report determinism
guarantees rely on.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    DimMismatchError,
    EmptyInputError,
    InsufficientDataError,
    ZeroVectorError,
)

ZERO_NORM_FLOOR = 1e-12


def as_vector(values) -> np.ndarray:
    """Coerce to a finite 1-D float32 vector, validating shape and content."""
    v = np.asarray(values, dtype=np.float32)
    if v.ndim != 1 or v.size < 1:
        raise DimMismatchError(f"expected a nonempty 1-D vector, got shape {v.shape}")
    if not np.all(np.isfinite(v)):
        raise ZeroVectorError("vector contains non-finite values")
    return v


def as_matrix(values) -> np.ndarray:
    """Coerce to a finite 2-D float32 row matrix."""
    m = np.asarray(values, dtype=np.float32)
    if m.ndim != 2 or m.shape[0] < 1 or m.shape[1] < 1:
        raise DimMismatchError(f"expected a nonempty 2-D matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ZeroVectorError("matrix contains non-finite values")
    return m


def _check_same_dim(a: np.ndarray, b: np.ndarray) -> None:
    if a.shape[-1] != b.shape[-1]:
        raise DimMismatchError(f"dims differ: {a.shape[-1]} vs {b.shape[-1]}")


def l2_normalize(v) -> np.ndarray:
    """Scale ``v`` to unit Euclidean norm, preserving direction.

    Raises ZeroVectorError when the norm is below 1e-12; a degenerate
    embedding must surface to the caller instead of being substituted.
    """
    v = as_vector(v)
    norm = float(np.linalg.norm(v.astype(np.float64)))
    if norm < ZERO_NORM_FLOOR:
        raise ZeroVectorError(f"cannot normalize vector with norm {norm:g}")
    return (v.astype(np.float64) / norm).astype(np.float32)


def normalize_rows(m) -> np.ndarray:
    """L2-normalize every row of a matrix (the ingest policy for galleries)."""
    m = as_matrix(m)
    norms = np.linalg.norm(m.astype(np.float64), axis=1)
    if np.any(norms < ZERO_NORM_FLOOR):
        bad = int(np.argmax(norms < ZERO_NORM_FLOOR))
        raise ZeroVectorError(f"row {bad} has norm {norms[bad]:g}")
    return (m.astype(np.float64) / norms[:, None]).astype(np.float32)


def cosine_sim(a, b) -> float:
    """Cosine similarity in [-1, 1]; symmetric and scale-invariant."""
    a = as_vector(a)
    b = as_vector(b)
    _check_same_dim(a, b)
    a64 = a.astype(np.float64)
    b64 = b.astype(np.float64)
    na = float(np.linalg.norm(a64))
    nb = float(np.linalg.norm(b64))
    if na < ZERO_NORM_FLOOR or nb < ZERO_NORM_FLOOR:
        raise ZeroVectorError("cosine similarity undefined for zero vectors")
    return float(np.clip(np.dot(a64, b64) / (na * nb), -1.0, 1.0))


def cosine_sim_many(query, rows) -> np.ndarray:
    """Cosine similarity of one query against every row of a matrix."""
    q = as_vector(query)
    m = as_matrix(rows)
    _check_same_dim(q, m)
    q64 = q.astype(np.float64)
    m64 = m.astype(np.float64)
    qn = float(np.linalg.norm(q64))
    rn = np.linalg.norm(m64, axis=1)
    if qn < ZERO_NORM_FLOOR or np.any(rn < ZERO_NORM_FLOOR):
        raise ZeroVectorError("cosine similarity undefined for zero vectors")
    return np.clip(m64 @ q64 / (rn * qn), -1.0, 1.0)


def euclidean_dist(a, b) -> float:
    """Euclidean distance; symmetric, zero iff the operands are equal."""
    a = as_vector(a)
    b = as_vector(b)
    _check_same_dim(a, b)
    d = a.astype(np.float64) - b.astype(np.float64)
    return float(np.sqrt(np.sum(d * d)))


def euclidean_dist_many(query, rows) -> np.ndarray:
    """Euclidean distance of one query to every row of a matrix.

    Uses the same subtract-square-sum arithmetic as the scalar path so
    batch classification stays bit-identical to per-query calls.
    """
    q = as_vector(query)
    m = as_matrix(rows)
    _check_same_dim(q, m)
    d = m.astype(np.float64) - q.astype(np.float64)
    return np.sqrt(np.sum(d * d, axis=1))


def mean_vector(vectors) -> np.ndarray:
    """Component-wise arithmetic mean of a nonempty sequence of vectors."""
    vs = list(vectors)
    if not vs:
        raise EmptyInputError("mean of zero vectors is undefined")
    first = as_vector(vs[0])
    acc = first.astype(np.float64).copy()
    for v in vs[1:]:
        v = as_vector(v)
        _check_same_dim(first, v)
        acc += v.astype(np.float64)
    return (acc / len(vs)).astype(np.float32)


def fuse_concat(a, b) -> np.ndarray:
    """Late fusion: normalize each block, concatenate (a first), renormalize.

    Because both blocks enter with unit norm, the output blocks each
    carry weight 1/sqrt(2) and the cosine of two fused vectors equals
    the mean of the per-block cosines.
    """
    ua = l2_normalize(a).astype(np.float64)
    ub = l2_normalize(b).astype(np.float64)
    joint = np.concatenate([ua, ub])
    return (joint / np.linalg.norm(joint)).astype(np.float32)


def fuse_concat_rows(a_rows, b_rows) -> np.ndarray:
    """Row-wise fuse_concat over two aligned matrices."""
    a = as_matrix(a_rows)
    b = as_matrix(b_rows)
    if a.shape[0] != b.shape[0]:
        raise DimMismatchError(f"row counts differ: {a.shape[0]} vs {b.shape[0]}")
    ua = normalize_rows(a).astype(np.float64)
    ub = normalize_rows(b).astype(np.float64)
    joint = np.concatenate([ua, ub], axis=1)
    norms = np.linalg.norm(joint, axis=1)
    return (joint / norms[:, None]).astype(np.float32)


@dataclass(frozen=True)
class PcaModel:
    """Fitted principal-component projection.

    ``components`` rows are pairwise orthonormal (within 1e-5) and sorted
    by descending ``explained_variance``. Immutable after fit; safe to
    share across threads. Internals are float64 so projections of float32
    data do not accumulate extra rounding.
    """

    input_dim: int
    output_dim: int
    mean: np.ndarray
    components: np.ndarray
    explained_variance: np.ndarray

    def check(self, tol: float = 1e-5) -> None:
        gram = self.components @ self.components.T
        if not np.allclose(gram, np.eye(self.output_dim), atol=tol):
            raise InsufficientDataError("components are not orthonormal")
        if np.any(np.diff(self.explained_variance) > 0):
            raise InsufficientDataError("explained variance is not sorted")


def pca_fit(vectors, output_dim: int) -> PcaModel:
    """Fit PCA on sample covariance (centered, divisor N-1).

    Components are the top-``output_dim`` eigenvectors of the covariance,
    eigenvalue-descending, each flipped so its largest-magnitude entry is
    positive (eigenvector sign is otherwise arbitrary and would break
    golden tests). Eigenvalues are clamped at zero to absorb -1e-12
    numerical noise. Requires output_dim <= min(dim, sample count) and
    at least two samples.
    """
    x = as_matrix(vectors).astype(np.float64)
    n, dim = x.shape
    if n < 2:
        raise InsufficientDataError(f"PCA needs at least 2 samples, got {n}")
    if not (1 <= output_dim <= min(dim, n)):
        raise InsufficientDataError(
            f"output_dim {output_dim} not in [1, min(dim={dim}, n={n})]"
        )
    mean = x.mean(axis=0)
    centered = x - mean
    cov = centered.T @ centered / (n - 1)
    eigvals, eigvecs = np.linalg.eigh(cov)
    order = np.argsort(eigvals)[::-1][:output_dim]
    components = eigvecs[:, order].T.copy()
    variances = np.maximum(eigvals[order], 0.0)
    for row in components:
        if row[int(np.argmax(np.abs(row)))] < 0:
            row *= -1.0
    return PcaModel(
        input_dim=dim,
        output_dim=output_dim,
        mean=mean,
        components=components,
        explained_variance=variances,
    )


def pca_transform(model: PcaModel, v) -> np.ndarray:
    """Project one vector: components @ (v - mean)."""
    v = as_vector(v)
    if v.shape[0] != model.input_dim:
        raise DimMismatchError(f"dims differ: {v.shape[0]} vs {model.input_dim}")
    return (model.components @ (v.astype(np.float64) - model.mean)).astype(np.float32)


def pca_transform_rows(model: PcaModel, rows) -> np.ndarray:
    """Project every row of a matrix through the fitted model."""
    m = as_matrix(rows)
    if m.shape[1] != model.input_dim:
        raise DimMismatchError(f"dims differ: {m.shape[1]} vs {model.input_dim}")
    return ((m.astype(np.float64) - model.mean) @ model.components.T).astype(np.float32)


def pca_inverse(model: PcaModel, projected) -> np.ndarray:
    """Map a projected vector back: mean + components.T @ y."""
    y = as_vector(projected)
    if y.shape[0] != model.output_dim:
        raise DimMismatchError(f"dims differ: {y.shape[0]} vs {model.output_dim}")
    return (model.mean + model.components.T @ y.astype(np.float64)).astype(np.float32)
