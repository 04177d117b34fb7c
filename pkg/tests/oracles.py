"""Independent reference implementations used to check the engine.

Everything here is deliberately written from the documented contracts
(pure Python loops, generic eigensolver, re-implemented PRNG constants)
and shares no code with the package, so a bug in the engine cannot hide
in its own oracle.
"""

from __future__ import annotations

import math
from collections import Counter

import numpy as np

MASK64 = (1 << 64) - 1


class SplitMix64Oracle:
    """Re-implementation of the documented SplitMix64 draws."""

    def __init__(self, seed: int):
        self.state = seed & MASK64

    def next_u64(self) -> int:
        self.state = (self.state + 0x9E3779B97F4A7C15) & MASK64
        z = self.state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
        return z ^ (z >> 31)

    def next_float(self) -> float:
        return (self.next_u64() >> 11) * 2.0**-53

    def next_below(self, n: int) -> int:
        limit = (1 << 64) - ((1 << 64) % n)
        while True:
            r = self.next_u64()
            if r < limit:
                return r % n

    def sample_indices(self, count: int, take: int) -> list[int]:
        idx = list(range(count))
        for i in range(take):
            j = i + self.next_below(count - i)
            idx[i], idx[j] = idx[j], idx[i]
        return idx[:take]


def mix64_oracle(x: int) -> int:
    z = (x + 0x9E3779B97F4A7C15) & MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def derive_seed_oracle(seed: int, *keys: int) -> int:
    s = seed & MASK64
    for k in keys:
        s = mix64_oracle(s ^ (k & MASK64))
    return s


def euclidean(a, b) -> float:
    return math.sqrt(sum((float(x) - float(y)) ** 2 for x, y in zip(a, b)))


def brute_knn_winner(query, gallery_vectors, class_ids, source_ids, k: int) -> int:
    """Exhaustive sort-all-distances k-NN with the documented tie-breaks."""
    entries = []
    for row, cid, sid in zip(gallery_vectors, class_ids, source_ids):
        entries.append((euclidean(query, row), sid, int(cid)))
    entries.sort(key=lambda e: (e[0], e[1]))
    top = entries[:k]
    votes = Counter(cid for _, _, cid in top)
    best = max(votes.values())
    tied = [cid for cid, v in votes.items() if v == best]
    summed = {cid: sum(d for d, _, c in top if c == cid) for cid in tied}
    return min(tied, key=lambda cid: (summed[cid], cid))


def brute_nearest_class(query, gallery_vectors, class_ids, source_ids) -> int:
    return brute_knn_winner(query, gallery_vectors, class_ids, source_ids, 1)


def loop_mean(rows) -> list[float]:
    rows = [list(map(float, r)) for r in rows]
    dim = len(rows[0])
    return [sum(r[j] for r in rows) / len(rows) for j in range(dim)]


def loop_normalize(v) -> list[float]:
    norm = math.sqrt(sum(float(x) ** 2 for x in v))
    return [float(x) / norm for x in v]


def brute_pca(rows, out_dim: int):
    """Covariance built with explicit loops, decomposed with the generic
    eigensolver (np.linalg.eig, not the symmetric path the engine uses)."""
    rows = [list(map(float, r)) for r in rows]
    n = len(rows)
    dim = len(rows[0])
    mean = loop_mean(rows)
    centered = [[r[j] - mean[j] for j in range(dim)] for r in rows]
    cov = [[0.0] * dim for _ in range(dim)]
    for r in centered:
        for i in range(dim):
            for j in range(dim):
                cov[i][j] += r[i] * r[j]
    for i in range(dim):
        for j in range(dim):
            cov[i][j] /= n - 1
    eigvals, eigvecs = np.linalg.eig(np.array(cov))
    eigvals = eigvals.real
    eigvecs = eigvecs.real
    order = np.argsort(eigvals)[::-1][:out_dim]
    return mean, eigvals[order], eigvecs[:, order].T
