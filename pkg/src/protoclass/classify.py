"""Decision rules over prototype banks and labeled galleries.

Three rules: temperature-scaled softmax over prototype cosines, nearest
prototype (NPC), and k-NN majority voting. All are deterministic,
including ties:

* softmax / NPC winner ties resolve to the lowest class id.
* k-NN neighbor selection orders by (distance, sourceId); vote ties
  resolve by the smaller summed distance within the tied classes, then
  the lowest class id.

Classifiers hold only immutable references; batch evaluation maps the
scalar operation over the queries (optionally across threads), so batch
results are bit-identical to per-query calls and independent of the
parallelism degree.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import BatchItemError, DimMismatchError, KTooLargeError
from .linalg import as_vector, cosine_sim_many, euclidean_dist_many
from .prototypes import PrototypeBank
from .store import EmbeddingSet

RULES = ("softmaxProto", "npc", "knn")
METRICS = ("cosine", "euclidean")


@dataclass(frozen=True)
class ClassifierConfig:
    temperature: float = 0.01
    metric: str = "euclidean"
    k: int = 11

    def __post_init__(self):
        if self.temperature <= 0:
            raise ValueError("temperature must be positive")
        if self.metric not in METRICS:
            raise ValueError(f"metric must be one of {METRICS}")
        if self.k < 1:
            raise ValueError("k must be at least 1")


@dataclass(frozen=True)
class Prediction:
    class_id: int
    scores: tuple[float, ...]
    rule: str


def softmax_over_similarities(similarities, temperature: float) -> np.ndarray:
    """Stable softmax of similarity scores divided by the temperature.

    Subtracts the max logit before exponentiating; at temperature 0.01
    raw exponents would reach exp(100) and overflow otherwise.
    """
    if temperature <= 0:
        raise ValueError("temperature must be positive")
    logits = np.asarray(similarities, dtype=np.float64) / temperature
    shifted = logits - logits.max()
    weights = np.exp(shifted)
    return weights / weights.sum()


def _distances(query: np.ndarray, rows: np.ndarray, metric: str) -> np.ndarray:
    if metric == "euclidean":
        return euclidean_dist_many(query, rows)
    return 1.0 - cosine_sim_many(query, rows)


def classify_softmax(query, bank: PrototypeBank, temperature: float = 0.01) -> Prediction:
    """Softmax over cosine similarities to each class prototype."""
    q = as_vector(query)
    if q.shape[0] != bank.dim:
        raise DimMismatchError(f"query dim {q.shape[0]} vs bank dim {bank.dim}")
    sims = cosine_sim_many(q, bank.matrix)
    scores = softmax_over_similarities(sims, temperature)
    return Prediction(int(np.argmax(scores)), tuple(float(x) for x in scores), "softmaxProto")


def classify_npc(query, bank: PrototypeBank, metric: str = "euclidean") -> Prediction:
    """Assign the class whose prototype is nearest; scores are negated distances."""
    q = as_vector(query)
    if q.shape[0] != bank.dim:
        raise DimMismatchError(f"query dim {q.shape[0]} vs bank dim {bank.dim}")
    dists = _distances(q, bank.matrix, metric)
    return Prediction(int(np.argmin(dists)), tuple(float(-d) for d in dists), "npc")


def npc_winners_euclidean(queries_matrix, bank_matrix) -> np.ndarray:
    """Winning class ids of Euclidean NPC for a whole query matrix.

    Chunked so memory stays bounded, but arithmetically identical to the
    per-query path: the (chunk, K, d) subtract-square-sum reduces each
    length-d run exactly like the scalar kernel, so winners (ties
    included) match classify_npc bit for bit.
    """
    q = np.asarray(queries_matrix, dtype=np.float32)
    p64 = np.asarray(bank_matrix, dtype=np.float32).astype(np.float64)
    if q.ndim != 2 or q.shape[1] != p64.shape[1]:
        raise DimMismatchError(f"query dim {q.shape} vs bank dim {p64.shape}")
    k, dim = p64.shape
    chunk = max(1, min(512, 8_000_000 // (k * dim * 8)))
    winners = np.empty(q.shape[0], dtype=np.int64)
    for start in range(0, q.shape[0], chunk):
        block = q[start : start + chunk].astype(np.float64)
        diff = block[:, None, :] - p64[None, :, :]
        # keep the sqrt: distinct squares can round to equal roots, and the
        # scalar path tie-breaks on the rooted values
        dists = np.sqrt(np.sum(diff * diff, axis=2))
        winners[start : start + chunk] = np.argmin(dists, axis=1)
    return winners


def _source_ranks(gallery: EmbeddingSet) -> np.ndarray:
    order = sorted(range(len(gallery)), key=lambda i: (gallery.source_ids[i], i))
    ranks = np.empty(len(gallery), dtype=np.int64)
    ranks[order] = np.arange(len(gallery))
    return ranks


def _nearest_order(dists: np.ndarray, ranks: np.ndarray, take: int) -> np.ndarray:
    """First ``take`` indices under the (distance, sourceId rank) order.

    Preselects with argpartition, then keeps every tie of the boundary
    distance before the small lexsort, so the result equals a full
    lexsort exactly, boundary ties included.
    """
    n = dists.shape[0]
    if take >= n:
        return np.lexsort((ranks, dists))[:take]
    part = np.argpartition(dists, take - 1)
    boundary = dists[part[take - 1]]
    candidates = np.flatnonzero(dists <= boundary)
    order = candidates[np.lexsort((ranks[candidates], dists[candidates]))]
    return order[:take]


def _vote(neighbor_order: np.ndarray, dists: np.ndarray, gallery: EmbeddingSet) -> Prediction:
    votes: dict[int, int] = {}
    summed: dict[int, float] = {}
    for idx in neighbor_order:
        cid = int(gallery.class_ids[idx])
        votes[cid] = votes.get(cid, 0) + 1
        summed[cid] = summed.get(cid, 0.0) + float(dists[idx])
    best = max(votes.values())
    tied = [cid for cid, v in votes.items() if v == best]
    winner = min(tied, key=lambda cid: (summed[cid], cid))
    scores = [0.0] * len(gallery.catalog)
    for cid, v in votes.items():
        scores[cid] = float(v)
    return Prediction(winner, tuple(scores), "knn")


def classify_knn(
    query,
    gallery: EmbeddingSet,
    k: int,
    metric: str = "euclidean",
    _ranks: np.ndarray | None = None,
) -> Prediction:
    """Majority vote among the k nearest gallery records."""
    q = as_vector(query)
    if q.shape[0] != gallery.dim:
        raise DimMismatchError(f"query dim {q.shape[0]} vs gallery dim {gallery.dim}")
    if k < 1:
        raise KTooLargeError("k must be at least 1")
    if k > len(gallery):
        raise KTooLargeError(f"k={k} exceeds gallery size {len(gallery)}")
    dists = _distances(q, gallery.vectors, metric)
    ranks = _ranks if _ranks is not None else _source_ranks(gallery)
    return _vote(_nearest_order(dists, ranks, k), dists, gallery)


def knn_multi_k(
    queries: EmbeddingSet,
    gallery: EmbeddingSet,
    ks,
    metric: str = "euclidean",
    workers: int = 1,
) -> dict[int, list[Prediction]]:
    """classify_knn for several k values, sorting neighbors once per query.

    Shares the distance, ordering, and voting code with classify_knn, so
    per-k results are identical to individual calls; only the redundant
    re-sorting is skipped. All ks must satisfy 1 <= k <= gallery size.
    """
    ks = list(ks)
    if queries.dim != gallery.dim:
        raise DimMismatchError(f"query dim {queries.dim} vs gallery dim {gallery.dim}")
    for k in ks:
        if k < 1 or k > len(gallery):
            raise KTooLargeError(f"k={k} outside [1, {len(gallery)}]")
    ranks = _source_ranks(gallery)
    kmax = max(ks)

    def run(i: int) -> list[Prediction]:
        dists = _distances(queries.vectors[i], gallery.vectors, metric)
        neighbor_order = _nearest_order(dists, ranks, kmax)
        return [_vote(neighbor_order[:k], dists, gallery) for k in ks]

    indices = range(len(queries))
    if workers <= 1 or len(queries) < 2:
        per_query = [run(i) for i in indices]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            per_query = list(pool.map(run, indices))
    return {k: [row[j] for row in per_query] for j, k in enumerate(ks)}


def _classify_one(query, rule: str, config: ClassifierConfig, model, ranks) -> Prediction:
    if rule == "softmaxProto":
        return classify_softmax(query, model, config.temperature)
    if rule == "npc":
        return classify_npc(query, model, config.metric)
    if rule == "knn":
        return classify_knn(query, model, config.k, config.metric, _ranks=ranks)
    raise ValueError(f"rule must be one of {RULES}, got {rule!r}")


def classify_batch(
    queries: EmbeddingSet,
    rule: str,
    config: ClassifierConfig,
    model,
    workers: int = 1,
) -> list[Prediction]:
    """Apply one rule to every query; output order equals input order.

    ``model`` is a PrototypeBank for softmaxProto/npc and a gallery
    EmbeddingSet for knn. Failures on individual queries are re-raised as
    BatchItemError carrying the item index.
    """
    if rule not in RULES:
        raise ValueError(f"rule must be one of {RULES}, got {rule!r}")
    ranks = _source_ranks(model) if rule == "knn" else None

    def run(i: int) -> Prediction:
        try:
            return _classify_one(queries.vectors[i], rule, config, model, ranks)
        except Exception as exc:
            raise BatchItemError(i, exc) from exc

    indices = range(len(queries))
    if workers <= 1 or len(queries) < 2:
        return [run(i) for i in indices]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(run, indices))
