"""Experiment harness: accuracy, two-fold cross-validation, and sweeps.

The protocol mirrors the benchmark tables this engine reproduces:

* every evaluation runs in both directions (gallery/query roles swapped)
  and reports the per-direction Top-1 accuracy plus mean +/- half-range;
* anything fitted (prototypes, PCA) is fitted on the gallery split only
  and applied to the queries;
* sweep cells that fail with a recoverable error (k too large, PCA dim
  too large) become status rows instead of aborting the report;
* all cells are pure functions of (inputs, seeds), so sweeps re-run
  bit-identically regardless of the parallelism degree.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field, replace

import numpy as np

from .classify import (
    ClassifierConfig,
    Prediction,
    classify_batch,
    knn_multi_k,
    npc_winners_euclidean,
)
from .errors import (
    CatalogMismatchError,
    DimMismatchError,
    EmptyInputError,
    InsufficientDataError,
    KTooLargeError,
    LengthMismatchError,
    ProtoclassError,
)
from .linalg import PcaModel, fuse_concat_rows, mean_vector, pca_fit, pca_transform_rows
from .prototypes import PrototypeBank, build_text_prototypes, build_visual_prototypes
from .report import EvalReport, EvalRow
from .store import EmbeddingSet, concat_sets

DEFAULT_KS = (1, 3, 5, 7, 11)
DEFAULT_SAMPLE_SIZES = (50, 25, 20, 15, 10)
DEFAULT_PCA_DIMS = (None, 1024, 512)


def top1_accuracy(predicted_class_ids, true_class_ids) -> float:
    """Percentage of queries whose predicted class equals the true class."""
    predicted = list(predicted_class_ids)
    truth = list(true_class_ids)
    if not predicted:
        raise EmptyInputError("no predictions to score")
    if len(predicted) != len(truth):
        raise LengthMismatchError(f"{len(predicted)} predictions vs {len(truth)} truths")
    correct = sum(1 for p, t in zip(predicted, truth) if int(p) == int(t))
    return 100.0 * correct / len(predicted)


def accuracy_of(predictions: list[Prediction], queries: EmbeddingSet) -> float:
    return top1_accuracy([p.class_id for p in predictions], queries.class_ids)


@dataclass(frozen=True)
class PipelineConfig:
    """Resolved knobs for one evaluation pipeline."""

    rule: str = "npc"
    temperature: float = 0.01
    metric: str = "euclidean"
    k: int = 11
    proto_sample_size: int | None = None
    proto_seed: int = 0
    pca_dim: int | None = None
    workers: int = 1

    def classifier(self) -> ClassifierConfig:
        return ClassifierConfig(temperature=self.temperature, metric=self.metric, k=self.k)


@dataclass(frozen=True)
class FittedDirection:
    """Artifacts fitted on one gallery split; application touches queries only."""

    rule: str
    model: object  # PrototypeBank for npc/softmaxProto, EmbeddingSet for knn
    pca: PcaModel | None = None


def _check_compatible(a: EmbeddingSet, b: EmbeddingSet) -> None:
    if a.catalog != b.catalog:
        raise CatalogMismatchError("gallery and query catalogs differ")
    if a.dim != b.dim:
        raise DimMismatchError(f"gallery dim {a.dim} vs query dim {b.dim}")


def _transformed_bank(bank: PrototypeBank, pca: PcaModel) -> PrototypeBank:
    return PrototypeBank(
        catalog=bank.catalog,
        matrix=pca_transform_rows(pca, bank.matrix),
        source=bank.source,
        support_counts=bank.support_counts,
        meta=dict(bank.meta, pcaDim=pca.output_dim),
        normalized=False,
    )


def fit_direction(gallery: EmbeddingSet, cfg: PipelineConfig) -> FittedDirection:
    """Fit all per-direction artifacts from the gallery split alone."""
    pca = pca_fit(gallery.vectors, cfg.pca_dim) if cfg.pca_dim is not None else None
    if cfg.rule == "knn":
        model: object = gallery
        if pca is not None:
            model = replace(gallery, vectors=pca_transform_rows(pca, gallery.vectors))
    else:
        bank = build_visual_prototypes(gallery, cfg.proto_sample_size, cfg.proto_seed)
        model = _transformed_bank(bank, pca) if pca is not None else bank
    return FittedDirection(rule=cfg.rule, model=model, pca=pca)


def apply_direction(
    fitted: FittedDirection, queries: EmbeddingSet, cfg: PipelineConfig
) -> list[Prediction]:
    if fitted.pca is not None:
        queries = replace(queries, vectors=pca_transform_rows(fitted.pca, queries.vectors))
    return classify_batch(queries, fitted.rule, cfg.classifier(), fitted.model, workers=cfg.workers)


def direction_accuracy(fitted: FittedDirection, queries: EmbeddingSet, cfg: PipelineConfig) -> float:
    """Accuracy of one fitted direction over a query set.

    Euclidean NPC takes the vectorized winner path (bit-identical to the
    per-query classifier, see npc_winners_euclidean); everything else
    goes through classify_batch.
    """
    if fitted.rule == "npc" and cfg.metric == "euclidean":
        vectors = queries.vectors
        if fitted.pca is not None:
            vectors = pca_transform_rows(fitted.pca, vectors)
        winners = npc_winners_euclidean(vectors, fitted.model.matrix)
        return top1_accuracy(winners, queries.class_ids)
    return accuracy_of(apply_direction(fitted, queries, cfg), queries)


def evaluate_direction(gallery: EmbeddingSet, queries: EmbeddingSet, cfg: PipelineConfig) -> float:
    _check_compatible(gallery, queries)
    return direction_accuracy(fit_direction(gallery, cfg), queries, cfg)


def _direction_label(gallery: EmbeddingSet, queries: EmbeddingSet) -> str:
    return f"{gallery.split_tag}->{queries.split_tag}"


def _status_of(exc: ProtoclassError) -> str:
    name = type(exc).__name__
    return name[:-5] if name.endswith("Error") else name


def crossval_2fold(
    set_a: EmbeddingSet,
    set_b: EmbeddingSet,
    cfg: PipelineConfig,
    label: str | None = None,
    title: str = "two-fold cross-validation",
) -> EvalReport:
    """Evaluate one pipeline in both directions and aggregate."""
    _check_compatible(set_a, set_b)
    label = label if label is not None else cfg.rule
    rows = []
    for gallery, queries in ((set_a, set_b), (set_b, set_a)):
        try:
            acc = evaluate_direction(gallery, queries, cfg)
            rows.append(EvalRow(label, _direction_label(gallery, queries), acc, len(queries)))
        except (KTooLargeError, InsufficientDataError) as exc:
            rows.append(
                EvalRow(label, _direction_label(gallery, queries), None, len(queries), _status_of(exc))
            )
    return EvalReport.build(title, rows, meta={"rule": cfg.rule})


def sweep_k(
    set_a: EmbeddingSet,
    set_b: EmbeddingSet,
    ks=DEFAULT_KS,
    cfg: PipelineConfig = PipelineConfig(),
) -> EvalReport:
    """Prototype means plus one k-NN row per k, both directions.

    Emits exactly len(ks)+1 rows per direction; a k that exceeds the
    gallery size becomes a KTooLarge status row rather than an error.
    """
    _check_compatible(set_a, set_b)
    ks = list(ks)
    rows = []
    for gallery, queries in ((set_a, set_b), (set_b, set_a)):
        direction = _direction_label(gallery, queries)
        npc_cfg = replace(cfg, rule="npc", proto_sample_size=None, pca_dim=None)
        fitted = fit_direction(gallery, npc_cfg)
        rows.append(
            EvalRow("means", direction, direction_accuracy(fitted, queries, npc_cfg), len(queries))
        )
        feasible = [k for k in ks if 1 <= k <= len(gallery)]
        by_k = (
            knn_multi_k(queries, gallery, feasible, metric=cfg.metric, workers=cfg.workers)
            if feasible
            else {}
        )
        for k in ks:
            if k in by_k:
                rows.append(
                    EvalRow(f"k={k}", direction, accuracy_of(by_k[k], queries), len(queries))
                )
            else:
                rows.append(EvalRow(f"k={k}", direction, None, len(queries), "KTooLarge"))
    return EvalReport.build("k-NN neighbor sweep", rows, meta={"ks": ks, "metric": cfg.metric})


def sweep_prototype_samples(
    set_a: EmbeddingSet,
    set_b: EmbeddingSet,
    sizes=DEFAULT_SAMPLE_SIZES,
    seeds=(1, 2, 3, 4, 5),
    cfg: PipelineConfig = PipelineConfig(),
) -> EvalReport:
    """NPC accuracy as the per-class prototype sample budget shrinks.

    Each (direction, size) cell averages over the sampling seeds; ``None``
    in ``sizes`` means the full gallery ("full" row).
    """
    _check_compatible(set_a, set_b)
    sizes = list(sizes)
    seeds = list(seeds)
    rows = []
    for gallery, queries in ((set_a, set_b), (set_b, set_a)):
        direction = _direction_label(gallery, queries)
        for size in sizes:
            label = "full" if size is None else str(size)
            accs = []
            for seed in seeds if size is not None else [0]:
                run_cfg = replace(cfg, rule="npc", proto_sample_size=size, proto_seed=seed,
                                  pca_dim=None)
                accs.append(evaluate_direction(gallery, queries, run_cfg))
            rows.append(EvalRow(label, direction, sum(accs) / len(accs), len(queries)))
    return EvalReport.build(
        "prototype sample-size sweep",
        rows,
        meta={"sizes": ["full" if s is None else s for s in sizes], "seeds": seeds},
    )


def join_by_source_id(a: EmbeddingSet, b: EmbeddingSet) -> tuple[EmbeddingSet, EmbeddingSet]:
    """Align two encoder views of the same records by sourceId.

    Both sets are returned sorted by sourceId. Records missing from one
    side, duplicated ids, or label disagreements are reported with the
    offending sourceIds.
    """
    ids_a = set(a.source_ids)
    ids_b = set(b.source_ids)
    if len(ids_a) != len(a.source_ids) or len(ids_b) != len(b.source_ids):
        dupes = sorted(
            {s for ids in (a.source_ids, b.source_ids) for s in ids if list(ids).count(s) > 1}
        )[:5]
        raise DimMismatchError(f"duplicate sourceIds prevent a join: {dupes}")
    if ids_a != ids_b:
        missing = sorted(ids_a.symmetric_difference(ids_b))[:5]
        raise DimMismatchError(f"encoder sets disagree on sourceIds, e.g. {missing}")

    def sorted_view(s: EmbeddingSet) -> EmbeddingSet:
        order = sorted(range(len(s)), key=lambda i: s.source_ids[i])
        return replace(
            s,
            vectors=s.vectors[order],
            class_ids=s.class_ids[order],
            source_ids=tuple(s.source_ids[i] for i in order),
        )

    sa, sb = sorted_view(a), sorted_view(b)
    if not np.array_equal(sa.class_ids, sb.class_ids):
        bad = [sa.source_ids[i] for i in np.flatnonzero(sa.class_ids != sb.class_ids)[:5]]
        raise DimMismatchError(f"encoder sets disagree on labels for {bad}")
    return sa, sb


def fuse_sets(a: EmbeddingSet, b: EmbeddingSet) -> EmbeddingSet:
    """Concatenation-fused view of two encoder sets joined by sourceId."""
    if a.catalog != b.catalog:
        raise CatalogMismatchError("encoder sets disagree on the class catalog")
    sa, sb = join_by_source_id(a, b)
    tag_a = a.encoder_tag or "a"
    tag_b = b.encoder_tag or "b"
    return replace(
        sa,
        vectors=fuse_concat_rows(sa.vectors, sb.vectors),
        encoder_tag=f"{tag_a}+{tag_b}",
    )


def sweep_fusion(
    a_train: EmbeddingSet,
    a_test: EmbeddingSet,
    b_train: EmbeddingSet,
    b_test: EmbeddingSet,
    pca_dims=DEFAULT_PCA_DIMS,
    cfg: PipelineConfig = PipelineConfig(),
) -> EvalReport:
    """Each encoder alone, concatenation-fused, and fused+PCA rows (NPC).

    PCA is fitted on the fused gallery split of each direction and applied
    to that direction's prototypes and queries; an infeasible dim becomes
    an InsufficientData status row.
    """
    for x, y in ((a_train, a_test), (b_train, b_test)):
        _check_compatible(x, y)
    tag_a = a_train.encoder_tag or "encoderA"
    tag_b = b_train.encoder_tag or "encoderB"
    fused_train = fuse_sets(a_train, b_train)
    fused_test = fuse_sets(a_test, b_test)
    fused_tag = fused_train.encoder_tag

    rows = []
    npc = replace(cfg, rule="npc", proto_sample_size=None, pca_dim=None)

    def both_directions(label: str, train: EmbeddingSet, test: EmbeddingSet, pca_dim: int | None):
        for gallery, queries in ((train, test), (test, train)):
            direction = _direction_label(gallery, queries)
            try:
                acc = evaluate_direction(gallery, queries, replace(npc, pca_dim=pca_dim))
                rows.append(EvalRow(label, direction, acc, len(queries)))
            except (InsufficientDataError, KTooLargeError) as exc:
                rows.append(EvalRow(label, direction, None, len(queries), _status_of(exc)))

    both_directions(tag_a, a_train, a_test, None)
    both_directions(tag_b, b_train, b_test, None)
    for dim in pca_dims:
        if dim is None:
            both_directions(fused_tag, fused_train, fused_test, None)
        else:
            both_directions(f"{fused_tag}+PCA({dim})", fused_train, fused_test, dim)
    return EvalReport.build(
        "encoder fusion sweep",
        rows,
        meta={"pcaDims": ["none" if d is None else d for d in pca_dims]},
    )


def sweep_prompts(
    text_sets_by_bank: dict[str, EmbeddingSet],
    queries_train: EmbeddingSet,
    queries_test: EmbeddingSet,
    cfg: PipelineConfig = PipelineConfig(rule="softmaxProto"),
) -> EvalReport:
    """Zero-shot text-prototype accuracy per template bank and query subset.

    Text prototypes are direction-free (no image gallery is fitted), so
    rows are keyed by query subset: test, train, and all (their union).
    """
    _check_compatible(queries_train, queries_test)
    subsets = (
        ("test", queries_test),
        ("train", queries_train),
        ("all", concat_sets([queries_test, queries_train])),
    )
    rows = []
    for bank_label, text_set in text_sets_by_bank.items():
        if text_set.catalog != queries_train.catalog:
            raise CatalogMismatchError(f"text bank {bank_label!r} catalog differs from queries")
        bank = build_text_prototypes(text_set)
        if bank.dim != queries_train.dim:
            raise DimMismatchError(f"text bank dim {bank.dim} vs query dim {queries_train.dim}")
        for subset_name, queries in subsets:
            preds = classify_batch(
                queries, "softmaxProto", cfg.classifier(), bank, workers=cfg.workers
            )
            rows.append(EvalRow(bank_label, subset_name, accuracy_of(preds, queries), len(queries)))
    return EvalReport.build(
        "prompt bank sweep", rows, meta={"temperature": cfg.temperature}, aggregate=False
    )


@dataclass(frozen=True)
class Projection2D:
    source_ids: tuple[str, ...]
    class_ids: tuple[int, ...]
    coords: np.ndarray
    centroids: dict[int, tuple[float, float]] = field(default_factory=dict)

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["sourceId", "classId", "x", "y"])
        for sid, cid, (x, y) in zip(self.source_ids, self.class_ids, self.coords):
            writer.writerow([sid, cid, repr(float(x)), repr(float(y))])
        for cid in sorted(self.centroids):
            x, y = self.centroids[cid]
            writer.writerow([f"centroid:{cid}", cid, repr(float(x)), repr(float(y))])
        return buf.getvalue()


def project_2d(s: EmbeddingSet) -> Projection2D:
    """PCA projection of a set onto its two leading components."""
    model = pca_fit(s.vectors, 2)
    coords = pca_transform_rows(model, s.vectors)
    centroids: dict[int, tuple[float, float]] = {}
    for cid in sorted(set(int(c) for c in s.class_ids)):
        member_coords = coords[s.class_ids == cid]
        centroid = mean_vector(member_coords)
        centroids[cid] = (float(centroid[0]), float(centroid[1]))
    return Projection2D(
        source_ids=s.source_ids,
        class_ids=tuple(int(c) for c in s.class_ids),
        coords=coords,
        centroids=centroids,
    )
