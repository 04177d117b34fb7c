"""Class-representative vectors from text, caption, or visual embeddings.

All three builders share one averaging path: mean the member embeddings,
then L2-normalize. Only direction matters downstream (cosine scoring),
and normalized prototypes make the Euclidean nearest-prototype ranking
coincide with the cosine ranking.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import store
from .errors import CatalogMismatchError, DimMismatchError, MissingClassError
from .linalg import l2_normalize, mean_vector
from .store import ClassCatalog, EmbeddingSet

SOURCES = ("textTemplate", "caption", "visualMean")


@dataclass(frozen=True)
class Prototype:
    class_id: int
    vector: np.ndarray
    source: str
    support_count: int


@dataclass(frozen=True, eq=False)
class PrototypeBank:
    """One prototype per catalog class, uniform dim, ordered by class id.

    ``normalized`` is True for builder outputs (unit vectors within 1e-6);
    evaluation pipelines that project a bank through PCA produce
    non-normalized banks, which classifiers accept unchanged.
    """

    catalog: ClassCatalog
    matrix: np.ndarray
    source: str
    support_counts: tuple[int, ...]
    meta: dict = field(default_factory=dict)
    normalized: bool = True

    def __post_init__(self):
        object.__setattr__(self, "matrix", np.asarray(self.matrix, dtype=np.float32))
        if self.source not in SOURCES:
            raise MissingClassError(f"unknown prototype source {self.source!r}")
        k = len(self.catalog)
        if self.matrix.shape[0] != k or len(self.support_counts) != k:
            raise MissingClassError(
                f"bank must cover all {k} classes, got {self.matrix.shape[0]} prototypes"
            )
        if self.normalized:
            norms = np.linalg.norm(self.matrix.astype(np.float64), axis=1)
            if not np.allclose(norms, 1.0, atol=1e-6):
                raise MissingClassError("prototype vectors are not unit norm")

    @property
    def dim(self) -> int:
        return int(self.matrix.shape[1])

    def __len__(self) -> int:
        return int(self.matrix.shape[0])

    def prototype(self, class_id: int) -> Prototype:
        return Prototype(
            class_id=class_id,
            vector=self.matrix[class_id],
            source=self.source,
            support_count=self.support_counts[class_id],
        )

    def __eq__(self, other) -> bool:
        if not isinstance(other, PrototypeBank):
            return NotImplemented
        return (
            self.catalog == other.catalog
            and np.array_equal(self.matrix, other.matrix)
            and self.source == other.source
            and self.support_counts == other.support_counts
        )


def _group_by_class(s: EmbeddingSet) -> dict[int, np.ndarray]:
    groups: dict[int, list[int]] = {}
    for i, cid in enumerate(s.class_ids):
        groups.setdefault(int(cid), []).append(i)
    return {cid: s.vectors[rows] for cid, rows in groups.items()}


def _averaged_bank(s: EmbeddingSet, source: str, meta: dict | None = None) -> PrototypeBank:
    groups = _group_by_class(s)
    rows = []
    supports = []
    for class_id, name in enumerate(s.catalog.names):
        if class_id not in groups:
            raise MissingClassError(f"class {class_id} ({name}) has no embeddings to average")
        members = groups[class_id]
        rows.append(l2_normalize(mean_vector(members)))
        supports.append(len(members))
    return PrototypeBank(
        catalog=s.catalog,
        matrix=np.stack(rows),
        source=source,
        support_counts=tuple(supports),
        meta=dict(meta or {}),
    )


def build_text_prototypes(text_embeddings: EmbeddingSet) -> PrototypeBank:
    """Average each class's prompt embeddings into one unit prototype.

    The input holds one record per (class, prompt); supportCount records
    how many prompts backed each class.
    """
    return _averaged_bank(text_embeddings, "textTemplate")


def build_caption_prototypes(caption_embeddings, source_split: str) -> PrototypeBank:
    """Average caption embeddings from the chosen split into prototypes.

    ``caption_embeddings`` is one EmbeddingSet or a sequence of them (one
    per split); ``source_split`` picks "train", "test", or "all" (the
    union of everything given). The chosen split is recorded in the bank
    metadata.
    """
    if isinstance(caption_embeddings, EmbeddingSet):
        sets = [caption_embeddings]
    else:
        sets = list(caption_embeddings)
    if source_split not in ("train", "test", "all"):
        raise MissingClassError(f"source_split must be train/test/all, got {source_split!r}")
    if source_split == "all":
        chosen = sets
    else:
        chosen = [s for s in sets if s.split_tag == source_split]
    if not chosen:
        raise MissingClassError(f"no caption embeddings available for split {source_split!r}")
    merged = chosen[0] if len(chosen) == 1 else store.concat_sets(chosen)
    return _averaged_bank(merged, "caption", meta={"sourceSplit": source_split})


def build_visual_prototypes(
    gallery: EmbeddingSet,
    per_class_sample_size: int | None = None,
    seed: int = 0,
) -> PrototypeBank:
    """Mean (optionally seeded-subsampled) gallery embedding per class.

    Sampling delegates to store.sample_per_class, so subset draws follow
    the documented SplitMix64 procedure; supportCount records how many
    gallery vectors were actually averaged.
    """
    pool = gallery
    meta: dict = {}
    if per_class_sample_size is not None:
        pool = store.sample_per_class(gallery, per_class_sample_size, seed)
        meta = {"perClassSampleSize": per_class_sample_size, "seed": seed}
    return _averaged_bank(pool, "visualMean", meta=meta)


def write_bank(bank: PrototypeBank, path) -> None:
    """Serialize a bank through the EMB1 store with role="prototypes"."""
    s = EmbeddingSet(
        vectors=bank.matrix,
        class_ids=np.arange(len(bank), dtype=np.uint32),
        source_ids=tuple(f"proto:{name}" for name in bank.catalog.names),
        catalog=bank.catalog,
        split_tag="other",
        encoder_tag=str(bank.meta.get("encoderTag", "")),
    )
    extra: dict = {"role": "prototypes", "source": bank.source}
    extra["supportCounts"] = list(bank.support_counts)
    if "sourceSplit" in bank.meta:
        extra["sourceSplit"] = bank.meta["sourceSplit"]
    store.write_set(s, path, manifest_extra=extra)


def read_bank(path) -> PrototypeBank:
    s = store.read_set(path)
    manifest = store.read_manifest(path)
    if manifest.get("role") != "prototypes":
        raise MissingClassError(f"{path} is not a prototype bank")
    supports = manifest.get("supportCounts")
    if not isinstance(supports, list) or len(supports) != len(s):
        raise MissingClassError(f"{path} lacks per-class support counts")
    if list(s.class_ids) != list(range(len(s.catalog))):
        raise MissingClassError(f"{path} does not hold one prototype per class in order")
    meta = {}
    if "sourceSplit" in manifest:
        meta["sourceSplit"] = manifest["sourceSplit"]
    return PrototypeBank(
        catalog=s.catalog,
        matrix=s.vectors,
        source=str(manifest.get("source", "visualMean")),
        support_counts=tuple(int(c) for c in supports),
        meta=meta,
    )


def check_bank_dim(bank: PrototypeBank, dim: int) -> None:
    if bank.dim != dim:
        raise DimMismatchError(f"bank dim {bank.dim} vs query dim {dim}")


def check_same_catalog(a_catalog: ClassCatalog, b_catalog: ClassCatalog) -> None:
    if a_catalog != b_catalog:
        raise CatalogMismatchError("class catalogs differ")
