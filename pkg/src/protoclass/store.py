"""On-disk representation of labeled embedding sets and caption files.

Binary format "EMB1" (the public contract with any embedding producer):

    offset 0   4 bytes   magic, the ASCII bytes "EMB1"
    offset 4   u32 LE    version, currently 1
    offset 8   u32 LE    dim
    offset 12  u64 LE    record count N
    offset 20  N rows of (u32 LE classId, dim x f32 LE)

Strings and flags live in a sibling JSON manifest ``<file>.manifest.json``
with fields {version, dim, count, splitTag, cleanedFlag, encoderTag,
classes:[{id,name}], sourceIds:[...]} plus the optional keys warnings,
role, source, supportCounts and sourceSplit used by prototype banks and
sampling metadata. The dense payload stays memory-mappable and language
neutral; the metadata stays human readable.

Caption files are JSON Lines, one object {sourceId, classId, caption} per
line; an optional first line without a "sourceId" key is treated as a
header object (producers record decoding parameters there).

Writes are whole-file and atomic (write to temp, then rename). Sets are
immutable after load; concurrent readers are safe.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterator, NamedTuple

import numpy as np

from .errors import (
    CatalogError,
    CatalogMismatchError,
    EmptyInputError,
    FormatError,
    UnknownClassError,
)
from .rng import SplitMix64, derive_seed

MAGIC = b"EMB1"
FORMAT_VERSION = 1
HEADER_SIZE = 20
SPLIT_TAGS = ("train", "test", "other")


@dataclass(frozen=True)
class ClassCatalog:
    """Ordered class names; ids are implicitly 0..K-1."""

    names: tuple[str, ...]

    def __post_init__(self):
        if not self.names:
            raise CatalogError("catalog has no classes")
        if any(not n for n in self.names):
            raise CatalogError("catalog contains an empty class name")
        if len(set(self.names)) != len(self.names):
            raise CatalogError("catalog names are not unique")

    def __len__(self) -> int:
        return len(self.names)

    def name_of(self, class_id: int) -> str:
        if not 0 <= class_id < len(self.names):
            raise UnknownClassError(f"class id {class_id} not in catalog")
        return self.names[class_id]

    def to_pairs(self) -> list[dict]:
        return [{"id": i, "name": n} for i, n in enumerate(self.names)]

    @classmethod
    def from_pairs(cls, pairs) -> "ClassCatalog":
        try:
            ids = [int(p["id"]) for p in pairs]
            names = [str(p["name"]) for p in pairs]
        except (TypeError, KeyError) as exc:
            raise CatalogError(f"malformed catalog entry: {exc}") from exc
        if ids != list(range(len(ids))):
            raise CatalogError(f"class ids must be exactly 0..{len(ids) - 1}")
        return cls(tuple(names))


class LabeledEmbedding(NamedTuple):
    vector: np.ndarray
    class_id: int
    source_id: str


@dataclass(frozen=True, eq=False)
class EmbeddingSet:
    """Immutable labeled collection of embedding vectors.

    Storage is columnar (one (N, dim) float32 matrix plus parallel id
    arrays) so classifier kernels can run over the whole gallery without
    per-record boxing; ``records()`` exposes the row view when needed.
    """

    vectors: np.ndarray
    class_ids: np.ndarray
    source_ids: tuple[str, ...]
    catalog: ClassCatalog
    split_tag: str
    cleaned: bool = False
    encoder_tag: str = ""
    warnings: tuple[str, ...] = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, "vectors", np.asarray(self.vectors, dtype=np.float32))
        object.__setattr__(self, "class_ids", np.asarray(self.class_ids, dtype=np.uint32))
        if self.vectors.ndim != 2 or self.vectors.shape[0] < 1:
            raise EmptyInputError("an embedding set must contain at least one record")
        n = self.vectors.shape[0]
        if self.class_ids.shape != (n,) or len(self.source_ids) != n:
            raise CatalogError("record columns disagree on length")
        if not np.all(np.isfinite(self.vectors)):
            raise FormatError("nonFinite", "embedding set contains non-finite values")
        if np.any(self.class_ids >= len(self.catalog)):
            bad = int(self.class_ids[self.class_ids >= len(self.catalog)][0])
            raise CatalogError(f"record references class id {bad} outside catalog")
        if self.split_tag not in SPLIT_TAGS:
            raise CatalogError(f"splitTag must be one of {SPLIT_TAGS}, got {self.split_tag!r}")

    @property
    def dim(self) -> int:
        return int(self.vectors.shape[1])

    def __len__(self) -> int:
        return int(self.vectors.shape[0])

    def record(self, i: int) -> LabeledEmbedding:
        return LabeledEmbedding(self.vectors[i], int(self.class_ids[i]), self.source_ids[i])

    def records(self) -> Iterator[LabeledEmbedding]:
        for i in range(len(self)):
            yield self.record(i)

    def class_counts(self) -> dict[int, int]:
        ids, counts = np.unique(self.class_ids, return_counts=True)
        return {int(i): int(c) for i, c in zip(ids, counts)}

    def __eq__(self, other) -> bool:
        if not isinstance(other, EmbeddingSet):
            return NotImplemented
        return (
            self.vectors.shape == other.vectors.shape
            and np.array_equal(self.vectors, other.vectors)
            and np.array_equal(self.class_ids, other.class_ids)
            and self.source_ids == other.source_ids
            and self.catalog == other.catalog
            and self.split_tag == other.split_tag
            and self.cleaned == other.cleaned
            and self.encoder_tag == other.encoder_tag
            and self.warnings == other.warnings
        )


class CaptionEntry(NamedTuple):
    source_id: str
    class_id: int
    caption: str


@dataclass(frozen=True)
class CaptionSet:
    entries: tuple[CaptionEntry, ...]
    split_tag: str
    header: dict | None = None

    def __post_init__(self):
        if self.split_tag not in SPLIT_TAGS:
            raise CatalogError(f"splitTag must be one of {SPLIT_TAGS}, got {self.split_tag!r}")
        if any(not e.caption for e in self.entries):
            raise FormatError("truncated", "caption file contains an empty caption")

    def check_catalog(self, catalog: ClassCatalog) -> None:
        for e in self.entries:
            if not 0 <= e.class_id < len(catalog):
                raise CatalogError(
                    f"caption {e.source_id!r} references class id {e.class_id} outside catalog"
                )


def _row_dtype(dim: int) -> np.dtype:
    return np.dtype([("class_id", "<u4"), ("vec", "<f4", (dim,))])


def _atomic_write(path: Path, data: bytes) -> None:
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(data)
    os.replace(tmp, path)


def manifest_path(path) -> Path:
    path = Path(path)
    return path.with_name(path.name + ".manifest.json")


def _manifest_dict(s: EmbeddingSet, extra: dict | None = None) -> dict:
    manifest = {
        "version": FORMAT_VERSION,
        "dim": s.dim,
        "count": len(s),
        "splitTag": s.split_tag,
        "cleanedFlag": s.cleaned,
        "encoderTag": s.encoder_tag,
        "classes": s.catalog.to_pairs(),
        "sourceIds": list(s.source_ids),
    }
    if s.warnings:
        manifest["warnings"] = list(s.warnings)
    if extra:
        manifest.update(extra)
    return manifest


def write_set(s: EmbeddingSet, path, manifest_extra: dict | None = None) -> None:
    """Write ``s`` to ``path`` (EMB1) and ``path.manifest.json``, atomically."""
    path = Path(path)
    n = len(s)
    rows = np.empty(n, dtype=_row_dtype(s.dim))
    rows["class_id"] = s.class_ids
    rows["vec"] = s.vectors
    header = (
        MAGIC
        + int(FORMAT_VERSION).to_bytes(4, "little")
        + int(s.dim).to_bytes(4, "little")
        + int(n).to_bytes(8, "little")
    )
    _atomic_write(path, header + rows.tobytes())
    manifest = _manifest_dict(s, manifest_extra)
    _atomic_write(
        manifest_path(path),
        (json.dumps(manifest, indent=2, ensure_ascii=False) + "\n").encode("utf-8"),
    )


def read_manifest(path) -> dict:
    mpath = manifest_path(path)
    with open(mpath, "r", encoding="utf-8") as fh:
        try:
            manifest = json.load(fh)
        except json.JSONDecodeError as exc:
            raise FormatError("truncated", f"manifest {mpath} is not valid JSON: {exc}") from exc
    if not isinstance(manifest, dict):
        raise FormatError("truncated", f"manifest {mpath} must hold a JSON object")
    return manifest


def read_set(path) -> EmbeddingSet:
    """Read an EMB1 file plus manifest back into an EmbeddingSet.

    Raises FormatError(badMagic | badVersion | truncated | dimMismatch |
    nonFinite) for payload problems and CatalogError for inconsistent
    metadata. Missing files surface as the usual OSError family.
    """
    path = Path(path)
    blob = path.read_bytes()
    if len(blob) < HEADER_SIZE or blob[:4] != MAGIC:
        raise FormatError("badMagic", f"{path} does not start with the EMB1 magic")
    version = int.from_bytes(blob[4:8], "little")
    if version != FORMAT_VERSION:
        raise FormatError("badVersion", f"{path} declares version {version}, expected {FORMAT_VERSION}")
    dim = int.from_bytes(blob[8:12], "little")
    count = int.from_bytes(blob[12:20], "little")
    if dim < 1:
        raise FormatError("dimMismatch", f"{path} declares dim {dim}")
    expected = HEADER_SIZE + count * (4 + 4 * dim)
    if len(blob) != expected:
        raise FormatError(
            "truncated",
            f"{path} holds {len(blob)} bytes but header implies {expected}",
        )
    rows = np.frombuffer(blob, dtype=_row_dtype(dim), count=count, offset=HEADER_SIZE)
    manifest = read_manifest(path)
    if manifest.get("version") != FORMAT_VERSION:
        raise FormatError("badVersion", f"manifest version {manifest.get('version')!r}")
    if manifest.get("dim") != dim:
        raise FormatError("dimMismatch", f"manifest dim {manifest.get('dim')!r} vs header dim {dim}")
    if manifest.get("count") != count:
        raise FormatError("truncated", f"manifest count {manifest.get('count')!r} vs header count {count}")
    source_ids = manifest.get("sourceIds")
    if not isinstance(source_ids, list) or len(source_ids) != count:
        raise FormatError("truncated", "manifest sourceIds do not match the record count")
    catalog = ClassCatalog.from_pairs(manifest.get("classes", []))
    vectors = np.array(rows["vec"], dtype=np.float32)
    if not np.all(np.isfinite(vectors)):
        raise FormatError("nonFinite", f"{path} contains non-finite embedding values")
    return EmbeddingSet(
        vectors=vectors,
        class_ids=np.array(rows["class_id"], dtype=np.uint32),
        source_ids=tuple(str(sid) for sid in source_ids),
        catalog=catalog,
        split_tag=str(manifest.get("splitTag", "other")),
        cleaned=bool(manifest.get("cleanedFlag", False)),
        encoder_tag=str(manifest.get("encoderTag", "")),
        warnings=tuple(manifest.get("warnings", [])),
    )


def write_captions(captions: CaptionSet, path) -> None:
    path = Path(path)
    lines = []
    if captions.header is not None:
        lines.append(json.dumps(captions.header, ensure_ascii=False))
    for e in captions.entries:
        lines.append(
            json.dumps(
                {"sourceId": e.source_id, "classId": e.class_id, "caption": e.caption},
                ensure_ascii=False,
            )
        )
    _atomic_write(path, ("\n".join(lines) + "\n").encode("utf-8"))


def read_captions(path, split_tag: str = "other") -> CaptionSet:
    path = Path(path)
    entries = []
    header = None
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise FormatError("truncated", f"{path}:{lineno + 1} is not valid JSON") from exc
            if not isinstance(obj, dict):
                raise FormatError("truncated", f"{path}:{lineno + 1} must hold a JSON object")
            if "sourceId" not in obj:
                if lineno == 0:
                    header = obj
                    continue
                raise FormatError("truncated", f"{path}:{lineno + 1} lacks a sourceId")
            try:
                entries.append(
                    CaptionEntry(str(obj["sourceId"]), int(obj["classId"]), str(obj["caption"]))
                )
            except (KeyError, TypeError, ValueError) as exc:
                raise FormatError("truncated", f"{path}:{lineno + 1}: {exc}") from exc
    return CaptionSet(entries=tuple(entries), split_tag=split_tag, header=header)


def subset_by_class(s: EmbeddingSet, class_ids) -> EmbeddingSet:
    """Records of the requested classes, original order, catalog preserved."""
    wanted = list(class_ids)
    for cid in wanted:
        if not 0 <= int(cid) < len(s.catalog):
            raise UnknownClassError(f"class id {cid} not in catalog")
    mask = np.isin(s.class_ids, np.asarray(wanted, dtype=np.uint32))
    if not np.any(mask):
        raise EmptyInputError("subset contains no records")
    idx = np.flatnonzero(mask)
    return replace(
        s,
        vectors=s.vectors[idx],
        class_ids=s.class_ids[idx],
        source_ids=tuple(s.source_ids[i] for i in idx),
        warnings=(),
    )


def _rows_by_class(s: EmbeddingSet) -> dict[int, list[int]]:
    # sourceId order (ties by original index) makes draws independent of
    # on-disk record ordering
    groups: dict[int, list[int]] = {}
    for i, cid in enumerate(s.class_ids):
        groups.setdefault(int(cid), []).append(i)
    for rows in groups.values():
        rows.sort(key=lambda i: (s.source_ids[i], i))
    return groups


def sample_per_class(s: EmbeddingSet, per_class: int | None, seed: int = 0) -> EmbeddingSet:
    """Draw up to ``per_class`` records per class without replacement.

    Each class uses its own SplitMix64 stream seeded with
    derive_seed(seed, class_id) and a partial Fisher-Yates over its
    records sorted by sourceId, so results are stable across runs,
    platforms, and input orderings. ``per_class=None`` keeps everything
    (order-normalized). Classes with fewer than ``per_class`` records
    contribute all they have plus a ShortClass warning in the result
    metadata.
    """
    if per_class is not None and per_class < 1:
        raise ValueError("per_class must be positive")
    groups = _rows_by_class(s)
    keep: list[int] = []
    warnings: list[str] = []
    for class_id in range(len(s.catalog)):
        rows = groups.get(class_id, [])
        if not rows:
            continue
        if per_class is None or per_class >= len(rows):
            if per_class is not None and len(rows) < per_class:
                warnings.append(
                    f"ShortClass: class {class_id} ({s.catalog.name_of(class_id)}) "
                    f"has {len(rows)} records, requested {per_class}"
                )
            chosen = rows
        else:
            rng = SplitMix64(derive_seed(seed, class_id))
            picks = rng.sample_indices(len(rows), per_class)
            chosen = sorted((rows[i] for i in picks), key=lambda r: (s.source_ids[r], r))
        keep.extend(chosen)
    if not keep:
        raise EmptyInputError("sampling produced no records")
    idx = np.asarray(keep, dtype=np.int64)
    return replace(
        s,
        vectors=s.vectors[idx],
        class_ids=s.class_ids[idx],
        source_ids=tuple(s.source_ids[i] for i in keep),
        warnings=tuple(warnings),
    )


def concat_sets(sets, split_tag: str = "other") -> EmbeddingSet:
    """Union of several sets sharing one catalog and dim."""
    sets = list(sets)
    if not sets:
        raise EmptyInputError("nothing to concatenate")
    first = sets[0]
    for other in sets[1:]:
        if other.catalog != first.catalog:
            raise CatalogMismatchError("sets disagree on the class catalog")
        if other.dim != first.dim:
            raise CatalogMismatchError(f"sets disagree on dim: {other.dim} vs {first.dim}")
    return EmbeddingSet(
        vectors=np.concatenate([x.vectors for x in sets], axis=0),
        class_ids=np.concatenate([x.class_ids for x in sets]),
        source_ids=tuple(sid for x in sets for sid in x.source_ids),
        catalog=first.catalog,
        split_tag=split_tag,
        cleaned=all(x.cleaned for x in sets),
        encoder_tag=first.encoder_tag,
    )
