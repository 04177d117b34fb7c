"""Seeded synthetic embedding sets for harness and oracle testing.

Produces well-controlled class clusters on the unit sphere: K unit
centers with pairwise cosine at most 0.8 (rejection sampling), members
drawn as center plus isotropic Gaussian noise and renormalized. The
generator is SplitMix64 with documented substreams, so the same spec
yields bit-identical sets on every platform:

* centers use the stream seeded with derive_seed(seed, 0); each draw is
  ``dim`` consecutive gaussians, normalized, rejected while its cosine
  to any accepted center exceeds 0.8 (at most 100000 rejections total).
* members of (split s in train=0/test=1, class c) use the stream seeded
  with derive_seed(seed, 1 + s, c); each member is ``dim`` consecutive
  gaussians scaled by the spread. A spread of zero short-circuits: no
  draws, every member equals its center bit-exactly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import CenterSamplingFailedError, SpecError, ZeroVectorError
from .rng import SplitMix64, derive_seed
from .store import ClassCatalog, EmbeddingSet

MAX_CENTER_COSINE = 0.8
CENTER_REJECTION_BUDGET = 100_000


@dataclass(frozen=True)
class SyntheticSpec:
    n_classes: int
    dim: int
    per_class: int
    spread: float
    seed: int

    def __post_init__(self):
        if self.n_classes < 2:
            raise SpecError("need at least 2 classes")
        if self.dim < 2:
            raise SpecError("need at least 2 dims")
        if self.per_class < 1:
            raise SpecError("need at least 1 member per class")
        if not self.spread >= 0.0:
            raise SpecError("spread must be non-negative")


def _gaussian_vector(rng: SplitMix64, dim: int) -> np.ndarray:
    return np.array([rng.next_gaussian() for _ in range(dim)], dtype=np.float64)


def _unit(v: np.ndarray) -> np.ndarray:
    norm = float(np.linalg.norm(v))
    if norm < 1e-12:
        raise ZeroVectorError("degenerate draw")
    return v / norm


def _sample_centers(spec: SyntheticSpec) -> np.ndarray:
    rng = SplitMix64(derive_seed(spec.seed, 0))
    centers: list[np.ndarray] = []
    rejections = 0
    while len(centers) < spec.n_classes:
        candidate = _unit(_gaussian_vector(rng, spec.dim))
        if any(float(np.dot(candidate, c)) > MAX_CENTER_COSINE for c in centers):
            rejections += 1
            if rejections > CENTER_REJECTION_BUDGET:
                raise CenterSamplingFailedError(
                    f"could not place {spec.n_classes} centers with pairwise cosine "
                    f"<= {MAX_CENTER_COSINE} in dim {spec.dim} "
                    f"after {CENTER_REJECTION_BUDGET} rejections"
                )
            continue
        centers.append(candidate)
    return np.stack(centers)


def _split_members(spec: SyntheticSpec, centers: np.ndarray, split_index: int) -> np.ndarray:
    rows = np.empty((spec.n_classes * spec.per_class, spec.dim), dtype=np.float32)
    pos = 0
    for class_id in range(spec.n_classes):
        center = centers[class_id]
        center_f32 = center.astype(np.float32)
        rng = SplitMix64(derive_seed(spec.seed, 1 + split_index, class_id))
        for _ in range(spec.per_class):
            if spec.spread == 0.0:
                rows[pos] = center_f32
            else:
                noisy = center + spec.spread * _gaussian_vector(rng, spec.dim)
                rows[pos] = _unit(noisy).astype(np.float32)
            pos += 1
    return rows


def generate_synthetic(spec: SyntheticSpec) -> tuple[EmbeddingSet, EmbeddingSet]:
    """Build (train, test) sets of ``per_class`` members per class each."""
    centers = _sample_centers(spec)
    catalog = ClassCatalog(tuple(f"class{i:02d}" for i in range(spec.n_classes)))
    class_ids = np.repeat(np.arange(spec.n_classes, dtype=np.uint32), spec.per_class)
    sets = []
    for split_index, split in enumerate(("train", "test")):
        vectors = _split_members(spec, centers, split_index)
        source_ids = tuple(
            f"{split}-c{c:03d}-{j:04d}"
            for c in range(spec.n_classes)
            for j in range(spec.per_class)
        )
        sets.append(
            EmbeddingSet(
                vectors=vectors,
                class_ids=class_ids.copy(),
                source_ids=source_ids,
                catalog=catalog,
                split_tag=split,
                cleaned=False,
                encoder_tag="synthetic",
            )
        )
    return sets[0], sets[1]
