import numpy as np
import pytest

from protoclass import ClassCatalog, EmbeddingSet


def make_set(vectors, class_ids, names=None, split="train", source_ids=None, encoder="test"):
    vectors = np.asarray(vectors, dtype=np.float32)
    class_ids = list(class_ids)
    k = max(class_ids) + 1 if names is None else len(names)
    catalog = ClassCatalog(tuple(names) if names else tuple(f"cls{i}" for i in range(k)))
    if source_ids is None:
        source_ids = tuple(f"{split}-{i:04d}" for i in range(len(class_ids)))
    return EmbeddingSet(
        vectors=vectors,
        class_ids=np.asarray(class_ids, dtype=np.uint32),
        source_ids=tuple(source_ids),
        catalog=catalog,
        split_tag=split,
        encoder_tag=encoder,
    )


@pytest.fixture
def tiny_set():
    return make_set(
        vectors=[[1.0, 0.0, 0.0, 0.0], [0.0, 1.0, 0.0, 0.0], [0.0, 0.0, 1.0, 0.0]],
        class_ids=[0, 1, 1],
        names=["alpha", "beta"],
    )
