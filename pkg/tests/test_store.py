import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import make_set
from oracles import SplitMix64Oracle, derive_seed_oracle
from protoclass import (
    CaptionEntry,
    CaptionSet,
    CatalogError,
    CatalogMismatchError,
    ClassCatalog,
    EmbeddingSet,
    EmptyInputError,
    FormatError,
    UnknownClassError,
    concat_sets,
    read_captions,
    read_set,
    sample_per_class,
    subset_by_class,
    write_captions,
    write_set,
)
from protoclass.store import HEADER_SIZE, manifest_path

RNG = np.random.default_rng(77)


def random_set(n=12, dim=4, k=3, split="train", seed=None):
    rng = np.random.default_rng(seed) if seed is not None else RNG
    vectors = rng.normal(size=(n, dim)).astype(np.float32)
    class_ids = [int(i % k) for i in range(n)]
    return make_set(vectors, class_ids, names=[f"c{i}" for i in range(k)], split=split)


class TestCatalog:
    def test_valid(self):
        cat = ClassCatalog(("a", "b", "c"))
        assert len(cat) == 3
        assert cat.name_of(1) == "b"

    def test_duplicate_names(self):
        with pytest.raises(CatalogError):
            ClassCatalog(("a", "a"))

    def test_empty_name(self):
        with pytest.raises(CatalogError):
            ClassCatalog(("a", ""))

    def test_from_pairs_requires_contiguous_ids(self):
        with pytest.raises(CatalogError):
            ClassCatalog.from_pairs([{"id": 0, "name": "a"}, {"id": 2, "name": "b"}])

    def test_unknown_class(self):
        with pytest.raises(UnknownClassError):
            ClassCatalog(("a",)).name_of(5)


class TestRoundTrip:
    def test_three_record_dim_four(self, tmp_path, tiny_set):
        path = tmp_path / "tiny.emb1"
        write_set(tiny_set, path)
        loaded = read_set(path)
        assert loaded == tiny_set
        # re-serialize: byte identical payload and manifest
        second = tmp_path / "tiny2.emb1"
        write_set(loaded, second)
        assert path.read_bytes() == second.read_bytes()
        assert manifest_path(path).read_bytes() == manifest_path(second).read_bytes()

    def test_float_payload_bit_exact(self, tmp_path):
        vectors = np.array([[1e-38, 3.14159, -2.5e7, 0.1]], dtype=np.float32)
        s = make_set(vectors, [0], names=["only"])
        path = tmp_path / "x.emb1"
        write_set(s, path)
        assert np.array_equal(read_set(path).vectors, vectors)

    @settings(max_examples=40, deadline=None)
    @given(
        n=st.integers(1, 16),
        dim=st.integers(1, 9),
        k=st.integers(1, 4),
        seed=st.integers(0, 2**31),
    )
    def test_property_round_trip(self, tmp_path_factory, n, dim, k, seed):
        rng = np.random.default_rng(seed)
        s = make_set(
            rng.normal(size=(n, dim)).astype(np.float32),
            [int(rng.integers(0, k)) for _ in range(n)],
            names=[f"c{i}" for i in range(k)],
            split=("train", "test", "other")[seed % 3],
        )
        path = tmp_path_factory.mktemp("rt") / "s.emb1"
        write_set(s, path)
        assert read_set(path) == s


class TestFormatErrors:
    def _write(self, tmp_path, s=None):
        path = tmp_path / "s.emb1"
        write_set(s or random_set(), path)
        return path

    def test_bad_magic(self, tmp_path):
        path = self._write(tmp_path)
        blob = bytearray(path.read_bytes())
        blob[0] ^= 0xFF
        path.write_bytes(bytes(blob))
        with pytest.raises(FormatError) as err:
            read_set(path)
        assert err.value.reason == "badMagic"

    def test_bad_version(self, tmp_path):
        path = self._write(tmp_path)
        blob = bytearray(path.read_bytes())
        blob[4] = 9
        path.write_bytes(bytes(blob))
        with pytest.raises(FormatError) as err:
            read_set(path)
        assert err.value.reason == "badVersion"

    def test_truncated_payload(self, tmp_path):
        # header declares 10 records, file contains 9 rows
        s = random_set(n=10, dim=4)
        path = tmp_path / "s.emb1"
        write_set(s, path)
        blob = path.read_bytes()
        row = 4 + 4 * 4
        path.write_bytes(blob[: HEADER_SIZE + 9 * row])
        with pytest.raises(FormatError) as err:
            read_set(path)
        assert err.value.reason == "truncated"

    def test_trailing_garbage(self, tmp_path):
        path = self._write(tmp_path)
        path.write_bytes(path.read_bytes() + b"xx")
        with pytest.raises(FormatError) as err:
            read_set(path)
        assert err.value.reason == "truncated"

    def test_manifest_dim_mismatch(self, tmp_path):
        path = self._write(tmp_path)
        manifest = json.loads(manifest_path(path).read_text())
        manifest["dim"] += 1
        manifest_path(path).write_text(json.dumps(manifest))
        with pytest.raises(FormatError) as err:
            read_set(path)
        assert err.value.reason == "dimMismatch"

    def test_manifest_count_mismatch(self, tmp_path):
        path = self._write(tmp_path)
        manifest = json.loads(manifest_path(path).read_text())
        manifest["count"] += 1
        manifest_path(path).write_text(json.dumps(manifest))
        with pytest.raises(FormatError) as err:
            read_set(path)
        assert err.value.reason == "truncated"

    def test_source_ids_shorter_than_records(self, tmp_path):
        path = self._write(tmp_path)
        manifest = json.loads(manifest_path(path).read_text())
        manifest["sourceIds"] = manifest["sourceIds"][:-1]
        manifest_path(path).write_text(json.dumps(manifest))
        with pytest.raises(FormatError) as err:
            read_set(path)
        assert err.value.reason == "truncated"

    def test_non_finite_rejected(self, tmp_path):
        path = self._write(tmp_path)
        blob = bytearray(path.read_bytes())
        # first record's first float: bytes 24..28 (after u32 class id)
        blob[HEADER_SIZE + 4 : HEADER_SIZE + 8] = np.array([np.inf], dtype="<f4").tobytes()
        path.write_bytes(bytes(blob))
        with pytest.raises(FormatError) as err:
            read_set(path)
        assert err.value.reason == "nonFinite"

    def test_record_class_outside_catalog(self, tmp_path):
        path = self._write(tmp_path)
        blob = bytearray(path.read_bytes())
        blob[HEADER_SIZE : HEADER_SIZE + 4] = (250).to_bytes(4, "little")
        path.write_bytes(bytes(blob))
        with pytest.raises(CatalogError):
            read_set(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(OSError):
            read_set(tmp_path / "absent.emb1")


class TestCaptions:
    def test_round_trip_with_header(self, tmp_path):
        captions = CaptionSet(
            entries=(
                CaptionEntry("img-1", 0, "a jar of pasta sauce"),
                CaptionEntry("img-2", 1, "a chocolate bar"),
            ),
            split_tag="train",
            header={"decodingParams": {"beams": 5, "maxTokens": 30}},
        )
        path = tmp_path / "caps.jsonl"
        write_captions(captions, path)
        loaded = read_captions(path, split_tag="train")
        assert loaded.entries == captions.entries
        assert loaded.header == captions.header

    def test_empty_caption_rejected(self):
        with pytest.raises(FormatError):
            CaptionSet(entries=(CaptionEntry("a", 0, ""),), split_tag="train")

    def test_catalog_check(self):
        captions = CaptionSet(entries=(CaptionEntry("a", 7, "text"),), split_tag="train")
        with pytest.raises(CatalogError):
            captions.check_catalog(ClassCatalog(("one", "two")))

    def test_missing_source_id_mid_file(self, tmp_path):
        path = tmp_path / "bad.jsonl"
        path.write_text('{"sourceId": "a", "classId": 0, "caption": "x"}\n{"classId": 1}\n')
        with pytest.raises(FormatError):
            read_captions(path)


class TestSubset:
    def test_filters_and_keeps_catalog(self, tiny_set):
        sub = subset_by_class(tiny_set, [1])
        assert len(sub) == 2
        assert sub.catalog == tiny_set.catalog
        assert all(int(c) == 1 for c in sub.class_ids)

    def test_unknown_class(self, tiny_set):
        with pytest.raises(UnknownClassError):
            subset_by_class(tiny_set, [5])

    def test_empty_result(self, tiny_set):
        s = subset_by_class(tiny_set, [0])
        assert len(s) == 1
        with pytest.raises(EmptyInputError):
            # class 0 only present once; removing it leaves nothing to subset
            subset_by_class(subset_by_class(tiny_set, [1]), [0])


class TestSamplePerClass:
    def test_none_returns_all_order_normalized(self):
        s = random_set(n=9, k=3)
        out = sample_per_class(s, None)
        assert len(out) == len(s)
        assert sorted(out.source_ids) == sorted(s.source_ids)
        # per class blocks in catalog order, each sorted by sourceId
        assert list(out.class_ids) == sorted(out.class_ids)

    def test_deterministic(self):
        s = random_set(n=30, k=3)
        a = sample_per_class(s, 3, seed=7)
        b = sample_per_class(s, 3, seed=7)
        assert a == b

    def test_seed_changes_selection(self):
        s = random_set(n=60, k=2)
        a = sample_per_class(s, 5, seed=1)
        b = sample_per_class(s, 5, seed=2)
        assert a.source_ids != b.source_ids

    def test_subset_and_cap(self):
        s = random_set(n=40, k=4)
        out = sample_per_class(s, 3, seed=0)
        assert set(out.source_ids) <= set(s.source_ids)
        for cid, count in out.class_counts().items():
            assert count == 3

    def test_short_class_warning(self):
        s = make_set(
            np.eye(4, dtype=np.float32)[:3],
            [0, 0, 1],
            names=["few", "fewer"],
        )
        out = sample_per_class(s, 10, seed=0)
        assert len(out) == 3
        assert any("ShortClass" in w for w in out.warnings)
        assert any("fewer" in w for w in out.warnings)

    def test_order_invariance(self):
        s = random_set(n=24, k=3, seed=5)
        perm = np.random.default_rng(1).permutation(len(s))
        shuffled = EmbeddingSet(
            vectors=s.vectors[perm],
            class_ids=s.class_ids[perm],
            source_ids=tuple(s.source_ids[i] for i in perm),
            catalog=s.catalog,
            split_tag=s.split_tag,
            encoder_tag=s.encoder_tag,
        )
        a = sample_per_class(s, 4, seed=9)
        b = sample_per_class(shuffled, 4, seed=9)
        assert a.source_ids == b.source_ids
        assert np.array_equal(a.vectors, b.vectors)

    def test_matches_documented_prng_oracle(self):
        s = random_set(n=100, k=2, seed=11)
        n_take = 10
        out = sample_per_class(s, n_take, seed=42)
        expected_ids = []
        for class_id in range(2):
            rows = sorted(
                [i for i in range(len(s)) if int(s.class_ids[i]) == class_id],
                key=lambda i: (s.source_ids[i], i),
            )
            rng = SplitMix64Oracle(derive_seed_oracle(42, class_id))
            picks = rng.sample_indices(len(rows), n_take)
            expected_ids.extend(sorted(s.source_ids[rows[i]] for i in picks))
        assert list(out.source_ids) == expected_ids

    def test_rejects_nonpositive(self):
        with pytest.raises(ValueError):
            sample_per_class(random_set(), 0)


class TestConcat:
    def test_catalog_mismatch(self):
        a = random_set(k=2)
        b = make_set(np.eye(4, dtype=np.float32), [0, 1, 2, 0], names=["x", "y", "z"])
        with pytest.raises(CatalogMismatchError):
            concat_sets([a, b])

    def test_union(self):
        a = random_set(n=6, k=2, split="train", seed=1)
        b = random_set(n=4, k=2, split="test", seed=2)
        u = concat_sets([a, b])
        assert len(u) == 10
        assert u.split_tag == "other"
