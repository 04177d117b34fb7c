from dataclasses import replace

import numpy as np
import pytest

from conftest import make_set
from oracles import brute_knn_winner
from protoclass import (
    CatalogMismatchError,
    DimMismatchError,
    EmptyInputError,
    EvalReport,
    LengthMismatchError,
    PipelineConfig,
    SyntheticSpec,
    crossval_2fold,
    fuse_sets,
    generate_synthetic,
    join_by_source_id,
    project_2d,
    sweep_fusion,
    sweep_k,
    sweep_prompts,
    sweep_prototype_samples,
    top1_accuracy,
)
from protoclass.evaluate import apply_direction, fit_direction
from protoclass.store import read_set, write_set


def synth(classes=5, dim=16, per_class=30, spread=0.15, seed=11):
    return generate_synthetic(
        SyntheticSpec(n_classes=classes, dim=dim, per_class=per_class, spread=spread, seed=seed)
    )


class TestTop1:
    def test_all_correct(self):
        assert top1_accuracy([1, 2, 3], [1, 2, 3]) == 100.0

    def test_none_correct(self):
        assert top1_accuracy([1, 2, 3], [2, 3, 1]) == 0.0

    def test_seven_of_ten(self):
        predicted = [0] * 7 + [1] * 3
        truth = [0] * 10
        assert top1_accuracy(predicted, truth) == 70.0

    def test_empty(self):
        with pytest.raises(EmptyInputError):
            top1_accuracy([], [])

    def test_length_mismatch(self):
        with pytest.raises(LengthMismatchError):
            top1_accuracy([1], [1, 2])


class TestCrossval:
    def test_same_set_both_roles(self):
        train, _ = synth()
        as_test = replace(train, split_tag="test")
        report = crossval_2fold(train, as_test, PipelineConfig())
        accs = [r.accuracy for r in report.rows]
        assert accs[0] == accs[1]

    def test_well_separated_clusters_reach_100(self):
        train, test = synth(spread=0.01)
        report = crossval_2fold(train, test, PipelineConfig())
        assert all(r.accuracy == 100.0 for r in report.rows)

    def test_swapping_inputs_swaps_rows_bit_identically(self):
        train, test = synth(spread=0.3, seed=5)
        fwd = crossval_2fold(train, test, PipelineConfig())
        rev = crossval_2fold(test, train, PipelineConfig())
        assert {(r.direction, r.accuracy, r.n_queries) for r in fwd.rows} == {
            (r.direction, r.accuracy, r.n_queries) for r in rev.rows
        }
        assert fwd.rows[0] == rev.rows[1]
        assert fwd.rows[1] == rev.rows[0]
        assert fwd.aggregates == rev.aggregates

    def test_aggregate_is_mean_and_half_range(self):
        train, test = synth(spread=0.4, seed=9)
        report = crossval_2fold(train, test, PipelineConfig(rule="knn", k=3))
        a, b = (r.accuracy for r in report.rows)
        agg = report.aggregates[0]
        assert agg.mean == pytest.approx((a + b) / 2, abs=1e-12)
        assert agg.half_range == pytest.approx(abs(a - b) / 2, abs=1e-12)
        report.validate()

    def test_catalog_mismatch(self):
        train, test = synth(classes=3)
        other_train, _ = synth(classes=4)
        with pytest.raises(CatalogMismatchError):
            crossval_2fold(train, other_train, PipelineConfig())

    def test_dim_mismatch(self):
        train, _ = synth(classes=3, dim=8)
        _, test = synth(classes=3, dim=16)
        with pytest.raises(DimMismatchError):
            crossval_2fold(train, test, PipelineConfig())


class TestFitHygiene:
    def test_artifacts_depend_on_gallery_only(self, tmp_path):
        train, test = synth(spread=0.2, seed=3)
        gallery_path = tmp_path / "train.emb1"
        query_path = tmp_path / "test.emb1"
        write_set(train, gallery_path)
        write_set(test, query_path)
        cfg = PipelineConfig(rule="npc", pca_dim=8)
        gallery = read_set(gallery_path)
        queries = read_set(query_path)
        fitted_before = fit_direction(gallery, cfg)
        # deleting the query split from disk between fit and evaluate must
        # change nothing: fit never touched it
        query_path.unlink()
        (tmp_path / "test.emb1.manifest.json").unlink()
        fitted_after = fit_direction(gallery, cfg)
        assert fitted_before.model == fitted_after.model
        assert np.array_equal(fitted_before.pca.components, fitted_after.pca.components)
        preds = apply_direction(fitted_after, queries, cfg)
        assert len(preds) == len(queries)

    def test_artifacts_identical_for_different_query_sets(self):
        train, test = synth(seed=21)
        _, other_test = synth(seed=22)
        cfg = PipelineConfig(rule="npc")
        assert fit_direction(train, cfg).model == fit_direction(train, cfg).model
        # queries never enter the fit signature at all; this documents it
        preds_a = apply_direction(fit_direction(train, cfg), test, cfg)
        preds_b = apply_direction(fit_direction(train, cfg), test, cfg)
        assert preds_a == preds_b

    def test_train_on_self_k1_is_perfect(self):
        train, _ = synth(spread=0.3, seed=8)
        cfg = PipelineConfig(rule="knn", k=1)
        fitted = fit_direction(train, cfg)
        preds = apply_direction(fitted, train, cfg)
        assert top1_accuracy([p.class_id for p in preds], train.class_ids) == 100.0


class TestSweepK:
    def test_row_and_column_structure(self):
        train, test = synth(per_class=20, spread=0.25)
        report = sweep_k(train, test, ks=(1, 3, 5, 7, 11))
        assert report.labels() == ["means", "k=1", "k=3", "k=5", "k=7", "k=11"]
        assert report.directions() == ["train->test", "test->train"]
        assert len(report.rows) == 6 * 2
        assert [a.label for a in report.aggregates] == report.labels()
        report.validate()

    def test_k1_matches_bruteforce_nearest_neighbor(self):
        train, test = synth(classes=4, per_class=12, spread=0.35, seed=17)
        report = sweep_k(train, test, ks=(1,))
        expected_hits = 0
        for i in range(len(test)):
            winner = brute_knn_winner(
                test.vectors[i], train.vectors, train.class_ids, train.source_ids, 1
            )
            expected_hits += winner == int(test.class_ids[i])
        expected = 100.0 * expected_hits / len(test)
        assert report.row("k=1", "train->test").accuracy == pytest.approx(expected, abs=1e-9)

    def test_too_large_k_becomes_status_row(self):
        # one record per class: any k above K exceeds the gallery
        train, test = synth(classes=2, per_class=1, spread=0.05)
        report = sweep_k(train, test, ks=(1, 3, 5, 7, 11))
        assert report.row("k=1", "train->test").status == "ok"
        for k in (3, 5, 7, 11):
            row = report.row(f"k={k}", "train->test")
            assert row.status == "KTooLarge"
            assert row.accuracy is None
        report.validate()

    def test_deterministic_re_run(self):
        train, test = synth(per_class=10)
        a = sweep_k(train, test, ks=(1, 3))
        b = sweep_k(train, test, ks=(1, 3))
        assert a.to_json_bytes() == b.to_json_bytes()

    def test_parallel_does_not_change_report(self):
        train, test = synth(per_class=10)
        a = sweep_k(train, test, ks=(1, 3), cfg=PipelineConfig(workers=1))
        b = sweep_k(train, test, ks=(1, 3), cfg=PipelineConfig(workers=4))
        assert a.to_json_bytes() == b.to_json_bytes()


class TestSweepSamples:
    def test_row_count(self):
        train, test = synth(per_class=25)
        report = sweep_prototype_samples(train, test, sizes=(20, 10, 5), seeds=(1, 2))
        assert len(report.rows) == 3 * 2
        report.validate()

    def test_size_above_class_size_equals_full(self):
        train, test = synth(per_class=15, spread=0.3, seed=4)
        report = sweep_prototype_samples(train, test, sizes=(None, 50), seeds=(1, 2, 3))
        for direction in report.directions():
            assert (
                report.row("50", direction).accuracy == report.row("full", direction).accuracy
            )

    def test_accuracy_trend_non_increasing(self):
        train, test = synth(classes=6, dim=12, per_class=80, spread=0.55, seed=31)
        report = sweep_prototype_samples(
            train, test, sizes=(50, 25, 20, 15, 10), seeds=(1, 2, 3, 4, 5)
        )
        means = [report.aggregate(str(s)).mean for s in (50, 25, 20, 15, 10)]
        for larger, smaller in zip(means, means[1:]):
            assert smaller <= larger + 0.5


class TestFusion:
    def test_join_requires_matching_source_ids(self):
        a, _ = synth(classes=3, per_class=4, seed=2)
        b = replace(a, source_ids=tuple(f"other-{i}" for i in range(len(a))))
        with pytest.raises(DimMismatchError, match="sourceIds"):
            join_by_source_id(a, b)

    def test_join_reports_label_disagreement(self):
        a, _ = synth(classes=3, per_class=4, seed=2)
        flipped = np.array(a.class_ids)
        flipped[0] = (flipped[0] + 1) % 3
        b = replace(a, class_ids=flipped)
        with pytest.raises(DimMismatchError, match="labels"):
            join_by_source_id(a, b)

    def test_fused_copy_matches_single_encoder(self):
        a_train, a_test = synth(classes=4, per_class=20, spread=0.4, seed=13)
        b_train = replace(a_train, encoder_tag="copy")
        b_test = replace(a_test, encoder_tag="copy")
        report = sweep_fusion(a_train, a_test, b_train, b_test, pca_dims=(None,))
        single = report.aggregate("synthetic").mean
        fused = report.aggregate("synthetic+copy").mean
        assert fused == pytest.approx(single, abs=1e-9)

    def test_full_rank_pca_preserves_accuracy(self):
        a_train, a_test = synth(classes=4, dim=10, per_class=25, spread=0.5, seed=6)
        b_train, b_test = synth(classes=4, dim=6, per_class=25, spread=0.5, seed=7)
        b_train = replace(b_train, source_ids=a_train.source_ids, class_ids=a_train.class_ids,
                          encoder_tag="enc2")
        b_test = replace(b_test, source_ids=a_test.source_ids, class_ids=a_test.class_ids,
                         encoder_tag="enc2")
        fused_dim = 16
        report = sweep_fusion(a_train, a_test, b_train, b_test, pca_dims=(None, fused_dim))
        plain = report.aggregate("synthetic+enc2").mean
        rotated = report.aggregate(f"synthetic+enc2+PCA({fused_dim})").mean
        assert rotated == pytest.approx(plain, abs=1e-6)

    def test_infeasible_pca_dim_becomes_status_row(self):
        a_train, a_test = synth(classes=3, dim=8, per_class=5, seed=1)
        report = sweep_fusion(a_train, a_test, a_train, a_test, pca_dims=(None, 1024))
        label = "synthetic+synthetic+PCA(1024)"
        for direction in ("train->test", "test->train"):
            assert report.row(label, direction).status == "InsufficientData"

    def test_complementary_encoders_beat_singles(self):
        wins = 0
        for seed in (1, 2, 3, 4, 5):
            rng = np.random.default_rng(seed)
            k, per_class, d = 4, 40, 8
            centers_a = np.eye(k, d)
            centers_a[2] = centers_a[3] = np.full(d, 1.0 / np.sqrt(d))  # A collapses 2 and 3
            centers_b = np.eye(k, d)[::-1]
            centers_b[0] = centers_b[1] = np.full(d, 1.0 / np.sqrt(d))  # B collapses 0 and 1

            def encode(centers, tag, split):
                rows, cids, sids = [], [], []
                for cid in range(k):
                    for j in range(per_class):
                        noisy = centers[cid] + 0.45 * rng.normal(size=d)
                        rows.append(noisy / np.linalg.norm(noisy))
                        cids.append(cid)
                        sids.append(f"{split}-{cid}-{j}")
                return make_set(np.array(rows, dtype=np.float32), cids,
                                names=[f"c{i}" for i in range(k)], split=split,
                                source_ids=sids, encoder=tag)

            a_train, a_test = encode(centers_a, "encA", "train"), encode(centers_a, "encA", "test")
            b_train, b_test = encode(centers_b, "encB", "train"), encode(centers_b, "encB", "test")
            b_train = replace(b_train, source_ids=a_train.source_ids)
            b_test = replace(b_test, source_ids=a_test.source_ids)
            report = sweep_fusion(a_train, a_test, b_train, b_test, pca_dims=(None,))
            fused = report.aggregate("encA+encB").mean
            singles = max(report.aggregate("encA").mean, report.aggregate("encB").mean)
            wins += fused >= singles
        assert wins >= 4

    def test_fuse_sets_output_dim(self):
        a, _ = synth(classes=3, dim=6, per_class=4)
        b = replace(a, encoder_tag="enc2")
        fused = fuse_sets(a, b)
        assert fused.dim == 12
        assert fused.encoder_tag == "synthetic+enc2"


class TestSweepPrompts:
    def _text_set(self, queries, prompts_per_class=3, seed=0, offset=0.0):
        rng = np.random.default_rng(seed)
        k = len(queries.catalog)
        dim = queries.dim
        rows, cids, sids = [], [], []
        centers = {}
        for cid in range(k):
            members = queries.vectors[queries.class_ids == cid]
            centers[cid] = members.mean(axis=0)
        for cid in range(k):
            for j in range(prompts_per_class):
                noisy = centers[cid] + offset + 0.05 * rng.normal(size=dim)
                rows.append(noisy / np.linalg.norm(noisy))
                cids.append(cid)
                sids.append(f"prompt-{cid}-{j}")
        return make_set(np.array(rows, dtype=np.float32), cids,
                        names=list(queries.catalog.names), split="other", source_ids=sids)

    def test_table_shape_and_union(self):
        train, test = synth(classes=3, per_class=10, spread=0.1)
        banks = {
            "baseline": self._text_set(train, prompts_per_class=1),
            "multiple": self._text_set(train, prompts_per_class=5),
        }
        report = sweep_prompts(banks, train, test)
        assert report.labels() == ["baseline", "multiple"]
        assert report.directions() == ["test", "train", "all"]
        assert report.aggregates == ()
        all_row = report.row("baseline", "all")
        assert all_row.n_queries == len(train) + len(test)

    def test_good_prompts_classify_separable_data(self):
        train, test = synth(classes=3, per_class=10, spread=0.02, seed=3)
        report = sweep_prompts({"baseline": self._text_set(train)}, train, test)
        assert report.row("baseline", "all").accuracy == 100.0


class TestProject2d:
    def test_collinear_inputs_flatten_to_one_axis(self):
        t = np.linspace(1.0, 3.0, 7)
        vectors = np.stack([t, t, t], axis=1).astype(np.float32)
        s = make_set(vectors, [0] * 7, names=["line"])
        projection = project_2d(s)
        assert np.allclose(projection.coords[:, 1], 0.0, atol=1e-5)

    def test_centroid_is_mean_of_projected_points(self):
        train, _ = synth(classes=3, per_class=8, spread=0.2)
        projection = project_2d(train)
        for cid, (cx, cy) in projection.centroids.items():
            mask = np.array([c == cid for c in projection.class_ids])
            assert cx == pytest.approx(projection.coords[mask, 0].mean(), abs=1e-5)
            assert cy == pytest.approx(projection.coords[mask, 1].mean(), abs=1e-5)

    def test_clusters_separate(self):
        train, _ = synth(classes=3, per_class=25, spread=0.05, seed=14)
        projection = project_2d(train)
        centroids = np.array([projection.centroids[c] for c in sorted(projection.centroids)])
        spreads = []
        for cid in sorted(projection.centroids):
            mask = np.array([c == cid for c in projection.class_ids])
            spreads.append(
                np.linalg.norm(projection.coords[mask] - centroids[cid], axis=1).mean()
            )
        min_between = min(
            np.linalg.norm(centroids[i] - centroids[j])
            for i in range(3)
            for j in range(i + 1, 3)
        )
        assert min_between > np.mean(spreads)

    def test_csv_layout(self):
        train, _ = synth(classes=2, per_class=2, spread=0.1)
        text = project_2d(train).to_csv()
        lines = text.strip().split("\n")
        assert lines[0] == "sourceId,classId,x,y"
        assert len(lines) == 1 + len(train) + 2
        assert lines[-2].startswith("centroid:0,")
        assert lines[-1].startswith("centroid:1,")


class TestReportSerialization:
    def test_json_round_trip(self):
        train, test = synth(per_class=8)
        report = sweep_k(train, test, ks=(1, 3))
        clone = EvalReport.from_json_dict(
            __import__("json").loads(report.to_json_bytes().decode())
        )
        assert clone == report

    def test_text_render_contains_rows(self):
        train, test = synth(per_class=8)
        report = crossval_2fold(train, test, PipelineConfig())
        text = report.render_text()
        assert "train->test" in text
        assert "npc" in text
        assert "+/-" in text
