import csv

import numpy as np
import pytest

from stylespace.latent import (EmbeddingSet, LatentError, Projection,
                               cross_validated_apcc, export_trend_map,
                               fit_all_trends, fit_pca, fit_trend,
                               inverse_project, load_embeddings,
                               load_projection, pearson, project,
                               save_embeddings, save_projection,
                               select_features)
from stylespace.table import FeatureTable

from conftest import planted_embeddings


def pearson_oracle(x, y):
    """Textbook formula, independent of the library implementation."""
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    n = len(x)
    num = n * np.sum(x * y) - np.sum(x) * np.sum(y)
    den = np.sqrt(n * np.sum(x * x) - np.sum(x) ** 2) * \
        np.sqrt(n * np.sum(y * y) - np.sum(y) ** 2)
    return num / den


def power_iteration_components(vectors, k=2, iters=5000, seed=3):
    """Brute-force eigenvectors of the sample covariance by power iteration
    with deflation."""
    x = vectors - vectors.mean(axis=0)
    cov = x.T @ x / (len(x) - 1)
    rng = np.random.default_rng(seed)
    comps = []
    for _ in range(k):
        v = rng.normal(size=cov.shape[0])
        for _ in range(iters):
            v = cov @ v
            v /= np.linalg.norm(v)
        comps.append(v)
        cov = cov - np.outer(v, v) * (v @ cov @ v)
    return np.array(comps)


class TestPca:
    def test_rank2_data_captures_all_variance(self):
        e, _, _ = planted_embeddings(n=60, seed=1, spread=(2.0, 1.0))
        # strip the small noise: re-plant exactly rank-2 data
        rng = np.random.default_rng(1)
        basis, _ = np.linalg.qr(rng.normal(size=(8, 2)))
        coords = rng.normal(size=(60, 2)) * [2.0, 1.0]
        e = EmbeddingSet(ids=e.ids, vectors=coords @ basis.T)
        p = fit_pca(e)
        total = np.var(e.vectors - e.vectors.mean(0), axis=0, ddof=1).sum()
        assert p.explained_variance.sum() == pytest.approx(total, abs=1e-9)

    def test_components_match_power_iteration_oracle(self, rng):
        vectors = rng.normal(size=(50, 8)) * np.linspace(3, 0.3, 8)
        e = EmbeddingSet(ids=[f"u{i}" for i in range(50)], vectors=vectors)
        p = fit_pca(e)
        oracle = power_iteration_components(vectors)
        for fitted, expected in zip(p.components, oracle):
            sign = np.sign(fitted @ expected)
            assert np.allclose(fitted, sign * expected, atol=1e-6)

    def test_degenerate_set_rejected(self):
        vectors = np.outer(np.arange(10.0), np.ones(8))  # rank 1
        with pytest.raises(LatentError, match="degenerate"):
            fit_pca(EmbeddingSet(ids=[f"u{i}" for i in range(10)], vectors=vectors))

    def test_sign_convention(self, rng):
        e = EmbeddingSet(ids=[f"u{i}" for i in range(30)],
                         vectors=rng.normal(size=(30, 8)))
        p = fit_pca(e)
        for row in p.components:
            assert row[np.argmax(np.abs(row))] > 0

    def test_rank2_pairwise_distances_preserved(self):
        rng = np.random.default_rng(5)
        basis, _ = np.linalg.qr(rng.normal(size=(8, 2)))
        coords = rng.normal(size=(40, 2)) * [3.0, 1.0]
        e = EmbeddingSet(ids=[f"u{i}" for i in range(40)],
                         vectors=coords @ basis.T)
        q = project(fit_pca(e), e.vectors)
        for i in range(0, 40, 7):
            for j in range(i + 1, 40, 7):
                d_high = np.linalg.norm(e.vectors[i] - e.vectors[j])
                d_low = np.linalg.norm(q[i] - q[j])
                assert d_low == pytest.approx(d_high, abs=1e-9)


class TestProjection:
    def test_mean_maps_to_origin(self, rng):
        e = EmbeddingSet(ids=[f"u{i}" for i in range(20)],
                         vectors=rng.normal(size=(20, 8)))
        p = fit_pca(e)
        assert np.allclose(project(p, p.mean), 0.0, atol=1e-12)

    def test_origin_maps_to_mean(self, rng):
        e = EmbeddingSet(ids=[f"u{i}" for i in range(20)],
                         vectors=rng.normal(size=(20, 8)))
        p = fit_pca(e)
        assert np.allclose(inverse_project(p, np.zeros(2)), p.mean)

    def test_roundtrip_2d(self, rng):
        e = EmbeddingSet(ids=[f"u{i}" for i in range(20)],
                         vectors=rng.normal(size=(20, 8)))
        p = fit_pca(e)
        q = rng.normal(size=(1000, 2))
        back = project(p, inverse_project(p, q))
        assert np.max(np.abs(back - q)) < 1e-9

    def test_project_idempotent_through_inverse(self, rng):
        e = EmbeddingSet(ids=[f"u{i}" for i in range(20)],
                         vectors=rng.normal(size=(20, 8)))
        p = fit_pca(e)
        q1 = project(p, e.vectors)
        q2 = project(p, inverse_project(p, q1))
        assert np.allclose(q1, q2, atol=1e-9)

    def test_dimension_mismatch(self, rng):
        e = EmbeddingSet(ids=[f"u{i}" for i in range(20)],
                         vectors=rng.normal(size=(20, 8)))
        p = fit_pca(e)
        with pytest.raises(LatentError, match="dimension mismatch"):
            project(p, np.zeros(5))

    def test_persistence_roundtrip(self, rng, tmp_path):
        e = EmbeddingSet(ids=[f"u{i}" for i in range(20)],
                         vectors=rng.normal(size=(20, 8)))
        p = fit_pca(e)
        save_projection(p, tmp_path / "p.json")
        p2 = load_projection(tmp_path / "p.json")
        assert np.array_equal(p.mean, p2.mean)
        assert np.array_equal(p.components, p2.components)

    def test_embeddings_csv_roundtrip(self, rng, tmp_path):
        e = EmbeddingSet(ids=[f"u{i}" for i in range(5)],
                         vectors=rng.normal(size=(5, 8)))
        save_embeddings(e, tmp_path / "e.csv")
        e2 = load_embeddings(tmp_path / "e.csv")
        assert e2.ids == e.ids
        assert np.array_equal(e2.vectors, e.vectors)


class TestTrend:
    def test_exact_plane(self):
        points = np.array([[0.0, 0], [1, 0], [0, 1], [1, 1]])
        values = np.array([1.0, 3.0, 5.0, 7.0])
        t = fit_trend(points, values, "f")
        assert (t.a, t.b, t.c) == pytest.approx((2.0, 4.0, 1.0), abs=1e-9)
        assert t.apcc == pytest.approx(1.0, abs=1e-9)
        assert np.allclose(t.gradient, np.array([2.0, 4.0]) / np.hypot(2, 4))

    def test_apcc_matches_pearson_oracle(self, rng):
        points = rng.normal(size=(100, 2))
        values = 1.5 * points[:, 0] - 0.7 * points[:, 1] + rng.normal(size=100)
        t = fit_trend(points, values, "f")
        pred = t.predict(points)
        assert t.apcc == pytest.approx(abs(pearson_oracle(pred, values)), abs=1e-9)

    def test_negated_values_flip_gradient_keep_apcc(self, rng):
        points = rng.normal(size=(50, 2))
        values = points[:, 0] + 0.5 * rng.normal(size=50)
        t1 = fit_trend(points, values, "f")
        t2 = fit_trend(points, -values, "f")
        assert np.allclose(t1.gradient, -t2.gradient, atol=1e-9)
        assert t1.apcc == pytest.approx(t2.apcc, abs=1e-12)

    def test_constant_values_no_trend(self, rng):
        t = fit_trend(rng.normal(size=(10, 2)), np.full(10, 4.2), "f")
        assert t.no_trend

    def test_collinear_points_rejected(self):
        points = np.column_stack([np.arange(5.0), 2 * np.arange(5.0)])
        with pytest.raises(LatentError, match="rank-deficient"):
            fit_trend(points, np.arange(5.0), "f")

    def test_apcc_affine_invariance(self, rng):
        points = rng.normal(size=(60, 2))
        values = points @ [1.0, 2.0] + rng.normal(size=60)
        base = fit_trend(points, values, "f").apcc
        for alpha, beta in [(2.5, -3.0), (-0.5, 10.0)]:
            t = fit_trend(points, alpha * values + beta, "f")
            assert t.apcc == pytest.approx(base, abs=1e-9)

    def test_residual_orthogonality(self, rng):
        points = rng.normal(size=(80, 2))
        values = points @ [0.3, -1.2] + rng.normal(size=80)
        t = fit_trend(points, values, "f")
        resid = values - t.predict(points)
        design = np.column_stack([points, np.ones(80)])
        assert np.max(np.abs(design.T @ resid)) < 1e-8

    def test_missing_values_dropped(self, rng):
        points = rng.normal(size=(20, 2))
        values = points @ [1.0, 1.0]
        values[3] = np.nan
        t = fit_trend(points, values, "f")
        assert t.n == 19
        assert t.apcc == pytest.approx(1.0, abs=1e-9)

    def test_cross_validated_apcc_close_for_strong_trend(self, rng):
        points = rng.normal(size=(200, 2))
        values = points @ [2.0, 1.0] + 0.1 * rng.normal(size=200)
        t = fit_trend(points, values, "f")
        cv = cross_validated_apcc(points, values)
        assert abs(cv - t.apcc) < 0.02


class TestAllTrends:
    def make_inputs(self, rng, n=50):
        e = EmbeddingSet(ids=[f"u{i}" for i in range(n)],
                         vectors=rng.normal(size=(n, 8)))
        p = fit_pca(e)
        points = project(p, e.vectors)
        values = np.column_stack([
            points @ [1.0, 0.0],                  # planar
            points @ [0.0, 2.0],                  # planar
            points @ [1.0, 1.0] + rng.normal(size=n) * 2,
            rng.normal(size=n),
            rng.normal(size=n),
        ])
        t = FeatureTable(ids=e.ids, names=[f"f{j}" for j in range(5)],
                         values=values)
        return e, p, t

    def test_planar_features_rank_first(self, rng):
        e, p, t = self.make_inputs(rng)
        trends = fit_all_trends(e, p, t)
        assert {trends[0].name, trends[1].name} == {"f0", "f1"}
        assert trends[0].apcc == pytest.approx(1.0, abs=1e-9)
        assert trends[1].apcc == pytest.approx(1.0, abs=1e-9)
        apccs = [tr.apcc for tr in trends]
        assert apccs == sorted(apccs, reverse=True)

    def test_row_order_invariance(self, rng):
        e, p, t = self.make_inputs(rng)
        perm = rng.permutation(len(e.ids))
        e2 = EmbeddingSet(ids=[e.ids[i] for i in perm], vectors=e.vectors[perm])
        trends1 = fit_all_trends(e, p, t)
        trends2 = fit_all_trends(e2, p, t)
        for a, b in zip(trends1, trends2):
            assert a.name == b.name
            assert a.apcc == pytest.approx(b.apcc, abs=1e-9)

    def test_empty_join_rejected(self, rng):
        e, p, t = self.make_inputs(rng)
        t2 = FeatureTable(ids=[f"x{i}" for i in range(len(t.ids))],
                          names=t.names, values=t.values)
        with pytest.raises(LatentError, match="empty join"):
            fit_all_trends(e, p, t2)


def selection_oracle(trends, features, redundancy_cutoff=0.8, prediction_cutoff=0.3):
    """Direct transcription of the 4-step filter: sort by APCC decreasing,
    eliminate candidates over-correlated with already-kept ones, then keep
    only those above the prediction cutoff."""
    apcc = {t.name: (t.apcc if np.isfinite(t.apcc) else -1.0) for t in trends}
    ordered = sorted(apcc, key=lambda n: (-apcc[n], n))
    kept = []
    for name in ordered:
        col = features.column(name)
        inter = []
        for prev in kept:
            pcol = features.column(prev)
            ok = np.isfinite(col) & np.isfinite(pcol)
            r = pearson_oracle(col[ok], pcol[ok])
            inter.append(abs(r) if np.isfinite(r) else 0.0)
        if inter and max(inter) > redundancy_cutoff:
            continue
        kept.append(name)
    return [n for n in kept if apcc[n] > prediction_cutoff]


class TestSelection:
    def test_redundant_pair(self, rng):
        points = rng.normal(size=(50, 2))
        base = points @ [1.0, 0.5] + 0.3 * rng.normal(size=50)
        values = np.column_stack([base, 2 * base + 1 + 0.1 * rng.normal(size=50)])
        t = FeatureTable(ids=[f"u{i}" for i in range(50)],
                         names=["strong", "copy"], values=values)
        trends = [fit_trend(points, values[:, 0], "strong"),
                  fit_trend(points, values[:, 1], "copy")]
        result = select_features(trends, t)
        assert result.kept == [max(trends, key=lambda x: x.apcc).name]
        assert result.eliminated[0]["reason"] == "redundant"

    def test_weak_feature_eliminated(self, rng):
        points = rng.normal(size=(200, 2))
        values = rng.normal(size=(200, 1))  # no relation to the plane
        t = FeatureTable(ids=[f"u{i}" for i in range(200)],
                         names=["weak"], values=values)
        trends = [fit_trend(points, values[:, 0], "weak")]
        result = select_features(trends, t)
        assert result.kept == []
        assert result.eliminated[0]["reason"] == "weak"

    @pytest.mark.parametrize("seed", range(5))
    def test_matches_bruteforce_oracle(self, seed):
        rng = np.random.default_rng(seed)
        n, m = 80, 12
        points = rng.normal(size=(n, 2))
        mix = rng.normal(size=(3, m))
        latentf = np.column_stack([points @ [1.0, 0.2], points @ [-0.3, 1.0],
                                   rng.normal(size=n)])
        values = latentf @ mix + 0.5 * rng.normal(size=(n, m))
        t = FeatureTable(ids=[f"u{i}" for i in range(n)],
                         names=[f"f{j:02d}" for j in range(m)], values=values)
        trends = [fit_trend(points, values[:, j], t.names[j]) for j in range(m)]
        result = select_features(trends, t)
        assert result.kept == selection_oracle(trends, t)
        assert result.all_names == set(t.names)

    def test_input_order_stability(self, rng):
        points = rng.normal(size=(60, 2))
        values = np.column_stack([points @ [1.0, 0.0] + 0.2 * rng.normal(size=60),
                                  points @ [0.0, 1.0] + 0.5 * rng.normal(size=60),
                                  rng.normal(size=60)])
        t = FeatureTable(ids=[f"u{i}" for i in range(60)],
                         names=["a", "b", "c"], values=values)
        trends = [fit_trend(points, values[:, j], t.names[j]) for j in range(3)]
        r1 = select_features(trends, t)
        r2 = select_features(trends[::-1], t)
        assert r1.kept == r2.kept

    def test_empty_trends_rejected(self, rng):
        t = FeatureTable(ids=["u0"], names=["f"], values=np.ones((1, 1)))
        with pytest.raises(LatentError, match="empty trend list"):
            select_features([], t)


class TestTrendMap:
    def test_counts_and_roundtrip(self, rng, tmp_path):
        e = EmbeddingSet(ids=[f"u{i}" for i in range(10)],
                         vectors=rng.normal(size=(10, 8)))
        p = fit_pca(e)
        points = project(p, e.vectors)
        values = (points @ [1.0, 0.0]).reshape(-1, 1)
        t = FeatureTable(ids=e.ids, names=["horiz"], values=values)
        trends = fit_all_trends(e, p, t)
        svg, data = export_trend_map(p, e, trends, "horiz", t, tmp_path / "map")
        assert svg.exists() and svg.suffix == ".svg"
        with open(data) as f:
            rows = list(csv.DictReader(f))
        points_rows = [r for r in rows if r["record"] == "point"]
        arrow_rows = [r for r in rows if r["record"] == "arrow"]
        assert len(points_rows) == 10
        assert len(arrow_rows) == 1
        # horizontal plane -> unit arrow along +x (up to PCA sign)
        gx, gy = float(arrow_rows[0]["x"]), float(arrow_rows[0]["y"])
        assert abs(abs(gx) - 1.0) < 1e-9 and abs(gy) < 1e-9
        assert float(arrow_rows[0]["value_or_apcc"]) == pytest.approx(
            trends[0].apcc, abs=1e-12)
        assert float(arrow_rows[0]["a"]) == trends[0].a

    def test_unknown_feature(self, rng, tmp_path):
        e = EmbeddingSet(ids=[f"u{i}" for i in range(10)],
                         vectors=rng.normal(size=(10, 8)))
        p = fit_pca(e)
        t = FeatureTable(ids=e.ids, names=["f"], values=np.ones((10, 1)))
        trends = fit_all_trends(e, p, t)
        with pytest.raises(LatentError, match="unknown feature"):
            export_trend_map(p, e, trends, "nope", t, tmp_path / "map")


def test_pearson_degenerate_cases():
    assert np.isnan(pearson(np.ones(5), np.arange(5.0)))
    assert np.isnan(pearson(np.arange(2.0), np.arange(2.0)))
    assert pearson(np.arange(5.0), 2 * np.arange(5.0)) == pytest.approx(1.0)
