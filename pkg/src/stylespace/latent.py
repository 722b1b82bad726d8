"""Interpretation of the reduced latent space.

PCA to 2-D, per-feature plane regression f(x,y) = a*x + b*y + c, absolute
Pearson correlation (APCC) between plane predictions and ground truth,
gradient directions, correlation-based feature selection, and trend-map
export (SVG figure + CSV data).
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .table import FeatureTable, TableError


class LatentError(ValueError):
    pass


@dataclass
class EmbeddingSet:
    ids: list[str]
    vectors: np.ndarray  # N x D

    def __post_init__(self):
        self.vectors = np.asarray(self.vectors, dtype=np.float64)
        if self.vectors.ndim != 2 or self.vectors.shape[0] != len(self.ids):
            raise LatentError("vectors must be N x D with one row per id")
        if self.vectors.shape[0] < 3:
            raise LatentError("need at least 3 embeddings")
        if not np.all(np.isfinite(self.vectors)):
            raise LatentError("non-finite embedding values")
        if len(set(self.ids)) != len(self.ids):
            raise LatentError("duplicate embedding ids")

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]


@dataclass(frozen=True)
class Projection:
    mean: np.ndarray               # D
    components: np.ndarray         # 2 x D, orthonormal rows
    explained_variance: np.ndarray  # 2, non-increasing

    def __post_init__(self):
        gram = self.components @ self.components.T
        if not np.allclose(gram, np.eye(2), atol=1e-9):
            raise LatentError("components must be orthonormal")
        if self.explained_variance[0] < self.explained_variance[1]:
            raise LatentError("explained_variance must be non-increasing")


def fit_pca(embeddings: EmbeddingSet) -> Projection:
    """Top-2 principal directions of the sample covariance.

    Sign convention: the largest-magnitude entry of each component is
    positive, so repeated fits are bit-reproducible.
    """
    x = embeddings.vectors
    mean = x.mean(axis=0)
    xc = x - mean
    cov = xc.T @ xc / (len(x) - 1)
    eigvals, eigvecs = np.linalg.eigh(cov)
    order = np.argsort(eigvals)[::-1]
    eigvals = eigvals[order]
    eigvecs = eigvecs[:, order]
    total = eigvals.sum()
    if eigvals[1] <= max(total, 1.0) * 1e-12:
        raise LatentError("degenerate embedding set: covariance rank < 2")
    components = eigvecs[:, :2].T.copy()
    for row in components:
        if row[np.argmax(np.abs(row))] < 0:
            row *= -1
    return Projection(mean=mean, components=components,
                      explained_variance=eigvals[:2].copy())


def project(p: Projection, v: np.ndarray) -> np.ndarray:
    """Map D-vectors (or an N x D matrix) to 2-D coordinates."""
    v = np.asarray(v, dtype=np.float64)
    if v.shape[-1] != p.mean.shape[0]:
        raise LatentError(f"dimension mismatch: expected {p.mean.shape[0]}")
    return (v - p.mean) @ p.components.T


def inverse_project(p: Projection, q: np.ndarray) -> np.ndarray:
    """Map 2-D coordinates back into the D-dimensional space."""
    q = np.asarray(q, dtype=np.float64)
    if q.shape[-1] != 2:
        raise LatentError("expected 2-D coordinates")
    return p.mean + q @ p.components


def save_projection(p: Projection, path: str | Path) -> None:
    doc = {
        "mean": p.mean.tolist(),
        "components": p.components.tolist(),
        "explained_variance": p.explained_variance.tolist(),
    }
    Path(path).write_text(json.dumps(doc, indent=2) + "\n")


def load_projection(path: str | Path) -> Projection:
    doc = json.loads(Path(path).read_text())
    return Projection(
        mean=np.asarray(doc["mean"], dtype=np.float64),
        components=np.asarray(doc["components"], dtype=np.float64),
        explained_variance=np.asarray(doc["explained_variance"], dtype=np.float64),
    )


def load_embeddings(path: str | Path) -> EmbeddingSet:
    """Read an embeddings CSV with header id,e0,...,e{D-1}."""
    path = Path(path)
    with open(path, newline="", encoding="utf-8") as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if header is None or header[0] != "id":
            raise LatentError(f"{path}: expected header starting with 'id'")
        ids, rows = [], []
        for row in reader:
            if not row:
                continue
            ids.append(row[0])
            rows.append([float(c) for c in row[1:]])
    return EmbeddingSet(ids=ids, vectors=np.asarray(rows))


def save_embeddings(e: EmbeddingSet, path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(["id"] + [f"e{k}" for k in range(e.dim)])
        for uid, vec in zip(e.ids, e.vectors):
            writer.writerow([uid] + [repr(float(v)) for v in vec])


# ---------------------------------------------------------------------------
# Trend models

@dataclass(frozen=True)
class TrendModel:
    name: str
    a: float
    b: float
    c: float
    apcc: float          # NaN when flagged no-trend
    n: int

    @property
    def no_trend(self) -> bool:
        return not np.isfinite(self.apcc)

    @property
    def gradient(self) -> np.ndarray:
        g = np.array([self.a, self.b])
        norm = np.linalg.norm(g)
        return g / norm if norm > 0 else g

    def predict(self, points: np.ndarray) -> np.ndarray:
        points = np.asarray(points, dtype=np.float64)
        return self.a * points[..., 0] + self.b * points[..., 1] + self.c


def pearson(x: np.ndarray, y: np.ndarray) -> float:
    """Pearson correlation; NaN when fewer than 3 pairs or zero variance."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if len(x) < 3:
        return float("nan")
    xc = x - x.mean()
    yc = y - y.mean()
    denom = np.sqrt(np.dot(xc, xc) * np.dot(yc, yc))
    if denom == 0:
        return float("nan")
    return float(np.dot(xc, yc) / denom)


def fit_trend(points: np.ndarray, values: np.ndarray, name: str = "") -> TrendModel:
    """Least-squares plane through (x, y, value) plus its APCC.

    Pairs with missing values are dropped; constant values yield a
    no-trend model (NaN APCC) rather than a spurious correlation.
    """
    points = np.asarray(points, dtype=np.float64)
    values = np.asarray(values, dtype=np.float64)
    keep = np.isfinite(values) & np.all(np.isfinite(points), axis=1)
    points, values = points[keep], values[keep]
    if len(values) < 3:
        raise LatentError(f"{name or 'trend'}: need at least 3 points")
    design = np.column_stack([points, np.ones(len(points))])
    if np.linalg.matrix_rank(design) < 3:
        raise LatentError(f"{name or 'trend'}: rank-deficient design (collinear points)")
    if np.ptp(values) == 0:
        # constant target: any correlation would be float noise
        return TrendModel(name=name, a=0.0, b=0.0, c=float(values[0]),
                          apcc=float("nan"), n=len(values))
    coef, *_ = np.linalg.lstsq(design, values, rcond=None)
    a, b, c = (float(v) for v in coef)
    pred = design @ coef
    r = pearson(pred, values)
    apcc = abs(r) if np.isfinite(r) else float("nan")
    return TrendModel(name=name, a=a, b=b, c=c, apcc=apcc, n=len(values))


def cross_validated_apcc(points: np.ndarray, values: np.ndarray, folds: int = 5,
                         seed: int = 0) -> float:
    """APCC of out-of-fold plane predictions (an extension; the in-sample
    APCC of fit_trend is the headline number)."""
    points = np.asarray(points, dtype=np.float64)
    values = np.asarray(values, dtype=np.float64)
    keep = np.isfinite(values) & np.all(np.isfinite(points), axis=1)
    points, values = points[keep], values[keep]
    n = len(values)
    if n < folds * 3:
        return float("nan")
    rng = np.random.default_rng(seed)
    perm = rng.permutation(n)
    pred = np.full(n, np.nan)
    for fold in range(folds):
        test = perm[fold::folds]
        train = np.setdiff1d(perm, test)
        design = np.column_stack([points[train], np.ones(len(train))])
        coef, *_ = np.linalg.lstsq(design, values[train], rcond=None)
        pred[test] = np.column_stack([points[test], np.ones(len(test))]) @ coef
    r = pearson(pred, values)
    return abs(r) if np.isfinite(r) else float("nan")


def _join(embeddings: EmbeddingSet, features: FeatureTable):
    # sorted join so results do not depend on input row order
    common = sorted(uid for uid in embeddings.ids if uid in set(features.ids))
    if not common:
        raise LatentError("empty join between embeddings and feature table")
    eidx = {uid: i for i, uid in enumerate(embeddings.ids)}
    fidx = {uid: i for i, uid in enumerate(features.ids)}
    erows = [eidx[u] for u in common]
    frows = [fidx[u] for u in common]
    return embeddings.vectors[erows], features.values[frows]


def fit_all_trends(embeddings: EmbeddingSet, projection: Projection,
                   features: FeatureTable) -> list[TrendModel]:
    """One trend per feature column, sorted by APCC decreasing.

    No-trend models sort last; ties broken by feature name.
    """
    vectors, fvalues = _join(embeddings, features)
    points = project(projection, vectors)
    trends = []
    for j, name in enumerate(features.names):
        trends.append(fit_trend(points, fvalues[:, j], name=name))
    key = lambda t: (-(t.apcc if np.isfinite(t.apcc) else -1.0), t.name)
    return sorted(trends, key=key)


# ---------------------------------------------------------------------------
# Feature selection

@dataclass(frozen=True)
class SelectionResult:
    kept: list[str]                     # decreasing prediction APCC
    eliminated: list[dict]              # {name, reason, detail}

    @property
    def all_names(self) -> set[str]:
        return set(self.kept) | {e["name"] for e in self.eliminated}


def select_features(trends: list[TrendModel], features: FeatureTable,
                    redundancy_cutoff: float = 0.8,
                    prediction_cutoff: float = 0.3) -> SelectionResult:
    """Correlation-filter feature selection.

    Walk features by decreasing prediction APCC; a candidate whose raw
    values correlate (|Pearson| > redundancy_cutoff) with any already-kept
    feature is eliminated as redundant; finally features at or below
    prediction_cutoff are dropped as weak.
    """
    if not trends:
        raise LatentError("empty trend list")
    key = lambda t: (-(t.apcc if np.isfinite(t.apcc) else -1.0), t.name)
    ordered = sorted(trends, key=key)
    kept: list[TrendModel] = []
    eliminated: list[dict] = []
    for t in ordered:
        col = features.column(t.name)
        redundant_with = None
        worst = 0.0
        for k in kept:
            r = pearson(*_pairwise(col, features.column(k.name)))
            inter = abs(r) if np.isfinite(r) else 0.0
            if inter > redundancy_cutoff and inter > worst:
                worst = inter
                redundant_with = k.name
        if redundant_with is not None:
            eliminated.append({"name": t.name, "reason": "redundant",
                               "with": redundant_with, "inter_apcc": worst})
        else:
            kept.append(t)
    final = []
    for t in kept:
        if np.isfinite(t.apcc) and t.apcc > prediction_cutoff:
            final.append(t)
        else:
            eliminated.append({"name": t.name, "reason": "weak", "apcc": t.apcc})
    return SelectionResult(kept=[t.name for t in final], eliminated=eliminated)


def _pairwise(x: np.ndarray, y: np.ndarray):
    keep = np.isfinite(x) & np.isfinite(y)
    return x[keep], y[keep]


# ---------------------------------------------------------------------------
# Trend map export

def export_trend_map(projection: Projection, embeddings: EmbeddingSet,
                     trends: list[TrendModel], color_feature: str,
                     features: FeatureTable, path: str | Path) -> tuple[Path, Path]:
    """Scatter of projected utterances colored by one feature, with one
    gradient arrow per trend from the centroid. Writes <path>.svg and
    <path>.csv; returns both paths."""
    by_name = {t.name: t for t in trends}
    if color_feature not in by_name:
        raise LatentError(f"unknown feature: {color_feature}")
    points = project(projection, embeddings.vectors)
    fidx = {uid: i for i, uid in enumerate(features.ids)}
    color = np.array([
        features.column(color_feature)[fidx[u]] if u in fidx else np.nan
        for u in embeddings.ids
    ])
    centroid = points.mean(axis=0)
    span = 0.25 * max(np.ptp(points[:, 0]), np.ptp(points[:, 1]), 1e-12)

    base = Path(path)
    svg_path = base.with_suffix(".svg")
    csv_path = base.with_suffix(".csv")

    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(7, 6))
    sc = ax.scatter(points[:, 0], points[:, 1], c=color, s=12, cmap="viridis")
    fig.colorbar(sc, ax=ax, label=color_feature)
    for t in trends:
        if t.no_trend:
            continue
        g = t.gradient * span
        ax.annotate("", xy=(centroid[0] + g[0], centroid[1] + g[1]),
                    xytext=tuple(centroid),
                    arrowprops=dict(arrowstyle="->", color="tab:blue"))
        ax.text(centroid[0] + 1.1 * g[0], centroid[1] + 1.1 * g[1], t.name,
                fontsize=7, color="tab:blue")
    ax.set_xlabel("latent x")
    ax.set_ylabel("latent y")
    ax.set_title(f"Reduced latent space, colored by {color_feature}")
    fig.tight_layout()
    fig.savefig(svg_path)
    plt.close(fig)

    with open(csv_path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(["record", "id_or_name", "x", "y", "value_or_apcc",
                         "a", "b", "c"])
        for uid, (x, y), v in zip(embeddings.ids, points, color):
            writer.writerow(["point", uid, repr(float(x)), repr(float(y)),
                             "" if np.isnan(v) else repr(float(v)), "", "", ""])
        for t in trends:
            gx, gy = t.gradient
            writer.writerow(["arrow", t.name, repr(float(gx)), repr(float(gy)),
                             "" if t.no_trend else repr(float(t.apcc)),
                             repr(t.a), repr(t.b), repr(t.c)])
    return svg_path, csv_path
