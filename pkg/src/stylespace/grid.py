"""Experiment geometry and scoring.

The sampling grid is the smallest rectangle containing the projected
dataset, discretized into a resolution x resolution lattice with a 5x5
set of anchor points at cell centers. Answers are scored as Euclidean
distance in grid units (each axis normalized by its anchor spacing).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import stats

from .latent import EmbeddingSet, Projection, inverse_project, project

ANCHOR_SIDE = 5


class ExperimentError(ValueError):
    pass


@dataclass(frozen=True)
class GridSpec:
    bounds: tuple        # (x_min, x_max, y_min, y_max)
    resolution: int
    projection: Projection

    def __post_init__(self):
        x_min, x_max, y_min, y_max = self.bounds
        if not (x_min < x_max and y_min < y_max):
            raise ExperimentError("degenerate bounds")
        if self.resolution < 2:
            raise ExperimentError("resolution must be at least 2")

    @property
    def unit(self) -> float:
        """Horizontal anchor spacing in latent units."""
        x_min, x_max, _, _ = self.bounds
        return (x_max - x_min) / ANCHOR_SIDE

    @property
    def unit_y(self) -> float:
        _, _, y_min, y_max = self.bounds
        return (y_max - y_min) / ANCHOR_SIDE

    def anchor(self, row: int, col: int) -> np.ndarray:
        """Center of cell (row, col) of the 5x5 partition."""
        if not (0 <= row < ANCHOR_SIDE and 0 <= col < ANCHOR_SIDE):
            raise ExperimentError(f"anchor ({row}, {col}) outside 5x5 grid")
        x_min, _, y_min, _ = self.bounds
        return np.array([x_min + (col + 0.5) * self.unit,
                         y_min + (row + 0.5) * self.unit_y])

    @property
    def anchors(self) -> np.ndarray:
        """5x5x2 matrix of anchor coordinates."""
        return np.array([[self.anchor(i, j) for j in range(ANCHOR_SIDE)]
                         for i in range(ANCHOR_SIDE)])

    def lattice_point(self, xi: int, yi: int) -> np.ndarray:
        """2-D coordinates of lattice sample (xi, yi), bounds inclusive."""
        if not (0 <= xi < self.resolution and 0 <= yi < self.resolution):
            raise ExperimentError(f"lattice index ({xi}, {yi}) out of range")
        x_min, x_max, y_min, y_max = self.bounds
        return np.array([
            x_min + xi * (x_max - x_min) / (self.resolution - 1),
            y_min + yi * (y_max - y_min) / (self.resolution - 1),
        ])

    @property
    def lattice(self) -> np.ndarray:
        """All resolution^2 sample coordinates, x-major."""
        pts = [self.lattice_point(xi, yi)
               for xi in range(self.resolution) for yi in range(self.resolution)]
        return np.array(pts)

    @property
    def latent_points(self) -> np.ndarray:
        """Every lattice sample inverse-projected to D dimensions."""
        return inverse_project(self.projection, self.lattice)

    def nearest_lattice(self, point) -> tuple[int, int]:
        x_min, x_max, y_min, y_max = self.bounds
        x, y = point
        xi = round((x - x_min) / (x_max - x_min) * (self.resolution - 1))
        yi = round((y - y_min) / (y_max - y_min) * (self.resolution - 1))
        return (int(np.clip(xi, 0, self.resolution - 1)),
                int(np.clip(yi, 0, self.resolution - 1)))

    def clamp(self, point) -> np.ndarray:
        x_min, x_max, y_min, y_max = self.bounds
        return np.array([float(np.clip(point[0], x_min, x_max)),
                         float(np.clip(point[1], y_min, y_max))])


def build_grid(projection: Projection, embeddings: EmbeddingSet,
               resolution: int = 100) -> GridSpec:
    """Smallest rectangle containing the projected dataset points."""
    points = project(projection, embeddings.vectors)
    bounds = (float(points[:, 0].min()), float(points[:, 0].max()),
              float(points[:, 1].min()), float(points[:, 1].max()))
    return GridSpec(bounds=bounds, resolution=resolution, projection=projection)


def save_grid(spec: GridSpec, path: str | Path) -> None:
    doc = {
        "bounds": list(spec.bounds),
        "resolution": spec.resolution,
        "unit": spec.unit,
        "anchors": spec.anchors.tolist(),
        "projection": {
            "mean": spec.projection.mean.tolist(),
            "components": spec.projection.components.tolist(),
            "explained_variance": spec.projection.explained_variance.tolist(),
        },
    }
    Path(path).write_text(json.dumps(doc, indent=2) + "\n")


def load_grid(path: str | Path) -> GridSpec:
    doc = json.loads(Path(path).read_text())
    proj = Projection(
        mean=np.asarray(doc["projection"]["mean"]),
        components=np.asarray(doc["projection"]["components"]),
        explained_variance=np.asarray(doc["projection"]["explained_variance"]),
    )
    return GridSpec(bounds=tuple(doc["bounds"]), resolution=doc["resolution"],
                    projection=proj)


def distance_grid_units(spec: GridSpec, p, q) -> float:
    """Euclidean distance with each axis normalized by its anchor spacing,
    so horizontally adjacent anchors are exactly 1 apart."""
    dx = (p[0] - q[0]) / spec.unit
    dy = (p[1] - q[1]) / spec.unit_y
    return math.hypot(dx, dy)


# ---------------------------------------------------------------------------
# Answers and scoring

@dataclass(frozen=True)
class AnswerRecord:
    session_id: str
    variant: int               # 1 = same text, 2 = different text
    task_index: int            # 1-based
    true_anchor: tuple         # (row, col)
    clicked: tuple             # raw (x, y) in latent units
    duration: float            # seconds
    timestamp: float = 0.0

    def __post_init__(self):
        r, c = self.true_anchor
        if not (0 <= r < ANCHOR_SIDE and 0 <= c < ANCHOR_SIDE):
            raise ExperimentError("true_anchor outside 5x5 grid")
        if self.duration < 0:
            raise ExperimentError("negative duration")
        if self.variant not in (1, 2):
            raise ExperimentError("variant must be 1 or 2")

    def as_dict(self) -> dict:
        return {"session_id": self.session_id, "variant": self.variant,
                "task_index": self.task_index, "true_anchor": list(self.true_anchor),
                "clicked": list(self.clicked), "duration": self.duration,
                "timestamp": self.timestamp}

    @staticmethod
    def from_dict(doc: dict) -> "AnswerRecord":
        return AnswerRecord(
            session_id=doc["session_id"], variant=int(doc["variant"]),
            task_index=int(doc["task_index"]),
            true_anchor=tuple(doc["true_anchor"]),
            clicked=tuple(doc["clicked"]), duration=float(doc["duration"]),
            timestamp=float(doc.get("timestamp", 0.0)))


def answer_distance(spec: GridSpec, answer: AnswerRecord) -> float:
    """Grid-unit distance from the (clamped) click to the true anchor."""
    anchor = spec.anchor(*answer.true_anchor)
    return distance_grid_units(spec, spec.clamp(answer.clicked), anchor)


def mean_ci(values) -> dict:
    """Mean with normal-approximation 95% CI half-width (1.96 * s / sqrt(n))."""
    v = np.asarray(values, dtype=np.float64)
    n = len(v)
    mean = float(v.mean())
    half = 0.0 if n < 2 else float(1.96 * v.std(ddof=1) / math.sqrt(n))
    return {"n": n, "mean": mean, "ci95": half,
            "median": float(np.median(v)),
            "q1": float(np.percentile(v, 25)), "q3": float(np.percentile(v, 75))}


def score_answers(spec: GridSpec, answers: list[AnswerRecord]) -> dict:
    """Per-variant and per-task-index distance statistics plus slope tests."""
    if not answers:
        raise ExperimentError("no answers to score")
    report: dict = {"variants": {}, "overall": None}
    distances = [answer_distance(spec, a) for a in answers]
    report["overall"] = mean_ci(distances)
    for variant in sorted({a.variant for a in answers}):
        sel = [i for i, a in enumerate(answers) if a.variant == variant]
        vd = [distances[i] for i in sel]
        entry = mean_ci(vd)
        by_index: dict[int, list[float]] = {}
        for i in sel:
            by_index.setdefault(answers[i].task_index, []).append(distances[i])
        entry["by_index"] = {str(k): mean_ci(v) for k, v in sorted(by_index.items())}
        if len(by_index) >= 3:
            series = [(k, float(np.median(v))) for k, v in sorted(by_index.items())]
            entry["distance_slope"] = slope_test(series)
        report["variants"][str(variant)] = entry
    return report


# ---------------------------------------------------------------------------
# Random baseline

def random_baseline(spec: GridSpec, scheme: str = "anchor-to-anchor",
                    n_mc: int = 10 ** 6, seed: int = 2013) -> dict:
    """Expected grid-unit distance of an uninformed guesser.

    anchor-to-anchor: exact enumeration over all 625 (true, guess) pairs.
    anchor-to-lattice: exact enumeration over anchors x lattice samples.
    anchor-to-uniform-click: Monte-Carlo, uniform clicks in bounds.
    """
    anchors = spec.anchors.reshape(-1, 2)
    if scheme == "anchor-to-anchor":
        total = 0.0
        for p in anchors:
            for q in anchors:
                total += distance_grid_units(spec, p, q)
        return {"scheme": scheme, "expected": total / len(anchors) ** 2,
                "method": "exact-enumeration"}
    if scheme == "anchor-to-lattice":
        lattice = spec.lattice
        d = 0.0
        for p in anchors:
            dx = (lattice[:, 0] - p[0]) / spec.unit
            dy = (lattice[:, 1] - p[1]) / spec.unit_y
            d += np.hypot(dx, dy).sum()
        return {"scheme": scheme, "expected": d / (len(anchors) * len(lattice)),
                "method": "exact-enumeration"}
    if scheme == "anchor-to-uniform-click":
        if n_mc < 1000:
            raise ExperimentError("n_mc must be at least 1000")
        rng = np.random.default_rng(seed)
        x_min, x_max, y_min, y_max = spec.bounds
        truth = anchors[rng.integers(0, len(anchors), n_mc)]
        clicks = np.column_stack([rng.uniform(x_min, x_max, n_mc),
                                  rng.uniform(y_min, y_max, n_mc)])
        d = np.hypot((clicks[:, 0] - truth[:, 0]) / spec.unit,
                     (clicks[:, 1] - truth[:, 1]) / spec.unit_y)
        return {"scheme": scheme, "expected": float(d.mean()),
                "stderr": float(d.std(ddof=1) / math.sqrt(n_mc)),
                "n": n_mc, "method": f"monte-carlo({n_mc})"}
    raise ExperimentError(f"unknown baseline scheme: {scheme}")


# ---------------------------------------------------------------------------
# Statistics

def slope_test(series) -> dict:
    """Least-squares slope of value vs index with a two-sided p-value for
    the zero-slope null (t with n-2 df). Degenerate residuals collapse to
    p = 0 for a nonzero slope and p = 1 otherwise."""
    pts = [(float(i), float(v)) for i, v in series]
    idx = np.array([p[0] for p in pts])
    val = np.array([p[1] for p in pts])
    if len(set(idx)) < 3:
        raise ExperimentError("need at least 3 distinct indices")
    n = len(idx)
    xc = idx - idx.mean()
    sxx = np.dot(xc, xc)
    slope = float(np.dot(xc, val - val.mean()) / sxx)
    intercept = float(val.mean() - slope * idx.mean())
    resid = val - (intercept + slope * idx)
    rss = float(np.dot(resid, resid))
    if rss / n < 1e-12:
        p = 0.0 if abs(slope) > 1e-12 else 1.0
        return {"slope": slope, "intercept": intercept, "p_value": p, "n": n}
    se = math.sqrt(rss / (n - 2) / sxx)
    t = slope / se
    p = 2.0 * float(stats.t.sf(abs(t), n - 2))
    return {"slope": slope, "intercept": intercept, "p_value": p, "n": n}


def summarize_durations(answers: list[AnswerRecord]) -> dict:
    """Per-index duration medians/quartiles with Tukey outliers (per
    variant, above Q3 + 1.5 IQR) excluded from plotting stats but counted."""
    if not answers:
        raise ExperimentError("no answers")
    out: dict = {}
    for variant in sorted({a.variant for a in answers}):
        sub = [a for a in answers if a.variant == variant]
        durations = np.array([a.duration for a in sub])
        q1, q3 = np.percentile(durations, [25, 75])
        fence = q3 + 1.5 * (q3 - q1)
        outliers = [a for a in sub if a.duration > fence]
        kept = [a for a in sub if a.duration <= fence]
        by_index: dict[int, list[float]] = {}
        for a in kept:
            by_index.setdefault(a.task_index, []).append(a.duration)
        entry = {
            "outlier_fence": float(fence),
            "n_outliers": len(outliers),
            "by_index": {str(k): mean_ci(v) for k, v in sorted(by_index.items())},
        }
        if len(by_index) >= 3:
            series = [(k, float(np.median(v))) for k, v in sorted(by_index.items())]
            entry["duration_slope"] = slope_test(series)
        out[str(variant)] = entry
    return out


# ---------------------------------------------------------------------------
# Answer log IO

def append_answer(path: str | Path, answer: AnswerRecord) -> None:
    with open(path, "a", encoding="utf-8") as f:
        f.write(json.dumps(answer.as_dict()) + "\n")
        f.flush()


def load_answers(path: str | Path, effective: bool = True) -> list[AnswerRecord]:
    """Read the append-only answer log; with effective=True duplicate
    (session, task) submissions collapse to the last write."""
    answers: list[AnswerRecord] = []
    with open(path, encoding="utf-8") as f:
        for line in f:
            line = line.strip()
            if line:
                answers.append(AnswerRecord.from_dict(json.loads(line)))
    if not effective:
        return answers
    last: dict[tuple, AnswerRecord] = {}
    for a in answers:
        last[(a.session_id, a.task_index)] = a
    return list(last.values())
