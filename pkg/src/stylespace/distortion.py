"""Objective distortion measures between reference and predicted tracks.

Four metrics (MCD, VDE, F0_MSE, lF0_MSE) under two alignments: dynamic
time warping on mel cepstra c_1..K, and a best integer shift minimizing
each metric independently.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .features import FrameTrack

MCD_DB_CONSTANT = (10.0 / math.log(10.0)) * math.sqrt(2.0)


class DistortionError(ValueError):
    pass


@dataclass(frozen=True)
class AlignedPair:
    """Frame index correspondence between a reference and a prediction."""

    pairs: tuple  # ((t_ref, t_pred), ...)
    method: str   # "dtw" or "shift(k)"

    def __post_init__(self):
        if not self.pairs:
            raise DistortionError("empty alignment")

    @property
    def length(self) -> int:
        return len(self.pairs)

    @property
    def ref_indices(self) -> np.ndarray:
        return np.fromiter((p[0] for p in self.pairs), dtype=np.intp)

    @property
    def pred_indices(self) -> np.ndarray:
        return np.fromiter((p[1] for p in self.pairs), dtype=np.intp)


def _cep_features(track) -> np.ndarray:
    if isinstance(track, FrameTrack):
        return track.mel_cepstra
    return np.asarray(track, dtype=np.float64)


def dtw_align(ref, pred) -> AlignedPair:
    """Minimum-cost monotone alignment of two mel-cepstra tracks.

    Per-frame distance is Euclidean over c_1..K (c_0 excluded, so the
    alignment is robust to energy offsets). Steps are diagonal, down,
    right; ties prefer diagonal, then advancing the reference.
    """
    a = _cep_features(ref)[:, 1:]
    b = _cep_features(pred)[:, 1:]
    if len(a) == 0 or len(b) == 0:
        raise DistortionError("empty track")
    if a.shape[1] != b.shape[1]:
        raise DistortionError("cepstral order mismatch")
    n, m = len(a), len(b)
    dist = np.sqrt(((a[:, None, :] - b[None, :, :]) ** 2).sum(axis=2))
    acc = np.full((n, m), np.inf)
    acc[0, 0] = dist[0, 0]
    for i in range(n):
        for j in range(m):
            if i == 0 and j == 0:
                continue
            best = np.inf
            if i > 0 and j > 0:
                best = acc[i - 1, j - 1]
            if i > 0:
                best = min(best, acc[i - 1, j])
            if j > 0:
                best = min(best, acc[i, j - 1])
            acc[i, j] = dist[i, j] + best
    # traceback with the same tie-break preference
    path = [(n - 1, m - 1)]
    i, j = n - 1, m - 1
    while (i, j) != (0, 0):
        candidates = []
        if i > 0 and j > 0:
            candidates.append((acc[i - 1, j - 1], 0, (i - 1, j - 1)))
        if i > 0:
            candidates.append((acc[i - 1, j], 1, (i - 1, j)))
        if j > 0:
            candidates.append((acc[i, j - 1], 2, (i, j - 1)))
        _, _, (i, j) = min(candidates)
        path.append((i, j))
    path.reverse()
    return AlignedPair(pairs=tuple(path), method="dtw")


def dtw_cost(ref, pred) -> float:
    """Accumulated per-frame distance along the optimal warping path."""
    pair = dtw_align(ref, pred)
    a = _cep_features(ref)[:, 1:]
    b = _cep_features(pred)[:, 1:]
    return float(sum(np.linalg.norm(a[i] - b[j]) for i, j in pair.pairs))


def shift_pairs(t_ref: int, t_pred: int, k: int) -> tuple:
    """Consecutive index pairs for integer shift k (pred delayed by k)."""
    lo_ref = max(0, k)
    hi_ref = min(t_ref, t_pred + k)
    return tuple((t, t - k) for t in range(lo_ref, hi_ref))


def shift_align(ref, pred, max_shift: int = 50, objective: str = "mcd",
                **tracks) -> AlignedPair:
    """Best integer shift in [-max_shift, max_shift] for one metric.

    Each metric is minimized independently; frames outside the overlap
    are dropped. Keyword tracks supply voicing/F0 arrays when the
    objective needs them (ref_voicing, pred_voicing, ref_f0, pred_f0).
    """
    a = _cep_features(ref)
    b = _cep_features(pred)
    if max_shift >= min(len(a), len(b)):
        raise DistortionError("max_shift must leave a non-empty overlap")
    best = None
    for k in range(-max_shift, max_shift + 1):
        pairs = shift_pairs(len(a), len(b), k)
        if not pairs:
            continue
        pair = AlignedPair(pairs=pairs, method=f"shift({k})")
        value = _metric(objective, pair, ref, pred, **tracks)
        if value is None or not np.isfinite(value):
            continue
        if best is None or value < best[0]:
            best = (value, pair)
    if best is None:
        raise DistortionError("no shift produced a computable metric")
    return best[1]


def _metric(name: str, pair: AlignedPair, ref, pred, *, K: int = 13,
            scaled: bool = False, ref_voicing=None, pred_voicing=None,
            ref_f0=None, pred_f0=None):
    if name == "mcd":
        return mcd(pair, ref, pred, K=K, scaled=scaled)
    if name == "vde":
        return vde(pair, ref_voicing, pred_voicing)
    if name == "f0_mse":
        return f0_mse(pair, ref_f0, pred_f0, ref_voicing, pred_voicing)
    if name == "lf0_mse":
        return lf0_mse(pair, ref_f0, pred_f0, ref_voicing, pred_voicing)
    raise DistortionError(f"unknown metric: {name}")


def mcd(pair: AlignedPair, ref, pred, K: int = 13, scaled: bool = False) -> float:
    """Mel-cepstral distortion over aligned frames, c_1..c_K.

    mean_t sqrt(sum_{k=1..K} (c_{t,k} - c'_{t,k})^2); the optional scaled
    flag applies the conventional (10/ln10)*sqrt(2) dB constant.
    """
    a = _cep_features(ref)
    b = _cep_features(pred)
    if a.shape[1] <= K or b.shape[1] <= K:
        raise DistortionError(f"K={K} exceeds available cepstral order")
    ri, pi = pair.ref_indices, pair.pred_indices
    diff = a[ri, 1:K + 1] - b[pi, 1:K + 1]
    per_frame = np.sqrt((diff ** 2).sum(axis=1))
    value = float(per_frame.mean())
    return value * MCD_DB_CONSTANT if scaled else value


def vde(pair: AlignedPair, ref_voicing, pred_voicing) -> float:
    """Fraction of aligned frames whose voicing flags disagree."""
    rv = np.asarray(ref_voicing, dtype=bool)
    pv = np.asarray(pred_voicing, dtype=bool)
    ri, pi = pair.ref_indices, pair.pred_indices
    return float(np.mean(rv[ri] != pv[pi]))


def _co_voiced(pair, ref_f0, pred_f0, ref_voicing, pred_voicing):
    rf = np.asarray(ref_f0, dtype=np.float64)
    pf = np.asarray(pred_f0, dtype=np.float64)
    rv = np.asarray(ref_voicing, dtype=bool) if ref_voicing is not None else rf > 0
    pv = np.asarray(pred_voicing, dtype=bool) if pred_voicing is not None else pf > 0
    ri, pi = pair.ref_indices, pair.pred_indices
    both = rv[ri] & pv[pi]
    return rf[ri][both], pf[pi][both]


def f0_mse(pair: AlignedPair, ref_f0, pred_f0,
           ref_voicing=None, pred_voicing=None) -> float:
    """Mean squared F0 difference (Hz^2) over frames voiced in both tracks;
    NaN when no frame is co-voiced."""
    r, p = _co_voiced(pair, ref_f0, pred_f0, ref_voicing, pred_voicing)
    if len(r) == 0:
        return float("nan")
    return float(np.mean((r - p) ** 2))


def lf0_mse(pair: AlignedPair, ref_f0, pred_f0,
            ref_voicing=None, pred_voicing=None) -> float:
    """Like f0_mse on natural-log F0."""
    r, p = _co_voiced(pair, ref_f0, pred_f0, ref_voicing, pred_voicing)
    if len(r) == 0:
        return float("nan")
    return float(np.mean((np.log(r) - np.log(p)) ** 2))


@dataclass(frozen=True)
class DistortionReport:
    method: str
    mcd: float
    vde: float
    lf0_mse: float
    f0_mse: float
    frames_compared: dict

    def as_dict(self) -> dict:
        return {"method": self.method, "MCD": self.mcd, "VDE": self.vde,
                "lF0_MSE": self.lf0_mse, "F0_MSE": self.f0_mse,
                "frames_compared": self.frames_compared}


def distortion_report(ref: FrameTrack, pred: FrameTrack, K: int = 13,
                      scaled: bool = False, max_shift: int = 50) -> list[DistortionReport]:
    """Both alignment rows (DTW, shift) over the four metrics.

    The DTW path from mel cepstra is reused for every metric; under shift
    each metric gets its own independently minimized translation.
    """
    tracks = dict(ref_voicing=ref.voiced, pred_voicing=pred.voiced,
                  ref_f0=ref.f0_hz, pred_f0=pred.f0_hz)
    rows = []

    pair = dtw_align(ref, pred)
    rows.append(DistortionReport(
        method="DTW",
        mcd=mcd(pair, ref, pred, K=K, scaled=scaled),
        vde=vde(pair, ref.voiced, pred.voiced),
        lf0_mse=lf0_mse(pair, ref.f0_hz, pred.f0_hz, ref.voiced, pred.voiced),
        f0_mse=f0_mse(pair, ref.f0_hz, pred.f0_hz, ref.voiced, pred.voiced),
        frames_compared={m: pair.length for m in ("MCD", "VDE", "lF0_MSE", "F0_MSE")},
    ))

    max_shift = min(max_shift, min(len(ref), len(pred)) - 1)
    values = {}
    frames = {}
    for label, metric in (("MCD", "mcd"), ("VDE", "vde"),
                          ("lF0_MSE", "lf0_mse"), ("F0_MSE", "f0_mse")):
        try:
            pair = shift_align(ref, pred, max_shift=max_shift, objective=metric,
                               K=K, scaled=scaled, **tracks)
            values[label] = _metric(metric, pair, ref, pred, K=K, scaled=scaled, **tracks)
            frames[label] = pair.length
        except DistortionError:
            values[label] = float("nan")
            frames[label] = 0
    rows.append(DistortionReport(
        method="shift", mcd=values["MCD"], vde=values["VDE"],
        lf0_mse=values["lF0_MSE"], f0_mse=values["F0_MSE"], frames_compared=frames,
    ))
    return rows


def format_report(rows: list[DistortionReport]) -> str:
    """Aligned text table, column order matching the reported tables."""
    header = f"{'':6s} {'MCD':>12s} {'VDE':>10s} {'lF0_MSE':>12s} {'F0_MSE':>14s}"
    lines = [header]
    for r in rows:
        lines.append(f"{r.method:6s} {r.mcd:12.6f} {r.vde:10.6f} "
                     f"{r.lf0_mse:12.6f} {r.f0_mse:14.6f}")
    return "\n".join(lines)
