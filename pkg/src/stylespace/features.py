"""Frame-level acoustic descriptors and utterance-level functionals.

Implements a documented subset of eGeMAPS-style features: autocorrelation
F0 with voicing decision, semitone pitch scale anchored at 27.5 Hz,
mel cepstra / MFCC 1-4, alpha ratio, Hammarberg index, band spectral
slopes, and an RMS loudness proxy (not the eGeMAPS auditory loudness).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.fftpack import dct

from .audio import AudioClip

SPECTRUM_FLOOR = 1e-10
SEMITONE_BASE_HZ = 27.5


class FeatureError(ValueError):
    pass


@dataclass(frozen=True)
class ExtractionConfig:
    frame_length: float = 0.025
    hop: float = 0.010
    f0_min: float = 60.0
    f0_max: float = 500.0
    voicing_threshold: float = 0.45
    n_mels: int = 26
    cepstral_order: int = 13  # emits c_0..c_K

    def __post_init__(self):
        if not (0 < self.f0_min < self.f0_max):
            raise FeatureError("need 0 < f0_min < f0_max")
        if self.frame_length <= 0 or self.hop <= 0:
            raise FeatureError("frame_length and hop must be positive")

    @property
    def f0_window(self) -> float:
        """F0 analysis window, at least two periods of f0_min."""
        return max(self.frame_length, 2.0 / self.f0_min)


@dataclass
class FrameTrack:
    """Per-frame descriptors for one utterance, one record per hop."""

    hop: float
    f0_hz: np.ndarray          # 0 where unvoiced
    f0_semitone: np.ndarray    # NaN where unvoiced
    voiced: np.ndarray         # bool
    mel_cepstra: np.ndarray    # T x (K+1), c_0..c_K
    alpha_ratio_db: np.ndarray
    hammarberg_db: np.ndarray
    slope_0_500: np.ndarray    # dB/Hz
    slope_500_1500: np.ndarray
    loudness_proxy: np.ndarray  # frame RMS in dB

    def __post_init__(self):
        n = len(self.voiced)
        for name in ("f0_hz", "f0_semitone", "alpha_ratio_db", "hammarberg_db",
                     "slope_0_500", "slope_500_1500", "loudness_proxy"):
            if len(getattr(self, name)) != n:
                raise FeatureError(f"{name} length mismatch")
        if self.mel_cepstra.shape[0] != n:
            raise FeatureError("mel_cepstra length mismatch")
        if np.any((self.f0_hz == 0) != ~self.voiced.astype(bool)):
            raise FeatureError("f0_hz must be 0 exactly on unvoiced frames")

    def __len__(self) -> int:
        return len(self.voiced)

    @property
    def mfcc(self) -> np.ndarray:
        """MFCC 1 to 4."""
        return self.mel_cepstra[:, 1:5]


def hz_to_semitone(f0_hz):
    """Logarithmic F0 on a semitone scale starting at 27.5 Hz (semitone 0).

    Strictly increasing; frequencies lying exactly on the 27.5*2^(n/12)
    grid map to integer n exactly (the naive log2 leaves float residue).
    """
    f0_hz = np.asarray(f0_hz, dtype=np.float64)
    st = 12.0 * np.log2(f0_hz / SEMITONE_BASE_HZ)
    snapped = np.round(st)
    # 1e-9 semitones ~ 6e-11 relative frequency: snaps only float residue
    on_grid = np.abs(st - snapped) < 1e-9
    return np.where(on_grid, snapped, st)


def _mel(hz):
    return 2595.0 * np.log10(1.0 + np.asarray(hz) / 700.0)


def _mel_inv(mel):
    return 700.0 * (10.0 ** (np.asarray(mel) / 2595.0) - 1.0)


def mel_filterbank(n_mels: int, n_fft: int, sr: int,
                   fmin: float = 20.0, fmax: float | None = None) -> np.ndarray:
    """Triangular mel filterbank over an rFFT power spectrum."""
    if fmax is None:
        fmax = sr / 2.0
    edges = _mel_inv(np.linspace(_mel(fmin), _mel(fmax), n_mels + 2))
    bins = np.fft.rfftfreq(n_fft, 1.0 / sr)
    fb = np.zeros((n_mels, len(bins)))
    for m in range(n_mels):
        lo, center, hi = edges[m], edges[m + 1], edges[m + 2]
        up = (bins - lo) / (center - lo)
        down = (hi - bins) / (hi - center)
        fb[m] = np.maximum(0.0, np.minimum(up, down))
    return fb


def _band_slope(freqs, power_db, lo, hi):
    """Least-squares slope of the log power spectrum in [lo, hi] Hz, dB/Hz."""
    sel = (freqs >= lo) & (freqs <= hi)
    f = freqs[sel]
    if len(f) < 2:
        return 0.0
    y = power_db[sel]
    fc = f - f.mean()
    denom = np.dot(fc, fc)
    if denom == 0:
        return 0.0
    return float(np.dot(fc, y - y.mean()) / denom)


def _frame_f0(window: np.ndarray, sr: int, cfg: ExtractionConfig):
    """Autocorrelation F0: (f0_hz, normalized peak). f0 = 0 if no peak in range."""
    x = window - window.mean()
    r0 = np.dot(x, x)
    if r0 <= 0:
        return 0.0, 0.0
    n = len(x)
    acf = np.correlate(x, x, mode="full")[n - 1:]
    lag_min = max(2, int(math.floor(sr / cfg.f0_max)))
    lag_max = int(math.ceil(sr / cfg.f0_min))
    if lag_max >= n or lag_min >= lag_max:
        raise FeatureError("f0 range infeasible for sample rate / window length")
    seg = acf[lag_min:lag_max + 1] / r0
    k = int(np.argmax(seg))
    peak = float(seg[k])
    lag = lag_min + k
    # parabolic refinement around the peak
    if 0 < k < len(seg) - 1:
        a, b, c = seg[k - 1], seg[k], seg[k + 1]
        denom = a - 2 * b + c
        if denom < 0:
            lag = lag + 0.5 * (a - c) / denom
    f0 = sr / lag
    if not (cfg.f0_min <= f0 <= cfg.f0_max):
        return 0.0, peak
    return float(f0), peak


def extract_frame_descriptors(clip: AudioClip, config: ExtractionConfig | None = None) -> FrameTrack:
    """Compute the per-frame descriptor track for one clip.

    Deterministic: identical clip and config give a bit-identical track.
    F0 uses its own window of at least two f0_min periods, centered on the
    same frame centers as the 25 ms spectral analysis.
    """
    cfg = config or ExtractionConfig()
    sr = clip.sample_rate
    x = clip.samples
    frame_n = int(round(cfg.frame_length * sr))
    hop_n = int(round(cfg.hop * sr))
    if frame_n < 2 or hop_n < 1:
        raise FeatureError("frame/hop too short for sample rate")
    if len(x) < frame_n:
        raise FeatureError("clip shorter than one frame")
    f0_n = int(round(cfg.f0_window * sr))
    if sr / cfg.f0_max < 2 or int(math.ceil(sr / cfg.f0_min)) >= f0_n:
        raise FeatureError("f0 range infeasible for sample rate")

    n_frames = 1 + (len(x) - frame_n) // hop_n
    n_fft = 1
    while n_fft < frame_n:
        n_fft *= 2
    window = np.hanning(frame_n)
    freqs = np.fft.rfftfreq(n_fft, 1.0 / sr)
    fbank = mel_filterbank(cfg.n_mels, n_fft, sr)

    f0_hz = np.zeros(n_frames)
    voiced = np.zeros(n_frames, dtype=bool)
    mel_cepstra = np.zeros((n_frames, cfg.cepstral_order + 1))
    alpha = np.zeros(n_frames)
    hammar = np.zeros(n_frames)
    slope_lo = np.zeros(n_frames)
    slope_hi = np.zeros(n_frames)
    loud = np.zeros(n_frames)

    half_f0 = f0_n // 2
    padded = np.pad(x, (half_f0, half_f0))

    for t in range(n_frames):
        start = t * hop_n
        frame = x[start:start + frame_n]

        center = start + frame_n // 2
        f0_frame = padded[center:center + f0_n]
        f0, peak = _frame_f0(f0_frame, sr, cfg)
        if peak >= cfg.voicing_threshold and f0 > 0:
            f0_hz[t] = f0
            voiced[t] = True

        spec = np.abs(np.fft.rfft(frame * window, n_fft)) ** 2
        spec = np.maximum(spec, SPECTRUM_FLOOR)
        spec_db = 10.0 * np.log10(spec)

        mel_energy = np.maximum(fbank @ spec, SPECTRUM_FLOOR)
        cep = dct(np.log(mel_energy), type=2, norm="ortho")
        mel_cepstra[t] = cep[:cfg.cepstral_order + 1]

        e_low = spec[(freqs >= 50) & (freqs <= 1000)].sum()
        e_high = spec[(freqs > 1000) & (freqs <= 5000)].sum()
        alpha[t] = 10.0 * np.log10(max(e_low, SPECTRUM_FLOOR) / max(e_high, SPECTRUM_FLOOR))

        pk_low = spec[(freqs >= 0) & (freqs <= 2000)].max()
        pk_high = spec[(freqs > 2000) & (freqs <= 5000)].max()
        hammar[t] = 10.0 * np.log10(pk_low / pk_high)

        slope_lo[t] = _band_slope(freqs, spec_db, 0, 500)
        slope_hi[t] = _band_slope(freqs, spec_db, 500, 1500)

        rms = np.sqrt(np.mean(frame ** 2))
        loud[t] = 20.0 * np.log10(max(rms, SPECTRUM_FLOOR))

    f0_semitone = np.full(n_frames, np.nan)
    f0_semitone[voiced] = hz_to_semitone(f0_hz[voiced])

    return FrameTrack(
        hop=cfg.hop, f0_hz=f0_hz, f0_semitone=f0_semitone, voiced=voiced,
        mel_cepstra=mel_cepstra, alpha_ratio_db=alpha, hammarberg_db=hammar,
        slope_0_500=slope_lo, slope_500_1500=slope_hi, loudness_proxy=loud,
    )


# ---------------------------------------------------------------------------
# Functionals

@dataclass(frozen=True)
class FunctionalSpec:
    """One utterance-level statistic over a per-frame contour."""

    kind: str                      # mean | stddev | stddevNorm | percentile |
                                   # meanRisingSlope | meanFallingSlope
    scope: str = "voiced"          # voiced | all
    p: float | None = None         # percentile only

    def __post_init__(self):
        if self.kind not in ("mean", "stddev", "stddevNorm", "percentile",
                             "meanRisingSlope", "meanFallingSlope"):
            raise FeatureError(f"unknown functional kind: {self.kind}")
        if self.kind == "percentile":
            if self.p is None or not (0 < self.p < 100):
                raise FeatureError("percentile requires p in (0, 100)")
        if self.scope not in ("voiced", "all"):
            raise FeatureError(f"unknown scope: {self.scope}")

    @property
    def suffix(self) -> str:
        if self.kind == "percentile":
            return f"percentile{self.p}"
        return self.kind


def _monotone_run_slopes(values: np.ndarray, hop: float, rising: bool) -> list[float]:
    """Signed slope of each maximal strictly-monotone run, in units/second."""
    slopes = []
    i = 0
    n = len(values)
    while i < n - 1:
        j = i
        if rising:
            while j < n - 1 and values[j + 1] > values[j]:
                j += 1
        else:
            while j < n - 1 and values[j + 1] < values[j]:
                j += 1
        if j > i:
            slopes.append((values[j] - values[i]) / ((j - i) * hop))
            i = j
        else:
            i += 1
    return slopes


def functional_value(contour: np.ndarray, spec: FunctionalSpec, hop: float = 0.01) -> float:
    """Apply one functional to a contour; NaN marks an undefined result."""
    v = np.asarray(contour, dtype=np.float64)
    v = v[np.isfinite(v)]
    if len(v) == 0:
        return float("nan")
    if spec.kind == "mean":
        return float(np.mean(v))
    if spec.kind == "stddev":
        return float(np.std(v))
    if spec.kind == "stddevNorm":
        m = np.mean(v)
        if m == 0:
            return float("nan")
        return float(np.std(v) / abs(m))
    if spec.kind == "percentile":
        return float(np.percentile(v, spec.p))
    rising = spec.kind == "meanRisingSlope"
    slopes = _monotone_run_slopes(v, hop, rising)
    if not slopes:
        return float("nan")
    return float(np.mean(slopes))


# (contour attribute, base name, inherently voiced-only)
_CONTOURS = [
    ("f0_semitone", "F0semitone", True),
    ("loudness_proxy", "loudness", False),
    ("alpha_ratio_db", "alphaRatio", False),
    ("hammarberg_db", "hammarbergIndex", False),
    ("slope_0_500", "slope0-500", False),
    ("slope_500_1500", "slope500-1500", False),
]

DEFAULT_FUNCTIONALS = [
    FunctionalSpec("mean", "voiced"),
    FunctionalSpec("stddevNorm", "voiced"),
    FunctionalSpec("percentile", "voiced", p=20.0),
    FunctionalSpec("percentile", "voiced", p=50.0),
    FunctionalSpec("percentile", "voiced", p=80.0),
    FunctionalSpec("meanRisingSlope", "voiced"),
    FunctionalSpec("meanFallingSlope", "voiced"),
]


def _contour_name(base: str, voiced_scope: bool, inherently_voiced: bool) -> str:
    if inherently_voiced or not voiced_scope:
        return base
    # eGeMAPS style: slopeV0-500, mfcc1V, alphaRatioV
    if "-" in base and base.startswith("slope"):
        return "slopeV" + base[len("slope"):]
    return base + "V"


def apply_functionals(track: FrameTrack,
                      specs: list[FunctionalSpec] | None = None) -> dict[str, float]:
    """Apply functionals to every contour of a track, eGeMAPS-style names.

    Voiced-only scope restricts each contour to voiced frames; results that
    cannot be computed (no voiced frames, zero mean for stddevNorm) are NaN.
    """
    if len(track) == 0:
        raise FeatureError("empty track")
    specs = DEFAULT_FUNCTIONALS if specs is None else specs
    voiced = track.voiced.astype(bool)
    out: dict[str, float] = {}

    contours = list(_CONTOURS)
    for k in range(4):
        contours.append((("mfcc", k), f"mfcc{k + 1}", False))

    for attr, base, inherent in contours:
        if isinstance(attr, tuple):
            full = track.mfcc[:, attr[1]]
        else:
            full = getattr(track, attr)
        for spec in specs:
            voiced_scope = inherent or spec.scope == "voiced"
            contour = full[voiced] if voiced_scope else full
            name = f"{_contour_name(base, voiced_scope, inherent)}_{spec.suffix}"
            out[name] = functional_value(contour, spec, track.hop)

    seg = voiced_segment_stats(track)
    out["StddevVoicedSegmentLengthSec"] = seg["stddev"]
    out["MeanVoicedSegmentLengthSec"] = seg["mean"]
    return out


def voiced_segment_stats(track: FrameTrack) -> dict:
    """Lengths (seconds) of maximal voiced runs plus their mean and stddev."""
    if len(track) == 0:
        raise FeatureError("empty track")
    v = track.voiced.astype(int)
    edges = np.diff(np.concatenate([[0], v, [0]]))
    starts = np.where(edges == 1)[0]
    ends = np.where(edges == -1)[0]
    lengths = [(e - s) * track.hop for s, e in zip(starts, ends)]
    if not lengths:
        return {"lengths": [], "mean": float("nan"), "stddev": float("nan")}
    arr = np.asarray(lengths)
    return {"lengths": lengths, "mean": float(arr.mean()), "stddev": float(arr.std())}
