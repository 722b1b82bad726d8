"""WAV loading and the basic audio container."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.io import wavfile


class AudioError(ValueError):
    pass


@dataclass(frozen=True)
class AudioClip:
    """Mono audio with samples normalized to [-1, 1]."""

    samples: np.ndarray
    sample_rate: int
    id: str = ""

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=np.float64)
        if samples.ndim != 1 or samples.size == 0:
            raise AudioError("empty audio")
        if not np.all(np.isfinite(samples)):
            raise AudioError("non-finite samples")
        if self.sample_rate < 8000:
            raise AudioError(f"sample_rate {self.sample_rate} below 8000 Hz")
        object.__setattr__(self, "samples", samples)

    @property
    def duration(self) -> float:
        return len(self.samples) / self.sample_rate


def load_audio(path: str | Path) -> AudioClip:
    """Read a RIFF WAV file (PCM16 or float32) into a normalized mono clip.

    Stereo input is down-mixed by channel average.
    """
    path = Path(path)
    if not path.exists():
        raise AudioError(f"no such file: {path}")
    try:
        sr, data = wavfile.read(str(path))
    except Exception as exc:
        raise AudioError(f"unreadable wav file {path}: {exc}") from exc
    if data.size == 0:
        raise AudioError("empty audio")
    if data.ndim == 2:
        data = data.mean(axis=1)
    if data.dtype == np.int16:
        samples = data.astype(np.float64) / 32768.0
    elif data.dtype == np.int32:
        samples = data.astype(np.float64) / 2147483648.0
    elif data.dtype in (np.float32, np.float64):
        samples = data.astype(np.float64)
    else:
        raise AudioError(f"unsupported sample encoding: {data.dtype}")
    samples = np.clip(samples, -1.0, 1.0)
    return AudioClip(samples=samples, sample_rate=int(sr), id=path.stem)


def save_audio(clip: AudioClip, path: str | Path) -> None:
    """Write a clip as 16-bit PCM WAV."""
    pcm = np.clip(np.round(clip.samples * 32767.0), -32768, 32767).astype(np.int16)
    wavfile.write(str(path), clip.sample_rate, pcm)
