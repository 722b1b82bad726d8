"""Synthetic experiment stimuli.

Stands in for a trained synthesizer: each lattice position gets a short
melodic clip whose fundamental frequency tracks x (two octaves across the
rectangle) and whose tempo tracks y (a factor of two), so expressiveness
genuinely varies over the space. Generation is seeded and bit-stable.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .audio import AudioClip, save_audio
from .grid import ExperimentError, GridSpec

BASE_F0 = 110.0       # x at left edge; right edge is two octaves up (440 Hz)
PITCH_OCTAVES = 2.0
TEMPO_FACTOR = 2.0
BASE_NOTE_SEC = 0.22
N_NOTES = 3
SAMPLE_RATE = 16000


@dataclass(frozen=True)
class StimulusManifest:
    root: Path
    resolution: int
    texts: list[int]
    sample_rate: int
    entries: dict  # "text:xi:yi" -> relative path

    @staticmethod
    def key(text: int, xi: int, yi: int) -> str:
        return f"{text}:{xi}:{yi}"

    def path(self, text: int, xi: int, yi: int) -> Path:
        key = self.key(text, xi, yi)
        if key not in self.entries:
            raise ExperimentError(f"no stimulus for {key}")
        return self.root / self.entries[key]

    def save(self, path: str | Path) -> None:
        doc = {"resolution": self.resolution, "texts": self.texts,
               "sample_rate": self.sample_rate, "entries": self.entries}
        Path(path).write_text(json.dumps(doc, indent=1) + "\n")

    @staticmethod
    def load(path: str | Path) -> "StimulusManifest":
        path = Path(path)
        doc = json.loads(path.read_text())
        return StimulusManifest(root=path.parent, resolution=doc["resolution"],
                                texts=list(doc["texts"]),
                                sample_rate=doc["sample_rate"],
                                entries=doc["entries"])


def _melody(text: int, seed: int) -> np.ndarray:
    """Per-text semitone offsets, a stable function of (seed, text)."""
    rng = np.random.default_rng([seed, text])
    return rng.integers(-2, 5, size=N_NOTES).astype(np.float64)


def synthesize_stimulus(spec: GridSpec, text: int, xi: int, yi: int,
                        seed: int = 2013, sample_rate: int = SAMPLE_RATE) -> AudioClip:
    """One clip for lattice position (xi, yi) of a text's melody."""
    xfrac = xi / (spec.resolution - 1)
    yfrac = yi / (spec.resolution - 1)
    f0 = BASE_F0 * 2.0 ** (PITCH_OCTAVES * xfrac)
    note_sec = BASE_NOTE_SEC / (TEMPO_FACTOR ** yfrac)
    offsets = _melody(text, seed)

    pieces = []
    for st in offsets:
        freq = f0 * 2.0 ** (st / 12.0)
        n = int(round(note_sec * sample_rate))
        t = np.arange(n) / sample_rate
        # harmonic-rich tone with a soft envelope
        wave = (0.6 * np.sin(2 * np.pi * freq * t)
                + 0.25 * np.sin(2 * np.pi * 2 * freq * t)
                + 0.1 * np.sin(2 * np.pi * 3 * freq * t))
        env = np.minimum(1.0, np.minimum(t, note_sec - t) / 0.02)
        pieces.append(wave * np.clip(env, 0.0, 1.0))
    samples = 0.8 * np.concatenate(pieces)
    return AudioClip(samples=samples, sample_rate=sample_rate,
                     id=f"t{text}_x{xi}_y{yi}")


def generate_synthetic_stimuli(spec: GridSpec, texts: int, out_dir: str | Path,
                               seed: int = 2013,
                               sample_rate: int = SAMPLE_RATE) -> StimulusManifest:
    """Emit one clip per (text, lattice point) plus a manifest."""
    if texts < 1:
        raise ExperimentError("need at least one text")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    entries = {}
    for text in range(texts):
        for xi in range(spec.resolution):
            for yi in range(spec.resolution):
                clip = synthesize_stimulus(spec, text, xi, yi, seed=seed,
                                           sample_rate=sample_rate)
                rel = f"t{text}_x{xi}_y{yi}.wav"
                save_audio(clip, out_dir / rel)
                entries[StimulusManifest.key(text, xi, yi)] = rel
    manifest = StimulusManifest(root=out_dir, resolution=spec.resolution,
                                texts=list(range(texts)),
                                sample_rate=sample_rate, entries=entries)
    manifest.save(out_dir / "manifest.json")
    return manifest
