"""Synthetic burst-noise audio in three acoustically separable classes.

Each clip sums exponentially decaying band-passed noise bursts in the class
band, a few short label-independent distractor bursts at arbitrary
frequencies, and a white-noise floor, then peak-normalizes to 0.9. The
default classes occupy disjoint frequency bands (low / mid / high); the
distractors add within-class variability so that few-shot accuracy genuinely
improves with more support examples instead of saturating at one shot.
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .audio_io import AudioClip, save_wav
from .seeding import derive_seed

__all__ = [
    "SynthClassSpec",
    "DEFAULT_CLASSES",
    "SAMPLE_RATE",
    "LabeledClips",
    "generate_clip",
    "generate_dataset",
    "persist_wavs",
]

SAMPLE_RATE = 22050
CLIP_SECONDS = 1.0
PEAK_TARGET = 0.9
TRAIN_FRACTION = 0.8


@dataclass(frozen=True)
class SynthClassSpec:
    """Band-limited burst recipe for one class.

    Distractor bursts are label-independent: their center is drawn from the
    full shared range, so they inject within-class variability that a single
    support example cannot average away but a large sample mean does.
    """

    class_name: str
    burst_count: tuple[int, int]
    center_freq: tuple[float, float]
    bandwidth: float
    decay_rate: float
    noise_floor: float
    distractor_count: tuple[int, int] = (3, 6)
    distractor_freq: tuple[float, float] = (300.0, 8600.0)
    distractor_level: float = 1.4
    distractor_decay: float = 28.0

    def __post_init__(self):
        lo, hi = self.center_freq
        nyquist = SAMPLE_RATE / 2
        if not (0 < lo <= hi < nyquist):
            raise ValueError(f"center_freq range {self.center_freq} outside (0, {nyquist})")
        if self.burst_count[0] < 0 or self.burst_count[0] > self.burst_count[1]:
            raise ValueError(f"bad burst_count range {self.burst_count}")
        if self.bandwidth <= 0 or self.decay_rate <= 0 or self.noise_floor < 0:
            raise ValueError("bandwidth and decay_rate must be positive, noise_floor non-negative")


DEFAULT_CLASSES = (
    SynthClassSpec("low", burst_count=(2, 4), center_freq=(300.0, 1400.0),
                   bandwidth=600.0, decay_rate=9.0, noise_floor=0.12),
    SynthClassSpec("mid", burst_count=(2, 4), center_freq=(2000.0, 3800.0),
                   bandwidth=800.0, decay_rate=12.0, noise_floor=0.12),
    SynthClassSpec("high", burst_count=(2, 5), center_freq=(4800.0, 8400.0),
                   bandwidth=1100.0, decay_rate=15.0, noise_floor=0.12),
)


def _add_burst(x, rng, t, freqs, center, bandwidth, decay_rate, amplitude):
    spectrum = np.fft.rfft(rng.standard_normal(len(x)))
    band = (freqs >= center - bandwidth / 2) & (freqs <= center + bandwidth / 2)
    spectrum[~band] = 0.0
    burst = np.fft.irfft(spectrum, len(x))
    rms = np.sqrt(np.mean(burst**2))
    if rms > 0:
        burst /= rms
    onset = rng.uniform(0.0, 0.75)
    envelope = np.where(t >= onset, np.exp(-decay_rate * (t - onset)), 0.0)
    x += amplitude * envelope * burst


def generate_clip(spec: SynthClassSpec, seed: int) -> AudioClip:
    """One-second clip at 22.05 kHz, bit-identical for a given (spec, seed)."""
    rng = np.random.Generator(np.random.PCG64(seed))
    n = int(SAMPLE_RATE * CLIP_SECONDS)
    t = np.arange(n) / SAMPLE_RATE
    freqs = np.fft.rfftfreq(n, d=1.0 / SAMPLE_RATE)
    x = np.zeros(n)
    count = int(rng.integers(spec.burst_count[0], spec.burst_count[1] + 1))
    for _ in range(count):
        center = rng.uniform(*spec.center_freq)
        amplitude = rng.uniform(0.4, 1.0)
        _add_burst(x, rng, t, freqs, center, spec.bandwidth, spec.decay_rate, amplitude)
    n_distract = int(rng.integers(spec.distractor_count[0], spec.distractor_count[1] + 1))
    for _ in range(n_distract):
        center = rng.uniform(*spec.distractor_freq)
        amplitude = spec.distractor_level * rng.uniform(0.5, 1.0)
        _add_burst(x, rng, t, freqs, center, spec.bandwidth, spec.distractor_decay, amplitude)
    if spec.noise_floor > 0:
        x += spec.noise_floor * rng.standard_normal(n)
    peak = np.abs(x).max()
    if peak > 0:
        x *= PEAK_TARGET / peak
    return AudioClip(samples=x, sample_rate=SAMPLE_RATE)


@dataclass
class LabeledClips:
    """Generated clips with labels, stable ids and a stratified 80/20 split."""

    clips: list[AudioClip]
    labels: np.ndarray
    ids: list[str]
    class_names: list[str]
    train_indices: np.ndarray
    test_indices: np.ndarray


def generate_dataset(
    n_per_class: int, seed: int, specs: tuple[SynthClassSpec, ...] = DEFAULT_CLASSES
) -> LabeledClips:
    """Per-class clip streams with disjoint derived seeds and a deterministic split."""
    if n_per_class < 5:
        raise ValueError(f"n_per_class must be >= 5, got {n_per_class}")
    clips: list[AudioClip] = []
    labels: list[int] = []
    ids: list[str] = []
    train_idx: list[int] = []
    test_idx: list[int] = []
    for class_id, spec in enumerate(specs):
        n_train = int(n_per_class * TRAIN_FRACTION)
        for i in range(n_per_class):
            global_idx = len(clips)
            clips.append(generate_clip(spec, derive_seed(seed, spec.class_name, i)))
            labels.append(class_id)
            ids.append(f"{spec.class_name}_{i:04d}")
            (train_idx if i < n_train else test_idx).append(global_idx)
    return LabeledClips(
        clips=clips,
        labels=np.asarray(labels, dtype=np.int64),
        ids=ids,
        class_names=[s.class_name for s in specs],
        train_indices=np.asarray(train_idx, dtype=np.int64),
        test_indices=np.asarray(test_idx, dtype=np.int64),
    )


def persist_wavs(dataset: LabeledClips, root) -> None:
    """Write clips as <root>/<class_name>/<id>.wav, the layout the CLI ingests."""
    root = Path(root)
    for clip, label, clip_id in zip(dataset.clips, dataset.labels, dataset.ids):
        class_dir = root / dataset.class_names[label]
        class_dir.mkdir(parents=True, exist_ok=True)
        save_wav(clip, class_dir / f"{clip_id}.wav")
