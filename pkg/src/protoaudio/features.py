"""Log-mel spectrogram features for the embedding network.

Pipeline: Hann-windowed power STFT -> HTK mel filterbank (peak-1 triangles)
-> log with a 1e-10 floor -> per-spectrogram standardization -> bilinear
resize to the network input size.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .audio_io import AudioClip

__all__ = [
    "FeatureParams",
    "MelSpectrogram",
    "stft_power",
    "mel_filterbank",
    "mel_spectrogram",
    "resize_bilinear",
    "hz_to_mel",
    "mel_to_hz",
    "write_grid_csv",
    "read_grid_csv",
    "write_grid_pgm",
]

LOG_FLOOR = 1e-10
STD_FLOOR = 1e-8


def hz_to_mel(f):
    """HTK mel scale: 2595 * log10(1 + f/700)."""
    return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=np.float64) / 700.0)


def mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m, dtype=np.float64) / 2595.0) - 1.0)


@dataclass(frozen=True)
class FeatureParams:
    n_fft: int = 2048
    hop: int = 512
    n_mels: int = 128
    f_min: float = 0.0
    f_max: float = 11025.0
    target_size: tuple[int, int] = (224, 224)

    def __post_init__(self):
        if self.hop <= 0 or self.n_fft < self.hop:
            raise ValueError(f"need n_fft >= hop > 0, got n_fft={self.n_fft}, hop={self.hop}")
        if not (0 <= self.f_min < self.f_max):
            raise ValueError(f"need 0 <= f_min < f_max, got f_min={self.f_min}, f_max={self.f_max}")
        if self.n_mels < 1:
            raise ValueError(f"n_mels must be >= 1, got {self.n_mels}")
        if len(self.target_size) != 2 or min(self.target_size) < 1:
            raise ValueError(f"target_size must be two positive ints, got {self.target_size}")


@dataclass(frozen=True)
class MelSpectrogram:
    """2-D grid of processed log-mel values plus the parameters that made it.

    ``values`` holds the final grid; before any resize its row count equals
    ``params.n_mels``, afterwards it is ``params.target_size``.
    """

    values: np.ndarray
    params: FeatureParams = field(default_factory=FeatureParams)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.ndim != 2:
            raise ValueError("MelSpectrogram values must be 2-D")
        if not np.all(np.isfinite(v)):
            raise ValueError("MelSpectrogram values must be finite")
        object.__setattr__(self, "values", v)

    @property
    def n_mels(self) -> int:
        return self.values.shape[0]

    @property
    def n_frames(self) -> int:
        return self.values.shape[1]


def stft_power(clip: AudioClip, n_fft: int, hop: int) -> np.ndarray:
    """Power spectrogram [n_fft/2+1, n_frames] of a center-padded clip.

    Frames are Hann-windowed; n_frames = 1 + len//hop. n_fft must be a power
    of two for the FFT kernel.
    """
    if n_fft < 2 or n_fft & (n_fft - 1):
        raise ValueError(f"n_fft must be a power of two, got {n_fft}")
    if hop > n_fft or hop <= 0:
        raise ValueError(f"need 0 < hop <= n_fft, got hop={hop}, n_fft={n_fft}")
    x = clip.samples
    pad = n_fft // 2
    if len(x) < pad + 1:
        raise ValueError(f"clip of {len(x)} samples too short for n_fft={n_fft} reflect padding")
    xp = np.pad(x, pad, mode="reflect")
    n_frames = 1 + len(x) // hop
    window = 0.5 - 0.5 * np.cos(2.0 * np.pi * np.arange(n_fft) / n_fft)
    offsets = np.arange(n_frames) * hop
    frames = xp[offsets[:, None] + np.arange(n_fft)[None, :]] * window
    spectrum = np.fft.rfft(frames, axis=1)
    return np.ascontiguousarray((spectrum.real**2 + spectrum.imag**2).T)


def mel_filterbank(n_mels: int, n_fft: int, rate: int, f_min: float, f_max: float) -> np.ndarray:
    """Triangular mel filters [n_mels, n_fft/2+1], each row peaking at 1.0."""
    if f_max > rate / 2:
        raise ValueError(f"f_max={f_max} exceeds Nyquist {rate / 2}")
    if not (0 <= f_min < f_max):
        raise ValueError(f"need 0 <= f_min < f_max, got f_min={f_min}, f_max={f_max}")
    if n_mels < 1:
        raise ValueError(f"n_mels must be >= 1, got {n_mels}")
    corners = mel_to_hz(np.linspace(hz_to_mel(f_min), hz_to_mel(f_max), n_mels + 2))
    bin_freqs = np.arange(n_fft // 2 + 1) * (rate / n_fft)
    fb = np.zeros((n_mels, n_fft // 2 + 1))
    for m in range(n_mels):
        left, center, right = corners[m], corners[m + 1], corners[m + 2]
        rising = (bin_freqs - left) / (center - left)
        falling = (right - bin_freqs) / (right - center)
        fb[m] = np.maximum(0.0, np.minimum(rising, falling))
        peak = fb[m].max()
        if peak > 0:
            fb[m] /= peak
    return fb


def resize_bilinear(grid: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Bilinear resize with the align-corners-false convention."""
    grid = np.asarray(grid, dtype=np.float64)
    if grid.ndim != 2 or grid.size == 0:
        raise ValueError("input grid must be 2-D and non-empty")
    if out_h < 1 or out_w < 1:
        raise ValueError(f"output dimensions must be positive, got {out_h}x{out_w}")
    in_h, in_w = grid.shape

    def axis_coords(n_out, n_in):
        src = (np.arange(n_out) + 0.5) * (n_in / n_out) - 0.5
        src = np.clip(src, 0.0, n_in - 1.0)
        lo = np.floor(src).astype(np.int64)
        hi = np.minimum(lo + 1, n_in - 1)
        return lo, hi, src - lo

    r0, r1, wr = axis_coords(out_h, in_h)
    c0, c1, wc = axis_coords(out_w, in_w)
    top = grid[r0][:, c0] * (1 - wc)[None, :] + grid[r0][:, c1] * wc[None, :]
    bottom = grid[r1][:, c0] * (1 - wc)[None, :] + grid[r1][:, c1] * wc[None, :]
    return top * (1 - wr)[:, None] + bottom * wr[:, None]


def mel_spectrogram(clip: AudioClip, params: FeatureParams | None = None) -> MelSpectrogram:
    """Standardized log-mel spectrogram resized to params.target_size.

    Standardization is per spectrogram (zero mean, unit variance); a grid
    with std below 1e-8 (silence) becomes all zeros.
    """
    params = params or FeatureParams()
    power = stft_power(clip, params.n_fft, params.hop)
    fb = mel_filterbank(params.n_mels, params.n_fft, clip.sample_rate, params.f_min, params.f_max)
    mel = fb @ power
    logmel = np.log(mel + LOG_FLOOR)
    std = logmel.std()
    if std < STD_FLOOR:
        norm = np.zeros_like(logmel)
    else:
        norm = (logmel - logmel.mean()) / std
    out = resize_bilinear(norm, params.target_size[0], params.target_size[1])
    return MelSpectrogram(values=out, params=params)


def write_grid_csv(grid: np.ndarray, path) -> None:
    """Row-major CSV with 9 significant digits per cell."""
    grid = np.asarray(grid, dtype=np.float64)
    with open(path, "w", encoding="ascii", newline="\n") as f:
        for row in grid:
            f.write(",".join(f"{v:.9g}" for v in row))
            f.write("\n")


def read_grid_csv(path) -> np.ndarray:
    return np.loadtxt(path, delimiter=",", ndmin=2)


def write_grid_pgm(grid: np.ndarray, path) -> None:
    """8-bit grayscale PGM (binary P5), min-max scaled for visual inspection."""
    grid = np.asarray(grid, dtype=np.float64)
    lo, hi = grid.min(), grid.max()
    if hi - lo < 1e-30:
        pixels = np.zeros(grid.shape, dtype=np.uint8)
    else:
        pixels = np.round((grid - lo) / (hi - lo) * 255.0).astype(np.uint8)
    with open(path, "wb") as f:
        f.write(f"P5\n{grid.shape[1]} {grid.shape[0]}\n255\n".encode("ascii"))
        f.write(pixels.tobytes())
