"""Audio ingestion: WAV decoding, resampling and duration normalization.

Readers accept RIFF/WAVE files holding 16-bit PCM or 32-bit IEEE float
samples with one or two channels, tolerating extra chunks ahead of ``data``.
All downstream code works on mono clips in [-1, 1].
"""
from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

__all__ = [
    "AudioClip",
    "WavFormatError",
    "MalformedHeaderError",
    "UnsupportedEncodingError",
    "load_wav",
    "save_wav",
    "resample",
    "normalize_duration",
]

SINC_TAPS_PER_SIDE = 64


class WavFormatError(ValueError):
    """Base error for unreadable WAV input."""


class MalformedHeaderError(WavFormatError):
    """RIFF structure is broken: bad magic, missing chunk, truncated data."""


class UnsupportedEncodingError(WavFormatError):
    """File decodes but uses a codec/bit depth/channel count outside the contract."""


@dataclass(frozen=True)
class AudioClip:
    """Mono audio: samples in [-1, 1] plus the sample rate in Hz."""

    samples: np.ndarray
    sample_rate: int

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=np.float64)
        if samples.ndim != 1 or samples.size < 1:
            raise ValueError("AudioClip requires a non-empty 1-D sample sequence")
        if not np.all(np.isfinite(samples)):
            raise ValueError("AudioClip samples must be finite")
        if self.sample_rate <= 0:
            raise ValueError(f"sample_rate must be positive, got {self.sample_rate}")
        object.__setattr__(self, "samples", samples)

    @property
    def duration(self) -> float:
        return len(self.samples) / self.sample_rate


def _read_exact(f, n: int, what: str) -> bytes:
    buf = f.read(n)
    if len(buf) != n:
        raise MalformedHeaderError(f"truncated WAV file while reading {what}")
    return buf


def load_wav(path) -> AudioClip:
    """Decode a WAV file to a mono AudioClip at the file's native rate.

    Stereo channels are averaged; 16-bit PCM is scaled by 1/32768. Raises
    FileNotFoundError, MalformedHeaderError or UnsupportedEncodingError with
    the offending field named.
    """
    path = Path(path)
    with open(path, "rb") as f:
        riff, _size, wave = struct.unpack("<4sI4s", _read_exact(f, 12, "RIFF header"))
        if riff != b"RIFF":
            raise MalformedHeaderError(f"bad RIFF magic {riff!r} in {path}")
        if wave != b"WAVE":
            raise MalformedHeaderError(f"bad WAVE form type {wave!r} in {path}")

        fmt = None
        while True:
            head = f.read(8)
            if len(head) == 0:
                raise MalformedHeaderError(f"no data chunk found in {path}")
            if len(head) != 8:
                raise MalformedHeaderError(f"truncated chunk header in {path}")
            chunk_id, chunk_size = struct.unpack("<4sI", head)
            if chunk_id == b"fmt ":
                if chunk_size < 16:
                    raise MalformedHeaderError(f"fmt chunk too small ({chunk_size} bytes) in {path}")
                body = _read_exact(f, chunk_size, "fmt chunk")
                fmt = struct.unpack("<HHIIHH", body[:16])
            elif chunk_id == b"data":
                if fmt is None:
                    raise MalformedHeaderError(f"data chunk precedes fmt chunk in {path}")
                raw = f.read(chunk_size)
                if len(raw) != chunk_size:
                    raise MalformedHeaderError(
                        f"data chunk declares {chunk_size} bytes but file holds {len(raw)} in {path}"
                    )
                break
            else:
                # Skip LIST/fact/cue and other metadata; chunks are word-aligned.
                f.seek(chunk_size + (chunk_size & 1), 1)

    audio_format, n_channels, sample_rate, _byte_rate, block_align, bits = fmt
    if n_channels not in (1, 2):
        raise UnsupportedEncodingError(f"channel count {n_channels} unsupported (1 or 2 expected) in {path}")
    if sample_rate <= 0:
        raise MalformedHeaderError(f"non-positive sample rate {sample_rate} in {path}")

    if audio_format == 1 and bits == 16:
        frame_bytes = 2 * n_channels
        if block_align not in (0, frame_bytes):
            raise MalformedHeaderError(f"block align {block_align} inconsistent with PCM16 x{n_channels} in {path}")
        if len(raw) % frame_bytes:
            raise MalformedHeaderError(f"data chunk length {len(raw)} not frame-aligned in {path}")
        data = np.frombuffer(raw, dtype="<i2").astype(np.float64) / 32768.0
    elif audio_format == 3 and bits == 32:
        frame_bytes = 4 * n_channels
        if len(raw) % frame_bytes:
            raise MalformedHeaderError(f"data chunk length {len(raw)} not frame-aligned in {path}")
        data = np.frombuffer(raw, dtype="<f4").astype(np.float64)
    else:
        raise UnsupportedEncodingError(
            f"audio format {audio_format} with {bits} bits unsupported (PCM16 or float32 expected) in {path}"
        )

    if data.size == 0:
        raise MalformedHeaderError(f"empty data chunk in {path}")
    if n_channels == 2:
        data = data.reshape(-1, 2).mean(axis=1)
    return AudioClip(samples=data, sample_rate=int(sample_rate))


def save_wav(clip: AudioClip, path) -> None:
    """Write a clip as mono 16-bit PCM."""
    path = Path(path)
    # Mirror the reader's 1/32768 scaling so a write/read cycle is lossless
    # to half an LSB; +1.0 saturates at the int16 maximum.
    pcm = np.round(np.clip(clip.samples, -1.0, 1.0) * 32768.0)
    pcm = np.clip(pcm, -32768, 32767).astype("<i2")
    data = pcm.tobytes()
    with open(path, "wb") as f:
        f.write(b"RIFF")
        f.write(struct.pack("<I", 36 + len(data)))
        f.write(b"WAVE")
        f.write(b"fmt ")
        f.write(struct.pack("<IHHIIHH", 16, 1, 1, clip.sample_rate, clip.sample_rate * 2, 2, 16))
        f.write(b"data")
        f.write(struct.pack("<I", len(data)))
        f.write(data)


def resample(clip: AudioClip, target_rate: int) -> AudioClip:
    """Band-limited resampling via a Hann-windowed sinc, 64 taps per side.

    Output length is round(n * target / source). When downsampling the sinc
    cutoff shrinks to the output Nyquist; taps are normalized per output
    sample so constant signals pass through exactly.
    """
    if target_rate <= 0:
        raise ValueError(f"target_rate must be positive, got {target_rate}")
    if target_rate == clip.sample_rate:
        return clip

    x = clip.samples
    n_in = len(x)
    ratio = target_rate / clip.sample_rate
    n_out = int(round(n_in * ratio))
    if n_out < 1:
        raise ValueError(f"resampling {n_in} samples to rate {target_rate} yields an empty clip")
    cutoff = min(1.0, ratio)
    taps = SINC_TAPS_PER_SIDE

    # Fractional source position of each output sample.
    t = np.arange(n_out, dtype=np.float64) / ratio
    base = np.floor(t).astype(np.int64)
    offsets = np.arange(-taps + 1, taps + 1)
    idx = base[:, None] + offsets[None, :]
    u = t[:, None] - idx
    window = 0.5 * (1.0 + np.cos(np.pi * u / (taps + 1)))
    kernel = cutoff * np.sinc(cutoff * u) * window
    kernel /= kernel.sum(axis=1, keepdims=True)

    padded = np.concatenate([np.zeros(taps), x, np.zeros(taps + 1)])
    y = np.sum(kernel * padded[idx + taps], axis=1)
    return AudioClip(samples=y, sample_rate=int(target_rate))


def normalize_duration(clip: AudioClip, seconds: float = 1.0) -> AudioClip:
    """Trim to the first `seconds` or zero-pad the tail to exactly that length."""
    if seconds <= 0:
        raise ValueError(f"duration must be positive, got {seconds}")
    target = int(round(clip.sample_rate * seconds))
    x = clip.samples
    if len(x) >= target:
        out = x[:target]
    else:
        out = np.concatenate([x, np.zeros(target - len(x))])
    return AudioClip(samples=out, sample_rate=clip.sample_rate)
