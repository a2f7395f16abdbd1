import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as hst

from protoaudio.audio_io import AudioClip
from protoaudio.features import (
    FeatureParams,
    hz_to_mel,
    mel_filterbank,
    mel_spectrogram,
    read_grid_csv,
    resize_bilinear,
    stft_power,
    write_grid_csv,
    write_grid_pgm,
)

RATE = 22050


def tone(freq: float, rate: int = RATE, seconds: float = 1.0, amp: float = 0.8) -> AudioClip:
    t = np.arange(int(rate * seconds)) / rate
    return AudioClip(amp * np.sin(2 * np.pi * freq * t), rate)


# --- stft -------------------------------------------------------------------

def test_stft_zero_clip_is_zero():
    clip = AudioClip(np.zeros(4096), RATE)
    power = stft_power(clip, 1024, 256)
    assert np.all(power == 0.0)


def test_stft_frame_count():
    clip = AudioClip(np.zeros(22050), RATE)
    power = stft_power(clip, 2048, 512)
    assert power.shape == (1025, 44)


def test_stft_bin_center_tone_argmax_and_dft_oracle():
    n_fft, hop, k = 2048, 512, 100
    freq = k * RATE / n_fft
    clip = tone(freq)
    power = stft_power(clip, n_fft, hop)
    interior = power[:, 2:-2]
    assert np.all(interior.argmax(axis=0) == k)

    # Direct O(n^2) DFT of one interior frame must match the FFT column.
    frame_idx = 10
    pad = n_fft // 2
    padded = np.pad(clip.samples, pad, mode="reflect")
    window = 0.5 - 0.5 * np.cos(2 * np.pi * np.arange(n_fft) / n_fft)
    frame = padded[frame_idx * hop : frame_idx * hop + n_fft] * window
    bins = np.arange(n_fft // 2 + 1)
    angles = -2j * np.pi * np.outer(bins, np.arange(n_fft)) / n_fft
    direct = np.abs(np.exp(angles) @ frame) ** 2
    np.testing.assert_allclose(power[:, frame_idx], direct, rtol=1e-8, atol=1e-6)


def test_stft_requires_power_of_two():
    clip = AudioClip(np.zeros(4096), RATE)
    with pytest.raises(ValueError, match="power of two"):
        stft_power(clip, 1000, 256)


def test_stft_hop_larger_than_window():
    clip = AudioClip(np.zeros(4096), RATE)
    with pytest.raises(ValueError, match="hop"):
        stft_power(clip, 1024, 2048)


# --- mel filterbank ----------------------------------------------------------

def test_mel_scale_at_zero():
    assert hz_to_mel(0.0) == 0.0


def test_mel_scale_at_700():
    assert hz_to_mel(700.0) == pytest.approx(2595.0 * math.log10(2.0), rel=1e-12)


def test_filterbank_rows_are_unit_peak_unimodal():
    fb = mel_filterbank(128, 2048, RATE, 0.0, RATE / 2)
    assert fb.shape == (128, 1025)
    assert np.all(fb >= 0.0)
    np.testing.assert_allclose(fb.max(axis=1), 1.0)
    for row in fb:
        d = np.diff(row)
        # Unimodal: never rises again after the first descent.
        falling = False
        for step in d:
            if step < 0:
                falling = True
            elif step > 0 and falling:
                pytest.fail("filter row is not unimodal")


def test_filterbank_fmax_above_nyquist():
    with pytest.raises(ValueError, match="Nyquist"):
        mel_filterbank(64, 1024, RATE, 0.0, RATE)


# --- mel spectrogram ---------------------------------------------------------

def test_silence_maps_to_zero_output():
    clip = AudioClip(np.zeros(22050), RATE)
    spec = mel_spectrogram(clip, FeatureParams(target_size=(64, 64)))
    assert spec.values.shape == (64, 64)
    assert np.all(spec.values == 0.0)


def test_standardization_before_resize():
    clip = tone(1500)
    # target equal to the natural grid makes the resize an identity.
    params = FeatureParams(target_size=(128, 44))
    spec = mel_spectrogram(clip, params)
    assert abs(spec.values.mean()) < 1e-6
    assert abs(spec.values.std() - 1.0) < 1e-6


def test_default_output_is_224():
    spec = mel_spectrogram(tone(440))
    assert spec.values.shape == (224, 224)


def test_mel_spectrogram_deterministic():
    a = mel_spectrogram(tone(440), FeatureParams(target_size=(64, 64)))
    b = mel_spectrogram(tone(440), FeatureParams(target_size=(64, 64)))
    np.testing.assert_array_equal(a.values, b.values)


def band_centers(n_mels: int, n_fft: int, rate: int, f_min: float, f_max: float) -> np.ndarray:
    from protoaudio.features import mel_to_hz

    corners = mel_to_hz(np.linspace(hz_to_mel(f_min), hz_to_mel(f_max), n_mels + 2))
    return corners[1:-1]


def test_pure_tone_band_argmax():
    n_mels = 128
    centers = band_centers(n_mels, 2048, RATE, 0.0, RATE / 2)
    params = FeatureParams(n_mels=n_mels, target_size=(n_mels, 44))
    for band in range(20, 120, 5):
        spec = mel_spectrogram(tone(centers[band]), params)
        assert spec.values.mean(axis=1).argmax() == band


# --- resize ------------------------------------------------------------------

def bilinear_oracle(grid: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Independently coded scalar-loop bilinear interpolation (align corners false)."""
    in_h, in_w = grid.shape
    out = np.zeros((out_h, out_w))
    for r in range(out_h):
        for c in range(out_w):
            sr = min(max((r + 0.5) * in_h / out_h - 0.5, 0.0), in_h - 1.0)
            sc = min(max((c + 0.5) * in_w / out_w - 0.5, 0.0), in_w - 1.0)
            r0, c0 = int(math.floor(sr)), int(math.floor(sc))
            r1, c1 = min(r0 + 1, in_h - 1), min(c0 + 1, in_w - 1)
            fr, fc = sr - r0, sc - c0
            out[r, c] = (
                grid[r0, c0] * (1 - fr) * (1 - fc)
                + grid[r0, c1] * (1 - fr) * fc
                + grid[r1, c0] * fr * (1 - fc)
                + grid[r1, c1] * fr * fc
            )
    return out


def test_resize_identity():
    rng = np.random.Generator(np.random.PCG64(3))
    grid = rng.standard_normal((17, 23))
    out = resize_bilinear(grid, 17, 23)
    np.testing.assert_allclose(out, grid, atol=1e-12)


def test_resize_constant():
    out = resize_bilinear(np.full((5, 7), 3.25), 11, 4)
    np.testing.assert_allclose(out, 3.25)


def test_resize_2x2_to_4x4_matches_oracle():
    grid = np.array([[0.0, 1.0], [2.0, 3.0]])
    out = resize_bilinear(grid, 4, 4)
    np.testing.assert_allclose(out, bilinear_oracle(grid, 4, 4), atol=1e-12)


def test_resize_random_matches_oracle():
    rng = np.random.Generator(np.random.PCG64(9))
    grid = rng.standard_normal((6, 9))
    out = resize_bilinear(grid, 13, 5)
    np.testing.assert_allclose(out, bilinear_oracle(grid, 13, 5), atol=1e-12)


@settings(max_examples=25, deadline=None)
@given(
    h=hst.integers(2, 12),
    w=hst.integers(2, 12),
    oh=hst.integers(1, 20),
    ow=hst.integers(1, 20),
    seed=hst.integers(0, 1000),
)
def test_resize_extrema_bounded(h, w, oh, ow, seed):
    rng = np.random.Generator(np.random.PCG64(seed))
    grid = rng.standard_normal((h, w))
    out = resize_bilinear(grid, oh, ow)
    assert out.min() >= grid.min() - 1e-12
    assert out.max() <= grid.max() + 1e-12


def test_resize_zero_dim():
    with pytest.raises(ValueError, match="output dim"):
        resize_bilinear(np.ones((3, 3)), 0, 4)


# --- export ------------------------------------------------------------------

def test_grid_csv_roundtrip(tmp_path):
    rng = np.random.Generator(np.random.PCG64(11))
    grid = rng.standard_normal((8, 5))
    path = tmp_path / "grid.csv"
    write_grid_csv(grid, path)
    back = read_grid_csv(path)
    np.testing.assert_allclose(back, grid, rtol=1e-8)


def test_grid_pgm_format(tmp_path):
    grid = np.array([[0.0, 1.0], [2.0, 3.0]])
    path = tmp_path / "grid.pgm"
    write_grid_pgm(grid, path)
    raw = path.read_bytes()
    assert raw.startswith(b"P5\n2 2\n255\n")
    pixels = np.frombuffer(raw[len(b"P5\n2 2\n255\n") :], dtype=np.uint8)
    np.testing.assert_array_equal(pixels, [0, 85, 170, 255])
