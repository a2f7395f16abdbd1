"""Acceptance suite: one test per criterion, one printed verdict line each.

Run with `pytest tests/test_acceptance.py -v -s`. The synthetic-trend
criterion trains 9 models (3 K values x 3 seeds) and takes a few minutes;
everything else is quick.
"""
import itertools
import math
import time
from pathlib import Path

import numpy as np
import pytest

from conftest import relative_error
from protoaudio import autodiff as ad
from protoaudio.backbone import BackboneConfig, embed, init_params
from protoaudio.cli import ExperimentConfig, ingest_directory, run_experiment
from protoaudio.features import FeatureParams, mel_spectrogram, mel_to_hz, hz_to_mel
from protoaudio.fewshot import (
    EpisodeSpec,
    LabeledPool,
    classify_queries,
    compute_prototypes,
    episode_loss,
    evaluate,
    train,
)
from protoaudio.audio_io import AudioClip, resample
from protoaudio.seeding import derive_seed
from protoaudio.stats import bootstrap_equivalence, tost_equivalence, wilcoxon_signed_rank
from protoaudio.synth import generate_dataset, persist_wavs
from protoaudio.tsne import TsneConfig, _kl_and_grad, _squared_distances, calibrate_perplexity, tsne_embed

T95_DF1598 = 1.6458078680051065  # frozen from the quadrature oracle


def verdict(number: int, description: str, ok: bool):
    print(f"\nCRITERION {number} {'PASS' if ok else 'FAIL'}: {description}")
    assert ok, f"criterion {number} failed: {description}"


# -----------------------------------------------------------------------------
# 1. Gradient correctness, < 60 s
# -----------------------------------------------------------------------------

def test_criterion_1_gradient_correctness():
    from protoaudio import kernels

    start = time.perf_counter()
    cfg = BackboneConfig(input_size=(64, 64), block_channels=(2, 2, 2, 2))
    sup_labels = np.array([0, 1])
    qry_labels = np.array([0, 1])

    def signature(x_data, values):
        """ReLU sign pattern and pool argmax codes; central differences are
        only valid where these are constant across the probe interval."""
        sig = []
        cur = x_data
        for i in range(len(cfg.block_channels)):
            w, b = values[f"block{i}.weight"], values[f"block{i}.bias"]
            conv = kernels.conv2d_forward(np.ascontiguousarray(cur), w, 1, 1)
            conv += b[None, :, None, None]
            sig.append(conv > 0)
            pooled, idx = kernels.maxpool2_forward(np.where(conv > 0, conv, 0.0))
            sig.append(idx.copy())
            cur = pooled
        return sig

    def loss_value(x_data, values):
        with ad.no_grad():
            p = {k: ad.Tensor(v) for k, v in values.items()}
            emb = embed(ad.Tensor(x_data), p, cfg)
            protos = compute_prototypes(ad.slice_rows(emb, 0, 2), sup_labels)
            _, logits = classify_queries(ad.slice_rows(emb, 2, 4), protos)
            return float(episode_loss(logits, qry_labels).data)

    worst = 0.0
    total_smooth = 0
    for seed in range(20):
        rng = np.random.Generator(np.random.PCG64(seed))
        params = init_params(cfg, seed=seed)
        x = rng.standard_normal((4, 1, 64, 64))
        xt = ad.Tensor(x.copy(), requires_grad=True)
        emb = embed(xt, params, cfg)
        protos = compute_prototypes(ad.slice_rows(emb, 0, 2), sup_labels)
        _, logits = classify_queries(ad.slice_rows(emb, 2, 4), protos)
        ad.backward(episode_loss(logits, qry_labels))

        values = {k: v.data for k, v in params.items()}
        names = sorted(params)
        base_sig = signature(x, values)
        h = 1e-4
        smooth_probes = 0
        attempts = 0
        while smooth_probes < 8 and attempts < 60:
            attempts += 1
            if rng.random() < 0.25:
                arr, idx = x, tuple(int(rng.integers(0, s)) for s in x.shape)
                analytic = xt.grad[idx]
            else:
                name = names[int(rng.integers(0, len(names)))]
                arr = values[name]
                idx = tuple(int(rng.integers(0, s)) for s in arr.shape)
                analytic = params[name].grad[idx]
            base = arr[idx]
            arr[idx] = base + h
            hi = loss_value(x, values)
            sig_hi = signature(x, values)
            arr[idx] = base - h
            lo = loss_value(x, values)
            sig_lo = signature(x, values)
            arr[idx] = base
            stable = all(
                np.array_equal(a, b) and np.array_equal(a, c)
                for a, b, c in zip(base_sig, sig_hi, sig_lo)
            )
            if not stable:
                continue  # kink inside the probe interval; FD is meaningless there
            numeric = (hi - lo) / (2 * h)
            worst = max(worst, abs(analytic - numeric) / max(abs(analytic), abs(numeric), 1e-6))
            smooth_probes += 1
        total_smooth += smooth_probes
        assert smooth_probes >= 8, f"seed {seed}: too few smooth probe points"
    elapsed = time.perf_counter() - start
    verdict(
        1,
        f"backbone+loss gradients vs finite differences, 20 seeds x 8 smooth probes at 64x64: "
        f"max rel err {worst:.2e} (<1e-4), {elapsed:.1f}s (<60s)",
        worst < 1e-4 and elapsed < 60.0 and total_smooth >= 160,
    )


# -----------------------------------------------------------------------------
# 2. Prototype / classification oracles
# -----------------------------------------------------------------------------

def test_criterion_2_prototype_and_classifier_oracles():
    rng = np.random.Generator(np.random.PCG64(2))
    proto_err = 0.0
    for _ in range(200):
        n, k, d = int(rng.integers(2, 6)), int(rng.integers(1, 6)), int(rng.integers(1, 10))
        emb = rng.standard_normal((n * k, d))
        labels = rng.permutation(np.repeat(np.arange(n), k))
        protos = compute_prototypes(ad.Tensor(emb), labels).data
        expected = np.stack([emb[labels == c].mean(axis=0) for c in range(n)])
        proto_err = max(proto_err, np.abs(protos - expected).max())

    classify_ok = True
    for _ in range(1000):
        m, n, d = int(rng.integers(1, 12)), int(rng.integers(2, 6)), int(rng.integers(1, 8))
        queries = rng.standard_normal((m, d))
        protos = rng.standard_normal((n, d))
        pred, _ = classify_queries(ad.Tensor(queries), ad.Tensor(protos))
        oracle = np.array(
            [min(range(n), key=lambda c: ((q - protos[c]) ** 2).sum()) for q in queries]
        )
        classify_ok &= bool(np.array_equal(pred, oracle))

    nn_ok = True
    for _ in range(100):
        support = rng.standard_normal((4, 5))
        queries = rng.standard_normal((15, 5))
        protos = compute_prototypes(ad.Tensor(support), np.arange(4))
        pred, _ = classify_queries(ad.Tensor(queries), protos)
        nn = np.array([min(range(4), key=lambda i: ((q - support[i]) ** 2).sum()) for q in queries])
        nn_ok &= bool(np.array_equal(pred, nn))

    verdict(
        2,
        f"prototype mean oracle (max err {proto_err:.1e} < 1e-12), nearest-centroid oracle on "
        f"1000 instances, K=1 == 1-NN",
        proto_err < 1e-12 and classify_ok and nn_ok,
    )


# -----------------------------------------------------------------------------
# 3. Wilcoxon exactness
# -----------------------------------------------------------------------------

def wilcoxon_oracle(d):
    d = np.asarray(d, dtype=np.float64)
    d = d[d != 0]
    mags = np.abs(d)
    order = np.argsort(mags, kind="mergesort")
    ranks = np.empty(len(d))
    srt = mags[order]
    i = 0
    while i < len(d):
        j = i
        while j + 1 < len(d) and srt[j + 1] == srt[i]:
            j += 1
        ranks[order[i : j + 1]] = (i + j) / 2 + 1
        i = j + 1
    total = ranks.sum()
    w_obs = min(ranks[d > 0].sum(), ranks[d < 0].sum())
    hits = 0
    for signs in itertools.product((0, 1), repeat=len(d)):
        w_plus = sum(r for s, r in zip(signs, ranks) if s)
        if min(w_plus, total - w_plus) <= w_obs + 1e-12:
            hits += 1
    return hits / 2 ** len(d)


def test_criterion_3_wilcoxon_exactness():
    rng = np.random.Generator(np.random.PCG64(3))
    cases = 0
    max_err = 0.0
    while cases < 100:
        n = int(rng.integers(2, 13))
        a = rng.integers(0, 7, size=n).astype(float)
        b = rng.integers(0, 7, size=n).astype(float)
        if np.all(a == b):
            continue
        res = wilcoxon_signed_rank(a, b)
        max_err = max(max_err, abs(res.p_value - wilcoxon_oracle(a - b)))
        cases += 1
    four_pairs = wilcoxon_signed_rank([2.0, 3.0, 4.0, 5.0], [1.0, 2.0, 3.0, 4.5]).p_value
    verdict(
        3,
        f"exact p == 2^n enumeration on 100 random cases (max |dp| {max_err:.1e}), "
        f"4 same-signed pairs give p = {four_pairs}",
        max_err == 0.0 and four_pairs == pytest.approx(0.125, abs=1e-15),
    )


# -----------------------------------------------------------------------------
# 4. TOST arithmetic
# -----------------------------------------------------------------------------

def exact_sample(mean, std, n):
    u = np.tile([1.0, -1.0], n // 2) * math.sqrt((n - 1) / n)
    return mean + std * u


def test_criterion_4_tost_reference_values():
    sp = 1.33 / (T95_DF1598 * math.sqrt(1 / 400 + 1 / 1200))
    a = exact_sample(73.22, sp, 400)
    b = exact_sample(79.66, sp, 1200)
    wide = tost_equivalence(a, b, margin=15.0, confidence=0.90)
    tight = tost_equivalence(a, b, margin=5.0, confidence=0.90)
    ok = (
        abs(wide.mean_diff - (-6.44)) < 1e-9
        and abs(wide.ci_low - (-7.77)) < 0.01
        and abs(wide.ci_high - (-5.11)) < 0.01
        and wide.verdict == "equivalent"
        and tight.verdict == "not-equivalent"
    )
    verdict(
        4,
        f"mean diff {wide.mean_diff:+.2f}, 90% CI [{wide.ci_low:.3f}, {wide.ci_high:.3f}] "
        f"(target [-7.77, -5.11] +/-0.01), equivalent at +/-15, not-equivalent at +/-5",
        ok,
    )


# -----------------------------------------------------------------------------
# 5. Bootstrap vs parametric consistency
# -----------------------------------------------------------------------------

def test_criterion_5_bootstrap_matches_tost():
    rng = np.random.Generator(np.random.PCG64(55))
    a = rng.normal(73.22, 9.0, size=400)
    b = rng.normal(79.66, 9.0, size=1200)
    tost = tost_equivalence(a, b, margin=15.0)
    boot1 = bootstrap_equivalence(a, b, margin=15.0, resamples=10000, seed=404)
    boot2 = bootstrap_equivalence(a, b, margin=15.0, resamples=10000, seed=404)
    ok = (
        abs(boot1.ci_low - tost.ci_low) < 0.5
        and abs(boot1.ci_high - tost.ci_high) < 0.5
        and (boot1.ci_low, boot1.ci_high) == (boot2.ci_low, boot2.ci_high)
        and boot1.verdict == tost.verdict == "equivalent"
    )
    verdict(
        5,
        f"bootstrap CI [{boot1.ci_low:.3f}, {boot1.ci_high:.3f}] vs parametric "
        f"[{tost.ci_low:.3f}, {tost.ci_high:.3f}] within 0.5, seeded rerun identical",
        ok,
    )


# -----------------------------------------------------------------------------
# 6. Synthetic K trend, < 30 min
# -----------------------------------------------------------------------------

def test_criterion_6_synthetic_trend():
    start = time.perf_counter()
    base_seed = 1234
    dataset = generate_dataset(100, seed=derive_seed(base_seed, "synth"))
    params = FeatureParams(target_size=(64, 64))
    features = {i: mel_spectrogram(c, params).values for i, c in enumerate(dataset.clips)}

    def pool(indices):
        return LabeledPool(
            arrays=[features[int(i)] for i in indices],
            labels=dataset.labels[indices],
            class_names=dataset.class_names,
        )

    train_pool, test_pool = pool(dataset.train_indices), pool(dataset.test_indices)
    cfg = BackboneConfig(input_size=(64, 64), block_channels=(16, 32, 64, 64))
    k_values, seeds = (1, 5, 15), (0, 1, 2)
    acc = {}
    for k in k_values:
        for s in seeds:
            spec = EpisodeSpec(n_way=3, k_shot=k, q_query=5)
            # lr tuned down from the module default for run-to-run stability,
            # so the K effect is not drowned by optimizer noise.
            result = train(train_pool, spec, cfg, episodes=300, lr=5e-4,
                           seed=derive_seed(base_seed, "trend", k, s))
            summary = evaluate(test_pool, spec, result.params, cfg, episodes=100,
                               seed=derive_seed(base_seed, "trend-eval", k, s))
            acc[(k, s)] = summary.mean_accuracy
    elapsed = time.perf_counter() - start

    monotone = True
    for k_lo, k_hi in zip(k_values, k_values[1:]):
        votes = sum(acc[(k_hi, s)] >= acc[(k_lo, s)] for s in seeds)
        monotone &= votes >= 2
    k15_mean = np.mean([acc[(15, s)] for s in seeds])
    table = "; ".join(
        f"K={k}: " + "/".join(f"{acc[(k, s)]:.1f}" for s in seeds) for k in k_values
    )
    verdict(
        6,
        f"accuracy by K over 3 seeds [{table}], majority-vote monotone, "
        f"K=15 mean {k15_mean:.1f}% >= 85%, {elapsed / 60:.1f} min (< 30)",
        monotone and k15_mean >= 85.0 and elapsed < 1800,
    )


# -----------------------------------------------------------------------------
# 7. DSP properties
# -----------------------------------------------------------------------------

def test_criterion_7_dsp_properties(tmp_path):
    rate = 22050
    centers = mel_to_hz(np.linspace(hz_to_mel(0.0), hz_to_mel(rate / 2), 130))[1:-1]
    params = FeatureParams(target_size=(128, 44))
    argmax_ok = True
    for band in range(15, 115, 5):
        t = np.arange(rate) / rate
        clip = AudioClip(0.8 * np.sin(2 * np.pi * centers[band] * t), rate)
        spec = mel_spectrogram(clip, params)
        argmax_ok &= int(spec.values.mean(axis=1).argmax()) == band

    silence = mel_spectrogram(AudioClip(np.zeros(rate), rate), FeatureParams(target_size=(64, 64)))
    silence_ok = bool(np.all(silence.values == 0.0))

    t = np.arange(44100) / 44100
    tone = AudioClip(0.7 * np.sin(2 * np.pi * 440.0 * t), 44100)
    res = resample(tone, rate)
    spectrum = np.abs(np.fft.rfft(res.samples * np.hanning(len(res.samples))))
    peak = np.fft.rfftfreq(len(res.samples), 1 / rate)[spectrum.argmax()]
    resample_ok = abs(peak - 440.0) <= rate / len(res.samples)

    ds = generate_dataset(6, seed=77)
    persist_wavs(ds, tmp_path / "wavs")
    pool = ingest_directory(tmp_path / "wavs", seed=0)
    trip_ok = len(pool.clips) == len(ds.clips) and sorted(pool.class_names) == sorted(ds.class_names)
    expected_per_class = {name: 6 for name in ds.class_names}
    got_per_class = {
        name: int((pool.labels == i).sum()) for i, name in enumerate(pool.class_names)
    }
    trip_ok &= got_per_class == expected_per_class

    verdict(
        7,
        "20-tone mel-band argmax, silence -> zero grid, resample keeps the 440 Hz peak, "
        "WAV persist -> ingest round-trip with zero label/count drift",
        argmax_ok and silence_ok and resample_ok and trip_ok,
    )


# -----------------------------------------------------------------------------
# 8. t-SNE calibration, gradient, clustering
# -----------------------------------------------------------------------------

def test_criterion_8_tsne():
    rng = np.random.Generator(np.random.PCG64(8))
    x = rng.standard_normal((40, 6))
    perplexity = 10.0
    p_cond = calibrate_perplexity(_squared_distances(x), perplexity)
    target = np.log2(perplexity)
    entropy_err = 0.0
    for row in p_cond:
        nz = row[row > 0]
        entropy_err = max(entropy_err, abs(-(nz * np.log2(nz)).sum() - target))

    small = rng.standard_normal((8, 5))
    p = calibrate_perplexity(_squared_distances(small), 2.0)
    p_sym = (p + p.T) / (2 * len(small))
    y, _ = tsne_embed(small, TsneConfig(perplexity=2.0, iterations=10, seed=1))
    _, grad = _kl_and_grad(p_sym, y)
    numeric = np.zeros_like(y)
    h = 1e-6
    for i in range(y.shape[0]):
        for j in range(2):
            yp, ym = y.copy(), y.copy()
            yp[i, j] += h
            ym[i, j] -= h
            numeric[i, j] = (_kl_and_grad(p_sym, yp)[0] - _kl_and_grad(p_sym, ym)[0]) / (2 * h)
    grad_err = relative_error(grad, numeric)

    points, labels = [], []
    for c in range(3):
        center = np.zeros(8)
        center[c] = 10.0 * (c + 1)
        points.append(rng.standard_normal((20, 8)) * 0.1 + center)
        labels += [c] * 20
    points = np.vstack(points)
    labels = np.array(labels)
    emb2d, _ = tsne_embed(points, TsneConfig(perplexity=15.0, iterations=1000, seed=2))
    d2 = _squared_distances(emb2d)
    np.fill_diagonal(d2, np.inf)
    agreement = (labels[np.argmin(d2, axis=1)] == labels).mean()

    verdict(
        8,
        f"entropy calibration err {entropy_err:.1e} (<1e-3), KL gradient vs FD "
        f"{grad_err:.1e} (<1e-4), cluster 1-NN agreement {agreement:.0%} (>=95%)",
        entropy_err < 1e-3 and grad_err < 1e-4 and agreement >= 0.95,
    )


# -----------------------------------------------------------------------------
# 9. End-to-end determinism
# -----------------------------------------------------------------------------

def test_criterion_9_cli_determinism(tmp_path):
    def study(out_dir):
        return ExperimentConfig.from_dict(
            {
                "dataset": {"source": "synthetic", "n_per_class": 15},
                "k_values": [1, 2],
                "q_query": 1,
                "train_episodes": 4,
                "eval_episodes": 4,
                "bootstrap_resamples": 1000,
                "features": {"n_fft": 512, "hop": 256, "n_mels": 24,
                             "f_min": 0, "f_max": 11025, "target_size": [32, 32]},
                "block_channels": [2, 3],
                "seed": 2024,
                "output_dir": str(out_dir),
            }
        )

    run_experiment(study(tmp_path / "run1"))
    run_experiment(study(tmp_path / "run2"))
    files1 = {p.relative_to(tmp_path / "run1"): p for p in sorted((tmp_path / "run1").rglob("*")) if p.is_file()}
    files2 = {p.relative_to(tmp_path / "run2"): p for p in sorted((tmp_path / "run2").rglob("*")) if p.is_file()}
    same_names = set(files1) == set(files2)
    same_bytes = same_names and all(files1[k].read_bytes() == files2[k].read_bytes() for k in files1)
    stats_present = Path(tmp_path / "run1" / "stats" / "equivalence.json").is_file()
    tsne_present = Path(tmp_path / "run1" / "tsne" / "points.csv").is_file()
    n_files = len(files1)
    verdict(
        9,
        f"two identical CLI studies (4 tasks x 2 K + stats + t-SNE, {n_files} files) "
        "produce byte-identical payloads",
        same_names and same_bytes and stats_present and tsne_present,
    )
