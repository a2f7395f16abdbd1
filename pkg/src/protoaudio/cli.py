"""Config-driven experiment runner.

One JSON config describes a whole study: dataset source, tasks (one
multiclass plus binary pairs by default), K values, training/evaluation
sizes, the equivalence-test margin and feature/backbone settings. Outputs
are plain JSON/CSV/PGM/SVG files plus a Markdown summary, all byte-stable
for a fixed config.
"""
from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass, field
from itertools import combinations
from pathlib import Path

import numpy as np

from . import autodiff as ad
from . import stats as st
from .audio_io import AudioClip, WavFormatError, load_wav, normalize_duration, resample
from .backbone import BackboneConfig, embed
from .features import FeatureParams, mel_spectrogram, write_grid_pgm
from .fewshot import (
    EpisodeSpec,
    LabeledPool,
    evaluate,
    summary_to_dict,
    train,
    write_accuracy_csv,
    write_confusion_csv,
)
from .seeding import derive_seed, rng_for
from .synth import LabeledClips, generate_dataset
from .tsne import TsneConfig, tsne_embed, write_points_csv, write_scatter_svg

__all__ = [
    "ConfigError",
    "IngestError",
    "TaskConfig",
    "ExperimentConfig",
    "ingest_directory",
    "pool_from_clips",
    "run_experiment",
    "main",
]

SUMMARY_DECIMALS = 4


class ConfigError(ValueError):
    """Invalid configuration; the CLI exits with status 2."""


class IngestError(ConfigError):
    """Dataset directory missing or structurally unusable."""


@dataclass(frozen=True)
class TaskConfig:
    name: str
    kind: str
    classes: tuple[str, ...]

    def __post_init__(self):
        if self.kind not in ("binary", "multiclass"):
            raise ConfigError(f"task {self.name!r}: kind must be binary or multiclass, got {self.kind!r}")
        expected = 2 if self.kind == "binary" else 3
        if len(self.classes) != expected:
            raise ConfigError(
                f"task {self.name!r}: {self.kind} task needs {expected} classes, got {len(self.classes)}"
            )
        object.__setattr__(self, "classes", tuple(self.classes))


@dataclass
class ExperimentConfig:
    source: str = "synthetic"
    n_per_class: int = 100
    classes: tuple[str, ...] | None = None
    tasks: tuple[TaskConfig, ...] | None = None
    k_values: tuple[int, ...] = (1, 5, 10, 15)
    q_query: int = 5
    train_episodes: int = 300
    eval_episodes: int = 100
    equivalence_margin: float = 15.0
    confidence: float = 0.90
    bootstrap_resamples: int = 10000
    features: FeatureParams = field(default_factory=FeatureParams)
    block_channels: tuple[int, ...] = (16, 32, 64, 64)
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    tsne_perplexity: float = 15.0
    tsne_iterations: int = 1000
    tsne_learning_rate: float = 100.0
    seed: int = 0
    output_dir: str = "out"
    skip_undecodable: bool = False

    def __post_init__(self):
        if not self.k_values or any(k < 1 for k in self.k_values):
            raise ConfigError(f"k_values must be positive, got {self.k_values}")
        if self.q_query < 1:
            raise ConfigError(f"q_query must be >= 1, got {self.q_query}")
        if self.train_episodes < 0 or self.eval_episodes < 1:
            raise ConfigError(
                f"need train_episodes >= 0 and eval_episodes >= 1, got "
                f"{self.train_episodes} and {self.eval_episodes}"
            )
        if self.equivalence_margin <= 0:
            raise ConfigError(f"equivalence_margin must be positive, got {self.equivalence_margin}")
        self.k_values = tuple(self.k_values)
        self.block_channels = tuple(self.block_channels)
        try:
            BackboneConfig(input_size=self.features.target_size, block_channels=self.block_channels)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None

    @property
    def backbone(self) -> BackboneConfig:
        return BackboneConfig(input_size=self.features.target_size, block_channels=self.block_channels)

    @classmethod
    def from_dict(cls, raw: dict) -> "ExperimentConfig":
        raw = dict(raw)
        known: dict = {}
        dataset = raw.pop("dataset", None)
        if dataset is not None:
            known["source"] = dataset.get("source", "synthetic")
            if "n_per_class" in dataset:
                known["n_per_class"] = int(dataset["n_per_class"])
        feats = raw.pop("features", None)
        if feats is not None:
            try:
                known["features"] = FeatureParams(
                    n_fft=int(feats.get("n_fft", 2048)),
                    hop=int(feats.get("hop", 512)),
                    n_mels=int(feats.get("n_mels", 128)),
                    f_min=float(feats.get("f_min", 0.0)),
                    f_max=float(feats.get("f_max", 11025.0)),
                    target_size=tuple(feats.get("target_size", (224, 224))),
                )
            except ValueError as exc:
                raise ConfigError(f"features: {exc}") from None
        tasks = raw.pop("tasks", None)
        if tasks is not None:
            known["tasks"] = tuple(
                TaskConfig(name=t["name"], kind=t["kind"], classes=tuple(t["classes"])) for t in tasks
            )
        if "classes" in raw:
            known["classes"] = tuple(raw.pop("classes"))
        tsne_cfg = raw.pop("tsne", None)
        if tsne_cfg is not None:
            known["tsne_perplexity"] = float(tsne_cfg.get("perplexity", 15.0))
            known["tsne_iterations"] = int(tsne_cfg.get("iterations", 1000))
            known["tsne_learning_rate"] = float(tsne_cfg.get("learning_rate", 100.0))
        field_names = {f for f in cls.__dataclass_fields__}
        for key, value in raw.items():
            if key not in field_names:
                raise ConfigError(f"unknown config key {key!r}")
            known[key] = tuple(value) if isinstance(value, list) else value
        try:
            return cls(**known)
        except TypeError as exc:
            raise ConfigError(str(exc)) from None

    @classmethod
    def from_file(cls, path) -> "ExperimentConfig":
        try:
            with open(path, "r", encoding="utf-8") as f:
                raw = json.load(f)
        except FileNotFoundError:
            raise ConfigError(f"config file not found: {path}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file {path} is not valid JSON: {exc}") from None
        return cls.from_dict(raw)

    def resolved_tasks(self, class_names: list[str]) -> list[TaskConfig]:
        """Explicit tasks, or the default study: multiclass plus all pairs.

        The optional `classes` list restricts the universe to a subset of the
        dataset's classes.
        """
        if self.classes is not None:
            for cname in self.classes:
                if cname not in class_names:
                    raise ConfigError(f"config class list names unknown class {cname!r}")
            universe = list(self.classes)
        else:
            universe = list(class_names)
        if self.tasks is not None:
            for task in self.tasks:
                for cname in task.classes:
                    if cname not in universe:
                        raise ConfigError(f"task {task.name!r} references unknown class {cname!r}")
            return list(self.tasks)
        if len(universe) != 3:
            raise ConfigError(
                f"default task derivation needs exactly 3 classes, got {universe}"
            )
        tasks = [TaskConfig(name="multiclass", kind="multiclass", classes=tuple(universe))]
        for a, b in combinations(universe, 2):
            tasks.append(TaskConfig(name=f"{a}_vs_{b}", kind="binary", classes=(a, b)))
        return tasks


# ---------------------------------------------------------------------------
# Dataset assembly
# ---------------------------------------------------------------------------

def ingest_directory(
    root,
    *,
    seed: int = 0,
    target_rate: int = 22050,
    seconds: float = 1.0,
    skip_undecodable: bool = False,
) -> LabeledClips:
    """Build a labeled clip pool from <root>/<class_name>/*.wav.

    Files are sorted lexicographically per class, then split 80/20 with a
    seeded shuffle. Undecodable files raise unless skip_undecodable is set.
    """
    root = Path(root)
    if not root.is_dir():
        raise IngestError(f"dataset directory not found: {root}")
    class_dirs = sorted(p for p in root.iterdir() if p.is_dir())
    if not class_dirs:
        raise IngestError(f"no class directories under {root}")
    clips: list[AudioClip] = []
    labels: list[int] = []
    ids: list[str] = []
    train_idx: list[int] = []
    test_idx: list[int] = []
    class_names = [p.name for p in class_dirs]
    for class_id, class_dir in enumerate(class_dirs):
        files = sorted(class_dir.glob("*.wav"))
        loaded: list[tuple[AudioClip, str]] = []
        for wav_path in files:
            try:
                clip = load_wav(wav_path)
            except WavFormatError as exc:
                if skip_undecodable:
                    print(f"skipping undecodable file {wav_path}: {exc}", file=sys.stderr)
                    continue
                raise WavFormatError(f"{wav_path}: {exc}") from exc
            clip = normalize_duration(resample(clip, target_rate), seconds)
            loaded.append((clip, wav_path.stem))
        if not loaded:
            raise IngestError(f"class directory {class_dir.name!r} has no usable wav files")
        n_train = int(len(loaded) * 0.8)
        order = rng_for(seed, "split", class_dir.name).permutation(len(loaded))
        train_local = set(order[:n_train].tolist())
        for local, (clip, stem) in enumerate(loaded):
            global_idx = len(clips)
            clips.append(clip)
            labels.append(class_id)
            ids.append(f"{class_dir.name}/{stem}")
            (train_idx if local in train_local else test_idx).append(global_idx)
    return LabeledClips(
        clips=clips,
        labels=np.asarray(labels, dtype=np.int64),
        ids=ids,
        class_names=class_names,
        train_indices=np.asarray(train_idx, dtype=np.int64),
        test_indices=np.asarray(test_idx, dtype=np.int64),
    )


def pool_from_clips(
    dataset: LabeledClips,
    indices: np.ndarray,
    class_subset: tuple[str, ...],
    feature_cache: dict[int, np.ndarray],
) -> LabeledPool:
    """Project cached features for `indices` onto a task's class subset."""
    keep_ids = [dataset.class_names.index(name) for name in class_subset]
    remap = {gid: local for local, gid in enumerate(keep_ids)}
    arrays: list[np.ndarray] = []
    labels: list[int] = []
    for idx in indices:
        gid = int(dataset.labels[idx])
        if gid in remap:
            arrays.append(feature_cache[int(idx)])
            labels.append(remap[gid])
    return LabeledPool(arrays=arrays, labels=np.asarray(labels, dtype=np.int64),
                       class_names=list(class_subset))


def _compute_features(dataset: LabeledClips, params: FeatureParams) -> dict[int, np.ndarray]:
    return {
        idx: mel_spectrogram(clip, params).values
        for idx, clip in enumerate(dataset.clips)
    }


def _embed_arrays(arrays: list[np.ndarray], params, cfg: BackboneConfig, chunk: int = 8) -> np.ndarray:
    out = []
    with ad.no_grad():
        for start in range(0, len(arrays), chunk):
            batch = np.stack(arrays[start : start + chunk])[:, None, :, :]
            out.append(embed(ad.Tensor(batch), params, cfg).data)
    return np.concatenate(out, axis=0)


# ---------------------------------------------------------------------------
# Report writing
# ---------------------------------------------------------------------------

def _write_json(path, obj) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        json.dump(obj, f, indent=2, sort_keys=True)
        f.write("\n")


def _fmt(value: float) -> str:
    return f"{value:.{SUMMARY_DECIMALS}f}"


def _markdown_summary(task_results: dict, stats_block: dict | None, k_values) -> str:
    lines = ["# Study summary", ""]
    binary_tasks = sorted(t for t, info in task_results.items() if info["kind"] == "binary")
    multi_tasks = sorted(t for t, info in task_results.items() if info["kind"] == "multiclass")

    if binary_tasks:
        lines += ["## Binary accuracy (% mean +/- SE)", ""]
        lines.append("| K-shot | " + " | ".join(binary_tasks) + " |")
        lines.append("|---" * (len(binary_tasks) + 1) + "|")
        for k in k_values:
            cells = []
            for t in binary_tasks:
                s = task_results[t]["by_k"][k]
                cells.append(f"{_fmt(s['mean_accuracy'])} +/- {_fmt(s['std_error'])}")
            lines.append(f"| {k} | " + " | ".join(cells) + " |")
        lines.append("")

    for t in multi_tasks:
        lines += [f"## {t} accuracy (% mean +/- SE)", ""]
        lines.append("| K-shot | accuracy |")
        lines.append("|---|---|")
        for k in k_values:
            s = task_results[t]["by_k"][k]
            lines.append(f"| {k} | {_fmt(s['mean_accuracy'])} +/- {_fmt(s['std_error'])} |")
        lines.append("")
        class_names = [pc["class"] for pc in task_results[t]["by_k"][k_values[0]]["per_class"]]
        lines += [f"## {t} class-level accuracy (%)", ""]
        lines.append("| K-shot | " + " | ".join(class_names) + " |")
        lines.append("|---" * (len(class_names) + 1) + "|")
        for k in k_values:
            per_class = task_results[t]["by_k"][k]["per_class"]
            cells = [f"{_fmt(pc['mean'])} +/- {_fmt(pc['std_error'])}" for pc in per_class]
            lines.append(f"| {k} | " + " | ".join(cells) + " |")
        lines.append("")

    if stats_block is not None:
        tost = stats_block["tost"]
        lines += ["## Equivalence test (TOST)", "", "| Metric | Value |", "|---|---|"]
        lines.append(f"| Mean accuracy (multiclass) | {_fmt(tost['mean_accuracy_a'])} |")
        lines.append(f"| Mean accuracy (binary) | {_fmt(tost['mean_accuracy_b'])} |")
        lines.append(f"| Mean difference | {_fmt(tost['mean_difference'])} |")
        lines.append(
            f"| {int(round(tost['confidence'] * 100))}% CI | "
            f"[{_fmt(tost['confidence_interval'][0])}, {_fmt(tost['confidence_interval'][1])}] |"
        )
        lines.append(f"| Equivalence margin | +/-{_fmt(tost['equivalence_margin'])} |")
        lines.append(f"| Result | {tost['result']} |")
        lines.append("")
        boot = stats_block["bootstrap"]
        lines += ["## Equivalence test (bootstrap)", "", "| Metric | Value |", "|---|---|"]
        lines.append(
            f"| Bootstrap {int(round(boot['confidence'] * 100))}% CI | "
            f"[{_fmt(boot['confidence_interval'][0])}, {_fmt(boot['confidence_interval'][1])}] |"
        )
        lines.append(f"| Equivalence margin | +/-{_fmt(boot['equivalence_margin'])} |")
        lines.append(f"| Result | {boot['result']} |")
        lines.append("")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# The study
# ---------------------------------------------------------------------------

def _load_dataset(config: ExperimentConfig) -> LabeledClips:
    if config.source == "synthetic":
        return generate_dataset(config.n_per_class, derive_seed(config.seed, "synth"))
    return ingest_directory(
        config.source,
        seed=config.seed,
        skip_undecodable=config.skip_undecodable,
    )


def run_experiment(config: ExperimentConfig) -> Path:
    """Run every configured (task, K) pair plus the statistical and t-SNE
    stages, writing the report bundle under config.output_dir."""
    dataset = _load_dataset(config)
    tasks = config.resolved_tasks(dataset.class_names)
    out_root = Path(config.output_dir)
    out_root.mkdir(parents=True, exist_ok=True)

    features = _compute_features(dataset, config.features)
    backbone_cfg = config.backbone

    # Fail on undersized pools before any training starts.
    need = max(config.k_values) + config.q_query
    for task in tasks:
        for split_name, indices in (("train", dataset.train_indices), ("test", dataset.test_indices)):
            split_labels = dataset.labels[indices]
            for name in task.classes:
                have = int((split_labels == dataset.class_names.index(name)).sum())
                if have < need:
                    raise ConfigError(
                        f"task {task.name!r}: class {name!r} has {have} {split_name} clips, "
                        f"fewer than K+Q = {need}"
                    )

    task_results: dict[str, dict] = {}
    trained: dict[tuple[str, int], dict] = {}
    for task in tasks:
        train_pool = pool_from_clips(dataset, dataset.train_indices, task.classes, features)
        test_pool = pool_from_clips(dataset, dataset.test_indices, task.classes, features)
        by_k: dict[int, dict] = {}
        for k in config.k_values:
            spec = EpisodeSpec(n_way=len(task.classes), k_shot=k, q_query=config.q_query)
            sub_seed = derive_seed(config.seed, task.name, k)
            result = train(
                train_pool,
                spec,
                backbone_cfg,
                episodes=config.train_episodes,
                seed=derive_seed(sub_seed, "train"),
                lr=config.learning_rate,
                beta1=config.beta1,
                beta2=config.beta2,
                eps=config.eps,
            )
            summary = evaluate(
                test_pool,
                spec,
                result.params,
                backbone_cfg,
                episodes=config.eval_episodes,
                seed=derive_seed(sub_seed, "eval"),
            )
            run_dir = out_root / task.name / str(k)
            run_dir.mkdir(parents=True, exist_ok=True)
            summary_dict = summary_to_dict(summary, task.name, decimals=SUMMARY_DECIMALS)
            _write_json(run_dir / "summary.json", summary_dict)
            write_accuracy_csv(run_dir / "episodes.csv", summary.episode_accuracies)
            write_confusion_csv(run_dir / "confusion.csv", summary.confusion, summary.class_names)
            ad.save_checkpoint(run_dir / "model.ckpt", result.params)
            by_k[k] = summary_dict
            trained[(task.name, k)] = {"params": result.params, "test_pool": test_pool}
        task_results[task.name] = {"kind": task.kind, "by_k": by_k}

    binary_names = [t.name for t in tasks if t.kind == "binary"]
    multi_names = [t.name for t in tasks if t.kind == "multiclass"]

    stats_block = None
    if binary_names and multi_names:
        stats_block = _run_stats_stage(config, out_root, binary_names, multi_names)

    if multi_names:
        _run_tsne_stage(config, out_root, tasks, trained, backbone_cfg)
        _export_sample_figures(out_root, tasks, dataset, features)

    with open(out_root / "summary.md", "w", encoding="utf-8", newline="\n") as f:
        f.write(_markdown_summary(task_results, stats_block, config.k_values))
    _write_json(out_root / "config.json", _config_payload(config))
    return out_root


def _config_payload(config: ExperimentConfig) -> dict:
    return {
        "source": config.source,
        "n_per_class": config.n_per_class,
        "k_values": list(config.k_values),
        "q_query": config.q_query,
        "train_episodes": config.train_episodes,
        "eval_episodes": config.eval_episodes,
        "equivalence_margin": config.equivalence_margin,
        "confidence": config.confidence,
        "features": {
            "n_fft": config.features.n_fft,
            "hop": config.features.hop,
            "n_mels": config.features.n_mels,
            "f_min": config.features.f_min,
            "f_max": config.features.f_max,
            "target_size": list(config.features.target_size),
        },
        "block_channels": list(config.block_channels),
        "learning_rate": config.learning_rate,
        "seed": config.seed,
    }


def _run_stats_stage(config, out_root: Path, binary_names, multi_names) -> dict:
    """Pool per-episode accuracies from the emitted CSVs and run all four tests."""
    stats_dir = out_root / "stats"
    stats_dir.mkdir(parents=True, exist_ok=True)

    def episodes_of(task: str, k: int) -> np.ndarray:
        return st.load_accuracy_csv(out_root / task / str(k) / "episodes.csv")

    multi_all = np.concatenate([episodes_of(t, k) for t in multi_names for k in config.k_values])
    binary_all = np.concatenate([episodes_of(t, k) for t in binary_names for k in config.k_values])

    tost = st.tost_equivalence(multi_all, binary_all, config.equivalence_margin, config.confidence)
    boot = st.bootstrap_equivalence(
        multi_all,
        binary_all,
        config.equivalence_margin,
        resamples=config.bootstrap_resamples,
        confidence=config.confidence,
        seed=derive_seed(config.seed, "bootstrap"),
    )

    # Pair at the K level: the binary side is the mean over the binary pairs.
    multi_by_k = [float(np.mean([episodes_of(t, k).mean() for t in multi_names])) for k in config.k_values]
    binary_by_k = [float(np.mean([episodes_of(t, k).mean() for t in binary_names])) for k in config.k_values]
    paired = wilcox = None
    paired_note = None
    if len(config.k_values) >= 2:
        try:
            paired = st.paired_t_test(multi_by_k, binary_by_k).to_dict()
        except ValueError as exc:
            paired_note = str(exc)
        try:
            wilcox = st.wilcoxon_signed_rank(multi_by_k, binary_by_k).to_dict()
        except ValueError as exc:
            paired_note = str(exc)
    else:
        paired_note = "paired tests need at least two K values"

    block = {
        "labels": {"a": "multiclass", "b": "binary"},
        "pairing": "per-K mean accuracies (binary averaged over pairs)",
        "tost": _round_floats(tost.to_dict()),
        "bootstrap": _round_floats(boot.to_dict()),
        "paired_t_test": _round_floats(paired) if paired else None,
        "wilcoxon": _round_floats(wilcox) if wilcox else None,
    }
    if paired_note:
        block["paired_note"] = paired_note
    _write_json(stats_dir / "equivalence.json", block)
    return block


def _round_floats(obj, decimals: int = SUMMARY_DECIMALS):
    if isinstance(obj, float):
        return round(obj, decimals)
    if isinstance(obj, list):
        return [_round_floats(v, decimals) for v in obj]
    if isinstance(obj, dict):
        return {k: _round_floats(v, decimals) for k, v in obj.items()}
    return obj


def _run_tsne_stage(config, out_root: Path, tasks, trained, backbone_cfg) -> None:
    """Embed the multiclass test pool with the largest-K model and project to 2-D."""
    multi = next(t for t in tasks if t.kind == "multiclass")
    k_model = 15 if 15 in config.k_values else max(config.k_values)
    entry = trained[(multi.name, k_model)]
    pool = entry["test_pool"]
    points = _embed_arrays(pool.arrays, entry["params"], backbone_cfg)
    m = len(pool.arrays)
    perplexity = min(config.tsne_perplexity, max(1.01, (m - 1) / 3.0 * 0.75))
    cfg = TsneConfig(
        perplexity=perplexity,
        iterations=config.tsne_iterations,
        learning_rate=config.tsne_learning_rate,
        seed=derive_seed(config.seed, "tsne"),
    )
    coords, _ = tsne_embed(points, cfg)
    tsne_dir = out_root / "tsne"
    tsne_dir.mkdir(parents=True, exist_ok=True)
    label_names = [pool.class_names[lbl] for lbl in pool.labels]
    write_points_csv(tsne_dir / "points.csv", coords, label_names)
    write_scatter_svg(tsne_dir / "scatter.svg", coords, pool.labels, pool.class_names)


def _export_sample_figures(out_root: Path, tasks, dataset, features) -> None:
    """One PGM per class from the test split, for visual inspection."""
    fig_dir = out_root / "figures"
    fig_dir.mkdir(parents=True, exist_ok=True)
    seen = set()
    for idx in dataset.test_indices:
        label = int(dataset.labels[idx])
        if label in seen:
            continue
        seen.add(label)
        write_grid_pgm(features[int(idx)], fig_dir / f"{dataset.class_names[label]}_sample.pgm")


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------

def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="protoaudio", description="Few-shot audio study runner")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a study from a JSON config")
    run.add_argument("--config", type=str, default=None, help="path to the JSON config file")
    run.add_argument("--output", type=str, default=None, help="override the output directory")
    run.add_argument("--seed", type=int, default=None, help="override the config seed")
    run.add_argument(
        "--synthetic",
        action="store_true",
        help="run the built-in synthetic study (no config file needed)",
    )

    bench = sub.add_parser("bench", help="benchmark the compiled vs numpy kernels")
    bench.add_argument("--repeat", type=int, default=3, help="timing repetitions per case")
    bench.add_argument("--batch", type=int, default=30, help="batch size for the conv cases")
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "run":
            if args.config is None and not args.synthetic:
                raise ConfigError("either --config or --synthetic is required")
            config = (
                ExperimentConfig.from_file(args.config) if args.config else ExperimentConfig()
            )
            if args.seed is not None:
                config.seed = args.seed
            if args.output is not None:
                config.output_dir = args.output
            out = run_experiment(config)
            print(f"study complete: {out}")
        elif args.command == "bench":
            from .bench import run_benchmark

            run_benchmark(repeat=args.repeat, batch=args.batch)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
