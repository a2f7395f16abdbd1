"""Episodic few-shot classification: sampling, prototypes, training, evaluation.

An episode draws N classes, K support and Q query items per class without
replacement. Support embeddings are averaged into per-class prototypes and
queries score against them with negative squared Euclidean distance.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .backbone import BackboneConfig, embed, init_params
from .seeding import derive_seed, rng_for

__all__ = [
    "LabeledPool",
    "EpisodeSpec",
    "Episode",
    "EpisodeResult",
    "RunSummary",
    "InsufficientSamplesError",
    "sample_episode",
    "compute_prototypes",
    "classify_queries",
    "episode_loss",
    "train",
    "evaluate",
    "summary_to_dict",
    "write_accuracy_csv",
    "write_confusion_csv",
]


class InsufficientSamplesError(ValueError):
    """A class cannot supply K support plus Q query items."""


@dataclass
class LabeledPool:
    """Immutable collection of 2-D feature grids with integer class labels."""

    arrays: list[np.ndarray]
    labels: np.ndarray
    class_names: list[str]

    def __post_init__(self):
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if len(self.arrays) != len(self.labels):
            raise ValueError(f"{len(self.arrays)} arrays but {len(self.labels)} labels")
        if len(self.labels) and (self.labels.min() < 0 or self.labels.max() >= len(self.class_names)):
            raise ValueError("labels must index into class_names")

    def __len__(self) -> int:
        return len(self.arrays)

    @property
    def n_classes(self) -> int:
        return len(self.class_names)

    def indices_of_class(self, class_id: int) -> np.ndarray:
        return np.flatnonzero(self.labels == class_id)


@dataclass(frozen=True)
class EpisodeSpec:
    n_way: int
    k_shot: int
    q_query: int

    def __post_init__(self):
        if self.n_way < 2:
            raise ValueError(f"n_way must be >= 2, got {self.n_way}")
        if self.k_shot < 1 or self.q_query < 1:
            raise ValueError(f"k_shot and q_query must be >= 1, got K={self.k_shot}, Q={self.q_query}")


@dataclass
class Episode:
    """Support/query items hold (grid, episode-local label); ids are pool indices."""

    support: list[tuple[np.ndarray, int]]
    query: list[tuple[np.ndarray, int]]
    class_map: dict[int, int]
    support_ids: list[int] = field(default_factory=list)
    query_ids: list[int] = field(default_factory=list)


@dataclass
class EpisodeResult:
    overall_accuracy: float
    per_class_correct: np.ndarray
    per_class_total: np.ndarray
    confusion: np.ndarray
    class_map: dict[int, int]


@dataclass
class RunSummary:
    """Aggregate over evaluation episodes; accuracies are percentages."""

    n_way: int
    k_shot: int
    q_query: int
    n_episodes: int
    mean_accuracy: float
    std_error: float
    per_class_mean: dict[int, float]
    per_class_std_error: dict[int, float]
    confusion: np.ndarray
    class_names: list[str]
    episode_accuracies: list[float]


def sample_episode(pool: LabeledPool, spec: EpisodeSpec, rng: np.random.Generator) -> Episode:
    """Draw N classes, then K+Q distinct items per class, all without replacement."""
    if spec.n_way > pool.n_classes:
        raise InsufficientSamplesError(
            f"episode needs {spec.n_way} classes but the pool has {pool.n_classes}"
        )
    need = spec.k_shot + spec.q_query
    for class_id, name in enumerate(pool.class_names):
        have = len(pool.indices_of_class(class_id))
        if have < need:
            raise InsufficientSamplesError(
                f"class '{name}' has {have} samples, {need - have} short of K+Q={need}"
            )
    chosen = rng.choice(pool.n_classes, size=spec.n_way, replace=False)
    support: list[tuple[np.ndarray, int]] = []
    query: list[tuple[np.ndarray, int]] = []
    support_ids: list[int] = []
    query_ids: list[int] = []
    class_map: dict[int, int] = {}
    for ep_label, class_id in enumerate(chosen):
        class_map[ep_label] = int(class_id)
        picks = rng.permutation(pool.indices_of_class(int(class_id)))[:need]
        for idx in picks[: spec.k_shot]:
            support.append((pool.arrays[idx], ep_label))
            support_ids.append(int(idx))
        for idx in picks[spec.k_shot :]:
            query.append((pool.arrays[idx], ep_label))
            query_ids.append(int(idx))
    return Episode(support=support, query=query, class_map=class_map,
                   support_ids=support_ids, query_ids=query_ids)


def compute_prototypes(support_embeddings: ad.Tensor, labels) -> ad.Tensor:
    """Per-class arithmetic mean of [N*K, D] support embeddings -> [N, D]."""
    labels = np.asarray(labels, dtype=np.int64)
    if labels.ndim != 1 or len(labels) != support_embeddings.data.shape[0]:
        raise ValueError(f"labels shape {labels.shape} does not match embeddings")
    n_way = int(labels.max()) + 1 if len(labels) else 0
    counts = np.bincount(labels, minlength=n_way)
    if len(labels) % max(n_way, 1) or np.any(counts != len(labels) // n_way):
        raise ValueError(
            f"label multiset {counts.tolist()} is not N x K balanced"
        )
    return ad.group_mean(support_embeddings, labels, n_way)


def classify_queries(query_embeddings: ad.Tensor, prototypes: ad.Tensor) -> tuple[np.ndarray, ad.Tensor]:
    """Negative squared Euclidean logits plus argmax predictions (ties -> lowest class)."""
    logits = ad.scale(ad.pairwise_sqdist(query_embeddings, prototypes), -1.0)
    predictions = np.argmax(logits.data, axis=1)
    return predictions, logits


def episode_loss(logits: ad.Tensor, true_labels) -> ad.Tensor:
    """Mean cross-entropy of the distance-softmax over query logits."""
    return ad.cross_entropy_logits(logits, np.asarray(true_labels, dtype=np.int64))


def _episode_batch(episode: Episode) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    grids = [g for g, _ in episode.support] + [g for g, _ in episode.query]
    x = np.stack(grids)[:, None, :, :]
    sup_labels = np.array([lbl for _, lbl in episode.support], dtype=np.int64)
    qry_labels = np.array([lbl for _, lbl in episode.query], dtype=np.int64)
    return x, sup_labels, qry_labels


@dataclass
class TrainResult:
    params: dict[str, ad.Tensor]
    losses: list[float]


def train(
    pool: LabeledPool,
    spec: EpisodeSpec,
    cfg: BackboneConfig,
    *,
    episodes: int,
    seed: int,
    lr: float = 1e-3,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8,
    params: dict[str, ad.Tensor] | None = None,
) -> TrainResult:
    """Episodic training loop; bit-deterministic for a given seed.

    Per episode: sample -> embed support and query through the shared
    backbone in one batch -> prototypes -> distance logits -> cross-entropy
    -> backward -> Adam step.
    """
    if params is None:
        params = init_params(cfg, derive_seed(seed, "init"))
    rng = rng_for(seed, "episodes")
    optimizer = ad.Adam(params.values(), lr=lr, beta1=beta1, beta2=beta2, eps=eps)
    losses: list[float] = []
    n_support = spec.n_way * spec.k_shot
    n_query = spec.n_way * spec.q_query
    for _ in range(episodes):
        episode = sample_episode(pool, spec, rng)
        x, sup_labels, qry_labels = _episode_batch(episode)
        emb = embed(ad.Tensor(x), params, cfg)
        sup_emb = ad.slice_rows(emb, 0, n_support)
        qry_emb = ad.slice_rows(emb, n_support, n_support + n_query)
        prototypes = compute_prototypes(sup_emb, sup_labels)
        _, logits = classify_queries(qry_emb, prototypes)
        loss = episode_loss(logits, qry_labels)
        value = float(loss.data)
        if not np.isfinite(value):
            raise FloatingPointError(f"non-finite training loss at episode {len(losses)}")
        ad.backward(loss)
        optimizer.step()
        losses.append(value)
    return TrainResult(params=params, losses=losses)


def _run_episode(pool, spec, params, cfg, rng) -> EpisodeResult:
    episode = sample_episode(pool, spec, rng)
    x, sup_labels, qry_labels = _episode_batch(episode)
    with ad.no_grad():
        emb = embed(ad.Tensor(x), params, cfg)
        n_support = spec.n_way * spec.k_shot
        sup_emb = ad.slice_rows(emb, 0, n_support)
        qry_emb = ad.slice_rows(emb, n_support, emb.data.shape[0])
        prototypes = compute_prototypes(sup_emb, sup_labels)
        predictions, _ = classify_queries(qry_emb, prototypes)
    confusion = np.zeros((spec.n_way, spec.n_way), dtype=np.int64)
    for true, pred in zip(qry_labels, predictions):
        confusion[true, pred] += 1
    per_class_total = confusion.sum(axis=1)
    per_class_correct = np.diag(confusion).copy()
    overall = per_class_correct.sum() / per_class_total.sum()
    return EpisodeResult(
        overall_accuracy=float(overall),
        per_class_correct=per_class_correct,
        per_class_total=per_class_total,
        confusion=confusion,
        class_map=episode.class_map,
    )


def _mean_and_se(values: np.ndarray) -> tuple[float, float]:
    mean = float(values.mean())
    if len(values) < 2:
        return mean, 0.0
    return mean, float(values.std(ddof=1) / np.sqrt(len(values)))


def evaluate(
    pool: LabeledPool,
    spec: EpisodeSpec,
    params: dict[str, ad.Tensor],
    cfg: BackboneConfig,
    *,
    episodes: int = 100,
    seed: int = 0,
) -> RunSummary:
    """Frozen-parameter evaluation over independently seeded episodes.

    Episode i uses an RNG stream derived from (seed, i), so the summary is
    reproducible and episodes could be replayed in any order.
    """
    if episodes < 1:
        raise ValueError(f"need at least one evaluation episode, got {episodes}")
    n_classes = pool.n_classes
    confusion = np.zeros((n_classes, n_classes), dtype=np.int64)
    accuracies = np.empty(episodes)
    per_class_values: dict[int, list[float]] = {c: [] for c in range(n_classes)}
    for i in range(episodes):
        result = _run_episode(pool, spec, params, cfg, rng_for(seed, "episode", i))
        accuracies[i] = result.overall_accuracy * 100.0
        for ep_true in range(spec.n_way):
            g_true = result.class_map[ep_true]
            per_class_values[g_true].append(
                100.0 * result.per_class_correct[ep_true] / result.per_class_total[ep_true]
            )
            for ep_pred in range(spec.n_way):
                confusion[g_true, result.class_map[ep_pred]] += result.confusion[ep_true, ep_pred]
    mean, se = _mean_and_se(accuracies)
    per_class_mean: dict[int, float] = {}
    per_class_se: dict[int, float] = {}
    for c, values in per_class_values.items():
        if values:
            per_class_mean[c], per_class_se[c] = _mean_and_se(np.asarray(values))
    return RunSummary(
        n_way=spec.n_way,
        k_shot=spec.k_shot,
        q_query=spec.q_query,
        n_episodes=episodes,
        mean_accuracy=mean,
        std_error=se,
        per_class_mean=per_class_mean,
        per_class_std_error=per_class_se,
        confusion=confusion,
        class_names=list(pool.class_names),
        episode_accuracies=accuracies.tolist(),
    )


def summary_to_dict(summary: RunSummary, task: str, decimals: int = 4) -> dict:
    """JSON-ready view of a RunSummary (single source of truth for reports)."""
    per_class = [
        {
            "class": summary.class_names[c],
            "mean": round(summary.per_class_mean[c], decimals),
            "std_error": round(summary.per_class_std_error[c], decimals),
        }
        for c in sorted(summary.per_class_mean)
    ]
    return {
        "task": task,
        "n_way": summary.n_way,
        "k_shot": summary.k_shot,
        "q_query": summary.q_query,
        "episodes": summary.n_episodes,
        "mean_accuracy": round(summary.mean_accuracy, decimals),
        "std_error": round(summary.std_error, decimals),
        "per_class": per_class,
        "confusion": summary.confusion.tolist(),
    }


def write_accuracy_csv(path, accuracies) -> None:
    """Per-episode accuracies in percent, one per line: the stats input contract."""
    with open(path, "w", encoding="ascii", newline="\n") as f:
        f.write("accuracy_pct\n")
        for value in accuracies:
            f.write(f"{float(value):.10g}\n")


def write_confusion_csv(path, confusion: np.ndarray, class_names) -> None:
    with open(path, "w", encoding="ascii", newline="\n") as f:
        f.write("true\\pred," + ",".join(class_names) + "\n")
        for name, row in zip(class_names, confusion):
            f.write(name + "," + ",".join(str(int(v)) for v in row) + "\n")
