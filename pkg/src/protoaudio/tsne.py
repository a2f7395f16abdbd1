"""Exact O(M^2) t-SNE to two dimensions for embedding-separability reports.

Conditional affinities are calibrated per point by binary search on the
kernel bandwidth until the row entropy hits log2(perplexity); the low-dim
side uses the Student-t kernel with momentum gradient descent and early
exaggeration.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "TsneConfig",
    "calibrate_perplexity",
    "tsne_embed",
    "write_points_csv",
    "write_scatter_svg",
]

_ENTROPY_TOL = 1e-5
_MAX_BISECT = 50
_PROB_FLOOR = 1e-12


@dataclass(frozen=True)
class TsneConfig:
    perplexity: float = 15.0
    iterations: int = 1000
    learning_rate: float = 100.0
    early_exaggeration: float = 4.0
    exaggeration_iters: int = 100
    momentum_initial: float = 0.5
    momentum_final: float = 0.8
    momentum_switch_iter: int = 250
    seed: int = 0

    def __post_init__(self):
        if self.perplexity <= 0:
            raise ValueError(f"perplexity must be positive, got {self.perplexity}")
        if self.iterations < 1:
            raise ValueError(f"iterations must be >= 1, got {self.iterations}")


def _squared_distances(x: np.ndarray) -> np.ndarray:
    # Differences first: exact translations of the inputs then cancel exactly,
    # keeping the affinity grid translation-invariant.
    diff = x[:, None, :] - x[None, :, :]
    d2 = np.einsum("ijk,ijk->ij", diff, diff)
    np.fill_diagonal(d2, 0.0)
    return d2


def calibrate_perplexity(d2: np.ndarray, perplexity: float) -> np.ndarray:
    """Conditional affinities P(j|i) with per-row entropy log2(perplexity).

    Bandwidths are bisected for at most 50 rounds to a 1e-5 entropy
    tolerance. Rows sum to 1 and the diagonal is zero.
    """
    d2 = np.asarray(d2, dtype=np.float64)
    n = d2.shape[0]
    if d2.ndim != 2 or d2.shape[1] != n:
        raise ValueError(f"distance grid must be square, got {d2.shape}")
    if np.any(np.diag(d2) != 0.0):
        raise ValueError("distance grid must have a zero diagonal")
    if n < 2:
        raise ValueError("need at least two points")
    if perplexity > n - 1:
        raise ValueError(f"perplexity {perplexity} infeasible for {n} points")
    target = np.log2(perplexity)
    p = np.zeros((n, n))
    mask = ~np.eye(n, dtype=bool)
    for i in range(n):
        row_d2 = d2[i][mask[i]]
        shift = row_d2.min()
        beta, beta_lo, beta_hi = 1.0, 0.0, np.inf
        row = None
        for _ in range(_MAX_BISECT):
            weights = np.exp(-(row_d2 - shift) * beta)
            total = weights.sum()
            row = weights / total
            nz = row[row > 0]
            entropy = float(-(nz * np.log2(nz)).sum())
            if abs(entropy - target) < _ENTROPY_TOL:
                break
            if entropy > target:
                beta_lo = beta
                beta = beta * 2.0 if beta_hi == np.inf else 0.5 * (beta + beta_hi)
            else:
                beta_hi = beta
                beta = 0.5 * (beta + beta_lo)
        p[i][mask[i]] = row
    return p


def _kl_and_grad(p: np.ndarray, y: np.ndarray) -> tuple[float, np.ndarray]:
    """KL(p || q) under the Student-t kernel and its gradient w.r.t. y."""
    num = 1.0 / (1.0 + _squared_distances(y))
    np.fill_diagonal(num, 0.0)
    q = num / num.sum()
    q_safe = np.maximum(q, _PROB_FLOOR)
    nz = p > 0
    kl = float((p[nz] * np.log(p[nz] / q_safe[nz])).sum())
    pq_num = (p - q) * num
    grad = 4.0 * (np.diag(pq_num.sum(axis=1)) - pq_num) @ y
    return kl, grad


def tsne_embed(embeddings: np.ndarray, cfg: TsneConfig | None = None) -> tuple[np.ndarray, list[float]]:
    """Project [M, D] embeddings to [M, 2]; also returns the per-iteration KL trace.

    Deterministic for a given config seed.
    """
    cfg = cfg or TsneConfig()
    x = np.asarray(embeddings, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] < 5:
        raise ValueError(f"need a 2-D array with at least 5 points, got shape {x.shape}")
    m = x.shape[0]
    if cfg.perplexity >= (m - 1) / 3.0:
        raise ValueError(f"perplexity {cfg.perplexity} too large for {m} points (must be < (M-1)/3)")

    cond = calibrate_perplexity(_squared_distances(x), cfg.perplexity)
    p = (cond + cond.T) / (2.0 * m)

    rng = np.random.Generator(np.random.PCG64(cfg.seed))
    y = rng.normal(0.0, 1e-4, size=(m, 2))
    velocity = np.zeros_like(y)
    trace: list[float] = []
    for it in range(cfg.iterations):
        p_eff = p * cfg.early_exaggeration if it < cfg.exaggeration_iters else p
        _, grad = _kl_and_grad(p_eff, y)
        momentum = cfg.momentum_initial if it < cfg.momentum_switch_iter else cfg.momentum_final
        velocity = momentum * velocity - cfg.learning_rate * grad
        y = y + velocity
        y = y - y.mean(axis=0)
        kl, _ = _kl_and_grad(p, y)
        trace.append(kl)
    return y, trace


def write_points_csv(path, points: np.ndarray, labels) -> None:
    """x, y, class_label rows: the input contract for external plotters."""
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write("x,y,class_label\n")
        for (px, py), label in zip(points, labels):
            f.write(f"{px:.8g},{py:.8g},{label}\n")


_PALETTE = ("#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b")


def write_scatter_svg(path, points: np.ndarray, labels, class_names) -> None:
    """Minimal SVG scatter, one fill color per class."""
    points = np.asarray(points, dtype=np.float64)
    lo = points.min(axis=0)
    hi = points.max(axis=0)
    span = np.maximum(hi - lo, 1e-9)
    size, margin = 480.0, 20.0
    lines = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{size:.0f}" height="{size:.0f}" '
        f'viewBox="0 0 {size:.0f} {size:.0f}">',
        '<rect width="100%" height="100%" fill="white"/>',
    ]
    for (px, py), label in zip(points, labels):
        sx = margin + (px - lo[0]) / span[0] * (size - 2 * margin)
        sy = size - margin - (py - lo[1]) / span[1] * (size - 2 * margin)
        color = _PALETTE[int(label) % len(_PALETTE)]
        lines.append(
            f'<circle cx="{sx:.2f}" cy="{sy:.2f}" r="4" fill="{color}">'
            f"<title>{class_names[int(label)]}</title></circle>"
        )
    lines.append("</svg>")
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write("\n".join(lines) + "\n")
