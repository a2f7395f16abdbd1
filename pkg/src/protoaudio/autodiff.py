"""Minimal reverse-mode autodiff over dense float64 tensors.

Carries exactly the operators the embedding network and the episodic loss
need. Gradients accumulate into leaf tensors (call `zero_grads` or let the
optimizer clear them); intermediate nodes are not retained. The convolution
and pooling inner loops dispatch to the compiled/numpy kernel backend.
"""
from __future__ import annotations

import struct
from contextlib import contextmanager
from dataclasses import dataclass

import numpy as np

from . import kernels

__all__ = [
    "Tensor",
    "no_grad",
    "backward",
    "zero_grads",
    "conv2d",
    "relu",
    "maxpool2",
    "global_avg_pool",
    "linear",
    "add",
    "mul",
    "scale",
    "sum_all",
    "slice_rows",
    "pairwise_sqdist",
    "group_mean",
    "cross_entropy_logits",
    "AdamState",
    "Adam",
    "adam_step",
    "save_checkpoint",
    "load_checkpoint",
    "CHECKPOINT_MAGIC",
]

_grad_enabled = True


@contextmanager
def no_grad():
    """Disable graph recording (evaluation paths)."""
    global _grad_enabled
    prev = _grad_enabled
    _grad_enabled = False
    try:
        yield
    finally:
        _grad_enabled = prev


class Tensor:
    """Dense float64 array with optional gradient accumulation."""

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_vjp")

    def __init__(self, data, requires_grad: bool = False):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad
        self._parents: tuple[Tensor, ...] = ()
        self._vjp = None

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def size(self) -> int:
        return self.data.size

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, requires_grad={self.requires_grad})"

    def __add__(self, other):
        return add(self, other)

    def __mul__(self, other):
        return mul(self, other) if isinstance(other, Tensor) else scale(self, other)

    def __neg__(self):
        return scale(self, -1.0)

    def backward(self):
        backward(self)


def _node(data, parents, vjp) -> Tensor:
    """Result tensor wired into the graph when gradients are live."""
    out = Tensor(data)
    if _grad_enabled and any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = tuple(parents)
        out._vjp = vjp
    return out


def backward(loss: Tensor) -> None:
    """Accumulate d(loss)/d(leaf) into every requires_grad leaf of the graph.

    Running this twice without zeroing doubles the leaf gradients.
    """
    if loss.data.size != 1:
        raise ValueError(f"backward requires a scalar loss, got shape {loss.data.shape}")

    topo: list[Tensor] = []
    seen: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(loss, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            topo.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            if p.requires_grad and id(p) not in seen:
                stack.append((p, False))

    flows: dict[int, np.ndarray] = {id(loss): np.ones_like(loss.data)}
    for node in reversed(topo):
        g = flows.pop(id(node), None)
        if g is None:
            continue
        if node._parents:
            for parent, pg in zip(node._parents, node._vjp(g)):
                if pg is None or not parent.requires_grad:
                    continue
                held = flows.get(id(parent))
                flows[id(parent)] = pg if held is None else held + pg
        elif node.requires_grad:
            node.grad = g.copy() if node.grad is None else node.grad + g


def zero_grads(tensors) -> None:
    for t in tensors:
        t.grad = None


# ---------------------------------------------------------------------------
# Operators
# ---------------------------------------------------------------------------

def conv2d(x: Tensor, w: Tensor, b: Tensor, stride: int = 1, pad: int = 0) -> Tensor:
    """Cross-correlation of [B,Cin,H,W] with [Cout,Cin,kh,kw] plus bias."""
    if x.data.ndim != 4 or w.data.ndim != 4:
        raise ValueError(f"conv2d expects 4-D input and weight, got {x.data.shape} and {w.data.shape}")
    bsz, cin, h, wd = x.data.shape
    cout, win, kh, kw = w.data.shape
    if cin != win:
        raise ValueError(f"conv2d channel mismatch: input {x.data.shape} vs weight {w.data.shape}")
    if b.data.shape != (cout,):
        raise ValueError(f"conv2d bias shape {b.data.shape} does not match {cout} output channels")
    if (h + 2 * pad - kh) % stride or (wd + 2 * pad - kw) % stride:
        raise ValueError(
            f"conv2d geometry not integral: input {x.data.shape}, kernel {w.data.shape}, stride={stride}, pad={pad}"
        )
    out = kernels.conv2d_forward(np.ascontiguousarray(x.data), np.ascontiguousarray(w.data), stride, pad)
    out += b.data[None, :, None, None]

    def vjp(g):
        g = np.ascontiguousarray(g)
        gx, gw = kernels.conv2d_backward(
            np.ascontiguousarray(x.data), np.ascontiguousarray(w.data), g, stride, pad
        )
        return gx, gw, g.sum(axis=(0, 2, 3))

    return _node(out, (x, w, b), vjp)


def relu(x: Tensor) -> Tensor:
    mask = x.data > 0

    def vjp(g):
        return (g * mask,)

    return _node(np.where(mask, x.data, 0.0), (x,), vjp)


def maxpool2(x: Tensor) -> Tensor:
    """2x2 max pooling with stride 2; requires even spatial dims."""
    if x.data.ndim != 4:
        raise ValueError(f"maxpool2 expects a 4-D tensor, got shape {x.data.shape}")
    h, w = x.data.shape[2], x.data.shape[3]
    if h % 2 or w % 2:
        raise ValueError(f"maxpool2 requires even spatial dims, got {h}x{w}")
    out, idx = kernels.maxpool2_forward(np.ascontiguousarray(x.data))

    def vjp(g):
        return (kernels.maxpool2_backward(np.ascontiguousarray(g), idx),)

    return _node(out, (x,), vjp)


def global_avg_pool(x: Tensor) -> Tensor:
    """Mean over the spatial axes: [B,C,H,W] -> [B,C]."""
    if x.data.ndim != 4:
        raise ValueError(f"global_avg_pool expects a 4-D tensor, got shape {x.data.shape}")
    h, w = x.data.shape[2], x.data.shape[3]

    def vjp(g):
        return (np.broadcast_to(g[:, :, None, None] / (h * w), x.data.shape).copy(),)

    return _node(x.data.mean(axis=(2, 3)), (x,), vjp)


def linear(x: Tensor, w: Tensor, b: Tensor) -> Tensor:
    """Affine map: [B,D] @ [E,D]^T + [E]."""
    if x.data.ndim != 2 or w.data.ndim != 2 or x.data.shape[1] != w.data.shape[1]:
        raise ValueError(f"linear shape mismatch: input {x.data.shape} vs weight {w.data.shape}")
    if b.data.shape != (w.data.shape[0],):
        raise ValueError(f"linear bias shape {b.data.shape} does not match {w.data.shape[0]} outputs")

    def vjp(g):
        return g @ w.data, g.T @ x.data, g.sum(axis=0)

    return _node(x.data @ w.data.T + b.data, (x, w, b), vjp)


def add(a: Tensor, b: Tensor) -> Tensor:
    if a.data.shape != b.data.shape:
        raise ValueError(f"add shape mismatch: {a.data.shape} vs {b.data.shape}")

    def vjp(g):
        return g, g

    return _node(a.data + b.data, (a, b), vjp)


def mul(a: Tensor, b: Tensor) -> Tensor:
    if a.data.shape != b.data.shape:
        raise ValueError(f"mul shape mismatch: {a.data.shape} vs {b.data.shape}")

    def vjp(g):
        return g * b.data, g * a.data

    return _node(a.data * b.data, (a, b), vjp)


def scale(x: Tensor, alpha: float) -> Tensor:
    def vjp(g):
        return (g * alpha,)

    return _node(x.data * alpha, (x,), vjp)


def sum_all(x: Tensor) -> Tensor:
    def vjp(g):
        return (np.full_like(x.data, float(g)),)

    return _node(np.asarray(x.data.sum()), (x,), vjp)


def slice_rows(x: Tensor, start: int, stop: int) -> Tensor:
    """Rows [start, stop) of a 2-D tensor; gradient scatters back in place."""
    if x.data.ndim < 1 or not (0 <= start <= stop <= x.data.shape[0]):
        raise ValueError(f"invalid row slice [{start}:{stop}] for shape {x.data.shape}")

    def vjp(g):
        gx = np.zeros_like(x.data)
        gx[start:stop] = g
        return (gx,)

    return _node(x.data[start:stop].copy(), (x,), vjp)


def pairwise_sqdist(q: Tensor, c: Tensor) -> Tensor:
    """Squared Euclidean distances between query rows [M,D] and centers [N,D]."""
    if q.data.ndim != 2 or c.data.ndim != 2 or q.data.shape[1] != c.data.shape[1]:
        raise ValueError(f"pairwise_sqdist dimension mismatch: {q.data.shape} vs {c.data.shape}")
    diff = q.data[:, None, :] - c.data[None, :, :]
    d2 = np.einsum("mnd,mnd->mn", diff, diff)

    def vjp(g):
        gq = 2.0 * np.einsum("mn,mnd->md", g, diff)
        gc = -2.0 * np.einsum("mn,mnd->nd", g, diff)
        return gq, gc

    return _node(d2, (q, c), vjp)


def group_mean(x: Tensor, labels: np.ndarray, n_groups: int) -> Tensor:
    """Mean of the rows of [M,D] that share each label in 0..n_groups-1."""
    labels = np.asarray(labels, dtype=np.int64)
    if labels.shape != (x.data.shape[0],):
        raise ValueError(f"labels shape {labels.shape} does not match {x.data.shape[0]} rows")
    if labels.min() < 0 or labels.max() >= n_groups:
        raise ValueError(f"labels must lie in 0..{n_groups - 1}")
    counts = np.bincount(labels, minlength=n_groups).astype(np.float64)
    if np.any(counts == 0):
        missing = int(np.flatnonzero(counts == 0)[0])
        raise ValueError(f"group {missing} has no rows")
    sums = np.zeros((n_groups, x.data.shape[1]))
    np.add.at(sums, labels, x.data)
    means = sums / counts[:, None]

    def vjp(g):
        return ((g / counts[:, None])[labels],)

    return _node(means, (x,), vjp)


def cross_entropy_logits(logits: Tensor, labels: np.ndarray) -> Tensor:
    """Mean negative log-softmax of the true class, max-shifted for stability."""
    labels = np.asarray(labels, dtype=np.int64)
    m, n = logits.data.shape
    if labels.shape != (m,):
        raise ValueError(f"labels shape {labels.shape} does not match {m} rows")
    if labels.min() < 0 or labels.max() >= n:
        raise ValueError(f"labels must lie in 0..{n - 1}")
    z = logits.data
    shift = z.max(axis=1, keepdims=True)
    expz = np.exp(z - shift)
    log_norm = shift[:, 0] + np.log(expz.sum(axis=1))
    nll = log_norm - z[np.arange(m), labels]
    softmax = expz / expz.sum(axis=1, keepdims=True)

    def vjp(g):
        gz = softmax.copy()
        gz[np.arange(m), labels] -= 1.0
        return (gz * (float(g) / m),)

    return _node(np.asarray(nll.mean()), (logits,), vjp)


# ---------------------------------------------------------------------------
# Adam
# ---------------------------------------------------------------------------

@dataclass
class AdamState:
    """First/second moment buffers and hyperparameters for one parameter."""

    m: np.ndarray
    v: np.ndarray
    step_count: int = 0
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def for_param(cls, param: Tensor, lr: float = 1e-3, beta1: float = 0.9,
                  beta2: float = 0.999, eps: float = 1e-8) -> "AdamState":
        return cls(m=np.zeros_like(param.data), v=np.zeros_like(param.data),
                   lr=lr, beta1=beta1, beta2=beta2, eps=eps)


def adam_step(params: list[Tensor], states: list[AdamState]) -> None:
    """One bias-corrected Adam update per parameter; gradients are zeroed after."""
    if len(params) != len(states):
        raise ValueError(f"{len(params)} params but {len(states)} optimizer states")
    for p, s in zip(params, states):
        if p.grad is None:
            raise ValueError("adam_step called with a missing gradient")
        g = p.grad
        s.step_count += 1
        s.m = s.beta1 * s.m + (1.0 - s.beta1) * g
        s.v = s.beta2 * s.v + (1.0 - s.beta2) * g * g
        m_hat = s.m / (1.0 - s.beta1**s.step_count)
        v_hat = s.v / (1.0 - s.beta2**s.step_count)
        p.data -= s.lr * m_hat / (np.sqrt(v_hat) + s.eps)
        p.grad = None


class Adam:
    """Convenience wrapper pairing parameters with their AdamState."""

    def __init__(self, params, lr: float = 1e-3, beta1: float = 0.9,
                 beta2: float = 0.999, eps: float = 1e-8):
        self.params = list(params)
        self.states = [AdamState.for_param(p, lr, beta1, beta2, eps) for p in self.params]

    def step(self) -> None:
        adam_step(self.params, self.states)

    def zero_grad(self) -> None:
        zero_grads(self.params)


# ---------------------------------------------------------------------------
# Checkpoints
# ---------------------------------------------------------------------------

CHECKPOINT_MAGIC = b"PSHT"
CHECKPOINT_VERSION = 1


def save_checkpoint(path, params: dict[str, Tensor]) -> None:
    """Versioned binary weights: magic, u32 version, then per parameter
    (u32 name length, name bytes, u32 rank, u32 dims, float64 LE data).
    Entries are written sorted by name."""
    with open(path, "wb") as f:
        f.write(CHECKPOINT_MAGIC)
        f.write(struct.pack("<I", CHECKPOINT_VERSION))
        for name in sorted(params):
            data = np.ascontiguousarray(params[name].data, dtype=np.float64)
            encoded = name.encode("utf-8")
            f.write(struct.pack("<I", len(encoded)))
            f.write(encoded)
            f.write(struct.pack("<I", data.ndim))
            f.write(struct.pack(f"<{data.ndim}I", *data.shape))
            f.write(data.astype("<f8").tobytes())


def load_checkpoint(path) -> dict[str, Tensor]:
    with open(path, "rb") as f:
        magic = f.read(4)
        if magic != CHECKPOINT_MAGIC:
            raise ValueError(f"bad checkpoint magic {magic!r}")
        (version,) = struct.unpack("<I", f.read(4))
        if version != CHECKPOINT_VERSION:
            raise ValueError(f"unsupported checkpoint version {version}")
        params: dict[str, Tensor] = {}
        while True:
            head = f.read(4)
            if not head:
                break
            (name_len,) = struct.unpack("<I", head)
            name = f.read(name_len).decode("utf-8")
            (rank,) = struct.unpack("<I", f.read(4))
            dims = struct.unpack(f"<{rank}I", f.read(4 * rank))
            count = int(np.prod(dims)) if rank else 1
            data = np.frombuffer(f.read(8 * count), dtype="<f8").reshape(dims)
            params[name] = Tensor(data.astype(np.float64), requires_grad=True)
        return params
