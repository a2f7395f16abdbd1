"""Single-channel convolutional embedding network.

A compact stack of conv3x3 -> relu -> maxpool2 blocks followed by global
average pooling, trained from scratch. No pretrained weights are involved;
the embedding dimension equals the last block's channel count.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad

__all__ = ["BackboneConfig", "init_params", "embed", "param_order"]


@dataclass(frozen=True)
class BackboneConfig:
    input_size: tuple[int, int] = (224, 224)
    block_channels: tuple[int, ...] = (16, 32, 64, 64)

    def __post_init__(self):
        if not self.block_channels:
            raise ValueError("block_channels must be non-empty")
        if any(c < 1 for c in self.block_channels):
            raise ValueError(f"block_channels must be positive, got {self.block_channels}")
        divisor = 2 ** len(self.block_channels)
        h, w = self.input_size
        if h % divisor or w % divisor:
            raise ValueError(
                f"input size {h}x{w} must be divisible by 2^{len(self.block_channels)} = {divisor}"
            )
        object.__setattr__(self, "block_channels", tuple(self.block_channels))
        object.__setattr__(self, "input_size", tuple(self.input_size))

    @property
    def embedding_dim(self) -> int:
        return self.block_channels[-1]


def param_order(cfg: BackboneConfig) -> list[str]:
    names = []
    for i in range(len(cfg.block_channels)):
        names += [f"block{i}.weight", f"block{i}.bias"]
    return names


def init_params(cfg: BackboneConfig, seed: int) -> dict[str, ad.Tensor]:
    """Kaiming-uniform (fan-in) conv weights, zero biases, deterministic per seed."""
    rng = np.random.Generator(np.random.PCG64(seed))
    params: dict[str, ad.Tensor] = {}
    cin = 1
    for i, cout in enumerate(cfg.block_channels):
        fan_in = cin * 9
        bound = np.sqrt(6.0 / fan_in)
        weight = rng.uniform(-bound, bound, size=(cout, cin, 3, 3))
        params[f"block{i}.weight"] = ad.Tensor(weight, requires_grad=True)
        params[f"block{i}.bias"] = ad.Tensor(np.zeros(cout), requires_grad=True)
        cin = cout
    return params


def embed(x: ad.Tensor, params: dict[str, ad.Tensor], cfg: BackboneConfig) -> ad.Tensor:
    """Map a [B, 1, H, W] batch to [B, embedding_dim] embeddings.

    The same parameters are used for every call, so support and query sets
    share the backbone by construction.
    """
    if x.data.ndim != 4 or x.data.shape[1] != 1:
        raise ValueError(f"expected a [B, 1, H, W] batch, got shape {x.data.shape}")
    if tuple(x.data.shape[2:]) != tuple(cfg.input_size):
        raise ValueError(f"input spatial dims {x.data.shape[2:]} do not match config {cfg.input_size}")
    out = x
    for i in range(len(cfg.block_channels)):
        out = ad.conv2d(out, params[f"block{i}.weight"], params[f"block{i}.bias"], stride=1, pad=1)
        out = ad.relu(out)
        out = ad.maxpool2(out)
    return ad.global_avg_pool(out)
