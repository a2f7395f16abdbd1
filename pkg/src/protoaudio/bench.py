"""Timing comparison between the compiled and numpy kernel implementations."""
from __future__ import annotations

import time

import numpy as np

from . import kernels

__all__ = ["benchmark_cases", "run_benchmark"]


def _time(fn, repeat: int) -> float:
    best = float("inf")
    for _ in range(repeat):
        start = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - start)
    return best


def benchmark_cases(batch: int = 30) -> list[tuple[str, np.ndarray, np.ndarray]]:
    """Representative conv shapes from the embedding network at 64px and 224px."""
    rng = np.random.Generator(np.random.PCG64(0))
    cases = []
    for tag, size in (("64px", 64), ("224px", 224)):
        cin = 1
        for depth, cout in enumerate((16, 32, 64, 64)):
            h = size >> depth
            x = rng.standard_normal((batch, cin, h, h))
            w = rng.standard_normal((cout, cin, 3, 3))
            cases.append((f"conv {tag} block{depth} [{batch}x{cin}x{h}x{h}]", x, w))
            cin = cout
    return cases


def run_benchmark(repeat: int = 3, batch: int = 30) -> list[dict]:
    backends = kernels.available_backends()
    impls = {name: kernels.get_impl(name) for name in backends}
    rows: list[dict] = []
    print(f"active backend: {kernels.BACKEND}; comparing: {', '.join(backends)}")
    header = f"{'case':44s}" + "".join(f"{name + ' fwd+bwd (ms)':>22s}" for name in backends)
    print(header)
    print("-" * len(header))
    for label, x, w in benchmark_cases(batch):
        gout = impls[backends[0]].conv2d_forward(x, w, 1, 1)
        row = {"case": label}
        line = f"{label:44s}"
        for name in backends:
            impl = impls[name]

            def fwd_bwd(impl=impl):
                out = impl.conv2d_forward(x, w, 1, 1)
                impl.conv2d_backward(x, w, out, 1, 1)

            elapsed = _time(fwd_bwd, repeat) * 1e3
            row[name] = elapsed
            line += f"{elapsed:22.2f}"
        rows.append(row)
        print(line)
        del gout
    if len(backends) == 2:
        a, b = backends
        ratios = [r[b] / r[a] for r in rows]
        print(f"\nmedian {b}/{a} time ratio: {np.median(ratios):.2f}x")
    return rows
