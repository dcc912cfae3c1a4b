"""Benchmark the compiled kernel core against the numpy fallback.

Times individual kernels and a full forward+backward training step at a few
graph sizes, printing one table per section. Run from the repository root:

    python3 benchmarks/compare_backends.py [--steps 200]
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from ibgraph import kernels
from ibgraph.autodiff import Tape, backward
from ibgraph.harness import TrainConfig, _er_graph, _forward, build_model


def _best(fn, repeats=5):
    """Best mean seconds per call over a few timed blocks."""
    t0 = time.perf_counter()
    fn()
    first = time.perf_counter() - t0
    inner = max(1, int(0.02 / max(first, 1e-7)))
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        for _ in range(inner):
            fn()
        best = min(best, (time.perf_counter() - t0) / inner)
    return best


def bench_kernels():
    rng = np.random.default_rng(0)
    shapes = {
        "matmul 16x16 @ 16x32": (rng.normal(size=(16, 16)), rng.normal(size=(16, 32))),
        "matmul 128x128 @ 128x32": (rng.normal(size=(128, 128)), rng.normal(size=(128, 32))),
        "matmul_nt 128x16 self": (rng.normal(size=(128, 16)),),
        "sigmoid 128x128": (rng.normal(size=(128, 128)),),
        "ew_mul 128x128": (rng.normal(size=(128, 128)), rng.normal(size=(128, 128))),
        "sum_axis0 128x128": (rng.normal(size=(128, 128)), 0),
        "softplus 2048": (rng.normal(size=2048),),
    }
    calls = {
        "matmul 16x16 @ 16x32": lambda K, a: K.matmul(*a),
        "matmul 128x128 @ 128x32": lambda K, a: K.matmul(*a),
        "matmul_nt 128x16 self": lambda K, a: K.matmul_nt(a[0], a[0]),
        "sigmoid 128x128": lambda K, a: K.sigmoid(*a),
        "ew_mul 128x128": lambda K, a: K.ew_mul(*a),
        "sum_axis0 128x128": lambda K, a: K.sum_axis(*a),
        "softplus 2048": lambda K, a: K.softplus(*a),
    }
    print(f"{'kernel':28s} {'python':>12s} {'compiled':>12s} {'speedup':>9s}")
    for name, args in shapes.items():
        row = {}
        for backend in kernels.available():
            kernels.use(backend)
            row[backend] = _best(lambda: calls[name](kernels.active, args))
        py = row["python"]
        cy = row.get("compiled")
        if cy is None:
            print(f"{name:28s} {py * 1e6:10.2f}us   (compiled kernels not built)")
        else:
            print(f"{name:28s} {py * 1e6:10.2f}us {cy * 1e6:10.2f}us {py / cy:8.2f}x")
    kernels.use("compiled" if "compiled" in kernels.available() else "python")


def bench_train_step(steps):
    print(f"\n{'train step':28s} {'python':>12s} {'compiled':>12s} {'speedup':>9s}")
    for n in (16, 64, 128):
        cfg = TrainConfig(epochs=1, bottleneck=16, seed=0)
        graph = _er_graph(np.random.default_rng(n), n, 16)
        row = {}
        for backend in kernels.available():
            kernels.use(backend)
            model = build_model(cfg, 16, 2)
            rng = np.random.default_rng(1)

            def step():
                with Tape():
                    breakdown, _ = _forward(model, graph, cfg, rng, True)
                    backward(breakdown.total)

            for _ in range(3):
                step()
            t0 = time.perf_counter()
            for _ in range(steps):
                step()
            row[backend] = (time.perf_counter() - t0) / steps
        py = row["python"]
        cy = row.get("compiled")
        label = f"n={n} graphs"
        if cy is None:
            print(f"{label:28s} {py * 1e3:10.3f}ms   (compiled kernels not built)")
        else:
            print(f"{label:28s} {py * 1e3:10.3f}ms {cy * 1e3:10.3f}ms {py / cy:8.2f}x")
    kernels.use("compiled" if "compiled" in kernels.available() else "python")


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--steps", type=int, default=100)
    args = parser.parse_args()
    print(f"available backends: {kernels.available()}\n")
    bench_kernels()
    bench_train_step(args.steps)


if __name__ == "__main__":
    main()
