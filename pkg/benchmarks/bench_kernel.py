#!/usr/bin/env python3
"""Epoch-kernel benchmark: compiled extension vs numpy fallback.

Times one full training epoch (forward, backward, Adam over all batches)
for a range of network/batch shapes and prints the per-epoch time of each
backend plus the speedup. The small-network rows are where the fused kernel
matters most: per-batch Python/numpy dispatch overhead dominates there.

Usage: python3 benchmarks/bench_kernel.py [--quick]
"""

from __future__ import annotations

import argparse
import time


from nsanet import kernels
from nsanet.data import gen_xor
from nsanet.train import TrainConfig, init_adam_state, init_model, rng_stream, train_epoch

SHAPES = [
    # (n, p, h, batch)  label
    (3000, 3, 20, 64),
    (3000, 9, 20, 64),
    (1000, 4, 128, 64),
    (3000, 15, 128, 64),
    (3000, 15, 512, 64),
    (3000, 15, 1024, 64),
]


def time_epoch(backend: str, n: int, p: int, h: int, batch: int, repeats: int) -> float:
    ds = gen_xor(min(3, p), p, n, seed=1)
    cfg = TrainConfig(batch_size=batch, epochs=1, seed=1)
    model = init_model(p, h, 1, rng_stream(1, 0))
    state = init_adam_state(model, cfg.hyper)
    shuffle = rng_stream(1, 1)
    train_epoch(model, state, ds, cfg, shuffle, backend=backend)  # warm up
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        train_epoch(model, state, ds, cfg, shuffle, backend=backend)
        best = min(best, time.perf_counter() - t0)
    return best


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--quick", action="store_true", help="fewer repeats")
    args = parser.parse_args()
    repeats = 3 if args.quick else 10

    backends = kernels.available()
    print(f"backends: {', '.join(backends)} (default: {kernels.default_name()})")
    header = f"{'n':>6} {'p':>4} {'h':>5} {'batch':>6}"
    for b in backends:
        header += f" {b + ' ms/epoch':>16}"
    if len(backends) == 2:
        header += f" {'speedup':>8}"
    print(header)
    for n, p, h, batch in SHAPES:
        times = {b: time_epoch(b, n, p, h, batch, repeats) for b in backends}
        row = f"{n:>6} {p:>4} {h:>5} {batch:>6}"
        for b in backends:
            row += f" {times[b] * 1e3:>16.3f}"
        if "fused" in times and "numpy" in times:
            row += f" {times['numpy'] / times['fused']:>7.1f}x"
        print(row)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
