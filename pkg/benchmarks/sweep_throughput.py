#!/usr/bin/env python3
"""Benchmark Gibbs sweep throughput on synthetic data."""

import time

import numpy as np

from bnpl import (
    ChainConfig,
    DynamicConfig,
    GammaProcessParams,
    SimulationConfig,
    run_dynamic_gibbs,
    run_static_gibbs,
    simulate_dynamic_dataset,
    simulate_static_dataset,
)

SEED = 20240117
SWEEPS = 2000


def bench_static(n_lists: int, list_length: int) -> None:
    rng = np.random.default_rng(SEED)
    rankings, _ = simulate_static_dataset(
        GammaProcessParams(5.0), n_lists, list_length, rng
    )
    config = ChainConfig(iterations=SWEEPS, burn_in=SWEEPS // 2)
    start = time.perf_counter()
    run_static_gibbs(rankings, config, rng)
    elapsed = time.perf_counter() - start
    print(
        f"  static {n_lists} x top-{list_length}: "
        f"{elapsed:.2f}s ({SWEEPS / elapsed:.0f} sweeps/s)"
    )


def bench_dynamic(epochs: int, list_length: int) -> None:
    rng = np.random.default_rng(SEED)
    lists, _ = simulate_dynamic_dataset(
        SimulationConfig(epochs=epochs, list_length=list_length, phi=5.0),
        GammaProcessParams(5.0),
        rng,
    )
    config = DynamicConfig(iterations=SWEEPS, burn_in=SWEEPS // 2)
    start = time.perf_counter()
    run_dynamic_gibbs(lists, config, rng)
    elapsed = time.perf_counter() - start
    print(
        f"  dynamic {epochs} epochs x top-{list_length}: "
        f"{elapsed:.2f}s ({SWEEPS / elapsed:.0f} sweeps/s)"
    )


def main():
    print("Sweep throughput:")
    for n_lists, m in [(50, 10), (500, 10)]:
        bench_static(n_lists, m)
    for epochs, m in [(20, 10), (100, 15)]:
        bench_dynamic(epochs, m)


if __name__ == "__main__":
    main()
