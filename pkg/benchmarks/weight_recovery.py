#!/usr/bin/env python3
"""Benchmark how well the static sampler recovers the weights it was simulated from."""

import numpy as np

from bnpl import (
    ChainConfig,
    GammaProcessParams,
    run_static_gibbs,
    simulate_static_dataset,
)

SEED = 20240521


def recovery(n_lists: int, alpha: float) -> tuple[float, float]:
    rng = np.random.default_rng(SEED)
    rankings, measure = simulate_static_dataset(
        GammaProcessParams(alpha), n_lists, 10, rng
    )
    chain = run_static_gibbs(rankings, ChainConfig(iterations=4000, burn_in=2000), rng)
    truth = measure.normalized()
    normalized = chain.normalized_weights()[:, 0, :-1]
    lower, upper = np.quantile(normalized, [0.025, 0.975], axis=0)
    true = np.array([truth[item] for item in chain.items])
    coverage = float(np.mean((lower <= true) & (true <= upper)))
    error = float(np.abs(normalized.mean(axis=0) - true).sum())
    return coverage, error


def main():
    print("Weight recovery (top-10 lists):")
    for alpha in [1.0, 10.0]:
        for n_lists in [20, 200]:
            coverage, error = recovery(n_lists, alpha)
            print(
                f"  alpha={alpha:g} lists={n_lists}: "
                f"95% coverage {coverage:.2f}, L1 error {error:.3f}"
            )


if __name__ == "__main__":
    main()
