#!/usr/bin/env python3
"""Hyperparameter selection: cross-validated grid search and a layer sweep.

Runs a small stratified-CV grid over the subspace dimension and kernel
bandwidth for the PCA baseline (cheap), then refits the progressive model
at several depths and tabulates test metrics per depth.
"""

from progsub.harness import (ExperimentConfig, PRESETS, grid_search_cv,
                             layer_sweep)


def main():
    mapping = dict(PRESETS["synth-benchmark"])
    mapping["method"] = "pca"
    mapping["grid.dims"] = "2,4,6,8"
    mapping["grid.sigma"] = "0.1,0.5"
    config = ExperimentConfig.from_mapping(mapping, seed=7)

    best, rows = grid_search_cv(config)
    print("Grid search (10-fold stratified CV on the training split):")
    print(f"{'dims':>6s} {'sigma':>7s} {'mean OA':>9s}")
    for cell, score in rows:
        print(f"{cell['dims']:>6s} {cell['sigma']:>7s} {score:9.4f}")
    print(f"Best cell: d={best.dims[-1]} sigma={best.sigma}\n")

    mapping = dict(PRESETS["synth-benchmark"])
    mapping["method"] = "progsub"
    config = ExperimentConfig.from_mapping(mapping, seed=7)
    print("Layer sweep (same data, growing projection chains):")
    print(f"{'m':>3s} {'OA':>8s} {'AA':>8s} {'kappa':>8s}")
    for m, oa, aa, kappa in layer_sweep(config, [1, 2, 3, 4]):
        print(f"{m:3d} {oa:8.4f} {aa:8.4f} {kappa:8.4f}")
    print("\nAccuracy typically rises over the first few layers, then "
          "saturates or dips as depth outgrows the training data.")


if __name__ == "__main__":
    main()
