"""Cross-validated comparison of the full model set against splits-only mode.

Three synthetic generators: pure linear data (linear fits shine), step-only
data (constant splits are enough), and an additive mix.  Scores are each
method's CV mean squared error divided by the best in the row, optionally
after a per-fold power transform of the predictors.

Run:  python3 demos/04_benchmark_harness.py
"""

import numpy as np

import pilot
from pilot.evalharness import gen_additive, gen_linear, gen_piecewise, kfold_cv

methods = {"pilot": pilot.Hyperparams(), "cart": pilot.Hyperparams.cart_mode()}
datasets = {
    "linear": gen_linear(800, 4, np.array([2.0, -1.0, 0.5, 0.0]), 0.2, seed=0),
    "steps": gen_piecewise(800, seed=0),
    "additive": gen_additive(800, seed=0),
}

for transform in (False, True):
    label = "with power transform" if transform else "raw predictors"
    print(f"=== {label} ===")
    for name, ds in datasets.items():
        report = kfold_cv(ds, 5, methods, seed=7, yeo_johnson=transform,
                          dataset_name=name)
        print(report.to_text())
        print()
