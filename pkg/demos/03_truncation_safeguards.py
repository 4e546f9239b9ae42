"""The two prediction safeguards, demonstrated on purpose-built inputs.

1. Range clamping: each node evaluates its linear model on the predictor
   value clamped into that node's training interval, so a test point far
   outside the data cannot extrapolate along a fitted slope.
2. Band clipping: the cumulative prediction is clipped to [-3B, 3B] around
   the response midrange, where B is the half-range of the training
   response.

Run:  python3 demos/03_truncation_safeguards.py
"""

import numpy as np

import pilot

rng = np.random.default_rng(2)
n = 400
x = rng.random(n)           # training inputs all in [0, 1]
y = 5.0 * x + 0.1 * rng.standard_normal(n)

tree = pilot.build_tree(pilot.from_arrays({"x": x}, y))
lo = tree.offset - 3 * tree.bound_B
hi = tree.offset + 3 * tree.bound_B
print(f"training range of y: [{y.min():.2f}, {y.max():.2f}]")
print(f"admissible prediction band: [{lo:.2f}, {hi:.2f}]\n")

naive_slope = 5.0
print(f"{'x_test':>12} {'clamped pred':>14} {'naive line':>12}")
for x_test in (0.5, 1.5, 10.0, 1e6, -1e6):
    pred = pilot.predict_one(tree, {"x": x_test})
    print(f"{x_test:>12g} {pred:>14.3f} {naive_slope * x_test:>12g}")

print("\nEvery prediction stays inside the band, including a prediction")
print("trace you can inspect step by step:")
pred, trace = pilot.predict_one(tree, {"x": 1e6}, with_trace=True)
for step in trace.steps[:4]:
    print(f"  node {step.node_id:<3} {step.kind.name:<5} "
          f"clamped={step.clamped_value!s:<22} "
          f"increment={step.increment:+.3f} cumulative={step.cumulative:+.3f}")
print(f"  final prediction {trace.prediction:.3f}")
