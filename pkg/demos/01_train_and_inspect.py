"""Train a tree on mixed data, inspect it, and round-trip it through a file.

Run:  python3 demos/01_train_and_inspect.py
"""

import numpy as np

import pilot

rng = np.random.default_rng(0)
n = 800

# A response with a linear part, a step on a second variable, and a
# categorical effect.
x1 = rng.random(n)
x2 = rng.random(n)
region = rng.choice(["north", "south", "west"], size=n).tolist()
effect = {"north": 1.0, "south": -1.0, "west": 0.0}
y = (3.0 * x1
     + np.where(x2 > 0.6, 2.0, 0.0)
     + np.array([effect[r] for r in region])
     + 0.15 * rng.standard_normal(n))

dataset = pilot.from_arrays({"x1": x1, "x2": x2, "region": region}, y)
tree = pilot.build_tree(dataset)

d = tree.diagnostics
print(f"fitted {d.node_count} nodes ({d.leaf_count} leaves), "
      f"reported depth {d.max_reported_depth}, train RSS {d.train_rss:.4f}\n")
print(pilot.render_text(tree))

print("\nfeature importance:")
for name, w in pilot.feature_importance(tree).as_dict().items():
    print(f"  {name:<8} {w:.3f}")

pilot.save_model(tree, "/tmp/demo_model.json")
reloaded = pilot.load_model("/tmp/demo_model.json")
probe = {"x1": [0.2, 0.9], "x2": [0.1, 0.8], "region": ["south", "north"]}
print("\npredictions before/after reload (identical):")
print(" ", pilot.predict_batch(tree, probe))
print(" ", pilot.predict_batch(reloaded, probe))
