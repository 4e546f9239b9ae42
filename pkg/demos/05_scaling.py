"""Training cost grows linearly with the number of rows.

Every candidate split of a presorted predictor is scored from running
moment updates, so one pass per predictor per node suffices.  Doubling the
rows should roughly double the training time.

Run:  python3 demos/05_scaling.py   (takes ~20 seconds)
"""

import pilot
from pilot.evalharness import gen_additive, time_training

hp = pilot.Hyperparams(max_depth=6)
prev = None
for n in (25_000, 50_000, 100_000):
    ds = gen_additive(n, seed=11, p=10, noise=0.5)
    presort_s, grow_s = time_training(ds, hp, repeats=3)
    ratio = "" if prev is None else f"  grow ratio vs previous: {grow_s / prev:.2f}"
    print(f"n={n:>7}  presort {presort_s:.3f}s  grow {grow_s:.3f}s{ratio}")
    prev = grow_s
