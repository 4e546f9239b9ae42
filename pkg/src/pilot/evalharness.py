"""Evaluation harness: k-fold CV, synthetic generators, power transform,
and a naive piecewise-constant reference tree.

The report scores each method by its cross-validated MSE divided by the
lowest MSE on that dataset, so the best method in a row scores exactly 1.
The reference tree (``cart_oracle``) re-fits every candidate split from
scratch and serves as an independent check of the constant-fits-only mode.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

from .build import build_tree
from .data import (ColumnKind, Dataset, Hyperparams, center_response,
                   format_float, from_arrays, presort)
from .predict import predict_batch
from .scan import bic_score

__all__ = [
    "EvalEntry",
    "EvalReport",
    "kfold_cv",
    "fold_assignments",
    "gen_linear",
    "gen_additive",
    "gen_piecewise",
    "yeo_johnson_fit",
    "yeo_johnson_apply",
    "yeo_johnson_inverse",
    "CartNode",
    "cart_oracle",
    "cart_oracle_predict",
    "time_training",
]


# -- cross validation ---------------------------------------------------------

@dataclass(frozen=True)
class EvalEntry:
    method: str
    dataset: str
    mse: float
    ratio: float
    seconds: float
    failed: bool


@dataclass
class EvalReport:
    """Per (method, dataset) cross-validated scores."""

    folds: int
    seed: int
    entries: list[EvalEntry] = field(default_factory=list)

    @property
    def any_failed(self) -> bool:
        return any(e.failed for e in self.entries)

    def to_csv(self, path: str) -> None:
        """Deterministic CSV; wall-clock stays out of the file on purpose."""
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write("dataset,method,mse,ratio,failed\n")
            for e in self.entries:
                mse = "" if e.failed else format_float(e.mse)
                ratio = "" if e.failed else format_float(e.ratio)
                fh.write(f"{e.dataset},{e.method},{mse},{ratio},"
                         f"{'yes' if e.failed else 'no'}\n")

    def to_text(self) -> str:
        header = f"{'dataset':<16}{'method':<10}{'mse':>14}{'ratio':>9}"
        lines = [header, "-" * len(header)]
        for e in self.entries:
            if e.failed:
                lines.append(f"{e.dataset:<16}{e.method:<10}{'**':>14}{'**':>9}")
            else:
                lines.append(f"{e.dataset:<16}{e.method:<10}"
                             f"{e.mse:>14.6g}{e.ratio:>9.3f}")
        return "\n".join(lines)


def fold_assignments(n_rows: int, k: int, seed: int) -> list[np.ndarray]:
    """Disjoint shuffled folds covering all rows, sizes differing by <= 1."""
    if k < 2:
        raise ValueError("k must be >= 2")
    if n_rows < k:
        raise ValueError("need at least one row per fold")
    rng = np.random.default_rng(seed)
    perm = rng.permutation(n_rows)
    return [np.sort(chunk) for chunk in np.array_split(perm, k)]


def _subset_table(dataset: Dataset, rows: np.ndarray) -> dict[str, object]:
    out: dict[str, object] = {}
    for meta, col in zip(dataset.column_meta, dataset.columns):
        if meta.kind is ColumnKind.NUMERIC:
            out[meta.name] = col[rows]
        else:
            out[meta.name] = [meta.levels[c] for c in col[rows]]
    return out


def _transform_tables(train: dict[str, object], test: dict[str, object],
                      metas) -> None:
    """Fit the power transform per numeric column on train, apply to both."""
    for meta in metas:
        if meta.kind is not ColumnKind.NUMERIC:
            continue
        lam = yeo_johnson_fit(np.asarray(train[meta.name], dtype=np.float64))
        train[meta.name] = yeo_johnson_apply(lam, np.asarray(train[meta.name]))
        test[meta.name] = yeo_johnson_apply(lam, np.asarray(test[meta.name]))


def kfold_cv(
    dataset: Dataset,
    k: int,
    methods: Mapping[str, Hyperparams],
    seed: int,
    *,
    yeo_johnson: bool = False,
    dataset_name: str = "data",
) -> EvalReport:
    """Cross-validated MSE and MSE-ratio-to-best for each method.

    Fold assignment is a seeded shuffle.  A method that raises on any fold
    is recorded as failed; ratios are computed over the successes.
    """
    folds = fold_assignments(dataset.n_rows, k, seed)
    all_rows = np.arange(dataset.n_rows)
    results: dict[str, tuple[float, float, bool]] = {}
    for name, hp in methods.items():
        t0 = time.perf_counter()
        fold_mses = []
        failed = False
        for test_rows in folds:
            mask = np.ones(dataset.n_rows, dtype=bool)
            mask[test_rows] = False
            train_rows = all_rows[mask]
            try:
                train_table = _subset_table(dataset, train_rows)
                test_table = _subset_table(dataset, test_rows)
                if yeo_johnson:
                    _transform_tables(train_table, test_table,
                                      dataset.column_meta)
                train_ds = from_arrays(train_table,
                                       dataset.response[train_rows],
                                       dataset.response_name)
                tree = build_tree(train_ds, hp)
                preds = predict_batch(tree, test_table)
                err = preds - dataset.response[test_rows]
                fold_mses.append(float(err @ err) / test_rows.size)
            except Exception:
                failed = True
                break
        seconds = time.perf_counter() - t0
        mse = float(np.mean(fold_mses)) if not failed else math.nan
        results[name] = (mse, seconds, failed)

    ok_mses = [m for m, _, f in results.values() if not f]
    best = min(ok_mses) if ok_mses else math.nan
    report = EvalReport(folds=k, seed=seed)
    for name, (mse, seconds, failed) in results.items():
        ratio = math.nan if failed else (mse / best if best > 0 else 1.0)
        report.entries.append(EvalEntry(
            method=name, dataset=dataset_name, mse=mse, ratio=ratio,
            seconds=seconds, failed=failed))
    return report


# -- synthetic generators -----------------------------------------------------

def gen_linear(n: int, p: int, beta: Sequence[float], noise: float,
               seed: int) -> Dataset:
    """Uniform design on [0,1]^p with a linear response plus Gaussian noise."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if p < 1:
        raise ValueError("p must be >= 1")
    b = np.asarray(beta, dtype=np.float64)
    if b.shape != (p,):
        raise ValueError(f"beta must have length {p}")
    if noise < 0:
        raise ValueError("noise must be >= 0")
    rng = np.random.default_rng(seed)
    X = rng.random((n, p))
    y = X @ b
    if noise > 0:
        y = y + noise * rng.standard_normal(n)
    return from_arrays({f"x{j + 1}": X[:, j] for j in range(p)}, y)


_ADDITIVE_MENU: tuple[Callable[[np.ndarray], np.ndarray], ...] = (
    lambda x: 3.0 * x,                      # pure linear component
    lambda x: 2.0 * (x > 0.5),              # step
    lambda x: 2.0 * -np.expm1(-4.0 * x),    # saturating curve
    lambda x: np.zeros_like(x),             # inert
)


def gen_additive(n: int, seed: int, *, p: int = 4, noise: float = 0.5) -> Dataset:
    """Sum of a ramp, a step, a saturating curve, and an inert predictor.

    Components repeat cyclically when ``p`` exceeds the menu length.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = np.random.default_rng(seed)
    X = rng.random((n, p))
    y = np.zeros(n)
    for j in range(p):
        y += _ADDITIVE_MENU[j % len(_ADDITIVE_MENU)](X[:, j])
    if noise > 0:
        y = y + noise * rng.standard_normal(n)
    return from_arrays({f"x{j + 1}": X[:, j] for j in range(p)}, y)


def gen_piecewise(n: int, seed: int, *, p: int = 3, noise: float = 0.3) -> Dataset:
    """Step functions only; friendly territory for piecewise-constant trees."""
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = np.random.default_rng(seed)
    X = rng.random((n, p))
    steps = ((0.3, 2.0), (0.6, -1.5), (0.8, 0.5))
    y = np.zeros(n)
    for j in range(p):
        thr, height = steps[j % len(steps)]
        y += height * (X[:, j] > thr)
    if noise > 0:
        y = y + noise * rng.standard_normal(n)
    return from_arrays({f"x{j + 1}": X[:, j] for j in range(p)}, y)


# -- power transform ----------------------------------------------------------

def yeo_johnson_apply(lmbda: float, x):
    """Pointwise power transform; the identity at ``lmbda == 1``."""
    arr = np.asarray(x, dtype=np.float64)
    pos = arr >= 0
    out = np.empty_like(arr)
    lp = np.log1p(np.abs(arr))
    if lmbda != 0.0:
        out[pos] = np.expm1(lmbda * lp[pos]) / lmbda
    else:
        out[pos] = lp[pos]
    two = 2.0 - lmbda
    if two != 0.0:
        out[~pos] = -np.expm1(two * lp[~pos]) / two
    else:
        out[~pos] = -lp[~pos]
    return out if isinstance(x, np.ndarray) else float(out)


def yeo_johnson_inverse(lmbda: float, z):
    """Analytic inverse of :func:`yeo_johnson_apply`."""
    arr = np.asarray(z, dtype=np.float64)
    pos = arr >= 0
    out = np.empty_like(arr)
    if lmbda != 0.0:
        out[pos] = np.expm1(np.log1p(lmbda * arr[pos]) / lmbda)
    else:
        out[pos] = np.expm1(arr[pos])
    two = 2.0 - lmbda
    if two != 0.0:
        out[~pos] = -np.expm1(np.log1p(-two * arr[~pos]) / two)
    else:
        out[~pos] = -np.expm1(-arr[~pos])
    return out if isinstance(z, np.ndarray) else float(out)


def _yj_profile_loglik(lmbda: float, x: np.ndarray, skew_term: float) -> float:
    z = yeo_johnson_apply(lmbda, x)
    var = float(np.var(z))
    if not math.isfinite(var) or var <= 0.0:
        return -math.inf
    return -0.5 * x.size * math.log(var) + (lmbda - 1.0) * skew_term


def yeo_johnson_fit(column, *, lo: float = -5.0, hi: float = 5.0,
                    tol: float = 1e-6) -> float:
    """Gaussian maximum-likelihood transform parameter.

    Golden-section search of the profile log-likelihood over ``[lo, hi]`` to
    the given tolerance.  A zero-variance column returns 1.0 (identity).
    """
    x = np.asarray(column, dtype=np.float64)
    if x.size == 0 or not np.all(np.isfinite(x)):
        raise ValueError("column must be non-empty and finite")
    if float(np.var(x)) == 0.0:
        return 1.0
    skew_term = float(np.sum(np.sign(x) * np.log1p(np.abs(x))))
    inv_phi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - inv_phi * (b - a)
    d = a + inv_phi * (b - a)
    fc = _yj_profile_loglik(c, x, skew_term)
    fd = _yj_profile_loglik(d, x, skew_term)
    while b - a > tol:
        if fc > fd:
            b, d, fd = d, c, fc
            c = b - inv_phi * (b - a)
            fc = _yj_profile_loglik(c, x, skew_term)
        else:
            a, c, fc = c, d, fd
            d = a + inv_phi * (b - a)
            fd = _yj_profile_loglik(d, x, skew_term)
    return (a + b) / 2.0


# -- naive reference tree -----------------------------------------------------

@dataclass(eq=False)
class CartNode:
    """Node of the brute-force piecewise-constant reference tree."""

    n: int
    predictor: int | None = None
    pivot: float | None = None
    pivot_levels: tuple[int, ...] | None = None
    leaf_value: float | None = None
    left: "CartNode | None" = None
    right: "CartNode | None" = None

    @property
    def is_leaf(self) -> bool:
        return self.left is None


def cart_oracle(dataset: Dataset, hp: Hyperparams) -> CartNode:
    """Greedy variance-reduction tree computed by exhaustive refitting.

    Deliberately naive (no incremental statistics, quadratic per node) and
    meant for small inputs; it mirrors the stopping rules, the BIC floor,
    and the deterministic tie-breaking of the constant-fits-only mode, so
    the two must build identical trees.
    """
    centered = center_response(dataset.response)
    offset = centered.offset

    def grow(rows: np.ndarray, res: np.ndarray, depth: int, cum: float) -> CartNode:
        t = rows.size
        mean = float(res.mean())
        if depth >= hp.max_depth or t < hp.min_fit:
            return CartNode(n=t, leaf_value=cum + mean + offset)
        sum_r2 = float(res @ res)
        floor = hp.rss_floor_scale * max(1.0, sum_r2)
        rss_con = float(np.sum((res - mean) ** 2))
        # candidate key: (bic, dof, predictor, pivot-tuple)
        best_key = (bic_score(rss_con, t, 1, floor), 1, -1, ())
        best = None
        for col, meta in enumerate(dataset.column_meta):
            if meta.kind is ColumnKind.NUMERIC:
                xs = dataset.columns[col][rows]
                for pivot in np.unique(xs)[:-1]:
                    mask = xs <= pivot
                    tl = int(mask.sum())
                    if tl < hp.min_leaf or t - tl < hp.min_leaf:
                        continue
                    rl = res[mask]
                    rr = res[~mask]
                    rss = (float(np.sum((rl - rl.mean()) ** 2))
                           + float(np.sum((rr - rr.mean()) ** 2)))
                    key = (bic_score(rss, t, 5, floor), 5, col, (float(pivot),))
                    if key < best_key:
                        best_key = key
                        best = (col, float(pivot), None, mask)
            else:
                codes = dataset.columns[col][rows]
                counts = np.bincount(codes, minlength=meta.n_levels)
                present = np.flatnonzero(counts > 0)
                if present.size < 2:
                    continue
                sums = np.bincount(codes, weights=res, minlength=meta.n_levels)
                means = sums[present] / counts[present]
                order = np.lexsort((present, means))
                ids_o = present[order]
                for cut in range(1, present.size):
                    left_ids = ids_o[:cut]
                    level_mask = np.zeros(meta.n_levels, dtype=bool)
                    level_mask[left_ids] = True
                    mask = level_mask[codes]
                    tl = int(mask.sum())
                    if tl < hp.min_leaf or t - tl < hp.min_leaf:
                        continue
                    rl = res[mask]
                    rr = res[~mask]
                    rss = (float(np.sum((rl - rl.mean()) ** 2))
                           + float(np.sum((rr - rr.mean()) ** 2)))
                    levels = tuple(sorted(int(v) for v in left_ids))
                    key = (bic_score(rss, t, 5, floor), 5, col, levels)
                    if key < best_key:
                        best_key = key
                        best = (col, None, levels, mask)
        if best is None:
            return CartNode(n=t, leaf_value=cum + mean + offset)
        col, pivot, levels, mask = best
        node = CartNode(n=t, predictor=col, pivot=pivot, pivot_levels=levels)
        for side, child_attr in ((mask, "left"), (~mask, "right")):
            rows_s = rows[side]
            res_s = res[side]
            m_s = float(res_s.mean())
            new_cum = cum + m_s
            setattr(node, child_attr,
                    grow(rows_s, res_s - m_s, depth + 1, new_cum))
        return node

    rows = np.arange(dataset.n_rows)
    return grow(rows, centered.values.copy(), 0, 0.0)


def cart_oracle_predict(node: CartNode, dataset: Dataset,
                        rows: np.ndarray) -> np.ndarray:
    """Predict dataset rows with the reference tree."""
    out = np.empty(rows.size)
    for i, row in enumerate(rows):
        cur = node
        while not cur.is_leaf:
            col = cur.predictor
            if cur.pivot_levels is not None:
                go_left = int(dataset.columns[col][row]) in cur.pivot_levels
            else:
                go_left = dataset.columns[col][row] <= cur.pivot
            cur = cur.left if go_left else cur.right
        out[i] = cur.leaf_value
    return out


# -- timing -------------------------------------------------------------------

def time_training(dataset: Dataset, hp: Hyperparams,
                  repeats: int = 5) -> tuple[float, float]:
    """Median presort seconds and median grow seconds over warm repeats.

    Measures process CPU time: training is single-threaded, and CPU time is
    insensitive to other load on the machine.
    """
    presort_times = []
    grow_times = []
    build_tree(dataset, hp)  # warm-up
    for _ in range(repeats):
        t0 = time.process_time()
        presort(dataset)
        presort_times.append(time.process_time() - t0)
        t0 = time.process_time()
        build_tree(dataset, hp)
        grow_times.append(time.process_time() - t0)
    return float(np.median(presort_times)), float(np.median(grow_times))
