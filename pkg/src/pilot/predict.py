"""Prediction on new data with both truncation safeguards.

Walking from the root, every node clamps the selected predictor into that
node's training range before evaluating its linear increment, then clips
the cumulative prediction to ``[-3B, 3B]``.  Routing across a split always
uses the raw, unclamped value; a value equal to the pivot goes left.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .build import PilotTree, TreeNode
from .data import ColumnKind, ColumnMeta
from .errors import PredictError
from .kinds import ModelKind

__all__ = ["PredictionTrace", "TraceStep", "predict_one", "predict_batch"]


@dataclass(frozen=True)
class TraceStep:
    """One node's contribution to a prediction."""

    node_id: int
    kind: ModelKind
    clamped_value: float | None
    increment: float
    cumulative: float


@dataclass(frozen=True)
class PredictionTrace:
    """Step-by-step record of a single prediction."""

    steps: tuple[TraceStep, ...]
    centered: float
    prediction: float


def _level_code(meta: ColumnMeta, value: object) -> int:
    try:
        return meta.levels.index(str(value))
    except ValueError:
        return -1


def _numeric_value(meta: ColumnMeta, value: object) -> float:
    try:
        v = float(value)  # type: ignore[arg-type]
    except (TypeError, ValueError):
        raise PredictError(
            f"column {meta.name!r} expects a numeric value, got {value!r}") from None
    if not math.isfinite(v):
        raise PredictError(f"column {meta.name!r} received a non-finite value")
    return v


def predict_one(tree: PilotTree, x: Mapping[str, object], *,
                with_trace: bool = False):
    """Predict a single feature record.

    Parameters
    ----------
    tree : PilotTree
    x : mapping of column name to value
        Must supply every column the tree uses on the walked path; extra
        keys are ignored.  Unseen categorical levels are routed to the
        child that held more training cases.
    with_trace : bool
        When True, return ``(prediction, PredictionTrace)``.

    Returns
    -------
    float, or (float, PredictionTrace)
    """
    hi = 3.0 * tree.bound_B
    cum = 0.0
    steps: list[TraceStep] = []
    node: TreeNode | None = tree.root
    while node is not None:
        fit = node.fit
        nxt: TreeNode | None = None
        clamped: float | None = None
        if fit.kind is ModelKind.CON:
            inc = fit.coef_left[0]
        else:
            meta = tree.column_meta[fit.predictor]
            if meta.name not in x:
                raise PredictError(f"missing feature column {meta.name!r}")
            if meta.kind is ColumnKind.CATEGORICAL:
                code = _level_code(meta, x[meta.name])
                if code >= 0:
                    left = code in fit.pivot_levels
                else:
                    left = node.children[0].n >= node.children[1].n
                side = fit.coef_left if left else fit.coef_right
                inc = side[0]
                nxt = node.children[0 if left else 1]
            else:
                xv = _numeric_value(meta, x[meta.name])
                lo, hi_x = fit.x_range
                clamped = min(max(xv, lo), hi_x)
                if fit.kind is ModelKind.LIN:
                    side = fit.coef_left
                    nxt = node.children[0]
                else:
                    left = xv <= fit.pivot
                    side = fit.coef_left if left else fit.coef_right
                    nxt = node.children[0 if left else 1]
                inc = side[0] + side[1] * clamped
        cum = min(max(cum + inc, -hi), hi)
        if with_trace:
            steps.append(TraceStep(node.node_id, fit.kind, clamped,
                                   float(inc), cum))
        node = nxt
    pred = cum + tree.offset
    if with_trace:
        return pred, PredictionTrace(tuple(steps), cum, pred)
    return pred


def _encode_table(tree: PilotTree, table: Mapping[str, Sequence]):
    names = [m.name for m in tree.column_meta]
    missing = [n for n in names if n not in table]
    extra = [n for n in table.keys() if n not in names]
    if missing or extra:
        raise PredictError(
            f"feature columns do not match the model: missing={missing!r} "
            f"extra={extra!r}")
    lengths = {n: len(table[n]) for n in names} if names else {}
    n_rows = next(iter(lengths.values()), 0)
    if any(v != n_rows for v in lengths.values()):
        raise PredictError(f"feature columns have unequal lengths: {lengths!r}")
    encoded: list[np.ndarray] = []
    for meta in tree.column_meta:
        raw = table[meta.name]
        if meta.kind is ColumnKind.NUMERIC:
            vals = np.asarray(raw, dtype=np.float64)
            if vals.size and not np.all(np.isfinite(vals)):
                bad = int(np.flatnonzero(~np.isfinite(vals))[0])
                raise PredictError(
                    f"non-finite value in column {meta.name!r}, row {bad + 1}")
            encoded.append(vals)
        else:
            lut = {name: i for i, name in enumerate(meta.levels)}
            encoded.append(np.array([lut.get(str(v), -1) for v in raw],
                                    dtype=np.int64))
    return encoded, n_rows


def predict_batch(tree: PilotTree, table: Mapping[str, Sequence]) -> np.ndarray:
    """Vectorized prediction; row order is preserved.

    ``table`` maps column names to sequences and must carry exactly the
    model's feature columns.  Equivalent to calling :func:`predict_one` on
    every row.
    """
    encoded, n = _encode_table(tree, table)
    cum = np.zeros(n)
    hi = 3.0 * tree.bound_B
    stack: list[tuple[TreeNode, np.ndarray]] = [(tree.root, np.arange(n))]
    while stack:
        node, idx = stack.pop()
        if idx.size == 0:
            continue
        fit = node.fit
        if fit.kind is ModelKind.CON:
            inc: np.ndarray | float = fit.coef_left[0]
            cum[idx] = np.minimum(np.maximum(cum[idx] + inc, -hi), hi)
            continue
        col = encoded[fit.predictor]
        if fit.pivot_levels is not None:
            codes = col[idx]
            meta = tree.column_meta[fit.predictor]
            level_mask = np.zeros(meta.n_levels, dtype=bool)
            level_mask[list(fit.pivot_levels)] = True
            seen = codes >= 0
            left = np.where(seen, level_mask[np.maximum(codes, 0)],
                            node.children[0].n >= node.children[1].n)
            li, ri = idx[left], idx[~left]
            cum[li] = np.minimum(np.maximum(cum[li] + fit.coef_left[0], -hi), hi)
            cum[ri] = np.minimum(np.maximum(cum[ri] + fit.coef_right[0], -hi), hi)
            stack.append((node.children[0], li))
            stack.append((node.children[1], ri))
            continue
        xv = col[idx]
        lo, hi_x = fit.x_range
        clamped = np.minimum(np.maximum(xv, lo), hi_x)
        if fit.kind is ModelKind.LIN:
            a, b = fit.coef_left
            cum[idx] = np.minimum(np.maximum(cum[idx] + (a + b * clamped), -hi), hi)
            stack.append((node.children[0], idx))
            continue
        left = xv <= fit.pivot
        for side_idx, coef, child in (
            (idx[left], fit.coef_left, node.children[0]),
            (idx[~left], fit.coef_right, node.children[1]),
        ):
            a, b = coef
            side_clamped = np.minimum(np.maximum(col[side_idx], lo), hi_x)
            cum[side_idx] = np.minimum(
                np.maximum(cum[side_idx] + (a + b * side_clamped), -hi), hi)
            stack.append((child, side_idx))
    return cum + tree.offset
