"""Per-node model evaluation and split finding.

Every candidate pivot of a presorted predictor is scored in O(1) after a
single O(n) accumulation pass: prefix sums of the (shifted) predictor and
residual moments give the per-side Gram and moment matrices of the piecewise
fits, and suffix moments give the hinge-column entries of the continuous
broken-linear basis ``[1, x, (x - pivot)+]``.  Model selection minimizes

    BIC = t * log(RSS / t) + v * log(t)

over all predictors and eligible model kinds, with ties broken by lower
degrees of freedom, then lower predictor index, then lower pivot.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .data import ColumnKind, Dataset, Hyperparams
from .kinds import KIND_ORDER, ModelKind

__all__ = [
    "Moments",
    "NodeFit",
    "SplitScanState",
    "bic_score",
    "fit_con",
    "fit_lin",
    "scan_numeric_predictor",
    "scan_categorical_predictor",
    "constant_node_fit",
    "select_model",
    "SelectionResult",
]

# Relative determinant below which a linear-piece normal system is treated
# as singular and the pivot is skipped for that kind.
SINGULAR_REL_DET = 1e-12


def _dot(a: np.ndarray, b: np.ndarray) -> float:
    """Single-threaded inner product; keeps timing independent of BLAS."""
    return float(np.einsum("i,i->", a, b))


# A candidate whose scanned RSS is below this fraction of the node RSS gets
# its RSS recomputed directly from the residuals.  The O(1)-per-pivot update
# formulas cancel catastrophically only when the fit is near perfect, and
# the model comparison then needs the extra accuracy.
REFINE_REL = 1e-4


class Moments(NamedTuple):
    """Sufficient statistics of one case set: counts and raw sums."""

    m: float
    sx: float
    sxx: float
    sy: float
    sxy: float
    syy: float


def bic_score(rss: float, t: int, v: int, floor: float = 0.0) -> float:
    """BIC of a fit with residual sum of squares ``rss`` on ``t`` cases.

    ``rss`` is replaced by ``max(rss, floor)`` before the log; callers pass
    ``floor = rss_floor_scale * max(1, sum(y^2))`` so perfect fits stay
    finite and keep their ordering by degrees of freedom.
    """
    if t < 1:
        raise ValueError("t must be >= 1")
    rss_eff = max(rss, floor)
    if rss_eff <= 0.0:
        return -math.inf
    return t * math.log(rss_eff / t) + v * math.log(t)


def fit_con(moments: Moments) -> tuple[tuple[float, float], float]:
    """Least-squares constant fit from raw moments.

    Returns ``((intercept, 0.0), rss)`` with ``intercept = sy / m`` and
    ``rss = syy - sy^2 / m`` (clamped at zero).
    """
    if moments.m < 1:
        raise ValueError("constant fit needs at least one case")
    intercept = moments.sy / moments.m
    rss = max(moments.syy - moments.sy * moments.sy / moments.m, 0.0)
    return (intercept, 0.0), rss


def fit_lin(moments: Moments) -> tuple[tuple[float, float], float] | None:
    """Simple linear regression from raw moments, or None when degenerate.

    ``slope = (sxy - sx*sy/m) / (sxx - sx^2/m)``, ``intercept`` from the
    means.  A predictor with zero variance yields None, signalling that the
    linear candidate is skipped.
    """
    m = moments.m
    if m < 2:
        return None
    var = moments.sxx - moments.sx * moments.sx / m
    if not (var > 0.0):
        return None
    cov = moments.sxy - moments.sx * moments.sy / m
    slope = cov / var
    intercept = moments.sy / m - slope * moments.sx / m
    syy_c = moments.syy - moments.sy * moments.sy / m
    rss = max(syy_c - cov * cov / var, 0.0)
    return (intercept, slope), rss


@dataclass(frozen=True)
class NodeFit:
    """Outcome of model selection in one node.

    ``coef_left``/``coef_right`` are ``(intercept, slope)`` pairs in raw
    predictor coordinates; for CON and LIN only the left pair is present.
    ``gain`` is the per-case impurity decrease measured against the node's
    post-mean residual sum of squares ``rss_before``, so a CON fit always has
    gain 0.  ``pivot_levels`` replaces ``pivot`` for categorical splits.
    """

    kind: ModelKind
    predictor: int | None
    pivot: float | None
    pivot_levels: tuple[int, ...] | None
    coef_left: tuple[float, float]
    coef_right: tuple[float, float] | None
    bic: float
    rss_after: float
    rss_before: float
    gain: float
    left_rows: int
    right_rows: int
    x_range: tuple[float, float] | None

    def sort_key(self):
        """Deterministic selection order: BIC, dof, predictor, pivot, kind."""
        pred = -1 if self.predictor is None else self.predictor
        if self.pivot is not None:
            pivot_key: tuple = (self.pivot,)
        elif self.pivot_levels is not None:
            pivot_key = self.pivot_levels
        else:
            pivot_key = ()
        return (self.bic, self.kind.dof, pred, pivot_key, KIND_ORDER[self.kind])


class _NodeStats(NamedTuple):
    t: int
    sum_r: float
    sum_r2: float
    r_mean: float
    rss_centered: float
    floor: float


def _node_stats(r: np.ndarray, hp: Hyperparams) -> _NodeStats:
    t = r.size
    sum_r = float(r.sum())
    sum_r2 = _dot(r, r)
    r_mean = sum_r / t
    rc = r - r_mean
    rss_centered = max(_dot(rc, rc), 0.0)
    floor = hp.rss_floor_scale * max(1.0, sum_r2)
    return _NodeStats(t, sum_r, sum_r2, r_mean, rss_centered, floor)


class SplitScanState:
    """Per-pivot sufficient statistics of one ordered numeric predictor.

    The predictor is shifted by its node mean (``x_center``) before the
    prefix sums are accumulated; residuals are used as-is.  One row per
    candidate pivot: every distinct predictor value except the largest, with
    the left side holding the cases whose value is <= the pivot.

    Attributes
    ----------
    pivots : ndarray
        Candidate split values.
    left, right : Moments of ndarrays
        Per-side counts and sums of the shifted predictor and the residuals.
        ``left`` + ``right`` reproduce the whole-node moments at every pivot,
        which is how the left/right Gram matrices of the two-piece fits sum
        to the full-node Gram matrix.
    hinge_* : ndarray
        Sums involving ``h = (x - pivot)+`` needed by the broken-linear fit:
        ``hinge_sum``, ``hinge_x`` (= sum of x*h), ``hinge_sq``, ``hinge_y``.
    """

    def __init__(self, x_ordered: np.ndarray, resid_ordered: np.ndarray):
        x = np.asarray(x_ordered, dtype=np.float64)
        r = np.asarray(resid_ordered, dtype=np.float64)
        if x.size != r.size or x.size == 0:
            raise ValueError("predictor and residual vectors must align")
        t = x.size
        self.t = t
        self.x_center = float(x.mean())
        xc = x - self.x_center

        neq = x[1:] != x[:-1]
        n_unique = int(np.count_nonzero(neq)) + 1
        self.n_unique = n_unique
        if n_unique == t:
            # all values distinct: boundary rows are simply 0..t-2, so the
            # per-pivot arrays can be views instead of gathered copies
            cut: slice | np.ndarray = slice(0, t - 1)
            self.pivots = x[:-1]
            self.left_count = np.arange(1, t, dtype=np.int64)
        else:
            change = np.flatnonzero(neq)
            cut = change
            self.pivots = x[change]
            self.left_count = change + 1
        self.right_count = t - self.left_count
        n_piv = self.pivots.shape[0]
        self.unique_left = np.arange(1, n_piv + 1, dtype=np.int64)
        self.unique_right = n_unique - self.unique_left

        cx = np.cumsum(xc)
        cxx = np.cumsum(xc * xc)
        cr = np.cumsum(r)
        cxr = np.cumsum(xc * r)
        crr = np.cumsum(r * r)
        self.total = Moments(
            m=float(t), sx=float(cx[-1]), sxx=float(cxx[-1]),
            sy=float(cr[-1]), sxy=float(cxr[-1]), syy=float(crr[-1]),
        )
        self.left = Moments(self.left_count, cx[cut], cxx[cut], cr[cut],
                            cxr[cut], crr[cut])
        self.right = Moments(
            self.right_count,
            self.total.sx - self.left.sx,
            self.total.sxx - self.left.sxx,
            self.total.sy - self.left.sy,
            self.total.sxy - self.left.sxy,
            self.total.syy - self.left.syy,
        )

        # Hinge-column sums for the knot placed at each pivot.  Only cases on
        # the right of the knot contribute, so suffix moments suffice.
        eta = self.pivots - self.x_center
        mr = self.right_count
        self.hinge_sum = self.right.sx - mr * eta
        self.hinge_x = self.right.sxx - eta * self.right.sx
        self.hinge_sq = self.right.sxx - 2.0 * eta * self.right.sx + mr * eta * eta
        self.hinge_y = self.right.sxy - eta * self.right.sy

    def side_moments(self, i: int) -> tuple[Moments, Moments]:
        """Left/right scalar moments at pivot index ``i`` (shifted x)."""
        pick = lambda mom: Moments(*(float(np.asarray(f)[i]) for f in mom))
        return pick(self.left), pick(self.right)


def _side_linear(side: Moments):
    """Vectorized per-side simple regression: (slope, mean_x, mean_y, rss, ok)."""
    mean_x = side.sx / side.m
    mean_y = side.sy / side.m
    var = side.sxx - side.sx * mean_x
    cov = side.sxy - side.sx * mean_y
    syy = side.syy - side.sy * mean_y
    ok = (var > 0.0) & (var > SINGULAR_REL_DET * np.maximum(side.sxx, 1e-300))
    slope = np.where(ok, cov, 0.0) / np.where(ok, var, 1.0)
    rss = np.maximum(syy - slope * cov, 0.0)
    return slope, mean_x, mean_y, rss, ok


def _best_pivot(rss, valid, floor):
    """Index of the minimal floored RSS among valid pivots, or None."""
    if not np.any(valid):
        return None
    cand = np.where(valid, np.maximum(rss, floor), np.inf)
    return int(np.argmin(cand))


def scan_numeric_predictor(
    predictor: int,
    x_ordered: np.ndarray,
    resid_ordered: np.ndarray,
    hp: Hyperparams,
    stats: _NodeStats | None = None,
) -> dict[ModelKind, NodeFit]:
    """Best candidate per eligible kind on one presorted numeric predictor.

    Parameters
    ----------
    predictor : int
        Column index recorded in the returned fits.
    x_ordered, resid_ordered : ndarray
        The node's predictor values in ascending order and the residuals in
        the same order.
    hp : Hyperparams
    stats : optional
        Node-level residual statistics; recomputed here when absent so the
        function stays usable on its own.

    Returns
    -------
    dict mapping ModelKind to NodeFit
        At most one entry each for LIN, PCON, BLIN, PLIN; the constant fit
        is handled once per node by :func:`select_model`.
    """
    x = np.asarray(x_ordered, dtype=np.float64)
    r = np.asarray(resid_ordered, dtype=np.float64)
    if stats is None:
        stats = _node_stats(r, hp)
    t = stats.t
    out: dict[ModelKind, NodeFit] = {}
    if t < 2:
        return out
    state = SplitScanState(x, r)
    if state.n_unique < 2:
        return out
    x_range = (float(x[0]), float(x[-1]))
    common = dict(
        predictor=predictor,
        rss_before=stats.rss_centered,
        x_range=x_range,
        pivot_levels=None,
    )

    def finish(kind, rss, pivot, coef_l, coef_r, m_left):
        rss = max(float(rss), 0.0)
        if rss <= REFINE_REL * stats.rss_centered:
            m = int(m_left)
            if coef_r is None:
                res = r - (coef_l[0] + coef_l[1] * x)
                rss = _dot(res, res)
            else:
                res_l = r[:m] - (coef_l[0] + coef_l[1] * x[:m])
                res_r = r[m:] - (coef_r[0] + coef_r[1] * x[m:])
                rss = _dot(res_l, res_l) + _dot(res_r, res_r)
        return NodeFit(
            kind=kind,
            pivot=float(pivot) if pivot is not None else None,
            coef_left=coef_l,
            coef_right=coef_r,
            bic=bic_score(rss, t, kind.dof, stats.floor),
            rss_after=rss,
            gain=max((stats.rss_centered - rss) / t, 0.0),
            left_rows=int(m_left),
            right_rows=t - int(m_left),
            **common,
        )

    if ModelKind.LIN in hp.allowed_kinds and state.n_unique >= hp.min_unique_for_lin_blin:
        fit = fit_lin(state.total)
        if fit is not None:
            (b0c, b1), rss = fit
            # Shift the intercept back to raw predictor coordinates.
            coef = (b0c - b1 * state.x_center, b1)
            out[ModelKind.LIN] = finish(ModelKind.LIN, rss, None, coef, None, t)

    leaf_ok = (state.left_count >= hp.min_leaf) & (state.right_count >= hp.min_leaf)
    want_pcon = ModelKind.PCON in hp.allowed_kinds
    want_plin = ModelKind.PLIN in hp.allowed_kinds
    want_blin = ModelKind.BLIN in hp.allowed_kinds

    if want_pcon and leaf_ok.any():
        with np.errstate(divide="ignore", invalid="ignore"):
            mean_l = state.left.sy / state.left.m
            mean_r = state.right.sy / state.right.m
            rss = (np.maximum(state.left.syy - state.left.sy * mean_l, 0.0)
                   + np.maximum(state.right.syy - state.right.sy * mean_r, 0.0))
        i = _best_pivot(rss, leaf_ok, stats.floor)
        if i is not None:
            out[ModelKind.PCON] = finish(
                ModelKind.PCON, rss[i], state.pivots[i],
                (float(mean_l[i]), 0.0), (float(mean_r[i]), 0.0),
                state.left_count[i])

    if want_plin:
        need = hp.min_unique_per_child_for_plin
        elig = (leaf_ok
                & (state.unique_left >= need)
                & (state.unique_right >= need))
        if elig.any():
            sl, mxl, myl, rss_l, ok_l = _side_linear(state.left)
            sr, mxr, myr, rss_r, ok_r = _side_linear(state.right)
            valid = elig & ok_l & ok_r
            rss = rss_l + rss_r
            i = _best_pivot(rss, valid, stats.floor)
            if i is not None:
                cl = (float(myl[i] - sl[i] * mxl[i] - sl[i] * state.x_center), float(sl[i]))
                cr = (float(myr[i] - sr[i] * mxr[i] - sr[i] * state.x_center), float(sr[i]))
                out[ModelKind.PLIN] = finish(
                    ModelKind.PLIN, rss[i], state.pivots[i], cl, cr,
                    state.left_count[i])

    if want_blin and state.n_unique >= hp.min_unique_for_lin_blin and leaf_ok.any():
        tot = state.total
        syy_c = tot.syy - tot.sy * tot.sy / t
        sxx = tot.sxx - tot.sx * tot.sx / t
        sxy = tot.sxy - tot.sx * tot.sy / t
        shh = state.hinge_sq - state.hinge_sum * state.hinge_sum / t
        sxh = state.hinge_x - tot.sx * state.hinge_sum / t
        shy = state.hinge_y - state.hinge_sum * tot.sy / t
        det = sxx * shh - sxh * sxh
        scale = np.maximum(sxx * shh, 1e-300)
        valid = leaf_ok & (det > SINGULAR_REL_DET * scale)
        if valid.any():
            with np.errstate(divide="ignore", invalid="ignore"):
                safe = np.where(valid, det, 1.0)
                b = (shh * sxy - sxh * shy) / safe
                c = (sxx * shy - sxh * sxy) / safe
                rss = np.maximum(syy_c - b * sxy - c * shy, 0.0)
            i = _best_pivot(rss, valid, stats.floor)
            if i is not None:
                pivot = float(state.pivots[i])
                alpha = (tot.sy / t
                         - b[i] * tot.sx / t
                         - c[i] * state.hinge_sum[i] / t)
                # Raw-coordinate pieces of a + b*x + c*(x - pivot)+ .
                a_raw = float(alpha - b[i] * state.x_center)
                cl = (a_raw, float(b[i]))
                cr = (a_raw - float(c[i]) * pivot, float(b[i] + c[i]))
                out[ModelKind.BLIN] = finish(
                    ModelKind.BLIN, rss[i], pivot, cl, cr, state.left_count[i])

    return out


def scan_categorical_predictor(
    predictor: int,
    codes: np.ndarray,
    n_levels: int,
    resid: np.ndarray,
    hp: Hyperparams,
    stats: _NodeStats | None = None,
) -> NodeFit | None:
    """Best piecewise-constant split of a categorical predictor, or None.

    Levels present in the node are ordered by their residual mean (ties by
    level id) and the prefix cuts of that ordering are scanned; the returned
    pivot is the level-id set of the left side.
    """
    if ModelKind.PCON not in hp.allowed_kinds:
        return None
    r = np.asarray(resid, dtype=np.float64)
    if stats is None:
        stats = _node_stats(r, hp)
    t = stats.t
    counts = np.bincount(codes, minlength=n_levels)
    present = np.flatnonzero(counts > 0)
    if present.size < 2:
        return None
    sums = np.bincount(codes, weights=r, minlength=n_levels)
    sqs = np.bincount(codes, weights=r * r, minlength=n_levels)
    means = sums[present] / counts[present]
    order = np.lexsort((present, means))
    ids_o = present[order]
    cnt_o = counts[ids_o].astype(np.float64)
    sum_o = sums[ids_o]
    sq_o = sqs[ids_o]

    ml = np.cumsum(cnt_o)[:-1]
    sl = np.cumsum(sum_o)[:-1]
    ql = np.cumsum(sq_o)[:-1]
    mr = t - ml
    sr = stats.sum_r - sl
    qr = stats.sum_r2 - ql
    valid = (ml >= hp.min_leaf) & (mr >= hp.min_leaf)
    if not valid.any():
        return None
    with np.errstate(divide="ignore", invalid="ignore"):
        mean_l = sl / ml
        mean_r = sr / mr
        rss = np.maximum(ql - sl * mean_l, 0.0) + np.maximum(qr - sr * mean_r, 0.0)
    i = _best_pivot(rss, valid, stats.floor)
    if i is None:
        return None
    rss_i = max(float(rss[i]), 0.0)
    left_ids = tuple(sorted(int(v) for v in ids_o[: i + 1]))
    if rss_i <= REFINE_REL * stats.rss_centered:
        level_mask = np.zeros(n_levels, dtype=bool)
        level_mask[list(left_ids)] = True
        on_left = level_mask[codes]
        res_l = r[on_left] - mean_l[i]
        res_r = r[~on_left] - mean_r[i]
        rss_i = _dot(res_l, res_l) + _dot(res_r, res_r)
    return NodeFit(
        kind=ModelKind.PCON,
        predictor=predictor,
        pivot=None,
        pivot_levels=left_ids,
        coef_left=(float(mean_l[i]), 0.0),
        coef_right=(float(mean_r[i]), 0.0),
        bic=bic_score(rss_i, t, ModelKind.PCON.dof, stats.floor),
        rss_after=rss_i,
        rss_before=stats.rss_centered,
        gain=max((stats.rss_centered - rss_i) / t, 0.0),
        left_rows=int(ml[i]),
        right_rows=int(mr[i]),
        x_range=None,
    )


def constant_node_fit(resid: np.ndarray, hp: Hyperparams) -> NodeFit:
    """The always-available constant candidate on a node's residuals."""
    stats = _node_stats(np.asarray(resid, dtype=np.float64), hp)
    return NodeFit(
        kind=ModelKind.CON,
        predictor=None,
        pivot=None,
        pivot_levels=None,
        coef_left=(stats.r_mean, 0.0),
        coef_right=None,
        bic=bic_score(stats.rss_centered, stats.t, 1, stats.floor),
        rss_after=stats.rss_centered,
        rss_before=stats.rss_centered,
        gain=0.0,
        left_rows=stats.t,
        right_rows=0,
        x_range=None,
    )


@dataclass(frozen=True)
class SelectionResult:
    """Winning fit plus the best candidate seen for every kind."""

    best: NodeFit
    per_kind: dict[ModelKind, NodeFit]


def select_model(
    dataset: Dataset,
    rows: np.ndarray,
    ordered: list[np.ndarray],
    resid: np.ndarray,
    hp: Hyperparams,
) -> SelectionResult:
    """Minimum-BIC fit over all predictors and eligible model kinds.

    Parameters
    ----------
    dataset : Dataset
    rows : ndarray
        Row ids of the node's cases (any stable order).
    ordered : list of ndarray
        Per numeric predictor, the node's row ids in ascending predictor
        order (filtered from the presorted index).
    resid : ndarray
        Full-length residual vector; only ``rows`` are read.
    hp : Hyperparams

    Returns
    -------
    SelectionResult
        The constant fit is always present, so selection cannot fail.
    """
    r_node = resid[rows]
    stats = _node_stats(r_node, hp)
    per_kind: dict[ModelKind, NodeFit] = {ModelKind.CON: NodeFit(
        kind=ModelKind.CON, predictor=None, pivot=None, pivot_levels=None,
        coef_left=(stats.r_mean, 0.0), coef_right=None,
        bic=bic_score(stats.rss_centered, stats.t, 1, stats.floor),
        rss_after=stats.rss_centered, rss_before=stats.rss_centered,
        gain=0.0, left_rows=stats.t, right_rows=0, x_range=None,
    )}

    def consider(fit: NodeFit | None):
        if fit is None:
            return
        held = per_kind.get(fit.kind)
        if held is None or fit.sort_key() < held.sort_key():
            per_kind[fit.kind] = fit

    for col, meta in enumerate(dataset.column_meta):
        if meta.kind is ColumnKind.NUMERIC:
            rows_sorted = ordered[dataset.numeric_slot(col)]
            x_sorted = dataset.columns[col][rows_sorted]
            r_sorted = resid[rows_sorted]
            fits = scan_numeric_predictor(col, x_sorted, r_sorted, hp, stats)
            for fit in fits.values():
                consider(fit)
        else:
            consider(scan_categorical_predictor(
                col, dataset.columns[col][rows], meta.n_levels, r_node, hp,
                stats))

    best = min(per_kind.values(), key=NodeFit.sort_key)
    return SelectionResult(best=best, per_kind=per_kind)
