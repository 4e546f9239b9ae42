"""Recursive tree construction with training-time prediction truncation.

Each node fits the minimum-BIC model on the current residuals.  Constant
fits close the node; simple linear fits refit the same cases without
consuming reported depth (repeated linear fits act as componentwise L2
boosting); the three split models partition the cases and increase the
reported depth by one.  After every fit the cumulative prediction is
clipped to ``[-3B, 3B]`` where ``B`` is the half-range of the centered
response, and residuals are recomputed against the clipped values.
"""

from __future__ import annotations

import enum
import time
from dataclasses import dataclass, field

import numpy as np

from .data import ColumnMeta, Dataset, Hyperparams, center_response
from .kinds import ModelKind
from .scan import NodeFit, SelectionResult, constant_node_fit, select_model

__all__ = [
    "StopReason",
    "TreeNode",
    "PilotTree",
    "TrainDiagnostics",
    "FitRecord",
    "build_tree",
    "check_stop",
    "truncate_cumulative",
    "iter_nodes",
]


class StopReason(enum.Enum):
    MAX_DEPTH = "max_depth"
    N_FIT = "n_fit"
    CON_SELECTED = "con"
    LIN_CHAIN = "lin_chain"


def truncate_cumulative(pred: float, bound_B: float) -> float:
    """Clip a cumulative prediction to ``[-3B, 3B]``."""
    hi = 3.0 * bound_B
    return min(max(pred, -hi), hi)


def check_stop(
    depth: int,
    t: int,
    hp: Hyperparams,
    selected: NodeFit | None = None,
    chain_len: int = 0,
) -> StopReason | None:
    """Which stopping trigger fires, if any.

    Called before model selection with ``selected=None`` (depth and case
    count triggers) and again after selection for the constant-fit and
    linear-chain triggers.  The per-child case minimum is enforced inside
    pivot scanning, not here.
    """
    if depth >= hp.max_depth:
        return StopReason.MAX_DEPTH
    if t < hp.min_fit:
        return StopReason.N_FIT
    if selected is not None:
        if selected.kind is ModelKind.CON:
            return StopReason.CON_SELECTED
        if selected.kind is ModelKind.LIN:
            if chain_len >= hp.max_lin_chain:
                return StopReason.LIN_CHAIN
            if selected.gain < hp.min_rel_gain_lin * selected.rss_before:
                return StopReason.LIN_CHAIN
    return None


@dataclass(eq=False)
class TreeNode:
    """One fitted node.  Immutable after training.

    ``depth`` is the reported depth: the number of splitting ancestors.
    Constant nodes have no children, linear nodes exactly one continuation
    child over the same cases, split nodes a left and a right child.
    """

    fit: NodeFit
    node_id: int
    depth: int
    n: int
    weight: float
    stop_reason: StopReason | None = None
    children: tuple["TreeNode", ...] = ()
    candidate_gains: dict[ModelKind, float] = field(default_factory=dict)

    @property
    def train_range(self) -> tuple[float, float] | None:
        return self.fit.x_range

    @property
    def is_leaf(self) -> bool:
        return not self.children

    def boundary_preds(self) -> tuple[tuple[float, float], tuple[float, float] | None] | None:
        """Model values at the ends of the training range, per side."""
        rng = self.fit.x_range
        if rng is None:
            return None
        lo, hi = rng
        a, b = self.fit.coef_left
        left = (a + b * lo, a + b * hi)
        right = None
        if self.fit.coef_right is not None:
            ar, br = self.fit.coef_right
            right = (ar + br * lo, ar + br * hi)
        return left, right


@dataclass
class FitRecord:
    node_id: int
    kind: ModelKind
    t: int
    rss_before: float
    rss_after: float


@dataclass
class TrainDiagnostics:
    node_count: int = 0
    leaf_count: int = 0
    max_reported_depth: int = 0
    train_rss: float = 0.0
    grow_seconds: float = 0.0
    fitted_values: np.ndarray | None = None
    fit_log: list[FitRecord] = field(default_factory=list)
    node_rows: dict[int, np.ndarray] | None = None


@dataclass(eq=False)
class PilotTree:
    """A fitted tree plus everything prediction needs."""

    root: TreeNode
    bound_B: float
    offset: float
    hyperparams: Hyperparams
    column_meta: tuple[ColumnMeta, ...]
    n_train: int
    diagnostics: TrainDiagnostics | None = None


def iter_nodes(root: TreeNode):
    """Preorder traversal."""
    stack = [root]
    while stack:
        node = stack.pop()
        yield node
        stack.extend(reversed(node.children))


class _Builder:
    def __init__(self, dataset: Dataset, hp: Hyperparams, record_rows: bool):
        self.ds = dataset
        self.hp = hp
        centered = center_response(dataset.response)
        self.offset = centered.offset
        self.bound = centered.bound_B
        self.hi = 3.0 * centered.bound_B
        self.y0 = centered.values
        self.resid = centered.values.copy()
        self.cum = np.zeros(dataset.n_rows)
        self.next_id = 0
        self.diag = TrainDiagnostics(node_rows={} if record_rows else None)
        self._member = np.zeros(dataset.n_rows, dtype=bool)

    def run(self) -> PilotTree:
        t0 = time.perf_counter()
        n = self.ds.n_rows
        rows = np.arange(n, dtype=np.int32)
        ordered = [self.ds.sorted_index[:, s].copy()
                   for s in range(len(self.ds.numeric_cols))]
        root = self._grow(rows, ordered, depth=0)
        self.diag.grow_seconds = time.perf_counter() - t0
        self.diag.train_rss = float(np.einsum("i,i->", self.resid, self.resid))
        self.diag.fitted_values = self.cum + self.offset
        for node in iter_nodes(root):
            self.diag.node_count += 1
            if node.is_leaf:
                self.diag.leaf_count += 1
                self.diag.max_reported_depth = max(self.diag.max_reported_depth,
                                                   node.depth)
        return PilotTree(
            root=root,
            bound_B=self.bound,
            offset=self.offset,
            hyperparams=self.hp,
            column_meta=self.ds.column_meta,
            n_train=n,
            diagnostics=self.diag,
        )

    # -- node construction -------------------------------------------------

    def _make_node(self, fit: NodeFit, rows: np.ndarray, depth: int,
                   stop: StopReason | None,
                   sel: SelectionResult | None) -> TreeNode:
        node = TreeNode(
            fit=fit,
            node_id=self.next_id,
            depth=depth,
            n=rows.size,
            weight=rows.size / self.ds.n_rows,
            stop_reason=stop,
            candidate_gains=({k: f.gain for k, f in sel.per_kind.items()}
                             if sel is not None else {}),
        )
        self.next_id += 1
        self.diag.fit_log.append(FitRecord(node.node_id, fit.kind, rows.size,
                                           fit.rss_before, fit.rss_after))
        if self.diag.node_rows is not None:
            self.diag.node_rows[node.node_id] = rows.copy()
        return node

    def _con_fit(self, rows: np.ndarray) -> NodeFit:
        return constant_node_fit(self.resid[rows], self.hp)

    # -- residual updates ---------------------------------------------------

    def _apply(self, rows: np.ndarray, increment: np.ndarray | float) -> None:
        new_cum = np.minimum(np.maximum(self.cum[rows] + increment, -self.hi),
                             self.hi)
        self.cum[rows] = new_cum
        self.resid[rows] = self.y0[rows] - new_cum

    def _increment(self, rows: np.ndarray, fit: NodeFit, left: bool):
        coef = fit.coef_left if left else fit.coef_right
        a, b = coef
        if fit.kind is ModelKind.CON or fit.pivot_levels is not None:
            return a
        x = self.ds.columns[fit.predictor][rows]
        return a + b * x

    # -- partitioning --------------------------------------------------------

    def _partition(self, rows: np.ndarray, ordered: list[np.ndarray],
                   fit: NodeFit):
        if fit.pivot_levels is not None:
            meta = self.ds.column_meta[fit.predictor]
            level_mask = np.zeros(meta.n_levels, dtype=bool)
            level_mask[list(fit.pivot_levels)] = True
            mask = level_mask[self.ds.columns[fit.predictor][rows]]
        else:
            mask = self.ds.columns[fit.predictor][rows] <= fit.pivot
        left_rows = rows[mask]
        right_rows = rows[~mask]
        member = self._member
        member[left_rows] = True
        left_ord, right_ord = [], []
        for col in ordered:
            m = member[col]
            left_ord.append(col[m])
            right_ord.append(col[~m])
        member[left_rows] = False
        return left_rows, right_rows, left_ord, right_ord

    # -- recursion ------------------------------------------------------------

    def _grow(self, rows: np.ndarray, ordered: list[np.ndarray],
              depth: int) -> TreeNode:
        head: TreeNode | None = None
        tail: TreeNode | None = None
        chain = 0

        def attach(node: TreeNode) -> None:
            nonlocal head, tail
            if tail is not None:
                tail.children = (node,)
            else:
                head = node
            tail = node

        while True:
            reason = check_stop(depth, rows.size, self.hp)
            if reason is not None:
                fit = self._con_fit(rows)
                node = self._make_node(fit, rows, depth, reason, None)
                self._apply(rows, fit.coef_left[0])
                attach(node)
                return head

            sel = select_model(self.ds, rows, ordered, self.resid, self.hp)
            fit = sel.best

            if fit.kind is ModelKind.CON:
                node = self._make_node(fit, rows, depth,
                                       StopReason.CON_SELECTED, sel)
                self._apply(rows, fit.coef_left[0])
                attach(node)
                return head

            if fit.kind is ModelKind.LIN:
                guard = check_stop(depth, rows.size, self.hp,
                                   selected=fit, chain_len=chain)
                if guard is not None:
                    confit = self._con_fit(rows)
                    node = self._make_node(confit, rows, depth, guard, sel)
                    self._apply(rows, confit.coef_left[0])
                    attach(node)
                    return head
                node = self._make_node(fit, rows, depth, None, sel)
                self._apply(rows, self._increment(rows, fit, left=True))
                attach(node)
                chain += 1
                continue

            node = self._make_node(fit, rows, depth, None, sel)
            left_rows, right_rows, left_ord, right_ord = \
                self._partition(rows, ordered, fit)
            self._apply(left_rows, self._increment(left_rows, fit, left=True))
            self._apply(right_rows, self._increment(right_rows, fit, left=False))
            attach(node)
            left_child = self._grow(left_rows, left_ord, depth + 1)
            right_child = self._grow(right_rows, right_ord, depth + 1)
            node.children = (left_child, right_child)
            return head


def build_tree(dataset: Dataset, hp: Hyperparams | None = None, *,
               record_rows: bool = False) -> PilotTree:
    """Fit a tree on ``dataset``.

    Parameters
    ----------
    dataset : Dataset
        Presorted feature table plus response.
    hp : Hyperparams, optional
        Defaults match the standard configuration (depth 12, fit 10, leaf 5).
    record_rows : bool
        When True, the diagnostics keep each node's training row ids, which
        costs memory and is meant for analysis and testing.

    Returns
    -------
    PilotTree
    """
    if hp is None:
        hp = Hyperparams()
    return _Builder(dataset, hp, record_rows).run()
