"""Prediction mechanics: clamping, clipping, routing, batch parity."""

import numpy as np
import pytest

import pilot
from pilot import Hyperparams, ModelKind, PredictError, predict_batch, predict_one
from pilot.build import PilotTree, TreeNode
from pilot.data import ColumnKind, ColumnMeta
from pilot.evalharness import gen_additive
from pilot.scan import NodeFit


def _fit(kind, predictor=None, pivot=None, pivot_levels=None,
         coef_left=(0.0, 0.0), coef_right=None, x_range=None, n=10):
    return NodeFit(kind=kind, predictor=predictor, pivot=pivot,
                   pivot_levels=pivot_levels, coef_left=coef_left,
                   coef_right=coef_right, bic=0.0, rss_after=0.0,
                   rss_before=0.0, gain=0.0, left_rows=n, right_rows=0,
                   x_range=x_range)


def _node(fit, node_id=0, depth=0, n=10, children=()):
    return TreeNode(fit=fit, node_id=node_id, depth=depth, n=n,
                    weight=1.0, children=children)


def _tree(root, metas, bound=10.0, offset=1.0, n=10):
    return PilotTree(root=root, bound_B=bound, offset=offset,
                     hyperparams=Hyperparams(), column_meta=tuple(metas),
                     n_train=n)


NUM = ColumnMeta("x", ColumnKind.NUMERIC)
CAT = ColumnMeta("c", ColumnKind.CATEGORICAL, levels=("a", "b", "z"))


class TestHandBuiltTrees:
    def test_con_leaf_returns_constant_plus_offset(self):
        tree = _tree(_node(_fit(ModelKind.CON, coef_left=(2.5, 0.0))), [NUM])
        for xv in (-1e9, 0.0, 3.14, 1e9):
            assert predict_one(tree, {"x": xv}) == 3.5

    def test_single_lin_clamps_to_training_range(self):
        leaf = _node(_fit(ModelKind.CON, coef_left=(0.0, 0.0)), node_id=1)
        root = _node(_fit(ModelKind.LIN, predictor=0, coef_left=(1.0, 2.0),
                          x_range=(0.0, 1.0)), children=(leaf,))
        tree = _tree(root, [NUM], offset=0.5)
        # beyond the range the boundary value is used
        assert predict_one(tree, {"x": 5.0}) == 1.0 + 2.0 * 1.0 + 0.5
        assert predict_one(tree, {"x": -7.0}) == 1.0 + 0.5
        # inside the range clamping is the identity
        assert predict_one(tree, {"x": 0.25}) == 1.0 + 0.5 + 0.5

    def test_routing_uses_raw_value_not_clamped(self):
        # pivot sits above the training range; raw value routes right even
        # though the clamped value would land on the pivot's left
        left = _node(_fit(ModelKind.CON, coef_left=(-1.0, 0.0)), node_id=1)
        right = _node(_fit(ModelKind.CON, coef_left=(1.0, 0.0)), node_id=2)
        root = _node(_fit(ModelKind.PCON, predictor=0, pivot=2.0,
                          coef_left=(-1.0, 0.0), coef_right=(1.0, 0.0),
                          x_range=(0.0, 1.0)), children=(left, right))
        tree = _tree(root, [NUM], offset=0.0)
        assert predict_one(tree, {"x": 5.0}) == 2.0   # right twice
        assert predict_one(tree, {"x": 2.0}) == -2.0  # equal to pivot -> left

    def test_cumulative_clipping_to_three_b(self):
        leaf = _node(_fit(ModelKind.CON, coef_left=(100.0, 0.0)), node_id=1)
        root = _node(_fit(ModelKind.LIN, predictor=0, coef_left=(100.0, 0.0),
                          x_range=(0.0, 1.0)), children=(leaf,))
        tree = _tree(root, [NUM], bound=1.0, offset=0.0)
        assert predict_one(tree, {"x": 0.5}) == 3.0

    def test_unseen_level_routes_to_bigger_child(self):
        left = _node(_fit(ModelKind.CON, coef_left=(-1.0, 0.0)), node_id=1, n=8)
        right = _node(_fit(ModelKind.CON, coef_left=(1.0, 0.0)), node_id=2, n=2)
        root = _node(_fit(ModelKind.PCON, predictor=0, pivot_levels=(0,),
                          coef_left=(-1.0, 0.0), coef_right=(1.0, 0.0)),
                     children=(left, right))
        tree = _tree(root, [CAT], offset=0.0)
        assert predict_one(tree, {"c": "a"}) == -2.0
        assert predict_one(tree, {"c": "b"}) == 2.0
        assert predict_one(tree, {"c": "never-seen"}) == -2.0

    def test_missing_column_named(self):
        tree = _tree(_node(_fit(ModelKind.LIN, predictor=0,
                                coef_left=(0.0, 1.0), x_range=(0.0, 1.0)),
                           children=(_node(_fit(ModelKind.CON), node_id=1),)),
                     [NUM])
        with pytest.raises(PredictError, match="'x'"):
            predict_one(tree, {"other": 1.0})

    def test_non_finite_rejected(self):
        tree = _tree(_node(_fit(ModelKind.LIN, predictor=0,
                                coef_left=(0.0, 1.0), x_range=(0.0, 1.0)),
                           children=(_node(_fit(ModelKind.CON), node_id=1),)),
                     [NUM])
        with pytest.raises(PredictError, match="non-finite"):
            predict_one(tree, {"x": float("nan")})


@pytest.fixture(scope="module")
def fitted():
    ds = gen_additive(400, seed=3, p=4, noise=0.4)
    tree = pilot.build_tree(ds)
    return ds, tree


class TestTrainedTreeParity:
    def test_training_rows_reproduce_fitted_values(self, fitted):
        ds, tree = fitted
        preds = predict_batch(tree, ds.feature_table())
        assert np.array_equal(preds, tree.diagnostics.fitted_values)

    def test_one_equals_batch_bitwise(self, fitted):
        ds, tree = fitted
        table = ds.feature_table()
        batch = predict_batch(tree, table)
        for i in range(0, ds.n_rows, 37):
            row = {k: v[i] for k, v in table.items()}
            assert predict_one(tree, row) == batch[i]

    def test_permuted_rows_permute_predictions(self, fitted):
        ds, tree = fitted
        table = ds.feature_table()
        perm = np.random.default_rng(0).permutation(ds.n_rows)
        permuted = {k: (np.asarray(v)[perm] if not isinstance(v, list)
                        else [v[i] for i in perm]) for k, v in table.items()}
        p1 = predict_batch(tree, table)
        p2 = predict_batch(tree, permuted)
        assert np.array_equal(p1[perm], p2)

    def test_empty_table(self, fitted):
        _, tree = fitted
        table = {m.name: [] for m in tree.column_meta}
        assert predict_batch(tree, table).shape == (0,)

    def test_column_mismatch_lists_names(self, fitted):
        _, tree = fitted
        with pytest.raises(PredictError, match="missing=.*'x1'.*extra=.*'zzz'"):
            predict_batch(tree, {"zzz": [1.0], "x2": [1.0], "x3": [1.0],
                                 "x4": [1.0]})

    def test_repeated_calls_bit_identical(self, fitted):
        ds, tree = fitted
        t = ds.feature_table()
        a = predict_batch(tree, t)
        b = predict_batch(tree, t)
        assert np.array_equal(a, b)

    def test_boundedness_and_finiteness(self, fitted):
        _, tree = fitted
        rng = np.random.default_rng(5)
        table = {f"x{j + 1}": rng.uniform(-1e9, 1e9, size=2000)
                 for j in range(4)}
        preds = predict_batch(tree, table)
        assert np.all(np.isfinite(preds))
        assert np.all(preds <= tree.offset + 3 * tree.bound_B)
        assert np.all(preds >= tree.offset - 3 * tree.bound_B)


class TestTrace:
    def test_trace_stays_in_band_and_matches(self):
        ds = gen_additive(300, seed=8, p=4, noise=0.4)
        tree = pilot.build_tree(ds)
        table = ds.feature_table()
        hi = 3 * tree.bound_B
        for i in (0, 17, 123):
            row = {k: v[i] for k, v in table.items()}
            pred, trace = predict_one(tree, row, with_trace=True)
            assert pred == trace.prediction
            assert trace.centered == pytest.approx(pred - tree.offset)
            for step in trace.steps:
                assert -hi <= step.cumulative <= hi
            assert trace.steps[-1].cumulative == trace.centered

    def test_monotone_no_extrapolation_per_node(self):
        # linear increments stay between the node's boundary predictions
        ds = gen_additive(300, seed=9, p=4, noise=0.4)
        tree = pilot.build_tree(ds)
        rng = np.random.default_rng(0)
        for _ in range(100):
            row = {f"x{j + 1}": float(rng.uniform(-10, 10)) for j in range(4)}
            pred, trace = predict_one(tree, row, with_trace=True)
            node_by_id = {n.node_id: n for n in pilot.iter_nodes(tree.root)}
            prev = 0.0
            for step in trace.steps:
                node = node_by_id[step.node_id]
                bp = node.boundary_preds()
                if bp is not None and step.clamped_value is not None:
                    raw_inc = step.increment
                    side_vals = [v for pair in bp if pair is not None
                                 for v in pair]
                    assert raw_inc <= max(side_vals) + 1e-12
                    assert raw_inc >= min(side_vals) - 1e-12
                prev = step.cumulative
