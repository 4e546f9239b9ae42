"""Tree construction: stopping triggers, truncation, depth accounting."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import pilot
from pilot import Hyperparams, ModelKind, StopReason, build_tree, iter_nodes
from pilot.build import check_stop, truncate_cumulative
from pilot.evalharness import cart_oracle, gen_additive
from pilot.scan import NodeFit


def _lin_fit(gain=1.0, rss_before=10.0):
    return NodeFit(kind=ModelKind.LIN, predictor=0, pivot=None,
                   pivot_levels=None, coef_left=(0.0, 1.0), coef_right=None,
                   bic=0.0, rss_after=rss_before - gain, rss_before=rss_before,
                   gain=gain, left_rows=10, right_rows=0, x_range=(0.0, 1.0))


class TestCheckStop:
    def test_n_fit_trigger(self):
        hp = Hyperparams(min_fit=10)
        assert check_stop(0, 9, hp) is StopReason.N_FIT

    def test_max_depth_trigger(self):
        hp = Hyperparams(max_depth=12)
        assert check_stop(12, 100, hp) is StopReason.MAX_DEPTH

    def test_con_selected(self):
        hp = Hyperparams()
        con = pilot.constant_node_fit(np.ones(20), hp)
        assert check_stop(0, 20, hp, selected=con) is StopReason.CON_SELECTED

    def test_lin_chain_cap(self):
        hp = Hyperparams(max_lin_chain=3)
        fit = _lin_fit()
        assert check_stop(0, 20, hp, selected=fit, chain_len=3) is StopReason.LIN_CHAIN
        assert check_stop(0, 20, hp, selected=fit, chain_len=2) is None

    def test_lin_tiny_gain_guard(self):
        hp = Hyperparams(min_rel_gain_lin=1e-10)
        fit = _lin_fit(gain=1e-12, rss_before=100.0)
        assert check_stop(0, 20, hp, selected=fit) is StopReason.LIN_CHAIN

    def test_no_trigger(self):
        hp = Hyperparams()
        assert check_stop(3, 50, hp) is None


class TestTruncateCumulative:
    @pytest.mark.parametrize("pred,B,expected", [
        (10.0, 1.0, 3.0),
        (-10.0, 1.0, -3.0),
        (2.5, 1.0, 2.5),
    ])
    def test_examples(self, pred, B, expected):
        assert truncate_cumulative(pred, B) == expected

    @given(st.floats(-1e12, 1e12), st.floats(0, 1e6))
    @settings(max_examples=200)
    def test_always_in_band(self, pred, B):
        out = truncate_cumulative(pred, B)
        assert -3 * B <= out <= 3 * B


class TestBuildShapes:
    def test_constant_response_single_leaf(self):
        ds = pilot.from_arrays({"x": np.arange(50.0)}, np.full(50, 7.0))
        tree = build_tree(ds)
        assert tree.root.fit.kind is ModelKind.CON
        assert tree.root.children == ()
        assert tree.diagnostics.max_reported_depth == 0
        assert tree.bound_B == 0.0
        assert pilot.predict_one(tree, {"x": 123.0}) == 7.0

    def test_linear_response_lin_chain_then_con(self):
        rng = np.random.default_rng(0)
        x = rng.random(500)
        y = 2 * x + 1e-6 * rng.standard_normal(500)
        ds = pilot.from_arrays({"x": x}, y)
        tree = build_tree(ds)
        kinds = [n.fit.kind for n in iter_nodes(tree.root)]
        assert kinds[0] is ModelKind.LIN
        assert kinds[-1] is ModelKind.CON
        assert all(k in (ModelKind.LIN, ModelKind.CON) for k in kinds)
        assert tree.diagnostics.max_reported_depth == 0
        # direct BIC comparison at the root backs the selection
        gains = tree.root.candidate_gains
        assert ModelKind.LIN in gains

    def test_two_value_predictor_pcon_root(self):
        x = np.array([-1.0, 1.0] * 20)
        y = (x > 0).astype(float)
        ds = pilot.from_arrays({"x": x}, y)
        tree = build_tree(ds, Hyperparams(min_fit=2, min_leaf=1))
        assert tree.root.fit.kind is ModelKind.PCON
        assert [c.fit.kind for c in tree.root.children] == [ModelKind.CON] * 2
        assert tree.diagnostics.max_reported_depth == 1

    def test_small_node_forced_con(self):
        ds = pilot.from_arrays({"x": np.arange(5.0)}, np.arange(5.0))
        tree = build_tree(ds, Hyperparams(min_fit=10))
        assert tree.root.fit.kind is ModelKind.CON
        assert tree.root.stop_reason is StopReason.N_FIT

    def test_max_depth_respected(self):
        rng = np.random.default_rng(1)
        x = rng.random(800)
        y = np.sin(17 * x) + 0.1 * rng.standard_normal(800)
        for depth in (1, 2, 4):
            tree = build_tree(pilot.from_arrays({"x": x}, y),
                              Hyperparams(max_depth=depth, min_fit=4,
                                          min_leaf=2))
            assert tree.diagnostics.max_reported_depth <= depth
            for node in iter_nodes(tree.root):
                if node.depth == depth:
                    assert node.fit.kind is ModelKind.CON

    def test_lin_nodes_do_not_consume_depth(self):
        rng = np.random.default_rng(2)
        x1 = rng.random(400)
        x2 = rng.random(400)
        y = 3 * x1 + np.where(x2 > 0.5, 2.0, -2.0) + 0.05 * rng.standard_normal(400)
        tree = build_tree(pilot.from_arrays({"x1": x1, "x2": x2}, y))
        lin_nodes = [n for n in iter_nodes(tree.root) if n.fit.kind is ModelKind.LIN]
        assert lin_nodes, "expected linear fits in this tree"
        for node in lin_nodes:
            assert len(node.children) == 1
            assert node.children[0].depth == node.depth

    def test_max_lin_chain_cap(self):
        rng = np.random.default_rng(3)
        X = {f"x{j}": rng.random(300) for j in range(4)}
        y = sum((j + 1) * X[f"x{j}"] for j in range(4)) + 0.01 * rng.standard_normal(300)
        tree = build_tree(pilot.from_arrays(X, y), Hyperparams(max_lin_chain=2))
        chain = 0
        node = tree.root
        while node.fit.kind is ModelKind.LIN:
            chain += 1
            node = node.children[0]
        assert chain <= 2
        if node.stop_reason is StopReason.LIN_CHAIN:
            assert node.fit.kind is ModelKind.CON


class TestBuildBookkeeping:
    def _tree_and_ds(self, seed=5, n=400):
        ds = gen_additive(n, seed=seed, p=4, noise=0.4)
        return build_tree(ds, record_rows=True), ds

    def test_residual_identity_and_bound(self):
        tree, ds = self._tree_and_ds()
        fitted = tree.diagnostics.fitted_values
        centered_fit = fitted - tree.offset
        assert np.all(np.abs(centered_fit) <= 3 * tree.bound_B)
        # original response - residual = cumulative truncated prediction
        resid = ds.response - fitted
        assert tree.diagnostics.train_rss == pytest.approx(float(resid @ resid))

    def test_child_partition(self):
        tree, ds = self._tree_and_ds()
        rows = tree.diagnostics.node_rows
        for node in iter_nodes(tree.root):
            if node.fit.kind.is_split:
                left, right = node.children
                got = np.sort(np.concatenate([rows[left.node_id],
                                              rows[right.node_id]]))
                assert np.array_equal(got, np.sort(rows[node.node_id]))
                assert left.n >= tree.hyperparams.min_leaf
                assert right.n >= tree.hyperparams.min_leaf
            elif node.fit.kind is ModelKind.LIN:
                child = node.children[0]
                assert np.array_equal(rows[child.node_id], rows[node.node_id])

    def test_monotone_rss_per_fit(self):
        tree, _ = self._tree_and_ds()
        for rec in tree.diagnostics.fit_log:
            assert rec.rss_after <= rec.rss_before + 1e-9 * max(rec.rss_before, 1.0)

    def test_split_gains_positive(self):
        tree, _ = self._tree_and_ds()
        for node in iter_nodes(tree.root):
            if node.fit.kind is not ModelKind.CON:
                assert node.fit.gain >= 0.0

    def test_weights_sum_per_level(self):
        tree, _ = self._tree_and_ds()
        leaf_weight = sum(n.weight for n in iter_nodes(tree.root) if n.is_leaf)
        assert leaf_weight == pytest.approx(1.0)


class TestCartReduction:
    def test_matches_oracle_small_random(self):
        for seed in range(8):
            rng = np.random.default_rng(seed)
            n = int(rng.integers(40, 150))
            x1 = rng.random(n)
            lev = rng.choice(["a", "b", "c"], size=n).tolist()
            y = (2.0 * (x1 > 0.5)
                 + np.array([{"a": 0, "b": 1, "c": 2}[l] for l in lev])
                 + 0.2 * rng.standard_normal(n))
            ds = pilot.from_arrays({"x1": x1, "lev": lev}, y)
            hp = Hyperparams.cart_mode(max_depth=4)
            tree = build_tree(ds, hp)
            oracle = cart_oracle(ds, hp)

            def compare(node, cnode):
                if node.fit.kind is ModelKind.CON:
                    assert cnode.is_leaf
                    return
                assert not cnode.is_leaf
                assert node.fit.predictor == cnode.predictor
                assert node.fit.pivot == cnode.pivot
                assert node.fit.pivot_levels == cnode.pivot_levels
                compare(node.children[0], cnode.left)
                compare(node.children[1], cnode.right)

            compare(tree.root, oracle)


class TestShiftEquivariance:
    def test_structure_slopes_predictions(self):
        ds = gen_additive(500, seed=4, p=4, noise=0.4)
        shifted = pilot.from_arrays(ds.feature_table(), ds.response + 42.0)
        t1, t2 = build_tree(ds), build_tree(shifted)
        n1 = list(iter_nodes(t1.root))
        n2 = list(iter_nodes(t2.root))
        assert len(n1) == len(n2)
        for a, b in zip(n1, n2):
            assert a.fit.kind is b.fit.kind
            assert a.fit.predictor == b.fit.predictor
            assert a.fit.pivot == b.fit.pivot
            assert a.fit.pivot_levels == b.fit.pivot_levels
            assert a.fit.coef_left[1] == pytest.approx(b.fit.coef_left[1],
                                                       abs=1e-9)
        tbl = ds.feature_table()
        p1 = pilot.predict_batch(t1, tbl)
        p2 = pilot.predict_batch(t2, tbl)
        np.testing.assert_allclose(p2 - p1, 42.0, atol=1e-9)


class TestDegenerate:
    def test_zero_bound_clips_everything(self):
        ds = pilot.from_arrays({"x": np.arange(20.0)}, np.zeros(20))
        tree = build_tree(ds)
        assert tree.bound_B == 0.0
        preds = pilot.predict_batch(tree, {"x": np.array([-5.0, 0.0, 99.0])})
        assert np.all(preds == 0.0)

    def test_single_row(self):
        ds = pilot.from_arrays({"x": np.array([1.0])}, np.array([5.0]))
        tree = build_tree(ds, Hyperparams(min_fit=1, min_leaf=1))
        assert tree.root.fit.kind is ModelKind.CON
        assert pilot.predict_one(tree, {"x": 1.0}) == 5.0
