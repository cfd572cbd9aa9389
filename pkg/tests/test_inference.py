import numpy as np
import pytest
from scipy import stats

from ibart.core import ContractError, Dataset, DecisionTree, HyperParams
from ibart.data import friedman_mean, gen_friedman, split
from ibart.forest import Forest
from ibart.inference import (TraceStore, average_treatment_effect, default_grid,
                             estimate_f_insample, interval, partial_dependence,
                             predict_out_of_sample, split_shares, variable_importance)
from ibart.sampler import SamplerConfig, run_chain


def _hand_trace(trees, leaves, X, W=None, copies=1):
    """Trace whose every retained draw is the given ensemble."""
    n, p = X.shape
    K = len(trees)
    Wm = np.ones((n, K), dtype=np.uint8) if W is None else np.asarray(W, dtype=np.uint8)
    f = Forest.from_trees(trees, leaves, Wm, X)
    tr = TraceStore.allocate(copies, n, p, retain=True)
    for j in range(copies):
        e = f.snapshot()
        e.sigma2, e.gamma, e.delta, e.eta = 0.01, 1.0, 1.0, 0.0
        tr.ensembles.append(e)
        tr.fitted[j] = f.fitted()
        tr.split_counts[j] = f.split_counts(p)
        tr.z[j], tr.z_tree[j] = split_shares(tr.split_counts[j], f.split_counts_per_tree(p))
    tr.meta["n_train"] = n
    return tr


@pytest.fixture(scope="module")
def friedman_fit():
    rng = np.random.default_rng(101)
    # 300 training rows, p = 30, default chain length
    d = gen_friedman(375, 30, 1.0, rng)
    train, test = split(d, 0.8, rng)
    hp = HyperParams()
    cfg = SamplerConfig(hp=hp, retain_ensembles=True, pdp_vars=[2])
    return train, test, run_chain(train, cfg, np.random.default_rng(102))


class TestIntervals:
    def test_linear_order_statistics(self):
        x = np.array([3.0, 1.0, 2.0, 10.0, 4.0])
        lo, hi = interval(x, 0.5)
        assert (lo, hi) == (2.0, 4.0)
        lo, hi = interval(x)
        assert lo == pytest.approx(1.1) and hi == pytest.approx(9.4)

    def test_default_grid(self):
        g = default_grid(np.arange(101, dtype=float))
        assert g.size == 20 and g[0] == 5.0 and g[-1] == 95.0


class TestInsample:
    def test_single_draw(self):
        X = np.array([[0.1], [0.9]])
        tr = _hand_trace([DecisionTree.from_splits((0, 0.5, None, None))], [[-1.0, 2.0]], X)
        m, lo, hi = estimate_f_insample(tr, 1, original=False)
        assert m == lo == hi == 2.0

    def test_constant_draws(self):
        X = np.zeros((3, 1))
        tr = _hand_trace([DecisionTree.root_only()], [[0.7]], X, copies=4)
        m, lo, hi = estimate_f_insample(tr, original=False)
        np.testing.assert_allclose(m, 0.7)
        np.testing.assert_array_equal(lo, hi)

    def test_index_checked(self):
        tr = _hand_trace([DecisionTree.root_only()], [[0.7]], np.zeros((3, 1)))
        with pytest.raises(IndexError):
            estimate_f_insample(tr, 3)

    def test_partition_average(self, friedman_fit):
        tr = friedman_fit[2]
        assert len(tr) % 4 == 0
        parts = np.split(tr.fitted, 4)
        full = estimate_f_insample(tr, original=False)[0]
        np.testing.assert_allclose(full, np.mean([q.mean(axis=0) for q in parts], axis=0),
                                   rtol=1e-12, atol=1e-12)

    def test_friedman_coverage(self, friedman_fit):
        train, _, tr = friedman_fit
        _, lo, hi = estimate_f_insample(tr)
        f = train.truth["f"]
        assert np.mean((lo <= f) & (f <= hi)) >= 0.9


class TestPrediction:
    def test_classic_trace_is_plain_sum(self):
        X = np.array([[0.2, 0.0], [0.8, 1.0]])
        trees = [DecisionTree.from_splits((0, 0.5, None, None)), DecisionTree.root_only()]
        tr = _hand_trace(trees, [[1.0, 3.0], [0.5]], X, copies=3)
        for e in tr.ensembles:
            e.W = None
        s = predict_out_of_sample(tr, np.array([[0.1, 0.0], [0.9, 0.0]]),
                                  np.random.default_rng(0), original=False)
        np.testing.assert_allclose(s.draws, [[1.5, 3.5]] * 3)

    def test_dense_regime_matches_insample(self):
        d = gen_friedman(80, 5, 1.0, np.random.default_rng(3))
        hp = HyperParams(mode="classic", classic_K=20, iterations=400, burn_in=100)
        tr = run_chain(d, SamplerConfig(hp=hp, retain_ensembles=True), np.random.default_rng(4))
        n = d.n
        for e in tr.ensembles:
            # every column used by every row and almost no mass on new columns
            e.W = np.ones((e.K, n), dtype=np.uint8)
            e.m = np.full(e.K, n)
            e.eta, e.delta = -1.0, 1.0 + 1e-9
            e.delta_eta, e.one_minus_eta = 1e-9, 2.0
        s = predict_out_of_sample(tr, d.X[:1], np.random.default_rng(5))
        ins = estimate_f_insample(tr, 0)
        assert stats.ks_2samp(s.draws[:, 0], tr.to_original(tr.fitted[:, 0])).pvalue > 0.01
        assert abs(s.mean[0] - ins[0]) < 1e-6

    def test_plug_in_is_deterministic(self, friedman_fit):
        train, test, tr = friedman_fit
        a = predict_out_of_sample(tr, test.X[:3], np.random.default_rng(0), plug_in=True)
        b = predict_out_of_sample(tr, test.X[:3], np.random.default_rng(1), plug_in=True)
        np.testing.assert_array_equal(a.draws, b.draws)

    def test_holdout_mse_below_variance(self, friedman_fit):
        train, test, tr = friedman_fit
        s = predict_out_of_sample(tr, test.X, np.random.default_rng(7))
        y = test.y_original()
        mse = np.mean((s.mean - y) ** 2)
        assert np.isfinite(mse) and mse < np.var(y)

    def test_column_mismatch(self, friedman_fit):
        with pytest.raises(ContractError):
            predict_out_of_sample(friedman_fit[2], np.zeros((2, 3)))

    def test_needs_ensembles(self, small_data):
        tr = run_chain(small_data, SamplerConfig(hp=HyperParams(iterations=5, burn_in=1)),
                       np.random.default_rng(0))
        with pytest.raises(ContractError):
            predict_out_of_sample(tr, small_data.X[:2])


class TestImportance:
    def test_no_splits(self):
        tr = _hand_trace([DecisionTree.root_only()], [[0.1]], np.zeros((4, 5)), copies=2)
        np.testing.assert_array_equal(variable_importance(tr), np.zeros(5))
        np.testing.assert_array_equal(variable_importance(tr, per_tree=True), np.zeros(5))

    def test_single_split(self):
        X = np.tile(np.linspace(0, 1, 6)[:, None], (1, 5))
        tr = _hand_trace([DecisionTree.from_splits((3, 0.5, None, None))], [[0.0, 1.0]], X)
        np.testing.assert_array_equal(variable_importance(tr), np.eye(5)[3])

    def test_pooled_and_per_tree_differ(self):
        pooled, per_tree = split_shares([3, 1], [[3, 0], [0, 1]])
        np.testing.assert_allclose(pooled, [0.75, 0.25])
        np.testing.assert_allclose(per_tree, [0.5, 0.5])

    def test_relabel_invariant(self):
        X = np.random.default_rng(0).random((10, 3))
        t1 = DecisionTree.from_splits((0, 0.5, None, None))
        t2 = DecisionTree.from_splits((2, 0.4, (1, 0.3, None, None), None))
        a = _hand_trace([t1, t2], [[0, 1], [0, 1, 2]], X)
        b = _hand_trace([t2, t1], [[0, 1, 2], [0, 1]], X)
        np.testing.assert_array_equal(variable_importance(a), variable_importance(b))

    def test_shares_sum_to_one(self, friedman_fit):
        v = variable_importance(friedman_fit[2])
        assert v.sum() == pytest.approx(1.0) and np.all(v >= 0)

    def test_friedman_signal_variables_first(self, friedman_fit):
        v = variable_importance(friedman_fit[2])
        assert v[:5].min() > v[5:].max()


class TestPartialDependence:
    def test_constant_trees_flat(self):
        X = np.random.default_rng(1).random((12, 2))
        ds = Dataset(X, np.zeros(12), 0.0, 1.0, ["a", "b"])
        tr = _hand_trace([DecisionTree.root_only(), DecisionTree.root_only()], [[0.3], [0.2]], X)
        for s in (0, 1):
            _, summ = partial_dependence(tr, ds, s, grid=[0.1, 0.5, 0.9], original=False)
            np.testing.assert_allclose(summ.mean, 0.5)

    def test_step(self):
        X = np.random.default_rng(2).random((12, 2))
        ds = Dataset(X, np.zeros(12), 0.0, 1.0, ["a", "b"])
        tr = _hand_trace([DecisionTree.from_splits((1, 0.5, None, None))], [[-2.0, 4.0]], X)
        g, summ = partial_dependence(tr, ds, 1, grid=[0.2, 0.5, 0.51, 0.9], original=False)
        np.testing.assert_array_equal(summ.mean, [-2.0, -2.0, 4.0, 4.0])
        _, other = partial_dependence(tr, ds, 0, grid=[0.2, 0.9], original=False)
        # the unused variable's curve is exactly constant
        assert other.mean[0] == other.mean[1]

    def test_uses_partial_rows(self):
        X = np.array([[0.2], [0.8]])
        ds = Dataset(X, np.zeros(2), 0.0, 1.0, ["a"])
        tr = _hand_trace([DecisionTree.root_only()], [[1.0]], X, W=[[1], [0]])
        _, summ = partial_dependence(tr, ds, 0, grid=[0.5], original=False)
        assert summ.mean[0] == 0.5

    def test_empty_grid(self):
        X = np.zeros((3, 1))
        tr = _hand_trace([DecisionTree.root_only()], [[1.0]], X)
        with pytest.raises(ContractError):
            partial_dependence(tr, Dataset(X, np.zeros(3), 0.0, 1.0, ["a"]), 0, grid=[])

    def test_friedman_x3_valley(self, friedman_fit):
        train, _, tr = friedman_fit
        g, summ = partial_dependence(tr, train, 2)
        low, high = summ.mean[g <= 0.5], summ.mean[g >= 0.5]
        assert np.all(np.diff(low) <= 0) and np.all(np.diff(high) >= 0)


class TestTreatmentEffect:
    def _data(self):
        r = np.random.default_rng(3)
        X = np.column_stack([r.integers(0, 2, 20).astype(float), r.random(20)])
        return X, Dataset(X, np.zeros(20), 0.0, 1.0, ["t", "x"])

    def test_no_treatment_splits(self):
        X, ds = self._data()
        tr = _hand_trace([DecisionTree.from_splits((1, 0.5, None, None))], [[1.0, 2.0]], X)
        np.testing.assert_array_equal(average_treatment_effect(tr, ds, 0).draws, [0.0])

    def test_treatment_split(self):
        X, ds = self._data()
        a, b = -0.375, 1.25
        tr = _hand_trace([DecisionTree.from_splits((0, 0.5, None, None))], [[a, b]], X)
        assert average_treatment_effect(tr, ds, 0, original=False).mean == b - a

    def test_non_binary_rejected(self):
        X, ds = self._data()
        tr = _hand_trace([DecisionTree.root_only()], [[0.0]], X)
        with pytest.raises(ContractError):
            average_treatment_effect(tr, ds, 1)
