import math

import numpy as np
import pytest
from scipy import integrate, stats

from ibart import _fallback
from ibart.core import DecisionTree, HyperParams
from ibart.trees import (CHANGE, GROW, MOVE_PROBS, PRUNE, SWAP, _one_tree, applicable,
                         draw_leaves, draw_move_kind, integrated_log_lik, leaf_posterior,
                         leaf_sufficient_stats, mh_update_tree, propose, tree_log_prior,
                         LeafStats)


def _deep_tree():
    return DecisionTree.from_splits(
        (0, 0.5, (1, 0.5, (2, 0.3, None, None), None), (1, 0.4, None, (0, 0.8, None, None))))


def _active_leaf_ok(tree, X, rows):
    hit = set(tree.route(X[rows]).tolist())
    return hit == set(tree.leaves().tolist())


class TestTreeLogPrior:
    def test_root_only(self):
        assert tree_log_prior(DecisionTree.root_only(), 0.95, 2.0) == pytest.approx(math.log(0.05))

    def test_single_split(self):
        t = DecisionTree.from_splits((0, 0.5, None, None))
        assert tree_log_prior(t, 0.95, 2.0) == pytest.approx(
            math.log(0.95) + 2 * math.log(1 - 0.2375))

    def test_large_beta(self):
        t = DecisionTree.from_splits((0, 0.5, None, None))
        assert tree_log_prior(t, 0.95, 200.0) == pytest.approx(math.log(0.95), abs=1e-12)
        deep = DecisionTree.from_splits((0, 0.5, (1, 0.5, None, None), None))
        assert tree_log_prior(deep, 0.95, 200.0) < -100


class TestLeafStats:
    def test_root(self):
        X = np.zeros((3, 1))
        s = leaf_sufficient_stats(DecisionTree.root_only(), [1.0, 2.0, 3.0], [0, 1, 2], X)
        assert s.n.tolist() == [3] and s.s.tolist() == [6.0] and s.q.tolist() == [14.0]

    def test_split(self):
        X = np.array([[0.1], [0.2], [0.9]])
        t = DecisionTree.from_splits((0, 0.5, None, None))
        s = leaf_sufficient_stats(t, [1.0, 2.0, 3.0], [0, 1, 2], X)
        assert (s.n.tolist(), s.s.tolist(), s.q.tolist()) == ([2, 1], [3.0, 3.0], [5.0, 9.0])

    def test_counts_sum_to_active_rows(self, rng):
        X = rng.random((50, 3))
        rows = np.flatnonzero(rng.random(50) < 0.6)
        st = leaf_sufficient_stats(_deep_tree(), rng.standard_normal(rows.size), rows, X)
        assert st.n.sum() == rows.size

    def test_incremental_matches_recomputed(self, rng):
        X = rng.random((60, 3))
        rows = np.flatnonzero(rng.random(60) < 0.7)
        resid = rng.standard_normal(rows.size)
        f, Xc, y, fitted = _one_tree(DecisionTree.root_only(), X, rows, resid)
        f.ensure_node_capacity(64)
        T = _fallback.TreeBuf(f, 0)
        Xl = Xc.tolist()
        node_n, node_s, res, _ = _fallback.node_stats(T, y.tolist(), fitted.tolist())
        committed = 0
        for _ in range(100):
            shape = _fallback.Shape(T, node_n)
            kind = _fallback.draw_kind(list(MOVE_PROBS), len(shape.internals),
                                      len(shape.pair_parent), rng)
            prop = _fallback.propose(T, kind, shape, node_n, node_s, res, Xl, Xc.shape[1], 1.0,
                                     0.1, 0.95, 2.0, list(MOVE_PROBS), rng)
            if prop.ok and T.n_nodes + 2 <= T.cap:
                _fallback.commit(T, prop, node_n, node_s, Xl)
                committed += 1
            fresh_n, fresh_s, _, _ = _fallback.node_stats(T, y.tolist(), fitted.tolist())
            for c in range(T.cap):
                if T.status[c] == 1:
                    assert node_n[c] == fresh_n[c]
                    assert node_s[c] == pytest.approx(fresh_s[c], abs=1e-12)
        assert committed > 10


class TestIntegratedLogLik:
    def test_hand_value(self):
        st = LeafStats(np.array([1]), np.array([0.0]), np.array([0.0]))
        assert integrated_log_lik(st, 1.0, 1.0) == pytest.approx(
            -0.5 * math.log(2 * math.pi) + 0.5 * math.log(0.5), abs=1e-14)

    def test_tiny_prior_variance(self, rng):
        r = rng.standard_normal(5)
        st = LeafStats(np.array([5]), np.array([r.sum()]), np.array([r @ r]))
        direct = stats.norm.logpdf(r, 0, math.sqrt(2.0)).sum()
        assert integrated_log_lik(st, 2.0, 1e-14) == pytest.approx(direct, abs=1e-9)

    def test_domain(self):
        st = LeafStats(np.array([1]), np.array([0.0]), np.array([0.0]))
        with pytest.raises(ValueError):
            integrated_log_lik(st, 0.0, 1.0)

    def test_quadrature(self):
        rng = np.random.default_rng(21)
        for _ in range(100):
            L = int(rng.integers(1, 4))
            sigma2 = float(rng.uniform(0.2, 2.0))
            smu2 = float(rng.uniform(0.05, 1.5))
            total = 0.0
            ns, ss, qs = [], [], []
            for _ in range(L):
                n = int(rng.integers(1, 8))
                r = rng.normal(rng.normal(0, 1), math.sqrt(sigma2), n)
                ns.append(n), ss.append(r.sum()), qs.append(r @ r)
                mode = r.sum() / sigma2 / (1 / smu2 + n / sigma2)

                def f(mu, r=r):
                    return (stats.norm.logpdf(r, mu, math.sqrt(sigma2)).sum()
                            + stats.norm.logpdf(mu, 0, math.sqrt(smu2)))

                top = f(mode)
                val, _ = integrate.quad(lambda mu: math.exp(f(mu) - top), -np.inf, np.inf,
                                        epsabs=1e-13, epsrel=1e-12, points=None)
                total += top + math.log(val)
            st = LeafStats(np.array(ns), np.array(ss), np.array(qs))
            assert integrated_log_lik(st, sigma2, smu2) == pytest.approx(total, abs=1e-8)


class TestPropose:
    def test_root_only_moves(self, rng):
        t = DecisionTree.root_only()
        assert applicable(t) == (True, False, False, False)
        X = rng.random((10, 2))
        prop = propose(t, "prune", rng, X, np.arange(10))
        assert prop.kind == GROW

    def test_grow_then_prune_ratio(self, rng):
        X = rng.random((30, 3))
        rows = np.arange(30)
        resid = rng.standard_normal(30)
        checked = 0
        for start in (DecisionTree.root_only(), DecisionTree.from_splits((0, 0.5, None, None))):
            for _ in range(30):
                g = propose(start, "grow", rng, X, rows, resid, sigma2=0.7, sigma_mu2=0.3)
                if not g.ok:
                    continue
                # retry prunes until the freshly grown node is the one chosen
                for _ in range(200):
                    pr = propose(g.tree, "prune", rng, X, rows, resid, sigma2=0.7, sigma_mu2=0.3)
                    if pr.ok and pr.node == g.node:
                        break
                assert pr.node == g.node
                assert g.log_ratio + pr.log_ratio == pytest.approx(0.0, abs=1e-12)
                assert g.dlik + pr.dlik == pytest.approx(0.0, abs=1e-10)
                assert g.dprior + pr.dprior == pytest.approx(0.0, abs=1e-12)
                checked += 1
        assert checked > 20

    def test_kind_frequencies(self):
        rng = np.random.default_rng(3)
        t = _deep_tree()
        draws = np.array([draw_move_kind(t, rng) for _ in range(10000)])
        for k in (GROW, PRUNE, CHANGE, SWAP):
            p = MOVE_PROBS[k]
            freq = np.mean(draws == k)
            assert abs(freq - p) < 3 * math.sqrt(p * (1 - p) / draws.size)

    def test_kind_frequencies_without_pairs(self):
        rng = np.random.default_rng(4)
        t = DecisionTree.from_splits((0, 0.5, None, None))
        draws = np.array([draw_move_kind(t, rng) for _ in range(10000)])
        assert not np.any(draws == SWAP)
        p = 0.25 / 0.9
        assert abs(np.mean(draws == GROW) - p) < 3 * math.sqrt(p * (1 - p) / draws.size)

    def test_proposals_keep_cells_non_empty(self, rng):
        X = rng.random((40, 3))
        rows = np.flatnonzero(rng.random(40) < 0.8)
        t = _deep_tree()
        if not _active_leaf_ok(t, X, rows):
            t = DecisionTree.from_splits((0, 0.5, None, None))
        for _ in range(300):
            kind = int(rng.integers(4))
            prop = propose(t, kind, rng, X, rows)
            if prop.ok:
                prop.tree.check()
                assert _active_leaf_ok(prop.tree, X, rows)
                t = prop.tree


class TestMh:
    def test_identical_change_has_zero_log_ratio(self, rng):
        # two rows and one variable admit exactly one rule
        X = np.array([[0.2], [0.7]])
        t = DecisionTree.from_splits((0, 0.2, None, None))
        prop = propose(t, CHANGE, rng, X, [0, 1], [0.3, -0.4])
        assert prop.ok and prop.var == 0 and prop.cut == 0.2
        assert prop.log_accept == 0.0

    def test_strong_prior_gives_root_only(self, rng):
        X = rng.random((40, 3))
        rows = np.arange(40)
        hp = HyperParams(alpha=0.01, beta=50.0, sigma_mu2=1e-10)
        t = _deep_tree()
        mu = np.zeros(t.n_leaves)
        for _ in range(100):
            t, mu, _, _ = mh_update_tree(t, mu, rng.standard_normal(40), rows, 1.0, hp, rng, X)
        assert t.n_leaves == 1

    def test_large_beta_caps_depth(self, rng):
        X = rng.random((40, 3))
        rows = np.arange(40)
        hp = HyperParams(beta=50.0, sigma_mu2=1e-10)
        t = _deep_tree()
        mu = np.zeros(t.n_leaves)
        for _ in range(150):
            t, mu, _, _ = mh_update_tree(t, mu, rng.standard_normal(40), rows, 1.0, hp, rng, X)
        assert t.depths()[t.internal_nodes()].max(initial=0) == 0

    def test_single_observation_stays_root(self, rng):
        X = rng.random((1, 2))
        t = DecisionTree.root_only()
        mu = np.zeros(1)
        for _ in range(200):
            t, mu, _, _ = mh_update_tree(t, mu, [0.5], [0], 1.0, HyperParams(), rng, X)
            assert t.n_leaves == 1

    def test_structure_after_accepted_moves(self, rng):
        X = rng.random((50, 3))
        rows = np.flatnonzero(rng.random(50) < 0.7)
        resid = np.sin(6 * X[rows, 0]) + 0.1 * rng.standard_normal(rows.size)
        t = DecisionTree.root_only()
        mu = np.zeros(1)
        accepted = 0
        for _ in range(300):
            t, mu, acc, _ = mh_update_tree(t, mu, resid, rows, 0.05, HyperParams(sigma_mu2=0.5),
                                           rng, X)
            accepted += acc
            t.check()
            assert len(mu) == t.n_leaves
            assert _active_leaf_ok(t, X, rows)
        assert accepted > 5


class TestDrawLeaves:
    def test_hand_case(self):
        m, v = leaf_posterior(1, 2.0, 1.0, 1.0)
        assert (m, v) == (1.0, 0.5)
        rng = np.random.default_rng(9)
        st = LeafStats(np.array([1]), np.array([2.0]), np.array([4.0]))
        x = np.array([draw_leaves(DecisionTree.root_only(), st, 1.0, 1.0, rng)[0]
                      for _ in range(10000)])
        assert abs(x.mean() - 1.0) < 3 * math.sqrt(0.5 / x.size)
        assert abs(x.var() - 0.5) < 3 * 0.5 * math.sqrt(2 / x.size)

    def test_zero_sum(self):
        m, _ = leaf_posterior(np.array([3, 10]), np.array([0.0, 0.0]), 0.4, 2.0)
        assert np.all(m == 0)

    def test_data_dominates(self):
        m, v = leaf_posterior(1e9, 1e9 * 0.37, 1.0, 1.0)
        assert m == pytest.approx(0.37, rel=1e-8) and v < 1e-8

    def test_fixed_tree_gibbs_matches_conjugate(self):
        rng = np.random.default_rng(10)
        X = rng.random((30, 1))
        t = DecisionTree.from_splits((0, 0.5, None, None))
        rows = np.arange(30)
        resid = 0.5 * (X[:, 0] > 0.5) + 0.2 * rng.standard_normal(30)
        st = leaf_sufficient_stats(t, resid, rows, X)
        sigma2, smu2 = 0.04, 0.25
        mean, var = leaf_posterior(st.n, st.s, sigma2, smu2)
        draws = np.array([draw_leaves(t, st, sigma2, smu2, rng) for _ in range(10000)])
        se = np.sqrt(var / draws.shape[0])
        assert np.all(np.abs(draws.mean(0) - mean) < 3 * se)
        assert np.all(np.abs(draws.var(0) - var) < 3 * var * math.sqrt(2 / draws.shape[0]))
