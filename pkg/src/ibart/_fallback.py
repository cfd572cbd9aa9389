"""Pure-Python sampler kernels.

This module is the reference for ``_ext.pyx``: both consume the generator's
stream in the same order (``random()`` for every uniform, ``standard_normal()``
for every normal) and perform the same floating-point operations in the same
order, so with equal seeds they produce identical chains.

Kernels that need more storage than the forest holds return early with the
index where they stopped; the caller grows the forest and resumes.
"""

import math

import numpy as np

FREE, LEAF, INTERNAL = 0, 1, 2
GROW, PRUNE, CHANGE, SWAP = 0, 1, 2, 3

NAME = "python"


# -- evaluation -------------------------------------------------------------

def _descend(var, cut, left, right, status, x, c):
    while status[c] == INTERNAL:
        if x[var[c]] <= cut[c]:
            c = left[c]
        else:
            c = right[c]
    return c


def route_tree(var, cut, left, right, status, X):
    var, cut, left, right, status = (a.tolist() for a in (var, cut, left, right, status))
    return np.array([_descend(var, cut, left, right, status, x, 0) for x in X.tolist()],
                    dtype=np.int32)


def forest_contrib(var, cut, left, right, status, mu, X):
    """``out[k, j]`` = output of tree ``k`` at row ``j`` of ``X``."""
    K = status.shape[0]
    Xl = X.tolist()
    out = np.zeros((K, len(Xl)))
    for k in range(K):
        v, c, lt, rt, st, m = (a[k].tolist() for a in (var, cut, left, right, status, mu))
        out[k] = [m[_descend(v, c, lt, rt, st, x, 0)] for x in Xl]
    return out


def forest_pdp(var, cut, left, right, status, mu, W, X, s, grid):
    """Average weighted ensemble output over rows of ``X`` with column ``s`` set to each grid value."""
    K = status.shape[0]
    Xl = X.tolist()
    n = len(Xl)
    Wl = W.tolist() if W is not None else None
    trees = [tuple(a[k].tolist() for a in (var, cut, left, right, status, mu)) for k in range(K)]
    out = np.zeros(len(grid))
    for g, value in enumerate(np.asarray(grid, dtype=float).tolist()):
        total = 0.0
        for i in range(n):
            x = list(Xl[i])
            x[s] = value
            row = 0.0
            for k in range(K):
                if Wl is not None and not Wl[k][i]:
                    continue
                v, c, lt, rt, st, m = trees[k]
                row += m[_descend(v, c, lt, rt, st, x, 0)]
            total += row
        out[g] = total / n
    return out


# -- tree moves -------------------------------------------------------------

def log_marginal(n, s, sigma2, smu2):
    """Leaf-marginal Gaussian log likelihood, up to terms that cancel between proposals."""
    v = sigma2 + n * smu2
    return 0.5 * math.log(sigma2 / v) + smu2 * s * s / (2.0 * sigma2 * v)


def split_prob(alpha, beta, d):
    return alpha * math.pow(1.0 + d, -beta)


class TreeBuf:
    """One tree of a forest unpacked into Python lists."""

    def __init__(self, forest, k):
        self.var = forest.var[k].tolist()
        self.cut = forest.cut[k].tolist()
        self.left = forest.left[k].tolist()
        self.right = forest.right[k].tolist()
        self.parent = forest.parent[k].tolist()
        self.depth = forest.depth[k].tolist()
        self.status = forest.status[k].tolist()
        self.mu = forest.mu[k].tolist()
        self.n_nodes = int(forest.n_nodes[k])
        self.leaf_of = forest.leaf_of[k].tolist()
        self.w = forest.W[k].tolist()
        self.cap = len(self.status)

    def store(self, forest, k):
        forest.var[k] = self.var
        forest.cut[k] = self.cut
        forest.left[k] = self.left
        forest.right[k] = self.right
        forest.parent[k] = self.parent
        forest.depth[k] = self.depth
        forest.status[k] = self.status
        forest.mu[k] = self.mu
        forest.n_nodes[k] = self.n_nodes
        forest.leaf_of[k] = self.leaf_of

    def descend(self, x, c):
        return _descend(self.var, self.cut, self.left, self.right, self.status, x, c)


def node_stats(T, y, fitted):
    """Per-slot active counts and residual sums; also per-row residuals and old outputs."""
    n = len(y)
    node_n = [0] * T.cap
    node_s = [0.0] * T.cap
    resid = [0.0] * n
    oldc = [0.0] * n
    for i in range(n):
        if T.w[i]:
            c = T.leaf_of[i]
            mc = T.mu[c]
            r = y[i] - fitted[i] + mc
            resid[i] = r
            oldc[i] = mc
            node_n[c] += 1
            node_s[c] += r
    return node_n, node_s, resid, oldc


class Shape:
    """Node lists of one tree that the move probabilities depend on."""

    def __init__(self, T, node_n):
        self.leaves, self.internals, self.nogs = [], [], []
        self.pair_parent, self.pair_child = [], []
        self.empty = 0
        st = T.status
        for c in range(T.cap):
            if st[c] == LEAF:
                self.leaves.append(c)
                if node_n[c] == 0:
                    self.empty += 1
            elif st[c] == INTERNAL:
                self.internals.append(c)
                lt, rt = T.left[c], T.right[c]
                li, ri = st[lt] == INTERNAL, st[rt] == INTERNAL
                if not li and not ri:
                    self.nogs.append(c)
                if li:
                    self.pair_parent.append(c)
                    self.pair_child.append(lt)
                if ri:
                    self.pair_parent.append(c)
                    self.pair_child.append(rt)


def kind_total(probs, n_int, n_pairs):
    t = probs[0]
    if n_int > 0:
        t += probs[1]
        t += probs[2]
    if n_pairs > 0:
        t += probs[3]
    return t


def draw_kind(probs, n_int, n_pairs, rng):
    total = kind_total(probs, n_int, n_pairs)
    t = rng.random() * total
    acc = probs[0]
    if t < acc or n_int == 0:
        return GROW
    acc += probs[1]
    if t < acc:
        return PRUNE
    acc += probs[2]
    if t < acc or n_pairs == 0:
        return CHANGE
    return SWAP


def _pick(u, count):
    j = int(u * count)
    return j if j < count else count - 1


def _col_range(Xl, rows, v):
    lo = hi = Xl[rows[0]][v]
    for r in rows:
        x = Xl[r][v]
        if x < lo:
            lo = x
        if x > hi:
            hi = x
    return lo, hi


def choose_rule(Xl, rows, p, rng):
    """Draw ``(var, cut)`` uniformly over variables with at least two distinct
    values among ``rows``, then uniformly over rows below that variable's maximum.
    Returns ``None`` when no rule splits ``rows`` into two non-empty cells."""
    if len(rows) < 2:
        return None
    v = -1
    hi = 0.0
    for _ in range(p):
        cand = _pick(rng.random(), p)
        lo, h = _col_range(Xl, rows, cand)
        if lo < h:
            v, hi = cand, h
            break
    if v < 0:
        valid = []
        his = []
        for j in range(p):
            lo, h = _col_range(Xl, rows, j)
            if lo < h:
                valid.append(j)
                his.append(h)
        if not valid:
            return None
        j = _pick(rng.random(), len(valid))
        v, hi = valid[j], his[j]
    count = 0
    for r in rows:
        if Xl[r][v] < hi:
            count += 1
    j = _pick(rng.random(), count)
    for r in rows:
        if Xl[r][v] < hi:
            if j == 0:
                return v, Xl[r][v]
            j -= 1
    raise AssertionError("unreachable")


def mark_subtree(T, node):
    mark = [0] * T.cap
    stack = [node]
    while stack:
        c = stack.pop()
        mark[c] = 1
        if T.status[c] == INTERNAL:
            stack.append(T.left[c])
            stack.append(T.right[c])
    return mark


class Proposal:
    """A proposed tree move with its proposal log-probabilities and the
    statistics needed to evaluate it (``ok`` is False for an impossible move)."""

    __slots__ = ("kind", "ok", "node", "child", "var", "cut", "log_fwd", "log_rev",
                 "dlik", "dprior", "rows_all", "new_leaf", "new_n", "new_s", "mark",
                 "stats")

    def __init__(self, kind):
        self.kind = kind
        self.ok = False
        self.node = self.child = self.var = -1
        self.cut = 0.0
        self.log_fwd = self.log_rev = 0.0
        self.dlik = self.dprior = 0.0
        self.rows_all = self.new_leaf = self.new_n = self.new_s = self.mark = None
        self.stats = None

    @property
    def log_ratio(self):
        return self.log_rev - self.log_fwd


def _grow_prior(alpha, beta, d):
    ps0 = split_prob(alpha, beta, d)
    ps1 = split_prob(alpha, beta, d + 1)
    return math.log(ps0) + 2.0 * math.log(1.0 - ps1) - math.log(1.0 - ps0)


def _reroute_stats(T, node, mark, resid, Xl, n):
    """New leaf assignment and stats for active rows under ``node`` with the current rules."""
    new_n = [0] * T.cap
    new_s = [0.0] * T.cap
    rows_all = []
    new_leaf = {}
    for i in range(n):
        if mark[T.leaf_of[i]]:
            rows_all.append(i)
            if T.w[i]:
                c = T.descend(Xl[i], node)
                new_leaf[i] = c
                new_n[c] += 1
                new_s[c] += resid[i]
    return rows_all, new_leaf, new_n, new_s


def _subtree_delta(T, prop, node_n, node_s, shape, sigma2, smu2):
    empty_after = shape.empty
    acc = 0.0
    for c in range(T.cap):
        if prop.mark[c] and T.status[c] == LEAF:
            if node_n[c] == 0:
                empty_after -= 1
            if prop.new_n[c] == 0:
                empty_after += 1
            acc += (log_marginal(prop.new_n[c], prop.new_s[c], sigma2, smu2)
                    - log_marginal(node_n[c], node_s[c], sigma2, smu2))
    return empty_after, acc


def propose(T, kind, shape, node_n, node_s, resid, Xl, p, sigma2, smu2, alpha, beta,
            probs, rng):
    prop = Proposal(kind)
    n = len(T.leaf_of)
    n_leaves, n_int = len(shape.leaves), len(shape.internals)
    n_nog, n_pairs = len(shape.nogs), len(shape.pair_parent)
    total = kind_total(probs, n_int, n_pairs)
    if kind == GROW:
        leaf = shape.leaves[_pick(rng.random(), n_leaves)]
        prop.node = leaf
        if node_n[leaf] < 2 or shape.empty > 0:
            return prop
        rows = [i for i in range(n) if T.w[i] and T.leaf_of[i] == leaf]
        rule = choose_rule(Xl, rows, p, rng)
        if rule is None:
            return prop
        v, ct = rule
        nl = nr = 0
        sl = sr = 0.0
        for r in rows:
            if Xl[r][v] <= ct:
                nl += 1
                sl += resid[r]
            else:
                nr += 1
                sr += resid[r]
        prop.var, prop.cut = v, ct
        prop.stats = (nl, sl, nr, sr)
        prop.dlik = (log_marginal(nl, sl, sigma2, smu2) + log_marginal(nr, sr, sigma2, smu2)
                     - log_marginal(node_n[leaf], node_s[leaf], sigma2, smu2))
        prop.dprior = _grow_prior(alpha, beta, T.depth[leaf])
        nog_after = n_nog + 1
        pairs_after = n_pairs
        if leaf != 0:
            par = T.parent[leaf]
            sib = T.left[par] if T.right[par] == leaf else T.right[par]
            if T.status[sib] == LEAF:
                nog_after -= 1
            pairs_after += 1
        total_after = kind_total(probs, n_int + 1, pairs_after)
        prop.log_fwd = math.log(probs[0] / total) - math.log(n_leaves)
        prop.log_rev = math.log(probs[1] / total_after) - math.log(nog_after)
        prop.ok = True
    elif kind == PRUNE:
        node = shape.nogs[_pick(rng.random(), n_nog)]
        prop.node = node
        lt, rt = T.left[node], T.right[node]
        nm = node_n[lt] + node_n[rt]
        sm = node_s[lt] + node_s[rt]
        empty_after = shape.empty
        if node_n[lt] == 0:
            empty_after -= 1
        if node_n[rt] == 0:
            empty_after -= 1
        if nm == 0:
            empty_after += 1
        if empty_after > 0:
            return prop
        prop.stats = (nm, sm)
        prop.dlik = (log_marginal(nm, sm, sigma2, smu2)
                     - log_marginal(node_n[lt], node_s[lt], sigma2, smu2)
                     - log_marginal(node_n[rt], node_s[rt], sigma2, smu2))
        prop.dprior = -_grow_prior(alpha, beta, T.depth[node])
        pairs_after = n_pairs - 1 if node != 0 else n_pairs
        total_after = kind_total(probs, n_int - 1, pairs_after)
        prop.log_fwd = math.log(probs[1] / total) - math.log(n_nog)
        prop.log_rev = math.log(probs[0] / total_after) - math.log(n_leaves - 1)
        prop.ok = True
    elif kind == CHANGE:
        node = shape.internals[_pick(rng.random(), n_int)]
        prop.node = node
        mark = mark_subtree(T, node)
        rows = [i for i in range(n) if T.w[i] and mark[T.leaf_of[i]]]
        rule = choose_rule(Xl, rows, p, rng)
        if rule is None:
            return prop
        v, ct = rule
        old_v, old_c = T.var[node], T.cut[node]
        T.var[node], T.cut[node] = v, ct
        prop.rows_all, prop.new_leaf, prop.new_n, prop.new_s = _reroute_stats(
            T, node, mark, resid, Xl, n)
        T.var[node], T.cut[node] = old_v, old_c
        prop.var, prop.cut, prop.mark = v, ct, mark
        empty_after, prop.dlik = _subtree_delta(T, prop, node_n, node_s, shape, sigma2, smu2)
        prop.ok = empty_after == 0
    else:
        j = _pick(rng.random(), n_pairs)
        node, child = shape.pair_parent[j], shape.pair_child[j]
        prop.node, prop.child = node, child
        mark = mark_subtree(T, node)
        _swap_rules(T, node, child)
        prop.rows_all, prop.new_leaf, prop.new_n, prop.new_s = _reroute_stats(
            T, node, mark, resid, Xl, n)
        _swap_rules(T, node, child)
        prop.mark = mark
        empty_after, prop.dlik = _subtree_delta(T, prop, node_n, node_s, shape, sigma2, smu2)
        prop.ok = empty_after == 0
    return prop


def _swap_rules(T, a, b):
    T.var[a], T.var[b] = T.var[b], T.var[a]
    T.cut[a], T.cut[b] = T.cut[b], T.cut[a]


def _free_slot(T, start):
    for c in range(start, T.cap):
        if T.status[c] == FREE:
            return c
    raise AssertionError("no free node slot")


def commit(T, prop, node_n, node_s, Xl):
    n = len(T.leaf_of)
    node = prop.node
    if prop.kind == GROW:
        lc = _free_slot(T, 1)
        rc = _free_slot(T, lc + 1)
        d = T.depth[node] + 1
        for c in (lc, rc):
            T.status[c] = LEAF
            T.parent[c] = node
            T.depth[c] = d
            T.var[c] = -1
            T.cut[c] = 0.0
            T.left[c] = T.right[c] = -1
            T.mu[c] = 0.0
        T.status[node] = INTERNAL
        T.var[node], T.cut[node] = prop.var, prop.cut
        T.left[node], T.right[node] = lc, rc
        T.n_nodes += 2
        v, ct = prop.var, prop.cut
        for i in range(n):
            if T.leaf_of[i] == node:
                T.leaf_of[i] = lc if Xl[i][v] <= ct else rc
        nl, sl, nr, sr = prop.stats
        node_n[lc], node_s[lc], node_n[rc], node_s[rc] = nl, sl, nr, sr
    elif prop.kind == PRUNE:
        lt, rt = T.left[node], T.right[node]
        for c in (lt, rt):
            T.status[c] = FREE
            T.parent[c] = -1
            T.depth[c] = 0
            T.var[c] = -1
            T.cut[c] = 0.0
            T.left[c] = T.right[c] = -1
            T.mu[c] = 0.0
        T.status[node] = LEAF
        T.var[node] = -1
        T.cut[node] = 0.0
        T.left[node] = T.right[node] = -1
        T.n_nodes -= 2
        for i in range(n):
            if T.leaf_of[i] == lt or T.leaf_of[i] == rt:
                T.leaf_of[i] = node
        node_n[node], node_s[node] = prop.stats
    else:
        if prop.kind == CHANGE:
            T.var[node], T.cut[node] = prop.var, prop.cut
        else:
            _swap_rules(T, node, prop.child)
        for i in prop.rows_all:
            T.leaf_of[i] = T.descend(Xl[i], node)
        for c in range(T.cap):
            if prop.mark[c] and T.status[c] == LEAF:
                node_n[c] = prop.new_n[c]
                node_s[c] = prop.new_s[c]


def draw_leaf_values(T, node_n, node_s, sigma2, smu2, rng):
    for c in range(T.cap):
        if T.status[c] == LEAF:
            prec = 1.0 / smu2 + node_n[c] / sigma2
            mean = (node_s[c] / sigma2) / prec
            T.mu[c] = mean + math.sqrt(1.0 / prec) * rng.standard_normal()


def tree_step(T, Xl, y, fitted, p, sigma2, smu2, alpha, beta, probs, rng, counters):
    node_n, node_s, resid, oldc = node_stats(T, y, fitted)
    shape = Shape(T, node_n)
    kind = draw_kind(probs, len(shape.internals), len(shape.pair_parent), rng)
    counters[kind] += 1
    prop = propose(T, kind, shape, node_n, node_s, resid, Xl, p, sigma2, smu2, alpha, beta,
                   probs, rng)
    if prop.ok:
        logr = prop.dlik + prop.dprior + prop.log_ratio
        u = rng.random()
        if logr >= 0.0 or u < math.exp(logr):
            commit(T, prop, node_n, node_s, Xl)
            counters[4 + kind] += 1
    draw_leaf_values(T, node_n, node_s, sigma2, smu2, rng)
    for i in range(len(y)):
        if T.w[i]:
            fitted[i] += T.mu[T.leaf_of[i]] - oldc[i]


def tree_sweep(forest, X, y, fitted, sigma2, smu2, alpha, beta, probs, rng, k_start, counters):
    """Backfitting pass: one MH move plus a leaf refresh for trees ``k_start..K-1``.

    Returns ``forest.K`` when done, or the first tree index lacking node capacity.
    """
    Xl = X.tolist()
    yl = y.tolist()
    fl = fitted.tolist()
    probs = [float(q) for q in probs]
    cnt = [0] * 8
    p = X.shape[1]
    k = k_start
    try:
        while k < forest.K:
            if forest.n_nodes[k] + 2 > forest.cap_nodes:
                return k
            T = TreeBuf(forest, k)
            tree_step(T, Xl, yl, fl, p, sigma2, smu2, alpha, beta, probs, rng, cnt)
            T.store(forest, k)
            k += 1
        return k
    finally:
        fitted[:] = fl
        counters[:8] += cnt


# -- weight-matrix rows -------------------------------------------------------

def w_sweep(forest, y, fitted, sigma2, smu2, prior_lo, lograte, logfact, k_trunc, rng,
            row_start, row_stop, collapsed=True):
    """Gibbs update of rows ``row_start..row_stop-1`` of W, including tree births.

    ``prior_lo[m]`` is the prior log-odds of switching an entry on when
    ``m`` other rows use the column. Columns are visited in a fresh uniformly
    random order at every row.

    The number of trees born at a row is drawn with the new root leaf values
    integrated out (``collapsed``), then the values are drawn jointly from
    their conditional. With ``collapsed=False`` the leaf values are drawn
    from the prior first, the count is drawn given them, and the kept values
    are refreshed one at a time from their single-row posterior.

    Columns whose count drops to zero are left dead (``m == 0``) for the caller
    to compact. Returns ``row_stop`` or the row at which tree capacity ran out.
    """
    rate = math.exp(lograte)
    plo = [float(v) for v in prior_lo]
    smu = math.sqrt(smu2)
    logfact = [float(v) for v in logfact]
    yl = y.tolist()
    fl = fitted.tolist()
    mu_new = [0.0] * k_trunc
    lw = [0.0] * (k_trunc + 1)
    i = row_start
    try:
        while i < row_stop:
            if forest.K + k_trunc > forest.cap_trees:
                return i
            K = forest.K
            W, m, mu, leaf_of = forest.W, forest.m, forest.mu, forest.leaf_of
            order = list(range(K))
            yi = yl[i]
            pred = fl[i]
            # random scan order: list order carries birth history, which is
            # correlated with the row's own entries
            for r in range(K - 1, 0, -1):
                j = _pick(rng.random(), r + 1)
                order[r], order[j] = order[j], order[r]
            for q in range(K):
                k = order[q]
                mk_all = int(m[k])
                if mk_all == 0:
                    continue
                wki = int(W[k, i])
                mk = mk_all - wki
                g = float(mu[k, leaf_of[k, i]])
                if mk == 0:
                    continue
                if wki:
                    p1 = pred
                    p0 = pred - g
                else:
                    p0 = pred
                    p1 = pred + g
                a = yi - p0
                b = yi - p1
                lo = plo[mk] + (a * a - b * b) / (2.0 * sigma2)
                if lo >= 0.0:
                    pr = 1.0 / (1.0 + math.exp(-lo))
                else:
                    e = math.exp(lo)
                    pr = e / (1.0 + e)
                new = 1 if rng.random() < pr else 0
                if new != wki:
                    W[k, i] = new
                    m[k] = mk + new
                    pred = p1 if new else p0
            # the row's singleton columns are replaced by the birth draw
            for k in range(K):
                if m[k] == 1 and W[k, i]:
                    W[k, i] = 0
                    m[k] = 0
                    pred -= float(mu[k, leaf_of[k, i]])
            # births
            base = yi - pred
            mx = -math.inf
            if collapsed:
                for kk in range(k_trunc + 1):
                    v = sigma2 + kk * smu2
                    lw[kk] = (kk * lograte - rate - logfact[kk] - 0.5 * math.log(v)
                              - base * base / (2.0 * v))
                    if lw[kk] > mx:
                        mx = lw[kk]
            else:
                for j in range(k_trunc):
                    mu_new[j] = smu * rng.standard_normal()
                S = 0.0
                for kk in range(k_trunc + 1):
                    if kk > 0:
                        S += mu_new[kk - 1]
                    r = base - S
                    lw[kk] = kk * lograte - rate - logfact[kk] - r * r / (2.0 * sigma2)
                    if lw[kk] > mx:
                        mx = lw[kk]
            total = 0.0
            for kk in range(k_trunc + 1):
                lw[kk] = math.exp(lw[kk] - mx)
                total += lw[kk]
            t = rng.random() * total
            acc = 0.0
            born = k_trunc
            for kk in range(k_trunc + 1):
                acc += lw[kk]
                if t < acc:
                    born = kk
                    break
            if born:
                if collapsed:
                    # exact joint draw of the new leaf values given their sum's residual
                    S = 0.0
                    for j in range(born):
                        mu_new[j] = smu * rng.standard_normal()
                        S += mu_new[j]
                    e = math.sqrt(sigma2) * rng.standard_normal()
                    shift = smu2 * (base - S - e) / (sigma2 + born * smu2)
                    pall = pred
                    for j in range(born):
                        mu_new[j] = mu_new[j] + shift
                        pall += mu_new[j]
                else:
                    pall = pred + sum_first(mu_new, born)
                    prec = 1.0 / smu2 + 1.0 / sigma2
                    sd = math.sqrt(1.0 / prec)
                    for j in range(born):
                        r = yi - (pall - mu_new[j])
                        value = (r / sigma2) / prec + sd * rng.standard_normal()
                        pall += value - mu_new[j]
                        mu_new[j] = value
                for j in range(born):
                    t_idx = forest.K
                    forest._reset(t_idx)
                    forest.mu[t_idx, 0] = mu_new[j]
                    forest.W[t_idx, i] = 1
                    forest.m[t_idx] = 1
                    forest.K += 1
                pred = pall
            fl[i] = pred
            i += 1
        return i
    finally:
        fitted[:] = fl


def sum_first(values, count):
    s = 0.0
    for j in range(count):
        s += values[j]
    return s


def predict_draw(G, prob, prior_lo, rate, smu, sigma2, alternations, rng):
    """One predictive draw of the ensemble output at every new row (columns of ``G``).

    Existing columns switch on with probability ``prob``; a Poisson(``rate``)
    number of fresh root-only trees adds prior leaf values. The existing
    entries are then refreshed ``alternations`` times against a noisy
    response drawn from the current prediction.
    """
    K, N = G.shape
    Gl = G.tolist()
    prob = [float(v) for v in prob]
    plo = [float(v) for v in prior_lo]
    sd = math.sqrt(sigma2)
    out = np.empty(N)
    w = [0] * K
    for j in range(N):
        pred = 0.0
        for k in range(K):
            w[k] = 1 if rng.random() < prob[k] else 0
            if w[k]:
                pred += Gl[k][j]
        fresh = int(rng.poisson(rate)) if rate > 0.0 else 0
        if fresh > 0:
            pred += smu * math.sqrt(fresh) * rng.standard_normal()
        for _ in range(alternations):
            yt = pred + sd * rng.standard_normal()
            for k in range(K):
                g = Gl[k][j]
                if w[k]:
                    p1 = pred
                    p0 = pred - g
                else:
                    p0 = pred
                    p1 = pred + g
                lo = plo[k] + ((yt - p0) * (yt - p0) - (yt - p1) * (yt - p1)) / (2.0 * sigma2)
                if lo >= 0.0:
                    pr = 1.0 / (1.0 + math.exp(-lo))
                else:
                    e = math.exp(lo)
                    pr = e / (1.0 + e)
                w[k] = 1 if rng.random() < pr else 0
                pred = p1 if w[k] else p0
        out[j] = pred
    return out
