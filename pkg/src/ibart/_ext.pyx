# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled sampler kernels; operation-for-operation port of ``_fallback``."""

from libc.math cimport exp, log, pow, sqrt, INFINITY
from libc.stdlib cimport free, malloc
from libc.string cimport memset
from cpython.pycapsule cimport PyCapsule_GetPointer
from numpy.random cimport bitgen_t
from numpy.random.c_distributions cimport random_poisson, random_standard_normal

import numpy as np

NAME = "cython"

DEF FREE = 0
DEF LEAF = 1
DEF INTERNAL = 2
DEF GROW = 0
DEF PRUNE = 1
DEF CHANGE = 2
DEF SWAP = 3


cdef inline bitgen_t* _bitgen(object rng) except NULL:
    return <bitgen_t*> PyCapsule_GetPointer(rng.bit_generator.capsule, "BitGenerator")


cdef inline double _unif(bitgen_t* rng) noexcept nogil:
    return rng.next_double(rng.state)


cdef inline int _pick(double u, int count) noexcept nogil:
    cdef int j = <int>(u * count)
    return j if j < count else count - 1


cdef struct Tree:
    int* var
    double* cut
    int* left
    int* right
    int* parent
    int* depth
    signed char* status
    double* mu
    int* leaf_of
    unsigned char* w
    int cap
    int n


cdef struct Scratch:
    int* node_n
    double* node_s
    double* resid
    double* oldc
    int* rows
    int* rows_all
    int* new_leaf
    int* new_n
    double* new_s
    char* mark
    int* leaves
    int* internals
    int* nogs
    int* pair_parent
    int* pair_child
    int* stack
    int* varbuf
    double* his


cdef inline int _descend(Tree* T, const double* x, int c) noexcept nogil:
    while T.status[c] == INTERNAL:
        if x[T.var[c]] <= T.cut[c]:
            c = T.left[c]
        else:
            c = T.right[c]
    return c


cdef inline double _log_marginal(int n, double s, double sigma2, double smu2) noexcept nogil:
    cdef double v = sigma2 + n * smu2
    return 0.5 * log(sigma2 / v) + smu2 * s * s / (2.0 * sigma2 * v)


cdef inline double _split_prob(double alpha, double beta, int d) noexcept nogil:
    return alpha * pow(1.0 + d, -beta)


cdef inline double _grow_prior(double alpha, double beta, int d) noexcept nogil:
    cdef double ps0 = _split_prob(alpha, beta, d)
    cdef double ps1 = _split_prob(alpha, beta, d + 1)
    return log(ps0) + 2.0 * log(1.0 - ps1) - log(1.0 - ps0)


cdef inline double _kind_total(const double* probs, int n_int, int n_pairs) noexcept nogil:
    cdef double t = probs[0]
    if n_int > 0:
        t += probs[1]
        t += probs[2]
    if n_pairs > 0:
        t += probs[3]
    return t


# -- evaluation ---------------------------------------------------------------

def route_tree(int[::1] var, double[::1] cut, int[::1] left, int[::1] right,
               signed char[::1] status, double[:, ::1] X):
    cdef Py_ssize_t i, N = X.shape[0]
    cdef int c
    out = np.zeros(N, dtype=np.int32)
    cdef int[::1] o = out
    for i in range(N):
        c = 0
        while status[c] == INTERNAL:
            if X[i, var[c]] <= cut[c]:
                c = left[c]
            else:
                c = right[c]
        o[i] = c
    return out


def forest_contrib(int[:, ::1] var, double[:, ::1] cut, int[:, ::1] left, int[:, ::1] right,
                   signed char[:, ::1] status, double[:, ::1] mu, double[:, ::1] X):
    cdef Py_ssize_t k, i, K = status.shape[0], N = X.shape[0]
    cdef int c
    out = np.zeros((K, N))
    cdef double[:, ::1] o = out
    for k in range(K):
        for i in range(N):
            c = 0
            while status[k, c] == INTERNAL:
                if X[i, var[k, c]] <= cut[k, c]:
                    c = left[k, c]
                else:
                    c = right[k, c]
            o[k, i] = mu[k, c]
    return out


def forest_pdp(int[:, ::1] var, double[:, ::1] cut, int[:, ::1] left, int[:, ::1] right,
               signed char[:, ::1] status, double[:, ::1] mu, object W, double[:, ::1] X,
               int s, object grid):
    cdef Py_ssize_t g, i, k, K = status.shape[0], N = X.shape[0]
    cdef double[::1] gv = np.ascontiguousarray(grid, dtype=np.float64)
    cdef unsigned char[:, ::1] Wm
    cdef bint weighted = W is not None
    if weighted:
        Wm = W
    cdef int c, v
    cdef double value, total, row, x
    out = np.zeros(gv.shape[0])
    cdef double[::1] o = out
    for g in range(gv.shape[0]):
        value = gv[g]
        total = 0.0
        for i in range(N):
            row = 0.0
            for k in range(K):
                if weighted and not Wm[k, i]:
                    continue
                c = 0
                while status[k, c] == INTERNAL:
                    v = var[k, c]
                    x = value if v == s else X[i, v]
                    if x <= cut[k, c]:
                        c = left[k, c]
                    else:
                        c = right[k, c]
                row += mu[k, c]
            total += row
        o[g] = total / N
    return out


# -- tree moves ---------------------------------------------------------------

cdef inline void _col_range(const double* X, int p, int* rows, int m, int v,
                            double* lo, double* hi) noexcept nogil:
    cdef double x
    cdef int j
    lo[0] = X[rows[0] * p + v]
    hi[0] = lo[0]
    for j in range(m):
        x = X[rows[j] * p + v]
        if x < lo[0]:
            lo[0] = x
        if x > hi[0]:
            hi[0] = x


cdef bint _choose_rule(const double* X, int p, int* rows, int m, bitgen_t* rng,
                       Scratch* S, int* v_out, double* cut_out) noexcept nogil:
    cdef int v = -1, it, cand, j, nvalid, count, r
    cdef double hi = 0.0, lo, h
    if m < 2:
        return False
    for it in range(p):
        cand = _pick(_unif(rng), p)
        _col_range(X, p, rows, m, cand, &lo, &h)
        if lo < h:
            v = cand
            hi = h
            break
    if v < 0:
        nvalid = 0
        for j in range(p):
            _col_range(X, p, rows, m, j, &lo, &h)
            if lo < h:
                S.varbuf[nvalid] = j
                S.his[nvalid] = h
                nvalid += 1
        if nvalid == 0:
            return False
        j = _pick(_unif(rng), nvalid)
        v = S.varbuf[j]
        hi = S.his[j]
    count = 0
    for j in range(m):
        if X[rows[j] * p + v] < hi:
            count += 1
    j = _pick(_unif(rng), count)
    for r in range(m):
        if X[rows[r] * p + v] < hi:
            if j == 0:
                v_out[0] = v
                cut_out[0] = X[rows[r] * p + v]
                return True
            j -= 1
    return False


cdef int _mark_subtree(Tree* T, int node, Scratch* S) noexcept nogil:
    cdef int top = 0, c
    memset(S.mark, 0, T.cap)
    S.stack[0] = node
    top = 1
    while top > 0:
        top -= 1
        c = S.stack[top]
        S.mark[c] = 1
        if T.status[c] == INTERNAL:
            S.stack[top] = T.left[c]
            S.stack[top + 1] = T.right[c]
            top += 2
    return 0


cdef int _reroute_stats(Tree* T, int node, Scratch* S, const double* X, int p) noexcept nogil:
    """Returns the count of rows (active or not) under ``node``."""
    cdef int i, c, n_all = 0
    for c in range(T.cap):
        S.new_n[c] = 0
        S.new_s[c] = 0.0
    for i in range(T.n):
        if S.mark[T.leaf_of[i]]:
            S.rows_all[n_all] = i
            n_all += 1
            if T.w[i]:
                c = _descend(T, &X[i * p], node)
                S.new_leaf[i] = c
                S.new_n[c] += 1
                S.new_s[c] += S.resid[i]
    return n_all


cdef double _subtree_delta(Tree* T, Scratch* S, int empty, double sigma2, double smu2,
                           int* empty_after) noexcept nogil:
    cdef int c
    cdef double acc = 0.0
    empty_after[0] = empty
    for c in range(T.cap):
        if S.mark[c] and T.status[c] == LEAF:
            if S.node_n[c] == 0:
                empty_after[0] -= 1
            if S.new_n[c] == 0:
                empty_after[0] += 1
            acc += (_log_marginal(S.new_n[c], S.new_s[c], sigma2, smu2)
                    - _log_marginal(S.node_n[c], S.node_s[c], sigma2, smu2))
    return acc


cdef inline void _swap_rules(Tree* T, int a, int b) noexcept nogil:
    cdef int tv = T.var[a]
    cdef double tc = T.cut[a]
    T.var[a] = T.var[b]
    T.cut[a] = T.cut[b]
    T.var[b] = tv
    T.cut[b] = tc


cdef inline void _clear_slot(Tree* T, int c) noexcept nogil:
    T.var[c] = -1
    T.cut[c] = 0.0
    T.left[c] = -1
    T.right[c] = -1
    T.mu[c] = 0.0


cdef int _tree_step(Tree* T, Scratch* S, const double* X, int p, const double* y,
                    double* fitted, double sigma2, double smu2, double alpha, double beta,
                    const double* probs, bitgen_t* rng, long long* cnt, int* n_nodes) noexcept nogil:
    cdef int i, c, n = T.n, cap = T.cap
    cdef int n_leaves = 0, n_int = 0, n_nog = 0, n_pairs = 0, empty = 0
    cdef int kind, node = -1, child = -1, leaf, lt, rt, par, sib, nog_after, pairs_after
    cdef int m, nl = 0, nr = 0, nm = 0, v = -1, j, lc, rc, d, empty_after, n_all = 0
    cdef double mc, r, total, total_after, t, acc, sl = 0.0, sr = 0.0, sm = 0.0, ct = 0.0
    cdef double dlik = 0.0, dprior = 0.0, log_fwd = 0.0, log_rev = 0.0, logr, u
    cdef double prec, mean
    cdef bint ok = False, li, ri

    # residuals and per-slot stats over active rows
    for c in range(cap):
        S.node_n[c] = 0
        S.node_s[c] = 0.0
    for i in range(n):
        if T.w[i]:
            c = T.leaf_of[i]
            mc = T.mu[c]
            r = y[i] - fitted[i] + mc
            S.resid[i] = r
            S.oldc[i] = mc
            S.node_n[c] += 1
            S.node_s[c] += r

    for c in range(cap):
        if T.status[c] == LEAF:
            S.leaves[n_leaves] = c
            n_leaves += 1
            if S.node_n[c] == 0:
                empty += 1
        elif T.status[c] == INTERNAL:
            S.internals[n_int] = c
            n_int += 1
            lt = T.left[c]
            rt = T.right[c]
            li = T.status[lt] == INTERNAL
            ri = T.status[rt] == INTERNAL
            if not li and not ri:
                S.nogs[n_nog] = c
                n_nog += 1
            if li:
                S.pair_parent[n_pairs] = c
                S.pair_child[n_pairs] = lt
                n_pairs += 1
            if ri:
                S.pair_parent[n_pairs] = c
                S.pair_child[n_pairs] = rt
                n_pairs += 1

    total = _kind_total(probs, n_int, n_pairs)
    t = _unif(rng) * total
    acc = probs[0]
    if t < acc or n_int == 0:
        kind = GROW
    else:
        acc += probs[1]
        if t < acc:
            kind = PRUNE
        else:
            acc += probs[2]
            if t < acc or n_pairs == 0:
                kind = CHANGE
            else:
                kind = SWAP
    cnt[kind] += 1

    if kind == GROW:
        leaf = S.leaves[_pick(_unif(rng), n_leaves)]
        node = leaf
        if S.node_n[leaf] >= 2 and empty == 0:
            m = 0
            for i in range(n):
                if T.w[i] and T.leaf_of[i] == leaf:
                    S.rows[m] = i
                    m += 1
            if _choose_rule(X, p, S.rows, m, rng, S, &v, &ct):
                nl = 0
                nr = 0
                sl = 0.0
                sr = 0.0
                for i in range(m):
                    c = S.rows[i]
                    if X[c * p + v] <= ct:
                        nl += 1
                        sl += S.resid[c]
                    else:
                        nr += 1
                        sr += S.resid[c]
                dlik = (_log_marginal(nl, sl, sigma2, smu2) + _log_marginal(nr, sr, sigma2, smu2)
                        - _log_marginal(S.node_n[leaf], S.node_s[leaf], sigma2, smu2))
                dprior = _grow_prior(alpha, beta, T.depth[leaf])
                nog_after = n_nog + 1
                pairs_after = n_pairs
                if leaf != 0:
                    par = T.parent[leaf]
                    sib = T.left[par] if T.right[par] == leaf else T.right[par]
                    if T.status[sib] == LEAF:
                        nog_after -= 1
                    pairs_after += 1
                total_after = _kind_total(probs, n_int + 1, pairs_after)
                log_fwd = log(probs[0] / total) - log(<double>n_leaves)
                log_rev = log(probs[1] / total_after) - log(<double>nog_after)
                ok = True
    elif kind == PRUNE:
        node = S.nogs[_pick(_unif(rng), n_nog)]
        lt = T.left[node]
        rt = T.right[node]
        nm = S.node_n[lt] + S.node_n[rt]
        sm = S.node_s[lt] + S.node_s[rt]
        empty_after = empty
        if S.node_n[lt] == 0:
            empty_after -= 1
        if S.node_n[rt] == 0:
            empty_after -= 1
        if nm == 0:
            empty_after += 1
        if empty_after <= 0:
            dlik = (_log_marginal(nm, sm, sigma2, smu2)
                    - _log_marginal(S.node_n[lt], S.node_s[lt], sigma2, smu2)
                    - _log_marginal(S.node_n[rt], S.node_s[rt], sigma2, smu2))
            dprior = -_grow_prior(alpha, beta, T.depth[node])
            pairs_after = n_pairs - 1 if node != 0 else n_pairs
            total_after = _kind_total(probs, n_int - 1, pairs_after)
            log_fwd = log(probs[1] / total) - log(<double>n_nog)
            log_rev = log(probs[0] / total_after) - log(<double>(n_leaves - 1))
            ok = True
    elif kind == CHANGE:
        node = S.internals[_pick(_unif(rng), n_int)]
        _mark_subtree(T, node, S)
        m = 0
        for i in range(n):
            if T.w[i] and S.mark[T.leaf_of[i]]:
                S.rows[m] = i
                m += 1
        if _choose_rule(X, p, S.rows, m, rng, S, &v, &ct):
            lc = T.var[node]
            mc = T.cut[node]
            T.var[node] = v
            T.cut[node] = ct
            n_all = _reroute_stats(T, node, S, X, p)
            T.var[node] = lc
            T.cut[node] = mc
            dlik = _subtree_delta(T, S, empty, sigma2, smu2, &empty_after)
            ok = empty_after == 0
    else:
        i = _pick(_unif(rng), n_pairs)
        node = S.pair_parent[i]
        child = S.pair_child[i]
        _mark_subtree(T, node, S)
        _swap_rules(T, node, child)
        n_all = _reroute_stats(T, node, S, X, p)
        _swap_rules(T, node, child)
        dlik = _subtree_delta(T, S, empty, sigma2, smu2, &empty_after)
        ok = empty_after == 0

    if ok:
        logr = dlik + dprior + (log_rev - log_fwd)
        u = _unif(rng)
        if logr >= 0.0 or u < exp(logr):
            cnt[4 + kind] += 1
            if kind == GROW:
                lc = -1
                rc = -1
                for c in range(1, cap):
                    if T.status[c] == FREE:
                        if lc < 0:
                            lc = c
                        else:
                            rc = c
                            break
                d = T.depth[node] + 1
                for j in range(2):
                    c = lc if j == 0 else rc
                    T.status[c] = LEAF
                    T.parent[c] = node
                    T.depth[c] = d
                    _clear_slot(T, c)
                T.status[node] = INTERNAL
                T.var[node] = v
                T.cut[node] = ct
                T.left[node] = lc
                T.right[node] = rc
                n_nodes[0] += 2
                for i in range(n):
                    if T.leaf_of[i] == node:
                        T.leaf_of[i] = lc if X[i * p + v] <= ct else rc
                S.node_n[lc] = nl
                S.node_s[lc] = sl
                S.node_n[rc] = nr
                S.node_s[rc] = sr
            elif kind == PRUNE:
                lt = T.left[node]
                rt = T.right[node]
                for j in range(2):
                    c = lt if j == 0 else rt
                    T.status[c] = FREE
                    T.parent[c] = -1
                    T.depth[c] = 0
                    _clear_slot(T, c)
                T.status[node] = LEAF
                T.var[node] = -1
                T.cut[node] = 0.0
                T.left[node] = -1
                T.right[node] = -1
                n_nodes[0] -= 2
                for i in range(n):
                    if T.leaf_of[i] == lt or T.leaf_of[i] == rt:
                        T.leaf_of[i] = node
                S.node_n[node] = nm
                S.node_s[node] = sm
            else:
                if kind == CHANGE:
                    T.var[node] = v
                    T.cut[node] = ct
                else:
                    _swap_rules(T, node, child)
                for c in range(n_all):
                    i = S.rows_all[c]
                    T.leaf_of[i] = _descend(T, &X[i * p], node)
                for c in range(cap):
                    if S.mark[c] and T.status[c] == LEAF:
                        S.node_n[c] = S.new_n[c]
                        S.node_s[c] = S.new_s[c]

    for c in range(cap):
        if T.status[c] == LEAF:
            prec = 1.0 / smu2 + S.node_n[c] / sigma2
            mean = (S.node_s[c] / sigma2) / prec
            T.mu[c] = mean + sqrt(1.0 / prec) * random_standard_normal(rng)
    for i in range(n):
        if T.w[i]:
            fitted[i] += T.mu[T.leaf_of[i]] - S.oldc[i]
    return kind


cdef void* _xalloc(size_t size) except NULL:
    cdef void* ptr = malloc(size if size > 0 else 1)
    if ptr == NULL:
        raise MemoryError()
    return ptr


def tree_sweep(object forest, double[:, ::1] X, double[::1] y, double[::1] fitted,
               double sigma2, double smu2, double alpha, double beta, object probs,
               object rng, int k_start, long long[::1] counters):
    """Backfitting pass over trees ``k_start..K-1``; see ``_fallback.tree_sweep``."""
    cdef int[:, ::1] var = forest.var
    cdef double[:, ::1] cut = forest.cut
    cdef int[:, ::1] left = forest.left
    cdef int[:, ::1] right = forest.right
    cdef int[:, ::1] parent = forest.parent
    cdef int[:, ::1] depth = forest.depth
    cdef signed char[:, ::1] status = forest.status
    cdef double[:, ::1] mu = forest.mu
    cdef int[::1] n_nodes = forest.n_nodes
    cdef int[:, ::1] leaf_of = forest.leaf_of
    cdef unsigned char[:, ::1] W = forest.W
    cdef int K = forest.K, cap = forest.cap_nodes, n = forest.n_rows, p = X.shape[1]
    cdef double pr[4]
    cdef int k, j
    cdef Tree T
    cdef Scratch S
    cdef bitgen_t* bg = _bitgen(rng)
    for j in range(4):
        pr[j] = float(probs[j])
    S.node_n = <int*>_xalloc(cap * sizeof(int))
    S.node_s = <double*>_xalloc(cap * sizeof(double))
    S.resid = <double*>_xalloc(n * sizeof(double))
    S.oldc = <double*>_xalloc(n * sizeof(double))
    S.rows = <int*>_xalloc(n * sizeof(int))
    S.rows_all = <int*>_xalloc(n * sizeof(int))
    S.new_leaf = <int*>_xalloc(n * sizeof(int))
    S.new_n = <int*>_xalloc(cap * sizeof(int))
    S.new_s = <double*>_xalloc(cap * sizeof(double))
    S.mark = <char*>_xalloc(cap * sizeof(char))
    S.leaves = <int*>_xalloc(cap * sizeof(int))
    S.internals = <int*>_xalloc(cap * sizeof(int))
    S.nogs = <int*>_xalloc(cap * sizeof(int))
    S.pair_parent = <int*>_xalloc(cap * sizeof(int))
    S.pair_child = <int*>_xalloc(cap * sizeof(int))
    S.stack = <int*>_xalloc((cap + 2) * sizeof(int))
    S.varbuf = <int*>_xalloc(p * sizeof(int))
    S.his = <double*>_xalloc(p * sizeof(double))
    k = k_start
    try:
        with nogil:
            while k < K:
                if n_nodes[k] + 2 > cap:
                    break
                T.var = &var[k, 0]
                T.cut = &cut[k, 0]
                T.left = &left[k, 0]
                T.right = &right[k, 0]
                T.parent = &parent[k, 0]
                T.depth = &depth[k, 0]
                T.status = &status[k, 0]
                T.mu = &mu[k, 0]
                T.leaf_of = &leaf_of[k, 0]
                T.w = &W[k, 0]
                T.cap = cap
                T.n = n
                _tree_step(&T, &S, &X[0, 0], p, &y[0], &fitted[0], sigma2, smu2, alpha,
                           beta, pr, bg, &counters[0], &n_nodes[k])
                k += 1
    finally:
        free(S.node_n); free(S.node_s); free(S.resid); free(S.oldc); free(S.rows)
        free(S.rows_all); free(S.new_leaf); free(S.new_n); free(S.new_s); free(S.mark)
        free(S.leaves); free(S.internals); free(S.nogs); free(S.pair_parent)
        free(S.pair_child); free(S.stack); free(S.varbuf); free(S.his)
    return k


# -- weight-matrix rows ---------------------------------------------------------

def w_sweep(object forest, double[::1] y, double[::1] fitted, double sigma2, double smu2,
            object prior_lo, double lograte, object logfact, int k_trunc,
            object rng, int row_start, int row_stop, bint collapsed=True):
    """Gibbs update of W rows with births; see ``_fallback.w_sweep``."""
    cdef signed char[:, ::1] status = forest.status
    cdef double[:, ::1] mu = forest.mu
    cdef int[:, ::1] leaf_of = forest.leaf_of
    cdef unsigned char[:, ::1] W = forest.W
    cdef long long[::1] m = forest.m
    cdef int[:, ::1] var = forest.var
    cdef double[:, ::1] cut = forest.cut
    cdef int[:, ::1] left = forest.left
    cdef int[:, ::1] right = forest.right
    cdef int[:, ::1] parent = forest.parent
    cdef int[:, ::1] depth = forest.depth
    cdef int[::1] n_nodes = forest.n_nodes
    cdef double[::1] lf = np.ascontiguousarray(logfact, dtype=np.float64)
    cdef double[::1] plo = np.ascontiguousarray(prior_lo, dtype=np.float64)
    cdef int n = forest.n_rows, cap_trees = forest.cap_trees, cap_nodes = forest.cap_nodes
    cdef int K = forest.K
    cdef double rate = exp(lograte), smu = sqrt(smu2)
    cdef bitgen_t* bg = _bitgen(rng)
    cdef double* mu_new = <double*>_xalloc((k_trunc + 1) * sizeof(double))
    cdef double* lw = <double*>_xalloc((k_trunc + 1) * sizeof(double))
    cdef int* order = <int*>_xalloc((cap_trees + 1) * sizeof(int))
    cdef int i = row_start, k, kk, j, wki, new, born, c, ti
    cdef long long mk, mk_all
    cdef double yi, pred, g, p0, p1, a, b, lo, pr, e, base, S, mx, rr, total, t, acc
    cdef double pall, prec, sd, value, v
    try:
        with nogil:
            while i < row_stop:
                if K + k_trunc > cap_trees:
                    break
                yi = y[i]
                pred = fitted[i]
                for k in range(K):
                    order[k] = k
                for c in range(K - 1, 0, -1):
                    j = _pick(_unif(bg), c + 1)
                    ti = order[c]
                    order[c] = order[j]
                    order[j] = ti
                for kk in range(K):
                    k = order[kk]
                    mk_all = m[k]
                    if mk_all == 0:
                        continue
                    wki = W[k, i]
                    mk = mk_all - wki
                    g = mu[k, leaf_of[k, i]]
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
                        pr = 1.0 / (1.0 + exp(-lo))
                    else:
                        e = exp(lo)
                        pr = e / (1.0 + e)
                    new = 1 if _unif(bg) < pr else 0
                    if new != wki:
                        W[k, i] = new
                        m[k] = mk + new
                        pred = p1 if new else p0
                # the row's singleton columns are replaced by the birth draw
                for k in range(K):
                    if m[k] == 1 and W[k, i]:
                        W[k, i] = 0
                        m[k] = 0
                        pred -= mu[k, leaf_of[k, i]]
                base = yi - pred
                mx = -INFINITY
                if collapsed:
                    for kk in range(k_trunc + 1):
                        v = sigma2 + kk * smu2
                        lw[kk] = (kk * lograte - rate - lf[kk] - 0.5 * log(v)
                                  - base * base / (2.0 * v))
                        if lw[kk] > mx:
                            mx = lw[kk]
                else:
                    for j in range(k_trunc):
                        mu_new[j] = smu * random_standard_normal(bg)
                    S = 0.0
                    for kk in range(k_trunc + 1):
                        if kk > 0:
                            S += mu_new[kk - 1]
                        rr = base - S
                        lw[kk] = kk * lograte - rate - lf[kk] - rr * rr / (2.0 * sigma2)
                        if lw[kk] > mx:
                            mx = lw[kk]
                total = 0.0
                for kk in range(k_trunc + 1):
                    lw[kk] = exp(lw[kk] - mx)
                    total += lw[kk]
                t = _unif(bg) * total
                acc = 0.0
                born = k_trunc
                for kk in range(k_trunc + 1):
                    acc += lw[kk]
                    if t < acc:
                        born = kk
                        break
                if born:
                    if collapsed:
                        S = 0.0
                        for j in range(born):
                            mu_new[j] = smu * random_standard_normal(bg)
                            S += mu_new[j]
                        e = sqrt(sigma2) * random_standard_normal(bg)
                        value = smu2 * (base - S - e) / (sigma2 + born * smu2)
                        pall = pred
                        for j in range(born):
                            mu_new[j] = mu_new[j] + value
                            pall += mu_new[j]
                    else:
                        S = 0.0
                        for j in range(born):
                            S += mu_new[j]
                        pall = pred + S
                        prec = 1.0 / smu2 + 1.0 / sigma2
                        sd = sqrt(1.0 / prec)
                        for j in range(born):
                            rr = yi - (pall - mu_new[j])
                            value = (rr / sigma2) / prec + sd * random_standard_normal(bg)
                            pall += value - mu_new[j]
                            mu_new[j] = value
                    for j in range(born):
                        ti = K
                        for c in range(cap_nodes):
                            var[ti, c] = -1
                            cut[ti, c] = 0.0
                            left[ti, c] = -1
                            right[ti, c] = -1
                            parent[ti, c] = -1
                            depth[ti, c] = 0
                            mu[ti, c] = 0.0
                            status[ti, c] = FREE
                        status[ti, 0] = LEAF
                        n_nodes[ti] = 1
                        for c in range(n):
                            leaf_of[ti, c] = 0
                            W[ti, c] = 0
                        mu[ti, 0] = mu_new[j]
                        W[ti, i] = 1
                        m[ti] = 1
                        K += 1
                    pred = pall
                fitted[i] = pred
                i += 1
    finally:
        forest.K = K
        free(mu_new)
        free(lw)
        free(order)
    return i


# -- prediction -----------------------------------------------------------------

def predict_draw(double[:, ::1] G, double[::1] prob, double[::1] prior_lo, double rate,
                 double smu, double sigma2, int alternations, object rng):
    """One predictive draw at every new row; see ``_fallback.predict_draw``."""
    cdef int K = G.shape[0], N = G.shape[1], j, k, a
    cdef bitgen_t* bg = _bitgen(rng)
    out = np.empty(N)
    cdef double[::1] o = out
    cdef unsigned char* w = <unsigned char*>_xalloc((K + 1) * sizeof(unsigned char))
    cdef double pred, g, p0, p1, yt, lo, pr, e, sd = sqrt(sigma2)
    cdef long long fresh
    try:
        with nogil:
            for j in range(N):
                pred = 0.0
                for k in range(K):
                    w[k] = 1 if _unif(bg) < prob[k] else 0
                    if w[k]:
                        pred += G[k, j]
                fresh = random_poisson(bg, rate) if rate > 0.0 else 0
                if fresh > 0:
                    pred += smu * sqrt(<double>fresh) * random_standard_normal(bg)
                for a in range(alternations):
                    yt = pred + sd * random_standard_normal(bg)
                    for k in range(K):
                        g = G[k, j]
                        if w[k]:
                            p1 = pred
                            p0 = pred - g
                        else:
                            p0 = pred
                            p1 = pred + g
                        lo = prior_lo[k] + ((yt - p0) * (yt - p0) - (yt - p1) * (yt - p1)) / (2.0 * sigma2)
                        if lo >= 0.0:
                            pr = 1.0 / (1.0 + exp(-lo))
                        else:
                            e = exp(lo)
                            pr = e / (1.0 + e)
                        w[k] = 1 if _unif(bg) < pr else 0
                        pred = p1 if w[k] else p0
                o[j] = pred
    finally:
        free(w)
    return out
