"""Compiled tree growers shared by the tree-based classifiers.

Trees are stored as flat arrays: ``feature`` (-1 for a leaf), ``threshold``,
``left``, ``right`` and a ``value`` matrix with one row per node. Samples go
left when ``x[feature] <= threshold``.
"""

import numpy as np
from numba import njit

GINI = 0
ENTROPY = 1


@njit(cache=True, nogil=True)
def _impurity(counts, total, criterion):
    if total <= 0.0:
        return 0.0
    acc = 0.0
    if criterion == GINI:
        for c in counts:
            p = c / total
            acc += p * p
        return 1.0 - acc
    for c in counts:
        if c > 0.0:
            p = c / total
            acc -= p * np.log2(p)
    return acc


@njit(cache=True, nogil=True)
def grow_classifier(X, y, w, n_classes, max_depth, min_samples_split, max_features, criterion, seed):
    """Greedy CART on weighted samples.

    ``max_depth < 0`` means unlimited. When ``max_features`` is below the
    number of columns, a fresh random subset is drawn at every node.
    """
    np.random.seed(seed)
    n, p = X.shape
    cap = 2 * n + 1
    feature = np.full(cap, -1, np.int64)
    threshold = np.zeros(cap)
    left = np.full(cap, -1, np.int64)
    right = np.full(cap, -1, np.int64)
    value = np.zeros((cap, n_classes))

    idx = np.arange(n)
    st_node = np.empty(cap, np.int64)
    st_lo = np.empty(cap, np.int64)
    st_hi = np.empty(cap, np.int64)
    st_d = np.empty(cap, np.int64)
    sp = 0
    st_node[0] = 0
    st_lo[0] = 0
    st_hi[0] = n
    st_d[0] = 0
    sp = 1
    n_nodes = 1
    feats = np.arange(p)
    lc = np.zeros(n_classes)
    rc = np.zeros(n_classes)

    while sp > 0:
        sp -= 1
        node = st_node[sp]
        lo = st_lo[sp]
        hi = st_hi[sp]
        depth = st_d[sp]
        counts = np.zeros(n_classes)
        for k in range(lo, hi):
            counts[y[idx[k]]] += w[idx[k]]
        tot = counts.sum()
        for c in range(n_classes):
            value[node, c] = counts[c] / tot if tot > 0 else 1.0 / n_classes
        imp = _impurity(counts, tot, criterion)
        m = hi - lo
        if (max_depth >= 0 and depth >= max_depth) or m < min_samples_split or imp <= 1e-15:
            continue

        if max_features < p:
            for k in range(max_features):
                r = k + np.random.randint(p - k)
                t = feats[k]
                feats[k] = feats[r]
                feats[r] = t
            n_try = max_features
        else:
            for k in range(p):
                feats[k] = k
            n_try = p

        best_gain = 1e-12 * tot
        best_f = -1
        best_t = 0.0
        for fi in range(n_try):
            f = feats[fi]
            sub = idx[lo:hi]
            vals = np.empty(m)
            for k in range(m):
                vals[k] = X[sub[k], f]
            order = np.argsort(vals, kind="mergesort")
            lc[:] = 0.0
            rc[:] = counts
            wl = 0.0
            for k in range(m - 1):
                s = sub[order[k]]
                lc[y[s]] += w[s]
                rc[y[s]] -= w[s]
                wl += w[s]
                v0 = vals[order[k]]
                v1 = vals[order[k + 1]]
                if v1 <= v0:
                    continue
                wr = tot - wl
                gain = tot * imp - wl * _impurity(lc, wl, criterion) - wr * _impurity(rc, wr, criterion)
                if gain > best_gain:
                    best_gain = gain
                    best_f = f
                    t = 0.5 * (v0 + v1)
                    best_t = v0 if t >= v1 else t
        if best_f < 0:
            continue

        # partition idx[lo:hi] in place, stable
        tmp = idx[lo:hi].copy()
        a = lo
        for k in range(m):
            if X[tmp[k], best_f] <= best_t:
                idx[a] = tmp[k]
                a += 1
        mid = a
        for k in range(m):
            if X[tmp[k], best_f] > best_t:
                idx[a] = tmp[k]
                a += 1
        feature[node] = best_f
        threshold[node] = best_t
        left[node] = n_nodes
        right[node] = n_nodes + 1
        # push right first so the left subtree is numbered first
        st_node[sp] = n_nodes + 1
        st_lo[sp] = mid
        st_hi[sp] = hi
        st_d[sp] = depth + 1
        sp += 1
        st_node[sp] = n_nodes
        st_lo[sp] = lo
        st_hi[sp] = mid
        st_d[sp] = depth + 1
        sp += 1
        n_nodes += 2

    return feature[:n_nodes], threshold[:n_nodes], left[:n_nodes], right[:n_nodes], value[:n_nodes]


@njit(cache=True, nogil=True)
def grow_newton(X, g, h, max_depth, reg_lambda, min_child_weight, eta):
    """Second-order boosting tree: leaf weight -G / (H + lambda), scaled by eta."""
    n, p = X.shape
    cap = 2 * n + 1
    feature = np.full(cap, -1, np.int64)
    threshold = np.zeros(cap)
    left = np.full(cap, -1, np.int64)
    right = np.full(cap, -1, np.int64)
    value = np.zeros((cap, 1))

    idx = np.arange(n)
    st_node = np.empty(cap, np.int64)
    st_lo = np.empty(cap, np.int64)
    st_hi = np.empty(cap, np.int64)
    st_d = np.empty(cap, np.int64)
    st_node[0] = 0
    st_lo[0] = 0
    st_hi[0] = n
    st_d[0] = 0
    sp = 1
    n_nodes = 1

    while sp > 0:
        sp -= 1
        node = st_node[sp]
        lo = st_lo[sp]
        hi = st_hi[sp]
        depth = st_d[sp]
        G = 0.0
        H = 0.0
        for k in range(lo, hi):
            G += g[idx[k]]
            H += h[idx[k]]
        value[node, 0] = -eta * G / (H + reg_lambda)
        m = hi - lo
        if depth >= max_depth or m < 2 or H < 2 * min_child_weight:
            continue
        parent = G * G / (H + reg_lambda)
        best_gain = 1e-6
        best_f = -1
        best_t = 0.0
        sub = idx[lo:hi]
        vals = np.empty(m)
        for f in range(p):
            for k in range(m):
                vals[k] = X[sub[k], f]
            order = np.argsort(vals, kind="mergesort")
            GL = 0.0
            HL = 0.0
            for k in range(m - 1):
                s = sub[order[k]]
                GL += g[s]
                HL += h[s]
                v0 = vals[order[k]]
                v1 = vals[order[k + 1]]
                if v1 <= v0:
                    continue
                HR = H - HL
                if HL < min_child_weight or HR < min_child_weight:
                    continue
                GR = G - GL
                gain = GL * GL / (HL + reg_lambda) + GR * GR / (HR + reg_lambda) - parent
                if gain > best_gain:
                    best_gain = gain
                    best_f = f
                    t = 0.5 * (v0 + v1)
                    best_t = v0 if t >= v1 else t
        if best_f < 0:
            continue
        tmp = idx[lo:hi].copy()
        a = lo
        for k in range(m):
            if X[tmp[k], best_f] <= best_t:
                idx[a] = tmp[k]
                a += 1
        mid = a
        for k in range(m):
            if X[tmp[k], best_f] > best_t:
                idx[a] = tmp[k]
                a += 1
        feature[node] = best_f
        threshold[node] = best_t
        left[node] = n_nodes
        right[node] = n_nodes + 1
        st_node[sp] = n_nodes + 1
        st_lo[sp] = mid
        st_hi[sp] = hi
        st_d[sp] = depth + 1
        sp += 1
        st_node[sp] = n_nodes
        st_lo[sp] = lo
        st_hi[sp] = mid
        st_d[sp] = depth + 1
        sp += 1
        n_nodes += 2

    return feature[:n_nodes], threshold[:n_nodes], left[:n_nodes], right[:n_nodes], value[:n_nodes]


@njit(cache=True, nogil=True)
def apply_tree(X, feature, threshold, left, right):
    """Leaf index reached by every row of X."""
    n = X.shape[0]
    out = np.empty(n, np.int64)
    for i in range(n):
        node = 0
        while feature[node] >= 0:
            if X[i, feature[node]] <= threshold[node]:
                node = left[node]
            else:
                node = right[node]
        out[i] = node
    return out
