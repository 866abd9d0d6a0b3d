"""From posteriors to a valid dependency tree.

Argmax head selection first; the Chu-Liu/Edmonds maximum spanning
arborescence on log-posteriors is only run when the argmax graph is not
a tree (or violates the single-root constraint when enabled). All tie
breaking is toward the smallest head index, so results are
bit-reproducible.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad


@dataclass
class DependencyTree:
    heads: np.ndarray  # length n, heads[j-1] in 0..n
    labels: np.ndarray  # length n, label ids


@dataclass
class DecodeStats:
    sentences: int = 0
    mst_calls: int = 0


@dataclass
class DecodeConfig:
    single_root: bool = True


def _head_prob_matrix(q):
    """Accept a posterior object or a raw n x (n+1) matrix."""
    if hasattr(q, "head_probs"):
        return q.head_probs()
    return np.asarray(ad.val(q), dtype=np.float64)


def argmax_heads(q):
    """heads[j-1] = argmax_i Q_j(i); ties go to the smallest head index."""
    hp = _head_prob_matrix(q)
    return hp.argmax(axis=1).astype(np.intp)


def is_tree(heads):
    """True iff every node reaches the root with no cycles. O(n) walk."""
    n = len(heads)
    state = np.zeros(n + 1, dtype=np.int8)  # 0 unseen, 1 on path, 2 done
    state[0] = 2
    for start in range(1, n + 1):
        path = []
        node = start
        while state[node] == 0:
            state[node] = 1
            path.append(node)
            node = int(heads[node - 1])
            if node < 0 or node > n:
                return False
        if state[node] == 1:  # walked into the current path: cycle
            return False
        for p in path:
            state[p] = 2
    return True


def _greedy_heads(w):
    n1 = w.shape[0]
    heads = np.zeros(n1, dtype=np.intp)
    for j in range(1, n1):
        col = w[:, j].copy()
        col[j] = -np.inf
        if not np.any(np.isfinite(col)):
            raise ValueError(f"no feasible head for node {j}")
        heads[j] = int(col.argmax())  # argmax takes the first (smallest) max
    return heads


def _find_cycle(heads):
    n1 = len(heads)
    color = np.zeros(n1, dtype=np.int8)
    color[0] = 2
    for start in range(1, n1):
        node = start
        path = []
        while color[node] == 0:
            color[node] = 1
            path.append(node)
            node = int(heads[node])
        if color[node] == 1:
            cyc = [node]
            cur = int(heads[node])
            while cur != node:
                cyc.append(cur)
                cur = int(heads[cur])
            return cyc
        for p in path:
            color[p] = 2
    return None


def _cle(w):
    """Maximum spanning arborescence rooted at node 0 on a dense matrix."""
    n1 = w.shape[0]
    heads = _greedy_heads(w)
    cycle = _find_cycle(heads)
    if cycle is None:
        return heads
    cyc_set = set(cycle)
    outside = [u for u in range(n1) if u not in cyc_set]
    cyc_id = len(outside)  # contracted node gets the last index
    old2new = {u: k for k, u in enumerate(outside)}

    m = cyc_id + 1
    wc = np.full((m, m), -np.inf)
    enter_arg = {}  # new head index -> (orig head, orig cycle node)
    leave_arg = {}  # new dep index  -> (orig cycle node, orig dep)
    for u in outside:
        for v in outside:
            if u != v:
                wc[old2new[u], old2new[v]] = w[u, v]
    for u in outside:
        best = -np.inf
        best_pair = None
        for c in cycle:
            s = w[u, c] - w[heads[c], c]
            if s > best or (s == best and best_pair is not None and (u, c) < best_pair):
                best = s
                best_pair = (u, c)
        wc[old2new[u], cyc_id] = best
        enter_arg[old2new[u]] = best_pair
    for v in outside:
        if v == 0:
            continue
        best = -np.inf
        best_pair = None
        for c in cycle:
            s = w[c, v]
            if s > best or (s == best and best_pair is not None and (c, v) < best_pair):
                best = s
                best_pair = (c, v)
        wc[cyc_id, old2new[v]] = best
        leave_arg[old2new[v]] = best_pair

    sub = _cle(wc)

    heads_out = np.zeros(n1, dtype=np.intp)
    for v_new in range(1, m):
        h_new = int(sub[v_new])
        if v_new == cyc_id:
            u, c_broken = enter_arg[h_new]
            # edge u -> c_broken replaces the cycle edge into c_broken
            for c in cycle:
                heads_out[c] = heads[c]
            heads_out[c_broken] = u
        else:
            v = outside[v_new]
            if h_new == cyc_id:
                c, _v = leave_arg[v_new]
                heads_out[v] = c
            else:
                heads_out[v] = outside[h_new]
    return heads_out


def tree_weight(weights, heads):
    return float(sum(weights[int(heads[j - 1]), j] for j in range(1, len(heads) + 1)))


def chu_liu_edmonds(weights, single_root=True):
    """Maximum-weight spanning arborescence; returns heads (length n)."""
    weights = np.asarray(weights, dtype=np.float64)
    n1 = weights.shape[0]
    n = n1 - 1
    if n < 1:
        raise ValueError("need at least one non-root node")
    w = weights.copy()
    w[:, 0] = -np.inf  # root has no head
    np.fill_diagonal(w, -np.inf)
    for j in range(1, n1):
        if not np.any(np.isfinite(w[:, j])):
            raise ValueError(f"no feasible head for node {j}")

    if not single_root:
        return _cle(w)[1:].copy()

    best_heads = None
    best_total = -np.inf
    for r in range(1, n1):
        if not np.isfinite(w[0, r]):
            continue
        wr = w.copy()
        wr[0, :] = -np.inf
        wr[0, r] = w[0, r]
        try:
            h = _cle(wr)
        except ValueError:
            continue
        total = tree_weight(w, h[1:])
        if total > best_total:
            best_total = total
            best_heads = h[1:].copy()
    if best_heads is None:
        raise ValueError("no feasible single-root arborescence")
    return best_heads


def assign_labels(p_label, heads):
    """labels[j-1] = argmax_l P[heads[j-1], j, l]; ties to smallest id."""
    p = np.asarray(ad.val(p_label), dtype=np.float64)
    n = len(heads)
    deps = np.arange(1, n + 1)
    return p[np.asarray(heads, dtype=np.intp), deps, :].argmax(axis=1).astype(np.intp)


def decode(posterior, p_label, config=None, stats=None):
    """argmax heads, MST fallback on log posteriors, then labels."""
    if config is None:
        config = DecodeConfig()
    hp = _head_prob_matrix(posterior)
    heads = argmax_heads(hp)
    ok = is_tree(heads)
    if ok and config.single_root and int(np.sum(heads == 0)) != 1:
        ok = False
    if stats is not None:
        stats.sentences += 1
    if not ok:
        with np.errstate(divide="ignore"):
            logq = np.log(hp.T)  # (n+1) x n -> pad to (n+1) x (n+1)
        n = hp.shape[0]
        w = np.full((n + 1, n + 1), -np.inf)
        w[:, 1:] = logq
        heads = chu_liu_edmonds(w, single_root=config.single_root)
        if stats is not None:
            stats.mst_calls += 1
    labels = assign_labels(p_label, heads)
    return DependencyTree(heads=np.asarray(heads), labels=labels)
