"""Brute-force reference implementations, deliberately naive and written
without reusing any package code."""

from __future__ import annotations

import itertools
import math


def naive_matmul(a, b):
    n, k, m = len(a), len(b), len(b[0])
    return [[sum(a[i][t] * b[t][j] for t in range(k)) for j in range(m)] for i in range(n)]


def naive_mean_over_sequence(h):
    out = []
    for seq in h:
        L, H = len(seq), len(seq[0])
        out.append([sum(seq[l][d] for l in range(L)) / L for d in range(H)])
    return out


def naive_cosine(a, b):
    dot = sum(x * y for x, y in zip(a, b))
    na = math.sqrt(sum(x * x for x in a))
    nb = math.sqrt(sum(y * y for y in b))
    if na < 1e-12 or nb < 1e-12:
        return 0.0
    return dot / (na * nb)


def exhaustive_best_matches(left, right):
    """For each left row, scan every right row; first strict maximum wins."""
    out = []
    for i, a in enumerate(left):
        best_j, best = None, None
        for j, b in enumerate(right):
            c = naive_cosine(a, b)
            if best is None or c > best:
                best_j, best = j, c
        out.append((i, best_j, best))
    return out


def naive_edrm(pairs, lo=0.0, hi=5.0):
    total = 0.0
    for h, r in pairs:
        dmax = max(r - lo, hi - r)
        total += 1.0 - abs(h - r) / dmax
    return total / len(pairs)


def naive_average_precision(ranked, relevant):
    precisions = []
    for item in relevant:
        if item not in ranked:
            precisions.append(0.0)
            continue
        rank = ranked.index(item) + 1
        above = ranked[:rank]
        precisions.append(sum(1 for x in above if x in relevant) / rank)
    return sum(precisions) / len(precisions)


def naive_map(queries):
    return sum(naive_average_precision(r, rel) for r, rel in queries) / len(queries)


def naive_ranks(x):
    # rank = 1 + (#strictly smaller) + (#equal - 1) / 2
    return [1 + sum(1 for v in x if v < xi) + (sum(1 for v in x if v == xi) - 1) / 2 for xi in x]


def naive_spearman(x, y):
    rx, ry = naive_ranks(x), naive_ranks(y)
    n = len(x)
    mx, my = sum(rx) / n, sum(ry) / n
    cov = sum((a - mx) * (b - my) for a, b in zip(rx, ry))
    vx = sum((a - mx) ** 2 for a in rx)
    vy = sum((b - my) ** 2 for b in ry)
    return cov / math.sqrt(vx * vy)


def naive_classification(pred, gold):
    tp = fp = fn = tn = 0
    for p, g in zip(pred, gold):
        if p and g:
            tp += 1
        elif p and not g:
            fp += 1
        elif not p and g:
            fn += 1
        else:
            tn += 1
    prec = tp / (tp + fp) if tp + fp else 0.0
    rec = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2 * prec * rec / (prec + rec) if prec + rec else 0.0
    return (tp + tn) / len(pred), prec, rec, f1


def dominance_frontier(points):
    """O(n^2) non-dominated subset of (quality, latency) pairs, as indices."""
    keep = []
    for i, (qi, li) in enumerate(points):
        dominated = False
        for j, (qj, lj) in enumerate(points):
            if j != i and qj >= qi and lj <= li and (qj > qi or lj < li):
                dominated = True
                break
        if not dominated:
            keep.append(i)
    return keep


def brute_force_scalar_residual(y_int_col, y_ref_col, candidates):
    """Smallest ||c * y_int - y_ref|| over an explicit grid of scalars."""
    best = math.inf
    for c in candidates:
        r = math.sqrt(sum((c * a - b) ** 2 for a, b in zip(y_int_col, y_ref_col)))
        best = min(best, r)
    return best


def all_pairs(n):
    return list(itertools.product(range(n), repeat=2))
