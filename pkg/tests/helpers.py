"""Shared oracles for the test suite.

Everything here is deliberately independent of the package internals:
finite differences on plain callables, and brute-force enumeration over
small structured spaces (arborescences, tag sequences).  Tests compare
the package's analytic/algorithmic answers against these.
"""

import itertools

import numpy as np


def finite_difference(f, arrays, eps=1e-5):
    """Central finite differences of scalar f w.r.t. a list of arrays.

    f is called with no arguments and reads the arrays in place; returns
    a list of gradient arrays matching shapes.
    """
    grads = []
    for a in arrays:
        g = np.zeros_like(a, dtype=np.float64)
        flat = a.reshape(-1)
        gflat = g.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + eps
            up = f()
            flat[i] = orig - eps
            down = f()
            flat[i] = orig
            gflat[i] = (up - down) / (2.0 * eps)
        grads.append(g)
    return grads


def max_rel_err(analytic, numeric):
    """Max elementwise relative error.

    Central differences at step 1e-5 in float64 carry ~5e-11 absolute noise,
    so entries below ~1e-6 cannot be compared relatively; the denominator
    floor keeps them to an absolute check instead.
    """
    worst = 0.0
    for a, n in zip(analytic, numeric):
        denom = np.maximum(np.abs(a) + np.abs(n), 1e-6)
        worst = max(worst, float(np.max(np.abs(a - n) / denom)))
    return worst


def enumerate_parent_maps(n):
    """All head assignments over nodes 1..n-1 (heads in 0..n-1, no self)."""
    choices = [[h for h in range(n) if h != v] for v in range(1, n)]
    for combo in itertools.product(*choices):
        yield {v: combo[v - 1] for v in range(1, n)}


def reaches_root(parents, v):
    seen = set()
    while v != 0:
        if v in seen:
            return False
        seen.add(v)
        v = parents[v]
    return True


def enumerate_arborescences(n):
    """All spanning arborescences over nodes {0..n-1} rooted at 0."""
    for parents in enumerate_parent_maps(n):
        if all(reaches_root(parents, v) for v in parents):
            yield parents


def best_arborescence_weight(n, weight):
    """Brute-force max arborescence weight; weight(h, v) -> float or None."""
    best = None
    for parents in enumerate_arborescences(n):
        total = 0.0
        ok = True
        for v, h in parents.items():
            w = weight(h, v)
            if w is None:
                ok = False
                break
            total += w
        if ok and (best is None or total > best):
            best = total
    return best


def arborescence_log_sum(theta):
    """log sum over arborescences of exp(sum theta[h][v]); theta (n, n)."""
    n = theta.shape[0]
    total = 0.0
    for parents in enumerate_arborescences(n):
        total += np.exp(sum(theta[h, v] for v, h in parents.items()))
    return float(np.log(total))


def crf_enumerate(emit, trans):
    """Brute-force log-partition and best path for a linear-chain CRF.

    emit: (N, K) per-position tag scores; trans: (K, K) tag-to-tag scores.
    Returns (log_Z, best_path, best_score).
    """
    n, k = emit.shape
    log_z_terms = []
    best_path, best_score = None, None
    for path in itertools.product(range(k), repeat=n):
        s = emit[0, path[0]]
        for i in range(1, n):
            s += trans[path[i - 1], path[i]] + emit[i, path[i]]
        log_z_terms.append(s)
        if best_score is None or s > best_score:
            best_score, best_path = s, list(path)
    m = max(log_z_terms)
    log_z = m + np.log(sum(np.exp(t - m) for t in log_z_terms))
    return float(log_z), best_path, float(best_score)
