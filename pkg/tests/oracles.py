"""Independent brute-force references used across the test-suite."""
from itertools import combinations, permutations

import numpy as np


def hull_distance_by_faces(X, P):
    """Distance from rows of X to conv(P) by trying every vertex subset.

    For each subset the point is projected onto the affine hull; the
    projection counts only if its barycentric weights are nonnegative.  The
    minimum over admissible subsets is the distance to the hull.
    """
    X = np.atleast_2d(np.asarray(X, float))
    P = np.asarray(P, float)
    best = np.full(X.shape[0], np.inf)
    for r in range(1, P.shape[0] + 1):
        for S in combinations(range(P.shape[0]), r):
            Q = P[list(S)]
            if r == 1:
                d = np.linalg.norm(X - Q[0], axis=1)
                best = np.minimum(best, d)
                continue
            D = (Q[1:] - Q[0]).T  # V x (r-1)
            coef, *_ = np.linalg.lstsq(D, (X - Q[0]).T, rcond=None)
            w = np.vstack([1 - coef.sum(axis=0), coef])
            Y = Q[0] + (D @ coef).T
            ok = w.min(axis=0) >= -1e-12
            d = np.linalg.norm(X - Y, axis=1)
            best = np.where(ok, np.minimum(best, d), best)
    return best


def hausdorff_by_faces(A, B):
    return max(hull_distance_by_faces(A, B).max(), hull_distance_by_faces(B, A).max())


def grid_on_segment(a, b, n=10_000):
    t = np.linspace(0, 1, n)[:, None]
    return (1 - t) * np.asarray(a, float) + t * np.asarray(b, float)


def barycentric_grid(vertices, steps):
    V = np.asarray(vertices, float)
    J = V.shape[0]
    pts = []

    def rec(prefix, left):
        if len(prefix) == J - 1:
            pts.append((*prefix, left))
            return
        for i in range(left + 1):
            rec(prefix + (i,), left - i)

    rec((), steps)
    return np.array(pts, float) / steps @ V


def brute_d_l2(A_paths, B_paths):
    """Exhaustive min over path and within-path permutations."""
    best = np.inf
    I = len(A_paths)
    for sigma in permutations(range(I)):
        total = 0.0
        for i in range(I):
            P, Q = A_paths[i], B_paths[sigma[i]]
            total += min(
                sum(np.linalg.norm(P[j] - Q[tau[j]]) for j in range(len(P)))
                for tau in permutations(range(len(P)))
            )
        best = min(best, total)
    return best


def _dm_log(counts, conc):
    """log of the Dirichlet-multinomial sequence probability (symmetric conc)."""
    from scipy.special import gammaln

    counts = np.asarray(counts, float)
    K = counts.size
    return (gammaln(K * conc) - gammaln(K * conc + counts.sum())
            + (gammaln(conc + counts) - gammaln(conc)).sum())


def enumerate_joint(corpus, loc, alpha, eta, pi0):
    """log p(X, C, L) for every labelling of a tiny corpus.

    ``loc`` is the I x J table of 0-based node indices.  Returns a list of
    ``(C, L, logp)`` with L flattened over tokens in document order.
    """
    from itertools import product as iproduct

    I, J = loc.shape
    K = int(loc.max()) + 1
    V = corpus.V
    words = np.concatenate(corpus.docs)
    owner = np.repeat(np.arange(corpus.m), corpus.lengths)
    out = []
    for C in iproduct(range(I), repeat=corpus.m):
        for L in iproduct(range(J), repeat=words.size):
            lp = _dm_log(np.bincount(C, minlength=I), pi0)
            for d in range(corpus.m):
                lp += _dm_log(np.bincount(np.array(L)[owner == d], minlength=J), alpha)
            N = np.zeros((K, V))
            for t, w in enumerate(words):
                N[loc[C[owner[t]], L[t]], w] += 1
            lp += sum(_dm_log(N[k], eta) for k in range(K))
            out.append((np.array(C), np.array(L), lp))
    return out
