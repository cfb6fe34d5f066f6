"""Polytope geometry on the vocabulary simplex and distances between topic
hierarchies.

Projection onto a polytope is a small simplex-constrained QP over barycentric
weights.  It is solved in batches with accelerated projected gradient (FISTA
with adaptive restart); every few iterations the current support is polished
by solving the equality-constrained KKT system exactly, which gives
machine-precision answers once the active face has been identified.
"""
from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations

import numpy as np
from scipy.linalg import subspace_angles
from scipy.optimize import linear_sum_assignment
from scipy.spatial.distance import cdist

from .drt import Drt, enumerate_paths
from .errors import DegenerateError, DomainError, NonConvergenceError

__all__ = [
    "Polytope",
    "TopicMap",
    "HierarchyParams",
    "project_simplex",
    "project_to_polytope",
    "project_points",
    "hausdorff_polytopes",
    "minimal_matching_dist",
    "augmented_tree_hausdorff",
    "union_hausdorff",
    "d_l2",
    "PolytopeDiagnostics",
    "polytope_diagnostics",
    "affine_basis",
    "grassmann_angle",
    "check_a1",
    "check_b1",
]

SIMPLEX_TOL = 1e-9
DISTINCT_TOL = 1e-12
RANK_TOL = 1e-8
GRAD_TOL = 1e-10
MAX_ITER = 100_000


def _check_simplex_rows(X, what):
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.ndim != 2 or X.shape[0] == 0:
        raise DomainError(f"{what}: need a nonempty 2-d array")
    if not np.all(np.isfinite(X)):
        raise DomainError(f"{what}: non-finite entries")
    if X.min() < -SIMPLEX_TOL or np.abs(X.sum(axis=1) - 1).max() > SIMPLEX_TOL:
        raise DomainError(f"{what}: rows must lie in the probability simplex")
    return X


def _check_distinct(X, what):
    if X.shape[0] > 1:
        d = cdist(X, X)
        d[np.diag_indices_from(d)] = np.inf
        if d.min() <= DISTINCT_TOL:
            i, j = np.unravel_index(np.argmin(d), d.shape)
            raise DomainError(f"{what}: rows {i} and {j} coincide")


class Polytope:
    """Convex hull of a finite set of distinct points of the simplex."""

    def __init__(self, vertices, validate: bool = True):
        V = np.asarray(vertices, dtype=float)
        if validate:
            V = _check_simplex_rows(V, "Polytope")
            _check_distinct(V, "Polytope")
        self.vertices = np.atleast_2d(V)
        self.vertices.setflags(write=False)

    @property
    def n_vertices(self):
        return self.vertices.shape[0]

    @property
    def dim(self):
        return self.vertices.shape[1]

    def __repr__(self):
        return f"Polytope({self.n_vertices} vertices in R^{self.dim})"


class TopicMap:
    """K topics (rows) indexed by node id ``k`` at row ``k-1``."""

    def __init__(self, topics, validate: bool = True):
        T = np.asarray(topics, dtype=float)
        if validate:
            T = _check_simplex_rows(T, "TopicMap")
            _check_distinct(T, "TopicMap")
        self.topics = T
        self.topics.setflags(write=False)

    @property
    def K(self):
        return self.topics.shape[0]

    @property
    def V(self):
        return self.topics.shape[1]

    def __getitem__(self, node):
        return self.topics[node - 1]

    def rows(self, nodes):
        return self.topics[np.asarray(nodes, dtype=int) - 1]


@dataclass(frozen=True)
class HierarchyParams:
    drt: Drt
    topic_map: TopicMap
    pi: np.ndarray

    def __post_init__(self):
        pi = np.asarray(self.pi, dtype=float)
        table, _ = enumerate_paths(self.drt)
        if pi.shape != (table.I,):
            raise DomainError(f"pi has shape {pi.shape}, tree has {table.I} paths")
        if pi.min() < 0 or abs(pi.sum() - 1) > SIMPLEX_TOL:
            raise DomainError("pi must be a probability vector")
        if self.topic_map.K != self.drt.K:
            raise DomainError(f"topic map has {self.topic_map.K} rows, tree has {self.drt.K} nodes")
        object.__setattr__(self, "pi", pi)

    @property
    def paths(self):
        return enumerate_paths(self.drt)[0].paths

    def polytopes(self) -> list[Polytope]:
        return [Polytope(self.topic_map.rows(p), validate=False) for p in self.paths]


# ---------------------------------------------------------------- projection

def project_simplex(Y):
    """Euclidean projection of each row of ``Y`` onto the probability simplex."""
    Y = np.asarray(Y, dtype=float)
    flat = Y.reshape(-1, Y.shape[-1])
    n, d = flat.shape
    u = -np.sort(-flat, axis=1)
    css = np.cumsum(u, axis=1) - 1.0
    idx = np.arange(1, d + 1)
    cond = u - css / idx > 0
    rho = d - 1 - np.argmax(cond[:, ::-1], axis=1)
    tau = css[np.arange(n), rho] / (rho + 1)
    return np.maximum(flat - tau[:, None], 0.0).reshape(Y.shape)


def _gradient_mapping(W, G, B, L):
    grad = W @ G - B
    return L * np.linalg.norm(W - project_simplex(W - grad / L), axis=1)


def _polish(W, G, B, support):
    """Minimise over the face given by ``support`` via the KKT system."""
    out = np.full_like(W, np.nan)
    J = support.shape[1]
    if J < 63:
        # group rows by support pattern packed into one integer
        codes = support.astype(np.int64) @ (np.int64(1) << np.arange(J, dtype=np.int64))
        keys, inverse = np.unique(codes, return_inverse=True)
        masks = (keys[:, None] >> np.arange(J)) & 1
    else:
        masks, inverse = np.unique(support, axis=0, return_inverse=True)
    inverse = inverse.ravel()
    order = np.argsort(inverse, kind="stable")
    bounds = np.searchsorted(inverse[order], np.arange(len(masks) + 1))
    for g, mask in enumerate(masks):
        rows = order[bounds[g] : bounds[g + 1]]
        s = np.flatnonzero(mask)
        if s.size == 0:
            continue
        A = np.zeros((s.size + 1, s.size + 1))
        A[: s.size, : s.size] = G[np.ix_(s, s)]
        A[: s.size, s.size] = 1.0
        A[s.size, : s.size] = 1.0
        rhs = np.zeros((s.size + 1, rows.size))
        rhs[: s.size] = B[np.ix_(rows, s)].T
        rhs[s.size] = 1.0
        sol = np.linalg.lstsq(A, rhs, rcond=None)[0]
        w = np.zeros((rows.size, W.shape[1]))
        w[:, s] = sol[: s.size].T
        out[rows] = w
    return out


def _project_weights(X, P, tol=GRAD_TOL, max_iter=MAX_ITER, check_every=10):
    """Barycentric weights of the projections of rows of X onto conv(P)."""
    n, J = X.shape[0], P.shape[0]
    if J == 1:
        return np.ones((n, 1))
    G = P @ P.T
    B = X @ P.T
    L = max(np.linalg.eigvalsh(G)[-1], 1e-300)

    W = np.full((n, J), 1.0 / J)
    Y = W.copy()
    t = np.ones(n)
    result = np.empty((n, J))
    active = np.arange(n)

    for it in range(1, max_iter + 1):
        Ba = B[active]
        grad = Y @ G - Ba
        W_new = project_simplex(Y - grad / L)
        t_new = 0.5 * (1 + np.sqrt(1 + 4 * t * t))
        # adaptive restart when momentum points uphill
        restart = np.einsum("ij,ij->i", Y - W_new, W_new - W) > 0
        mom = ((t - 1) / t_new)[:, None]
        Y = W_new + mom * (W_new - W)
        Y[restart] = W_new[restart]
        t = np.where(restart, 1.0, t_new)
        W = W_new

        if it % check_every == 0 or it == max_iter:
            done = _gradient_mapping(W, G, Ba, L) < tol
            cand = _polish(W, G, Ba, W > 1e-13)
            feasible = np.all(np.isfinite(cand), axis=1) & (cand.min(axis=1) >= -1e-14)
            if feasible.any():
                cf = np.clip(cand[feasible], 0.0, None)
                cf /= cf.sum(axis=1, keepdims=True)
                ok = _gradient_mapping(cf, G, Ba[feasible], L) < tol
                idx = np.flatnonzero(feasible)[ok]
                W[idx] = cf[ok]
                done[idx] = True
            if done.any():
                result[active[done]] = W[done]
                keep = ~done
                active, W, Y, t = active[keep], W[keep], Y[keep], t[keep]
            if active.size == 0:
                return result
    raise NonConvergenceError(
        f"projection did not reach gradient-mapping tolerance {tol:g} in {max_iter} iterations "
        f"for {active.size} point(s)"
    )


def project_points(X, p: Polytope):
    """Vectorised :func:`project_to_polytope` over the rows of ``X``.

    Returns ``(distances, points, weights)``.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    P = p.vertices
    W = _project_weights(X, P)
    Y = W @ P
    return np.linalg.norm(X - Y, axis=1), Y, W


def project_to_polytope(x, p: Polytope):
    """Distance from ``x`` to ``conv(p)`` and the nearest point."""
    x = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(x)):
        raise DomainError("x must be finite")
    d, y, _ = project_points(x[None, :], p)
    return float(d[0]), y[0]


# ------------------------------------------------------------------ distances

def _directed_hausdorff(a: Polytope, b: Polytope):
    return float(project_points(a.vertices, b)[0].max())


def hausdorff_polytopes(a: Polytope, b: Polytope) -> float:
    # distance to a convex set is convex, so the sup over conv(a) sits at a vertex
    return max(_directed_hausdorff(a, b), _directed_hausdorff(b, a))


def minimal_matching_dist(a: Polytope, b: Polytope) -> float:
    D = cdist(a.vertices, b.vertices)
    return float(max(D.min(axis=1).max(), D.min(axis=0).max()))


def augmented_tree_hausdorff(wa: HierarchyParams, wb: HierarchyParams) -> float:
    Sa, Sb = wa.polytopes(), wb.polytopes()
    if len(Sa) != len(Sb):
        raise DomainError(f"leaf counts differ: {len(Sa)} vs {len(Sb)}")
    cost = np.empty((len(Sa), len(Sb)))
    for i, s in enumerate(Sa):
        for j, s2 in enumerate(Sb):
            cost[i, j] = hausdorff_polytopes(s, s2) + abs(wa.pi[i] - wb.pi[j])
    r, c = linear_sum_assignment(cost)
    return float(cost[r, c].sum())


def _path_polytopes(rho: TopicMap, drt: Drt):
    table, _ = enumerate_paths(drt)
    return [Polytope(rho.rows(p), validate=False) for p in table.paths]


def _min_dist_to_union(X, polys):
    return np.min([project_points(X, q)[0] for q in polys], axis=0)


def _sample_union(polys, samples, rng):
    out = []
    for q in polys:
        w = rng.dirichlet(np.ones(q.n_vertices), size=samples)
        out.append(np.vstack([q.vertices, w @ q.vertices]))
    return out


def union_hausdorff(ra: TopicMap, rb: TopicMap, drt: Drt, samples: int = 20_000, seed=0, drt_b: Drt | None = None):
    """Monte-Carlo lower bound on the Hausdorff distance between path unions.

    Points are drawn with Dirichlet(1) weights inside every component polytope
    (vertices included) and their exact distance to the opposing union is
    maximised.  The returned slack is the gain from doubling the sample size
    from ``samples//2`` to ``samples``, a rough gauge of remaining bias.
    """
    rng = np.random.default_rng(seed)
    A = _path_polytopes(ra, drt)
    Bp = _path_polytopes(rb, drt if drt_b is None else drt_b)
    pts_a, pts_b = _sample_union(A, samples, rng), _sample_union(Bp, samples, rng)

    half = max(samples // 2, 1)
    full = part = 0.0
    for pts, polys in ((pts_a, Bp), (pts_b, A)):
        for X in pts:
            d = _min_dist_to_union(X, polys)
            nv = X.shape[0] - samples  # vertices come first
            full = max(full, float(d.max()))
            part = max(part, float(d[: nv + half].max()))
    return full, full - part


def d_l2(ra: TopicMap, rb: TopicMap, drt: Drt, drt_b: Drt | None = None) -> float:
    """Two-level assignment distance between topic maps on (possibly two) trees.

    Paths are matched to paths and, inside each matched pair, topics to
    topics; both layers use the Hungarian method.
    """
    pa = enumerate_paths(drt)[0].paths
    pb = enumerate_paths(drt if drt_b is None else drt_b)[0].paths
    if len(pa) != len(pb):
        raise DomainError(f"path counts differ: {len(pa)} vs {len(pb)}")
    big = np.inf
    cost = np.full((len(pa), len(pb)), big)
    for i, p in enumerate(pa):
        for j, q in enumerate(pb):
            if len(p) != len(q):
                continue
            D = cdist(ra.rows(p), rb.rows(q))
            r, c = linear_sum_assignment(D)
            cost[i, j] = D[r, c].sum()
    try:
        r, c = linear_sum_assignment(cost)
    except ValueError as exc:
        raise DomainError("path lengths of the two trees cannot be matched") from exc
    return float(cost[r, c].sum())


# ---------------------------------------------------------------- diagnostics

def affine_basis(vertices, tol=RANK_TOL):
    """Orthonormal basis (columns) of the direction space of the affine hull."""
    V = np.atleast_2d(np.asarray(vertices, dtype=float))
    if V.shape[0] < 2:
        return np.zeros((V.shape[1], 0))
    D = V[1:] - V[0]
    _, s, Vt = np.linalg.svd(D, full_matrices=False)
    r = int(np.sum(s > tol))
    return Vt[:r].T


def _dist_to_affine_hull(x, vertices):
    base = vertices[0]
    Q = affine_basis(vertices)
    r = x - base
    return float(np.linalg.norm(r - Q @ (Q.T @ r)))


def grassmann_angle(a: Polytope, b: Polytope) -> float:
    """Largest principal angle between the affine-hull direction spaces."""
    Qa, Qb = affine_basis(a.vertices), affine_basis(b.vertices)
    if Qa.shape[1] == 0 or Qb.shape[1] == 0:
        return 0.0
    return float(np.max(subspace_angles(Qa, Qb)))


@dataclass(frozen=True)
class PolytopeDiagnostics:
    width: float
    min_edge: float
    min_projection_to_others: float
    grassmann_angle_to_others: float
    min_matching_to_others: float


def _width(vertices):
    if vertices.shape[0] < 2 or affine_basis(vertices).shape[1] == 0:
        raise DegenerateError("width needs a polytope of affine dimension at least 1")
    idx = np.arange(vertices.shape[0])
    return min(_dist_to_affine_hull(vertices[k], vertices[idx != k]) for k in idx)


def _shared_mask(a, b):
    return cdist(a, b).min(axis=1) <= DISTINCT_TOL


def polytope_diagnostics(p: Polytope, others: list[Polytope]) -> PolytopeDiagnostics:
    """Separation diagnostics of ``p`` relative to the other components.

    Quantities over ``others`` are minima over the list (NaN when empty).  The
    projection term uses only vertices of ``p`` not shared with the other
    polytope; a polytope whose vertices are all shared scores 0.
    """
    V = p.vertices
    width = _width(V)
    E = cdist(V, V)
    E[np.diag_indices_from(E)] = np.inf
    min_edge = float(E.min())
    proj, angles, mm = [], [], []
    for q in others:
        own = V[~_shared_mask(V, q.vertices)]
        proj.append(float(project_points(own, q)[0].min()) if len(own) else 0.0)
        angles.append(grassmann_angle(p, q))
        mm.append(minimal_matching_dist(p, q))
    nan = float("nan")
    return PolytopeDiagnostics(
        width=float(width),
        min_edge=min_edge,
        min_projection_to_others=min(proj) if proj else nan,
        grassmann_angle_to_others=min(angles) if angles else nan,
        min_matching_to_others=min(mm) if mm else nan,
    )


def check_a1(hp: HierarchyParams, tol=RANK_TOL) -> list[bool]:
    """Per path: is every topic on the path an extreme point of its polytope?"""
    out = []
    for q in hp.polytopes():
        V = q.vertices
        ok = True
        for k in range(V.shape[0]):
            rest = np.delete(V, k, axis=0)
            if rest.shape[0] and project_points(V[k : k + 1], Polytope(rest, validate=False))[0][0] <= tol:
                ok = False
                break
        out.append(ok)
    return out


def _same_affine_hull(a, b, tol=RANK_TOL):
    Qa, Qb = affine_basis(a), affine_basis(b)
    if Qa.shape[1] != Qb.shape[1]:
        return False
    return all(_dist_to_affine_hull(x, b) < tol for x in a) and all(_dist_to_affine_hull(x, a) < tol for x in b)


def check_b1(hp: HierarchyParams, tol=RANK_TOL) -> bool:
    """True when no two component polytopes share the same affine hull."""
    polys = hp.polytopes()
    return not any(_same_affine_hull(a.vertices, b.vertices, tol) for a, b in combinations(polys, 2))
