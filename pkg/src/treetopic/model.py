"""The tree-directed topic model: sampling, exact and Monte-Carlo document
likelihoods, exact TV/KL between small models, and low-order moments.

Each document picks a path ``c ~ Cat(pi)``, mixing weights
``beta ~ Dir_J(alpha_c)`` over the topics on that path, and then draws its
words i.i.d. from ``Theta_c^T beta``.

Word ids are 0-based inside :class:`Corpus`; the text formats in
:mod:`treetopic.io` are 1-based.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from itertools import product

import numpy as np
from scipy.special import gammaln, logsumexp, roots_jacobi

from .drt import Drt, enumerate_paths
from .errors import DomainError, FloorError, InfiniteKLError, SizeError
from .geometry import HierarchyParams, TopicMap

__all__ = [
    "ModelParams",
    "Corpus",
    "LatentTruth",
    "MomentPair",
    "make_params",
    "sample_corpus",
    "lda_loglik_exact",
    "doc_loglik",
    "doc_likelihood_mc",
    "tv_kl_exact",
    "kl_upper_bound_check",
    "moments",
    "sample_h",
    "small_ball_exponent",
    "corpus_marginal_exact",
    "split_triangle_pair",
    "compositions",
]

EXACT_CAP = 10**7
ENUM_CAP = 10**6
FLOOR = 1e-6


@dataclass(frozen=True)
class ModelParams:
    hierarchy: HierarchyParams
    alpha: np.ndarray

    def __post_init__(self):
        I = len(self.hierarchy.pi)
        a = np.broadcast_to(np.asarray(self.alpha, dtype=float), (I,)).copy()
        if not np.all(a > 0):
            raise DomainError("alpha must be positive")
        object.__setattr__(self, "alpha", a)

    @property
    def drt(self) -> Drt:
        return self.hierarchy.drt

    @property
    def pi(self) -> np.ndarray:
        return self.hierarchy.pi

    @property
    def topics(self) -> np.ndarray:
        return self.hierarchy.topic_map.topics

    @property
    def paths(self):
        return self.hierarchy.paths

    @property
    def V(self) -> int:
        return self.topics.shape[1]

    def path_topics(self, i: int) -> np.ndarray:
        return self.topics[np.asarray(self.paths[i]) - 1]


def make_params(drt: Drt, topics, pi=None, alpha=1.0, validate: bool = True) -> ModelParams:
    I = enumerate_paths(drt)[0].I
    pi = np.full(I, 1.0 / I) if pi is None else np.asarray(pi, dtype=float)
    return ModelParams(HierarchyParams(drt, TopicMap(topics, validate=validate), pi), alpha)


@dataclass
class Corpus:
    """Documents as 0-based word-id arrays over a vocabulary of size V."""

    V: int
    docs: list = field(default_factory=list)

    def __post_init__(self):
        self.docs = [np.asarray(d, dtype=np.int64) for d in self.docs]
        for i, d in enumerate(self.docs):
            if d.size and (d.min() < 0 or d.max() >= self.V):
                raise DomainError(f"document {i} has word ids outside [0, {self.V})")

    @classmethod
    def from_counts(cls, counts):
        counts = np.asarray(counts, dtype=np.int64)
        docs = [np.repeat(np.arange(counts.shape[1]), row) for row in counts]
        return cls(counts.shape[1], docs)

    @property
    def m(self) -> int:
        return len(self.docs)

    @property
    def lengths(self) -> np.ndarray:
        return np.array([d.size for d in self.docs], dtype=np.int64)

    @property
    def counts(self) -> np.ndarray:
        out = np.zeros((self.m, self.V), dtype=np.int64)
        for i, d in enumerate(self.docs):
            np.add.at(out[i], d, 1)
        return out

    def subset(self, idx) -> "Corpus":
        return Corpus(self.V, [self.docs[i] for i in idx])

    def __len__(self):
        return self.m


@dataclass
class LatentTruth:
    path_labels: np.ndarray  # 0-based path index per document
    betas: list
    etas: np.ndarray


def sample_corpus(params: ModelParams, m: int, n, seed=None):
    """Draw ``m`` documents; ``n`` is a common length or a per-document array."""
    rng = np.random.default_rng(seed)
    lengths = np.broadcast_to(np.asarray(n, dtype=np.int64), (m,))
    c = rng.choice(len(params.pi), size=m, p=params.pi)
    docs, betas = [], []
    etas = np.empty((m, params.V))
    for d in range(m):
        Th = params.path_topics(c[d])
        beta = rng.dirichlet(np.full(Th.shape[0], params.alpha[c[d]]))
        eta = beta @ Th
        eta = np.clip(eta, 0, None)
        eta /= eta.sum()
        betas.append(beta)
        etas[d] = eta
        docs.append(rng.choice(params.V, size=int(lengths[d]), p=eta))
    return Corpus(params.V, docs), LatentTruth(c, betas, etas)


# ----------------------------------------------------------- exact likelihood

@lru_cache(maxsize=None)
def compositions(total: int, parts: int) -> np.ndarray:
    """All vectors of ``parts`` nonnegative integers summing to ``total``."""
    if parts == 1:
        return np.array([[total]], dtype=np.int64)
    rows = []
    for first in range(total, -1, -1):
        for rest in compositions(total - first, parts - 1):
            rows.append((first, *rest))
    out = np.array(rows, dtype=np.int64)
    out.setflags(write=False)
    return out


def _log_multinomial(total, parts):
    parts = np.asarray(parts)
    return gammaln(total + 1) - gammaln(parts + 1).sum(axis=-1)


def lda_loglik_exact(counts, theta, alpha: float) -> float:
    """log p(word sequence | Theta, alpha) for one LDA component.

    The sum over per-token topic labels is organised by word type: for each
    type, the split of its tokens among topics is a composition weighted by a
    multinomial coefficient, and the Dirichlet moment only depends on the
    accumulated topic counts.
    """
    counts = np.asarray(counts, dtype=np.int64)
    theta = np.asarray(theta, dtype=float)
    J = theta.shape[0]
    n = int(counts.sum())
    if float(J) ** n > EXACT_CAP:
        raise SizeError(f"J^n = {J}^{n} exceeds the exact-likelihood cap {EXACT_CAP:g}")
    with np.errstate(divide="ignore"):
        logth = np.log(theta)
    # dp maps accumulated topic counts -> log weight
    radix = (n + 1) ** np.arange(J, dtype=np.int64)
    states = np.zeros((1, J), dtype=np.int64)
    logw = np.zeros(1)
    for v in np.flatnonzero(counts):
        comp = compositions(int(counts[v]), J)
        lt = logth[:, v]
        with np.errstate(invalid="ignore"):
            term = _log_multinomial(int(counts[v]), comp) + np.where(comp > 0, comp * lt, 0.0).sum(axis=1)
        new_states = (states[:, None, :] + comp[None, :, :]).reshape(-1, J)
        new_logw = (logw[:, None] + term[None, :]).ravel()
        keys = new_states @ radix
        order = np.argsort(keys, kind="stable")
        starts = np.flatnonzero(np.r_[True, np.diff(keys[order]) != 0])
        with np.errstate(invalid="ignore"):
            logw = np.logaddexp.reduceat(new_logw[order], starts)
        states = new_states[order[starts]]
    a = float(alpha)
    mom = gammaln(J * a) - gammaln(J * a + n) + (gammaln(a + states) - gammaln(a)).sum(axis=1)
    return float(logsumexp(logw + mom))


def doc_likelihood_mc(params: ModelParams, counts, samples: int = 100_000, seed=None):
    """Monte-Carlo per-component likelihoods and their standard errors.

    Returns ``(mean, stderr)`` of the document density (linear scale).
    """
    rng = np.random.default_rng(seed)
    counts = np.asarray(counts, dtype=float)
    vals = np.zeros(samples)
    nz = counts > 0
    for i, p in enumerate(params.pi):
        if p == 0:
            continue
        Th = params.path_topics(i)
        beta = rng.dirichlet(np.full(Th.shape[0], params.alpha[i]), size=samples)
        eta = beta @ Th[:, nz]
        with np.errstate(divide="ignore"):
            vals += p * np.exp(np.log(eta) @ counts[nz])
    return float(vals.mean()), float(vals.std(ddof=1) / np.sqrt(samples))


def doc_loglik(params: ModelParams, doc_counts, mode: str = "exact", mc_samples: int = 100_000, seed=None) -> float:
    """Log density of a word sequence with the given count vector.

    The density is that of one particular ordering; it depends on the
    sequence only through its counts.
    """
    counts = np.asarray(doc_counts, dtype=np.int64)
    if counts.shape != (params.V,):
        raise DomainError(f"doc_counts must have length V={params.V}")
    if mode == "mc":
        mean, _ = doc_likelihood_mc(params, counts, mc_samples, seed)
        return float(np.log(mean)) if mean > 0 else -np.inf
    if mode != "exact":
        raise DomainError(f"unknown mode {mode!r}")
    terms = []
    for i, p in enumerate(params.pi):
        if p > 0:
            terms.append(np.log(p) + lda_loglik_exact(counts, params.path_topics(i), params.alpha[i]))
    return float(logsumexp(terms))


def tv_kl_exact(pa: ModelParams, pb: ModelParams, n: int):
    """Exact TV and KL(pa || pb) between the laws of n-word documents.

    All V^n sequences are covered by enumerating count vectors, each standing
    for a multinomial number of orderings with equal probability.
    """
    if pa.V != pb.V:
        raise DomainError("vocabulary sizes differ")
    V = pa.V
    if float(V) ** n > ENUM_CAP:
        raise SizeError(f"V^n = {V}^{n} exceeds the enumeration cap {ENUM_CAP:g}")
    comps = compositions(n, V)
    logmult = _log_multinomial(n, comps)
    lp = np.array([doc_loglik(pa, c) for c in comps]) + logmult
    lq = np.array([doc_loglik(pb, c) for c in comps]) + logmult
    p, q = np.exp(lp), np.exp(lq)
    for name, s in (("first", p.sum()), ("second", q.sum())):
        if abs(s - 1) > 1e-9:
            raise ArithmeticError(f"{name} model's document density sums to {s!r}, not 1")
    tv = 0.5 * float(np.abs(p - q).sum())
    bad = (p > 0) & (q == 0)
    if bad.any():
        raise InfiniteKLError("second model assigns zero mass where the first does not", tv=tv)
    pos = p > 0
    kl = float(np.sum(p[pos] * (lp[pos] - lq[pos])))
    return tv, max(kl, 0.0)


@dataclass(frozen=True)
class KLBoundCheck:
    kl: float
    bound: float
    holds: bool
    c0: float
    c1: float


def kl_upper_bound_check(pa: ModelParams, pb: ModelParams, n: int) -> KLBoundCheck:
    """Compare exact KL with a coupling bound built from shared Dirichlet draws.

    Coupling the two component laws through a common ``beta`` gives
    ``E|eta - eta'|_1 <= (1/J) sum_k |theta_k - theta'_k|_1``, which upper
    bounds the Wasserstein-1 cost of each component.  Paths are matched in
    canonical order.
    """
    if pa.paths != pb.paths:
        raise DomainError("both models must share the same tree for identity path matching")
    if not np.allclose(pa.alpha, pb.alpha):
        raise DomainError("the shared-beta coupling needs equal alpha")
    c0 = float(min(pa.topics.min(), pb.topics.min()))
    c1 = float(min(pa.pi.min(), pb.pi.min()))
    if c0 < FLOOR or c1 < FLOOR:
        raise FloorError(f"floors c0={c0:.3g}, c1={c1:.3g} must be at least {FLOOR:g}")
    w1 = np.array(
        [np.abs(pa.path_topics(i) - pb.path_topics(i)).sum(axis=1).mean() for i in range(len(pa.pi))]
    )
    bound = n / c0 * float(pa.pi @ w1) + float(pa.pi @ np.abs(pa.pi - pb.pi)) / c1
    _, kl = tv_kl_exact(pa, pb, n)
    return KLBoundCheck(kl=kl, bound=bound, holds=bool(kl <= bound + 1e-9), c0=c0, c1=c1)


# -------------------------------------------------------------------- moments

@dataclass(frozen=True)
class MomentPair:
    m1: np.ndarray
    m2: np.ndarray

    def observable(self, topics):
        """First and second moments of word frequencies, E[X1] and E[X1 X2^T]."""
        T = np.asarray(topics, dtype=float)
        return T.T @ self.m1, T.T @ self.m2 @ T


def moments(params: ModelParams) -> MomentPair:
    """Moments of the node-weight vector h (h_k = beta mass on node k)."""
    K = params.drt.K
    m1 = np.zeros(K)
    m2 = np.zeros((K, K))
    for i, (p, path) in enumerate(zip(params.pi, params.paths)):
        J = len(path)
        a = params.alpha[i]
        idx = np.asarray(path) - 1
        m1[idx] += p / J
        off = p * a / (J * (J * a + 1))
        diag = p * (a + 1) / (J * (J * a + 1))
        m2[np.ix_(idx, idx)] += off
        m2[idx, idx] += diag - off
    return MomentPair(m1, m2)


def sample_h(params: ModelParams, size: int, seed=None) -> np.ndarray:
    """Draws of h = sum_k beta_k e_{node k} (size x K)."""
    rng = np.random.default_rng(seed)
    c = rng.choice(len(params.pi), size=size, p=params.pi)
    h = np.zeros((size, params.drt.K))
    for i, path in enumerate(params.paths):
        rows = np.flatnonzero(c == i)
        if rows.size:
            h[np.ix_(rows, np.asarray(path) - 1)] = rng.dirichlet(np.full(len(path), params.alpha[i]), size=rows.size)
    return h


def small_ball_exponent(K: int, p: int, alpha: float) -> float:
    if not 1 <= p <= K - 1:
        raise DomainError("need 1 <= p <= K-1")
    if alpha <= 1:
        return p + alpha * (K - p - 1)
    return alpha * K - 1


# ---------------------------------------------------- Bayesian corpus marginal

def _beta_rule(a, b, q):
    """q-point Gauss rule for the Beta(a, b) law on [0, 1]."""
    x, w = roots_jacobi(q, b - 1, a - 1)
    return (x + 1) / 2, w / w.sum()


def _stick_rule(dim, conc, q):
    """Tensor rule for symmetric Dirichlet_dim(conc) via stick breaking."""
    if dim == 1:
        return np.ones((1, 1)), np.ones(1)
    rules = [_beta_rule(conc, (dim - 1 - j) * conc, q) for j in range(dim - 1)]
    pts, wts = [], []
    for combo in product(*[range(q)] * (dim - 1)):
        u = [rules[j][0][combo[j]] for j in range(dim - 1)]
        w = np.prod([rules[j][1][combo[j]] for j in range(dim - 1)])
        rest = 1.0
        x = []
        for uj in u:
            x.append(rest * uj)
            rest *= 1 - uj
        x.append(rest)
        pts.append(x)
        wts.append(w)
    return np.array(pts), np.array(wts)


def corpus_marginal_exact(corpus: Corpus, drt: Drt, alpha: float, eta: float, pi0: float, max_nodes: int = 10**6) -> float:
    """log p(X) with pi ~ Dir(pi0), theta_k ~ Dir_V(eta) integrated out.

    Given (pi, Theta) each document density is a polynomial of total degree
    n_d in every topic and degree 1 in pi, so Gauss-Jacobi rules on the
    stick-breaking coordinates integrate it without error once they have
    enough nodes.  Only practical for tiny instances.
    """
    table, _ = enumerate_paths(drt)
    I, K, V = table.I, drt.K, corpus.V
    N = int(corpus.lengths.sum())
    qt = N // 2 + 1
    qp = corpus.m // 2 + 1
    tpts, twts = _stick_rule(V, eta, qt)
    ppts, pwts = _stick_rule(I, pi0, qp)
    total = len(twts) ** K * len(pwts)
    if total > max_nodes:
        raise SizeError(f"{total} quadrature nodes exceed the cap {max_nodes}")
    counts = corpus.counts
    acc = []
    for tidx in product(range(len(twts)), repeat=K):
        topics = tpts[list(tidx)]
        lw_t = float(np.log(twts[list(tidx)]).sum())
        # per-document, per-path component likelihoods
        comp = np.array(
            [[lda_loglik_exact(c, topics[np.asarray(p) - 1], alpha) for p in table.paths] for c in counts]
        ).reshape(corpus.m, I)
        for pi, pw in zip(ppts, pwts):
            with np.errstate(divide="ignore"):
                ld = logsumexp(comp + np.log(pi)[None, :], axis=1).sum()
            acc.append(lw_t + np.log(pw) + ld)
    return float(logsumexp(acc))


# ------------------------------------------------ non-identifiable example

def split_triangle_pair(perturb: float = 0.0):
    """Two models on different trees that induce the same document law.

    ``omega``: a single path carrying the triangle (a, b, c).  ``omega2``: a
    root a, a middle node d on the edge [b, c] and leaves b, c, so the two
    paths carry triangles (a, d, b) and (a, d, c) whose areas fix
    pi = (0.6, 0.4).  With alpha = 1 both laws of the document mean are
    uniform on the big triangle.  With ``perturb > 0`` the topics are
    embedded in V = 4 and d moves that much mass to the fourth word, off the
    plane of the other topics.
    """
    from .drt import build_drt

    a = np.array([0.8, 0.1, 0.1])
    b = np.array([0.1, 0.8, 0.1])
    c = np.array([0.1, 0.1, 0.8])
    d = 0.4 * b + 0.6 * c
    T1 = np.vstack([a, b, c])
    T2 = np.vstack([a, b, c, d])
    if perturb:
        T1 = np.hstack([T1, np.zeros((3, 1))])
        T2 = np.hstack([T2, np.zeros((4, 1))])
        T2[3] = (1 - perturb) * T2[3]
        T2[3, 3] = perturb
    chain3 = build_drt({2: 1, 3: 2}, root=1)
    split = build_drt({4: 1, 2: 4, 3: 4}, root=1)
    # paths of `split` in canonical order: (1,4,2) -> b side, (1,4,3) -> c side
    omega = make_params(chain3, T1, [1.0], 1.0)
    omega2 = make_params(split, T2, [0.6, 0.4], 1.0)
    return omega, omega2
