"""Collapsed Gibbs sampler for the tree-directed topic model.

Topics, path probabilities and per-document mixing weights are integrated
out; the chain moves over the path label ``C[d]`` of every document and the
depth label ``L[t]`` of every token.  The inner loops are numba kernels that
take their uniforms from the state's numpy Generator, so a chain is fully
determined by its seed.

Count conventions (0-based node index ``k = node - 1``):

* ``N[k, v]`` tokens of word v sitting on node k, ``Nk[k] = N[k].sum()``
* ``Nt[d, k]`` tokens of document d on node k (zero off its path)
* ``M[c]`` documents on path c

``N0``/``Nk0``/``M0`` are frozen base counts, zero during training and set
to the training counts when folding in held-out documents.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from itertools import permutations

import numpy as np
from numba import njit
from scipy.cluster.hierarchy import fcluster, linkage
from scipy.optimize import linear_sum_assignment
from scipy.special import gammaln, logsumexp

from .drt import Drt, chain, enumerate_paths
from .errors import DomainError, ShapeError
from .geometry import TopicMap, d_l2
from .model import Corpus, ModelParams

__all__ = [
    "Hyper",
    "GibbsState",
    "ChainResult",
    "FitResult",
    "init_state",
    "state_from_labels",
    "sweep_L",
    "sweep_C",
    "conditional_L",
    "conditional_C",
    "joint_loglik",
    "data_loglik",
    "estimate_params",
    "run_chain",
    "run_chains",
    "harmonic_mean_loglik",
    "heldout_loglik",
    "match_and_check",
    "MatchReport",
]


@dataclass(frozen=True)
class Hyper:
    alpha: float = 1.0
    eta: float = 0.1
    pi0: float = 1.0

    def __post_init__(self):
        for name in ("alpha", "eta", "pi0"):
            if not getattr(self, name) > 0:
                raise DomainError(f"{name} must be positive")


LDA_ALPHA = 0.1

# ------------------------------------------------------------------- kernels

@njit(cache=True)
def _log_rising(x, n):
    # log Gamma(x + n) - log Gamma(x) for integer n >= 0
    if n == 0:
        return 0.0
    if n <= 16:
        p = 1.0
        for t in range(n):
            p *= x + t
        return math.log(p)
    return math.lgamma(x + n) - math.lgamma(x)


@njit(cache=True)
def _l_weights(w, d, c, N, Nk, N0, Nk0, Nt, loc, alpha, eta, Veta, overlay, out):
    J = loc.shape[1]
    total = 0.0
    for l in range(J):
        k = loc[c, l]
        if overlay:
            p = (N0[k, w] + N[k, w] + eta) / (Nk0[k] + Nk[k] + Veta)
        else:
            p = (N0[k, w] + eta) / (Nk0[k] + Veta)
        out[l] = p * (Nt[d, k] + alpha)
        total += out[l]
    return total


@njit(cache=True)
def _sweep_L(words, doc_ptr, C, L, N, Nk, N0, Nk0, Nt, loc, alpha, eta, overlay, u):
    J = loc.shape[1]
    Veta = N.shape[1] * eta
    buf = np.empty(J)
    for d in range(doc_ptr.shape[0] - 1):
        c = C[d]
        for t in range(doc_ptr[d], doc_ptr[d + 1]):
            w = words[t]
            k = loc[c, L[t]]
            N[k, w] -= 1
            Nk[k] -= 1
            Nt[d, k] -= 1
            total = _l_weights(w, d, c, N, Nk, N0, Nk0, Nt, loc, alpha, eta, Veta, overlay, buf)
            r = u[t] * total
            l = 0
            acc = buf[0]
            while acc < r and l < J - 1:
                l += 1
                acc += buf[l]
            L[t] = l
            k = loc[c, l]
            N[k, w] += 1
            Nk[k] += 1
            Nt[d, k] += 1


@njit(cache=True)
def _doc_table(words, doc_ptr, L, d, cnt, nl, tl, tv):
    # per-document (depth, word) counts; returns number of distinct pairs
    for l in range(nl.shape[0]):
        nl[l] = 0
    ntouch = 0
    for t in range(doc_ptr[d], doc_ptr[d + 1]):
        l = L[t]
        w = words[t]
        if cnt[l, w] == 0:
            tl[ntouch] = l
            tv[ntouch] = w
            ntouch += 1
        cnt[l, w] += 1
        nl[l] += 1
    return ntouch


@njit(cache=True)
def _c_logweights(N, Nk, N0, Nk0, M, M0, loc, eta, pi0, overlay, cnt, nl, tl, tv, ntouch, out):
    I, J = loc.shape
    Veta = N.shape[1] * eta
    for c in range(I):
        lp = math.log(M0[c] + M[c] + pi0)
        for l in range(J):
            k = loc[c, l]
            if overlay:
                lp -= _log_rising(Nk0[k] + Nk[k] + Veta, nl[l])
            else:
                lp -= nl[l] * math.log(Nk0[k] + Veta)
        for s in range(ntouch):
            l = tl[s]
            v = tv[s]
            k = loc[c, l]
            if overlay:
                lp += _log_rising(N0[k, v] + N[k, v] + eta, cnt[l, v])
            else:
                lp += cnt[l, v] * math.log(N0[k, v] + eta)
        out[c] = lp


@njit(cache=True)
def _remove_doc(words, doc_ptr, C, L, N, Nk, Nt, M, loc, d):
    c = C[d]
    for t in range(doc_ptr[d], doc_ptr[d + 1]):
        k = loc[c, L[t]]
        N[k, words[t]] -= 1
        Nk[k] -= 1
    for l in range(loc.shape[1]):
        Nt[d, loc[c, l]] = 0
    M[c] -= 1


@njit(cache=True)
def _add_doc(words, doc_ptr, C, L, N, Nk, Nt, M, loc, d, c):
    C[d] = c
    for t in range(doc_ptr[d], doc_ptr[d + 1]):
        k = loc[c, L[t]]
        N[k, words[t]] += 1
        Nk[k] += 1
        Nt[d, k] += 1
    M[c] += 1


@njit(cache=True)
def _sweep_C(words, doc_ptr, C, L, N, Nk, N0, Nk0, Nt, M, M0, loc, eta, pi0, overlay, u):
    I, J = loc.shape
    V = N.shape[1]
    cnt = np.zeros((J, V), dtype=np.int64)
    nl = np.zeros(J, dtype=np.int64)
    maxlen = 0
    for d in range(doc_ptr.shape[0] - 1):
        maxlen = max(maxlen, doc_ptr[d + 1] - doc_ptr[d])
    tl = np.empty(maxlen, dtype=np.int64)
    tv = np.empty(maxlen, dtype=np.int64)
    lw = np.empty(I)
    for d in range(doc_ptr.shape[0] - 1):
        _remove_doc(words, doc_ptr, C, L, N, Nk, Nt, M, loc, d)
        ntouch = _doc_table(words, doc_ptr, L, d, cnt, nl, tl, tv)
        _c_logweights(N, Nk, N0, Nk0, M, M0, loc, eta, pi0, overlay, cnt, nl, tl, tv, ntouch, lw)
        mx = lw.max()
        total = 0.0
        for c in range(I):
            lw[c] = math.exp(lw[c] - mx)
            total += lw[c]
        r = u[d] * total
        c = 0
        acc = lw[0]
        while acc < r and c < I - 1:
            c += 1
            acc += lw[c]
        for s in range(ntouch):
            cnt[tl[s], tv[s]] = 0
        _add_doc(words, doc_ptr, C, L, N, Nk, Nt, M, loc, d, c)


# --------------------------------------------------------------------- state

@dataclass
class GibbsState:
    corpus: Corpus
    drt: Drt
    hyper: Hyper
    loc: np.ndarray  # I x J, 0-based node index of (path, depth)
    words: np.ndarray
    doc_ptr: np.ndarray
    C: np.ndarray
    L: np.ndarray
    N: np.ndarray  # K x V
    Nk: np.ndarray
    Nt: np.ndarray  # m x K
    M: np.ndarray
    rng: np.random.Generator
    N0: np.ndarray = None
    Nk0: np.ndarray = None
    M0: np.ndarray = None
    overlay: bool = True
    init_fallback: bool = False

    def __post_init__(self):
        K, V = self.N.shape
        if self.N0 is None:
            self.N0 = np.zeros((K, V), dtype=np.int64)
            self.Nk0 = np.zeros(K, dtype=np.int64)
            self.M0 = np.zeros(self.loc.shape[0], dtype=np.int64)

    @property
    def I(self):
        return self.loc.shape[0]

    @property
    def J(self):
        return self.loc.shape[1]

    @property
    def K(self):
        return self.N.shape[0]

    @property
    def V(self):
        return self.N.shape[1]

    @property
    def m(self):
        return self.C.shape[0]

    @property
    def N_vk(self):
        """Word-by-node counts in V x K orientation."""
        return self.N.T

    def doc_L(self, d):
        return self.L[self.doc_ptr[d] : self.doc_ptr[d + 1]]

    def check_invariants(self):
        K = self.K
        m = self.m
        assert self.M.sum() == m and np.array_equal(self.M, np.bincount(self.C, minlength=self.I))
        nodes = self.loc[np.repeat(self.C, np.diff(self.doc_ptr)), self.L]
        N = np.zeros_like(self.N)
        np.add.at(N, (nodes, self.words), 1)
        assert np.array_equal(N, self.N), "N does not match (C, L)"
        assert np.array_equal(self.Nk, self.N.sum(axis=1))
        Nt = np.zeros((m, K), dtype=np.int64)
        np.add.at(Nt, (np.repeat(np.arange(m), np.diff(self.doc_ptr)), nodes), 1)
        assert np.array_equal(Nt, self.Nt), "Ntilde does not match (C, L)"
        assert np.array_equal(self.Nt.sum(axis=1), np.diff(self.doc_ptr))
        return True

    def snapshot(self):
        return self.C.copy(), self.L.copy()


def _path_locator(drt: Drt):
    table, _ = enumerate_paths(drt)
    J = table.equal_length
    if J is None:
        raise DomainError("the Gibbs sampler needs all paths to have the same length")
    return np.ascontiguousarray(table.locator - 1, dtype=np.int64)


def _flatten(corpus: Corpus):
    lengths = corpus.lengths
    doc_ptr = np.zeros(corpus.m + 1, dtype=np.int64)
    np.cumsum(lengths, out=doc_ptr[1:])
    words = np.concatenate(corpus.docs).astype(np.int64) if corpus.m else np.zeros(0, dtype=np.int64)
    return words, doc_ptr


def state_from_labels(corpus: Corpus, drt: Drt, hyper: Hyper, C, L, seed=None, rng=None) -> GibbsState:
    """Build a state with counts rebuilt from explicit labels (0-based)."""
    loc = _path_locator(drt)
    words, doc_ptr = _flatten(corpus)
    C = np.ascontiguousarray(C, dtype=np.int64)
    L = np.ascontiguousarray(L, dtype=np.int64)
    I, J = loc.shape
    if C.shape != (corpus.m,) or L.shape != words.shape:
        raise DomainError("label arrays do not match the corpus shape")
    if corpus.m and (C.min() < 0 or C.max() >= I):
        raise DomainError("path labels out of range")
    if L.size and (L.min() < 0 or L.max() >= J):
        raise DomainError("depth labels out of range")
    K, V, m = drt.K, corpus.V, corpus.m
    N = np.zeros((K, V), dtype=np.int64)
    Nt = np.zeros((m, K), dtype=np.int64)
    nodes = loc[np.repeat(C, np.diff(doc_ptr)), L]
    np.add.at(N, (nodes, words), 1)
    np.add.at(Nt, (np.repeat(np.arange(m), np.diff(doc_ptr)), nodes), 1)
    return GibbsState(
        corpus=corpus,
        drt=drt,
        hyper=hyper,
        loc=loc,
        words=words,
        doc_ptr=doc_ptr,
        C=C,
        L=L,
        N=N,
        Nk=N.sum(axis=1),
        Nt=Nt,
        M=np.bincount(C, minlength=I).astype(np.int64),
        rng=rng if rng is not None else np.random.default_rng(seed),
    )


def init_state(corpus: Corpus, drt: Drt, hyper: Hyper, strategy: str = "random", seed=None, lda_iters: int = 200) -> GibbsState:
    """Initial labels: uniform at random, or from an LDA fit plus clustering."""
    rng = np.random.default_rng(seed)
    loc = _path_locator(drt)
    I, J = loc.shape
    n_tok = int(corpus.lengths.sum())
    if strategy == "random" or I == 1:
        C = rng.integers(0, I, size=corpus.m)
        L = rng.integers(0, J, size=n_tok)
        return state_from_labels(corpus, drt, hyper, C, L, rng=rng)
    if strategy != "lda_cluster":
        raise DomainError(f"unknown init strategy {strategy!r}")
    try:
        C, L = _lda_cluster_labels(corpus, drt, hyper, loc, rng, lda_iters)
    except ShapeError as exc:
        warnings.warn(f"lda_cluster initialisation failed ({exc}); using random labels")
        C = rng.integers(0, I, size=corpus.m)
        L = rng.integers(0, J, size=n_tok)
        state = state_from_labels(corpus, drt, hyper, C, L, rng=rng)
        state.init_fallback = True
        return state
    state = state_from_labels(corpus, drt, hyper, C, L, rng=rng)
    state.check_invariants()
    return state


def _node_topic_map(usage, weight, loc, K):
    """Node -> LDA topic bijection maximising the usage mass the tree explains.

    ``usage[g]`` is the mean sparsified mixing vector of cluster g and
    ``weight[g]`` its size; each cluster is credited with the mass that its
    best path covers.  Exhaustive over K! maps for K <= 8, otherwise a
    Hungarian match on the smallest usage among the clusters through a node.
    """
    I = loc.shape[0]
    if K <= 8:
        perms = np.array(list(permutations(range(K))))  # node k -> topic perms[:, k]
        cover = np.stack([usage[:, perms[:, loc[i]]].sum(axis=2) for i in range(I)], axis=2)  # g, perm, path
        score = (cover.max(axis=2) * weight[:, None]).sum(axis=0)
        return perms[int(np.argmax(score))]
    best_path = np.argmax(np.stack([usage[:, loc[i]].sum(axis=1) for i in range(I)], 1), axis=1)
    score = np.zeros((K, K))
    for k in range(K):
        through = [g for g in range(len(usage)) if k in loc[best_path[g]]] or list(range(len(usage)))
        score[k] = usage[through].min(axis=0)
    _, c = linear_sum_assignment(-score)
    return c


def _lda_cluster_labels(corpus, drt, hyper, loc, rng, lda_iters, n_clusters=None):
    I, J = loc.shape
    K = drt.K
    # a small doc-topic concentration keeps the LDA mixing vectors sparse
    lda_hyper = Hyper(min(hyper.alpha, LDA_ALPHA), hyper.eta, hyper.pi0)
    lda_state = init_state(corpus, chain(K), lda_hyper, "random", seed=rng.integers(2**63))
    for _ in range(lda_iters):
        sweep_L(lda_state)
    _, beta, theta = estimate_params(lda_state)

    # keep each document's J largest LDA weights
    top = np.argsort(-beta, axis=1)[:, :J]
    sparse = np.zeros_like(beta)
    rows = np.arange(beta.shape[0])[:, None]
    sparse[rows, top] = beta[rows, top]
    sparse /= sparse.sum(axis=1, keepdims=True)

    if corpus.m < I:
        raise ShapeError("fewer documents than paths")
    # cut the dendrogram finely, then group its clusters by the path that
    # explains them best; a cut at exactly I clusters tends to peel off
    # small outlier groups instead of separating paths
    q = min(corpus.m, n_clusters or 10 * I)
    Z = linkage(sparse, method="average")
    labels = fcluster(Z, t=q, criterion="maxclust") - 1
    groups = np.unique(labels)
    usage = np.vstack([sparse[labels == g].mean(axis=0) for g in groups])
    weight = np.array([np.sum(labels == g) for g in groups], dtype=float)
    node_topic = _node_topic_map(usage, weight, loc, K)
    cover = np.stack([usage[:, node_topic[loc[i]]].sum(axis=1) for i in range(I)], axis=1)
    group_path = np.argmax(cover, axis=1)
    C = group_path[np.searchsorted(groups, labels)].astype(np.int64)
    if len(np.unique(C)) < I:
        raise ShapeError(f"clusters cover only {len(np.unique(C))} of {I} paths")

    topic_node = np.empty(K, dtype=np.int64)
    topic_node[node_topic] = np.arange(K)
    lda_topic = lda_state.L  # depth on the chain == LDA topic index
    words, doc_ptr = lda_state.words, lda_state.doc_ptr
    L = np.empty_like(lda_topic)
    for d in range(corpus.m):
        path = loc[C[d]]
        depth_of = {int(k): l for l, k in enumerate(path)}
        on_path_theta = theta[node_topic[path]]
        for t in range(doc_ptr[d], doc_ptr[d + 1]):
            node = int(topic_node[lda_topic[t]])
            if node in depth_of:
                L[t] = depth_of[node]
            else:
                L[t] = int(np.argmax(on_path_theta[:, words[t]]))
    return C, L


# --------------------------------------------------------------------- sweeps

def sweep_L(state: GibbsState) -> GibbsState:
    u = state.rng.random(state.words.shape[0])
    h = state.hyper
    _sweep_L(state.words, state.doc_ptr, state.C, state.L, state.N, state.Nk, state.N0, state.Nk0,
             state.Nt, state.loc, h.alpha, h.eta, state.overlay, u)
    return state


def sweep_C(state: GibbsState) -> GibbsState:
    if state.I == 1:
        return state
    u = state.rng.random(state.m)
    h = state.hyper
    _sweep_C(state.words, state.doc_ptr, state.C, state.L, state.N, state.Nk, state.N0, state.Nk0,
             state.Nt, state.M, state.M0, state.loc, h.eta, h.pi0, state.overlay, u)
    return state


def conditional_L(state: GibbsState, d: int, j: int) -> np.ndarray:
    """p(L of token j in document d = l | everything else), l = 0..J-1."""
    t = state.doc_ptr[d] + j
    w, c = state.words[t], state.C[d]
    k = state.loc[c, state.L[t]]
    state.N[k, w] -= 1
    state.Nk[k] -= 1
    state.Nt[d, k] -= 1
    buf = np.empty(state.J)
    h = state.hyper
    total = _l_weights(w, d, c, state.N, state.Nk, state.N0, state.Nk0, state.Nt, state.loc,
                       h.alpha, h.eta, state.V * h.eta, state.overlay, buf)
    state.N[k, w] += 1
    state.Nk[k] += 1
    state.Nt[d, k] += 1
    return buf / total


def conditional_C(state: GibbsState, d: int) -> np.ndarray:
    """p(C[d] = c | everything else), c = 0..I-1, as used by :func:`sweep_C`."""
    s = state
    c_old = int(s.C[d])
    _remove_doc(s.words, s.doc_ptr, s.C, s.L, s.N, s.Nk, s.Nt, s.M, s.loc, d)
    n = s.doc_ptr[d + 1] - s.doc_ptr[d]
    cnt = np.zeros((s.J, s.V), dtype=np.int64)
    nl = np.zeros(s.J, dtype=np.int64)
    tl = np.empty(max(n, 1), dtype=np.int64)
    tv = np.empty(max(n, 1), dtype=np.int64)
    ntouch = _doc_table(s.words, s.doc_ptr, s.L, d, cnt, nl, tl, tv)
    lw = np.empty(s.I)
    _c_logweights(s.N, s.Nk, s.N0, s.Nk0, s.M, s.M0, s.loc, s.hyper.eta, s.hyper.pi0, s.overlay,
                  cnt, nl, tl, tv, ntouch, lw)
    _add_doc(s.words, s.doc_ptr, s.C, s.L, s.N, s.Nk, s.Nt, s.M, s.loc, d, c_old)
    return np.exp(lw - logsumexp(lw))


# ---------------------------------------------------------------- likelihoods

def data_loglik(state: GibbsState) -> float:
    """log p(X | C, L) with topics integrated out."""
    eta = state.hyper.eta
    V = state.V
    K = state.K
    return float(
        K * (gammaln(V * eta) - V * gammaln(eta))
        + gammaln(state.N + eta).sum()
        - gammaln(state.Nk + V * eta).sum()
    )


def joint_loglik(state: GibbsState) -> float:
    """log p(X | C, L) + log p(C, L)."""
    h = state.hyper
    I, J, m = state.I, state.J, state.m
    lp_C = gammaln(I * h.pi0) - I * gammaln(h.pi0) + gammaln(state.M + h.pi0).sum() - gammaln(m + I * h.pi0)
    on_path = state.Nt[np.arange(m)[:, None], state.loc[state.C]]
    n_d = np.diff(state.doc_ptr)
    lp_L = m * (gammaln(J * h.alpha) - J * gammaln(h.alpha)) + gammaln(on_path + h.alpha).sum() - gammaln(n_d + J * h.alpha).sum()
    return data_loglik(state) + float(lp_C + lp_L)


def estimate_params(state: GibbsState):
    """Posterior means (pi_hat, beta_hat, theta_hat) given the current labels.

    ``beta_hat`` is m x K with zeros off each document's path, ``theta_hat``
    is K x V.
    """
    h = state.hyper
    I, J, m = state.I, state.J, state.m
    pi_hat = (state.M + h.pi0) / (m + I * h.pi0)
    n_d = np.diff(state.doc_ptr)
    beta_hat = np.zeros((m, state.K))
    rows = np.arange(m)[:, None]
    nodes = state.loc[state.C]
    beta_hat[rows, nodes] = (state.Nt[rows, nodes] + h.alpha) / (n_d[:, None] + J * h.alpha)
    theta_hat = (state.N + h.eta) / (state.Nk[:, None] + state.V * h.eta)
    return pi_hat, beta_hat, theta_hat


# --------------------------------------------------------------------- chains

@dataclass
class ChainResult:
    samples: list
    loglik_trace: np.ndarray
    data_loglik: np.ndarray  # log p(X | C, L) at each retained sample
    estimates: list
    best_sample: int
    seed: object = None
    final_state: GibbsState = field(default=None, repr=False)
    init_fallback: bool = False

    @property
    def theta_mean(self):
        return np.mean([e[2] for e in self.estimates], axis=0)

    @property
    def pi_mean(self):
        return np.mean([e[0] for e in self.estimates], axis=0)

    def harmonic_mean(self):
        return harmonic_mean_loglik(self.data_loglik)

    def state_at(self, idx=None) -> GibbsState:
        """A fresh state holding the labels of a retained sample (default: best)."""
        s = self.final_state
        C, L = self.samples[self.best_sample if idx is None else idx]
        return state_from_labels(s.corpus, s.drt, s.hyper, C, L, rng=np.random.default_rng(0))


def harmonic_mean_loglik(logliks) -> float:
    """log of the harmonic mean of exp(logliks), computed in log space."""
    x = -np.asarray(logliks, dtype=float)
    return float(-(logsumexp(x) - np.log(x.size)))


def run_chain(corpus: Corpus, drt: Drt, hyper: Hyper, iters: int = 5500, burnin: int = 5000, thin: int = 10,
              strategy: str = "random", seed=None, keep_state: bool = True, callback=None) -> ChainResult:
    """One chain; iteration t (1-based) is kept when t > burnin and (t - burnin) % thin == 0."""
    if iters <= burnin:
        raise DomainError("iters must exceed burnin")
    if thin < 1:
        raise DomainError("thin must be at least 1")
    if iters - burnin < thin:
        raise DomainError("no sample would be kept: need iters - burnin >= thin")
    state = init_state(corpus, drt, hyper, strategy, seed)
    trace = np.empty(iters)
    samples, dll, estimates, kept = [], [], [], []
    for t in range(1, iters + 1):
        sweep_L(state)
        sweep_C(state)
        trace[t - 1] = joint_loglik(state)
        if t > burnin and (t - burnin) % thin == 0:
            samples.append(state.snapshot())
            dll.append(data_loglik(state))
            estimates.append(estimate_params(state))
            kept.append(trace[t - 1])
        if callback is not None:
            callback(t, state)
    return ChainResult(
        samples=samples,
        loglik_trace=trace,
        data_loglik=np.array(dll),
        estimates=estimates,
        best_sample=int(np.argmax(kept)),
        seed=seed,
        final_state=state if keep_state else None,
        init_fallback=state.init_fallback,
    )


@dataclass
class FitResult:
    best: ChainResult
    best_chain: int
    chain_scores: np.ndarray
    chains: list = field(default_factory=list, repr=False)

    @property
    def theta_hat(self):
        return self.best.theta_mean

    @property
    def pi_hat(self):
        return self.best.pi_mean


def run_chains(corpus: Corpus, drt: Drt, hyper: Hyper, chains: int = 8, iters: int = 5500, burnin: int = 5000,
               thin: int = 10, strategy: str = "random", seed=None, keep_all: bool = False) -> FitResult:
    """Independent chains; keep the one with the highest harmonic-mean data likelihood.

    ``strategy="mixed"`` starts the first half of the chains at random and
    the rest from the LDA-plus-clustering initialisation.
    """
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    seeds = ss.spawn(chains)
    results, scores = [], []
    best = None
    for i, s in enumerate(seeds):
        strat = strategy
        if strategy == "mixed":
            strat = "random" if i < (chains + 1) // 2 else "lda_cluster"
        r = run_chain(corpus, drt, hyper, iters, burnin, thin, strat, seed=s)
        scores.append(r.harmonic_mean())
        if keep_all:
            results.append(r)
        if best is None or scores[-1] > max(scores[:-1]):
            best = r
    scores = np.array(scores)
    return FitResult(best=best, best_chain=int(np.argmax(scores)), chain_scores=scores, chains=results)


# ------------------------------------------------------------------- held-out

def _predictive_loglik(state: GibbsState) -> float:
    """log p(X_heldout | C, L, training counts)."""
    eta = state.hyper.eta
    V = state.V
    if state.overlay:
        return float(
            gammaln(state.N0 + state.N + eta).sum() - gammaln(state.N0 + eta).sum()
            - gammaln(state.Nk0 + state.Nk + V * eta).sum() + gammaln(state.Nk0 + V * eta).sum()
        )
    logth = np.log(state.N0 + eta) - np.log(state.Nk0 + V * eta)[:, None]
    return float((state.N * logth).sum())


def heldout_loglik(train: ChainResult, heldout: Corpus, S: int = 50, inner_iters: int = 100, thin: int = 10,
                   seed=None, include_overlay: bool = True, sample: int | None = None) -> float:
    """Per-document held-out log likelihood by fold-in and the harmonic mean.

    Training counts at the chosen sample (best by default) are frozen.
    Held-out labels are resampled for ``inner_iters`` burn-in sweeps followed
    by ``S * thin`` sweeps, keeping every ``thin``-th.  With
    ``include_overlay`` the held-out tokens' own counts join the frozen
    counts in the word probabilities; otherwise the frozen topic means are
    used as plug-in values.
    """
    base = train.state_at(sample)
    rng = np.random.default_rng(seed)
    I, J = base.loc.shape
    n_tok = int(heldout.lengths.sum())
    st = state_from_labels(heldout, base.drt, base.hyper, rng.integers(0, I, heldout.m),
                           rng.integers(0, J, n_tok), rng=rng)
    st.N0, st.Nk0, st.M0 = base.N.copy(), base.Nk.copy(), base.M.copy()
    st.overlay = include_overlay
    for _ in range(inner_iters):
        sweep_L(st)
        sweep_C(st)
    vals = []
    for t in range(1, S * thin + 1):
        sweep_L(st)
        sweep_C(st)
        if t % thin == 0:
            vals.append(_predictive_loglik(st))
    return harmonic_mean_loglik(vals) / max(heldout.m, 1)


# -------------------------------------------------------------------- matching

@dataclass(frozen=True)
class MatchReport:
    sigma: np.ndarray  # sigma[k] = estimated node (1-based) matched to true node k+1
    d_l2: float
    sharing_ok: bool


def match_and_check(truth: ModelParams, theta_hat, drt_hat: Drt | None = None) -> MatchReport:
    """Match estimated topics to true ones and test the sharing structure."""
    drt_t = truth.drt
    drt_e = drt_t if drt_hat is None else drt_hat
    theta_hat = np.asarray(theta_hat, dtype=float)
    if theta_hat.shape[0] != drt_t.K or drt_e.K != drt_t.K:
        raise DomainError("true and estimated hierarchies must have the same K")
    D = np.linalg.norm(truth.topics[:, None, :] - theta_hat[None, :, :], axis=2)
    r, c = linear_sum_assignment(D)
    sigma = np.empty(drt_t.K, dtype=np.int64)
    sigma[r] = c + 1
    true_sets = {frozenset(int(sigma[v - 1]) for v in p) for p in truth.paths}
    est_sets = {frozenset(p) for p in enumerate_paths(drt_e)[0].paths}
    dist = d_l2(truth.hierarchy.topic_map, TopicMap(theta_hat, validate=False), drt_t, drt_e)
    return MatchReport(sigma=sigma, d_l2=dist, sharing_ok=true_sets == est_sets)
