from itertools import product

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.special import gammaln

from treetopic.drt import build_drt, chain
from treetopic.errors import DomainError, FloorError, InfiniteKLError, SizeError
from treetopic.model import (
    Corpus,
    compositions,
    corpus_marginal_exact,
    doc_likelihood_mc,
    doc_loglik,
    split_triangle_pair,
    kl_upper_bound_check,
    lda_loglik_exact,
    make_params,
    moments,
    sample_corpus,
    sample_h,
    small_ball_exponent,
    tv_kl_exact,
)

BINARY7 = build_drt({2: 1, 3: 1, 4: 2, 5: 2, 6: 3, 7: 3}, root=1)
TWO_PATH = build_drt({2: 1, 3: 2, 4: 1, 5: 4}, root=1)


def lda_loglik_by_labels(words, theta, alpha):
    """Sum over every per-token topic label sequence."""
    J = theta.shape[0]
    n = len(words)
    total = []
    for z in product(range(J), repeat=n):
        cnt = np.bincount(z, minlength=J)
        mom = gammaln(J * alpha) - gammaln(J * alpha + n) + (gammaln(alpha + cnt) - gammaln(alpha)).sum()
        total.append(mom + sum(np.log(theta[z[t], words[t]]) for t in range(n)))
    return np.logaddexp.reduce(total)


@given(st.integers(0, 2**32 - 1), st.integers(1, 3), st.integers(2, 4), st.integers(0, 5))
@settings(max_examples=40, deadline=None)
def test_exact_lda_matches_label_enumeration(seed, J, V, n):
    rng = np.random.default_rng(seed)
    theta = rng.dirichlet(np.ones(V), size=J)
    words = rng.integers(0, V, size=n)
    alpha = float(rng.uniform(0.2, 2))
    counts = np.bincount(words, minlength=V)
    assert lda_loglik_exact(counts, theta, alpha) == pytest.approx(lda_loglik_by_labels(words, theta, alpha), abs=1e-10)


def test_exact_lda_cap():
    with pytest.raises(SizeError):
        lda_loglik_exact(np.full(4, 10), np.full((6, 4), 0.25), 1.0)


def test_point_mass_model_is_multinomial():
    topic = np.array([[0.5, 0.3, 0.2]])
    p = make_params(chain(1), topic, alpha=1.0)
    counts = np.array([1, 2, 0])
    expected = np.log(0.5) + 2 * np.log(0.3)
    assert doc_loglik(p, counts) == pytest.approx(expected, abs=1e-14)


def test_two_topic_single_word_probability():
    t = np.array([[0.9, 0.1], [0.1, 0.9]])
    p = make_params(chain(2), t, alpha=1.0)
    # with alpha=1 and J=2, E[eta_0] = 0.5
    assert np.exp(doc_loglik(p, np.array([1, 0]))) == pytest.approx(0.5, abs=1e-14)


def test_mc_agrees_with_exact():
    rng = np.random.default_rng(4)
    p = make_params(TWO_PATH, rng.dirichlet(np.ones(4), size=5), pi=[0.3, 0.7], alpha=0.8)
    counts = np.array([2, 1, 0, 3])
    mean, se = doc_likelihood_mc(p, counts, samples=200_000, seed=1)
    exact = np.exp(doc_loglik(p, counts))
    assert abs(mean - exact) < 5 * se
    assert doc_loglik(p, counts, mode="mc", mc_samples=200_000, seed=1) == pytest.approx(np.log(exact), abs=0.02)
    with pytest.raises(DomainError):
        doc_loglik(p, counts[:3])


def test_sample_corpus_shapes_and_reproducibility():
    rng = np.random.default_rng(0)
    p = make_params(TWO_PATH, rng.dirichlet(np.ones(6), size=5), alpha=0.8)
    c1, t1 = sample_corpus(p, 30, 12, seed=5)
    c2, _ = sample_corpus(p, 30, 12, seed=5)
    assert c1.m == 30 and np.all(c1.lengths == 12)
    assert all(np.array_equal(a, b) for a, b in zip(c1.docs, c2.docs))
    assert set(np.unique(t1.path_labels)) <= {0, 1}
    assert np.allclose(t1.etas.sum(axis=1), 1)
    for d in range(30):
        assert np.allclose(t1.betas[d] @ p.path_topics(t1.path_labels[d]), t1.etas[d])


def test_sample_corpus_frequencies():
    rng = np.random.default_rng(1)
    p = make_params(TWO_PATH, rng.dirichlet(np.ones(4), size=5), pi=[0.25, 0.75], alpha=0.8)
    corpus, truth = sample_corpus(p, 4000, 3, seed=2)
    assert abs(np.mean(truth.path_labels == 1) - 0.75) < 0.03
    # word marginal equals the mean of eta under the model
    mom = moments(p)
    expected = p.topics.T @ mom.m1
    freq = corpus.counts.sum(axis=0) / corpus.counts.sum()
    assert np.allclose(freq, expected, atol=0.02)


def test_corpus_validation():
    with pytest.raises(DomainError):
        Corpus(3, [[0, 3]])
    c = Corpus.from_counts([[1, 0, 2], [0, 1, 0]])
    assert c.counts.tolist() == [[1, 0, 2], [0, 1, 0]]
    assert c.subset([1]).m == 1


def test_compositions():
    assert compositions(2, 2).tolist() == [[2, 0], [1, 1], [0, 2]]
    assert len(compositions(4, 3)) == 15


def test_tv_kl_identical_and_errors():
    rng = np.random.default_rng(2)
    p = make_params(TWO_PATH, rng.dirichlet(np.ones(3), size=5), alpha=1.0)
    tv, kl = tv_kl_exact(p, p, 3)
    assert tv == pytest.approx(0, abs=1e-15) and kl == pytest.approx(0, abs=1e-12)
    with pytest.raises(SizeError):
        tv_kl_exact(p, p, 20)
    # a point-mass model with a zero topic entry has no mass where the other has some
    q = make_params(chain(1), [[0.5, 0.5, 0.0]], alpha=1.0)
    r = make_params(chain(1), [[0.4, 0.4, 0.2]], alpha=1.0)
    with pytest.raises(InfiniteKLError) as exc:
        tv_kl_exact(r, q, 2)
    assert exc.value.tv > 0


def test_kl_against_direct_sequence_enumeration():
    rng = np.random.default_rng(3)
    pa = make_params(TWO_PATH, rng.dirichlet(np.ones(2) * 3, size=5), pi=[0.4, 0.6], alpha=1.3)
    pb = make_params(TWO_PATH, rng.dirichlet(np.ones(2) * 3, size=5), pi=[0.5, 0.5], alpha=1.3)
    n = 3
    lp = np.array([doc_loglik(pa, np.bincount(s, minlength=2)) for s in product(range(2), repeat=n)])
    lq = np.array([doc_loglik(pb, np.bincount(s, minlength=2)) for s in product(range(2), repeat=n)])
    tv, kl = tv_kl_exact(pa, pb, n)
    assert tv == pytest.approx(0.5 * np.abs(np.exp(lp) - np.exp(lq)).sum(), abs=1e-14)
    assert kl == pytest.approx(np.sum(np.exp(lp) * (lp - lq)), abs=1e-14)


def test_kl_bound_errors():
    rng = np.random.default_rng(0)
    t = rng.dirichlet(np.ones(3), size=5)
    pa = make_params(TWO_PATH, t, alpha=1.0)
    with pytest.raises(DomainError):
        kl_upper_bound_check(pa, make_params(TWO_PATH, t, alpha=2.0), 2)
    with pytest.raises(FloorError):
        t0 = t.copy()
        t0[0] = [1.0, 0.0, 0.0]
        kl_upper_bound_check(make_params(TWO_PATH, t0), pa, 2)


def test_moments_examples():
    p = make_params(BINARY7, np.random.default_rng(0).dirichlet(np.ones(3), size=7), alpha=1.0)
    mom = moments(p)
    assert np.allclose(mom.m1, [1 / 3, 1 / 6, 1 / 6, 1 / 12, 1 / 12, 1 / 12, 1 / 12], atol=0, rtol=1e-15)
    # nodes 4 and 6 share no path
    assert mom.m2[3, 5] == 0
    assert mom.m2[0, 3] > 0
    single = make_params(chain(3), np.eye(3), alpha=2.0)
    m2 = moments(single).m2
    assert m2[0, 0] == pytest.approx(3 / (3 * 7))
    assert m2[0, 1] == pytest.approx(2 / (3 * 7))
    assert np.allclose(m2.sum(axis=1), moments(single).m1)


def test_moments_observable():
    rng = np.random.default_rng(9)
    p = make_params(TWO_PATH, rng.dirichlet(np.ones(4), size=5), pi=[0.3, 0.7], alpha=0.8)
    h = sample_h(p, 200_000, seed=3)
    x = h @ p.topics
    e1, e2 = moments(p).observable(p.topics)
    assert np.allclose(x.mean(axis=0), e1, atol=5e-3)
    assert np.allclose(x.T @ x / len(x), e2, atol=5e-3)


def test_small_ball_exponent():
    assert small_ball_exponent(5, 2, 0.5) == pytest.approx(2 + 0.5 * 2)
    assert small_ball_exponent(5, 2, 2.0) == pytest.approx(9.0)
    with pytest.raises(DomainError):
        small_ball_exponent(3, 3, 1.0)


def test_corpus_marginal_single_doc_matches_dirichlet_multinomial():
    # one document, one one-node path: marginal is the Dirichlet-multinomial sequence probability
    corpus = Corpus(3, [[0, 0, 2]])
    eta = 0.7
    val = corpus_marginal_exact(corpus, chain(1), 1.0, eta, 1.0)
    expected = gammaln(3 * eta) - gammaln(3 * eta + 3) + gammaln(eta + 2) - gammaln(eta) + gammaln(eta + 1) - gammaln(eta)
    assert val == pytest.approx(expected, abs=1e-12)


def test_split_triangle_pair_values():
    omega, omega2 = split_triangle_pair()
    tv, kl = tv_kl_exact(omega, omega2, 4)
    assert tv < 1e-8 and kl < 1e-8
    pa, pb = split_triangle_pair(0.05)
    tv6, _ = tv_kl_exact(pa, pb, 6)
    assert tv6 > 1e-3
