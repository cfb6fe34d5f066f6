"""Simulation harnesses: estimation rate across corpus sizes, tree selection by
held-out likelihood, selection diagnostics and PCA views.

Every harness is driven by a config dataclass with a ``seed``; per-cell
seeds are derived from it, so re-running a config reproduces its output.
"""
from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from itertools import combinations

import numpy as np
from scipy.spatial.distance import pdist

from .drt import Drt, build_drt, enumerate_paths
from .errors import DegenerateError, DomainError
from .geometry import Polytope, minimal_matching_dist, polytope_diagnostics
from .gibbs import Hyper, heldout_loglik, match_and_check, run_chains
from .model import Corpus, ModelParams, make_params, sample_corpus

log = logging.getLogger(__name__)

__all__ = [
    "two_path_tree",
    "four_path_tree",
    "selection_candidates",
    "RateConfig",
    "RateReport",
    "run_rate_experiment",
    "SelectionConfig",
    "SelectionReport",
    "run_selection_experiment",
    "selection_diagnostics",
    "DIAGNOSTIC_COLUMNS",
    "pca_projection",
    "PcaResult",
    "true_params",
]


def two_path_tree() -> Drt:
    """Two paths of three nodes sharing only the root (I=2, J=3, K=5)."""
    return build_drt({2: 1, 3: 2, 4: 1, 5: 4}, root=1)


def four_path_tree() -> Drt:
    """Four paths of three nodes: one shared root, two shared middle nodes."""
    return build_drt({2: 1, 3: 1, 4: 2, 5: 2, 6: 3, 7: 3}, root=1)


def selection_candidates() -> dict[str, Drt]:
    """Candidate trees for the selection study; ``tree0`` generates the data.

    tree0-tree4 have K=5 (tree4 is a single path, i.e. LDA); tree5-tree7
    have more nodes and contain tree0 as a subtree.
    """
    return {
        "tree0": two_path_tree(),
        "tree1": build_drt({2: 1, 3: 1, 4: 1, 5: 1}, root=1),
        "tree2": build_drt({2: 1, 3: 2, 4: 2, 5: 2}, root=1),
        "tree3": build_drt({2: 1, 3: 2, 4: 3, 5: 3}, root=1),
        "tree4": build_drt({2: 1, 3: 2, 4: 3, 5: 4}, root=1),
        "tree5": build_drt({2: 1, 3: 2, 4: 1, 5: 4, 6: 2}, root=1),
        "tree6": build_drt({2: 1, 3: 2, 4: 1, 5: 4, 6: 1, 7: 6}, root=1),
        "tree7": build_drt({2: 1, 3: 2, 4: 1, 5: 4, 6: 2, 7: 4}, root=1),
    }


def true_params(drt: Drt, V: int, alpha0: float, seed) -> ModelParams:
    """Topics from Dir_V(1), uniform path probabilities."""
    rng = np.random.default_rng(seed)
    topics = rng.dirichlet(np.ones(V), size=drt.K)
    return make_params(drt, topics, None, alpha0)


def _cell_seed(seed, *key):
    return np.random.SeedSequence([int(seed), *map(int, key)])


def _ols_slope(x, y):
    x, y = np.asarray(x, float), np.asarray(y, float)
    if x.size < 2 or np.ptp(x) == 0:
        return float("nan"), float("nan")
    X = np.column_stack([np.ones_like(x), x])
    coef, *_ = np.linalg.lstsq(X, y, rcond=None)
    if x.size > 2:
        resid = y - X @ coef
        s2 = resid @ resid / (x.size - 2)
        se = float(np.sqrt(s2 * np.linalg.inv(X.T @ X)[1, 1]))
    else:
        se = float("nan")
    return float(coef[1]), se


# ---------------------------------------------------------------- rate study

@dataclass
class RateConfig:
    drt: Drt = field(default_factory=two_path_tree)
    V: int = 10
    n_values: tuple = (50,)
    m_grid: tuple = (200, 500, 1250, 3000)
    replicates: int = 5
    alpha0: float = 0.8
    seed: int = 0
    chains: int = 4
    iters: int = 3000
    burnin: int = 2500
    thin: int = 10
    eta: float = 0.1
    pi0: float = 1.0
    strategy: str = "mixed"

    def __post_init__(self):
        self.m_grid = tuple(int(m) for m in self.m_grid)
        self.n_values = tuple(int(n) for n in self.n_values)
        if any(b <= a for a, b in zip(self.m_grid, self.m_grid[1:])):
            raise DomainError("m grid must be strictly increasing")
        if self.replicates < 1:
            raise DomainError("need at least one replicate")

    @classmethod
    def desk(cls, **kw):
        return cls(**kw)

    @classmethod
    def full(cls, **kw):
        base = dict(
            n_values=(50, 100),
            m_grid=tuple(int(round(m)) for m in np.geomspace(200, 5000, 8)),
            replicates=15,
            chains=8,
            iters=5500,
            burnin=5000,
        )
        base.update(kw)
        return cls(**base)


@dataclass
class RateReport:
    records: list  # dicts: n, m, replicate, d_l2, sharing_ok
    slopes: dict  # n -> (slope, stderr)
    medians: dict  # n -> list of median d_l2 over the m grid
    slope_defined: bool

    @property
    def sharing_fraction(self):
        return float(np.mean([r["sharing_ok"] for r in self.records])) if self.records else float("nan")

    def write_csv(self, path):
        with open(path, "w", newline="\n", encoding="utf-8") as f:
            w = csv.writer(f, lineterminator="\n")
            w.writerow(["n", "m", "replicate", "d_l2", "sharing_ok"])
            for r in self.records:
                w.writerow([r["n"], r["m"], r["replicate"], f"{r['d_l2']:.17g}", int(r["sharing_ok"])])


def run_rate_experiment(cfg: RateConfig, truth: ModelParams | None = None) -> RateReport:
    """d_L2 between true and estimated topics across a grid of corpus sizes."""
    if enumerate_paths(cfg.drt)[0].equal_length is None:
        raise DomainError("the rate study needs an equal-depth tree")
    truth = truth or true_params(cfg.drt, cfg.V, cfg.alpha0, _cell_seed(cfg.seed, 0))
    hyper = Hyper(cfg.alpha0, cfg.eta, cfg.pi0)
    records, slopes, medians = [], {}, {}
    for ni, n in enumerate(cfg.n_values):
        for mi, m in enumerate(cfg.m_grid):
            for r in range(cfg.replicates):
                corpus, _ = sample_corpus(truth, m, n, _cell_seed(cfg.seed, 1, ni, mi, r))
                fit = run_chains(corpus, cfg.drt, hyper, cfg.chains, cfg.iters, cfg.burnin, cfg.thin,
                                 cfg.strategy, seed=_cell_seed(cfg.seed, 2, ni, mi, r))
                rep = match_and_check(truth, fit.theta_hat)
                records.append(dict(n=n, m=m, replicate=r, d_l2=rep.d_l2, sharing_ok=rep.sharing_ok))
                log.info("rate n=%d m=%d rep=%d d_l2=%.4f sharing=%s", n, m, r, rep.d_l2, rep.sharing_ok)
        med = [float(np.median([x["d_l2"] for x in records if x["n"] == n and x["m"] == m])) for m in cfg.m_grid]
        medians[n] = med
        slopes[n] = _ols_slope(np.log(cfg.m_grid), np.log(med))
    return RateReport(records, slopes, medians, slope_defined=len(cfg.m_grid) > 1)


# ----------------------------------------------------------- selection study

@dataclass
class SelectionConfig:
    true_drt: Drt = field(default_factory=two_path_tree)
    candidates: dict = field(default_factory=selection_candidates)
    V: int = 10
    m: int = 400
    n: int = 60
    train_fraction: float = 0.7
    replicates: int = 10
    alpha0: float = 0.8
    seed: int = 0
    chains: int = 4
    iters: int = 1500
    burnin: int = 1000
    thin: int = 10
    eta: float = 0.1
    pi0: float = 1.0
    strategy: str = "mixed"
    heldout_S: int = 50
    heldout_burnin: int = 100

    def __post_init__(self):
        if not self.candidates:
            raise DomainError("need at least one candidate tree")
        if not 0 < self.train_fraction < 1:
            raise DomainError("train fraction must lie in (0, 1)")

    @classmethod
    def desk(cls, **kw):
        return cls(**kw)

    @classmethod
    def full(cls, **kw):
        base = dict(chains=8, iters=5500, burnin=5000)
        base.update(kw)
        return cls(**base)


@dataclass
class SelectionReport:
    rows: list  # dicts: replicate, tree, K, I, heldout_loglik, min_path_prob, diagnostics...

    def table(self, key):
        """replicate x tree array of ``key`` with the tree names."""
        names = list(dict.fromkeys(r["tree"] for r in self.rows))
        reps = sorted({r["replicate"] for r in self.rows})
        out = np.full((len(reps), len(names)), np.nan)
        for r in self.rows:
            out[reps.index(r["replicate"]), names.index(r["tree"])] = r[key]
        return out, names

    def write_csv(self, path):
        cols = list(self.rows[0].keys()) if self.rows else []
        with open(path, "w", newline="\n", encoding="utf-8") as f:
            w = csv.DictWriter(f, fieldnames=cols, lineterminator="\n")
            w.writeheader()
            for r in self.rows:
                w.writerow({k: (f"{v:.17g}" if isinstance(v, float) else v) for k, v in r.items()})


def run_selection_experiment(cfg: SelectionConfig, truth: ModelParams | None = None) -> SelectionReport:
    truth = truth or true_params(cfg.true_drt, cfg.V, cfg.alpha0, _cell_seed(cfg.seed, 0))
    hyper = Hyper(cfg.alpha0, cfg.eta, cfg.pi0)
    rows = []
    for r in range(cfg.replicates):
        corpus, _ = sample_corpus(truth, cfg.m, cfg.n, _cell_seed(cfg.seed, 1, r))
        perm = np.random.default_rng(_cell_seed(cfg.seed, 3, r)).permutation(cfg.m)
        n_train = int(round(cfg.train_fraction * cfg.m))
        train, test = corpus.subset(perm[:n_train]), corpus.subset(perm[n_train:])
        for ci, (name, drt) in enumerate(cfg.candidates.items()):
            fit = run_chains(train, drt, hyper, cfg.chains, cfg.iters, cfg.burnin, cfg.thin, cfg.strategy,
                             seed=_cell_seed(cfg.seed, 2, r, ci))
            hl = heldout_loglik(fit.best, test, S=cfg.heldout_S, inner_iters=cfg.heldout_burnin,
                                thin=cfg.thin, seed=_cell_seed(cfg.seed, 4, r, ci))
            I = enumerate_paths(drt)[0].I
            diag = selection_diagnostics(fit.theta_hat, drt, fit.pi_hat, hl)
            row = dict(replicate=r, tree=name, K=drt.K, I=I, heldout_loglik=hl,
                       min_path_prob=1.0 if I == 1 else float(fit.pi_hat.min()))
            row.update({f"diag_{k}": v for k, v in diag.summary.items() if k not in ("loglik", "min_path")})
            rows.append(row)
            log.info("select rep=%d %s heldout=%.4f min_pi=%.4f", r, name, hl, row["min_path_prob"])
    return SelectionReport(rows)


# ---------------------------------------------------------------- diagnostics

DIAGNOSTIC_COLUMNS = ("loglik", "min_dist", "min_path", "min_width", "min_MM", "min_Gr", "min_proj")


@dataclass
class DiagnosticsTable:
    components: list  # per path: dict(width, min_edge, min_MM, grassmann, min_proj, pi)
    summary: dict  # keys DIAGNOSTIC_COLUMNS
    flagged: bool

    def csv_row(self):
        return [self.summary[c] for c in DIAGNOSTIC_COLUMNS]


def selection_diagnostics(theta_hat, drt: Drt, pi_hat=None, loglik: float = float("nan")) -> DiagnosticsTable:
    """Table-style diagnostics of a fitted hierarchy.

    ``min_dist`` is the smallest distance between two topics, ``min_width``
    and the per-component edge lengths measure redundancy inside a
    component; ``min_MM``, ``min_Gr`` and ``min_proj`` measure separation
    between components (minimal-matching distance, largest principal angle
    between affine hulls, and vertex-to-polytope projection distance).
    """
    theta_hat = np.asarray(theta_hat, dtype=float)
    paths = enumerate_paths(drt)[0].paths
    I = len(paths)
    pi_hat = np.full(I, 1.0 / I) if pi_hat is None else np.asarray(pi_hat, float)
    polys = [Polytope(theta_hat[np.asarray(p) - 1], validate=False) for p in paths]
    flagged = False
    comps = []
    for i, P in enumerate(polys):
        others = [q for j, q in enumerate(polys) if j != i]
        try:
            d = polytope_diagnostics(P, others)
            comps.append(dict(width=d.width, min_edge=d.min_edge, min_MM=d.min_matching_to_others,
                              grassmann=d.grassmann_angle_to_others, min_proj=d.min_projection_to_others,
                              pi=float(pi_hat[i])))
        except DegenerateError:
            flagged = True
            comps.append(dict(width=0.0, min_edge=0.0, min_MM=float("nan"), grassmann=float("nan"),
                              min_proj=float("nan"), pi=float(pi_hat[i])))
    min_dist = float(pdist(theta_hat).min()) if theta_hat.shape[0] > 1 else float("nan")
    if min_dist <= 1e-12:
        flagged = True

    def cmin(key):
        vals = [c[key] for c in comps if np.isfinite(c[key])]
        return float(min(vals)) if vals else float("nan")

    mm = [minimal_matching_dist(a, b) for a, b in combinations(polys, 2)]
    summary = dict(
        loglik=float(loglik),
        min_dist=min_dist,
        min_path=1.0 if I == 1 else float(pi_hat.min()),
        min_width=cmin("width"),
        min_MM=float(min(mm)) if mm else float("nan"),
        min_Gr=cmin("grassmann"),
        min_proj=cmin("min_proj"),
    )
    return DiagnosticsTable(comps, summary, flagged)


# ------------------------------------------------------------------------ PCA

@dataclass
class PcaResult:
    doc_coords: np.ndarray  # m x 2
    vertex_coords: np.ndarray | None  # K x 2
    components: tuple
    singular_values: np.ndarray
    degenerate: bool

    def write_csv(self, path, labels=None):
        with open(path, "w", newline="\n", encoding="utf-8") as f:
            w = csv.writer(f, lineterminator="\n")
            a, b = self.components
            w.writerow(["kind", "id", f"pc{a + 1}", f"pc{b + 1}", "label"])
            for i, (x, y) in enumerate(self.doc_coords):
                w.writerow(["doc", i + 1, f"{x:.17g}", f"{y:.17g}", "" if labels is None else labels[i]])
            if self.vertex_coords is not None:
                for k, (x, y) in enumerate(self.vertex_coords):
                    w.writerow(["topic", k + 1, f"{x:.17g}", f"{y:.17g}", ""])


def pca_projection(corpus: Corpus, theta_hat=None, components=(0, 1)) -> PcaResult:
    """Project document word frequencies (and topics) on two principal axes."""
    if corpus.m < 2:
        raise DomainError("need at least two documents")
    counts = corpus.counts.astype(float)
    F = counts / np.maximum(counts.sum(axis=1, keepdims=True), 1)
    mu = F.mean(axis=0)
    _, s, Vt = np.linalg.svd(F - mu, full_matrices=False)
    a, b = components
    if max(a, b) >= Vt.shape[0]:
        raise DomainError("requested component exceeds the data rank bound")
    axes = Vt[[a, b]].T
    degenerate = bool(s[max(a, b)] <= 1e-12 * max(1.0, s[0]))
    verts = None if theta_hat is None else (np.asarray(theta_hat, float) - mu) @ axes
    return PcaResult((F - mu) @ axes, verts, (a, b), s, degenerate)
