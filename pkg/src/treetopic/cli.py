"""Command line entry point: ``treetopic generate|fit|eval|metrics|rate-exp|select-exp``.

Each command writes into ``--out`` (a run directory) and finishes with a
``manifest.json`` holding the configuration, seeds and sha256 checksums of
the files it wrote.  ``eval`` verifies the manifest of the run it reads.
"""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from . import io
from .errors import TreeTopicError
from .experiments import (
    RateConfig,
    SelectionConfig,
    run_rate_experiment,
    run_selection_experiment,
    selection_diagnostics,
    true_params,
)
from .geometry import HierarchyParams, TopicMap, augmented_tree_hausdorff, d_l2, union_hausdorff
from .gibbs import Hyper, heldout_loglik, match_and_check, run_chains
from .model import sample_corpus

log = logging.getLogger("treetopic")


def _add_chain_flags(p, chains=4, iters=3000, burnin=2500, thin=10):
    p.add_argument("--chains", type=int, default=chains)
    p.add_argument("--iters", type=int, default=iters)
    p.add_argument("--burnin", type=int, default=burnin)
    p.add_argument("--thin", type=int, default=thin)


def _add_hyper_flags(p, alpha=None):
    p.add_argument("--alpha", type=float, default=alpha, help="doc-topic concentration")
    p.add_argument("--eta", type=float, default=0.1, help="topic-word concentration")
    p.add_argument("--pi0", type=float, default=1.0, help="path concentration")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="treetopic", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="sample a corpus from a parameter file or a tree with random topics")
    g.add_argument("--params", help="params JSON {tree, topics, pi, alpha}")
    g.add_argument("--tree", help="tree JSON (topics drawn from Dir_V(1))")
    g.add_argument("--V", type=int, default=10)
    g.add_argument("--alpha", type=float, default=0.8)
    g.add_argument("--m", type=int, required=True)
    g.add_argument("--n", type=int, required=True)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--sparse", action="store_true", help="write id:count lines")
    g.add_argument("--out", required=True)

    f = sub.add_parser("fit", help="fit a tree to a corpus with the collapsed Gibbs sampler")
    f.add_argument("--tree", required=True)
    f.add_argument("--corpus", required=True)
    f.add_argument("--out", required=True)
    f.add_argument("--seed", type=int, default=0)
    f.add_argument("--init", default="mixed", choices=["random", "lda_cluster", "mixed"])
    f.add_argument("--profile", choices=["desk", "full"], default=None,
                   help="chain-length preset (full: 8 chains, 5500 iterations, 5000 burn-in)")
    _add_chain_flags(f)
    _add_hyper_flags(f, alpha=1.0)

    e = sub.add_parser("eval", help="held-out log likelihood of a fitted run")
    e.add_argument("--run", required=True, help="run directory written by `fit`")
    e.add_argument("--corpus", required=True, help="held-out corpus")
    e.add_argument("--out", help="output directory (default: the run directory)")
    e.add_argument("--seed", type=int, default=0)
    e.add_argument("--S", type=int, default=50)
    e.add_argument("--burnin", type=int, default=100)
    e.add_argument("--thin", type=int, default=10)
    e.add_argument("--no-overlay", action="store_true", help="plug-in topics instead of overlay counts")

    mt = sub.add_parser("metrics", help="distances between true parameters and a fit")
    mt.add_argument("--params", required=True, help="true params JSON")
    mt.add_argument("--fit", required=True, help="fit JSON")
    mt.add_argument("--out", required=True)
    mt.add_argument("--seed", type=int, default=0)
    mt.add_argument("--samples", type=int, default=20_000, help="samples per polytope for d_UH")

    for name, helptext in (("rate-exp", "estimation-rate study"), ("select-exp", "tree-selection study")):
        x = sub.add_parser(name, help=helptext)
        x.add_argument("--profile", choices=["desk", "full"], default="desk")
        x.add_argument("--out", required=True)
        x.add_argument("--seed", type=int, default=0)
        x.add_argument("--chains", type=int)
        x.add_argument("--iters", type=int)
        x.add_argument("--burnin", type=int)
        x.add_argument("--thin", type=int)
        _add_hyper_flags(x)
        x.add_argument("--replicates", type=int)
        x.add_argument("--tree", help="tree JSON (default: the two-path tree of size (2, {3,3}, 5))")
    return ap


def _out_dir(path) -> Path:
    p = Path(path)
    p.mkdir(parents=True, exist_ok=True)
    return p


def cmd_generate(a):
    out = _out_dir(a.out)
    if a.params:
        params = io.parse_params(a.params)
    elif a.tree:
        params = true_params(io.parse_tree(a.tree), a.V, a.alpha, a.seed)
    else:
        raise TreeTopicError("generate needs --params or --tree")
    corpus, latent = sample_corpus(params, a.m, a.n, seed=np.random.SeedSequence([a.seed, 1]))
    io.write_corpus(corpus, out / "corpus.txt", sparse=a.sparse)
    io.write_params(params, out / "params.json")
    np.savetxt(out / "labels.csv", latent.path_labels + 1, fmt="%d", header="path", comments="")
    io.write_manifest(out, vars(a), {"seed": a.seed}, ["corpus.txt", "params.json", "labels.csv"])


def _chain_settings(a):
    if a.profile == "full":
        return 8, 5500, 5000, 10
    return a.chains, a.iters, a.burnin, a.thin


def cmd_fit(a):
    out = _out_dir(a.out)
    drt = io.parse_tree(a.tree)
    corpus = io.parse_corpus(a.corpus)
    hyper = Hyper(a.alpha, a.eta, a.pi0)
    chains, iters, burnin, thin = _chain_settings(a)
    fit = run_chains(corpus, drt, hyper, chains, iters, burnin, thin, a.init, seed=a.seed)
    best = fit.best
    io.write_fit(out / "fit.json", fit.theta_hat, fit.pi_hat, best.loglik_trace, a.seed, hyper, drt,
                 extra={"best_chain": fit.best_chain, "chain_scores": fit.chain_scores.tolist()})
    C, L = best.samples[best.best_sample]
    np.savez_compressed(out / "snapshot.npz", C=C.astype(np.int32), L=L.astype(np.int8 if L.max() < 127 else np.int32))
    io.write_corpus(corpus, out / "train_corpus.txt")
    diag = selection_diagnostics(fit.theta_hat, drt, fit.pi_hat, best.harmonic_mean())
    io.write_metrics([(k, v, 0.0) for k, v in diag.summary.items()], out / "diagnostics.csv")
    files = ["fit.json", "fit_trace.csv", "snapshot.npz", "train_corpus.txt", "diagnostics.csv"]
    io.write_manifest(out, {**vars(a), "chains": chains, "iters": iters, "burnin": burnin, "thin": thin},
                      {"seed": a.seed}, files)


def cmd_eval(a):
    from .gibbs import ChainResult, state_from_labels

    run = Path(a.run)
    io.load_manifest(run / "manifest.json", verify=True)
    fit = io.read_fit(run / "fit.json")
    train = io.parse_corpus(run / "train_corpus.txt")
    snap = np.load(run / "snapshot.npz")
    hyper = Hyper(**fit["hyper"])
    state = state_from_labels(train, fit["drt"], hyper, snap["C"], snap["L"])
    result = ChainResult(samples=[state.snapshot()], loglik_trace=np.zeros(0), data_loglik=np.zeros(1),
                         estimates=[], best_sample=0, final_state=state)
    test = io.parse_corpus(a.corpus)
    if test.V != train.V:
        test = type(test)(max(test.V, train.V), test.docs)
    hl = heldout_loglik(result, test, S=a.S, inner_iters=a.burnin, thin=a.thin, seed=a.seed,
                        include_overlay=not a.no_overlay)
    out = _out_dir(a.out) if a.out else run
    io.write_metrics([("heldout_loglik_per_doc", hl, 0.0)], out / "eval.csv")
    if a.out:
        io.write_manifest(out, vars(a), {"seed": a.seed}, ["eval.csv"])
    print(f"{hl:.6f}")


def cmd_metrics(a):
    out = _out_dir(a.out)
    truth = io.parse_params(a.params)
    fit = io.read_fit(a.fit)
    rows = []
    drt_e = fit["drt"]
    theta = fit["theta_hat"]
    rho_t = truth.hierarchy.topic_map
    rho_e = TopicMap(theta, validate=False)
    rows.append(("d_l2", d_l2(rho_t, rho_e, truth.drt, drt_e), 0.0))
    if drt_e.K == truth.drt.K:
        rows.append(("sharing_ok", float(match_and_check(truth, theta, drt_e).sharing_ok), 0.0))
    est, slack = union_hausdorff(rho_t, rho_e, truth.drt, a.samples, a.seed, drt_b=drt_e)
    rows.append(("d_uh", est, slack))
    if len(fit["pi_hat"]) == len(truth.pi):
        hp = HierarchyParams(drt_e, rho_e, fit["pi_hat"] / fit["pi_hat"].sum())
        rows.append(("d_h_plus", augmented_tree_hausdorff(truth.hierarchy, hp), 0.0))
    io.write_metrics(rows, out / "metrics.csv")
    io.write_manifest(out, vars(a), {"seed": a.seed}, ["metrics.csv"])
    for name, v, s in rows:
        print(f"{name},{v:.6g},{s:.3g}")


def _overrides(a):
    kw = {}
    for key in ("chains", "iters", "burnin", "thin", "replicates", "eta", "pi0"):
        v = getattr(a, key)
        if v is not None:
            kw[key] = v
    if a.alpha is not None:
        kw["alpha0"] = a.alpha
    return kw


def cmd_rate(a):
    out = _out_dir(a.out)
    kw = _overrides(a)
    if a.tree:
        kw["drt"] = io.parse_tree(a.tree)
    cfg = (RateConfig.full if a.profile == "full" else RateConfig.desk)(seed=a.seed, **kw)
    rep = run_rate_experiment(cfg)
    rep.write_csv(out / "rate.csv")
    rows = [(f"slope_n{n}", s, se) for n, (s, se) in rep.slopes.items()]
    rows.append(("sharing_fraction", rep.sharing_fraction, 0.0))
    io.write_metrics(rows, out / "summary.csv")
    io.write_manifest(out, vars(a), {"seed": a.seed}, ["rate.csv", "summary.csv"])
    for name, v, s in rows:
        print(f"{name},{v:.4f},{s:.4f}")


def cmd_select(a):
    out = _out_dir(a.out)
    kw = _overrides(a)
    if a.tree:
        kw["true_drt"] = io.parse_tree(a.tree)
    cfg = (SelectionConfig.full if a.profile == "full" else SelectionConfig.desk)(seed=a.seed, **kw)
    rep = run_selection_experiment(cfg)
    rep.write_csv(out / "selection.csv")
    io.write_manifest(out, vars(a), {"seed": a.seed}, ["selection.csv"])
    h, names = rep.table("heldout_loglik")
    print("tree," + ",".join(names))
    print("mean_heldout," + ",".join(f"{x:.4f}" for x in h.mean(axis=0)))


COMMANDS = {
    "generate": cmd_generate,
    "fit": cmd_fit,
    "eval": cmd_eval,
    "metrics": cmd_metrics,
    "rate-exp": cmd_rate,
    "select-exp": cmd_select,
}


def main(argv=None) -> int:
    a = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if a.verbose else logging.WARNING, format="%(message)s")
    try:
        COMMANDS[a.command](a)
    except TreeTopicError as exc:
        print(f"treetopic {a.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
