"""Readers and writers for trees, topic maps, parameters, corpora, fits,
metric reports and run manifests.

Corpus text format (UTF-8, LF): an optional first line ``#V=<int>``, then
one document per line, either space-separated 1-based word ids (``1 2 1``)
or ``id:count`` pairs (``3:5 1:2``).  An empty line is an empty document.
Floats go through ``repr`` in JSON and ``%.17g`` in CSV, both of which round
trip exactly.
"""
from __future__ import annotations

import csv
import hashlib
import json
import os
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .drt import Drt, build_drt
from .errors import ChecksumError, FormatError, IdOutOfRangeError
from .model import Corpus, ModelParams, make_params

__all__ = [
    "parse_corpus",
    "write_corpus",
    "corpus_from_text",
    "corpus_to_text",
    "parse_tree",
    "write_tree",
    "tree_from_obj",
    "parse_topics",
    "write_topics",
    "parse_params",
    "write_params",
    "write_fit",
    "read_fit",
    "write_metrics",
    "read_metrics",
    "RunManifest",
    "write_manifest",
    "load_manifest",
    "sha256_file",
]


# -------------------------------------------------------------------- corpus

def _parse_int(tok, lineno, what):
    try:
        return int(tok)
    except ValueError:
        raise FormatError(f"bad {what} {tok!r}", line=lineno) from None


def corpus_from_text(text: str) -> Corpus:
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    declared = None
    start = 0
    if lines and lines[0].startswith("#"):
        head = lines[0].strip()
        if not head.startswith("#V="):
            raise FormatError(f"unknown header {head!r}", line=1)
        declared = _parse_int(head[3:], 1, "vocabulary size")
        if declared < 1:
            raise FormatError("vocabulary size must be positive", line=1)
        start = 1
    docs = []
    for lineno, line in enumerate(lines[start:], start=start + 1):
        toks = line.split()
        if not toks:
            docs.append(np.zeros(0, dtype=np.int64))
            continue
        sparse = [":" in t for t in toks]
        if any(sparse) and not all(sparse):
            raise FormatError("mixes dense ids and id:count pairs", line=lineno)
        if all(sparse):
            ids, reps = [], []
            for t in toks:
                a, _, b = t.partition(":")
                v, n = _parse_int(a, lineno, "word id"), _parse_int(b, lineno, "count")
                if n < 1:
                    raise FormatError(f"count must be positive in {t!r}", line=lineno)
                if v in ids:
                    raise FormatError(f"word id {v} listed twice", line=lineno)
                ids.append(v)
                reps.append(n)
            doc = np.repeat(np.array(ids, dtype=np.int64), reps)
        else:
            doc = np.array([_parse_int(t, lineno, "word id") for t in toks], dtype=np.int64)
        if doc.min() < 1 or (declared is not None and doc.max() > declared):
            bad = doc[(doc < 1) | (doc > (declared or np.inf))][0]
            raise IdOutOfRangeError(f"word id {bad} outside 1..{declared if declared else 'inf'}", line=lineno)
        docs.append(doc - 1)
    V = declared if declared is not None else max([int(d.max()) + 1 for d in docs if d.size] or [1])
    return Corpus(V, docs)


def corpus_to_text(corpus: Corpus, sparse: bool = False, header: bool = True) -> str:
    out = [f"#V={corpus.V}"] if header else []
    for d in corpus.docs:
        if sparse:
            ids, cnt = np.unique(d, return_counts=True)
            out.append(" ".join(f"{v + 1}:{c}" for v, c in zip(ids, cnt)))
        else:
            out.append(" ".join(str(int(v) + 1) for v in d))
    return "\n".join(out) + "\n"


def parse_corpus(path) -> Corpus:
    return corpus_from_text(Path(path).read_text(encoding="utf-8"))


def write_corpus(corpus: Corpus, path, sparse: bool = False, header: bool = True):
    Path(path).write_text(corpus_to_text(corpus, sparse, header), encoding="utf-8", newline="\n")


# ---------------------------------------------------------------------- tree

def tree_from_obj(obj) -> Drt:
    if not isinstance(obj, dict) or "root" not in obj or "parents" not in obj:
        raise FormatError('tree JSON needs "root" and "parents"')
    try:
        root = int(obj["root"])
        parents = {int(c): int(p) for c, p in obj["parents"].items()}
    except (TypeError, ValueError, AttributeError) as exc:
        raise FormatError(f"tree ids must be integers ({exc})") from None
    return build_drt(parents, root)


def _load_json(path):
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise FormatError(f"invalid JSON: {exc.msg}", line=exc.lineno) from None


def _dump_json(obj, path):
    Path(path).write_text(json.dumps(obj, indent=1) + "\n", encoding="utf-8", newline="\n")


def parse_tree(path) -> Drt:
    return tree_from_obj(_load_json(path))


def write_tree(drt: Drt, path):
    _dump_json(drt.to_dict(), path)


# -------------------------------------------------------------- topics/params

def parse_topics(path) -> np.ndarray:
    obj = _load_json(path)
    if not isinstance(obj, dict) or "topics" not in obj:
        raise FormatError('topics JSON needs a "topics" array')
    T = np.asarray(obj["topics"], dtype=float)
    if T.ndim != 2:
        raise FormatError("topics must be a K x V array")
    return T


def write_topics(topics, path):
    _dump_json({"topics": np.asarray(topics, dtype=float).tolist()}, path)


def params_to_obj(params: ModelParams) -> dict:
    return {
        "tree": params.drt.to_dict(),
        "topics": params.topics.tolist(),
        "pi": params.pi.tolist(),
        "alpha": params.alpha.tolist(),
    }


def parse_params(path) -> ModelParams:
    obj = _load_json(path)
    for key in ("tree", "topics", "pi", "alpha"):
        if key not in obj:
            raise FormatError(f'params JSON is missing "{key}"')
    return make_params(tree_from_obj(obj["tree"]), obj["topics"], obj["pi"], obj["alpha"])


def write_params(params: ModelParams, path):
    _dump_json(params_to_obj(params), path)


# ----------------------------------------------------------------- fit output

def write_fit(path, theta_hat, pi_hat, loglik_trace, seed, hyper, drt: Drt, extra=None):
    """Fit JSON plus a ``<stem>_trace.csv`` sidecar with the loglik trace."""
    path = Path(path)
    trace_path = path.with_name(path.stem + "_trace.csv")
    with open(trace_path, "w", newline="\n", encoding="utf-8") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["iteration", "joint_loglik"])
        for t, v in enumerate(np.asarray(loglik_trace), start=1):
            w.writerow([t, f"{v:.17g}"])
    obj = {
        "theta_hat": np.asarray(theta_hat).tolist(),
        "pi_hat": np.asarray(pi_hat).tolist(),
        "loglik_trace": trace_path.name,
        "seed": seed,
        "hyper": asdict(hyper) if hasattr(hyper, "__dataclass_fields__") else dict(hyper),
        "tree": drt.to_dict(),
    }
    if extra:
        obj.update(extra)
    _dump_json(obj, path)
    return path, trace_path


def read_fit(path) -> dict:
    path = Path(path)
    obj = _load_json(path)
    obj["theta_hat"] = np.asarray(obj["theta_hat"], dtype=float)
    obj["pi_hat"] = np.asarray(obj["pi_hat"], dtype=float)
    obj["drt"] = tree_from_obj(obj["tree"])
    trace = path.with_name(obj["loglik_trace"])
    if trace.exists():
        data = np.loadtxt(trace, delimiter=",", skiprows=1, ndmin=2)
        obj["trace"] = data[:, 1] if data.size else np.zeros(0)
    return obj


def write_metrics(rows, path):
    """Rows of (metric, value, slack) as CSV."""
    with open(path, "w", newline="\n", encoding="utf-8") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["metric", "value", "slack"])
        for name, value, slack in rows:
            w.writerow([name, f"{float(value):.17g}", f"{float(slack):.17g}"])


def read_metrics(path):
    with open(path, encoding="utf-8") as f:
        r = csv.DictReader(f)
        return [(row["metric"], float(row["value"]), float(row["slack"])) for row in r]


# ------------------------------------------------------------------ manifests

def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


@dataclass
class RunManifest:
    config: dict
    seeds: dict
    version: str = __version__
    checksums: dict = field(default_factory=dict)

    def to_obj(self):
        return asdict(self)


def write_manifest(run_dir, config: dict, seeds: dict, files) -> RunManifest:
    """Record config, seeds and checksums of ``files`` (paths inside run_dir)."""
    run_dir = Path(run_dir)
    sums = {}
    for f in files:
        p = Path(f)
        rel = os.path.relpath(p if p.is_absolute() else run_dir / p, run_dir)
        sums[rel] = sha256_file(run_dir / rel)
    man = RunManifest(config=config, seeds=seeds, checksums=dict(sorted(sums.items())))
    _dump_json(man.to_obj(), run_dir / "manifest.json")
    return man


def load_manifest(path, verify: bool = True) -> RunManifest:
    path = Path(path)
    obj = _load_json(path)
    man = RunManifest(**obj)
    if verify:
        for rel, digest in man.checksums.items():
            f = path.parent / rel
            if not f.exists():
                raise ChecksumError(f"{rel} listed in the manifest is missing")
            if sha256_file(f) != digest:
                raise ChecksumError(f"{rel} does not match its recorded checksum")
    return man
