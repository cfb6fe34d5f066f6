"""Directed rooted trees (DRTs): construction, paths, membership, isomorphism
and reconstruction of a tree from the node sets of its maximal paths.

Node ids are the integers ``1..K``.  A path's *length* is its number of nodes,
so a path of length ``J`` carries a ``J``-dimensional Dirichlet allocation.
"""
from __future__ import annotations

from collections import Counter
from collections.abc import Iterable, Mapping
from dataclasses import dataclass, field

import numpy as np

from .errors import CycleError, DisconnectedError, DrtError, MultiRootError, NotRealizableError

__all__ = [
    "Drt",
    "PathTable",
    "SizeTriple",
    "NodeBijection",
    "build_drt",
    "chain",
    "enumerate_paths",
    "membership",
    "isomorphism",
    "reconstruct_from_path_sets",
    "random_drt",
]


@dataclass(frozen=True)
class Drt:
    """A validated directed rooted tree over nodes ``1..K``.

    Use :func:`build_drt` rather than constructing this directly.
    """

    K: int
    root: int
    parent: Mapping[int, int]
    children: Mapping[int, tuple[int, ...]]

    @property
    def nodes(self) -> range:
        return range(1, self.K + 1)

    @property
    def leaves(self) -> tuple[int, ...]:
        return tuple(v for v in self.nodes if not self.children[v])

    def edges(self) -> list[tuple[int, int]]:
        return sorted((p, c) for c, p in self.parent.items())

    def depth(self, v: int) -> int:
        d = 0
        while v != self.root:
            v = self.parent[v]
            d += 1
        return d

    def to_dict(self) -> dict:
        return {"root": self.root, "parents": {int(c): int(p) for c, p in sorted(self.parent.items())}}

    def __repr__(self):
        return f"Drt(K={self.K}, root={self.root}, parents={dict(sorted(self.parent.items()))})"


@dataclass(frozen=True)
class SizeTriple:
    I: int
    J: tuple[int, ...]  # multiset of path lengths, sorted
    K: int


@dataclass(frozen=True)
class PathTable:
    """Maximal paths of a tree in canonical (lexicographic) order.

    ``locator[c, l]`` is the node at depth ``l`` (0-based) of path ``c``
    (0-based), padded with 0 beyond the path end.
    """

    paths: tuple[tuple[int, ...], ...]
    locator: np.ndarray = field(repr=False, compare=False)
    inverse_locator: Mapping[int, frozenset] = field(repr=False, compare=False)

    @property
    def I(self) -> int:
        return len(self.paths)

    @property
    def lengths(self) -> tuple[int, ...]:
        return tuple(len(p) for p in self.paths)

    @property
    def equal_length(self) -> int | None:
        """The common path length, or None when paths differ in length."""
        lens = set(self.lengths)
        return lens.pop() if len(lens) == 1 else None

    def node_at(self, c: int, level: int) -> int:
        return self.paths[c][level]

    def node_sets(self) -> list[frozenset]:
        return [frozenset(p) for p in self.paths]

    def paths_through(self, v: int) -> frozenset:
        return frozenset(c for c, _ in self.inverse_locator[v])


@dataclass(frozen=True)
class NodeBijection:
    forward: Mapping[int, int]
    backward: Mapping[int, int]

    def __call__(self, v: int) -> int:
        return self.forward[v]


def _as_parent_pairs(parents) -> list[tuple[int, int]]:
    if isinstance(parents, Mapping):
        return [(int(c), int(p)) for c, p in parents.items()]
    return [(int(c), int(p)) for c, p in parents]


def build_drt(parents: Mapping[int, int] | Iterable[tuple[int, int]], root: int, K: int | None = None) -> Drt:
    """Validate a parent map and return a :class:`Drt`.

    ``parents`` maps each non-root node to its parent; an iterable of
    ``(child, parent)`` pairs is also accepted so that a node listed with two
    parents can be reported.  ``K`` optionally declares the node count, in
    which case unreferenced nodes are reported as disconnected.
    """
    root = int(root)
    pairs = _as_parent_pairs(parents)
    parent: dict[int, int] = {}
    for c, p in pairs:
        if c == p:
            raise CycleError(f"node {c} is its own parent")
        if c == root:
            raise MultiRootError(f"root {root} cannot have a parent (edge {p}->{c})")
        if c in parent and parent[c] != p:
            raise MultiRootError(f"node {c} has two parents: {parent[c]} and {p}")
        parent[c] = p

    referenced = set(parent) | set(parent.values()) | {root}
    for v in sorted(set(parent.values()) - set(parent) - {root}):
        raise MultiRootError(f"node {v} has no parent but is not the root {root}")

    if K is None:
        K = len(referenced)
    expected = set(range(1, K + 1))
    missing = expected - referenced
    if missing:
        raise DisconnectedError(f"nodes {sorted(missing)} are not connected to the tree")
    if referenced != expected:
        raise DrtError(f"node ids must be exactly 1..{K}, got {sorted(referenced)}")

    # every non-root node has one parent; walking up either reaches the root or loops
    reaches_root = {root}
    for start in sorted(parent):
        trail = []
        v = start
        seen = set()
        while v not in reaches_root:
            if v in seen:
                cyc = trail[trail.index(v):]
                raise CycleError(f"cycle through nodes {cyc}")
            seen.add(v)
            trail.append(v)
            v = parent[v]
        reaches_root.update(trail)

    children: dict[int, list[int]] = {v: [] for v in range(1, K + 1)}
    for c, p in parent.items():
        children[p].append(c)
    return Drt(
        K=K,
        root=root,
        parent=dict(sorted(parent.items())),
        children={v: tuple(sorted(cs)) for v, cs in children.items()},
    )


def chain(K: int) -> Drt:
    """Linear tree ``1 -> 2 -> ... -> K`` (one path; the LDA topology)."""
    return build_drt({k: k - 1 for k in range(2, K + 1)}, root=1, K=K)


def enumerate_paths(drt: Drt) -> tuple[PathTable, SizeTriple]:
    paths = []
    stack = [(drt.root,)]
    while stack:
        prefix = stack.pop()
        kids = drt.children[prefix[-1]]
        if not kids:
            paths.append(prefix)
        else:
            stack.extend(prefix + (k,) for k in kids)
    paths.sort()
    Jmax = max(len(p) for p in paths)
    locator = np.zeros((len(paths), Jmax), dtype=np.int64)
    inverse: dict[int, set] = {v: set() for v in drt.nodes}
    for c, p in enumerate(paths):
        locator[c, : len(p)] = p
        for level, v in enumerate(p):
            inverse[v].add((c, level))
    locator.setflags(write=False)
    table = PathTable(tuple(paths), locator, {v: frozenset(s) for v, s in inverse.items()})
    size = SizeTriple(I=len(paths), J=tuple(sorted(len(p) for p in paths)), K=drt.K)
    return table, size


def membership(drt: Drt) -> dict[int, int]:
    """Number of leaves below each node (equivalently, paths through it)."""
    out: dict[int, int] = {}

    def visit(v):
        kids = drt.children[v]
        out[v] = 1 if not kids else sum(visit(k) for k in kids)
        return out[v]

    visit(drt.root)
    return dict(sorted(out.items()))


def _canonical_codes(drt: Drt) -> dict[int, str]:
    codes: dict[int, str] = {}
    order = []
    stack = [drt.root]
    while stack:
        v = stack.pop()
        order.append(v)
        stack.extend(drt.children[v])
    for v in reversed(order):
        codes[v] = "(" + "".join(sorted(codes[c] for c in drt.children[v])) + ")"
    return codes


def isomorphism(t1: Drt, t2: Drt) -> NodeBijection | None:
    """Return a root-preserving, edge-preserving bijection ``t1 -> t2`` or None.

    Subtrees are compared through sorted parenthesis encodings; children with
    equal encodings are paired in node-id order, which keeps the result
    deterministic.
    """
    if t1.K != t2.K:
        return None
    c1, c2 = _canonical_codes(t1), _canonical_codes(t2)
    if c1[t1.root] != c2[t2.root]:
        return None
    forward = {}
    stack = [(t1.root, t2.root)]
    while stack:
        u, w = stack.pop()
        forward[u] = w
        ku = sorted(t1.children[u], key=lambda x: (c1[x], x))
        kw = sorted(t2.children[w], key=lambda x: (c2[x], x))
        stack.extend(zip(ku, kw))
    return NodeBijection(forward=dict(sorted(forward.items())), backward={w: u for u, w in sorted(forward.items())})


def is_isomorphism(t1: Drt, t2: Drt, sigma: Mapping[int, int]) -> bool:
    """Check that ``sigma`` is a bijection preserving edges in both directions."""
    if sorted(sigma) != list(t1.nodes) or sorted(sigma.values()) != list(t2.nodes):
        return False
    e1 = {(sigma[p], sigma[c]) for p, c in t1.edges()}
    return e1 == set(t2.edges())


def reconstruct_from_path_sets(sets: Iterable[Iterable[int]]) -> Drt:
    """Rebuild a DRT whose maximal paths have exactly the given node sets.

    Greedy construction with per-set histories: start from a node common to
    all sets, then repeatedly give the earliest tree node ``v`` that still has
    pending sets the child occurring most often among the sets whose history
    is ``v`` (ties to the smallest id).  Raises :class:`NotRealizableError` if
    no DRT generates the collection.
    """
    original = [frozenset(int(x) for x in s) for s in sets]
    if not original or any(not s for s in original):
        raise NotRealizableError("need a nonempty collection of nonempty sets")
    if len(set(original)) != len(original):
        raise NotRealizableError("duplicate path sets cannot come from distinct leaves")
    universe = frozenset().union(*original)
    common = frozenset.intersection(*original)
    if not common:
        raise NotRealizableError("the sets share no common root")
    root = min(common)

    pending = [set(s) - {root} for s in original]
    history = [root] * len(original)
    parent: dict[int, int] = {}
    placed = [root]

    while any(pending):
        for v in placed:
            group = [i for i, s in enumerate(pending) if history[i] == v and s]
            if group:
                break
        counts = Counter(x for i in group for x in pending[i])
        best = max(counts.values())
        u = min(x for x, n in counts.items() if n == best)
        stranded = [i for i, s in enumerate(pending) if u in s and history[i] != v]
        if stranded:
            raise NotRealizableError(
                f"node {u} would need parents {v} and {history[stranded[0]]}"
            )
        parent[u] = v
        placed.append(u)
        for i in group:
            if u in pending[i]:
                pending[i].discard(u)
                history[i] = u

    K = len(universe)
    if universe != frozenset(range(1, K + 1)):
        raise DrtError(f"node ids must be exactly 1..{K}, got {sorted(universe)}")
    try:
        drt = build_drt(parent, root, K=K)
    except DrtError as exc:
        raise NotRealizableError(str(exc)) from exc
    got = sorted(map(sorted, _path_sets(drt)))
    if got != sorted(map(sorted, original)):
        raise NotRealizableError("constructed tree does not reproduce the given path sets")
    return drt


def _path_sets(drt: Drt) -> list[frozenset]:
    out = []
    stack = [(drt.root,)]
    while stack:
        prefix = stack.pop()
        kids = drt.children[prefix[-1]]
        if not kids:
            out.append(frozenset(prefix))
        stack.extend(prefix + (k,) for k in kids)
    return out


def random_drt(K: int, rng: np.random.Generator, relabel: bool = True) -> Drt:
    """Random recursive tree on ``K`` nodes with optional random relabelling."""
    parent = {k: int(rng.integers(1, k)) for k in range(2, K + 1)}
    root = 1
    if relabel:
        perm = rng.permutation(K) + 1
        parent = {int(perm[c - 1]): int(perm[p - 1]) for c, p in parent.items()}
        root = int(perm[0])
    return build_drt(parent, root, K=K)
