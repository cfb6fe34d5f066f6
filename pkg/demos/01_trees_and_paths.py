"""Trees, their maximal paths, and recovering a tree from its path sets."""
import numpy as np

from treetopic.drt import build_drt, enumerate_paths, isomorphism, membership, random_drt, reconstruct_from_path_sets
from treetopic.errors import NotRealizableError

# a root with two branches of two leaves each
tree = build_drt({2: 1, 3: 1, 4: 2, 5: 2, 6: 3, 7: 3}, root=1)
table, size = enumerate_paths(tree)
print("paths:", table.paths)
print("size (I, J, K):", size.I, size.J, size.K)
print("membership:", membership(tree))

# only the unordered node sets of the paths are given; the tree comes back
sets = [set(p) for p in table.paths]
rebuilt = reconstruct_from_path_sets(sets)
print("rebuilt parents:", rebuilt.parent)

# collections of sets that no tree produces are rejected
try:
    reconstruct_from_path_sets([{1, 2, 4}, {1, 2, 3}, {1, 3}])
except NotRealizableError as exc:
    print("not realizable:", exc)

# random trees survive the round trip up to relabelling
rng = np.random.default_rng(0)
ok = sum(
    isomorphism(t, reconstruct_from_path_sets(enumerate_paths(t)[0].node_sets())) is not None
    for t in (random_drt(int(rng.integers(1, 13)), rng) for _ in range(200))
)
print(f"round trip: {ok}/200 isomorphic")
