from itertools import permutations

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oracles import barycentric_grid, brute_d_l2, grid_on_segment, hausdorff_by_faces, hull_distance_by_faces
from treetopic.drt import build_drt, enumerate_paths
from treetopic.errors import DegenerateError, DomainError
from treetopic.geometry import (
    HierarchyParams,
    Polytope,
    TopicMap,
    augmented_tree_hausdorff,
    check_a1,
    check_b1,
    d_l2,
    grassmann_angle,
    hausdorff_polytopes,
    minimal_matching_dist,
    polytope_diagnostics,
    project_points,
    project_simplex,
    project_to_polytope,
    union_hausdorff,
)
from treetopic.model import split_triangle_pair

E = np.eye(3)


def seeds():
    return st.integers(0, 2**32 - 1)


def test_project_simplex_optimality():
    rng = np.random.default_rng(0)
    Y = rng.normal(size=(200, 6)) * 2
    P = project_simplex(Y)
    assert np.allclose(P.sum(axis=1), 1) and P.min() >= 0
    # optimality: the residual y - p is constant on the support and not larger off it
    for y, p in zip(Y, P):
        r = y - p
        sup = p > 1e-12
        assert np.ptp(r[sup]) < 1e-10
        assert np.all(r[~sup] <= r[sup][0] + 1e-10)


def test_projection_of_vertex_and_interior_point():
    tri = Polytope(E)
    d, y = project_to_polytope(E[1], tri)
    assert d == pytest.approx(0, abs=1e-12) and np.allclose(y, E[1])
    x = np.array([0.2, 0.5, 0.3])
    d, y = project_to_polytope(x, tri)
    assert d == pytest.approx(0, abs=1e-12) and np.allclose(y, x)


def test_projection_onto_segment():
    seg = Polytope([E[0], E[1]])
    d, y = project_to_polytope(E[2], seg)
    grid = grid_on_segment(E[0], E[1], 10_001)
    g = np.linalg.norm(grid - E[2], axis=1)
    assert d == pytest.approx(np.sqrt(1.5), abs=1e-12)
    assert d == pytest.approx(g.min(), abs=1e-9)
    assert np.allclose(y, [0.5, 0.5, 0.0], atol=1e-12)


@given(seeds(), st.integers(2, 6), st.integers(3, 8))
@settings(max_examples=60, deadline=None)
def test_projection_matches_face_enumeration(seed, J, V):
    rng = np.random.default_rng(seed)
    P = rng.dirichlet(np.ones(V), size=J)
    X = rng.dirichlet(np.ones(V) * 0.5, size=20)
    d, Y, W = project_points(X, Polytope(P))
    assert np.allclose(d, hull_distance_by_faces(X, P), atol=1e-9)
    assert np.allclose(W @ P, Y) and W.min() >= 0 and np.allclose(W.sum(axis=1), 1)


@given(seeds())
@settings(max_examples=60, deadline=None)
def test_zero_distance_iff_inside(seed):
    rng = np.random.default_rng(seed)
    P = rng.dirichlet(np.ones(5), size=3)
    inside = rng.dirichlet(np.ones(3)) @ P
    outside = rng.dirichlet(np.ones(5))
    for x in (inside, outside):
        d, y, w = project_points(x[None], Polytope(P))
        is_in = hull_distance_by_faces(x[None], P)[0] < 1e-9
        if d[0] < 1e-9:
            assert np.allclose(y[0], x, atol=1e-8) and is_in
            assert w.min() >= -1e-10 and abs(w.sum() - 1) < 1e-12
        else:
            assert not is_in


def test_polytope_validation():
    with pytest.raises(DomainError):
        Polytope([[0.5, 0.6, 0.0]])
    with pytest.raises(DomainError):
        Polytope([E[0], E[0]])
    with pytest.raises(DomainError):
        TopicMap([E[0], E[1], E[0]])


def test_hausdorff_examples():
    a = Polytope([E[0], E[1]])
    b = Polytope([E[0], E[2]])
    assert hausdorff_polytopes(a, a) == pytest.approx(0, abs=1e-12)
    # brute force over dense grids on both segments
    ga, gb = grid_on_segment(E[0], E[1]), grid_on_segment(E[0], E[2])
    from scipy.spatial import cKDTree

    grid = max(cKDTree(gb).query(ga)[0].max(), cKDTree(ga).query(gb)[0].max())
    h = hausdorff_polytopes(a, b)
    assert h == pytest.approx(np.sqrt(1.5), abs=1e-12)
    assert h == pytest.approx(grid, abs=1e-4)

    x = np.array([0.2, 0.5, 0.3])
    pt = Polytope([x])
    tri = Polytope(E)
    expected = np.linalg.norm(E - x, axis=1).max()
    assert hausdorff_polytopes(pt, tri) == pytest.approx(expected, abs=1e-12)
    g = barycentric_grid(E, 60)
    assert expected == pytest.approx(np.linalg.norm(g - x, axis=1).max(), abs=1e-12)


@given(seeds(), st.integers(1, 4), st.integers(1, 4))
@settings(max_examples=60, deadline=None)
def test_hausdorff_matches_face_oracle(seed, ja, jb):
    rng = np.random.default_rng(seed)
    A = rng.dirichlet(np.ones(5), size=ja)
    B = rng.dirichlet(np.ones(5), size=jb)
    h = hausdorff_polytopes(Polytope(A), Polytope(B))
    assert h == pytest.approx(hausdorff_by_faces(A, B), abs=1e-9)
    assert h <= minimal_matching_dist(Polytope(A), Polytope(B)) + 1e-12


def test_minimal_matching_examples():
    a = Polytope([[1.0, 0.0]])
    b = Polytope([[0.0, 1.0]])
    assert minimal_matching_dist(a, b) == pytest.approx(np.sqrt(2))
    t1 = np.array([[0.6, 0.2, 0.2], [0.2, 0.6, 0.2], [0.2, 0.2, 0.6]])
    t2 = t1.copy()
    t2[2] = t2[2] + 0.01 * np.array([1.0, -1.0, 0.0]) / np.sqrt(2)
    assert minimal_matching_dist(Polytope(t1), Polytope(t2)) == pytest.approx(0.01, abs=1e-12)
    assert minimal_matching_dist(Polytope(t1), Polytope(t1)) == 0


def random_hierarchy(rng, drt, V=4):
    K = drt.K
    I = enumerate_paths(drt)[0].I
    return HierarchyParams(drt, TopicMap(rng.dirichlet(np.ones(V), size=K)), rng.dirichlet(np.ones(I)))


TREE_I3 = build_drt({2: 1, 3: 1, 4: 1, 5: 2, 6: 3, 7: 4}, root=1)


def test_d_h_plus_brute_force():
    rng = np.random.default_rng(7)
    for _ in range(20):
        wa, wb = random_hierarchy(rng, TREE_I3), random_hierarchy(rng, TREE_I3)
        Sa, Sb = wa.polytopes(), wb.polytopes()
        brute = min(
            sum(hausdorff_by_faces(Sa[i].vertices, Sb[s[i]].vertices) + abs(wa.pi[i] - wb.pi[s[i]]) for i in range(3))
            for s in permutations(range(3))
        )
        assert augmented_tree_hausdorff(wa, wb) == pytest.approx(brute, abs=1e-9)


def test_d_h_plus_zero_on_relabelling():
    rng = np.random.default_rng(3)
    wa = random_hierarchy(rng, TREE_I3)
    assert augmented_tree_hausdorff(wa, wa) == pytest.approx(0, abs=1e-12)
    # swap the subtrees under nodes 2 and 3 by relabelling nodes
    swap = {1: 1, 2: 3, 3: 2, 4: 4, 5: 6, 6: 5, 7: 7}
    drt_b = build_drt({swap[c]: swap[p] for c, p in TREE_I3.parent.items()}, root=1)
    topics_b = np.empty_like(wa.topic_map.topics)
    for v in TREE_I3.nodes:
        topics_b[swap[v] - 1] = wa.topic_map[v]
    pa = enumerate_paths(TREE_I3)[0].paths
    pb = enumerate_paths(drt_b)[0].paths
    pi_b = np.empty(3)
    for i, p in enumerate(pa):
        pi_b[pb.index(tuple(swap[v] for v in p))] = wa.pi[i]
    wb = HierarchyParams(drt_b, TopicMap(topics_b), pi_b)
    assert augmented_tree_hausdorff(wa, wb) == pytest.approx(0, abs=1e-12)


def test_d_h_plus_needs_same_leaf_count():
    rng = np.random.default_rng(0)
    small = build_drt({2: 1, 3: 1}, root=1)
    with pytest.raises(DomainError):
        augmented_tree_hausdorff(random_hierarchy(rng, TREE_I3), random_hierarchy(rng, small))


def test_d_l2_examples():
    rng = np.random.default_rng(1)
    drt1 = build_drt({2: 1}, root=1)
    T = rng.dirichlet(np.ones(4), size=2)
    assert d_l2(TopicMap(T), TopicMap(T[::-1]), drt1) == pytest.approx(0, abs=1e-12)
    assert d_l2(TopicMap(T), TopicMap(T), drt1) == 0
    drt2 = build_drt({2: 1, 3: 2, 4: 1, 5: 4}, root=1)
    two = build_drt({2: 1, 3: 1}, root=1)  # I=2, J=2
    for _ in range(20):
        A = rng.dirichlet(np.ones(4), size=3)
        B = rng.dirichlet(np.ones(4), size=3)
        paths = enumerate_paths(two)[0].paths
        brute = brute_d_l2([A[np.array(p) - 1] for p in paths], [B[np.array(p) - 1] for p in paths])
        assert d_l2(TopicMap(A), TopicMap(B), two) == pytest.approx(brute, abs=1e-12)
    A = rng.dirichlet(np.ones(4), size=5)
    assert d_l2(TopicMap(A), TopicMap(A), drt2) == 0


def test_d_l2_path_length_mismatch():
    a = build_drt({2: 1, 3: 1}, root=1)
    b = build_drt({2: 1, 3: 2}, root=1)
    T = np.random.default_rng(0).dirichlet(np.ones(3), size=3)
    with pytest.raises(DomainError):
        d_l2(TopicMap(T), TopicMap(T), a, b)


def test_union_hausdorff_identity_and_translation():
    tree = build_drt({2: 1, 3: 2, 4: 1, 5: 4}, root=1)
    base = np.array([[0.6, 0.2, 0.2], [0.2, 0.6, 0.2], [0.3, 0.5, 0.2], [0.2, 0.2, 0.6], [0.3, 0.2, 0.5]])
    est, slack = union_hausdorff(TopicMap(base), TopicMap(base), tree, samples=2000, seed=0)
    assert est == pytest.approx(0, abs=1e-8) and abs(slack) <= 1e-8

    # move the two nodes private to the second path by eps toward word 1
    eps = 0.05
    shift = eps * np.array([1.0, -0.5, -0.5]) / np.linalg.norm([1.0, -0.5, -0.5])
    moved = base.copy()
    moved[3:] += shift
    est, slack = union_hausdorff(TopicMap(base), TopicMap(moved), tree, samples=10_000, seed=1)
    # dense barycentric grids on every triangle give the reference value
    paths = enumerate_paths(tree)[0].paths
    ga = [barycentric_grid(base[np.array(p) - 1], 150) for p in paths]
    gb = [barycentric_grid(moved[np.array(p) - 1], 150) for p in paths]
    d_ab = max(np.min([hull_distance_by_faces(g, moved[np.array(p) - 1]) for p in paths], axis=0).max() for g in ga)
    d_ba = max(np.min([hull_distance_by_faces(g, base[np.array(p) - 1]) for p in paths], axis=0).max() for g in gb)
    ref = max(d_ab, d_ba)
    assert est <= eps + 1e-12
    assert est >= 0.9 * eps
    assert est == pytest.approx(ref, rel=0.02)
    assert 0 <= slack <= 0.1 * est


def test_union_hausdorff_below_d_l2():
    rng = np.random.default_rng(11)
    tree = build_drt({2: 1, 3: 2, 4: 1, 5: 4}, root=1)
    for _ in range(20):
        A = TopicMap(rng.dirichlet(np.ones(4), size=5))
        B = TopicMap(rng.dirichlet(np.ones(4), size=5))
        est, _ = union_hausdorff(A, B, tree, samples=300, seed=int(rng.integers(1 << 30)))
        assert est <= d_l2(A, B, tree) + 1e-9


def test_diagnostics_equilateral_triangle():
    s = np.sqrt(2)
    d = polytope_diagnostics(Polytope(E), [Polytope(E)])
    assert d.min_edge == pytest.approx(s)
    assert d.width == pytest.approx(s * np.sqrt(3) / 2)
    assert d.grassmann_angle_to_others == pytest.approx(0, abs=1e-12)
    assert d.min_projection_to_others == 0


def test_grassmann_orthogonal_segments():
    e = np.eye(4)
    a = Polytope([e[0], e[1]])
    b = Polytope([e[2], e[3]])
    assert grassmann_angle(a, b) == pytest.approx(np.pi / 2)


def test_diagnostics_degenerate():
    with pytest.raises(DegenerateError):
        polytope_diagnostics(Polytope([E[0]]), [])


def test_projection_to_others_skips_shared_vertices():
    a = Polytope([E[0], E[1]])
    b = Polytope([E[0], E[2]])
    d = polytope_diagnostics(a, [b])
    # only E[1] is private to a; its distance to segment [E0, E2] is sqrt(1.5)
    assert d.min_projection_to_others == pytest.approx(np.sqrt(1.5))


def test_assumption_checks():
    omega, omega2 = split_triangle_pair()
    assert all(check_a1(omega2.hierarchy))
    assert not check_b1(omega2.hierarchy)  # both triangles span the same plane
    omega_p, omega2_p = split_triangle_pair(0.05)
    assert check_b1(omega2_p.hierarchy)
    inner = np.array([[0.8, 0.1, 0.1], [0.1, 0.8, 0.1], [0.45, 0.45, 0.1]])
    hp = HierarchyParams(build_drt({2: 1, 3: 2}, root=1), TopicMap(inner), np.array([1.0]))
    assert check_a1(hp) == [False]
