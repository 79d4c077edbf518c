import pytest
from hypothesis import given, settings, strategies as st

from lcl_lab.gadget import canonical_grid_labels, canonical_tree_labels, check_c_grid, check_c_tree
from lcl_lab.graph import (Graph, GraphError, follow, from_edge_list_text, from_json, make_family_instance,
                           make_grid, make_tree_like, random_tree, to_edge_list, to_json)


@pytest.mark.parametrize("h,w,nodes,edges", [(1, 1, 1, 0), (2, 2, 4, 4), (3, 4, 12, 17)])
def test_grid_sizes(h, w, nodes, edges):
    s = make_grid(h, w)
    assert (s.graph.n, len(s.graph.edges)) == (nodes, edges)


def test_grid_adjacency_is_exactly_the_four_neighbourhood():
    s = make_grid(3, 4)
    for v, (x, y) in enumerate(s.coords):
        expected = {s.index[c] for c in [(x + 1, y), (x - 1, y), (x, y + 1), (x, y - 1)] if c in s.index}
        assert set(s.graph.neighbors(v)) == expected


def test_grid_rejects_empty_dimension():
    with pytest.raises(GraphError):
        make_grid(0, 3)


@pytest.mark.parametrize("levels,nodes,edges", [(1, 1, 0), (2, 3, 3), (3, 7, 10)])
def test_tree_like_sizes(levels, nodes, edges):
    s = make_tree_like(levels)
    assert (s.graph.n, len(s.graph.edges)) == (nodes, edges)


def test_tree_like_adjacency():
    s = make_tree_like(4)
    for v, (l, k) in enumerate(s.coords):
        expected = {s.index[c] for c in [(l - 1, k // 2), (l, k - 1), (l, k + 1), (l + 1, 2 * k), (l + 1, 2 * k + 1)]
                    if c in s.index}
        assert set(s.graph.neighbors(v)) == expected


@pytest.mark.parametrize("levels,top,nodes", [(2, 1, 3), (3, 2, 15)])
def test_family_instance_sizes(levels, top, nodes):
    inst = make_family_instance(levels, top)
    assert inst.graph.n == nodes


def test_family_instance_shared_edges_carry_several_tags():
    inst = make_family_instance(3, 2)
    assert any(len(t) > 1 for t in inst.tags)
    assert all(t for t in inst.tags)
    # every node belongs to some structure
    assert all(inst.node_tags(v) for v in inst.graph.nodes)


@pytest.mark.parametrize("levels,top", [(2, 1), (3, 2), (4, 3), (5, 2)])
def test_family_identifications_are_bijections(levels, top):
    inst = make_family_instance(levels, top)
    h, w = inst.height, inst.width
    assert len(inst.grid) == h * w
    leaves = {v for v, (_, l, _) in inst.col_tree.items() if l == levels - 1}
    assert leaves == set(inst.grid)
    roots = {v for v, (_, l, _) in inst.col_tree.items() if l == 0}
    top_leaves = {v for v, (l, _) in inst.top_tree.items() if l == top - 1}
    assert roots == top_leaves
    left_most = {v for v, (_, _, k) in inst.col_tree.items() if k == 0}
    assert left_most == set(inst.side)
    assert inst.graph.n == 2 ** (levels + top - 1) - 1


def test_family_rejects_small_parameters():
    with pytest.raises(GraphError):
        make_family_instance(1, 1)


def test_random_tree_single_node():
    g = random_tree(1, 3, 5)
    assert g.n == 1 and not g.edges


def test_random_tree_degree_two_is_a_path():
    g = random_tree(30, 2, 4)
    assert g.is_tree()
    assert sorted(g.degree(v) for v in g.nodes).count(1) == 2
    assert max(g.degree(v) for v in g.nodes) == 2


def test_random_tree_200_is_acyclic_and_bounded():
    g = random_tree(200, 3, 7)
    assert g.is_tree()
    assert max(g.degree(v) for v in g.nodes) <= 3


def test_random_tree_rejects_degree_below_two():
    with pytest.raises(GraphError):
        random_tree(5, 1, 0)


def test_random_tree_is_reproducible():
    assert random_tree(100, 3, 11) == random_tree(100, 3, 11)
    assert random_tree(100, 3, 11) != random_tree(100, 3, 12)


def test_follow_examples():
    s = make_grid(2, 2)
    labels = canonical_grid_labels(s)
    origin = s.index[0, 0]
    assert follow(s.graph, origin, [], labels) == origin
    assert follow(s.graph, origin, list("RULD"), labels) == origin
    assert follow(s.graph, origin, ["L"], labels) is None
    assert follow(s.graph, origin, ["R", "U"], labels) == s.index[1, 1]


def test_follow_is_undefined_when_not_unique():
    g = Graph(3)
    g.add_edge(0, 1)
    g.add_edge(0, 2)
    assert follow(g, 0, ["x"], lambda v, p: "x") is None


def test_structures_admit_checker_accepted_labelings():
    for h, w in [(1, 1), (2, 3), (4, 4)]:
        s = make_grid(h, w)
        assert check_c_grid(s.graph, canonical_grid_labels(s)).ok
    for levels in range(1, 6):
        s = make_tree_like(levels)
        assert check_c_tree(s.graph, canonical_tree_labels(s)).ok


def test_serialization_round_trips():
    g = random_tree(40, 3, 1)
    g.inputs[3][0] = frozenset({("colTree", "P"), ("sideGrid", "U")})
    g.inputs[5][0] = ("x", 1)
    assert from_json(to_json(g)) == g
    assert from_edge_list_text(to_edge_list(g)) == g


def test_without_edge_keeps_inputs():
    g = random_tree(10, 3, 2)
    g.inputs[0][0] = "marked"
    h = g.without_edge(len(g.edges) - 1)
    assert len(h.edges) == len(g.edges) - 1
    assert h.inputs[0][0] == "marked"


def test_degree_bound_is_enforced():
    g = Graph(4, max_degree=2)
    g.add_edge(0, 1)
    g.add_edge(0, 2)
    with pytest.raises(GraphError):
        g.add_edge(0, 3)


@settings(max_examples=60, deadline=None)
@given(n=st.integers(1, 120), degree=st.integers(2, 5), seed=st.integers(0, 10 ** 6))
def test_random_trees_are_port_symmetric_trees(n, degree, seed):
    g = random_tree(n, degree, seed)
    assert g.check_port_symmetry()
    assert g.is_tree()
    assert all(g.degree(v) <= degree for v in g.nodes)


@settings(max_examples=30, deadline=None)
@given(h=st.integers(1, 6), w=st.integers(1, 6))
def test_grid_port_symmetry_and_edge_count(h, w):
    g = make_grid(h, w).graph
    assert g.check_port_symmetry()
    assert len(g.edges) == h * (w - 1) + w * (h - 1)


@settings(max_examples=15, deadline=None)
@given(levels=st.integers(2, 5), top=st.integers(1, 4))
def test_family_port_symmetry(levels, top):
    assert make_family_instance(levels, top).graph.check_port_symmetry()
