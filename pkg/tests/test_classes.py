import itertools

import pytest
from hypothesis import assume, given, settings, strategies as st

from lcl_lab.classes import (Class, EmptyClassError, FFunction, Piece, assign_path, compress_g, derive_f,
                             exactly_solvable, fixed_index, fold, is_independent, make_shape, maximal_class,
                             node_piece, parity_spiders, path_class, path_relation, rake_g, spider,
                             solve_with_decomposition, trivial_f)
from lcl_lab.decomp import rake_compress
from lcl_lab.graph import Graph, random_tree
from lcl_lab.lcl import SearchRefused, brute_force_solve, check_node_edge
from lcl_lab.problems import LIBRARY, always_valid, get_problem, maximal_matching, two_coloring

NAMES = sorted(LIBRARY)


def test_isolated_white_leaf_allows_both_colours():
    cls = maximal_class(two_coloring(), node_piece("W", [], ["-"]))
    assert cls.marginal(0) == {"A", "B"}


def test_black_node_flips_the_colour():
    cls = maximal_class(two_coloring(), node_piece("B", [("-", {"A"})], ["-"]))
    assert cls.marginal(0) == {"B"}


def test_white_node_with_conflicting_children_has_empty_class():
    piece = node_piece("W", [("-", {"A"}), ("-", {"B"})], [])
    assert maximal_class(two_coloring(), piece).labelings == frozenset()


def test_maximal_class_guard():
    piece = node_piece("W", [("-", {"A", "B"})] * 2, ["-"])
    with pytest.raises(SearchRefused):
        maximal_class(two_coloring(), piece, guard=4)


def test_rake_g_leaf_in_maximal_matching():
    problem = maximal_matching()
    expected = maximal_class(problem, node_piece("W", [], ["-"])).marginal(0)
    assert rake_g(problem, "W", [], "-") == expected == {"M", "P"}


def test_rake_g_can_be_empty():
    assert rake_g(two_coloring(), "W", [("-", {"A"}), ("-", {"B"})], "-") == frozenset()


def path_shape(problem, x):
    return make_shape(problem, ["-"] * (2 * x), [[]] * x)


@pytest.mark.parametrize("x", range(1, 9))
def test_two_colouring_path_endpoints_follow_parity(x):
    problem = two_coloring()
    left, right = compress_g(problem, path_shape(problem, x), "A")
    # the cut fixes the colour of path node x // 2 (node 1 when x == 1)
    cut_node = max(1, x // 2)
    colour = lambda dist: "A" if dist % 2 == 0 else "B"  # noqa: E731
    assert left == {colour(cut_node - 1)}
    assert right == {colour(x - cut_node)}


def test_always_valid_path_keeps_everything():
    problem = always_valid()
    assert compress_g(problem, path_shape(problem, 5), "0") == ({"0", "1"}, {"0", "1"})


def test_independence_examples():
    assert is_independent(Class(2, frozenset({("A", "B")}), [0, 1]))
    assert is_independent(Class(2, frozenset(), [0, 1]))
    problem = two_coloring()
    full = Class(2, frozenset(path_relation(problem, path_shape(problem, 4))), [0, 1])
    assert full.labelings == {("A", "B"), ("B", "A")}
    assert not is_independent(full)


def test_fixed_index():
    assert [fixed_index(x) for x in range(1, 7)] == [0, 1, 1, 3, 3, 5]


def test_trivial_f_on_always_valid_is_accepted_at_once():
    result = derive_f(always_valid(), 1, [random_tree(20, 3, s) for s in range(5)])
    assert result.found and result.tried_l == [1] and result.evaluations == 1


def test_maximal_matching_f_found_quickly():
    trees = [random_tree(1 + (s * 7919) % 30, 3, s) for s in range(10)]
    result = derive_f(maximal_matching(), 1, trees, range(1, 5))
    assert result.found


def test_two_colouring_parity_spiders_defeat_the_search():
    trees, ids = parity_spiders(range(1, 3))
    result = derive_f(two_coloring(), "sqrt", trees, range(1, 3), ids=ids)
    assert not result.found
    assert result.reason == "no f found under search budget"


def test_spider_shape():
    g = spider([2, 3])
    assert g.n == 6 and g.is_tree() and g.degree(0) == 2


def test_ffunction_json_round_trip():
    problem = maximal_matching()
    f = FFunction(2)
    shape = path_shape(problem, 3)
    f.apply(problem, shape)
    g = FFunction.from_json(f.to_json())
    assert g.l == 2 and g.seen == f.seen


def test_empty_class_error_names_node_and_sublayer():
    tree = spider([1, 1, 1])
    problem = get_problem("contrived-unsolvable")
    deco = rake_compress(tree, tree.n, 1)
    with pytest.raises(EmptyClassError) as info:
        solve_with_decomposition(problem, tree, deco, None)
    assert info.value.node in tree.nodes
    assert "sublayer" in str(info.value)


# ---------------------------------------------------------------- properties

label_subsets = lambda sigma: st.sets(st.sampled_from(sigma))  # noqa: E731


@settings(max_examples=80, deadline=None)
@given(name=st.sampled_from(NAMES), data=st.data())
def test_rake_g_is_monotone(name, data):
    problem = get_problem(name)
    sigma = list(problem.sigma_out)
    k = data.draw(st.integers(0, 2))
    small = [data.draw(label_subsets(sigma)) for _ in range(k)]
    big = [s | data.draw(label_subsets(sigma)) for s in small]
    g_small = rake_g(problem, "W", [("-", s) for s in small], "-")
    g_big = rake_g(problem, "W", [("-", s) for s in big], "-")
    assert g_small <= g_big


@settings(max_examples=60, deadline=None)
@given(name=st.sampled_from(NAMES), x=st.integers(1, 6), data=st.data())
def test_compress_g_is_independent_and_completable(name, x, data):
    problem = get_problem(name)
    sigma = list(problem.sigma_out)
    incoming = [[("-", data.draw(st.sets(st.sampled_from(sigma), min_size=1)))]
                if data.draw(st.booleans()) else [] for _ in range(x)]
    shape = make_shape(problem, ["-"] * (2 * x), incoming)
    lam = data.draw(st.sampled_from(sigma))
    left, right = compress_g(problem, shape, lam)
    assert is_independent(path_class(problem, shape, lam))
    for a, b in itertools.product(left, right):
        assert assign_path(problem, shape, lam, a, b) is not None


def subtree_piece(tree: Graph, root: int, parent: int | None) -> tuple[Piece, dict]:
    """Black-white piece of root's subtree, plus the half-edge towards parent as outgoing edge."""
    below = {root}
    stack = [(root, parent)]
    order = []
    while stack:
        v, par = stack.pop()
        order.append((v, par))
        for u in tree.neighbors(v):
            if u != par:
                below.add(u)
                stack.append((u, v))
    nodes = sorted(below)
    pos = {v: k for k, v in enumerate(nodes)}
    g = Graph(len(nodes))
    colors = ["W"] * len(nodes)
    for u, _, v, _ in tree.edges:
        if u in below and v in below:
            b = g.add_node()
            colors.append("B")
            g.add_edge(pos[u], b)
            g.add_edge(pos[v], b)
    outs = []
    if parent is not None:
        stub = g.add_node()
        colors.append("X")
        outs.append(g.add_edge(pos[root], stub))
    return Piece(g, colors, ["-"] * len(g.edges), {}, outs), pos


def label_sets(problem, tree: Graph, root: int = 0) -> dict[tuple[int, int], frozenset]:
    """Label-set of every child's half towards its parent, computed bottom-up with rake_g."""
    parent = {root: None}
    order = [root]
    for v in order:
        for u in tree.neighbors(v):
            if u not in parent:
                parent[u] = v
                order.append(u)
    sets = {}
    for v in reversed(order):
        kids = [u for u in tree.neighbors(v) if parent.get(u) == v]
        incoming = [("-", fold(problem, "-", sets[u, v], "-")) for u in kids]
        if parent[v] is not None:
            sets[v, parent[v]] = rake_g(problem, "W", incoming, "-")
    return sets


@settings(max_examples=60, deadline=None)
@given(name=st.sampled_from(NAMES), n=st.integers(2, 6), seed=st.integers(0, 10 ** 6), data=st.data())
def test_label_sets_are_exactly_the_completable_labels(name, n, seed, data):
    """Maximality and soundness against exhaustive enumeration of the subtree."""
    problem = get_problem(name)
    tree = random_tree(n, 3, seed)
    sets = label_sets(problem, tree)
    (v, par), expected = data.draw(st.sampled_from(sorted(sets.items(), key=repr)))
    piece, _ = subtree_piece(tree, v, par)
    assume(len(piece.graph.edges) <= 12)
    assert maximal_class(problem, piece).marginal(0) == expected


@settings(max_examples=60, deadline=None)
@given(name=st.sampled_from(NAMES), n=st.integers(2, 25), seed=st.integers(0, 10 ** 6))
def test_valid_labelings_stay_inside_label_sets(name, n, seed):
    problem = get_problem(name)
    tree = random_tree(n, 3, seed)
    phi = brute_force_solve(problem, tree)
    assume(phi is not None)
    for (v, par), allowed in label_sets(problem, tree).items():
        assert phi[v, tree.port_to(v, par)] in allowed


@settings(max_examples=40, deadline=None)
@given(name=st.sampled_from(NAMES), n=st.integers(1, 30), seed=st.integers(0, 10 ** 6))
def test_rake_only_pipeline_matches_brute_force(name, n, seed):
    problem = get_problem(name)
    tree = random_tree(n, 3, seed)
    assert exactly_solvable(problem, tree) == (brute_force_solve(problem, tree) is not None)


@settings(max_examples=40, deadline=None)
@given(n=st.integers(1, 60), seed=st.integers(0, 10 ** 6), l=st.integers(2, 4))
def test_sequential_pipeline_with_compress_is_valid(n, seed, l):
    problem = maximal_matching()
    tree = random_tree(n, 3, seed)
    deco = rake_compress(tree, 1, l)
    labeling = solve_with_decomposition(problem, tree, deco, FFunction(l))
    assert check_node_edge(problem, tree, labeling) == {}


def test_derive_f_repairs_greedy_choice_on_short_paths():
    problem = maximal_matching()
    tree = random_tree(54, 3, 0)
    deco = rake_compress(tree, 1, 1)
    with pytest.raises(EmptyClassError):
        solve_with_decomposition(problem, tree, deco, FFunction(1))
    result = derive_f(problem, 1, [tree], [1])
    assert result.found and len(result.f.overrides) == 1
    assert check_node_edge(problem, tree, solve_with_decomposition(problem, tree, deco, result.f)) == {}


def test_trivial_f_uses_first_rule():
    assert trivial_f(3).rule == "first" and trivial_f(3).l == 3
