import pytest
from hypothesis import assume, given, settings, strategies as st

from conftest import trees_up_to
from lcl_lab import sim
from lcl_lab.classes import EmptyClassError, FFunction, derive_f
from lcl_lab.graph import Graph, path_graph, random_tree, star_graph
from lcl_lab.lcl import brute_force_solve, check_node_edge
from lcl_lab.problems import LIBRARY, always_valid, get_problem, maximal_matching, two_coloring
from lcl_lab.solvers import compare_with_oracle, solve_diameter, solve_superlog


def colours_by_node(outcome):
    tree = outcome.graph
    return "".join(outcome.labeling[v, 0] for v in tree.nodes)


def test_p4_two_colouring_alternates():
    outcome = solve_diameter(two_coloring(), path_graph(4))
    assert outcome.solved
    assert colours_by_node(outcome) in ("ABAB", "BABA")


def test_maximal_matching_on_fifty_nodes():
    tree = random_tree(50, 3, 0)
    outcome = solve_diameter(maximal_matching(), tree)
    assert outcome.solved and check_node_edge(maximal_matching(), tree, outcome.labeling) == {}


def test_contrived_problem_unsolvable_on_p3_like_brute_force():
    problem = get_problem("contrived-unsolvable")
    outcome = solve_diameter(problem, path_graph(3))
    assert not outcome.solved and outcome.errors
    assert brute_force_solve(problem, path_graph(3)) is None


def test_cycle_rejected():
    g = Graph(3)
    for v in range(3):
        g.add_edge(v, (v + 1) % 3)
    with pytest.raises(ValueError):
        solve_diameter(two_coloring(), g)
    with pytest.raises(ValueError):
        solve_superlog(two_coloring(), g, 1, 2, FFunction(2))


def test_single_node_tree():
    outcome = solve_diameter(two_coloring(), Graph(1))
    assert outcome.solved and outcome.labeling == {}


@pytest.mark.parametrize("name", sorted(LIBRARY))
def test_diameter_mode_matches_oracle_on_small_trees(name):
    report = compare_with_oracle(get_problem(name, 6), trees_up_to(7, 6))
    assert report.instances == 25
    assert report.ok, (report.mismatches, report.invalid)


def test_diameter_rounds_are_linear_in_diameter():
    for seed in range(10):
        tree = random_tree(200, 3, seed)
        outcome = solve_diameter(maximal_matching(), tree)
        assert outcome.rounds <= 3 * tree.diameter() + 4


def test_diameter_mode_fits_congest():
    tree = random_tree(500, 3, 1)
    outcome = solve_diameter(maximal_matching(), tree, sim.CONGEST)
    assert all(v.passed for v in outcome.audits(sim.CONGEST))


def test_superlog_always_valid():
    tree = random_tree(300, 3, 4)
    outcome = solve_superlog(always_valid(), tree, 1, 3, FFunction(3))
    assert outcome.solved and check_node_edge(always_valid(), tree, outcome.labeling) == {}


def test_superlog_maximal_matching_under_congest():
    tree = random_tree(1000, 3, 2)
    outcome = solve_superlog(maximal_matching(), tree, 1, 4, FFunction(4), sim.CONGEST)
    assert check_node_edge(maximal_matching(), tree, outcome.labeling) == {}
    assert all(v.passed for v in outcome.audits(sim.CONGEST))


def test_superlog_reports_empty_class():
    problem = get_problem("contrived-unsolvable")
    with pytest.raises(EmptyClassError):
        solve_superlog(problem, star_graph(3), 1, 2, FFunction(2))


def test_superlog_with_derived_f_repairs_short_paths():
    problem = maximal_matching()
    tree = random_tree(54, 3, 0)
    f = derive_f(problem, 1, [tree], [1]).f
    outcome = solve_superlog(problem, tree, 1, 1, f)
    assert check_node_edge(problem, tree, outcome.labeling) == {}


@settings(max_examples=30, deadline=None)
@given(name=st.sampled_from(sorted(LIBRARY)), n=st.integers(1, 30), seed=st.integers(0, 10 ** 6))
def test_diameter_mode_solves_exactly_the_solvable_trees(name, n, seed):
    problem = get_problem(name)
    tree = random_tree(n, 3, seed)
    outcome = solve_diameter(problem, tree, seed=seed)
    assert outcome.solved == (brute_force_solve(problem, tree) is not None)
    if outcome.solved:
        assert check_node_edge(problem, tree, outcome.labeling) == {}


@settings(max_examples=25, deadline=None)
@given(name=st.sampled_from(["maximal-matching", "3-coloring", "sinkless-orientation", "always-valid"]),
       n=st.integers(1, 120), seed=st.integers(0, 10 ** 6), l=st.integers(2, 4))
def test_superlog_labelings_are_valid(name, n, seed, l):
    problem = get_problem(name)
    tree = random_tree(n, 3, seed)
    assume(brute_force_solve(problem, tree, max_edges=200) is not None)
    outcome = solve_superlog(problem, tree, 1, l, FFunction(l), seed=seed)
    assert check_node_edge(problem, tree, outcome.labeling) == {}
