import math
from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from lcl_lab.gadget import (EPSILON, ERROR, Pointer, ProverTrace, accepted_bad_outputs, bottleneck_report,
                            canonical_grid_labels, canonical_tree_labels, check_c_bad, check_c_grid, check_c_proof,
                            check_c_tree, check_pi, coverage, edge_tags, failure_near, half_tags,
                            label_family_instance, local_radius, moving_cut_bound, mutations, pairs, pi_instance,
                            pointer_cycles, prove_invalid, row_heads, solve_pi_bad, solve_pi_local)
from lcl_lab.graph import Graph, make_family_instance, make_grid, make_tree_like


def labeled(levels, top):
    inst = make_family_instance(levels, top)
    return inst, label_family_instance(inst)


def relabel_after_deletion(original: Graph, labels, reduced: Graph):
    return {(x, px): labels[x, original.port_to(x, reduced.ports[x][px][0])] for x, px in reduced.half_edges()}


# ---------------------------------------------------------------- structure checkers

def test_grid_recipe():
    s = make_grid(2, 2)
    labels = canonical_grid_labels(s)
    for v, p in s.graph.half_edges():
        (x, y), (x2, y2) = s.coords[v], s.coords[s.graph.ports[v][p][0]]
        expected = {(1, 0): "R", (-1, 0): "L", (0, 1): "U", (0, -1): "D"}[x2 - x, y2 - y]
        assert labels[v, p] == expected
    assert check_c_grid(s.graph, labels).ok


def test_flipped_vertical_half_edge_fails_c_at_both_ends():
    s = make_grid(2, 2)
    labels = canonical_grid_labels(s)
    a, b = s.index[0, 0], s.index[0, 1]
    labels[a, s.graph.port_to(a, b)] = "D"
    failures = check_c_grid(s.graph, labels).failures
    assert set(failures) == {a, b}
    assert "(c)" in failures[a] and "(c)" in failures[b]


def test_consistent_left_right_cycle_passes_local_checks():
    cycle = Graph(4)
    for v in range(4):
        cycle.add_edge(v, (v + 1) % 4)
    labels = {}
    for v in range(4):
        labels[v, cycle.port_to(v, (v + 1) % 4)] = "R"
        labels[v, cycle.port_to(v, (v - 1) % 4)] = "L"
    assert check_c_grid(cycle, labels).ok


def test_tree_like_canonical_labels_pass():
    for levels in range(1, 6):
        s = make_tree_like(levels)
        assert check_c_tree(s.graph, canonical_tree_labels(s)).ok


def test_deleting_a_horizontal_tree_edge_is_caught():
    s = make_tree_like(3)
    labels = canonical_tree_labels(s)
    horizontal = [eid for eid, (u, _, v, _) in enumerate(s.graph.edges) if s.coords[u][0] == s.coords[v][0]]
    assert horizontal
    for eid in horizontal:
        g = s.graph.without_edge(eid)
        failures = check_c_tree(g, relabel_after_deletion(s.graph, labels, g)).failures
        codes = {c for cs in failures.values() for c in cs}
        assert codes & {"(b)", "(d)", "(i)"}


@pytest.mark.parametrize("levels", range(2, 7))
@pytest.mark.parametrize("top", range(1, 6))
def test_generator_and_labeler_pass_the_proof_checker(levels, top):
    _, g = labeled(levels, top)
    assert check_c_proof(g).ok


def test_top_tree_internal_nodes_only_have_top_tree_edges():
    inst, g = labeled(3, 3)
    for v, (level, _) in inst.top_tree.items():
        if level < inst.top_levels - 1:
            assert all(edge_tags(g, v, p) == {"topTree"} for p in range(g.degree(v)))


def test_grid_only_node_fails_constraint_two():
    s = make_grid(2, 2)
    g = s.graph.copy()
    for (v, p), lab in canonical_grid_labels(s).items():
        g.inputs[v][p] = frozenset({("bottomGrid", lab)})
    failures = check_c_proof(g).failures
    assert set(failures) == set(g.nodes)
    assert all("2" in codes for codes in failures.values())


def test_bottom_grid_edge_retagged_as_side_grid_is_caught_nearby():
    _, g = labeled(3, 2)
    for u, pu, v, pv in g.edges:
        if "bottomGrid" not in half_tags(g, u, pu):
            continue
        h = g.copy()
        for x, px in ((u, pu), (v, pv)):
            h.inputs[x][px] = frozenset(("sideGrid" if t == "bottomGrid" else t, lab) for t, lab in pairs(g, x, px))
        failures = check_c_proof(h).failures
        assert failures
        near = set(h.bfs(u, 2)) | set(h.bfs(v, 2))
        assert any(x in near and any(c == "2" or c.startswith("1a") for c in codes)
                   for x, codes in failures.items())


# ---------------------------------------------------------------- invalidity proofs

def test_all_bottom_output_accepted_on_valid_instance():
    _, g = labeled(3, 2)
    outputs = {h: None for h in g.half_edges()}
    assert check_c_bad(g, outputs).ok


def test_mutual_pointers_fail_constraint_three():
    _, g = labeled(3, 2)
    u, pu, v, pv = next((u, pu, v, pv) for u, pu, v, pv in g.edges
                        if ("colTree", "R") in pairs(g, u, pu) and ("colTree", "L") in pairs(g, v, pv))
    outputs = {h: None for h in g.half_edges()}
    outputs[u, pu] = Pointer(1, "R", "colTree")
    outputs[v, pv] = Pointer(1, "L", "colTree")
    failures = check_c_bad(g, outputs).failures
    assert "3" in failures[u] and "3" in failures[v]


def test_error_label_needs_a_local_proof_failure():
    _, g = labeled(2, 1)
    outputs = {h: None for h in g.half_edges()}
    outputs[0, 0] = ERROR
    assert "1" in check_c_bad(g, outputs).failures[0]


def test_no_cheat_on_smallest_instance():
    _, g = labeled(2, 1)
    accepted = accepted_bad_outputs(g)
    assert accepted == [{h: None for h in g.half_edges()}]


def test_valid_instance_prover_outputs_nothing():
    _, g = labeled(3, 2)
    run = solve_pi_bad(g)
    assert all(x is None for x in run.outputs.values())


def deleted_edge_instance(levels=3, top=2, predicate=None):
    inst, g = labeled(levels, top)
    for eid, (u, pu, v, pv) in enumerate(g.edges):
        if predicate is None or predicate(inst, g, u, pu, v, pv):
            return inst, g.without_edge(eid)
    raise AssertionError("no edge matched")


def test_prover_on_deleted_edge_covers_every_node():
    _, g = deleted_edge_instance()
    run = solve_pi_bad(g)
    assert check_c_bad(g, run.outputs).ok
    assert coverage(g, run.outputs) == []
    assert pointer_cycles(g, run.outputs) == []
    assert run.rounds <= local_radius(g.n)


def test_top_tree_only_corruption_staging():
    def top_only(inst, g, u, pu, v, pv):
        return edge_tags(g, u, pu) == {"topTree"}

    _, g = deleted_edge_instance(predicate=top_only)
    trace = ProverTrace()
    outputs = prove_invalid(g, trace=trace)
    assert check_c_bad(g, outputs).ok and coverage(g, outputs) == []
    second = trace.nodes_at(2)
    assert second
    for v in second:
        pointers = [x for p in range(g.degree(v)) if isinstance(x := outputs[v, p], Pointer)]
        assert pointers and all(x.counter == 2 and x.tag == "colTree" for x in pointers)
    # counters never increase along a pointer
    for (v, p), x in outputs.items():
        if isinstance(x, Pointer):
            target = g.ports[v][p][0]
            assert trace.stage[target] <= trace.stage[v]


def test_mutations_are_detected_and_proved():
    inst, g = labeled(3, 2)
    for mutated, mutation in mutations(g, 20, seed=3):
        verdicts = check_c_proof(mutated)
        assert failure_near(mutated, verdicts, mutation)
        run = solve_pi_bad(mutated)
        assert check_c_bad(mutated, run.outputs).ok
        assert coverage(mutated, run.outputs) == []
        assert pointer_cycles(mutated, run.outputs) == []


# ---------------------------------------------------------------- combined problem

def row_values(inst, run):
    """Row value per grid row, or None when a row is not constant."""
    values = {}
    for v, (x, y) in inst.grid.items():
        values.setdefault(y, set()).update(run.outputs[v, p][1] for p in range(inst.graph.degree(v)))
    return [next(iter(s)) if len(s) == 1 else None for _, s in sorted(values.items())]


@pytest.mark.parametrize("bits", ["0110", "0000"])
def test_valid_instance_rows_copy_their_head(bits):
    inst, g = labeled(3, 2)
    assert len(row_heads(inst)) == 4
    pi = pi_instance(g, inst, bits)
    run = solve_pi_local(pi)
    assert not run.used_proof
    assert row_values(inst, run) == [int(b) for b in bits]
    assert check_pi(pi, run.outputs).ok


def test_invalid_instance_takes_the_proof_path():
    inst, g = labeled(3, 2)
    broken = g.without_edge(0)
    pi = pi_instance(broken, inst, "1010")
    run = solve_pi_local(pi)
    assert run.used_proof
    assert check_pi(pi, run.outputs).ok


def test_wrong_row_value_is_rejected():
    inst, g = labeled(3, 2)
    pi = pi_instance(g, inst, "0110")
    outputs = dict(solve_pi_local(pi).outputs)
    v = next(v for v, (x, y) in inst.grid.items() if x == 1 and y == 1)
    outputs[v, 0] = (None, 0)
    assert not check_pi(pi, outputs).ok


def test_row_bit_count_checked():
    inst, g = labeled(3, 2)
    with pytest.raises(ValueError):
        pi_instance(g, inst, "01")


def test_non_row_nodes_output_epsilon():
    inst, g = labeled(3, 2)
    run = solve_pi_local(pi_instance(g, inst, "0110"))
    for v in inst.top_tree:
        if v not in inst.grid:
            assert all(run.outputs[v, p] == (None, EPSILON) for p in range(g.degree(v)))


# ---------------------------------------------------------------- bottleneck

def test_bound_for_level_four_instance_with_64_bit_messages():
    inst = make_family_instance(4, 4)
    report = bottleneck_report(inst, 64)
    k = inst.width
    assert k == 8
    assert report.bound == Fraction(k, 2 * 4 * 64) == Fraction(1, 64)
    assert report.max_crossings <= 2 * inst.top_levels


def test_single_column_bound_is_trivial():
    assert moving_cut_bound(1, 3, 64) == Fraction(1, 384)
    assert bottleneck_report(make_family_instance(3, 3), 64).rounds_lower_bound == 1


def test_non_square_grid_rejected():
    inst = make_family_instance(3, 2)
    assert (inst.height, inst.width) == (4, 2)
    with pytest.raises(ValueError):
        bottleneck_report(inst, 64)


@settings(max_examples=50, deadline=None)
@given(k=st.integers(1, 10 ** 6), top=st.integers(1, 30), bits=st.integers(1, 4096))
def test_bound_is_monotone_in_k(k, top, bits):
    assert moving_cut_bound(k, top, bits) < moving_cut_bound(k + 1, top, bits)
    assert moving_cut_bound(k, top, bits) * 2 * top * bits == k


@settings(max_examples=30, deadline=None)
@given(levels=st.integers(2, 5), top=st.integers(1, 4), seed=st.integers(0, 10 ** 6))
def test_mutation_property(levels, top, seed):
    _, g = labeled(levels, top)
    ((mutated, mutation),) = mutations(g, 1, seed)
    verdicts = check_c_proof(mutated)
    if verdicts.ok:
        # a retag can land on an equivalent labelling only if the edge keeps every structure
        pytest.fail(f"undetected mutation {mutation}")
    assert failure_near(mutated, verdicts, mutation)


def test_local_radius_grows_logarithmically():
    assert local_radius(2) == 6
    assert local_radius(1024) == 2 * 10 + 4
    assert local_radius(1025) == 2 * math.ceil(math.log2(1025)) + 4
