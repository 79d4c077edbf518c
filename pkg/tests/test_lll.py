import itertools
import math
import random
from fractions import Fraction

import networkx as nx
import pytest
from hypothesis import given, settings, strategies as st

from lcl_lab.graph import Graph, path_graph, random_tree, star_graph
from lcl_lab.lcl import SearchRefused
from lcl_lab.lll import (STAR, ComponentInstance, CriterionFailed, and_fail, check_completion,
                         component_instance, criterion_report, disjointness_violations, enumerate_failure_rate,
                         extract_components, local_failure_rate, never_fail, pi_prime_violations, preshatter,
                         sampled_failure_rate, simulate_algorithm, single_bit_fail, sinkless_toy, solve_component,
                         solve_pipeline, threshold_fail, undecided_nodes)


def test_fully_set_bits_give_zero_or_one():
    g = random_tree(12, 3, 1)
    alg = threshold_fail(h0=3)
    for seed in range(5):
        bits = [(seed * 7 + v * 3) % 8 for v in g.nodes]
        for v in g.nodes:
            assert local_failure_rate(alg, g, v, bits) in (0, 1)
            assert enumerate_failure_rate(alg, g, v, bits) == local_failure_rate(alg, g, v, bits)


def test_single_bit_fail_unset_is_one_half():
    g = path_graph(2)
    alg = single_bit_fail()
    assert local_failure_rate(alg, g, 0, [None, None]) == Fraction(1, 2)
    assert enumerate_failure_rate(alg, g, 0, [None, 1]) == Fraction(1, 2)
    assert local_failure_rate(alg, g, 0, [1, None]) == 1


def sink_probability_by_edge_coins(g: Graph, v: int, bits) -> Fraction:
    """Second enumeration path: a sink needs every incident edge oriented towards v."""
    ball = sorted(g.bfs(v, 1))
    unset = [u for u in ball if bits[u] is None]
    total = sinks = 0
    for values in itertools.product(range(8), repeat=len(unset)):
        full = dict(zip(unset, values))
        full.update({u: bits[u] for u in ball if bits[u] is not None})
        incoming = 0
        for p, (u, q) in enumerate(g.ports[v]):
            coin = ((full[v] >> p) ^ (full[u] >> q)) & 1
            # coin 1 means the smaller index endpoint points outward
            points_out_of_v = coin == 1 if v < u else coin == 0
            incoming += not points_out_of_v
        total += 1
        sinks += incoming == g.degree(v) >= 3
    return Fraction(sinks, total)


@pytest.mark.parametrize("bits", [[None] * 4, [5, None, None, None], [None, 1, 2, None], [6, 1, 2, 3]])
def test_sinkless_toy_matches_edge_coin_enumeration(bits):
    g = star_graph(3)
    alg = sinkless_toy()
    assert local_failure_rate(alg, g, 0, bits) == sink_probability_by_edge_coins(g, 0, bits)
    if bits == [None] * 4:
        assert local_failure_rate(alg, g, 0, bits) == Fraction(1, 8)


def test_enumeration_guard_refuses():
    g = star_graph(3)
    with pytest.raises(SearchRefused):
        enumerate_failure_rate(sinkless_toy(), g, 0, [None] * 4, guard=100)


@pytest.mark.parametrize("alg,bits", [(sinkless_toy(), [None, 3, None, None]),
                                      (and_fail(), [None, 1, None, None]),
                                      (threshold_fail(h0=3, threshold=3), [None, None, 4, None])])
def test_exact_and_sampled_agree_within_three_sigma(alg, bits):
    g = star_graph(3)
    exact = float(enumerate_failure_rate(alg, g, 0, bits))
    samples = 20_000
    est = sampled_failure_rate(alg, g, 0, bits, samples, seed=3)
    sigma = math.sqrt(exact * (1 - exact) / samples)
    assert abs(est - exact) <= 3 * sigma + 1e-12
    assert isinstance(est, float)


def test_never_fail_freezes_nothing():
    g = random_tree(200, 3, 0)
    result = preshatter(never_fail(), g, 0.01, seed=1)
    assert not any(result.frozen)
    assert result.unset == []


def test_frozen_fraction_matches_enumerated_probability():
    """threshold-fail with h0 = 2 fails w.p. 1/4, just below x = 0.3."""
    g = path_graph(3)
    alg = threshold_fail(h0=2, threshold=1)
    colours = [0, 1, 2]
    exact = [0, 0, 0]
    for values in itertools.product(range(4), repeat=3):
        result = preshatter(alg, g, 0.3, 0, sampler=lambda v: values[v], colours=colours)
        for v in g.nodes:
            exact[v] += result.frozen[v]
    exact = [Fraction(k, 64) for k in exact]
    assert exact == [Fraction(7, 16), Fraction(37, 64), Fraction(21, 64)]
    runs = 3000
    counts = [0, 0, 0]
    for seed in range(runs):
        result = preshatter(alg, g, 0.3, seed, colours=colours)
        for v in g.nodes:
            counts[v] += result.frozen[v]
    for v in g.nodes:
        p = float(exact[v])
        assert abs(counts[v] / runs - p) <= 3 * math.sqrt(p * (1 - p) / runs)


def seeded_draw(seed: int, h0: int):
    return lambda v: random.Random(f"{seed}:bits:{v}").getrandbits(h0)


def test_preshattering_decisions_are_local():
    g = path_graph(300)
    alg = threshold_fail(h0=3, threshold=2)
    colours = [v % 17 for v in g.nodes]
    draw = seeded_draw(5, alg.h0)
    base = preshatter(alg, g, 0.3, 5, colours=colours)
    assert preshatter(alg, g, 0.3, 5, colours=colours, sampler=draw).bits == base.bits
    far_changed = preshatter(alg, g, 0.3, 5, colours=colours,
                             sampler=lambda v: draw(v) if v < 200 else (v * 13 + 1) % 8)
    assert far_changed.bits != base.bits
    for v in range(50):
        assert (far_changed.bits[v], far_changed.frozen[v]) == (base.bits[v], base.frozen[v])


def test_no_unset_strings_means_no_components():
    g = random_tree(50, 3, 2)
    assert extract_components(g, list(range(50)), 1, 0) == []


def test_single_unset_node_rings_match_bfs_distances():
    g = random_tree(80, 3, 6)
    centre = 17
    bits = [0] * g.n
    bits[centre] = None
    t0, r = 1, 1
    radius = t0 + r
    (comp,) = extract_components(g, bits, t0, r)
    nxg = nx.Graph([(u, v) for u, _, v, _ in g.edges])
    dist = nx.single_source_shortest_path_length(nxg, centre)
    ring = lambda lo, hi: {v for v, d in dist.items() if lo < d <= hi}  # noqa: E731
    assert comp.u_in == {centre}
    assert comp.u_out == ring(0, radius)
    assert comp.d_in == ring(radius, 2 * radius)
    assert comp.d_out == ring(2 * radius, 3 * radius)


@settings(max_examples=40, deadline=None)
@given(n=st.integers(1, 150), seed=st.integers(0, 10 ** 6), data=st.data())
def test_components_are_disjoint_and_rings_decided(n, seed, data):
    g = random_tree(n, 3, seed)
    unset = data.draw(st.sets(st.integers(0, n - 1), max_size=6))
    bits = [None if v in unset else 0 for v in g.nodes]
    comps = extract_components(g, bits, 1, 0)
    assert disjointness_violations(comps) == []
    undecided = undecided_nodes(g, bits, 1)
    for comp in comps:
        assert not (comp.d_in | comp.d_out) & undecided
    assert set().union(*(c.events for c in comps)) == undecided


def test_empty_component_gives_empty_output():
    assert solve_component(never_fail(), ComponentInstance(Graph(0), [], []), 0.01) == []


def test_adversarial_failing_view_may_output_wildcard():
    alg = and_fail()
    inst = ComponentInstance(path_graph(3), [0, 1, 2], [1, 1, None])
    x = Fraction(1, 100)
    out = solve_component(alg, inst, x)
    assert out[0] == STAR
    assert check_completion(alg, inst, out, x) == {}


def test_checker_rejects_unjustified_wildcard_and_missing_echo():
    alg = and_fail()
    inst = ComponentInstance(path_graph(3), [0, 1, 2], [0, 0, None])
    x = Fraction(1, 100)
    assert "wildcard" in check_completion(alg, inst, [STAR, 0, 0], x)[0]
    assert "echo" in check_completion(alg, inst, [1, 0, 0], x)[0]
    assert check_completion(alg, inst, [0, 0, 0], x) == {}


def test_component_criterion_refusal_reports_value():
    inst = ComponentInstance(path_graph(3), [0, 1, 2], [None] * 3)
    with pytest.raises(CriterionFailed) as info:
        solve_component(and_fail(), inst, 0.5)
    assert info.value.what == "component"
    assert info.value.value == pytest.approx(math.e * 0.5 * 2 ** 4)


def test_preshattered_components_contain_no_wildcards():
    alg = threshold_fail()
    x = 2 ** -8
    seen = 0
    for seed in range(20):
        g = random_tree(600, 3, seed)
        pre = preshatter(alg, g, x, seed)
        for comp in extract_components(g, pre.bits, alg.t0, alg.problem.radius):
            inst = component_instance(g, comp, pre.bits)
            out = solve_component(alg, inst, x)
            inside = comp.u_in | comp.u_out | comp.d_in
            assert all(out[i] != STAR for i, v in enumerate(inst.original) if v in inside)
            assert check_completion(alg, inst, out, x) == {}
            seen += 1
    assert seen > 0


def test_never_fail_pipeline_is_direct_simulation():
    g = random_tree(100, 3, 3)
    run = solve_pipeline(never_fail(), g, seed=2, x=0.01)
    assert run.valid and run.components == 0
    assert run.outputs == simulate_algorithm(never_fail(), g, run.bits).outputs


def test_lll_gate_refuses_and_fail_on_paths():
    with pytest.raises(CriterionFailed) as info:
        solve_pipeline(and_fail(), path_graph(30), seed=0, x=0.001)
    assert info.value.what == "lll"


def test_strict_mode_enforces_exponent_gate():
    g = random_tree(100, 3, 0)
    assert not criterion_report(threshold_fail(), g, 2 ** -8).exponent_ok
    with pytest.raises(CriterionFailed) as info:
        solve_pipeline(threshold_fail(), g, seed=0, x=2 ** -8, strict=True)
    assert info.value.what == "exponent"


def test_threshold_fail_thousand_nodes_hundred_seeds():
    alg = threshold_fail()
    g = random_tree(1000, 3, 0)
    report = criterion_report(alg, g, 2 ** -8)
    for seed in range(100):
        run = solve_pipeline(alg, g, seed, x=2 ** -8, report=report)
        assert run.valid, run.summary()
        assert run.disjoint and run.wildcards_inside == 0
        assert pi_prime_violations(alg, g, run.bits) == []
