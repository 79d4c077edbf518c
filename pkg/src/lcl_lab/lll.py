"""Turning a constant-round randomized algorithm into a deterministic-completion pipeline.

Each node v holds a string R(v) of h0 random bits, stored as an int.  The bad
event E_v happens when running the algorithm with those bits makes the base
problem fail at v; it depends on every string within distance t0 + r.

Pipeline: preshatter (set most strings, freeze risky ones), extract the small
components of undecided events, fill the unset strings of each component by
deterministic search, recombine, and run the algorithm once more.
"""

from __future__ import annotations

import itertools
import math
import random
from collections import deque
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Mapping, Sequence

from .graph import Graph
from .lcl import SearchRefused
from .sim import LOCAL, assign_random_ids, has_collision, run

STAR = "*"


# ---------------------------------------------------------------- base problems and toy algorithms

@dataclass(frozen=True)
class LocalProblem:
    """An LCL given by a per-node predicate over outputs within `radius`."""
    name: str
    radius: int
    violated: Callable[[Graph, int, Mapping[int, object]], bool]


@dataclass(frozen=True)
class ConstAlg:
    """A t0-round randomized algorithm using h0 bits per node, declared for n0 nodes.

    `decide(graph, v, bits)` may only read bits of nodes within t0 of v.
    `exact_failure(graph, v, bits)` is an optional closed form for the
    failure probability given a partial assignment (None marks unset).
    """
    name: str
    n0: int
    t0: int
    h0: int
    problem: LocalProblem
    decide: Callable[[Graph, int, Mapping[int, int]], object]
    exact_failure: Callable[[Graph, int, Sequence[int | None]], Fraction] | None = None

    @property
    def radius(self) -> int:
        return self.t0 + self.problem.radius


def _never_fails(graph, v, outputs):
    return False


def _is_fail(graph, v, outputs):
    return outputs[v] == "fail"


NEVER_FAIL_PROBLEM = LocalProblem("trivial", 0, _never_fails)
NO_FAIL_PROBLEM = LocalProblem("no-fail-label", 0, _is_fail)


def never_fail(n0: int = 2 ** 10) -> ConstAlg:
    return ConstAlg("never-fail", n0, 0, 1, NEVER_FAIL_PROBLEM, lambda g, v, bits: "ok",
                    lambda g, v, bits: Fraction(0))


def single_bit_fail(h0: int = 1, n0: int = 2) -> ConstAlg:
    """Fails exactly when the node's lowest bit is 1."""
    def decide(g, v, bits):
        return "fail" if bits[v] & 1 else "ok"

    def exact(g, v, bits):
        b = bits[v]
        return Fraction(1, 2) if b is None else Fraction(b & 1)

    return ConstAlg("single-bit-fail", n0, 0, h0, NO_FAIL_PROBLEM, decide, exact)


def threshold_fail(h0: int = 10, threshold: int = 1, n0: int | None = None) -> ConstAlg:
    """XOR of the closed neighbourhood's strings; fails when the result is below `threshold`.

    Per-node failure probability is threshold / 2**h0.
    """
    def decide(g, v, bits):
        s = bits[v]
        for u, _ in g.ports[v]:
            s ^= bits[u]
        return "fail" if s < threshold else "ok"

    def exact(g, v, bits):
        ball = [v] + [u for u, _ in g.ports[v]]
        if any(bits[u] is None for u in ball):
            return Fraction(threshold, 2 ** h0)
        return Fraction(int(decide(g, v, bits) == "fail"))

    declared = n0 if n0 is not None else 2 ** h0 // threshold
    return ConstAlg("threshold-fail", declared, 1, h0, NO_FAIL_PROBLEM, decide, exact)


def and_fail(n0: int = 4) -> ConstAlg:
    """One bit per node; fails when every node of the closed neighbourhood drew a 1."""
    def decide(g, v, bits):
        return "fail" if all(bits[u] for u in [v] + [w for w, _ in g.ports[v]]) else "ok"

    def exact(g, v, bits):
        ball = [v] + [u for u, _ in g.ports[v]]
        if any(bits[u] == 0 for u in ball):
            return Fraction(0)
        return Fraction(1, 2 ** sum(bits[u] is None for u in ball))

    return ConstAlg("and-fail", n0, 1, 1, NO_FAIL_PROBLEM, decide, exact)


def _sinkless_violated(g, v, outputs):
    return g.degree(v) >= 3 and not any(outputs[v])


SINKLESS_PROBLEM = LocalProblem("sinkless-orientation", 0, _sinkless_violated)


def sinkless_toy(n0: int = 8) -> ConstAlg:
    """One bit per port; edge {u, v} points away from the endpoint whose bit XOR wins.

    Output at v: tuple over ports, True for outgoing.  Ids are node indices.
    """
    def decide(g, v, bits):
        out = []
        for p, (u, q) in enumerate(g.ports[v]):
            coin = (bits[v] >> p & 1) ^ (bits[u] >> q & 1)
            out.append(bool(coin) == (v < u))
        return tuple(out)

    return ConstAlg("sinkless-toy", n0, 1, 3, SINKLESS_PROBLEM, decide)


TOY_ALGORITHMS = {
    "never-fail": never_fail,
    "single-bit-fail": single_bit_fail,
    "threshold-fail": threshold_fail,
    "and-fail": and_fail,
    "sinkless-toy": sinkless_toy,
}


# ---------------------------------------------------------------- local failure probability

def _ball(graph: Graph, v: int, radius: int) -> list[int]:
    return sorted(graph.bfs(v, radius))


def event_fails(alg: ConstAlg, graph: Graph, v: int, bits: Mapping[int, int]) -> bool:
    outputs = {u: alg.decide(graph, u, bits) for u in graph.bfs(v, alg.problem.radius)}
    return alg.problem.violated(graph, v, outputs)


def enumerate_failure_rate(alg: ConstAlg, graph: Graph, v: int, bits: Sequence[int | None],
                           guard: int = 1 << 20) -> Fraction:
    """Exact probability by enumerating every completion of the unset strings near v."""
    ball = _ball(graph, v, alg.radius)
    unset = [u for u in ball if bits[u] is None]
    combos = (2 ** alg.h0) ** len(unset)
    if combos > guard:
        raise SearchRefused(f"{combos} completions exceed guard {guard}")
    view = {u: bits[u] for u in ball}
    bad = 0
    for values in itertools.product(range(2 ** alg.h0), repeat=len(unset)):
        view.update(zip(unset, values))
        bad += event_fails(alg, graph, v, view)
    return Fraction(bad, combos)


def local_failure_rate(alg: ConstAlg, graph: Graph, v: int, bits: Sequence[int | None],
                       guard: int = 1 << 20) -> Fraction:
    """Pr[E_v] with unset strings uniform; closed form when the algorithm has one."""
    if alg.exact_failure is not None:
        return alg.exact_failure(graph, v, bits)
    return enumerate_failure_rate(alg, graph, v, bits, guard)


def sampled_failure_rate(alg: ConstAlg, graph: Graph, v: int, bits: Sequence[int | None],
                         samples: int, seed: int = 0) -> float:
    """Monte Carlo estimate; flagged as an estimate by its float type."""
    rng = random.Random(seed)
    ball = _ball(graph, v, alg.radius)
    bad = 0
    for _ in range(samples):
        view = {u: bits[u] if bits[u] is not None else rng.getrandbits(alg.h0) for u in ball}
        bad += event_fails(alg, graph, v, view)
    return bad / samples


# ---------------------------------------------------------------- dependency graph and gates

def dependency_lists(graph: Graph, radius: int) -> list[list[int]]:
    """For each node, every other node within `radius` hops."""
    return [[u for u in graph.bfs(v, radius) if u != v] for v in graph.nodes]


def dependency_degree(graph: Graph, alg: ConstAlg) -> int:
    return max((len(x) for x in dependency_lists(graph, 2 * alg.radius)), default=0)


@dataclass
class CriterionReport:
    p: float
    delta_h: int
    max_degree: int
    x: float
    c: int
    lll_value: float          # e * p * delta_h^2
    exponent_log10: float     # log10 of (1/n0) * (delta_h * e)^(26 + 2c)
    component_value: float    # e * x * max_degree^(4 (t0 + r))

    @property
    def lll_ok(self) -> bool:
        return self.lll_value < 1

    @property
    def exponent_ok(self) -> bool:
        return self.exponent_log10 < 0

    @property
    def component_ok(self) -> bool:
        return self.component_value < 1

    def as_dict(self) -> dict:
        d = {k: getattr(self, k) for k in self.__dataclass_fields__}
        d.update(lll_ok=self.lll_ok, exponent_ok=self.exponent_ok, component_ok=self.component_ok)
        return d


def criterion_report(alg: ConstAlg, graph: Graph, x: float, c: int = 1) -> CriterionReport:
    p = max((float(local_failure_rate(alg, graph, v, [None] * graph.n)) for v in graph.nodes), default=0.0)
    dh = dependency_degree(graph, alg)
    delta = max((graph.degree(v) for v in graph.nodes), default=0)
    expo = -math.log10(alg.n0) + (26 + 2 * c) * math.log10(max(dh, 1) * math.e)
    return CriterionReport(p, dh, delta, x, c, math.e * p * dh ** 2, expo,
                           math.e * x * delta ** (4 * alg.radius))


class CriterionFailed(RuntimeError):
    def __init__(self, what: str, value: float):
        self.what = what
        self.value = value
        super().__init__(f"{what} criterion fails: value {value:.4g}")


# ---------------------------------------------------------------- preshattering

def conflict_coloring(graph: Graph, radius: int, palette: int, seed: int,
                      max_iterations: int = 10_000) -> tuple[list[int], int]:
    """Colour so nodes within `radius` hops differ, by synchronous random trials.

    Each iteration every uncoloured node proposes a free colour and keeps it
    unless a conflicting node proposed the same one.  Returns (colours, iterations).
    """
    conflicts = dependency_lists(graph, radius)
    if any(len(c) >= palette for c in conflicts):
        raise ValueError("palette too small for the conflict degree")
    rngs = [random.Random(f"{seed}:colour:{v}") for v in graph.nodes]
    colour: list[int | None] = [None] * graph.n
    pending = set(graph.nodes)
    it = 0
    while pending:
        it += 1
        if it > max_iterations:
            raise RuntimeError("colouring did not converge")
        proposal = {}
        for v in sorted(pending):
            taken = {colour[u] for u in conflicts[v] if colour[u] is not None}
            free = [k for k in range(palette) if k not in taken]
            proposal[v] = free[rngs[v].randrange(len(free))]
        for v, k in proposal.items():
            if all(proposal.get(u) != k for u in conflicts[v]):
                colour[v] = k
        pending = {v for v in pending if colour[v] is None}
    return colour, it


def coloring_program(radius: int, palette: int, seed: int):
    """The same trial colouring as a message-passing program (LOCAL, flooding proposals).

    Each iteration spends `radius` rounds relaying (id, colour, final) triples.
    """
    def program(ctx):
        rng = random.Random(f"{seed}:colour:{ctx.id}")
        known_final: dict[int, int] = {}
        mine = None
        while True:
            free = [k for k in range(palette) if k not in known_final.values()]
            proposal = mine if mine is not None else free[rng.randrange(len(free))]
            seen = {ctx.id: (proposal, mine is not None)}
            frontier = dict(seen)
            for _ in range(radius):
                inbox = yield {p: tuple(sorted((i, c, f) for i, (c, f) in frontier.items()))
                               for p in range(ctx.degree)}
                frontier = {}
                for msg in inbox.values():
                    for i, c, f in msg:
                        if i not in seen:
                            seen[i] = (c, f)
                            frontier[i] = (c, f)
            for i, (c, f) in seen.items():
                if f and i != ctx.id:
                    known_final[i] = c
            if mine is not None:
                if all(f for c, f in seen.values()):
                    return mine
                continue
            if all(c != proposal for i, (c, f) in seen.items() if i != ctx.id):
                mine = proposal
    return program


@dataclass
class PreshatterResult:
    bits: list[int | None]
    frozen: list[bool]
    colours: list[int]
    palette: int
    colouring_iterations: int

    @property
    def unset(self) -> list[int]:
        return [v for v, b in enumerate(self.bits) if b is None]

    def rounds(self, alg: ConstAlg) -> int:
        """Simulated rounds: colouring trials plus one sweep per colour class."""
        hop = 2 * alg.radius
        return 2 * hop * self.colouring_iterations + self.palette * 3 * alg.radius


def preshatter(alg: ConstAlg, graph: Graph, x: float, seed: int,
               sampler: Callable[[int], int] | None = None,
               colours: Sequence[int] | None = None) -> PreshatterResult:
    """Sample strings colour class by colour class, unsetting any that pushes a nearby event to >= x.

    `sampler(v)` overrides the per-node bit source (used for exact enumeration).
    """
    n = graph.n
    dep = dependency_lists(graph, 2 * alg.radius)
    delta_h = max((len(d) for d in dep), default=0)
    palette = delta_h ** 2 + 1
    if colours is None:
        colours, iterations = conflict_coloring(graph, 4 * alg.radius, palette, seed)
    else:
        iterations = 0
    if sampler is None:
        rngs = {}

        def sampler(v):
            if v not in rngs:
                rngs[v] = random.Random(f"{seed}:bits:{v}")
            return rngs[v].getrandbits(alg.h0)

    vbl = [_ball(graph, v, alg.radius) for v in graph.nodes]
    bits: list[int | None] = [None] * n
    frozen = [False] * n
    x = Fraction(x).limit_denominator(1 << 40) if not isinstance(x, Fraction) else x
    by_class: dict[int, list[int]] = {}
    for v in graph.nodes:
        by_class.setdefault(colours[v], []).append(v)
    for k in sorted(by_class):
        movers = [v for v in by_class[k] if not frozen[v]]
        for v in movers:
            bits[v] = sampler(v)
        # all checks see the state right after the class sampled, as in a parallel round
        risky = {v: [u for u in [v] + dep[v] if local_failure_rate(alg, graph, u, bits) >= x]
                 for v in movers}
        for v, events in risky.items():
            if events:
                bits[v] = None
                for u in events:
                    for w in vbl[u]:
                        frozen[w] = True
    return PreshatterResult(bits, frozen, list(colours), palette, iterations)


# ---------------------------------------------------------------- components

@dataclass
class ComponentSets:
    u_in: set[int]
    u_out: set[int]
    d_in: set[int]
    d_out: set[int]

    @property
    def events(self) -> set[int]:
        return self.u_in | self.u_out

    @property
    def nodes(self) -> set[int]:
        return self.u_in | self.u_out | self.d_in | self.d_out

    @property
    def size(self) -> int:
        return len(self.u_in) + len(self.u_out)


def undecided_nodes(graph: Graph, bits: Sequence[int | None], radius: int) -> set[int]:
    out = set()
    for v in graph.nodes:
        if bits[v] is None:
            out.update(graph.bfs(v, radius))
    return out


def extract_components(graph: Graph, bits: Sequence[int | None], t0: int, r: int) -> list[ComponentSets]:
    """Components of undecided events in the dependency graph, with their decided rings."""
    radius = t0 + r
    undecided = undecided_nodes(graph, bits, radius)
    seen: set[int] = set()
    comps = []
    for start in sorted(undecided):
        if start in seen:
            continue
        comp = {start}
        queue = deque([start])
        seen.add(start)
        while queue:
            v = queue.popleft()
            for u in graph.bfs(v, 2 * radius):
                if u in undecided and u not in seen:
                    seen.add(u)
                    comp.add(u)
                    queue.append(u)
        u_in = {v for v in comp if bits[v] is None}
        u_out = comp - u_in
        d_in = set()
        for v in u_out:
            d_in.update(u for u in graph.bfs(v, radius) if u not in comp)
        d_out = set()
        for v in d_in:
            d_out.update(u for u in graph.bfs(v, radius) if u not in comp and u not in d_in)
        comps.append(ComponentSets(u_in, u_out, d_in, d_out))
    return comps


def disjointness_violations(comps: Sequence[ComponentSets]) -> list[tuple[int, int]]:
    owner = {}
    for i, c in enumerate(comps):
        for v in c.events:
            owner[v] = i
    bad = []
    for i, c in enumerate(comps):
        for v in c.d_in | c.d_out:
            if v in owner and owner[v] != i:
                bad.append((i, owner[v]))
    return sorted(set(bad))


# ---------------------------------------------------------------- the completion problem on a component

@dataclass
class ComponentInstance:
    graph: Graph
    original: list[int]              # local index -> node of the host graph
    given: list[int | None]          # input strings (None: to be chosen)


def component_instance(graph: Graph, comp: ComponentSets, bits: Sequence[int | None]) -> ComponentInstance:
    nodes = sorted(comp.nodes)
    local = {v: i for i, v in enumerate(nodes)}
    sub = Graph(len(nodes), max_degree=graph.max_degree)
    for eid, (u, pu, v, pv) in enumerate(graph.edges):
        if u in local and v in local:
            sub.add_edge(local[u], local[v])
    return ComponentInstance(sub, nodes, [bits[v] for v in nodes])


def wildcard_allowed(alg: ConstAlg, inst: ComponentInstance, v: int, x) -> bool:
    """A node may output the wildcard when its view fails with probability strictly above x."""
    return local_failure_rate(alg, inst.graph, v, inst.given) > x


def check_completion(alg: ConstAlg, inst: ComponentInstance, outputs: Sequence, x) -> dict[int, str]:
    """Per-node verdicts for the completion problem; empty dict means accepted."""
    g = inst.graph
    bad = {}
    bits = [None if o == STAR else o for o in outputs]
    for v in g.nodes:
        if outputs[v] == STAR:
            if not wildcard_allowed(alg, inst, v, x):
                bad[v] = "wildcard without a failing view"
            continue
        if inst.given[v] is not None and outputs[v] != inst.given[v]:
            bad[v] = "does not echo its input string"
            continue
        ball = g.bfs(v, alg.radius)
        if any(outputs[u] == STAR for u in ball if u != v):
            continue  # another node gave up in this view, so nothing more is asked of v
        if any(bits[u] is None for u in ball):
            bad[v] = "view has no string"
        elif event_fails(alg, g, v, bits):
            bad[v] = "algorithm fails in this view"
    return bad


def solve_component(alg: ConstAlg, inst: ComponentInstance, x, check_gate: bool = True,
                    max_steps: int = 200_000) -> list:
    """Deterministic completion: echo given strings, wildcard where allowed, search the rest.

    Unset strings are filled in BFS order with the smallest value that keeps
    every fully determined view correct, backtracking when stuck.
    """
    g = inst.graph
    if check_gate:
        delta = max((g.degree(v) for v in g.nodes), default=0)
        value = math.e * float(x) * delta ** (4 * alg.radius)
        if value >= 1:
            raise CriterionFailed("component", value)
    if g.n == 0:
        return []
    x = Fraction(x).limit_denominator(1 << 40) if not isinstance(x, Fraction) else x
    outputs: list = [None] * g.n
    for v in g.nodes:
        if inst.given[v] is not None:
            outputs[v] = STAR if wildcard_allowed(alg, inst, v, x) else inst.given[v]
    free = [v for v in g.nodes if inst.given[v] is None]
    order = []
    seen = set()
    for s in free:
        if s in seen:
            continue
        for v in sorted(g.bfs(s), key=lambda u: (g.bfs(s)[u], u)):
            if inst.given[v] is None and v not in seen:
                seen.add(v)
                order.append(v)
    watchers = {v: [u for u in g.bfs(v, alg.radius)] for v in order}
    balls = {u: list(g.bfs(u, alg.radius)) for u in g.nodes}
    bits = [None if o == STAR else o for o in outputs]
    steps = 0

    def view_ok(u):
        if outputs[u] == STAR:
            return True
        ball = balls[u]
        if any(outputs[w] == STAR for w in ball if w != u) and inst.given[u] is None:
            return True
        if any(bits[w] is None for w in ball):
            return True
        return not event_fails(alg, g, u, bits)

    def place(k):
        nonlocal steps
        if k == len(order):
            return True
        v = order[k]
        for value in range(2 ** alg.h0):
            steps += 1
            if steps > max_steps:
                raise SearchRefused("component search exceeded its step budget")
            bits[v] = value
            outputs[v] = value
            if all(view_ok(u) for u in watchers[v]) and place(k + 1):
                return True
        bits[v] = None
        outputs[v] = None
        return False

    if not place(0):
        raise SearchRefused("component has no completion")
    return outputs


# ---------------------------------------------------------------- end-to-end

def simulate_algorithm(alg: ConstAlg, graph: Graph, bits: Sequence[int]):
    """Run the algorithm for t0 rounds of bit flooding, then decide locally."""
    def program(ctx):
        v = ctx.id
        known = {v: bits[v]}
        fresh = dict(known)
        for _ in range(alg.t0):
            inbox = yield {p: tuple(sorted(fresh.items())) for p in range(ctx.degree)}
            fresh = {}
            for msg in inbox.values():
                for u, b in msg:
                    if u not in known:
                        known[u] = b
                        fresh[u] = b
        return alg.decide(graph, v, known)
    return run(graph, program, LOCAL)


@dataclass
class PipelineRun:
    seed: int
    valid: bool
    failed: str | None
    components: int
    max_size: int
    sizes: list[int]
    unset: int
    outputs: list | None = None
    bits: list | None = None
    wildcards_inside: int = 0
    disjoint: bool = True
    rounds: int = 0
    criterion: CriterionReport | None = None

    def summary(self) -> dict:
        return {"seed": self.seed, "components": self.components, "max_size": self.max_size,
                "valid": self.valid, "failed": self.failed, "unset": self.unset, "rounds": self.rounds}


def pi_prime_violations(alg: ConstAlg, graph: Graph, bits: Sequence[int]) -> list[int]:
    return [v for v in graph.nodes if event_fails(alg, graph, v, bits)]


def solve_pipeline(alg: ConstAlg, graph: Graph, seed: int, x: float | None = None,
                   c: int = 1, strict: bool = False, size_guard: int | None = None,
                   report: CriterionReport | None = None) -> PipelineRun:
    """Preshatter, solve every component deterministically, recombine, and run the algorithm.

    Refuses (CriterionFailed) when the LLL criterion or the component
    criterion fails; the exponent condition is enforced only when `strict`.
    """
    x = x if x is not None else math.sqrt(1 / alg.n0)
    rep = report if report is not None else criterion_report(alg, graph, x, c)
    if not rep.lll_ok:
        raise CriterionFailed("lll", rep.lll_value)
    if not rep.component_ok:
        raise CriterionFailed("component", rep.component_value)
    if strict and not rep.exponent_ok:
        raise CriterionFailed("exponent", 10 ** rep.exponent_log10)
    n = graph.n
    ids = assign_random_ids(n, max(n, 2) ** 4, seed)
    if has_collision(ids):
        return PipelineRun(seed, False, "id collision", 0, 0, [], 0, criterion=rep)
    pre = preshatter(alg, graph, x, seed)
    comps = extract_components(graph, pre.bits, alg.t0, alg.problem.radius)
    sizes = [cmp.size for cmp in comps]
    guard = size_guard if size_guard is not None else 64 * max(1, math.ceil(math.log2(max(n, 2))))
    run_ = PipelineRun(seed, False, None, len(comps), max(sizes, default=0), sizes, len(pre.unset),
                       criterion=rep, disjoint=not disjointness_violations(comps))
    if run_.max_size > guard:
        run_.failed = "component too large"
        return run_
    bits = list(pre.bits)
    for cmp in comps:
        inst = component_instance(graph, cmp, pre.bits)
        try:
            out = solve_component(alg, inst, x, check_gate=False)
        except SearchRefused as exc:
            run_.failed = str(exc)
            return run_
        for i, v in enumerate(inst.original):
            if v in cmp.u_in:
                bits[v] = out[i]
            if v in cmp.u_in | cmp.u_out | cmp.d_in and out[i] == STAR:
                run_.wildcards_inside += 1
    if any(b is None for b in bits):
        run_.failed = "unset strings left after recombination"
        return run_
    result = simulate_algorithm(alg, graph, bits)
    outputs = result.outputs
    run_.outputs = outputs
    run_.bits = bits
    run_.rounds = pre.rounds(alg) + result.trace.rounds
    run_.valid = not any(alg.problem.violated(graph, v, outputs) for v in graph.nodes)
    if not run_.valid:
        run_.failed = "final labeling invalid"
    return run_
