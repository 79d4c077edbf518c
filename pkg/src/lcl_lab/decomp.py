"""Rake & Compress decomposition with rake sublayers and split compress paths.

Each iteration i performs gamma rake steps (remove nodes of degree at most
one; of two adjacent degree-one nodes only the smaller id goes) and then one
compress step (remove every maximal chain of degree-two nodes with at least
`l` nodes).  Chains longer than 2l are then split: some interior nodes are
*promoted* out of compress layer i into rake sublayer (i+1, 1), leaving
pieces of between l and 2l nodes.  A promoted node is isolated in the
remaining graph, so moving it never changes anyone else's degree.

Layer coordinates are ``("rake", i, j)`` and ``("compress", i, 0)``; the total
order of sublayers is given by ``rank``.
"""

from __future__ import annotations

import json
import math
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Sequence

from .graph import Graph
from .sim import LOCAL, BandwidthPolicy, Final, RunResult, WaitUntil, run

RAKE, COMPRESS = "rake", "compress"


def rank(layer: tuple[str, int, int]) -> tuple[int, int, int]:
    kind, i, j = layer
    return (i, 0, j) if kind == RAKE else (i, 1, 0)


def resolve_gamma(gamma, n: int) -> int:
    if gamma == "sqrt":
        return max(1, math.isqrt(max(n - 1, 0)) + 1) if n > 1 else 1
    if isinstance(gamma, str) and gamma.startswith("root"):
        k = int(gamma[4:])
        return max(1, math.ceil(n ** (1.0 / k) - 1e-9))
    if gamma == "n":
        return max(1, n)
    return int(gamma)


@dataclass
class Decomposition:
    layer: list[tuple[str, int, int]]
    gamma: int
    l: int
    promoted: set[int] = field(default_factory=set)

    def rank_of(self, v: int) -> tuple[int, int, int]:
        return rank(self.layer[v])

    def groups(self) -> dict[tuple[str, int, int], list[int]]:
        out: dict = defaultdict(list)
        for v, lay in enumerate(self.layer):
            out[lay].append(v)
        return dict(out)

    def layer_count(self) -> int:
        return len({(kind, i) for kind, i, _ in self.layer})

    def sublayer_count(self) -> int:
        return len(set(self.layer))

    def compress_paths(self, graph: Graph) -> list[list[int]]:
        """Connected components of compress nodes within each compress layer, as ordered paths."""
        seen: set[int] = set()
        paths = []
        for v in graph.nodes:
            if v in seen or self.layer[v][0] != COMPRESS:
                continue
            same = lambda u: self.layer[u] == self.layer[v]
            comp = {v}
            stack = [v]
            while stack:
                x = stack.pop()
                for u in graph.neighbors(x):
                    if u not in comp and same(u):
                        comp.add(u)
                        stack.append(u)
            seen |= comp
            ends = [x for x in comp if sum(1 for u in graph.neighbors(x) if u in comp) <= 1]
            order = [min(ends)] if ends else [v]
            while len(order) < len(comp):
                nxt = [u for u in graph.neighbors(order[-1]) if u in comp and u not in order[-2:]]
                if not nxt:
                    break
                order.append(nxt[0])
            paths.append(order)
        return paths

    def to_json(self) -> str:
        return json.dumps({"gamma": self.gamma, "l": self.l,
                           "layer": [list(x) for x in self.layer]}, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "Decomposition":
        d = json.loads(text)
        return cls([tuple(x) for x in d["layer"]], d["gamma"], d["l"])


# ---------------------------------------------------------------- sequential reference

def rake_compress(tree: Graph, gamma, l: int, ids: Sequence[int] | None = None,
                  promote_paths: bool = True) -> Decomposition:
    if not tree.is_tree():
        raise ValueError("rake_compress needs a tree")
    if l < 1:
        raise ValueError("l must be at least 1")
    gamma = resolve_gamma(gamma, tree.n)
    ids = list(ids) if ids is not None else list(tree.nodes)
    remaining = set(tree.nodes)
    degree = [tree.degree(v) for v in tree.nodes]
    layer: list = [None] * tree.n
    long_paths: list[tuple[int, list[int]]] = []

    def remove(nodes):
        for v in nodes:
            remaining.discard(v)
        for v in nodes:
            for u in tree.neighbors(v):
                if u in remaining:
                    degree[u] -= 1

    i = 0
    while remaining:
        i += 1
        for j in range(1, gamma + 1):
            if not remaining:
                break
            batch = []
            for v in remaining:
                if degree[v] == 0:
                    batch.append(v)
                elif degree[v] == 1:
                    u = next(u for u in tree.neighbors(v) if u in remaining)
                    if degree[u] >= 2 or ids[v] < ids[u]:
                        batch.append(v)
            for v in batch:
                layer[v] = (RAKE, i, j)
            remove(batch)
        if not remaining:
            break
        chains = _degree_two_chains(tree, remaining, degree)
        batch = []
        for chain in chains:
            if len(chain) >= l:
                batch.extend(chain)
                for v in chain:
                    layer[v] = (COMPRESS, i, 0)
                if len(chain) > 2 * l:
                    long_paths.append((i, chain))
        remove(batch)

    deco = Decomposition(layer, gamma, l)
    if promote_paths:
        for i, chain in long_paths:
            for v in split_positions(len(chain), l):
                deco.layer[chain[v]] = (RAKE, i + 1, 1)
                deco.promoted.add(chain[v])
    return deco


def _degree_two_chains(tree: Graph, remaining: set[int], degree: list[int]) -> list[list[int]]:
    seen: set[int] = set()
    chains = []
    for v in sorted(remaining):
        if degree[v] != 2 or v in seen:
            continue
        seen.add(v)
        sides = []
        for start in (u for u in tree.neighbors(v) if u in remaining):
            run_nodes, prev, cur = [], v, start
            while cur not in seen and degree[cur] == 2:
                seen.add(cur)
                run_nodes.append(cur)
                prev, cur = cur, next(u for u in tree.neighbors(cur) if u in remaining and u != prev)
            sides.append(run_nodes)
        chains.append(sides[0][::-1] + [v] + sides[1])
    return chains


def split_positions(length: int, l: int) -> list[int]:
    """Positions (0-based) to promote so a run of `length` nodes splits into pieces of l..2l nodes."""
    if length <= 2 * l:
        return []
    pieces = (length + 1) // (l + 1)
    kept = length - (pieces - 1)
    base, extra = divmod(kept, pieces)
    out, pos = [], 0
    for k in range(pieces - 1):
        pos += base + (1 if k < extra else 0)
        out.append(pos)
        pos += 1
    return out


def promote(deco: Decomposition, tree: Graph) -> Decomposition:
    """Split every compress path longer than 2l; returns a new decomposition."""
    out = Decomposition(list(deco.layer), deco.gamma, deco.l, set(deco.promoted))
    for path in deco.compress_paths(tree):
        if len(path) > 2 * deco.l:
            _, i, _ = deco.layer[path[0]]
            for k in split_positions(len(path), deco.l):
                out.layer[path[k]] = (RAKE, i + 1, 1)
                out.promoted.add(path[k])
    return out


# ---------------------------------------------------------------- invariants

def validate(deco: Decomposition, tree: Graph) -> list[str]:
    """All invariant violations, as human-readable strings (empty when valid)."""
    problems = []
    l = deco.l
    for v in tree.nodes:
        if deco.layer[v] is None:
            problems.append(f"node {v} unassigned")
    if problems:
        return problems
    for u, _, v, _ in tree.edges:
        if deco.layer[u] == deco.layer[v] and deco.layer[u][0] == RAKE:
            problems.append(f"rake sublayer {deco.layer[u]} not independent: edge {u}-{v}")
    for path in deco.compress_paths(tree):
        if not l <= len(path) <= 2 * l:
            problems.append(f"compress path of {len(path)} nodes at {deco.layer[path[0]]}")
        here = deco.rank_of(path[0])
        inner = set(path)
        for k, v in enumerate(path):
            above = [u for u in tree.neighbors(v) if u not in inner and rank(deco.layer[u]) > here]
            is_end = k in (0, len(path) - 1)
            if not is_end and above:
                problems.append(f"interior compress node {v} has a neighbour above")
            if is_end and not above and len(path) > 1:
                problems.append(f"compress endpoint {v} has no neighbour above")
            if len(path) == 1 and len(above) != 2:
                problems.append(f"single-node compress path {v} needs two neighbours above")
    for v in tree.nodes:
        kind, i, _ = deco.layer[v]
        if kind != RAKE:
            continue
        higher = [u for u in tree.neighbors(v) if rank(deco.layer[u]) > rank(deco.layer[v])]
        if len(higher) > 1:
            problems.append(f"rake node {v} has {len(higher)} neighbours above")
    # each component of a rake layer has at most one node with a neighbour in a higher layer
    by_layer = defaultdict(set)
    for v in tree.nodes:
        kind, i, _ = deco.layer[v]
        if kind == RAKE:
            by_layer[i].add(v)
    for i, members in by_layer.items():
        seen: set[int] = set()
        for v in members:
            if v in seen:
                continue
            comp, stack = {v}, [v]
            while stack:
                x = stack.pop()
                for u in tree.neighbors(x):
                    if u in members and u not in comp:
                        comp.add(u)
                        stack.append(u)
            seen |= comp
            top = (i, 0, 10 ** 9)
            exits = [x for x in comp if any(u not in members and rank(deco.layer[u]) > top
                                            for u in tree.neighbors(x))]
            if len(exits) > 1:
                problems.append(f"rake layer {i} component has {len(exits)} exits")
    return problems


@dataclass
class LayerReport:
    n: int
    gamma: int
    layers: int
    sublayers: int
    log2_n: float
    ratio: float  # layers / log2 n

    def as_dict(self) -> dict:
        return dict(vars(self))


def layer_counts(deco: Decomposition, n: int) -> LayerReport:
    lg = math.log2(n) if n > 1 else 1.0
    return LayerReport(n, deco.gamma, deco.layer_count(), deco.sublayer_count(), lg,
                       deco.layer_count() / lg)


def fit_log_constant(reports: Sequence[LayerReport]) -> tuple[float, bool, list[float]]:
    """Per-size ratios max(layers)/log2 n; returns (mean, all within 10% of mean, ratios)."""
    by_n: dict[int, list[LayerReport]] = defaultdict(list)
    for r in reports:
        by_n[r.n].append(r)
    ratios = [max(r.layers for r in group) / group[0].log2_n for _, group in sorted(by_n.items())]
    mean = sum(ratios) / len(ratios)
    stable = all(abs(x - mean) <= 0.10 * mean for x in ratios)
    return mean, stable, ratios


# ---------------------------------------------------------------- distributed version

def cv_iterations(id_space: int) -> int:
    """Colour-reduction steps needed to bring colours below 6 from ids in [0, id_space)."""
    bound, steps = max(id_space, 7), 0
    while bound > 6:
        bound = 2 * (bound - 1).bit_length()
        steps += 1
    return steps


def _cv_step(colour: int, parent_colour: int | None) -> int:
    if parent_colour is None:
        return colour & 1
    diff = colour ^ parent_colour
    index = (diff & -diff).bit_length() - 1
    return 2 * index + ((colour >> index) & 1)


def ruling_levels(l: int) -> int:
    return max(1, math.ceil(math.log2(l + 1)))


def promotion_schedule(l: int, id_space: int) -> tuple[list[int], int, int]:
    """(relay distance per level, rounds of the ruling-set phase, rounds of the stretch phase)."""
    levels = ruling_levels(l)
    exchanges = cv_iterations(id_space) + 7
    distances = [3 ** k for k in range(levels)]
    ruling_rounds = sum(exchanges * d for d in distances)
    stretch_rounds = 3 ** levels + l + 2
    return distances, ruling_rounds, stretch_rounds


def decomposition_program(gamma, l: int, id_space: int | None = None):
    """Program factory; each node outputs (layer coordinate, promoted flag)."""

    def program(ctx):
        n = ctx.n
        g = resolve_gamma(gamma, n)
        space = id_space if id_space is not None else max(n, 2)
        active = set(range(ctx.degree))
        cap = 2 * l
        i = 0
        while True:
            i += 1
            for j in range(1, g + 1):
                inbox = yield {p: (len(active), ctx.id) for p in active}
                d = len(active)
                leave = d == 0
                if d == 1:
                    (p,) = active
                    nd, nid = inbox[p]
                    leave = nd >= 2 or ctx.id < nid
                if leave:
                    return _final_gone(active, (RAKE, i, j))
                inbox = yield {}
                active -= {p for p, m in inbox.items() if m == "gone"}
            d = len(active)
            counts = {p: 0 for p in active}
            ports = sorted(active)
            for _ in range(cap):
                out = {}
                if d == 2:
                    out = {p: min(cap, 1 + counts[q]) for p, q in ((ports[0], ports[1]), (ports[1], ports[0]))}
                inbox = yield out
                if d == 2:
                    counts = {p: inbox.get(p, 0) for p in ports}
            if d == 2 and counts[ports[0]] + counts[ports[1]] + 1 >= l:
                yield {p: "gone" for p in active}
                return (yield from _promotion(ctx, i, ports, counts, l, space))
            inbox = yield {}
            active -= {p for p, m in inbox.items() if m == "gone"}

    return program


def _final_gone(active, layer):
    return Final({p: "gone" for p in active}, (layer, False))


def _promotion(ctx, i, ports, counts, l, space):
    """Split a long compress chain using an (l+1)-spaced ruling set; runs only among chain nodes."""
    a, b = counts[ports[0]], counts[ports[1]]
    mine = ((COMPRESS, i, 0), False)
    promoted = ((RAKE, i + 1, 1), True)
    if a + b + 1 <= 2 * l:
        return mine
    distances, ruling_rounds, stretch_rounds = promotion_schedule(l, space)
    start = ctx.round
    side = {ports[0]: a, ports[1]: b}
    path_ports = [p for p in ports if side[p] > 0]

    def other(p):
        return ports[1] if p == ports[0] else ports[0]

    def eligible_after(p):
        # chain counts of the neighbour across port p
        return side[p] - 1 >= l and side[other(p)] + 1 >= l

    eligible = a >= l and b >= l
    anchor = False
    if eligible:
        relay_ports = [p for p in path_ports if eligible_after(p)]
        participant = True
        for dist in distances:
            anchor = yield from _ruling_level(ctx, participant, relay_ports, dist, space)
            participant = anchor
    else:
        yield WaitUntil(start + ruling_rounds)
        if ctx.round < start + ruling_rounds:
            raise RuntimeError("promotion phase lost synchrony")
    if anchor:
        for _ in range(stretch_rounds):
            yield {p: ("anchor",) for p in path_ports}
        return promoted
    run_len = {p: 0 for p in ports}
    far_id = {p: None for p in ports}
    closed = {p: p not in path_ports for p in ports}
    for _ in range(stretch_rounds):
        out = {}
        for p in path_ports:
            q = other(p)
            out[p] = (min(stretch_rounds, 1 + run_len[q]), far_id[q] if run_len[q] else ctx.id)
        inbox = yield out
        for p, msg in inbox.items():
            if msg[0] == "anchor":
                closed[p] = True
                run_len[p], far_id[p] = 0, None
            elif not closed[p]:
                run_len[p], far_id[p] = msg
    length = 1 + run_len[ports[0]] + run_len[ports[1]]
    e0 = far_id[ports[0]] if run_len[ports[0]] else ctx.id
    e1 = far_id[ports[1]] if run_len[ports[1]] else ctx.id
    position = run_len[ports[0]] if e0 <= e1 else run_len[ports[1]]
    if position in split_positions(length, l):
        return promoted
    return mine


def _exchange(payload, participant, relay_ports, dist):
    """Send `payload` to the nearest participant on each side, relaying through the rest."""
    got = {}
    out = {p: payload for p in relay_ports} if participant else {}
    for _ in range(dist):
        inbox = yield out
        out = {}
        for p, msg in inbox.items():
            if participant:
                got.setdefault(p, msg)
            else:
                q = [x for x in relay_ports if x != p]
                if q:
                    out[q[0]] = msg
    return got


def _ruling_level(ctx, participant, relay_ports, dist, space):
    """One maximal-independent-set level on the virtual chain of participants."""
    ex = lambda payload: _exchange(payload, participant, relay_ports, dist)
    ids = yield from ex(ctx.id)
    larger = {p: x for p, x in ids.items() if x > ctx.id}
    parent = max(larger, key=larger.get) if larger else None
    local_min = participant and len(ids) == 2 and len(larger) == 2
    colour = ctx.id
    parent_colour = ids.get(parent) if parent is not None else None
    for step in range(cv_iterations(space)):
        if step > 0:
            got = yield from ex(colour)
            parent_colour = got.get(parent) if parent is not None else None
        colour = _cv_step(colour, parent_colour)
    for c in (5, 4, 3):
        got = yield from ex(colour)
        if colour == c:
            colour = min({0, 1, 2} - set(got.values()))
    got = yield from ex(colour)
    if local_min:
        colour = min({0, 1, 2} - set(got.values()))
    in_set = False
    for c in (0, 1, 2):
        got = yield from ex(in_set)
        if participant and colour == c and not any(got.values()):
            in_set = True
    return participant and in_set


def rake_compress_distributed(tree: Graph, gamma, l: int, policy: BandwidthPolicy = LOCAL,
                              ids: Sequence[int] | None = None, id_space: int | None = None,
                              seed: int = 0) -> tuple[Decomposition, RunResult]:
    if not tree.is_tree():
        raise ValueError("rake_compress_distributed needs a tree")
    result = run(tree, decomposition_program(gamma, l, id_space), policy, seed=seed, ids=ids,
                 max_rounds=10 ** 7)
    if result.timed_out:
        raise RuntimeError("decomposition did not terminate")
    deco = Decomposition([lay for lay, _ in result.outputs], resolve_gamma(gamma, tree.n), l,
                         {v for v, (_, flag) in enumerate(result.outputs) if flag})
    return deco, result
