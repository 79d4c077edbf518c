"""LCL problems in black-white, node-edge, and standard (ball-list) form.

Constraint multisets are stored canonically as sorted tuples of
``(input, output)`` pairs.  A node-edge problem is a black-white problem in
which every black constraint has exactly two pairs: white nodes are graph
nodes, black nodes are graph edges, and an output lives on each half-edge.
"""

from __future__ import annotations

import itertools
import json
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from typing import Hashable, Iterable, Mapping, Sequence

from .graph import Graph, _jsonable, _unjson

Label = Hashable
Pair = tuple[Label, Label]
Config = tuple[Pair, ...]
HalfEdge = tuple[int, int]


class Unsolvable(Exception):
    """Raised by solvers that conclude no valid labeling exists."""


class SearchRefused(RuntimeError):
    """An exhaustive search was asked to exceed its size guard."""


class InvalidLabeling(ValueError):
    pass


def _sorted_indices(items: Sequence) -> list[int]:
    idx = range(len(items))
    try:
        return sorted(idx, key=lambda k: items[k])
    except TypeError:
        return sorted(idx, key=lambda k: repr(items[k]))


def canon(items: Iterable) -> tuple:
    items = list(items)
    return tuple(items[k] for k in _sorted_indices(items))


@dataclass(frozen=True)
class BwProblem:
    name: str
    sigma_in: tuple
    sigma_out: tuple
    white: frozenset  # of Config
    black: frozenset  # of Config
    max_degree: int

    @property
    def is_node_edge(self) -> bool:
        return all(len(c) == 2 for c in self.black)

    def out_index(self) -> dict:
        return {lab: i for i, lab in enumerate(self.sigma_out)}

    def white_ok(self, pairs: Iterable[Pair]) -> bool:
        return canon(pairs) in self.white

    def black_ok(self, pairs: Iterable[Pair]) -> bool:
        return canon(pairs) in self.black

    def white_by_shape(self) -> dict:
        """Group white configurations by (degree, canonical input multiset)."""
        return _group_by_inputs(self.white)

    def black_by_shape(self) -> dict:
        return _group_by_inputs(self.black)

    def to_json(self) -> str:
        return json.dumps({
            "name": self.name,
            "sigma_in": _jsonable(list(self.sigma_in)),
            "sigma_out": _jsonable(list(self.sigma_out)),
            "white": sorted((_jsonable(c) for c in self.white), key=json.dumps),
            "black": sorted((_jsonable(c) for c in self.black), key=json.dumps),
            "max_degree": self.max_degree,
        }, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "BwProblem":
        d = json.loads(text)
        return cls(d["name"], _unjson(d["sigma_in"]), _unjson(d["sigma_out"]),
                   frozenset(canon(_unjson(c)) for c in d["white"]),
                   frozenset(canon(_unjson(c)) for c in d["black"]),
                   d["max_degree"])

    def to_text(self) -> str:
        def fmt(c):
            return " ".join(f"{i}:{o}" for i, o in c) or "(empty)"
        lines = [f"problem {self.name}", f"max_degree {self.max_degree}",
                 "in " + " ".join(map(str, self.sigma_in)),
                 "out " + " ".join(map(str, self.sigma_out)), "white"]
        lines += ["  " + fmt(c) for c in sorted(self.white, key=repr)]
        lines.append("black")
        lines += ["  " + fmt(c) for c in sorted(self.black, key=repr)]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "BwProblem":
        """Parse the text form; labels are read back as plain strings."""
        name, degree, sin, sout = "", 0, (), ()
        sets: dict[str, set] = {"white": set(), "black": set()}
        section = None
        for raw in text.splitlines():
            line = raw.strip()
            if not line:
                continue
            head, _, rest = line.partition(" ")
            if not raw.startswith(" ") and head in ("problem", "max_degree", "in", "out", "white", "black"):
                if head == "problem":
                    name = rest
                elif head == "max_degree":
                    degree = int(rest)
                elif head == "in":
                    sin = tuple(rest.split())
                elif head == "out":
                    sout = tuple(rest.split())
                else:
                    section = head
                continue
            pairs = [] if line == "(empty)" else [tuple(tok.split(":", 1)) for tok in line.split()]
            sets[section].add(canon(pairs))
        return cls(name, sin, sout, frozenset(sets["white"]), frozenset(sets["black"]), degree)


def _group_by_inputs(configs) -> dict:
    out: dict = defaultdict(list)
    for c in configs:
        out[len(c), canon(i for i, _ in c)].append(c)
    return dict(out)


def make_problem(name, sigma_in, sigma_out, max_degree, white_pred, black_pred) -> BwProblem:
    """Materialize constraint sets by enumerating all multisets up to the degree bound."""
    pairs = [(i, o) for i in sigma_in for o in sigma_out]
    white = set()
    for d in range(max_degree + 1):
        for combo in itertools.combinations_with_replacement(pairs, d):
            if white_pred(combo):
                white.add(canon(combo))
    black = {canon(c) for c in itertools.combinations_with_replacement(pairs, 2) if black_pred(c)}
    return BwProblem(name, tuple(sigma_in), tuple(sigma_out), frozenset(white), frozenset(black), max_degree)


# ---------------------------------------------------------------- checking

def check_bw(problem: BwProblem, graph: Graph, colors: Sequence[str],
             inputs: Sequence[Label], outputs: Sequence[Label]) -> dict[int, str]:
    """Return {node: reason} for every node whose incident multiset is not allowed.

    `colors[v]` is "W" or "B"; `inputs`/`outputs` are indexed by edge id.
    """
    sigma_in, sigma_out = set(problem.sigma_in), set(problem.sigma_out)
    failures: dict[int, str] = {}
    for v in graph.nodes:
        pairs = []
        bad = None
        for eid in graph.edge_ids[v]:
            i, o = inputs[eid], outputs[eid]
            if i not in sigma_in:
                bad = f"input {i!r} outside alphabet"
            elif o not in sigma_out:
                bad = f"output {o!r} outside alphabet"
            pairs.append((i, o))
        if bad:
            failures[v] = bad
            continue
        allowed = problem.white if colors[v] == "W" else problem.black
        if canon(pairs) not in allowed:
            failures[v] = f"{'white' if colors[v] == 'W' else 'black'} configuration {canon(pairs)!r} not allowed"
    return failures


@dataclass
class Subdivision:
    graph: Graph
    colors: list[str]
    n_white: int

    def edge_of(self, v: int, port: int) -> int:
        return self.graph.edge_ids[v][port]

    def half_edge_of(self, bw_edge: int, original: Graph) -> HalfEdge:
        eid, side = divmod(bw_edge, 2)
        u, pu, v, pv = original.edges[eid]
        return (u, pu) if side == 0 else (v, pv)


def subdivide(graph: Graph) -> Subdivision:
    """White node per graph node, black node per edge; BW edge 2e / 2e+1 are the two halves of edge e.

    White port order equals the original port order.
    """
    bw = Graph(graph.n + len(graph.edges))
    for eid, (u, pu, v, pv) in enumerate(graph.edges):
        b = graph.n + eid
        bw.add_edge(u, b, graph.inputs[u][pu], graph.inputs[u][pu])
        bw.add_edge(v, b, graph.inputs[v][pv], graph.inputs[v][pv])
    colors = ["W"] * graph.n + ["B"] * len(graph.edges)
    return Subdivision(bw, colors, graph.n)


def check_node_edge(problem: BwProblem, graph: Graph, outputs: Mapping[HalfEdge, Label],
                    inputs: Mapping[HalfEdge, Label] | None = None) -> dict[tuple[str, int], str]:
    """Failures keyed by ("node", v) or ("edge", edge id)."""
    sub = subdivide(graph)
    bw_in, bw_out = [], []
    for bw_edge in range(len(sub.graph.edges)):
        v, p = sub.half_edge_of(bw_edge, graph)
        bw_in.append(inputs[v, p] if inputs is not None else graph.inputs[v][p])
        if (v, p) not in outputs:
            raise InvalidLabeling(f"half-edge {(v, p)} unlabeled")
        bw_out.append(outputs[v, p])
    raw = check_bw(problem, sub.graph, sub.colors, bw_in, bw_out)
    return {(("node", x) if x < graph.n else ("edge", x - graph.n)): why for x, why in raw.items()}


# ---------------------------------------------------------------- brute force

def _assignments(config: Config, port_inputs: Sequence[Label], domains: Sequence[set | None]):
    """Yield every per-port output tuple realizing `config`, respecting optional per-port domains."""
    remaining = Counter(config)
    order = sorted(range(len(port_inputs)), key=lambda p: len(domains[p]) if domains[p] is not None else 1 << 30)
    out = [None] * len(port_inputs)

    def rec(k):
        if k == len(order):
            yield tuple(out)
            return
        p = order[k]
        for pair in list(remaining):
            if pair[0] != port_inputs[p] or remaining[pair] == 0:
                continue
            if domains[p] is not None and pair[1] not in domains[p]:
                continue
            remaining[pair] -= 1
            out[p] = pair[1]
            yield from rec(k + 1)
            remaining[pair] += 1

    yield from rec(0)


_INDEX_CACHE: dict = {}


def _pair_index(problem: BwProblem, color: str) -> dict:
    """Configurations keyed by (degree, inputs) and by (degree, inputs, one contained pair)."""
    cache_key = (id(problem), color)
    hit = _INDEX_CACHE.get(cache_key)
    if hit is not None and hit[0] is problem:
        return hit[1]
    index: dict = defaultdict(list)
    for c in (problem.white if color == "W" else problem.black):
        key = (len(c), canon(i for i, _ in c))
        index[key].append(c)
        for pair in set(c):
            index[key + (pair,)].append(c)
    for bucket in index.values():
        bucket.sort(key=repr)
    _INDEX_CACHE[cache_key] = (problem, dict(index))
    return _INDEX_CACHE[cache_key][1]


def brute_force_bw(problem: BwProblem, graph: Graph, colors: Sequence[str], inputs: Sequence[Label],
                   max_edges: int = 64, max_steps: int = 200_000) -> list | None:
    """Exhaustive search with constraint propagation; returns per-edge outputs or None.

    Every node constraint is a table over its incident edges.  Domains are
    pruned to supported values until a fixpoint, then the search branches on
    the smallest open domain.  On trees propagation alone decides solvability.
    """
    if len(graph.edges) > max_edges:
        raise SearchRefused(f"{len(graph.edges)} edges exceeds guard {max_edges}")
    index = {"W": _pair_index(problem, "W"), "B": _pair_index(problem, "B")}
    full = set(problem.sigma_out)
    steps = 0

    def candidates(v, domains):
        eids = graph.edge_ids[v]
        port_inputs = [inputs[e] for e in eids]
        key = (len(eids), canon(port_inputs))
        bucket = index[colors[v]]
        p0 = min(range(len(eids)), key=lambda p: len(domains[eids[p]]), default=None)
        if p0 is None or len(domains[eids[p0]]) > 4:
            return bucket.get(key, ())
        seen = {}
        for lab in domains[eids[p0]]:
            for c in bucket.get(key + ((port_inputs[p0], lab),), ()):
                seen[c] = None
        return seen

    def supported(v, domains):
        eids = graph.edge_ids[v]
        port_inputs = [inputs[e] for e in eids]
        port_domains = [domains[e] for e in eids]
        support = [set() for _ in eids]
        for config in candidates(v, domains):
            for outs in _assignments(config, port_inputs, port_domains):
                for p, o in enumerate(outs):
                    support[p].add(o)
        return support

    def propagate(domains, queue):
        pending = set(queue)
        while queue:
            v = queue.pop()
            pending.discard(v)
            support = supported(v, domains)
            for p, e in enumerate(graph.edge_ids[v]):
                if support[p] != domains[e]:
                    domains[e] = domains[e] & support[p]
                    if not domains[e]:
                        return False
                    for u in (graph.edges[e][0], graph.edges[e][2]):
                        if u != v and u not in pending:
                            pending.add(u)
                            queue.append(u)
        return True

    def search(domains, queue):
        nonlocal steps
        steps += 1
        if steps > max_steps:
            raise SearchRefused(f"search exceeded {max_steps} steps")
        if not propagate(domains, queue):
            return None
        isolated = [v for v in graph.nodes if graph.degree(v) == 0]
        for v in isolated:
            key = (0, ())
            if not index[colors[v]].get(key):
                return None
        open_edges = [e for e in range(len(graph.edges)) if len(domains[e]) > 1]
        if not open_edges:
            return [next(iter(d)) for d in domains]
        e = min(open_edges, key=lambda k: (len(domains[k]), k))
        u, _, w, _ = graph.edges[e]
        for lab in sorted(domains[e], key=repr):
            trial = list(domains)
            trial[e] = {lab}
            found = search(trial, [u, w])
            if found is not None:
                return found
        return None

    return search([set(full) for _ in graph.edges], list(graph.nodes))


def brute_force_solve(problem: BwProblem, graph: Graph, inputs: Mapping[HalfEdge, Label] | None = None,
                      max_edges: int = 64, max_steps: int = 200_000) -> dict[HalfEdge, Label] | None:
    """Node-edge oracle: a valid half-edge labeling, or None when none exists."""
    if len(graph.edges) > max_edges:
        raise SearchRefused(f"{len(graph.edges)} edges exceeds guard {max_edges}")
    sub = subdivide(graph)
    bw_in = []
    for bw_edge in range(len(sub.graph.edges)):
        v, p = sub.half_edge_of(bw_edge, graph)
        bw_in.append(inputs[v, p] if inputs is not None else graph.inputs[v][p])
    sol = brute_force_bw(problem, sub.graph, sub.colors, bw_in, 2 * max_edges, max_steps)
    if sol is None:
        return None
    return {sub.half_edge_of(k, graph): lab for k, lab in enumerate(sol)}


# ---------------------------------------------------------------- standard form on trees

# A ball is a canonical nested tuple of entries seen from its centre:
#   ("^", in, out)            the half-edge back towards the centre
#   (">", in, out, subball)   a half-edge whose far endpoint lies inside the ball
#   (".", in, out)            a dangling half-edge at the boundary
# The slot of a centre port is its index in the sorted entry tuple.

def _entries(graph, v, back_port, depth, radius, inputs, outputs):
    entries = []
    for p, (u, q) in enumerate(graph.ports[v]):
        i, o = inputs(v, p), outputs(v, p)
        if p == back_port:
            entries.append(("^", i, o))
        elif depth < radius:
            entries.append((">", i, o, _entries(graph, u, q, depth + 1, radius, inputs, outputs)))
        else:
            entries.append((".", i, o))
    return canon(entries)


def ball_at(graph: Graph, v: int, radius: int, inputs, outputs) -> tuple[tuple, list[int]]:
    """Canonical radius-`radius` ball around v in a tree plus the port -> slot map."""
    raw = []
    for p, (u, q) in enumerate(graph.ports[v]):
        i, o = inputs(v, p), outputs(v, p)
        if radius > 0:
            raw.append((">", i, o, _entries(graph, u, q, 1, radius, inputs, outputs)))
        else:
            raw.append((".", i, o))
    order = _sorted_indices(raw)
    slot_of = [0] * len(raw)
    for slot, p in enumerate(order):
        slot_of[p] = slot
    return tuple(raw[p] for p in order), slot_of


def _truncate_entry(entry, depth_left):
    if entry[0] == ">":
        if depth_left <= 0:
            return (".", entry[1], entry[2])
        return (">", entry[1], entry[2], canon(_truncate_entry(e, depth_left - 1) for e in entry[3]))
    return entry


def truncate_ball(ball: tuple, radius: int) -> tuple:
    return canon(_truncate_entry(e, radius) for e in ball)


def reroot(ball: tuple, slot: int, radius: int) -> tuple[tuple, tuple]:
    """Ball of the given radius around the neighbour at `slot`, plus the entry pointing back.

    Requires the original radius to be at least radius + 1.
    """
    entry = ball[slot]
    if entry[0] != ">":
        raise ValueError("slot leads outside the ball")
    _, i_here, o_here, sub = entry
    back_idx = next(k for k, e in enumerate(sub) if e[0] == "^")
    _, i_there, o_there = sub[back_idx]
    rest_here = [e for k, e in enumerate(ball) if k != slot]
    if radius == 0:
        back = (".", i_there, o_there)
    else:
        old_centre = canon([("^", i_here, o_here)] + [_truncate_entry(e, radius - 1) for e in rest_here])
        back = (">", i_there, o_there, old_centre)
    others = [_truncate_entry(e, radius) for k, e in enumerate(sub) if k != back_idx]
    return canon(others + [back]), back


@dataclass(frozen=True)
class StandardLcl:
    name: str
    sigma_in: tuple
    sigma_out: tuple
    radius: int
    max_degree: int
    allowed: frozenset  # canonical balls

    @classmethod
    def from_predicate(cls, name, sigma_in, sigma_out, radius, max_degree, predicate) -> "StandardLcl":
        """Enumerate every labeled tree ball up to isomorphism and keep those accepted by `predicate`."""
        pairs = [(i, o) for i in sigma_in for o in sigma_out]
        allowed = {b for b in _enumerate_balls(pairs, radius, max_degree) if predicate(b)}
        return cls(name, tuple(sigma_in), tuple(sigma_out), radius, max_degree, frozenset(allowed))


def _enumerate_balls(pairs, radius, max_degree):
    # subtrees hanging below a node at depth d, entered via its parent half
    memo = {}

    def entries_at(depth):
        """All possible non-back entries for a node at this depth."""
        if depth in memo:
            return memo[depth]
        if depth >= radius:
            res = [(".", i, o) for i, o in pairs]
        else:
            res = [(">", i, o, node) for i, o in pairs for node in nodes_at(depth + 1)]
        memo[depth] = res
        return res

    def nodes_at(depth):
        out = []
        for i, o in pairs:
            for d in range(0, max_degree):
                for combo in itertools.combinations_with_replacement(entries_at(depth), d):
                    out.append(canon([("^", i, o)] + list(combo)))
        return out

    for d in range(max_degree + 1):
        for combo in itertools.combinations_with_replacement(entries_at(0), d):
            yield canon(combo)


def check_standard(problem: StandardLcl, graph: Graph, outputs: Mapping[HalfEdge, Label],
                   inputs: Mapping[HalfEdge, Label] | None = None) -> dict[int, str]:
    inp = (lambda v, p: inputs[v, p]) if inputs is not None else (lambda v, p: graph.inputs[v][p])
    failures = {}
    for v in graph.nodes:
        ball, _ = ball_at(graph, v, problem.radius, inp, lambda v, p: outputs[v, p])
        if ball not in problem.allowed:
            failures[v] = "ball not in allowed set"
    return failures


def brute_force_standard(problem: StandardLcl, graph: Graph, max_edges: int = 16,
                         max_steps: int = 2_000_000) -> dict[HalfEdge, Label] | None:
    """Backtracking over per-node output tuples, checking each ball as soon as it is fully labeled."""
    if len(graph.edges) > max_edges:
        raise SearchRefused(f"{len(graph.edges)} edges exceeds guard {max_edges}")
    order = list(graph.bfs(0)) if graph.n else []
    pos = {v: k for k, v in enumerate(order)}
    balls = {v: set(graph.bfs(v, problem.radius)) for v in graph.nodes}
    # node v's ball is checkable once every node in it is assigned
    ready_at = defaultdict(list)
    for v, region in balls.items():
        ready_at[max(pos[u] for u in region)].append(v)
    outputs: dict[HalfEdge, Label] = {}
    inp = lambda v, p: graph.inputs[v][p]
    steps = 0

    def rec(k):
        nonlocal steps
        if k == len(order):
            return True
        steps += 1
        if steps > max_steps:
            raise SearchRefused(f"search exceeded {max_steps} steps")
        v = order[k]
        for outs in itertools.product(problem.sigma_out, repeat=graph.degree(v)):
            for p, o in enumerate(outs):
                outputs[v, p] = o
            if all(ball_at(graph, c, problem.radius, inp, lambda a, b: outputs[a, b])[0] in problem.allowed
                   for c in ready_at[k]) and rec(k + 1):
                return True
        for p in range(graph.degree(v)):
            outputs.pop((v, p), None)
        return False

    return dict(outputs) if rec(0) else None


@dataclass
class NodeEdgeConversion:
    source: StandardLcl
    problem: BwProblem
    # black partner keys per triple: (my pointed ball, expected neighbour pointed ball)
    keys: dict = field(default_factory=dict)


def to_node_edge(problem: StandardLcl) -> NodeEdgeConversion:
    """Each half-edge outputs (ball, slot); white checks one ball is used bijectively, edges check overlap."""
    r = problem.radius
    if r < 1:
        raise ValueError("radius 0 problems are already node-local; use radius >= 1")
    triples = []
    white = set()
    keys = {}
    for ball in sorted(problem.allowed, key=repr):
        slots = [(ball, j) for j in range(len(ball))]
        triples.extend(slots)
        white.add(canon((ball[j][1], (ball, j)) for j in range(len(ball))))
        trimmed = truncate_ball(ball, r - 1)
        for j in range(len(ball)):
            mine = (trimmed, _truncate_entry(ball[j], r - 1))
            theirs = reroot(ball, j, r - 1)
            keys[ball, j] = (mine, theirs)
    by_mine = defaultdict(list)
    for t, (mine, _) in keys.items():
        by_mine[mine].append(t)
    black = set()
    for t, (mine, theirs) in keys.items():
        for t2 in by_mine.get(theirs, ()):
            if keys[t2][1] == mine:
                i1 = t[0][t[1]][1]
                i2 = t2[0][t2[1]][1]
                black.add(canon([(i1, t), (i2, t2)]))
    bw = BwProblem(problem.name + "/node-edge", problem.sigma_in, tuple(triples),
                   frozenset(white), frozenset(black), problem.max_degree)
    return NodeEdgeConversion(problem, bw, keys)


def lift_solution(direction: str, conversion: NodeEdgeConversion | None, graph: Graph,
                  labeling: Mapping[HalfEdge, Label]) -> dict[HalfEdge, Label]:
    """Move a valid labeling between the standard and node-edge forms of a problem.

    direction is "to_node_edge", "to_standard", or "identity".  Each output
    depends only on the radius-r ball of its node.
    """
    if direction == "identity":
        return dict(labeling)
    standard, bw = conversion.source, conversion.problem
    inp = lambda v, p: graph.inputs[v][p]
    if direction == "to_node_edge":
        if check_standard(standard, graph, labeling):
            raise InvalidLabeling("source labeling violates the standard constraints")
        out = {}
        for v in graph.nodes:
            ball, slot_of = ball_at(graph, v, standard.radius, inp, lambda a, b: labeling[a, b])
            for p in range(graph.degree(v)):
                out[v, p] = (ball, slot_of[p])
        return out
    if direction == "to_standard":
        if check_node_edge(bw, graph, labeling):
            raise InvalidLabeling("source labeling violates the node-edge constraints")
        return {h: ball[j][2] for h, (ball, j) in labeling.items()}
    raise ValueError(f"unknown direction {direction!r}")
