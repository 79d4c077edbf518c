"""Locally checkable proofs for the pyramid gadget family, and the LCL built on top of them.

A *proof labeling* is stored directly in a graph's half-edge inputs: the
input of half-edge ``(v, p)`` is a frozenset of ``(tag, label)`` pairs, one
pair per structure tag carried by the edge.  Tags are the four structure
names of ``graph.ALL_TAGS``.

Outputs of the invalidity prover are per half-edge values: ``None`` for the
empty output, ``ERROR``, or a :class:`Pointer`.

Checkers return :class:`NodeVerdicts`, mapping each failing node to the
constraint ids it violates.  Ids are short strings: ``"(c)"`` inside a
single structure, ``"1a:bottomGrid(c)"`` or ``"3d"`` for glued constraints.
"""

from __future__ import annotations

import math
import random
from collections import Counter, deque
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import product
from typing import Hashable, Iterable, Mapping, NamedTuple, Sequence

from . import sim
from .graph import (ALL_TAGS, GRID_TAGS, TREE_TAGS, FamilyInstance, Graph, HalfEdgeLabels,
                    Structured, follow)

GRID_ALPHABET = frozenset({"U", "D", "L", "R"})
TREE_ALPHABET = frozenset({"L", "R", "P", "ChL", "ChR"})
POINTER_DIRECTIONS = ("P", "ChR", "L", "R")
ERROR = "Error"
EPSILON = "eps"
ROW_VALUES = (0, 1, EPSILON)


class Pointer(NamedTuple):
    counter: int
    direction: str
    tag: str


@dataclass
class NodeVerdicts:
    failures: dict[int, tuple[str, ...]] = field(default_factory=dict)
    notes: dict[int, tuple[str, ...]] = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return not self.failures

    @property
    def failing(self) -> list[int]:
        return sorted(self.failures)

    def add(self, node: int, code: str) -> None:
        self.failures[node] = self.failures.get(node, ()) + (code,)

    def note(self, node: int, text: str) -> None:
        self.notes[node] = self.notes.get(node, ()) + (text,)

    def to_json(self) -> dict:
        return {"ok": self.ok,
                "failures": {str(v): list(c) for v, c in sorted(self.failures.items())},
                "notes": {str(v): list(c) for v, c in sorted(self.notes.items())}}


# ---------------------------------------------------------------- canonical labelings

def grid_label(at: tuple[int, int], to: tuple[int, int]) -> str:
    dx, dy = to[0] - at[0], to[1] - at[1]
    return {(0, 1): "U", (0, -1): "D", (-1, 0): "L", (1, 0): "R"}[dx, dy]


def tree_label(at: tuple[int, int], to: tuple[int, int]) -> str:
    (lu, ku), (lv, kv) = at, to
    if lv == lu:
        return {1: "R", -1: "L"}[kv - ku]
    if (lv, kv) == (lu - 1, ku // 2):
        return "P"
    if (lv, kv) == (lu + 1, 2 * ku):
        return "ChL"
    if (lv, kv) == (lu + 1, 2 * ku + 1):
        return "ChR"
    raise ValueError(f"{at} and {to} are not tree-like neighbours")


def canonical_grid_labels(structured: Structured) -> dict[tuple[int, int], str]:
    g, c = structured.graph, structured.coords
    return {(v, p): grid_label(c[v], c[u]) for v, p in g.half_edges() for u in [g.ports[v][p][0]]}


def canonical_tree_labels(structured: Structured) -> dict[tuple[int, int], str]:
    g, c = structured.graph, structured.coords
    return {(v, p): tree_label(c[v], c[u]) for v, p in g.half_edges() for u in [g.ports[v][p][0]]}


def label_family_instance(instance: FamilyInstance) -> Graph:
    """Copy of the instance graph whose half-edge inputs carry the coordinate-derived proof labels."""
    g = instance.graph.copy()
    coords = {
        "bottomGrid": instance.grid,
        "sideGrid": instance.side,
        "colTree": {v: (l, k) for v, (_, l, k) in instance.col_tree.items()},
        "topTree": instance.top_tree,
    }
    for eid, (u, pu, v, pv) in enumerate(g.edges):
        at_u, at_v = [], []
        for tag in sorted(instance.tags[eid]):
            rule = grid_label if tag in GRID_TAGS else tree_label
            at_u.append((tag, rule(coords[tag][u], coords[tag][v])))
            at_v.append((tag, rule(coords[tag][v], coords[tag][u])))
        g.inputs[u][pu] = frozenset(at_u)
        g.inputs[v][pv] = frozenset(at_v)
    return g


# ---------------------------------------------------------------- label access

def pairs(graph: Graph, v: int, p: int) -> frozenset:
    raw = graph.inputs[v][p]
    if isinstance(raw, tuple) and len(raw) == 2 and isinstance(raw[0], frozenset):
        raw = raw[0]  # combined-problem input: (proof label, row value)
    return raw if isinstance(raw, frozenset) else frozenset()


def half_tags(graph: Graph, v: int, p: int) -> frozenset[str]:
    return frozenset(t for t, _ in pairs(graph, v, p))


def edge_tags(graph: Graph, v: int, p: int) -> frozenset[str]:
    u, q = graph.ports[v][p]
    return half_tags(graph, v, p) | half_tags(graph, u, q)


def node_tags(graph: Graph, v: int) -> frozenset[str]:
    out: frozenset[str] = frozenset()
    for p in range(graph.degree(v)):
        out |= edge_tags(graph, v, p)
    return out


def tag_view(graph: Graph, tag: str):
    """Label of `tag` on a half-edge, or None when that half-edge carries no such label."""
    def lookup(v: int, p: int):
        found = [lab for t, lab in pairs(graph, v, p) if t == tag]
        return found[0] if len(found) == 1 else None
    return lookup


class _Labeled:
    def __init__(self, graph: Graph, labels: HalfEdgeLabels):
        self.graph = graph
        self.labels = labels

    def label(self, v: int, p: int):
        return self.labels(v, p) if callable(self.labels) else self.labels.get((v, p))

    def ports(self, v: int) -> list[tuple[int, Hashable]]:
        out = []
        for p in range(self.graph.degree(v)):
            lab = self.label(v, p)
            if lab is not None:
                out.append((p, lab))
        return out

    def has(self, v: int, lab) -> bool:
        return any(x == lab for _, x in self.ports(v))

    def far_label(self, v: int, p: int):
        u, q = self.graph.ports[v][p]
        return self.label(u, q)

    def f(self, v: int, seq: Sequence) -> int | None:
        return follow(self.graph, v, seq, self.labels)

    def nodes(self) -> list[int]:
        return [v for v in self.graph.nodes if self.ports(v)]


# ---------------------------------------------------------------- structure checkers

def _mutual(view: _Labeled, v: int, p: int, lab, partners: Mapping) -> bool:
    """If either side of the edge uses a label in `partners`, the two sides must pair up."""
    far = view.far_label(v, p)
    if lab in partners and far != partners[lab]:
        return False
    if far in partners and lab != partners[far]:
        return False
    return True


def check_c_grid(graph: Graph, labels: HalfEdgeLabels, nodes: Iterable[int] | None = None) -> NodeVerdicts:
    """Grid constraints (a)-(f) at every node carrying at least one label."""
    view = _Labeled(graph, labels)
    verdicts = NodeVerdicts()
    for u in (view.nodes() if nodes is None else nodes):
        ports = view.ports(u)
        labs = [lab for _, lab in ports]
        if any(lab not in GRID_ALPHABET for lab in labs):
            verdicts.add(u, "alphabet")
            continue
        if len(set(labs)) != len(labs):
            verdicts.add(u, "(a)")
        if not all(_mutual(view, u, p, lab, {"L": "R", "R": "L"}) for p, lab in ports):
            verdicts.add(u, "(b)")
        if not all(_mutual(view, u, p, lab, {"U": "D", "D": "U"}) for p, lab in ports):
            verdicts.add(u, "(c)")
        if "R" in labs and "U" in labs and view.f(u, "RULD") != u:
            verdicts.add(u, "(d)")
        right = view.f(u, "R")
        if right is not None and any(view.has(u, x) != view.has(right, x) for x in "DU"):
            verdicts.add(u, "(e)")
        up = view.f(u, "U")
        if up is not None and any(view.has(u, x) != view.has(up, x) for x in "LR"):
            verdicts.add(u, "(f)")
    return verdicts


def check_c_tree(graph: Graph, labels: HalfEdgeLabels, nodes: Iterable[int] | None = None) -> NodeVerdicts:
    """Tree-like constraints (a)-(i) at every node carrying at least one label."""
    view = _Labeled(graph, labels)
    verdicts = NodeVerdicts()
    children = {"ChL", "ChR"}
    for u in (view.nodes() if nodes is None else nodes):
        ports = view.ports(u)
        labs = [lab for _, lab in ports]
        if any(lab not in TREE_ALPHABET for lab in labs):
            verdicts.add(u, "alphabet")
            continue
        if len(set(labs)) != len(labs):
            verdicts.add(u, "(a)")
        if not all(_mutual(view, u, p, lab, {"L": "R", "R": "L"}) for p, lab in ports):
            verdicts.add(u, "(b)")
        parent_ok = True
        for p, lab in ports:
            far = view.far_label(u, p)
            if (lab == "P" and far not in children) or (lab in children and far != "P"):
                parent_ok = False
        if not parent_ok:
            verdicts.add(u, "(c)")
        parent_sides = [view.far_label(u, p) for p, lab in ports if lab == "P"]
        if "ChL" in parent_sides and view.f(u, ["P", "ChR", "L"]) != u:
            verdicts.add(u, "(d)")
        if "ChR" in parent_sides and "R" in labs and view.f(u, ["P", "R", "ChL", "L"]) != u:
            verdicts.add(u, "(e)")
        if ("ChL" in labs) != ("ChR" in labs):
            verdicts.add(u, "(f)")
        if ("P" not in labs) != ("L" not in labs and "R" not in labs):
            verdicts.add(u, "(g)")
        if not children & set(labs):
            for side in "LR":
                w = view.f(u, side)
                if w is not None and (view.has(w, "ChL") or view.has(w, "ChR")):
                    verdicts.add(u, "(h)")
                    break
        parent = view.f(u, "P")
        for via, side in (("ChR", "R"), ("ChL", "L")):
            if via in parent_sides and parent is not None and view.has(u, side) != view.has(parent, side):
                verdicts.add(u, "(i)")
    return verdicts


# ---------------------------------------------------------------- glued constraints

def _pattern_table() -> dict[frozenset[str], tuple[list[frozenset], list[tuple[int, ...]], list[tuple[int, ...]]]]:
    """Allowed half-edge multisets for multi-tag nodes: (entries, literal patterns, single-column additions)."""
    S = lambda *xs: frozenset(xs)  # noqa: E731
    top_side = S("colTree", "topTree", "sideGrid")
    col_side = S("colTree", "sideGrid")
    bot_col = S("bottomGrid", "colTree")
    bot_col_side = S("bottomGrid", "colTree", "sideGrid")
    return {
        top_side: ([S(("topTree", "P")),
                    S(("colTree", "ChR")),
                    S(("colTree", "ChL"), ("sideGrid", "D")),
                    S(("topTree", "L"), ("sideGrid", "L")),
                    S(("topTree", "R"), ("sideGrid", "R"))],
                   [(0, 1, 2, 3, 4), (0, 1, 2, 3), (0, 1, 2, 4)], []),
        col_side: ([S(("colTree", "P"), ("sideGrid", "U")),
                    S(("colTree", "ChR")),
                    S(("colTree", "ChL"), ("sideGrid", "D")),
                    S(("colTree", "R")),
                    S(("sideGrid", "L")),
                    S(("sideGrid", "R"))],
                   [(0, 1, 2, 3, 4, 5), (0, 1, 2, 3, 4), (0, 1, 2, 3, 5)],
                   [(0, 1, 2, 3), (1, 2)]),
        bot_col: ([S(("colTree", "P")),
                   S(("colTree", "L"), ("bottomGrid", "D")),
                   S(("bottomGrid", "L")),
                   S(("bottomGrid", "R")),
                   S(("colTree", "R"), ("bottomGrid", "U"))],
                  [(0, 1, 2, 3, 4), (0, 1, 2, 3), (0, 1, 2, 4), (0, 1, 3, 4), (0, 1, 2), (0, 1, 3)],
                  [(0, 1, 4), (0, 1)]),
        bot_col_side: ([S(("colTree", "P"), ("sideGrid", "U")),
                        S(("colTree", "R"), ("bottomGrid", "U")),
                        S(("bottomGrid", "L"), ("sideGrid", "L")),
                        S(("bottomGrid", "R"), ("sideGrid", "R"))],
                       [(0, 1, 2, 3), (0, 1, 2), (0, 1, 3)], [(0, 1)]),
    }


PATTERNS = _pattern_table()
PATTERN_IDS = {frozenset({"colTree", "topTree", "sideGrid"}): "3b",
               frozenset({"colTree", "sideGrid"}): "3d",
               frozenset({"bottomGrid", "colTree"}): "4b",
               frozenset({"bottomGrid", "colTree", "sideGrid"}): "4c"}


def _well_formed(graph: Graph, v: int, p: int) -> bool:
    raw = pairs(graph, v, p)
    tags = [t for t, _ in raw]
    if len(set(tags)) != len(tags):
        return False
    for t, lab in raw:
        alphabet = GRID_ALPHABET if t in GRID_TAGS else TREE_ALPHABET if t in TREE_TAGS else None
        if alphabet is None or lab not in alphabet:
            return False
    return edge_tags(graph, v, p) == frozenset(tags)


def check_c_proof(graph: Graph, single_column: bool = True) -> NodeVerdicts:
    """All glued constraints at every node.

    With `single_column` (default) the width-one instances are accepted too:
    the side-neighbour entries of 3d, 4b and 4c may all be missing and a
    column root without a top tree uses entries (ChR, ChL+D) of 3d.  Nodes
    that pass only because of this get a note.
    """
    verdicts = NodeVerdicts()
    for u in graph.nodes:
        if not all(_well_formed(graph, u, p) for p in range(graph.degree(u))):
            verdicts.add(u, "tags")
    for tag in ALL_TAGS:
        checker = check_c_grid if tag in GRID_TAGS else check_c_tree
        part = "1a" if tag in GRID_TAGS else "1b"
        for u, codes in checker(graph, tag_view(graph, tag)).failures.items():
            for code in codes:
                verdicts.add(u, f"{part}:{tag}{code}")
    for u in graph.nodes:
        s = node_tags(graph, u)
        halves = Counter(pairs(graph, u, p) for p in range(graph.degree(u)))
        if len(s) == 1:
            if s in (frozenset({"bottomGrid"}), frozenset({"sideGrid"})):
                verdicts.add(u, "2")
            elif s == frozenset({"topTree"}):
                if not _has_pair(halves, ("topTree", "ChL")) or not _has_pair(halves, ("topTree", "ChR")):
                    verdicts.add(u, "3a")
            elif s == frozenset({"colTree"}):
                if not _has_pair(halves, ("colTree", "P")):
                    verdicts.add(u, "3c")
                if not _has_pair(halves, ("colTree", "ChL")) or not _has_pair(halves, ("colTree", "ChR")):
                    verdicts.add(u, "4a")
        elif s in PATTERNS:
            entries, literal, extra = PATTERNS[s]
            if any(halves == Counter(entries[i] for i in pat) for pat in literal):
                continue
            if single_column and any(halves == Counter(entries[i] for i in pat) for pat in extra):
                verdicts.note(u, f"{PATTERN_IDS[s]}: accepted by the single-column pattern")
                continue
            verdicts.add(u, PATTERN_IDS[s])
        else:
            verdicts.add(u, "2")
    return verdicts


def _has_pair(halves: Counter, pair: tuple[str, str]) -> bool:
    return any(pair in h for h in halves)


# ---------------------------------------------------------------- invalidity proofs

_NEXT_DIRECTIONS = {"L": {"L"}, "R": {"R"}, "P": {"P", "L", "R"}, "ChR": {"ChR", "L", "R"}}


def _is_pointer(x) -> bool:
    return isinstance(x, Pointer)


def check_c_bad(graph: Graph, outputs: Mapping[tuple[int, int], object],
                proof: NodeVerdicts | None = None) -> NodeVerdicts:
    """Constraints 1-5 on invalidity-proof outputs; missing half-edges count as empty."""
    proof = check_c_proof(graph) if proof is None else proof
    verdicts = NodeVerdicts()
    out = lambda v, p: outputs.get((v, p))  # noqa: E731
    for u in graph.nodes:
        mine = [(p, out(u, p)) for p in range(graph.degree(u))]
        for p, x in mine:
            if x is None or x == ERROR:
                continue
            if not (_is_pointer(x) and x.counter in (1, 2, 3) and x.direction in POINTER_DIRECTIONS
                    and x.tag in TREE_TAGS):
                verdicts.add(u, "alphabet")
        if any(x == ERROR for _, x in mine) and u not in proof.failures:
            verdicts.add(u, "1")
        for p, x in mine:
            if not _is_pointer(x):
                continue
            if (x.tag, x.direction) not in pairs(graph, u, p):
                verdicts.add(u, "2")
            v, q = graph.ports[u][p]
            if _is_pointer(out(v, q)):
                verdicts.add(u, "3")
            theirs = [out(v, r) for r in range(graph.degree(v))]
            all_error = bool(theirs) and all(y == ERROR for y in theirs)
            follows = any(_is_pointer(y) and ((y.tag == x.tag and y.counter == x.counter)
                                              or (y.tag != x.tag and y.counter < x.counter))
                          for y in theirs)
            if not (all_error or follows):
                verdicts.add(u, "4")
            for y in theirs:
                if (_is_pointer(y) and y.tag == x.tag and y.counter == x.counter
                        and x.direction in _NEXT_DIRECTIONS
                        and y.direction not in _NEXT_DIRECTIONS[x.direction]):
                    verdicts.add(u, "5")
                    break
    for u, codes in list(verdicts.failures.items()):
        verdicts.failures[u] = tuple(dict.fromkeys(codes))
    return verdicts


def pointer_cycles(graph: Graph, outputs: Mapping[tuple[int, int], object]) -> list[list[int]]:
    """Directed cycles in the node graph whose arcs are pointer half-edges."""
    arcs: dict[int, set[int]] = {}
    for (v, p), x in outputs.items():
        if _is_pointer(x):
            arcs.setdefault(v, set()).add(graph.ports[v][p][0])
    colour: dict[int, int] = {}
    cycles: list[list[int]] = []
    for root in sorted(arcs):
        if root in colour:
            continue
        stack = [(root, iter(sorted(arcs.get(root, ()))))]
        path = [root]
        colour[root] = 1
        while stack:
            v, it = stack[-1]
            nxt = next(it, None)
            if nxt is None:
                colour[v] = 2
                stack.pop()
                path.pop()
            elif colour.get(nxt) == 1:
                cycles.append(path[path.index(nxt):] + [nxt])
            elif nxt not in colour:
                colour[nxt] = 1
                path.append(nxt)
                stack.append((nxt, iter(sorted(arcs.get(nxt, ())))))
    return cycles


def coverage(graph: Graph, outputs: Mapping[tuple[int, int], object]) -> list[int]:
    """Nodes that have no non-empty output on any half-edge."""
    return [v for v in graph.nodes
            if all(outputs.get((v, p)) is None for p in range(graph.degree(v)))]


def _walk(view: _Labeled, u: int, lab: str, marked: set[int], region) -> bool:
    seen = {u}
    v = u
    while True:
        v = view.f(v, [lab])
        if v is None or v in seen or v not in region:
            return False
        if v in marked:
            return True
        seen.add(v)


def _pointer_direction(view: _Labeled, u: int, marked: set[int], region) -> str | None:
    """First applicable rule among R*, L*, P*(L*|R*), ChR*(L*|R*) toward a marked node."""
    for lab in ("R", "L"):
        if _walk(view, u, lab, marked, region):
            return lab
    for lab in ("P", "ChR"):
        seen = {u}
        v = u
        while True:
            v = view.f(v, [lab])
            if v is None or v in seen or v not in region:
                break
            if v in marked or _walk(view, v, "R", marked, region) or _walk(view, v, "L", marked, region):
                return lab
            seen.add(v)
    return None


def _components(graph: Graph, view: _Labeled, region) -> list[set[int]]:
    seen: set[int] = set()
    comps = []
    for s in graph.nodes:
        if s in seen or s not in region or not view.ports(s):
            continue
        comp, queue = {s}, deque([s])
        seen.add(s)
        while queue:
            v = queue.popleft()
            for p, _ in view.ports(v):
                w = graph.ports[v][p][0]
                if w not in seen and w in region:
                    seen.add(w)
                    comp.add(w)
                    queue.append(w)
        comps.append(comp)
    return comps


@dataclass
class ProverTrace:
    """Which nodes were marked in which stage: 0 for local errors, i for the i-th pointer iteration."""
    stage: dict[int, int] = field(default_factory=dict)

    def nodes_at(self, stage: int) -> list[int]:
        return sorted(v for v, s in self.stage.items() if s == stage)


def prove_invalid(graph: Graph, region: Iterable[int] | None = None,
                  trace: ProverTrace | None = None) -> dict[tuple[int, int], object]:
    """Three-iteration marking and pointing procedure, computed on the whole given graph.

    Nodes outside `region` are ignored: never marked and never walked through.
    """
    region = set(graph.nodes) if region is None else set(region)
    proof = check_c_proof(graph)
    outputs: dict[tuple[int, int], object] = {h: None for h in graph.half_edges()}
    marked = {u for u in proof.failures if u in region}
    for u in marked:
        for p in range(graph.degree(u)):
            outputs[u, p] = ERROR
        if trace is not None:
            trace.stage[u] = 0
    if not marked:
        return outputs
    for counter in (1, 2, 3):
        newly: set[int] = set()
        for tag in TREE_TAGS:
            view = _Labeled(graph, tag_view(graph, tag))
            for comp in _components(graph, view, region):
                if not comp & marked:
                    continue
                for u in sorted(comp - marked):
                    direction = _pointer_direction(view, u, marked, region)
                    if direction is None:
                        continue
                    port = next(p for p, lab in view.ports(u) if lab == direction)
                    outputs[u, port] = Pointer(counter, direction, tag)
                    newly.add(u)
        for u in newly:
            if trace is not None:
                trace.stage.setdefault(u, counter)
        marked |= newly
    return outputs


# ---------------------------------------------------------------- LOCAL execution

def local_radius(n: int) -> int:
    """Gathering radius used by the LOCAL prover: 2 log2 n + 4."""
    return 2 * max(1, math.ceil(math.log2(max(n, 2)))) + 4


_CHECK_REACH = 6  # hops a node's own checks may look at


def _ball_decider(radius: int, decide):
    gather = sim.gather_ball(radius)

    def program(ctx):
        view = yield from gather(ctx)
        return decide(view, ctx)
    return program


class _ViewCache:
    """Per-run memo: all nodes that see the same ball share one computation."""

    def __init__(self, radius: int):
        self.radius = radius
        self.memo: dict = {}
        self.complete_views = 0
        self.partial_views = 0

    def analyse(self, view: sim.BallView):
        complete = set(view.links) == set(view.stubs)
        if complete:
            self.complete_views += 1
            key = ("all", frozenset(view.stubs))
        else:
            self.partial_views += 1
            key = ("ball", view.centre, frozenset(view.stubs))
        if key not in self.memo:
            g, ids = view.to_graph()
            pos = {x: k for k, x in enumerate(ids)}
            region = None
            if not complete:
                dist = g.bfs(pos[view.centre])
                region = {v for v, d in dist.items() if d <= self.radius - _CHECK_REACH}
            self.memo[key] = (g, ids, pos, prove_invalid(g, region))
        return self.memo[key]

    @staticmethod
    def own_ports(view: sim.BallView, g: Graph, pos: dict) -> list[int]:
        me = pos[view.centre]
        return [g.port_to(me, pos[y]) for y, _ in view.links[view.centre]]


@dataclass
class ProverRun:
    outputs: dict[tuple[int, int], object]
    rounds: int
    radius: int
    complete_views: int
    partial_views: int
    run: sim.RunResult


def solve_pi_bad(graph: Graph, radius: int | None = None, seed: int = 0) -> ProverRun:
    """Invalidity prover as a LOCAL program: gather a ball, run the procedure on it, keep own outputs."""
    radius = local_radius(graph.n) if radius is None else radius
    cache = _ViewCache(radius)

    def decide(view, ctx):
        g, _, pos, outs = cache.analyse(view)
        return [outs[pos[view.centre], p] if p is not None else None
                for p in _ViewCache.own_ports(view, g, pos)]

    result = sim.run(graph, _ball_decider(radius, decide), sim.LOCAL, seed=seed)
    outputs = {(v, p): result.outputs[v][p] for v, p in graph.half_edges()}
    return ProverRun(outputs, result.rounds, radius, cache.complete_views, cache.partial_views, result)


# ---------------------------------------------------------------- the combined problem

def row_heads(instance: FamilyInstance) -> dict[int, int]:
    """Bottom-grid node at x = 0 for every row y."""
    return {y: v for v, (x, y) in instance.grid.items() if x == 0}


def pi_instance(labeled: Graph, instance: FamilyInstance, row_bits: Sequence[int] | str) -> Graph:
    """Combined-problem inputs: row heads get their bit on every half-edge, everything else eps."""
    bits = [int(b) for b in row_bits]
    heads = row_heads(instance)
    if len(bits) != len(heads):
        raise ValueError(f"need {len(heads)} row bits, got {len(bits)}")
    value_of = {heads[y]: b for y, b in enumerate(bits)}
    g = labeled.copy()
    for v, p in g.half_edges():
        g.inputs[v][p] = (labeled.inputs[v][p], value_of.get(v, EPSILON))
    return g


def split_inputs(graph: Graph) -> tuple[Graph, dict[tuple[int, int], object]]:
    """(graph with proof-label inputs only, row-value input per half-edge)."""
    g = graph.copy()
    values = {}
    for v, p in graph.half_edges():
        label, value = graph.inputs[v][p]
        g.inputs[v][p] = label
        values[v, p] = value
    return g, values


def check_pi(graph: Graph, outputs: Mapping[tuple[int, int], tuple]) -> NodeVerdicts:
    """Combined constraints; `outputs[(v, p)]` is (proof-output, row value)."""
    proof_graph, alpha = split_inputs(graph)
    beta_bad = {h: outputs[h][0] for h in graph.half_edges()}
    beta = {h: outputs[h][1] for h in graph.half_edges()}
    verdicts = NodeVerdicts()
    for u, codes in check_c_bad(proof_graph, beta_bad).failures.items():
        for code in codes:
            verdicts.add(u, f"1:{code}")
    for u in graph.nodes:
        deg = graph.degree(u)
        if deg == 0 or any(beta_bad[u, p] is not None for p in range(deg)):
            continue
        if any(beta[u, p] not in ROW_VALUES for p in range(deg)):
            verdicts.add(u, "alphabet")
        if "bottomGrid" not in node_tags(proof_graph, u):
            continue
        lefts = [p for p in range(deg) if ("bottomGrid", "L") in pairs(proof_graph, u, p)]
        if not lefts:
            ins = {alpha[u, p] for p in range(deg)}
            if len(ins) == 1 and any(beta[u, p] != alpha[u, p] for p in range(deg)):
                verdicts.add(u, "3")
        for p in lefts:
            v, q = graph.ports[u][p]
            if ("bottomGrid", "R") not in pairs(proof_graph, v, q):
                verdicts.add(u, "4")
                continue
            want = beta[v, q]
            if any(beta[u, r] != want for r in range(deg)):
                verdicts.add(u, "4")
    return verdicts


def _row_value(g: Graph, values: Mapping, u: int) -> object:
    """Head value for u's row, walking bottomGrid L half-edges inside g."""
    view = _Labeled(g, tag_view(g, "bottomGrid"))
    seen = {u}
    v = u
    while view.has(v, "L"):
        nxt = view.f(v, ["L"])
        if nxt is None or nxt in seen:
            return EPSILON
        seen.add(nxt)
        v = nxt
    head_inputs = [values[v, p] for p in range(g.degree(v))]
    return head_inputs[0] if head_inputs else EPSILON


@dataclass
class PiRun:
    outputs: dict[tuple[int, int], tuple]
    rounds: int
    radius: int
    used_proof: bool
    complete_views: int
    partial_views: int


def solve_pi_local(graph: Graph, radius: int | None = None, seed: int = 0) -> PiRun:
    """Gather-and-decide LOCAL solver for the combined problem.

    A node whose ball exposes an invalidity emits the prover's output; a
    node that sees no invalidity propagates its row head's bit.
    """
    radius = local_radius(graph.n) if radius is None else radius
    cache = _ViewCache(radius)
    split_memo: dict = {}

    def decide(view, ctx):
        g, _, pos, outs = cache.analyse(view)
        key = id(g)
        if key not in split_memo:
            split_memo[key] = split_inputs(g)
        proof_g, values = split_memo[key]
        me = pos[view.centre]
        ports = _ViewCache.own_ports(view, g, pos)
        mine = [outs[me, p] for p in ports]
        if any(x is not None for x in mine):
            return [(x, EPSILON) for x in mine]
        if "bottomGrid" not in node_tags(proof_g, me):
            return [(None, EPSILON)] * len(ports)
        value = _row_value(proof_g, values, me)
        return [(None, value)] * len(ports)

    result = sim.run(graph, _ball_decider(radius, decide), sim.LOCAL, seed=seed)
    outputs = {(v, p): result.outputs[v][p] for v, p in graph.half_edges()}
    used = any(o[0] is not None for o in outputs.values())
    return PiRun(outputs, result.rounds, radius, used, cache.complete_views, cache.partial_views)



# ---------------------------------------------------------------- exhaustive no-cheat search

class SearchTooLarge(RuntimeError):
    pass


def output_options(graph: Graph, proof: NodeVerdicts) -> dict[tuple[int, int], list]:
    """Per half-edge outputs that survive the single-half-edge constraints 1, 2 and the alphabet.

    Everything dropped here is rejected by check_c_bad no matter what the
    other half-edges carry, so enumerating the product of what is left is
    still exhaustive.
    """
    options = {}
    for v, p in graph.half_edges():
        opts: list = [None]
        if v in proof.failures:
            opts.append(ERROR)
        for tag, lab in sorted(pairs(graph, v, p)):
            if tag in TREE_TAGS and lab in POINTER_DIRECTIONS:
                opts.extend(Pointer(c, lab, tag) for c in (1, 2, 3))
        options[v, p] = opts
    return options


def accepted_bad_outputs(graph: Graph, guard: int = 2_000_000) -> list[dict]:
    proof = check_c_proof(graph)
    options = output_options(graph, proof)
    keys = sorted(options)
    total = math.prod(len(options[k]) for k in keys)
    if total > guard:
        raise SearchTooLarge(f"{total} candidate outputs exceed the guard {guard}")
    accepted = []
    for combo in product(*(options[k] for k in keys)):
        outs = dict(zip(keys, combo))
        if check_c_bad(graph, outs, proof).ok:
            accepted.append(outs)
    return accepted


# ---------------------------------------------------------------- mutation fuzzing

@dataclass(frozen=True)
class Mutation:
    kind: str                 # "delete" or "retag"
    endpoints: tuple[int, int]
    detail: str

    def to_json(self) -> dict:
        return {"kind": self.kind, "endpoints": list(self.endpoints), "detail": self.detail}


def mutate(labeled: Graph, rng: random.Random) -> tuple[Graph, Mutation]:
    """Delete one random edge, or move one of its structure labels to a different tag."""
    eid = rng.randrange(len(labeled.edges))
    u, pu, v, pv = labeled.edges[eid]
    if rng.random() < 0.5:
        return labeled.without_edge(eid), Mutation("delete", (u, v), f"edge {eid}")
    tags = sorted(half_tags(labeled, u, pu) | half_tags(labeled, v, pv))
    old = rng.choice(tags)
    new = rng.choice([t for t in ALL_TAGS if t != old])
    g = labeled.copy()
    for x, px in ((u, pu), (v, pv)):
        g.inputs[x][px] = frozenset((new if t == old else t, lab) for t, lab in pairs(labeled, x, px))
    return g, Mutation("retag", (u, v), f"edge {eid}: {old} -> {new}")


def mutations(labeled: Graph, count: int, seed: int) -> list[tuple[Graph, Mutation]]:
    rng = random.Random(seed)
    return [mutate(labeled, rng) for _ in range(count)]


def failure_near(graph: Graph, verdicts: NodeVerdicts, mutation: Mutation, radius: int = 4) -> bool:
    near: set[int] = set()
    for end in mutation.endpoints:
        near |= set(graph.bfs(end, radius))
    return any(v in near for v in verdicts.failures)


# ---------------------------------------------------------------- bandwidth bottleneck

def moving_cut_bound(k: int, top_levels: int, bits: int) -> Fraction:
    """k input bits must cross a cut that admits 2 * top_levels messages of `bits` bits per round."""
    if k < 1 or top_levels < 1 or bits < 1:
        raise ValueError("k, top_levels and bits must be positive")
    return Fraction(k, 2 * top_levels * bits)


@dataclass
class BottleneckReport:
    n: int
    k: int
    top_levels: int
    bits: int
    crossings: list[int]       # per simulation step, edges entering the kept set from outside
    bound: Fraction

    @property
    def max_crossings(self) -> int:
        return max(self.crossings, default=0)

    @property
    def rounds_lower_bound(self) -> int:
        """The certified round count, never below the trivial single round."""
        return max(1, math.ceil(self.bound))

    def to_json(self) -> dict:
        return {"kind": "bound certificate (arithmetic over this instance, not a proof)",
                "n": self.n, "k": self.k, "top_levels": self.top_levels, "bits": self.bits,
                "per_round_capacity_bits": 2 * self.top_levels * self.bits,
                "bound": f"{self.bound.numerator}/{self.bound.denominator}",
                "bound_float": float(self.bound), "rounds_lower_bound": self.rounds_lower_bound,
                "max_crossings": self.max_crossings, "crossings": self.crossings}


def _up_closure(instance: FamilyInstance, column: int) -> set[int]:
    """Column `column` of the bottom grid plus every node reachable by parent steps."""
    col_at = {c: v for v, c in instance.col_tree.items()}
    top_at = {c: v for v, c in instance.top_tree.items()}
    out: set[int] = set()
    for (i, l, k), v in col_at.items():
        if i == column:
            out.add(v)  # every column-tree node is an ancestor of some leaf in its column
    layer, pos = instance.top_levels - 1, column
    while layer >= 0:
        out.add(top_at[layer, pos])
        layer, pos = layer - 1, pos // 2
    return out


def bottleneck_report(instance: FamilyInstance, bits: int) -> BottleneckReport:
    if instance.height != instance.width:
        raise ValueError(f"bottom grid is {instance.height}x{instance.width}, need a square")
    k = instance.width
    g = instance.graph
    kept_from = [set() for _ in range(k + 1)]  # kept_from[r] = union of closures of columns >= r
    for j in range(k - 1, -1, -1):
        kept_from[j] = kept_from[j + 1] | _up_closure(instance, j)
    crossings = []
    for r in range(k - 2):
        before, after = kept_from[r + 1], kept_from[r + 2]
        crossings.append(sum(1 for u in after for w, _ in g.ports[u] if w not in before))
    return BottleneckReport(g.n, k, instance.top_levels, bits, crossings,
                            moving_cut_bound(k, instance.top_levels, bits))
