"""Port-numbered bounded-degree graphs, generators, and path following.

A graph stores, for each node, an ordered list of ports.  Port ``p`` of node
``v`` leads to ``(u, q)``, meaning the edge re-enters ``u`` through port ``q``.
A *half-edge* is the pair ``(v, p)``; it carries an input label.  Edges also
get dense ids in insertion order so that edge-labelings can be plain lists.
"""

from __future__ import annotations

import json
import random
from collections import deque
from dataclasses import dataclass, field
from typing import Callable, Hashable, Iterable, Mapping, Sequence

DEFAULT_INPUT = "-"

GRID_TAGS = ("bottomGrid", "sideGrid")
TREE_TAGS = ("colTree", "topTree")
ALL_TAGS = ("bottomGrid", "sideGrid", "colTree", "topTree")


class GraphError(ValueError):
    pass


class Graph:
    def __init__(self, n: int, max_degree: int | None = None):
        if n < 0:
            raise GraphError("node count must be non-negative")
        self.max_degree = max_degree
        self.ports: list[list[tuple[int, int]]] = [[] for _ in range(n)]
        self.inputs: list[list[Hashable]] = [[] for _ in range(n)]
        self.edge_ids: list[list[int]] = [[] for _ in range(n)]
        # (u, port_u, v, port_v) per edge id
        self.edges: list[tuple[int, int, int, int]] = []
        self._edge_index: dict[tuple[int, int], int] = {}

    @property
    def n(self) -> int:
        return len(self.ports)

    @property
    def nodes(self) -> range:
        return range(len(self.ports))

    def degree(self, v: int) -> int:
        return len(self.ports[v])

    def neighbors(self, v: int) -> list[int]:
        return [u for u, _ in self.ports[v]]

    def half_edges(self) -> Iterable[tuple[int, int]]:
        for v, plist in enumerate(self.ports):
            for p in range(len(plist)):
                yield v, p

    def add_node(self) -> int:
        self.ports.append([])
        self.inputs.append([])
        self.edge_ids.append([])
        return len(self.ports) - 1

    def add_edge(self, u: int, v: int, input_u: Hashable = DEFAULT_INPUT,
                 input_v: Hashable = DEFAULT_INPUT) -> int:
        if u == v:
            raise GraphError(f"self-loop at {u}")
        key = (min(u, v), max(u, v))
        if key in self._edge_index:
            raise GraphError(f"duplicate edge {key}")
        if self.max_degree is not None:
            for w in (u, v):
                if self.degree(w) >= self.max_degree:
                    raise GraphError(f"node {w} would exceed degree bound {self.max_degree}")
        pu, pv = len(self.ports[u]), len(self.ports[v])
        eid = len(self.edges)
        self.ports[u].append((v, pv))
        self.ports[v].append((u, pu))
        self.inputs[u].append(input_u)
        self.inputs[v].append(input_v)
        self.edge_ids[u].append(eid)
        self.edge_ids[v].append(eid)
        self.edges.append((u, pu, v, pv))
        self._edge_index[key] = eid
        return eid

    def edge_between(self, u: int, v: int) -> int | None:
        return self._edge_index.get((min(u, v), max(u, v)))

    def port_to(self, u: int, v: int) -> int | None:
        eid = self.edge_between(u, v)
        if eid is None:
            return None
        a, pa, _, pb = self.edges[eid]
        return pa if a == u else pb

    def other_end(self, v: int, port: int) -> tuple[int, int]:
        return self.ports[v][port]

    def copy(self) -> "Graph":
        out = Graph(self.n, self.max_degree)
        out.ports = [list(p) for p in self.ports]
        out.inputs = [list(i) for i in self.inputs]
        out.edge_ids = [list(e) for e in self.edge_ids]
        out.edges = list(self.edges)
        out._edge_index = dict(self._edge_index)
        return out

    def without_edge(self, eid: int) -> "Graph":
        """Rebuild the graph minus one edge; surviving ports keep their relative order."""
        out = Graph(self.n, self.max_degree)
        for k, (u, pu, v, pv) in enumerate(self.edges):
            if k != eid:
                out.add_edge(u, v, self.inputs[u][pu], self.inputs[v][pv])
        return out

    def check_port_symmetry(self) -> bool:
        for v, plist in enumerate(self.ports):
            for p, (u, q) in enumerate(plist):
                if not (0 <= u < self.n) or q >= len(self.ports[u]) or self.ports[u][q] != (v, p):
                    return False
        return True

    def bfs(self, source: int, limit: int | None = None) -> dict[int, int]:
        dist = {source: 0}
        queue = deque([source])
        while queue:
            v = queue.popleft()
            if limit is not None and dist[v] >= limit:
                continue
            for u, _ in self.ports[v]:
                if u not in dist:
                    dist[u] = dist[v] + 1
                    queue.append(u)
        return dist

    def is_connected(self) -> bool:
        return self.n == 0 or len(self.bfs(0)) == self.n

    def is_tree(self) -> bool:
        return self.n >= 1 and len(self.edges) == self.n - 1 and self.is_connected()

    def diameter(self) -> int:
        if self.n == 0:
            return 0
        if self.is_tree():
            far = max(self.bfs(0).items(), key=lambda kv: kv[1])[0]
            return max(self.bfs(far).values())
        return max(max(self.bfs(v).values()) for v in self.nodes)

    def __eq__(self, other: object) -> bool:
        return (isinstance(other, Graph) and self.ports == other.ports
                and self.inputs == other.inputs and self.max_degree == other.max_degree)

    def __repr__(self) -> str:
        return f"Graph(n={self.n}, m={len(self.edges)}, max_degree={self.max_degree})"


@dataclass
class Structured:
    """A graph together with a coordinate for every node."""
    graph: Graph
    coords: list[tuple[int, ...]]
    index: dict[tuple[int, ...], int] = field(default_factory=dict)

    def __post_init__(self):
        if not self.index:
            self.index = {c: v for v, c in enumerate(self.coords)}


def make_grid(h: int, w: int) -> Structured:
    """h rows by w columns; node (x, y) with 0 <= x < w, 0 <= y < h."""
    if h < 1 or w < 1:
        raise GraphError("grid dimensions must be positive")
    coords = [(x, y) for y in range(h) for x in range(w)]
    g = Graph(len(coords), max_degree=4)
    idx = {c: v for v, c in enumerate(coords)}
    for y in range(h):
        for x in range(w):
            if x + 1 < w:
                g.add_edge(idx[x, y], idx[x + 1, y])
            if y + 1 < h:
                g.add_edge(idx[x, y], idx[x, y + 1])
    return Structured(g, coords, idx)


def make_tree_like(levels: int) -> Structured:
    """Complete binary tree of `levels` layers plus a horizontal path on every layer."""
    if levels < 1:
        raise GraphError("need at least one layer")
    coords = [(l, k) for l in range(levels) for k in range(2 ** l)]
    g = Graph(len(coords), max_degree=5)
    idx = {c: v for v, c in enumerate(coords)}
    for l, k in coords:
        if l > 0:
            g.add_edge(idx[l, k], idx[l - 1, k // 2])
        if k > 0:
            g.add_edge(idx[l, k - 1], idx[l, k])
    return Structured(g, coords, idx)


@dataclass
class FamilyInstance:
    graph: Graph
    tags: list[frozenset[str]]  # per edge id
    levels: int                 # column-tree height
    top_levels: int             # top-tree height
    grid: dict[int, tuple[int, int]]             # bottom grid (x, y)
    side: dict[int, tuple[int, int]]             # side grid (x, y)
    col_tree: dict[int, tuple[int, int, int]]    # (column, layer, position)
    top_tree: dict[int, tuple[int, int]]         # (layer, position)

    @property
    def height(self) -> int:
        return 2 ** (self.levels - 1)

    @property
    def width(self) -> int:
        return 2 ** (self.top_levels - 1)

    def node_tags(self, v: int) -> frozenset[str]:
        out: set[str] = set()
        for eid in self.graph.edge_ids[v]:
            out |= self.tags[eid]
        return frozenset(out)


def make_family_instance(levels: int, top_levels: int) -> FamilyInstance:
    """Bottom grid, one column tree per column, side grid, and a top tree over the column roots.

    Grid height is 2**(levels-1) and width 2**(top_levels-1) so that every
    identification between structures is a bijection.
    """
    if levels < 2 or top_levels < 1:
        raise GraphError("need levels >= 2 and top_levels >= 1")
    h, w = 2 ** (levels - 1), 2 ** (top_levels - 1)
    g = Graph(0, max_degree=None)
    tags: list[set[str]] = []

    def link(u: int, v: int, tag: str) -> None:
        eid = g.edge_between(u, v)
        if eid is None:
            eid = g.add_edge(u, v)
            tags.append(set())
        tags[eid].add(tag)

    grid: dict[int, tuple[int, int]] = {}
    grid_at: dict[tuple[int, int], int] = {}
    for y in range(h):
        for x in range(w):
            v = g.add_node()
            grid[v], grid_at[x, y] = (x, y), v

    col_tree: dict[int, tuple[int, int, int]] = {}
    col_at: dict[tuple[int, int, int], int] = {}
    for i in range(w):
        for l in range(levels):
            for k in range(2 ** l):
                v = grid_at[i, k] if l == levels - 1 else g.add_node()
                col_tree[v], col_at[i, l, k] = (i, l, k), v

    top_tree: dict[int, tuple[int, int]] = {}
    top_at: dict[tuple[int, int], int] = {}
    for l in range(top_levels):
        for k in range(2 ** l):
            v = col_at[k, 0, 0] if l == top_levels - 1 else g.add_node()
            top_tree[v], top_at[l, k] = (l, k), v

    side: dict[int, tuple[int, int]] = {}
    side_at: dict[tuple[int, int], int] = {}
    for x in range(w):
        for y in range(levels):
            v = col_at[x, levels - 1 - y, 0]
            side[v], side_at[x, y] = (x, y), v

    for (x, y), v in grid_at.items():
        if x + 1 < w:
            link(v, grid_at[x + 1, y], "bottomGrid")
        if y + 1 < h:
            link(v, grid_at[x, y + 1], "bottomGrid")
    for (i, l, k), v in col_at.items():
        if l > 0:
            link(v, col_at[i, l - 1, k // 2], "colTree")
        if k > 0:
            link(col_at[i, l, k - 1], v, "colTree")
    for (x, y), v in side_at.items():
        if x + 1 < w:
            link(v, side_at[x + 1, y], "sideGrid")
        if y + 1 < levels:
            link(v, side_at[x, y + 1], "sideGrid")
    for (l, k), v in top_at.items():
        if l > 0:
            link(v, top_at[l - 1, k // 2], "topTree")
        if k > 0:
            link(top_at[l, k - 1], v, "topTree")

    return FamilyInstance(g, [frozenset(t) for t in tags], levels, top_levels,
                          grid, side, col_tree, top_tree)


def random_tree(n: int, max_degree: int, seed: int) -> Graph:
    """Random recursive tree: each new node attaches to a uniformly chosen node with spare degree."""
    if n < 1:
        raise GraphError("n must be at least 1")
    if max_degree < 2 and n > 2:
        raise GraphError("degree bound below 2 cannot span more than two nodes")
    rng = random.Random(seed)
    g = Graph(n, max_degree=max_degree)
    open_slots = [0]
    for v in range(1, n):
        pick = rng.randrange(len(open_slots))
        u = open_slots[pick]
        g.add_edge(u, v)
        if g.degree(u) >= max_degree:
            open_slots[pick] = open_slots[-1]
            open_slots.pop()
        if g.degree(v) < max_degree:
            open_slots.append(v)
    return g


def path_graph(n: int) -> Graph:
    g = Graph(n, max_degree=2)
    for v in range(n - 1):
        g.add_edge(v, v + 1)
    return g


def star_graph(leaves: int) -> Graph:
    g = Graph(leaves + 1, max_degree=max(leaves, 1))
    for v in range(1, leaves + 1):
        g.add_edge(0, v)
    return g


def complete_binary_tree(depth: int) -> Graph:
    n = 2 ** (depth + 1) - 1
    g = Graph(n, max_degree=3)
    for v in range(1, n):
        g.add_edge((v - 1) // 2, v)
    return g


def from_edge_list(n: int, edges: Iterable[tuple[int, int]], max_degree: int | None = None) -> Graph:
    g = Graph(n, max_degree)
    for u, v in edges:
        g.add_edge(u, v)
    return g


HalfEdgeLabels = Mapping[tuple[int, int], Hashable] | Callable[[int, int], Hashable]


def _lookup(labels: HalfEdgeLabels, v: int, p: int):
    if callable(labels):
        return labels(v, p)
    return labels.get((v, p))


def follow(graph: Graph, start: int, sequence: Sequence[Hashable], labels: HalfEdgeLabels) -> int | None:
    """Walk from `start`, each step taking the unique port whose label matches.

    Returns None when some step has zero or several matching ports.
    """
    v = start
    for wanted in sequence:
        hits = [p for p in range(graph.degree(v)) if _lookup(labels, v, p) == wanted]
        if len(hits) != 1:
            return None
        v = graph.ports[v][hits[0]][0]
    return v


# ---------------------------------------------------------------- serialization

def _jsonable(x):
    if isinstance(x, (tuple, list)):
        return [_jsonable(i) for i in x]
    if isinstance(x, (set, frozenset)):
        return {"__set__": sorted((_jsonable(i) for i in x), key=json.dumps)}
    return x


def _unjson(x):
    if isinstance(x, list):
        return tuple(_unjson(i) for i in x)
    if isinstance(x, dict) and "__set__" in x:
        return frozenset(_unjson(i) for i in x["__set__"])
    return x


def to_json(graph: Graph) -> str:
    payload = {
        "n": graph.n,
        "max_degree": graph.max_degree,
        "edges": [[u, pu, v, pv, _jsonable(graph.inputs[u][pu]), _jsonable(graph.inputs[v][pv])]
                  for u, pu, v, pv in graph.edges],
    }
    return json.dumps(payload, sort_keys=True)


def from_json(text: str) -> Graph:
    payload = json.loads(text)
    g = Graph(payload["n"], payload["max_degree"])
    for u, pu, v, pv, iu, iv in payload["edges"]:
        g.add_edge(u, v, _unjson(iu), _unjson(iv))
        if g.edges[-1] != (u, pu, v, pv):
            raise GraphError(f"port numbers of edge {u}-{v} are not reproducible")
    return g


def to_edge_list(graph: Graph) -> str:
    """One header line, then one tab-separated line per edge: u pu v pv input_u input_v."""
    lines = [f"graph\t{graph.n}\t{graph.max_degree if graph.max_degree is not None else '*'}"]
    for u, pu, v, pv in graph.edges:
        lu = json.dumps(_jsonable(graph.inputs[u][pu]), separators=(",", ":"))
        lv = json.dumps(_jsonable(graph.inputs[v][pv]), separators=(",", ":"))
        lines.append(f"{u}\t{pu}\t{v}\t{pv}\t{lu}\t{lv}")
    return "\n".join(lines) + "\n"


def from_edge_list_text(text: str) -> Graph:
    rows = [line for line in text.splitlines() if line and not line.startswith("#")]
    head = rows[0].split("\t")
    if head[0] != "graph":
        raise GraphError("missing graph header")
    g = Graph(int(head[1]), None if head[2] == "*" else int(head[2]))
    for row in rows[1:]:
        u, pu, v, pv, lu, lv = row.split("\t")
        g.add_edge(int(u), int(v), _unjson(json.loads(lu)), _unjson(json.loads(lv)))
        if g.edges[-1] != (int(u), int(pu), int(v), int(pv)):
            raise GraphError(f"port numbers of edge {u}-{v} are not reproducible")
    return g
