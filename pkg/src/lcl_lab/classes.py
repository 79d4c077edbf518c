"""Label-sets, classes of feasible boundary labelings, and the search for f.

Everything here works on node-edge problems viewed in black-white form: a
graph node is white, an edge is a black node of degree two, and a *BW edge*
is a half-edge.  A label-set travels from a child u to its parent w and is
the set of labels on u's own half of the edge {u, w} for which u's subtree
can be completed.  The parent folds it through the edge's black constraint
to get the labels allowed on its own half.

Compress paths v_1..v_x are handled as a chain of BW edges
E_0, E_1, ..., E_{2x-1}: E_0 is v_1's half towards its upper neighbour,
E_{2k-1} and E_{2k} are the two halves of {v_k, v_{k+1}}, and E_{2x-1} is
v_x's half towards its upper neighbour.  Fixing one interior BW edge cuts
the chain in two, which makes the endpoint projections independent.
"""

from __future__ import annotations

import itertools
import json
import random
from collections import Counter
from dataclasses import dataclass, field
from typing import Callable, Hashable, Iterable, Sequence

from .decomp import RAKE, Decomposition, rake_compress, rank
from .graph import Graph, _jsonable, _unjson
from .lcl import (BwProblem, SearchRefused, _pair_index, brute_force_solve, canon,
                  check_node_edge)

Label = Hashable
LabelSet = frozenset


class EmptyClassError(Exception):
    def __init__(self, node: int, layer, detail: str = ""):
        self.node = node
        self.layer = layer
        self.detail = detail
        super().__init__(f"empty class at node {node} in sublayer {layer}: {detail}")


# ---------------------------------------------------------------- single-node primitives

_COMPLETE_CACHE: dict = {}


def complete(problem: BwProblem, color: str, fixed: Sequence[tuple], incoming: Sequence[tuple]):
    """First (in output-alphabet order) labels for `incoming` ports making the node happy.

    `fixed` lists (input, label) pairs already decided; `incoming` lists
    (input, label-set) per open port.  Returns a tuple of labels, one per
    open port, or None when no completion exists.
    """
    key = (id(problem), color, tuple(fixed), tuple((i, frozenset(s)) for i, s in incoming))
    hit = _COMPLETE_CACHE.get(key, _COMPLETE_CACHE)
    if hit is not _COMPLETE_CACHE:
        return hit
    index = _pair_index(problem, color)
    inputs = [i for i, _ in fixed] + [i for i, _ in incoming]
    configs = [Counter(c) for c in index.get((len(inputs), canon(inputs)), ())]
    start = Counter(fixed)
    configs = [c for c in configs if not (start - c)]
    order = problem.sigma_out
    chosen: list = []

    def dfs(k, partial, alive):
        if not alive:
            return False
        if k == len(incoming):
            return True
        inp, allowed = incoming[k]
        for lab in order:
            if lab not in allowed:
                continue
            partial[(inp, lab)] += 1
            still = [c for c in alive if c[(inp, lab)] >= partial[(inp, lab)]]
            chosen.append(lab)
            if dfs(k + 1, partial, still):
                return True
            chosen.pop()
            partial[(inp, lab)] -= 1
        return False

    result = tuple(chosen) if dfs(0, Counter(start), configs) else None
    if len(_COMPLETE_CACHE) > 500_000:
        _COMPLETE_CACHE.clear()
    _COMPLETE_CACHE[key] = result
    return result


def rake_g(problem: BwProblem, color: str, incoming: Sequence[tuple], out_input) -> LabelSet:
    """Labels on the single outgoing BW edge for which the node can be completed."""
    return frozenset(o for o in problem.sigma_out
                     if complete(problem, color, [(out_input, o)], incoming) is not None)


def fold(problem: BwProblem, child_input, child_set: LabelSet, parent_input) -> LabelSet:
    """Push a child's label-set through the edge constraint onto the parent's half."""
    return rake_g(problem, "B", [(child_input, child_set)], parent_input)


def pick_child_label(problem: BwProblem, child_input, child_set: LabelSet, parent_input, parent_label):
    for a in problem.sigma_out:
        if a in child_set and problem.black_ok([(child_input, a), (parent_input, parent_label)]):
            return a
    return None


# ---------------------------------------------------------------- generic classes

@dataclass
class Piece:
    """A small BW subgraph; nodes coloured "X" are outside the piece and unconstrained."""
    graph: Graph
    colors: list[str]
    inputs: list          # per edge id
    label_sets: dict      # edge id -> allowed labels, for incoming boundary edges
    out_edges: list[int]  # outgoing boundary edges


@dataclass
class Class:
    edges: int
    labelings: frozenset  # of tuples indexed by edge id
    out_edges: list[int]

    def projection(self, edges: Sequence[int] | None = None) -> set[tuple]:
        edges = self.out_edges if edges is None else edges
        return {tuple(lab[e] for e in edges) for lab in self.labelings}

    def marginal(self, k: int) -> set:
        return {lab[self.out_edges[k]] for lab in self.labelings}


def maximal_class(problem: BwProblem, piece: Piece, guard: int = 2_000_000) -> Class:
    """Every feasible labeling of the piece, by exhaustive enumeration."""
    g = piece.graph
    domains = [sorted(piece.label_sets.get(e, problem.sigma_out), key=problem.sigma_out.index)
               for e in range(len(g.edges))]
    total = 1
    for d in domains:
        total *= max(len(d), 1)
    if total > guard:
        raise SearchRefused(f"{total} labelings exceeds guard {guard}")
    checked = [v for v in g.nodes if piece.colors[v] in ("W", "B")]
    found = set()
    for lab in itertools.product(*domains):
        ok = True
        for v in checked:
            pairs = [(piece.inputs[e], lab[e]) for e in g.edge_ids[v]]
            allowed = problem.white if piece.colors[v] == "W" else problem.black
            if canon(pairs) not in allowed:
                ok = False
                break
        if ok:
            found.add(lab)
    return Class(len(g.edges), frozenset(found), list(piece.out_edges))


def is_independent(cls: Class) -> bool:
    """True iff the projection onto the outgoing edges is the product of its marginals."""
    if not cls.labelings:
        return True
    proj = cls.projection()
    marginals = [sorted(cls.marginal(k), key=repr) for k in range(len(cls.out_edges))]
    return all(combo in proj for combo in itertools.product(*marginals))


def node_piece(color: str, incoming: Sequence[tuple], out_inputs: Sequence) -> Piece:
    """A single node with labelled incoming edges and free outgoing edges."""
    g = Graph(1 + len(incoming) + len(out_inputs))
    colors = [color] + ["X"] * (len(incoming) + len(out_inputs))
    inputs, sets, outs = [], {}, []
    for k, (inp, allowed) in enumerate(incoming):
        e = g.add_edge(0, 1 + k)
        inputs.append(inp)
        sets[e] = frozenset(allowed)
    for k, inp in enumerate(out_inputs):
        e = g.add_edge(0, 1 + len(incoming) + k)
        inputs.append(inp)
        outs.append(e)
    return Piece(g, colors, inputs, sets, outs)


# ---------------------------------------------------------------- compress paths

@dataclass(frozen=True)
class PathShape:
    inputs: tuple     # inputs of E_0 .. E_{2x-1}
    incoming: tuple   # per path node: canonical tuple of (input, labels tuple)

    @property
    def x(self) -> int:
        return len(self.incoming)

    def to_json(self):
        return _jsonable([self.inputs, self.incoming])

    @classmethod
    def from_json(cls, data) -> "PathShape":
        inputs, incoming = _unjson(data)
        return cls(inputs, incoming)


def fixed_index(x: int) -> int:
    """BW edge fixed by f: the left half of path edge floor(x/2), or E_0 when x == 1."""
    return max(0, 2 * (x // 2) - 1)


def make_shape(problem: BwProblem, inputs: Sequence, incoming: Sequence[Sequence[tuple]]) -> PathShape:
    order = problem.out_index()
    nodes = []
    for ports in incoming:
        nodes.append(canon((i, tuple(sorted(s, key=order.__getitem__))) for i, s in ports))
    return PathShape(tuple(inputs), tuple(nodes))


_REL_CACHE: dict = {}


def _relations(problem: BwProblem, shape: PathShape) -> list[set[tuple]]:
    """rel[t] relates labels on E_t and E_{t+1}."""
    key = (id(problem), shape)
    if key in _REL_CACHE:
        return _REL_CACHE[key]
    sigma = problem.sigma_out
    rels = []
    for k in range(shape.x):
        left_in, right_in = shape.inputs[2 * k], shape.inputs[2 * k + 1]
        inc = [(i, frozenset(s)) for i, s in shape.incoming[k]]
        rels.append({(a, b) for a in sigma for b in sigma
                     if complete(problem, "W", [(left_in, a), (right_in, b)], inc) is not None})
        if k + 1 < shape.x:
            here, there = shape.inputs[2 * k + 1], shape.inputs[2 * k + 2]
            rels.append({(a, b) for a in sigma for b in sigma
                         if problem.black_ok([(here, a), (there, b)])})
    if len(_REL_CACHE) > 200_000:
        _REL_CACHE.clear()
    _REL_CACHE[key] = rels
    return rels


def _forward(rels, start: set, restrict: dict) -> list[set]:
    sets = [set(start) & restrict.get(0, set(start))]
    for t, rel in enumerate(rels):
        nxt = {b for a, b in rel if a in sets[-1]}
        if t + 1 in restrict:
            nxt &= restrict[t + 1]
        sets.append(nxt)
    return sets


def _backward(rels, end: set, restrict: dict) -> list[set]:
    last = len(rels)
    sets = [set(end) & restrict.get(last, set(end))]
    for t in range(last - 1, -1, -1):
        prev = {a for a, b in rels[t] if b in sets[0]}
        if t in restrict:
            prev &= restrict[t]
        sets.insert(0, prev)
    return sets


def path_relation(problem: BwProblem, shape: PathShape) -> set[tuple]:
    """Projection of the maximal class onto (E_0, E_{2x-1})."""
    rels = _relations(problem, shape)
    out = set()
    for a in problem.sigma_out:
        for b in _forward(rels, {a}, {})[-1]:
            out.add((a, b))
    return out


def compress_g(problem: BwProblem, shape: PathShape, fixed_label) -> tuple[LabelSet, LabelSet]:
    """Endpoint label-sets of the class obtained by fixing the cut edge to `fixed_label`."""
    rels = _relations(problem, shape)
    idx = fixed_index(shape.x)
    sigma = set(problem.sigma_out)
    left = _backward(rels[:idx], {fixed_label}, {})[0] if idx > 0 else ({fixed_label} & sigma)
    right = _forward(rels[idx:], {fixed_label}, {})[-1]
    if not left or not right:
        return frozenset(), frozenset()
    return frozenset(left), frozenset(right)


def path_class(problem: BwProblem, shape: PathShape, fixed_label) -> Class:
    """The (E_0, E_{2x-1}) projection of the restricted class, as a Class over two edges."""
    rels = _relations(problem, shape)
    idx = fixed_index(shape.x)
    pairs = set()
    for a in problem.sigma_out:
        for b in _forward(rels, {a}, {idx: {fixed_label}})[-1]:
            pairs.add((a, b))
    return Class(2, frozenset(pairs), [0, 1])


def assign_path(problem: BwProblem, shape: PathShape, fixed_label, first, last) -> list | None:
    """Labels for E_0..E_{2x-1} with the given ends and cut label; first choice in alphabet order."""
    rels = _relations(problem, shape)
    idx = fixed_index(shape.x)
    fwd = _forward(rels, {first}, {idx: {fixed_label}})
    if last not in fwd[-1]:
        return None
    labels = [None] * len(fwd)
    labels[-1] = last
    for t in range(len(fwd) - 2, -1, -1):
        labels[t] = next(a for a in problem.sigma_out if a in fwd[t] and (a, labels[t + 1]) in rels[t])
    return labels


# ---------------------------------------------------------------- f

def _candidates(problem: BwProblem, shape: PathShape) -> list[tuple]:
    out = []
    for lam in problem.sigma_out:
        left, right = compress_g(problem, shape, lam)
        if left and right:
            out.append((lam, left, right))
    return out


def _parent_view(problem: BwProblem, child_input, labels: LabelSet) -> int:
    """How many labels the upper neighbour keeps on its own half, summed over its possible inputs."""
    return sum(len(fold(problem, child_input, labels, i)) for i in problem.sigma_in)


def _greedy(problem, shape, cands):
    sigma = list(problem.sigma_out)
    first_in, last_in = shape.inputs[0], shape.inputs[-1]

    def score(c):
        lam, left, right = c
        seen = _parent_view(problem, first_in, left) * _parent_view(problem, last_in, right)
        return seen, len(left) * len(right), -sigma.index(lam)

    return max(cands, key=score)[0]


RULES: dict[str, Callable] = {
    "greedy": _greedy,
    "first": lambda problem, shape, cands: cands[0][0],
}


@dataclass
class FFunction:
    l: int
    rule: str = "greedy"
    overrides: dict = field(default_factory=dict)  # PathShape -> label or None
    seen: dict = field(default_factory=dict)       # materialized entries, for export

    def choose(self, problem: BwProblem, shape: PathShape):
        if shape in self.overrides:
            lam = self.overrides[shape]
        else:
            cands = _candidates(problem, shape)
            lam = RULES[self.rule](problem, shape, cands) if cands else None
        self.seen[shape] = lam
        return lam

    def apply(self, problem: BwProblem, shape: PathShape):
        """(cut label, g(v_1), g(v_x)); empty sets when no label keeps the class nonempty."""
        lam = self.choose(problem, shape)
        if lam is None:
            return None, frozenset(), frozenset()
        left, right = compress_g(problem, shape, lam)
        return lam, left, right

    def to_json(self) -> str:
        entries = {**self.seen, **self.overrides}
        rows = sorted(([s.to_json(), _jsonable(lam)] for s, lam in entries.items()), key=json.dumps)
        return json.dumps({"l": self.l, "rule": self.rule,
                           "overrides": sorted(([s.to_json(), _jsonable(v)] for s, v in self.overrides.items()),
                                               key=json.dumps),
                           "entries": rows}, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "FFunction":
        d = json.loads(text)
        over = {PathShape.from_json(s): _unjson(v) for s, v in d["overrides"]}
        seen = {PathShape.from_json(s): _unjson(v) for s, v in d["entries"]}
        return cls(d["l"], d["rule"], over, seen)


def trivial_f(l: int = 1) -> FFunction:
    return FFunction(l, "first")


# ---------------------------------------------------------------- sequential pipeline

@dataclass
class PathInfo:
    nodes: list[int]          # v_1 .. v_x
    chain_ports: list[tuple]  # per node: (port of E_{2k}, port of E_{2k+1}) i.e. (left, right)


def orient(tree: Graph, deco: Decomposition):
    """Outgoing ports (towards higher sublayers) for every node."""
    return [[p for p, (u, _) in enumerate(tree.ports[v]) if rank(deco.layer[u]) > rank(deco.layer[v])]
            for v in tree.nodes]


def compress_path_info(tree: Graph, deco: Decomposition, path: list[int], ids: Sequence[int],
                       out_ports: list[list[int]]) -> PathInfo:
    """Orient a compress path so v_1 is the smaller-id endpoint and find each node's left/right port."""
    if len(path) == 1:
        v = path[0]
        ports = sorted(out_ports[v], key=lambda p: ids[tree.ports[v][p][0]])
        return PathInfo([v], [(ports[0], ports[1])])
    if ids[path[-1]] < ids[path[0]]:
        path = path[::-1]
    chain = []
    for k, v in enumerate(path):
        left = (out_ports[v][0] if k == 0 else tree.port_to(v, path[k - 1]))
        right = (out_ports[v][0] if k == len(path) - 1 else tree.port_to(v, path[k + 1]))
        chain.append((left, right))
    return PathInfo(path, chain)


def solve_with_decomposition(problem: BwProblem, tree: Graph, deco: Decomposition,
                             f: FFunction | None, ids: Sequence[int] | None = None,
                             trace_shapes: list | None = None) -> dict:
    """Label-set propagation up through the sublayers, then final labels back down.

    Raises EmptyClassError at the first node whose class is empty.
    """
    ids = list(ids) if ids is not None else list(tree.nodes)
    out_ports = orient(tree, deco)
    inp = tree.inputs
    up: dict[tuple, LabelSet] = {}     # (v, port) -> label-set on v's outgoing half
    folded: dict[tuple, LabelSet] = {}  # (w, port) -> allowed labels on w's incoming half

    def incoming_of(v, exclude):
        return [p for p in range(tree.degree(v)) if p not in exclude]

    def gather_incoming(v, ports):
        res = []
        for p in ports:
            u, q = tree.ports[v][p]
            key = (v, p)
            if key not in folded:
                folded[key] = fold(problem, inp[u][q], up[u, q], inp[v][p])
            res.append((inp[v][p], folded[key]))
        return res

    paths = {}
    for path in deco.compress_paths(tree):
        info = compress_path_info(tree, deco, path, ids, out_ports)
        paths[info.nodes[0]] = info
    path_of = {v: info for info in paths.values() for v in info.nodes}

    order = sorted(tree.nodes, key=lambda v: (rank(deco.layer[v]), v))
    shapes: dict[int, tuple] = {}
    done = set()
    for v in order:
        if v in done:
            continue
        kind = deco.layer[v][0]
        if kind == RAKE:
            outs = out_ports[v]
            inc_ports = incoming_of(v, outs)
            inc = gather_incoming(v, inc_ports)
            if outs:
                s = rake_g(problem, "W", inc, inp[v][outs[0]])
                if not s:
                    raise EmptyClassError(v, deco.layer[v], "rake node has no feasible outgoing label")
                up[v, outs[0]] = s
            elif complete(problem, "W", [], inc) is None:
                raise EmptyClassError(v, deco.layer[v], "top node cannot be completed")
            done.add(v)
            continue
        info = path_of[v]
        e_inputs, inc_lists = [], []
        for k, w in enumerate(info.nodes):
            left, right = info.chain_ports[k]
            e_inputs += [inp[w][left], inp[w][right]]
            inc_lists.append(gather_incoming(w, incoming_of(w, {left, right})))
        shape = make_shape(problem, e_inputs, inc_lists)
        if f is None:
            raise EmptyClassError(v, deco.layer[v], "compress path but no f supplied")
        lam, g1, g2 = f.apply(problem, shape)
        if trace_shapes is not None:
            trace_shapes.append(shape)
        if not g1 or not g2:
            raise EmptyClassError(info.nodes[0], deco.layer[v], "compress class empty for every cut label")
        first, last = info.nodes[0], info.nodes[-1]
        up[first, info.chain_ports[0][0]] = g1
        up[last, info.chain_ports[-1][1]] = g2
        shapes[info.nodes[0]] = (shape, lam)
        done.update(info.nodes)

    labels: dict[tuple, Label] = {}

    def finish_children(v, ports, chosen):
        for p, b in zip(ports, chosen):
            labels[v, p] = b
            u, q = tree.ports[v][p]
            a = pick_child_label(problem, inp[u][q], up[u, q], inp[v][p], b)
            if a is None:
                raise EmptyClassError(u, deco.layer[u], "no child label compatible with parent choice")
            labels[u, q] = a

    for v in reversed(order):
        if deco.layer[v][0] == RAKE:
            outs = out_ports[v]
            inc_ports = incoming_of(v, outs)
            fixed = [(inp[v][outs[0]], labels[v, outs[0]])] if outs else []
            chosen = complete(problem, "W", fixed, [(inp[v][p], folded[v, p]) for p in inc_ports])
            if chosen is None:
                raise EmptyClassError(v, deco.layer[v], "no completion for received label")
            finish_children(v, inc_ports, chosen)
        elif v in paths:
            info = paths[v]
            shape, lam = shapes[v]
            first_port = info.chain_ports[0][0]
            last_port = info.chain_ports[-1][1]
            e_labels = assign_path(problem, shape, lam, labels[info.nodes[0], first_port],
                                   labels[info.nodes[-1], last_port])
            if e_labels is None:
                raise EmptyClassError(v, deco.layer[v], "path assignment failed")
            for k, w in enumerate(info.nodes):
                left, right = info.chain_ports[k]
                labels[w, left], labels[w, right] = e_labels[2 * k], e_labels[2 * k + 1]
                inc_ports = incoming_of(w, {left, right})
                fixed = [(inp[w][left], e_labels[2 * k]), (inp[w][right], e_labels[2 * k + 1])]
                chosen = complete(problem, "W", fixed, [(inp[w][p], folded[w, p]) for p in inc_ports])
                if chosen is None:
                    raise EmptyClassError(w, deco.layer[w], "no completion inside path")
                finish_children(w, inc_ports, chosen)
    return labels


# ---------------------------------------------------------------- searching for f

@dataclass
class DeriveResult:
    f: FFunction | None
    tried_l: list[int]
    evaluations: int
    reason: str = ""

    @property
    def found(self) -> bool:
        return self.f is not None


def _validate(problem, cases, l, f, gamma):
    """Indices of validation cases that fail, plus the shapes each case touched."""
    failing, touched = [], {}
    for k, (tree, ids, solvable) in enumerate(cases):
        deco = rake_compress(tree, gamma, l, ids)
        used: list = []
        try:
            lab = solve_with_decomposition(problem, tree, deco, f, ids, used)
            ok = solvable and not check_node_edge(problem, tree, lab)
        except EmptyClassError:
            ok = not solvable
        touched[k] = used
        if not ok:
            failing.append(k)
    return failing, touched


def exactly_solvable(problem: BwProblem, tree: Graph) -> bool:
    """Exact verdict from the rake-only pipeline, which needs no f."""
    deco = rake_compress(tree, tree.n, 1)
    try:
        solve_with_decomposition(problem, tree, deco, None)
    except EmptyClassError:
        return False
    return True


def derive_f(problem: BwProblem, gamma, trees: Sequence[Graph], l_values: Iterable[int] = range(1, 9),
             ids: Sequence[Sequence[int]] | None = None, repair_budget: int = 200,
             rule: str = "greedy", max_edges: int = 128,
             stress: Sequence[Graph] = ()) -> DeriveResult:
    """Search l and a table of cut labels until every validation tree behaves like the oracle.

    `trees` are checked against brute force; the optional `stress` trees are
    too big for that and use the rake-only verdict instead.
    """
    cases = []
    for k, tree in enumerate(trees):
        sol = brute_force_solve(problem, tree, max_edges=max_edges)
        cases.append((tree, list(ids[k]) if ids is not None else list(tree.nodes), sol is not None))
    for tree in stress:
        cases.append((tree, list(tree.nodes), exactly_solvable(problem, tree)))
    tried, evaluations = [], 0
    for l in l_values:
        tried.append(l)
        f = FFunction(l, rule)
        failing, touched = _validate(problem, cases, l, f, gamma)
        evaluations += 1
        budget = repair_budget
        tabu: set = set()
        while failing and budget > 0:
            improved = False
            shapes = []
            for k in failing:
                for s in touched[k]:
                    if s not in shapes:
                        shapes.append(s)
            for shape in shapes:
                current = f.overrides.get(shape, f.seen.get(shape))
                for lam, _, _ in _candidates(problem, shape):
                    if lam == current or (shape, lam) in tabu or budget <= 0:
                        continue
                    tabu.add((shape, lam))
                    trial = FFunction(l, rule, {**f.overrides, shape: lam})
                    new_failing, new_touched = _validate(problem, cases, l, trial, gamma)
                    evaluations += 1
                    budget -= 1
                    if len(new_failing) < len(failing):
                        f, failing, touched = trial, new_failing, new_touched
                        improved = True
                        break
                if improved or budget <= 0:
                    break
            if not improved:
                break
        if not failing:
            return DeriveResult(f, tried, evaluations)
    return DeriveResult(None, tried, evaluations, "no f found under search budget")


def spider(legs: Sequence[int]) -> Graph:
    """Centre 0 with one path per entry of `legs`."""
    n = 1 + sum(legs)
    g = Graph(n, max_degree=max(len(legs), 2))
    nxt = 1
    for length in legs:
        prev = 0
        for _ in range(length):
            g.add_edge(prev, nxt)
            prev, nxt = nxt, nxt + 1
    return g


def parity_spiders(l_values: Iterable[int] = range(1, 9), legs: int = 3, permutations: int = 6,
                   seed: int = 0) -> tuple[list[Graph], list[list[int]]]:
    """Spiders whose legs leave an even compress path of 2l nodes next to the centre at gamma = ceil(sqrt(n)).

    Random id permutations make the two path orientations meet at the centre.
    """
    from .decomp import resolve_gamma
    rng = random.Random(seed)
    trees, idss = [], []
    for l in l_values:
        gamma = 1
        while True:
            length = gamma + 1 + 2 * l
            n = 1 + legs * length
            if resolve_gamma("sqrt", n) == gamma:
                break
            gamma += 1
        tree = spider([length] * legs)
        for _ in range(permutations):
            perm = list(range(tree.n))
            rng.shuffle(perm)
            trees.append(tree)
            idss.append(perm)
    return trees, idss
