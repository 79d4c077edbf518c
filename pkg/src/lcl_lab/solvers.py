"""Distributed tree solvers: the O(D) rooting solver and the decomposition-based solver.

Both exchange label-sets as bitmasks over the output alphabet and single
labels as indices, so every message is a few small integers.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Sequence

from .classes import (EmptyClassError, FFunction, assign_path, complete, fold, make_shape,
                      pick_child_label, rake_g)
from .decomp import RAKE, Decomposition, rake_compress_distributed, rank
from .graph import Graph
from .lcl import BwProblem, brute_force_solve, check_node_edge
from .sim import LOCAL, BandwidthPolicy, Final, RunResult, WAIT, audit, run


class Codec:
    """Label-set and label encodings for one problem."""

    def __init__(self, problem: BwProblem):
        self.problem = problem
        self.out = list(problem.sigma_out)
        self.out_index = {a: k for k, a in enumerate(self.out)}
        self.inp = list(problem.sigma_in)
        self.in_index = {a: k for k, a in enumerate(self.inp)}

    def mask(self, labels) -> int:
        m = 0
        for a in labels:
            m |= 1 << self.out_index[a]
        return m

    def unmask(self, m: int) -> frozenset:
        return frozenset(a for k, a in enumerate(self.out) if m >> k & 1)


@dataclass
class SolverRun:
    problem: BwProblem
    graph: Graph
    mode: str
    labeling: dict | None
    rounds: int
    results: list[RunResult] = field(default_factory=list)
    errors: list = field(default_factory=list)

    @property
    def solved(self) -> bool:
        return self.labeling is not None

    @property
    def max_message_bits(self) -> int:
        return max((r.trace.max_bits() for r in self.results), default=0)

    def audits(self, policy: BandwidthPolicy, declared_n: int | None = None):
        n = declared_n if declared_n is not None else self.graph.n
        return [audit(r.trace, policy, n) for r in self.results]


def _collect(problem, tree, mode, results, outputs):
    labeling, errors = {}, []
    for v, out in enumerate(outputs):
        if out is None or out[0] != "ok":
            errors.append((v, out))
            continue
        for p, lab in out[1].items():
            labeling[v, p] = lab
    if errors:
        labeling = None
    return SolverRun(problem, tree, mode, labeling, sum(r.trace.rounds for r in results), results, errors)


# ---------------------------------------------------------------- diameter mode

def diameter_program(problem: BwProblem):
    codec = Codec(problem)

    def program(ctx):
        inp = ctx.inputs
        active = set(range(ctx.degree))
        children: dict[int, tuple] = {}  # port -> (child input, child label-set)
        while True:
            inbox = yield {p: (len(active), ctx.id) for p in active}
            d = len(active)
            leave = d == 0
            if d == 1:
                (p,) = active
                nd, nid = inbox[p]
                leave = nd >= 2 or ctx.id < nid
            if leave:
                break
            inbox = yield {}
            for p, msg in inbox.items():
                children[p] = (codec.inp[msg[0]], codec.unmask(msg[1]))
                active.discard(p)
        ports = sorted(children)
        incoming = [(inp[p], fold(problem, *children[p], inp[p])) for p in ports]
        parent = next(iter(active), None)
        broken = any(not s for _, s in incoming)
        if parent is not None:
            mine = rake_g(problem, "W", incoming, inp[parent])
            inbox = yield {parent: (codec.in_index[inp[parent]], codec.mask(mine))}
            while parent not in inbox:
                inbox = yield WAIT
            msg = inbox[parent]
            if msg == "unsat":
                return Final({p: "unsat" for p in ports}, ("unsat",))
            fixed = [(inp[parent], codec.out[msg])]
            labels = {parent: codec.out[msg]}
        else:
            fixed, labels = [], {}
        chosen = complete(problem, "W", fixed, incoming)
        if chosen is None:
            # only reachable at the root: the whole instance is unsolvable
            why = ("unsat",) if broken else ("empty", "root has no completion")
            return Final({p: "unsat" for p in ports}, why)
        out = {}
        for p, b in zip(ports, chosen):
            labels[p] = b
            child_in, child_set = children[p]
            out[p] = codec.out_index[pick_child_label(problem, child_in, child_set, inp[p], b)]
        return Final(out, ("ok", labels))

    return program


def solve_diameter(problem: BwProblem, tree: Graph, policy: BandwidthPolicy = LOCAL,
                   seed: int = 0, ids: Sequence[int] | None = None) -> SolverRun:
    """Root by leaf removal while pushing label-sets up, then push labels down."""
    if not tree.is_tree():
        raise ValueError("solve_diameter needs a tree")
    result = run(tree, diameter_program(problem), policy, seed=seed, ids=ids)
    return _collect(problem, tree, "diameter", [result], result.outputs)


# ---------------------------------------------------------------- decomposition mode

def superlog_program(problem: BwProblem, f: FFunction | None):
    codec = Codec(problem)

    def program(ctx):
        inp = ctx.inputs
        layer = ctx.extra
        mine = rank(layer)
        inbox = yield {p: (*mine, ctx.id) for p in range(ctx.degree)}
        nbr_rank = {p: tuple(m[:3]) for p, m in inbox.items()}
        nbr_id = {p: m[3] for p, m in inbox.items()}
        outs = [p for p in range(ctx.degree) if nbr_rank[p] > mine]
        same = [p for p in range(ctx.degree) if nbr_rank[p] == mine]
        inc = [p for p in range(ctx.degree) if nbr_rank[p] < mine]
        children: dict[int, tuple] = {}
        state = _PathState(same)

        def absorb(box):
            for p, msg in box.items():
                if p in same:
                    state.receive(p, msg)
                elif msg == "unsat":
                    state.unsat = True
                elif p in inc:
                    children[p] = (codec.inp[msg[0]], codec.unmask(msg[1]))
                else:
                    state.down[p] = msg

        while len(children) < len(inc):
            absorb((yield WAIT))
        incoming = [(inp[p], fold(problem, *children[p], inp[p])) for p in inc]
        broken = any(not s for _, s in incoming)

        def send_children(chosen, labels, extra_out=None):
            out = dict(extra_out or {})
            for p, b in zip(inc, chosen):
                labels[p] = b
                child_in, child_set = children[p]
                out[p] = codec.out_index[pick_child_label(problem, child_in, child_set, inp[p], b)]
            return Final(out, ("ok", labels))

        def fail(reason):
            return Final({p: "unsat" for p in inc}, ("unsat",) if broken else ("empty", layer, reason))

        if layer[0] == RAKE:
            if outs:
                (parent,) = outs
                s = rake_g(problem, "W", incoming, inp[parent])
                box = yield {parent: (codec.in_index[inp[parent]], codec.mask(s))}
                absorb(box)
                while parent not in state.down and not state.unsat:
                    absorb((yield WAIT))
                if state.unsat:
                    return Final({p: "unsat" for p in inc},
                                 ("empty", layer, "no feasible outgoing label") if not s and not broken
                                 else ("unsat",))
                a = codec.out[state.down[parent]]
                fixed, labels = [(inp[parent], a)], {parent: a}
            else:
                fixed, labels = [], {}
            chosen = complete(problem, "W", fixed, incoming)
            if chosen is None:
                return fail("no completion")
            return send_children(chosen, labels)

        # compress path node: share records along the path until the whole shape is known
        record = lambda toward: (ctx.id, 0, codec.in_index[inp[toward]],
                                 codec.in_index[inp[_away(toward, same, outs)]],
                                 tuple((codec.in_index[i], codec.mask(s)) for i, s in incoming),
                                 len(same) < 2)
        for p in same:
            state.queue[p].append(record(p))
        while not state.complete():
            box = yield state.outbox()
            absorb(box)
        # outgoing flush of queued records continues below alongside the down phase
        line, me = state.line(ctx.id, inp, codec, outs, nbr_id, incoming)
        shape = make_shape(problem, [x for node in line for x in node[1]], [node[2] for node in line])
        lam, g1, g2 = f.apply(problem, shape) if f is not None else (None, frozenset(), frozenset())
        ends = {}
        if me == 0:
            ends[line[0][3]] = g1
        if me == len(line) - 1:
            ends[line[-1][4]] = g2
        out = state.outbox()
        for p, s in ends.items():
            out[p] = (codec.in_index[inp[p]], codec.mask(s))
        empty = not g1 or not g2
        end_labels: dict[int, object] = {}
        while True:
            box = yield out
            absorb(box)
            if state.unsat:
                pass_on = {p: ("unsat",) for p in same}
                return Final({**pass_on, **{p: "unsat" for p in inc}}, ("unsat",) if broken or not empty
                             else ("empty", layer, "compress class empty"))
            for p in ends:
                if p in state.down and p not in state.seen_down:
                    state.seen_down.add(p)
                    which = 0 if (me == 0 and p == line[0][3]) else 1
                    end_labels[which] = codec.out[state.down[p]]
                    for q in same:
                        state.queue[q].append(("end", which, state.down[p]))
            for which, lab in state.ends.items():
                end_labels[which] = codec.out[lab]
            out = state.outbox()
            if len(end_labels) == 2 and not state.pending():
                break
        e = assign_path(problem, shape, lam, end_labels[0], end_labels[1])
        left_port, right_port = line[me][3], line[me][4]
        labels = {left_port: e[2 * me], right_port: e[2 * me + 1]}
        fixed = [(inp[left_port], e[2 * me]), (inp[right_port], e[2 * me + 1])]
        chosen = complete(problem, "W", fixed, incoming)
        if chosen is None:
            return fail("no completion inside path")
        return send_children(chosen, labels, out)

    return program


def _away(toward, same, outs):
    others = [p for p in same if p != toward]
    return others[0] if others else outs[0]


class _PathState:
    """Pipelined record exchange along a compress path; one record and one end label per port per round."""

    def __init__(self, same):
        self.same = same
        self.queue = {p: deque() for p in same}
        self.records = {p: [] for p in same}
        self.ends: dict[int, int] = {}
        self.down: dict[int, int] = {}
        self.seen_down: set = set()
        self.unsat = False

    def receive(self, p, msg):
        for item in msg:
            if item == "unsat":
                self.unsat = True
            elif item[0] == "end":
                _, which, lab = item
                if which not in self.ends:
                    self.ends[which] = lab
                    for q in self.same:
                        if q != p:
                            self.queue[q].append(item)
            else:
                self.records[p].append(item)
                for q in self.same:
                    if q != p:
                        self.queue[q].append((item[0], item[1] + 1, *item[2:]))

    def complete(self) -> bool:
        # records may overtake each other, so wait for every hop count up to the endpoint's
        for p in self.same:
            far = [r[1] for r in self.records[p] if r[5]]
            if not far or len(self.records[p]) != far[0] + 1:
                return False
        return True

    def pending(self) -> bool:
        return any(self.queue[p] for p in self.same)

    def outbox(self) -> dict:
        out = {}
        for p in self.same:
            q = self.queue[p]
            items = []
            rec = next((x for x in q if x[0] != "end"), None)
            end = next((x for x in q if x[0] == "end"), None)
            for x in (rec, end):
                if x is not None:
                    q.remove(x)
                    items.append(x)
            if items:
                out[p] = tuple(items)
        return out

    def line(self, my_id, inp, codec, outs, nbr_id, incoming):
        """Path nodes in v_1..v_x order as (id, (left in, right in), incoming, left port, right port)."""
        def decode(r):
            return [(codec.inp[i], codec.unmask(m)) for i, m in r[4]]

        same = self.same
        if not same:
            a, b = sorted(outs, key=nbr_id.__getitem__)
            return [(my_id, (inp[a], inp[b]), list(incoming), a, b)], 0
        q0 = same[0]
        q1 = same[1] if len(same) > 1 else None
        left_side = sorted(self.records[q0], key=lambda r: -r[1])
        right_side = sorted(self.records[q1], key=lambda r: r[1]) if q1 is not None else []
        lp = q0
        rp = q1 if q1 is not None else outs[0]
        # a lone path port means this node is an endpoint: put the path on the right
        if q1 is None:
            left_side, right_side = [], sorted(self.records[q0], key=lambda r: r[1])
            lp, rp = outs[0], q0
        nodes = [(r[0], (codec.inp[r[3]], codec.inp[r[2]]), decode(r), None, None) for r in left_side]
        nodes.append((my_id, (inp[lp], inp[rp]), list(incoming), lp, rp))
        nodes += [(r[0], (codec.inp[r[2]], codec.inp[r[3]]), decode(r), None, None) for r in right_side]
        me = len(left_side)
        if nodes[-1][0] < nodes[0][0]:
            nodes = [(i, (b, a), inc, rpt, lpt) for i, (a, b), inc, lpt, rpt in reversed(nodes)]
            me = len(nodes) - 1 - me
        return nodes, me


def solve_superlog(problem: BwProblem, tree: Graph, gamma, l: int, f: FFunction | None,
                   policy: BandwidthPolicy = LOCAL, seed: int = 0, ids: Sequence[int] | None = None,
                   id_space: int | None = None,
                   decomposition: Decomposition | None = None) -> SolverRun:
    """Distributed decomposition, then label-set propagation through the sublayers.

    Raises EmptyClassError naming the lowest node whose class came out empty.
    """
    if not tree.is_tree():
        raise ValueError("solve_superlog needs a tree")
    results = []
    if decomposition is None:
        decomposition, deco_run = rake_compress_distributed(tree, gamma, l, policy, ids, id_space, seed)
        results.append(deco_run)
    solver = run(tree, superlog_program(problem, f), policy, seed=seed, ids=ids,
                 extra=decomposition.layer)
    results.append(solver)
    outcome = _collect(problem, tree, "superlog", results, solver.outputs)
    outcome.decomposition = decomposition
    empties = [(rank(decomposition.layer[v]), v, out) for v, out in outcome.errors
               if out is not None and out[0] == "empty"]
    if empties:
        _, v, out = min(empties)
        raise EmptyClassError(v, decomposition.layer[v], out[2])
    if solver.trace.timed_out:
        raise RuntimeError("solver did not terminate")
    return outcome


# ---------------------------------------------------------------- oracle comparison

@dataclass
class OracleReport:
    instances: int
    mismatches: list
    invalid: list

    @property
    def ok(self) -> bool:
        return not self.mismatches and not self.invalid


def compare_with_oracle(problem: BwProblem, trees: Sequence[Graph]) -> OracleReport:
    mismatches, invalid = [], []
    for k, tree in enumerate(trees):
        oracle = brute_force_solve(problem, tree) is not None
        outcome = solve_diameter(problem, tree)
        if outcome.solved != oracle:
            mismatches.append(k)
        if outcome.solved and check_node_edge(problem, tree, outcome.labeling):
            invalid.append(k)
    return OracleReport(len(trees), mismatches, invalid)
