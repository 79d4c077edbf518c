"""Synchronous round simulator for LOCAL and CONGEST executions.

A node program is a function ``program(ctx)`` returning a generator.  The
generator yields one *command* per round and receives that round's inbox:

* a dict ``{port: message}`` sends those messages this round;
* ``WaitUntil(r)`` (or ``WAIT``) sends nothing and sleeps until a message
  arrives or round ``r`` is reached, whichever is first;
* ``Final(outbox, output)`` sends a last batch of messages and stops.

Returning from the generator stops the node with the returned output;
returning a ``Final`` sends its outbox first.

Sleeping is only a speed-up: a sleeping node behaves exactly like a node
that keeps sending nothing and ignores empty inboxes.
"""

from __future__ import annotations

import csv
import hashlib
import heapq
import io
import json
import math
import random
from dataclasses import dataclass, field
from typing import Any, Callable, Iterable, Sequence

from .graph import Graph


# ---------------------------------------------------------------- bandwidth

@dataclass(frozen=True)
class BandwidthPolicy:
    mode: str = "LOCAL"   # LOCAL or CONGEST
    c: int = 32

    def budget(self, declared_n: int) -> int | None:
        if self.mode == "LOCAL":
            return None
        return max(1, self.c * math.ceil(math.log2(max(declared_n, 1))))

    @classmethod
    def parse(cls, name: str, c: int = 32) -> "BandwidthPolicy":
        name = name.upper()
        if name not in ("LOCAL", "CONGEST"):
            raise ValueError(f"unknown policy {name!r}")
        return cls(name, c)


LOCAL = BandwidthPolicy("LOCAL")
CONGEST = BandwidthPolicy("CONGEST", 32)

_TAG_BITS = 3


def _gamma_bits(k: int) -> int:
    """Length of the Elias gamma code of k >= 1."""
    return 2 * (k.bit_length() - 1) + 1


def message_bits(msg: Any) -> int:
    """Bit length of a canonical self-delimiting encoding of `msg`."""
    if msg is None or isinstance(msg, bool):
        return _TAG_BITS + 1
    if isinstance(msg, int):
        return _TAG_BITS + 1 + _gamma_bits(abs(msg) + 1)
    if isinstance(msg, float):
        return _TAG_BITS + 64
    if isinstance(msg, str):
        raw = msg.encode()
        return _TAG_BITS + _gamma_bits(len(raw) + 1) + 8 * len(raw)
    if isinstance(msg, bytes):
        return _TAG_BITS + _gamma_bits(len(msg) + 1) + 8 * len(msg)
    if isinstance(msg, (tuple, list, set, frozenset)):
        return _TAG_BITS + _gamma_bits(len(msg) + 1) + sum(message_bits(x) for x in msg)
    if isinstance(msg, dict):
        return _TAG_BITS + _gamma_bits(len(msg) + 1) + sum(
            message_bits(k) + message_bits(v) for k, v in msg.items())
    if hasattr(msg, "__dict__"):
        return message_bits(tuple(sorted(vars(msg).items())))
    raise TypeError(f"cannot size message of type {type(msg).__name__}")


# ---------------------------------------------------------------- commands

@dataclass(frozen=True)
class WaitUntil:
    round: float


WAIT = WaitUntil(math.inf)


@dataclass(frozen=True)
class Final:
    outbox: dict
    output: Any


# ---------------------------------------------------------------- engine

def node_rng(seed: int, node: int) -> random.Random:
    digest = hashlib.sha256(f"{seed}:{node}".encode()).digest()
    return random.Random(int.from_bytes(digest[:16], "big"))


class NodeContext:
    """Everything a node may legitimately look at."""

    def __init__(self, engine: "_Engine", v: int):
        self._engine = engine
        self._v = v
        self.id = engine.ids[v]
        self.degree = engine.graph.degree(v)
        self.inputs = tuple(engine.graph.inputs[v])
        self.n = engine.declared_n
        self.extra = engine.extra[v] if engine.extra is not None else None
        self._rng = None

    @property
    def rng(self) -> random.Random:
        if self._rng is None:
            self._rng = node_rng(self._engine.seed, self._v)
        return self._rng

    @property
    def round(self) -> int:
        """Index of the round whose inbox was most recently delivered (0 before the first round)."""
        return self._engine.round


@dataclass
class Trace:
    messages: list[tuple[int, int, int, int]] = field(default_factory=list)  # (round, src, dst, bits)
    termination: list[int | None] = field(default_factory=list)
    rounds: int = 0
    timed_out: bool = False

    def max_bits(self) -> int:
        return max((m[3] for m in self.messages), default=0)

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["round", "src", "dst", "bits"])
        writer.writerows(self.messages)
        return buf.getvalue()

    def summary(self) -> dict:
        return {"rounds": self.rounds, "messages": len(self.messages),
                "max_message_bits": self.max_bits(), "timed_out": self.timed_out}

    def to_json(self) -> str:
        return json.dumps(self.summary(), sort_keys=True)


@dataclass
class RunResult:
    outputs: list
    trace: Trace

    @property
    def rounds(self) -> int:
        return self.trace.rounds

    @property
    def timed_out(self) -> bool:
        return self.trace.timed_out


class _Engine:
    def __init__(self, graph, programs, declared_n, seed, ids, extra, shuffle_seed):
        self.graph = graph
        self.declared_n = declared_n
        self.seed = seed
        self.ids = list(ids) if ids is not None else list(graph.nodes)
        self.extra = extra
        self.round = 0
        self.order_rng = random.Random(shuffle_seed) if shuffle_seed is not None else None
        self.programs = programs

    def run(self, max_rounds: int, force_stop: int | None) -> RunResult:
        g = self.graph
        n = g.n
        outputs: list = [None] * n
        termination: list[int | None] = [None] * n
        trace = Trace(termination=termination)
        gens: list = [None] * n
        command: list = [None] * n
        sleepers: list[tuple[float, int]] = []
        alive = set()
        sending = set()

        def accept(v, cmd_or_stop):
            kind, value = cmd_or_stop
            if kind == "stop" and isinstance(value, Final):
                kind = "cmd"  # returning a Final still sends its outbox
            if kind == "stop":
                outputs[v] = value
                termination[v] = self.round
                alive.discard(v)
                sending.discard(v)
                command[v] = None
            else:
                command[v] = value
                if isinstance(value, WaitUntil):
                    sending.discard(v)
                    heapq.heappush(sleepers, (value.round, v))
                else:
                    sending.add(v)

        def step(v, inbox):
            try:
                if inbox is None:
                    return "cmd", next(gens[v])
                return "cmd", gens[v].send(inbox)
            except StopIteration as stop:
                return "stop", stop.value

        for v in self._order(range(n)):
            ctx = NodeContext(self, v)
            gens[v] = self.programs[v](ctx)
            alive.add(v)
            accept(v, step(v, None))

        while alive:
            if force_stop is not None and self.round >= force_stop:
                break
            if self.round >= max_rounds:
                trace.timed_out = True
                break
            senders = sorted(sending)
            if not senders:
                live_timers = [t for t, v in sleepers if v in alive and isinstance(command[v], WaitUntil)
                               and command[v].round == t]
                nxt = min(live_timers, default=math.inf)
                if nxt == math.inf:
                    trace.timed_out = True  # every remaining node waits for a message that cannot come
                    break
                target = max(self.round + 1, int(nxt))
                if force_stop is not None:
                    target = min(target, force_stop)
                if target > max_rounds:
                    self.round = max_rounds
                    trace.timed_out = True
                    break
                self.round = target - 1
            self.round += 1
            r = self.round
            inboxes: dict[int, dict] = {}
            sent = []
            finals = []
            for v in self._order(senders):
                cmd = command[v]
                box = cmd.outbox if isinstance(cmd, Final) else cmd
                for port, msg in box.items():
                    if msg is None:
                        continue
                    u, q = g.ports[v][port]
                    sent.append((r, v, u, message_bits(msg)))
                    if u in alive:
                        inboxes.setdefault(u, {})[q] = msg
                if isinstance(cmd, Final):
                    finals.append((v, cmd.output))
            sent.sort()
            trace.messages.extend(sent)
            for v, out in finals:
                accept(v, ("stop", out))
            wake = set(inboxes)
            while sleepers and sleepers[0][0] <= r:
                _, v = heapq.heappop(sleepers)
                wake.add(v)
            for v in senders:
                if v in alive:
                    wake.add(v)
            for v in self._order(sorted(wake)):
                if v not in alive:
                    continue
                cmd = command[v]
                if isinstance(cmd, WaitUntil) and cmd.round > r and v not in inboxes:
                    continue  # stale heap entry from an earlier sleep
                accept(v, step(v, inboxes.get(v, {})))

        if force_stop is not None:
            for v in list(alive):
                termination[v] = force_stop
                outputs[v] = None
                alive.discard(v)
        trace.rounds = max((t for t in termination if t is not None), default=0)
        if trace.timed_out:
            trace.rounds = max(trace.rounds, self.round)
        return RunResult(outputs, trace)

    def _order(self, items: Iterable[int]) -> list[int]:
        items = list(items)
        if self.order_rng is not None:
            self.order_rng.shuffle(items)
        return items


def run(graph: Graph, programs: Callable | Sequence[Callable], policy: BandwidthPolicy = LOCAL,
        declared_n: int | None = None, seed: int = 0, max_rounds: int = 10 ** 6,
        ids: Sequence[int] | None = None, extra: Sequence | None = None,
        shuffle_seed: int | None = None, force_stop: int | None = None) -> RunResult:
    """Execute one program per node in lock-step rounds.

    `programs` is one callable for all nodes or a list of per-node callables.
    `extra` hands each node a private read-only value (e.g. a precomputed
    layer assignment from an earlier run).  Violations of `policy` are not
    enforced during the run; `audit` reports them afterwards.
    """
    if callable(programs):
        programs = [programs] * graph.n
    if len(programs) != graph.n:
        raise ValueError("need exactly one program per node")
    engine = _Engine(graph, programs, declared_n if declared_n is not None else graph.n,
                     seed, ids, extra, shuffle_seed)
    result = engine.run(max_rounds, force_stop)
    result.trace.policy = policy
    return result


@dataclass
class AuditVerdict:
    passed: bool
    max_bits: int
    budget: int | None
    violations: int
    first_violation: tuple[int, int, int, int] | None  # (round, src, dst, bits)

    def as_dict(self) -> dict:
        return {"passed": self.passed, "max_bits": self.max_bits, "budget": self.budget,
                "violations": self.violations, "first_violation": self.first_violation}


def audit(trace: Trace, policy: BandwidthPolicy, declared_n: int) -> AuditVerdict:
    budget = policy.budget(declared_n)
    bad = [] if budget is None else [m for m in trace.messages if m[3] > budget]
    return AuditVerdict(not bad, trace.max_bits(), budget, len(bad), min(bad) if bad else None)


# ---------------------------------------------------------------- ball gathering

@dataclass
class BallView:
    """What one node knows after gathering: full records inside, stubs on the boundary."""
    centre: int
    stubs: dict   # id -> (degree, inputs)
    links: dict   # id -> tuple of (neighbour id, reverse port) per port

    def to_graph(self) -> tuple[Graph, list[int]]:
        """Rebuild the known part as a Graph; returns (graph, original ids in node order).

        Boundary nodes keep their degree only implicitly: their unknown ports are absent.
        """
        ids = sorted(self.stubs)
        pos = {x: k for k, x in enumerate(ids)}
        g = Graph(len(ids))
        done = set()
        for x in ids:
            for p, (y, q) in enumerate(self.links.get(x, ())):
                key = (min((x, p), (y, q)), max((x, p), (y, q)))
                if key in done or y not in pos:
                    continue
                done.add(key)
                g.add_edge(pos[x], pos[y], self.stubs[x][1][p], self.stubs[y][1][q])
        return g, ids


def gather_ball(radius: int):
    """Program factory: after `radius` rounds each node outputs its BallView."""
    def program(ctx: NodeContext):
        me = ctx.id
        stubs = {me: (ctx.degree, ctx.inputs)}
        links: dict = {}
        if radius == 0:
            return BallView(me, stubs, links)
        inbox = yield {p: ("hello", me, p, ctx.degree, ctx.inputs) for p in range(ctx.degree)}
        mine = [None] * ctx.degree
        for p, (_, uid, q, deg, inp) in inbox.items():
            mine[p] = (uid, q)
            stubs[uid] = (deg, inp)
        links[me] = tuple(mine)
        fresh_links, fresh_stubs = dict(links), dict(stubs)
        for _ in range(radius - 1):
            msg = ("ball", tuple(sorted(fresh_links.items())), tuple(sorted(fresh_stubs.items())))
            inbox = yield {p: msg for p in range(ctx.degree)}
            fresh_links, fresh_stubs = {}, {}
            for _, got_links, got_stubs in inbox.values():
                for x, rec in got_links:
                    if x not in links:
                        links[x] = fresh_links[x] = rec
                for x, rec in got_stubs:
                    if x not in stubs:
                        stubs[x] = fresh_stubs[x] = rec
        return BallView(me, stubs, links)

    return program


# ---------------------------------------------------------------- ids and declared n

def assign_random_ids(n: int, space_size: int, seed: int) -> list[int]:
    """Independent uniform ids in [0, space_size); collisions are possible and left to the caller."""
    if space_size < n:
        raise ValueError("id space smaller than n")
    return [node_rng(seed, v).randrange(space_size) for v in range(n)]


def has_collision(ids: Sequence[int]) -> bool:
    return len(set(ids)) != len(ids)


def run_with_declared_n(graph: Graph, program, declared_n: int, time_bound: Callable[[int], int],
                        seed: int = 0, policy: BandwidthPolicy = LOCAL, **kwargs) -> RunResult:
    """Run while telling every node the graph has `declared_n` nodes.

    Nodes still running after time_bound(declared_n) rounds are stopped with
    output None, which the model permits.
    """
    limit = time_bound(declared_n)
    return run(graph, program, policy, declared_n=declared_n, seed=seed,
               max_rounds=limit + 1, force_stop=limit, **kwargs)


# ---------------------------------------------------------------- small reference programs

def echo_program(ctx: NodeContext):
    inbox = yield {p: ctx.id for p in range(ctx.degree)}
    return dict(inbox)


def flood_program(source: int):
    """Token flooding; a node outputs the round in which it first holds the token."""
    def program(ctx: NodeContext):
        if ctx.id == source:
            if ctx.degree == 0:
                return 0
            return Final({p: "tok" for p in range(ctx.degree)}, 0)
        inbox = yield WAIT
        got = ctx.round
        rest = {p: "tok" for p in range(ctx.degree) if p not in inbox}
        if rest:
            return Final(rest, got)
        return got
    return program
