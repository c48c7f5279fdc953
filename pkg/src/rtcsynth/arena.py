"""Game arenas: environment x safety monitors x fluent tracking.

A turn-based environment (tagged e/c by the yield reduction) maps onto
the arena directly: e-states become environment vertices, c-states
controller vertices, and every edge is a real action that advances the
fluent valuation and the safety monitors.

An untagged environment plays the standard interleaving game instead.
There the controller moves first at every state by committing to an
offer: one enabled controlled action, or none.  The environment then
picks among the offer and the enabled uncontrollables.  Offer moves are
silent; they carry no trace position, so fluents, monitors and
recurrence atoms do not advance on them.

Vertices that deadlock (nothing to offer and nothing the environment
can do) and vertices whose arrival violates a safety monitor are losing
sinks for the controller.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from functools import cached_property

from .dlts import ActionId
from .errors import ModelError
from .fluents import FluentValuation, eval_combo, initial_valuation, step_valuation
from .formulas import SafetyMonitor
from .rtc import StdProblem

__all__ = ["GameArena", "build_arena"]

CTRL = 0
ENV = 1


@dataclass(frozen=True)
class GameArena:
    """Explicit two-player arena over a standard control problem.

    `edges[v]` is an ordered tuple of (action, target); offer moves in
    the standard game carry action None.  `is_position[v]` tells whether
    arriving at v consumes a trace position (real action arrivals do,
    offer commits and sinks do not).  `req`/`ass`/`gua` hold the truth
    of each recurrence atom at position vertices, () elsewhere.
    """

    problem: StdProblem
    turn_based: bool
    owner: tuple[int, ...]
    edges: tuple[tuple[tuple[ActionId | None, int], ...], ...]
    is_position: tuple[bool, ...]
    bad: frozenset[int]
    env_state: tuple[int, ...]
    values: tuple[tuple[bool, ...] | None, ...]
    req: tuple[tuple[bool, ...], ...]
    ass: tuple[tuple[bool, ...], ...]
    gua: tuple[tuple[bool, ...], ...]
    tagv: tuple[str | None, ...]
    names: tuple[str, ...]
    initial: int = 0

    @property
    def n(self) -> int:
        return len(self.owner)

    @cached_property
    def actions_of(self) -> tuple[dict[int, ActionId | None], ...]:
        """Per vertex: target index -> action of the first edge reaching it."""
        out = []
        for row in self.edges:
            first: dict[int, ActionId | None] = {}
            for a, t in row:
                if t not in first:
                    first[t] = a
            out.append(first)
        return tuple(out)


class _Builder:
    def __init__(self, p: StdProblem):
        self.p = p
        self.monitors = tuple(SafetyMonitor(f) for f in p.spec.safety)
        self.index: dict = {}
        self.order: list = []
        self.owner: list[int] = []
        self.edges: list = []
        self.is_position: list[bool] = []
        self.bad: set[int] = set()
        self.env_state: list[int] = []
        self.values: list = []
        self.req: list = []
        self.ass: list = []
        self.gua: list = []
        self.tagv: list = []
        self.names: list[str] = []
        self.queue: deque = deque()

    def intern(self, key, owner: int, is_position: bool, env_state: int,
               values, name: str, tag: str | None) -> int:
        got = self.index.get(key)
        if got is not None:
            return got
        idx = len(self.order)
        self.index[key] = idx
        self.order.append(key)
        self.owner.append(owner)
        self.edges.append(None)
        self.is_position.append(is_position)
        self.env_state.append(env_state)
        self.values.append(values)
        if is_position:
            v = FluentValuation(self.p.fluents, values)
            self.req.append(tuple(eval_combo(c, v) for c in self.p.require))
            self.ass.append(tuple(eval_combo(c, v) for c in self.p.spec.assumptions))
            self.gua.append(tuple(eval_combo(c, v) for c in self.p.spec.guarantees))
        else:
            self.req.append(())
            self.ass.append(())
            self.gua.append(())
        self.tagv.append(tag)
        self.names.append(name)
        self.queue.append(idx)
        return idx

    def sink(self) -> int:
        idx = self.index.get("sink")
        if idx is None:
            idx = self.intern("sink", ENV, False, -1, None, "violation", None)
            self.queue.pop()  # expands to a self-loop right here
            self.edges[idx] = ((None, idx),)
            self.bad.add(idx)
        return idx

    def arrive(self, s2: int, obls, vals) -> int:
        """Intern the position vertex reached by a real action, or the sink."""
        if any(SafetyMonitor.violated(ob) for ob in obls):
            return self.sink()
        key = (s2, obls, vals)
        env = self.p.env
        tag = env.tag(s2)
        owner = self._position_owner(tag)
        return self.intern(key, owner, True, s2, vals,
                           env.state_names[s2], tag)

    def _position_owner(self, tag):
        raise NotImplementedError

    def step(self, s: int, vals, obls, a: ActionId):
        env = self.p.env
        s2 = env.step(s, a)
        v2 = step_valuation(FluentValuation(self.p.fluents, vals), a,
                            env.labels[s2])
        obls2 = tuple(m.step(ob, v2)
                      for m, ob in zip(self.monitors, obls))
        return s2, obls2, v2.values

    def finish(self, p: StdProblem, turn_based: bool) -> GameArena:
        return GameArena(
            problem=p, turn_based=turn_based,
            owner=tuple(self.owner), edges=tuple(self.edges),
            is_position=tuple(self.is_position), bad=frozenset(self.bad),
            env_state=tuple(self.env_state), values=tuple(self.values),
            req=tuple(self.req), ass=tuple(self.ass), gua=tuple(self.gua),
            tagv=tuple(self.tagv), names=tuple(self.names), initial=0)


class _TurnBuilder(_Builder):
    def _position_owner(self, tag):
        if tag == "e":
            return ENV
        if tag == "c":
            return CTRL
        raise ModelError("turn-based arena needs e/c tags on every state")

    def run(self) -> GameArena:
        p = self.p
        env = p.env
        v0 = initial_valuation(p.fluents, env.labels[env.initial])
        obls0 = tuple(m.initial for m in self.monitors)
        start = self.arrive(env.initial, obls0, v0.values)
        assert start == 0
        while self.queue:
            idx = self.queue.popleft()
            s, obls, vals = self.order[idx]
            allowed = (p.uncontrollable if self.owner[idx] == ENV
                       else p.controllable)
            row = []
            for a, _ in env.out[s]:
                if a not in allowed:
                    raise ModelError(
                        f"state {env.state_names[s]} mixes turns: "
                        f"'{a.name}' does not belong to its side")
                s2, obls2, vals2 = self.step(s, vals, obls, a)
                row.append((a, self.arrive(s2, obls2, vals2)))
            if not row:  # terminal underlying state: a deadlock, so a loss
                row = [(None, idx)]
                self.bad.add(idx)
            self.edges[idx] = tuple(row)
        return self.finish(p, True)


class _OfferBuilder(_Builder):
    def _position_owner(self, tag):
        return CTRL

    def run(self) -> GameArena:
        p = self.p
        env = p.env
        v0 = initial_valuation(p.fluents, env.labels[env.initial])
        obls0 = tuple(m.initial for m in self.monitors)
        start = self.arrive(env.initial, obls0, v0.values)
        assert start == 0
        while self.queue:
            idx = self.queue.popleft()
            key = self.order[idx]
            if key[0] == "offer":
                _, parent, offer = key
                s, obls, vals = self.order[parent]
                picks = sorted(a for a, _ in env.out[s]
                               if a in p.uncontrollable or a == offer)
                row = []
                for a in picks:
                    s2, obls2, vals2 = self.step(s, vals, obls, a)
                    row.append((a, self.arrive(s2, obls2, vals2)))
                self.edges[idx] = tuple(row)
                continue
            s, obls, vals = key
            enabled = [a for a, _ in env.out[s]]
            offers = sorted(a for a in enabled if a in p.controllable)
            if not any(a in p.uncontrollable for a in enabled):
                if not offers:  # nothing to offer, nothing to monitor
                    self.edges[idx] = ((None, idx),)
                    self.bad.add(idx)
                    continue
            else:
                offers.append(None)  # offering nothing is fine if U can move
            row = []
            for c in offers:
                tag = "-" if c is None else c.name
                t = self.intern(("offer", idx, c), ENV, False, s, None,
                                f"{self.names[idx]}?{tag}", None)
                row.append((None, t))
            self.edges[idx] = tuple(row)
        return self.finish(p, False)


def build_arena(p: StdProblem) -> GameArena:
    """Explicit game for a standard control problem.

    Turn-based environments (every state tagged e or c) give the direct
    two-player graph; untagged environments get the offer gadget.
    """
    if p.env.tags is not None and all(t in ("e", "c") for t in p.env.tags):
        return _TurnBuilder(p).run()
    return _OfferBuilder(p).run()
