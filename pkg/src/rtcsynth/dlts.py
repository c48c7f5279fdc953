"""Labelled transition systems with controlled/monitored alphabets.

A machine is a finite deterministic LTS: states carry proposition labels,
transitions carry actions, and the action alphabet is split into a
controlled part and a monitored part.  Machines are immutable; every
operation returns a fresh one.
"""

from __future__ import annotations

import warnings
from collections import deque
from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import Callable, Iterable

from .errors import ModelError

__all__ = [
    "ActionId",
    "PropId",
    "action",
    "prop",
    "Alphabet",
    "Dlts",
    "enabled_actions",
    "parallel_compose",
    "is_deterministic",
    "reachable",
    "scc_decompose",
    "cyclic_sccs",
    "annotate_enabledness",
]


@dataclass(frozen=True, order=True)
class ActionId:
    """Interned action name; compare and sort by name."""

    name: str

    def __repr__(self) -> str:
        return f"'{self.name}"


@dataclass(frozen=True, order=True)
class PropId:
    """Interned proposition name."""

    name: str

    def __repr__(self) -> str:
        return self.name


_ACTIONS: dict[str, ActionId] = {}
_PROPS: dict[str, PropId] = {}


def action(name: str | ActionId) -> ActionId:
    if isinstance(name, ActionId):
        return name
    got = _ACTIONS.get(name)
    if got is None:
        got = _ACTIONS[name] = ActionId(name)
    return got


def prop(name: str | PropId) -> PropId:
    if isinstance(name, PropId):
        return name
    got = _PROPS.get(name)
    if got is None:
        got = _PROPS[name] = PropId(name)
    return got


@dataclass(frozen=True)
class Alphabet:
    """Action alphabet split into controlled and monitored parts."""

    controlled: frozenset[ActionId]
    monitored: frozenset[ActionId]

    def __post_init__(self):
        both = self.controlled & self.monitored
        if both:
            names = ", ".join(sorted(a.name for a in both))
            raise ModelError(f"actions both controlled and monitored: {names}")

    @cached_property
    def actions(self) -> frozenset[ActionId]:
        return self.controlled | self.monitored

    @staticmethod
    def make(controlled: Iterable[str | ActionId],
             monitored: Iterable[str | ActionId]) -> "Alphabet":
        return Alphabet(frozenset(action(a) for a in controlled),
                        frozenset(action(a) for a in monitored))


@dataclass(frozen=True)
class Dlts:
    """Deterministic labelled transition system.

    States are dense ints 0..n_states-1.  `labels[s]` is the proposition
    set of state s, `state_names[s]` its display name.  `tags`, when
    present, carries a short per-state marker (turn machines use "e"/"c").
    """

    name: str
    alphabet: Alphabet
    n_states: int
    initial: int
    transitions: frozenset[tuple[int, ActionId, int]]
    labels: tuple[frozenset[PropId], ...]
    state_names: tuple[str, ...]
    tags: tuple[str | None, ...] | None = None

    @cached_property
    def out(self) -> tuple[tuple[tuple[ActionId, int], ...], ...]:
        """Per-state outgoing (action, dst) pairs, sorted by action name."""
        adj: list[list[tuple[ActionId, int]]] = [[] for _ in range(self.n_states)]
        for s, a, t in self.transitions:
            adj[s].append((a, t))
        return tuple(tuple(sorted(row)) for row in adj)

    @cached_property
    def _step(self) -> dict[tuple[int, ActionId], int]:
        return {(s, a): t for s, a, t in self.transitions}

    def step(self, s: int, a: ActionId) -> int | None:
        return self._step.get((s, a))

    @cached_property
    def props(self) -> frozenset[PropId]:
        out: set[PropId] = set()
        for lab in self.labels:
            out |= lab
        return frozenset(out)

    def tag(self, s: int) -> str | None:
        return None if self.tags is None else self.tags[s]

    @staticmethod
    def make(name: str,
             states: Iterable[str],
             initial: str,
             controlled: Iterable[str | ActionId],
             monitored: Iterable[str | ActionId],
             transitions: Iterable[tuple[str, str | ActionId, str]],
             labels: dict[str, Iterable[str | PropId]] | None = None,
             tags: dict[str, str] | None = None) -> "Dlts":
        """Build and validate a machine from named parts."""
        names = list(states)
        if len(set(names)) != len(names):
            raise ModelError(f"{name}: duplicate state names")
        index = {sn: i for i, sn in enumerate(names)}
        if initial not in index:
            raise ModelError(f"{name}: unknown initial state '{initial}'")
        alphabet = Alphabet.make(controlled, monitored)
        trans: set[tuple[int, ActionId, int]] = set()
        seen: dict[tuple[int, ActionId], int] = {}
        for src, act, dst in transitions:
            a = action(act)
            if a not in alphabet.actions:
                raise ModelError(f"{name}: action '{a.name}' not in alphabet")
            for sn in (src, dst):
                if sn not in index:
                    raise ModelError(f"{name}: unknown state '{sn}' in transition")
            s, t = index[src], index[dst]
            prev = seen.get((s, a))
            if prev is not None and prev != t:
                raise ModelError(
                    f"{name}: nondeterministic on '{a.name}' at state '{src}'")
            seen[(s, a)] = t
            trans.add((s, a, t))
        labs: list[frozenset[PropId]] = [frozenset() for _ in names]
        for sn, ps in (labels or {}).items():
            if sn not in index:
                raise ModelError(f"{name}: label on unknown state '{sn}'")
            labs[index[sn]] = frozenset(prop(p) for p in ps)
        tagtup = None
        if tags is not None:
            tagtup = tuple(tags.get(sn) for sn in names)
        return Dlts(name=name, alphabet=alphabet, n_states=len(names),
                    initial=index[initial], transitions=frozenset(trans),
                    labels=tuple(labs), state_names=tuple(names), tags=tagtup)


def enabled_actions(d: Dlts, s: int,
                    restrict: frozenset[ActionId] | None = None) -> frozenset[ActionId]:
    """Actions with an outgoing transition at s, optionally filtered."""
    out = frozenset(a for a, _ in d.out[s])
    return out if restrict is None else out & restrict


def is_deterministic(d: Dlts) -> bool:
    seen: set[tuple[int, ActionId]] = set()
    for s, a, _ in d.transitions:
        if (s, a) in seen:
            return False
        seen.add((s, a))
    return True


def parallel_compose(m: Dlts, e: Dlts, name: str | None = None) -> Dlts:
    """Synchronous product: shared actions synchronize, the rest interleave.

    Only the reachable part is built.  An action controlled by either side
    is controlled in the product.  Proposition names held by both machines
    are prefixed with the owning machine's name (with a warning); a clash
    on enabledness propositions is an error since renaming them would
    silently detach them from their action.
    """
    shared = m.alphabet.actions & e.alphabet.actions
    common = m.props & e.props
    for p in common:
        if "^" in p.name:
            raise ModelError(
                f"enabledness proposition '{p.name}' defined in both "
                f"'{m.name}' and '{e.name}'")
    if common:
        names = ", ".join(sorted(p.name for p in common))
        warnings.warn(f"propositions in both '{m.name}' and '{e.name}' "
                      f"namespaced: {names}", stacklevel=2)
    ren_m = {p: prop(f"{m.name}.{p.name}") for p in common}
    ren_e = {p: prop(f"{e.name}.{p.name}") for p in common}

    start = (m.initial, e.initial)
    index: dict[tuple[int, int], int] = {start: 0}
    order: list[tuple[int, int]] = [start]
    queue = deque([start])
    trans: set[tuple[int, ActionId, int]] = set()
    while queue:
        pair = queue.popleft()
        s, t = pair
        src = index[pair]
        moves: list[tuple[ActionId, int, int]] = []
        for a, s2 in m.out[s]:
            if a in shared:
                t2 = e.step(t, a)
                if t2 is not None:
                    moves.append((a, s2, t2))
            else:
                moves.append((a, s2, t))
        for a, t2 in e.out[t]:
            if a not in shared:
                moves.append((a, s, t2))
        for a, s2, t2 in sorted(moves):
            nxt = (s2, t2)
            dst = index.get(nxt)
            if dst is None:
                dst = index[nxt] = len(order)
                order.append(nxt)
                queue.append(nxt)
            trans.add((src, a, dst))

    controlled = m.alphabet.controlled | e.alphabet.controlled
    monitored = (m.alphabet.monitored | e.alphabet.monitored) - controlled
    labs = []
    snames = []
    tagrow: list[str | None] = []
    for s, t in order:
        lm = frozenset(ren_m.get(p, p) for p in m.labels[s])
        le = frozenset(ren_e.get(p, p) for p in e.labels[t])
        labs.append(lm | le)
        snames.append(f"({m.state_names[s]},{e.state_names[t]})")
        tagrow.append(m.tag(s) if m.tags is not None else e.tag(t))
    tags = tuple(tagrow) if (m.tags is not None or e.tags is not None) else None
    return Dlts(name=name or f"{m.name}||{e.name}",
                alphabet=Alphabet(controlled, monitored),
                n_states=len(order), initial=0, transitions=frozenset(trans),
                labels=tuple(labs), state_names=tuple(snames), tags=tags)


def reachable(d: Dlts) -> Dlts:
    """Restrict to states reachable from the initial one.

    States are renumbered in breadth-first discovery order (edges taken in
    action-name order), so the operation is idempotent and output-stable.
    """
    index: dict[int, int] = {d.initial: 0}
    order = [d.initial]
    queue = deque(order)
    while queue:
        s = queue.popleft()
        for _, t in d.out[s]:
            if t not in index:
                index[t] = len(order)
                order.append(t)
                queue.append(t)
    trans = frozenset((index[s], a, index[t])
                      for s, a, t in d.transitions if s in index and t in index)
    tags = tuple(d.tags[s] for s in order) if d.tags is not None else None
    return replace(d, n_states=len(order), initial=0, transitions=trans,
                   labels=tuple(d.labels[s] for s in order),
                   state_names=tuple(d.state_names[s] for s in order),
                   tags=tags)


def scc_decompose(d: Dlts,
                  state_filter: Callable[[int], bool] | None = None,
                  transition_filter: Callable[[int, ActionId, int], bool] | None = None,
                  ) -> list[tuple[frozenset[int], bool]]:
    """Strongly connected components of a sub-graph, reverse topological order.

    Each component comes with a flag telling whether it contains a cycle
    (a singleton without a self-loop does not).  Iterative Tarjan; the
    filters carve out the sub-graph without copying the machine.
    """
    keep = [state_filter is None or state_filter(s) for s in range(d.n_states)]

    def edges(s: int):
        for a, t in d.out[s]:
            if keep[t] and (transition_filter is None or transition_filter(s, a, t)):
                yield t

    indices = [-1] * d.n_states
    low = [0] * d.n_states
    onstack = [False] * d.n_states
    stack: list[int] = []
    sccs: list[tuple[frozenset[int], bool]] = []
    counter = 0
    for root in range(d.n_states):
        if not keep[root] or indices[root] != -1:
            continue
        work: list[tuple[int, Iterable[int]]] = [(root, edges(root))]
        indices[root] = low[root] = counter
        counter += 1
        stack.append(root)
        onstack[root] = True
        while work:
            v, it = work[-1]
            advanced = False
            for w in it:
                if indices[w] == -1:
                    indices[w] = low[w] = counter
                    counter += 1
                    stack.append(w)
                    onstack[w] = True
                    work.append((w, edges(w)))
                    advanced = True
                    break
                if onstack[w]:
                    low[v] = min(low[v], indices[w])
            if advanced:
                continue
            work.pop()
            if work:
                pv = work[-1][0]
                low[pv] = min(low[pv], low[v])
            if low[v] == indices[v]:
                comp = []
                while True:
                    w = stack.pop()
                    onstack[w] = False
                    comp.append(w)
                    if w == v:
                        break
                members = frozenset(comp)
                cyclic = any(w in members for s in comp for w in edges(s))
                sccs.append((members, cyclic))
    return sccs


def cyclic_sccs(d: Dlts,
                state_filter: Callable[[int], bool] | None = None,
                transition_filter: Callable[[int, ActionId, int], bool] | None = None,
                ) -> list[frozenset[int]]:
    """SCCs that contain at least one internal (filtered) transition."""
    return [comp for comp, cyclic in
            scc_decompose(d, state_filter, transition_filter) if cyclic]


def annotate_enabledness(d: Dlts, tag: str) -> Dlts:
    """Add a proposition `<action>^<tag>` to each state enabling that action."""
    labs = []
    for s in range(d.n_states):
        extra = {prop(f"{a.name}^{tag}") for a, _ in d.out[s]}
        clash = extra & d.labels[s]
        if clash:
            names = ", ".join(sorted(p.name for p in clash))
            raise ModelError(f"{d.name}: propositions already present: {names}")
        labs.append(d.labels[s] | extra)
    return replace(d, labels=tuple(labs))
