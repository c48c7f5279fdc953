"""Fluents and their deterministic valuation along executions.

A fluent is a triple of initiating actions, terminating actions, and an
initial value; it is true at a position when some initiating action has
happened with no terminating action since (or it started true and was
never terminated).  A proposition fluent instead mirrors a state label.

Valuations use the inclusive position convention: the action taken from
state s_i affects the valuation at position i, so valuation(i) is the
fold of l_0..l_i over the initial valuation.  Proposition fluents read
the labels of the state the step lands in.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Sequence

from .dlts import ActionId, Alphabet, PropId, action, prop
from .errors import ModelError, UsageError

__all__ = [
    "Fluent",
    "FluentSet",
    "FluentValuation",
    "action_fluent",
    "initial_valuation",
    "step_valuation",
    "fluent_holds_at",
    "BoolCombo",
    "CTrue",
    "CFalse",
    "CRef",
    "CNot",
    "CAnd",
    "COr",
    "conj",
    "disj",
    "neg",
    "eval_combo",
    "combo_refs",
]


@dataclass(frozen=True)
class Fluent:
    """<initiating, terminating, initially>, or a proposition mirror."""

    name: str
    initiating: frozenset[ActionId]
    terminating: frozenset[ActionId]
    initially: bool
    prop: PropId | None = None

    def __post_init__(self):
        if not self.name:
            raise ModelError("fluent with empty name")
        if self.initiating & self.terminating:
            raise ModelError(f"fluent {self.name}: initiating and terminating "
                             f"sets overlap")
        if self.prop is not None and (self.initiating or self.terminating):
            raise ModelError(f"fluent {self.name}: proposition fluents take "
                             f"no actions")

    @staticmethod
    def make(name: str, initiating: Iterable[str | ActionId],
             terminating: Iterable[str | ActionId], initially: bool) -> "Fluent":
        return Fluent(name, frozenset(action(a) for a in initiating),
                      frozenset(action(a) for a in terminating), initially)

    @staticmethod
    def of_prop(p: str | PropId) -> "Fluent":
        p = prop(p)
        return Fluent(f"@{p.name}", frozenset(), frozenset(), False, p)


def action_fluent(a: ActionId, act: Alphabet | Iterable[ActionId]) -> Fluent:
    """The occurrence fluent of an action: <{a}, Act \\ {a}, false>."""
    actions = act.actions if isinstance(act, Alphabet) else frozenset(act)
    if a not in actions:
        raise UsageError(f"action '{a.name}' not in the given alphabet")
    return Fluent(f"'{a.name}", frozenset([a]), actions - {a}, False)


@dataclass(frozen=True)
class FluentSet:
    """Ordered declaration context; fixes the valuation vector layout."""

    fluents: tuple[Fluent, ...]

    def __post_init__(self):
        names = [f.name for f in self.fluents]
        if len(set(names)) != len(names):
            raise ModelError("duplicate fluent names")

    @cached_property
    def _index(self) -> dict[str, int]:
        return {f.name: i for i, f in enumerate(self.fluents)}

    def __contains__(self, name: str) -> bool:
        return name in self._index

    def __iter__(self):
        return iter(self.fluents)

    def get(self, name: str) -> Fluent:
        i = self._index.get(name)
        if i is None:
            raise UsageError(f"undeclared fluent '{name}'")
        return self.fluents[i]

    def restrict(self, names: Iterable[str]) -> "FluentSet":
        keep = set(names)
        return FluentSet(tuple(f for f in self.fluents if f.name in keep))


@dataclass(frozen=True)
class FluentValuation:
    """Truth assignment over a FluentSet at one position."""

    fluents: FluentSet
    values: tuple[bool, ...]

    def __getitem__(self, name: str) -> bool:
        i = self.fluents._index.get(name)
        if i is None:
            raise UsageError(f"undeclared fluent '{name}'")
        return self.values[i]


def initial_valuation(fluents: FluentSet,
                      initial_labels: frozenset[PropId] = frozenset(),
                      ) -> FluentValuation:
    """Base valuation before any action has occurred."""
    vals = tuple(f.initially if f.prop is None else f.prop in initial_labels
                 for f in fluents.fluents)
    return FluentValuation(fluents, vals)


def step_valuation(v: FluentValuation, a: ActionId,
                   next_labels: frozenset[PropId] = frozenset(),
                   ) -> FluentValuation:
    """Advance one position: apply action a, land in a state labelled next_labels."""
    out = []
    for f, old in zip(v.fluents.fluents, v.values):
        if f.prop is not None:
            out.append(f.prop in next_labels)
        elif a in f.initiating:
            out.append(True)
        elif a in f.terminating:
            out.append(False)
        else:
            out.append(old)
    return FluentValuation(v.fluents, tuple(out))


def fluent_holds_at(f: Fluent, actions: Sequence[ActionId], i: int,
                    convention: str = "inclusive") -> bool:
    """Closed-form truth of a transition fluent at position i of a trace.

    "inclusive" counts the action at position i itself (j <= i); the
    "preceding" switch gives the j < i reading for comparison.
    """
    if f.prop is not None:
        raise UsageError("closed form applies to transition fluents only")
    hi = i + 1 if convention == "inclusive" else i
    if convention not in ("inclusive", "preceding"):
        raise UsageError(f"unknown convention '{convention}'")
    for j in range(hi - 1, -1, -1):
        if actions[j] in f.initiating:
            return True
        if actions[j] in f.terminating:
            return False
    return f.initially


# Boolean combinations over fluent names.

class BoolCombo:
    """Base of the combo expression tree."""

    __slots__ = ()


@dataclass(frozen=True)
class CTrue(BoolCombo):
    pass


@dataclass(frozen=True)
class CFalse(BoolCombo):
    pass


@dataclass(frozen=True)
class CRef(BoolCombo):
    name: str


@dataclass(frozen=True)
class CNot(BoolCombo):
    operand: BoolCombo


@dataclass(frozen=True)
class CAnd(BoolCombo):
    items: tuple[BoolCombo, ...]


@dataclass(frozen=True)
class COr(BoolCombo):
    items: tuple[BoolCombo, ...]


TRUE = CTrue()
FALSE = CFalse()


def conj(items: Iterable[BoolCombo]) -> BoolCombo:
    flat: list[BoolCombo] = []
    for c in items:
        if isinstance(c, CFalse):
            return FALSE
        if isinstance(c, CTrue):
            continue
        if isinstance(c, CAnd):
            flat.extend(c.items)
        else:
            flat.append(c)
    if not flat:
        return TRUE
    if len(flat) == 1:
        return flat[0]
    return CAnd(tuple(flat))


def disj(items: Iterable[BoolCombo]) -> BoolCombo:
    flat: list[BoolCombo] = []
    for c in items:
        if isinstance(c, CTrue):
            return TRUE
        if isinstance(c, CFalse):
            continue
        if isinstance(c, COr):
            flat.extend(c.items)
        else:
            flat.append(c)
    if not flat:
        return FALSE
    if len(flat) == 1:
        return flat[0]
    return COr(tuple(flat))


def neg(c: BoolCombo) -> BoolCombo:
    if isinstance(c, CTrue):
        return FALSE
    if isinstance(c, CFalse):
        return TRUE
    if isinstance(c, CNot):
        return c.operand
    return CNot(c)


def eval_combo(c: BoolCombo, v: FluentValuation) -> bool:
    if isinstance(c, CTrue):
        return True
    if isinstance(c, CFalse):
        return False
    if isinstance(c, CRef):
        return v[c.name]
    if isinstance(c, CNot):
        return not eval_combo(c.operand, v)
    if isinstance(c, CAnd):
        return all(eval_combo(x, v) for x in c.items)
    if isinstance(c, COr):
        return any(eval_combo(x, v) for x in c.items)
    raise UsageError(f"not a combo: {c!r}")


def combo_refs(c: BoolCombo) -> frozenset[str]:
    if isinstance(c, CRef):
        return frozenset([c.name])
    if isinstance(c, CNot):
        return combo_refs(c.operand)
    if isinstance(c, (CAnd, COr)):
        out: frozenset[str] = frozenset()
        for x in c.items:
            out |= combo_refs(x)
        return out
    return frozenset()
