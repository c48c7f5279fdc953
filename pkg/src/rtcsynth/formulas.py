"""Safety-fragment temporal formulas over fluents, and their monitors.

The grammar keeps every temporal operator (always, weak-until) in
positive position; implication antecedents are plain fluent combinations
so no temporal operator is ever negated.  There is no next operator:
weak-until unfolds as "rhs now, or lhs now and the same obligation at
the next position".

A monitor state is a disjunction of obligation sets (formulas that must
hold from the current position on).  Feeding a valuation rewrites each
obligation; the empty disjunction is the violation verdict and an empty
obligation set inside it means the formula is discharged for good.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Sequence

from .dlts import ActionId, Alphabet, Dlts, prop
from .errors import SpecError
from .fluents import (BoolCombo, FluentSet, FluentValuation, combo_refs,
                      eval_combo, initial_valuation, step_valuation)

__all__ = [
    "SafetyFormula",
    "SLit",
    "SAnd",
    "SOr",
    "SImplies",
    "SAlways",
    "SWeakUntil",
    "Sgr1Spec",
    "formula_refs",
    "asap",
    "urg_rsp",
    "SafetyMonitor",
    "compile_safety_monitor",
    "holds_on_finite",
    "holds_on_lasso",
]


class SafetyFormula:
    __slots__ = ()


@dataclass(frozen=True)
class SLit(SafetyFormula):
    combo: BoolCombo


@dataclass(frozen=True)
class SAnd(SafetyFormula):
    items: tuple[SafetyFormula, ...]


@dataclass(frozen=True)
class SOr(SafetyFormula):
    items: tuple[SafetyFormula, ...]


@dataclass(frozen=True)
class SImplies(SafetyFormula):
    lhs: BoolCombo
    rhs: SafetyFormula


@dataclass(frozen=True)
class SAlways(SafetyFormula):
    body: SafetyFormula


@dataclass(frozen=True)
class SWeakUntil(SafetyFormula):
    lhs: SafetyFormula
    rhs: SafetyFormula


def formula_refs(f: SafetyFormula) -> frozenset[str]:
    if isinstance(f, SLit):
        return combo_refs(f.combo)
    if isinstance(f, (SAnd, SOr)):
        out: frozenset[str] = frozenset()
        for g in f.items:
            out |= formula_refs(g)
        return out
    if isinstance(f, SImplies):
        return combo_refs(f.lhs) | formula_refs(f.rhs)
    if isinstance(f, SAlways):
        return formula_refs(f.body)
    if isinstance(f, SWeakUntil):
        return formula_refs(f.lhs) | formula_refs(f.rhs)
    raise SpecError(f"not a safety formula: {f!r}")


@dataclass(frozen=True)
class Sgr1Spec:
    """Safety formulas plus recurrence atoms: Box rho and (And GF a_i) -> (And GF g_j)."""

    safety: tuple[SafetyFormula, ...] = ()
    assumptions: tuple[BoolCombo, ...] = ()
    guarantees: tuple[BoolCombo, ...] = ()

    def refs(self) -> frozenset[str]:
        out: frozenset[str] = frozenset()
        for f in self.safety:
            out |= formula_refs(f)
        for c in self.assumptions + self.guarantees:
            out |= combo_refs(c)
        return out


# Response schemata.

def asap(psi: BoolCombo, controlled: Iterable[ActionId],
         fluent_name=lambda a: f"'{a.name}") -> SafetyFormula:
    """No controlled action, weak-until one fires, weak-until psi holds.

    Reads as: the controller's very next move, whenever it comes, must
    already satisfy psi; the environment may interleave freely before it.
    """
    from .fluents import CRef, conj, disj, neg
    acts = sorted(controlled)
    quiet = conj(neg(CRef(fluent_name(a))) for a in acts)
    burst = disj(CRef(fluent_name(a)) for a in acts)
    return SWeakUntil(SLit(quiet), SWeakUntil(SLit(burst), SLit(psi)))


def urg_rsp(phi: BoolCombo, psi: BoolCombo,
            controlled: Iterable[ActionId]) -> SafetyFormula:
    """Always, phi demands that the next controller move delivers psi."""
    return SAlways(SImplies(phi, asap(psi, controlled)))


# Obligation-set monitors.

Obligations = frozenset  # frozenset[frozenset[SafetyFormula]]

DNF_TRUE: Obligations = frozenset([frozenset()])
DNF_FALSE: Obligations = frozenset()


def _dnf_canonical(sets: Iterable[frozenset]) -> Obligations:
    # Drop obligation sets subsumed by a weaker (smaller) one.
    pool = sorted(set(sets), key=len)
    kept: list[frozenset] = []
    for o in pool:
        if not any(k <= o for k in kept):
            kept.append(o)
    return frozenset(kept)


def _dnf_product(a: Obligations, b: Obligations) -> Obligations:
    return _dnf_canonical(x | y for x in a for y in b)


def _expand(f: SafetyFormula, v: FluentValuation) -> Obligations:
    """Rewrite f at the current valuation into next-position obligations."""
    if isinstance(f, SLit):
        return DNF_TRUE if eval_combo(f.combo, v) else DNF_FALSE
    if isinstance(f, SImplies):
        return _expand(f.rhs, v) if eval_combo(f.lhs, v) else DNF_TRUE
    if isinstance(f, SAnd):
        out = DNF_TRUE
        for g in f.items:
            out = _dnf_product(out, _expand(g, v))
        return out
    if isinstance(f, SOr):
        out = DNF_FALSE
        for g in f.items:
            out = _dnf_canonical(out | _expand(g, v))
        return out
    if isinstance(f, SAlways):
        return _dnf_product(_expand(f.body, v), frozenset([frozenset([f])]))
    if isinstance(f, SWeakUntil):
        hold = _dnf_product(_expand(f.lhs, v), frozenset([frozenset([f])]))
        return _dnf_canonical(_expand(f.rhs, v) | hold)
    raise SpecError(f"not a safety formula: {f!r}")


@dataclass(frozen=True)
class SafetyMonitor:
    """Steppable obligation tracker for one safety formula."""

    formula: SafetyFormula

    @property
    def initial(self) -> Obligations:
        return frozenset([frozenset([self.formula])])

    def step(self, obls: Obligations, v: FluentValuation) -> Obligations:
        out: set[frozenset] = set()
        for ob in obls:
            branch = DNF_TRUE
            for g in ob:
                branch = _dnf_product(branch, _expand(g, v))
                if branch == DNF_FALSE:
                    break
            out |= branch
        return _dnf_canonical(out)

    @staticmethod
    def violated(obls: Obligations) -> bool:
        return obls == DNF_FALSE


def compile_safety_monitor(f: SafetyFormula, fluents: FluentSet,
                           alphabet: Alphabet) -> tuple[Dlts, int | None]:
    """Render the obligation monitor as a machine over the action alphabet.

    Only transition fluents can be tracked from actions alone; a formula
    over proposition fluents has no action-driven monitor.  Returns the
    machine and the index of the violation sink, or None when no finite
    trace over the alphabet can violate f.
    """
    used = fluents.restrict(formula_refs(f))
    for fl in used:
        if fl.prop is not None:
            raise SpecError(f"formula reads proposition fluent '{fl.name}'; "
                            f"an action-driven monitor cannot track it")
    mon = SafetyMonitor(f)
    v0 = initial_valuation(used)
    start = (v0.values, mon.initial)
    index: dict[tuple, int] = {start: 0}
    order = [start]
    queue = deque([start])
    trans: list[tuple[int, ActionId, int]] = []
    sink: int | None = None
    actions = sorted(alphabet.actions)
    while queue:
        cur = queue.popleft()
        src = index[cur]
        vals, obls = cur
        if SafetyMonitor.violated(obls):
            sink = src
            for a in actions:
                trans.append((src, a, src))
            continue
        v = FluentValuation(used, vals)
        for a in actions:
            v2 = step_valuation(v, a)
            ob2 = mon.step(obls, v2)
            # one shared sink: the valuation no longer matters there
            nxt = ((), ob2) if SafetyMonitor.violated(ob2) else (v2.values, ob2)
            dst = index.get(nxt)
            if dst is None:
                dst = index[nxt] = len(order)
                order.append(nxt)
                queue.append(nxt)
            trans.append((src, a, dst))
    labels = tuple(frozenset([prop("violation")])
                   if SafetyMonitor.violated(ob) else frozenset()
                   for _, ob in order)
    d = Dlts(name="monitor", alphabet=alphabet, n_states=len(order),
             initial=0, transitions=frozenset(trans), labels=labels,
             state_names=tuple(f"m{i}" for i in range(len(order))))
    return d, sink


# Direct evaluation, used as the monitors' independent oracle and by verify.

def holds_on_finite(f: SafetyFormula, vals: Sequence[FluentValuation]) -> bool:
    """Weak finite-trace truth at position 0 (end of trace discharges obligations)."""

    memo: dict[tuple[int, int], bool] = {}

    def at(g: SafetyFormula, i: int) -> bool:
        if i >= len(vals):
            return True
        key = (id(g), i)
        got = memo.get(key)
        if got is None:
            memo[key] = got = _finite(g, i)
        return got

    def _finite(g: SafetyFormula, i: int) -> bool:
        if isinstance(g, SLit):
            return eval_combo(g.combo, vals[i])
        if isinstance(g, SAnd):
            return all(at(x, i) for x in g.items)
        if isinstance(g, SOr):
            return any(at(x, i) for x in g.items)
        if isinstance(g, SImplies):
            return not eval_combo(g.lhs, vals[i]) or at(g.rhs, i)
        if isinstance(g, SAlways):
            return all(at(g.body, k) for k in range(i, len(vals)))
        if isinstance(g, SWeakUntil):
            for k in range(i, len(vals)):
                if at(g.rhs, k):
                    return True
                if not at(g.lhs, k):
                    return False
            return True
        raise SpecError(f"not a safety formula: {g!r}")

    return at(f, 0) if vals else True


def holds_on_lasso(f: SafetyFormula, vals: Sequence[FluentValuation],
                   loop: int) -> bool:
    """Truth at position 0 on the infinite word vals[0..] (vals[loop..] repeats).

    Weak-until is solved as a greatest fixpoint over the cycle positions.
    """
    n = len(vals)
    if not (0 <= loop < n):
        raise SpecError("lasso loop index out of range")

    def nxt(i: int) -> int:
        return i + 1 if i + 1 < n else loop

    memo: dict[tuple[int, int], bool] = {}

    def at(g: SafetyFormula, i: int) -> bool:
        key = (id(g), i)
        got = memo.get(key)
        if got is None:
            memo[key] = got = _eval(g, i)
        return got

    def _eval(g: SafetyFormula, i: int) -> bool:
        if isinstance(g, SLit):
            return eval_combo(g.combo, vals[i])
        if isinstance(g, SAnd):
            return all(at(x, i) for x in g.items)
        if isinstance(g, SOr):
            return any(at(x, i) for x in g.items)
        if isinstance(g, SImplies):
            return not eval_combo(g.lhs, vals[i]) or at(g.rhs, i)
        if isinstance(g, SAlways):
            # From a cycle position every cycle position recurs.
            reach = range(loop if i >= loop else i, n)
            return all(at(g.body, k) for k in reach)
        if isinstance(g, SWeakUntil):
            # gfp of W(k) = rhs(k) or (lhs(k) and W(next k)) over all positions
            w = {k: True for k in range(n)}
            changed = True
            while changed:
                changed = False
                for k in range(n - 1, -1, -1):
                    val = at(g.rhs, k) or (at(g.lhs, k) and w[nxt(k)])
                    if val != w[k]:
                        w[k] = val
                        changed = True
            for k, val in w.items():
                memo[(id(g), k)] = val
            return w[i]
        raise SpecError(f"not a safety formula: {g!r}")

    return at(f, 0)
