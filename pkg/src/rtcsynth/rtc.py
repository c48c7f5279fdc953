"""Reduction of run-to-completion control to standard turn-taking control.

The environment is composed with a two-state yield machine that makes
turn ownership explicit: the controller hands the turn over with yieldC,
the environment with yieldE.  Yielding to a side that could only yield
straight back is pruned (livelock removal).  Turn fairness is then
expressible as plain recurrence atoms over the composite: the derived
atom b demands the environment's turn (or a stuck environment) recur,
and a matching assumption atom excuses the controller when it never
gets to run.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from functools import cached_property

from .dlts import (ActionId, Alphabet, Dlts, action, annotate_enabledness,
                   is_deterministic, parallel_compose, reachable)
from .errors import ModelError, SpecError
from .fluents import (BoolCombo, CRef, Fluent, FluentSet, action_fluent, conj,
                      disj, neg)
from .formulas import Sgr1Spec

__all__ = [
    "YIELD_CTRL",
    "YIELD_ENV",
    "YIELDS",
    "RtcProblem",
    "StdProblem",
    "DerivedAtoms",
    "derived_atoms",
    "build_yield",
    "remove_livelock",
    "build_modified_problem",
]

YIELD_CTRL = action("yieldC")
YIELD_ENV = action("yieldE")
YIELDS = frozenset([YIELD_CTRL, YIELD_ENV])


def _check_refs(spec: Sgr1Spec, fluents: FluentSet, extra: tuple[BoolCombo, ...] = ()):
    from .fluents import combo_refs
    refs = set(spec.refs())
    for c in extra:
        refs |= combo_refs(c)
    missing = sorted(r for r in refs if r not in fluents)
    if missing:
        raise SpecError(f"goal references undeclared fluents: {', '.join(missing)}")


@dataclass(frozen=True)
class RtcProblem:
    """<E, phi, C>: both sides run to completion before yielding."""

    env: Dlts
    spec: Sgr1Spec
    fluents: FluentSet
    controllable: frozenset[ActionId]

    @cached_property
    def uncontrollable(self) -> frozenset[ActionId]:
        return self.env.alphabet.actions - self.controllable

    @staticmethod
    def make(env: Dlts, spec: Sgr1Spec, fluents: FluentSet,
             controllable) -> "RtcProblem":
        ctrl = frozenset(action(a) for a in controllable)
        stray = ctrl - env.alphabet.actions
        if stray:
            names = ", ".join(sorted(a.name for a in stray))
            raise ModelError(f"controllable actions not in the environment "
                             f"alphabet: {names}")
        if YIELDS & env.alphabet.actions:
            raise ModelError("action names yieldC/yieldE are reserved")
        if not is_deterministic(env):
            raise SpecError("environment must be deterministic")
        if not spec.safety and not spec.guarantees:
            raise SpecError("goal needs at least one safety formula or guarantee")
        _check_refs(spec, fluents)
        alph = Alphabet(ctrl, env.alphabet.actions - ctrl)
        return RtcProblem(replace(env, alphabet=alph), spec, fluents, ctrl)


@dataclass(frozen=True)
class StdProblem:
    """Standard control problem; `require` lists unconditional recurrence atoms."""

    env: Dlts
    spec: Sgr1Spec
    fluents: FluentSet
    controllable: frozenset[ActionId]
    require: tuple[BoolCombo, ...] = ()

    @cached_property
    def uncontrollable(self) -> frozenset[ActionId]:
        return self.env.alphabet.actions - self.controllable

    @staticmethod
    def make(env: Dlts, spec: Sgr1Spec, fluents: FluentSet, controllable,
             require: tuple[BoolCombo, ...] = ()) -> "StdProblem":
        ctrl = frozenset(action(a) for a in controllable)
        stray = ctrl - env.alphabet.actions
        if stray:
            names = ", ".join(sorted(a.name for a in stray))
            raise ModelError(f"controllable actions not in the environment "
                             f"alphabet: {names}")
        if not is_deterministic(env):
            raise SpecError("environment must be deterministic")
        if not spec.safety and not spec.guarantees and not require:
            raise SpecError("goal needs at least one safety formula or "
                            "recurrence atom")
        _check_refs(spec, fluents, require)
        alph = Alphabet(ctrl, env.alphabet.actions - ctrl)
        return StdProblem(replace(env, alphabet=alph), spec, fluents, ctrl,
                          require)


def build_yield(uncontrolled, controlled) -> Dlts:
    """Two-state turn machine: e loops on U and yields with yieldE; dually c."""
    u = frozenset(action(a) for a in uncontrolled)
    c = frozenset(action(a) for a in controlled)
    if YIELDS & (u | c):
        raise ModelError("action names yieldC/yieldE are reserved")
    trans = [("e", YIELD_ENV, "c"), ("c", YIELD_CTRL, "e")]
    trans += [("e", a, "e") for a in sorted(u)]
    trans += [("c", a, "c") for a in sorted(c)]
    return Dlts.make("yield", ["e", "c"], "e",
                     sorted(c | {YIELD_CTRL}), sorted(u | {YIELD_ENV}),
                     trans, tags={"e": "e", "c": "c"})


def remove_livelock(n: Dlts) -> Dlts:
    """Drop yield transitions into states that could only yield back.

    Non-yield transitions are never dropped, so the operator is idempotent.
    The result is restricted to reachable states.
    """
    def has_real_action(s: int) -> bool:
        return any(a not in YIELDS for a, _ in n.out[s])

    kept = frozenset((s, a, t) for s, a, t in n.transitions
                     if a not in YIELDS or has_real_action(t))
    return reachable(replace(n, transitions=kept))


@dataclass(frozen=True)
class DerivedAtoms:
    """The turn-tracking atoms of the reduction, as combos over named fluents."""

    c: BoolCombo            # some controlled action just happened
    u: BoolCombo            # some uncontrolled action just happened
    pass_e: BoolCombo       # environment has no uncontrolled action enabled
    pass_m: BoolCombo       # controller offers no controlled action
    stuck_c_in_e: BoolCombo  # environment enables none of the controlled actions
    en_e: BoolCombo         # environment's turn
    en_m: BoolCombo         # controller's turn
    all_a: BoolCombo        # a non-yield action just happened
    fluents: tuple[Fluent, ...]  # declarations backing the above


def derived_atoms(controlled, uncontrolled, env_tag: str = "E",
                  ctrl_tag: str = "M") -> DerivedAtoms:
    c_set = sorted(frozenset(action(a) for a in controlled))
    u_set = sorted(frozenset(action(a) for a in uncontrolled))
    base = frozenset(c_set) | frozenset(u_set)

    decls: list[Fluent] = [
        Fluent("en_e", frozenset([YIELD_CTRL]), frozenset([YIELD_ENV]), True),
        Fluent("en_m", frozenset([YIELD_ENV]), frozenset([YIELD_CTRL]), False),
        Fluent("allA", base, YIELDS, False),
    ]
    for a in sorted(base):
        decls.append(action_fluent(a, base))
        decls.append(Fluent.of_prop(f"{a.name}^{env_tag}"))
    for a in c_set:
        decls.append(Fluent.of_prop(f"{a.name}^{ctrl_tag}"))

    return DerivedAtoms(
        c=disj(CRef(f"'{a.name}") for a in c_set),
        u=disj(CRef(f"'{a.name}") for a in u_set),
        pass_e=conj(neg(CRef(f"@{a.name}^{env_tag}")) for a in u_set),
        pass_m=conj(neg(CRef(f"@{a.name}^{ctrl_tag}")) for a in c_set),
        stuck_c_in_e=conj(neg(CRef(f"@{a.name}^{env_tag}")) for a in c_set),
        en_e=CRef("en_e"),
        en_m=CRef("en_m"),
        all_a=CRef("allA"),
        fluents=tuple(decls),
    )


def build_modified_problem(p: RtcProblem) -> StdProblem:
    """Turn an RTC problem into an equivalent standard one.

    The environment is annotated with its own enabledness propositions
    first, then composed with the yield machine and livelock-pruned; the
    propositions therefore reflect what the bare environment could do at
    the underlying state, not what the turn structure currently permits.
    """
    atoms = derived_atoms(p.controllable, p.uncontrollable)
    env_ann = annotate_enabledness(p.env, "E")
    y = build_yield(p.uncontrollable, p.controllable)
    live_env = remove_livelock(parallel_compose(env_ann, y,
                                                name=f"{p.env.name}.rtc"))

    want = {"en_e", "en_m", "allA"}
    want |= {f"@{a.name}^E" for a in p.env.alphabet.actions}
    have = {f.name for f in p.fluents.fluents}
    taken = sorted(want & have)
    if taken:
        raise ModelError(f"fluent names reserved by the turn reduction: "
                         f"{', '.join(taken)}")
    fluents = FluentSet(p.fluents.fluents
                        + tuple(f for f in atoms.fluents if f.name in want))

    b = disj([atoms.en_e, atoms.pass_e])
    turns = disj([atoms.en_m, atoms.stuck_c_in_e])
    spec = Sgr1Spec(safety=p.spec.safety,
                    assumptions=(turns,) + p.spec.assumptions + (atoms.all_a,),
                    guarantees=p.spec.guarantees)
    return StdProblem(env=live_env, spec=spec, fluents=fluents,
                      controllable=p.controllable | {YIELD_CTRL},
                      require=(b,))
