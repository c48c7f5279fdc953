"""Shared test utilities: small random model generators and oracles."""

from __future__ import annotations

import random

from rtcsynth.dlts import Alphabet, Dlts, action, reachable
from rtcsynth.fluents import (CAnd, CNot, COr, CRef, CFalse, CTrue, Fluent,
                              FluentSet, initial_valuation, step_valuation)
from rtcsynth.formulas import (SAlways, SAnd, SImplies, SLit, SOr, SWeakUntil)


def rand_dlts(rng: random.Random, name="t", max_states=6, actions=("a", "b", "c"),
              controlled=("a",), props=(), density=0.5) -> Dlts:
    """Random connected-ish machine; deterministic by construction."""
    n = rng.randint(1, max_states)
    names = [f"s{i}" for i in range(n)]
    trans = []
    for s in range(n):
        for a in actions:
            if rng.random() < density:
                trans.append((names[s], a, names[rng.randrange(n)]))
    labels = {}
    for s in range(n):
        have = [p for p in props if rng.random() < 0.4]
        if have:
            labels[names[s]] = have
    return Dlts.make(name, names, names[0],
                     [a for a in actions if a in controlled],
                     [a for a in actions if a not in controlled],
                     trans, labels=labels)


def canon(d: Dlts):
    """Canonical form for isomorphism checks (names dropped, BFS numbering)."""
    r = reachable(d)
    return (r.n_states, r.initial,
            frozenset((s, a.name, t) for s, a, t in r.transitions),
            tuple(frozenset(p.name for p in lab) for lab in r.labels))


def rand_trace(rng: random.Random, actions, length: int):
    return [action(rng.choice(list(actions))) for _ in range(length)]


def rand_walk(d: Dlts, rng: random.Random, length: int):
    """Random execution prefix: (states, actions) with len(states)=len(actions)+1."""
    states = [d.initial]
    acts = []
    for _ in range(length):
        outs = d.out[states[-1]]
        if not outs:
            break
        a, t = rng.choice(list(outs))
        acts.append(a)
        states.append(t)
    return states, acts


def fold_valuations(fluents: FluentSet, actions, labels_seq=None):
    """Valuations at positions 0..len(actions)-1 (inclusive convention)."""
    v = initial_valuation(fluents)
    out = []
    for i, a in enumerate(actions):
        lab = labels_seq[i] if labels_seq is not None else frozenset()
        v = step_valuation(v, a, lab)
        out.append(v)
    return out


def rand_combo(rng: random.Random, names, depth=2):
    if depth == 0 or rng.random() < 0.3:
        r = rng.random()
        if r < 0.1:
            return CTrue()
        if r < 0.2:
            return CFalse()
        return CRef(rng.choice(names))
    kind = rng.randrange(3)
    if kind == 0:
        return CNot(rand_combo(rng, names, depth - 1))
    items = tuple(rand_combo(rng, names, depth - 1)
                  for _ in range(rng.randint(2, 3)))
    return CAnd(items) if kind == 1 else COr(items)


def rand_safe_formula(rng: random.Random, names, depth=3):
    if depth == 0 or rng.random() < 0.25:
        return SLit(rand_combo(rng, names, 1))
    kind = rng.randrange(5)
    if kind == 0:
        return SAlways(rand_safe_formula(rng, names, depth - 1))
    if kind == 1:
        return SWeakUntil(rand_safe_formula(rng, names, depth - 1),
                          rand_safe_formula(rng, names, depth - 1))
    if kind == 2:
        return SImplies(rand_combo(rng, names, 1),
                        rand_safe_formula(rng, names, depth - 1))
    items = tuple(rand_safe_formula(rng, names, depth - 1)
                  for _ in range(2))
    return SAnd(items) if kind == 3 else SOr(items)


def split_yield_state(name: str):
    """'(s,e)' -> ('s', 'e') for states of a yield composition."""
    assert name.startswith("(") and name.endswith(")")
    base, side = name[1:-1].rsplit(",", 1)
    return base, side


def check_lemma1(env: Dlts, composite: Dlts) -> list[str]:
    """The six composition properties of the yield product; [] when all hold."""
    from rtcsynth.rtc import YIELD_CTRL, YIELD_ENV
    u_set = env.alphabet.monitored
    c_set = env.alphabet.controlled
    env_index = {env.state_names[i]: i for i in range(env.n_states)}
    pair = {}
    for i in range(composite.n_states):
        base, side = split_yield_state(composite.state_names[i])
        pair[i] = (env_index[base], side)
    comp_index = {(s, side): i for i, (s, side) in pair.items()}
    bad = []
    for i, (s, side) in pair.items():
        succ = {}
        for a, t in composite.out[i]:
            succ.setdefault(a, set()).add(t)
        if side == "e":
            for a in sorted(u_set):
                here = succ.get(a, set())
                there = {t for x, t in env.out[s] if x == a}
                if bool(here) != bool(there):
                    bad.append(f"(1) {a.name} at {composite.state_names[i]}")
                want = {comp_index[(t, "e")] for t in there if (t, "e") in comp_index}
                if here != want:
                    bad.append(f"(2) {a.name} at {composite.state_names[i]}")
            if succ.get(YIELD_ENV, set()) != ({comp_index[(s, "c")]}
                                              if (s, "c") in comp_index else set()):
                bad.append(f"(5) at {composite.state_names[i]}")
        else:
            for a in sorted(c_set):
                here = succ.get(a, set())
                there = {t for x, t in env.out[s] if x == a}
                if bool(here) != bool(there):
                    bad.append(f"(3) {a.name} at {composite.state_names[i]}")
                want = {comp_index[(t, "c")] for t in there if (t, "c") in comp_index}
                if here != want:
                    bad.append(f"(4) {a.name} at {composite.state_names[i]}")
            if succ.get(YIELD_CTRL, set()) != ({comp_index[(s, "e")]}
                                               if (s, "e") in comp_index else set()):
                bad.append(f"(6) at {composite.state_names[i]}")
    return bad


def action_fluent_set(actions) -> FluentSet:
    acts = [action(a) for a in actions]
    full = frozenset(acts)
    return FluentSet(tuple(
        Fluent(f"'{a.name}", frozenset([a]), full - {a}, False) for a in acts))


def rand_rtc_problem(rng: random.Random, max_states=6, max_actions=4,
                     max_atoms=2):
    """Small random RTC control problem over action-fluent atoms."""
    from rtcsynth.rtc import RtcProblem
    from rtcsynth.formulas import Sgr1Spec
    k = rng.randint(2, max_actions)
    actions = ["a", "b", "c", "d"][:k]
    controlled = tuple(rng.sample(actions, rng.randint(1, k - 1)))
    env = rand_dlts(rng, "env", max_states=max_states, actions=tuple(actions),
                    controlled=controlled, density=0.6)
    names = [f"'{a}" for a in actions]
    guarantees = tuple(rand_combo(rng, names, 1)
                       for _ in range(rng.randint(1, max_atoms)))
    assumptions = tuple(rand_combo(rng, names, 1)
                        for _ in range(rng.randint(0, max_atoms)))
    # Safety in the triggered Box(literal -> body) shape: the yield
    # reduction shifts trace positions under the leading turn handover,
    # which anchored formulas can observe; the equivalence is stated for
    # Box-rooted rho whose body is vacuous before the first action.
    safety = ((SAlways(SImplies(CRef(rng.choice(names)),
                                rand_safe_formula(rng, names, 2))),)
              if rng.random() < 0.5 else ())
    spec = Sgr1Spec(safety=safety, assumptions=assumptions,
                    guarantees=guarantees)
    return RtcProblem.make(env, spec, action_fluent_set(actions), controlled)
