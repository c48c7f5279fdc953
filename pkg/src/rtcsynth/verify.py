"""Independent certification of controllers against their environments.

Nothing here trusts the solver.  A controller M is checked against an
environment E by exploring the synchronous product: legality compares
enabled-action sets at every reachable pair, deadlock freedom looks for
terminal pairs, and the goal checkers decide whether every infinite
execution of E||M satisfies the mode's obligation.

Run-to-completion obligations are psi_c and (psi_e -> phi), with
psi_c = always-eventually (u or pass_E) and psi_e = always-eventually
(c or pass_M).  Since the recurrence atoms and the safety monitors are
functions of the fluent valuation, the product E||M x monitors x
valuations makes every obligation a predicate on product states, and
violation search reduces to SCC analysis:

  * a cycle avoiding (u or pass_E) everywhere violates psi_c;
  * a cycle through a monitor-dead state that still satisfies
    (c or pass_M) somewhere violates the safety part of phi on an
    execution where psi_e holds;
  * a cycle avoiding some guarantee while hitting every assumption and
    a (c or pass_M) state violates the recurrence part of phi.

A reachable monitor-dead state alone is not enough in RTC mode: if no
continuation satisfies psi_e, the implication never fires.  Standard
mode has no such escape and fails on any reachable monitor death.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import Iterator

from .dlts import (ActionId, Dlts, annotate_enabledness, cyclic_sccs,
                   enabled_actions)
from .errors import ModelError, SpecError, UsageError
from .fluents import (BoolCombo, Fluent, FluentSet, FluentValuation,
                      combo_refs, eval_combo, initial_valuation,
                      step_valuation)
from .formulas import SafetyMonitor, Sgr1Spec, holds_on_finite, holds_on_lasso
from .rtc import DerivedAtoms, RtcProblem, StdProblem, derived_atoms

__all__ = [
    "Execution", "LegalityReport", "Verdict", "GoalProduct",
    "check_standard_legality", "check_rtc_legality", "check_deadlock_free",
    "check_rtc_goal", "check_standard_goal", "build_goal_product",
    "enumerate_lassos", "rtc_violation_on_word", "std_violation_on_word",
    "replay_rtc", "replay_std", "verify_rtc_controller",
    "verify_std_controller",
]


@dataclass(frozen=True)
class Execution:
    """A finite path or a lasso through some product graph.

    `states` has one more entry than `actions`; edge i runs from
    states[i] to states[i+1].  A lasso repeats from `loop`, so
    states[-1] == states[loop]; a finite path has loop None.  Trace
    positions are arrivals: position i is states[i+1] reached by
    actions[i], and `valuations`, when attached, aligns with positions.
    """

    states: tuple[int, ...]
    actions: tuple[ActionId, ...]
    loop: int | None
    names: tuple[str, ...] = ()
    valuations: tuple[FluentValuation, ...] = ()
    reason: str = ""

    def __len__(self) -> int:
        return len(self.actions)


@dataclass(frozen=True)
class LegalityReport:
    """Outcome of a legality check; empty violations means legal."""

    violations: tuple[tuple[tuple[str, str], int, ActionId], ...]

    @property
    def verdict(self) -> bool:
        return not self.violations


@dataclass(frozen=True)
class Verdict:
    holds: bool
    counterexample: Execution | None = None


def _check_interface(e: Dlts, m: Dlts) -> None:
    if e.alphabet != m.alphabet:
        raise UsageError(
            f"'{m.name}' and '{e.name}' disagree on the alphabet or on "
            f"which actions are controlled")


def _explore_pairs(e: Dlts, m: Dlts):
    """Reachable pairs of the synchronous product, edges sorted by action."""
    start = (e.initial, m.initial)
    index = {start: 0}
    order = [start]
    adj: list[tuple[tuple[ActionId, int], ...]] = []
    queue = deque([0])
    while queue:
        se, sm = order[queue.popleft()]
        row = []
        for a, te in e.out[se]:
            tm = m.step(sm, a)
            if tm is None:
                continue
            nxt = (te, tm)
            dst = index.get(nxt)
            if dst is None:
                dst = index[nxt] = len(order)
                order.append(nxt)
                queue.append(dst)
            row.append((a, dst))
        adj.append(tuple(row))
    return order, adj


def _pair_name(e: Dlts, m: Dlts, pair: tuple[int, int]) -> tuple[str, str]:
    return (e.state_names[pair[0]], m.state_names[pair[1]])


def check_standard_legality(e: Dlts, m: Dlts) -> LegalityReport:
    """M never blocks an uncontrolled action and never enables an
    unavailable controlled one, at every reachable pair."""
    _check_interface(e, m)
    unc = e.alphabet.monitored
    ctl = e.alphabet.controlled
    order, _ = _explore_pairs(e, m)
    bad = []
    for pair in order:
        se, sm = pair
        on_e = enabled_actions(e, se)
        on_m = enabled_actions(m, sm)
        for a in sorted(unc):
            if a in on_e and a not in on_m:
                bad.append((_pair_name(e, m, pair), 1, a))
        for a in sorted(ctl):
            if a not in on_e and a in on_m:
                bad.append((_pair_name(e, m, pair), 2, a))
    return LegalityReport(tuple(bad))


def check_rtc_legality(e: Dlts, m: Dlts) -> LegalityReport:
    """Run-to-completion legality.

    Blocking the environment is allowed, but (1) whenever some
    uncontrolled action is jointly enabled all environment-enabled ones
    must be, (2) likewise at any pair entered by an uncontrolled action,
    and (3) no environment-disabled controlled action may be enabled.
    """
    _check_interface(e, m)
    unc = e.alphabet.monitored
    ctl = e.alphabet.controlled
    order, adj = _explore_pairs(e, m)
    after_u = {dst for row in adj for a, dst in row if a in unc}
    bad = []
    for idx, pair in enumerate(order):
        se, sm = pair
        on_e = enabled_actions(e, se)
        on_m = enabled_actions(m, sm)
        missing = [a for a in sorted(unc) if a in on_e and a not in on_m]
        if on_e & on_m & unc:
            bad.extend((_pair_name(e, m, pair), 1, a) for a in missing)
        if idx in after_u:
            bad.extend((_pair_name(e, m, pair), 2, a) for a in missing)
        for a in sorted(ctl):
            if a in on_m and a not in on_e:
                bad.append((_pair_name(e, m, pair), 3, a))
    return LegalityReport(tuple(bad))


def check_deadlock_free(e: Dlts, m: Dlts) -> Verdict:
    _check_interface(e, m)
    order, adj = _explore_pairs(e, m)
    parent: dict[int, tuple[int, ActionId]] = {}
    for idx, row in enumerate(adj):
        for a, dst in row:
            if dst not in parent and dst != 0:
                parent[dst] = (idx, a)
        if row:
            continue
        states = [idx]
        actions: list[ActionId] = []
        while states[0] != 0:
            prev, a = parent[states[0]]
            states.insert(0, prev)
            actions.insert(0, a)
        names = tuple("({},{})".format(*_pair_name(e, m, order[s]))
                      for s in states)
        return Verdict(False, Execution(tuple(states), tuple(actions), None,
                                        names, (), "deadlock"))
    return Verdict(True)


# Goal checking: product with monitors and fluent tracking.

@dataclass(frozen=True)
class GoalProduct:
    """E||M with safety obligations and fluent valuations folded in.

    `graph` is the product as a plain machine whose labels merge both
    sides (including enabledness propositions when the inputs carry
    them), `pairs[i]` the underlying (env, controller) states,
    `valuations[i]` the fluent valuation on arrival, and `dead[i]`
    whether some safety monitor has been violated on the way in.
    """

    graph: Dlts
    pairs: tuple[tuple[int, int], ...]
    valuations: tuple[FluentValuation, ...]
    dead: tuple[bool, ...]


def _merge_fluents(base: FluentSet | None, extra: tuple[Fluent, ...],
                   ) -> FluentSet:
    out = list(base.fluents) if base is not None else []
    have = {f.name: f for f in out}
    for f in extra:
        g = have.get(f.name)
        if g is None:
            have[f.name] = f
            out.append(f)
        elif g != f:
            raise ModelError(f"fluent '{f.name}' declared twice with "
                             f"different definitions")
    return FluentSet(tuple(out))


def build_goal_product(e: Dlts, m: Dlts, fluents: FluentSet,
                       safety=()) -> GoalProduct:
    _check_interface(e, m)
    monitors = tuple(SafetyMonitor(f) for f in safety)
    labels0 = e.labels[e.initial] | m.labels[m.initial]
    v0 = initial_valuation(fluents, labels0)
    start = (e.initial, m.initial, tuple(mn.initial for mn in monitors),
             v0.values)
    index = {start: 0}
    order = [start]
    vals = [v0]
    queue = deque([0])
    trans: list[tuple[int, ActionId, int]] = []
    labels: list[frozenset] = [labels0]
    while queue:
        src = queue.popleft()
        se, sm, obls, values = order[src]
        v = FluentValuation(fluents, values)
        for a, te in e.out[se]:
            tm = m.step(sm, a)
            if tm is None:
                continue
            lab = e.labels[te] | m.labels[tm]
            v2 = step_valuation(v, a, lab)
            obls2 = tuple(mn.step(ob, v2) for mn, ob in zip(monitors, obls))
            nxt = (te, tm, obls2, v2.values)
            dst = index.get(nxt)
            if dst is None:
                dst = index[nxt] = len(order)
                order.append(nxt)
                vals.append(v2)
                labels.append(lab)
                queue.append(dst)
            trans.append((src, a, dst))
    seen: dict[str, int] = {}
    names = []
    for se, sm, _, _ in order:
        base = f"({e.state_names[se]},{m.state_names[sm]})"
        k = seen.get(base, 0)
        seen[base] = k + 1
        names.append(base if k == 0 else f"{base}~{k}")
    graph = Dlts(name=f"{e.name}||{m.name}", alphabet=e.alphabet,
                 n_states=len(order), initial=0,
                 transitions=frozenset(trans), labels=tuple(labels),
                 state_names=tuple(names))
    dead = tuple(any(SafetyMonitor.violated(ob) for ob in st[2])
                 for st in order)
    return GoalProduct(graph, tuple((st[0], st[1]) for st in order),
                       tuple(vals), dead)


def _bfs_tree(graph: Dlts):
    dist = [-1] * graph.n_states
    parent: list[tuple[int, ActionId] | None] = [None] * graph.n_states
    dist[graph.initial] = 0
    queue = deque([graph.initial])
    while queue:
        s = queue.popleft()
        for a, t in graph.out[s]:
            if dist[t] < 0:
                dist[t] = dist[s] + 1
                parent[t] = (s, a)
                queue.append(t)
    return dist, parent


def _path_from_root(parent, v: int):
    states = [v]
    actions: list[ActionId] = []
    while parent[states[0]] is not None:
        prev, a = parent[states[0]]
        states.insert(0, prev)
        actions.insert(0, a)
    return states, actions


def _steer(graph: Dlts, allowed: frozenset[int], src: int, dst: int):
    """Shortest path src -> dst inside `allowed`; returned without src."""
    if src == dst:
        return [], []
    back: dict[int, tuple[int, ActionId]] = {}
    queue = deque([src])
    while queue and dst not in back:
        s = queue.popleft()
        for a, t in graph.out[s]:
            if t in allowed and t not in back and t != src:
                back[t] = (s, a)
                queue.append(t)
    if dst not in back:
        raise AssertionError("steering inside one SCC cannot fail")
    states = [dst]
    actions: list[ActionId] = []
    while states[0] != src:
        prev, a = back[states[0]]
        states.insert(0, prev)
        actions.insert(0, a)
    return states[1:], actions


def _lasso_witness(prod: GoalProduct, dist, parent, comp: frozenset[int],
                   targets: list[int], reason: str) -> Execution:
    """Prefix to the component, then a cycle covering every target."""
    entry = min(comp, key=lambda s: (dist[s], s))
    states, actions = _path_from_root(parent, entry)
    loop = len(states) - 1
    cur = entry
    for t in sorted(set(targets), key=lambda s: (dist[s], s)):
        seg_s, seg_a = _steer(prod.graph, comp, cur, t)
        states.extend(seg_s)
        actions.extend(seg_a)
        cur = t
    if cur == entry and len(states) == loop + 1:
        # no targets elsewhere: force at least one edge around the cycle
        a, t = next((a, t) for a, t in prod.graph.out[entry] if t in comp)
        states.append(t)
        actions.append(a)
        cur = t
    seg_s, seg_a = _steer(prod.graph, comp, cur, entry)
    states.extend(seg_s)
    actions.extend(seg_a)
    names = tuple(prod.graph.state_names[s] for s in states)
    vals = tuple(prod.valuations[s] for s in states[1:])
    return Execution(tuple(states), tuple(actions), loop, names, vals, reason)


def _ensure_annotated(d: Dlts, tag: str) -> Dlts:
    marks = {f"{a.name}^{tag}" for a in d.alphabet.actions}
    if any(p.name in marks for p in d.props):
        return d
    return annotate_enabledness(d, tag)


def _check_goal_refs(spec: Sgr1Spec, fluents: FluentSet,
                     extra: tuple[BoolCombo, ...] = ()) -> None:
    refs = set(spec.refs())
    for c in extra:
        refs |= combo_refs(c)
    missing = sorted(r for r in refs if r not in fluents)
    if missing:
        raise SpecError("goal references undeclared fluents: "
                        + ", ".join(missing))


def check_rtc_goal(e: Dlts, m: Dlts, spec: Sgr1Spec, atoms: DerivedAtoms,
                   fluents: FluentSet | None = None) -> Verdict:
    """Does every infinite execution of E||M satisfy psi_c and
    (psi_e -> phi)?

    `fluents` carries the user declarations the goal reads; `atoms` the
    turn-tracking combos.  Inputs may come pre-annotated with
    enabledness propositions (tags E and M); missing annotations are
    added here.
    """
    e = _ensure_annotated(e, "E")
    m = _ensure_annotated(m, "M")
    tracked = _merge_fluents(fluents, atoms.fluents)
    _check_goal_refs(spec, tracked)
    prod = build_goal_product(e, m, tracked, spec.safety)
    qual_c = [eval_combo(atoms.u, v) or eval_combo(atoms.pass_e, v)
              for v in prod.valuations]
    qual_e = [eval_combo(atoms.c, v) or eval_combo(atoms.pass_m, v)
              for v in prod.valuations]
    ass = [[eval_combo(a, v) for v in prod.valuations]
           for a in spec.assumptions]
    gua = [[eval_combo(g, v) for v in prod.valuations]
           for g in spec.guarantees]
    dist, parent = _bfs_tree(prod.graph)

    # Safety part of phi, on executions where psi_e still holds: the
    # monitors are absorbing, so any cycle beyond a violation stays
    # violated, and it must offer a (c or pass_M) position.
    for comp in cyclic_sccs(prod.graph, lambda s: prod.dead[s]):
        hits = [s for s in comp if qual_e[s]]
        if hits:
            return Verdict(False, _lasso_witness(prod, dist, parent, comp,
                                                 hits[:1], "safety"))

    # psi_c: some cycle on which the environment neither moves nor may pass.
    for comp in cyclic_sccs(prod.graph, lambda s: not qual_c[s]):
        return Verdict(False, _lasso_witness(prod, dist, parent, comp, [],
                                             "env-starved"))

    # Recurrence part of phi: for some guarantee, a monitor-alive cycle
    # avoiding it while meeting every assumption and a psi_e position.
    for j in range(len(gua)):
        for comp in cyclic_sccs(prod.graph,
                                lambda s: not prod.dead[s] and not gua[j][s]):
            targets = []
            for row in ass:
                got = [s for s in comp if row[s]]
                if not got:
                    targets = None
                    break
                targets.append(min(got))
            if targets is None:
                continue
            hits = [s for s in comp if qual_e[s]]
            if not hits:
                continue
            targets.append(min(hits))
            return Verdict(False, _lasso_witness(prod, dist, parent, comp,
                                                 targets,
                                                 f"guarantee-{j + 1}"))
    return Verdict(True)


def check_standard_goal(e: Dlts, m: Dlts, spec: Sgr1Spec,
                        fluents: FluentSet | None = None,
                        require: tuple[BoolCombo, ...] = ()) -> Verdict:
    """Does every infinite execution of E||M satisfy phi outright?

    Standard semantics: any reachable safety violation fails (witnessed
    by a finite prefix), any cycle starving a `require` atom fails, and
    any cycle meeting every assumption while avoiding some guarantee
    fails.
    """
    tracked = _merge_fluents(fluents, ())
    _check_goal_refs(spec, tracked, require)
    prod = build_goal_product(e, m, tracked, spec.safety)
    dist, parent = _bfs_tree(prod.graph)
    dead = [s for s in range(prod.graph.n_states) if prod.dead[s]]
    if dead:
        first = min(dead, key=lambda s: (dist[s], s))
        states, actions = _path_from_root(parent, first)
        names = tuple(prod.graph.state_names[s] for s in states)
        vals = tuple(prod.valuations[s] for s in states[1:])
        return Verdict(False, Execution(tuple(states), tuple(actions), None,
                                        names, vals, "safety"))
    req = [[eval_combo(r, v) for v in prod.valuations] for r in require]
    ass = [[eval_combo(a, v) for v in prod.valuations]
           for a in spec.assumptions]
    gua = [[eval_combo(g, v) for v in prod.valuations]
           for g in spec.guarantees]
    for i in range(len(req)):
        for comp in cyclic_sccs(prod.graph, lambda s: not req[i][s]):
            return Verdict(False, _lasso_witness(prod, dist, parent, comp,
                                                 [], f"progress-{i + 1}"))
    for j in range(len(gua)):
        for comp in cyclic_sccs(prod.graph, lambda s: not gua[j][s]):
            targets = []
            for row in ass:
                got = [s for s in comp if row[s]]
                if not got:
                    targets = None
                    break
                targets.append(min(got))
            if targets is not None:
                return Verdict(False, _lasso_witness(prod, dist, parent,
                                                     comp, targets,
                                                     f"guarantee-{j + 1}"))
    return Verdict(True)


# Brute-force oracle: every lasso, checked by direct formula evaluation.

def enumerate_lassos(d: Dlts, max_len: int) -> Iterator[Execution]:
    """All lassos with a simple prefix and a simple cycle, depth first.

    Each lasso appears once, rotated so the cycle starts at its first
    visit.  `max_len` bounds the number of actions; prefix and cycle
    share their states, so every such lasso fits in n actions, and a
    smaller bound cannot be exhaustive and raises instead of silently
    dropping executions.
    """
    if max_len < d.n_states:
        raise UsageError(f"max_len={max_len} cannot cover all lassos of a "
                         f"{d.n_states}-state machine")
    pos = {d.initial: 0}
    path = [d.initial]
    acts: list[ActionId] = []
    stack: list[Iterator[tuple[ActionId, int]]] = [iter(d.out[d.initial])]
    while stack:
        advanced = False
        for a, t in stack[-1]:
            at = pos.get(t)
            if at is not None:
                names = tuple(d.state_names[s] for s in path + [t])
                yield Execution(tuple(path + [t]), tuple(acts + [a]), at,
                                names, (), "enumerated")
                continue
            pos[t] = len(path)
            path.append(t)
            acts.append(a)
            stack.append(iter(d.out[t]))
            advanced = True
            break
        if not advanced:
            stack.pop()
            dropped = path.pop()
            del pos[dropped]
            if acts:
                acts.pop()


def _recurs(row: list[bool] | tuple[bool, ...], loop: int) -> bool:
    return any(row[loop:])


def rtc_violation_on_word(spec: Sgr1Spec, atoms: DerivedAtoms,
                          word: list[FluentValuation], loop: int) -> bool:
    """Direct evaluation of not(psi_c and (psi_e -> phi)) on a lasso word."""
    psi_c = any(eval_combo(atoms.u, v) or eval_combo(atoms.pass_e, v)
                for v in word[loop:])
    if not psi_c:
        return True
    psi_e = any(eval_combo(atoms.c, v) or eval_combo(atoms.pass_m, v)
                for v in word[loop:])
    if not psi_e:
        return False
    return std_violation_on_word(spec, (), word, loop)


def std_violation_on_word(spec: Sgr1Spec, require: tuple[BoolCombo, ...],
                          word: list[FluentValuation], loop: int) -> bool:
    """Direct evaluation of not phi (with unconditional recurrence atoms)."""
    if not all(holds_on_lasso(f, word, loop) for f in spec.safety):
        return True
    if any(not _recurs([eval_combo(r, v) for v in word], loop)
           for r in require):
        return True
    if all(_recurs([eval_combo(a, v) for v in word], loop)
           for a in spec.assumptions):
        if any(not _recurs([eval_combo(g, v) for v in word], loop)
               for g in spec.guarantees):
            return True
    return False


def _fold_word(e: Dlts, m: Dlts, fluents: FluentSet, ex: Execution):
    """Re-simulate an execution's actions through E||M from scratch."""
    se, sm = e.initial, m.initial
    v = initial_valuation(fluents, e.labels[se] | m.labels[sm])
    word = []
    for a in ex.actions:
        te, tm = e.step(se, a), m.step(sm, a)
        if te is None or tm is None:
            raise ModelError(f"execution takes '{a.name}' where it is "
                             f"not jointly enabled")
        se, sm = te, tm
        v = step_valuation(v, a, e.labels[se] | m.labels[sm])
        word.append(v)
    return word, (se, sm)


def replay_rtc(e: Dlts, m: Dlts, spec: Sgr1Spec, atoms: DerivedAtoms,
               fluents: FluentSet | None, ex: Execution) -> bool:
    """True when the execution really violates the RTC obligation."""
    e = _ensure_annotated(e, "E")
    m = _ensure_annotated(m, "M")
    tracked = _merge_fluents(fluents, atoms.fluents)
    word, end = _fold_word(e, m, tracked, ex)
    if ex.reason == "deadlock":
        return not (enabled_actions(e, end[0]) & enabled_actions(m, end[1]))
    if ex.loop is None:
        return any(not holds_on_finite(f, word) for f in spec.safety)
    return rtc_violation_on_word(spec, atoms, word, ex.loop)


def replay_std(e: Dlts, m: Dlts, spec: Sgr1Spec, fluents: FluentSet | None,
               ex: Execution, require: tuple[BoolCombo, ...] = ()) -> bool:
    """True when the execution really violates phi (standard semantics)."""
    tracked = _merge_fluents(fluents, ())
    word, end = _fold_word(e, m, tracked, ex)
    if ex.reason == "deadlock":
        return not (enabled_actions(e, end[0]) & enabled_actions(m, end[1]))
    if ex.loop is None:
        return any(not holds_on_finite(f, word) for f in spec.safety)
    return std_violation_on_word(spec, require, word, ex.loop)


# Per-problem bundles, used by the command line and the acceptance tests.

def verify_rtc_controller(p: RtcProblem, m: Dlts) -> dict:
    atoms = derived_atoms(p.controllable, p.uncontrollable)
    return {
        "rtc-legality": check_rtc_legality(p.env, m),
        "deadlock-freedom": check_deadlock_free(p.env, m),
        "goal": check_rtc_goal(p.env, m, p.spec, atoms, p.fluents),
    }


def verify_std_controller(p: StdProblem, m: Dlts) -> dict:
    return {
        "legality": check_standard_legality(p.env, m),
        "deadlock-freedom": check_deadlock_free(p.env, m),
        "goal": check_standard_goal(p.env, m, p.spec, p.fluents, p.require),
    }
