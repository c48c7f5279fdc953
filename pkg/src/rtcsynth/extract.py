"""Between turn-taking controllers and run-to-completion controllers.

A controller M+ for the turn-taking reduction moves in a world where
yields are explicit actions.  The run-to-completion controller M drops
the yields: its states remember only which side moved last (side e
after uncontrolled actions, side c after controlled ones), and each of
its transitions replays the corresponding M+ path with the yields
re-inserted.  The reverse construction wraps a run-to-completion
controller back into the yield discipline; composing the two is the
round-trip that backs the equivalence tests.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

from .dlts import ActionId, Alphabet, Dlts, enabled_actions, reachable
from .errors import UsageError
from .rtc import YIELD_CTRL, YIELD_ENV
from .verify import check_rtc_legality

__all__ = ["extract_rtc_controller", "embed_rtc_controller"]


@dataclass(frozen=True)
class _Edges:
    """M+ transition structure split by letter kind."""

    ctl: tuple[tuple[tuple[ActionId, int], ...], ...]
    unc: tuple[tuple[tuple[ActionId, int], ...], ...]
    ye: tuple[tuple[int, ...], ...]   # gamma_E successors per state
    yc: tuple[tuple[int, ...], ...]   # gamma_C successors per state


def _split_edges(mplus: Dlts) -> _Edges:
    ctl: list[list[tuple[ActionId, int]]] = [[] for _ in range(mplus.n_states)]
    unc: list[list[tuple[ActionId, int]]] = [[] for _ in range(mplus.n_states)]
    ye: list[list[int]] = [[] for _ in range(mplus.n_states)]
    yc: list[list[int]] = [[] for _ in range(mplus.n_states)]
    controlled = mplus.alphabet.controlled
    for s in range(mplus.n_states):
        for a, t in mplus.out[s]:
            if a == YIELD_ENV:
                ye[s].append(t)
            elif a == YIELD_CTRL:
                yc[s].append(t)
            elif a in controlled:
                ctl[s].append((a, t))
            else:
                unc[s].append((a, t))
    return _Edges(tuple(tuple(r) for r in ctl), tuple(tuple(r) for r in unc),
                  tuple(tuple(r) for r in ye), tuple(tuple(r) for r in yc))


def extract_rtc_controller(mplus: Dlts) -> Dlts:
    """Strip the yield discipline from a turn-taking controller.

    States are {e, c} x T.  On the e side, uncontrolled actions follow
    a yield-out/yield-back detour when one exists and the direct M+
    move otherwise, and controlled actions enter the c side through the
    yield-out.  On the c side, controlled actions continue directly and
    uncontrolled ones return to the e side through the yield-back.  The
    result keeps at most two copies of every M+ state, before and after
    the reachability pruning.
    """
    if (YIELD_CTRL not in mplus.alphabet.controlled
            or YIELD_ENV not in mplus.alphabet.monitored):
        raise UsageError(f"'{mplus.name}' does not use the yield actions; "
                         f"nothing to extract")
    g = _split_edges(mplus)
    n = mplus.n_states
    # e-side state t is vertex t, c-side state t is vertex n + t
    trans: set[tuple[int, ActionId, int]] = set()
    for t in range(n):
        detour = any(g.yc[t1] for t1 in g.ye[t])
        if detour:
            for t1 in g.ye[t]:
                for t2 in g.yc[t1]:
                    for a, t3 in g.unc[t2]:
                        trans.add((t, a, t3))
        else:
            for a, t2 in g.unc[t]:
                trans.add((t, a, t2))
        for t1 in g.ye[t]:
            for a, t2 in g.ctl[t1]:
                trans.add((t, a, n + t2))
        for a, t2 in g.ctl[t]:
            trans.add((n + t, a, n + t2))
        for t1 in g.yc[t]:
            for a, t2 in g.unc[t1]:
                trans.add((n + t, a, t2))
    alphabet = Alphabet(mplus.alphabet.controlled - {YIELD_CTRL},
                        mplus.alphabet.monitored - {YIELD_ENV})
    names = tuple(f"e.{sn}" for sn in mplus.state_names) + \
        tuple(f"c.{sn}" for sn in mplus.state_names)
    full = Dlts(name=f"{mplus.name}.rtc", alphabet=alphabet, n_states=2 * n,
                initial=mplus.initial, transitions=frozenset(trans),
                labels=tuple(frozenset() for _ in range(2 * n)),
                state_names=names,
                tags=("e",) * n + ("c",) * n)
    return reachable(full)


def embed_rtc_controller(m: Dlts, env: Dlts) -> Dlts:
    """Wrap a run-to-completion controller into the yield discipline.

    The output runs against the turn-taking environment: e-states carry
    the joint uncontrolled moves and take the turn (gamma_E) whenever
    the environment has a controlled action available; first-copy
    c-states hand it straight back when no controlled move is jointly
    enabled; second-copy c-states keep moving exactly while the
    environment has nothing to interject, and yield as soon as it does.
    """
    report = check_rtc_legality(env, m)
    if not report.verdict:
        pair, bullet, a = report.violations[0]
        raise UsageError(
            f"'{m.name}' is not run-to-completion legal for '{env.name}': "
            f"bullet {bullet} fails at {pair} on '{a.name}'")
    ctl = env.alphabet.controlled
    unc = env.alphabet.monitored

    def joint(s: int, t: int, kind) -> list[tuple[ActionId, int, int]]:
        out = []
        for a, s2 in env.out[s]:
            if a not in kind:
                continue
            t2 = m.step(t, a)
            if t2 is not None:
                out.append((a, s2, t2))
        return out

    start = (env.initial, "e", m.initial, 0)
    index = {start: 0}
    order = [start]
    queue = deque([0])
    trans: list[tuple[int, ActionId, int]] = []

    def intern(key) -> int:
        got = index.get(key)
        if got is None:
            got = index[key] = len(order)
            order.append(key)
            queue.append(got)
        return got

    while queue:
        src = queue.popleft()
        s, side, t, copy = order[src]
        if side == "e":
            for a, s2, t2 in joint(s, t, unc):
                trans.append((src, a, intern((s2, "e", t2, 0))))
            if enabled_actions(env, s, ctl):
                trans.append((src, YIELD_ENV, intern((s, "c", t, 1))))
            continue
        moves = joint(s, t, ctl)
        if copy == 1:
            if moves:
                for a, s2, t2 in moves:
                    trans.append((src, a, intern((s2, "c", t2, 2))))
            else:
                trans.append((src, YIELD_CTRL, intern((s, "e", t, 0))))
            continue
        if joint(s, t, unc):
            trans.append((src, YIELD_CTRL, intern((s, "e", t, 0))))
        else:
            for a, s2, t2 in moves:
                trans.append((src, a, intern((s2, "c", t2, 2))))

    def name(key) -> str:
        s, side, t, copy = key
        stem = f"({env.state_names[s]},{side},{m.state_names[t]}"
        return stem + (")" if side == "e" else f",{copy})")

    alphabet = Alphabet(ctl | {YIELD_CTRL}, unc | {YIELD_ENV})
    return Dlts(name=f"{m.name}.turns", alphabet=alphabet,
                n_states=len(order), initial=0, transitions=frozenset(trans),
                labels=tuple(frozenset() for _ in order),
                state_names=tuple(name(k) for k in order),
                tags=tuple("e" if k[1] == "e" else "c" for k in order))
