"""Two-player turn-based games on finite graphs.

Player 0 is the controller, player 1 the environment.  Vertices are
dense ints; every vertex must have at least one successor (sinks are
modelled as self-loops by the callers).  Successor lists are ordered,
and all strategy-producing routines pick the first qualifying successor,
so results are reproducible and tie-breaking is fixed by the caller's
edge ordering.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Iterable

from .errors import UsageError

__all__ = ["Game", "attractor", "buchi_win", "streett1_win", "streett1_win0",
           "parity_win"]


@dataclass(frozen=True)
class Game:
    owner: tuple[int, ...]              # 0 or 1 per vertex
    succ: tuple[tuple[int, ...], ...]   # ordered successor lists

    def __post_init__(self):
        for v, outs in enumerate(self.succ):
            if not outs:
                raise UsageError(f"vertex {v} has no successors")

    @property
    def n(self) -> int:
        return len(self.owner)

    @cached_property
    def pred(self) -> tuple[tuple[int, ...], ...]:
        out: list[list[int]] = [[] for _ in range(self.n)]
        for v, outs in enumerate(self.succ):
            for w in outs:
                out[w].append(v)
        return tuple(tuple(ws) for ws in out)


def attractor(g: Game, player: int, targets: Iterable[int],
              region: frozenset[int]):
    """Vertices from which `player` can force reaching `targets` inside region.

    Returns (attractor set, strategy, rank).  The strategy maps each
    player-owned vertex of the attractor outside the targets to its first
    successor (in edge order) that decreases the rank; rank is the BFS
    layer (targets at 0).
    """
    attr = {v for v in targets if v in region}
    rank = {v: 0 for v in attr}
    # count, per opponent vertex, successors not yet attracted
    remaining = {}
    frontier = list(attr)
    while frontier:
        nxt: list[int] = []
        for v in frontier:
            for u in g.pred[v]:
                if u not in region or u in attr:
                    continue
                if g.owner[u] == player:
                    attr.add(u)
                    rank[u] = rank[v] + 1
                    nxt.append(u)
                else:
                    left = remaining.get(u)
                    if left is None:
                        left = sum(1 for w in g.succ[u] if w in region)
                    left -= 1
                    remaining[u] = left
                    if left == 0:
                        attr.add(u)
                        rank[u] = rank[v] + 1
                        nxt.append(u)
        frontier = nxt
    strat = {}
    for v in attr:
        if g.owner[v] == player and rank[v] > 0:
            for w in g.succ[v]:
                if w in attr and rank[w] < rank[v]:
                    strat[v] = w
                    break
    return frozenset(attr), strat, rank


def buchi_win(g: Game, player: int, targets: Iterable[int],
              region: frozenset[int]):
    """Vertices from which `player` can visit `targets` infinitely often.

    Returns (winning set, strategy).  At target vertices the strategy
    re-enters the reach-targets attractor; elsewhere it follows it.
    """
    tset = frozenset(targets) & region
    current = frozenset(region)
    while True:
        reach, strat, rank = attractor(g, player, tset & current, current)
        rest = current - reach
        if not rest:
            # close the loop at the targets themselves
            for v in tset & current:
                if g.owner[v] == player and v not in strat:
                    for w in g.succ[v]:
                        if w in current:
                            strat[v] = w
                            break
            return current, strat
        escape, _, _ = attractor(g, 1 - player, rest, current)
        current = current - escape
        if not current:
            return frozenset(), {}


def streett1_win(g: Game, player: int, region: frozenset[int],
                 rset: frozenset[int], gset: frozenset[int]) -> frozenset[int]:
    """Region where `player` wins one request/grant pair: inf(R) implies inf(G).

    The opponent wins exactly where it can eventually avoid G forever
    while still hitting R infinitely often; the loop peels those off.
    """
    opp = 1 - player
    current = frozenset(region)
    lost: set[int] = set()
    while current:
        avoid_g, _, _ = attractor(g, player, gset & current, current)
        den = current - avoid_g       # trap for `player` with no G at all
        u, _ = buchi_win(g, opp, rset & den, den)
        if not u:
            break
        pull, _, _ = attractor(g, opp, u, current)
        lost |= pull
        current = current - pull
    return frozenset(region) - frozenset(lost)


def streett1_win0(g: Game, region: frozenset[int], rset: frozenset[int],
                  gset: frozenset[int]) -> frozenset[int]:
    return streett1_win(g, 0, region, rset, gset)


def parity_win(g: Game, pri: tuple[int, ...], region: frozenset[int]):
    """Max-parity winning regions and positional strategies for both players.

    Player 0 wins a play iff the highest priority seen infinitely often
    is even.  Classic recursive region decomposition, run on an explicit
    stack so deep games cannot overflow the interpreter.
    """
    empty = (frozenset(), frozenset(), {}, {})

    # frames: [region, phase, p, player, attr, astrat, top, sub1, battr, bstrat]
    stack = [[frozenset(region), 0] + [None] * 8]
    result = empty
    while stack:
        fr = stack[-1]
        reg, phase = fr[0], fr[1]
        if phase == 0:
            if not reg:
                result = empty
                stack.pop()
                continue
            p = max(pri[v] for v in reg)
            player = 0 if p % 2 == 0 else 1
            top = frozenset(v for v in reg if pri[v] == p)
            attr, astrat, _ = attractor(g, player, top, reg)
            fr[1], fr[2], fr[3], fr[4], fr[5], fr[6] = 1, p, player, attr, astrat, top
            stack.append([reg - attr, 0] + [None] * 8)
        elif phase == 1:
            fr[7] = result
            player, attr, astrat, top = fr[3], fr[4], fr[5], fr[6]
            w0s, w1s, s0s, s1s = result
            opp_win = w1s if player == 0 else w0s
            if not opp_win:
                strat = dict(s0s if player == 0 else s1s)
                strat.update(astrat)
                for v in top | (attr - top):
                    if g.owner[v] == player and v not in strat:
                        for w in g.succ[v]:
                            if w in reg:
                                strat[v] = w
                                break
                if player == 0:
                    result = (reg, frozenset(), strat, dict(s1s))
                else:
                    result = (frozenset(), reg, dict(s0s), strat)
                stack.pop()
                continue
            battr, bstrat, _ = attractor(g, 1 - player, opp_win, reg)
            fr[1], fr[8], fr[9] = 2, battr, bstrat
            stack.append([reg - battr, 0] + [None] * 8)
        else:
            player, battr, bstrat = fr[3], fr[8], fr[9]
            w0s, w1s, s0s, s1s = fr[7]
            w0b, w1b, s0b, s1b = result
            opp_win = w1s if player == 0 else w0s
            opp_strat = dict(s1s if player == 0 else s0s)
            # opponent: the attracted block plays toward its subgame win
            kept = {v: w for v, w in opp_strat.items() if v in opp_win}
            kept.update(bstrat)
            if player == 0:
                w1 = w1b | battr
                s1 = dict(s1b)
                s1.update(kept)
                result = (w0b, w1, dict(s0b), s1)
            else:
                w0 = w0b | battr
                s0 = dict(s0b)
                s0.update(kept)
                result = (w0, w1b, s0, dict(s1b))
            stack.pop()
    return result
