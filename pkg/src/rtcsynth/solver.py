"""Recurrence game solving over explicit arenas.

The winning condition asks for three recurrence families along a play:
every unconditional atom recurs, and if every assumption atom recurs
then every guarantee atom recurs too.  A round-robin counter per family
turns "each atom recurs" into a single event, the counter wrapping.
Over the three wrap events the condition is a Muller condition small
enough to hand-compile: a two-state record emits priorities in 1..4 and
the play is won iff the top recurring priority is even.  Solving is
then one parity game.

`brute_force_winning` answers the same question on the counter product
directly with nested attractor fixpoints, no record and no parity
detour.  It exists so the two routes can police each other on small
instances; keep its logic independent of `solve`.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

from .arena import CTRL, GameArena, build_arena
from .dlts import ActionId, Alphabet, Dlts, action
from .errors import ToolError
from .games import Game, attractor, parity_win, streett1_win
from .rtc import RtcProblem, StdProblem, build_modified_problem

__all__ = ["SynthesisResult", "solve", "brute_force_winning", "synthesize",
           "record_step"]


def record_step(mem: int, ev: tuple[bool, bool, bool]) -> tuple[int, int]:
    """Advance the wrap-event record; return (new state, priority emitted).

    ev = (required wrapped, assumptions wrapped, guarantees wrapped).
    State 1 means a guarantee wrap is banked and waiting for the next
    required wrap to certify it; the pair pays priority 4.  A required
    wrap alone pays 2, which an assumption wrap (3) overrides, so the
    top recurring priority is even exactly when the required family
    recurs and the guarantees keep pace with the assumptions.
    """
    req, ass, gua = ev
    if mem == 0:
        if gua:
            return 1, 4
        if ass:
            return 0, 3
        if req:
            return 0, 2
        return 0, 1
    if req:
        return 0, 4
    return 1, 3


def _atom_counts(arena: GameArena) -> tuple[int, int, int]:
    for v in range(arena.n):
        if arena.is_position[v]:
            return (len(arena.req[v]), len(arena.ass[v]), len(arena.gua[v]))
    return (0, 0, 0)


def _advance(c: int, n: int, hits: tuple[bool, ...]) -> int:
    if n == 0:
        return 0
    if c == n:  # wrapped on the previous position; start a fresh round
        c = 0
    return c + 1 if hits[c] else c


def _arrive(arena: GameArena, counts, cs, w: int):
    """Counters and wrap events after stepping onto vertex w."""
    if not arena.is_position[w] or w in arena.bad:
        return cs, (False, False, False)
    nr, na, ng = counts
    rc = _advance(cs[0], nr, arena.req[w])
    ac = _advance(cs[1], na, arena.ass[w])
    gc = _advance(cs[2], ng, arena.gua[w])
    ev = (nr == 0 or rc == nr, na == 0 or ac == na, ng == 0 or gc == ng)
    return (rc, ac, gc), ev


@dataclass
class _Product:
    game: Game
    pri: tuple[int, ...]
    keys: list
    entry: dict[int, int]                 # arena vertex -> cold-start copy
    einfo: list[tuple[tuple[ActionId | None, int], ...]]


def _parity_product(arena: GameArena, region: frozenset[int]) -> _Product:
    """Record-extended counter product over the safe part of the arena.

    Product keys are (vertex, counters.., record state, priority); the
    priority emitted on arrival is folded into the key so the parity
    game can read it off the vertex.  Controller edges leaving `region`
    are dropped: taking one concedes the safety part outright.
    """
    counts = _atom_counts(arena)
    index: dict = {}
    keys: list = []
    queue: deque = deque()

    def intern(key) -> int:
        got = index.get(key)
        if got is None:
            got = index[key] = len(keys)
            keys.append(key)
            queue.append(got)
        return got

    def enter(v: int) -> int:
        cs, ev = _arrive(arena, counts, (0, 0, 0), v)
        mem, pri = record_step(0, ev)
        return intern((v,) + cs + (mem, pri))

    entry = {v: enter(v) for v in sorted(region)}
    rows: dict[int, tuple] = {}
    while queue:
        idx = queue.popleft()
        av, rc, ac, gc, mem, _ = keys[idx]
        row = []
        for a, w in arena.edges[av]:
            if w not in region:
                continue
            cs2, ev = _arrive(arena, counts, (rc, ac, gc), w)
            mem2, pri2 = record_step(mem, ev)
            row.append((a, intern((w,) + cs2 + (mem2, pri2))))
        if not row:
            raise ToolError("internal: safe vertex lost all moves")
        rows[idx] = tuple(row)

    einfo = [rows[i] for i in range(len(keys))]
    owner = tuple(arena.owner[k[0]] for k in keys)
    pri = tuple(k[5] for k in keys)
    succ = tuple(tuple(dict.fromkeys(t for _, t in row)) for row in einfo)
    return _Product(Game(owner, succ), pri, keys, entry, einfo)


@dataclass(frozen=True)
class SynthesisResult:
    """Verdict plus the machine backing it.

    `controller` is the winning strategy packaged as a DLTS (turn-based
    for run-to-completion problems, offer-summarised for standard ones);
    `counterexample` is the environment's strategy when unrealizable.
    `winning` lists arena vertices the controller wins from a cold
    start, for cross-checking solvers against each other.
    """

    realizable: bool
    controller: Dlts | None
    counterexample: Dlts | None
    winning: frozenset[int]
    diagnostics: dict


def _arena_game(arena: GameArena) -> Game:
    succ = tuple(tuple(dict.fromkeys(t for _, t in row))
                 for row in arena.edges)
    return Game(arena.owner, succ)


def _offered_name(arena: GameArena, choice: int) -> str:
    ctrl = arena.problem.controllable
    for a, _ in arena.edges[choice]:
        if a in ctrl:
            return a.name
    return "none"


def _edge_action_name(arena: GameArena, v: int, a: ActionId | None,
                      t: int) -> str:
    if a is not None:
        return a.name
    if t == v:
        return "halt"
    return f"offer.{_offered_name(arena, t)}"


class _Packager:
    """Accumulates states and transitions for a packaged strategy DLTS."""

    def __init__(self, arena: GameArena, name: str):
        self.arena = arena
        self.name = name
        self.index: dict = {}
        self.names: list[str] = []
        self.tags: list[str | None] = []
        self.trans: list[tuple[int, ActionId, int]] = []
        self.queue: deque = deque()
        self.used: set[str] = set()

    def intern(self, key, base: str, tag: str | None) -> int:
        got = self.index.get(key)
        if got is not None:
            return got
        nm = base
        k = 2
        while nm in self.used:
            nm = f"{base}~{k}"
            k += 1
        self.used.add(nm)
        idx = self.index[key] = len(self.names)
        self.names.append(nm)
        self.tags.append(tag)
        self.queue.append((idx, key))
        return idx

    def build(self, alphabet: Alphabet) -> Dlts:
        n = len(self.names)
        # offer-packaged strategies carry no turn tags at all
        tags = tuple(self.tags) if any(t is not None for t in self.tags) \
            else None
        return Dlts(name=self.name, alphabet=alphabet, n_states=n, initial=0,
                    transitions=frozenset(self.trans),
                    labels=tuple(frozenset() for _ in range(n)),
                    state_names=tuple(self.names), tags=tags)


def _package_turn(arena: GameArena, prod: _Product, strat0: dict) -> Dlts:
    """Winning strategy as a turn-tagged controller: the product graph
    with controller vertices resolved to their chosen move."""
    pk = _Packager(arena, f"{arena.problem.env.name}.ctrl")
    start = prod.entry[arena.initial]

    def base(pv: int) -> tuple[str, str | None]:
        av = prod.keys[pv][0]
        return arena.names[av], arena.tagv[av]

    pk.intern(start, *base(start))
    while pk.queue:
        idx, pv = pk.queue.popleft()
        row = prod.einfo[pv]
        if arena.owner[prod.keys[pv][0]] == CTRL:
            want = strat0[pv]
            row = next(((a, t),) for a, t in row if t == want)
        for a, t in row:
            assert a is not None
            pk.trans.append((idx, a, pk.intern(t, *base(t))))
    return pk.build(arena.problem.env.alphabet)


def _package_offer(arena: GameArena, prod: _Product, strat0: dict) -> Dlts:
    """Winning strategy for the standard game, states = committed offers.

    Each state remembers the environment state plus the controller's
    standing offer; a transition takes the environment's pick and chains
    straight to the controller's next commitment.
    """
    pk = _Packager(arena, f"{arena.problem.env.name}.ctrl")

    def base(pv: int) -> tuple[str, None]:
        return arena.names[prod.keys[pv][0]], None

    first = strat0[prod.entry[arena.initial]]
    pk.intern(first, *base(first))
    while pk.queue:
        idx, pv = pk.queue.popleft()
        for a, t in prod.einfo[pv]:
            assert a is not None
            nxt = strat0[t]
            pk.trans.append((idx, a, pk.intern(nxt, *base(nxt))))
    return pk.build(arena.problem.env.alphabet)


def _cex_alphabet(arena: GameArena, names: set[str]) -> Alphabet:
    ctrl = {a.name for a in arena.problem.controllable}
    return Alphabet.make(controlled=sorted(names & ctrl),
                         monitored=sorted(names - ctrl))


def _package_cex_unsafe(arena: GameArena, bstrat) -> Dlts:
    """Environment wins by safety alone: its attractor strategy to the
    violation vertices, with the controller left all of its moves."""
    pk = _Packager(arena, f"{arena.problem.env.name}.cex")
    used_actions: set[str] = set()

    def nm(v: int) -> tuple[str, str | None]:
        return arena.names[v], arena.tagv[v]

    pk.intern(arena.initial, *nm(arena.initial))
    while pk.queue:
        idx, v = pk.queue.popleft()
        if v in arena.bad:
            edges = [(None, v)]
        elif arena.owner[v] == CTRL:
            edges = list(arena.edges[v])
        else:
            want = bstrat.get(v)
            edges = [next((a, t) for a, t in arena.edges[v] if t == want)]
        for a, t in edges:
            label = _edge_action_name(arena, v, a, t)
            used_actions.add(label)
            pk.trans.append((idx, action(label), pk.intern(t, *nm(t))))
    return pk.build(_cex_alphabet(arena, used_actions))


def _package_cex_product(arena: GameArena, safe, prod: _Product,
                         strat1: dict) -> Dlts:
    """Environment's parity strategy over the product; controller moves
    that leave the safe region are summarised by an absorbing `unsafe`
    state, since any of them loses on safety grounds alone."""
    pk = _Packager(arena, f"{arena.problem.env.name}.cex")
    used_actions: set[str] = set()
    start = prod.entry[arena.initial]

    def base(pv: int):
        av = prod.keys[pv][0]
        return ("p", pv), arena.names[av], arena.tagv[av], av

    key0, nm0, tag0, _ = base(start)
    pk.intern(key0, nm0, tag0)
    while pk.queue:
        idx, key = pk.queue.popleft()
        if key == "unsafe":
            used_actions.add("halt")
            pk.trans.append((idx, action("halt"), idx))
            continue
        pv = key[1]
        av = prod.keys[pv][0]
        if arena.owner[av] == CTRL:
            # same source and same arena target give the same product
            # target (counters are a function of the arrival vertex)
            by_target = {prod.keys[t][0]: t for _, t in prod.einfo[pv]}
            for a, w in arena.edges[av]:
                label = _edge_action_name(arena, av, a, w)
                used_actions.add(label)
                if w in safe:
                    kt, nt, tt, _ = base(by_target[w])
                    j = pk.intern(kt, nt, tt)
                else:
                    j = pk.intern("unsafe", "unsafe", None)
                pk.trans.append((idx, action(label), j))
        else:
            want = strat1[pv]
            a = next(a for a, t in prod.einfo[pv] if t == want)
            label = _edge_action_name(arena, av, a, want)
            used_actions.add(label)
            kt, nt, tt, _ = base(want)
            pk.trans.append((idx, action(label), pk.intern(kt, nt, tt)))
    return pk.build(_cex_alphabet(arena, used_actions))


def solve(arena: GameArena, package: bool = True) -> SynthesisResult:
    """Decide the arena and package the winner's strategy.

    Safety first: vertices from which the environment can force a
    violation are lost outright, and dropping the controller's edges
    into that zone cannot change the answer elsewhere (the remaining
    winning region is a subset of the safe one by construction).  The
    parity product then settles the recurrence part.
    """
    allv = frozenset(range(arena.n))
    battr, bstrat, _ = attractor(_arena_game(arena), 1, arena.bad, allv)
    safe = allv - battr
    diag: dict = {"safe": safe, "arena": arena}

    winning: frozenset[int] = frozenset()
    prod = strat0 = strat1 = None
    if safe:
        prod = _parity_product(arena, safe)
        region = frozenset(range(len(prod.keys)))
        w0, _, strat0, strat1 = parity_win(prod.game, prod.pri, region)
        winning = frozenset(v for v in safe if prod.entry[v] in w0)
        diag["product_vertices"] = len(prod.keys)
    realizable = arena.initial in winning

    controller = cex = None
    if package and realizable:
        if arena.turn_based:
            controller = _package_turn(arena, prod, strat0)
        else:
            controller = _package_offer(arena, prod, strat0)
    elif package:
        if arena.initial in battr:
            cex = _package_cex_unsafe(arena, bstrat)
        else:
            cex = _package_cex_product(arena, safe, prod, strat1)
    return SynthesisResult(realizable, controller, cex, winning, diag)


def brute_force_winning(arena: GameArena) -> frozenset[int]:
    """Arena vertices the controller wins from a cold start, computed
    straight on the counter product.

    The environment wins where it can starve the required family, or
    trap the play away from guarantee wraps while keeping the required
    family alive and the assumptions recurring; peeling its attractor
    off until nothing is left yields the controller's region.
    """
    counts = _atom_counts(arena)
    index: dict = {}
    keys: list = []
    queue: deque = deque()

    def intern(key) -> int:
        got = index.get(key)
        if got is None:
            got = index[key] = len(keys)
            keys.append(key)
            queue.append(got)
        return got

    entry = {}
    for v in range(arena.n):
        cs, _ = _arrive(arena, counts, (0, 0, 0), v)
        entry[v] = intern((v,) + cs)
    rows: dict[int, tuple] = {}
    while queue:
        idx = queue.popleft()
        av = keys[idx][0]
        cs = keys[idx][1:]
        row = []
        for _, w in arena.edges[av]:
            cs2, _ = _arrive(arena, counts, cs, w)
            row.append(intern((w,) + cs2))
        rows[idx] = tuple(dict.fromkeys(row))

    n = len(keys)
    g = Game(tuple(arena.owner[k[0]] for k in keys),
             tuple(rows[i] for i in range(n)))

    def wrapped(i: int, slot: int, total: int) -> bool:
        av = keys[i][0]
        if not arena.is_position[av] or av in arena.bad:
            return False
        return total == 0 or keys[i][1 + slot] == total

    req_v = frozenset(i for i in range(n) if wrapped(i, 0, counts[0]))
    ass_v = frozenset(i for i in range(n) if wrapped(i, 1, counts[1]))
    gua_v = frozenset(i for i in range(n) if wrapped(i, 2, counts[2]))

    current = frozenset(range(n))
    while current:
        hit_req, _, _ = attractor(g, 0, req_v & current, current)
        starve = current - hit_req
        no_gua, _, _ = attractor(g, 0, gua_v & current, current)
        trap = current - no_gua
        alive = streett1_win(g, 1, trap, req_v & trap, ass_v & trap)
        core = starve | alive
        if not core:
            break
        pull, _, _ = attractor(g, 1, core, current)
        current = current - pull
    return frozenset(v for v in range(arena.n) if entry[v] in current)


def synthesize(problem: RtcProblem | StdProblem,
               package: bool = True) -> SynthesisResult:
    """Full pipeline: reduce (when run-to-completion), build, solve."""
    std = build_modified_problem(problem) if isinstance(problem, RtcProblem) \
        else problem
    return solve(build_arena(std), package=package)
