"""Line-oriented concrete syntax for machines and problems, plus DOT.

A problem file is a sequence of keyword lines; `#` starts a comment.
Machine blocks open with `dlts <name>` and hold `states:`, `init:`,
`controlled:`, `monitored:`, `label <s>: p ...`, `tag <s>: e|c` and
`trans <s> <action> <s'>` lines.  After the blocks come `compose`,
`env:`, `fluent`, `controllable:` and goal lines (`goal safety:`,
`assume GF`, `guarantee GF`, `require GF`), and an optional
`mode rtc|standard` flag (default rtc).

Formulas use the tokens G, W, ->, &&, ||, ! and parentheses; atoms are
declared fluent names, action fluents `'action`, proposition fluents
`@prop`, and true/false.  Negation and implication antecedents must be
plain fluent combinations; temporal operators stay in positive position.
Referenced `'a`/`@p` atoms that were never declared are declared
implicitly, in first-use order, after the explicit declarations.

Fluent declarations come in three forms: the general triple
`fluent N = <{i, ...}, {t, ...}, true|false>`, the occurrence shorthand
`fluent 'a` (terminated by every other action of the environment), and
the state-mirror shorthand `fluent @p`.

Any line may use `[lo..hi]` ranges; a line containing ranges expands to
one copy per value combination, leftmost range varying slowest.  A range
can bind a name, `[y:1..2]`, which later `[y]` tokens on the same line
reuse, so indexed families keep their indices aligned.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Iterable

from .dlts import ActionId, Dlts, action, parallel_compose
from .errors import ParseError, UsageError
from .fluents import (BoolCombo, CAnd, CFalse, CNot, COr, CRef, CTrue,
                      Fluent, FluentSet, action_fluent, combo_refs)
from .formulas import (SAlways, SAnd, SImplies, SLit, SOr, SWeakUntil,
                       SafetyFormula, Sgr1Spec, formula_refs)
from .rtc import RtcProblem, StdProblem

__all__ = [
    "parse_problem",
    "parse_machine",
    "print_problem",
    "print_machine",
    "export_dot",
]


# Range expansion.

_RANGE = re.compile(r"\[(?:([A-Za-z_]\w*):)?(\d+)\.\.(\d+)\]|\[([A-Za-z_]\w*)\]")


def _expand(text: str, no: int) -> list[str]:
    out: list[str] = []

    def rec(s: str, start: int, env: dict[str, int]):
        m = _RANGE.search(s, start)
        if m is None:
            out.append(s)
            return
        var, lo, hi, ref = m.groups()
        if ref is not None:
            if ref not in env:
                raise ParseError(f"unbound range name '{ref}'", no)
            rec(s[:m.start()] + str(env[ref]) + s[m.end():], m.start(), env)
            return
        a, b = int(lo), int(hi)
        if a > b:
            raise ParseError(f"empty range [{lo}..{hi}]", no)
        for v in range(a, b + 1):
            env2 = dict(env, **{var: v}) if var else env
            rec(s[:m.start()] + str(v) + s[m.end():], m.start(), env2)

    rec(text, 0, {})
    return out


# Formula text.

_TOKEN = re.compile(r"\s*(->|&&|\|\||[()!]|[A-Za-z0-9_.'@^~]+)")
_OPS = {"->", "&&", "||", "(", ")", "!", "G", "W"}


def _tokenize(text: str, no: int) -> list[str]:
    toks: list[str] = []
    pos = 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            rest = text[pos:].strip()
            raise ParseError(f"cannot read formula at '{rest}'", no)
        if m.group(1):
            toks.append(m.group(1))
        pos = m.end()
    return toks


class _FormulaParser:
    """Recursive descent over the token list.

    Results are tagged ("c", combo) or ("t", temporal) so combos stay
    combos until a temporal operator forces the lift; that keeps
    implication antecedents and negations inside the plain fragment.
    """

    def __init__(self, toks: list[str], no: int):
        self.toks = toks
        self.pos = 0
        self.no = no

    def peek(self) -> str | None:
        return self.toks[self.pos] if self.pos < len(self.toks) else None

    def take(self) -> str:
        t = self.peek()
        if t is None:
            raise ParseError("formula ends unexpectedly", self.no)
        self.pos += 1
        return t

    def expect(self, tok: str):
        got = self.take()
        if got != tok:
            raise ParseError(f"expected '{tok}', found '{got}'", self.no)

    def fail(self, msg: str):
        raise ParseError(msg, self.no)

    def combo(self, v) -> BoolCombo:
        if v[0] != "c":
            self.fail("expected a plain fluent combination (no temporal "
                      "operator) here")
        return v[1]

    @staticmethod
    def lift(v) -> SafetyFormula:
        return SLit(v[1]) if v[0] == "c" else v[1]

    def implies(self):
        lhs = self.weak_until()
        if self.peek() == "->":
            self.take()
            rhs = self.implies()
            return "t", SImplies(self.combo(lhs), self.lift(rhs))
        return lhs

    def weak_until(self):
        lhs = self.disj()
        if self.peek() == "W":
            self.take()
            rhs = self.weak_until()
            return "t", SWeakUntil(self.lift(lhs), self.lift(rhs))
        return lhs

    def disj(self):
        items = [self.conj()]
        while self.peek() == "||":
            self.take()
            items.append(self.conj())
        if len(items) == 1:
            return items[0]
        if all(v[0] == "c" for v in items):
            return "c", COr(tuple(v[1] for v in items))
        return "t", SOr(tuple(self.lift(v) for v in items))

    def conj(self):
        items = [self.unary()]
        while self.peek() == "&&":
            self.take()
            items.append(self.unary())
        if len(items) == 1:
            return items[0]
        if all(v[0] == "c" for v in items):
            return "c", CAnd(tuple(v[1] for v in items))
        return "t", SAnd(tuple(self.lift(v) for v in items))

    def unary(self):
        t = self.take()
        if t == "(":
            v = self.implies()
            self.expect(")")
            return v
        if t == "!":
            return "c", CNot(self.combo(self.unary()))
        if t == "G":
            return "t", SAlways(self.lift(self.unary()))
        if t in _OPS:
            self.fail(f"'{t}' needs an operand before it")
        if t == "true":
            return "c", CTrue()
        if t == "false":
            return "c", CFalse()
        return "c", CRef(t)


def _parse_formula(text: str, no: int) -> SafetyFormula:
    p = _FormulaParser(_tokenize(text, no), no)
    v = p.implies()
    if p.peek() is not None:
        p.fail(f"trailing '{p.peek()}' after formula")
    return p.lift(v)


def _parse_combo(text: str, no: int) -> BoolCombo:
    p = _FormulaParser(_tokenize(text, no), no)
    v = p.implies()
    if p.peek() is not None:
        p.fail(f"trailing '{p.peek()}' after expression")
    return p.combo(v)


# Fluent declarations.

_TRIPLE = re.compile(
    r"<\s*\{([^{}]*)\}\s*,\s*\{([^{}]*)\}\s*,\s*(true|false)\s*>\s*$")


def _split_set(body: str) -> list[str]:
    return [x for x in (p.strip() for p in body.split(",")) if x]


@dataclass
class _MachineBlock:
    name: str
    no: int
    states: list[str] = field(default_factory=list)
    init: str | None = None
    controlled: list[str] = field(default_factory=list)
    monitored: list[str] = field(default_factory=list)
    labels: dict[str, list[str]] = field(default_factory=dict)
    tags: dict[str, str] = field(default_factory=dict)
    trans: list[tuple[str, str, str]] = field(default_factory=list)

    def build(self) -> Dlts:
        if not self.states:
            raise ParseError(f"machine '{self.name}' has no states: line",
                             self.no)
        if self.init is None:
            raise ParseError(f"machine '{self.name}' has no init: line",
                             self.no)
        return Dlts.make(self.name, self.states, self.init,
                         self.controlled, self.monitored, self.trans,
                         labels=self.labels,
                         tags=self.tags or None)


_PROBLEM_KEYS = ("mode", "fluent", "controllable", "goal", "assume",
                 "guarantee", "require")


class _Reader:
    """One pass over the lines; `finish` assembles the problem."""

    def __init__(self, machine_only: bool = False):
        self.machine_only = machine_only
        self.machines: dict[str, Dlts] = {}
        self.block: _MachineBlock | None = None
        self.env_name: tuple[str, int] | None = None
        self.mode: str | None = None
        self.decls: list[tuple[int, str, Fluent | None]] = []
        self.controllable: list[str] | None = None
        self.safety: list[SafetyFormula] = []
        self.assume: list[BoolCombo] = []
        self.guarantee: list[BoolCombo] = []
        self.require: list[BoolCombo] = []

    def feed(self, text: str):
        for no, raw in enumerate(text.splitlines(), start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            for expanded in _expand(line, no):
                self.line(expanded, no)

    def close_block(self):
        if self.block is not None:
            m = self.block.build()
            self.machines[m.name] = m
            self.block = None

    def in_block(self, no: int) -> _MachineBlock:
        if self.block is None:
            raise ParseError("this line belongs inside a dlts block", no)
        return self.block

    def line(self, line: str, no: int):
        toks = line.split()
        key = toks[0].rstrip(":")
        if key in _PROBLEM_KEYS and self.machine_only:
            raise ParseError(f"'{key}' lines do not belong in a machine file",
                             no)
        handler = getattr(self, f"_kw_{key}", None)
        if handler is None:
            raise ParseError(f"unknown directive '{toks[0]}'", no)
        handler(line, toks, no)

    @staticmethod
    def _one(toks: list[str], no: int, what: str) -> str:
        if len(toks) != 2:
            raise ParseError(f"expected exactly one {what}", no)
        return toks[1]

    def _kw_dlts(self, line, toks, no):
        self.close_block()
        name = self._one(toks, no, "machine name")
        if name in self.machines:
            raise ParseError(f"machine '{name}' defined twice", no)
        self.block = _MachineBlock(name, no)

    def _kw_states(self, line, toks, no):
        self.in_block(no).states.extend(toks[1:])

    def _kw_init(self, line, toks, no):
        b = self.in_block(no)
        if b.init is not None:
            raise ParseError("init: given twice", no)
        b.init = self._one(toks, no, "initial state")

    def _kw_controlled(self, line, toks, no):
        self.in_block(no).controlled.extend(toks[1:])

    def _kw_monitored(self, line, toks, no):
        self.in_block(no).monitored.extend(toks[1:])

    def _kw_label(self, line, toks, no):
        b = self.in_block(no)
        head, _, rest = line.partition(":")
        parts = head.split()
        if len(parts) != 2:
            raise ParseError("label line is `label <state>: <prop> ...`", no)
        b.labels.setdefault(parts[1], []).extend(rest.split())

    def _kw_tag(self, line, toks, no):
        b = self.in_block(no)
        head, _, rest = line.partition(":")
        parts = head.split()
        tag = rest.split()
        if len(parts) != 2 or len(tag) != 1:
            raise ParseError("tag line is `tag <state>: <tag>`", no)
        if parts[1] in b.tags:
            raise ParseError(f"state '{parts[1]}' tagged twice", no)
        b.tags[parts[1]] = tag[0]

    def _kw_trans(self, line, toks, no):
        if len(toks) != 4:
            raise ParseError("trans line is `trans <src> <action> <dst>`", no)
        self.in_block(no).trans.append((toks[1], toks[2], toks[3]))

    def _kw_compose(self, line, toks, no):
        self.close_block()
        if len(toks) != 6 or toks[2] != "=" or toks[4] != "||":
            raise ParseError("compose line is `compose <name> = <a> || <b>`",
                             no)
        name = toks[1]
        if name in self.machines:
            raise ParseError(f"machine '{name}' defined twice", no)
        parts = []
        for mn in (toks[3], toks[5]):
            m = self.machines.get(mn)
            if m is None:
                raise ParseError(f"unknown machine '{mn}'", no)
            parts.append(m)
        self.machines[name] = parallel_compose(parts[0], parts[1], name=name)

    def _kw_env(self, line, toks, no):
        self.close_block()
        if self.env_name is not None:
            raise ParseError("env: given twice", no)
        self.env_name = (self._one(toks, no, "machine name"), no)

    def _kw_mode(self, line, toks, no):
        self.close_block()
        got = self._one(toks, no, "mode")
        if got not in ("rtc", "standard"):
            raise ParseError(f"mode is rtc or standard, not '{got}'", no)
        if self.mode is not None:
            raise ParseError("mode given twice", no)
        self.mode = got

    def _kw_fluent(self, line, toks, no):
        self.close_block()
        if len(toks) == 2:
            name = toks[1]
            if name.startswith("@"):
                self.decls.append((no, name, Fluent.of_prop(name[1:])))
            elif name.startswith("'"):
                self.decls.append((no, name, None))  # needs the env alphabet
            else:
                raise ParseError("shorthand fluents are 'action or @prop", no)
            return
        _, _, rest = line.partition("=")
        m = _TRIPLE.match(rest.strip())
        if len(toks) < 3 or toks[2] != "=" or m is None:
            raise ParseError("fluent line is `fluent <name> = "
                             "<{i, ...}, {t, ...}, true|false>`", no)
        name = toks[1]
        self.decls.append((no, name, Fluent.make(
            name, _split_set(m.group(1)), _split_set(m.group(2)),
            m.group(3) == "true")))

    def _kw_controllable(self, line, toks, no):
        self.close_block()
        if self.controllable is None:
            self.controllable = []
        self.controllable.extend(toks[1:])

    def _kw_goal(self, line, toks, no):
        self.close_block()
        head, _, rest = line.partition(":")
        if head.split() != ["goal", "safety"]:
            raise ParseError("goal line is `goal safety: <formula>`", no)
        self.safety.append(_parse_formula(rest, no))

    def _gf(self, line, toks, no) -> BoolCombo:
        self.close_block()
        if len(toks) < 3 or toks[1] != "GF":
            raise ParseError(f"{toks[0]} line is `{toks[0]} GF <combination>`",
                             no)
        return _parse_combo(line.split(None, 2)[2], no)

    def _kw_assume(self, line, toks, no):
        self.assume.append(self._gf(line, toks, no))

    def _kw_guarantee(self, line, toks, no):
        self.guarantee.append(self._gf(line, toks, no))

    def _kw_require(self, line, toks, no):
        self.require.append(self._gf(line, toks, no))

    # Assembly.

    def pick_env(self) -> Dlts:
        self.close_block()
        if self.env_name is not None:
            name, no = self.env_name
            env = self.machines.get(name)
            if env is None:
                raise ParseError(f"unknown machine '{name}'", no)
            return env
        if not self.machines:
            raise ParseError("no machine defined", None)
        return next(reversed(self.machines.values()))

    def fluent_set(self, env: Dlts) -> FluentSet:
        fls: list[Fluent] = []
        have: set[str] = set()
        for no, name, f in self.decls:
            if f is None:
                try:
                    f = action_fluent(action(name[1:]), env.alphabet)
                except UsageError as e:
                    raise ParseError(str(e), no) from None
            if f.name in have:
                raise ParseError(f"fluent '{f.name}' declared twice", no)
            have.add(f.name)
            fls.append(f)
        for name in self._referenced():
            if name in have:
                continue
            if name.startswith("'"):
                fls.append(action_fluent(action(name[1:]), env.alphabet))
                have.add(name)
            elif name.startswith("@"):
                fls.append(Fluent.of_prop(name[1:]))
                have.add(name)
        return FluentSet(tuple(fls))

    def _referenced(self) -> list[str]:
        seen: dict[str, None] = {}
        for f in self.safety:
            for r in sorted(formula_refs(f)):
                seen.setdefault(r)
        for c in self.assume + self.guarantee + self.require:
            for r in sorted(combo_refs(c)):
                seen.setdefault(r)
        return list(seen)

    def finish(self, mode: str | None) -> RtcProblem | StdProblem:
        env = self.pick_env()
        if self.controllable is None:
            raise ParseError("no controllable: line", None)
        fluents = self.fluent_set(env)
        spec = Sgr1Spec(safety=tuple(self.safety),
                        assumptions=tuple(self.assume),
                        guarantees=tuple(self.guarantee))
        mode = mode or self.mode or "rtc"
        if mode == "rtc":
            if self.require:
                raise ParseError("require lines apply to standard mode only",
                                 None)
            return RtcProblem.make(env, spec, fluents, self.controllable)
        return StdProblem.make(env, spec, fluents, self.controllable,
                               require=tuple(self.require))


def parse_problem(text: str, mode: str | None = None) -> RtcProblem | StdProblem:
    """Parse a problem file; `mode` overrides the file's mode flag."""
    if mode not in (None, "rtc", "standard"):
        raise UsageError(f"mode is rtc or standard, not '{mode}'")
    r = _Reader()
    r.feed(text)
    return r.finish(mode)


def parse_machine(text: str) -> Dlts:
    """Parse a machine file: dlts/compose blocks and an optional env: line."""
    r = _Reader(machine_only=True)
    r.feed(text)
    return r.pick_env()


# Printing.  Parenthesization preserves structure: a child is wrapped
# exactly when reparsing it bare would regroup it into its parent.

_ATOM, _UNARY, _AND, _OR, _W, _IMPL = 5, 4, 3, 2, 1, 0


def _level(f) -> int:
    if isinstance(f, SLit):
        return _level(f.combo)
    if isinstance(f, (CRef, CTrue, CFalse)):
        return _ATOM
    if isinstance(f, (CNot, SAlways)):
        return _UNARY
    if isinstance(f, (CAnd, SAnd)):
        return _AND
    if isinstance(f, (COr, SOr)):
        return _OR
    if isinstance(f, SWeakUntil):
        return _W
    if isinstance(f, SImplies):
        return _IMPL
    raise UsageError(f"cannot print {f!r}")


def _fmt(f, floor: int) -> str:
    s = _fmt_raw(f)
    return f"({s})" if _level(f) < floor else s


def _fmt_raw(f) -> str:
    if isinstance(f, SLit):
        return _fmt_raw(f.combo)
    if isinstance(f, CTrue):
        return "true"
    if isinstance(f, CFalse):
        return "false"
    if isinstance(f, CRef):
        return f.name
    if isinstance(f, CNot):
        return "!" + _fmt(f.operand, _ATOM)
    if isinstance(f, SAlways):
        return "G " + _fmt(f.body, _ATOM)
    if isinstance(f, (CAnd, SAnd)):
        return " && ".join(_fmt(x, _UNARY) for x in f.items)
    if isinstance(f, (COr, SOr)):
        return " || ".join(_fmt(x, _AND) for x in f.items)
    if isinstance(f, SWeakUntil):
        return f"{_fmt(f.lhs, _OR)} W {_fmt(f.rhs, _W)}"
    if isinstance(f, SImplies):
        return f"{_fmt(f.lhs, _W)} -> {_fmt(f.rhs, _IMPL)}"
    raise UsageError(f"cannot print {f!r}")


def _names(actions: Iterable[ActionId]) -> str:
    return " ".join(sorted(a.name for a in actions))


def print_machine(d: Dlts) -> str:
    out = [f"dlts {d.name}"]
    out.append("states: " + " ".join(d.state_names))
    out.append(f"init: {d.state_names[d.initial]}")
    out.append("controlled: " + _names(d.alphabet.controlled))
    out.append("monitored: " + _names(d.alphabet.monitored))
    for i, lab in enumerate(d.labels):
        if lab:
            props = " ".join(sorted(p.name for p in lab))
            out.append(f"label {d.state_names[i]}: {props}")
    if d.tags is not None:
        for i, t in enumerate(d.tags):
            if t is not None:
                out.append(f"tag {d.state_names[i]}: {t}")
    for s, a, t in sorted(d.transitions, key=lambda e: (e[0], e[1].name, e[2])):
        out.append(f"trans {d.state_names[s]} {a.name} {d.state_names[t]}")
    return "\n".join(out) + "\n"


def _print_fluent(f: Fluent, env: Dlts) -> str:
    if f.prop is not None:
        return f"fluent @{f.prop.name}"
    if (f.name.startswith("'") and not f.initially
            and f.initiating == frozenset([action(f.name[1:])])
            and f.terminating == env.alphabet.actions - f.initiating):
        return f"fluent {f.name}"
    i = ", ".join(sorted(a.name for a in f.initiating))
    t = ", ".join(sorted(a.name for a in f.terminating))
    b = "true" if f.initially else "false"
    return f"fluent {f.name} = <{{{i}}}, {{{t}}}, {b}>"


def print_problem(p: RtcProblem | StdProblem) -> str:
    mode = "rtc" if isinstance(p, RtcProblem) else "standard"
    out = [f"mode {mode}", "", print_machine(p.env).rstrip(), "",
           f"env: {p.env.name}"]
    for f in p.fluents:
        out.append(_print_fluent(f, p.env))
    out.append("controllable: " + _names(p.controllable))
    for f in p.spec.safety:
        out.append(f"goal safety: {_fmt(f, _IMPL)}")
    for c in p.spec.assumptions:
        out.append(f"assume GF {_fmt(c, _IMPL)}")
    for c in p.spec.guarantees:
        out.append(f"guarantee GF {_fmt(c, _IMPL)}")
    if isinstance(p, StdProblem):
        for c in p.require:
            out.append(f"require GF {_fmt(c, _IMPL)}")
    return "\n".join(out) + "\n"


# DOT rendering.

def _esc(s: str) -> str:
    return s.replace("\\", "\\\\").replace('"', '\\"')


def export_dot(d: Dlts) -> str:
    """Deterministic DOT text: same machine, same bytes."""
    out = [f'digraph "{_esc(d.name)}" {{', "  rankdir=LR;",
           '  __init [shape=point, label=""];']
    for i in range(d.n_states):
        # escape the raw parts first, the \n separator is DOT markup
        label = _esc(d.state_names[i])
        props = sorted(p.name for p in d.labels[i])
        if props:
            label += "\\n" + _esc(",".join(props))
        shape = "box" if d.tag(i) == "c" else "ellipse"
        peri = ", peripheries=2" if i == d.initial else ""
        out.append(f'  n{i} [label="{label}", shape={shape}{peri}];')
    out.append(f"  __init -> n{d.initial};")
    for s, a, t in sorted(d.transitions, key=lambda e: (e[0], e[1].name, e[2])):
        out.append(f'  n{s} -> n{t} [label="{_esc(a.name)}"];')
    out.append("}")
    return "\n".join(out) + "\n"
