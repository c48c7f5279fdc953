"""Yield-stripping extraction and its inverse embedding."""

from __future__ import annotations

import random

import pytest

from helpers import rand_rtc_problem
from rtcsynth.dlts import Dlts, action, is_deterministic
from rtcsynth.errors import UsageError
from rtcsynth.extract import embed_rtc_controller, extract_rtc_controller
from rtcsynth.solver import synthesize
from rtcsynth.verify import verify_rtc_controller


def turn_machine(trans, init="t0"):
    """M+ over ping (monitored) / pong (controlled) plus the yields."""
    states = sorted({t[0] for t in trans} | {t[2] for t in trans})
    return Dlts.make("mp", states, init, ["pong", "yieldC"],
                     ["ping", "yieldE"], trans)


def by_name(d: Dlts, name: str) -> int:
    return d.state_names.index(name)


def test_yieldless_input_passes_through():
    mp = turn_machine([("t0", "ping", "t0")])
    m = extract_rtc_controller(mp)
    assert m.n_states == 1
    assert m.state_names == ("e.t0",)
    assert m.tags == ("e",)
    assert {(s, a.name, t) for s, a, t in m.transitions} == {(0, "ping", 0)}
    assert sorted(a.name for a in m.alphabet.actions) == ["ping", "pong"]


def test_detour_shadows_the_direct_uncontrolled_move():
    # t0 has both a direct ping and a yield-out/yield-back detour whose
    # landing state moves on ping; the detour wins and the direct target
    # becomes unreachable.
    mp = turn_machine([
        ("t0", "yieldE", "t1"), ("t1", "yieldC", "t2"),
        ("t2", "ping", "t3"), ("t0", "ping", "t4"),
        ("t3", "ping", "t3"),
    ])
    m = extract_rtc_controller(mp)
    assert m.step(m.initial, action("ping")) == by_name(m, "e.t3")
    assert "e.t4" not in m.state_names


def test_direct_uncontrolled_used_when_no_yield_back():
    mp = turn_machine([
        ("t0", "yieldE", "t1"), ("t1", "pong", "t2"),
        ("t0", "ping", "t3"), ("t3", "ping", "t3"),
        ("t2", "yieldC", "t4"), ("t4", "ping", "t4"),
    ])
    m = extract_rtc_controller(mp)
    # no yieldC out of t1, so the direct ping survives
    assert m.step(m.initial, action("ping")) == by_name(m, "e.t3")
    # and the controlled move enters the c side through the yield-out
    assert m.step(m.initial, action("pong")) == by_name(m, "c.t2")
    assert m.tags[by_name(m, "c.t2")] == "c"


def test_controlled_run_and_return_to_e_side():
    mp = turn_machine([
        ("t0", "yieldE", "t1"), ("t1", "pong", "t2"),
        ("t2", "pong", "t3"), ("t3", "yieldC", "t4"),
        ("t4", "ping", "t5"), ("t5", "ping", "t5"),
    ])
    m = extract_rtc_controller(mp)
    c2 = m.step(m.initial, action("pong"))
    assert m.state_names[c2] == "c.t2"
    c3 = m.step(c2, action("pong"))
    assert m.state_names[c3] == "c.t3"
    e5 = m.step(c3, action("ping"))
    assert m.state_names[e5] == "e.t5"
    assert m.tags[e5] == "e"


def test_controlled_moves_never_leave_from_the_e_side_directly():
    # a controlled move with no yield-out in front of it is dropped
    mp = turn_machine([("t0", "pong", "t1"), ("t0", "ping", "t0"),
                       ("t1", "ping", "t1")])
    m = extract_rtc_controller(mp)
    assert m.step(m.initial, action("pong")) is None
    assert "e.t1" not in m.state_names and "c.t1" not in m.state_names


def test_input_without_yield_actions_is_rejected():
    mp = Dlts.make("mp", ["t"], "t", ["pong"], ["ping"],
                   [("t", "ping", "t")])
    with pytest.raises(UsageError):
        extract_rtc_controller(mp)


# Embedding.

def pingpong_env():
    return Dlts.make("env", ["s"], "s", ["pong"], ["ping"],
                     [("s", "ping", "s"), ("s", "pong", "s")])


def test_embed_rejects_illegal_controller():
    e = Dlts.make("env", ["s"], "s", ["pong"], ["ping"],
                  [("s", "ping", "s")])
    m = Dlts.make("m", ["t"], "t", ["pong"], ["ping"],
                  [("t", "ping", "t"), ("t", "pong", "t")])
    with pytest.raises(UsageError, match="bullet 3"):
        embed_rtc_controller(m, e)


def test_embed_controller_that_never_moves():
    e = pingpong_env()
    m = Dlts.make("m", ["t"], "t", ["pong"], ["ping"],
                  [("t", "ping", "t")])
    w = embed_rtc_controller(m, e)
    assert w.n_states == 2
    eside = w.initial
    cside = w.step(eside, action("yieldE"))
    assert w.tag(eside) == "e" and w.tag(cside) == "c"
    assert w.step(eside, action("ping")) == eside
    # nothing jointly controlled: the first copy hands the turn back
    assert [(a.name, t) for a, t in w.out[cside]] == [("yieldC", eside)]


def test_second_copy_yields_as_soon_as_environment_can_move():
    e = pingpong_env()
    w = embed_rtc_controller(e, e)  # the full copy is rtc-legal
    eside = w.initial
    c1 = w.step(eside, action("yieldE"))
    c2 = w.step(c1, action("pong"))
    assert c2 is not None and w.tag(c2) == "c"
    # ping is jointly enabled underneath, so the burst must end here
    assert [(a.name, t) for a, t in w.out[c2]] == [("yieldC", eside)]


def test_second_copy_keeps_moving_while_environment_is_quiet():
    e = Dlts.make("env", ["s", "w"], "s", ["pong"], ["ping"],
                  [("s", "ping", "s"), ("s", "pong", "w"),
                   ("w", "pong", "w")])
    w = embed_rtc_controller(e, e)
    c1 = w.step(w.initial, action("yieldE"))
    c2 = w.step(c1, action("pong"))
    # at w no uncontrolled action is enabled: the burst continues
    assert w.step(c2, action("yieldC")) is None
    assert w.step(c2, action("pong")) is not None


def test_embed_alphabet_adds_the_yields():
    e = pingpong_env()
    w = embed_rtc_controller(e, e)
    assert sorted(a.name for a in w.alphabet.controlled) == ["pong", "yieldC"]
    assert sorted(a.name for a in w.alphabet.monitored) == ["ping", "yieldE"]
    assert is_deterministic(w)


# Round trip over synthesized controllers.

def test_extraction_round_trip_on_random_problems():
    rng = random.Random(7)
    realizable = 0
    attempts = 0
    while realizable < 20:
        attempts += 1
        assert attempts < 300, "too few realizable random instances"
        p = rand_rtc_problem(rng, max_states=5, max_actions=3)
        res = synthesize(p)
        if not res.realizable:
            continue
        realizable += 1
        mplus = res.controller
        m = extract_rtc_controller(mplus)
        assert m.n_states <= 2 * mplus.n_states
        assert is_deterministic(m)
        assert m.tag(m.initial) == "e"
        assert m.alphabet == p.env.alphabet
        checks = verify_rtc_controller(p, m)
        assert checks["rtc-legality"].verdict
        assert checks["deadlock-freedom"].holds
        assert checks["goal"].holds
        again = extract_rtc_controller(embed_rtc_controller(m, p.env))
        assert is_deterministic(again)
        checks2 = verify_rtc_controller(p, again)
        assert checks2["rtc-legality"].verdict
        assert checks2["deadlock-freedom"].holds
        assert checks2["goal"].holds
