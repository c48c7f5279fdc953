"""End-to-end command behaviour: exit codes, outputs, JSON reports."""

import json
import pathlib

import pytest

from rtcsynth.cli import main
from rtcsynth.rtc import build_modified_problem
from rtcsynth.textio import parse_machine, parse_problem, print_problem

DATA = pathlib.Path(__file__).parent / "data"

TOY = """\
mode rtc
dlts toy
states: s0 s1
init: s0
controlled: a
monitored: u
trans s0 a s1
trans s1 a s0
trans s0 u s0
trans s1 u s1
env: toy
controllable: a
guarantee GF 'a
"""

# b is declared but never available, so GF 'b cannot be met
HOPELESS = """\
mode rtc
dlts toy
states: s0
init: s0
controlled: a b
monitored: u
trans s0 a s0
trans s0 u s0
env: toy
controllable: a b
guarantee GF 'b
"""

# full alphabet, but u is never enabled by the controller
BLOCKER = """\
dlts onlya
states: t
init: t
controlled: a
monitored: u
trans t a t
"""


@pytest.fixture
def files(tmp_path):
    def put(name, text):
        f = tmp_path / name
        f.write_text(text)
        return str(f)
    return put


def test_synthesize_then_verify_round_trip(files, tmp_path, capsys):
    toy = files("toy.rtc", TOY)
    out = str(tmp_path / "ctrl.dlts")
    mplus = str(tmp_path / "mplus.dlts")
    dot = str(tmp_path / "ctrl.dot")
    assert main(["synthesize", toy, "--out", out, "--emit-mplus", mplus,
                 "--dot", dot]) == 0
    assert "realizable" in capsys.readouterr().err
    parse_machine((tmp_path / "mplus.dlts").read_text())
    assert (tmp_path / "ctrl.dot").read_text().startswith("digraph")

    assert main(["verify", toy, out]) == 0
    report = json.loads(capsys.readouterr().out)
    assert report["schema"] == 1
    assert report["mode"] == "rtc"
    assert report["environment"] == "toy"
    assert report["ok"] is True
    assert set(report["checks"]) == {"rtc-legality", "deadlock-freedom",
                                     "goal"}


def test_unrealizable_writes_environment_strategy(files, tmp_path, capsys):
    hopeless = files("hopeless.rtc", HOPELESS)
    out = str(tmp_path / "env.cex")
    assert main(["synthesize", hopeless, "--out", out]) == 1
    assert "unrealizable" in capsys.readouterr().err
    parse_machine((tmp_path / "env.cex").read_text())


def test_verify_reports_starvation_cycle(files, capsys):
    toy = files("toy.rtc", TOY)
    ctrl = files("blocker.dlts", BLOCKER)
    assert main(["verify", toy, ctrl]) == 1
    report = json.loads(capsys.readouterr().out)
    assert report["ok"] is False
    assert report["checks"]["rtc-legality"]["ok"] is True
    goal = report["checks"]["goal"]
    assert goal["ok"] is False
    assert goal["counterexample"]["loop"] is not None
    assert goal["counterexample"]["states"]


def test_verify_names_the_violated_bullet(files, capsys):
    toy = files("toy.rtc", TOY)
    ctrl = files("blocker.dlts", BLOCKER)
    assert main(["verify", toy, ctrl, "--mode", "standard"]) == 1
    report = json.loads(capsys.readouterr().out)
    v = report["checks"]["legality"]["violations"][0]
    assert v["bullet"] == 1
    assert v["action"] == "u"
    assert report["mode"] == "standard"


def test_transform_output_is_the_modified_problem(files, capsys):
    toy = files("toy.rtc", TOY)
    assert main(["transform", toy]) == 0
    text = capsys.readouterr().out
    assert text == print_problem(build_modified_problem(parse_problem(TOY)))
    parse_problem(text)


def test_transform_rejects_standard_problems(files, capsys):
    toy = files("toy.rtc", TOY.replace("mode rtc", "mode standard"))
    assert main(["transform", toy]) == 2
    assert "error:" in capsys.readouterr().err


def test_emit_mplus_is_rtc_only(files, capsys):
    toy = files("toy.rtc", TOY)
    assert main(["synthesize", toy, "--mode", "standard",
                 "--emit-mplus", "-"]) == 2
    assert "error:" in capsys.readouterr().err


def test_missing_file_is_a_usage_error(tmp_path, capsys):
    assert main(["synthesize", str(tmp_path / "nope.rtc")]) == 2
    assert "cannot read" in capsys.readouterr().err


def test_parse_errors_carry_the_line(files, capsys):
    bad = files("bad.rtc", "mode rtc\nblorp\n")
    assert main(["synthesize", bad]) == 2
    err = capsys.readouterr().err
    assert "error: line 2" in err


def test_uav_pipeline(files, tmp_path, capsys):
    out = str(tmp_path / "uav.ctrl")
    assert main(["synthesize", str(DATA / "uav.rtc"), "--out", out]) == 0
    assert main(["verify", str(DATA / "uav.rtc"), out]) == 0
    assert json.loads(capsys.readouterr().out)["ok"] is True


def test_uav_without_the_turn_discipline_is_unrealizable(tmp_path, capsys):
    out = str(tmp_path / "uav.cex")
    assert main(["synthesize", str(DATA / "uav.rtc"), "--mode", "standard",
                 "--out", out]) == 1
    parse_machine((tmp_path / "uav.cex").read_text())
