"""Command-line surface: synthesize, verify, transform.

Exit codes are uniform across commands: 0 means success (realizable,
or every check passed), 1 means a negative verdict (unrealizable, or
some check failed), 2 means the input could not be used at all.
Machine and problem text goes to --out (stdout by default); status
lines go to stderr; verification reports are JSON on stdout.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .errors import ToolError, UsageError
from .extract import extract_rtc_controller
from .rtc import RtcProblem, build_modified_problem
from .solver import synthesize
from .textio import (export_dot, parse_machine, parse_problem, print_machine,
                     print_problem)
from .verify import (Execution, LegalityReport, Verdict,
                     verify_rtc_controller, verify_std_controller)

__all__ = ["main"]


def _read(path: str) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise UsageError(f"cannot read {path}: {e}") from None


def _write(path: str | None, text: str) -> None:
    if path is None or path == "-":
        sys.stdout.write(text)
        return
    try:
        Path(path).write_text(text, encoding="utf-8")
    except OSError as e:
        raise UsageError(f"cannot write {path}: {e}") from None


def _status(msg: str) -> None:
    print(msg, file=sys.stderr)


def cmd_synthesize(args) -> int:
    p = parse_problem(_read(args.file), mode=args.mode)
    rtc = isinstance(p, RtcProblem)
    if args.emit_mplus and not rtc:
        raise UsageError("--emit-mplus applies to run-to-completion "
                         "problems only")
    res = synthesize(p)
    if not res.realizable:
        _status(f"unrealizable: {p.env.name} admits no controller; "
                f"environment strategy follows")
        _write(args.out, print_machine(res.counterexample))
        if args.dot:
            _write(args.dot, export_dot(res.counterexample))
        return 1
    m = res.controller
    if rtc:
        if args.emit_mplus:
            _write(args.emit_mplus, print_machine(m))
        m = extract_rtc_controller(m)
    _status(f"realizable: controller {m.name} with {m.n_states} states")
    _write(args.out, print_machine(m))
    if args.dot:
        _write(args.dot, export_dot(m))
    return 0


def _execution_json(ex: Execution) -> dict:
    names = list(ex.names) if ex.names else [str(s) for s in ex.states]
    return {"reason": ex.reason, "states": names,
            "actions": [a.name for a in ex.actions], "loop": ex.loop}


def _check_json(v) -> dict:
    if isinstance(v, LegalityReport):
        return {"ok": v.verdict,
                "violations": [{"environment-state": pair[0],
                                "controller-state": pair[1],
                                "bullet": bullet, "action": a.name}
                               for pair, bullet, a in v.violations]}
    if isinstance(v, Verdict):
        cex = None if v.counterexample is None \
            else _execution_json(v.counterexample)
        return {"ok": v.holds, "counterexample": cex}
    raise UsageError(f"cannot report {v!r}")


def cmd_verify(args) -> int:
    p = parse_problem(_read(args.env_file), mode=args.mode)
    m = parse_machine(_read(args.controller_file))
    if isinstance(p, RtcProblem):
        mode, checks = "rtc", verify_rtc_controller(p, m)
    else:
        mode, checks = "standard", verify_std_controller(p, m)
    body = {name: _check_json(v) for name, v in checks.items()}
    ok = all(c["ok"] for c in body.values())
    report = {"schema": 1, "mode": mode, "environment": p.env.name,
              "controller": m.name, "ok": ok, "checks": body}
    print(json.dumps(report, indent=2))
    return 0 if ok else 1


def cmd_transform(args) -> int:
    p = parse_problem(_read(args.file))
    if not isinstance(p, RtcProblem):
        raise UsageError("transform applies to run-to-completion problems; "
                         "this file is standard mode")
    _write(args.out, print_problem(build_modified_problem(p)))
    return 0


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="rtcsynth",
        description="Synthesize and check run-to-completion controllers "
                    "over labelled transition systems.")
    sub = ap.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("synthesize",
                        help="solve a problem file and write the controller")
    sp.add_argument("file", help="problem file")
    sp.add_argument("--mode", choices=("rtc", "standard"),
                    help="override the file's mode flag")
    sp.add_argument("--out", help="controller destination (default stdout)")
    sp.add_argument("--dot", help="also write the controller as DOT")
    sp.add_argument("--emit-mplus", dest="emit_mplus", metavar="PATH",
                    help="also write the pre-extraction turn controller")
    sp.set_defaults(func=cmd_synthesize)

    vp = sub.add_parser("verify",
                        help="check a controller against a problem file")
    vp.add_argument("env_file", help="problem file")
    vp.add_argument("controller_file", help="machine file")
    vp.add_argument("--mode", choices=("rtc", "standard"),
                    help="override the file's mode flag")
    vp.set_defaults(func=cmd_verify)

    tp = sub.add_parser("transform",
                        help="write the turn-taking reduction of a problem")
    tp.add_argument("file", help="run-to-completion problem file")
    tp.add_argument("--out", help="destination (default stdout)")
    tp.set_defaults(func=cmd_transform)
    return ap


def main(argv: list[str] | None = None) -> int:
    args = _parser().parse_args(argv)
    try:
        return args.func(args)
    except ToolError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
