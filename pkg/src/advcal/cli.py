"""Command-line front end: ``advcal calibrate|verify|bridge|compose``."""

from __future__ import annotations

import argparse
import datetime
import sys
from typing import Any, Dict, List, Optional, Sequence

from advcal import __version__
from advcal.composition import BudgetVector
from advcal.errors import AdvcalError
from advcal.scenario import (
    ScenarioError,
    calibrate,
    load_doc,
    parse_window,
    run_bridge,
    to_json,
    verify,
)

EXIT_OK = 0
EXIT_INFEASIBLE = 2
EXIT_INVALID = 3
EXIT_INTERNAL = 4


def _fmt(x: Any) -> str:
    if isinstance(x, float):
        return "%.12g" % x
    return str(x)


def _header(args: argparse.Namespace) -> None:
    if not args.json and not args.no_header:
        stamp = datetime.datetime.now(datetime.timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")
        print(f"# advcal {__version__} {stamp}")


def _text_calibration(rep: Dict[str, Any]) -> List[str]:
    lines = [
        f"scenario: {rep['scenario']}",
        f"delta: {_fmt(rep['delta'])}  mechanism: {rep['mechanism']}  window: {rep['window']}",
    ]
    for s in rep["sets"]:
        flag = "feasible" if s["feasible"] else "INFEASIBLE"
        lines.append(
            f"set {s['goal']}: epsilon={_fmt(s['epsilon'])} noise_scale={_fmt(s['noise_scale'])} [{flag}]"
        )
        lines.append(f"  p={_fmt(s['p'])} q={_fmt(s['q'])} a={_fmt(s['a'])} side={s['side']}")
        if s.get("smallest_feasible_window") is not None:
            lines.append(f"  smallest feasible window: {_fmt(s['smallest_feasible_window'])}")
        for note in s.get("notes", []):
            lines.append(f"  note: {note}")
    o = rep["outputs"]
    lines.append(
        f"outputs: {o['count']} ({o['regime']}), per-output epsilon={_fmt(o['per_output_epsilon'])}"
    )
    lines.append(
        f"overall: epsilon={_fmt(rep['epsilon'])} noise_scale={_fmt(rep['noise_scale'])} "
        f"feasible={'yes' if rep['feasible'] else 'no'}"
    )
    return lines


def _text_verify(v: Dict[str, Any]) -> List[str]:
    lines = []
    for s in v["sets"]:
        adv = s.get("max_advantage")
        lines.append(
            f"verify {s['goal']}: epsilon={_fmt(s['epsilon'])} max_advantage={_fmt(adv)} "
            f"(bound {_fmt(v['delta'])} + slack {_fmt(v['slack'])}) {s['verdict']}"
        )
        if s.get("discretization_error"):
            lines.append(f"  discretisation error (max bin mass): {_fmt(s['discretization_error'])}")
        if s.get("note"):
            lines.append(f"  note: {s['note']}")
    lines.append(f"verdict: {v['verdict']}")
    return lines


def _emit(args: argparse.Namespace, obj: Dict[str, Any], lines: List[str]) -> None:
    if args.json:
        sys.stdout.write(to_json(obj))
    else:
        _header(args)
        print("\n".join(lines))


def cmd_calibrate(args: argparse.Namespace) -> int:
    doc = load_doc(args.doc)
    window = parse_window(args.window) if args.window else None
    rep = calibrate(doc, window)
    lines = _text_calibration(rep)
    code = EXIT_OK if rep["feasible"] else EXIT_INFEASIBLE
    if args.verify and rep["feasible"]:
        v = verify(doc, report=rep)
        rep["verify"] = v
        lines += _text_verify(v)
        if v["verdict"] != "PASS":
            code = EXIT_INFEASIBLE
    _emit(args, rep, lines)
    return code


def cmd_verify(args: argparse.Namespace) -> int:
    doc = load_doc(args.doc)
    v = verify(doc, epsilon=args.epsilon)
    _emit(args, v, _text_verify(v))
    return EXIT_OK if v["verdict"] == "PASS" else EXIT_INFEASIBLE


def cmd_bridge(args: argparse.Namespace) -> int:
    doc = load_doc(args.doc)
    out = run_bridge(doc)
    params = out["params"]
    lines = [f"bridge {out['direction']}: p={_fmt(out['p'])} q={_fmt(out['q'])}"]
    for k in sorted(params):
        if params[k] is not None and params[k] != "":
            lines.append(f"  {k}: {_fmt(params[k])}")
    for k in ("noise_level", "baseline_noise", "beta", "C_used", "posterior_bound"):
        if k in out:
            lines.append(f"  {k}: {_fmt(out[k])}")
    _emit(args, out, lines)
    return EXIT_OK if params.get("status") == "ok" else EXIT_INFEASIBLE


def cmd_compose(args: argparse.Namespace) -> int:
    try:
        eps = [float(x) for x in args.eps.split(",") if x.strip()]
    except ValueError:
        raise ScenarioError(f"--eps must be comma-separated numbers, got {args.eps!r}") from None
    norm = "inf" if args.norm == "inf" else int(args.norm)
    total = BudgetVector(tuple(eps), norm).total()
    out = {"eps": eps, "input_norm_p": args.norm, "total": total}
    _emit(args, out, [f"total epsilon (input norm l_{args.norm}): {_fmt(total)}"])
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="advcal", description="Calibrate DP noise to a guessing-advantage bound.")
    ap.add_argument("--version", action="version", version=f"advcal {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--json", action="store_true", help="emit canonical JSON")
        p.add_argument("--no-header", action="store_true", help="omit the timestamp header line")

    p = sub.add_parser("calibrate", help="compute epsilon and noise scale for a scenario")
    p.add_argument("doc")
    p.add_argument("--verify", action="store_true", help="check the result with the brute-force attacker")
    p.add_argument("--window", help="override the window: scan:N or fixed:a")
    common(p)
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("verify", help="check a given epsilon with the brute-force attacker")
    p.add_argument("doc")
    p.add_argument("--epsilon", type=float, required=True)
    common(p)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("bridge", help="run the (eps, delta) conversion in the bridge section")
    p.add_argument("doc")
    common(p)
    p.set_defaults(func=cmd_bridge)

    p = sub.add_parser("compose", help="combine per-output epsilons")
    p.add_argument("--eps", required=True, help="comma-separated per-output epsilons")
    p.add_argument("--norm", choices=["1", "2", "inf"], default="inf", help="input-distance norm")
    common(p)
    p.set_defaults(func=cmd_compose)
    return ap


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except KeyError as exc:
        print(f"advcal: error: missing field {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (AdvcalError, ValueError) as exc:
        print(f"advcal: error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except Exception as exc:  # pragma: no cover - last-resort guard
        print(f"advcal: internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
