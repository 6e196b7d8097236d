"""Command line: ``protosim run | sweep | validate``.

Exit codes: 0 ok, 1 an expectation failed, 2 usage or parse error,
3 runtime error.
"""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .dsl import ScriptError, StepError, load_script, parse_grid, resolve_params, rows_to_csv, run_script, sweep
from .dynamics import adiabaticity_sweep, compare_closed_form
from .dynamics.ladder import DEFAULT_LMAX, DEFAULT_TOL
from .params import preset, regime_status, validate_bragg_regime

EXIT_OK, EXIT_EXPECT, EXIT_USAGE, EXIT_RUNTIME = 0, 1, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="protosim", description="Bragg-diffraction hyperentanglement protocol simulator")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    r = sub.add_parser("run", help="execute a protocol script")
    r.add_argument("script")
    r.add_argument("--params", help="preset name or key = value file; replaces the script's params")
    r.add_argument("--trace", action="store_true", help="include a state snapshot after every step")
    r.add_argument("--json", dest="json_out", help="write the report here ('-' for stdout)")
    r.add_argument("--seed", type=int, help="enable 'measure ... sample' with this RNG seed")

    s = sub.add_parser("sweep", help="run a script template over a grid")
    s.add_argument("script")
    s.add_argument("--var", required=True)
    s.add_argument("--grid", required=True, help="comma-separated values")
    s.add_argument("--csv", required=True, help="output file ('-' for stdout)")
    s.add_argument("--workers", type=int)

    v = sub.add_parser("validate", help="closed form vs ODE oracle")
    v.add_argument("--preset", required=True)
    v.add_argument("--lmax", type=int, default=DEFAULT_LMAX)
    v.add_argument("--tol", type=float, default=DEFAULT_TOL)
    v.add_argument("--ratios", default="1e2,1e3,1e4", help="Delta/omega_r grid")
    v.add_argument("--mu-over-omega-r", type=float, default=10.0)
    v.add_argument("--branch", choices=("ground", "excited"), default="ground")
    v.add_argument("--csv", required=True)
    return p


def _emit(path: str, text: str):
    if path == "-":
        sys.stdout.write(text)
    else:
        Path(path).write_text(text, encoding="utf-8")


def cmd_run(args) -> int:
    script = load_script(args.script)
    params = resolve_params(args.params) if args.params else None
    report = run_script(script, params, trace=args.trace, base_dir=Path(args.script).parent, seed=args.seed)
    if args.json_out:
        _emit(args.json_out, report.to_json())
    for e in report.expects:
        status = "PASS" if e["passed"] else "FAIL"
        print(f"{status} line {e['line']}: {e['kind']} = {e['value']:.12g}", file=sys.stderr)
    print(f"{len(report.steps)} steps in {report.wall_time:.3f} s", file=sys.stderr)
    return EXIT_OK if report.passed else EXIT_EXPECT


def cmd_sweep(args) -> int:
    path = Path(args.script)
    rows = sweep(path.read_text(encoding="utf-8"), args.var, parse_grid(args.grid), args.workers, path.parent)
    _emit(args.csv, rows_to_csv(rows, args.var))
    return EXIT_OK if all(r.get("passed", True) for r in rows) else EXIT_EXPECT


def cmd_validate(args) -> int:
    pr = preset(args.preset)
    ratios = [float(x) for x in parse_grid(args.ratios)]
    rows = adiabaticity_sweep(pr.params, ratios, args.mu_over_omega_r, l_max=args.lmax, tol=args.tol,
                              branch=args.branch)
    own = compare_closed_form(pr.params, branch=args.branch, l_max=args.lmax, tol=args.tol)
    for r in rows:
        r["case"] = "sweep"
        r["status"] = regime_status(r["delta_over_omega_r"])
    own["case"] = args.preset
    own["status"] = validate_bragg_regime(pr.params, pr.cavity_lifetime)["status"]
    rows.append(own)
    _emit(args.csv, rows_to_csv(rows, "case"))
    inf = [r["infidelity"] for r in rows[:-1]]
    ordered = sorted(range(len(ratios)), key=lambda i: ratios[i])
    monotone = all(inf[a] > inf[b] for a, b in zip(ordered, ordered[1:]))
    print(f"infidelity monotone in Delta/omega_r: {monotone}", file=sys.stderr)
    return EXIT_OK if monotone else EXIT_EXPECT


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    handler = {"run": cmd_run, "sweep": cmd_sweep, "validate": cmd_validate}[args.command]
    try:
        return handler(args)
    except ScriptError as exc:
        print(f"parse error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (KeyError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (StepError, ValueError, RuntimeError, OSError, ArithmeticError) as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
