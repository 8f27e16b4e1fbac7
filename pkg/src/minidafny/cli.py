"""Batch command-line entry point.

Exit codes: 0 success, 1 parse failure of ``parse``/difftest mismatch,
2 Rfail, 3 timeout, 4 refuted condition, 5 only unknown verdicts,
64 usage, 65 input parse error, 69 solver could not be started,
70 compile or VC generation error.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path
from typing import Optional, Sequence

from .compiler import CompileError, compile_program
from .frontend import (
    ParseError, Atom, SList, exp_sexp, file_fuel, load_program, parse_program, print_program,
    sexp_to_str,
)
from .semantics import Env, Rcont, Rstop, Serr, Rtimeout, result_kind, run_main, show_value
from .simrel import DiffConfig, difftest_corpus
from .targetlang import pretty_decs, sexp_decs
from .util import run_deep
from .vcg import VcgError, method_infos, method_typing, method_vcg
from .vccheck import Budget, SolverSpawnError, falsify, smt_check

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_RFAIL = 2
EXIT_TIMEOUT = 3
EXIT_REFUTED = 4
EXIT_UNKNOWN = 5
EXIT_USAGE = 64
EXIT_PARSE = 65
EXIT_NO_SOLVER = 69
EXIT_INTERNAL = 70

DEFAULT_FUEL = 10_000


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _style(text: str, code: str) -> str:
    if os.environ.get("NO_COLOR") is not None or not sys.stdout.isatty():
        return text
    return f"\x1b[{code}m{text}\x1b[0m"


def _int_range(s: str) -> tuple[int, int]:
    lo, sep, hi = s.partition("..")
    try:
        a, b = int(lo), int(hi)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected LO..HI, got {s!r}") from None
    if not sep or a > b:
        raise argparse.ArgumentTypeError(f"expected LO..HI with LO <= HI, got {s!r}")
    return a, b


def _positive(s: str) -> int:
    try:
        v = int(s)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {s!r}") from None
    if v < 0:
        raise argparse.ArgumentTypeError(f"expected a non-negative integer, got {s!r}")
    return v


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="minidafny", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="cmd", required=True, parser_class=_Parser)

    p = sub.add_parser("parse", help="echo the canonical form of a program")
    p.add_argument("file")

    p = sub.add_parser("run", help="evaluate Main")
    p.add_argument("file")
    p.add_argument("--fuel", type=_positive)

    p = sub.add_parser("compile", help="compile to the ML core")
    p.add_argument("file")
    p.add_argument("--emit", choices=["pretty", "sexp"], default="pretty")
    p.add_argument("-o", dest="out")

    p = sub.add_parser("vcg", help="print verification conditions")
    p.add_argument("file")
    p.add_argument("-o", dest="out")

    p = sub.add_parser("check", help="generate and discharge verification conditions")
    p.add_argument("file")
    p.add_argument("--budget-ints", type=_int_range, default=(Budget.int_lo, Budget.int_hi),
                   metavar="LO..HI")
    p.add_argument("--budget-states", type=_positive, default=Budget.states_max, metavar="K")
    p.add_argument("--budget-arrays", type=_positive, default=Budget.arr_len_max, metavar="N")
    p.add_argument("--budget-heaps", type=_positive, default=Budget.heap_variants_max, metavar="N")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--smt-solver", metavar="CMD")
    p.add_argument("--timeout", type=float, default=10.0, metavar="SECS")

    p = sub.add_parser("difftest", help="compare interpreter and compiled code on random inputs")
    p.add_argument("path")
    p.add_argument("--fuel", type=_positive)
    p.add_argument("--trials", type=_positive, default=50)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--jsonl", metavar="OUT", help="also write one JSON object per trial")
    return ap


def _write(text: str, out: Optional[str]) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _load(path: str, normalized: bool = True):
    if not Path(path).is_file():
        raise UsageError(f"no such file: {path}")
    return load_program(path, normalized=normalized)


# ------------------------------------------------------------- commands


def cmd_parse(a) -> int:
    if not Path(a.file).is_file():
        raise UsageError(f"no such file: {a.file}")
    try:
        p = parse_program(Path(a.file).read_text())
    except ParseError as e:
        print(f"{a.file}:{e}", file=sys.stderr)
        return EXIT_FAILED
    sys.stdout.write(print_program(p) + "\n")
    return EXIT_OK


def cmd_run(a) -> int:
    p = _load(a.file)
    fuel = a.fuel if a.fuel is not None else file_fuel(a.file, DEFAULT_FUEL)
    st, r, frame = run_deep(run_main, fuel, p)
    print(result_kind(r))
    for x, v in frame or ():
        print(f"{x} = {show_value(v, st.heap)}")
    if isinstance(r, Rcont):
        return EXIT_OK
    if r == Rstop(Serr(Rtimeout())):
        return EXIT_TIMEOUT
    return EXIT_RFAIL


def cmd_compile(a) -> int:
    p = _load(a.file)
    decs = run_deep(compile_program, p)
    _write((pretty_decs if a.emit == "pretty" else sexp_decs)(decs) + "\n", a.out)
    return EXIT_OK


def vcg_text(p) -> str:
    infos = method_infos(p)
    blocks = []
    for m in p.methods:
        for k, vc in enumerate(method_vcg(p, m.name, infos)):
            blocks.append(sexp_to_str(SList((Atom("vc"), Atom(m.name), Atom(str(k)), exp_sexp(vc)))))
    return "".join(b + "\n" for b in blocks)


def cmd_vcg(a) -> int:
    p = _load(a.file)
    _write(run_deep(vcg_text, p), a.out)
    return EXIT_OK


def _show_state(st) -> str:
    return ", ".join(f"{x} = {show_value(v, st.heap)}" for x, v in st.locals)


def check_program(p, budget: Budget, solver: Optional[str] = None, timeout: float = 10.0,
                  out=None) -> int:
    """Generate and discharge every method's conditions; returns an exit code."""
    out = out if out is not None else sys.stdout
    env = Env(p)
    refuted = unknown = False
    vc_error = False
    infos = method_infos(p)
    for m in p.methods:
        try:
            vcs = method_vcg(p, m.name, infos)
        except VcgError as e:
            print(f"{m.name}: VC generation failed: {e}", file=sys.stderr)
            vc_error = True
            continue
        ls = method_typing(p, m.name)
        outs = [x for x, _ in m.outs]
        smt = smt_check(vcs, ls, solver, timeout, outs) if solver else [None] * len(vcs)
        for k, (vc, res) in enumerate(zip(vcs, smt)):
            label = f"{m.name} vc{k}"
            if res is not None and res.kind == "Valid":
                print(f"{label}: {_style('Valid', '32')} (solver)", file=out)
                continue
            if res is not None and res.kind == "Invalid":
                refuted = True
                model = " ".join(res.detail.split())
                print(f"{label}: {_style('Invalid', '31')} (solver) {model}", file=out)
                continue
            fr = run_deep(falsify, [vc], ls, budget, env, outs)
            note = f" after solver {res.kind.lower()}" if res is not None else ""
            if fr.counterexample is not None:
                refuted = True
                cx = fr.counterexample
                trail = "".join(f"; {q} = {show_value(v)}" for q, v in cx.trail)
                print(f"{label}: {_style('counterexample', '31')} ({cx.result}) "
                      f"{_show_state(cx.state)}{trail}", file=out)
            elif fr.checked == 0:
                unknown = True
                print(f"{label}: Unknown (every sampled state exceeded the budget){note}", file=out)
            else:
                skipped = f", {fr.skipped} skipped" if fr.skipped else ""
                print(f"{label}: {_style('bounded-valid', '33')} ({fr.checked} states{skipped}){note}",
                      file=out)
    if vc_error:
        return EXIT_INTERNAL
    if refuted:
        return EXIT_REFUTED
    if unknown:
        return EXIT_UNKNOWN
    return EXIT_OK


def cmd_check(a) -> int:
    p = _load(a.file)
    lo, hi = a.budget_ints
    try:
        budget = Budget(int_lo=lo, int_hi=hi, states_max=a.budget_states,
                        arr_len_max=a.budget_arrays, heap_variants_max=a.budget_heaps, seed=a.seed)
    except ValueError as e:
        raise UsageError(str(e)) from None
    return check_program(p, budget, a.smt_solver, a.timeout)


def cmd_difftest(a) -> int:
    if not Path(a.path).exists():
        raise UsageError(f"no such file or directory: {a.path}")
    cfg = DiffConfig() if a.fuel is None else DiffConfig(fuel=a.fuel)
    report = run_deep(difftest_corpus, a.path, a.trials, a.seed, cfg,
                      fuel_from_files=a.fuel is None)
    sys.stdout.write(report.text())
    if a.jsonl:
        Path(a.jsonl).write_text(report.jsonl())
    return EXIT_OK if report.ok else EXIT_FAILED


COMMANDS = {"parse": cmd_parse, "run": cmd_run, "compile": cmd_compile, "vcg": cmd_vcg,
            "check": cmd_check, "difftest": cmd_difftest}


def main(argv: Optional[Sequence[str]] = None) -> int:
    try:
        a = build_parser().parse_args(argv)
        return COMMANDS[a.cmd](a)
    except UsageError as e:
        print(f"usage error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except ParseError as e:
        print(f"parse error: {e}", file=sys.stderr)
        return EXIT_PARSE
    except (CompileError, VcgError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INTERNAL
    except SolverSpawnError as e:
        print(f"solver error: {e}", file=sys.stderr)
        return EXIT_NO_SOLVER


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()
