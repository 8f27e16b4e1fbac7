"""Generate and discharge the conditions of every corpus program; print a table."""

import argparse
import io
import shutil
import time
from pathlib import Path

from minidafny.cli import check_program
from minidafny.frontend import load_program
from minidafny.simrel import corpus_files
from minidafny.vccheck import Budget

CODES = {0: "ok", 4: "refuted", 5: "unknown", 70: "vcg error"}


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("path", nargs="?", default=str(Path(__file__).parent.parent / "corpus"))
    ap.add_argument("--states", type=int, default=Budget.states_max)
    ap.add_argument("--ints", type=int, default=Budget.int_hi, help="check ints in [-N, N]")
    ap.add_argument("--solver", default=shutil.which("z3"))
    ap.add_argument("--verbose", action="store_true")
    a = ap.parse_args()
    budget = Budget(int_lo=-a.ints, int_hi=a.ints, states_max=a.states)
    for f in corpus_files(a.path):
        out = io.StringIO()
        t = time.perf_counter()
        code = check_program(load_program(f), budget, solver=a.solver, out=out)
        print(f"{f.stem:16} {CODES.get(code, code):10} {time.perf_counter() - t:6.2f}s")
        if a.verbose:
            print("    " + out.getvalue().strip().replace("\n", "\n    "))


if __name__ == "__main__":
    main()
