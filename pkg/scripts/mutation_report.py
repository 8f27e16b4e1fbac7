"""Run the deliberately broken compilers over part of the corpus and count
how many trials each one gets caught on."""

import argparse
from dataclasses import replace
from pathlib import Path

from minidafny.compiler import Compiler
from minidafny.frontend import file_fuel, load_program
from minidafny.mutants import COMPILER_MUTANTS, TicklessMachine
from minidafny.simrel import DiffConfig, Report, difftest_program

CORPUS = Path(__file__).parent.parent / "corpus"


def report(files, trials, seed, compiler=None, machine_cls=None, fuel=None) -> Report:
    r = Report()
    for stem in files:
        f = CORPUS / f"{stem}.sexp"
        cfg = replace(DiffConfig(target_fuel=20_000), fuel=fuel or file_fuel(f, 10_000))
        kw = {"machine_cls": machine_cls} if machine_cls else {}
        difftest_program(load_program(f), stem, trials, seed, cfg, r, compiler=compiler, **kw)
    return r


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--files", nargs="+", default=["91", "max_array", "find", "swap"])
    ap.add_argument("--trials", type=int, default=10)
    ap.add_argument("--seed", type=int, default=1)
    a = ap.parse_args()
    rows = [("control", report(a.files, a.trials, a.seed, Compiler()))]
    rows += [(n, report(a.files, a.trials, a.seed, c())) for n, c in COMPILER_MUTANTS.items()]
    rows.append(("missing-tick", report(a.files, a.trials, a.seed, machine_cls=TicklessMachine,
                                        fuel=30)))
    for name, r in rows:
        c = r.counts()
        print(f"{name:18} caught {len(r.mismatches):4} / {sum(c.values()):4}  {dict(c)}")


if __name__ == "__main__":
    main()
