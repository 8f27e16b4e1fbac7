"""Differential test of interpreter against compiled code over the corpus."""

import argparse
import time
from pathlib import Path

from minidafny.simrel import DiffConfig, difftest_corpus


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("path", nargs="?", default=str(Path(__file__).parent.parent / "corpus"))
    ap.add_argument("--trials", type=int, default=50)
    ap.add_argument("--seed", type=int, default=1)
    ap.add_argument("--jsonl")
    a = ap.parse_args()
    t = time.perf_counter()
    r = difftest_corpus(a.path, a.trials, a.seed, DiffConfig())
    print(r.text(), end="")
    print(f"elapsed {time.perf_counter() - t:.1f}s")
    if a.jsonl:
        Path(a.jsonl).write_text(r.jsonl())
    raise SystemExit(0 if r.ok else 1)


if __name__ == "__main__":
    main()
