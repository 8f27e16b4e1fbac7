import random

from hypothesis import given, settings, strategies as st

from minidafny.ast import INT
from minidafny.frontend import load_program, parse_program, normalize
from minidafny.mutants import FlipAdd
from minidafny.semantics import ArrV, BoolV, HArr, IntV, StrV
from minidafny.simrel import (
    DiffConfig, array_rel, difftest_corpus, difftest_method, difftest_program, materialize,
    run_contract, to_target, val_rel,
)
from minidafny.targetlang import ArrCell, TStore, VBool, VInt, VLoc, VStr, VTuple

from conftest import CORPUS


def test_val_rel_scalars():
    assert val_rel({}, IntV(5), VInt(5))
    assert not val_rel({}, IntV(5), VInt(6))
    assert val_rel({}, BoolV(True), VBool(True))
    assert val_rel({}, StrV("a"), VStr("a"))
    assert not val_rel({}, IntV(1), VBool(True))


def test_val_rel_arrays():
    a = ArrV(2, 0, INT)
    assert val_rel({0: 7}, a, VTuple((VInt(2), VLoc(7))))
    assert not val_rel({0: 7}, a, VTuple((VInt(3), VLoc(7))))
    assert not val_rel({0: 7}, a, VTuple((VInt(2), VLoc(8))))


def test_array_rel():
    assert array_rel({}, (), TStore())
    heap = (HArr((IntV(1), IntV(2)), INT),)
    store = TStore((ArrCell((VInt(0),)), ArrCell((VInt(1), VInt(2)))))
    assert array_rel({0: 1}, heap, store)
    bad = TStore((ArrCell((VInt(0),)), ArrCell((VInt(1), VInt(3)))))
    assert not array_rel({0: 1}, heap, bad)


@settings(max_examples=100, deadline=None)
@given(st.lists(st.lists(st.integers(-5, 5), max_size=4), max_size=4), st.integers(0, 99))
def test_materialize_relates(cells, seed):
    heap = tuple(HArr(tuple(IntV(i) for i in c), INT) for c in cells)
    store, m = materialize(heap, random.Random(seed))
    assert array_rel(m, heap, store)
    for loc, h in enumerate(heap):
        a = ArrV(len(h.elems), loc, INT)
        assert val_rel(m, a, to_target(m, a))


def test_difftest_91_and_swap():
    p = load_program(CORPUS / "91.sexp")
    v = difftest_method(p, "M", [IntV(0)], 10_000)
    assert v.kind == "Match" and v.outs == ("91",)
    s = load_program(CORPUS / "swap.sexp")
    heap = (HArr((IntV(1), IntV(2)), INT),)
    a = ArrV(2, 0, INT)
    assert difftest_method(s, "Swap", [a, IntV(0), IntV(1)], 1000, heap).kind == "Match"


def test_uninitialized_read_is_source_fail():
    p = normalize(parse_program("(program (method M (ins) (outs (r int)) (requires) (ensures)"
                                " (decreases) (modifies) (body (dec ((t int)) (assign ((r t)))))))"))
    assert difftest_method(p, "M", [], 100).kind == "SourceFail"


def test_flip_add_detected():
    p = load_program(CORPUS / "sum_to_n.sexp")
    r = difftest_program(p, "sum", 10, 1, DiffConfig(target_fuel=20_000), compiler=FlipAdd(),
                         methods=["SumToN"])
    assert r.mismatches


def test_zero_trials():
    r = difftest_corpus(CORPUS, 0, 1)
    assert r.trials == [] and r.ok


def test_report_formats():
    r = difftest_corpus(CORPUS / "91.sexp", 3, 5)
    assert r.ok and "total Match=3" in r.text()
    assert len(r.jsonl().splitlines()) == 3


def test_seeded_runs_repeat():
    a = difftest_corpus(CORPUS / "find.sexp", 5, 9).jsonl()
    assert a == difftest_corpus(CORPUS / "find.sexp", 5, 9).jsonl()


def test_run_contract():
    p = load_program(CORPUS / "91.sexp")
    assert run_contract(p, "M", [IntV(3)], (), 10_000).verdict == "Holds"
    assert run_contract(p, "M", [IntV(3)], (), 5).verdict == "Rtimeout"
    bad = normalize(parse_program((CORPUS / "91.sexp").read_text().replace(" 91 ", " 92 ")))
    assert run_contract(bad, "M", [IntV(3)], (), 10_000).verdict == "EnsuresFalse"
