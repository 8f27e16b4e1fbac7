import shutil

import pytest
from hypothesis import given, settings, strategies as st

from minidafny.ast import BOOL, INT, ArrT, IntT
from minidafny.frontend import load_program, normalize, parse_exp_text, parse_program
from minidafny.randgen import HELPERS, typed_instances
from minidafny.semantics import BoolV, Env, IntV, Rval, State, evaluate_exp
from minidafny.vcg import method_typing, method_vcg
from minidafny.vccheck import (
    Budget, SolverSpawnError, Unsupported, eval_bool, eval_vc, falsify, smt_check, smt_emit,
)

from conftest import CORPUS
from vc_fixture import INVALID, VALID

Z3 = shutil.which("z3")
needs_z3 = pytest.mark.skipif(Z3 is None, reason="no z3 on PATH")
XY = [("x", INT), ("y", INT)]


def exp(t):
    return parse_exp_text(t)


def test_budget_validation():
    with pytest.raises(ValueError):
        Budget(int_lo=3, int_hi=2)
    with pytest.raises(ValueError):
        Budget(states_max=0)


def test_forall_examples():
    st0 = State(clock=10)
    assert eval_vc(st0, None, exp("(forall (x int) (== (* x 0) 0))")) == Rval(BoolV(True))
    r = falsify([exp("(forall (x int) (< x 100))")], [], Budget(int_lo=-200, int_hi=200))
    cx = r.counterexample
    assert cx is not None and ("forall x", IntV(100)) in cx.trail


def test_setprev_identity():
    st0 = State(clock=10, locals=(("n", IntV(4)),))
    assert eval_bool(st0, None, exp("(setprev (== (prev n) n))")) is True


def test_false_refuted_in_first_state():
    r = falsify([exp("false")], XY)
    assert r.counterexample is not None and r.checked == 1
    assert r.counterexample.state.locals == (("x", IntV(0)), ("y", IntV(0)))


def test_91_bounded_valid_and_mutant_refuted():
    p = load_program(CORPUS / "91.sexp")
    r = falsify(method_vcg(p, "M"), method_typing(p, "M"), Budget(), Env(p), ["r"])
    assert r.bounded_valid and r.checked == Budget().states_max
    bad = normalize(parse_program((CORPUS / "91.sexp").read_text().replace(" 91 ", " 92 ")))
    r = falsify(method_vcg(bad, "M"), method_typing(bad, "M"), Budget(), Env(bad), ["r"])
    n = dict(r.counterexample.state.locals)["n"]
    assert n.i <= 100


@pytest.mark.parametrize("text", VALID)
def test_fixture_valid_not_refuted(text):
    assert falsify([exp(text)], XY).bounded_valid


@pytest.mark.parametrize("text", INVALID)
def test_fixture_invalid_refuted_and_replays(text):
    r = falsify([exp(text)], XY)
    cx = r.counterexample
    assert cx is not None
    # the reported state really falsifies the condition
    assert eval_bool(cx.state, None, exp(text)) is False


@needs_z3
@pytest.mark.parametrize("text,valid", [(t, True) for t in VALID] + [(t, False) for t in INVALID])
def test_solver_agrees_with_falsifier(text, valid):
    (res,) = smt_check([exp(text)], XY, "z3", 10)
    assert res.kind == ("Valid" if valid else "Invalid")


def test_smt_emit_shapes():
    s = smt_emit(exp("true"), [])
    assert "(check-sat)" in s and "(assert (not" in s
    assert "(set-logic LIA)" in s
    s = smt_emit(exp("(>= (* x x) 0)"), XY)
    assert "(set-logic NIA)" in s and "(declare-const |x| Int)" in s


def test_swap_unsupported():
    p = load_program(CORPUS / "swap.sexp")
    (vc,) = method_vcg(p, "Swap")
    with pytest.raises(Unsupported):
        smt_emit(vc, method_typing(p, "Swap"))


@needs_z3
def test_solver_on_91():
    p = load_program(CORPUS / "91.sexp")
    (res,) = smt_check(method_vcg(p, "M"), method_typing(p, "M"), "z3", 10, ["r"])
    assert res.kind == "Valid"
    bad = normalize(parse_program((CORPUS / "91.sexp").read_text().replace(
        "(ite (<= n 100) 91 (- n 10))", "n")))
    (res,) = smt_check(method_vcg(bad, "M"), method_typing(bad, "M"), "z3", 10, ["r"])
    assert res.kind == "Invalid" and res.detail


def test_missing_solver():
    with pytest.raises(SolverSpawnError):
        smt_check([exp("true")], [], "no-such-solver-binary-xyz", 5)


def test_agrees_with_interpreter_on_executable_expressions():
    env = Env(HELPERS)
    for _, e, s in typed_instances(77, 1500, kind="exp"):
        assert eval_vc(s, env, e) == evaluate_exp(s, env, e)[1]


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 1000))
def test_seed_determinism(seed):
    b = Budget(seed=seed, states_max=20)
    vcs = [exp("(==> (> x 3) (> y 2))")]
    a, c = falsify(vcs, XY, b), falsify(vcs, XY, b)
    assert (a.counterexample is None) == (c.counterexample is None)
    if a.counterexample:
        assert a.counterexample.state == c.counterexample.state


def test_heap_conditions_corpus():
    for stem, name in [("fill_zero", "FillZero"), ("reverse", "Reverse"), ("copy_array", "Copy")]:
        p = load_program(CORPUS / f"{stem}.sexp")
        m = next(m for m in p.methods if m.name == name)
        r = falsify(method_vcg(p, name), method_typing(p, name), Budget(states_max=30), Env(p),
                    [x for x, _ in m.outs])
        assert r.bounded_valid, stem


def test_weakened_heap_invariant_refuted():
    text = (CORPUS / "fill_zero.sexp").read_text().replace(
        "(forall (k int) (==> (and (<= 0 k) (< k i)) (== (sel a k) 0))))", "true)")
    p = normalize(parse_program(text))
    r = falsify(method_vcg(p, "FillZero"), method_typing(p, "FillZero"), Budget(), Env(p))
    assert r.counterexample is not None
