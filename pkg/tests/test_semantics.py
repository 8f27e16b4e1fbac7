from dataclasses import replace

from hypothesis import given, settings, strategies as st

from minidafny.ast import BinOpKind, BoolT, IntT, StrT, ArrT, UnOpKind, INT
from minidafny.frontend import load_program, parse_exp_text, parse_program, parse_stmt_text
from minidafny.randgen import HELPERS, typed_instances
from minidafny.semantics import (
    ArrV, BoolV, Env, HArr, IntV, RCONT, RET, Rcont, Rerr, Rfail, Rstop, Rtimeout, Rval, Serr,
    StrV, State, STOP_FAIL, default_value, do_binop, do_uop, euclid_divmod, evaluate_exp,
    evaluate_program, evaluate_stmt, invoke_method, run_main,
)

from conftest import CORPUS

ENV = Env(HELPERS)
FAIL = Rerr(Rfail())


def ev(text, locals_=(), heap=(), clock=100, env=ENV, **kw):
    st0 = State(clock=clock, locals=tuple(locals_), heap=tuple(heap), **kw)
    return evaluate_exp(st0, env, parse_exp_text(text))


def ex(text, locals_=(), heap=(), clock=100, env=ENV):
    st0 = State(clock=clock, locals=tuple(locals_), heap=tuple(heap))
    return evaluate_stmt(st0, env, parse_stmt_text(text))


def test_unary_ops():
    assert do_uop(UnOpKind.NOT, BoolV(True)) == BoolV(False)
    assert do_uop(UnOpKind.NEG, IntV(7)) == IntV(-7)
    assert do_uop(UnOpKind.NOT, IntV(3)) is None


def test_binary_ops():
    assert do_binop(BinOpKind.DIV, IntV(7), IntV(2)) == IntV(3)
    assert do_binop(BinOpKind.DIV, IntV(-7), IntV(2)) == IntV(-4)
    assert do_binop(BinOpKind.MOD, IntV(-7), IntV(2)) == IntV(1)
    assert do_binop(BinOpKind.DIV, IntV(1), IntV(0)) is None
    assert do_binop(BinOpKind.ADD, IntV(1), BoolV(True)) is None
    assert do_binop(BinOpKind.EQ, StrV("a"), StrV("a")) == BoolV(True)


@given(st.integers(-10**6, 10**6), st.integers(-10**4, 10**4).filter(bool))
def test_euclidean_identity(a, b):
    q, r = euclid_divmod(a, b)
    assert a == b * q + r and 0 <= r < abs(b)


def test_default_values():
    assert default_value(IntT()) == IntV(0)
    assert default_value(BoolT()) == BoolV(False)
    assert default_value(StrT()) == StrV("")
    arr = default_value(ArrT(IntT()))
    assert arr == ArrV(0, 0, IntT())
    st0 = State(clock=10, locals=(("a", arr),))
    assert evaluate_exp(st0, ENV, parse_exp_text("(sel a 0)"))[1] == FAIL


def test_comparison_and_short_circuit():
    st0, r = ev("(<= n 100)", [("n", IntV(5))])
    assert r == Rval(BoolV(True)) and st0.clock == 100
    assert ev("(== (div 1 0) 0)")[1] == FAIL
    assert ev("(and false (== (div 1 0) 0))")[1] == Rval(BoolV(False))
    assert ev("(or true (== (div 1 0) 0))")[1] == Rval(BoolV(True))
    assert ev("(==> false (== (div 1 0) 0))")[1] == Rval(BoolV(True))


def test_old_reads_old_heap():
    a = ArrV(2, 0, INT)
    locs = [("a", a), ("j", IntV(1))]
    _, r = ev("(sel (old a) (old j))", locs, heap=[HArr((IntV(9), IntV(9)), INT)],
              locals_old=tuple(locs), heap_old=(HArr((IntV(1), IntV(2)), INT),))
    assert r == Rval(IntV(9))  # sel itself reads the current heap
    _, r = ev("(old (sel a j))", locs, heap=[HArr((IntV(9), IntV(9)), INT)],
              locals_old=tuple(locs), heap_old=(HArr((IntV(1), IntV(2)), INT),))
    assert r == Rval(IntV(2))


def test_let_is_simultaneous():
    _, r = ev("(let ((x y) (y x)) (- x y))", [("x", IntV(1)), ("y", IntV(5))])
    assert r == Rval(IntV(4))


def test_function_call_ticks_and_times_out():
    st1, r = ev("(call inc 4)", clock=10)
    assert r == Rval(IntV(5)) and st1.clock < 10
    _, r = ev("(call spin 0)", clock=50)
    assert r == Rerr(Rtimeout())


def test_forall_is_not_executable():
    assert ev("(forall (k int) true)")[1] == FAIL


def test_stmt_basics():
    assert ex("(skip)")[1] == RCONT
    assert ex("(return)")[1] == RET
    assert ex("(assert false)")[1] == STOP_FAIL
    assert ex("(assert true)")[1] == RCONT
    assert ex("(if 1 (skip) (skip))")[1] == STOP_FAIL
    assert ex("(then (return) (assert false))")[1] == RET


def test_parallel_swap():
    st1, r = ex("(assign ((x y) (y x)))", [("x", IntV(1)), ("y", IntV(2))])
    assert r == RCONT and st1.locals == (("x", IntV(2)), ("y", IntV(1)))


def test_assign_requires_declared():
    assert ex("(assign ((zz 1)))")[1] == STOP_FAIL


def test_alloc_and_negative_length():
    st1, r = ex("(assign ((a (alloc int 3))))", [("a", None)])
    assert r == RCONT and st1.heap == (HArr((IntV(0),) * 3, INT),)
    assert ex("(assign ((a (alloc int -1))))", [("a", None)])[1] == STOP_FAIL


def test_array_bounds():
    a = ArrV(2, 0, INT)
    h = [HArr((IntV(1), IntV(2)), INT)]
    st1, r = ex("(assign (((sel a 1) 7)))", [("a", a)], h)
    assert r == RCONT and st1.heap[0].elems == (IntV(1), IntV(7))
    assert ex("(assign (((sel a 2) 7)))", [("a", a)], h)[1] == STOP_FAIL


def test_dec_pops_even_on_stop():
    st1, r = ex("(dec ((t int 1)) (return))", [("x", IntV(0))])
    assert r == RET and st1.locals == (("x", IntV(0)),)


def test_while_needs_clock():
    loop = "(while (< i 3) (invariants) (decreases) (modifies) (assign ((i (+ i 1)))))"
    st1, r = ex(loop, [("i", IntV(0))], clock=100)
    assert r == RCONT and st1.locals == (("i", IntV(3)),)
    assert ex(loop, [("i", IntV(0))], clock=2)[1] == Rstop(Serr(Rtimeout()))
    assert ex("(while 3 (invariants) (decreases) (modifies) (skip))")[1] == STOP_FAIL


def test_mccarthy_91_calls():
    p = load_program(CORPUS / "91.sexp")
    for n, want in [(0, 91), (150, 140)]:
        st1 = State(clock=1000, locals=(("r", None),))
        st2, r = evaluate_stmt(st1, Env(p), parse_stmt_text(f"(metcall (r) M ({n}))"))
        assert r == RCONT and st2.locals == (("r", IntV(want)),)


def test_call_restores_caller_and_keeps_heap():
    p = load_program(CORPUS / "swap.sexp")
    a = ArrV(2, 0, INT)
    st0 = State(clock=100, locals=(("a", a),), heap=(HArr((IntV(1), IntV(2)), INT),),
                locals_old=(("zz", IntV(0)),))
    st1, r, outs, _ = invoke_method(st0, Env(p), "Swap", [a, IntV(0), IntV(1)])
    assert r == RCONT and outs == []
    assert st1.locals == st0.locals and st1.locals_old == st0.locals_old
    assert st1.heap[0].elems == (IntV(2), IntV(1))


def test_body_falling_off_end_fails():
    p = parse_program("(program (method M (ins) (outs) (requires) (ensures) (decreases)"
                      " (modifies) (body (skip))))")
    assert invoke_method(State(clock=10), Env(p), "M", [])[1] == STOP_FAIL


def test_program_level():
    dup = parse_program("""(program
      (method M (ins) (outs) (requires) (ensures) (decreases) (modifies) (body (return)))
      (method M (ins) (outs) (requires) (ensures) (decreases) (modifies) (body (return))))""")
    assert evaluate_program(100, dup)[1] == STOP_FAIL
    ok = parse_program("(program (method Main (ins) (outs) (requires) (ensures) (decreases)"
                       " (modifies) (body (return))))")
    assert evaluate_program(100, ok)[1] == RCONT
    assert evaluate_program(100, parse_program("(program)"))[1] == STOP_FAIL


def test_run_main_frame():
    st1, r, frame = run_main(1000, load_program(CORPUS / "91_main.sexp"))
    assert r == RCONT and ("r", IntV(91)) in frame


def _timeout(r):
    return r in (Rerr(Rtimeout()), Rstop(Serr(Rtimeout())))


@settings(max_examples=300, deadline=None)
@given(st.integers(0, 2**31), st.integers(1, 50))
def test_fuel_laws(seed, extra):
    ((kind, node, s0),) = typed_instances(seed, 1)
    ev_ = evaluate_exp if kind == "exp" else evaluate_stmt
    s1, r1 = ev_(s0, ENV, node)
    assert ev_(s0, ENV, node) == (s1, r1)
    assert s1.clock <= s0.clock
    if kind == "exp":
        assert s1 == replace(s0, clock=s1.clock)
    if not _timeout(r1):
        s2, r2 = ev_(replace(s0, clock=s0.clock + extra), ENV, node)
        assert r2 == r1 and s2 == replace(s1, clock=s1.clock + extra)
