import dataclasses

import pytest

from minidafny.ast import ArrLen, ArrSel, BinOp, BinOpKind, Forall, INT, Var, IntLit, FunCall
from minidafny.compiler import CompileError, compile, compile_program, from_exp, from_stmt
from minidafny.frontend import load_program, parse_program, parse_stmt_text
from minidafny.targetlang import (
    DLetrec, TApp, TArrSub, TDeref, THandle, TInt, TLet, TLetrec, TPrim, TProj, TRaise, TRef,
    TSeq, TTuple, TUnit, TVar,
)

from conftest import CORPUS


def nodes(x):
    yield x
    if dataclasses.is_dataclass(x):
        for f in dataclasses.fields(x):
            yield from nodes(getattr(x, f.name))
    elif isinstance(x, tuple):
        for y in x:
            yield from nodes(y)


def method_body(decs, name):
    (d,) = [d for d in decs if isinstance(d, DLetrec) and d.defs[0][0] == f"dfy_{name}"]
    return d.defs[0]


def test_expression_schemes():
    assert from_exp(ArrLen(Var("a"))) == TProj(0, TDeref(TVar("a")))
    assert from_exp(ArrSel(Var("a"), Var("i"))) == TArrSub(TProj(1, TDeref(TVar("a"))),
                                                           TDeref(TVar("i")))
    assert from_exp(BinOp(BinOpKind.ADD, Var("i"), IntLit(1))) == TPrim(
        "+", TDeref(TVar("i")), TInt(1))


def test_function_call_args_reversed():
    e = from_exp(FunCall("f", (IntLit(1), IntLit(2))))
    assert e == TApp(TApp(TVar("dfy_f"), TInt(2)), TInt(1))


def test_find_shape():
    decs = compile_program(load_program(CORPUS / "find.sexp"), entry=False)
    _, _, body = method_body(decs, "Find")
    all_nodes = list(nodes(body))
    refs = [n for n in all_nodes if isinstance(n, TLet) and isinstance(n.rhs, TRef)]
    assert len(refs) == 3  # two params and the out
    assert any(n.rhs == TRef(TInt(0)) for n in refs)
    handlers = [n for n in all_nodes if isinstance(n, THandle)]
    assert len(handlers) == 1 and isinstance(handlers[0].handler, TDeref)
    assert isinstance(handlers[0].e, TSeq) and handlers[0].e.e2 == TRaise("Return")
    assert any(isinstance(n, TLetrec) for n in all_nodes)


def test_zero_outs_handler_returns_unit():
    decs = compile_program(load_program(CORPUS / "swap.sexp"), entry=False)
    _, _, body = method_body(decs, "Swap")
    (h,) = [n for n in nodes(body) if isinstance(n, THandle)]
    assert h.handler == TUnit()


def test_call_binds_temp_with_reversed_args():
    s = parse_stmt_text("(metcall (idx) Find (a key))")
    e = from_stmt(s)
    assert isinstance(e, TLet)
    call = e.rhs
    assert call == TApp(TApp(TVar("dfy_Find"), TDeref(TVar("key"))), TDeref(TVar("a")))


def test_two_outs_destructure():
    e = from_stmt(parse_stmt_text("(metcall (mn mx) MinMax (a))"))
    projs = [n for n in nodes(e) if isinstance(n, TProj)]
    assert sorted(p.i for p in projs) == [0, 1]


def test_forall_rejected():
    p = parse_program("(program (method M (ins) (outs (b bool)) (requires) (ensures) (decreases)"
                      " (modifies) (body (assign ((b (forall (k int) true)))))))")
    with pytest.raises(CompileError):
        compile_program(p)


def test_entry_point_and_alias():
    p = load_program(CORPUS / "91_main.sexp")
    assert compile(p)[-1] == compile_program(p)[-1]
    assert len(compile_program(p)) == len(compile_program(p, entry=False)) + 1
