from minidafny.ast import (
    Assign, BinOp, BinOpKind, BoolLit, Dec, ExpRhs, IntLit, INT, Skip, Var, VarLhs, conj,
    conjuncts, member_lookup, assigned_locals,
)
from minidafny.frontend import load_program, parse_stmt_text

from conftest import CORPUS


def test_conj_shapes():
    a, b, c = Var("a"), Var("b"), Var("c")
    assert conj([]) == BoolLit(True)
    assert conj([a]) == a
    assert conj([a, b, c]) == BinOp(BinOpKind.AND, a, BinOp(BinOpKind.AND, b, c))
    assert conjuncts(conj([a, b, c])) == [a, b, c]


def test_assigned_locals_skip_and_loop_body():
    assert assigned_locals(Skip()) == frozenset()
    body = parse_stmt_text("(then (assign ((sum (+ sum i)))) (assign ((i (+ i 1)))))")
    assert assigned_locals(body) == {"sum", "i"}


def test_assigned_locals_excludes_declared():
    s = Dec((("x", INT, None),), Assign(((VarLhs("x"), ExpRhs(IntLit(1))),)))
    assert assigned_locals(s) == frozenset()


def test_assigned_locals_ignores_array_cells_but_counts_calls():
    s = parse_stmt_text("(then (assign (((sel a 0) 1))) (metcall (r q) F (a)))")
    assert assigned_locals(s) == {"r", "q"}


def test_member_lookup():
    p = load_program(CORPUS / "find.sexp")
    assert member_lookup(p, "Find").name == "Find"
    assert member_lookup(p, "Missing") is None
