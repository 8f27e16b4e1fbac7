import random

from hypothesis import assume, given, settings, strategies as st

from minidafny.ast import Assert, Return, Skip, Then, Var, walk_stmt
from minidafny.frontend import load_program, parse_program, parse_stmt_text
from minidafny.passes import (
    freshen_program, is_fresh_program, method_no_shadow, no_shadow, program_binders,
    remove_assert, remove_assert_stmt,
)
from minidafny.simrel import corpus_files

from conftest import CORPUS

HDR = "(requires) (ensures) (decreases) (modifies)"


def test_remove_assert_stmt():
    assert remove_assert_stmt(Assert(Var("b"))) == Skip()
    assert remove_assert_stmt(Then(Assert(Var("b")), Return())) == Then(Skip(), Return())


def test_remove_assert_identity_without_asserts():
    for f in corpus_files(CORPUS):
        p = load_program(f)
        if not any(isinstance(s, Assert) for m in p.methods for s in walk_stmt(m.body)):
            assert remove_assert(p) == p


def test_two_methods_get_disjoint_names():
    p = parse_program(f"""(program
      (method A (ins) (outs) {HDR} (body (dec ((x int 1)) (return))))
      (method B (ins) (outs) {HDR} (body (dec ((x int 2)) (return)))))""")
    q = freshen_program(p)
    assert is_fresh_program(q)
    names = program_binders(q)
    assert len(names) == len(set(names)) == 2


def test_shadowing_removed():
    s = parse_stmt_text("(dec ((x int 1)) (dec ((x int 2)) (return)))")
    assert not no_shadow(set(), s)
    p = parse_program(f"(program (method A (ins) (outs) {HDR} "
                      "(body (dec ((x int 1)) (dec ((x int 2)) (return))))))")
    q = freshen_program(p)
    assert is_fresh_program(q) and method_no_shadow(q.methods[0])


def test_is_fresh_rejects_source_names():
    p = load_program(CORPUS / "swap.sexp")
    assert not is_fresh_program(p)  # binds temp


def test_freshen_corpus_and_idempotence():
    for f in corpus_files(CORPUS):
        q = freshen_program(load_program(f))
        assert is_fresh_program(q)
        assert all(method_no_shadow(m) for m in q.methods)
        qq = freshen_program(q)
        assert is_fresh_program(qq) and all(method_no_shadow(m) for m in qq.methods)


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**31))
def test_freshen_random_programs(seed):
    from minidafny.randgen import SyntaxGen
    p = SyntaxGen(random.Random(seed)).program()
    for m in p.members:  # freshening assumes well-formed parameter lists
        names = [x for x, _ in m.ins] + [x for x, _ in getattr(m, "outs", ())]
        assume(len(set(names)) == len(names))
    q = freshen_program(p)
    assert is_fresh_program(q)
    assert all(method_no_shadow(m) for m in q.methods)
