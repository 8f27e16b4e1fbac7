import random

import pytest
from hypothesis import given, settings, strategies as st

from minidafny.ast import Method, Old, Program, Return, Then, walk_exp
from minidafny.frontend import (
    ParseError, file_fuel, load_program, normalize, parse_exp_text, parse_program,
    print_exp, print_program,
)
from minidafny.randgen import SyntaxGen
from minidafny.semantics import ArrV, Env, HArr, IntV, State, evaluate_exp

from conftest import CORPUS

SWAP = (CORPUS / "swap.sexp").read_text()


def test_empty_program_round_trip():
    assert parse_program("(program)") == Program(())
    assert print_program(Program(())) == "(program)"


def test_swap_parses():
    p = parse_program(SWAP)
    m = p.methods[0]
    assert m.name == "Swap" and len(m.ins) == 3 and len(m.reqs) == 2
    assert m.mods == ("a",)
    assert any(isinstance(x, Old) for e in m.ens for x in walk_exp(e))


@pytest.mark.parametrize("text", [
    "(program (method))",
    "(program",
    "(program (function f (ins) int))",
    "(program (method M (ins (x int)) (outs) (requires) (ensures) (decreases) (modifies)"
    " (body (let ((y 1) (y 2)) y))))",
    "(program (method M (ins) (outs) (requires) (ensures) (decreases) (modifies)"
    " (body (frobnicate))))",
])
def test_parse_errors(text):
    with pytest.raises(ParseError):
        parse_program(text)


def test_parse_error_has_position():
    with pytest.raises(ParseError) as ei:
        parse_program("(program\n  (method))")
    assert "2" in str(ei.value)


def test_corpus_round_trip_and_fuel_header():
    for f in sorted(CORPUS.glob("*.sexp")):
        p = parse_program(f.read_text())
        assert parse_program(print_program(p)) == p
        assert file_fuel(f) is not None


@settings(max_examples=200, deadline=None)
@given(st.integers(min_value=0, max_value=2**32))
def test_random_program_round_trip(seed):
    p = SyntaxGen(random.Random(seed)).program()
    assert parse_program(print_program(p)) == p


def test_normalize_appends_return():
    p = load_program(CORPUS / "find.sexp")
    body = p.methods[0].body
    assert isinstance(body, Then) and body.s2 == Return()


def test_normalize_leaves_bare_return():
    text = ("(program (method M (ins) (outs) (requires) (ensures) (decreases) (modifies)"
            " (body (return))))")
    p = parse_program(text)
    assert normalize(p) == p


def test_normalize_idempotent_on_corpus():
    for f in sorted(CORPUS.glob("*.sexp")):
        p = load_program(f)
        assert normalize(p) == p


def test_normalize_wraps_params_in_old():
    p = load_program(CORPUS / "swap.sexp")
    first = p.methods[0].ens[0]
    text = print_exp(first)
    assert "(sel (old a) (old i))" in text
    assert "(old (sel (old a) (old j)))" in text


def test_normalized_ensures_agree_with_raw_on_states():
    raw = parse_program(SWAP).methods[0]
    norm = normalize(parse_program(SWAP)).methods[0]
    env = Env(parse_program(SWAP))
    rng = random.Random(3)
    for _ in range(200):
        old = tuple(IntV(rng.randint(-3, 3)) for _ in range(3))
        new = tuple(IntV(rng.randint(-3, 3)) for _ in range(3))
        i, j = rng.randint(0, 2), rng.randint(0, 2)
        heap = (HArr(new, raw.ins[0][1].elem),)
        heap_old = (HArr(old, raw.ins[0][1].elem),)
        frame = (("a", ArrV(3, 0, raw.ins[0][1].elem)), ("i", IntV(i)), ("j", IntV(j)))
        stt = State(clock=100, locals=frame, heap=heap, locals_old=frame, heap_old=heap_old)
        for e1, e2 in zip(raw.ens, norm.ens):
            assert evaluate_exp(stt, env, e1)[1] == evaluate_exp(stt, env, e2)[1]


def test_parse_exp_text():
    e = parse_exp_text("(+ 1 (* x 2))")
    assert print_exp(e) == "(+ 1 (* x 2))"
