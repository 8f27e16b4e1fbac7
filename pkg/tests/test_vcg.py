import pytest

from minidafny.ast import (
    BOOL, INT, ArrT, BinOp, BinOpKind, ForallHeap, Forall, IntT, Let, Old, SetPrev, Var,
    walk_exp,
)
from minidafny.frontend import (
    load_program, normalize, parse_exp_text, parse_program, parse_stmt_text, print_exp,
)
from minidafny.vcg import (
    TypeCheckError, VcInput, VcgError, get_types, method_levels, method_typing, method_vcg,
    program_vcg, stmt_vcg,
)

from conftest import CORPUS

HDR = "(decreases) (modifies)"


def prog(text):
    return normalize(parse_program(text))


def wp(stmt, post, ls, ens=()):
    return stmt_vcg(VcInput({}, parse_stmt_text(stmt), [parse_exp_text(p) for p in post],
                            [parse_exp_text(e) for e in ens], [], [], ls))


def test_get_types():
    assert get_types([("n", INT)], [parse_exp_text("(<= n 100)")]) == [BOOL]
    assert get_types([("a", ArrT(IntT())), ("i", INT)], [parse_exp_text("(sel a i)")]) == [INT]
    with pytest.raises(TypeCheckError):
        get_types([], [Var("missing")])


def test_levels():
    assert method_levels(load_program(CORPUS / "91.sexp")) == {"M": 0}
    lv = method_levels(load_program(CORPUS / "91_main.sexp"))
    assert lv["M"] < lv["Main"]
    lv = method_levels(load_program(CORPUS / "even_odd.sexp"))
    assert lv["IsEven"] == lv["IsOdd"]


def test_return_skip_assert():
    ls = [("x", INT)]
    assert wp("(return)", ["false"], ls, ens=["(> x 0)"]) == [parse_exp_text("(> x 0)")]
    assert wp("(skip)", ["(> x 0)"], ls) == [parse_exp_text("(> x 0)")]
    assert wp("(assert (> x 1))", ["(> x 0)"], ls) == [parse_exp_text("(> x 1)"),
                                                      parse_exp_text("(> x 0)")]
    with pytest.raises(TypeCheckError):
        wp("(assert x)", ["true"], ls)


def test_assignments_become_lets():
    ls = [(n, INT) for n in "abcxy"]
    (vc,) = wp("(then (assign ((b (+ (+ a a) a)))) (assign ((x (+ (+ b b) b)) (y c))))",
               ["(< x y)"], ls)
    assert vc == parse_exp_text("(let ((b (+ (+ a a) a))) (let ((x (+ (+ b b) b)) (y c)) (< x y)))")


def test_loop_quantifies_only_modified_locals():
    p = load_program(CORPUS / "sum_to_n.sexp")
    (vc,) = method_vcg(p, "SumToN")
    bounds = {x.bound for x in walk_exp(vc) if isinstance(x, Forall)}
    assert bounds == {"sum", "i"}


def test_trivial_method():
    p = prog(f"(program (method M (ins (x int)) (outs) (requires) (ensures true) {HDR}"
             " (body (return))))")
    (vc,) = method_vcg(p, "M")
    assert vc == parse_exp_text("true")


def test_swap_update_frames():
    p = load_program(CORPUS / "swap.sexp")
    (vc,) = method_vcg(p, "Swap")
    frames = [x for x in walk_exp(vc) if isinstance(x, SetPrev) and isinstance(x.e, ForallHeap)]
    assert len(frames) == 2
    text = print_exp(vc)
    assert "(< i (len a))" in text and "(< j (len a))" in text


def test_91_call_fragment():
    (vc,) = method_vcg(load_program(CORPUS / "91.sexp"), "M")
    assert "(< (let ((n (+ n 11))) (- 111 n)) (old (- 111 n)))" in print_exp(vc)


def test_program_vcg():
    out = program_vcg(load_program(CORPUS / "91.sexp"))
    assert [name for name, _ in out.entries] == ["M"] and out.entries[0][1]
    assert program_vcg(parse_program("(program)")).entries == []
    dup = prog(f"""(program
      (method M (ins) (outs) (requires) (ensures) {HDR} (body (return)))
      (method M (ins) (outs) (requires) (ensures) {HDR} (body (return))))""")
    with pytest.raises(VcgError):
        program_vcg(dup)


def test_functions_are_skipped_with_warning():
    p = prog("(program (function f (ins (k int)) int k))")
    out = program_vcg(p)
    assert out.entries == [] and out.warnings


def test_missing_modifies_rejected():
    text = (CORPUS / "swap.sexp").read_text().replace("(decreases)\n    (modifies a)",
                                                      "(decreases)\n    (modifies)")
    with pytest.raises(VcgError):
        method_vcg(prog(text), "Swap")


def test_shadowing_dec_rejected():
    p = prog(f"(program (method M (ins (x int)) (outs) (requires) (ensures) {HDR}"
             " (body (dec ((x int 1)) (return)))))")
    with pytest.raises(VcgError):
        method_vcg(p, "M")


def test_typing_is_ins_then_outs():
    p = load_program(CORPUS / "min_max.sexp")
    names = [x for x, _ in method_typing(p, "MinMax")]
    m = p.methods[0]
    assert names == [x for x, _ in m.ins] + [x for x, _ in m.outs]


def test_every_corpus_method_has_conditions():
    for f in sorted(CORPUS.glob("*.sexp")):
        out = program_vcg(load_program(f))
        assert all(vcs for _, vcs in out.entries), f.stem
