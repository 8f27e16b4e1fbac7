import io
import shutil

import pytest

from minidafny import cli
from minidafny.frontend import load_program, normalize, parse_program
from minidafny.vccheck import Budget
from minidafny.vcg import method_vcg

from conftest import CORPUS

Z3 = shutil.which("z3")
HDR = "(requires) (ensures) (decreases) (modifies)"


def run(capsys, *argv):
    code = cli.main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def write(tmp_path, text, name="p.sexp"):
    f = tmp_path / name
    f.write_text(text)
    return f


def main_prog(body, decls=""):
    return f"(program {decls} (method Main (ins) (outs) {HDR} (body {body})))"


def test_parse_echo(capsys):
    code, out, _ = run(capsys, "parse", CORPUS / "91.sexp")
    assert code == 0
    assert parse_program(out) == parse_program((CORPUS / "91.sexp").read_text())


def test_parse_error_exit(capsys, tmp_path):
    code, _, err = run(capsys, "parse", write(tmp_path, "(program (method))"))
    assert code == cli.EXIT_FAILED and err


def test_run_91_main(capsys):
    code, out, _ = run(capsys, "run", CORPUS / "91_main.sexp", "--fuel", 1000)
    lines = out.splitlines()
    assert code == 0 and lines[0] == "Rcont" and "r = 91" in lines


def test_run_swap_main(capsys):
    code, out, _ = run(capsys, "run", CORPUS / "swap.sexp")
    assert code == 0 and "a = [9, 0, 7]" in out


def test_run_failure_and_timeout(capsys, tmp_path):
    code, out, _ = run(capsys, "run", write(tmp_path, main_prog("(assert false)")))
    assert code == cli.EXIT_RFAIL
    loop = "(while true (invariants) (decreases) (modifies) (skip))"
    code, out, _ = run(capsys, "run", write(tmp_path, main_prog(loop)), "--fuel", 50)
    assert code == cli.EXIT_TIMEOUT and "Rtimeout" in out


def test_run_parse_error_is_65(capsys, tmp_path):
    code, _, _ = run(capsys, "run", write(tmp_path, "(program"))
    assert code == cli.EXIT_PARSE


def test_usage_errors(capsys, tmp_path):
    assert run(capsys, "run", tmp_path / "missing.sexp")[0] == cli.EXIT_USAGE
    assert run(capsys, "frobnicate")[0] == cli.EXIT_USAGE
    assert run(capsys, "check", CORPUS / "91.sexp", "--budget-ints", "5..1")[0] == cli.EXIT_USAGE
    assert run(capsys, "run", CORPUS / "91.sexp", "--fuel", "-1")[0] == cli.EXIT_USAGE


def test_compile_outputs(capsys, tmp_path):
    code, out, _ = run(capsys, "compile", CORPUS / "find.sexp")
    assert code == 0 and "exception Return" in out and "handle Return" in out
    target = tmp_path / "find.ml.sexp"
    code, out, _ = run(capsys, "compile", CORPUS / "find.sexp", "--emit", "sexp", "-o", target)
    assert code == 0 and out == "" and target.read_text().startswith("(")


def test_compile_forall_is_70(capsys, tmp_path):
    text = main_prog("(dec ((b bool)) (assign ((b (forall (k int) true)))))")
    assert run(capsys, "compile", write(tmp_path, text))[0] == cli.EXIT_INTERNAL


def test_vcg_blocks(capsys):
    code, out, _ = run(capsys, "vcg", CORPUS / "min_max.sexp")
    assert code == 0
    p = load_program(CORPUS / "min_max.sexp")
    assert out.count("(vc") == sum(len(method_vcg(p, m.name)) for m in p.methods)


def test_check_ok_and_refuted(capsys):
    code, out, _ = run(capsys, "check", CORPUS / "sum_to_n.sexp")
    assert code == 0 and "bounded-valid" in out
    code, out, _ = run(capsys, "check", CORPUS / "divergent.sexp")
    assert code == cli.EXIT_REFUTED and "counterexample" in out


def test_check_vcg_error_is_70(capsys, tmp_path):
    text = (CORPUS / "swap.sexp").read_text().replace("(decreases)\n    (modifies a)",
                                                      "(decreases)\n    (modifies)")
    code, _, err = run(capsys, "check", write(tmp_path, text))
    assert code == cli.EXIT_INTERNAL and "modifies" in err


def test_check_unknown_is_5():
    p = parse_program(f"(program (method M (ins (x int)) (outs) (requires)"
                      " (ensures (forall (k int) (forall (j int) (>= (* k j) (* k j)))))"
                      " (decreases) (modifies) (body (return))))")
    code = cli.check_program(normalize(p), Budget(max_instances=3), out=io.StringIO())
    assert code == cli.EXIT_UNKNOWN


def test_check_missing_solver_is_69(capsys):
    code, _, err = run(capsys, "check", CORPUS / "91.sexp", "--smt-solver", "no-such-solver-xyz")
    assert code == cli.EXIT_NO_SOLVER


@pytest.mark.skipif(Z3 is None, reason="no z3 on PATH")
def test_check_with_solver(capsys):
    code, out, _ = run(capsys, "check", CORPUS / "91.sexp", "--smt-solver", "z3")
    assert code == 0 and "Valid (solver)" in out
    # heap conditions fall back to the falsifier
    code, out, _ = run(capsys, "check", CORPUS / "swap.sexp", "--smt-solver", "z3")
    assert code == 0 and "after solver unsupported" in out


def test_check_deterministic(capsys):
    args = ("check", CORPUS / "find.sexp", "--seed", 3, "--budget-states", 40)
    assert run(capsys, *args) == run(capsys, *args)


def test_wide_budget_flag(capsys):
    code, out, _ = run(capsys, "check", CORPUS / "91.sexp", "--budget-ints=-200..200",
                       "--budget-states", 500)
    assert code == 0 and "bounded-valid (500 states)" in out


def test_difftest(capsys, tmp_path):
    j = tmp_path / "t.jsonl"
    code, out, _ = run(capsys, "difftest", CORPUS / "find.sexp", "--trials", 5, "--seed", 1,
                       "--jsonl", j)
    assert code == 0 and "total Match=5" in out
    assert len(j.read_text().splitlines()) == 5


def test_no_color_when_piped(capsys, monkeypatch):
    monkeypatch.setenv("NO_COLOR", "1")
    _, out, _ = run(capsys, "check", CORPUS / "91.sexp")
    assert "\x1b[" not in out
