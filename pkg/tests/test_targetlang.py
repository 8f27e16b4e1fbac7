from minidafny.targetlang import (
    DExn, DLetrec, EMPTY_ENV, RCrash, RRaise, RTimeout, RVal, TApp, TAssign, TBool, TDeref,
    TFun, TIf, TInt, TLet, TPrim, TRaise, TRef, TSeq, TStore, TVar, VBool, VInt, VUnit,
    pretty_decs, sexp_decs, t_evaluate, t_evaluate_decs,
)

STORE = TStore((), 100)


def run(e, store=STORE, env=EMPTY_ENV):
    return t_evaluate(store, env, e)[1]


def test_prim():
    assert run(TPrim("+", TInt(2), TInt(3))) == RVal(VInt(5))
    assert run(TPrim("div", TInt(-7), TInt(2))) == RVal(VInt(-4))
    assert isinstance(run(TPrim("div", TInt(1), TInt(0))), RCrash)


def test_last_write_wins():
    e = TLet("r", TRef(TInt(0)),
             TSeq(TAssign(TVar("r"), TInt(1)),
                  TSeq(TAssign(TVar("r"), TInt(2)), TDeref(TVar("r")))))
    assert run(e) == RVal(VInt(2))


def test_uncaught_return():
    store, env, res = t_evaluate_decs(STORE, EMPTY_ENV, [DExn("Return")])
    assert res == RVal(VUnit())
    assert run(TRaise("Return"), store, env) == RRaise("Return")


def test_mutual_recursion_even_odd():
    def body(other, base):
        return TIf(TPrim("=", TVar("n"), TInt(0)), TBool(base),
                   TApp(TVar(other), TPrim("-", TVar("n"), TInt(1))))
    decs = [DLetrec((("even", "n", body("odd", True)), ("odd", "n", body("even", False))))]
    store, env, res = t_evaluate_decs(STORE, EMPTY_ENV, decs)
    assert run(TApp(TVar("even"), TInt(4)), store, env) == RVal(VBool(True))
    assert run(TApp(TVar("odd"), TInt(4)), store, env) == RVal(VBool(False))


def test_empty_decs():
    store, env, res = t_evaluate_decs(STORE, EMPTY_ENV, [])
    assert env is EMPTY_ENV and res == RVal(VUnit())


def test_application_ticks():
    loop = [DLetrec((("f", "n", TApp(TVar("f"), TVar("n"))),))]
    store, env, _ = t_evaluate_decs(TStore((), 50), EMPTY_ENV, loop)
    assert run(TApp(TVar("f"), TInt(0)), store, env) == RTimeout()
    ident = TApp(TFun("x", TVar("x")), TInt(1))
    assert t_evaluate(TStore((), 5), EMPTY_ENV, ident)[0].clock == 4


def test_printers_cover_decs():
    decs = [DExn("Return"), DLetrec((("f", "n", TVar("n")),))]
    assert "exception Return" in pretty_decs(decs)
    assert sexp_decs(decs).startswith("(")
