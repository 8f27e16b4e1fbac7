"""Compile the Dafny subset to MLCore.

Variables become references, arrays become ``(length, array)`` pairs, loops
become local tail-recursive functions and ``return`` raises an exception
caught at the method boundary. The small hook methods on ``Compiler`` exist
so that tests can build deliberately broken compilers.
"""

from __future__ import annotations

import itertools
from typing import Sequence

from .ast import (
    ArrAllocRhs, ArrLen, ArrSel, ArrSelLhs, ArrT, Assert, Assign, BinOp, BinOpKind,
    BoolLit, BoolT, Dec, DType, Exp, ExpRhs, Forall, ForallHeap, FunCall, Function, If,
    IntLit, IntT, Ite, Let, MetCall, Method, Old, OldHeap, Prev, PrevHeap, Program,
    Return, SetPrev, Skip, Stmt, StrLit, StrT, Then, UnOp, UnOpKind, Var, VarLhs, While,
)
from .passes import freshen_program, remove_assert
from .targetlang import (
    DExn, DLet, DLetrec, TApp, TArrAlloc, TArrSub, TArrUpd, TAssign, TBool, TDec,
    TDeref, TExp, TFun, THandle, TIf, TInt, TLet, TLetrec, TPrim, TPrimNeg, TPrimNot, TProj,
    TRaise, TRef, TSeq, TStr, TTuple, TUnit, TVar, tapp,
)


class CompileError(Exception):
    pass


RETURN_EXN = "Return"
UNIT_PARAM = "u"

_PRIM = {
    BinOpKind.ADD: "+", BinOpKind.SUB: "-", BinOpKind.MUL: "*", BinOpKind.DIV: "div",
    BinOpKind.MOD: "mod", BinOpKind.LT: "<", BinOpKind.LE: "<=", BinOpKind.GT: ">",
    BinOpKind.GE: ">=", BinOpKind.EQ: "=",
}


def target_name(name: str) -> str:
    return "dfy_" + name


def seq_all(es: Sequence[TExp]) -> TExp:
    if not es:
        return TUnit()
    out = es[-1]
    for e in reversed(es[:-1]):
        out = TSeq(e, out)
    return out


class Compiler:
    def __init__(self):
        self.temps = itertools.count()
        self.loops = itertools.count()

    def temp(self) -> str:
        return f"t{next(self.temps)}"

    # -- hooks

    def binop(self, op: BinOpKind, a: TExp, b: TExp) -> TExp:
        if op is BinOpKind.NEQ:
            return TPrimNot(TPrim("=", a, b))
        return TPrim(_PRIM[op], a, b)

    def call_args(self, args: Sequence[TExp]) -> list[TExp]:
        """Argument order of a curried call: the last argument is applied first."""
        return list(reversed(args))

    def param_order(self, names: Sequence[str]) -> list[str]:
        return list(reversed(names))

    def arr_len(self, a: TExp) -> TExp:
        return TProj(0, a)

    def arr_data(self, a: TExp) -> TExp:
        return TProj(1, a)

    def wrap_body(self, body: TExp, result: TExp) -> TExp:
        return THandle(body, RETURN_EXN, result)

    # -- expressions

    def default(self, t: DType) -> TExp:
        if isinstance(t, IntT):
            return TInt(0)
        if isinstance(t, BoolT):
            return TBool(False)
        if isinstance(t, StrT):
            return TStr("")
        return TTuple((TInt(0), TArrAlloc(TInt(0), TInt(0))))

    def call(self, name: str, args: Sequence[TExp]) -> TExp:
        args = self.call_args(args)
        return tapp(TVar(target_name(name)), *(args or [TUnit()]))

    def exp(self, e: Exp) -> TExp:
        match e:
            case IntLit(i):
                return TInt(i)
            case BoolLit(b):
                return TBool(b)
            case StrLit(s):
                return TStr(s)
            case Var(x):
                return TDeref(TVar(x))
            case UnOp(UnOpKind.NOT, a):
                return TPrimNot(self.exp(a))
            case UnOp(UnOpKind.NEG, a):
                return TPrimNeg(self.exp(a))
            case BinOp(BinOpKind.AND, a, b):
                return TIf(self.exp(a), self.exp(b), TBool(False))
            case BinOp(BinOpKind.OR, a, b):
                return TIf(self.exp(a), TBool(True), self.exp(b))
            case BinOp(BinOpKind.IMP, a, b):
                return TIf(self.exp(a), self.exp(b), TBool(True))
            case BinOp(op, a, b):
                return self.binop(op, self.exp(a), self.exp(b))
            case Ite(c, t, f):
                return TIf(self.exp(c), self.exp(t), self.exp(f))
            case ArrLen(a):
                return self.arr_len(self.exp(a))
            case ArrSel(a, i):
                return TArrSub(self.arr_data(self.exp(a)), self.exp(i))
            case FunCall(f, args):
                return self.call(f, [self.exp(a) for a in args])
            case Let(binds, body):
                temps = [self.temp() for _ in binds]
                out = self.exp(body)
                for (x, _), t in reversed(list(zip(binds, temps))):
                    out = TLet(x, TRef(TVar(t)), out)
                for (_, r), t in reversed(list(zip(binds, temps))):
                    out = TLet(t, self.exp(r), out)
                return out
            case Forall() | ForallHeap():
                raise CompileError("cannot compile a quantifier")
            case Old() | OldHeap() | Prev() | PrevHeap() | SetPrev():
                raise CompileError(f"cannot compile verification-only expression {type(e).__name__}")
        raise CompileError(f"unknown expression {e!r}")

    # -- statements

    def stmt(self, s: Stmt) -> TExp:
        match s:
            case Skip():
                return TUnit()
            case Return():
                return TRaise(RETURN_EXN)
            case Then(a, b):
                return TSeq(self.stmt(a), self.stmt(b))
            case If(g, a, b):
                return TIf(self.exp(g), self.stmt(a), self.stmt(b))
            case Assert():
                raise CompileError("assert reached the compiler; run remove_assert first")
            case Dec(binds, scope):
                inits = [TAssign(TVar(x), self.exp(init)) for x, _, init in binds if init is not None]
                out = seq_all(inits + [self.stmt(scope)])
                for x, _, _ in reversed(binds):
                    out = TLet(x, TRef(TInt(0)), out)
                return out
            case Assign(pairs):
                return self.assign(pairs)
            case While(g, _, _, _, body):
                loop = f"loop{next(self.loops)}"
                again = TApp(TVar(loop), TUnit())
                fn = TIf(self.exp(g), TSeq(self.stmt(body), again), TUnit())
                return TLetrec(((loop, UNIT_PARAM, fn),), TApp(TVar(loop), TUnit()))
            case MetCall(lhss, f, args):
                call = self.call(f, [self.exp(a) for a in args])
                if not lhss:
                    return call
                if len(lhss) == 1:
                    t = self.temp()
                    return TLet(t, call, TAssign(TVar(lhss[0]), TVar(t)))
                res = self.temp()
                temps = [self.temp() for _ in lhss]
                out = seq_all([TAssign(TVar(x), TVar(t)) for x, t in zip(lhss, temps)])
                for k, t in reversed(list(enumerate(temps))):
                    out = TLet(t, TProj(k, TVar(res)), out)
                return TLet(res, call, out)
        raise CompileError(f"unknown statement {s!r}")

    def assign(self, pairs) -> TExp:
        temps = [self.temp() for _ in pairs]
        writes = []
        for (lhs, _), t in zip(pairs, temps):
            if isinstance(lhs, VarLhs):
                writes.append(TAssign(TVar(lhs.name), TVar(t)))
            else:
                writes.append(TArrUpd(self.arr_data(self.exp(lhs.arr)), self.exp(lhs.idx), TVar(t)))
        out = seq_all(writes)
        for (_, rhs), t in reversed(list(zip(pairs, temps))):
            out = TLet(t, self.rhs(rhs), out)
        return out

    def rhs(self, rhs) -> TExp:
        if isinstance(rhs, ExpRhs):
            return self.exp(rhs.e)
        n = self.temp()
        return TLet(n, self.exp(rhs.len),
                    TTuple((TVar(n), TArrAlloc(TVar(n), self.default(rhs.elem_ty)))))

    # -- members

    def params(self, names: Sequence[str], body: TExp) -> tuple[str, TExp]:
        """Curried parameter list; returns (first param, body under the rest)."""
        for x in reversed(names):
            body = TLet(x, TRef(TVar(x)), body)
        order = self.param_order(names)
        if not order:
            return UNIT_PARAM, body
        for x in reversed(order[1:]):
            body = TFun(x, body)
        return order[0], body

    def method(self, m: Method) -> tuple[str, str, TExp]:
        self.temps = itertools.count()
        self.loops = itertools.count()
        outs = [x for x, _ in m.outs]
        if not outs:
            result: TExp = TUnit()
        elif len(outs) == 1:
            result = TDeref(TVar(outs[0]))
        else:
            result = TTuple(tuple(TDeref(TVar(x)) for x in outs))
        body = self.wrap_body(self.stmt(m.body), result)
        for x in reversed(outs):
            body = TLet(x, TRef(TInt(0)), body)
        param, body = self.params([x for x, _ in m.ins], body)
        return target_name(m.name), param, body

    def function(self, f: Function) -> tuple[str, str, TExp]:
        self.temps = itertools.count()
        param, body = self.params([x for x, _ in f.ins], self.exp(f.body))
        return target_name(f.name), param, body

    def program(self, p: Program, entry: bool = True) -> list[TDec]:
        defs = []
        for m in p.members:
            defs.append(self.method(m) if isinstance(m, Method) else self.function(m))
        decs: list[TDec] = [DExn(RETURN_EXN)]
        if defs:
            decs.append(DLetrec(tuple(defs)))
        main = next((m for m in p.members if m.name == "Main"), None)
        if entry and isinstance(main, Method) and not main.ins:
            decs.append(DLet("_", TApp(TVar(target_name("Main")), TUnit())))
        return decs


def prepare(p: Program) -> Program:
    """The source passes of the pipeline: drop asserts, then freshen."""
    return freshen_program(remove_assert(p))


def compile_program(p: Program, entry: bool = True, compiler: Compiler | None = None) -> list[TDec]:
    return (compiler or Compiler()).program(prepare(p), entry=entry)


compile = compile_program


def from_exp(e: Exp) -> TExp:
    return Compiler().exp(e)


def from_stmt(s: Stmt) -> TExp:
    return Compiler().stmt(s)
