"""MLCore: a small ML-style core language with refs, arrays, tuples and exceptions.

Application spines, tuples and primitive operands evaluate right to left.
The clock is charged once per application. Tail positions (if branches,
sequence tails, let bodies, handler bodies, applied function bodies) are
run by iteration, so tail-recursive loops use constant host stack.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

from .semantics import euclid_divmod


# ------------------------------------------------------------ syntax


@dataclass(frozen=True)
class TInt:
    i: int


@dataclass(frozen=True)
class TBool:
    b: bool


@dataclass(frozen=True)
class TStr:
    s: str


@dataclass(frozen=True)
class TUnit:
    pass


@dataclass(frozen=True)
class TVar:
    name: str


@dataclass(frozen=True)
class TApp:
    fn: "TExp"
    arg: "TExp"


@dataclass(frozen=True)
class TFun:
    param: str
    body: "TExp"


@dataclass(frozen=True)
class TLetrec:
    defs: tuple[tuple[str, str, "TExp"], ...]
    scope: "TExp"


@dataclass(frozen=True)
class TLet:
    name: str
    rhs: "TExp"
    body: "TExp"


@dataclass(frozen=True)
class TIf:
    c: "TExp"
    t: "TExp"
    e: "TExp"


@dataclass(frozen=True)
class TSeq:
    e1: "TExp"
    e2: "TExp"


@dataclass(frozen=True)
class TRef:
    e: "TExp"


@dataclass(frozen=True)
class TDeref:
    e: "TExp"


@dataclass(frozen=True)
class TAssign:
    lhs: "TExp"
    rhs: "TExp"


@dataclass(frozen=True)
class TArrAlloc:
    len: "TExp"
    init: "TExp"


@dataclass(frozen=True)
class TArrSub:
    arr: "TExp"
    idx: "TExp"


@dataclass(frozen=True)
class TArrUpd:
    arr: "TExp"
    idx: "TExp"
    v: "TExp"


@dataclass(frozen=True)
class TTuple:
    es: tuple["TExp", ...]


@dataclass(frozen=True)
class TProj:
    i: int
    e: "TExp"


@dataclass(frozen=True)
class TRaise:
    exn: str


@dataclass(frozen=True)
class THandle:
    e: "TExp"
    exn: str
    handler: "TExp"


@dataclass(frozen=True)
class TPrim:
    op: str
    e1: "TExp"
    e2: "TExp"


@dataclass(frozen=True)
class TPrimNeg:
    e: "TExp"


@dataclass(frozen=True)
class TPrimNot:
    e: "TExp"


TExp = Union[TInt, TBool, TStr, TUnit, TVar, TApp, TFun, TLetrec, TLet, TIf, TSeq, TRef,
             TDeref, TAssign, TArrAlloc, TArrSub, TArrUpd, TTuple, TProj, TRaise, THandle,
             TPrim, TPrimNeg, TPrimNot]

PRIM_OPS = ("+", "-", "*", "div", "mod", "<", "<=", ">", ">=", "=")


@dataclass(frozen=True)
class DExn:
    name: str


@dataclass(frozen=True)
class DLetrec:
    defs: tuple[tuple[str, str, TExp], ...]


@dataclass(frozen=True)
class DLet:
    name: str
    e: TExp


TDec = Union[DExn, DLetrec, DLet]


def tapp(fn: TExp, *args: TExp) -> TExp:
    """Curried application ``fn a1 a2 ...``."""
    for a in args:
        fn = TApp(fn, a)
    return fn


# ------------------------------------------------------------ values


@dataclass(frozen=True)
class VInt:
    i: int


@dataclass(frozen=True)
class VBool:
    b: bool


@dataclass(frozen=True)
class VStr:
    s: str


@dataclass(frozen=True)
class VUnit:
    pass


@dataclass(frozen=True)
class VLoc:
    loc: int


@dataclass(frozen=True)
class VTuple:
    vs: tuple["TVal", ...]


@dataclass(frozen=True, eq=False)
class VClosure:
    env: "TEnv"
    param: str
    body: TExp


@dataclass(frozen=True, eq=False)
class VRecClosure:
    env: "TEnv"
    defs: tuple[tuple[str, str, TExp], ...]
    fname: str


@dataclass(frozen=True)
class VExn:
    name: str


TVal = Union[VInt, VBool, VStr, VUnit, VLoc, VTuple, VClosure, VRecClosure, VExn]
UNIT = VUnit()


@dataclass(frozen=True)
class RefCell:
    v: TVal


@dataclass(frozen=True)
class ArrCell:
    vs: tuple[TVal, ...]


@dataclass(frozen=True)
class TStore:
    cells: tuple[Union[RefCell, ArrCell], ...] = ()
    clock: int = 0


@dataclass(frozen=True)
class RVal:
    v: TVal


@dataclass(frozen=True)
class RRaise:
    exn: str


@dataclass(frozen=True)
class RTimeout:
    pass


@dataclass(frozen=True)
class RCrash:
    msg: str = field(default="", compare=False)


TRes = Union[RVal, RRaise, RTimeout, RCrash]


# -------------------------------------------------------- environments


class TEnv:
    """Persistent environment: a chain of single bindings and letrec frames."""

    __slots__ = ("name", "val", "defs", "parent")

    def __init__(self, name=None, val=None, defs=None, parent=None):
        self.name = name
        self.val = val
        self.defs = defs
        self.parent = parent

    def bind(self, name: str, val: TVal) -> "TEnv":
        return TEnv(name, val, None, self)

    def bind_rec(self, defs) -> "TEnv":
        return TEnv(None, None, defs, self)

    def lookup(self, name: str) -> Optional[TVal]:
        env = self
        while env is not None:
            if env.defs is not None:
                for f, _, _ in env.defs:
                    if f == name:
                        return VRecClosure(env.parent, env.defs, f)
            elif env.name == name:
                return env.val
            env = env.parent
        return None

    def names(self) -> list[str]:
        out, env = [], self
        while env is not None:
            if env.defs is not None:
                out.extend(f for f, _, _ in env.defs)
            elif env.name is not None:
                out.append(env.name)
            env = env.parent
        return out


EMPTY_ENV = TEnv()


# ----------------------------------------------------------- machine


class _Raise(Exception):
    def __init__(self, exn: str):
        self.exn = exn


class _Timeout(Exception):
    pass


class _Crash(Exception):
    pass


class _Ref:
    __slots__ = ("v",)

    def __init__(self, v):
        self.v = v


class Machine:
    """Mutable evaluator state; ``t_evaluate`` wraps it with an immutable store."""

    step_cap = 50_000_000

    def __init__(self, clock: int, cells: Sequence = ()):
        self.clock = clock
        self.steps = 0
        self.cells: list = []
        for c in cells:
            self.cells.append(_Ref(c.v) if isinstance(c, RefCell) else list(c.vs))

    def tick(self) -> None:
        if self.clock == 0:
            raise _Timeout()
        self.clock -= 1

    def store(self) -> TStore:
        return TStore(tuple(RefCell(c.v) if isinstance(c, _Ref) else ArrCell(tuple(c))
                            for c in self.cells), self.clock)

    # -- helpers

    def _cell(self, v, kind):
        if not isinstance(v, VLoc) or not 0 <= v.loc < len(self.cells):
            raise _Crash(f"expected a location, got {v!r}")
        c = self.cells[v.loc]
        if not isinstance(c, kind):
            raise _Crash("store cell has the wrong kind")
        return c

    def _int(self, v) -> int:
        if not isinstance(v, VInt):
            raise _Crash(f"expected an int, got {v!r}")
        return v.i

    def _index(self, arr: list, v) -> int:
        i = self._int(v)
        if not 0 <= i < len(arr):
            raise _Crash("array index out of bounds")
        return i

    def prim(self, op: str, a, b):
        if op == "=":
            if isinstance(a, (VClosure, VRecClosure)) or isinstance(b, (VClosure, VRecClosure)):
                raise _Crash("equality on functions")
            return VBool(a == b)
        x, y = self._int(a), self._int(b)
        if op == "+":
            return VInt(x + y)
        if op == "-":
            return VInt(x - y)
        if op == "*":
            return VInt(x * y)
        if op in ("div", "mod"):
            if y == 0:
                raise _Crash("division by zero")
            q, r = euclid_divmod(x, y)
            return VInt(q if op == "div" else r)
        if op == "<":
            return VBool(x < y)
        if op == "<=":
            return VBool(x <= y)
        if op == ">":
            return VBool(x > y)
        if op == ">=":
            return VBool(x >= y)
        raise _Crash(f"unknown primitive {op}")

    # -- evaluation

    def ev(self, env: TEnv, e: TExp) -> TVal:
        while True:
            self.steps += 1
            if self.steps > self.step_cap:
                raise _Timeout()
            t = type(e)
            if t is TVar:
                v = env.lookup(e.name)
                if v is None:
                    raise _Crash(f"unbound name {e.name}")
                return v
            if t is TDeref:
                return self._cell(self.ev(env, e.e), _Ref).v
            if t is TInt:
                return VInt(e.i)
            if t is TApp:
                arg = self.ev(env, e.arg)
                fn = self.ev(env, e.fn)
                self.tick()
                if type(fn) is VClosure:
                    env, e = fn.env.bind(fn.param, arg), fn.body
                    continue
                if type(fn) is VRecClosure:
                    for f, param, body in fn.defs:
                        if f == fn.fname:
                            env, e = fn.env.bind_rec(fn.defs).bind(param, arg), body
                            break
                    continue
                raise _Crash("application of a non-function")
            if t is TSeq:
                self.ev(env, e.e1)
                e = e.e2
                continue
            if t is TIf:
                c = self.ev(env, e.c)
                if type(c) is not VBool:
                    raise _Crash("non-boolean condition")
                e = e.t if c.b else e.e
                continue
            if t is TLet:
                env = env.bind(e.name, self.ev(env, e.rhs))
                e = e.body
                continue
            if t is TPrim:
                b = self.ev(env, e.e2)
                a = self.ev(env, e.e1)
                return self.prim(e.op, a, b)
            if t is TAssign:
                v = self.ev(env, e.rhs)
                self._cell(self.ev(env, e.lhs), _Ref).v = v
                return UNIT
            if t is TProj:
                v = self.ev(env, e.e)
                if type(v) is not VTuple or not 0 <= e.i < len(v.vs):
                    raise _Crash("bad projection")
                return v.vs[e.i]
            if t is TArrSub:
                i = self.ev(env, e.idx)
                arr = self._cell(self.ev(env, e.arr), list)
                return arr[self._index(arr, i)]
            if t is TArrUpd:
                v = self.ev(env, e.v)
                i = self.ev(env, e.idx)
                arr = self._cell(self.ev(env, e.arr), list)
                arr[self._index(arr, i)] = v
                return UNIT
            if t is TLetrec:
                env = env.bind_rec(e.defs)
                e = e.scope
                continue
            if t is TTuple:
                vs = [self.ev(env, x) for x in reversed(e.es)]
                return VTuple(tuple(reversed(vs)))
            if t is TRef:
                v = self.ev(env, e.e)
                self.cells.append(_Ref(v))
                return VLoc(len(self.cells) - 1)
            if t is TArrAlloc:
                init = self.ev(env, e.init)
                n = self._int(self.ev(env, e.len))
                if n < 0:
                    raise _Crash("negative array length")
                self.cells.append([init] * n)
                return VLoc(len(self.cells) - 1)
            if t is THandle:
                try:
                    return self.ev(env, e.e)
                except _Raise as r:
                    if r.exn != e.exn:
                        raise
                e = e.handler
                continue
            if t is TRaise:
                raise _Raise(e.exn)
            if t is TBool:
                return VBool(e.b)
            if t is TUnit:
                return UNIT
            if t is TStr:
                return VStr(e.s)
            if t is TFun:
                return VClosure(env, e.param, e.body)
            if t is TPrimNeg:
                return VInt(-self._int(self.ev(env, e.e)))
            if t is TPrimNot:
                v = self.ev(env, e.e)
                if type(v) is not VBool:
                    raise _Crash("not on a non-boolean")
                return VBool(not v.b)
            raise _Crash(f"unknown expression {e!r}")

    def run(self, env: TEnv, e: TExp) -> TRes:
        try:
            return RVal(self.ev(env, e))
        except _Raise as r:
            return RRaise(r.exn)
        except _Timeout:
            return RTimeout()
        except _Crash as c:
            return RCrash(str(c))
        except RecursionError:
            return RCrash("host recursion limit")

    def run_decs(self, env: TEnv, decs: Sequence[TDec]) -> tuple[TEnv, TRes]:
        res: TRes = RVal(UNIT)
        for d in decs:
            if isinstance(d, DExn):
                env = env.bind(d.name, VExn(d.name))
            elif isinstance(d, DLetrec):
                env = env.bind_rec(d.defs)
            else:
                res = self.run(env, d.e)
                if not isinstance(res, RVal):
                    return env, res
                env = env.bind(d.name, res.v)
        return env, res


def t_evaluate(store: TStore, env: TEnv, e: TExp, machine_cls=Machine) -> tuple[TStore, TRes]:
    m = machine_cls(store.clock, store.cells)
    res = m.run(env, e)
    return m.store(), res


def t_evaluate_decs(store: TStore, env: TEnv, decs: Sequence[TDec],
                    machine_cls=Machine) -> tuple[TStore, TEnv, TRes]:
    m = machine_cls(store.clock, store.cells)
    env, res = m.run_decs(env, decs)
    return m.store(), env, res


# ----------------------------------------------------------- printing

_SML_OPS = {"=": "=", "div": "div", "mod": "mod"}


def pretty_exp(e: TExp, ind: int = 0) -> str:
    """SML-flavoured concrete syntax for human inspection."""
    pad = "  " * ind
    p = lambda x, k=ind: pretty_exp(x, k)
    match e:
        case TInt(i):
            return str(i) if i >= 0 else f"~{-i}"
        case TBool(b):
            return "true" if b else "false"
        case TStr(s):
            return '"' + s.replace("\\", "\\\\").replace('"', '\\"') + '"'
        case TUnit():
            return "()"
        case TVar(x):
            return x
        case TApp():
            spine = []
            while isinstance(e, TApp):
                spine.append(e.arg)
                e = e.fn
            return "(" + " ".join([p(e)] + [p(a) for a in reversed(spine)]) + ")"
        case TFun(x, body):
            return f"(fn {x} => {p(body)})"
        case TLetrec(defs, scope):
            ds = "\n".join(f"{pad}  {'fun' if k == 0 else 'and'} {f} {x} =\n{pad}    {p(b, ind + 2)}"
                           for k, (f, x, b) in enumerate(defs))
            return f"let\n{ds}\n{pad}in\n{pad}  {p(scope, ind + 1)}\n{pad}end"
        case TLet(x, rhs, body):
            return f"let val {x} = {p(rhs, ind + 1)} in\n{pad}  {p(body, ind + 1)}\n{pad}end"
        case TIf(c, t, f):
            return f"(if {p(c)}\n{pad}  then {p(t, ind + 1)}\n{pad}  else {p(f, ind + 1)})"
        case TSeq(a, b):
            return f"({p(a)};\n{pad} {p(b)})"
        case TRef(a):
            return f"(ref {p(a)})"
        case TDeref(a):
            return f"(!{p(a)})"
        case TAssign(l, r):
            return f"({p(l)} := {p(r)})"
        case TArrAlloc(n, init):
            return f"(Array.array {p(n)} {p(init)})"
        case TArrSub(a, i):
            return f"(Array.sub {p(a)} {p(i)})"
        case TArrUpd(a, i, v):
            return f"(Array.update {p(a)} {p(i)} {p(v)})"
        case TTuple(es):
            return "(" + ", ".join(p(x) for x in es) + ")"
        case TProj(i, a):
            return f"(#{i + 1} {p(a)})"
        case TRaise(x):
            return f"(raise {x})"
        case THandle(a, x, h):
            return f"({p(a, ind + 1)}\n{pad} handle {x} => {p(h, ind + 1)})"
        case TPrim(op, a, b):
            return f"({p(a)} {_SML_OPS.get(op, op)} {p(b)})"
        case TPrimNeg(a):
            return f"(~{p(a)})"
        case TPrimNot(a):
            return f"(not {p(a)})"
    raise TypeError(f"not an MLCore expression: {e!r}")


def pretty_decs(decs: Sequence[TDec]) -> str:
    out = []
    for d in decs:
        match d:
            case DExn(x):
                out.append(f"exception {x};")
            case DLetrec(defs):
                for k, (f, x, b) in enumerate(defs):
                    kw = "fun" if k == 0 else "and"
                    out.append(f"{kw} {f} {x} =\n  {pretty_exp(b, 1)}")
                out[-1] += ";"
            case DLet(x, e):
                out.append(f"val {x} = {pretty_exp(e, 1)};")
    return "\n".join(out) + "\n"


def sexp_exp(e: TExp) -> str:
    """Tagged-list dump mirroring the constructors."""
    match e:
        case TInt(i):
            return f"(TInt {i})"
        case TBool(b):
            return f"(TBool {'true' if b else 'false'})"
        case TStr(s):
            return '(TStr "' + s.replace("\\", "\\\\").replace('"', '\\"') + '")'
        case TUnit():
            return "(TUnit)"
        case TVar(x):
            return f"(TVar {x})"
        case TLetrec(defs, scope):
            ds = " ".join(f"({f} {x} {sexp_exp(b)})" for f, x, b in defs)
            return f"(TLetrec ({ds}) {sexp_exp(scope)})"
        case TLet(x, r, b):
            return f"(TLet {x} {sexp_exp(r)} {sexp_exp(b)})"
        case TFun(x, b):
            return f"(TFun {x} {sexp_exp(b)})"
        case TTuple(es):
            return "(TTuple " + " ".join(sexp_exp(x) for x in es) + ")"
        case TProj(i, a):
            return f"(TProj {i} {sexp_exp(a)})"
        case TRaise(x):
            return f"(TRaise {x})"
        case THandle(a, x, h):
            return f"(THandle {sexp_exp(a)} {x} {sexp_exp(h)})"
        case TPrim(op, a, b):
            return f"(TPrim {op} {sexp_exp(a)} {sexp_exp(b)})"
    name = type(e).__name__
    kids = [sexp_exp(getattr(e, f)) for f in e.__dataclass_fields__]
    return f"({name} {' '.join(kids)})"


def sexp_decs(decs: Sequence[TDec]) -> str:
    out = []
    for d in decs:
        match d:
            case DExn(x):
                out.append(f"(DExn {x})")
            case DLetrec(defs):
                ds = " ".join(f"({f} {x} {sexp_exp(b)})" for f, x, b in defs)
                out.append(f"(DLetrec {ds})")
            case DLet(x, e):
                out.append(f"(DLet {x} {sexp_exp(e)})")
    return "\n".join(out) + "\n"
