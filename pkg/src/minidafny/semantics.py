"""Fuel-based functional big-step interpreter for the Dafny subset.

Every evaluation function takes a state and returns a new state together
with a result; states are immutable, so callers can keep the old one.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Optional, Sequence, Union

from .ast import (
    ArrAllocRhs, ArrLen, ArrSel, ArrSelLhs, ArrT, Assert, Assign, BinOp, BinOpKind,
    BoolLit, BoolT, Dec, DType, Exp, ExpRhs, Forall, ForallHeap, FunCall, Function, If,
    IntLit, IntT, Ite, Let, MetCall, Method, Old, OldHeap, Prev, PrevHeap, Program,
    Return, SetPrev, Skip, Stmt, StrLit, StrT, Then, UnOp, UnOpKind, Var, VarLhs, While,
)


# ---------------------------------------------------------------- values


@dataclass(frozen=True)
class IntV:
    i: int


@dataclass(frozen=True)
class BoolV:
    b: bool


@dataclass(frozen=True)
class StrV:
    s: str


@dataclass(frozen=True)
class ArrV:
    len: int
    loc: int
    elem_ty: DType


Value = Union[IntV, BoolV, StrV, ArrV]


@dataclass(frozen=True)
class HArr:
    elems: tuple[Value, ...]
    elem_ty: DType


# --------------------------------------------------------------- results


@dataclass(frozen=True)
class Rfail:
    pass


@dataclass(frozen=True)
class Rtimeout:
    pass


ErrResult = Union[Rfail, Rtimeout]


@dataclass(frozen=True)
class Rval:
    v: Value


@dataclass(frozen=True)
class Rerr:
    err: ErrResult


@dataclass(frozen=True)
class Rcont:
    pass


@dataclass(frozen=True)
class Sret:
    pass


@dataclass(frozen=True)
class Serr:
    err: ErrResult


@dataclass(frozen=True)
class Rstop:
    stop: Union[Sret, Serr]


ExpResult = Union[Rval, Rerr]
StmtResult = Union[Rcont, Rstop]

RFAIL = Rfail()
RTIMEOUT = Rtimeout()
ERR_FAIL = Rerr(RFAIL)
ERR_TIMEOUT = Rerr(RTIMEOUT)
RCONT = Rcont()
RET = Rstop(Sret())
STOP_FAIL = Rstop(Serr(RFAIL))
STOP_TIMEOUT = Rstop(Serr(RTIMEOUT))

Locals = tuple[tuple[str, Optional[Value]], ...]
Heap = tuple[HArr, ...]


@dataclass(frozen=True)
class State:
    clock: int
    locals: Locals = ()
    heap: Heap = ()
    locals_old: Locals = ()
    heap_old: Heap = ()
    locals_prev: Locals = ()
    heap_prev: Heap = ()


class Env:
    """Evaluation environment: the whole program, with a name index."""

    def __init__(self, prog: Program, on_return=None):
        self.prog = prog
        self.on_return = on_return  # observer called with the state at each Return
        self._index: dict[str, object] = {}
        for m in prog.members:
            self._index.setdefault(m.name, m)

    def lookup(self, name: str):
        return self._index.get(name)

    def __eq__(self, other):
        return isinstance(other, Env) and self.prog == other.prog

    def __hash__(self):
        return hash(self.prog)


_MISSING = object()


def lookup_local(locals_: Locals, x: str):
    """First binding of ``x``; ``_MISSING`` if undeclared, None if uninitialized."""
    for n, v in locals_:
        if n == x:
            return v
    return _MISSING


def is_declared(locals_: Locals, x: str) -> bool:
    return any(n == x for n, _ in locals_)


def update_local(locals_: Locals, x: str, v: Value) -> Locals:
    for k, (n, _) in enumerate(locals_):
        if n == x:
            return locals_[:k] + ((x, v),) + locals_[k + 1:]
    raise KeyError(x)


# ------------------------------------------------------------ primitives


def do_uop(op: UnOpKind, v: Value) -> Optional[Value]:
    if op is UnOpKind.NOT and isinstance(v, BoolV):
        return BoolV(not v.b)
    if op is UnOpKind.NEG and isinstance(v, IntV):
        return IntV(-v.i)
    return None


def euclid_divmod(a: int, b: int) -> tuple[int, int]:
    """Euclidean division: the remainder always lies in [0, |b|)."""
    r = a % abs(b)
    return (a - r) // b, r


def do_binop(op: BinOpKind, v1: Value, v2: Value) -> Optional[Value]:
    if op in (BinOpKind.EQ, BinOpKind.NEQ):
        if type(v1) is not type(v2):
            return None
        same = v1.loc == v2.loc if isinstance(v1, ArrV) else v1 == v2
        return BoolV(same if op is BinOpKind.EQ else not same)
    if not (isinstance(v1, IntV) and isinstance(v2, IntV)):
        return None
    a, b = v1.i, v2.i
    if op is BinOpKind.ADD:
        return IntV(a + b)
    if op is BinOpKind.SUB:
        return IntV(a - b)
    if op is BinOpKind.MUL:
        return IntV(a * b)
    if op is BinOpKind.DIV:
        return IntV(euclid_divmod(a, b)[0]) if b else None
    if op is BinOpKind.MOD:
        return IntV(euclid_divmod(a, b)[1]) if b else None
    if op is BinOpKind.LT:
        return BoolV(a < b)
    if op is BinOpKind.LE:
        return BoolV(a <= b)
    if op is BinOpKind.GT:
        return BoolV(a > b)
    if op is BinOpKind.GE:
        return BoolV(a >= b)
    return None


def default_value(t: DType) -> Value:
    if isinstance(t, IntT):
        return IntV(0)
    if isinstance(t, BoolT):
        return BoolV(False)
    if isinstance(t, StrT):
        return StrV("")
    return ArrV(0, 0, t.elem)


def value_type(v: Value) -> DType:
    from .ast import BOOL, INT, STR
    if isinstance(v, IntV):
        return INT
    if isinstance(v, BoolV):
        return BOOL
    if isinstance(v, StrV):
        return STR
    return ArrT(v.elem_ty)


# ----------------------------------------------------------- expressions


def evaluate_exp(st: State, env: Env, e: Exp) -> tuple[State, ExpResult]:
    match e:
        case IntLit(i):
            return st, Rval(IntV(i))
        case BoolLit(b):
            return st, Rval(BoolV(b))
        case StrLit(s):
            return st, Rval(StrV(s))
        case Var(x):
            v = lookup_local(st.locals, x)
            if v is _MISSING or v is None:
                return st, ERR_FAIL
            return st, Rval(v)
        case UnOp(op, a):
            st, r = evaluate_exp(st, env, a)
            if isinstance(r, Rerr):
                return st, r
            v = do_uop(op, r.v)
            return st, (ERR_FAIL if v is None else Rval(v))
        case BinOp(op, a, b):
            st, r1 = evaluate_exp(st, env, a)
            if isinstance(r1, Rerr):
                return st, r1
            v1 = r1.v
            if op in (BinOpKind.AND, BinOpKind.OR, BinOpKind.IMP):
                if not isinstance(v1, BoolV):
                    return st, ERR_FAIL
                if op is BinOpKind.AND and not v1.b:
                    return st, r1
                if op is BinOpKind.OR and v1.b:
                    return st, r1
                if op is BinOpKind.IMP and not v1.b:
                    return st, Rval(BoolV(True))
                st, r2 = evaluate_exp(st, env, b)
                if isinstance(r2, Rval) and not isinstance(r2.v, BoolV):
                    return st, ERR_FAIL
                return st, r2
            st, r2 = evaluate_exp(st, env, b)
            if isinstance(r2, Rerr):
                return st, r2
            v = do_binop(op, v1, r2.v)
            return st, (ERR_FAIL if v is None else Rval(v))
        case Ite(c, t, f):
            st, r = evaluate_exp(st, env, c)
            if isinstance(r, Rerr):
                return st, r
            if not isinstance(r.v, BoolV):
                return st, ERR_FAIL
            return evaluate_exp(st, env, t if r.v.b else f)
        case ArrLen(a):
            st, r = evaluate_exp(st, env, a)
            if isinstance(r, Rerr):
                return st, r
            if not isinstance(r.v, ArrV):
                return st, ERR_FAIL
            return st, Rval(IntV(r.v.len))
        case ArrSel(a, i):
            st, ra = evaluate_exp(st, env, a)
            if isinstance(ra, Rerr):
                return st, ra
            st, ri = evaluate_exp(st, env, i)
            if isinstance(ri, Rerr):
                return st, ri
            v = heap_read(st.heap, ra.v, ri.v)
            return st, (ERR_FAIL if v is None else Rval(v))
        case FunCall(name, args):
            f = env.lookup(name)
            if not isinstance(f, Function):
                return st, ERR_FAIL
            st, vals = _eval_list(st, env, args)
            if not isinstance(vals, list):
                return st, vals
            if len(vals) != len(f.ins):
                return st, ERR_FAIL
            if st.clock == 0:
                return st, ERR_TIMEOUT
            saved = st.locals
            inner = replace(st, clock=st.clock - 1,
                            locals=tuple((x, v) for (x, _), v in zip(f.ins, vals)))
            inner, r = evaluate_exp(inner, env, f.body)
            return replace(inner, locals=saved), r
        case Let(binds, body):
            st, vals = _eval_list(st, env, [r for _, r in binds])
            if not isinstance(vals, list):
                return st, vals
            saved = st.locals
            inner = replace(st, locals=tuple((x, v) for (x, _), v in zip(binds, vals)) + saved)
            inner, r = evaluate_exp(inner, env, body)
            return replace(inner, locals=saved), r
        case Old(a):
            inner = replace(st, locals=st.locals_old, heap=st.heap_old)
            inner, r = evaluate_exp(inner, env, a)
            return replace(st, clock=inner.clock), r
        case OldHeap(a):
            inner = replace(st, heap=st.heap_old)
            inner, r = evaluate_exp(inner, env, a)
            return replace(st, clock=inner.clock), r
        case Prev(a):
            inner = replace(st, locals=st.locals_prev, heap=st.heap_prev)
            inner, r = evaluate_exp(inner, env, a)
            return replace(st, clock=inner.clock), r
        case PrevHeap(a):
            inner = replace(st, heap=st.heap_prev)
            inner, r = evaluate_exp(inner, env, a)
            return replace(st, clock=inner.clock), r
        case SetPrev(a):
            inner = replace(st, locals_prev=st.locals, heap_prev=st.heap)
            inner, r = evaluate_exp(inner, env, a)
            return replace(st, clock=inner.clock), r
        case Forall() | ForallHeap():
            return st, ERR_FAIL
    raise TypeError(f"not an expression: {e!r}")


def _eval_list(st: State, env: Env, es: Sequence[Exp]):
    """Evaluate left to right; returns a value list or the first Rerr."""
    vals = []
    for a in es:
        st, r = evaluate_exp(st, env, a)
        if isinstance(r, Rerr):
            return st, r
        vals.append(r.v)
    return st, vals


def heap_read(heap: Heap, arr: Value, idx: Value) -> Optional[Value]:
    if not (isinstance(arr, ArrV) and isinstance(idx, IntV)):
        return None
    if not 0 <= idx.i < arr.len or arr.loc >= len(heap):
        return None
    elems = heap[arr.loc].elems
    return elems[idx.i] if idx.i < len(elems) else None


def heap_write(heap: Heap, arr: Value, idx: Value, v: Value) -> Optional[Heap]:
    if heap_read(heap, arr, idx) is None:
        return None
    h = heap[arr.loc]
    elems = h.elems[:idx.i] + (v,) + h.elems[idx.i + 1:]
    return heap[:arr.loc] + (HArr(elems, h.elem_ty),) + heap[arr.loc + 1:]


def alloc(heap: Heap, n: int, ty: DType) -> tuple[Heap, ArrV]:
    d = default_value(ty)
    return heap + (HArr((d,) * n, ty),), ArrV(n, len(heap), ty)


# ------------------------------------------------------------ statements


def _err_stop(r: Rerr) -> Rstop:
    return STOP_TIMEOUT if isinstance(r.err, Rtimeout) else STOP_FAIL


def evaluate_stmt(st: State, env: Env, s: Stmt) -> tuple[State, StmtResult]:
    match s:
        case Skip():
            return st, RCONT
        case Return():
            if env.on_return is not None:
                env.on_return(st)
            return st, RET
        case Then(s1, s2):
            st, r = evaluate_stmt(st, env, s1)
            if isinstance(r, Rstop):
                return st, r
            return evaluate_stmt(st, env, s2)
        case If(g, t, f):
            st, r = evaluate_exp(st, env, g)
            if isinstance(r, Rerr):
                return st, _err_stop(r)
            if not isinstance(r.v, BoolV):
                return st, STOP_FAIL
            return evaluate_stmt(st, env, t if r.v.b else f)
        case Assert(e):
            st, r = evaluate_exp(st, env, e)
            if isinstance(r, Rerr):
                return st, _err_stop(r)
            return st, (RCONT if r.v == BoolV(True) else STOP_FAIL)
        case Dec(binds, scope):
            vals = []
            for _, _, init in binds:
                if init is None:
                    vals.append(None)
                    continue
                st, r = evaluate_exp(st, env, init)
                if isinstance(r, Rerr):
                    return st, _err_stop(r)
                vals.append(r.v)
            k = len(binds)
            st = replace(st, locals=tuple((x, v) for (x, _, _), v in zip(binds, vals)) + st.locals)
            st, r = evaluate_stmt(st, env, scope)
            return replace(st, locals=st.locals[k:]), r
        case Assign(pairs):
            return _assign(st, env, pairs)
        case While():
            return _while(st, env, s)
        case MetCall(lhss, name, args):
            st, vals = _eval_list(st, env, args)
            if not isinstance(vals, list):
                return st, _err_stop(vals)
            st, r, outs, _ = invoke_method(st, env, name, vals)
            if not isinstance(r, Rcont):
                return st, r
            return _assign_names(st, lhss, outs)
    raise TypeError(f"not a statement: {s!r}")


def _assign_names(st: State, names: Sequence[str], vals: Sequence[Value]) -> tuple[State, StmtResult]:
    if len(names) != len(vals):
        return st, STOP_FAIL
    locals_ = st.locals
    for x, v in zip(names, vals):
        if not is_declared(locals_, x):
            return st, STOP_FAIL
        locals_ = update_local(locals_, x, v)
    return replace(st, locals=locals_), RCONT


def _assign(st: State, env: Env, pairs) -> tuple[State, StmtResult]:
    vals = []
    for _, rhs in pairs:
        if isinstance(rhs, ExpRhs):
            st, r = evaluate_exp(st, env, rhs.e)
            if isinstance(r, Rerr):
                return st, _err_stop(r)
            vals.append(r.v)
        else:
            st, r = evaluate_exp(st, env, rhs.len)
            if isinstance(r, Rerr):
                return st, _err_stop(r)
            if not isinstance(r.v, IntV) or r.v.i < 0:
                return st, STOP_FAIL
            heap, a = alloc(st.heap, r.v.i, rhs.elem_ty)
            st = replace(st, heap=heap)
            vals.append(a)
    for (lhs, _), v in zip(pairs, vals):
        if isinstance(lhs, VarLhs):
            if not is_declared(st.locals, lhs.name):
                return st, STOP_FAIL
            st = replace(st, locals=update_local(st.locals, lhs.name, v))
        else:
            st, ra = evaluate_exp(st, env, lhs.arr)
            if isinstance(ra, Rerr):
                return st, _err_stop(ra)
            st, ri = evaluate_exp(st, env, lhs.idx)
            if isinstance(ri, Rerr):
                return st, _err_stop(ri)
            heap = heap_write(st.heap, ra.v, ri.v, v)
            if heap is None:
                return st, STOP_FAIL
            st = replace(st, heap=heap)
    return st, RCONT


def _while(st: State, env: Env, w: While) -> tuple[State, StmtResult]:
    while True:
        if st.clock == 0:
            return st, STOP_TIMEOUT
        st = replace(st, clock=st.clock - 1)
        st, r = evaluate_exp(st, env, w.guard)
        if isinstance(r, Rerr):
            return st, _err_stop(r)
        if not isinstance(r.v, BoolV):
            return st, STOP_FAIL
        if not r.v.b:
            return st, RCONT
        st, r = evaluate_stmt(st, env, w.body)
        if not isinstance(r, Rcont):
            return st, r


def invoke_method(st: State, env: Env, name: str, vals: Sequence[Value]):
    """Steps of a method call after argument evaluation.

    Returns ``(state, result, out_values, callee_locals)``; on success the
    result is Rcont, the caller's locals are restored and the heap persists.
    ``callee_locals`` is the callee frame at its Return, or None.
    """
    m = env.lookup(name)
    if not isinstance(m, Method):
        return st, STOP_FAIL, [], None
    names = [x for x, _ in m.ins] + [x for x, _ in m.outs]
    if len(set(names)) != len(names) or len(vals) != len(m.ins):
        return st, STOP_FAIL, [], None
    frame = tuple((x, v) for (x, _), v in zip(m.ins, vals)) + tuple((x, None) for x, _ in m.outs)
    caller = st
    st = replace(st, locals=frame, locals_old=frame, heap_old=st.heap)
    if st.clock == 0:
        return _restore(caller, st), STOP_TIMEOUT, [], None
    st = replace(st, clock=st.clock - 1)
    st, r = evaluate_stmt(st, env, m.body)
    if isinstance(r, Rcont):
        return _restore(caller, st), STOP_FAIL, [], None
    if r != RET:
        return _restore(caller, st), r, [], None
    outs = []
    for x, _ in m.outs:
        v = lookup_local(st.locals, x)
        if v is _MISSING or v is None:
            return _restore(caller, st), STOP_FAIL, [], None
        outs.append(v)
    return _restore(caller, st), RCONT, outs, st.locals


def _restore(caller: State, callee: State) -> State:
    return replace(caller, clock=callee.clock, heap=callee.heap)


def distinct_members(p: Program) -> bool:
    names = [m.name for m in p.members]
    return len(set(names)) == len(names)


def evaluate_program(fuel: int, p: Program) -> tuple[State, StmtResult]:
    st, r, _ = run_main(fuel, p)
    return st, r


def run_main(fuel: int, p: Program):
    """Evaluate ``Main`` like ``MetCall([], "Main", [])``; also return Main's final frame."""
    st = State(clock=fuel)
    if not distinct_members(p):
        return st, STOP_FAIL, None
    last = [None]
    st, r, _, frame = invoke_method(st, Env(p, on_return=lambda s: last.__setitem__(0, s)),
                                    "Main", [])
    if frame is not None and last[0] is not None:
        # Main's own Return is the last one executed; its Dec scopes are still open there
        frame = last[0].locals
    if isinstance(r, Rcont):
        m = Env(p).lookup("Main")
        if m.outs:  # Main's outs have no caller lhs to land in
            return st, STOP_FAIL, frame
    return st, r, frame


def result_kind(r) -> str:
    match r:
        case Rcont():
            return "Rcont"
        case Rstop(Sret()):
            return "Rstop Sret"
        case Rstop(Serr(Rfail())):
            return "Rfail"
        case Rstop(Serr(Rtimeout())):
            return "Rtimeout"
        case Rval(v):
            return f"Rval {show_value(v)}"
        case Rerr(Rfail()):
            return "Rfail"
        case Rerr(Rtimeout()):
            return "Rtimeout"
    return repr(r)


def show_value(v: Optional[Value], heap: Heap = ()) -> str:
    match v:
        case None:
            return "<uninit>"
        case IntV(i):
            return str(i)
        case BoolV(b):
            return "true" if b else "false"
        case StrV(s):
            return '"' + s.replace("\\", "\\\\").replace('"', '\\"') + '"'
        case ArrV(n, loc, _):
            if loc < len(heap) and n:
                return "[" + ", ".join(show_value(x, heap) for x in heap[loc].elems) + "]"
            return f"array(len={n}, loc={loc})" if n else "[]"
    return repr(v)
