"""Discharge or refute verification conditions.

``eval_vc`` gives verification-only forms an executable meaning under a
finite ``Budget``; ``falsify`` searches sampled states for a counterexample;
``smt_emit``/``smt_check`` hand the heap-free fragment to an external solver.

Internally expressions are compiled to Python closures over a mutable
context with native values (int, bool, str, ``ArrV``). Quantifier blocks
whose antecedent pins a bound variable to a range or a single value only
enumerate that range; the result is the same as full enumeration.
"""

from __future__ import annotations

import os
import random
import subprocess
import tempfile
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

from .ast import (
    ArrLen, ArrSel, ArrT, BinOp, BinOpKind, BoolLit, BoolT, DType, Exp, Forall,
    ForallHeap, FunCall, Function, IntLit, IntT, Ite, Let, Old, OldHeap, Prev, PrevHeap,
    SetPrev, StrLit, StrT, UnOp, UnOpKind, Var, exp_children, mentions, walk_exp,
)
from .semantics import (
    ArrV, BoolV, ERR_FAIL, ERR_TIMEOUT, Env, HArr, IntV, Rerr, Rval, State, StrV, Value,
    euclid_divmod,
)


class BudgetExceeded(Exception):
    pass


class EvalFail(Exception):
    pass


class _Timeout(Exception):
    pass


class _NoNarrow(Exception):
    pass


@dataclass(frozen=True)
class Budget:
    int_lo: int = -10
    int_hi: int = 10
    arr_len_max: int = 4
    heap_variants_max: int = 40
    states_max: int = 100
    seed: int = 0
    max_instances: int = 3_000_000
    forall_ints_max: int = 24
    pool_ints: tuple[int, ...] = (-2, -1, 0, 1, 2)

    def __post_init__(self):
        if self.int_lo > self.int_hi:
            raise ValueError("int_lo must not exceed int_hi")
        if min(self.arr_len_max, self.heap_variants_max, self.states_max,
               self.forall_ints_max) < 1:
            raise ValueError("budget maxima must be at least 1")


_MISSING = object()
_STR_POOL = ("", "a")
# A quantified int whose antecedent pins it to at most this many values is
# enumerated exactly, even beyond the budget's int range.
EXACT_RANGE_MAX = 1024


# -------------------------------------------------------------- context


class Ctx:
    __slots__ = ("locals", "heap", "old_locals", "old_heap", "prev_locals", "prev_heap",
                 "clock", "env", "budget", "instances", "rng", "trail", "active")

    def __init__(self, locals_, heap, old_locals, old_heap, prev_locals, prev_heap,
                 clock, env, budget):
        self.locals = locals_
        self.heap = heap
        self.old_locals = old_locals
        self.old_heap = old_heap
        self.prev_locals = prev_locals
        self.prev_heap = prev_heap
        self.clock = clock
        self.env = env
        self.budget = budget
        self.instances = 0
        self.rng = random.Random(budget.seed)
        self.trail: list[tuple[str, object]] = []
        self.active: list[tuple[str, object]] = []  # quantifier instances in scope

    def bind(self, x, v):
        old = self.locals.get(x, _MISSING)
        self.locals[x] = v
        return old

    def unbind(self, x, old):
        if old is _MISSING:
            del self.locals[x]
        else:
            self.locals[x] = old

    def count(self):
        self.instances += 1
        if self.instances > self.budget.max_instances:
            raise BudgetExceeded()


def _to_native(v: Optional[Value]):
    match v:
        case None:
            return None
        case IntV(i):
            return i
        case BoolV(b):
            return b
        case StrV(s):
            return s
    return v


def _to_value(x) -> Value:
    if type(x) is bool:
        return BoolV(x)
    if type(x) is int:
        return IntV(x)
    if type(x) is str:
        return StrV(x)
    return x


def _native_heap(heap) -> tuple:
    return tuple(HArr(tuple(_to_native(e) for e in h.elems), h.elem_ty) for h in heap)


def _value_heap(heap) -> tuple:
    return tuple(HArr(tuple(_to_value(e) for e in h.elems), h.elem_ty) for h in heap)


def _native_locals(locals_) -> dict:
    out = {}
    for x, v in reversed(locals_):  # first match wins
        out[x] = _to_native(v)
    return out


def ctx_of_state(st: State, env: Optional[Env], budget: Budget) -> Ctx:
    return Ctx(_native_locals(st.locals), _native_heap(st.heap), _native_locals(st.locals_old),
               _native_heap(st.heap_old), _native_locals(st.locals_prev),
               _native_heap(st.heap_prev), st.clock, env, budget)


# ------------------------------------------------------------ compiler

Fn = Callable[[Ctx], object]


def _is_int(v) -> bool:
    return type(v) is int


def _read(c: Ctx, a, i):
    if type(a) is not ArrV or type(i) is not int or not 0 <= i < a.len or a.loc >= len(c.heap):
        raise EvalFail()
    elems = c.heap[a.loc].elems
    if i >= len(elems):
        raise EvalFail()
    return elems[i]


def _arith(op: BinOpKind):
    if op is BinOpKind.ADD:
        return lambda a, b: a + b
    if op is BinOpKind.SUB:
        return lambda a, b: a - b
    if op is BinOpKind.MUL:
        return lambda a, b: a * b
    if op is BinOpKind.DIV:
        def div(a, b):
            if b == 0:
                raise EvalFail()
            return euclid_divmod(a, b)[0]
        return div
    if op is BinOpKind.MOD:
        def mod(a, b):
            if b == 0:
                raise EvalFail()
            return euclid_divmod(a, b)[1]
        return mod
    if op is BinOpKind.LT:
        return lambda a, b: a < b
    if op is BinOpKind.LE:
        return lambda a, b: a <= b
    if op is BinOpKind.GT:
        return lambda a, b: a > b
    if op is BinOpKind.GE:
        return lambda a, b: a >= b
    raise ValueError(op)


def _same(a, b) -> bool:
    if type(a) is not type(b) or a is None:
        raise EvalFail()
    if type(a) is ArrV:
        return a.loc == b.loc
    return a == b


def compile_exp(e: Exp) -> Fn:
    match e:
        case IntLit(i) | BoolLit(i) | StrLit(i):
            return lambda c: i
        case Var(x):
            def var(c):
                v = c.locals.get(x)
                if v is None:
                    raise EvalFail()
                return v
            return var
        case UnOp(UnOpKind.NOT, a):
            fa = compile_exp(a)

            def not_(c):
                v = fa(c)
                if type(v) is not bool:
                    raise EvalFail()
                return not v
            return not_
        case UnOp(UnOpKind.NEG, a):
            fa = compile_exp(a)

            def neg(c):
                v = fa(c)
                if type(v) is not int:
                    raise EvalFail()
                return -v
            return neg
        case BinOp(BinOpKind.AND, a, b):
            fa, fb = compile_exp(a), compile_exp(b)

            def and_(c):
                v = fa(c)
                if type(v) is not bool:
                    raise EvalFail()
                if not v:
                    return False
                w = fb(c)
                if type(w) is not bool:
                    raise EvalFail()
                return w
            return and_
        case BinOp(BinOpKind.OR, a, b):
            fa, fb = compile_exp(a), compile_exp(b)

            def or_(c):
                v = fa(c)
                if type(v) is not bool:
                    raise EvalFail()
                if v:
                    return True
                w = fb(c)
                if type(w) is not bool:
                    raise EvalFail()
                return w
            return or_
        case BinOp(BinOpKind.IMP, a, b):
            fa, fb = compile_exp(a), compile_exp(b)

            def imp(c):
                v = fa(c)
                if type(v) is not bool:
                    raise EvalFail()
                if not v:
                    return True
                w = fb(c)
                if type(w) is not bool:
                    raise EvalFail()
                return w
            return imp
        case BinOp(BinOpKind.EQ, a, b):
            fa, fb = compile_exp(a), compile_exp(b)
            return lambda c: _same(fa(c), fb(c))
        case BinOp(BinOpKind.NEQ, a, b):
            fa, fb = compile_exp(a), compile_exp(b)
            return lambda c: not _same(fa(c), fb(c))
        case BinOp(op, a, b):
            fa, fb, f = compile_exp(a), compile_exp(b), _arith(op)

            def arith(c):
                x = fa(c)
                y = fb(c)
                if type(x) is not int or type(y) is not int:
                    raise EvalFail()
                return f(x, y)
            return arith
        case Ite(cond, t, f):
            fc, ft, ff = compile_exp(cond), compile_exp(t), compile_exp(f)

            def ite(c):
                v = fc(c)
                if type(v) is not bool:
                    raise EvalFail()
                return ft(c) if v else ff(c)
            return ite
        case ArrLen(a):
            fa = compile_exp(a)

            def alen(c):
                v = fa(c)
                if type(v) is not ArrV:
                    raise EvalFail()
                return v.len
            return alen
        case ArrSel(a, i):
            fa, fi = compile_exp(a), compile_exp(i)

            def sel(c):
                arr = fa(c)
                return _read(c, arr, fi(c))
            return sel
        case Let(binds, body):
            names = [x for x, _ in binds]
            rhs = [compile_exp(r) for _, r in binds]
            fb = compile_exp(body)

            def let(c):
                vals = [f(c) for f in rhs]
                saved = [c.bind(x, v) for x, v in zip(names, vals)]
                try:
                    return fb(c)
                finally:
                    for x, old in reversed(list(zip(names, saved))):
                        c.unbind(x, old)
            return let
        case Forall():
            return _compile_forall(e)
        case ForallHeap(havoc, body):
            return _compile_forallheap(havoc, body)
        case Old(a):
            fa = compile_exp(a)

            def old(c):
                c.locals, c.old_locals = c.old_locals, c.locals
                c.heap, c.old_heap = c.old_heap, c.heap
                try:
                    return fa(c)
                finally:
                    c.locals, c.old_locals = c.old_locals, c.locals
                    c.heap, c.old_heap = c.old_heap, c.heap
            return old
        case OldHeap(a):
            fa = compile_exp(a)

            def oldheap(c):
                c.heap, c.old_heap = c.old_heap, c.heap
                try:
                    return fa(c)
                finally:
                    c.heap, c.old_heap = c.old_heap, c.heap
            return oldheap
        case Prev(a):
            fa = compile_exp(a)

            def prev(c):
                c.locals, c.prev_locals = c.prev_locals, c.locals
                c.heap, c.prev_heap = c.prev_heap, c.heap
                try:
                    return fa(c)
                finally:
                    c.locals, c.prev_locals = c.prev_locals, c.locals
                    c.heap, c.prev_heap = c.prev_heap, c.heap
            return prev
        case PrevHeap(a):
            fa = compile_exp(a)

            def prevheap(c):
                c.heap, c.prev_heap = c.prev_heap, c.heap
                try:
                    return fa(c)
                finally:
                    c.heap, c.prev_heap = c.prev_heap, c.heap
            return prevheap
        case SetPrev(a):
            fa = compile_exp(a)

            def setprev(c):
                saved = c.prev_locals, c.prev_heap
                c.prev_locals, c.prev_heap = dict(c.locals), c.heap
                try:
                    return fa(c)
                finally:
                    c.prev_locals, c.prev_heap = saved
            return setprev
        case FunCall(name, args):
            fargs = [compile_exp(a) for a in args]

            def call(c):
                f = c.env.lookup(name) if c.env is not None else None
                if not isinstance(f, Function):
                    raise EvalFail()
                vals = [g(c) for g in fargs]
                if len(vals) != len(f.ins):
                    raise EvalFail()
                if c.clock == 0:
                    raise _Timeout()
                c.clock -= 1
                saved = c.locals
                c.locals = {x: v for (x, _), v in zip(f.ins, vals)}
                try:
                    return _compiled(f.body)(c)
                finally:
                    c.locals = saved
            return call
    raise TypeError(f"not an expression: {e!r}")


_CACHE: dict[int, tuple[Exp, Fn]] = {}


def _compiled(e: Exp) -> Fn:
    hit = _CACHE.get(id(e))
    if hit is not None and hit[0] is e:
        return hit[1]
    f = compile_exp(e)
    _CACHE[id(e)] = (e, f)
    return f


# --------------------------------------------------------- quantifiers


def _arrays_of(c: Ctx, elem_ty: DType, n: int):
    """Candidate contents of a fresh array of length ``n``."""
    b = c.budget
    if isinstance(elem_ty, IntT):
        pool = list(b.pool_ints)
        fills = [(0,) * n] + [(v,) * n for v in pool if v != 0]
        for _ in range(2):
            fills.append(tuple(c.rng.choice(pool) for _ in range(n)))
        if n > 1:
            fills.append(tuple(range(n)))
    elif isinstance(elem_ty, BoolT):
        fills = [(False,) * n, (True,) * n]
        fills.append(tuple(c.rng.random() < 0.5 for _ in range(n)))
    elif isinstance(elem_ty, StrT):
        fills = [(s,) * n for s in _STR_POOL]
    else:
        fills = [(ArrV(0, 0, elem_ty.elem),) * n]
    seen, out = set(), []
    for f in fills:
        if f not in seen:
            seen.add(f)
            out.append(f)
    return out


def _int_sample(c: Ctx, lo: int, hi: int) -> list[int]:
    """A fixed-size subset of a wide unpinned range: ends, small values,
    neighbours of the ints in scope, then random fill."""
    n = c.budget.forall_ints_max
    picks = [lo, hi, lo + 1, hi - 1]
    picks += sorted(range(-4, 5), key=abs)
    for d in (c.locals, c.old_locals, c.prev_locals):
        for v in d.values():
            if type(v) is int:
                picks += (v, v - 1, v + 1)
    seen, out = set(), []
    for v in picks:
        if lo <= v <= hi and v not in seen:
            seen.add(v)
            out.append(v)
    rng = random.Random(hash((c.budget.seed, lo, hi, len(out))))
    while len(out) < n:
        v = rng.randint(lo, hi)
        if v not in seen:
            seen.add(v)
            out.append(v)
    return out[:n] if len(out) > n else out


def _domain(c: Ctx, ty: DType, lo=None, hi=None, lens=None, alone=True):
    """Yield (value, heap) pairs for one quantified variable.

    ``alone`` says the variable is the only one in its quantifier block; only
    then is a range wider than ``forall_ints_max`` enumerated in full.
    """
    b = c.budget
    if isinstance(ty, IntT):
        pinned = lo is not None and hi is not None
        exact = pinned and hi - lo <= max(b.int_hi - b.int_lo, EXACT_RANGE_MAX)
        if not exact:
            # outside a pinned range the quantifier is the bounded one
            lo = b.int_lo if lo is None else max(lo, b.int_lo)
            hi = b.int_hi if hi is None else min(hi, b.int_hi)
        if hi - lo + 1 > b.forall_ints_max and not alone:
            yield from ((v, None) for v in _int_sample(c, lo, hi))
            return
        for v in range(lo, hi + 1):
            yield v, None
    elif isinstance(ty, BoolT):
        yield False, None
        yield True, None
    elif isinstance(ty, StrT):
        for s in _STR_POOL:
            yield s, None
    else:
        if lens is None:
            lens = range(0, b.arr_len_max + 1)
        base = c.heap
        for n in lens:
            for fill in _arrays_of(c, ty.elem, n):
                yield ArrV(n, len(base), ty.elem), base + (HArr(fill, ty.elem),)


_FLIP = {BinOpKind.LT: BinOpKind.GT, BinOpKind.LE: BinOpKind.GE, BinOpKind.GT: BinOpKind.LT,
         BinOpKind.GE: BinOpKind.LE, BinOpKind.EQ: BinOpKind.EQ, BinOpKind.NEQ: BinOpKind.NEQ}


@dataclass
class _Constraint:
    var: int  # index into the block
    on_len: bool
    op: BinOpKind
    term: Fn


@dataclass
class _Plan:
    lets: list[tuple[list[str], list[Fn]]]
    aliases: dict[str, int]
    guards: list[Fn]
    constraints: list[list[_Constraint]]


def _plan_block(vars_: list[tuple[str, DType]], body: Exp) -> Optional[_Plan]:
    if not (isinstance(body, BinOp) and body.op is BinOpKind.IMP):
        return None
    index = {x: k for k, (x, _) in enumerate(vars_)}
    # names in scope that stand for block variables
    blockish: dict[str, int] = dict(index)
    aliases: dict[str, int] = {}
    lets: list[tuple[list[str], list[Fn]]] = []
    a = body.e1
    while isinstance(a, Let):
        layer_names, layer_fns, new_alias, ok = [], [], {}, True
        for x, r in a.binds:
            if isinstance(r, Var) and r.name in blockish:
                new_alias[x] = blockish[r.name]
            elif not any(mentions(r, n) for n in blockish):
                layer_names.append(x)
                layer_fns.append(compile_exp(r))
            else:
                ok = False
                break
        if not ok:
            break
        for x in layer_names:
            blockish.pop(x, None)
            aliases.pop(x, None)
        blockish.update(new_alias)
        aliases.update(new_alias)
        lets.append((layer_names, layer_fns))
        a = a.body
    guards: list[Fn] = []
    cons: list[list[_Constraint]] = [[] for _ in vars_]
    stack = [a]
    flat = []
    while stack:
        x = stack.pop()
        if isinstance(x, BinOp) and x.op is BinOpKind.AND:
            stack.append(x.e2)
            stack.append(x.e1)
        else:
            flat.append(x)
    useful = False
    for cj in flat:
        used = [n for n in blockish if mentions(cj, n)]
        if not used:
            guards.append(compile_exp(cj))
            useful = True
            continue
        con = _constraint(cj, blockish, vars_)
        if con is None:
            break
        cons[con.var].append(con)
        useful = useful or con.op is not BinOpKind.NEQ
    if not useful:
        return None
    return _Plan(lets, aliases, guards, cons)


_NEGATE = {BinOpKind.LT: BinOpKind.GE, BinOpKind.LE: BinOpKind.GT, BinOpKind.GT: BinOpKind.LE,
           BinOpKind.GE: BinOpKind.LT, BinOpKind.EQ: BinOpKind.NEQ, BinOpKind.NEQ: BinOpKind.EQ}


def _constraint(cj: Exp, blockish: dict[str, int], vars_) -> Optional[_Constraint]:
    if (isinstance(cj, UnOp) and cj.op is UnOpKind.NOT and isinstance(cj.e, BinOp)
            and cj.e.op in _NEGATE):
        cj = BinOp(_NEGATE[cj.e.op], cj.e.e1, cj.e.e2)
    if not (isinstance(cj, BinOp) and cj.op in _FLIP):
        return None
    best = None
    for side, other, op in ((cj.e1, cj.e2, cj.op), (cj.e2, cj.e1, _FLIP[cj.op])):
        on_len = isinstance(side, ArrLen)
        v = side.arr if on_len else side
        if not (isinstance(v, Var) and v.name in blockish):
            continue
        k = blockish[v.name]
        ty = vars_[k][1]
        if on_len != isinstance(ty, ArrT):
            continue
        if not on_len and not isinstance(ty, IntT):
            continue
        if any(mentions(other, n) for n, j in blockish.items() if j >= k):
            continue
        if best is None or k > best.var:
            best = _Constraint(k, on_len, op, compile_exp(other))
    return best


def _compile_forall(e: Forall) -> Fn:
    vars_: list[tuple[str, DType]] = []
    body = e
    while isinstance(body, Forall):
        vars_.append((body.bound, body.ty))
        body = body.body
    fbody = compile_exp(body)
    plan = _plan_block(vars_, body)

    def enumerate_full(c: Ctx, k: int, acc: list) -> bool:
        x, ty = vars_[k]
        result = True
        for v, heap in _domain(c, ty, alone=len(vars_) == 1):
            r = _instance(c, k, x, v, heap, acc, lambda: enumerate_full(c, k + 1, acc))
            if not r and result:
                result = False
        return result

    def _instance(c, k, x, v, heap, acc, inner) -> bool:
        saved_heap = c.heap
        if heap is not None:
            c.heap = heap
        old = c.bind(x, v)
        acc.append(v)
        c.active.append((f"forall {x}", v))
        try:
            if k + 1 == len(vars_):
                c.count()
                r = fbody(c)
                if type(r) is not bool:
                    raise EvalFail()
            else:
                r = inner()
            if not r and not c.trail:
                c.trail = [(q, _to_value(w)) for q, w in c.active]
            return r
        finally:
            c.active.pop()
            acc.pop()
            c.unbind(x, old)
            c.heap = saved_heap

    def narrowed(c: Ctx, k: int, acc: list, letvals) -> bool:
        x, ty = vars_[k]
        lo = hi = None
        lens = None
        cons = plan.constraints[k]
        if cons:
            vals = _eval_terms(c, cons, acc, letvals)
            if isinstance(ty, ArrT):
                llo, lhi = 0, None
                for con, t in zip(cons, vals):
                    llo, lhi = _tighten(con.op, t, llo, lhi)
                if lhi is None:
                    lhi = max(c.budget.arr_len_max, llo)
                lhi = min(lhi, llo + 64)
                lens = range(llo, lhi + 1)
            else:
                for con, t in zip(cons, vals):
                    lo, hi = _tighten(con.op, t, lo, hi)
        result = True
        for v, heap in _domain(c, ty, lo, hi, lens, len(vars_) == 1):
            r = _instance(c, k, x, v, heap, acc, lambda: narrowed(c, k + 1, acc, letvals))
            if not r and result:
                result = False
        return result

    def run(c: Ctx) -> bool:
        if plan is not None:
            try:
                letvals = _prepare(c, plan)
                if letvals is None:
                    return True
                return narrowed(c, 0, [], letvals)
            except _NoNarrow:
                pass
        return enumerate_full(c, 0, [])

    def _prepare(c: Ctx, plan: _Plan):
        """Evaluate outer lets and guards once; None means vacuously true."""
        saved = []
        letvals = []
        try:
            for layer_names, fns in plan.lets:
                try:
                    vals = [f(c) for f in fns]
                except (EvalFail, _Timeout):
                    raise _NoNarrow()
                letvals.append((layer_names, vals))
                saved.extend((x, c.bind(x, v)) for x, v in zip(layer_names, vals))
            for g in plan.guards:
                try:
                    r = g(c)
                except (EvalFail, _Timeout):
                    raise _NoNarrow()
                if r is False:
                    return None
                if r is not True:
                    raise _NoNarrow()
            return letvals
        finally:
            for x, old in reversed(saved):
                c.unbind(x, old)

    def _eval_terms(c: Ctx, cons, acc, letvals):
        saved = []
        try:
            for layer_names, vals in letvals:
                saved.extend((x, c.bind(x, v)) for x, v in zip(layer_names, vals))
            for alias, j in plan.aliases.items():
                if j < len(acc):
                    saved.append((alias, c.bind(alias, acc[j])))
            out = []
            for con in cons:
                try:
                    t = con.term(c)
                except (EvalFail, _Timeout):
                    raise _NoNarrow()
                if type(t) is not int:
                    raise _NoNarrow()
                out.append(t)
            return out
        finally:
            for x, old in reversed(saved):
                c.unbind(x, old)

    return run


def _tighten(op: BinOpKind, t: int, lo, hi):
    if op is BinOpKind.LT:
        hi = t - 1 if hi is None else min(hi, t - 1)
    elif op is BinOpKind.LE:
        hi = t if hi is None else min(hi, t)
    elif op is BinOpKind.GT:
        lo = t + 1 if lo is None else max(lo, t + 1)
    elif op is BinOpKind.GE:
        lo = t if lo is None else max(lo, t)
    elif op is BinOpKind.EQ:
        lo = t if lo is None else max(lo, t)
        hi = t if hi is None else min(hi, t)
    return lo, hi


# ----------------------------------------------------------- heap havoc


def _heap_free(e: Exp) -> bool:
    """True when evaluating ``e`` never reads cell contents of the current heap."""
    match e:
        case ArrSel():
            return False
        case Old() | OldHeap() | Prev() | PrevHeap():
            return True
        case Forall(_, ArrT(), _) | ForallHeap() | FunCall() | SetPrev():
            return False
    return all(_heap_free(k) for k in exp_children(e))


def _guided_updates(body: Exp):
    """Cell equalities ``arr[p] == v`` in the antecedent under a havoc.

    Returns (let layers, [(arr_fn, idx_fn, val_fn)]) with every function
    independent of the havocked heap, or None.
    """
    bound: set[str] = set()
    while isinstance(body, Forall):
        bound.add(body.bound)
        body = body.body
    if not (isinstance(body, BinOp) and body.op is BinOpKind.IMP):
        return None
    a = body.e1
    layers = []
    while isinstance(a, Let):
        if not all(_heap_free(r) and not any(mentions(r, n) for n in bound) for _, r in a.binds):
            return None
        layers.append(([x for x, _ in a.binds], [compile_exp(r) for _, r in a.binds]))
        bound -= {x for x, _ in a.binds}
        a = a.body
    out = []
    stack, flat = [a], []
    while stack:
        x = stack.pop()
        if isinstance(x, BinOp) and x.op is BinOpKind.AND:
            stack += [x.e2, x.e1]
        else:
            flat.append(x)
    for cj in flat:
        if not (isinstance(cj, BinOp) and cj.op is BinOpKind.EQ):
            continue
        for lhs, rhs in ((cj.e1, cj.e2), (cj.e2, cj.e1)):
            if (isinstance(lhs, ArrSel) and _heap_free(lhs.arr) and _heap_free(lhs.idx)
                    and _heap_free(rhs)
                    and not any(mentions(t, n) for t in (lhs.arr, lhs.idx, rhs) for n in bound)):
                out.append((compile_exp(lhs.arr), compile_exp(lhs.idx), compile_exp(rhs)))
                break
    return (layers, out) if out else None


def _set_cell(heap, loc, i, v):
    h = heap[loc]
    elems = h.elems[:i] + (v,) + h.elems[i + 1:]
    return heap[:loc] + (HArr(elems, h.elem_ty),) + heap[loc + 1:]


def _context_ints(c: Ctx, locs) -> list[int]:
    vals: set[int] = set(c.budget.pool_ints)
    for d in (c.locals, c.prev_locals):
        for v in d.values():
            if type(v) is int:
                vals.update((v, v - 1, v + 1))
    for loc in locs:
        for v in c.heap[loc].elems:
            if type(v) is int:
                vals.add(v)
    return sorted(vals, key=lambda v: (abs(v), v))[:24]


def _heap_variants(c: Ctx, havoc_locs: list[int], guided) -> list[tuple]:
    b = c.budget
    base = c.heap
    out: list[tuple] = []
    seen: set = set()

    def add(h):
        if len(out) < b.heap_variants_max and h not in seen:
            seen.add(h)
            out.append(h)

    if guided is not None:
        layers, ups = guided
        saved = []
        try:
            for names, fns in layers:
                vals = [f(c) for f in fns]
                saved.extend((x, c.bind(x, v)) for x, v in zip(names, vals))
            h = base
            for fa, fi, fv in ups:
                arr, i, v = fa(c), fi(c), fv(c)
                if type(arr) is ArrV and arr.loc in havoc_locs and type(i) is int \
                        and 0 <= i < arr.len and v is not None:
                    h = _set_cell(h, arr.loc, i, v)
            add(h)
        except (EvalFail, _Timeout):
            pass
        finally:
            for x, old in reversed(saved):
                c.unbind(x, old)
    add(base)
    if not havoc_locs:
        add(base + (HArr((), IntT()),))
        return out
    ints = _context_ints(c, havoc_locs)
    for loc in havoc_locs:
        h = base[loc]
        n = len(h.elems)
        if isinstance(h.elem_ty, IntT) and n:
            add(_set_cell_all(base, loc, tuple(reversed(h.elems))))
            add(_set_cell_all(base, loc, tuple(sorted(h.elems))))
            for v in ints[:6]:
                add(_set_cell_all(base, loc, (v,) * n))
    for loc in havoc_locs:
        h = base[loc]
        cand = ints if isinstance(h.elem_ty, IntT) else (
            [False, True] if isinstance(h.elem_ty, BoolT) else
            list(_STR_POOL) if isinstance(h.elem_ty, StrT) else [])
        for i in range(len(h.elems)):
            for v in cand:
                add(_set_cell(base, loc, i, v))
        for i in range(len(h.elems)):
            for j in range(i + 1, len(h.elems)):
                el = list(h.elems)
                el[i], el[j] = el[j], el[i]
                add(_set_cell_all(base, loc, tuple(el)))
    tries = 0
    while len(out) < b.heap_variants_max and tries < 4 * b.heap_variants_max:
        tries += 1
        h = base
        for loc in havoc_locs:
            cell = base[loc]
            if isinstance(cell.elem_ty, IntT):
                h = _set_cell_all(h, loc, tuple(c.rng.choice(ints) for _ in cell.elems))
        add(h)
    return out


def _set_cell_all(heap, loc, elems):
    h = heap[loc]
    return heap[:loc] + (HArr(tuple(elems), h.elem_ty),) + heap[loc + 1:]


def _compile_forallheap(havoc: Sequence[str], body: Exp) -> Fn:
    fbody = compile_exp(body)
    guided = _guided_updates(body) if havoc else None

    def forallheap(c: Ctx) -> bool:
        locs = []
        for x in havoc:
            a = c.locals.get(x)
            if type(a) is not ArrV:
                raise EvalFail()
            if a.len and a.loc < len(c.heap) and a.loc not in locs:
                locs.append(a.loc)
        saved = c.heap
        result = True
        try:
            for k, h in enumerate(_heap_variants(c, locs, guided)):
                c.heap = h
                c.count()
                c.active.append(("forallheap", k))
                try:
                    r = fbody(c)
                finally:
                    c.active.pop()
                if type(r) is not bool:
                    raise EvalFail()
                if not r and result:
                    result = False
                    if not c.trail:
                        c.trail = [(q, _to_value(w)) for q, w in c.active] + [("forallheap", k)]
        finally:
            c.heap = saved
        return result

    return forallheap


# ------------------------------------------------------------- public


def eval_vc(st: State, env: Optional[Env], e: Exp, b: Budget = Budget()):
    """Evaluate ``e`` in ``st``; raises BudgetExceeded on instance overflow."""
    c = ctx_of_state(st, env, b)
    try:
        v = _compiled(e)(c)
    except EvalFail:
        return ERR_FAIL
    except _Timeout:
        return ERR_TIMEOUT
    except RecursionError:
        return ERR_FAIL
    if v is None:
        return ERR_FAIL
    return Rval(_to_value(v))


def eval_bool(st: State, env: Optional[Env], e: Exp, b: Budget = Budget()) -> Optional[bool]:
    """True/False, or None when evaluation fails or exceeds the budget."""
    try:
        r = eval_vc(st, env, e, b)
    except BudgetExceeded:
        return None
    if isinstance(r, Rval) and isinstance(r.v, BoolV):
        return r.v.b
    return None


@dataclass
class Counterexample:
    state: State
    condition: int
    trail: list[tuple[str, object]] = field(default_factory=list)
    result: str = "false"


@dataclass
class FalsifyResult:
    counterexample: Optional[Counterexample]
    checked: int
    skipped: int

    @property
    def bounded_valid(self) -> bool:
        return self.counterexample is None


class _Sampler:
    def __init__(self, b: Budget, rng: random.Random, consts: Sequence[int] = ()):
        self.b = b
        self.rng = rng
        self.consts = list(consts)

    def int_(self) -> int:
        b, r = self.b, self.rng.random()
        if r < 0.3:
            return self.rng.choice([0, 1, -1, b.int_lo, b.int_hi])
        if r < 0.5 and self.consts:
            return self.rng.choice(self.consts)
        if r < 0.65:
            return self.rng.randint(max(b.int_lo, -10), min(b.int_hi, 10))
        return self.rng.randint(b.int_lo, b.int_hi)

    def value(self, t: DType, heap: list, pool: list):
        if isinstance(t, IntT):
            return self.int_()
        if isinstance(t, BoolT):
            return self.rng.random() < 0.5
        if isinstance(t, StrT):
            return self.rng.choice(_STR_POOL)
        same = [a for a in pool if a.elem_ty == t.elem]
        if same and self.rng.random() < 0.15:
            return self.rng.choice(same)
        n = self.rng.randint(0, self.b.arr_len_max)
        elems = [self.small(t.elem, heap, pool) for _ in range(n)]
        if isinstance(t.elem, IntT) and self.rng.random() < 0.4:
            elems.sort()
        heap.append(HArr(tuple(elems), t.elem))
        a = ArrV(n, len(heap) - 1, t.elem)
        pool.append(a)
        return a

    def small(self, t: DType, heap, pool):
        if isinstance(t, IntT):
            return self.rng.randint(-5, 5)
        return self.value(t, heap, pool)


def _zero_value(t: DType, heap: list):
    if isinstance(t, IntT):
        return 0
    if isinstance(t, BoolT):
        return False
    if isinstance(t, StrT):
        return ""
    heap.append(HArr((), t.elem))
    return ArrV(0, len(heap) - 1, t.elem)


def _literal_ints(vcs: Sequence[Exp]) -> list[int]:
    """Integer literals of the conditions and their neighbours, as sampling hints."""
    seen: set[int] = set()
    for e in vcs:
        for x in walk_exp(e):
            if isinstance(x, IntLit):
                seen.update((x.i - 1, x.i, x.i + 1))
    return sorted(seen)


def falsify(vcs: Sequence[Exp], ls: Sequence[tuple[str, DType]], b: Budget = Budget(),
            env: Optional[Env] = None, uninit: Sequence[str] = ()) -> FalsifyResult:
    """Search sampled entry states for one where some condition is not true.

    Names in ``uninit`` start uninitialized; the old snapshot equals the
    sampled state, which is how method-level conditions are read.
    """
    rng = random.Random(b.seed)
    sampler = _Sampler(b, rng, _literal_ints(vcs))
    fns = [compile_exp(e) for e in vcs]
    checked = skipped = 0
    uninit = set(uninit)
    for k in range(b.states_max):
        heap: list = []
        pool: list = []
        vals = {}
        for x, t in ls:
            if x in uninit:
                vals[x] = None
            elif k == 0:
                vals[x] = _zero_value(t, heap)
            else:
                vals[x] = sampler.value(t, heap, pool)
        heap_t = tuple(heap)
        skipped_state = False
        for idx, f in enumerate(fns):
            c = Ctx(dict(vals), heap_t, dict(vals), heap_t, {}, (), 10_000, env, b)
            try:
                r = f(c)
                bad = r is not True
                res = "false" if r is False else "not boolean"
            except EvalFail:
                bad, res = True, "evaluation failed"
            except _Timeout:
                bad, res = True, "timeout"
            except BudgetExceeded:
                skipped_state = True
                continue
            if bad:
                locals_ = tuple((x, None if vals[x] is None else _to_value(vals[x])) for x, _ in ls)
                vh = _value_heap(heap_t)
                st = State(clock=10_000, locals=locals_, heap=vh, locals_old=locals_, heap_old=vh)
                return FalsifyResult(Counterexample(st, idx, list(c.trail), res), checked + 1, skipped)
        if skipped_state:
            skipped += 1
        else:
            checked += 1
    return FalsifyResult(None, checked, skipped)


# ------------------------------------------------------------------ SMT


class Unsupported(Exception):
    pass


class SolverSpawnError(Exception):
    pass


@dataclass(frozen=True)
class SmtResult:
    kind: str  # Valid | Invalid | Unknown | Unsupported
    detail: str = ""


def _sym(x: str) -> str:
    return "|" + x.replace("|", "_").replace("\\", "_") + "|"


def _num(i: int) -> str:
    return str(i) if i >= 0 else f"(- {-i})"


class _Smt:
    def __init__(self):
        self.nonlinear = False
        self.counter = 0

    def fresh(self, base: str) -> str:
        self.counter += 1
        return f"{base}!{self.counter}"

    def tr(self, e: Exp, env: dict, old_env: dict) -> tuple[str, str]:
        """(value, definedness) terms."""
        match e:
            case IntLit(i):
                return _num(i), "true"
            case BoolLit(b):
                return ("true" if b else "false"), "true"
            case Var(x):
                if x not in env:
                    return "0", "false"
                return env[x]
            case UnOp(UnOpKind.NOT, a):
                v, d = self.tr(a, env, old_env)
                return f"(not {v})", d
            case UnOp(UnOpKind.NEG, a):
                v, d = self.tr(a, env, old_env)
                return f"(- {v})", d
            case BinOp(op, a, b):
                va, da = self.tr(a, env, old_env)
                vb, db = self.tr(b, env, old_env)
                if op is BinOpKind.AND:
                    return f"(and {va} {vb})", f"(and {da} (=> {va} {db}))"
                if op is BinOpKind.OR:
                    return f"(or {va} {vb})", f"(and {da} (or {va} {db}))"
                if op is BinOpKind.IMP:
                    return f"(=> {va} {vb})", f"(and {da} (=> {va} {db}))"
                d = f"(and {da} {db})"
                if op is BinOpKind.EQ:
                    return f"(= {va} {vb})", d
                if op is BinOpKind.NEQ:
                    return f"(not (= {va} {vb}))", d
                if op is BinOpKind.MUL and not (isinstance(a, IntLit) or isinstance(b, IntLit)):
                    self.nonlinear = True
                if op in (BinOpKind.DIV, BinOpKind.MOD):
                    if not isinstance(b, IntLit):
                        self.nonlinear = True
                    d = f"(and {da} {db} (not (= {vb} 0)))"
                sym = {BinOpKind.ADD: "+", BinOpKind.SUB: "-", BinOpKind.MUL: "*",
                       BinOpKind.DIV: "div", BinOpKind.MOD: "mod", BinOpKind.LT: "<",
                       BinOpKind.LE: "<=", BinOpKind.GT: ">", BinOpKind.GE: ">="}[op]
                return f"({sym} {va} {vb})", d
            case Ite(cnd, t, f):
                vc, dc = self.tr(cnd, env, old_env)
                vt, dt = self.tr(t, env, old_env)
                vf, df = self.tr(f, env, old_env)
                return f"(ite {vc} {vt} {vf})", f"(and {dc} (ite {vc} {dt} {df}))"
            case Let(binds, body):
                parts = [self.tr(r, env, old_env) for _, r in binds]
                inner = dict(env)
                names = []
                for (x, _), _p in zip(binds, parts):
                    y = self.fresh(x)
                    names.append(y)
                    inner[x] = (_sym(y), "true")
                vb, db = self.tr(body, inner, old_env)
                lets = " ".join(f"({_sym(y)} {v})" for y, (v, _) in zip(names, parts))
                defs = " ".join(d for _, d in parts)
                return f"(let ({lets}) {vb})", f"(and {defs} (let ({lets}) {db}))"
            case Forall(x, ty, body):
                if not isinstance(ty, (IntT, BoolT)):
                    raise Unsupported(f"quantifier over {ty}")
                y = self.fresh(x)
                inner = {**env, x: (_sym(y), "true")}
                vb, db = self.tr(body, inner, old_env)
                sort = "Int" if isinstance(ty, IntT) else "Bool"
                return (f"(forall (({_sym(y)} {sort})) {vb})",
                        f"(forall (({_sym(y)} {sort})) {db})")
            case Old(a):
                return self.tr(a, old_env, old_env)
        raise Unsupported(f"{type(e).__name__} is outside the SMT fragment")


def smt_emit(vc: Exp, ls: Sequence[tuple[str, DType]], uninit: Sequence[str] = ()) -> str:
    """SMT-LIB script whose ``check-sat`` is unsat iff ``vc`` is valid."""
    t = _Smt()
    decls, env, old_env, eqs = [], {}, {}, []
    for x, ty in ls:
        if not isinstance(ty, (IntT, BoolT)):
            if any(isinstance(s, Var) and s.name == x for s in walk_exp(vc)):
                raise Unsupported(f"variable {x} of type {ty}")
            continue
        sort = "Int" if isinstance(ty, IntT) else "Bool"
        decls.append(f"(declare-const {_sym(x)} {sort})")
        defined = "false" if x in uninit else "true"
        env[x] = (_sym(x), defined)
        entry = f"old!{x}"
        decls.append(f"(declare-const {_sym(entry)} {sort})")
        old_env[x] = (_sym(entry), defined)
        eqs.append(f"(assert (= {_sym(entry)} {_sym(x)}))")
    v, d = t.tr(vc, env, old_env)
    logic = "NIA" if t.nonlinear else "LIA"
    lines = [f"(set-logic {logic})", *decls, *eqs, f"(assert (not (and {d} {v})))", "(check-sat)"]
    return "\n".join(lines) + "\n"


def smt_check(vcs: Sequence[Exp], ls: Sequence[tuple[str, DType]], solver_cmd: str,
              timeout: float = 10.0, uninit: Sequence[str] = ()) -> list[SmtResult]:
    out = []
    for vc in vcs:
        try:
            script = smt_emit(vc, ls, uninit)
        except Unsupported as u:
            out.append(SmtResult("Unsupported", str(u)))
            continue
        out.append(run_solver(script + "(get-model)\n", solver_cmd, timeout))
    return out


def run_solver(script: str, solver_cmd: str, timeout: float) -> SmtResult:
    fd, path = tempfile.mkstemp(suffix=".smt2")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(script)
        try:
            proc = subprocess.run([*solver_cmd.split(), path], capture_output=True, text=True,
                                  timeout=timeout)
        except FileNotFoundError as exc:
            raise SolverSpawnError(f"cannot run solver {solver_cmd!r}: {exc}") from exc
        except PermissionError as exc:
            raise SolverSpawnError(f"cannot run solver {solver_cmd!r}: {exc}") from exc
        except subprocess.TimeoutExpired:
            return SmtResult("Unknown", "timeout")
    finally:
        os.unlink(path)
    lines = proc.stdout.strip().splitlines()
    first = lines[0].strip() if lines else ""
    if first == "unsat":
        return SmtResult("Valid")
    if first == "sat":
        return SmtResult("Invalid", "\n".join(lines[1:]))
    return SmtResult("Unknown", proc.stdout.strip() or proc.stderr.strip())
