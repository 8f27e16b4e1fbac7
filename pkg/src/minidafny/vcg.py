"""Weakest-precondition verification condition generator.

``VCG.stmt`` follows the shape of the wp relation: given the normal-exit
postcondition ``post``, the return postcondition ``ens``, the caller's
entry-valued decreases ``decs``, the havocable array names ``mods`` and
the local typing ``ls``, it returns a list of conditions whose
conjunction must hold before the statement.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import networkx as nx

from .ast import (
    ArrAllocRhs, ArrLen, ArrSel, ArrSelLhs, ArrT, Assert, Assign, BinOp, BinOpKind,
    BOOL, BoolLit, Dec, DType, Exp, ExpRhs, FALSE, Forall, ForallHeap, FunCall, Function,
    If, INT, IntLit, IntT, BoolT, StrT, Ite, Let, MetCall, Method, Old, OldHeap, Prev,
    PrevHeap, Program, Return, SetPrev, Skip, STR, Stmt, StrLit, Then, TRUE, UnOp,
    UnOpKind, Var, VarLhs, While, assigned_locals, conj, free_vars, map_exp,
    program_names, walk_stmt,
)


class VcgError(Exception):
    pass


class TypeCheckError(VcgError):
    pass


Typing = Sequence[tuple[str, DType]]


# ------------------------------------------------------------ typing


def _lookup(ls: Typing, x: str) -> Optional[DType]:
    for n, t in ls:
        if n == x:
            return t
    return None


def type_of(ls: Typing, e: Exp) -> DType:
    match e:
        case IntLit():
            return INT
        case BoolLit():
            return BOOL
        case StrLit():
            return STR
        case Var(x):
            t = _lookup(ls, x)
            if t is None:
                raise TypeCheckError(f"unbound name {x}")
            return t
        case UnOp(UnOpKind.NOT, a):
            _expect(ls, a, BOOL, "not")
            return BOOL
        case UnOp(UnOpKind.NEG, a):
            _expect(ls, a, INT, "neg")
            return INT
        case BinOp(op, a, b):
            if op in (BinOpKind.AND, BinOpKind.OR, BinOpKind.IMP):
                _expect(ls, a, BOOL, op.value)
                _expect(ls, b, BOOL, op.value)
                return BOOL
            if op in (BinOpKind.EQ, BinOpKind.NEQ):
                ta, tb = type_of(ls, a), type_of(ls, b)
                if ta != tb:
                    raise TypeCheckError(f"{op.value}: operand types {ta} and {tb} differ")
                return BOOL
            _expect(ls, a, INT, op.value)
            _expect(ls, b, INT, op.value)
            return INT if op in (BinOpKind.ADD, BinOpKind.SUB, BinOpKind.MUL,
                                 BinOpKind.DIV, BinOpKind.MOD) else BOOL
        case Ite(c, t, f):
            _expect(ls, c, BOOL, "ite")
            tt, tf = type_of(ls, t), type_of(ls, f)
            if tt != tf:
                raise TypeCheckError(f"ite: branch types {tt} and {tf} differ")
            return tt
        case ArrLen(a):
            _array(ls, a)
            return INT
        case ArrSel(a, i):
            t = _array(ls, a)
            _expect(ls, i, INT, "array index")
            return t.elem
        case FunCall(f, _):
            raise TypeCheckError(f"unsupported: function call {f} in verification conditions")
        case Forall(x, ty, body):
            _expect(((x, ty), *ls), body, BOOL, "forall body")
            return BOOL
        case Let(binds, body):
            inner = tuple((x, type_of(ls, r)) for x, r in binds) + tuple(ls)
            return type_of(inner, body)
        case ForallHeap(h, body):
            for x in h:
                if not isinstance(_lookup(ls, x), ArrT):
                    raise TypeCheckError(f"forallheap: {x} is not an array")
            _expect(ls, body, BOOL, "forallheap body")
            return BOOL
        case Old(a) | OldHeap(a) | Prev(a) | PrevHeap(a) | SetPrev(a):
            return type_of(ls, a)
    raise TypeCheckError(f"not an expression: {e!r}")


def _expect(ls: Typing, e: Exp, t: DType, what: str) -> None:
    got = type_of(ls, e)
    if got != t:
        raise TypeCheckError(f"{what}: expected {t}, got {got}")


def _array(ls: Typing, e: Exp) -> ArrT:
    t = type_of(ls, e)
    if not isinstance(t, ArrT):
        raise TypeCheckError(f"expected an array, got {t}")
    return t


def get_types(ls: Typing, es: Sequence[Exp]) -> list[DType]:
    return [type_of(ls, e) for e in es]


# ------------------------------------------------------------ levels


def call_graph(p: Program) -> nx.DiGraph:
    g = nx.DiGraph()
    names = {m.name for m in p.methods}
    g.add_nodes_from(sorted(names))
    for m in p.methods:
        for s in walk_stmt(m.body):
            if isinstance(s, MetCall) and s.method in names:
                g.add_edge(m.name, s.method)
    return g


def method_levels(p: Program) -> dict[str, int]:
    """Level per method: callees outside a method's SCC sit strictly lower."""
    g = call_graph(p)
    dag = nx.condensation(g)
    level: dict[int, int] = {}
    for c in reversed(list(nx.topological_sort(dag))):
        level[c] = 1 + max((level[s] for s in dag.successors(c)), default=-1)
    return {n: level[dag.graph["mapping"][n]] for n in g.nodes}


# ------------------------------------------------------------ helpers


@dataclass(frozen=True)
class MethodInfo:
    name: str
    ins: tuple[tuple[str, DType], ...]
    outs: tuple[tuple[str, DType], ...]
    reqs: tuple[Exp, ...]
    ens: tuple[Exp, ...]
    decreases: tuple[Exp, ...]
    mods: tuple[str, ...]
    level: int

    @classmethod
    def of(cls, m: Method, level: int) -> "MethodInfo":
        return cls(m.name, m.ins, m.outs, m.reqs, m.ens, m.decreases, m.mods, level)


class NameSupply:
    def __init__(self, taken):
        self.taken = set(taken)
        self.counters: dict[str, int] = {}

    def fresh(self, prefix: str) -> str:
        k = self.counters.get(prefix, 0)
        while f"{prefix}{k}" in self.taken:
            k += 1
        self.counters[prefix] = k + 1
        name = f"{prefix}{k}"
        self.taken.add(name)
        return name


def _and(a: Exp, b: Exp) -> Exp:
    return BinOp(BinOpKind.AND, a, b)


def _imp(a: Exp, b: Exp) -> Exp:
    return BinOp(BinOpKind.IMP, a, b)


def _le(a: Exp, b: Exp) -> Exp:
    return BinOp(BinOpKind.LE, a, b)


def _lt(a: Exp, b: Exp) -> Exp:
    return BinOp(BinOpKind.LT, a, b)


def _eq(a: Exp, b: Exp) -> Exp:
    return BinOp(BinOpKind.EQ, a, b)


ZERO = IntLit(0)


def forall_close(binds: Sequence[tuple[str, DType]], body: Exp) -> Exp:
    for x, t in reversed(list(binds)):
        body = Forall(x, t, body)
    return body


def let_or_plain(binds, body: Exp) -> Exp:
    return Let(tuple(binds), body) if binds else body


def lex_decrease(cur: Sequence[Exp], prev: Sequence[Exp]) -> list[Exp]:
    """Strict lexicographic decrease of ``cur`` below ``prev``.

    A single measure gives the three separate conjuncts ``cur < prev``,
    ``0 <= prev`` and ``0 <= cur``; longer lists give one disjunction over
    prefixes, each with non-negativity of the compared components.
    """
    n = min(len(cur), len(prev))
    if n == 0:
        raise VcgError("decreases: empty measure")
    if n == 1:
        return [_lt(cur[0], prev[0]), _le(ZERO, prev[0]), _le(ZERO, cur[0])]
    alts = []
    for k in range(n):
        parts = [_eq(cur[j], prev[j]) for j in range(k)]
        parts += [_lt(cur[k], prev[k]), _le(ZERO, prev[k]), _le(ZERO, cur[k])]
        alts.append(conj(parts))
    out = alts[-1]
    for a in reversed(alts[:-1]):
        out = BinOp(BinOpKind.OR, a, out)
    return [out]


def default_exp(t: DType) -> Optional[Exp]:
    if isinstance(t, IntT):
        return ZERO
    if isinstance(t, BoolT):
        return FALSE
    if isinstance(t, StrT):
        return StrLit("")
    return None


def strip_old(e: Exp, ins: frozenset[str], heap_wrap) -> Exp:
    """Re-express a callee's ensures at the call site.

    ``Old(Var x)`` for an in-parameter becomes ``Var x`` (bound by the
    surrounding Let); any other ``Old(e)`` reads the heap at the call,
    which ``heap_wrap`` expresses.
    """
    match e:
        case Old(Var(x)) if x in ins:
            return Var(x)
        case Old(a) | OldHeap(a):
            return heap_wrap(strip_old(a, ins, heap_wrap))
    return map_exp(e, lambda c: strip_old(c, ins, heap_wrap))


# --------------------------------------------------------------- VCG


@dataclass
class VcInput:
    m: dict[str, MethodInfo]
    stmt: Stmt
    post: list[Exp]
    ens: list[Exp]
    decs: list[Exp]
    mods: list[str]
    ls: list[tuple[str, DType]]
    caller: Optional[str] = None
    taken: set[str] = field(default_factory=set)


class VCG:
    def __init__(self, methods: dict[str, MethodInfo], caller: Optional[str], names: NameSupply):
        self.methods = methods
        self.caller = caller
        self.names = names

    def stmt(self, s: Stmt, post, ens, decs, mods, ls) -> list[Exp]:
        match s:
            case Return():
                return list(ens)
            case Skip():
                return list(post)
            case Assert(e):
                _expect(ls, e, BOOL, "assert")
                return [e, *post]
            case Then(Assign(((VarLhs(a), ArrAllocRhs(ty, n)),)), s2):
                return self.alloc(a, ty, n, s2, post, ens, decs, mods, ls)
            case Then(s1, s2):
                mid = self.stmt(s2, post, ens, decs, mods, ls)
                return self.stmt(s1, mid, ens, decs, mods, ls)
            case If(g, t, f):
                _expect(ls, g, BOOL, "if guard")
                wt = self.stmt(t, post, ens, decs, mods, ls)
                wf = self.stmt(f, post, ens, decs, mods, ls)
                return [Ite(g, conj(wt), conj(wf))]
            case Dec(binds, scope):
                return self.dec(binds, scope, post, ens, decs, mods, ls)
            case Assign(((VarLhs(a), ArrAllocRhs(ty, n)),)):
                return self.alloc(a, ty, n, Skip(), post, ens, decs, mods, ls)
            case Assign(pairs):
                return self.assign(pairs, post, mods, ls)
            case While():
                return self.while_(s, post, ens, decs, mods, ls)
            case MetCall():
                return self.call(s, post, decs, mods, ls)
        raise VcgError(f"unsupported statement {type(s).__name__}")

    # -- declarations

    def dec(self, binds, scope, post, ens, decs, mods, ls) -> list[Exp]:
        names = [x for x, _, _ in binds]
        if len(set(names)) != len(names):
            raise VcgError("stmt_vcg:Dec: variables not distinct")
        for x in names:
            if _lookup(ls, x) is not None:
                raise VcgError(f"stmt_vcg:Dec: {x} shadows a variable in scope")
        inits = []
        for x, t, init in binds:
            if init is not None:
                got = type_of(ls, init)
                if got != t:
                    raise TypeCheckError(f"stmt_vcg:Dec: {x} declared {t} but initialized with {got}")
                inits.append((x, init))
        inner = [(x, t) for x, t, _ in binds] + list(ls)
        wp = self.stmt(scope, post, ens, decs, mods, inner)
        uninit = {x for x, _, init in binds if init is None}
        for c in wp:
            read = uninit & free_vars(c)
            if read:
                raise VcgError(f"stmt_vcg:Dec: {sorted(read)[0]} may be read before it is assigned")
        if not inits:
            return wp
        return [Let(tuple(inits), conj(wp))]

    # -- assignment

    def assign(self, pairs, post, mods, ls) -> list[Exp]:
        if all(isinstance(l, VarLhs) and isinstance(r, ExpRhs) for l, r in pairs):
            names = [l.name for l, _ in pairs]
            exps = [r.e for _, r in pairs]
            if len(set(names)) != len(names):
                raise VcgError("stmt_vcg:Assign: variables not distinct")
            for x in names:
                if x in mods:
                    raise VcgError(f"stmt_vcg:Assign: assigning to mods ({x})")
                if _lookup(ls, x) is None:
                    raise VcgError(f"stmt_vcg:Assign: {x} is not declared")
            if get_types(ls, exps) != get_types(ls, [Var(x) for x in names]):
                raise TypeCheckError("stmt_vcg:Assign: types of left and right sides differ")
            return [Let(tuple(zip(names, exps)), conj(post))]
        if len(pairs) == 1 and isinstance(pairs[0][0], ArrSelLhs) and isinstance(pairs[0][1], ExpRhs):
            lhs, rhs = pairs[0]
            return self.array_update(lhs, rhs.e, post, mods, ls)
        raise VcgError("unsupported: assignment mixing arrays, allocation or several array updates")

    def array_update(self, lhs: ArrSelLhs, e: Exp, post, mods, ls) -> list[Exp]:
        if not isinstance(lhs.arr, Var):
            raise VcgError("unsupported: array update through a non-variable array expression")
        a = lhs.arr.name
        if a not in mods:
            raise VcgError(f"stmt_vcg:ArrayUpdate: {a} is not in the modifies clause")
        t = _array(ls, lhs.arr)
        _expect(ls, lhs.idx, INT, "array index")
        _expect(ls, e, t.elem, "array element")
        i = self.names.fresh("q")
        arr, idx, vi = Var(a), lhs.idx, Var(i)
        frame = Forall(i, INT, _imp(
            _and(BinOp(BinOpKind.NEQ, vi, Prev(idx)), _and(_le(ZERO, vi), _lt(vi, ArrLen(arr)))),
            _eq(ArrSel(arr, vi), PrevHeap(ArrSel(arr, vi)))))
        updated = _and(_eq(ArrSel(arr, Prev(idx)), Prev(e)), frame)
        return [_le(ZERO, idx), _lt(idx, ArrLen(arr)),
                SetPrev(ForallHeap((a,), _imp(updated, conj(post))))]

    def alloc(self, a, ty, n, s2, post, ens, decs, mods, ls) -> list[Exp]:
        at = _lookup(ls, a)
        if at is None:
            raise VcgError(f"stmt_vcg:Alloc: {a} is not declared")
        if at != ArrT(ty):
            raise TypeCheckError(f"stmt_vcg:Alloc: {a} has type {at}, not {ArrT(ty)}")
        if a in mods:
            raise VcgError(f"stmt_vcg:Alloc: assigning to mods ({a})")
        _expect(ls, n, INT, "array length")
        wp_next = self.stmt(s2, post, ens, decs, [*mods, a], ls)
        i = self.names.fresh("q")
        arr, vi = Var(a), Var(i)
        in_range = _and(_le(ZERO, vi), _lt(vi, ArrLen(arr)))
        d = default_exp(ty)
        if d is None:
            init = Forall(i, INT, _imp(in_range, _eq(ArrLen(ArrSel(arr, vi)), ZERO)))
        else:
            x = self.names.fresh("q")
            init = Let(((x, Prev(d)),), Forall(i, INT, _imp(in_range, _eq(ArrSel(arr, vi), Var(x)))))
        fact = _and(_eq(ArrLen(arr), Prev(n)), init)
        return [_le(ZERO, n),
                SetPrev(ForallHeap((), Forall(a, ArrT(ty), _imp(fact, conj(wp_next)))))]

    # -- loops

    def while_(self, w: While, post, ens, decs, mods, ls) -> list[Exp]:
        if not w.decrs:
            raise VcgError("stmt_vcg:While: a decreases clause is required")
        for x in w.mods:
            if x not in mods:
                raise VcgError(f"stmt_vcg:While: loop modifies {x} outside the enclosing modifies")
        _expect(ls, w.guard, BOOL, "while guard")
        for e in w.invs:
            _expect(ls, e, BOOL, "invariant")
        for e in w.decrs:
            _expect(ls, e, INT, "decreases")
        snaps = [self.names.fresh("d") for _ in w.decrs]
        svars = [Var(d) for d in snaps]
        body_post = [*w.invs, *lex_decrease(list(w.decrs), svars)]
        body_wp = self.stmt(w.body, body_post, ens, decs, list(w.mods), ls)
        inv = conj(w.invs)
        maintained = _imp(_and(w.guard, inv),
                          Let(tuple(zip(snaps, w.decrs)), conj(body_wp)))
        exit_ = _imp(_and(UnOp(UnOpKind.NOT, w.guard), inv), conj(post))
        assigned = sorted(x for x in assigned_locals(w.body) if _lookup(ls, x) is not None)
        binds = [(x, _lookup(ls, x)) for x in assigned]
        close = lambda e: forall_close(binds, e)
        if w.mods:
            wrap = lambda e: ForallHeap(tuple(w.mods), close(e))
        else:
            wrap = close
        return [*w.invs, wrap(maintained), wrap(exit_)]

    # -- calls

    def call(self, s: MetCall, post, decs, mods, ls) -> list[Exp]:
        f = self.methods.get(s.method)
        if f is None:
            raise VcgError(f"stmt_vcg:MetCall: unknown method {s.method}")
        if len(s.args) != len(f.ins) or len(s.lhss) != len(f.outs):
            raise VcgError(f"stmt_vcg:MetCall: arity mismatch calling {f.name}")
        if len(set(s.lhss)) != len(s.lhss):
            raise VcgError("stmt_vcg:MetCall: variables not distinct")
        for x, (_, t) in zip(s.lhss, f.outs):
            lt = _lookup(ls, x)
            if lt is None:
                raise VcgError(f"stmt_vcg:MetCall: {x} is not declared")
            if x in mods:
                raise VcgError(f"stmt_vcg:MetCall: assigning to mods ({x})")
            if lt != t:
                raise TypeCheckError(f"stmt_vcg:MetCall: {x} has type {lt}, callee returns {t}")
        for a, (_, t) in zip(s.args, f.ins):
            _expect(ls, a, t, f"argument of {f.name}")

        ins = [x for x, _ in f.ins]
        binds = tuple(zip(ins, s.args))
        out: list[Exp] = [let_or_plain(binds, conj(f.reqs))]

        caller = self.methods.get(self.caller) if self.caller else None
        if caller is not None and caller.level == f.level:
            if not f.decreases or not decs:
                raise VcgError(f"stmt_vcg:MetCall: recursive call to {f.name} needs decreases clauses")
            cur = [let_or_plain(binds, d) for d in f.decreases]
            out += lex_decrease(cur, list(decs))

        havoc = []
        for x in f.mods:
            if x not in ins:
                raise VcgError(f"stmt_vcg:MetCall: {f.name} modifies {x}, which is not an in-parameter")
            arg = s.args[ins.index(x)]
            if not isinstance(arg, Var) or arg.name not in mods:
                raise VcgError(f"stmt_vcg:MetCall: argument for modified {x} must be a variable in modifies")
            havoc.append(arg.name)

        tmps = [self.names.fresh("q") for _ in f.outs]
        tbinds = [(q, t) for q, (_, t) in zip(tmps, f.outs)]
        out_binds = tuple((o, Var(q)) for (o, _), q in zip(f.outs, tmps))
        ins_set = frozenset(ins)
        rest = let_or_plain(tuple((x, Var(q)) for x, q in zip(s.lhss, tmps)), conj(post))
        if havoc:
            pre_binds = tuple((x, Prev(a)) for x, a in binds)
            ens = conj(strip_old(e, ins_set, PrevHeap) for e in f.ens)
            cont = forall_close(tbinds, _imp(Let(pre_binds + out_binds, ens), rest))
            out.append(SetPrev(ForallHeap(tuple(dict.fromkeys(havoc)), cont)))
        else:
            ens = conj(strip_old(e, ins_set, lambda e: e) for e in f.ens)
            out.append(forall_close(tbinds, _imp(let_or_plain(binds + out_binds, ens), rest)))
        return out


def stmt_vcg(inp: VcInput) -> list[Exp]:
    names = NameSupply(inp.taken)
    return VCG(inp.m, inp.caller, names).stmt(inp.stmt, inp.post, inp.ens, inp.decs, inp.mods, inp.ls)


# ---------------------------------------------------------- methods


def method_infos(p: Program) -> dict[str, MethodInfo]:
    levels = method_levels(p)
    return {m.name: MethodInfo.of(m, levels[m.name]) for m in p.methods}


def method_vcg(p: Program, name: str, infos: Optional[dict[str, MethodInfo]] = None,
               taken: Optional[set[str]] = None) -> list[Exp]:
    """Conditions for one method, open in its parameters.

    Each condition is ``requires ==> C`` and is meant to be read in an
    entry state whose old snapshot equals the current one.
    """
    m = next((x for x in p.methods if x.name == name), None)
    if m is None:
        raise VcgError(f"no method named {name}")
    infos = infos if infos is not None else method_infos(p)
    taken = taken if taken is not None else program_names(p)
    ls = [*m.ins, *m.outs]
    pnames = [x for x, _ in ls]
    if len(set(pnames)) != len(pnames):
        raise VcgError(f"{name}: parameter names not distinct")
    for e in m.reqs:
        _expect(m.ins, e, BOOL, "requires")
    for e in m.ens:
        _expect(ls, e, BOOL, "ensures")
    for e in m.decreases:
        _expect(m.ins, e, INT, "decreases")
    for x in m.mods:
        if not isinstance(_lookup(m.ins, x), ArrT):
            raise VcgError(f"{name}: modifies {x} must name an array in-parameter")
    vcg = VCG(infos, name, NameSupply(taken))
    wp = vcg.stmt(m.body, [FALSE], list(m.ens), [Old(d) for d in m.decreases], list(m.mods), ls)
    if not m.reqs:
        return wp
    pre = conj(m.reqs)
    return [_imp(pre, c) for c in wp]


@dataclass
class ProgramVc:
    entries: list[tuple[str, list[Exp]]]
    warnings: list[str] = field(default_factory=list)


def program_vcg(p: Program) -> ProgramVc:
    names = [m.name for m in p.members]
    dups = sorted({n for n in names if names.count(n) > 1})
    if dups:
        raise VcgError(f"duplicate member names: {', '.join(dups)}")
    infos = method_infos(p)
    taken = program_names(p)
    out = ProgramVc([])
    for m in p.members:
        if isinstance(m, Function):
            out.warnings.append(f"function {m.name} skipped: functions are not verified")
            continue
        out.entries.append((m.name, method_vcg(p, m.name, infos, taken)))
    return out


def method_typing(p: Program, name: str) -> list[tuple[str, DType]]:
    m = next(x for x in p.methods if x.name == name)
    return [*m.ins, *m.outs]
