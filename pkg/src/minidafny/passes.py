"""Source-to-source passes run before compilation: assert removal and freshening."""

from __future__ import annotations

import itertools
from typing import Iterator

from .ast import (
    ArrAllocRhs, ArrSelLhs, Assert, Assign, Dec, Exp, ExpRhs, Forall, ForallHeap,
    Function, If, Let, MetCall, Method, Program, Skip, Stmt, Then, Var, VarLhs, While,
    map_exp, walk_exp, walk_stmt, stmt_exps,
)


def remove_assert_stmt(s: Stmt) -> Stmt:
    match s:
        case Assert():
            return Skip()
        case Then(a, b):
            return Then(remove_assert_stmt(a), remove_assert_stmt(b))
        case If(g, a, b):
            return If(g, remove_assert_stmt(a), remove_assert_stmt(b))
        case Dec(binds, scope):
            return Dec(binds, remove_assert_stmt(scope))
        case While(g, invs, decrs, mods, body):
            return While(g, invs, decrs, mods, remove_assert_stmt(body))
    return s


def remove_assert(p: Program) -> Program:
    out = []
    for m in p.members:
        if isinstance(m, Method):
            m = Method(m.name, m.ins, m.reqs, m.ens, m.decreases, m.mods, m.outs,
                       remove_assert_stmt(m.body))
        out.append(m)
    return Program(tuple(out))


# ------------------------------------------------------------- freshen


class _Freshener:
    def __init__(self, prefix: str = "v"):
        self.counter = itertools.count()
        self.prefix = prefix

    def fresh(self) -> str:
        return f"{self.prefix}{next(self.counter)}"

    def exp(self, e: Exp, env: dict[str, str]) -> Exp:
        match e:
            case Var(x):
                return Var(env.get(x, x))
            case Forall(x, ty, body):
                y = self.fresh()
                return Forall(y, ty, self.exp(body, {**env, x: y}))
            case Let(binds, body):
                rhss = [self.exp(r, env) for _, r in binds]
                inner = dict(env)
                names = []
                for x, _ in binds:
                    inner[x] = self.fresh()
                    names.append(inner[x])
                return Let(tuple(zip(names, rhss)), self.exp(body, inner))
            case ForallHeap(h, body):
                return ForallHeap(tuple(env.get(x, x) for x in h), self.exp(body, env))
        return map_exp(e, lambda c: self.exp(c, env))

    def stmt(self, s: Stmt, env: dict[str, str]) -> Stmt:
        ren = lambda x: env.get(x, x)
        match s:
            case Assert(e):
                return Assert(self.exp(e, env))
            case Then(a, b):
                return Then(self.stmt(a, env), self.stmt(b, env))
            case If(g, a, b):
                return If(self.exp(g, env), self.stmt(a, env), self.stmt(b, env))
            case Dec(binds, scope):
                inner = dict(env)
                out = []
                for x, ty, init in binds:
                    init2 = None if init is None else self.exp(init, env)
                    inner[x] = self.fresh()
                    out.append((inner[x], ty, init2))
                return Dec(tuple(out), self.stmt(scope, inner))
            case Assign(pairs):
                out = []
                for lhs, rhs in pairs:
                    if isinstance(lhs, VarLhs):
                        lhs = VarLhs(ren(lhs.name))
                    else:
                        lhs = ArrSelLhs(self.exp(lhs.arr, env), self.exp(lhs.idx, env))
                    if isinstance(rhs, ExpRhs):
                        rhs = ExpRhs(self.exp(rhs.e, env))
                    else:
                        rhs = ArrAllocRhs(rhs.elem_ty, self.exp(rhs.len, env))
                    out.append((lhs, rhs))
                return Assign(tuple(out))
            case While(g, invs, decrs, mods, body):
                return While(self.exp(g, env), tuple(self.exp(e, env) for e in invs),
                             tuple(self.exp(e, env) for e in decrs), tuple(map(ren, mods)),
                             self.stmt(body, env))
            case MetCall(lhss, f, args):
                return MetCall(tuple(map(ren, lhss)), f, tuple(self.exp(a, env) for a in args))
        return s

    def member(self, m):
        env = {}
        for x, _ in m.ins:
            env[x] = self.fresh()
        ins = tuple((env[x], t) for x, t in m.ins)
        if isinstance(m, Function):
            return Function(m.name, ins, m.res_ty, self.exp(m.body, env))
        for x, _ in m.outs:
            env[x] = self.fresh()
        outs = tuple((env[x], t) for x, t in m.outs)
        ex = lambda es: tuple(self.exp(e, env) for e in es)
        return Method(m.name, ins, ex(m.reqs), ex(m.ens), ex(m.decreases),
                      tuple(env.get(x, x) for x in m.mods), outs, self.stmt(m.body, env))


def freshen_program(p: Program) -> Program:
    """Alpha-rename every binder to a program-unique ``v<k>`` name."""
    fr = _Freshener()
    return Program(tuple(fr.member(m) for m in p.members))


# ------------------------------------------------------------- checkers


def _exp_binders(e: Exp) -> Iterator[str]:
    for sub in walk_exp(e):
        match sub:
            case Forall(x, _, _):
                yield x
            case Let(binds, _):
                yield from (x for x, _ in binds)


def program_binders(p: Program) -> list[str]:
    """Every binding occurrence in ``p``, with repetitions."""
    out: list[str] = []
    for m in p.members:
        out.extend(x for x, _ in m.ins)
        if isinstance(m, Function):
            out.extend(_exp_binders(m.body))
            continue
        out.extend(x for x, _ in m.outs)
        for e in (*m.reqs, *m.ens, *m.decreases):
            out.extend(_exp_binders(e))
        for s in walk_stmt(m.body):
            if isinstance(s, Dec):
                out.extend(x for x, _, _ in s.binds)
            for e in stmt_exps(s):
                out.extend(_exp_binders(e))
    return out


def is_fresh_program(p: Program) -> bool:
    bs = program_binders(p)
    return all(x.startswith("v") for x in bs) and len(set(bs)) == len(bs)


def no_shadow(declared, s: Stmt) -> bool:
    declared = frozenset(declared)
    match s:
        case Dec(binds, scope):
            names = [x for x, _, _ in binds]
            if any(x in declared for x in names) or len(set(names)) != len(names):
                return False
            return no_shadow(declared | set(names), scope)
        case Then(a, b) | If(_, a, b):
            return no_shadow(declared, a) and no_shadow(declared, b)
        case While(_, _, _, _, body):
            return no_shadow(declared, body)
    return True


def method_no_shadow(m: Method) -> bool:
    return no_shadow({x for x, _ in m.ins} | {x for x, _ in m.outs}, m.body)
