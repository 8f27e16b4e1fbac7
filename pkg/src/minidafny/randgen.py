"""Seeded random generation of expressions, statements, states and programs.

Two flavours: ``TypedGen`` builds mostly well-typed code over a fixed set of
variables and helper members, for evaluation properties; ``SyntaxGen``
builds arbitrary well-formed syntax, for round-trip checks.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from typing import Optional

from .ast import (
    ArrAllocRhs, ArrLen, ArrSel, ArrSelLhs, ArrT, Assert, Assign, BinOp, BinOpKind, BoolLit,
    BoolT, Dec, DType, Exp, ExpRhs, Forall, ForallHeap, FunCall, Function, If, IntLit, IntT,
    Ite, Let, MetCall, Method, Old, OldHeap, Prev, PrevHeap, Program, Return, SetPrev, Skip,
    Stmt, StrLit, StrT, Then, UnOp, UnOpKind, Var, VarLhs, While, INT, BOOL, STR,
)
from .frontend import parse_program
from .semantics import ArrV, BoolV, HArr, IntV, State

ARITH = (BinOpKind.ADD, BinOpKind.SUB, BinOpKind.MUL, BinOpKind.DIV, BinOpKind.MOD)
CMP = (BinOpKind.LT, BinOpKind.LE, BinOpKind.GT, BinOpKind.GE, BinOpKind.EQ, BinOpKind.NEQ)
LOGIC = (BinOpKind.AND, BinOpKind.OR, BinOpKind.IMP)

# Helper members that random code may call. ``spin`` and ``Forever`` never
# terminate, so the clock is exercised.
HELPERS = parse_program("""
(program
  (function inc (ins (k int)) int (+ k 1))
  (function half (ins (k int)) int (ite (<= k 0) 0 (+ 1 (call half (div k 2)))))
  (function spin (ins (k int)) int (call spin k))
  (method Twice (ins (k int)) (outs (r int)) (requires) (ensures) (decreases) (modifies)
    (body (then (assign ((r (* 2 k)))) (return))))
  (method Forever (ins (k int)) (outs (r int)) (requires) (ensures) (decreases) (modifies)
    (body (then (while true (invariants) (decreases) (modifies) (assign ((k (+ k 1)))))
                (return))))
  (method Poke (ins (b (array int)) (k int)) (outs) (requires) (ensures) (decreases) (modifies b)
    (body (then (assign (((sel b 0) k))) (return)))))
""")


@dataclass(frozen=True)
class GenConfig:
    max_depth: int = 6
    int_vars: tuple[str, ...] = ("x", "y", "z")
    bool_vars: tuple[str, ...] = ("p", "q")
    arr_vars: tuple[str, ...] = ("a", "b")
    ill_typed: float = 0.03  # chance of a deliberately wrong-typed leaf


class TypedGen:
    def __init__(self, rng: random.Random, cfg: GenConfig = GenConfig()):
        self.rng = rng
        self.cfg = cfg
        self.decs = 0

    def _leafy(self, d: int) -> bool:
        return d <= 0 or self.rng.random() < 0.25

    def int_exp(self, d: int) -> Exp:
        r = self.rng
        if self.rng.random() < self.cfg.ill_typed:
            return self.bool_exp(0)
        if self._leafy(d):
            k = r.random()
            if k < 0.45:
                return IntLit(r.randint(-5, 9))
            if k < 0.9:
                return Var(r.choice(self.cfg.int_vars))
            return ArrLen(Var(r.choice(self.cfg.arr_vars)))
        k = r.random()
        if k < 0.5:
            return BinOp(r.choice(ARITH), self.int_exp(d - 1), self.int_exp(d - 1))
        if k < 0.6:
            return UnOp(UnOpKind.NEG, self.int_exp(d - 1))
        if k < 0.7:
            return Ite(self.bool_exp(d - 1), self.int_exp(d - 1), self.int_exp(d - 1))
        if k < 0.8:
            return ArrSel(Var(r.choice(self.cfg.arr_vars)), self.int_exp(d - 1))
        if k < 0.9:
            f = r.choice(["inc", "half", "half", "spin"])
            return FunCall(f, (self.int_exp(d - 1),))
        x = r.choice(self.cfg.int_vars)
        return Let(((x, self.int_exp(d - 1)),), self.int_exp(d - 1))

    def bool_exp(self, d: int) -> Exp:
        r = self.rng
        if self._leafy(d):
            return BoolLit(r.random() < 0.5) if r.random() < 0.4 else Var(r.choice(self.cfg.bool_vars))
        k = r.random()
        if k < 0.45:
            return BinOp(r.choice(CMP), self.int_exp(d - 1), self.int_exp(d - 1))
        if k < 0.75:
            return BinOp(r.choice(LOGIC), self.bool_exp(d - 1), self.bool_exp(d - 1))
        if k < 0.85:
            return UnOp(UnOpKind.NOT, self.bool_exp(d - 1))
        if k < 0.92:
            return BinOp(r.choice((BinOpKind.EQ, BinOpKind.NEQ)), Var(r.choice(self.cfg.arr_vars)),
                         Var(r.choice(self.cfg.arr_vars)))
        return Ite(self.bool_exp(d - 1), self.bool_exp(d - 1), self.bool_exp(d - 1))

    def exp(self, d: int) -> Exp:
        return self.int_exp(d) if self.rng.random() < 0.6 else self.bool_exp(d)

    def stmt(self, d: int) -> Stmt:
        r = self.rng
        cfg = self.cfg
        if d <= 0 or r.random() < 0.2:
            k = r.random()
            if k < 0.45:
                return Assign(((VarLhs(r.choice(cfg.int_vars)), ExpRhs(self.int_exp(2))),))
            if k < 0.6:
                return Assign(((ArrSelLhs(Var(r.choice(cfg.arr_vars)), self.int_exp(1)),
                                ExpRhs(self.int_exp(2))),))
            if k < 0.7:
                return Skip()
            if k < 0.78:
                return Return()
            if k < 0.86:
                return Assert(self.bool_exp(2))
            if k < 0.94:
                return MetCall((r.choice(cfg.int_vars),), r.choice(["Twice", "Twice", "Forever"]),
                               (self.int_exp(2),))
            return MetCall((), "Poke", (Var(r.choice(cfg.arr_vars)), self.int_exp(1)))
        k = r.random()
        if k < 0.35:
            return Then(self.stmt(d - 1), self.stmt(d - 1))
        if k < 0.55:
            return If(self.bool_exp(2), self.stmt(d - 1), self.stmt(d - 1))
        if k < 0.7:
            x = r.choice(cfg.int_vars)
            guard = BinOp(BinOpKind.LT, Var(x), IntLit(r.randint(-2, 6))) if r.random() < 0.8 \
                else self.bool_exp(2)
            step = Assign(((VarLhs(x), ExpRhs(BinOp(BinOpKind.ADD, Var(x), IntLit(1)))),))
            return While(guard, (), (), (), Then(self.stmt(d - 1), step))
        if k < 0.85:
            name = f"d{self.decs}"
            self.decs += 1
            init = self.int_exp(2) if r.random() < 0.7 else None
            body = Then(Assign(((VarLhs(name), ExpRhs(self.int_exp(2))),)), self.stmt(d - 1)) \
                if init is None else self.stmt(d - 1)
            return Dec(((name, INT, init),), body)
        pairs = []
        for x in r.sample(cfg.int_vars, r.randint(1, 2)):
            pairs.append((VarLhs(x), ExpRhs(self.int_exp(2))))
        if r.random() < 0.3:
            pairs.append((VarLhs(r.choice(cfg.arr_vars)), ArrAllocRhs(INT, IntLit(r.randint(0, 3)))))
        return Assign(tuple(pairs))

    def state(self, clock: int) -> State:
        r = self.rng
        heap = []
        locals_ = []
        for x in self.cfg.int_vars:
            locals_.append((x, IntV(r.randint(-4, 6))))
        for x in self.cfg.bool_vars:
            locals_.append((x, BoolV(r.random() < 0.5)))
        for x in self.cfg.arr_vars:
            if heap and r.random() < 0.2:
                locals_.append((x, ArrV(len(heap[0].elems), 0, INT)))
                continue
            n = r.randint(0, 4)
            heap.append(HArr(tuple(IntV(r.randint(-3, 5)) for _ in range(n)), INT))
            locals_.append((x, ArrV(n, len(heap) - 1, INT)))
        locs = tuple(locals_)
        return State(clock=clock, locals=locs, heap=tuple(heap), locals_old=locs,
                     heap_old=tuple(heap))


# ------------------------------------------------------------ syntax only

_NAME_START = "abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ_"
_NAME_REST = _NAME_START + "0123456789'.$@#"
_STR_CHARS = "ab \"\\;()xyz\t"


class SyntaxGen:
    """Arbitrary well-formed programs; no typing or scoping discipline."""

    def __init__(self, rng: random.Random, max_depth: int = 4):
        self.rng = rng
        self.max_depth = max_depth

    def name(self) -> str:
        from .frontend import RESERVED
        r = self.rng
        while True:
            s = r.choice(_NAME_START) + "".join(r.choice(_NAME_REST) for _ in range(r.randint(0, 4)))
            if s not in RESERVED:
                return s

    def type_(self, d: int = 2) -> DType:
        k = self.rng.random()
        if d > 0 and k < 0.2:
            return ArrT(self.type_(d - 1))
        return self.rng.choice([INT, INT, BOOL, STR])

    def exp(self, d: int) -> Exp:
        r = self.rng
        if d <= 0 or r.random() < 0.3:
            k = r.random()
            if k < 0.35:
                return IntLit(r.randint(-1000, 1000))
            if k < 0.5:
                return BoolLit(r.random() < 0.5)
            if k < 0.6:
                return StrLit("".join(r.choice(_STR_CHARS) for _ in range(r.randint(0, 6))))
            return Var(self.name())
        k = r.randint(0, 17)
        e = lambda: self.exp(d - 1)
        if k == 0:
            return UnOp(r.choice(list(UnOpKind)), e())
        if k <= 3:
            return BinOp(r.choice(list(BinOpKind)), e(), e())
        if k == 4:
            return Ite(e(), e(), e())
        if k == 5:
            return ArrLen(e())
        if k == 6:
            return ArrSel(e(), e())
        if k == 7:
            return FunCall(self.name(), tuple(e() for _ in range(r.randint(0, 3))))
        if k == 8:
            return Forall(self.name(), self.type_(), e())
        if k == 9:
            names = list(dict.fromkeys(self.name() for _ in range(r.randint(1, 3))))
            return Let(tuple((x, e()) for x in names), e())
        if k == 10:
            return Old(e())
        if k == 11:
            return OldHeap(e())
        if k == 12:
            return Prev(e())
        if k == 13:
            return PrevHeap(e())
        if k == 14:
            return SetPrev(e())
        if k == 15:
            return ForallHeap(tuple(self.name() for _ in range(r.randint(0, 2))), e())
        return BinOp(r.choice(list(BinOpKind)), e(), e())

    def stmt(self, d: int) -> Stmt:
        r = self.rng
        e = lambda: self.exp(2)
        if d <= 0 or r.random() < 0.3:
            k = r.randint(0, 4)
            if k == 0:
                return Skip()
            if k == 1:
                return Return()
            if k == 2:
                return Assert(e())
            if k == 3:
                return MetCall(tuple(self.name() for _ in range(r.randint(0, 2))), self.name(),
                               tuple(e() for _ in range(r.randint(0, 2))))
            return self._assign()
        k = r.randint(0, 4)
        if k == 0:
            return Then(self.stmt(d - 1), self.stmt(d - 1))
        if k == 1:
            return If(e(), self.stmt(d - 1), self.stmt(d - 1))
        if k == 2:
            binds = tuple((self.name(), self.type_(), e() if r.random() < 0.5 else None)
                          for _ in range(r.randint(1, 3)))
            return Dec(binds, self.stmt(d - 1))
        if k == 3:
            return While(e(), tuple(e() for _ in range(r.randint(0, 2))),
                         tuple(e() for _ in range(r.randint(0, 2))),
                         tuple(self.name() for _ in range(r.randint(0, 2))), self.stmt(d - 1))
        return self._assign()

    def _assign(self) -> Stmt:
        r = self.rng
        pairs = []
        for _ in range(r.randint(1, 3)):
            lhs = VarLhs(self.name()) if r.random() < 0.6 else ArrSelLhs(self.exp(1), self.exp(1))
            rhs = ExpRhs(self.exp(2)) if r.random() < 0.8 else ArrAllocRhs(self.type_(), self.exp(1))
            pairs.append((lhs, rhs))
        return Assign(tuple(pairs))

    def binds(self, lo: int = 0, hi: int = 3):
        return tuple((self.name(), self.type_()) for _ in range(self.rng.randint(lo, hi)))

    def member(self):
        r = self.rng
        if r.random() < 0.25:
            return Function(self.name(), self.binds(), self.type_(), self.exp(self.max_depth))
        es = lambda: tuple(self.exp(self.max_depth - 1) for _ in range(r.randint(0, 2)))
        return Method(self.name(), self.binds(), es(), es(), es(),
                      tuple(self.name() for _ in range(r.randint(0, 2))), self.binds(),
                      self.stmt(self.max_depth))

    def program(self) -> Program:
        return Program(tuple(self.member() for _ in range(self.rng.randint(0, 3))))


def helpers_with(*members) -> Program:
    return Program(HELPERS.members + tuple(members))


def typed_instances(seed: int, n: int, cfg: GenConfig = GenConfig(), kind: Optional[str] = None):
    """Yield ``n`` (kind, node, state) triples; kind is "exp" or "stmt"."""
    rng = random.Random(seed)
    g = TypedGen(rng, cfg)
    for i in range(n):
        k = kind or ("exp" if i % 2 == 0 else "stmt")
        depth = rng.randint(0, cfg.max_depth)
        node = g.exp(depth) if k == "exp" else g.stmt(depth)
        yield k, node, g.state(rng.choice([0, 1, 3, 10, 50, 400]))
