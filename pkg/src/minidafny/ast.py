"""Abstract syntax for the imperative Dafny subset.

All nodes are frozen dataclasses; sequences are stored as tuples so that
trees are hashable and can be shared freely.
"""

from __future__ import annotations

from dataclasses import dataclass, fields
from enum import Enum
from typing import Callable, Iterator, Optional, Union


# ---------------------------------------------------------------- types


@dataclass(frozen=True)
class IntT:
    def __str__(self) -> str:
        return "int"


@dataclass(frozen=True)
class BoolT:
    def __str__(self) -> str:
        return "bool"


@dataclass(frozen=True)
class StrT:
    def __str__(self) -> str:
        return "string"


@dataclass(frozen=True)
class ArrT:
    elem: "DType"

    def __str__(self) -> str:
        return f"array<{self.elem}>"


DType = Union[IntT, BoolT, StrT, ArrT]

INT = IntT()
BOOL = BoolT()
STR = StrT()


# ---------------------------------------------------------- expressions


class UnOpKind(str, Enum):
    NOT = "not"
    NEG = "neg"


class BinOpKind(str, Enum):
    ADD = "+"
    SUB = "-"
    MUL = "*"
    DIV = "div"
    MOD = "mod"
    LT = "<"
    LE = "<="
    GT = ">"
    GE = ">="
    EQ = "=="
    NEQ = "!="
    AND = "and"
    OR = "or"
    IMP = "==>"


ARITH_OPS = frozenset({BinOpKind.ADD, BinOpKind.SUB, BinOpKind.MUL, BinOpKind.DIV, BinOpKind.MOD})
CMP_OPS = frozenset({BinOpKind.LT, BinOpKind.LE, BinOpKind.GT, BinOpKind.GE})
EQ_OPS = frozenset({BinOpKind.EQ, BinOpKind.NEQ})
BOOL_OPS = frozenset({BinOpKind.AND, BinOpKind.OR, BinOpKind.IMP})


@dataclass(frozen=True)
class IntLit:
    i: int


@dataclass(frozen=True)
class BoolLit:
    b: bool


@dataclass(frozen=True)
class StrLit:
    s: str


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class UnOp:
    op: UnOpKind
    e: "Exp"


@dataclass(frozen=True)
class BinOp:
    op: BinOpKind
    e1: "Exp"
    e2: "Exp"


@dataclass(frozen=True)
class Ite:
    cond: "Exp"
    thn: "Exp"
    els: "Exp"


@dataclass(frozen=True)
class ArrLen:
    arr: "Exp"


@dataclass(frozen=True)
class ArrSel:
    arr: "Exp"
    idx: "Exp"


@dataclass(frozen=True)
class FunCall:
    name: str
    args: tuple["Exp", ...]


@dataclass(frozen=True)
class Forall:
    bound: str
    ty: DType
    body: "Exp"


@dataclass(frozen=True)
class Let:
    """Simultaneous binding: every right-hand side sees the outer scope."""

    binds: tuple[tuple[str, "Exp"], ...]
    body: "Exp"


@dataclass(frozen=True)
class Old:
    e: "Exp"


@dataclass(frozen=True)
class OldHeap:
    e: "Exp"


@dataclass(frozen=True)
class Prev:
    e: "Exp"


@dataclass(frozen=True)
class PrevHeap:
    e: "Exp"


@dataclass(frozen=True)
class SetPrev:
    e: "Exp"


@dataclass(frozen=True)
class ForallHeap:
    havoc: tuple[str, ...]
    e: "Exp"


Exp = Union[
    IntLit, BoolLit, StrLit, Var, UnOp, BinOp, Ite, ArrLen, ArrSel, FunCall,
    Forall, Let, Old, OldHeap, Prev, PrevHeap, SetPrev, ForallHeap,
]

TRUE = BoolLit(True)
FALSE = BoolLit(False)

# forms that only make sense inside annotations / verification conditions
VERIFICATION_ONLY = (Forall, Old, OldHeap, Prev, PrevHeap, SetPrev, ForallHeap)


# ------------------------------------------------------------ statements


@dataclass(frozen=True)
class VarLhs:
    name: str


@dataclass(frozen=True)
class ArrSelLhs:
    arr: Exp
    idx: Exp


@dataclass(frozen=True)
class ExpRhs:
    e: Exp


@dataclass(frozen=True)
class ArrAllocRhs:
    elem_ty: DType
    len: Exp


Lhs = Union[VarLhs, ArrSelLhs]
Rhs = Union[ExpRhs, ArrAllocRhs]


@dataclass(frozen=True)
class Skip:
    pass


@dataclass(frozen=True)
class Assert:
    e: Exp


@dataclass(frozen=True)
class Then:
    s1: "Stmt"
    s2: "Stmt"


@dataclass(frozen=True)
class If:
    guard: Exp
    thn: "Stmt"
    els: "Stmt"


@dataclass(frozen=True)
class Dec:
    binds: tuple[tuple[str, DType, Optional[Exp]], ...]
    scope: "Stmt"


@dataclass(frozen=True)
class Assign:
    pairs: tuple[tuple[Lhs, Rhs], ...]


@dataclass(frozen=True)
class While:
    guard: Exp
    invs: tuple[Exp, ...]
    decrs: tuple[Exp, ...]
    mods: tuple[str, ...]
    body: "Stmt"


@dataclass(frozen=True)
class Return:
    pass


@dataclass(frozen=True)
class MetCall:
    lhss: tuple[str, ...]
    method: str
    args: tuple[Exp, ...]


Stmt = Union[Skip, Assert, Then, If, Dec, Assign, While, Return, MetCall]


# --------------------------------------------------------------- members


@dataclass(frozen=True)
class Method:
    name: str
    ins: tuple[tuple[str, DType], ...]
    reqs: tuple[Exp, ...]
    ens: tuple[Exp, ...]
    decreases: tuple[Exp, ...]
    mods: tuple[str, ...]
    outs: tuple[tuple[str, DType], ...]
    body: Stmt


@dataclass(frozen=True)
class Function:
    name: str
    ins: tuple[tuple[str, DType], ...]
    res_ty: DType
    body: Exp


Member = Union[Method, Function]


@dataclass(frozen=True)
class Program:
    members: tuple[Member, ...] = ()

    @property
    def methods(self) -> list[Method]:
        return [m for m in self.members if isinstance(m, Method)]


# ------------------------------------------------------------ utilities


def conj(es) -> Exp:
    """Right-nested conjunction; the empty conjunction is ``true``."""
    es = list(es)
    if not es:
        return TRUE
    out = es[-1]
    for e in reversed(es[:-1]):
        out = BinOp(BinOpKind.AND, e, out)
    return out


def conjuncts(e: Exp) -> list[Exp]:
    """Flatten nested ``and`` into its left-to-right operand list."""
    if isinstance(e, BinOp) and e.op is BinOpKind.AND:
        return conjuncts(e.e1) + conjuncts(e.e2)
    return [e]


def seq(*stmts: Stmt) -> Stmt:
    """Right-nested ``Then`` over a non-empty statement list."""
    out = stmts[-1]
    for s in reversed(stmts[:-1]):
        out = Then(s, out)
    return out


def member_lookup(p: Program, name: str) -> Optional[Member]:
    for m in p.members:
        if m.name == name:
            return m
    return None


def exp_children(e: Exp) -> Iterator[Exp]:
    match e:
        case UnOp(_, a) | ArrLen(a) | Old(a) | OldHeap(a) | Prev(a) | PrevHeap(a) | SetPrev(a):
            yield a
        case BinOp(_, a, b) | ArrSel(a, b):
            yield a
            yield b
        case Ite(c, t, f):
            yield c
            yield t
            yield f
        case FunCall(_, args):
            yield from args
        case Forall(_, _, body) | ForallHeap(_, body):
            yield body
        case Let(binds, body):
            for _, rhs in binds:
                yield rhs
            yield body


def map_exp(e: Exp, f: Callable[[Exp], Exp]) -> Exp:
    """Rebuild ``e`` with ``f`` applied to each immediate sub-expression."""
    match e:
        case UnOp(op, a):
            return UnOp(op, f(a))
        case BinOp(op, a, b):
            return BinOp(op, f(a), f(b))
        case Ite(c, t, x):
            return Ite(f(c), f(t), f(x))
        case ArrLen(a):
            return ArrLen(f(a))
        case ArrSel(a, i):
            return ArrSel(f(a), f(i))
        case FunCall(n, args):
            return FunCall(n, tuple(f(a) for a in args))
        case Forall(x, ty, body):
            return Forall(x, ty, f(body))
        case Let(binds, body):
            return Let(tuple((x, f(r)) for x, r in binds), f(body))
        case ForallHeap(h, body):
            return ForallHeap(h, f(body))
        case Old(a) | OldHeap(a) | Prev(a) | PrevHeap(a) | SetPrev(a):
            return type(e)(f(a))
    return e


def free_vars(e: Exp) -> frozenset[str]:
    """Names read from the current locals.

    Names under ``Old``/``Prev`` read other local snapshots and are still
    reported: callers that need scoping precision treat them conservatively.
    """
    match e:
        case Var(x):
            return frozenset((x,))
        case Forall(x, _, body):
            return free_vars(body) - {x}
        case Let(binds, body):
            out = free_vars(body) - {x for x, _ in binds}
            for _, rhs in binds:
                out |= free_vars(rhs)
            return out
        case ForallHeap(h, body):
            return free_vars(body) | frozenset(h)
    out: frozenset[str] = frozenset()
    for c in exp_children(e):
        out |= free_vars(c)
    return out


def mentions(e: Exp, name: str) -> bool:
    """Syntactic occurrence of ``name`` anywhere in ``e``, binders included."""
    match e:
        case Var(x):
            return x == name
        case Forall(x, _, _) if x == name:
            return True
        case Let(binds, _) if any(x == name for x, _ in binds):
            return True
        case ForallHeap(h, _) if name in h:
            return True
    return any(mentions(c, name) for c in exp_children(e))


def stmt_exps(s: Stmt) -> Iterator[Exp]:
    """Every expression occurring directly in ``s`` (not in sub-statements)."""
    match s:
        case Assert(e):
            yield e
        case If(g, _, _):
            yield g
        case Dec(binds, _):
            for _, _, init in binds:
                if init is not None:
                    yield init
        case Assign(pairs):
            for lhs, rhs in pairs:
                if isinstance(lhs, ArrSelLhs):
                    yield lhs.arr
                    yield lhs.idx
                yield rhs.e if isinstance(rhs, ExpRhs) else rhs.len
        case While(g, invs, decrs, _, _):
            yield g
            yield from invs
            yield from decrs
        case MetCall(_, _, args):
            yield from args


def stmt_children(s: Stmt) -> Iterator[Stmt]:
    match s:
        case Then(a, b):
            yield a
            yield b
        case If(_, a, b):
            yield a
            yield b
        case Dec(_, scope):
            yield scope
        case While(_, _, _, _, body):
            yield body


def assigned_locals(s: Stmt) -> frozenset[str]:
    """Locals written by ``s``, excluding names declared inside ``s``."""
    match s:
        case Assign(pairs):
            return frozenset(lhs.name for lhs, _ in pairs if isinstance(lhs, VarLhs))
        case MetCall(lhss, _, _):
            return frozenset(lhss)
        case Dec(binds, scope):
            return assigned_locals(scope) - {x for x, _, _ in binds}
    out: frozenset[str] = frozenset()
    for c in stmt_children(s):
        out |= assigned_locals(c)
    return out


def walk_exp(e: Exp) -> Iterator[Exp]:
    yield e
    for c in exp_children(e):
        yield from walk_exp(c)


def walk_stmt(s: Stmt) -> Iterator[Stmt]:
    yield s
    for c in stmt_children(s):
        yield from walk_stmt(c)


def method_exps(m: Method) -> Iterator[Exp]:
    yield from m.reqs
    yield from m.ens
    yield from m.decreases
    for s in walk_stmt(m.body):
        yield from stmt_exps(s)


def program_names(p: Program) -> set[str]:
    """Every identifier used anywhere in ``p`` (members, binders, references)."""
    names: set[str] = set()

    def add_exp(e: Exp) -> None:
        for sub in walk_exp(e):
            match sub:
                case Var(x) | Forall(x, _, _):
                    names.add(x)
                case Let(binds, _):
                    names.update(x for x, _ in binds)
                case ForallHeap(h, _):
                    names.update(h)
                case FunCall(f, _):
                    names.add(f)

    for m in p.members:
        names.add(m.name)
        names.update(x for x, _ in m.ins)
        if isinstance(m, Function):
            add_exp(m.body)
            continue
        names.update(x for x, _ in m.outs)
        names.update(m.mods)
        for e in method_exps(m):
            add_exp(e)
        for s in walk_stmt(m.body):
            match s:
                case Dec(binds, _):
                    names.update(x for x, _, _ in binds)
                case Assign(pairs):
                    names.update(lhs.name for lhs, _ in pairs if isinstance(lhs, VarLhs))
                case MetCall(lhss, f, _):
                    names.update(lhss)
                    names.add(f)
                case While(_, _, _, mods, _):
                    names.update(mods)
    return names


def is_dataclass_node(x) -> bool:
    return hasattr(x, "__dataclass_fields__")


def node_fields(x):
    return [(f.name, getattr(x, f.name)) for f in fields(x)]
