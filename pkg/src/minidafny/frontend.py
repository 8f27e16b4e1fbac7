"""Canonical S-expression format for programs: reader, parser, printer, normalizer."""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Optional, Union

from .ast import (
    ArrAllocRhs, ArrLen, ArrSel, ArrSelLhs, ArrT, Assert, Assign, BinOp, BinOpKind,
    BoolLit, BOOL, Dec, DType, Exp, ExpRhs, Forall, ForallHeap, FunCall, Function, If,
    INT, IntLit, Ite, Let, MetCall, Method, Old, OldHeap, Prev, PrevHeap, Program,
    Return, SetPrev, Skip, STR, Stmt, StrLit, Then, UnOp, UnOpKind, Var, VarLhs,
    While, map_exp,
)


class ParseError(Exception):
    def __init__(self, msg: str, line: int = 0, col: int = 0):
        super().__init__(f"{line}:{col}: {msg}" if line else msg)
        self.msg = msg
        self.line = line
        self.col = col


# ----------------------------------------------------------------- reader


@dataclass(frozen=True)
class Atom:
    text: str
    quoted: bool = False
    line: int = 0
    col: int = 0

    def __eq__(self, other):
        return isinstance(other, Atom) and (self.text, self.quoted) == (other.text, other.quoted)

    def __hash__(self):
        return hash((self.text, self.quoted))


@dataclass(frozen=True)
class SList:
    items: tuple["SExp", ...]
    line: int = 0
    col: int = 0

    def __eq__(self, other):
        return isinstance(other, SList) and self.items == other.items

    def __hash__(self):
        return hash(self.items)


SExp = Union[Atom, SList]

_DELIMS = set('()";')


def read_sexps(text: str) -> list[SExp]:
    """Read every top-level S-expression in ``text``."""
    pos = 0
    line, col = 1, 1
    n = len(text)
    stack: list[tuple[list, int, int]] = []
    top: list[SExp] = []

    def advance(k: int = 1) -> None:
        nonlocal pos, line, col
        for _ in range(k):
            if text[pos] == "\n":
                line += 1
                col = 1
            else:
                col += 1
            pos += 1

    def emit(x: SExp) -> None:
        (stack[-1][0] if stack else top).append(x)

    while pos < n:
        c = text[pos]
        if c.isspace():
            advance()
        elif c == ";":
            while pos < n and text[pos] != "\n":
                advance()
        elif c == "(":
            stack.append(([], line, col))
            advance()
        elif c == ")":
            if not stack:
                raise ParseError("unbalanced ')'", line, col)
            items, l0, c0 = stack.pop()
            emit(SList(tuple(items), l0, c0))
            advance()
        elif c == '"':
            l0, c0 = line, col
            advance()
            buf = []
            while True:
                if pos >= n:
                    raise ParseError("unterminated string literal", l0, c0)
                ch = text[pos]
                if ch == "\\":
                    if pos + 1 >= n or text[pos + 1] not in '"\\':
                        raise ParseError("bad escape in string literal", line, col)
                    buf.append(text[pos + 1])
                    advance(2)
                elif ch == '"':
                    advance()
                    break
                else:
                    buf.append(ch)
                    advance()
            emit(Atom("".join(buf), True, l0, c0))
        else:
            l0, c0 = line, col
            start = pos
            while pos < n and not text[pos].isspace() and text[pos] not in _DELIMS:
                advance()
            emit(Atom(text[start:pos], False, l0, c0))
    if stack:
        _, l0, c0 = stack[-1]
        raise ParseError("unclosed '('", l0, c0)
    return top


def _quote(s: str) -> str:
    return '"' + s.replace("\\", "\\\\").replace('"', '\\"') + '"'


def sexp_to_str(x: SExp, width: int = 78, indent: int = 0) -> str:
    """Deterministic layout: flat when it fits, otherwise head + indented children."""
    flat = _flat(x)
    if isinstance(x, Atom) or len(flat) + indent <= width:
        return flat
    items = x.items
    head = _flat(items[0]) if items else ""
    lines = ["(" + head]
    for it in items[1:]:
        lines.append(" " * (indent + 2) + sexp_to_str(it, width, indent + 2))
    return "\n".join(lines) + ")"


def _flat(x: SExp) -> str:
    if isinstance(x, Atom):
        return _quote(x.text) if x.quoted else x.text
    return "(" + " ".join(_flat(i) for i in x.items) + ")"


# ----------------------------------------------------------------- parser

_INT_RE = re.compile(r"-?[0-9]+\Z")
_NAME_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_'.$@#]*\Z")

UNOPS = {k.value: k for k in UnOpKind}
BINOPS = {k.value: k for k in BinOpKind}
EXP_TAGS = {"ite", "len", "sel", "call", "forall", "let", "old", "oldheap", "prev",
            "prevheap", "setprev", "forallheap"} | set(UNOPS) | set(BINOPS)
RESERVED = EXP_TAGS | {"true", "false", "program", "method", "function", "ins", "outs",
                       "requires", "ensures", "decreases", "modifies", "body", "skip",
                       "assert", "then", "if", "dec", "assign", "while", "invariants",
                       "return", "metcall", "alloc", "int", "bool", "string", "array"}


def _where(x: SExp) -> tuple[int, int]:
    return x.line, x.col


def _fail(x: SExp, msg: str):
    raise ParseError(msg, *_where(x))


def _name(x: SExp, what: str = "a name") -> str:
    if isinstance(x, Atom) and not x.quoted and _NAME_RE.match(x.text) and x.text not in RESERVED:
        return x.text
    _fail(x, f"expected {what}, got {_flat(x)}")


def _tagged(x: SExp, tag: str, what: str) -> tuple[SExp, ...]:
    if isinstance(x, SList) and x.items and x.items[0] == Atom(tag):
        return x.items[1:]
    _fail(x, f"expected {what} ({tag} ...), got {_flat(x)}")


def _arity(x: SList, n: int, tag: str) -> None:
    if len(x.items) - 1 != n:
        _fail(x, f"'{tag}' expects {n} argument(s), got {len(x.items) - 1}")


def parse_type(x: SExp) -> DType:
    if isinstance(x, Atom) and not x.quoted:
        if x.text == "int":
            return INT
        if x.text == "bool":
            return BOOL
        if x.text == "string":
            return STR
    if isinstance(x, SList) and len(x.items) == 2 and x.items[0] == Atom("array"):
        return ArrT(parse_type(x.items[1]))
    _fail(x, f"expected a type, got {_flat(x)}")


def parse_exp(x: SExp) -> Exp:
    if isinstance(x, Atom):
        if x.quoted:
            return StrLit(x.text)
        if _INT_RE.match(x.text):
            return IntLit(int(x.text))
        if x.text == "true":
            return BoolLit(True)
        if x.text == "false":
            return BoolLit(False)
        return Var(_name(x, "an expression"))
    if not x.items:
        _fail(x, "expected an expression, got ()")
    head = x.items[0]
    if not isinstance(head, Atom) or head.quoted or head.text not in EXP_TAGS:
        _fail(x, f"unknown expression form {_flat(head)}")
    tag = head.text
    args = x.items[1:]
    if tag in UNOPS:
        _arity(x, 1, tag)
        return UnOp(UNOPS[tag], parse_exp(args[0]))
    if tag in BINOPS:
        _arity(x, 2, tag)
        return BinOp(BINOPS[tag], parse_exp(args[0]), parse_exp(args[1]))
    if tag == "ite":
        _arity(x, 3, tag)
        return Ite(*(parse_exp(a) for a in args))
    if tag == "len":
        _arity(x, 1, tag)
        return ArrLen(parse_exp(args[0]))
    if tag == "sel":
        _arity(x, 2, tag)
        return ArrSel(parse_exp(args[0]), parse_exp(args[1]))
    if tag == "call":
        if not args:
            _fail(x, "'call' expects a function name")
        return FunCall(_name(args[0], "a function name"), tuple(parse_exp(a) for a in args[1:]))
    if tag == "forall":
        _arity(x, 2, tag)
        b = args[0]
        if not (isinstance(b, SList) and len(b.items) == 2):
            _fail(b, "expected a binder (NAME TYPE)")
        return Forall(_name(b.items[0]), parse_type(b.items[1]), parse_exp(args[1]))
    if tag == "let":
        _arity(x, 2, tag)
        bs = args[0]
        if not isinstance(bs, SList):
            _fail(bs, "expected a binding list ((NAME exp)*)")
        binds = []
        for b in bs.items:
            if not (isinstance(b, SList) and len(b.items) == 2):
                _fail(b, "expected a binding (NAME exp)")
            binds.append((_name(b.items[0]), parse_exp(b.items[1])))
        if len({n for n, _ in binds}) != len(binds):
            _fail(bs, "duplicate names in let")
        return Let(tuple(binds), parse_exp(args[1]))
    if tag == "forallheap":
        _arity(x, 2, tag)
        hs = args[0]
        if not isinstance(hs, SList):
            _fail(hs, "expected a name list (NAME*)")
        return ForallHeap(tuple(_name(h) for h in hs.items), parse_exp(args[1]))
    _arity(x, 1, tag)
    wrap = {"old": Old, "oldheap": OldHeap, "prev": Prev, "prevheap": PrevHeap, "setprev": SetPrev}
    return wrap[tag](parse_exp(args[0]))


def _names(x: SExp) -> tuple[str, ...]:
    if not isinstance(x, SList):
        _fail(x, "expected a name list (NAME*)")
    return tuple(_name(i) for i in x.items)


def parse_stmt(x: SExp) -> Stmt:
    if not (isinstance(x, SList) and x.items and isinstance(x.items[0], Atom)):
        _fail(x, f"expected a statement, got {_flat(x)}")
    tag = x.items[0].text
    args = x.items[1:]
    if tag == "skip":
        _arity(x, 0, tag)
        return Skip()
    if tag == "return":
        _arity(x, 0, tag)
        return Return()
    if tag == "assert":
        _arity(x, 1, tag)
        return Assert(parse_exp(args[0]))
    if tag == "then":
        _arity(x, 2, tag)
        return Then(parse_stmt(args[0]), parse_stmt(args[1]))
    if tag == "if":
        _arity(x, 3, tag)
        return If(parse_exp(args[0]), parse_stmt(args[1]), parse_stmt(args[2]))
    if tag == "dec":
        _arity(x, 2, tag)
        bs = args[0]
        if not isinstance(bs, SList):
            _fail(bs, "expected a declaration list ((NAME TYPE exp?)*)")
        binds = []
        for b in bs.items:
            if not (isinstance(b, SList) and len(b.items) in (2, 3)):
                _fail(b, "expected a declaration (NAME TYPE exp?)")
            init = parse_exp(b.items[2]) if len(b.items) == 3 else None
            binds.append((_name(b.items[0]), parse_type(b.items[1]), init))
        return Dec(tuple(binds), parse_stmt(args[1]))
    if tag == "assign":
        _arity(x, 1, tag)
        ps = args[0]
        if not isinstance(ps, SList):
            _fail(ps, "expected an assignment list ((lhs rhs)*)")
        pairs = []
        for p in ps.items:
            if not (isinstance(p, SList) and len(p.items) == 2):
                _fail(p, "expected an assignment pair (lhs rhs)")
            pairs.append((_parse_lhs(p.items[0]), _parse_rhs(p.items[1])))
        return Assign(tuple(pairs))
    if tag == "while":
        _arity(x, 5, tag)
        invs = _tagged(args[1], "invariants", "an invariant list")
        decrs = _tagged(args[2], "decreases", "a decreases list")
        mods = _tagged(args[3], "modifies", "a modifies list")
        return While(parse_exp(args[0]), tuple(parse_exp(e) for e in invs),
                     tuple(parse_exp(e) for e in decrs), tuple(_name(m) for m in mods),
                     parse_stmt(args[4]))
    if tag == "metcall":
        _arity(x, 3, tag)
        argl = args[2]
        if not isinstance(argl, SList):
            _fail(argl, "expected an argument list (exp*)")
        return MetCall(_names(args[0]), _name(args[1], "a method name"),
                       tuple(parse_exp(a) for a in argl.items))
    _fail(x, f"unknown statement form '{tag}'")


def _parse_lhs(x: SExp):
    if isinstance(x, SList) and x.items and x.items[0] == Atom("sel"):
        _arity(x, 2, "sel")
        return ArrSelLhs(parse_exp(x.items[1]), parse_exp(x.items[2]))
    return VarLhs(_name(x, "an assignment target"))


def _parse_rhs(x: SExp):
    if isinstance(x, SList) and x.items and x.items[0] == Atom("alloc"):
        _arity(x, 2, "alloc")
        return ArrAllocRhs(parse_type(x.items[1]), parse_exp(x.items[2]))
    return ExpRhs(parse_exp(x))


def _binds(x: SExp) -> tuple[tuple[str, DType], ...]:
    if not isinstance(x, SList):
        _fail(x, "expected a binder list")
    out = []
    for b in x.items:
        if not (isinstance(b, SList) and len(b.items) == 2):
            _fail(b, "expected a binder (NAME TYPE)")
        out.append((_name(b.items[0]), parse_type(b.items[1])))
    return tuple(out)


def parse_member(x: SExp):
    if not (isinstance(x, SList) and x.items and isinstance(x.items[0], Atom)):
        _fail(x, "expected a member (method ...) or (function ...)")
    tag = x.items[0].text
    args = x.items[1:]
    if tag == "method":
        _arity(x, 8, tag)
        name = _name(args[0], "a method name")
        ins = _binds(_SList(_tagged(args[1], "ins", "an in-parameter list"), args[1]))
        outs = _binds(_SList(_tagged(args[2], "outs", "an out-parameter list"), args[2]))
        reqs = tuple(parse_exp(e) for e in _tagged(args[3], "requires", "a requires list"))
        ens = tuple(parse_exp(e) for e in _tagged(args[4], "ensures", "an ensures list"))
        decs = tuple(parse_exp(e) for e in _tagged(args[5], "decreases", "a decreases list"))
        mods = tuple(_name(m) for m in _tagged(args[6], "modifies", "a modifies list"))
        body = _tagged(args[7], "body", "a body")
        if len(body) != 1:
            _fail(args[7], "'body' expects exactly one statement")
        return Method(name, ins, reqs, ens, decs, mods, outs, parse_stmt(body[0]))
    if tag == "function":
        _arity(x, 4, tag)
        name = _name(args[0], "a function name")
        ins = _binds(_SList(_tagged(args[1], "ins", "a parameter list"), args[1]))
        return Function(name, ins, parse_type(args[2]), parse_exp(args[3]))
    _fail(x, f"unknown member form '{tag}'")


def _SList(items, at: SExp) -> SList:
    return SList(tuple(items), at.line, at.col)


def parse_program(text: str) -> Program:
    sx = read_sexps(text)
    if len(sx) != 1:
        if not sx:
            raise ParseError("empty input, expected (program ...)", 1, 1)
        _fail(sx[1], "trailing input after (program ...)")
    members = _tagged(sx[0], "program", "a program")
    return Program(tuple(parse_member(m) for m in members))


def parse_exp_text(text: str) -> Exp:
    sx = read_sexps(text)
    if len(sx) != 1:
        raise ParseError("expected exactly one expression", 1, 1)
    return parse_exp(sx[0])


def parse_stmt_text(text: str) -> Stmt:
    sx = read_sexps(text)
    if len(sx) != 1:
        raise ParseError("expected exactly one statement", 1, 1)
    return parse_stmt(sx[0])


# ---------------------------------------------------------------- printer


def _A(s: str) -> Atom:
    return Atom(s)


def _L(*items) -> SList:
    return SList(tuple(items))


def type_sexp(t: DType) -> SExp:
    if isinstance(t, ArrT):
        return _L(_A("array"), type_sexp(t.elem))
    return _A(str(t))


def exp_sexp(e: Exp) -> SExp:
    match e:
        case IntLit(i):
            return _A(str(i))
        case BoolLit(b):
            return _A("true" if b else "false")
        case StrLit(s):
            return Atom(s, True)
        case Var(x):
            return _A(x)
        case UnOp(op, a):
            return _L(_A(op.value), exp_sexp(a))
        case BinOp(op, a, b):
            return _L(_A(op.value), exp_sexp(a), exp_sexp(b))
        case Ite(c, t, f):
            return _L(_A("ite"), exp_sexp(c), exp_sexp(t), exp_sexp(f))
        case ArrLen(a):
            return _L(_A("len"), exp_sexp(a))
        case ArrSel(a, i):
            return _L(_A("sel"), exp_sexp(a), exp_sexp(i))
        case FunCall(f, args):
            return _L(_A("call"), _A(f), *(exp_sexp(a) for a in args))
        case Forall(x, ty, body):
            return _L(_A("forall"), _L(_A(x), type_sexp(ty)), exp_sexp(body))
        case Let(binds, body):
            return _L(_A("let"), _L(*(_L(_A(x), exp_sexp(r)) for x, r in binds)), exp_sexp(body))
        case ForallHeap(h, body):
            return _L(_A("forallheap"), _L(*(_A(n) for n in h)), exp_sexp(body))
        case Old(a):
            return _L(_A("old"), exp_sexp(a))
        case OldHeap(a):
            return _L(_A("oldheap"), exp_sexp(a))
        case Prev(a):
            return _L(_A("prev"), exp_sexp(a))
        case PrevHeap(a):
            return _L(_A("prevheap"), exp_sexp(a))
        case SetPrev(a):
            return _L(_A("setprev"), exp_sexp(a))
    raise TypeError(f"not an expression: {e!r}")


def stmt_sexp(s: Stmt) -> SExp:
    match s:
        case Skip():
            return _L(_A("skip"))
        case Return():
            return _L(_A("return"))
        case Assert(e):
            return _L(_A("assert"), exp_sexp(e))
        case Then(a, b):
            return _L(_A("then"), stmt_sexp(a), stmt_sexp(b))
        case If(g, t, f):
            return _L(_A("if"), exp_sexp(g), stmt_sexp(t), stmt_sexp(f))
        case Dec(binds, scope):
            items = []
            for x, ty, init in binds:
                parts = [_A(x), type_sexp(ty)] + ([exp_sexp(init)] if init is not None else [])
                items.append(_L(*parts))
            return _L(_A("dec"), _L(*items), stmt_sexp(scope))
        case Assign(pairs):
            items = []
            for lhs, rhs in pairs:
                l = _A(lhs.name) if isinstance(lhs, VarLhs) else _L(_A("sel"), exp_sexp(lhs.arr), exp_sexp(lhs.idx))
                r = exp_sexp(rhs.e) if isinstance(rhs, ExpRhs) else _L(_A("alloc"), type_sexp(rhs.elem_ty), exp_sexp(rhs.len))
                items.append(_L(l, r))
            return _L(_A("assign"), _L(*items))
        case While(g, invs, decrs, mods, body):
            return _L(_A("while"), exp_sexp(g), _L(_A("invariants"), *map(exp_sexp, invs)),
                      _L(_A("decreases"), *map(exp_sexp, decrs)),
                      _L(_A("modifies"), *map(_A, mods)), stmt_sexp(body))
        case MetCall(lhss, f, args):
            return _L(_A("metcall"), _L(*map(_A, lhss)), _A(f), _L(*map(exp_sexp, args)))
    raise TypeError(f"not a statement: {s!r}")


def member_sexp(m) -> SExp:
    binds = lambda bs: [_L(_A(x), type_sexp(t)) for x, t in bs]
    if isinstance(m, Function):
        return _L(_A("function"), _A(m.name), _L(_A("ins"), *binds(m.ins)), type_sexp(m.res_ty), exp_sexp(m.body))
    return _L(
        _A("method"), _A(m.name),
        _L(_A("ins"), *binds(m.ins)),
        _L(_A("outs"), *binds(m.outs)),
        _L(_A("requires"), *map(exp_sexp, m.reqs)),
        _L(_A("ensures"), *map(exp_sexp, m.ens)),
        _L(_A("decreases"), *map(exp_sexp, m.decreases)),
        _L(_A("modifies"), *map(_A, m.mods)),
        _L(_A("body"), stmt_sexp(m.body)),
    )


def print_program(p: Program) -> str:
    if not p.members:
        return "(program)"
    return "(program\n" + "\n".join("  " + sexp_to_str(member_sexp(m), indent=2) for m in p.members) + ")"


def print_exp(e: Exp) -> str:
    return _flat(exp_sexp(e))


def print_stmt(s: Stmt) -> str:
    return sexp_to_str(stmt_sexp(s))


# ------------------------------------------------------------- normalize


def _ends_in_return(s: Stmt) -> bool:
    while True:
        if isinstance(s, Then):
            s = s.s2
        elif isinstance(s, Dec):
            s = s.scope
        else:
            return isinstance(s, Return)


def wrap_old(e: Exp, params: frozenset[str], bound: frozenset[str] = frozenset()) -> Exp:
    """Replace free references to ``params`` by ``Old(Var x)``.

    An existing ``Old(Var x)`` is left as is, which keeps the rewrite idempotent.
    """
    match e:
        case Var(x) if x in params and x not in bound:
            return Old(e)
        case Old(Var(x)) if x in params and x not in bound:
            return e
        case Forall(x, ty, body):
            return Forall(x, ty, wrap_old(body, params, bound | {x}))
        case Let(binds, body):
            return Let(tuple((x, wrap_old(r, params, bound)) for x, r in binds),
                       wrap_old(body, params, bound | {x for x, _ in binds}))
    return map_exp(e, lambda c: wrap_old(c, params, bound))


def normalize(p: Program) -> Program:
    """Append the implicit final ``Return`` and Old-wrap in-parameters in ensures."""
    members = []
    for m in p.members:
        if isinstance(m, Method):
            body = m.body if _ends_in_return(m.body) else Then(m.body, Return())
            ins = frozenset(x for x, _ in m.ins)
            ens = tuple(wrap_old(e, ins) for e in m.ens)
            m = Method(m.name, m.ins, m.reqs, ens, m.decreases, m.mods, m.outs, body)
        members.append(m)
    return Program(tuple(members))


def load_program(path, normalized: bool = True) -> Program:
    with open(path, encoding="utf-8") as fh:
        p = parse_program(fh.read())
    return normalize(p) if normalized else p


def file_fuel(path, default: Optional[int] = None) -> Optional[int]:
    """Read a ``; fuel: N`` header comment, used by corpus files."""
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            m = re.match(r"\s*;+\s*fuel:\s*(\d+)", line)
            if m:
                return int(m.group(1))
    return default
