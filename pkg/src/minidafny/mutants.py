"""Deliberately broken compilers and machines, used to show that differential
testing notices miscompilation."""

from __future__ import annotations

from .ast import BinOpKind
from .compiler import Compiler
from .targetlang import Machine, TProj


class FlipAdd(Compiler):
    """Compiles ``+`` as ``-``."""

    def binop(self, op, a, b):
        if op is BinOpKind.ADD:
            op = BinOpKind.SUB
        return super().binop(op, a, b)


class ForwardArgs(Compiler):
    """Applies call arguments first to last while parameters stay reversed."""

    def call_args(self, args):
        return list(args)


class NoReturnHandler(Compiler):
    """Forgets to catch the return exception around method bodies."""

    def wrap_body(self, body, result):
        return body


class LengthFromData(Compiler):
    """Reads an array's length from the wrong tuple component."""

    def arr_len(self, a):
        return TProj(1, a)


class TicklessMachine(Machine):
    """Never spends fuel, so it cannot time out where the source does."""

    step_cap = 200_000

    def tick(self) -> None:
        pass


COMPILER_MUTANTS = {
    "flip-add": FlipAdd,
    "forward-args": ForwardArgs,
    "no-return-handler": NoReturnHandler,
    "length-from-data": LengthFromData,
}
