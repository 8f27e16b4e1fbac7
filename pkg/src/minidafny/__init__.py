"""A small Dafny-like language: interpreter, compiler to an ML core, VC generator and checkers."""

from .frontend import load_program, normalize, parse_program, print_program
from .semantics import evaluate_program, run_main
from .compiler import compile_program
from .vcg import program_vcg
from .vccheck import Budget, falsify

__all__ = [
    "Budget", "compile_program", "evaluate_program", "falsify", "load_program", "normalize",
    "parse_program", "print_program", "program_vcg", "run_main",
]
