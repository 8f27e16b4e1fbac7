import random

from minidafny.frontend import print_program
from minidafny.randgen import GenConfig, SyntaxGen, typed_instances


def test_typed_instances_are_seeded():
    a = [(k, n, s) for k, n, s in typed_instances(3, 50)]
    b = [(k, n, s) for k, n, s in typed_instances(3, 50)]
    assert a == b
    assert {k for k, _, _ in a} == {"exp", "stmt"}


def test_kind_filter_and_depth():
    cfg = GenConfig(max_depth=2)
    assert all(k == "stmt" for k, _, _ in typed_instances(1, 20, cfg, kind="stmt"))


def test_syntax_gen_seeded():
    p1 = SyntaxGen(random.Random(8)).program()
    p2 = SyntaxGen(random.Random(8)).program()
    assert print_program(p1) == print_program(p2)
