"""Executable simulation relations and the differential-testing harness.

A source run (``semantics``) and a compiled run (``targetlang``) of the same
method on related inputs must end in related outputs and heaps whenever the
source run neither fails nor times out.
"""

from __future__ import annotations

import json
import random
from collections import Counter
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Optional, Sequence

from .ast import ArrT, BoolT, DType, IntT, Method, Program, StrT
from .compiler import Compiler, CompileError, compile_program, target_name
from .frontend import file_fuel, load_program
from .semantics import (
    ArrV, BoolV, Env, HArr, Heap, IntV, RCONT, Rcont, Rstop, Rtimeout, Serr, State,
    StrV, Value, invoke_method, show_value,
)
from .targetlang import (
    ArrCell, EMPTY_ENV, Machine, RCrash, RRaise, RTimeout, RVal, TStore, TVal, TVar,
    UNIT, VBool, VInt, VLoc, VStr, VTuple, VUnit, tapp, TUnit,
)
from .vccheck import Budget, eval_bool

LocMap = dict[int, int]
TARGET_FUEL = 2 ** 20


# ------------------------------------------------------------ relations


def val_rel(m: LocMap, dv: Value, tv: TVal) -> bool:
    match dv:
        case IntV(i):
            return isinstance(tv, VInt) and tv.i == i
        case BoolV(b):
            return isinstance(tv, VBool) and tv.b == b
        case StrV(s):
            return isinstance(tv, VStr) and tv.s == s
        case ArrV(n, loc, _):
            if not (isinstance(tv, VTuple) and len(tv.vs) == 2):
                return False
            ln, ptr = tv.vs
            if not (isinstance(ln, VInt) and ln.i == n and isinstance(ptr, VLoc)):
                return False
            # zero-length arrays carry no observable contents
            return n == 0 or m.get(loc) == ptr.loc
    return False


def array_rel(m: LocMap, heap: Heap, store: TStore, locs: Optional[Iterable[int]] = None) -> bool:
    for loc in (range(len(heap)) if locs is None else locs):
        h = heap[loc]
        if loc not in m or not 0 <= m[loc] < len(store.cells):
            return False
        cell = store.cells[m[loc]]
        if not isinstance(cell, ArrCell) or len(cell.vs) != len(h.elems):
            return False
        if not all(val_rel(m, d, t) for d, t in zip(h.elems, cell.vs)):
            return False
    return True


def extend_locmap(m: LocMap, pairs: Iterable[tuple[Value, TVal]], heap: Heap,
                  store: TStore) -> Optional[LocMap]:
    """Grow ``m`` along arrays reachable from related value pairs.

    Returns None when the pairing is inconsistent (a source location would
    map to two target locations, or two source locations to one).
    """
    m = dict(m)
    inv = {v: k for k, v in m.items()}
    todo = list(pairs)
    while todo:
        dv, tv = todo.pop()
        if not isinstance(dv, ArrV) or dv.len == 0:
            continue
        if not (isinstance(tv, VTuple) and len(tv.vs) == 2 and isinstance(tv.vs[1], VLoc)):
            return None
        l2 = tv.vs[1].loc
        if dv.loc in m:
            if m[dv.loc] != l2:
                return None
            continue
        if l2 in inv or dv.loc >= len(heap) or l2 >= len(store.cells):
            return None
        m[dv.loc] = l2
        inv[l2] = dv.loc
        cell = store.cells[l2]
        if isinstance(cell, ArrCell):
            todo.extend(zip(heap[dv.loc].elems, cell.vs))
    return m


def to_target(m: LocMap, v: Value) -> TVal:
    match v:
        case IntV(i):
            return VInt(i)
        case BoolV(b):
            return VBool(b)
        case StrV(s):
            return VStr(s)
        case ArrV(n, loc, _):
            return VTuple((VInt(n), VLoc(m.get(loc, 0))))
    raise TypeError(v)


def materialize(heap: Heap, rng: Optional[random.Random] = None) -> tuple[TStore, LocMap]:
    """Build a target store related to ``heap``; locations are shuffled when seeded."""
    order = list(range(len(heap)))
    pad = 0
    if rng is not None:
        rng.shuffle(order)
        pad = rng.randint(0, 3)
    m = {loc: pad + k for k, loc in enumerate(order)}
    cells: list = [ArrCell(()) for _ in range(pad)]
    for loc in order:
        cells.append(ArrCell(tuple(to_target(m, x) for x in heap[loc].elems)))
    return TStore(tuple(cells)), m


# -------------------------------------------------------------- verdicts


@dataclass(frozen=True)
class Verdict:
    kind: str  # Match | SourceFail | SourceTimeout | Mismatch | Crash
    detail: str = ""
    outs: tuple = ()

    @property
    def bad(self) -> bool:
        return self.kind in ("Mismatch", "Crash")


@dataclass
class DiffConfig:
    fuel: int = 10_000
    target_fuel: int = TARGET_FUEL
    divergence_factor: int = 1
    int_lo: int = -100
    int_hi: int = 100
    arr_len_max: int = 8
    req_retries: int = 100
    check_divergence: bool = True


def run_compiled(decs, name: str, args: Sequence[TVal], store: TStore, fuel: int,
                machine_cls=Machine):
    mach = machine_cls(fuel, store.cells)
    env, res = mach.run_decs(EMPTY_ENV, decs)
    if not isinstance(res, RVal):
        return mach, res
    names = [f"arg{k}" for k in range(len(args))]
    for x, v in zip(names, args):
        env = env.bind(x, v)
    order = Compiler().call_args([TVar(x) for x in names])
    call = tapp(TVar(target_name(name)), *(order or [TUnit()]))
    return mach, mach.run(env, call)


def difftest_method(p: Program, name: str, args: Sequence[Value], fuel: int,
                    heap: Heap = (), *, decs=None, machine_cls=Machine,
                    cfg: Optional[DiffConfig] = None, rng: Optional[random.Random] = None) -> Verdict:
    """Run ``name`` on both sides and compare.

    ``p`` must be normalized. ``decs`` may carry a precompiled (possibly
    mutated) target program; otherwise ``p`` is compiled here.
    """
    cfg = cfg or DiffConfig()
    env = Env(p)
    m = env.lookup(name)
    if not isinstance(m, Method):
        raise ValueError(f"no method named {name}")
    if decs is None:
        decs = compile_program(p, entry=False)
    st, r, outs, _ = invoke_method(State(clock=fuel, heap=tuple(heap)), env, name, list(args))
    store0, m0 = materialize(tuple(heap), rng)
    targs = [to_target(m0, a) for a in args]

    if isinstance(r, Rstop) and isinstance(r.stop, Serr):
        if not isinstance(r.stop.err, Rtimeout):
            return Verdict("SourceFail")
        if cfg.check_divergence:
            _, tres = run_compiled(decs, name, targs, store0, fuel * cfg.divergence_factor, machine_cls)
            if isinstance(tres, RVal):
                return Verdict("Mismatch", f"source timed out at fuel {fuel} but target returned")
        return Verdict("SourceTimeout")
    if not isinstance(r, Rcont):
        return Verdict("SourceFail", "unexpected source result")

    mach, tres = run_compiled(decs, name, targs, store0, cfg.target_fuel, machine_cls)
    if isinstance(tres, RCrash):
        return Verdict("Crash", tres.msg)
    if isinstance(tres, RRaise):
        return Verdict("Mismatch", f"uncaught exception {tres.exn}")
    if isinstance(tres, RTimeout):
        return Verdict("Mismatch", "target ran out of fuel")
    v = tres.v
    if not m.outs:
        touts: list = [] if isinstance(v, VUnit) else None
    elif len(m.outs) == 1:
        touts = [v]
    else:
        touts = list(v.vs) if isinstance(v, VTuple) and len(v.vs) == len(m.outs) else None
    if touts is None:
        return Verdict("Mismatch", f"result shape differs: {v!r}")
    store = mach.store()
    pairs = list(zip(args, targs)) + list(zip(outs, touts))
    m1 = extend_locmap(m0, pairs, st.heap, store)
    if m1 is None:
        return Verdict("Mismatch", "arrays are not related by any location map")
    for k, (dv, tv) in enumerate(zip(outs, touts)):
        if not val_rel(m1, dv, tv):
            return Verdict("Mismatch", f"out {k}: source {show_value(dv, st.heap)} target {tv!r}")
    if not array_rel(m1, st.heap, store, locs=sorted(m1)):
        return Verdict("Mismatch", "final heaps differ")
    return Verdict("Match", outs=tuple(show_value(o, st.heap) for o in outs))


# ------------------------------------------------------- input generation


class ArgGen:
    """Seeded generator of method inputs: values plus the heap they live in."""

    def __init__(self, rng: random.Random, cfg: DiffConfig):
        self.rng = rng
        self.cfg = cfg

    def int_(self) -> int:
        r = self.rng.random()
        if r < 0.15:
            return self.rng.choice([0, 1, -1, 2, self.cfg.int_lo, self.cfg.int_hi])
        if r < 0.45:  # index-sized values, so bounds preconditions hold often enough
            return self.rng.randint(0, self.cfg.arr_len_max)
        if r < 0.7:
            return self.rng.randint(-10, 10)
        return self.rng.randint(self.cfg.int_lo, self.cfg.int_hi)

    def scalar(self, t: DType):
        if isinstance(t, IntT):
            return IntV(self.int_())
        if isinstance(t, BoolT):
            return BoolV(self.rng.random() < 0.5)
        if isinstance(t, StrT):
            return StrV(self.rng.choice(["", "a", "b", "ab"]))
        raise TypeError(t)

    def value(self, t: DType, heap: list[HArr], pool: list[ArrV]) -> Value:
        if not isinstance(t, ArrT):
            return self.scalar(t)
        same = [a for a in pool if a.elem_ty == t.elem]
        if same and self.rng.random() < 0.1:
            return self.rng.choice(same)
        n = self.rng.randint(0, self.cfg.arr_len_max)
        elems = [self.value(t.elem, heap, pool) for _ in range(n)]
        if isinstance(t.elem, IntT) and self.rng.random() < 0.4:
            elems.sort(key=lambda v: v.i)
        heap.append(HArr(tuple(elems), t.elem))
        a = ArrV(n, len(heap) - 1, t.elem)
        pool.append(a)
        return a

    def args(self, m: Method) -> tuple[list[Value], Heap]:
        heap: list[HArr] = []
        pool: list[ArrV] = []
        vals = [self.value(t, heap, pool) for _, t in m.ins]
        return vals, tuple(heap)


def requires_hold(p: Program, m: Method, args: Sequence[Value], heap: Heap) -> bool:
    frame = tuple((x, v) for (x, _), v in zip(m.ins, args))
    st = State(clock=10_000, locals=frame, heap=heap, locals_old=frame, heap_old=heap)
    budget = Budget(int_lo=-20, int_hi=20)
    return all(eval_bool(st, Env(p), e, budget) is True for e in m.reqs)


def gen_inputs(p: Program, m: Method, rng: random.Random, cfg: DiffConfig):
    gen = ArgGen(rng, cfg)
    args, heap = gen.args(m)
    for _ in range(cfg.req_retries):
        if requires_hold(p, m, args, heap):
            break
        args, heap = gen.args(m)
    return args, heap


# --------------------------------------------------------------- reports


@dataclass
class Trial:
    program: str
    method: str
    args: str
    verdict: str
    detail: str = ""


@dataclass
class Report:
    trials: list[Trial] = field(default_factory=list)
    skipped: list[str] = field(default_factory=list)

    def counts(self) -> Counter:
        return Counter(t.verdict for t in self.trials)

    @property
    def mismatches(self) -> list[Trial]:
        return [t for t in self.trials if t.verdict in ("Mismatch", "Crash")]

    @property
    def ok(self) -> bool:
        return not self.mismatches

    def text(self) -> str:
        lines = []
        per: dict[tuple[str, str], Counter] = {}
        for t in self.trials:
            per.setdefault((t.program, t.method), Counter())[t.verdict] += 1
        for (prog, meth), c in sorted(per.items()):
            kinds = " ".join(f"{k}={c[k]}" for k in sorted(c))
            lines.append(f"{prog} {meth} {kinds}")
        for s in self.skipped:
            lines.append(f"skipped {s}")
        for t in self.mismatches:
            lines.append(f"MISMATCH {t.program} {t.method} args={t.args} {t.verdict}: {t.detail}")
        total = self.counts()
        lines.append("total " + " ".join(f"{k}={total[k]}" for k in sorted(total)) if total else "total none")
        return "\n".join(lines) + "\n"

    def jsonl(self) -> str:
        return "".join(json.dumps(t.__dict__, sort_keys=True) + "\n" for t in self.trials)


def difftest_program(p: Program, label: str, trials: int, seed: int, cfg: DiffConfig,
                     report: Optional[Report] = None, *, compiler: Optional[Compiler] = None,
                     machine_cls=Machine, methods: Optional[Sequence[str]] = None) -> Report:
    report = report if report is not None else Report()
    try:
        decs = compile_program(p, entry=False, compiler=compiler)
    except CompileError as e:
        report.skipped.append(f"{label}: {e}")
        return report
    rng = random.Random(f"{seed}:{label}")
    for m in p.methods:
        if methods is not None and m.name not in methods:
            continue
        for _ in range(trials):
            args, heap = gen_inputs(p, m, rng, cfg)
            v = difftest_method(p, m.name, args, cfg.fuel, heap, decs=decs,
                                machine_cls=machine_cls, cfg=cfg, rng=rng)
            shown = "(" + ", ".join(show_value(a, heap) for a in args) + ")"
            report.trials.append(Trial(label, m.name, shown, v.kind, v.detail))
    return report


def corpus_files(path) -> list[Path]:
    path = Path(path)
    if path.is_dir():
        return sorted(path.glob("*.sexp"))
    return [path]


def difftest_corpus(path, trials: int, seed: int, cfg: Optional[DiffConfig] = None,
                    fuel_from_files: bool = True, **kw) -> Report:
    """Difftest every program under ``path``; a file's fuel header wins unless disabled."""
    cfg = cfg or DiffConfig()
    report = Report()
    if trials <= 0:
        return report
    for f in corpus_files(path):
        p = load_program(f)
        fuel = file_fuel(f, cfg.fuel) if fuel_from_files else cfg.fuel
        c = replace(cfg, fuel=fuel)
        difftest_program(p, f.stem, trials, seed, c, report, **kw)
    return report


# ------------------------------------------------- contracts by execution


@dataclass
class ContractRun:
    verdict: str  # Holds | Rfail | Rtimeout | EnsuresFalse | EnsuresUnknown
    detail: str = ""


def run_contract(p: Program, name: str, args: Sequence[Value], heap: Heap, fuel: int,
                 budget: Optional[Budget] = None) -> ContractRun:
    """Run a method from a precondition state and evaluate its ensures on the result."""
    env = Env(p)
    m = env.lookup(name)
    st, r, outs, _ = invoke_method(State(clock=fuel, heap=tuple(heap)), env, name, list(args))
    if not isinstance(r, Rcont):
        if r == Rstop(Serr(Rtimeout())):
            return ContractRun("Rtimeout")
        return ContractRun("Rfail", str(r))
    frame = tuple((x, v) for (x, _), v in zip(m.ins, args))
    post = frame + tuple((x, v) for (x, _), v in zip(m.outs, outs))
    end = State(clock=fuel, locals=post, heap=st.heap, locals_old=frame, heap_old=tuple(heap))
    budget = budget or Budget(int_lo=-20, int_hi=20)
    for k, e in enumerate(m.ens):
        ok = eval_bool(end, env, e, budget)
        if ok is None:
            return ContractRun("EnsuresUnknown", f"ensures {k}")
        if not ok:
            return ContractRun("EnsuresFalse", f"ensures {k}")
    return ContractRun("Holds")


def precondition_inputs(p: Program, m: Method, rng: random.Random, cfg: DiffConfig,
                        count: int, max_draws: int = 100_000):
    """Draw ``count`` inputs whose requires hold; stops early after ``max_draws`` draws."""
    gen = ArgGen(rng, cfg)
    found = []
    for _ in range(max_draws):
        if len(found) == count:
            break
        args, heap = gen.args(m)
        if requires_hold(p, m, args, heap):
            found.append((args, heap))
    return found
