"""Executable metatheory: equivalences, precision, generators and property harnesses."""
from __future__ import annotations

import random
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from functools import lru_cache
from typing import Callable, Iterator, Mapping, Optional, Sequence

from .elaborate import elaborate_cmd
from .lattice import DYN, GLabel, Interval, Lattice, four_point, two_point
from .monitor import (
    Abort,
    Aborted,
    Monitor,
    Out,
    Stuck,
    Terminated,
    Trace,
    descend,
    initial_stack,
)
from .paired import (
    PairedMonitor,
    PStep,
    RuntimeTypeError,
    check_config_typing,
    check_sf,
    check_trace_typing,
    check_wf,
    is_high,
    merge_stores,
    project,
    proj_store,
    proj_trace,
)
from .parser import Program, VarDecl
from .syntax import (
    Assign,
    BaseType,
    Bop,
    Braced,
    Cast,
    Cmd,
    Const,
    Expr,
    Frame,
    GType,
    If,
    IfVal,
    Output,
    PairCmd,
    PairValue,
    SAscribe,
    SAssign,
    SBop,
    SCmd,
    SConst,
    SExpr,
    Seq,
    SIf,
    Skip,
    SOutput,
    SSeq,
    SSkip,
    SVar,
    SWhile,
    Value,
    Var,
    While,
)
from .typecheck import IfcTypeError, TypeEnv, check_source_cmd

# equivalence


def value_equiv(lat: Lattice, adv: int, v1: Value, v2: Value, t: GType) -> bool:
    typed = all(v.g == t.g and lat.precision(v.iv, lat.gamma(v.g)) for v in (v1, v2))
    if not typed:
        return False
    if lat.cleq(t.g, adv) and v1 == v2:
        return True
    return is_high(lat, adv, v1.iv, t.g) and is_high(lat, adv, v2.iv, t.g)


def store_equiv(lat: Lattice, adv: int, d1: Mapping[str, Value], d2: Mapping[str, Value], env: TypeEnv) -> bool:
    if list(d1) != list(d2) or set(d1) != set(env):
        return False
    return all(value_equiv(lat, adv, d1[x], d2[x], env[x]) for x in d1)


def trace_equiv(lat: Lattice, adv: int, t1: Trace, t2: Trace) -> bool:
    """Decide trace equivalence; high outputs may be dropped on either side."""
    n, m = len(t1), len(t2)
    high1 = [not lat.leq(a.channel, adv) for a in t1]
    high2 = [not lat.leq(a.channel, adv) for a in t2]
    # ok[i][j]: suffixes t1[i:] and t2[j:] are equivalent
    ok = [[False] * (m + 1) for _ in range(n + 1)]
    ok[n][m] = True
    for i in range(n, -1, -1):
        for j in range(m, -1, -1):
            if i == n and j == m:
                continue
            r = False
            if i < n and high1[i] and ok[i + 1][j]:
                r = True
            elif j < m and high2[j] and ok[i][j + 1]:
                r = True
            elif i < n and j < m:
                a, b = t1[i], t2[j]
                r = a.channel == b.channel and not high1[i] and a.value == b.value and ok[i + 1][j + 1]
            ok[i][j] = r
    return ok[0][0]


# precision


def value_prec(lat: Lattice, v1, v2) -> bool:
    if isinstance(v1, PairValue) or isinstance(v2, PairValue):
        return (
            isinstance(v1, PairValue)
            and isinstance(v2, PairValue)
            and v1.raw1 == v2.raw1
            and v1.raw2 == v2.raw2
            and lat.precision(v1.iv1, v2.iv1)
            and lat.precision(v1.iv2, v2.iv2)
            and lat.gprec(v1.g, v2.g)
        )
    return (
        type(v1.raw) is type(v2.raw)
        and v1.raw == v2.raw
        and lat.precision(v1.iv, v2.iv)
        and lat.gprec(v1.g, v2.g)
    )


def expr_prec(lat: Lattice, e1: Expr, e2: Expr) -> bool:
    match e1, e2:
        case Var(name=a), Var(name=b):
            return a == b
        case Const(value=a), Const(value=b):
            return value_prec(lat, a, b)
        case Bop(op=o1, left=a1, right=b1), Bop(op=o2, left=a2, right=b2):
            return o1 == o2 and expr_prec(lat, a1, a2) and expr_prec(lat, b1, b2)
        case Cast(ev=x1, g=g1, expr=a1), Cast(ev=x2, g=g2, expr=a2):
            return (
                lat.precision(x1.left, x2.left)
                and lat.precision(x1.right, x2.right)
                and lat.gprec(g1, g2)
                and expr_prec(lat, a1, a2)
            )
    return False


def stack_prec(lat: Lattice, k1, k2) -> bool:
    return len(k1) == len(k2) and all(
        lat.precision(f1.iv, f2.iv) and lat.gprec(f1.g, f2.g) for f1, f2 in zip(k1, k2)
    )


def cmd_prec(lat: Lattice, c1: Cmd, c2: Cmd) -> bool:
    match c1, c2:
        case Skip(), Skip():
            return True
        case Seq(first=a1, second=b1), Seq(first=a2, second=b2):
            return cmd_prec(lat, a1, a2) and cmd_prec(lat, b1, b2)
        case Assign(name=x1, expr=e1), Assign(name=x2, expr=e2):
            return x1 == x2 and expr_prec(lat, e1, e2)
        case Output(channel=l1, expr=e1), Output(channel=l2, expr=e2):
            return l1 == l2 and expr_prec(lat, e1, e2)
        case If(ws=w1, cond=e1, then=a1, els=b1), If(ws=w2, cond=e2, then=a2, els=b2):
            return w1 == w2 and expr_prec(lat, e1, e2) and cmd_prec(lat, a1, a2) and cmd_prec(lat, b1, b2)
        case While(ws=w1, cond=e1, body=b1), While(ws=w2, cond=e2, body=b2):
            return w1 == w2 and expr_prec(lat, e1, e2) and cmd_prec(lat, b1, b2)
        case Braced(body=b1), Braced(body=b2):
            return cmd_prec(lat, b1, b2)
        case IfVal(value=v1, then=a1, els=b1), IfVal(value=v2, then=a2, els=b2):
            return value_prec(lat, v1, v2) and cmd_prec(lat, a1, a2) and cmd_prec(lat, b1, b2)
        case PairCmd(), PairCmd():
            return (
                stack_prec(lat, c1.k1, c2.k1)
                and stack_prec(lat, c1.k2, c2.k2)
                and lat.precision(c1.iv1, c2.iv1)
                and lat.precision(c1.iv2, c2.iv2)
                and lat.gprec(c1.g, c2.g)
                and cmd_prec(lat, c1.c1, c2.c1)
                and cmd_prec(lat, c1.c2, c2.c2)
            )
    return False


def store_prec(lat: Lattice, d1: Mapping, d2: Mapping) -> bool:
    return set(d1) == set(d2) and all(value_prec(lat, d1[x], d2[x]) for x in d1)


def config_prec(lat: Lattice, cfg1, cfg2) -> bool:
    (k1, d1, c1), (k2, d2, c2) = cfg1, cfg2
    return stack_prec(lat, k1, k2) and store_prec(lat, d1, d2) and cmd_prec(lat, c1, c2)


def precision_rel(lat: Lattice, x1, x2) -> bool:
    """Precision on labels, intervals, values, expressions, commands, stacks, stores and configurations."""
    if isinstance(x1, int) and isinstance(x2, int):
        return lat.gprec(x1, x2)
    if isinstance(x1, Interval) and isinstance(x2, Interval):
        return lat.precision(x1, x2)
    if isinstance(x1, (Value, PairValue)):
        return value_prec(lat, x1, x2)
    if isinstance(x1, (Var, Const, Bop, Cast)):
        return expr_prec(lat, x1, x2)
    if isinstance(x1, Mapping):
        return store_prec(lat, x1, x2)
    if isinstance(x1, tuple) and len(x1) == 3 and isinstance(x1[0], tuple) and isinstance(x1[1], Mapping):
        return config_prec(lat, x1, x2)
    if isinstance(x1, tuple):
        return stack_prec(lat, x1, x2)
    return cmd_prec(lat, x1, x2)


def sexpr_prec(lat: Lattice, e1: SExpr, e2: SExpr) -> bool:
    match e1, e2:
        case SVar(name=a), SVar(name=b):
            return a == b
        case SConst(raw=r1, g=g1), SConst(raw=r2, g=g2):
            return type(r1) is type(r2) and r1 == r2 and lat.gprec(g1, g2)
        case SBop(op=o1, left=a1, right=b1), SBop(op=o2, left=a2, right=b2):
            return o1 == o2 and sexpr_prec(lat, a1, a2) and sexpr_prec(lat, b1, b2)
        case SAscribe(expr=a1, base=t1, g=g1), SAscribe(expr=a2, base=t2, g=g2):
            return t1 is t2 and lat.gprec(g1, g2) and sexpr_prec(lat, a1, a2)
    return False


def scmd_prec(lat: Lattice, c1: SCmd, c2: SCmd) -> bool:
    match c1, c2:
        case SSkip(), SSkip():
            return True
        case SSeq(first=a1, second=b1), SSeq(first=a2, second=b2):
            return scmd_prec(lat, a1, a2) and scmd_prec(lat, b1, b2)
        case SAssign(name=x1, expr=e1), SAssign(name=x2, expr=e2):
            return x1 == x2 and sexpr_prec(lat, e1, e2)
        case SOutput(channel=l1, expr=e1), SOutput(channel=l2, expr=e2):
            return l1 == l2 and sexpr_prec(lat, e1, e2)
        case SIf(cond=e1, then=a1, els=b1), SIf(cond=e2, then=a2, els=b2):
            return sexpr_prec(lat, e1, e2) and scmd_prec(lat, a1, a2) and scmd_prec(lat, b1, b2)
        case SWhile(cond=e1, body=b1), SWhile(cond=e2, body=b2):
            return sexpr_prec(lat, e1, e2) and scmd_prec(lat, b1, b2)
    return False


def program_prec(p1: Program, p2: Program) -> bool:
    lat = p1.lattice
    if [d.name for d in p1.decls] != [d.name for d in p2.decls]:
        return False
    for d1, d2 in zip(p1.decls, p2.decls):
        if d1.type.base is not d2.type.base or not lat.gprec(d1.type.g, d2.type.g):
            return False
        if not value_prec(lat, d1.value, d2.value):
            return False
    return scmd_prec(lat, p1.cmd, p2.cmd)


# generation


@dataclass(frozen=True)
class GenConfig:
    dyn_rate: float = 0.3
    high_guard_rate: float = 0.4
    ascribe_rate: float = 0.15
    loop_rate: float = 0.12
    unguarded_loop_rate: float = 0.05
    min_vars: int = 3
    max_vars: int = 6
    max_depth: int = 3


_NAMES = "abcdefghjkmnpqrstuvw"


class _Gen:
    def __init__(self, rng: random.Random, lat: Lattice, cfg: GenConfig):
        self.rng = rng
        self.lat = lat
        self.cfg = cfg
        self.env: dict[str, GType] = {}

    def label(self) -> int:
        return self.rng.choice(list(self.lat.labels))

    def glabel(self) -> GLabel:
        return DYN if self.rng.random() < self.cfg.dyn_rate else self.label()

    def raw(self, base: BaseType):
        if base is BaseType.BOOL:
            return self.rng.random() < 0.5
        return self.rng.randint(0, 9)

    def decls(self) -> tuple[VarDecl, ...]:
        n = self.rng.randint(self.cfg.min_vars, self.cfg.max_vars)
        out = []
        for name in _NAMES[:n]:
            base = self.rng.choice((BaseType.INT, BaseType.BOOL))
            g = self.glabel()
            if g == DYN:
                iv = self.rng.choice(self.lat.all_intervals()) if self.rng.random() < 0.5 else self.lat.gamma(DYN)
            else:
                iv = self.lat.point(g)
            self.env[name] = GType(base, g)
            out.append(VarDecl(name, GType(base, g), Value(self.raw(base), iv, g)))
        return tuple(out)

    def below(self, target: GLabel) -> list[GLabel]:
        return [g for g in [DYN, *self.lat.labels] if self.lat.cleq(g, target)]

    def expr(self, base: BaseType, target: GLabel, depth: int = 0) -> SExpr:
        rng = self.rng
        vars_ = [x for x, t in self.env.items() if t.base is base and self.lat.cleq(t.g, target)]
        roll = rng.random()
        if depth < 2 and roll < 0.3:
            if base is BaseType.INT:
                op = rng.choice(("+", "-", "*"))
                return SBop(op, self.expr(BaseType.INT, target, depth + 1), self.expr(BaseType.INT, target, depth + 1))
            if rng.random() < 0.6:
                op = rng.choice(("<", "<=", "=="))
                return SBop(op, self.expr(BaseType.INT, target, depth + 1), self.expr(BaseType.INT, target, depth + 1))
            op = rng.choice(("&&", "||"))
            return SBop(op, self.expr(BaseType.BOOL, target, depth + 1), self.expr(BaseType.BOOL, target, depth + 1))
        if depth < 2 and roll < 0.3 + self.cfg.ascribe_rate:
            g = rng.choice(self.below(target))
            return SAscribe(self.expr(base, g, depth + 1), base, g)
        if vars_ and roll < 0.75:
            return SVar(rng.choice(vars_))
        return SConst(self.raw(base), rng.choice(self.below(target)))

    def guard(self) -> SExpr:
        highs = [
            x
            for x, t in self.env.items()
            if t.base is BaseType.BOOL and (t.g == DYN or t.g != self.lat.bot)
        ]
        if highs and self.rng.random() < self.cfg.high_guard_rate:
            return SVar(self.rng.choice(highs))
        return self.expr(BaseType.BOOL, DYN)

    def targets(self, pc: GLabel, forbid: frozenset) -> list[str]:
        return [x for x, t in self.env.items() if x not in forbid and self.lat.cleq(pc, t.g)]

    def channels(self, pc: GLabel) -> list[int]:
        return [l for l in self.lat.labels if self.lat.cleq(pc, l)]

    def stmt(self, pc: GLabel, depth: int, forbid: frozenset, budget: list[int]) -> SCmd:
        rng = self.rng
        budget[0] -= 1
        roll = rng.random()
        if depth < self.cfg.max_depth and roll < 0.25:
            g = self.guard()
            inner = self.lat.cjoin(pc, self._label_of(g))
            a = self.block(inner, depth + 1, forbid, budget)
            b = self.block(inner, depth + 1, forbid, budget) if rng.random() < 0.5 else SSkip()
            return SIf(g, a, b)
        if depth < self.cfg.max_depth and roll < 0.25 + self.cfg.loop_rate:
            loop = self.loop(pc, depth, forbid, budget)
            if loop is not None:
                return loop
        chans = self.channels(pc)
        if chans and roll > 0.8:
            ch = rng.choice(chans)
            return SOutput(ch, self.expr(rng.choice((BaseType.INT, BaseType.BOOL)), ch))
        ts = self.targets(pc, forbid)
        if ts:
            x = rng.choice(ts)
            return SAssign(x, self.expr(self.env[x].base, self.env[x].g))
        if chans:
            ch = rng.choice(chans)
            return SOutput(ch, self.expr(BaseType.INT, ch))
        return SSkip()

    def loop(self, pc: GLabel, depth: int, forbid: frozenset, budget: list[int]) -> Optional[SCmd]:
        rng = self.rng
        if rng.random() < self.cfg.unguarded_loop_rate:
            g = self.guard()
            return SWhile(g, self.block(self.lat.cjoin(pc, self._label_of(g)), depth + 1, forbid, budget))
        counters = [x for x in self.targets(pc, forbid) if self.env[x].base is BaseType.INT]
        if not counters:
            return None
        i = rng.choice(counters)
        gi = self.env[i].g
        inner = self.lat.cjoin(pc, gi)
        if not self.lat.cleq(inner, gi):
            return None
        k = rng.randint(1, 3)
        bot = self.lat.bot
        body = self.block(inner, depth + 1, forbid | {i}, budget)
        bump = SAssign(i, SBop("+", SVar(i), SConst(1, bot)))
        return SSeq(
            SAssign(i, SConst(0, bot)),
            SWhile(SBop("<", SVar(i), SConst(k, bot)), _seq([body, bump])),
        )

    def block(self, pc: GLabel, depth: int, forbid: frozenset, budget: list[int]) -> SCmd:
        n = self.rng.randint(1, 2)
        cmds = [self.stmt(pc, depth, forbid, budget) for _ in range(n)]
        return _seq(cmds)

    def _label_of(self, e: SExpr) -> GLabel:
        from .typecheck import check_source_expr

        return check_source_expr(self.lat, self.env, e).g


def _flat(c: SCmd) -> list[SCmd]:
    return _flat(c.first) + _flat(c.second) if isinstance(c, SSeq) else [c]


def _seq(cmds: Sequence[SCmd]) -> SCmd:
    """Right-nested sequence, the shape the parser produces."""
    cmds = [x for c in cmds for x in _flat(c)]
    if not cmds:
        return SSkip()
    out = cmds[-1]
    for c in reversed(cmds[:-1]):
        out = SSeq(c, out)
    return out


def _has_output(c: SCmd) -> bool:
    match c:
        case SOutput():
            return True
        case SSeq(first=a, second=b) | SIf(then=a, els=b):
            return _has_output(a) or _has_output(b)
        case SWhile(body=b):
            return _has_output(b)
    return False


def gen_program(rng: random.Random, size: int, lat: Lattice, cfg: GenConfig = GenConfig()) -> Program:
    """A random program that is well typed by construction."""
    g = _Gen(rng, lat, cfg)
    decls = g.decls()
    if size <= 0:
        return Program(lat, decls, SSkip())
    budget = [size]
    cmds = []
    while budget[0] > 0:
        cmds.append(g.stmt(lat.bot, 0, frozenset(), budget))
    cmd = _seq(cmds)
    if not _has_output(cmd):
        ch = rng.choice(list(lat.labels))
        cmd = _seq([cmd, SOutput(ch, g.expr(rng.choice((BaseType.INT, BaseType.BOOL)), ch))])
    return Program(lat, decls, cmd)


def gen_low_equiv_store(rng: random.Random, p: Program, adv: int, keep_first: bool = False) -> dict[str, Value]:
    """A second store that is low-equivalent to ``p.store()`` at ``adv``.

    Without ``keep_first`` a dynamic slot may turn high here while staying low
    in the first store; ``raise_first_store`` then repairs the first store.
    With it, dynamic slots only vary where the first store is already high.
    """
    lat = p.lattice
    highs = [iv for iv in lat.all_intervals() if not lat.leq(iv.lo, adv)]
    out = {}
    for d in p.decls:
        v = d.value
        g = d.type.g
        base = d.type.base
        fresh = (rng.random() < 0.5) if base is BaseType.BOOL else rng.randint(0, 9)
        if g != DYN and not lat.leq(g, adv):
            out[d.name] = Value(fresh, v.iv, g)
        elif g == DYN and keep_first:
            out[d.name] = Value(fresh, v.iv, g) if is_high(lat, adv, v.iv, g) else v
        elif g == DYN and highs and rng.random() < 0.6:
            # both sides must be high for the slot to differ
            out[d.name] = Value(fresh, rng.choice(highs), g)
        else:
            out[d.name] = v
    return out


def raise_first_store(rng: random.Random, p: Program, adv: int, d2: Mapping[str, Value]) -> Program:
    """Make dynamic slots of the first store high wherever the second store's are."""
    lat = p.lattice
    highs = [iv for iv in lat.all_intervals() if not lat.leq(iv.lo, adv)]
    decls = []
    for d in p.decls:
        v2 = d2[d.name]
        if d.type.g == DYN and v2 != d.value and not is_high(lat, adv, d.value.iv, DYN):
            d = replace(d, value=Value(d.value.raw, rng.choice(highs), DYN))
        decls.append(d)
    return Program(lat, tuple(decls), p.cmd)


def gen_ni_instance(rng: random.Random, size: int, lat: Lattice, adv: int, cfg: GenConfig = GenConfig()):
    p = gen_program(rng, size, lat, cfg)
    d2 = gen_low_equiv_store(rng, p, adv)
    p = raise_first_store(rng, p, adv, d2)
    return p, p.store(), d2


# mutation towards less precision


def _widen(rng: random.Random, lat: Lattice, iv: Interval) -> Interval:
    lows = [l for l in lat.labels if lat.leq(l, iv.lo)]
    highs = [h for h in lat.labels if lat.leq(iv.hi, h)]
    return Interval(rng.choice(lows), rng.choice(highs))


def _mut_sexpr(rng: random.Random, rate: float, e: SExpr, ascriptions: bool) -> SExpr:
    match e:
        case SConst(raw=r, g=g, pos=pos):
            return SConst(r, DYN if rng.random() < rate else g, pos)
        case SVar():
            return e
        case SBop(op=op, left=a, right=b, pos=pos):
            return SBop(op, _mut_sexpr(rng, rate, a, ascriptions), _mut_sexpr(rng, rate, b, ascriptions), pos)
        case SAscribe(expr=a, base=t, g=g, pos=pos):
            g2 = DYN if ascriptions and rng.random() < rate else g
            return SAscribe(_mut_sexpr(rng, rate, a, ascriptions), t, g2, pos)
    raise TypeError(e)


def _mut_scmd(rng: random.Random, rate: float, c: SCmd, ascriptions: bool) -> SCmd:
    match c:
        case SSkip():
            return c
        case SSeq(first=a, second=b):
            return SSeq(_mut_scmd(rng, rate, a, ascriptions), _mut_scmd(rng, rate, b, ascriptions))
        case SAssign(name=x, expr=e, pos=pos):
            return SAssign(x, _mut_sexpr(rng, rate, e, ascriptions), pos)
        case SOutput(channel=ch, expr=e, pos=pos):
            return SOutput(ch, _mut_sexpr(rng, rate, e, ascriptions), pos)
        case SIf(cond=e, then=a, els=b, pos=pos):
            return SIf(
                _mut_sexpr(rng, rate, e, ascriptions),
                _mut_scmd(rng, rate, a, ascriptions),
                _mut_scmd(rng, rate, b, ascriptions),
                pos,
            )
        case SWhile(cond=e, body=b, pos=pos):
            return SWhile(_mut_sexpr(rng, rate, e, ascriptions), _mut_scmd(rng, rate, b, ascriptions), pos)
    raise TypeError(c)


def make_less_precise(
    rng: random.Random,
    p: Program,
    rate: float = 0.3,
    pc: GLabel | None = None,
    pc_rate: float = 0.2,
    ascriptions: bool = True,
) -> tuple[Program, GLabel]:
    """A counterpart of ``p`` whose labels and intervals are no more precise.

    Returns the mutated program and the pc label to check it under.
    """
    lat = p.lattice
    pc = lat.bot if pc is None else pc
    decls = []
    for d in p.decls:
        g = d.type.g
        v = d.value
        if g != DYN and rng.random() < rate:
            g = DYN
        if g == DYN:
            iv = _widen(rng, lat, v.iv) if rng.random() < rate else v.iv
            v = Value(v.raw, iv, DYN)
        decls.append(VarDecl(d.name, GType(d.type.base, g), v, d.pos))
    pc2 = DYN if rng.random() < pc_rate else pc
    return Program(lat, tuple(decls), _mut_scmd(rng, rate, p.cmd, ascriptions)), pc2


# verdicts


@dataclass(frozen=True)
class Verdict:
    status: str  # PASS, VACUOUS or FAIL
    detail: str = ""

    @property
    def failed(self) -> bool:
        return self.status == "FAIL"


PASS = Verdict("PASS")


def check_ni(
    lat: Lattice,
    adv: int,
    env: TypeEnv,
    d1: Mapping[str, Value],
    d2: Mapping[str, Value],
    c: Cmd,
    fuel: int = 10_000,
    monitor: Optional[Monitor] = None,
    paired: bool = True,
) -> Verdict:
    """Termination-insensitive noninterference for one pair of stores."""
    if not store_equiv(lat, adv, d1, d2, env):
        return Verdict("FAIL", "stores are not low-equivalent")
    mon = monitor or Monitor(lat)
    o1 = mon.run(d1, c, fuel)
    o2 = mon.run(d2, c, fuel)
    both = isinstance(o1, Terminated) and isinstance(o2, Terminated)
    if both and not trace_equiv(lat, adv, o1.trace, o2.trace):
        return Verdict("FAIL", f"observable traces differ: {_tr(lat, o1.trace)} vs {_tr(lat, o2.trace)}")
    if paired:
        merged = merge_stores(lat, env, adv, d1, d2)
        po = PairedMonitor(lat).run(merged, c, 2 * fuel + 8)
        if isinstance(po, Terminated):
            t1, t2 = proj_trace(po.trace, 1), proj_trace(po.trace, 2)
            if not trace_equiv(lat, adv, t1, t2):
                return Verdict("FAIL", "paired trace projections differ")
    if both:
        return Verdict("PASS", f"{len(o1.trace)}/{len(o2.trace)} outputs")
    return Verdict("VACUOUS", f"{type(o1).__name__}/{type(o2).__name__}")


def _tr(lat: Lattice, t: Trace) -> str:
    from .monitor import format_action

    return "[" + "; ".join(format_action(a, lat) for a in t) + "]"


def check_sgg(p1: Program, p2: Program, pc1: GLabel | None = None, pc2: GLabel | None = None) -> Verdict:
    lat = p1.lattice
    pc1 = lat.bot if pc1 is None else pc1
    pc2 = lat.bot if pc2 is None else pc2
    if not program_prec(p1, p2) or not lat.gprec(pc1, pc2):
        return Verdict("FAIL", "mutated program is not less precise")
    try:
        check_source_cmd(lat, p1.env(), pc1, p1.cmd)
    except IfcTypeError:
        return Verdict("VACUOUS", "precise program is ill typed")
    try:
        check_source_cmd(lat, p2.env(), pc2, p2.cmd)
    except IfcTypeError as e:
        return Verdict("FAIL", f"less precise program rejected: {e}")
    return PASS


def check_dgg(lat: Lattice, cfg1, cfg2, fuel: int = 10_000) -> Verdict:
    """Lockstep co-stepping of a configuration and a less precise one.

    Both runs keep their evaluation contexts; a context entry is compared
    once when pushed, which together with the per-step comparison of the
    focus, local stacks and stores amounts to whole-configuration precision.
    """
    mon = Monitor(lat)
    (k1, d1, c1), (k2, d2, c2) = cfg1, cfg2
    ctx1: list = []
    ctx2: list = []
    checked = 0
    for n in range(fuel + 1):
        k1, c1 = descend(ctx1, k1, c1)
        k2, c2 = descend(ctx2, k2, c2)
        if len(ctx1) != len(ctx2):
            return Verdict("FAIL", f"precision lost at step {n}: contexts differ")
        for (b1, x1), (b2, x2) in zip(ctx1[checked:], ctx2[checked:]):
            same = b1 == b2 and (
                lat.precision(x1.iv, x2.iv) and lat.gprec(x1.g, x2.g) if b1 else cmd_prec(lat, x1, x2)
            )
            if not same:
                return Verdict("FAIL", f"precision lost at step {n}: contexts differ")
        checked = len(ctx1)
        if not (stack_prec(lat, k1, k2) and store_prec(lat, d1, d2) and cmd_prec(lat, c1, c2)):
            return Verdict("FAIL", f"precision lost at step {n}")
        if isinstance(c1, Skip) and not ctx1 and len(k1) == 1:
            return Verdict("PASS", f"{n} steps")
        if n == fuel:
            break
        if isinstance(c1, Skip):
            (b1, x1), (b2, x2) = ctx1.pop(), ctx2.pop()
            checked = min(checked, len(ctx1))
            k1, c1 = (k1 + (x1,), Braced(c1)) if b1 else (k1, Seq(c1, x1))
            k2, c2 = (k2 + (x2,), Braced(c2)) if b2 else (k2, Seq(c2, x2))
        s1 = mon.step(k1, d1, c1)
        if isinstance(s1, Abort):
            return Verdict("PASS", f"precise run aborts at step {n}")
        s2 = mon.step(k2, d2, c2)
        if isinstance(s2, Abort):
            return Verdict("FAIL", f"less precise run aborts at step {n} with {s2.rule}")
        if s1.action != s2.action:
            return Verdict("FAIL", f"actions differ at step {n}")
        k1, d1, c1 = s1.stack, s1.store, s1.cmd
        k2, d2, c2 = s2.stack, s2.store, s2.cmd
    return Verdict("PASS", "fuel exhausted in lockstep")


def _reaches(mon: Monitor, src, dst, actions: Trace, bound: int = 2) -> bool:
    k, d, c = src
    emitted: list[Out] = []
    for _ in range(bound + 1):
        if (k, d, c) == dst and tuple(emitted) == actions:
            return True
        if isinstance(c, Skip) and len(k) == 1:
            return False
        s = mon.step(k, d, c)
        if isinstance(s, Abort):
            return False
        if s.action is not None:
            emitted.append(s.action)
        k, d, c = s.stack, dict(s.store), s.cmd
    return False


def check_soundness_completeness(
    lat: Lattice,
    env: TypeEnv,
    adv: int,
    d1: Mapping[str, Value],
    d2: Mapping[str, Value],
    c: Cmd,
    fuel: int = 5_000,
    seed: int = 0,
    strict_pair_refine: bool = True,
) -> Verdict:
    """Paired runs agree with their single-run projections, stepwise and at the end."""
    merged = merge_stores(lat, env, adv, d1, d2)
    mon = Monitor(lat)
    singles = [mon.run(d, c, fuel) for d in (d1, d2)]
    failures: list[str] = []

    def observe(pre, s: PStep):
        if failures:
            return
        post = (s.stack, s.store, s.cmd)
        for i in (1, 2):
            a = proj_trace((s.action,), i) if s.action else ()
            src = project(lat, *pre, i, literal=False)
            dst = project(lat, *post, i, literal=False)
            if not _reaches(mon, (src[0], src[1], src[2]), dst, a):
                failures.append(f"side {i} cannot follow the paired step")
                return

    results = {}
    for schedule in ("left", "interleaved"):
        pm = PairedMonitor(lat, schedule=schedule, seed=seed, strict_pair_refine=strict_pair_refine)
        obs = observe if schedule == "left" else None
        results[schedule] = pm.run(merged, c, 2 * fuel + 16, observer=obs)
        if failures:
            return Verdict("FAIL", f"soundness ({schedule}): {failures[0]}")
    po = results["left"]
    if isinstance(po, Terminated):
        for i, o in zip((1, 2), singles):
            if not isinstance(o, Terminated):
                return Verdict("FAIL", f"soundness: paired run terminates but side {i} gives {type(o).__name__}")
            if o.store != proj_store(po.store, i) or o.trace != proj_trace(po.trace, i):
                return Verdict("FAIL", f"soundness: side {i} final state differs from its projection")
    both = all(isinstance(o, Terminated) for o in singles)
    if both and not isinstance(po, Terminated):
        return Verdict("FAIL", f"completeness: projections terminate, paired run gives {type(po).__name__}"
                       + (f" {po.rule}" if isinstance(po, Aborted) else ""))
    left, inter = results["left"], results["interleaved"]
    if type(left) is not type(inter):
        return Verdict("FAIL", "scheduling changed the outcome")
    if isinstance(left, Terminated):
        for i in (1, 2):
            if proj_store(left.store, i) != proj_store(inter.store, i) or proj_trace(left.trace, i) != proj_trace(
                inter.trace, i
            ):
                return Verdict("FAIL", f"scheduling changed projection {i}")
    if both:
        return Verdict("PASS", f"{po.steps} paired steps")
    return Verdict("VACUOUS", f"{type(singles[0]).__name__}/{type(singles[1]).__name__}")


def check_preservation(
    lat: Lattice,
    env: TypeEnv,
    adv: int,
    merged: Mapping,
    c: Cmd,
    fuel: int = 10_000,
    schedule: str = "left",
    seed: int = 0,
) -> Verdict:
    """Configuration typing, safety and well-formedness at every paired step."""
    stack = initial_stack(lat)
    try:
        check_config_typing(lat, env, adv, stack, merged, c)
    except RuntimeTypeError as e:
        return Verdict("VACUOUS", f"initial configuration is ill typed: {e}")
    if check_sf(lat, adv, stack, merged, 0, c) or check_wf(stack, merged, 0, c):
        return Verdict("VACUOUS", "initial configuration is not safe")
    failures: list[str] = []
    trace: list[Out] = []

    def observe(pre, s: PStep):
        if failures:
            return
        n = len(trace)
        if s.action is not None:
            trace.append(s.action)
        try:
            check_config_typing(lat, env, adv, s.stack, s.store, s.cmd)
            check_trace_typing(lat, adv, tuple(trace))
        except RuntimeTypeError as e:
            failures.append(f"step {n}: {e}")
            return
        bad = check_wf(s.stack, s.store, 0, s.cmd) or check_sf(lat, adv, s.stack, s.store, 0, s.cmd)
        if bad:
            failures.append(f"step after {n} outputs: {bad}")

    try:
        out = PairedMonitor(lat, schedule=schedule, seed=seed).run(merged, c, fuel, observer=observe)
    except Stuck as e:
        return Verdict("FAIL", f"stuck: {e}")
    if failures:
        return Verdict("FAIL", failures[0])
    return Verdict("PASS", f"{type(out).__name__} after {out.steps} steps")


# suites

LATTICES = {"two": two_point, "four": four_point}


@lru_cache(maxsize=None)
def _lattice(name: str) -> Lattice:
    return LATTICES[name]()


def adversary_for(rng: random.Random, lat: Lattice) -> int:
    choices = [l for l in lat.labels if l != lat.top]
    return rng.choice(choices)


def _size(rng: random.Random) -> int:
    return rng.randint(2, 8)


def ni_trial(seed: int, lattice: str = "four", fuel: int = 5_000) -> Verdict:
    rng = random.Random(seed)
    lat = _lattice(lattice)
    adv = adversary_for(rng, lat)
    p, d1, d2 = gen_ni_instance(rng, _size(rng), lat, adv)
    c = elaborate_cmd(lat, p.env(), lat.bot, p.cmd)
    return check_ni(lat, adv, p.env(), d1, d2, c, fuel)


def gg_trial(seed: int, lattice: str = "four", fuel: int = 5_000) -> Verdict:
    rng = random.Random(seed)
    lat = _lattice(lattice)
    p1 = gen_program(rng, _size(rng), lat)
    p2, pc2 = make_less_precise(rng, p1)
    v = check_sgg(p1, p2, lat.bot, pc2)
    if v.status != "PASS":
        return v
    c1 = elaborate_cmd(lat, p1.env(), lat.bot, p1.cmd)
    c2 = elaborate_cmd(lat, p2.env(), pc2, p2.cmd)
    k1 = initial_stack(lat)
    k2 = (Frame(Interval(lat.bot, lat.bot), pc2),)
    return check_dgg(lat, (k1, p1.store(), c1), (k2, p2.store(), c2), fuel)


def meta_trial(seed: int, lattice: str = "four", fuel: int = 400) -> Verdict:
    rng = random.Random(seed)
    lat = _lattice(lattice)
    adv = adversary_for(rng, lat)
    p, d1, d2 = gen_ni_instance(rng, _size(rng), lat, adv)
    env = p.env()
    c = elaborate_cmd(lat, env, lat.bot, p.cmd)
    v = check_soundness_completeness(lat, env, adv, d1, d2, c, fuel, seed=seed)
    if v.failed:
        return v
    merged = merge_stores(lat, env, adv, d1, d2)
    w = check_preservation(lat, env, adv, merged, c, 2 * fuel + 16)
    if w.failed:
        return w
    if v.status == "PASS" or w.status == "PASS":
        return Verdict("PASS", f"{v.detail}; {w.detail}")
    return v


TRIALS: dict[str, Callable[..., Verdict]] = {"ni": ni_trial, "gg": gg_trial, "meta": meta_trial}


def _run_one(args) -> tuple[int, int, str, Verdict]:
    kind, n, seed, lattice = args
    return n, seed, lattice, TRIALS[kind](seed, lattice)


def run_suite(
    kind: str,
    trials: int,
    seed: int = 0,
    lattices: Sequence[str] = ("two", "four"),
    jobs: int = 1,
) -> Iterator[tuple[int, int, str, Verdict]]:
    """Yield ``(trial, seed, lattice, verdict)`` in trial order."""
    work = [(kind, n, seed + n, lat) for lat in lattices for n in range(trials)]
    work = [(k, i, s, l) for i, (k, _, s, l) in enumerate(work)]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            yield from ex.map(_run_one, work, chunksize=32)
    else:
        for w in work:
            yield _run_one(w)


def format_verdict(n: int, seed: int, v: Verdict) -> str:
    return f"trial {n} seed {seed} {v.status} {v.detail}".rstrip()


# shrinking


def _shrink_candidates(c: SCmd) -> Iterator[SCmd]:
    match c:
        case SSkip():
            return
        case SSeq(first=a, second=b):
            yield a
            yield b
            for a2 in _shrink_candidates(a):
                yield SSeq(a2, b)
            for b2 in _shrink_candidates(b):
                yield SSeq(a, b2)
        case SIf(cond=e, then=a, els=b, pos=pos):
            yield SSkip()
            yield a
            yield b
            for a2 in _shrink_candidates(a):
                yield SIf(e, a2, b, pos)
            for b2 in _shrink_candidates(b):
                yield SIf(e, a, b2, pos)
        case SWhile(cond=e, body=b, pos=pos):
            yield SSkip()
            yield b
            for b2 in _shrink_candidates(b):
                yield SWhile(e, b2, pos)
        case _:
            yield SSkip()


def shrink_program(p: Program, still_fails: Callable[[Program], bool], limit: int = 500) -> Program:
    """Greedily drop statements while ``still_fails`` keeps holding."""
    best = p
    tries = 0
    improved = True
    while improved and tries < limit:
        improved = False
        for c in _shrink_candidates(best.cmd):
            tries += 1
            cand = Program(best.lattice, best.decls, c)
            try:
                check_source_cmd(cand.lattice, cand.env(), cand.lattice.bot, c)
                ok = still_fails(cand)
            except IfcTypeError:
                ok = False
            if ok:
                best = cand
                improved = True
                break
            if tries >= limit:
                break
    return best


def shrink_trial(kind: str, seed: int, lattice: str) -> Optional[Program]:
    """Reconstruct a failing trial and shrink its program."""
    rng = random.Random(seed)
    lat = _lattice(lattice)
    if kind == "gg":
        p1 = gen_program(rng, _size(rng), lat)
        p2, pc2 = make_less_precise(rng, p1)

        def fails(q: Program) -> bool:
            q2 = Program(lat, p2.decls, _align(q.cmd, p1.cmd, p2.cmd))
            c1 = elaborate_cmd(lat, q.env(), lat.bot, q.cmd)
            try:
                c2 = elaborate_cmd(lat, q2.env(), pc2, q2.cmd)
            except IfcTypeError:
                return True
            k2 = (Frame(Interval(lat.bot, lat.bot), pc2),)
            return check_dgg(lat, (initial_stack(lat), q.store(), c1), (k2, q2.store(), c2)).failed

        return shrink_program(p1, fails)
    adv = adversary_for(rng, lat)
    p, d1, d2 = gen_ni_instance(rng, _size(rng), lat, adv)

    def fails(q: Program) -> bool:
        env = q.env()
        c = elaborate_cmd(lat, env, lat.bot, q.cmd)
        if kind == "ni":
            return check_ni(lat, adv, env, d1, d2, c).failed
        v = check_soundness_completeness(lat, env, adv, d1, d2, c, seed=seed)
        if v.failed:
            return True
        return check_preservation(lat, env, adv, merge_stores(lat, env, adv, d1, d2), c).failed

    return shrink_program(p, fails)


def _align(small: SCmd, big1: SCmd, big2: SCmd) -> SCmd:
    """Apply to ``big2`` the deletions that turned ``big1`` into ``small``."""
    if small == big1:
        return big2
    match small, big1, big2:
        case SSeq(first=a, second=b), SSeq(first=a1, second=b1), SSeq(first=a2, second=b2):
            return SSeq(_align(a, a1, a2), _align(b, b1, b2))
        case SIf(then=a, els=b), SIf(then=a1, els=b1), SIf(cond=e2, then=a2, els=b2, pos=pos):
            return SIf(e2, _align(a, a1, a2), _align(b, b1, b2), pos)
        case SWhile(body=b), SWhile(body=b1), SWhile(cond=e2, body=b2, pos=pos):
            return SWhile(e2, _align(b, b1, b2), pos)
    match big1, big2:
        case SSeq(first=a1, second=b1), SSeq(first=a2, second=b2):
            if small == a1 or _shape(small, a1):
                return _align(small, a1, a2)
            return _align(small, b1, b2)
        case SIf(then=a1, els=b1), SIf(then=a2, els=b2):
            return _align(small, a1, a2) if _shape(small, a1) else _align(small, b1, b2)
        case SWhile(body=b1), SWhile(body=b2):
            return _align(small, b1, b2)
    return small


def _shape(a: SCmd, b: SCmd) -> bool:
    return type(a) is type(b)
