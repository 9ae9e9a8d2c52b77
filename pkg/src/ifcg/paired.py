"""Paired execution: two runs that differ on secrets, carried in one configuration."""
from __future__ import annotations

import random
from dataclasses import dataclass
from typing import Callable, Mapping, NamedTuple, Optional, Union

from .lattice import GLabel, Interval, Lattice
from .monitor import (
    DEFAULT_FUEL,
    Abort,
    Aborted,
    FuelExhausted,
    Out,
    Outcome,
    Reason,
    Stuck,
    Terminated,
    Trace,
    descend,
    initial_stack,
    plug,
)
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
    Pos,
    Seq,
    Skip,
    Stack,
    Value,
    Var,
    While,
    apply_bop,
    base_of,
    cmd_wf,
    contains_pair,
    is_static,
    wt_set,
)
from .typecheck import IfcTypeError, TypeEnv, check_core_cmd

PValue = Union[Value, PairValue]
PStore = Mapping[str, PValue]

TOP = 0


class PairIv(NamedTuple):
    """A pair of intervals, the interval of a paired value."""

    iv1: Interval
    iv2: Interval


IntervalOrPair = Union[Interval, PairIv]


class NotLowEquivalent(ValueError):
    pass


class RuntimeTypeError(Exception):
    def __init__(self, premise: str, message: str = ""):
        self.premise = premise
        super().__init__(f"{premise}: {message}" if message else premise)


# values


def intvl(v: PValue) -> IntervalOrPair:
    return PairIv(v.iv1, v.iv2) if isinstance(v, PairValue) else v.iv


def proj_value(v: PValue, i: int) -> Value:
    if isinstance(v, PairValue):
        return Value(v.raw1, v.iv1, v.g) if i == 1 else Value(v.raw2, v.iv2, v.g)
    return v


def proj_iv(p: IntervalOrPair, i: int) -> Interval:
    if isinstance(p, PairIv):
        return p.iv1 if i == 1 else p.iv2
    return p


def read(v: PValue, i: int) -> PValue:
    return v if i == TOP else proj_value(v, i)


def _pair(a: Value, b: Value, g: GLabel) -> PairValue:
    return PairValue(a.iv, a.raw, b.iv, b.raw, g)


def cast_value(lat: Lattice, ev, g: GLabel, v: PValue) -> Optional[PValue]:
    if isinstance(v, PairValue):
        a = lat.apply_evidence(v.iv1, ev)
        b = lat.apply_evidence(v.iv2, ev)
        if a is None or b is None:
            return None
        return PairValue(a, v.raw1, b, v.raw2, g)
    iv = lat.apply_evidence(v.iv, ev)
    return None if iv is None else Value(v.raw, iv, g)


def bop_value(lat: Lattice, op: str, v1: PValue, v2: PValue) -> PValue:
    g = lat.cjoin(v1.g, v2.g)
    if isinstance(v1, PairValue) or isinstance(v2, PairValue):
        a1, a2 = proj_value(v1, 1), proj_value(v1, 2)
        b1, b2 = proj_value(v2, 1), proj_value(v2, 2)
        return PairValue(
            lat.ijoin(a1.iv, b1.iv), apply_bop(op, a1.raw, b1.raw),
            lat.ijoin(a2.iv, b2.iv), apply_bop(op, a2.raw, b2.raw),
            g,
        )
    return Value(apply_bop(op, v1.raw, v2.raw), lat.ijoin(v1.iv, v2.iv), g)


def join_ctx(lat: Lattice, pc: Interval, p: IntervalOrPair) -> IntervalOrPair:
    if isinstance(p, PairIv):
        return PairIv(lat.ijoin(pc, p.iv1), lat.ijoin(pc, p.iv2))
    return lat.ijoin(pc, p)


def _refine_right(lat: Lattice, ctx: Interval, iv: Interval) -> Optional[Interval]:
    r = lat.refine(ctx, iv)
    return None if r is None else r[1]


def refine_lv(lat: Lattice, ctx: IntervalOrPair, v: PValue) -> Optional[PValue]:
    """Top-level refineLV, pair-aware in both arguments."""
    if isinstance(ctx, PairIv) or isinstance(v, PairValue):
        a = _refine_right(lat, proj_iv(ctx, 1), proj_value(v, 1).iv)
        b = _refine_right(lat, proj_iv(ctx, 2), proj_value(v, 2).iv)
        if a is None or b is None:
            return None
        return PairValue(a, proj_value(v, 1).raw, b, proj_value(v, 2).raw, v.g)
    iv = _refine_right(lat, ctx, v.iv)
    return None if iv is None else Value(v.raw, iv, v.g)


def refine_lv_side(lat: Lattice, i: int, ctx: Interval, v: PValue, strict: bool = True) -> Optional[PValue]:
    """refineLV_i: refine only side ``i``.

    On a stored pair the rule as written is undefined when refinement would
    fail on either side, even though only side ``i`` is changed; ``strict``
    keeps that reading, ``strict=False`` only consults side ``i``.
    """
    if isinstance(v, PairValue):
        r1 = _refine_right(lat, ctx, v.iv1)
        r2 = _refine_right(lat, ctx, v.iv2)
        mine = r1 if i == 1 else r2
        if mine is None or (strict and (r1 is None or r2 is None)):
            return None
        if i == 1:
            return PairValue(mine, v.raw1, v.iv2, v.raw2, v.g)
        return PairValue(v.iv1, v.raw1, mine, v.raw2, v.g)
    iv = _refine_right(lat, ctx, v.iv)
    if iv is None:
        return None
    if i == 1:
        return PairValue(iv, v.raw, v.iv, v.raw, v.g)
    return PairValue(v.iv, v.raw, iv, v.raw, v.g)


def upd_label(lat: Lattice, old: Interval, v: PValue) -> Optional[PValue]:
    """updL against a single interval, pair-aware in the new value."""
    if isinstance(v, PairValue):
        a = lat.restrict_lb(old, v.iv1)
        b = lat.restrict_lb(old, v.iv2)
        if a is None or b is None:
            return None
        return PairValue(a, v.raw1, b, v.raw2, v.g)
    iv = lat.restrict_lb(old, v.iv)
    return None if iv is None else Value(v.raw, iv, v.g)


def upd(lat: Lattice, old: PValue, new: PValue) -> Optional[PValue]:
    """Top-level store update."""
    if isinstance(old, PairValue) or isinstance(new, PairValue):
        parts = []
        for i in (1, 2):
            o, n = proj_value(old, i), proj_value(new, i)
            iv = lat.restrict_lb(o.iv, n.iv)
            if iv is None:
                return None
            parts.append(Value(n.raw, iv, new.g))
        return _pair(parts[0], parts[1], new.g)
    iv = lat.restrict_lb(old.iv, new.iv)
    return None if iv is None else Value(new.raw, iv, new.g)


def upd_side(lat: Lattice, i: int, old: PValue, new: Value) -> Optional[PValue]:
    """upd_i: write side ``i``, keep the other side of ``old``."""
    iv = lat.restrict_lb(proj_value(old, i).iv, new.iv)
    if iv is None:
        return None
    mine = Value(new.raw, iv, new.g)
    other = proj_value(old, 3 - i)
    return _pair(mine, other, new.g) if i == 1 else _pair(other, mine, new.g)


class _CastAbort(Exception):
    def __init__(self, site: Pos):
        self.site = site


def eval_paired(lat: Lattice, store: PStore, side: int, e: Expr) -> PValue:
    match e:
        case Const(value=v):
            return v
        case Var(name=x):
            return read(store[x], side)
        case Bop(op=op, left=a, right=b):
            return bop_value(lat, op, eval_paired(lat, store, side, a), eval_paired(lat, store, side, b))
        case Cast(ev=ev, g=g, expr=inner, pos=pos):
            v = cast_value(lat, ev, g, eval_paired(lat, store, side, inner))
            if v is None:
                raise _CastAbort(pos)
            return v
    raise TypeError(f"not a core expression: {e!r}")


# stepping


@dataclass(frozen=True)
class PStep:
    action: Optional[Out]
    stack: Stack
    store: PStore
    cmd: Cmd


class _Raise(Exception):
    def __init__(self, abort: Abort):
        self.abort = abort


def side_done(k: Stack, c: Cmd) -> bool:
    return not k and isinstance(c, Skip)


class PairedMonitor:
    """Paired small-step semantics.

    ``schedule`` is ``"left"`` (side 1 runs to completion before side 2) or
    ``"interleaved"`` (a seeded coin picks the side at every step).
    """

    def __init__(
        self,
        lat: Lattice,
        schedule: str = "left",
        seed: int = 0,
        strict_pair_refine: bool = True,
    ):
        if schedule not in ("left", "interleaved"):
            raise ValueError(f"unknown schedule {schedule!r}")
        self.lat = lat
        self.schedule = schedule
        self.rng = random.Random(seed)
        self.strict = strict_pair_refine

    def step(self, stack: Stack, store: PStore, c: Cmd, side: int = TOP) -> Union[PStep, Abort]:
        try:
            return self._step(stack, store, c, side)
        except _Raise as r:
            return r.abort

    def _eval(self, store: PStore, side: int, e: Expr) -> PValue:
        try:
            return eval_paired(self.lat, store, side, e)
        except _CastAbort as ca:
            raise _Raise(Abort(Reason.CAST, "P-Cast-Err", ca.site)) from None

    def _pick(self, c: PairCmd) -> int:
        return self._choose(side_done(c.k1, c.c1), side_done(c.k2, c.c2))

    def _choose(self, d1: bool, d2: bool) -> int:
        if d1:
            return 2
        if d2 or self.schedule == "left":
            return 1
        return 1 if self.rng.random() < 0.5 else 2

    def _step(self, stack: Stack, store: PStore, c: Cmd, side: int) -> PStep:
        ctx: list = []
        k, f = descend(ctx, stack, c)
        s = self._redex(k, store, f, side)
        k2, c2 = plug(ctx, s.stack, s.cmd)
        return PStep(s.action, k2, s.store, c2)

    def _redex(self, stack: Stack, store: PStore, c: Cmd, side: int = TOP) -> PStep:
        lat = self.lat
        match c:
            case Seq(first=Skip(), second=rest):
                return PStep(None, stack, store, rest)
            case Braced(body=Skip()):
                if len(stack) < 2:
                    raise Stuck("pop with a single pc frame")
                return PStep(None, stack[1:], store, Skip())
        if len(stack) != 1:
            raise Stuck(f"{type(c).__name__} under {len(stack)} pc frames")
        pc = stack[0]
        match c:
            case PairCmd():
                if side != TOP:
                    raise Stuck("nested command pair")
                if side_done(c.k1, c.c1) and side_done(c.k2, c.c2):
                    return PStep(None, stack, store, Skip())
                i = self._pick(c)
                k, iv, ci = (c.k1, c.iv1, c.c1) if i == 1 else (c.k2, c.iv2, c.c2)
                frame = Frame(lat.ijoin(pc.iv, iv), lat.cjoin(pc.g, c.g))
                s = self._step(k + (frame,), store, ci, i)
                if not s.stack or s.stack[-1] != frame:
                    raise Stuck("side run lost its base frame")
                k2 = s.stack[:-1]
                if i == 1:
                    new = PairCmd(k2, c.iv1, s.cmd, c.k2, c.iv2, c.c2, c.g)
                else:
                    new = PairCmd(c.k1, c.iv1, c.c1, k2, c.iv2, s.cmd, c.g)
                return PStep(s.action, stack, s.store, new)
            case Assign(name=x, expr=e, pos=pos):
                v = self._eval(store, side, e)
                v1 = refine_lv(lat, pc.iv, v)
                if v1 is None:
                    raise _Raise(Abort(Reason.REFINE, "P-Assign-Err", pos, x))
                v2 = upd(lat, store[x], v1) if side == TOP else upd_side(lat, side, store[x], v1)
                if v2 is None:
                    raise _Raise(Abort(Reason.RESTRICT, "P-Assign-Err2", pos, x))
                return PStep(None, stack, {**store, x: v2}, Skip())
            case Output(channel=ch, expr=e, pos=pos):
                v = self._eval(store, side, e)
                v1 = refine_lv(lat, pc.iv, v)
                if v1 is None:
                    raise _Raise(Abort(Reason.REFINE, "P-Out-Err", pos))
                v2 = upd_label(lat, lat.point(ch), v1)
                if v2 is None:
                    raise _Raise(Abort(Reason.RESTRICT, "P-Out-Err2", pos))
                return PStep(Out(ch, v2, side), stack, store, Skip())
            case If(ws=ws, cond=e, then=a, els=b, pos=pos):
                v = self._eval(store, side, e)
                new = dict(store)
                if side == TOP:
                    ctx = join_ctx(lat, pc.iv, intvl(v))
                    for x in store:
                        if x in ws:
                            r = refine_lv(lat, ctx, store[x])
                            if r is None:
                                raise _Raise(Abort(Reason.REFINE, "P-If-Refine-Err", pos, x))
                            new[x] = r
                else:
                    ctx = lat.ijoin(pc.iv, v.iv)
                    for x in store:
                        if x in ws:
                            r = refine_lv_side(lat, side, ctx, store[x], self.strict)
                            if r is None:
                                raise _Raise(Abort(Reason.REFINE, "P-If-Refine-Err", pos, x, ctx))
                            new[x] = r
                return PStep(None, stack, new, IfVal(v, a, b, pos))
            case IfVal(value=v, then=a, els=b):
                if isinstance(v, PairValue):
                    if side != TOP:
                        raise Stuck("branch on a pair inside a side run")
                    return PStep(
                        None, stack, store,
                        PairCmd((), v.iv1, a if v.raw1 else b, (), v.iv2, a if v.raw2 else b, v.g),
                    )
                frame = Frame(lat.ijoin(pc.iv, v.iv), lat.cjoin(pc.g, v.g))
                return PStep(None, (frame,) + stack, store, Braced(a if v.raw else b))
            case While(ws=ws, cond=e, body=b, pos=pos):
                return PStep(None, stack, store, If(ws, e, Seq(b, c), Skip(), pos))
            case Skip():
                raise Stuck("skip is terminal")
        raise Stuck(f"no rule for {type(c).__name__}")

    def run(
        self,
        store: PStore,
        c: Cmd,
        fuel: int = DEFAULT_FUEL,
        stack: Optional[Stack] = None,
        observer: Optional[Callable[[tuple, PStep], None]] = None,
    ) -> Outcome:
        """Run from a top-level configuration; ``observer(pre, step)`` sees each transition."""
        stack = stack if stack is not None else initial_stack(self.lat)
        ctx: list = []
        trace: list[Out] = []
        steps = 0
        k = stack
        pz: Optional[_PairZipper] = None

        def whole() -> tuple[Stack, Cmd]:
            return plug(ctx, k, pz.materialize() if pz else c)

        while True:
            if pz is None:
                k, c = descend(ctx, k, c)
                if isinstance(c, Skip):
                    if not ctx:
                        if len(k) == 1:
                            return Terminated(store, tuple(trace), k, steps)
                        raise Stuck("skip with pending pc frames")
                    braced, item = ctx.pop()
                    k, c = (k + (item,), Braced(c)) if braced else (k, Seq(c, item))
                elif isinstance(c, PairCmd) and len(k) == 1:
                    pz = _PairZipper(self, k[0], c)
            if steps >= fuel:
                fk, fc = whole()
                return FuelExhausted(fk, store, fc, tuple(trace), steps)
            pre = (*whole(), store) if observer else None
            try:
                if pz is None:
                    s = self._redex(k, store, c, TOP)
                    action, store, k, c = s.action, s.store, s.stack, s.cmd
                elif pz.done(1) and pz.done(2):
                    action, c, pz = None, Skip(), None
                else:
                    action, store = pz.advance(self._choose(pz.done(1), pz.done(2)), store)
            except _Raise as r:
                a = r.abort
                return Aborted(a.reason, a.rule, tuple(trace), a.site, a.var, a.target, steps + 1)
            steps += 1
            if action is not None:
                trace.append(action)
            if observer is not None:
                fk, fc = whole()
                observer((pre[0], pre[2], pre[1]), PStep(action, fk, store, fc))


class _PairZipper:
    """Both sides of the command pair in focus, each with its own evaluation context."""

    def __init__(self, mon: PairedMonitor, pc: Frame, c: PairCmd):
        lat = mon.lat
        self.mon = mon
        self.c = c
        self.frames = {
            1: Frame(lat.ijoin(pc.iv, c.iv1), lat.cjoin(pc.g, c.g)),
            2: Frame(lat.ijoin(pc.iv, c.iv2), lat.cjoin(pc.g, c.g)),
        }
        self.ctx: dict[int, list] = {1: [], 2: []}
        self.stack = {1: c.k1 + (self.frames[1],), 2: c.k2 + (self.frames[2],)}
        self.cmd = {1: c.c1, 2: c.c2}

    def done(self, i: int) -> bool:
        return not self.ctx[i] and isinstance(self.cmd[i], Skip) and len(self.stack[i]) == 1

    def advance(self, i: int, store: PStore) -> tuple[Optional[Out], PStore]:
        ctx = self.ctx[i]
        k, c = descend(ctx, self.stack[i], self.cmd[i])
        if isinstance(c, Skip):
            if not ctx:
                raise Stuck("side run finished with pending pc frames")
            braced, item = ctx.pop()
            k, c = (k + (item,), Braced(c)) if braced else (k, Seq(c, item))
        s = self.mon._redex(k, store, c, i)
        self.stack[i], self.cmd[i] = s.stack, s.cmd
        return s.action, s.store

    def materialize(self) -> PairCmd:
        sides = {}
        for i in (1, 2):
            k, c = plug(self.ctx[i], self.stack[i], self.cmd[i])
            if not k or k[-1] != self.frames[i]:
                raise Stuck("side run lost its base frame")
            sides[i] = (k[:-1], c)
        c = self.c
        return PairCmd(sides[1][0], c.iv1, sides[1][1], sides[2][0], c.iv2, sides[2][1], c.g)


def run_paired(lat: Lattice, store: PStore, c: Cmd, fuel: int = DEFAULT_FUEL, **kw) -> Outcome:
    opts = {k: kw.pop(k) for k in ("schedule", "seed", "strict_pair_refine") if k in kw}
    return PairedMonitor(lat, **opts).run(store, c, fuel, **kw)


# merge and projection


def is_high(lat: Lattice, adv: int, iv: Interval, g: GLabel) -> bool:
    """The judgment ``iv ⊢ g ∈ H(adv)``."""
    return not lat.leq(iv.lo, adv) and lat.precision(iv, lat.gamma(g))


def merge_stores(lat: Lattice, env: TypeEnv, adv: int, d1: Mapping[str, Value], d2: Mapping[str, Value]) -> dict:
    """Merge two low-equivalent stores, pairing the slots that may differ."""
    if list(d1) != list(d2):
        raise NotLowEquivalent("stores have different domains")
    out: dict[str, PValue] = {}
    for x in d1:
        v1, v2 = d1[x], d2[x]
        g = env[x].g
        if g != -1 and not lat.leq(g, adv):
            out[x] = _pair(v1, v2, v1.g)
        elif v1 == v2:
            out[x] = v1
        elif v1.g == v2.g and is_high(lat, adv, v1.iv, v1.g) and is_high(lat, adv, v2.iv, v2.g):
            out[x] = _pair(v1, v2, v1.g)
        else:
            raise NotLowEquivalent(f"{x} differs at an observable level")
    return out


def proj_store(store: PStore, i: int) -> dict:
    return {x: proj_value(v, i) for x, v in store.items()}


def proj_trace(trace: Trace, i: int) -> Trace:
    out = []
    for a in trace:
        if a.side == TOP:
            out.append(Out(a.channel, proj_value(a.value, i)))
        elif a.side == i:
            out.append(Out(a.channel, a.value))
    return tuple(out)


def _proj_cmd(lat: Lattice, stack: Stack, c: Cmd, i: int, literal: bool) -> tuple[Stack, Cmd]:
    match c:
        case Seq(first=a, second=b):
            k, a2 = _proj_cmd(lat, stack, a, i, literal)
            return k, Seq(a2, b)
        case Braced(body=b):
            k, b2 = _proj_cmd(lat, stack[:-1], b, i, literal)
            return k + stack[-1:], Braced(b2)
        case IfVal(value=v, then=a, els=b, pos=pos):
            return stack, IfVal(proj_value(v, i), a, b, pos)
        case PairCmd():
            pc = stack[0]
            k, iv, ci = (c.k1, c.iv1, c.c1) if i == 1 else (c.k2, c.iv2, c.c2)
            cj = c.c2 if i == 1 else c.c1
            frame = Frame(lat.ijoin(pc.iv, iv), lat.cjoin(pc.g, c.g))
            if literal and isinstance(ci, Skip) and not isinstance(cj, Skip):
                body: Cmd = Skip()
            else:
                body = Braced(ci)
            return k + (frame,) + stack, body
    return stack, c


def project(lat: Lattice, stack: Stack, store: PStore, c: Cmd, i: int, literal: bool = True):
    """Project a top-level configuration onto run ``i``.

    With ``literal=False`` a finished side is always kept in braces, so the
    result is a configuration the single-run monitor can actually step.
    """
    k, c2 = _proj_cmd(lat, stack, c, i, literal)
    return k, proj_store(store, i), c2


# well-formedness and safety


def _value_wf(v) -> bool:
    if isinstance(v, PairValue):
        return not isinstance(v.raw1, (Value, PairValue)) and not isinstance(v.raw2, (Value, PairValue))
    return isinstance(v, Value)


def check_wf(stack: Stack, store: PStore, side: int, c: Cmd) -> Optional[str]:
    """None when well-formed, otherwise the failing clause."""
    for x, v in store.items():
        if not _value_wf(v):
            return f"store value of {x} is not well formed"
    bad = cmd_wf(c)
    if bad:
        return bad
    if side != TOP and contains_pair(c):
        return "side command contains a pair"
    return None


def _redex(c: Cmd) -> Cmd:
    while True:
        if isinstance(c, Seq):
            c = c.first
        elif isinstance(c, Braced):
            c = c.body
        else:
            return c


def _writes_high(lat: Lattice, adv: int, store: PStore, c: Cmd) -> Optional[str]:
    for x in sorted(wt_set(c)):
        p = intvl(store[x])
        for iv in (p.iv1, p.iv2) if isinstance(p, PairIv) else (p,):
            if lat.leq(iv.lo, adv):
                return f"{x} may still be observable"
    return None


def _side_safe(lat: Lattice, adv: int, stack: Stack, store: PStore, c: Cmd) -> Optional[str]:
    for f in stack:
        if lat.leq(f.iv.lo, adv):
            return "side pc frame may be observable"
    return _writes_high(lat, adv, store, c)


def check_sf(lat: Lattice, adv: int, stack: Stack, store: PStore, side: int, c: Cmd) -> Optional[str]:
    """Safety of a configuration; None when every applicable clause holds."""
    if side != TOP:
        bad = _side_safe(lat, adv, stack, store, c)
        if bad:
            return f"clause 1: {bad}"
    r = _redex(c)
    if isinstance(r, IfVal) and isinstance(r.value, PairValue):
        bad = _writes_high(lat, adv, store, r)
        if bad:
            return f"clause 2: {bad}"
    if isinstance(r, PairCmd):
        for iv in (r.iv1, r.iv2):
            if not is_high(lat, adv, iv, r.g):
                return "clause 3: pair guard is not high"
        bad = _writes_high(lat, adv, store, r)
        if bad:
            return f"clause 3: {bad}"
        base = _base_frame(stack, c)
        for i, (k, iv, ci) in ((1, (r.k1, r.iv1, r.c1)), (2, (r.k2, r.iv2, r.c2))):
            frame = Frame(lat.ijoin(base.iv, iv), lat.cjoin(base.g, r.g))
            bad = _side_safe(lat, adv, k + (frame,), store, ci)
            if bad:
                return f"clause 1 (side {i}): {bad}"
    return None


def _base_frame(stack: Stack, c: Cmd) -> Frame:
    # the frame a pair command steps under: strip one frame per enclosing brace
    k = stack
    while True:
        if isinstance(c, Seq):
            c = c.first
        elif isinstance(c, Braced):
            k, c = k[:-1], c.body
        else:
            return k[0]


# runtime typing


def _check_value(lat: Lattice, adv: int, v: PValue, t: GType, what: str) -> None:
    if isinstance(v, PairValue):
        for raw, iv in ((v.raw1, v.iv1), (v.raw2, v.iv2)):
            if base_of(raw) is not t.base:
                raise RuntimeTypeError("R-V-Pair", f"{what} has the wrong base type")
            if not lat.precision(iv, lat.gamma(t.g)):
                raise RuntimeTypeError("R-V-Pair", f"{what} interval outside its label")
            if not is_high(lat, adv, iv, t.g):
                raise RuntimeTypeError("R-V-Pair", f"{what} pair is observable")
        if v.g != t.g:
            raise RuntimeTypeError("R-V-Pair", f"{what} carries the wrong label")
        return
    if base_of(v.raw) is not t.base or v.g != t.g:
        raise RuntimeTypeError("T-S-Ind", f"{what} does not have its declared type")
    if not lat.precision(v.iv, lat.gamma(v.g)):
        raise RuntimeTypeError("T-S-Ind", f"{what} interval outside its label")


def check_store_typing(lat: Lattice, env: TypeEnv, adv: int, store: PStore) -> None:
    if set(store) != set(env):
        raise RuntimeTypeError("T-S-Ind", "store and environment domains differ")
    for x, v in store.items():
        _check_value(lat, adv, v, env[x], x)


def check_trace_typing(lat: Lattice, adv: int, trace: Trace) -> None:
    for a in trace:
        rule = "T-A-OutI" if a.side else "T-A-Out"
        v = a.value
        t = GType(base_of(v.raw1 if isinstance(v, PairValue) else v.raw), v.g)
        _check_value(lat, adv, v, t, "output")
        if a.side and lat.leq(a.channel, adv):
            raise RuntimeTypeError(rule, "indexed output on an observable channel")
        p = intvl(v)
        for iv in (p.iv1, p.iv2) if isinstance(p, PairIv) else (p,):
            if not lat.interval_leq(iv, lat.point(a.channel)):
                raise RuntimeTypeError(rule, "output interval above the channel")


def check_runtime_typing(
    lat: Lattice, env: TypeEnv, adv: int, stack: Stack, c: Cmd, literal_seq: bool = False
) -> None:
    """``Γ; κ ⊢_r c``; raises :class:`RuntimeTypeError` naming the failed premise.

    ``literal_seq`` insists on a non-empty frame prefix for sequences, which
    leaves a pending branch at the outermost level untypable.
    """
    if not stack:
        raise RuntimeTypeError("R-End", "empty pc stack")
    match c:
        case Seq(first=a, second=b):
            if len(stack) == 1 and is_static(c):
                _static_check(lat, env, stack[0], c, "R-End")
                return
            if literal_seq and len(stack) == 1:
                raise RuntimeTypeError("R-C-Seq", "sequence under a single pc frame")
            check_runtime_typing(lat, env, adv, stack, a, literal_seq)
            _static_check(lat, env, stack[-1], b, "R-C-Seq")
        case Braced(body=b):
            if len(stack) < 2:
                raise RuntimeTypeError("R-Pop", "braced command under a single pc frame")
            check_runtime_typing(lat, env, adv, stack[:-1], b, literal_seq)
        case PairCmd():
            if len(stack) != 1:
                raise RuntimeTypeError("R-C-Pair", "pair under several pc frames")
            pc = stack[0]
            for k, iv, ci in ((c.k1, c.iv1, c.c1), (c.k2, c.iv2, c.c2)):
                if not is_high(lat, adv, iv, c.g):
                    raise RuntimeTypeError("R-C-Pair", "pair context is not high")
                frame = Frame(lat.ijoin(pc.iv, iv), lat.cjoin(pc.g, c.g))
                check_runtime_typing(lat, env, adv, k + (frame,), ci, literal_seq)
        case IfVal(value=v, then=a, els=b):
            if len(stack) != 1:
                raise RuntimeTypeError("R-C-If", "pending branch under several pc frames")
            pc = stack[0]
            _check_value(lat, adv, v, GType(BaseType.BOOL, v.g), "guard")
            inner = Frame(lat.ijoin(pc.iv, lat.gamma(v.g)), lat.cjoin(pc.g, v.g))
            _static_check(lat, env, inner, a, "R-C-If")
            _static_check(lat, env, inner, b, "R-C-If")
        case _:
            if len(stack) != 1:
                raise RuntimeTypeError("R-End", f"{type(c).__name__} under several pc frames")
            _static_check(lat, env, stack[0], c, "R-End")


def _static_check(lat: Lattice, env: TypeEnv, pc: Frame, c: Cmd, rule: str) -> None:
    try:
        check_core_cmd(lat, env, pc.iv, pc.g, c)
    except IfcTypeError as e:
        raise RuntimeTypeError(rule, str(e)) from None


def check_config_typing(lat: Lattice, env: TypeEnv, adv: int, stack: Stack, store: PStore, c: Cmd, **kw) -> None:
    check_store_typing(lat, env, adv, store)
    check_runtime_typing(lat, env, adv, stack, c, **kw)


__all__ = [
    "PValue",
    "PairIv",
    "IntervalOrPair",
    "NotLowEquivalent",
    "RuntimeTypeError",
    "PairedMonitor",
    "run_paired",
    "eval_paired",
    "read",
    "upd",
    "upd_side",
    "merge_stores",
    "project",
    "proj_value",
    "proj_store",
    "proj_trace",
    "check_wf",
    "check_sf",
    "check_runtime_typing",
    "check_store_typing",
    "check_trace_typing",
    "check_config_typing",
]
