"""The interval-refining runtime monitor for single executions."""
from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Iterable, Mapping, Optional, Union

from .lattice import Interval, Lattice
from .syntax import (
    Assign,
    Bop,
    Braced,
    Cast,
    Cmd,
    Const,
    Expr,
    Frame,
    If,
    IfVal,
    Output,
    Pos,
    Seq,
    Skip,
    Stack,
    Value,
    Var,
    While,
    apply_bop,
)
from .printer import raw_text

Store = Mapping[str, Value]

DEFAULT_FUEL = 100_000


class Reason(Enum):
    REFINE = "RefineUndef"
    RESTRICT = "RestrictUndef"
    CAST = "CastUndef"


@dataclass(frozen=True)
class Out:
    """An output action; ``side`` is 1 or 2 for actions of one paired branch, else 0."""

    channel: int
    value: object
    side: int = 0


Trace = tuple[Out, ...]


@dataclass(frozen=True)
class Abort:
    reason: Reason
    rule: str
    site: Pos
    var: Optional[str] = None
    target: Optional[Interval] = None


@dataclass(frozen=True)
class Step:
    action: Optional[Out]
    stack: Stack
    store: Store
    cmd: Cmd


@dataclass(frozen=True)
class Terminated:
    store: Store
    trace: Trace
    stack: Stack
    steps: int


@dataclass(frozen=True)
class Aborted:
    reason: Reason
    rule: str
    trace: Trace
    site: Pos
    var: Optional[str] = None
    target: Optional[Interval] = None
    steps: int = 0


@dataclass(frozen=True)
class FuelExhausted:
    stack: Stack
    store: Store
    cmd: Cmd
    trace: Trace
    steps: int


Outcome = Union[Terminated, Aborted, FuelExhausted]


class Stuck(RuntimeError):
    """No rule applies; unreachable for well-typed programs."""


class _Raise(Exception):
    def __init__(self, abort: Abort):
        self.abort = abort


def initial_stack(lat: Lattice) -> Stack:
    return (Frame(Interval(lat.bot, lat.bot), lat.bot),)


def eval_expr(lat: Lattice, store: Store, e: Expr) -> Value:
    """Evaluate ``e``; raises :class:`CastAbort` when evidence cannot be combined."""
    match e:
        case Const(value=v):
            return v
        case Var(name=x):
            return store[x]
        case Bop(op=op, left=a, right=b):
            va = eval_expr(lat, store, a)
            vb = eval_expr(lat, store, b)
            return Value(apply_bop(op, va.raw, vb.raw), lat.ijoin(va.iv, vb.iv), lat.cjoin(va.g, vb.g))
        case Cast(ev=ev, g=g, expr=inner, pos=pos):
            v = eval_expr(lat, store, inner)
            iv = lat.apply_evidence(v.iv, ev)
            if iv is None:
                raise CastAbort(pos)
            return Value(v.raw, iv, g)
    raise TypeError(f"not a core expression: {e!r}")


class CastAbort(Exception):
    def __init__(self, site: Pos):
        self.site = site


def refine_lv(lat: Lattice, ctx: Interval, v: Value) -> Optional[Value]:
    r = lat.refine(ctx, v.iv)
    return None if r is None else Value(v.raw, r[1], v.g)


def upd_label(lat: Lattice, old: Interval, v: Value) -> Optional[Value]:
    iv = lat.restrict_lb(old, v.iv)
    return None if iv is None else Value(v.raw, iv, v.g)


def refine_store(lat: Lattice, store: Store, ws: Iterable[str], ctx: Interval) -> Optional[dict]:
    out = dict(store)
    for x in store:
        if x in ws:
            v = refine_lv(lat, ctx, store[x])
            if v is None:
                return None
            out[x] = v
    return out


def _first_refine_failure(lat: Lattice, store: Store, ws, ctx: Interval) -> Optional[str]:
    for x in store:
        if x in ws and refine_lv(lat, ctx, store[x]) is None:
            return x
    return None


def _eval(lat: Lattice, store: Store, e: Expr) -> Value:
    try:
        return eval_expr(lat, store, e)
    except CastAbort as ca:
        raise _Raise(Abort(Reason.CAST, "M-Cast-Err", ca.site)) from None


class Monitor:
    """Small-step command semantics.

    ``refine_branches=False`` disables the write-set refinement performed
    before entering a branch; it exists only to demonstrate the leak that
    refinement prevents and must not be used otherwise.
    """

    def __init__(self, lat: Lattice, refine_branches: bool = True):
        self.lat = lat
        self.refine_branches = refine_branches

    def step(self, stack: Stack, store: Store, c: Cmd) -> Union[Step, Abort]:
        try:
            return self._step(stack, store, c)
        except _Raise as r:
            return r.abort

    def _step(self, stack: Stack, store: Store, c: Cmd) -> Step:
        ctx: list = []
        k, f = descend(ctx, stack, c)
        s = self._redex(k, store, f)
        k2, c2 = plug(ctx, s.stack, s.cmd)
        return Step(s.action, k2, s.store, c2)

    def _redex(self, stack: Stack, store: Store, c: Cmd) -> Step:
        lat = self.lat
        match c:
            case Seq(first=Skip(), second=rest):
                return Step(None, stack, store, rest)
            case Braced(body=Skip()):
                if len(stack) < 2:
                    raise Stuck("pop with a single pc frame")
                return Step(None, stack[1:], store, Skip())
        if len(stack) != 1:
            raise Stuck(f"{type(c).__name__} under {len(stack)} pc frames")
        pc = stack[0]
        match c:
            case Assign(name=x, expr=e, pos=pos):
                v = _eval(lat, store, e)
                v1 = refine_lv(lat, pc.iv, v)
                if v1 is None:
                    raise _Raise(Abort(Reason.REFINE, "M-Assign-Err", pos, x))
                v2 = upd_label(lat, store[x].iv, v1)
                if v2 is None:
                    raise _Raise(Abort(Reason.RESTRICT, "M-Assign-Err2", pos, x))
                return Step(None, stack, {**store, x: v2}, Skip())
            case Output(channel=ch, expr=e, pos=pos):
                v = _eval(lat, store, e)
                v1 = refine_lv(lat, pc.iv, v)
                if v1 is None:
                    raise _Raise(Abort(Reason.REFINE, "M-Out-Err", pos))
                v2 = upd_label(lat, lat.point(ch), v1)
                if v2 is None:
                    raise _Raise(Abort(Reason.RESTRICT, "M-Out-Err2", pos))
                return Step(Out(ch, v2), stack, store, Skip())
            case If(ws=ws, cond=e, then=a, els=b, pos=pos):
                v = _eval(lat, store, e)
                ctx = lat.ijoin(pc.iv, v.iv)
                new = refine_store(lat, store, ws, ctx) if self.refine_branches else store
                if new is None:
                    bad = _first_refine_failure(lat, store, ws, ctx)
                    raise _Raise(Abort(Reason.REFINE, "M-If-Refine-Err", pos, bad, ctx))
                return Step(None, stack, new, IfVal(v, a, b, pos))
            case IfVal(value=v, then=a, els=b):
                frame = Frame(lat.ijoin(pc.iv, v.iv), lat.cjoin(pc.g, v.g))
                return Step(None, (frame,) + stack, store, Braced(a if v.raw else b))
            case While(ws=ws, cond=e, body=b, pos=pos):
                return Step(None, stack, store, If(ws, e, Seq(b, c), Skip(), pos))
            case Skip():
                raise Stuck("skip is terminal")
        raise Stuck(f"no rule for {type(c).__name__}")

    def run(
        self,
        store: Store,
        c: Cmd,
        fuel: int = DEFAULT_FUEL,
        stack: Optional[Stack] = None,
        observer: Optional[Callable[[Step], None]] = None,
    ) -> Outcome:
        stack = stack if stack is not None else initial_stack(self.lat)

        def notify(pre, s: Step) -> None:
            observer(s)

        return drive(self._redex, _Raise, store, c, stack, fuel, notify if observer else None)


# evaluation contexts


def descend(ctx: list, stack: Stack, c: Cmd) -> tuple[Stack, Cmd]:
    """Move into sequence heads and braces until a redex, recording the context in ``ctx``."""
    while True:
        if isinstance(c, Seq) and not isinstance(c.first, Skip):
            ctx.append((False, c.second))
            c = c.first
        elif isinstance(c, Braced) and not isinstance(c.body, Skip):
            if len(stack) < 2:
                raise Stuck("braced command with a single pc frame")
            ctx.append((True, stack[-1]))
            stack = stack[:-1]
            c = c.body
        else:
            return stack, c


def plug(ctx: list, stack: Stack, c: Cmd, upto: int = 0) -> tuple[Stack, Cmd]:
    for braced, item in reversed(ctx[upto:]):
        if braced:
            stack = stack + (item,)
            c = Braced(c)
        else:
            c = Seq(c, item)
    return stack, c


def drive(redex, raised, store, c: Cmd, stack: Stack, fuel: int, observer=None) -> Outcome:
    """Run to completion keeping the evaluation context between steps.

    ``redex(stack, store, c)`` steps a command in redex position and may raise
    ``raised`` carrying an :class:`Abort`. ``observer(pre, step)`` receives
    whole configurations, which costs time linear in the nesting depth.
    """
    ctx: list = []
    trace: list[Out] = []
    steps = 0
    k = stack
    while True:
        k, c = descend(ctx, k, c)
        if isinstance(c, Skip):
            if not ctx:
                if len(k) == 1:
                    return Terminated(store, tuple(trace), k, steps)
                raise Stuck("skip with pending pc frames")
            braced, item = ctx.pop()
            if braced:
                k, c = k + (item,), Braced(c)
            else:
                c = Seq(c, item)
        if steps >= fuel:
            fk, fc = plug(ctx, k, c)
            return FuelExhausted(fk, store, fc, tuple(trace), steps)
        pre = plug(ctx, k, c) + (store,) if observer else None
        try:
            s = redex(k, store, c)
        except raised as r:
            a = r.abort
            return Aborted(a.reason, a.rule, tuple(trace), a.site, a.var, a.target, steps + 1)
        steps += 1
        if s.action is not None:
            trace.append(s.action)
        if observer is not None:
            fk, fc = plug(ctx, s.stack, s.cmd)
            observer((pre[0], pre[2], pre[1]), type(s)(s.action, fk, s.store, fc))
        k, store, c = s.stack, s.store, s.cmd


def step(lat: Lattice, stack: Stack, store: Store, c: Cmd) -> Union[Step, Abort]:
    return Monitor(lat).step(stack, store, c)


def run(lat: Lattice, store: Store, c: Cmd, fuel: int = DEFAULT_FUEL, **kw) -> Outcome:
    return Monitor(lat).run(store, c, fuel, **kw)


def configurations(lat: Lattice, stack: Stack, store: Store, c: Cmd, fuel: int = DEFAULT_FUEL):
    """All configurations of a run, followed by the final outcome."""
    seen = [(stack, dict(store), c)]
    outcome = Monitor(lat).run(
        store, c, fuel, stack=stack, observer=lambda s: seen.append((s.stack, dict(s.store), s.cmd))
    )
    return seen, outcome


# rendering


def _value_fields(v, lat: Lattice) -> tuple[str, str, str]:
    from .syntax import PairValue

    if isinstance(v, PairValue):
        return (
            f"<{raw_text(v.raw1)}|{raw_text(v.raw2)}>",
            f"<{lat.iname(v.iv1)}|{lat.iname(v.iv2)}>",
            lat.gname(v.g),
        )
    return raw_text(v.raw), lat.iname(v.iv), lat.gname(v.g)


def format_action(a: Out, lat: Lattice) -> str:
    raw, iv, g = _value_fields(a.value, lat)
    head = f"out@{a.side}" if a.side else "out"
    return f"{head} {lat.name(a.channel)} {raw} {iv} ^{g}"


def format_abort(reason_rule: str, site: Pos) -> str:
    where = f"{site[0]}:{site[1]}" if site else "?:?"
    return f"abort {reason_rule} @ {where}"


def render_outcome(outcome: Outcome, lat: Lattice, fmt: str = "plain") -> list[str]:
    trace = outcome.trace
    lines: list[str] = []
    for a in trace:
        if fmt == "json":
            raw, iv, g = _value_fields(a.value, lat)
            rec = {"event": "out", "channel": lat.name(a.channel), "value": raw, "interval": iv, "label": g}
            if a.side:
                rec["side"] = a.side
            lines.append(json.dumps(rec))
        else:
            lines.append(format_action(a, lat))
    if isinstance(outcome, Aborted):
        if fmt == "json":
            rec = {
                "event": "abort",
                "rule": outcome.rule,
                "reason": outcome.reason.value,
                "line": outcome.site[0] if outcome.site else None,
                "col": outcome.site[1] if outcome.site else None,
            }
            lines.append(json.dumps(rec))
        else:
            lines.append(format_abort(outcome.rule, outcome.site))
    elif isinstance(outcome, FuelExhausted):
        lines.append(json.dumps({"event": "fuel", "steps": outcome.steps}) if fmt == "json" else "fuel exhausted")
    return lines
