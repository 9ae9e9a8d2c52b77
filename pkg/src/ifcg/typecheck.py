"""Gradual security typing for source and core programs."""
from __future__ import annotations

from typing import Mapping

from .lattice import DYN, Evidence, GLabel, Interval, Lattice
from .syntax import (
    BOPS,
    Assign,
    BaseType,
    Bop,
    Cast,
    Cmd,
    Const,
    Expr,
    GType,
    If,
    Output,
    Pos,
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
    Var,
    While,
    base_of,
    wt_set,
)

TypeEnv = Mapping[str, GType]


class IfcTypeError(Exception):
    """A failed typing premise, with the site and premise name."""

    def __init__(self, pos: Pos, reason: str, message: str):
        self.pos = pos
        self.reason = reason
        where = f"{pos[0]}:{pos[1]}: " if pos else ""
        super().__init__(f"{where}{reason}: {message}")


class WriteSetMismatch(IfcTypeError):
    pass


def _lookup(env: TypeEnv, x: str, pos: Pos) -> GType:
    try:
        return env[x]
    except KeyError:
        raise IfcTypeError(pos, "UnboundVar", f"variable {x} is not declared") from None


def _bop_type(op: str, t1: GType, t2: GType, lat: Lattice, pos: Pos) -> GType:
    arg, res = BOPS[op]
    if t1.base is not arg or t2.base is not arg:
        raise IfcTypeError(pos, "BaseMismatch", f"operator {op} expects {arg.value} operands")
    return GType(res, lat.cjoin(t1.g, t2.g))


def check_source_expr(lat: Lattice, env: TypeEnv, e: SExpr) -> GType:
    match e:
        case SConst(raw=r, g=g):
            return GType(base_of(r), g)
        case SVar(name=x, pos=pos):
            return _lookup(env, x, pos)
        case SBop(op=op, left=a, right=b, pos=pos):
            return _bop_type(op, check_source_expr(lat, env, a), check_source_expr(lat, env, b), lat, pos)
        case SAscribe(expr=inner, base=base, g=g, pos=pos):
            t = check_source_expr(lat, env, inner)
            if t.base is not base:
                raise IfcTypeError(pos, "BaseMismatch", f"cannot ascribe {t.base.value} as {base.value}")
            if not lat.cleq(t.g, g):
                raise IfcTypeError(
                    pos, "CastNotConsistent", f"label {lat.gname(t.g)} is not consistently below {lat.gname(g)}"
                )
            return GType(base, g)
    raise TypeError(f"not a source expression: {e!r}")


def check_source_cmd(lat: Lattice, env: TypeEnv, pc: GLabel, c: SCmd) -> None:
    match c:
        case SSkip():
            return
        case SSeq(first=a, second=b):
            check_source_cmd(lat, env, pc, a)
            check_source_cmd(lat, env, pc, b)
        case SAssign(name=x, expr=e, pos=pos):
            tx = _lookup(env, x, pos)
            te = check_source_expr(lat, env, e)
            if te.base is not tx.base:
                raise IfcTypeError(pos, "BaseMismatch", f"{x} has type {tx.base.value}")
            if not lat.cleq(pc, tx.g):
                raise IfcTypeError(pos, "PcNotBelowTarget", f"pc {lat.gname(pc)} may not flow to {x}")
            if not lat.cleq(te.g, tx.g):
                raise IfcTypeError(
                    pos, "ValueNotBelowTarget", f"label {lat.gname(te.g)} may not flow to {x}:{lat.gname(tx.g)}"
                )
        case SOutput(channel=ch, expr=e, pos=pos):
            te = check_source_expr(lat, env, e)
            if not lat.cleq(te.g, ch):
                raise IfcTypeError(pos, "ValueNotBelowChannel", f"label {lat.gname(te.g)} above channel")
            if not lat.cleq(pc, ch):
                raise IfcTypeError(pos, "PcNotBelowChannel", f"pc {lat.gname(pc)} above channel")
        case SIf(cond=e, then=a, els=b, pos=pos):
            te = check_source_expr(lat, env, e)
            if te.base is not BaseType.BOOL:
                raise IfcTypeError(pos, "BaseMismatch", "branch condition must be bool")
            inner = lat.cjoin(pc, te.g)
            check_source_cmd(lat, env, inner, a)
            check_source_cmd(lat, env, inner, b)
        case SWhile(cond=e, body=b, pos=pos):
            te = check_source_expr(lat, env, e)
            if te.base is not BaseType.BOOL:
                raise IfcTypeError(pos, "BaseMismatch", "loop condition must be bool")
            check_source_cmd(lat, env, lat.cjoin(pc, te.g), b)
        case _:
            raise TypeError(f"not a source command: {c!r}")


def check_evidence_subtyping(lat: Lattice, ev: Evidence, t1: GType, t2: GType) -> bool:
    return (
        t1.base is t2.base
        and lat.precision(ev.left, lat.gamma(t1.g))
        and lat.precision(ev.right, lat.gamma(t2.g))
        and lat.cleq(t1.g, t2.g)
    )


def check_core_expr(lat: Lattice, env: TypeEnv, e: Expr) -> GType:
    match e:
        case Const(value=v, pos=pos):
            if not lat.precision(v.iv, lat.gamma(v.g)):
                raise IfcTypeError(pos, "ConstInterval", "constant interval outside its label")
            return GType(base_of(v.raw), v.g)
        case Var(name=x, pos=pos):
            return _lookup(env, x, pos)
        case Bop(op=op, left=a, right=b, pos=pos):
            return _bop_type(op, check_core_expr(lat, env, a), check_core_expr(lat, env, b), lat, pos)
        case Cast(ev=ev, g=g, expr=inner, pos=pos):
            t = check_core_expr(lat, env, inner)
            target = GType(t.base, g)
            if not check_evidence_subtyping(lat, ev, t, target):
                raise IfcTypeError(pos, "BadEvidence", "evidence does not justify the cast")
            return target
    raise TypeError(f"not a core expression: {e!r}")


def check_core_cmd(lat: Lattice, env: TypeEnv, pc_iv: Interval, pc: GLabel, c: Cmd) -> None:
    """Core typing ``Γ; ι_pc g_pc ⊢ c`` for commands without runtime forms."""
    match c:
        case Skip():
            return
        case Seq(first=a, second=b):
            check_core_cmd(lat, env, pc_iv, pc, a)
            check_core_cmd(lat, env, pc_iv, pc, b)
        case Assign(name=x, expr=e, pos=pos):
            tx = _lookup(env, x, pos)
            te = check_core_expr(lat, env, e)
            if te != tx:
                raise IfcTypeError(pos, "AssignTypeMismatch", f"{x} and the assigned expression differ in type")
            _check_pc(lat, pc_iv, pc, pos)
            if not lat.cleq(pc, tx.g):
                raise IfcTypeError(pos, "PcNotBelowTarget", f"pc {lat.gname(pc)} may not flow to {x}")
        case Output(channel=ch, expr=e, pos=pos):
            te = check_core_expr(lat, env, e)
            if te.g != ch:
                raise IfcTypeError(pos, "OutputLabelMismatch", "output expression must carry the channel label")
            _check_pc(lat, pc_iv, pc, pos)
            if not lat.cleq(pc, ch):
                raise IfcTypeError(pos, "PcNotBelowChannel", f"pc {lat.gname(pc)} above channel")
        case If(ws=ws, cond=e, then=a, els=b, pos=pos):
            g = _bool_label(lat, env, e, pos)
            if ws != wt_set(a) | wt_set(b):
                raise WriteSetMismatch(pos, "WriteSetMismatch", "annotated write set differs from the branches")
            inner_iv = lat.ijoin(pc_iv, lat.gamma(g))
            inner = lat.cjoin(pc, g)
            check_core_cmd(lat, env, inner_iv, inner, a)
            check_core_cmd(lat, env, inner_iv, inner, b)
        case While(ws=ws, cond=e, body=b, pos=pos):
            g = _bool_label(lat, env, e, pos)
            if ws != wt_set(b):
                raise WriteSetMismatch(pos, "WriteSetMismatch", "annotated write set differs from the body")
            check_core_cmd(lat, env, lat.ijoin(pc_iv, lat.gamma(g)), lat.cjoin(pc, g), b)
        case _:
            raise IfcTypeError(None, "RuntimeForm", f"{type(c).__name__} is not a static command")


def _bool_label(lat: Lattice, env: TypeEnv, e: Expr, pos: Pos) -> GLabel:
    t = check_core_expr(lat, env, e)
    if t.base is not BaseType.BOOL:
        raise IfcTypeError(pos, "BaseMismatch", "condition must be bool")
    return t.g


def _check_pc(lat: Lattice, pc_iv: Interval, pc: GLabel, pos: Pos) -> None:
    if not lat.precision(pc_iv, lat.gamma(pc)):
        raise IfcTypeError(pos, "PcInterval", "pc interval outside the pc label")


def top_pc(lat: Lattice) -> tuple[Interval, GLabel]:
    return Interval(lat.bot, lat.bot), lat.bot


__all__ = [
    "DYN",
    "IfcTypeError",
    "WriteSetMismatch",
    "check_source_expr",
    "check_source_cmd",
    "check_evidence_subtyping",
    "check_core_expr",
    "check_core_cmd",
    "top_pc",
]
