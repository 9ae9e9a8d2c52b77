"""Type-directed translation from source programs to evidence-annotated core programs."""
from __future__ import annotations

from .lattice import Evidence, GLabel, Lattice
from .parser import Program
from .syntax import (
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
    Value,
    Var,
    While,
    wt_set,
)
from .typecheck import IfcTypeError, TypeEnv, _bop_type, _lookup, check_source_cmd, check_source_expr


def _evidence(lat: Lattice, g_from: GLabel, g_to: GLabel, pos: Pos) -> Evidence:
    r = lat.refine(lat.gamma(g_from), lat.gamma(g_to))
    if r is None:
        raise IfcTypeError(
            pos, "RefineUndefined", f"no evidence from {lat.gname(g_from)} to {lat.gname(g_to)}"
        )
    return Evidence(*r)


def elaborate_expr(lat: Lattice, env: TypeEnv, e: SExpr, check: bool = True) -> tuple[Expr, GType]:
    match e:
        case SConst(raw=r, g=g, pos=pos):
            t = check_source_expr(lat, env, e)
            return Const(Value(r, lat.gamma(g), g), pos), t
        case SVar(name=x, pos=pos):
            return Var(x, pos), _lookup(env, x, pos)
        case SBop(op=op, left=a, right=b, pos=pos):
            ea, ta = elaborate_expr(lat, env, a, check)
            eb, tb = elaborate_expr(lat, env, b, check)
            return Bop(op, ea, eb, pos), _bop_type(op, ta, tb, lat, pos)
        case SAscribe(expr=inner, base=base, g=g, pos=pos):
            if check:
                check_source_expr(lat, env, e)
            ei, ti = elaborate_expr(lat, env, inner, check)
            if ti.base is not base:
                raise IfcTypeError(pos, "BaseMismatch", f"cannot ascribe {ti.base.value} as {base.value}")
            return Cast(_evidence(lat, ti.g, g, pos), g, ei, pos), GType(base, g)
    raise TypeError(f"not a source expression: {e!r}")


def elaborate_cmd(lat: Lattice, env: TypeEnv, pc: GLabel, c: SCmd, check: bool = True) -> Cmd:
    """Translate ``c`` typed under ``pc``.

    With ``check=False`` the label-flow premises are skipped and only the
    evidence is computed; this is how ill-typed programs can still be run
    under the monitor for comparison purposes.
    """
    if check:
        check_source_cmd(lat, env, pc, c)
    return _cmd(lat, env, pc, c, check)


def _cmd(lat: Lattice, env: TypeEnv, pc: GLabel, c: SCmd, check: bool) -> Cmd:
    match c:
        case SSkip(pos=pos):
            return Skip(pos)
        case SSeq(first=a, second=b):
            return Seq(_cmd(lat, env, pc, a, check), _cmd(lat, env, pc, b, check))
        case SAssign(name=x, expr=e, pos=pos):
            tx = _lookup(env, x, pos)
            ee, te = elaborate_expr(lat, env, e, check)
            if te.base is not tx.base:
                raise IfcTypeError(pos, "BaseMismatch", f"{x} has type {tx.base.value}")
            return Assign(x, Cast(_evidence(lat, te.g, tx.g, pos), tx.g, ee, pos), pos)
        case SOutput(channel=ch, expr=e, pos=pos):
            ee, te = elaborate_expr(lat, env, e, check)
            return Output(ch, Cast(_evidence(lat, te.g, ch, pos), ch, ee, pos), pos)
        case SIf(cond=e, then=a, els=b, pos=pos):
            ee, te = elaborate_expr(lat, env, e, check)
            if te.base is not BaseType.BOOL:
                raise IfcTypeError(pos, "BaseMismatch", "branch condition must be bool")
            inner = lat.cjoin(pc, te.g)
            ca = _cmd(lat, env, inner, a, check)
            cb = _cmd(lat, env, inner, b, check)
            return If(wt_set(ca) | wt_set(cb), ee, ca, cb, pos)
        case SWhile(cond=e, body=b, pos=pos):
            ee, te = elaborate_expr(lat, env, e, check)
            if te.base is not BaseType.BOOL:
                raise IfcTypeError(pos, "BaseMismatch", "loop condition must be bool")
            cb = _cmd(lat, env, lat.cjoin(pc, te.g), b, check)
            return While(wt_set(cb), ee, cb, pos)
    raise TypeError(f"not a source command: {c!r}")


def elaborate_program(p: Program, check: bool = True) -> Cmd:
    return elaborate_cmd(p.lattice, p.env(), p.lattice.bot, p.cmd, check)
