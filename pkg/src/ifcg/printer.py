"""Deterministic pretty-printers for source and core programs."""
from __future__ import annotations

from .lattice import Interval, Lattice
from .parser import Program
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


def raw_text(raw) -> str:
    if isinstance(raw, bool):
        return "true" if raw else "false"
    return str(raw)


def print_value(v, lat: Lattice) -> str:
    if isinstance(v, PairValue):
        return (
            f"pair({raw_text(v.raw1)}@{lat.iname(v.iv1)}, "
            f"{raw_text(v.raw2)}@{lat.iname(v.iv2)})^{lat.gname(v.g)}"
        )
    return f"{raw_text(v.raw)}@{lat.iname(v.iv)}^{lat.gname(v.g)}"


def print_expr(e: Expr, lat: Lattice) -> str:
    match e:
        case Var(name=x):
            return x
        case Const(value=v):
            return print_value(v, lat)
        case Bop(op=op, left=a, right=b):
            return f"({print_expr(a, lat)} {op} {print_expr(b, lat)})"
        case Cast(ev=ev, g=g, expr=inner):
            return f"<{lat.iname(ev.left)},{lat.iname(ev.right)}>^{lat.gname(g)}({print_expr(inner, lat)})"
    raise TypeError(f"not a core expression: {e!r}")


def print_stack(k: tuple[Frame, ...], lat: Lattice) -> str:
    return "[" + ", ".join(f"{lat.iname(f.iv)}^{lat.gname(f.g)}" for f in k) + "]"


def _ws(ws) -> str:
    return "{" + ",".join(sorted(ws)) + "}"


def print_core(c: Cmd, lat: Lattice) -> str:
    match c:
        case Skip():
            return "skip"
        case Seq(first=a, second=b):
            head = print_core(a, lat)
            if isinstance(a, Seq):
                head = f"({head})"
            return f"{head}; {print_core(b, lat)}"
        case Assign(name=x, expr=e):
            return f"{x} := {print_expr(e, lat)}"
        case Output(channel=ch, expr=e):
            return f"output({lat.name(ch)}, {print_expr(e, lat)})"
        case If(ws=ws, cond=e, then=a, els=b):
            return f"if{_ws(ws)} ({print_expr(e, lat)}) {{ {print_core(a, lat)} }} else {{ {print_core(b, lat)} }}"
        case While(ws=ws, cond=e, body=b):
            return f"while{_ws(ws)} ({print_expr(e, lat)}) {{ {print_core(b, lat)} }}"
        case Braced(body=b):
            return f"{{ {print_core(b, lat)} }}"
        case IfVal(value=v, then=a, els=b):
            return f"ifv ({print_value(v, lat)}) {{ {print_core(a, lat)} }} else {{ {print_core(b, lat)} }}"
        case PairCmd():
            return (
                f"<< {print_stack(c.k1, lat)}; {lat.iname(c.iv1)}; ({print_core(c.c1, lat)}) || "
                f"{print_stack(c.k2, lat)}; {lat.iname(c.iv2)}; ({print_core(c.c2, lat)}) >>^{lat.gname(c.g)}"
            )
    raise TypeError(f"not a core command: {c!r}")


def print_sexpr(e: SExpr, lat: Lattice) -> str:
    match e:
        case SVar(name=x):
            return x
        case SConst(raw=r, g=g):
            return f"{raw_text(r)}^{lat.gname(g)}"
        case SBop(op=op, left=a, right=b):
            return f"({print_sexpr(a, lat)} {op} {print_sexpr(b, lat)})"
        case SAscribe(expr=inner, base=base, g=g):
            return f"({print_sexpr(inner, lat)} :: {base.value}^{lat.gname(g)})"
    raise TypeError(f"not a source expression: {e!r}")


def print_scmd(c: SCmd, lat: Lattice, indent: int = 1) -> str:
    pad = "  " * indent
    match c:
        case SSkip():
            return pad + "skip"
        case SSeq():
            parts = []
            while isinstance(c, SSeq) and not isinstance(c.first, SSeq):
                parts.append(print_scmd(c.first, lat, indent))
                c = c.second
            if isinstance(c, SSeq):
                # left-nested sequences are flattened; they step identically
                parts.append(print_scmd(c.first, lat, indent))
                parts.append(print_scmd(c.second, lat, indent))
            else:
                parts.append(print_scmd(c, lat, indent))
            return ";\n".join(parts)
        case SAssign(name=x, expr=e):
            return f"{pad}{x} := {print_sexpr(e, lat)}"
        case SOutput(channel=ch, expr=e):
            return f"{pad}output({lat.name(ch)}, {print_sexpr(e, lat)})"
        case SIf(cond=e, then=a, els=b):
            out = f"{pad}if ({print_sexpr(e, lat)}) {{\n{print_scmd(a, lat, indent + 1)}\n{pad}}}"
            if not isinstance(b, SSkip):
                out += f" else {{\n{print_scmd(b, lat, indent + 1)}\n{pad}}}"
            return out
        case SWhile(cond=e, body=b):
            return f"{pad}while ({print_sexpr(e, lat)}) {{\n{print_scmd(b, lat, indent + 1)}\n{pad}}}"
    raise TypeError(f"not a source command: {c!r}")


def print_lattice(lat: Lattice) -> str:
    covers = []
    for a in lat.labels:
        for b in lat.labels:
            if a != b and lat.leq(a, b):
                between = any(
                    c not in (a, b) and lat.leq(a, c) and lat.leq(c, b) for c in lat.labels
                )
                if not between:
                    covers.append(f"{lat.name(a)} < {lat.name(b)}")
    lines = [f"  labels: {', '.join(lat.names)};"]
    if covers:
        lines.append(f"  order: {', '.join(covers)};")
    return "lattice {\n" + "\n".join(lines) + "\n}"


def print_decl_value(v: Value, g, lat: Lattice) -> str:
    out = raw_text(v.raw)
    if v.iv != lat.gamma(g):
        out += f" @ {lat.iname(v.iv)}"
    return out


def print_store(decls, lat: Lattice) -> str:
    lines = [
        f"  {d.name} : {d.type.base.value}^{lat.gname(d.type.g)} = {print_decl_value(d.value, d.type.g, lat)};"
        for d in decls
    ]
    return "store {\n" + "\n".join(lines) + ("\n" if lines else "") + "}"


def print_program(p: Program) -> str:
    return (
        f"{print_lattice(p.lattice)}\n{print_store(p.decls, p.lattice)}\n"
        f"program {{\n{print_scmd(p.cmd, p.lattice)}\n}}\n"
    )


def print_interval(iv: Interval, lat: Lattice) -> str:
    return lat.iname(iv)
