"""Abstract syntax for source programs, core programs and runtime states."""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import NamedTuple, Optional, Union

from .lattice import Evidence, GLabel, Interval, Label

Pos = Optional[tuple[int, int]]
Raw = Union[bool, int]


class BaseType(Enum):
    INT = "int"
    BOOL = "bool"


class GType(NamedTuple):
    base: BaseType
    g: GLabel


def base_of(raw: Raw) -> BaseType:
    return BaseType.BOOL if isinstance(raw, bool) else BaseType.INT


# operator -> (operand type, result type)
BOPS: dict[str, tuple[BaseType, BaseType]] = {
    "+": (BaseType.INT, BaseType.INT),
    "-": (BaseType.INT, BaseType.INT),
    "*": (BaseType.INT, BaseType.INT),
    "<": (BaseType.INT, BaseType.BOOL),
    "<=": (BaseType.INT, BaseType.BOOL),
    "==": (BaseType.INT, BaseType.BOOL),
    "&&": (BaseType.BOOL, BaseType.BOOL),
    "||": (BaseType.BOOL, BaseType.BOOL),
}

_MASK = (1 << 64) - 1


def wrap64(n: int) -> int:
    n &= _MASK
    return n - (1 << 64) if n >> 63 else n


def apply_bop(op: str, a: Raw, b: Raw) -> Raw:
    if op == "+":
        return wrap64(a + b)
    if op == "-":
        return wrap64(a - b)
    if op == "*":
        return wrap64(a * b)
    if op == "<":
        return a < b
    if op == "<=":
        return a <= b
    if op == "==":
        return a == b
    if op == "&&":
        return a and b
    if op == "||":
        return a or b
    raise ValueError(f"unknown operator {op}")


# source language


@dataclass(frozen=True)
class SVar:
    name: str
    pos: Pos = field(default=None, compare=False)


@dataclass(frozen=True)
class SConst:
    raw: Raw
    g: GLabel
    pos: Pos = field(default=None, compare=False)


@dataclass(frozen=True)
class SBop:
    op: str
    left: "SExpr"
    right: "SExpr"
    pos: Pos = field(default=None, compare=False)


@dataclass(frozen=True)
class SAscribe:
    expr: "SExpr"
    base: BaseType
    g: GLabel
    pos: Pos = field(default=None, compare=False)


SExpr = Union[SVar, SConst, SBop, SAscribe]


@dataclass(frozen=True)
class SSkip:
    pos: Pos = field(default=None, compare=False)


@dataclass(frozen=True)
class SSeq:
    first: "SCmd"
    second: "SCmd"


@dataclass(frozen=True)
class SAssign:
    name: str
    expr: SExpr
    pos: Pos = field(default=None, compare=False)


@dataclass(frozen=True)
class SOutput:
    channel: Label
    expr: SExpr
    pos: Pos = field(default=None, compare=False)


@dataclass(frozen=True)
class SIf:
    cond: SExpr
    then: "SCmd"
    els: "SCmd"
    pos: Pos = field(default=None, compare=False)


@dataclass(frozen=True)
class SWhile:
    cond: SExpr
    body: "SCmd"
    pos: Pos = field(default=None, compare=False)


SCmd = Union[SSkip, SSeq, SAssign, SOutput, SIf, SWhile]


# runtime values


@dataclass(frozen=True)
class Value:
    """A labeled value ``(ι u)^g``."""

    raw: Raw
    iv: Interval
    g: GLabel


@dataclass(frozen=True)
class PairValue:
    """A value pair ``⟨ι1 u1 | ι2 u2⟩^g`` from two executions."""

    iv1: Interval
    raw1: Raw
    iv2: Interval
    raw2: Raw
    g: GLabel


AnyValue = Union[Value, PairValue]


class Frame(NamedTuple):
    iv: Interval
    g: GLabel


# the pc stack, top frame first
Stack = tuple[Frame, ...]


# core language


@dataclass(frozen=True)
class Var:
    name: str
    pos: Pos = field(default=None, compare=False)


@dataclass(frozen=True)
class Const:
    value: Value
    pos: Pos = field(default=None, compare=False)


@dataclass(frozen=True)
class Bop:
    op: str
    left: "Expr"
    right: "Expr"
    pos: Pos = field(default=None, compare=False)


@dataclass(frozen=True)
class Cast:
    ev: Evidence
    g: GLabel
    expr: "Expr"
    pos: Pos = field(default=None, compare=False)


Expr = Union[Var, Const, Bop, Cast]


@dataclass(frozen=True)
class Skip:
    pos: Pos = field(default=None, compare=False)


@dataclass(frozen=True)
class Seq:
    first: "Cmd"
    second: "Cmd"


@dataclass(frozen=True)
class Assign:
    name: str
    expr: Expr
    pos: Pos = field(default=None, compare=False)


@dataclass(frozen=True)
class Output:
    channel: Label
    expr: Expr
    pos: Pos = field(default=None, compare=False)


@dataclass(frozen=True)
class If:
    ws: frozenset
    cond: Expr
    then: "Cmd"
    els: "Cmd"
    pos: Pos = field(default=None, compare=False)


@dataclass(frozen=True)
class While:
    ws: frozenset
    cond: Expr
    body: "Cmd"
    pos: Pos = field(default=None, compare=False)


@dataclass(frozen=True)
class Braced:
    body: "Cmd"


@dataclass(frozen=True)
class IfVal:
    value: AnyValue
    then: "Cmd"
    els: "Cmd"
    pos: Pos = field(default=None, compare=False)


@dataclass(frozen=True)
class PairCmd:
    k1: Stack
    iv1: Interval
    c1: "Cmd"
    k2: Stack
    iv2: Interval
    c2: "Cmd"
    g: GLabel


Cmd = Union[Skip, Seq, Assign, Output, If, While, Braced, IfVal, PairCmd]

SKIP = Skip()


def seq(*cmds):
    """Right-nested sequence of the given commands."""
    if not cmds:
        return SKIP
    out = cmds[-1]
    make = SSeq if isinstance(out, (SSkip, SSeq, SAssign, SOutput, SIf, SWhile)) else Seq
    for c in reversed(cmds[:-1]):
        out = make(c, out)
    return out


def wt_set(c) -> frozenset:
    """Variables possibly written by a source or core command."""
    match c:
        case SAssign(name=x) | Assign(name=x):
            return frozenset((x,))
        case SSeq(first=a, second=b) | Seq(first=a, second=b):
            return wt_set(a) | wt_set(b)
        case SIf(then=a, els=b) | If(then=a, els=b) | IfVal(then=a, els=b):
            return wt_set(a) | wt_set(b)
        case SWhile(body=b) | While(body=b) | Braced(body=b):
            return wt_set(b)
        case PairCmd(c1=a, c2=b):
            return wt_set(a) | wt_set(b)
        case _:
            return frozenset()


def contains_pair(c: Cmd) -> bool:
    match c:
        case PairCmd():
            return True
        case IfVal(value=v, then=a, els=b):
            return isinstance(v, PairValue) or contains_pair(a) or contains_pair(b)
        case Seq(first=a, second=b) | If(then=a, els=b):
            return contains_pair(a) or contains_pair(b)
        case While(body=b) | Braced(body=b):
            return contains_pair(b)
        case _:
            return False


def contains_brace(c: Cmd) -> bool:
    match c:
        case Braced():
            return True
        case Seq(first=a, second=b) | If(then=a, els=b) | IfVal(then=a, els=b):
            return contains_brace(a) or contains_brace(b)
        case While(body=b):
            return contains_brace(b)
        case PairCmd(c1=a, c2=b):
            return contains_brace(a) or contains_brace(b)
        case _:
            return False


def is_static(c: Cmd) -> bool:
    """True when ``c`` uses no runtime-only forms."""
    match c:
        case Braced() | IfVal() | PairCmd():
            return False
        case Seq(first=a, second=b) | If(then=a, els=b):
            return is_static(a) and is_static(b)
        case While(body=b):
            return is_static(b)
        case _:
            return True


def cmd_wf(c: Cmd) -> Optional[str]:
    """Return ``None`` when ``c`` is well formed, else the violated clause."""
    match c:
        case PairCmd(c1=a, c2=b):
            for side in (a, b):
                if contains_pair(side):
                    return "nested pair"
                err = cmd_wf(side)
                if err:
                    return err
        case IfVal(then=a, els=b) | If(then=a, els=b):
            for side in (a, b):
                if contains_pair(side) or contains_brace(side):
                    return "branch contains a pair or brace"
        case While(body=b):
            if contains_pair(b) or contains_brace(b):
                return "loop body contains a pair or brace"
        case Seq(first=a, second=b):
            if contains_pair(b) or contains_brace(b):
                return "sequence tail contains a pair or brace"
            return cmd_wf(a)
        case Braced(body=b):
            return cmd_wf(b)
    return None


def line_of(pos: Pos) -> Optional[int]:
    return None if pos is None else pos[0]
