"""Parsers for the surface language and the core (evidence) language."""
from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Optional

from .lattice import DYN, Evidence, GLabel, Interval, Lattice, LatticeError, build_lattice
from .syntax import (
    BOPS,
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
    base_of,
)


class ParseError(Exception):
    def __init__(self, pos: Pos, message: str):
        self.pos = pos
        self.message = message
        where = f"{pos[0]}:{pos[1]}: " if pos else ""
        super().__init__(f"{where}{message}")


@dataclass(frozen=True)
class VarDecl:
    name: str
    type: GType
    value: Value
    pos: Pos = None


@dataclass(frozen=True)
class Program:
    lattice: Lattice
    decls: tuple[VarDecl, ...]
    cmd: SCmd

    def env(self) -> dict[str, GType]:
        return {d.name: d.type for d in self.decls}

    def store(self) -> dict[str, Value]:
        return {d.name: d.value for d in self.decls}


_TOKEN = re.compile(
    r"""
    (?P<ws>[ \t\r]+) |
    (?P<nl>\n) |
    (?P<comment>//[^\n]*) |
    (?P<int>\d+) |
    (?P<ident>[A-Za-z_][A-Za-z0-9_]*) |
    (?P<sym>:=|::|<=|==|&&|\|\||<<|>>|[-+*<>(){}\[\],;:^?@|=])
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class Tok:
    kind: str
    text: str
    pos: tuple[int, int]


def tokenize(text: str) -> list[Tok]:
    toks: list[Tok] = []
    line, col, i = 1, 1, 0
    while i < len(text):
        m = _TOKEN.match(text, i)
        if m is None:
            raise ParseError((line, col), f"unexpected character {text[i]!r}")
        kind = m.lastgroup
        s = m.group()
        if kind == "nl":
            line, col = line + 1, 1
        else:
            if kind not in ("ws", "comment"):
                toks.append(Tok(kind, s, (line, col)))
            col += len(s)
        i = m.end()
    toks.append(Tok("eof", "", (line, col)))
    return toks


_PREC = [("||",), ("&&",), ("<", "<=", "=="), ("+", "-"), ("*",)]


class _Base:
    def __init__(self, text: str, lattice: Optional[Lattice] = None):
        self.toks = tokenize(text)
        self.i = 0
        self.lat = lattice

    @property
    def tok(self) -> Tok:
        return self.toks[self.i]

    def peek(self, k: int = 1) -> Tok:
        return self.toks[min(self.i + k, len(self.toks) - 1)]

    def at(self, text: str) -> bool:
        t = self.tok
        return t.text == text and t.kind in ("sym", "ident")

    def advance(self) -> Tok:
        t = self.tok
        self.i += 1
        return t

    def expect(self, text: str) -> Tok:
        if not self.at(text):
            self.fail(f"expected {text!r}, found {self.tok.text or 'end of input'!r}")
        return self.advance()

    def accept(self, text: str) -> bool:
        if self.at(text):
            self.i += 1
            return True
        return False

    def fail(self, msg: str, pos: Pos = None):
        raise ParseError(pos or self.tok.pos, msg)

    def ident(self) -> Tok:
        if self.tok.kind != "ident":
            self.fail(f"expected identifier, found {self.tok.text or 'end of input'!r}")
        return self.advance()

    def label(self) -> int:
        t = self.ident()
        if t.text not in self.lat.index:
            self.fail(f"unknown label {t.text!r}", t.pos)
        return self.lat.index[t.text]

    def glabel(self) -> GLabel:
        if self.accept("?"):
            return DYN
        return self.label()

    def interval(self) -> Interval:
        start = self.expect("[").pos
        lo = self.label()
        self.expect(",")
        hi = self.label()
        self.expect("]")
        iv = Interval(lo, hi)
        if not self.lat.valid(iv):
            self.fail(f"invalid interval {self.lat.iname(iv)}", start)
        return iv

    def literal(self):
        neg = self.accept("-")
        t = self.tok
        if t.kind == "int":
            self.advance()
            return -int(t.text) if neg else int(t.text)
        if neg:
            self.fail("expected integer after '-'")
        if self.at("true"):
            self.advance()
            return True
        if self.at("false"):
            self.advance()
            return False
        self.fail(f"expected literal, found {t.text or 'end of input'!r}")

    def at_literal(self) -> bool:
        t = self.tok
        return (
            t.kind == "int"
            or (t.kind == "ident" and t.text in ("true", "false"))
            or (t.text == "-" and self.peek().kind == "int")
        )

    def base_type(self) -> BaseType:
        t = self.ident()
        if t.text == "int":
            return BaseType.INT
        if t.text == "bool":
            return BaseType.BOOL
        self.fail(f"expected 'int' or 'bool', found {t.text!r}", t.pos)

    def binary(self, level: int, primary):
        if level == len(_PREC):
            return primary()
        left = self.binary(level + 1, primary)
        while self.tok.kind == "sym" and self.tok.text in _PREC[level]:
            op = self.advance()
            right = self.binary(level + 1, primary)
            left = self.make_bop(op.text, left, right, op.pos)
        return left


class SourceParser(_Base):
    def program(self) -> Program:
        self.expect("lattice")
        self.lat = self.latdecl()
        decls = self.store_section()
        self.expect("program")
        self.expect("{")
        cmd = self.cmd()
        self.expect("}")
        if self.tok.kind != "eof":
            self.fail(f"unexpected {self.tok.text!r} after program")
        return Program(self.lat, decls, cmd)

    def latdecl(self) -> Lattice:
        start = self.expect("{").pos
        labels: list[str] = []
        covers: list[tuple[str, str]] = []
        bot = top = None
        while not self.at("}"):
            key = self.ident()
            self.expect(":")
            if key.text == "labels":
                labels.append(self.ident().text)
                while self.accept(","):
                    labels.append(self.ident().text)
            elif key.text == "order":
                while True:
                    a = self.ident().text
                    self.expect("<")
                    b = self.ident().text
                    covers.append((a, b))
                    if not self.accept(","):
                        break
            elif key.text == "bot":
                bot = self.ident().text
            elif key.text == "top":
                top = self.ident().text
            else:
                self.fail(f"unknown lattice field {key.text!r}", key.pos)
            if not self.accept(";"):
                break
        self.expect("}")
        try:
            return build_lattice(labels, covers, bot, top)
        except LatticeError as e:
            raise ParseError(start, str(e)) from None

    def store_section(self) -> tuple[VarDecl, ...]:
        self.expect("store")
        self.expect("{")
        decls: list[VarDecl] = []
        seen: set[str] = set()
        while not self.at("}"):
            t = self.ident()
            if t.text in seen:
                self.fail(f"duplicate variable {t.text!r}", t.pos)
            seen.add(t.text)
            self.expect(":")
            base = self.base_type()
            self.expect("^")
            g = self.glabel()
            self.expect("=")
            lpos = self.tok.pos
            raw = self.literal()
            if base_of(raw) is not base:
                self.fail(f"initial value of {t.text} does not have type {base.value}", lpos)
            iv = self.lat.gamma(g)
            if self.accept("@"):
                ipos = self.tok.pos
                iv = self.interval()
                if not self.lat.precision(iv, self.lat.gamma(g)):
                    self.fail(f"interval {self.lat.iname(iv)} is not within the label {self.lat.gname(g)}", ipos)
            self.expect(";")
            decls.append(VarDecl(t.text, GType(base, g), Value(raw, iv, g), t.pos))
        self.expect("}")
        return tuple(decls)

    def cmd(self) -> SCmd:
        first = self.simple()
        if self.accept(";"):
            if self.at("}") or self.tok.kind == "eof":
                return first
            return SSeq(first, self.cmd())
        return first

    def block(self) -> SCmd:
        self.expect("{")
        if self.at("}"):
            c = SSkip(self.tok.pos)
        else:
            c = self.cmd()
        self.expect("}")
        return c

    def simple(self) -> SCmd:
        t = self.tok
        if self.accept("skip"):
            return SSkip(t.pos)
        if self.accept("output"):
            self.expect("(")
            if self.at("?"):
                self.fail("output channel must be a static label")
            ch = self.label()
            self.expect(",")
            e = self.expr()
            self.expect(")")
            return SOutput(ch, e, t.pos)
        if self.accept("if"):
            self.expect("(")
            e = self.expr()
            self.expect(")")
            then = self.block()
            els = self.block() if self.accept("else") else SSkip(None)
            return SIf(e, then, els, t.pos)
        if self.accept("while"):
            self.expect("(")
            e = self.expr()
            self.expect(")")
            return SWhile(e, self.block(), t.pos)
        if t.kind == "ident" and self.peek().text == ":=":
            self.advance()
            self.advance()
            return SAssign(t.text, self.expr(), t.pos)
        self.fail(f"expected a command, found {t.text or 'end of input'!r}")

    def expr(self) -> SExpr:
        return self.binary(0, self.primary)

    def make_bop(self, op, left, right, pos):
        return SBop(op, left, right, pos)

    def primary(self) -> SExpr:
        t = self.tok
        if self.at_literal():
            raw = self.literal()
            g = self.glabel() if self.accept("^") else self.lat.bot
            return SConst(raw, g, t.pos)
        if self.accept("("):
            e = self.expr()
            if self.accept("::"):
                base = self.base_type()
                self.expect("^")
                g = self.glabel()
                self.expect(")")
                return SAscribe(e, base, g, t.pos)
            self.expect(")")
            return e
        if t.kind == "ident" and t.text not in _KEYWORDS:
            self.advance()
            return SVar(t.text, t.pos)
        self.fail(f"expected an expression, found {t.text or 'end of input'!r}")


_KEYWORDS = {"true", "false", "skip", "output", "if", "else", "while", "ifv", "pair"}


class CoreParser(_Base):
    """Parser for the printed form of core commands (see :mod:`ifcg.printer`)."""

    def cmd(self) -> Cmd:
        if self.accept("("):
            first = self.cmd()
            self.expect(")")
        else:
            first = self.simple()
        if self.accept(";"):
            return Seq(first, self.cmd())
        return first

    def simple(self) -> Cmd:
        t = self.tok
        if self.accept("skip"):
            return Skip(t.pos)
        if self.accept("{"):
            c = self.cmd()
            self.expect("}")
            return Braced(c)
        if self.accept("output"):
            self.expect("(")
            ch = self.label()
            self.expect(",")
            e = self.expr()
            self.expect(")")
            return Output(ch, e, t.pos)
        if self.accept("if"):
            ws = self.write_set()
            self.expect("(")
            e = self.expr()
            self.expect(")")
            then, els = self.branches()
            return If(ws, e, then, els, t.pos)
        if self.accept("ifv"):
            self.expect("(")
            v = self.any_value()
            self.expect(")")
            then, els = self.branches()
            return IfVal(v, then, els, t.pos)
        if self.accept("while"):
            ws = self.write_set()
            self.expect("(")
            e = self.expr()
            self.expect(")")
            return While(ws, e, self.block(), t.pos)
        if self.accept("<<"):
            k1, iv1, c1 = self.pair_side()
            self.expect("||")
            k2, iv2, c2 = self.pair_side()
            self.expect(">>")
            self.expect("^")
            return PairCmd(k1, iv1, c1, k2, iv2, c2, self.glabel())
        if t.kind == "ident" and self.peek().text == ":=":
            self.advance()
            self.advance()
            return Assign(t.text, self.expr(), t.pos)
        self.fail(f"expected a core command, found {t.text or 'end of input'!r}")

    def pair_side(self):
        k = self.stack()
        self.expect(";")
        iv = self.interval()
        self.expect(";")
        return k, iv, self.cmd()

    def stack(self) -> tuple[Frame, ...]:
        self.expect("[")
        frames: list[Frame] = []
        if not self.at("]"):
            while True:
                iv = self.interval()
                self.expect("^")
                frames.append(Frame(iv, self.glabel()))
                if not self.accept(","):
                    break
        self.expect("]")
        return tuple(frames)

    def block(self) -> Cmd:
        self.expect("{")
        c = self.cmd()
        self.expect("}")
        return c

    def branches(self):
        then = self.block()
        self.expect("else")
        return then, self.block()

    def write_set(self) -> frozenset:
        self.expect("{")
        names: list[str] = []
        if not self.at("}"):
            names.append(self.ident().text)
            while self.accept(","):
                names.append(self.ident().text)
        self.expect("}")
        return frozenset(names)

    def value(self) -> Value:
        raw = self.literal()
        self.expect("@")
        iv = self.interval()
        self.expect("^")
        return Value(raw, iv, self.glabel())

    def any_value(self):
        if self.accept("pair"):
            self.expect("(")
            r1 = self.literal()
            self.expect("@")
            i1 = self.interval()
            self.expect(",")
            r2 = self.literal()
            self.expect("@")
            i2 = self.interval()
            self.expect(")")
            self.expect("^")
            return PairValue(i1, r1, i2, r2, self.glabel())
        return self.value()

    def expr(self) -> Expr:
        return self.binary(0, self.primary)

    def make_bop(self, op, left, right, pos):
        return Bop(op, left, right, pos)

    def primary(self) -> Expr:
        t = self.tok
        if self.at_literal():
            return Const(self.value(), t.pos)
        if self.accept("<"):
            left = self.interval()
            self.expect(",")
            right = self.interval()
            self.expect(">")
            self.expect("^")
            g = self.glabel()
            self.expect("(")
            e = self.expr()
            self.expect(")")
            return Cast(Evidence(left, right), g, e, t.pos)
        if self.accept("("):
            e = self.expr()
            self.expect(")")
            return e
        if t.kind == "ident" and t.text not in _KEYWORDS:
            self.advance()
            return Var(t.text, t.pos)
        self.fail(f"expected a core expression, found {t.text or 'end of input'!r}")


def parse_program(text: str) -> Program:
    return SourceParser(text).program()


def parse_store(text: str, lattice: Lattice) -> tuple[VarDecl, ...]:
    """Parse a store section, either alone or inside a full program file."""
    p = SourceParser(text, lattice)
    if p.at("lattice"):
        return parse_program(text).decls
    decls = p.store_section()
    if p.tok.kind != "eof":
        p.fail(f"unexpected {p.tok.text!r} after store section")
    return decls


def parse_core(text: str, lattice: Lattice) -> Cmd:
    p = CoreParser(text, lattice)
    c = p.cmd()
    if p.tok.kind != "eof":
        p.fail(f"unexpected {p.tok.text!r} after command")
    return c


def parse_core_expr(text: str, lattice: Lattice) -> Expr:
    p = CoreParser(text, lattice)
    e = p.expr()
    if p.tok.kind != "eof":
        p.fail(f"unexpected {p.tok.text!r} after expression")
    return e


assert set(BOPS) == {op for level in _PREC for op in level}
