"""Baseline flow-sensitive monitors (NSU, permissive upgrade, hybrid) and a comparison driver."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Callable, Mapping, Optional, Sequence

from .elaborate import elaborate_cmd
from .lattice import DYN, Lattice
from .monitor import DEFAULT_FUEL, Abort, Monitor, descend, initial_stack
from .parser import Program
from .printer import raw_text
from .syntax import (
    If,
    Pos,
    SAscribe,
    SAssign,
    SBop,
    SCmd,
    SConst,
    SExpr,
    SIf,
    Skip,
    SOutput,
    SSeq,
    SSkip,
    SVar,
    SWhile,
    apply_bop,
    wt_set,
)
from .typecheck import IfcTypeError

PARTIAL = -2  # permissive upgrade's "partially leaked" marker


class UnsupportedLattice(ValueError):
    pass


@dataclass(frozen=True)
class FsValue:
    raw: object
    label: int


@dataclass(frozen=True)
class Upgrade:
    var: str
    label: str
    site: Pos


@dataclass
class BaselineOutcome:
    """Result of one monitored run, at the granularity of the comparison table."""

    monitor: str
    status: str  # terminated, aborted or fuel
    outputs: list[tuple[str, str]] = field(default_factory=list)
    upgrades: list[Upgrade] = field(default_factory=list)
    store: dict = field(default_factory=dict)
    site: Pos = None
    construct: str = ""
    detail: str = ""
    steps: int = 0
    note: str = ""

    @property
    def aborted(self) -> bool:
        return self.status == "aborted"


class _Stop(Exception):
    def __init__(self, site: Pos, construct: str, detail: str):
        self.site = site
        self.construct = construct
        self.detail = detail


def short_expr(e: SExpr) -> str:
    """Source expression without label annotations."""
    match e:
        case SVar(name=x):
            return x
        case SConst(raw=r):
            return raw_text(r)
        case SBop(op=op, left=a, right=b):
            return f"{short_expr(a)} {op} {short_expr(b)}"
        case SAscribe(expr=inner):
            return short_expr(inner)
    raise TypeError(e)


def short_cmd(c: SCmd, lat: Lattice) -> str:
    match c:
        case SAssign(name=x, expr=e):
            return f"{x} := {short_expr(e)}"
        case SOutput(channel=ch, expr=e):
            return f"output({lat.name(ch)}, {short_expr(e)})"
        case SIf(cond=e):
            return f"if {short_expr(e)}"
        case SWhile(cond=e):
            return f"while {short_expr(e)}"
        case SSkip():
            return "skip"
    return type(c).__name__


class _Baseline:
    name = "baseline"

    def __init__(self, lat: Lattice):
        self.lat = lat

    # label algebra; overridden for the partial marker
    def join(self, a: int, b: int) -> int:
        return self.lat.join(a, b)

    def leq(self, a: int, b: int) -> bool:
        return self.lat.leq(a, b)

    def lname(self, a: int) -> str:
        return self.lat.name(a)

    def initial(self, g: int) -> int:
        return self.lat.bot if g == DYN else g

    def eval(self, store: Mapping[str, FsValue], e: SExpr) -> FsValue:
        match e:
            case SVar(name=x):
                return store[x]
            case SConst(raw=r, g=g):
                return FsValue(r, self.initial(g))
            case SBop(op=op, left=a, right=b):
                va, vb = self.eval(store, a), self.eval(store, b)
                return FsValue(apply_bop(op, va.raw, vb.raw), self.join(va.label, vb.label))
            case SAscribe(expr=inner):
                return self.eval(store, inner)
        raise TypeError(e)

    def assign(self, out: BaselineOutcome, store: dict, pc: int, c: SAssign, v: FsValue) -> None:
        store[c.name] = FsValue(v.raw, self.join(pc, v.label))

    def branch(self, out: BaselineOutcome, store: dict, pc: int, c, guard: FsValue) -> None:
        pass

    def output(self, pc: int, c: SOutput, v: FsValue) -> None:
        if not self.leq(self.join(pc, v.label), c.channel):
            raise _Stop(c.pos, short_cmd(c, self.lat), f"{self.lname(self.join(pc, v.label))} above channel")

    def run(self, decls, c: SCmd, fuel: int = DEFAULT_FUEL) -> BaselineOutcome:
        out = BaselineOutcome(self.name, "terminated")
        store = {d.name: FsValue(d.value.raw, self.initial(d.type.g)) for d in decls}
        work: list[tuple[SCmd, int]] = [(c, self.lat.bot)]
        steps = 0
        try:
            while work:
                cmd, pc = work.pop()
                match cmd:
                    case SSkip():
                        continue
                    case SSeq(first=a, second=b):
                        work.append((b, pc))
                        work.append((a, pc))
                        continue
                if steps >= fuel:
                    out.status = "fuel"
                    break
                steps += 1
                match cmd:
                    case SAssign(expr=e):
                        self.assign(out, store, pc, cmd, self.eval(store, e))
                    case SOutput(expr=e):
                        v = self.eval(store, e)
                        self.output(pc, cmd, v)
                        out.outputs.append((self.lat.name(cmd.channel), raw_text(v.raw)))
                    case SIf(cond=e, then=a, els=b):
                        g = self.eval(store, e)
                        self.branch(out, store, pc, cmd, g)
                        work.append((a if g.raw else b, self.join(pc, g.label)))
                    case SWhile(cond=e, body=b):
                        g = self.eval(store, e)
                        self.branch(out, store, pc, cmd, g)
                        if g.raw:
                            work.append((cmd, pc))
                            work.append((b, self.join(pc, g.label)))
        except _Stop as s:
            out.status = "aborted"
            out.site, out.construct, out.detail = s.site, s.construct, s.detail
        out.steps = steps
        out.store = store
        return out


class NSU(_Baseline):
    """No-sensitive-upgrade: writes to variables below the pc abort."""

    name = "nsu"

    def assign(self, out, store, pc, c, v):
        if not self.leq(pc, store[c.name].label):
            raise _Stop(c.pos, short_cmd(c, self.lat), f"pc={self.lname(pc)}")
        super().assign(out, store, pc, c, v)


class PermissiveUpgrade(_Baseline):
    """Permissive upgrade on the two-point lattice: low writes under high pc become partial."""

    name = "pu"

    def __init__(self, lat: Lattice):
        if len(lat.labels) != 2:
            raise UnsupportedLattice("permissive upgrade needs a two-point lattice")
        super().__init__(lat)
        self.high = lat.top

    def join(self, a, b):
        if PARTIAL in (a, b):
            return PARTIAL
        return self.lat.join(a, b)

    def leq(self, a, b):
        if a == PARTIAL:
            return b in (PARTIAL, self.high)
        if b == PARTIAL:
            return True
        return self.lat.leq(a, b)

    def lname(self, a):
        return "P" if a == PARTIAL else self.lat.name(a)

    def assign(self, out, store, pc, c, v):
        if pc != self.lat.bot and store[c.name].label == self.lat.bot:
            store[c.name] = FsValue(v.raw, PARTIAL)
            out.upgrades.append(Upgrade(c.name, "P", c.pos))
            return
        super().assign(out, store, pc, c, v)

    def branch(self, out, store, pc, c, guard):
        if guard.label == PARTIAL:
            raise _Stop(c.pos, short_cmd(c, self.lat), "branch on partial value")


class Hybrid(_Baseline):
    """Hybrid monitor: raises the labels of both branches' write sets before branching."""

    name = "hybrid"

    def branch(self, out, store, pc, c, guard):
        up = self.join(pc, guard.label)
        writes = wt_set(c.body) if isinstance(c, SWhile) else wt_set(c.then) | wt_set(c.els)
        for x in store:
            if x in writes:
                old = store[x]
                new = self.join(old.label, up)
                if new != old.label:
                    store[x] = FsValue(old.raw, new)
                    out.upgrades.append(Upgrade(x, self.lname(new), c.pos))


def run_nsu(p: Program, store: Optional[Mapping] = None, fuel: int = DEFAULT_FUEL) -> BaselineOutcome:
    return NSU(p.lattice).run(_decls(p, store), p.cmd, fuel)


def run_pu(p: Program, store: Optional[Mapping] = None, fuel: int = DEFAULT_FUEL) -> BaselineOutcome:
    return PermissiveUpgrade(p.lattice).run(_decls(p, store), p.cmd, fuel)


def run_hybrid(p: Program, store: Optional[Mapping] = None, fuel: int = DEFAULT_FUEL) -> BaselineOutcome:
    return Hybrid(p.lattice).run(_decls(p, store), p.cmd, fuel)


def _decls(p: Program, store: Optional[Mapping]):
    if store is None:
        return p.decls
    from dataclasses import replace

    return tuple(replace(d, value=store[d.name]) for d in p.decls)


def _find_cmd(c: SCmd, site: Pos) -> Optional[SCmd]:
    match c:
        case SSeq(first=a, second=b):
            return _find_cmd(a, site) or _find_cmd(b, site)
        case SIf(then=a, els=b):
            if c.pos == site:
                return c
            return _find_cmd(a, site) or _find_cmd(b, site)
        case SWhile(body=b):
            if c.pos == site:
                return c
            return _find_cmd(b, site)
        case SAssign() | SOutput():
            return c if c.pos == site else None
    return None


def run_interval(p: Program, store: Optional[Mapping] = None, fuel: int = DEFAULT_FUEL) -> BaselineOutcome:
    """The interval monitor, reported in the same shape as the baselines.

    Ill-typed programs are elaborated without the flow checks so they can
    still be compared; the record's ``note`` says so.
    """
    lat = p.lattice
    env = p.env()
    note = ""
    try:
        c = elaborate_cmd(lat, env, lat.bot, p.cmd)
    except IfcTypeError as e:
        c = elaborate_cmd(lat, env, lat.bot, p.cmd, check=False)
        note = f"ill typed ({e.reason}); run unchecked"
    d = dict(store if store is not None else p.store())
    out = BaselineOutcome("interval", "terminated", note=note)
    mon = Monitor(lat)
    k = initial_stack(lat)
    steps = 0
    while not (isinstance(c, Skip) and len(k) == 1):
        if steps >= fuel:
            out.status = "fuel"
            break
        _, redex = descend([], k, c)
        s = mon.step(k, d, c)
        steps += 1
        if isinstance(s, Abort):
            out.status = "aborted"
            out.site = s.site
            src = _find_cmd(p.cmd, s.site)
            out.construct = short_cmd(src, lat) if src is not None else ""
            if s.var is not None and s.target is not None:
                out.detail = f"try {s.var}↑{lat.iname(s.target)}"
            else:
                out.detail = s.reason.value
            break
        if isinstance(redex, If):
            for x in d:
                if s.store[x].iv != d[x].iv:
                    out.upgrades.append(Upgrade(x, lat.iname(s.store[x].iv), redex.pos))
        if s.action is not None:
            out.outputs.append((lat.name(s.action.channel), raw_text(s.action.value.raw)))
        k, d, c = s.stack, s.store, s.cmd
    out.steps = steps
    out.store = d
    return out


MONITORS: dict[str, Callable[..., BaselineOutcome]] = {
    "nsu": run_nsu,
    "pu": run_pu,
    "hybrid": run_hybrid,
    "interval": run_interval,
}


@dataclass
class Row:
    store: str
    outcome: BaselineOutcome

    def cells(self) -> dict[str, str]:
        o = self.outcome
        if o.status == "aborted":
            where = f"{o.site[0]}:{o.site[1]}" if o.site else "?"
            result = f"abort @ {where} {o.construct}".rstrip()
        else:
            result = o.status
        return {
            "monitor": o.monitor,
            "store": self.store,
            "upgrades": ", ".join(f"{u.var}↑{u.label}" for u in o.upgrades) or "-",
            "outputs": ", ".join(f"({ch},{v})" for ch, v in o.outputs) or "-",
            "result": result,
            "detail": o.detail or "-",
        }


def compare(
    p: Program,
    stores: Sequence[tuple[str, Mapping]] = (),
    fuel: int = DEFAULT_FUEL,
    monitors: Sequence[str] = ("nsu", "pu", "hybrid", "interval"),
) -> list[Row]:
    """Run every monitor on every store; one row per (monitor, store)."""
    stores = list(stores) or [("store", p.store())]
    rows = []
    for m in monitors:
        if m not in MONITORS:
            raise ValueError(f"unknown monitor {m!r}")
        for name, d in stores:
            try:
                o = MONITORS[m](p, d, fuel)
            except UnsupportedLattice as e:
                o = BaselineOutcome(m, "unsupported", detail=str(e))
            rows.append(Row(name, o))
    return rows


_COLUMNS = ("monitor", "store", "upgrades", "outputs", "result", "detail")

TABLE_HEADER = "# baselines treat ? as the bottom label; hybrid upgrades happen at branch entry, not at joins"


def render_table(rows: Sequence[Row]) -> list[str]:
    cells = [r.cells() for r in rows]
    widths = {c: max([len(c)] + [len(x[c]) for x in cells]) for c in _COLUMNS}
    line = lambda d: "  ".join(d[c].ljust(widths[c]) for c in _COLUMNS).rstrip()  # noqa: E731
    out = [TABLE_HEADER, line({c: c for c in _COLUMNS})]
    out += [line(x) for x in cells]
    return out


def render_records(rows: Sequence[Row]) -> list[str]:
    out = []
    for r in rows:
        o = r.outcome
        out.append(
            json.dumps(
                {
                    "monitor": o.monitor,
                    "store": r.store,
                    "status": o.status,
                    "site": list(o.site) if o.site else None,
                    "construct": o.construct or None,
                    "upgrades": [[u.var, u.label] for u in o.upgrades],
                    "outputs": [list(x) for x in o.outputs],
                    "detail": o.detail or None,
                    "note": o.note or None,
                }
            )
        )
    return out
