import json
import random
from dataclasses import replace

import pytest
from hypothesis import given, settings, strategies as st

from conftest import FOUR, load, program
from ifcg.altmonitors import (
    PARTIAL,
    TABLE_HEADER,
    Hybrid,
    UnsupportedLattice,
    compare,
    render_records,
    render_table,
    run_hybrid,
    run_interval,
    run_nsu,
    run_pu,
)
from ifcg.lattice import two_point
from ifcg.parser import Program, VarDecl
from ifcg.properties import gen_program
from ifcg.syntax import BaseType, GType, SAssign, SBop, SConst, SIf, SOutput, SSeq, SVar, Value


def cell(o):
    """The comparison-table granularity: abort site, upgrades and outputs."""
    site = o.site if o.aborted else None
    return site, [(u.var, u.label) for u in o.upgrades], o.outputs


def by_monitor(name):
    return {r.outcome.monitor: r.outcome for r in compare(load(name))}


# the comparison program: line 9 is `if (x) { y := false^L }`, line 10 `if (y) ...`, line 11 the output


def test_nsu_cells():
    t = by_monitor("comparison_ydyn_true")["nsu"]
    assert cell(t) == ((9, 12), [], []) and t.construct == "y := false" and t.detail == "pc=H"
    f = by_monitor("comparison_ydyn_false")["nsu"]
    assert cell(f) == (None, [], [("L", "false")]) and f.status == "terminated"


def test_permissive_upgrade_cells():
    t = by_monitor("comparison_ydyn_true")["pu"]
    assert cell(t) == ((10, 3), [("y", "P")], []) and t.construct == "if y"
    assert t.store["y"].label == PARTIAL
    f = by_monitor("comparison_ydyn_false")["pu"]
    assert cell(f) == (None, [], [("L", "false")])


@pytest.mark.parametrize("x", ["true", "false"])
def test_hybrid_cells_ignore_the_secret(x):
    o = by_monitor(f"comparison_ydyn_{x}")["hybrid"]
    assert cell(o) == ((11, 3), [("y", "H"), ("z", "H")], []) and o.construct == "output(L, z)"


@pytest.mark.parametrize("x", ["true", "false"])
def test_interval_cells(x):
    o = by_monitor(f"comparison_ydyn_{x}")["interval"]
    assert cell(o) == ((10, 3), [("y", "[H,H]")], []) and o.detail == "try z↑[H,H]"
    o = by_monitor(f"comparison_ylow_{x}")["interval"]
    assert cell(o) == ((9, 3), [], []) and o.detail == "try y↑[H,H]"
    # the y:L variant is statically rejected, so it runs unchecked
    assert o.note == "ill typed (PcNotBelowTarget); run unchecked"


def test_ill_typed_program_runs_unchecked_with_a_note():
    p = program("x : bool^H = true;\n y : bool^L = true;", "if (x) { y := false^L }")
    o = run_interval(p)
    assert o.note.startswith("ill typed (PcNotBelowTarget)") and o.aborted
    assert run_interval(load("comparison_ydyn_true")).note == ""


def test_permissive_upgrade_needs_two_points():
    p = program("x : int^L = 0;", "skip", lattice=FOUR)
    with pytest.raises(UnsupportedLattice):
        run_pu(p)
    rows = {r.outcome.monitor: r.outcome for r in compare(p)}
    assert rows["pu"].status == "unsupported"


def test_skip_terminates_everywhere():
    p = program("", "skip")
    for r in compare(p):
        assert r.outcome.status == "terminated" and r.outcome.outputs == []


def test_hybrid_high_outputs_never_abort():
    p = program("x : bool^H = true;\n y : bool^L = true;", "if (x) { y := false^L }; output(H, y); output(H, x)")
    o = run_hybrid(p)
    assert o.status == "terminated" and len(o.outputs) == 2


def test_rendering():
    rows = compare(load("comparison_ydyn_true"))
    lines = render_table(rows)
    assert lines[0] == TABLE_HEADER
    assert lines[1].split() == ["monitor", "store", "upgrades", "outputs", "result", "detail"]
    assert len(lines) == 2 + len(rows)
    assert lines[2].startswith("nsu ") and "abort @ 9:12 y := false" in lines[2]
    recs = [json.loads(x) for x in render_records(rows)]
    assert [r["monitor"] for r in recs] == ["nsu", "pu", "hybrid", "interval"]
    assert recs[1]["upgrades"] and recs[3]["status"] == "aborted"


def test_compare_rejects_unknown_monitor():
    with pytest.raises(ValueError):
        compare(program("", "skip"), monitors=("nope",))


def test_explicit_stores_give_one_row_each():
    p = load("comparison_ydyn_true")
    d = p.store()
    other = dict(d, x=Value(False, d["x"].iv, d["x"].g))
    rows = compare(p, [("t", d), ("f", other)], monitors=("nsu",))
    assert [(r.store, r.outcome.status) for r in rows] == [("t", "aborted"), ("f", "terminated")]


# invariants

LOW2 = two_point()
Lo, Hi = LOW2.bot, LOW2.top


@st.composite
def low_straight_line(draw):
    names = ["a", "b", "c"]
    body = []
    for _ in range(draw(st.integers(1, 6))):
        x = draw(st.sampled_from(names))
        if draw(st.booleans()):
            e = SBop("+", SVar(draw(st.sampled_from(names))), SConst(draw(st.integers(0, 9)), Lo))
            body.append(SAssign(x, e))
        else:
            body.append(SOutput(Lo, SVar(x)))
    cmd = body[-1]
    for c in reversed(body[:-1]):
        cmd = SSeq(c, cmd)
    decls = tuple(
        VarDecl(n, GType(BaseType.INT, Lo), Value(i, LOW2.gamma(Lo), Lo)) for i, n in enumerate(names)
    )
    return Program(LOW2, decls, cmd)


@settings(max_examples=150, deadline=None)
@given(low_straight_line())
def test_all_monitors_agree_on_low_straight_line_code(p):
    outs = [r.outcome for r in compare(p)]
    assert all(o.status == "terminated" for o in outs)
    assert len({tuple(o.outputs) for o in outs}) == 1
    assert all(o.upgrades == [] for o in outs)


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 10**6))
def test_nsu_and_pu_agree_without_partial_labels(seed):
    p = gen_program(random.Random(seed), 6, LOW2)
    pu = run_pu(p, fuel=2000)
    if any(u.label == "P" for u in pu.upgrades):
        return
    nsu = run_nsu(p, fuel=2000)
    assert (nsu.status, nsu.site, nsu.outputs) == (pu.status, pu.site, pu.outputs)


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 10**6), st.integers(0, 10**6))
def test_hybrid_branch_upgrade_is_guard_independent(s1, s2):
    p = gen_program(random.Random(s1), 4, LOW2)
    q = gen_program(random.Random(s2), 4, LOW2)
    decls = tuple(d for d in p.decls if d.name != "secret")
    names = {d.name for d in decls}
    decls += tuple(d for d in q.decls if d.name not in names)
    guard = VarDecl("secret", GType(BaseType.BOOL, Hi), Value(True, LOW2.gamma(Hi), Hi))
    prog = Program(LOW2, (guard,) + decls, SIf(SVar("secret"), p.cmd, q.cmd, pos=(1, 1)))
    flipped = replace(prog, decls=(replace(guard, value=Value(False, guard.value.iv, Hi)),) + decls)
    # one unit of fuel runs exactly the outer branch
    a = Hybrid(LOW2).run(prog.decls, prog.cmd, 1)
    b = Hybrid(LOW2).run(flipped.decls, flipped.cmd, 1)
    assert a.upgrades == b.upgrades
    assert {x: v.label for x, v in a.store.items()} == {x: v.label for x, v in b.store.items()}
