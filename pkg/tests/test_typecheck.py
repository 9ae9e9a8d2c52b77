import random

import pytest
from hypothesis import given, settings, strategies as st

from conftest import FOUR, load, program
from ifcg.elaborate import elaborate_cmd, elaborate_expr
from ifcg.lattice import DYN, Evidence, Interval, four_point, two_point
from ifcg.parser import parse_core
from ifcg.properties import gen_program
from ifcg.syntax import Assign, BaseType, Cast, Const, GType, If, Output, SAscribe, SConst, SVar, Skip, Value, Var
from ifcg.typecheck import (
    IfcTypeError,
    WriteSetMismatch,
    check_core_cmd,
    check_evidence_subtyping,
    check_source_cmd,
    check_source_expr,
)

LAT = four_point()
bot, L, H, top = (LAT.label(n) for n in ("bot", "L", "H", "top"))
BOOL, INT = BaseType.BOOL, BaseType.INT


def reason(fn, *args) -> str:
    with pytest.raises(IfcTypeError) as e:
        fn(*args)
    return e.value.reason


def test_expression_rules():
    env = {"x": GType(BOOL, H), "y": GType(BOOL, DYN)}
    assert check_source_expr(LAT, env, SConst(True, H)) == GType(BOOL, H)
    assert check_source_expr(LAT, env, SAscribe(SVar("y"), BOOL, H)) == GType(BOOL, H)
    assert reason(check_source_expr, LAT, env, SAscribe(SConst(5, H), BOOL, H)) == "BaseMismatch"
    assert reason(check_source_expr, LAT, env, SAscribe(SVar("x"), BOOL, L)) == "CastNotConsistent"
    assert reason(check_source_expr, LAT, env, SVar("w")) == "UnboundVar"


def test_gradual_target_accepted_and_static_low_rejected():
    body = "y := false^?; if (x) { y := true^? }"
    p2 = program("x : bool^H = true;\n y : bool^? = false;", body)
    check_source_cmd(p2.lattice, p2.env(), p2.lattice.bot, p2.cmd)
    p1 = program("x : bool^H = true;\n y : bool^L = false;", "y := false^L; if (x) { y := true^L }")
    assert reason(check_source_cmd, p1.lattice, p1.env(), p1.lattice.bot, p1.cmd) == "PcNotBelowTarget"


def test_explicit_flow_rejected():
    p = program("x : bool^L = true;\n y : bool^H = false;", "x := y")
    assert reason(check_source_cmd, p.lattice, p.env(), p.lattice.bot, p.cmd) == "ValueNotBelowTarget"


def test_output_premises():
    p = program("x : bool^H = true;", "output(L, x)")
    assert reason(check_source_cmd, p.lattice, p.env(), p.lattice.bot, p.cmd) == "ValueNotBelowChannel"
    q = program("x : bool^H = true;\n z : bool^L = true;", "if (x) { output(L, z) }")
    assert reason(check_source_cmd, q.lattice, q.env(), q.lattice.bot, q.cmd) == "PcNotBelowChannel"
    # ascriptions are ordinary expressions under output
    r = program("y : bool^? = true;", "output(L, (y :: bool^L))")
    check_source_cmd(r.lattice, r.env(), r.lattice.bot, r.cmd)


@pytest.mark.parametrize(
    "name", ["gradual_branches_true", "implicit_flow_true", "nsu_xH_true", "refine_then_output_true", "double_cast", "loop"]
)
def test_corpus_programs_type_check(name):
    p = load(name)
    check_source_cmd(p.lattice, p.env(), p.lattice.bot, p.cmd)


def test_evidence_subtyping_examples():
    ev = Evidence(Interval(bot, L), Interval(L, L))
    assert check_evidence_subtyping(LAT, ev, GType(INT, DYN), GType(INT, L))
    assert not check_evidence_subtyping(LAT, Evidence(Interval(H, H), Interval(L, L)), GType(INT, H), GType(INT, L))
    for g in LAT.all_glabels():
        t = GType(INT, g)
        assert check_evidence_subtyping(LAT, Evidence(LAT.gamma(g), LAT.gamma(g)), t, t)
    # the interval order between the two sides is deliberately not required
    assert check_evidence_subtyping(LAT, Evidence(Interval(H, H), Interval(L, L)), GType(INT, DYN), GType(INT, DYN))


def test_elaborate_constants_and_ascriptions():
    env = {"y": GType(BOOL, DYN)}
    e, t = elaborate_expr(LAT, env, SConst(True, H))
    assert e == Const(Value(True, Interval(H, H), H)) and t == GType(BOOL, H)
    e, _ = elaborate_expr(LAT, env, SConst(5, DYN))
    assert e == Const(Value(5, Interval(bot, top), DYN))
    e, t = elaborate_expr(LAT, env, SAscribe(SVar("y"), BOOL, H))
    assert e == Cast(Evidence(Interval(bot, H), Interval(H, H)), H, Var("y"))
    assert t == GType(BOOL, H)


def test_elaborate_assignment_and_output():
    p = program("x : int^L = 0;\n y : int^? = 0;\n z : int^L = 0;", "x := y; output(L, z)", lattice=FOUR)
    c = elaborate_cmd(p.lattice, p.env(), p.lattice.bot, p.cmd)
    assert c.first == Assign("x", Cast(Evidence(Interval(bot, L), Interval(L, L)), L, Var("y")))
    assert c.second == Output(L, Cast(Evidence(Interval(L, L), Interval(L, L)), L, Var("z")))


def test_elaborate_branch_write_set():
    p = load("gradual_branches_true")
    c = elaborate_cmd(p.lattice, p.env(), p.lattice.bot, p.cmd)
    first_if = c.second.second.first
    assert isinstance(first_if, If) and first_if.ws == {"y"} and first_if.els == Skip()
    assert first_if.cond == Var("x")
    assert isinstance(first_if.then, Assign) and first_if.then.name == "y"


def test_core_checks():
    lat = two_point()
    env = {"x": GType(INT, lat.label("L")), "b": GType(BOOL, lat.label("L"))}
    pc = (Interval(lat.bot, lat.bot), lat.bot)
    check_core_cmd(lat, env, *pc, parse_core("x := <[L,L],[L,L]>^L(1@[L,L]^L)", lat))
    with pytest.raises(IfcTypeError) as e:
        check_core_cmd(lat, env, *pc, parse_core("x := 1@[H,H]^H", lat))
    assert e.value.reason == "AssignTypeMismatch"
    with pytest.raises(WriteSetMismatch):
        check_core_cmd(lat, env, *pc, parse_core("if{} (b) { x := 1@[L,L]^L } else { skip }", lat))
    with pytest.raises(IfcTypeError):
        check_core_cmd(lat, env, *pc, parse_core("{ skip }", lat))


def test_generator_is_sound_on_a_thousand_programs():
    for seed in range(1000):
        lat = LAT if seed % 2 else two_point()
        p = gen_program(random.Random(seed), 1 + seed % 9, lat)
        check_source_cmd(lat, p.env(), lat.bot, p.cmd)


@settings(max_examples=150, deadline=None)
@given(st.integers(0, 10**6), st.sampled_from(["two", "four"]))
def test_elaboration_preserves_typing(seed, lname):
    lat = two_point() if lname == "two" else four_point()
    p = gen_program(random.Random(seed), 6, lat)
    env = p.env()
    for g_pc in (lat.bot, DYN):
        c = elaborate_cmd(lat, env, g_pc, p.cmd)
        for iv in lat.all_intervals():
            if lat.precision(iv, lat.gamma(g_pc)):
                check_core_cmd(lat, env, iv, g_pc, c)


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 10**6))
def test_elaboration_is_deterministic(seed):
    p = gen_program(random.Random(seed), 6, LAT)
    a = elaborate_cmd(LAT, p.env(), LAT.bot, p.cmd)
    b = elaborate_cmd(LAT, p.env(), LAT.bot, p.cmd)
    assert a == b
