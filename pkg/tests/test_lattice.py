from itertools import product

import pytest
from hypothesis import given, strategies as st

from ifcg.lattice import (
    DYN,
    Evidence,
    Interval,
    InvalidInterval,
    NoBoundedEnds,
    NotALattice,
    build_lattice,
    chain,
    diamond,
    four_point,
    two_point,
)
from oracles import DIAMOND, FOUR

LATTICES = [(four_point(), FOUR), (diamond(), DIAMOND)]


def _iv(lat, pair):
    return Interval(lat.label(pair[0]), lat.label(pair[1]))


def _names(lat, iv):
    return None if iv is None else (lat.name(iv.lo), lat.name(iv.hi))


@pytest.mark.parametrize("lat,oracle", LATTICES, ids=["four", "diamond"])
@pytest.mark.parametrize("op", ["refine", "ijoin", "intersect", "restrict_lb"])
def test_binary_ops_match_set_oracle(lat, oracle, op):
    ivs = oracle.intervals()
    assert len(ivs) <= 10
    for a, b in product(ivs, repeat=2):
        got = getattr(lat, op)(_iv(lat, a), _iv(lat, b))
        want = getattr(oracle, op)(a, b)
        if op == "refine":
            got = None if got is None else (_names(lat, got[0]), _names(lat, got[1]))
        else:
            got = _names(lat, got)
        assert got == want, (op, a, b)


@pytest.mark.parametrize("lat,oracle", LATTICES, ids=["four", "diamond"])
def test_apply_evidence_matches_set_oracle(lat, oracle):
    ivs = oracle.intervals()
    for iv, left, right in product(ivs, repeat=3):
        got = lat.apply_evidence(_iv(lat, iv), Evidence(_iv(lat, left), _iv(lat, right)))
        assert _names(lat, got) == oracle.apply_evidence(iv, (left, right))


@pytest.mark.parametrize("lat,oracle", LATTICES, ids=["four", "diamond"])
def test_order_join_meet_match_closure(lat, oracle):
    for a, b in product(oracle.names, repeat=2):
        assert lat.leq(lat.label(a), lat.label(b)) == oracle.leq(a, b)
        assert lat.name(lat.join(lat.label(a), lat.label(b))) == oracle.join(a, b)


def test_construction():
    two = two_point()
    assert lat_names(two) == ("L", "H") and two.name(two.bot) == "L" and two.name(two.top) == "H"
    d = diamond()
    a, b = d.label("A"), d.label("B")
    assert d.join(a, b) == d.top and d.meet(a, b) == d.bot
    assert not d.leq(a, b) and not d.leq(b, a)


def lat_names(lat):
    return lat.names


def test_construction_errors():
    with pytest.raises(NotALattice):
        build_lattice(["A", "B"], [])
    with pytest.raises(NoBoundedEnds):
        build_lattice(["L", "H"], [("L", "H")], bot="H")
    with pytest.raises(NoBoundedEnds):
        build_lattice([], [])
    # two incomparable upper bounds of a and b
    with pytest.raises(NotALattice):
        build_lattice(
            ["bot", "a", "b", "c", "d", "top"],
            [("bot", "a"), ("bot", "b"), ("a", "c"), ("b", "c"), ("a", "d"), ("b", "d"), ("c", "top"), ("d", "top")],
        )
    with pytest.raises(NotALattice):
        build_lattice(["A", "B"], [("A", "B"), ("B", "A")])
    with pytest.raises(InvalidInterval):
        two_point().interval(1, 0)


def test_gamma_and_precision_examples():
    lat = four_point()
    L, H, top, bot = (lat.label(n) for n in ("L", "H", "top", "bot"))
    assert lat.gamma(DYN) == Interval(bot, top)
    assert lat.gamma(H) == Interval(H, H)
    assert lat.precision(Interval(H, H), Interval(L, H))
    assert not lat.precision(Interval(L, H), Interval(H, H))
    assert lat.interval_leq(Interval(L, L), Interval(H, H))
    assert not lat.interval_leq(Interval(L, top), Interval(H, H))


def test_refine_and_evidence_examples():
    lat = four_point()
    L, H, top, bot = (lat.label(n) for n in ("L", "H", "top", "bot"))
    assert lat.refine(Interval(L, H), Interval(H, H)) == (Interval(L, H), Interval(H, H))
    assert lat.refine(Interval(H, H), Interval(L, L)) is None
    assert lat.ijoin(Interval(L, H), Interval(H, H)) == Interval(H, H)
    assert lat.intersect(Interval(L, L), Interval(H, H)) is None
    full = Interval(bot, top)
    assert lat.apply_evidence(Interval(H, H), Evidence(full, Interval(L, L))) is None
    assert lat.apply_evidence(Interval(L, L), Evidence(Interval(L, L), Interval(L, L))) == Interval(L, L)
    assert lat.apply_evidence(Interval(L, H), Evidence(full, Interval(H, H))) == Interval(H, H)


def test_restrict_lb_examples():
    three = chain("L", "M", "H")
    L, M, H = (three.label(n) for n in "LMH")
    assert three.restrict_lb(Interval(L, M), Interval(H, H)) is None
    assert three.restrict_lb(Interval(L, L), Interval(H, H)) is None
    for iv in three.all_intervals():
        assert three.restrict_lb(iv, Interval(L, L)) == iv


def test_consistent_label_ops():
    lat = four_point()
    H, top = lat.label("H"), lat.top
    assert lat.cjoin(DYN, top) == top and lat.cjoin(top, DYN) == top
    assert lat.cjoin(H, DYN) == DYN and lat.cjoin(DYN, DYN) == DYN
    for a, b in product(lat.labels, repeat=2):
        assert lat.cleq(a, b) == lat.leq(a, b)
        assert lat.cjoin(a, b) == lat.join(a, b)
    assert all(lat.cleq(DYN, g) and lat.cleq(g, DYN) for g in lat.all_glabels())


# lemmas, checked exhaustively on the four-point chain and the diamond


@pytest.mark.parametrize("lat", [four_point(), diamond()], ids=["four", "diamond"])
def test_refinement_lemmas(lat):
    ivs = lat.all_intervals()
    for a, b in product(ivs, repeat=2):
        r = lat.refine(a, b)
        if r is not None:
            assert lat.precision(r[0], a) and lat.precision(r[1], b)
            assert lat.interval_leq(r[0], r[1]) or not _points(r)
        m = lat.intersect(a, b)
        if m is not None:
            assert lat.precision(m, a) and lat.precision(m, b)
        rl = lat.restrict_lb(a, b)
        if rl is not None:
            assert lat.precision(rl, a)
    for g1, g2 in product(lat.all_glabels(), repeat=2):
        for a, b in product(ivs, repeat=2):
            if lat.precision(a, lat.gamma(g1)) and lat.precision(b, lat.gamma(g2)):
                assert lat.precision(lat.ijoin(a, b), lat.gamma(lat.cjoin(g1, g2)))


def _points(r):
    return r[0].lo == r[0].hi and r[1].lo == r[1].hi


@pytest.mark.parametrize("lat", [four_point(), diamond()], ids=["four", "diamond"])
def test_operations_closed_under_refinement(lat):
    ivs = lat.all_intervals()
    prec = [(a, b) for a, b in product(ivs, repeat=2) if lat.precision(a, b)]
    for (a, a2), (b, b2) in product(prec, repeat=2):
        assert lat.precision(lat.ijoin(a, b), lat.ijoin(a2, b2))
        m, m2 = lat.intersect(a, b), lat.intersect(a2, b2)
        if m is not None:
            assert m2 is not None and lat.precision(m, m2)
        r, r2 = lat.refine(a, b), lat.refine(a2, b2)
        if r is not None:
            assert r2 is not None and lat.precision(r[0], r2[0]) and lat.precision(r[1], r2[1])
    for (a, a2), (l, l2), (r, r2) in product(prec, repeat=3):
        e = lat.apply_evidence(a, Evidence(l, r))
        if e is not None:
            e2 = lat.apply_evidence(a2, Evidence(l2, r2))
            assert e2 is not None and lat.precision(e, e2)


def test_gamma_valid_and_precision_preorder():
    for lat in (two_point(), four_point(), diamond()):
        ivs = lat.all_intervals()
        assert all(lat.valid(lat.gamma(g)) for g in lat.all_glabels())
        for a, b, c in product(ivs, repeat=3):
            assert lat.precision(a, a)
            if lat.precision(a, b) and lat.precision(b, c):
                assert lat.precision(a, c)


def test_refine_interval_leq():
    # the refined pair is ordered whenever the left result is a point below the right low bound
    lat = four_point()
    for a, b in product(lat.all_intervals(), repeat=2):
        r = lat.refine(a, b)
        if r is not None:
            assert lat.leq(r[0].lo, r[1].lo)
            assert lat.leq(r[0].hi, r[1].hi)


_four = four_point()
_ivs = st.sampled_from(_four.all_intervals())
_gl = st.sampled_from(_four.all_glabels())


@given(_ivs, _ivs)
def test_ijoin_commutes(a, b):
    assert _four.ijoin(a, b) == _four.ijoin(b, a)


@given(_ivs, _ivs)
def test_intersect_commutes(a, b):
    assert _four.intersect(a, b) == _four.intersect(b, a)


@given(_gl, _gl, _gl)
def test_cjoin_commutative_associative(a, b, c):
    assert _four.cjoin(a, b) == _four.cjoin(b, a)
    assert _four.cjoin(_four.cjoin(a, b), c) == _four.cjoin(a, _four.cjoin(b, c))


@given(_ivs)
def test_bottom_is_join_identity(a):
    assert _four.ijoin(_four.point(_four.bot), a) == a
