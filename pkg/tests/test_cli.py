import json

import pytest

from conftest import PROGRAMS
from ifcg import __version__
from ifcg.cli import main


def prog(name: str) -> str:
    return str(PROGRAMS / f"{name}.ifc")


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_check_ok(capsys):
    assert run(capsys, "check", prog("gradual_branches_true"))[:2] == (0, "ok\n")


def test_check_type_error(capsys):
    code, _, err = run(capsys, "check", prog("comparison_ylow_true"))
    assert code == 3 and "PcNotBelowTarget" in err


def test_parse_error(tmp_path, capsys):
    f = tmp_path / "bad.ifc"
    f.write_text("lattice { labels: L, H; order: L < H }\nstore {}\nprogram { x := }\n")
    code, _, err = run(capsys, "check", str(f))
    assert code == 4 and err.startswith("parse error")


def test_run_gradual_branches_aborts(capsys):
    code, out, _ = run(capsys, "run", prog("gradual_branches_true"))
    assert code == 2 and out == "abort M-If-Refine-Err @ 12:3\n"


def test_run_terminates(capsys):
    code, out, _ = run(capsys, "run", prog("nsu_xL_true"))
    assert code == 0 and out == "out L true [L,L] ^L\n"


def test_run_json_trace(capsys):
    code, out, _ = run(capsys, "run", "--trace", "json", prog("double_cast"))
    assert code == 2 and json.loads(out.splitlines()[-1])["reason"] == "CastUndef"


def test_fuel_exhaustion(capsys):
    assert run(capsys, "run", "--fuel", "10", prog("loop"))[0] == 5


def test_elaborate(capsys):
    code, out, _ = run(capsys, "elaborate", prog("double_cast"))
    assert code == 0 and out.strip() == "z := <[L,L],[L,L]>^L(<[bot,L],[L,L]>^L(<[H,H],[H,top]>^?(x)))"


def test_run_paired(tmp_path, capsys):
    store2 = tmp_path / "s2.ifc"
    store2.write_text("store {\n x : bool^H = false;\n y : bool^? = true @ [L,H];\n z : bool^L = true;\n}\n")
    code, out, _ = run(capsys, "run-paired", prog("gradual_branches_true"), "--store2", str(store2), "--adversary", "L")
    assert code == 2 and "P-If-Refine-Err" in out
    bad = tmp_path / "s3.ifc"
    bad.write_text("store {\n x : bool^H = false;\n y : bool^? = true @ [L,H];\n z : bool^L = false;\n}\n")
    code, _, err = run(capsys, "run-paired", prog("gradual_branches_true"), "--store2", str(bad), "--adversary", "L")
    assert code == 64 and "low-equivalent" in err


@pytest.mark.parametrize(
    "argv",
    [
        [],
        ["frobnicate"],
        ["run"],
        ["run", "--fuel", "0", "x.ifc"],
        ["check", "/nonexistent/file.ifc"],
        ["check-ni"],
        ["check-ni", "--random", "--trials", "1", "x.ifc"],
        ["check-ni", "--trials", "1", "PLACEHOLDER"],
        ["compare", "PLACEHOLDER", "--monitors", "nsu,bogus"],
    ],
)
def test_usage_errors(argv, capsys):
    argv = [prog("gradual_branches_true") if a == "PLACEHOLDER" else a for a in argv]
    try:
        code = main(argv)
    except SystemExit as e:
        code = e.code
    assert code == 64


def test_version(capsys):
    with pytest.raises(SystemExit) as e:
        main(["--version"])
    assert e.value.code == 0
    assert capsys.readouterr().out.strip() == f"ifcg {__version__}"


def test_gen_is_deterministic_and_checks(tmp_path, capsys):
    a = run(capsys, "gen", "--seed", "9", "--size", "5")
    b = run(capsys, "gen", "--seed", "9", "--size", "5")
    assert a == b and a[0] == 0
    f = tmp_path / "g.ifc"
    f.write_text(a[1])
    assert run(capsys, "check", str(f))[0] == 0


def test_random_suite_is_byte_identical(capsys):
    a = run(capsys, "check-ni", "--random", "--trials", "15", "--seed", "3")
    b = run(capsys, "check-ni", "--random", "--trials", "15", "--seed", "3", "--jobs", "2")
    assert a == b and a[0] == 0
    lines = a[1].splitlines()
    assert len(lines) == 31 and lines[-1].startswith("summary: ")


def test_other_suites(capsys):
    for kind in ("check-gg", "check-meta"):
        code, out, _ = run(capsys, kind, "--random", "--trials", "5", "--seed", "1", "--lattice", "two")
        assert code == 0 and out.splitlines()[-1].endswith("0 FAIL")


def test_check_ni_file_mode(capsys):
    code, out, _ = run(capsys, "check-ni", prog("gradual_branches_true"), "--adversary", "L", "--trials", "4")
    assert code == 0 and out.count("VACUOUS") >= 1
    code, out, _ = run(
        capsys, "check-ni", prog("implicit_flow_true"), "--adversary", "L",
        "--store2", prog("implicit_flow_false"),
    )
    assert code == 0 and len(out.splitlines()) == 2


def test_check_gg_file_mode(capsys):
    code, out, _ = run(capsys, "check-gg", prog("loop"), "--trials", "5", "--fuel", "200")
    assert code == 0 and "0 FAIL" in out


def test_compare(capsys):
    code, out, _ = run(capsys, "compare", prog("comparison_ydyn_true"))
    assert code == 0
    lines = out.splitlines()
    assert lines[2].split()[:2] == ["nsu", "store"] and len(lines) == 6
    code, out, _ = run(capsys, "compare", prog("comparison_ydyn_true"), "--format", "json", "--monitors", "hybrid")
    recs = [json.loads(x) for x in out.splitlines()]
    assert [r["monitor"] for r in recs] == ["hybrid"]


def test_compare_with_extra_store(capsys):
    code, out, _ = run(
        capsys, "compare", prog("comparison_ydyn_true"), "--store", prog("comparison_ydyn_false"), "--monitors", "nsu"
    )
    assert code == 0
    rows = out.splitlines()[2:]
    assert "abort" in rows[0] and "terminated" in rows[1]
