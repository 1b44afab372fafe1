import csv
import json

import pytest

from satlab import cli, tables
from satlab.hpafem import square_mesh, write_mesh


def _rows(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


def test_constants_preset_and_manifest(tmp_path):
    out = tmp_path / "t2.csv"
    assert cli.main(["constants", "--table", "2", "--max-r", "32", "--out", str(out)]) == 0
    rows = _rows(out)
    assert [(r["p"], r["r"]) for r in rows] == [("4", "16"), ("4", "32"), ("8", "32")]
    for r in rows:
        assert abs(float(r["constant"]) - float(r["reference"])) <= 1e-6
    man = json.loads((tmp_path / "t2.csv.manifest.json").read_text())
    assert man["passed"] and man["parameters"]["table"] == [2]
    assert {"version", "started", "finished", "checks", "tripwires"} <= set(man)


def test_constants_deterministic(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    args = ["constants", "--problem", "2,3", "--p", "2,3", "--q", "p,1", "--r", "8"]
    assert cli.main(args + ["--out", str(a)]) == 0
    assert cli.main(args + ["--out", str(b), "--jobs", "2"]) == 0
    assert a.read_bytes() == b.read_bytes()
    assert len(_rows(a)) == 8


def test_table7_grid_contains_largest_cell():
    args = cli.build_parser().parse_args(["constants", "--table", "7"])
    grid = cli.constant_grid(args)
    assert (3, 32, 32, 128) in grid
    assert len(grid) == len(tables.TABLES[7].cells)
    assert tables.lookup(3, 32, 32, 128) == 1.0062046674


def test_empty_grid_writes_header_only(tmp_path):
    out = tmp_path / "empty.csv"
    assert cli.main(["constants", "--out", str(out)]) == 0
    assert out.read_text() == "problem,p,q,r,constant,converged,reference\n"


def test_memory_guard(capsys):
    assert cli.main(["constants", "--p", "4", "--r", "200"]) == 2
    assert "allow-large" in capsys.readouterr().err


def test_convergence_flag(tmp_path):
    out = tmp_path / "c.csv"
    cli.main(["constants", "--p", "4", "--q", "4", "--r", "16,32,64", "--out", str(out)])
    flags = [r["converged"] for r in _rows(out)]
    # 1.0072781599 -> 1.0072781600 is a relative change of 1e-10
    assert flags == ["false", "false", "true"]


def test_q_expressions():
    assert cli._q_of("p", 8) == 8 and cli._q_of("p/7", 14) == 2 and cli._q_of("4", 9) == 4
    assert cli._q_of("2p", 3) == 6
    with pytest.raises(ValueError):
        cli._q_of("x", 3)
    assert cli._int_list("1-3,7") == [1, 2, 3, 7]


def test_rho1d(tmp_path):
    out = tmp_path / "rho.csv"
    assert cli.main(["rho1d", "--p", "1,10,150", "--dense", "--csv", str(out)]) == 0
    rows = _rows(out)
    for r in rows:
        assert abs(float(r["rho_squared"]) - float(r["dense"])) <= 1e-10
    man = json.loads((tmp_path / "rho.csv.manifest.json").read_text())
    assert set(man["seconds"]) == {"1", "10", "150"}


def test_rho1d_strict_flags_reference_tripwire():
    # the tabulated p = 10 value is a tripwire, only fatal under --strict
    assert cli.main(["rho1d", "--p", "10"]) == 0
    assert cli.main(["rho1d", "--p", "10", "--strict"]) == 1
    assert cli.main(["rho1d", "--p", "10", "--strict", "--recursion", "printed"]) == 0


def test_afem_with_mesh_file(tmp_path):
    mesh = tmp_path / "m.txt"
    write_mesh(square_mesh(2, 1), mesh)
    report = tmp_path / "r.json"
    code = cli.main(["afem", "--mesh", str(mesh), "--f", "poly:1", "--theta", "0.5", "--q", "ceil:0.5",
                     "--lambda-osc", "0.1", "--iters", "3", "--report", str(report)])
    assert code == 0
    data = json.loads(report.read_text())
    for key in ("error", "estimator", "osc", "dofs", "marked", "ratio"):
        assert len(data[key]) == 4
    assert (tmp_path / "r.json.manifest.json").exists()


def test_crosscheck(tmp_path):
    out = tmp_path / "x.csv"
    assert cli.main(["crosscheck", "--problem", "1", "--p", "1-8", "--samples", "2", "--zero",
                     "--csv", str(out)]) == 0
    rows = _rows(out)
    skipped = [r for r in rows if r["status"] == "skipped"]
    assert len(skipped) == 8 and all(r["ratio"] == "" for r in skipped)
    assert all(float(r["ratio"]) >= 1 - 1e-8 for r in rows if r["status"] == "ok")


def test_crosscheck_bound_tripwire():
    assert cli.main(["crosscheck", "--problem", "2", "--p", "2", "--bound", "1.0"]) == 0
    assert cli.main(["crosscheck", "--problem", "2", "--p", "2", "--bound", "1.0", "--strict"]) == 1
