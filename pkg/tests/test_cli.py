import csv
import io
import json
import subprocess
import sys

import pytest

from derham_trace.cli import main, run_command
from derham_trace.mesh import gen_structured_cube, parse_mesh


def _run(args, tmp_path, name="r.json"):
    out = tmp_path / name
    code, rep = run_command(args + ["--report", str(out)])
    return code, out


def test_gen_mesh_round_trip(tmp_path):
    path = tmp_path / "m.txt"
    assert main(["gen-mesh", "--n", "2", "--out", str(path)]) == 0
    m = parse_mesh(str(path))
    ref = gen_structured_cube(2)
    assert (m.cells == ref.cells).all() and (m.vertices == ref.vertices).all()


def test_gen_mesh_with_hole(tmp_path):
    path = tmp_path / "h.txt"
    assert main(["gen-mesh", "--n", "3", "--hole", "1,2", "--out", str(path)]) == 0
    assert len(parse_mesh(str(path)).cells) == 6 * 26
    assert main(["gen-mesh", "--n", "3", "--hole", "1", "--out", str(path)]) == 2


def test_check_mesh_passes(tmp_path):
    code, out = _run(["check-mesh", "--n", "2"], tmp_path)
    assert code == 0
    rep = json.loads(out.read_text())
    assert rep["pass"] is True and rep["records"]
    for r in rep["records"]:
        assert list(r) == ["id", "anchor", "value", "tol", "pass", "seconds"]
        assert r["seconds"] is None


def test_reports_are_byte_identical(tmp_path):
    args = ["check-complex", "--n", "1", "--seed", "3"]
    _, a = _run(args, tmp_path, "a.json")
    _, b = _run(args, tmp_path, "b.json")
    assert a.read_bytes() == b.read_bytes()


def test_timings_recorded(tmp_path):
    _, out = _run(["check-mesh", "--n", "1", "--timings"], tmp_path)
    rep = json.loads(out.read_text())
    assert all(isinstance(r["seconds"], float) for r in rep["records"])


def test_csv_and_json_agree(tmp_path):
    _, j = _run(["check-weights", "--n", "1"], tmp_path, "w.json")
    _, c = _run(["check-weights", "--n", "1", "--format", "csv"], tmp_path, "w.csv")
    records = json.loads(j.read_text())["records"]
    rows = list(csv.DictReader(io.StringIO(c.read_text())))
    assert [r["id"] for r in rows] == [r["id"] for r in records]


def test_tolerance_override_fails_run(tmp_path):
    code, out = _run(["check-complex", "--n", "1", "--tol-override", "complex.dd=-1"], tmp_path)
    assert code == 2
    code, out = _run(["check-weights", "--n", "1", "--tol-override", "weights=1e-300"], tmp_path)
    rep = json.loads(out.read_text())
    assert code == 1 and rep["pass"] is False
    assert all(r["tol"] == 1e-300 for r in rep["records"] if r["id"].startswith("weights"))


@pytest.mark.parametrize("argv", [
    ["check-complex", "--n", "1", "--levels", "0,5"],
    ["check-complex", "--n", "1", "--levels", "a"],
    ["check-mesh", "--n", "1", "--mesh", "x.txt"],
    ["check-mesh", "--n", "0"],
    ["no-such-command"],
    [],
])
def test_usage_errors(argv, tmp_path):
    code, _ = run_command(argv + ["--report", str(tmp_path / "x.json")] if argv else argv)
    assert code == 2


def test_bad_mesh_file(tmp_path, capsys):
    path = tmp_path / "bad.txt"
    path.write_text("vertices 2\n0 0 0\n1 1\n")
    code, _ = run_command(["check-mesh", "--mesh", str(path)])
    assert code == 2
    assert "line" in capsys.readouterr().err
    code, _ = run_command(["check-mesh", "--mesh", str(tmp_path / "missing.txt")])
    assert code == 2


def test_mesh_file_input(tmp_path):
    path = tmp_path / "m.txt"
    main(["gen-mesh", "--n", "1", "--out", str(path)])
    code, out = _run(["check-mesh", "--mesh", str(path)], tmp_path)
    assert code == 0
    assert json.loads(out.read_text())["config"]["mesh"] == str(path)


def test_stdout_report(capsys):
    code, _ = run_command(["check-mesh", "--n", "1"])
    assert code == 0
    json.loads(capsys.readouterr().out)


def test_entry_point_exit_code(tmp_path):
    r = subprocess.run([sys.executable, "-m", "derham_trace.cli", "check-mesh", "--n", "1",
                        "--report", str(tmp_path / "e.json")], capture_output=True)
    assert r.returncode == 0
    r = subprocess.run([sys.executable, "-m", "derham_trace.cli", "check-mesh", "--levels", "x"],
                       capture_output=True)
    assert r.returncode == 2
