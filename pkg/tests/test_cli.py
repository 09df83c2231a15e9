import json
import subprocess
import sys

import pytest

from carnot_kit.cli import main, parse_polynomial
from carnot_kit.cli import UsageError
from carnot_kit.symbolic import MultiPoly


def run(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def run_json(capsys, *argv):
    code, out, err = run(capsys, *argv)
    return code, (json.loads(out) if out.strip() else json.loads(err))


def test_validate_g8(capsys):
    code, rep = run_json(capsys, "validate", "g8")
    assert code == 0 and rep["valid"] and rep["report"] == {}


def test_validate_broken_algebra_exits_1(capsys, tmp_path):
    spec = {
        "strata": [2, 1],
        "brackets": [{"i": 0, "j": 1, "k": 0, "c": "1"}],
    }
    path = tmp_path / "bad.json"
    path.write_text(json.dumps(spec))
    code, rep = run_json(capsys, "validate", str(path))
    assert code == 1 and not rep["valid"] and "grading" in rep["report"]


def test_classify_with_negative_values(capsys):
    code, rep = run_json(capsys, "classify", "--mu1", "-1", "--mu2", "-4")
    assert code == 0 and rep["result"] == "distinct"
    code, rep = run_json(capsys, "classify", "--mu1", "-4", "--mu2", "-1/4")
    assert rep["result"] == "equal"


def test_invariant(capsys):
    code, rep = run_json(capsys, "invariant", "--mu", "-9")
    assert code == 0 and rep["I"] == "753571/8100"
    code, rep = run_json(capsys, "invariant", "--mu", "0")
    assert code == 0 and rep["I"] is None and not rep["defined"]


def test_bracket_and_product(capsys):
    code, rep = run_json(capsys, "bracket", "--algebra", "g8", "--u", "X1", "--v", "X0")
    assert rep["bracket"] == ["0", "0", "0", "0", "-1", "0", "0", "0"]
    code, rep = run_json(capsys, "product", "--algebra", "heis(1)", "--point", "1,0,0", "--point", "0,1,0")
    assert rep["product"] == ["1", "1", "1/2"]


def test_closure_and_hdim(capsys):
    assert run_json(capsys, "closure", "--lambda", "5")[1]["dimension"] == 7
    assert run_json(capsys, "closure", "--lambda", "1")[1]["dimension"] == 6
    code, rep = run_json(capsys, "closure", "--algebra", "heis(1)", "--gen", "X1", "--gen", "X2")
    assert rep["dimension"] == 3 and rep["homogeneous_dimension"] == 4
    assert run_json(capsys, "hdim", "g8")[1]["homogeneous_dimension"] == 13


def test_fields(capsys):
    code, rep = run_json(capsys, "fields", "heis(1)")
    assert rep["fields"]["X1"] == {"d0": "1", "d2": "-1/2*x1"}


def test_tangent_characteristic_point_exits_1(capsys):
    code, rep = run_json(capsys, "tangent", "--surface", "x2", "--algebra", "heis(1)", "--point", "0,0,0")
    assert code == 1 and "characteristic point" in rep["error"]


def test_tangent_of_S(capsys):
    code, rep = run_json(capsys, "tangent", "--surface", "S", "--point", "-1/3,0,1,0,0,0,0,0")
    assert code == 0 and rep["dimension"] == 7 and rep["homogeneous_dimension"] == 12


def test_tangent_from_surface_file(capsys, tmp_path):
    from carnot_kit.catalog import surface_S

    path = tmp_path / "S.json"
    path.write_text(json.dumps(surface_S().to_json()))
    code, rep = run_json(capsys, "tangent", "--surface", str(path), "--point", "-1/3,0,1,0,0,0,0,0")
    assert code == 0 and rep["characteristic"] is False


def test_scan_char(capsys):
    grid = json.dumps({"axes": [[-1, 1], [-1, 1], 0]})
    code, rep = run_json(capsys, "scan-char", "--surface", "x2", "--algebra", "heis(1)", "--grid", grid, "--grid-step", "1/2")
    assert code == 0 and rep["characteristic_points"] == [["0", "0", "0"]]
    grid = json.dumps({"axes": [0, [-2, 2, 5], [-2, 2, 5], 0, 0, 0, 0, 0], "solve_for": 0})
    assert run_json(capsys, "scan-char", "--surface", "S", "--grid", grid)[1]["count"] == 0


def test_growth(capsys):
    code, rep = run_json(capsys, "growth", "--surface", "S", "--frame", "S", "--point", "-1/24,0,1/2,0,0,0,0,0")
    assert rep["growth_vector"] == [3, 6, 7]
    code, rep = run_json(capsys, "growth", "--surface", "x0", "--algebra", "heis(2)", "--point", "0,1,1,1,1", "--depth", "2")
    assert rep["growth_vector"] == [3, 4]


def test_tangent_class_S(capsys):
    code, rep = run_json(capsys, "tangent-class-S", "--x2", "1")
    assert code == 0 and rep["mu"] == "-1" and rep["I"] == "27/4" and rep["tangent_matches_g_mu"]
    code, rep = run_json(capsys, "tangent-class-S", "--x2", "0")
    assert rep["I"] is None


def test_decompose(capsys):
    code, rep = run_json(capsys, "decompose-hyperplane", "--algebra", "heis(2)", "--covector", "1,1,0,0")
    assert code == 0 and rep["homomorphism"] and rep["embedding"]
    code, rep = run_json(capsys, "decompose-hyperplane", "--algebra", "heis(1)", "--covector", "1,0")
    assert code == 2


def test_distances(capsys):
    code, rep = run_json(capsys, "quasi-dist", "--algebra", "heis(1)", "--point", "0,0,1")
    assert rep["quasi_distance"] == 1.0
    code, rep = run_json(capsys, "cc-upper", "--algebra", "heis(1)", "--point", "1,0,0", "--budget", "1")
    assert code == 0 and rep["cc_upper_bound"] <= 1 + 1e-6


def test_lift_length(capsys):
    code, rep = run_json(
        capsys, "lift-length", "--algebra", "heis(2)", "--phi", "0", "--controls", "[[0.6, 0, 0.8]]", "--grid-step", "0.001"
    )
    assert code == 0 and abs(rep["lift_length"] - 1) < 1e-3 and rep["phi_length"] == pytest.approx(1)


def test_experiments_small(capsys):
    code, rep = run_json(
        capsys, "compare-length", "--phi", "x0/2 + x1/3", "--L", "3", "--ensemble", "5", "--grid-step", "0.01"
    )
    assert code == 0 and rep["pass"]
    code, rep = run_json(
        capsys, "compare-graph-dist", "--phi", "x0/2", "--ensemble", "3", "--grid-step", "0.01", "--budget", "1"
    )
    assert code == 0 and rep["pass"]
    code, rep = run_json(capsys, "compare-graph-dist", "--algebra", "heis(1)", "--ensemble", "3")
    assert code == 2


@pytest.mark.parametrize(
    "argv",
    [
        ["nonsense"],
        ["validate", "no-such-algebra"],
        ["classify", "--mu1", "1/0", "--mu2", "2"],
        ["product", "--algebra", "heis(1)", "--point", "1,0,0"],
        ["product", "--algebra", "heis(1)", "--point", "1,0", "--point", "0,1,0"],
        ["tangent", "--surface", "x9", "--algebra", "heis(1)", "--point", "0,0,0"],
        ["scan-char", "--surface", "S", "--grid", "{\"axes\": [0]}"],
    ],
)
def test_malformed_input_exits_2(capsys, argv):
    code, out, err = run(capsys, *argv)
    assert code == 2 and "error" in json.loads(err)


def test_output_file_and_table(capsys, tmp_path):
    path = tmp_path / "out.json"
    assert main(["hdim", "g8", "--out", str(path)]) == 0
    assert json.loads(path.read_text())["homogeneous_dimension"] == 13
    code, out, _ = run(capsys, "hdim", "g8", "--format", "table")
    assert "homogeneous_dimension" in out and "13" in out


def test_identical_requests_give_identical_bytes(capsys):
    argv = ["cc-upper", "--algebra", "g8", "--point", "1,2,0,1,1/2,0,3,1", "--budget", "1", "--seed", "4"]
    first = run(capsys, *argv)[1]
    second = run(capsys, *argv)[1]
    assert first == second


def test_parse_polynomial():
    x = MultiPoly.variables(3)
    assert parse_polynomial("x2^3/3 + x0", 3) == x[2] ** 3 * MultiPoly.const(3, 1) / 3 + x[0]
    assert parse_polynomial("-(x1 - 2)*x1", 3) == -(x[1] - 2) * x[1]
    for bad in ("x0 / x1", "x0 ** -1", "sin(x0)", "x0 +"):
        with pytest.raises(UsageError):
            parse_polynomial(bad, 3)


def test_module_entry_point():
    proc = subprocess.run(
        [sys.executable, "-m", "carnot_kit", "classify", "--mu1", "-1", "--mu2", "-4"],
        capture_output=True,
        text=True,
        check=False,
    )
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["result"] == "distinct"
