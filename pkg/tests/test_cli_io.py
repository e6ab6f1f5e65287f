import base64
import json
import subprocess
import sys

import jsonschema
import numpy as np
import pytest

from hsystem import GridSpec, MinimizeConfig, minimize
from hsystem.cli import EXIT_ERROR, EXIT_NOT_CONVERGED, EXIT_OK, EXIT_USAGE, main, report_schema
from hsystem.io import SolutionFileError, load_solution, save_solution, save_solution_of

SMALL = ["--r0", "0.5", "--nr", "12", "--ntheta", "40"]


def _load(path):
    with open(path) as fh:
        return json.load(fh)


def _validate(doc):
    jsonschema.Draft202012Validator(report_schema()).validate(doc)


@pytest.fixture(scope="module")
def solved(tmp_path_factory):
    d = tmp_path_factory.mktemp("solve")
    code = main(["solve", *SMALL, "--m", "5", "--tol", "1e-6", "--out", str(d / "run.json"),
                 "--solution", str(d / "sol.json"), "--mesh", str(d / "s.obj"),
                 "--ply", str(d / "s.ply")])
    return code, d


def test_solve_writes_valid_report_and_artifacts(solved):
    code, d = solved
    assert code == EXIT_OK
    doc = _load(d / "run.json")
    _validate(doc)
    assert doc["trace"]["converged"] and doc["trace"]["monotone"]
    assert doc["energy"]["lambda"] < 0
    assert len(doc["trace"]["history"]) <= 200
    for name in ("sol.json", "s.obj", "s.ply"):
        assert (d / name).stat().st_size > 0


def test_verify_reproduces_the_solve_certificate(solved, tmp_path):
    _, d = solved
    assert main(["verify", str(d / "sol.json"), "--out", str(tmp_path / "ver.json")]) == EXIT_OK
    ver = _load(tmp_path / "ver.json")
    _validate(ver)
    run = _load(d / "run.json")
    a, b = run["certificate"], ver["certificate"]
    assert a["passed"] == b["passed"]
    for k, v in a.items():
        if isinstance(v, float):
            assert abs(v - b[k]) <= 1e-12 * max(1.0, abs(v)), k
    assert abs(a["hopf"]["tau_re"] - b["hopf"]["tau_re"]) <= 1e-12


def test_threshold_command(tmp_path):
    out = tmp_path / "t.json"
    assert main(["threshold", *SMALL, "--m", "7", "--max-iters", "300", "--tol", "1e-5",
                 "--out", str(out)]) == EXIT_OK
    doc = _load(out)
    _validate(doc)
    t = doc["threshold"]
    assert t["G_hat"] <= t["E_xy"]
    assert t["sqrt_m_times_G_hat"] == pytest.approx(np.sqrt(7) * t["G_hat"])


def test_usage_errors(tmp_path, capsys):
    out = str(tmp_path / "x.json")
    assert main(["solve", *SMALL, "--m", "3", "--out", out]) == EXIT_USAGE  # 3 does not divide 40
    assert main(["solve", "--r0", "1.5", "--m", "1", "--out", out]) == EXIT_USAGE
    assert main(["solve", *SMALL, "--m", "0", "--out", out]) == EXIT_USAGE
    assert main(["bogus"]) == EXIT_USAGE
    assert main(["solve", *SMALL, "--m", "5", "--init", "from_file", "--out", out]) == EXIT_USAGE
    assert "error" in capsys.readouterr().err


def test_not_converged_exit_code(tmp_path):
    out = tmp_path / "n.json"
    assert main(["solve", *SMALL, "--m", "5", "--tol", "1e-12", "--max-iters", "2",
                 "--out", str(out)]) == EXIT_NOT_CONVERGED
    doc = _load(out)
    _validate(doc)
    assert doc["trace"]["stop_reason"] == "max_iters"


def test_runtime_errors(tmp_path):
    assert main(["verify", str(tmp_path / "missing.json")]) == EXIT_ERROR
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert main(["verify", str(bad)]) == EXIT_ERROR


def test_bad_thread_setting(tmp_path, monkeypatch):
    monkeypatch.setenv("HSYS_THREADS", "zero")
    assert main(["verify", str(tmp_path / "x.json")]) == EXIT_USAGE


def test_solve_is_deterministic(tmp_path):
    docs = []
    for k in range(2):
        out = tmp_path / f"r{k}.json"
        assert main(["solve", *SMALL, "--m", "5", "--tol", "1e-6", "--seed", "3",
                     "--out", str(out)]) == EXIT_OK
        doc = _load(out)
        doc.pop("timings")
        doc["artifacts"].pop("report")
        docs.append(doc)
    assert docs[0] == docs[1]


def test_console_script_entry_point(tmp_path):
    r = subprocess.run([sys.executable, "-m", "hsystem.cli", "--version"], capture_output=True, text=True)
    assert r.returncode == 0 and r.stdout.strip()


# -- solution files ----------------------------------------------------------------


@pytest.fixture(scope="module")
def small_solution():
    return minimize(MinimizeConfig(GridSpec(0.5, 12, 40), 5, grad_tol=1e-5))


def test_solution_round_trip_is_bit_exact(small_solution, tmp_path):
    p = save_solution_of(tmp_path / "s.json", small_solution)
    spec, m, a, b = load_solution(p)
    assert spec == small_solution.grid.spec and m == 5
    assert np.array_equal(a, small_solution.pair.a.values)
    assert np.array_equal(b, small_solution.pair.b.values)


def test_truncated_file_rejected(small_solution, tmp_path):
    p = save_solution_of(tmp_path / "s.json", small_solution)
    text = p.read_text()
    p.write_text(text[: len(text) // 2])
    with pytest.raises(SolutionFileError):
        load_solution(p)


def test_short_payload_rejected(small_solution, tmp_path):
    p = save_solution_of(tmp_path / "s.json", small_solution)
    doc = _load(p)
    raw = base64.b64decode(doc["arrays"]["a"]["data"])[:-8]
    doc["arrays"]["a"]["data"] = base64.b64encode(raw).decode()
    p.write_text(json.dumps(doc))
    with pytest.raises(SolutionFileError):
        load_solution(p)


@pytest.mark.parametrize("mutate", [
    lambda d: d.update(format="other"),
    lambda d: d.update(version=99),
    lambda d: d.pop("grid"),
    lambda d: d["grid"].update(n_r=13),
    lambda d: d["grid"].update(r0=2.0),
    lambda d: d["arrays"]["b"].update(dtype=">f4"),
    lambda d: d["arrays"]["b"].update(data="***"),
])
def test_malformed_documents_rejected(small_solution, tmp_path, mutate):
    p = save_solution_of(tmp_path / "s.json", small_solution)
    doc = _load(p)
    mutate(doc)
    p.write_text(json.dumps(doc))
    with pytest.raises(SolutionFileError):
        load_solution(p)


def test_non_finite_payload_rejected(tmp_path):
    a = np.zeros((8, 8))
    a[1, 1] = np.nan
    p = save_solution(tmp_path / "n.json", GridSpec(0.5, 8, 8), 1, a, np.zeros((8, 8)))
    with pytest.raises(SolutionFileError):
        load_solution(p)
