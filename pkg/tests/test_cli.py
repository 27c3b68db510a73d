import json

import numpy as np
import pytest

from bilinsphere import documents as docs
from bilinsphere.cli import EXIT_ERROR, EXIT_INCONCLUSIVE, EXIT_OK, main
from bilinsphere.linalg3 import skew
from bilinsphere.system import BilinearSystem, Box
from conftest import fixture_path


def run(tmp_path, *argv):
    out = tmp_path / "out.json"
    code = main(list(argv) + ["-o", str(out)])
    return code, (json.loads(out.read_text()) if out.exists() else None)


@pytest.fixture
def single_sample(tmp_path):
    path = tmp_path / "single.json"
    system = BilinearSystem(np.diag([1.0, 2.0, 3.0]), (skew((0, 0, 1)),), Box((-1.0,), (1.0,)))
    path.write_text(docs.serialize_system(system, [(0.0,)]))
    return str(path)


def test_certify_theorem_c(tmp_path):
    code, rep = run(tmp_path, "certify", "-i", str(fixture_path("theorem_c")))
    assert code == EXIT_OK
    assert rep["verdict"]["label"] == "Controllable{C}"
    assert rep["conditions"]["cc2"]["status"] == "open"


def test_certify_single_sample(tmp_path, single_sample):
    code, rep = run(tmp_path, "certify", "-i", single_sample)
    assert code == EXIT_INCONCLUSIVE
    assert rep["verdict"]["label"] == "Inconclusive"


def test_certify_unreached_cycle(tmp_path):
    code, _ = run(tmp_path, "certify", "-i", str(fixture_path("theorem_b_unreached")), "--grid", "500")
    assert code == EXIT_INCONCLUSIVE


def test_certify_theorem_b_with_replay(tmp_path):
    code, rep = run(tmp_path, "certify", "-i", str(fixture_path("theorem_b")), "--replay", "--grid", "500")
    assert code == EXIT_OK
    assert rep["verdict"]["label"] == "Controllable{B}"
    assert rep["verdict"]["replay"]["failed"] == []


def test_finite_control_set_is_conditional(tmp_path):
    path = tmp_path / "finite.json"
    src = json.loads(fixture_path("theorem_c").read_text())
    src["control_set"] = {"type": "finite", "points": [[0.0], [1.0]]}
    path.write_text(json.dumps(src))
    code, rep = run(tmp_path, "certify", "-i", str(path), "--grid", "500")
    assert code == EXIT_OK
    assert rep["conditions"]["cc2"]["status"] == "unsatisfiable"
    assert rep["verdict"]["conditional"] is True


def test_classify(tmp_path):
    code, rep = run(tmp_path, "classify", "-i", str(fixture_path("theorem_c")), "--grid", "500")
    assert code == EXIT_OK
    assert [s["class"] for s in rep["samples"]] == ["ComplexRepulsiveCycle", "ComplexAttractingCycle"]
    assert rep["conditions"]["cc1"]["evaluations"] == 500


def test_simulate(tmp_path):
    code, rep = run(tmp_path, "simulate", "-i", str(fixture_path("theorem_c")),
                    "--schedule", str(fixture_path("schedule")), "--stride", "100")
    assert code == EXIT_OK
    assert rep["format"] == "bilinsphere.trajectory"
    assert rep["times"][-1] == pytest.approx(1.5)
    assert all(abs(np.linalg.norm(p) - 1) < 1e-10 for p in rep["points"])


def test_simulate_rejects_unknown_sample(tmp_path, single_sample):
    code, _ = run(tmp_path, "simulate", "-i", single_sample, "--schedule", str(fixture_path("schedule")))
    assert code == EXIT_ERROR


def test_oracle_small(tmp_path):
    code, rep = run(tmp_path, "oracle", "-i", str(fixture_path("theorem_c")), "--pairs", "3")
    assert code == EXIT_OK
    assert rep["connected"] == 3
    assert all(p["end_error"] <= 0.05 for p in rep["pairs"])


def test_oracle_single_sample_fails_to_connect(tmp_path, single_sample):
    code, rep = run(tmp_path, "oracle", "-i", single_sample, "--pairs", "2", "--budget", "200")
    assert code == EXIT_INCONCLUSIVE
    assert rep["connected"] < 2


def test_export_counts(tmp_path, single_sample):
    code, geo = run(tmp_path, "export", "-i", single_sample)
    assert code == EXIT_OK
    assert len(geo["circles"]) == 3 and len(geo["triangles"]) == 8
    assert sum(len(s["ends"]) for s in geo["separatrices"]) == 4


def test_bad_input_exit_code(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text("{ not json")
    assert main(["classify", "-i", str(bad)]) == EXIT_ERROR
    assert "line 1" in capsys.readouterr().err
    assert main(["classify", "-i", str(tmp_path / "missing.json")]) == EXIT_ERROR


def test_stdout_when_no_output_file(capsys, single_sample):
    assert main(["classify", "-i", single_sample, "--grid", "100"]) == EXIT_OK
    assert json.loads(capsys.readouterr().out)["command"] == "classify"


def test_repeated_runs_identical(tmp_path):
    outs = []
    for i in range(2):
        out = tmp_path / f"run{i}.json"
        main(["export", "-i", str(fixture_path("theorem_b")), "-o", str(out)])
        outs.append(out.read_bytes())
    assert outs[0] == outs[1]
