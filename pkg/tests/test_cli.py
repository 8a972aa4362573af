import json

import numpy as np
import pytest

from conftest import FIXTURES
from dagchoice.cli import main
from dagchoice.data import generate_synthetic, load_dataset, SyntheticSpec
from dagchoice.core import Bounds

ITEMS = str(FIXTURES / "toy_items.csv")
OBS = str(FIXTURES / "toy_obs.csv")


def test_estimate_toy_fixture(tmp_path, capsys):
    out = tmp_path / "report.json"
    assert main(["estimate", "--items", ITEMS, "--obs", OBS, "--out", str(out)]) == 0
    report = json.loads(out.read_text())
    assert report["converged"] is True
    assert np.isfinite(report["final_ll"])
    assert report["n_observations"] == 6
    assert "t-test(0)" in capsys.readouterr().out


def test_missing_file_exit_code(capsys):
    assert main(["estimate", "--items", "no/such/items.csv", "--obs", OBS]) == 2
    assert "no/such/items.csv" in capsys.readouterr().err


def test_nested_muc_flags_accepted(tmp_path):
    out = tmp_path / "n.json"
    code = main(["estimate", "--items", ITEMS, "--obs", OBS, "--model", "nested", "--dag", "muc",
                 "--scale-attrs", "const,count", "--out", str(out)])
    assert code in (0, 3)
    assert json.loads(out.read_text())["parameter_names"][-2:] == ["gamma_const", "gamma_count"]


@pytest.mark.parametrize("argv", [
    ["--model", "sc-base", "--dag", "muc"],
    ["--model", "lmdc", "--scale-attrs", "count"],
    ["--model", "nested"],
    ["--model", "nested", "--scale-attrs", "weight"],
])
def test_inconsistent_flags_rejected(argv):
    assert main(["estimate", "--items", ITEMS, "--obs", OBS, *argv]) == 2


def test_non_convergence_exit_code(tmp_path):
    out = tmp_path / "r.json"
    assert main(["estimate", "--items", ITEMS, "--obs", OBS, "--max-iter", "1", "--out", str(out)]) == 3
    assert json.loads(out.read_text())["converged"] is False


def test_predict_from_report(tmp_path, capsys):
    report = tmp_path / "r.json"
    main(["estimate", "--items", ITEMS, "--obs", OBS, "--out", str(report)])
    pred = tmp_path / "p.json"
    assert main(["predict", "--items", ITEMS, "--obs", OBS, "--report", str(report), "--out", str(pred)]) == 0
    payload = json.loads(pred.read_text())
    assert payload["groups"]["[1,2]"]["n"] == 6
    assert payload["average_ll"] == pytest.approx(json.loads(report.read_text())["final_ll"] / 6)
    assert main(["predict", "--items", ITEMS, "--obs", OBS, "--model", "sc-base", "--params=-1,0.5"]) == 0


def test_bounds_rules_flag(tmp_path):
    out = tmp_path / "r.json"
    assert main(["estimate", "--items", ITEMS, "--obs", OBS, "--bounds-rules", "1-1,2-2",
                 "--out", str(out)]) == 0


def test_simulate_round_trip(tmp_path):
    out = tmp_path / "sim.json"
    assert main(["simulate", "--m", "10", "--bounds", "0,5", "--seed", "7", "--out", str(out),
                 "--csv-dir", str(tmp_path / "csv")]) == 0
    ds = load_dataset(out)
    again = generate_synthetic(SyntheticSpec(10, Bounds(0, 5), seed=7))
    assert ds.observations == again.observations
    np.testing.assert_array_equal(ds.universe.x, again.universe.x)
    assert main(["estimate", "--items", str(tmp_path / "csv" / "items.csv"),
                 "--obs", str(tmp_path / "csv" / "obs.csv"), "--holdout-fraction", "0.2",
                 "--out", str(tmp_path / "r.json")]) == 0
    assert json.loads((tmp_path / "r.json").read_text())["holdout"]["n"] == 250


def test_verify_passes(tmp_path):
    out = tmp_path / "v.json"
    assert main(["verify", "--m-range", "3-10", "--draws", "20", "--out", str(out)]) == 0
    assert json.loads(out.read_text())["max_abs_diff"] < 1e-10
    assert main(["verify", "--m-range", "1-4", "--draws", "5", "--count-mode"]) == 0


def test_bench_small(tmp_path):
    out = tmp_path / "b.json"
    assert main(["bench", "--m", "8", "--upper", "3", "--n-obs", "200", "--out", str(out)]) == 0
    rows = json.loads(out.read_text())["rows"]
    assert [r["dag"] for r in rows] == ["bic", "muc"]
    assert rows[0]["final_ll"] == pytest.approx(rows[1]["final_ll"], abs=1e-8)
