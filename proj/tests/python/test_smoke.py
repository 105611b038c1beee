import json
import math
import os
import subprocess
from pathlib import Path

import pytest

import mixlr

SOURCE = Path(os.environ.get("MIXLR_SOURCE_DIR", Path(__file__).resolve().parents[2]))
CASE3 = json.loads((SOURCE / "data/cases/case3.json").read_text())
VM = ["vaginal_mucosa", "menstrual_secretion"]


def test_panel():
    markers = mixlr.panel_markers()
    assert len(markers) == 15
    assert markers[0] == "HBB"
    assert len(mixlr.fluids()) == 9


def test_worked_case_from_fixture():
    model = mixlr.Model.load(str(SOURCE / "data/fixtures/reference_default.json"))
    report = mixlr.evaluate(model, CASE3, VM)
    assert abs(report["log10_lr"] - 1.5) <= 0.05
    total = report["intercept"] + sum(c["contribution"] for c in report["contributions"])
    assert math.isclose(total, report["log10_lr"], abs_tol=1e-9)
    assert report["verbal"]["label"] == "moderate support"

    penile = mixlr.Model.load(str(SOURCE / "data/fixtures/reference_penile.json"))
    assert abs(mixlr.evaluate(penile, CASE3, VM, fixed_present=["skin_penile"])["log10_lr"] - 0.8) <= 0.05


def test_model_round_trip():
    model = mixlr.Model.load(str(SOURCE / "data/fixtures/reference_default.json"))
    again = mixlr.Model.from_json(model.to_json())
    assert again.variant_id == model.variant_id
    assert again.to_json() == model.to_json()


def test_n_over_2():
    assert mixlr.n_over_2(CASE3, VM) == ("no_reliable_statement", 7, 24)


def test_metrics():
    assert mixlr.cllr([1.0, 1.0], [1.0]) == 1.0
    assert math.isclose(mixlr.cllr([10.0], [0.1]), math.log2(1.1))
    auc, fp, fn = mixlr.roc_auc([1, 2, 3, 4], [False, True, False, True])
    assert auc == 0.75
    assert mixlr.cap_lr(5000.0) == 1000.0
    assert mixlr.verbal_scale(1 / 50) == "moderate support for H2"


def test_calibrator_recovers_shift():
    import random

    rng = random.Random(1)
    mu = math.log(10) / 2
    scores, flags = [], []
    for _ in range(3000):
        scores.append(rng.gauss(mu, 1) + 1)
        flags.append(True)
        scores.append(rng.gauss(-mu, 1) + 1)
        flags.append(False)
    a0, a1, prior = mixlr.fit_calibrator(scores, flags, correct_prior=False)
    assert prior == 0.0
    assert abs(a0 + a1 * 0.0 - (-1.0)) < 0.15


def test_errors():
    model = mixlr.Model.load(str(SOURCE / "data/fixtures/reference_default.json"))
    bad = json.loads(json.dumps(CASE3))
    bad["markers"]["HBB2"] = bad["markers"].pop("HBB")
    with pytest.raises(mixlr.DataError, match="HBB2"):
        mixlr.evaluate(model, bad, VM)
    with pytest.raises(mixlr.ConfigError):
        mixlr.run_experiment("runs = 0\n")
    with pytest.raises(ValueError):
        mixlr.evaluate(model, CASE3, ["urine"])


def test_small_experiment_is_deterministic():
    toml = """
seed = 3
runs = 1
interest_sets = ["vaginal_mucosa+menstrual_secretion"]
[data]
n_per_fluid = 10
[augmentation]
train = 2
calibration = 2
test = 1
"""
    a = mixlr.run_experiment(toml, threads=1)
    b = mixlr.run_experiment(toml, threads=2)
    assert a == b
    assert len(a["cells"]) == 1
    assert 0.0 < a["cells"][0]["metrics"]["cllr"] < 1.0


def test_synthesize_matches_cli(tmp_path):
    csv = mixlr.synthesize(n_per_fluid=3, seed=9)
    assert csv.startswith("sample_id,fluid_labels,replicate_id,HBB")
    cli = os.environ.get("MIXLR_CLI")
    if not cli:
        pytest.skip("CLI path not provided")
    out = tmp_path / "singles.csv"
    subprocess.run([cli, "synth", "--seed", "9", "--n-per-fluid", "3", "--out", str(out)], check=True)
    assert out.read_text() == csv
