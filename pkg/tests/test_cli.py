import csv
import json
import shutil
import subprocess

import pytest

from ppx import cli
from ppx import manifest as mf
from ppx import pointproc as pp

KINDS = list(mf.RECIPES)


def run(tmp_path, command, *extra, manifest=None):
    args = [command, "--out", str(tmp_path)]
    if manifest is not None:
        args += ["--manifest", str(manifest)]
    return cli.main(args + list(extra))


def read(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def write_manifest(path, kind, **recipe):
    m = mf.ExperimentManifest.default(kind)
    data = json.loads(mf.dumps(m))
    data["recipe"].update(recipe)
    path.write_text(json.dumps(data))
    return path


@pytest.mark.parametrize("kind", KINDS)
def test_default_manifest_round_trip(kind, tmp_path):
    m = mf.ExperimentManifest.default(kind)
    mf.save(m, tmp_path / "m.json")
    again = mf.load(tmp_path / "m.json")
    assert again == m
    assert mf.dumps(again) == mf.dumps(m)


def test_ltorder_values(tmp_path):
    assert run(tmp_path, "ltorder") == 0
    rows = {float(r["t"]): r for r in read(tmp_path / "pgf.csv")}
    half = rows[0.5]
    assert float(half["negative_binomial"]) == pytest.approx(0.131687, abs=5e-7)
    assert float(half["poisson"]) == pytest.approx(0.082085, abs=5e-7)
    assert float(half["binomial"]) == pytest.approx(0.076945, abs=5e-7)
    order = read(tmp_path / "order.csv")
    assert {r["overall"] for r in order} == {"ordered"}
    run_info = json.loads((tmp_path / "run.json").read_text())
    assert run_info["outputs"] == ["pgf.csv", "order.csv"]
    assert mf.load(tmp_path / "manifest.json").out == str(tmp_path)


def test_generate_is_reproducible(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert run(a, "generate", "--seed", "7") == 0
    assert run(b, "generate", "--seed", "7") == 0
    assert (a / "pattern.csv").read_bytes() == (b / "pattern.csv").read_bytes()
    rows = read(a / "pattern.csv")
    side = json.loads((a / "pattern.spec.json").read_text())
    assert side["points"] == len(rows)
    assert side["spec_id"] == pp.spec_id(pp.StationaryPoisson(intensity=1.0))
    assert run(tmp_path / "c", "generate", "--seed", "8") == 0
    assert (a / "pattern.csv").read_bytes() != (tmp_path / "c" / "pattern.csv").read_bytes()


def test_generate_lifted_spec(tmp_path):
    spec = {"kind": "thinned", "base": {"kind": "stationary_poisson", "intensity": 2.0}, "rule": {"kind": "p_const", "p": 0.5}}
    path = write_manifest(tmp_path / "m.json", "generate", spec=spec)
    assert run(tmp_path / "out", "generate", manifest=path) == 0
    assert len(read(tmp_path / "out" / "pattern.csv")) > 0


@pytest.mark.parametrize("kind,reps", [("lf", 40), ("coverage", 20), ("spatial", 40), ("cognitive", 60)])
def test_thread_count_does_not_change_outputs(kind, reps, tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert run(a, kind, "--reps", str(reps), "--threads", "1") == 0
    assert run(b, kind, "--reps", str(reps), "--threads", "4") == 0
    produced = sorted(p.name for p in a.glob("*.csv"))
    assert produced
    for name in produced:
        assert (a / name).read_bytes() == (b / name).read_bytes(), name


def test_exit_code_bad_json(tmp_path, capsys):
    path = tmp_path / "bad.json"
    path.write_text("{not json")
    assert run(tmp_path / "o", "lf", manifest=path) == 1
    assert "bad.json" in capsys.readouterr().err


def test_exit_code_validation_error_names_field(tmp_path, capsys):
    path = write_manifest(tmp_path / "m.json", "lf", z=-1.0)
    assert run(tmp_path / "o", "lf", manifest=path) == 1
    assert "recipe.lf.z" in capsys.readouterr().err


def test_exit_code_recipe_mismatch_and_bad_override(tmp_path):
    path = write_manifest(tmp_path / "m.json", "lf")
    assert run(tmp_path / "o", "coverage", manifest=path) == 1
    assert run(tmp_path / "o", "lf", "--reps", "1") == 1
    assert run(tmp_path / "o", "lf", manifest=tmp_path / "missing.json") == 1


def test_exit_code_numerical_guard(tmp_path, capsys):
    path = write_manifest(tmp_path / "m.json", "generate", max_points=5)
    assert run(tmp_path / "o", "generate", manifest=path) == 2
    assert "numerical guard" in capsys.readouterr().err


def test_console_script(tmp_path):
    exe = shutil.which("ppx")
    if exe is None:
        pytest.skip("console script not installed")
    proc = subprocess.run([exe, "ltorder", "--out", str(tmp_path)], capture_output=True, text=True)
    assert proc.returncode == 0
    assert (tmp_path / "pgf.csv").exists()
