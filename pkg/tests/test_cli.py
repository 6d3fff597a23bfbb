import filecmp
import json

import numpy as np

from treelocal.cli import EXIT_USAGE, main
from treelocal.experiments import RECIPES, ExperimentConfig
from treelocal.serialize import read_header, read_table
from treelocal.stats import tail_slope

EXPECTED = {
    "coupling-identity", "signlaw-enum", "coupled-law", "sampler-equivalence", "leafstart-law", "ballot-sweep",
    "max-tail", "clustering", "decorations", "mass-law", "q-scaling", "maximizer-scale",
}


def test_recipe_registry():
    assert set(RECIPES) == EXPECTED


def test_usage_errors(tmp_path, capsys):
    out = ["--outdir", str(tmp_path)]
    assert main(["coupling-identity", "--replicas", "0", *out]) == EXIT_USAGE
    assert main(["no-such-experiment", *out]) == EXIT_USAGE
    assert main(["coupling-identity", "--bogus", "1", *out]) == EXIT_USAGE
    assert main(["coupling-identity", "--seed", "-1", *out]) == EXIT_USAGE
    assert main(["coupling-identity", "--replicas"]) == EXIT_USAGE
    assert main(["coupling-identity", "--config", str(tmp_path / "missing.json")]) == EXIT_USAGE
    assert main([]) == EXIT_USAGE
    assert "error" in capsys.readouterr().err


def test_config_file_and_overrides(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"experiment": "max-tail", "n": 6, "replicas": 50}))
    assert main(["max-tail", "--config", str(cfg), "--replicas", "70", "--show-config"]) == 0
    shown = json.loads(capsys.readouterr().out)
    assert shown["n"] == 6 and shown["replicas"] == 70


def test_coupling_identity_twice_byte_identical(tmp_path):
    args = ["coupling-identity", "--b", "2", "--n", "8", "--replicas", "100", "--seed", "7", "--quiet"]
    assert main([*args, "--outdir", str(tmp_path / "a")]) == 0
    assert main([*args, "--outdir", str(tmp_path / "b"), "--workers", "2"]) == 0
    for name in ("coupling-identity-7.csv", "coupling-identity-7.reports.csv"):
        assert filecmp.cmp(tmp_path / "a" / name, tmp_path / "b" / name, shallow=False)
    meta = json.loads((tmp_path / "a" / "coupling-identity-7.meta.json").read_text())
    assert meta["config"]["seed"] == 7 and meta["build_id"] and meta["wall_time_s"] >= 0
    header = read_header(tmp_path / "a" / "coupling-identity-7.csv")
    assert header["experiment"] == "coupling-identity" and header["config"]["replicas"] == 100
    _, rows = read_table(tmp_path / "a" / "coupling-identity-7.csv")
    assert len(rows) == 4 * 100 and {r[0] for r in rows} == {"2"}


def test_header_reruns_experiment(tmp_path):
    args = ["maximizer-scale", "--n", "6", "--replicas", "200", "--block", "64", "--quiet"]
    assert main([*args, "--outdir", str(tmp_path / "a")]) == 0
    header = read_header(tmp_path / "a" / "maximizer-scale-0.csv")
    cfg = ExperimentConfig(header["experiment"], {**header["config"], "outdir": str(tmp_path / "b")})
    (tmp_path / "c.json").write_text(json.dumps(dict(cfg)))
    assert main(["maximizer-scale", "--config", str(tmp_path / "c.json"), "--quiet"]) == 0
    assert filecmp.cmp(tmp_path / "a" / "maximizer-scale-0.csv", tmp_path / "b" / "maximizer-scale-0.csv", shallow=False)


def test_max_tail_report_recomputes_from_samples(tmp_path):
    args = ["max-tail", "--n", "10", "--replicas", "4000", "--block", "1000", "--quiet", "--outdir", str(tmp_path)]
    code = main(args)
    _, rows = read_table(tmp_path / "max-tail-0.csv")
    samples = np.array([float(r[1]) for r in rows])
    cols, reps = read_table(tmp_path / "max-tail-0.reports.csv")
    rep = dict(zip(cols, reps[0]))
    fit = tail_slope(samples, (1.0, 2.5))
    target = 2 * np.sqrt(np.log(2))
    recomputed = abs(fit.rate - target) / target
    assert float(rep["statistic"]) == recomputed
    assert (rep["pass"] == "1") == (recomputed <= float(rep["threshold"]))
    assert code == (0 if rep["pass"] == "1" else 1)
