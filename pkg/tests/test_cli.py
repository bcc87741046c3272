import json
import subprocess
import sys

import pytest

from brainqml.cli import build_parser, main, resolve_config

pytestmark = pytest.mark.filterwarnings("ignore:kernel not PSD:RuntimeWarning")


def _run(*argv):
    return main([str(a) for a in argv])


def test_every_subcommand_is_registered():
    sub = next(a for a in build_parser()._actions if a.dest == "command")
    assert set(sub.choices) == {"evc", "pca", "split", "train", "kernel", "stats", "synth", "pipeline", "distribution"}


def test_flags_override_config_file(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"classifier": "qsvm", "shots": 50, "seed": 3, "C": 2.0}))
    args = build_parser().parse_args(["pipeline", "--config", str(cfg), "--shots", "80", "--p10", "0.02"])
    config = resolve_config(args)
    assert (config.classifier, config.shots, config.seed, config.C) == ("qsvm", 80, 3, 2.0)
    assert config.noise.readout_p10 == 0.02 and config.synthetic.seed == 3


def test_output_dir_from_environment(tmp_path, monkeypatch):
    monkeypatch.setenv("BRAINQML_OUTPUT_DIR", str(tmp_path / "env-out"))
    config = resolve_config(build_parser().parse_args(["pipeline"]))
    assert config.output_dir == str(tmp_path / "env-out")


def test_stagewise_commands_chain(tmp_path):
    out = tmp_path / "o"
    assert _run("synth", "--output-dir", out, "--n-per-class", 12, "--seed", 1) == 0
    manifest = out / "manifest.csv"
    assert manifest.exists()
    assert _run("evc", "--manifest", manifest, "--output-dir", out) == 0
    evc = out / "evc.csv"
    assert evc.read_text().startswith("subject_id,label,cohort,")
    assert _run("pca", "--input", evc, "-k", 3, "--output-dir", out / "pca") == 0
    assert {"scree.csv", "loadings.csv", "scores.csv", "factorial_plane.csv"} <= {p.name for p in (out / "pca").iterdir()}
    assert _run("split", "--input", evc, "--output-dir", out, "--seed", 2) == 0
    for clf in ("svm", "qsvm", "vqc"):
        rc = _run("train", "--train", out / "train.csv", "--test", out / "test.csv", "--classifier", clf,
                  "--max-evals", 20, "--kernel-shots", 0, "--output-dir", out / clf)
        assert rc == 0
        assert "accuracy" in json.loads((out / clf / "metrics.json").read_text())
    assert _run("kernel", "--input", out / "pca" / "scores.csv", "--output-dir", out / "k") == 0
    assert (out / "k" / "kernel.csv").read_text().startswith("id,")
    assert _run("stats", "--input", evc, "--output-dir", out / "s") == 0
    assert (out / "s" / "mann_whitney.csv").read_text().startswith("roi,U,")


def test_pipeline_and_distribution_commands(tmp_path, capsys):
    assert _run("pipeline", "--classifier", "svm", "--output-dir", tmp_path / "p") == 0
    assert "svm: accuracy" in capsys.readouterr().out
    assert _run("distribution", "--shots", 2000, "--output-dir", tmp_path / "d") == 0
    study = json.loads((tmp_path / "d" / "distribution.json").read_text())
    assert set(study["distributions"]) == {"exact", "ideal", "noisy", "mitigated", "quasi"}


def test_stage_failure_exit_code(tmp_path, capsys):
    rc = _run("pipeline", "--manifest", tmp_path / "missing.csv", "--output-dir", tmp_path / "x")
    assert rc == 2
    assert "stage 'load'" in capsys.readouterr().err
    assert _run("pca", "--input", tmp_path / "missing.csv", "--output-dir", tmp_path / "x") == 1


def test_console_module_entry(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "brainqml.cli", "--help"], capture_output=True, text=True)
    assert proc.returncode == 0 and "distribution" in proc.stdout
