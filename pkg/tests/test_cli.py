"""Command line interface behavior."""

import json
from pathlib import Path

import numpy as np
import pytest

from apfit.cli import EXIT_CONFIG, EXIT_OK, build_parser, main
from apfit.dataio import load_voltage_file
from apfit.models import ModelId, model_spec, reference_params
from apfit.simulator import PacingConfig, simulate
from apfit.stimulus import SquareStimulus

SPEC_FLAGS = [
    "--model", "--data", "--apd", "--num-stimuli", "--pre-stimuli",
    "--sample-interval", "--normalize-to", "--stim", "--stim-magnitude",
    "--stim-duration", "--stim-imag", "--stim-a", "--stim-b", "--stim-c",
    "--particles", "--iterations", "--phi1", "--phi2", "--chi", "--gamma",
    "--seed", "--threads", "--fix", "--bounds", "--out-params",
    "--out-details", "--out-trace", "--out-convergence", "--config",
]


def _generate(tmp_path, cls=("400",), num_stimuli="1", pre_stimuli="1"):
    args = ["generate", "--model", "ms", "--out-dir", str(tmp_path),
            "--num-stimuli", num_stimuli, "--pre-stimuli", pre_stimuli]
    for cl in cls:
        args += ["--cl", cl]
    assert main(args) == EXIT_OK
    return [tmp_path / f"ms_cl{cl}.txt" for cl in cls]


def test_help_lists_every_flag():
    parser = build_parser()
    fit_parser = None
    for action in parser._subparsers._group_actions:
        fit_parser = action.choices["fit"]
    text = fit_parser.format_help()
    for flag in SPEC_FLAGS:
        assert flag in text, flag


def test_models_listing(capsys):
    assert main(["models"]) == EXIT_OK
    out = capsys.readouterr().out
    for mid in ModelId:
        assert mid.value in out


def test_models_detail(capsys):
    assert main(["models", "--model", "fk"]) == EXIT_OK
    out = capsys.readouterr().out
    assert "13 parameters" in out
    assert "tau_v2_minus" in out
    assert "[500, 1500]" in out


def test_generate_writes_expected_files(tmp_path, capsys):
    args = ["generate", "--model", "ms", "--out-dir", str(tmp_path),
            "--cl", "500", "--cl", "400", "--cl", "300"]
    assert main(args) == EXIT_OK
    for cl, n in ((500, 1000), (400, 800), (300, 600)):
        path = tmp_path / f"ms_cl{cl}.txt"
        assert path.exists()
        samples = load_voltage_file(path.read_bytes())
        assert samples.size == n  # default num_stimuli=2
    params = (tmp_path / "ms_params.tsv").read_text().splitlines()
    assert len(params) == 5
    name, value = params[0].split("\t")
    assert name == "tau_in"
    assert float(value) == reference_params(ModelId.MS)[0]


def test_generated_data_matches_simulation(tmp_path):
    files = _generate(tmp_path)
    samples = load_voltage_file(files[0].read_bytes())
    pac = PacingConfig(400.0, 1, 1)
    tr = simulate(ModelId.MS, reference_params(ModelId.MS), SquareStimulus(),
                  pac)
    np.testing.assert_array_equal(samples, tr.samples)


def test_fit_runs_and_exports(tmp_path, capsys):
    data = _generate(tmp_path)[0]
    out_params = tmp_path / "fit.tsv"
    out_details = tmp_path / "details.json"
    out_trace = tmp_path / "trace.csv"
    out_conv = tmp_path / "conv.csv"
    args = ["fit", "--model", "ms", "--data", f"{data}:400",
            "--num-stimuli", "1", "--pre-stimuli", "1",
            "--normalize-to", "0",
            "--particles", "48", "--iterations", "3", "--seed", "7",
            "--out-params", str(out_params),
            "--out-details", str(out_details),
            "--out-trace", str(out_trace),
            "--out-convergence", str(out_conv)]
    assert main(args) == EXIT_OK
    out = capsys.readouterr().out
    assert "final error" in out
    assert "wall time" in out
    for path in (out_params, out_details, out_trace, out_conv):
        assert path.exists()
    assert len(out_params.read_text().splitlines()) == 5
    doc = json.loads(out_details.read_text())
    assert doc["config"]["seed"] == 7


def test_fit_seed_determinism(tmp_path, capsys):
    data = _generate(tmp_path)[0]
    outputs = []
    for run in range(2):
        out_params = tmp_path / f"fit{run}.tsv"
        args = ["fit", "--model", "ms", "--data", f"{data}:400",
                "--num-stimuli", "1", "--pre-stimuli", "1",
                "--normalize-to", "0",
                "--particles", "48", "--iterations", "3", "--seed", "11",
                "--out-params", str(out_params)]
        assert main(args) == EXIT_OK
        outputs.append(out_params.read_bytes())
    assert outputs[0] == outputs[1]


def test_fit_missing_data_file_is_config_error(tmp_path, capsys):
    args = ["fit", "--model", "ms", "--data",
            f"{tmp_path}/missing.txt:400", "--particles", "8",
            "--iterations", "1"]
    assert main(args) == EXIT_CONFIG
    assert "error" in capsys.readouterr().err


def test_fit_invalid_config_reports_field(tmp_path, capsys):
    data = _generate(tmp_path)[0]
    args = ["fit", "--model", "ms", "--data", f"{data}:400",
            "--num-stimuli", "1", "--pre-stimuli", "1",
            "--normalize-to", "0", "--particles", "8", "--iterations", "1",
            "--bounds", "v_gate=0.3:0.1"]
    assert main(args) == EXIT_CONFIG
    assert "bounds.v_gate" in capsys.readouterr().err


def test_fix_flag_pins_parameter(tmp_path, capsys):
    data = _generate(tmp_path)[0]
    out_params = tmp_path / "fit.tsv"
    args = ["fit", "--model", "ms", "--data", f"{data}:400",
            "--num-stimuli", "1", "--pre-stimuli", "1",
            "--normalize-to", "0",
            "--particles", "16", "--iterations", "2", "--seed", "3",
            "--fix", "tau_close=150", "--out-params", str(out_params)]
    assert main(args) == EXIT_OK
    lines = dict(line.split("\t")
                 for line in out_params.read_text().splitlines())
    assert lines["tau_close"] == "150.000"


def test_config_file_with_flag_override(tmp_path, capsys):
    data = _generate(tmp_path)[0]
    out1 = tmp_path / "a.json"
    args = ["fit", "--model", "ms", "--data", f"{data}:400",
            "--num-stimuli", "1", "--pre-stimuli", "1",
            "--normalize-to", "0", "--particles", "16", "--iterations", "2",
            "--seed", "9", "--out-details", str(out1)]
    assert main(args) == EXIT_OK
    capsys.readouterr()

    # rerun purely from the details document
    out_params_a = tmp_path / "replay.tsv"
    assert main(["fit", "--config", str(out1),
                 "--out-params", str(out_params_a)]) == EXIT_OK
    capsys.readouterr()

    # flags win over the config file
    out2 = tmp_path / "b.json"
    assert main(["fit", "--config", str(out1), "--iterations", "4",
                 "--out-details", str(out2)]) == EXIT_OK
    doc = json.loads(out2.read_text())
    assert doc["config"]["pso"]["iterations"] == 4
    assert doc["config"]["seed"] == 9


def test_apd_flag(tmp_path, capsys):
    args = ["fit", "--model", "mms", "--apd", "210,195:500:0.8:1000",
            "--num-stimuli", "2", "--pre-stimuli", "1",
            "--normalize-to", "0",
            "--particles", "16", "--iterations", "2", "--seed", "1"]
    assert main(args) == EXIT_OK
    assert "final error" in capsys.readouterr().out


def test_unknown_fix_parameter_rejected(tmp_path, capsys):
    data = _generate(tmp_path)[0]
    args = ["fit", "--model", "ms", "--data", f"{data}:400",
            "--fix", "zeta=1.0", "--particles", "8", "--iterations", "1"]
    assert main(args) == EXIT_CONFIG


def test_bench_command(tmp_path, capsys):
    data = _generate(tmp_path)[0]
    args = ["bench", "--model", "ms", "--data", f"{data}:400",
            "--num-stimuli", "1", "--pre-stimuli", "1",
            "--normalize-to", "0", "--particles", "16", "--iterations", "2",
            "--repeats", "2"]
    assert main(args) == EXIT_OK
    out = capsys.readouterr().out
    assert "mean" in out
    assert "particles=16" in out


def test_generate_rejects_bad_model(capsys):
    with pytest.raises(SystemExit):
        main(["generate", "--model", "nope", "--cl", "500"])
