"""Job validation, fit execution, exports, and benchmarking."""

from dataclasses import replace

import numpy as np
import pytest

from apfit.dataio import ApdDataset, VoltageDataset
from apfit.fitness import FitnessBreakdown
from apfit.models import ModelId, default_bounds, model_spec, reference_params
from apfit.orchestrator import (ConfigError, FitConfig, FitResult, bench,
                                build_job, config_from_dict, config_to_dict,
                                export_convergence_csv, export_parameters,
                                export_run_details, export_trace_csv,
                                load_run_details, run_fit)
from apfit.pso import PsoHyper
from apfit.simulator import PacingConfig, simulate
from apfit.stimulus import BiphasicStimulus, SquareStimulus


def _ms_datasets(cls=(400.0,), num_stimuli=1, pre_stimuli=1):
    truth = reference_params(ModelId.MS)
    stim = SquareStimulus()
    out = []
    for cl in cls:
        pac = PacingConfig(cl, num_stimuli, pre_stimuli)
        tr = simulate(ModelId.MS, truth, stim, pac)
        out.append(VoltageDataset(tr.samples, cl, source_name=f"cl{cl:g}"))
    return tuple(out)


def _tiny_config(**overrides):
    defaults = dict(
        model=ModelId.MS,
        datasets=_ms_datasets(),
        normalize_to=0.0,
        num_stimuli=1,
        pre_stimuli=1,
        hyper=PsoHyper(particles=48, iterations=4),
        seed=5,
    )
    defaults.update(overrides)
    return FitConfig(**defaults)


class TestBuildJob:
    def test_empty_datasets_rejected(self):
        with pytest.raises(ConfigError) as err:
            build_job(_tiny_config(datasets=()))
        assert any(path == "datasets" for path, _ in err.value.errors)

    def test_apd_count_must_match_num_stimuli(self):
        ds = ApdDataset((200.0, 190.0), 0.8, 500.0)
        with pytest.raises(ConfigError) as err:
            build_job(_tiny_config(datasets=(ds,), num_stimuli=1))
        assert any("targets" in path for path, _ in err.value.errors)

    def test_default_bounds_resolved_from_catalog(self):
        job = build_job(_tiny_config())
        b = default_bounds(ModelId.MS)
        np.testing.assert_array_equal(job.bounds.lower, b.lower)
        np.testing.assert_array_equal(job.bounds.upper, b.upper)

    def test_default_normalize_resolved_from_catalog(self):
        cfg = _tiny_config(normalize_to=None)
        job = build_job(cfg)
        assert job.normalize_to == 1.0

    def test_non_fitted_parameter_needs_value(self):
        cfg = _tiny_config(fit_mask={"tau_close": False})
        with pytest.raises(ConfigError) as err:
            build_job(cfg)
        assert any(path == "fixed_values.tau_close"
                   for path, _ in err.value.errors)

    def test_fixed_value_pins_bounds(self):
        cfg = _tiny_config(fit_mask={"tau_close": False},
                           fixed_values={"tau_close": 151.0})
        job = build_job(cfg)
        idx = model_spec(ModelId.MS).index_of("tau_close")
        assert job.bounds.lower[idx] == job.bounds.upper[idx] == 151.0

    def test_bounds_override(self):
        cfg = _tiny_config(bounds={"v_gate": (0.1, 0.2)})
        job = build_job(cfg)
        idx = model_spec(ModelId.MS).index_of("v_gate")
        assert (job.bounds.lower[idx], job.bounds.upper[idx]) == (0.1, 0.2)

    def test_inverted_bounds_rejected(self):
        with pytest.raises(ConfigError) as err:
            build_job(_tiny_config(bounds={"v_gate": (0.3, 0.1)}))
        assert any(path == "bounds.v_gate" for path, _ in err.value.errors)

    def test_unknown_parameter_names_rejected(self):
        cfg = _tiny_config(fixed_values={"bogus": 1.0},
                           fit_mask={"nope": True})
        with pytest.raises(ConfigError) as err:
            build_job(cfg)
        paths = [path for path, _ in err.value.errors]
        assert "fixed_values.bogus" in paths
        assert "fit_mask.nope" in paths

    def test_length_mismatch_rejected(self):
        ds = VoltageDataset(np.zeros(357) + np.linspace(0, 1, 357), 400.0)
        with pytest.raises(ConfigError) as err:
            build_job(_tiny_config(datasets=(ds,)))
        assert any("samples" in path for path, _ in err.value.errors)

    def test_one_sample_slack_allowed(self):
        base = _ms_datasets()[0]
        ds = VoltageDataset(base.samples[:-1], 400.0)
        build_job(_tiny_config(datasets=(ds,)))  # 399 vs 400 is fine

    def test_apd_threshold_checked_against_normalize_to(self):
        ds = ApdDataset((200.0,), 1.5, 500.0)
        cfg = _tiny_config(datasets=(ds,), normalize_to=1.0)
        with pytest.raises(ConfigError) as err:
            build_job(cfg)
        assert any("threshold" in path for path, _ in err.value.errors)

    def test_all_violations_collected(self):
        cfg = _tiny_config(datasets=(), fixed_values={"bogus": 1.0},
                           bounds={"v_gate": (0.3, 0.1)})
        with pytest.raises(ConfigError) as err:
            build_job(cfg)
        assert len(err.value.errors) >= 3

    def test_voltage_data_normalized_during_build(self):
        raw = _ms_datasets()[0]
        cfg = _tiny_config(datasets=(raw,), normalize_to=1.0)
        job = build_job(cfg)
        assert job.datasets[0].samples.min() == 0.0
        assert job.datasets[0].samples.max() == 1.0

    def test_degenerate_voltage_data_rejected_when_normalizing(self):
        flat = VoltageDataset(np.full(400, 0.5), 400.0)
        cfg = _tiny_config(datasets=(flat,), normalize_to=1.0)
        with pytest.raises(ConfigError):
            build_job(cfg)


class TestRunFit:
    def test_small_selffit_converges_and_reports(self):
        cfg = _tiny_config(hyper=PsoHyper(particles=128, iterations=8))
        result = run_fit(cfg)
        assert result.best_error == result.history[-1]
        assert result.history.size == 9
        assert np.all(np.diff(result.history) <= 0)
        assert default_bounds(ModelId.MS).contains(result.best_params)
        assert result.wall_time_s > 0
        assert set(result.best_traces) == {400.0}
        assert not result.cancelled

    def test_simulation_reuse_across_datasets(self):
        ds = _ms_datasets()
        cfg = _tiny_config(datasets=(ds[0], ds[0]))
        job = build_job(cfg)
        before = job.context.simulations_run
        job.context.evaluate(reference_params(ModelId.MS))
        assert job.context.simulations_run - before == 1

    def test_cancellation_returns_partial_history(self):
        cfg = _tiny_config(hyper=PsoHyper(particles=32, iterations=30))
        result = run_fit(cfg, should_stop=lambda: True)
        assert result.cancelled
        assert result.iterations_completed == 0
        assert result.history.size == 1

    def test_on_iteration_matches_history(self):
        events = []
        cfg = _tiny_config(hyper=PsoHyper(particles=32, iterations=5))
        result = run_fit(cfg, on_iteration=lambda i, e: events.append(e))
        np.testing.assert_array_equal(np.array(events), result.history)


def _fake_result(params, model=ModelId.MS):
    spec = model_spec(model)
    cfg = FitConfig(model=model, datasets=_ms_datasets(),
                    normalize_to=0.0, num_stimuli=1, pre_stimuli=1,
                    hyper=PsoHyper(particles=1, iterations=1))
    return FitResult(
        model=model,
        parameter_names=spec.parameter_names,
        best_params=np.asarray(params, dtype=float),
        best_error=0.5,
        history=np.array([1.0, 0.5]),
        breakdown=FitnessBreakdown((), 0.5),
        best_traces={},
        wall_time_s=0.1,
        config=cfg,
        iterations_completed=1,
        cancelled=False,
        started="2026-01-01T00:00:00+00:00",
        finished="2026-01-01T00:00:01+00:00",
    )


class TestExports:
    def test_parameters_three_decimals(self):
        result = _fake_result([0.30001, 6.0, 150.0, 120.0, 0.13])
        text = export_parameters(result)
        lines = text.splitlines()
        assert lines[0] == "tau_in\t0.300"
        assert lines[1] == "tau_out\t6.000"
        assert len(lines) == 5

    def test_parameters_include_every_bocf_row(self):
        result = _fake_result(reference_params(ModelId.BOCF), ModelId.BOCF)
        lines = export_parameters(result).splitlines()
        assert len(lines) == 27
        names = [line.split("\t")[0] for line in lines]
        assert names == list(model_spec(ModelId.BOCF).parameter_names)

    def test_parameters_byte_stable(self):
        result = _fake_result([0.3, 6.0, 150.0, 120.0, 0.13])
        assert export_parameters(result) == export_parameters(result)

    def test_identical_runs_export_identically(self):
        cfg = _tiny_config(hyper=PsoHyper(particles=32, iterations=3))
        a = export_parameters(run_fit(cfg))
        b = export_parameters(run_fit(cfg))
        assert a == b

    def test_run_details_roundtrip_reproduces_run(self):
        cfg = _tiny_config(hyper=PsoHyper(particles=32, iterations=3))
        result = run_fit(cfg)
        text = export_run_details(result)
        cfg2 = load_run_details(text)
        assert cfg2.seed == cfg.seed
        assert config_to_dict(cfg2) == config_to_dict(cfg)
        result2 = run_fit(cfg2)
        assert result2.best_error == result.best_error
        np.testing.assert_array_equal(result2.history, result.history)

    def test_run_details_contents(self):
        import json

        cfg = _tiny_config(hyper=PsoHyper(particles=32, iterations=3))
        result = run_fit(cfg)
        doc = json.loads(export_run_details(result))
        assert doc["config"]["pso"]["particles"] == 32
        assert doc["config"]["pso"]["phi1"] == 2.05
        assert doc["config"]["seed"] == 5
        assert doc["chi_effective"] == pytest.approx(0.7298437881283576)
        assert doc["final_error"] == result.best_error
        assert len(doc["per_dataset_errors"]) == 1
        assert "weighted_error" in doc["per_dataset_errors"][0]

    def test_trace_csv_shape(self):
        cfg = _tiny_config(hyper=PsoHyper(particles=32, iterations=2))
        result = run_fit(cfg)
        lines = export_trace_csv(result).splitlines()
        assert lines[0] == "cycle_length_ms,time_ms,model_u,data_u"
        assert len(lines) == 1 + 400  # one row per data sample
        first = lines[1].split(",")
        assert float(first[0]) == 400.0
        float(first[2]), float(first[3])  # parseable numbers

    def test_convergence_csv(self):
        cfg = _tiny_config(hyper=PsoHyper(particles=32, iterations=4))
        result = run_fit(cfg)
        lines = export_convergence_csv(result).splitlines()
        assert lines[0] == "iteration,lowest_error"
        assert len(lines) == 1 + 5
        assert lines[1].startswith("0,")


class TestConfigSerialization:
    def test_dict_roundtrip_voltage_and_apd(self):
        cfg = FitConfig(
            model=ModelId.MMS,
            datasets=(
                VoltageDataset(np.linspace(0, 1, 500), 500.0, 2.0, "v1"),
                ApdDataset((210.0, 195.0), 0.8, 500.0, 1000.0, "a1"),
            ),
            normalize_to=1.0,
            num_stimuli=2,
            pre_stimuli=4,
            stimulus=BiphasicStimulus(),
            fit_mask={"tau_close": False},
            fixed_values={"tau_close": 150.0},
            bounds={"v_gate": (0.1, 0.2)},
            hyper=PsoHyper(particles=256, iterations=16, chi=0.7),
            seed=77,
        )
        doc = config_to_dict(cfg)
        back = config_from_dict(doc)
        assert config_to_dict(back) == doc
        assert back.stimulus == cfg.stimulus
        assert back.fixed_values == cfg.fixed_values
        assert back.bounds == cfg.bounds
        assert back.hyper == cfg.hyper
        np.testing.assert_array_equal(back.datasets[0].samples,
                                      cfg.datasets[0].samples)
        assert back.datasets[1].targets == cfg.datasets[1].targets

    def test_unknown_model_raises_config_error(self):
        with pytest.raises(ConfigError):
            config_from_dict({"model": "hodgkin"})


class TestBench:
    def test_bench_reports_statistics(self):
        cfg = _tiny_config(hyper=PsoHyper(particles=24, iterations=2))
        report = bench(cfg, repeats=3)
        assert len(report.times_s) == 3
        assert report.mean_s > 0
        assert report.std_s >= 0
        assert report.particles == 24
        assert report.model is ModelId.MS
        assert "particles=24" in report.format()

    def test_bench_rejects_zero_repeats(self):
        with pytest.raises(ValueError):
            bench(_tiny_config(), repeats=0)
