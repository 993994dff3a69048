import json

import pytest

from src.errors import NumericalFailureError
from src.experiments.base import BaseExperiment, TrialOutcome
from src.experiments.config import ExperimentKind
from src.experiments.registry import ExperimentRegistry
from src.experiments.runner import derive_seed, run_campaign, run_trial, summarize


class FlakyExperiment(BaseExperiment):
    """Fails on odd seeds"""
    kind = ExperimentKind.SIMPLE_SPECTRUM

    def run_trial(self, seed: int) -> TrialOutcome:
        if seed % 2:
            raise NumericalFailureError("residual too large", worst_residual=1.0)
        return TrialOutcome(measured={"value": 1.0}, passed=True)


@pytest.fixture(scope="function")
def flaky_registry():
    registry = ExperimentRegistry()
    registry.register_experiment(FlakyExperiment)
    return registry


def test_derive_seed_is_deterministic():
    assert derive_seed(7, 3) == derive_seed(7, 3)
    assert derive_seed(7, 3) != derive_seed(7, 4)
    assert derive_seed(7, 3) != derive_seed(8, 3)
    assert 0 <= derive_seed(2 ** 64 - 1, 10 ** 6) < 2 ** 64


def test_serial_campaign(make_experiment_config):
    records, summary = run_campaign(make_experiment_config(), workers=1, write=False)
    assert [r.trial_index for r in records] == [0, 1, 2, 3]
    assert [r.derived_seed for r in records] == [derive_seed(7, i) for i in range(4)]
    assert all("simple" in r.measured and "norm_ratio" in r.measured for r in records)
    assert summary.trial_count == 4
    assert summary.pass_count == sum(r.passed for r in records)
    assert summary.acceptance is None
    assert "norm_ratio" in summary.aggregates


def test_rerun_reproduces_records(make_experiment_config):
    first, _ = run_campaign(make_experiment_config(), workers=1, write=False)
    second, _ = run_campaign(make_experiment_config(), workers=1, write=False)
    assert [r.model_dump() for r in first] == [r.model_dump() for r in second]


def test_parallel_matches_serial(make_experiment_config):
    config = make_experiment_config(trials=6)
    serial, _ = run_campaign(config, workers=1, write=False)
    parallel, _ = run_campaign(config, workers=2, write=False)
    assert [r.model_dump() for r in serial] == [r.model_dump() for r in parallel]


def test_trial_errors_are_recorded(make_experiment_config, flaky_registry):
    records, summary = run_campaign(make_experiment_config(trials=8), workers=1,
                                    registry=flaky_registry, write=False)
    failed = [r for r in records if r.error]
    assert len(failed) == sum(derive_seed(7, i) % 2 for i in range(8))
    assert all(r.error.startswith("numerical_failure: ") for r in failed)
    assert all(not r.passed and r.measured == {} for r in failed)
    if failed:
        assert summary.error_tags == {"numerical_failure": len(failed)}
    assert summary.pass_count == 8 - len(failed)


def test_run_trial_keeps_index(flaky_registry, make_experiment_config):
    experiment = flaky_registry.select(make_experiment_config())
    record = run_trial(experiment, 5)
    assert record.trial_index == 5
    assert record.derived_seed == derive_seed(7, 5)


@pytest.mark.parametrize("min_pass, accepted", [(0, True), (5, False)])
def test_acceptance(make_experiment_config, min_pass, accepted):
    config = make_experiment_config(acceptance=True, thresholds={"min_pass": min_pass})
    _, summary = run_campaign(config, workers=1, write=False)
    assert summary.acceptance is accepted
    assert summary.min_pass == min_pass


def test_summarize_wilson(make_experiment_config, flaky_registry):
    records, _ = run_campaign(make_experiment_config(), workers=1,
                              registry=flaky_registry, write=False)
    summary = summarize(records, make_experiment_config(), wall_time=0.5)
    low, high = summary.wilson_interval_95
    assert low <= summary.pass_fraction <= high
    assert summary.wall_time == 0.5


def test_outputs_are_written(make_experiment_config, tmp_path):
    config = make_experiment_config(output={"format": "both"})
    run_campaign(config, workers=1, out_dir=tmp_path)
    target = tmp_path / "unit"
    assert {p.name for p in target.iterdir()} == {"records.json", "records.csv", "summary.json"}
    summary = json.loads((target / "summary.json").read_text())
    assert summary["config_hash"] == config.config_hash()
    assert summary["trial_count"] == 4


def test_records_are_byte_identical_across_runs(make_experiment_config, tmp_path):
    config = make_experiment_config()
    run_campaign(config, workers=1, out_dir=tmp_path / "a")
    run_campaign(config, workers=2, out_dir=tmp_path / "b")
    assert ((tmp_path / "a" / "unit" / "records.json").read_bytes()
            == (tmp_path / "b" / "unit" / "records.json").read_bytes())


def test_gap_campaign_writes_cdf(make_experiment_config, tmp_path):
    config = make_experiment_config(experiment="gap_distribution")
    run_campaign(config, workers=1, out_dir=tmp_path)
    lines = (tmp_path / "unit" / "gap_cdf.csv").read_text().splitlines()
    assert lines[0] == "s,cdf"
    assert lines[-1].endswith(",1.0")


def test_emit_is_called_with_extra_tables(make_experiment_config, mocker):
    emit = mocker.patch("src.experiments.runner.emit")
    run_campaign(make_experiment_config(experiment="gap_distribution"), workers=1,
                 out_dir="nowhere")
    _, kwargs = emit.call_args
    assert "gap_cdf.csv" in kwargs["extra"]


def test_identity_campaign_never_passes(make_experiment_config):
    identity = {"n": 4, "atom": {"kind": "discrete", "values": [0], "probs": [1]},
                "diagonal": "atom", "diagonal_atom": {"kind": "discrete", "values": [1], "probs": [1]}}
    records, summary = run_campaign(make_experiment_config(trials=1, ensemble=identity),
                                    workers=1, write=False)
    assert records[0].measured["simple"] is False
    assert summary.pass_count == 0
