"""
Campaign execution. Every trial is a pure function of (config, trial index),
so serial and parallel runs produce identical records.
"""
import logging
import time
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from functools import partial
from pathlib import Path

import numpy as np

from src.config import CONFIG
from src.errors import LabError
from src.experiments.base import BaseExperiment
from src.experiments.config import ExperimentConfig
from src.experiments.emit import emit
from src.experiments.records import (CampaignSummary, MeasuredValue, QuantityAggregate,
                                     TrialRecord)
from src.experiments.registry import ExperimentRegistry, default_registry
from src.experiments.stats import quantity_aggregate, wilson_interval

logger = logging.getLogger(__name__)

MIN_PASS = "min_pass"


def derive_seed(master_seed: int, trial_index: int) -> int:
    """64-bit seed of one trial, recomputable from (master_seed, trial_index)."""
    sequence = np.random.SeedSequence(master_seed, spawn_key=(trial_index,))
    return int(sequence.generate_state(1, dtype=np.uint64)[0])


def _plain(value) -> MeasuredValue:
    return value.item() if isinstance(value, np.generic) else value


def run_trial(experiment: BaseExperiment, trial_index: int) -> TrialRecord:
    """One trial; any error becomes a failed record carrying its tag."""
    seed = derive_seed(experiment.config.master_seed, trial_index)
    try:
        outcome = experiment.run_trial(seed)
    except LabError as e:
        logger.warning("Trial %d failed: %s: %s", trial_index, e.tag, e)
        return TrialRecord(trial_index=trial_index, derived_seed=seed,
                           passed=False, error=f"{e.tag}: {e}")
    except (ArithmeticError, ValueError, np.linalg.LinAlgError) as e:
        logger.warning("Trial %d failed: %s", trial_index, e, exc_info=True)
        return TrialRecord(trial_index=trial_index, derived_seed=seed,
                           passed=False, error=f"{type(e).__name__}: {e}")
    measured = {key: _plain(value) for key, value in outcome.measured.items()}
    return TrialRecord(trial_index=trial_index, derived_seed=seed,
                       measured=measured, passed=bool(outcome.passed))


def _run_in_worker(config_json: str, trial_index: int) -> TrialRecord:
    config = ExperimentConfig.model_validate_json(config_json)
    return run_trial(default_registry().select(config), trial_index)


def summarize(records: list[TrialRecord], config: ExperimentConfig,
              wall_time: float) -> CampaignSummary:
    pass_count = sum(r.passed for r in records)
    trial_count = len(records)
    keys = sorted(set().union(*(r.measured for r in records)))
    aggregates = {}
    for key in keys:
        aggregate = quantity_aggregate(r.measured.get(key) for r in records)
        if aggregate is not None:
            aggregates[key] = QuantityAggregate(**aggregate)
    error_tags = Counter(r.error_tag for r in records if r.error)

    min_pass = config.thresholds.get(MIN_PASS)
    acceptance = None
    if config.acceptance:
        acceptance = min_pass is None or pass_count >= min_pass
    return CampaignSummary(
        name=config.name,
        experiment=config.experiment.value,
        trial_count=trial_count,
        pass_count=pass_count,
        wilson_interval_95=wilson_interval(pass_count, trial_count),
        aggregates=aggregates,
        error_tags=dict(sorted(error_tags.items())),
        acceptance=acceptance,
        min_pass=int(min_pass) if min_pass is not None else None,
        config_hash=config.config_hash(),
        master_seed=config.master_seed,
        wall_time=wall_time,
    )


def run_campaign(config: ExperimentConfig, workers: int | None = None,
                 out_dir: str | Path | None = None,
                 registry: ExperimentRegistry | None = None,
                 write: bool = True) -> tuple[list[TrialRecord], CampaignSummary]:
    """
    Run every trial of a campaign and write its outputs.

    Configuration errors raise before trial 0; errors inside a trial are
    recorded on that trial only.

    Args:
        config: Validated experiment configuration
        workers: Worker processes (default experiments.workers)
        out_dir: Output root (default output.dir, then experiments.output_dir)
        registry: Experiment registry (default: every built-in experiment)
        write: Skip writing files when False

    Returns:
        tuple[list[TrialRecord], CampaignSummary]: Records sorted by trial index
    """
    registry = registry or default_registry()
    # min_pass is a campaign-level threshold that every experiment accepts
    thresholds = {k: v for k, v in config.thresholds.items() if k != MIN_PASS}
    experiment = registry.select(config.model_copy(update={"thresholds": thresholds}))
    workers = workers or CONFIG.experiments.workers
    logger.info("Running campaign %s: %s, %d trials, %d worker(s)",
                config.name, config.experiment.value, config.trials, workers)

    start = time.perf_counter()
    if workers <= 1:
        records = [run_trial(experiment, i) for i in range(config.trials)]
    else:
        task = partial(_run_in_worker, experiment.config.model_dump_json())
        with ProcessPoolExecutor(max_workers=workers) as pool:
            records = list(pool.map(task, range(config.trials),
                                    chunksize=max(1, config.trials // (4 * workers))))
    records.sort(key=lambda r: r.trial_index)
    wall_time = time.perf_counter() - start

    summary = summarize(records, config, wall_time)
    logger.info("Campaign %s: %d/%d passed, Wilson 95%% %s, %.1fs",
                config.name, summary.pass_count, summary.trial_count,
                tuple(round(x, 4) for x in summary.wilson_interval_95), wall_time)
    if write:
        root = out_dir or config.output.dir or CONFIG.experiments.output_dir
        emit(records, summary, config, root, config.output.format,
             extra=experiment.extra_outputs(records))
    return records, summary
