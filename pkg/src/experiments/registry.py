import logging

from src.errors import ConfigurationError
from src.experiments.base import BaseExperiment
from src.experiments.config import ExperimentConfig, ExperimentKind

logger = logging.getLogger(__name__)


class ExperimentRegistry:
    def __init__(self):
        self.experiments: dict[ExperimentKind, type[BaseExperiment]] = {}

    def register_experiment(self, experiment: type[BaseExperiment]) -> None:
        """Register an experiment class under its kind"""
        if not issubclass(experiment, BaseExperiment):
            raise ValueError(
                f"Experiment must be a subclass of BaseExperiment, got {experiment}")
        if experiment.kind in self.experiments:
            logger.warning("Replacing experiment registered for %s", experiment.kind.value)
        self.experiments[experiment.kind] = experiment
        logger.debug("Registered experiment: %s", experiment.__name__)

    def select(self, config: ExperimentConfig) -> BaseExperiment:
        """
        Instantiate the experiment named by the config.

        Raises:
            RuntimeError: If no experiments registered
            ConfigurationError: If the kind is unknown or the config does not fit it
        """
        if not self.experiments:
            raise RuntimeError("No experiments registered")
        experiment = self.experiments.get(config.experiment)
        if experiment is None:
            raise ConfigurationError(f"No experiment registered for {config.experiment.value}")
        logger.info("Selected experiment %s for %s", experiment.__name__, config.name)
        return experiment(config)

    def __contains__(self, kind: ExperimentKind) -> bool:
        return kind in self.experiments


def default_registry() -> ExperimentRegistry:
    from src.experiments.catalog import EXPERIMENTS

    registry = ExperimentRegistry()
    for experiment in EXPERIMENTS:
        registry.register_experiment(experiment)
    return registry
