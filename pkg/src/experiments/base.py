from abc import ABC, abstractmethod
from dataclasses import dataclass, field
import logging
import math
from typing import ClassVar

import numpy as np

from src.ensembles import (AtomDistribution, event_EK, operator_norm, sample_matrix,
                           sample_vector)
from src.errors import ConfigurationError
from src.experiments.config import ExperimentConfig, ExperimentKind, VectorKind
from src.experiments.records import MeasuredValue, TrialRecord
from src.graph import centered_adjacency

logger = logging.getLogger(__name__)


@dataclass
class TrialOutcome:
    """What a single trial measured and whether it met the criterion"""
    measured: dict[str, MeasuredValue] = field(default_factory=dict)
    passed: bool = False


class BaseExperiment(ABC):
    """Base class for all experiments"""
    kind: ClassVar[ExperimentKind]
    # threshold name -> default value; unknown names in a config are rejected
    default_thresholds: ClassVar[dict[str, float]] = {}
    requires_graph: ClassVar[bool | None] = None
    requires_integer: ClassVar[bool] = False

    def __init__(self, config: ExperimentConfig):
        self.config = config.with_thresholds(self.default_thresholds)
        self.validate()

    @property
    def n(self) -> int:
        return self.config.ensemble.n

    @property
    def params(self):
        return self.config.params

    def threshold(self, name: str) -> float:
        return self.config.thresholds[name]

    def validate(self) -> None:
        """Reject ensembles this experiment cannot run on, before trial 0"""
        ensemble = self.config.ensemble
        if self.requires_graph is True and not ensemble.is_graph:
            raise ConfigurationError(f"{self.kind.value} needs a digraph ensemble")
        if self.requires_graph is False and ensemble.is_graph:
            raise ConfigurationError(f"{self.kind.value} needs an atom ensemble")
        if self.requires_integer and not ensemble.integer_valued:
            raise ConfigurationError(f"{self.kind.value} needs an integer-valued ensemble")
        if self.n < 1:
            raise ConfigurationError("ensemble.n must be at least 1")

    # Shared helpers

    def sample(self, seed: int) -> np.ndarray:
        return sample_matrix(self.config.ensemble, seed)

    def test_vector(self, seed: int) -> np.ndarray:
        """The vector b named by params (ones, a basis vector or a random draw)"""
        n, params = self.n, self.params
        if params.vector is VectorKind.ONES:
            return np.ones(n, dtype=np.int64)
        if params.vector is VectorKind.BASIS:
            if params.basis_index > n:
                raise ConfigurationError(f"basis_index {params.basis_index} exceeds n={n}")
            b = np.zeros(n, dtype=np.int64)
            b[params.basis_index - 1] = 1
            return b
        atom = params.b_atom or AtomDistribution.rademacher()
        return sample_vector(atom, n, seed)

    def norm_measurements(self, M: np.ndarray) -> dict[str, MeasuredValue]:
        """‖N - E N‖/√n and the event E_K, recorded next to every matrix statistic"""
        ensemble = self.config.ensemble
        expectation = None
        if ensemble.is_graph:
            # pJ or p(J - I)
            expectation = M - centered_adjacency(M, float(ensemble.graph.p), ensemble.graph.loops)
        deviation = M if expectation is None else M - expectation
        return {
            "norm_ratio": operator_norm(deviation) / math.sqrt(self.n),
            "event_EK": bool(event_EK(M, self.params.K, expectation)),
        }

    @abstractmethod
    def run_trial(self, seed: int) -> TrialOutcome:
        """Run one trial from its derived seed"""
        pass

    def extra_outputs(self, records: list[TrialRecord]) -> dict[str, str]:
        """Additional file name -> CSV text written next to the records"""
        return {}

    @property
    def description(self) -> str:
        return (self.__doc__ or self.kind.value).strip().splitlines()[0]
