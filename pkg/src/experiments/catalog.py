"""The experiments a campaign can run, one class per ExperimentKind."""
import logging
import math
from abc import abstractmethod

import numpy as np

from src.control import ControlMode, is_controllable, minimal_controllability_scan
from src.ensembles import AtomDistribution, sample_vector
from src.errors import ConfigurationError
from src.experiments.base import BaseExperiment, TrialOutcome
from src.experiments.config import ExperimentKind, VectorKind
from src.experiments.emit import gap_cdf_csv
from src.experiments.records import MeasuredValue, TrialRecord
from src.graph import outlier_check, perron_check, strongly_connected
from src.spectral import charpoly_exact, eigen_decompose, min_gap, simple_spectrum_exact
from src.structure import delocalized_check

logger = logging.getLogger(__name__)

SIGN_STREAM = 1


class SimpleSpectrumExperiment(BaseExperiment):
    """Exact test that the characteristic polynomial is squarefree"""
    kind = ExperimentKind.SIMPLE_SPECTRUM
    requires_integer = True

    def run_trial(self, seed: int) -> TrialOutcome:
        M = self.sample(seed)
        simple = simple_spectrum_exact(M)
        measured = {"simple": simple, **self.norm_measurements(M)}
        if self.params.numeric_gap:
            gap = min_gap(eigen_decompose(M))
            measured["normalized_delta"] = gap.normalized_delta
        return TrialOutcome(measured=measured, passed=simple)


class GapDistributionExperiment(BaseExperiment):
    """Minimal eigenvalue gap Δ and its √n-normalisation"""
    kind = ExperimentKind.GAP_DISTRIBUTION
    default_thresholds = {"min_normalized_gap": 0.0}

    def run_trial(self, seed: int) -> TrialOutcome:
        M = self.sample(seed)
        gap = min_gap(eigen_decompose(M))
        measured = {"delta": gap.delta, "normalized_delta": gap.normalized_delta,
                    **self.norm_measurements(M)}
        return TrialOutcome(measured=measured,
                            passed=gap.normalized_delta > self.threshold("min_normalized_gap"))

    def extra_outputs(self, records: list[TrialRecord]) -> dict[str, str]:
        gaps = [r.measured["normalized_delta"] for r in records
                if r.error is None and "normalized_delta" in r.measured]
        return {"gap_cdf.csv": gap_cdf_csv(gaps)} if gaps else {}


class _ControllabilityExperiment(BaseExperiment):
    """Shared body of the (N, b) controllability experiments"""

    @abstractmethod
    def input_vector(self, seed: int) -> np.ndarray:
        pass

    def mode_for(self, b: np.ndarray) -> ControlMode:
        if self.params.control_mode is not None:
            return self.params.control_mode
        exact = self.config.ensemble.integer_valued and np.asarray(b).dtype.kind in "iu"
        return ControlMode.EXACT if exact else ControlMode.NUMERIC

    def validate(self) -> None:
        super().validate()
        if self.params.control_mode is ControlMode.EXACT and not self.config.ensemble.integer_valued:
            raise ConfigurationError("exact controllability needs an integer-valued ensemble")

    def run_trial(self, seed: int) -> TrialOutcome:
        A = self.sample(seed)
        measured = self.norm_measurements(A)
        if self.params.basis_scan:
            mode = self.mode_for(np.ones(1, dtype=np.int64))
            scan = minimal_controllability_scan(A, mode)
            measured.update({"controllable_count": sum(scan), "mode": mode.value})
            return TrialOutcome(measured=measured, passed=all(scan))

        b = self.input_vector(seed)
        mode = self.mode_for(b)
        report = is_controllable(A, b, mode)
        measured.update({
            "mode": mode.value,
            "numeric_rank": report.numeric_rank,
            "exact_rank": report.exact_rank,
            "pbh_min_overlap": report.pbh_min_overlap,
            "verdicts_agree": not report.warnings,
            "controllable": report.controllable,
        })
        return TrialOutcome(measured=measured, passed=report.controllable)


class ControllabilityAllOnesExperiment(_ControllabilityExperiment):
    """(N, 1) controllability"""
    kind = ExperimentKind.CONTROLLABILITY_ALLONES

    def input_vector(self, seed: int) -> np.ndarray:
        return np.ones(self.n, dtype=np.int64)


class ControllabilityBasisExperiment(_ControllabilityExperiment):
    """(N, e_i) controllability, or every e_i with basis_scan"""
    kind = ExperimentKind.CONTROLLABILITY_BASIS

    def input_vector(self, seed: int) -> np.ndarray:
        if self.params.basis_index > self.n:
            raise ConfigurationError(f"basis_index {self.params.basis_index} exceeds n={self.n}")
        b = np.zeros(self.n, dtype=np.int64)
        b[self.params.basis_index - 1] = 1
        return b


class ControllabilityRandomBExperiment(_ControllabilityExperiment):
    """(N, b) controllability for b with iid entries drawn independently of N"""
    kind = ExperimentKind.CONTROLLABILITY_RANDOM_B

    def input_vector(self, seed: int) -> np.ndarray:
        return sample_vector(self.params.b_atom or AtomDistribution.rademacher(), self.n, seed)


class _SmallBallExperiment(BaseExperiment):
    """Overlaps of a test vector with the eigenvectors of N"""

    def overlaps(self, M: np.ndarray, b: np.ndarray) -> tuple[np.ndarray, dict[str, MeasuredValue]]:
        """
        |bᵀu| over unit right eigenvectors, skipping |λ| > 2√n if configured.
        On a digraph the skipped outlier is checked through Perron positivity.
        """
        spectrum = eigen_decompose(M)
        keep = np.ones(spectrum.n, dtype=bool)
        if self.params.exclude_outlier:
            keep = np.abs(spectrum.eigenvalues) <= 2 * math.sqrt(self.n)
        measured: dict[str, MeasuredValue] = {"excluded": int((~keep).sum())}
        if self.config.ensemble.is_graph and not keep.all():
            perron = perron_check(M, spectrum)
            measured.update({
                "outlier_index": int(np.argmax(np.abs(spectrum.eigenvalues))),
                "perron_positive": bool(perron.positive),
                "perron_min_entry": perron.min_entry,
            })
        vectors = spectrum.right_eigenvectors[:, keep]
        return np.abs(vectors.T @ b.astype(complex)), measured

    @staticmethod
    def outlier_ok(measured: dict[str, MeasuredValue]) -> bool:
        return measured.get("perron_positive", True) is True


class EigvecSmallBallExperiment(_SmallBallExperiment):
    """min over eigenvectors u of |bᵀu| against the radius t"""
    kind = ExperimentKind.EIGVEC_SMALLBALL

    def run_trial(self, seed: int) -> TrialOutcome:
        M = self.sample(seed)
        b = self.test_vector(seed)
        overlaps, measured = self.overlaps(M, b)
        smallest = float(overlaps.min()) if overlaps.size else None
        measured.update({"min_overlap": smallest, **self.norm_measurements(M)})
        passed = smallest is not None and smallest > self.params.t and self.outlier_ok(measured)
        return TrialOutcome(measured=measured, passed=passed)


class ScaledSmallBallExperiment(_SmallBallExperiment):
    """min over eigenvectors u of |1ᵀ(b⊙u)| = |bᵀu| for a delocalized b"""
    kind = ExperimentKind.SCALED_SMALLBALL
    default_thresholds = {"max_nondelocalized_fraction": 1.0}

    def validate(self) -> None:
        super().validate()
        if self.params.vector is not VectorKind.RANDOM:
            raise ConfigurationError("scaled_smallball draws b at random; set params.vector = random")

    def run_trial(self, seed: int) -> TrialOutcome:
        M = self.sample(seed)
        b = self.test_vector(seed)
        m = delocalized_check(b, self.params.B)
        overlaps, measured = self.overlaps(M, b)
        smallest = float(overlaps.min()) if overlaps.size else None
        measured.update({"m": m, "min_overlap": smallest, **self.norm_measurements(M)})
        passed = (smallest is not None and smallest > self.params.t
                  and m <= self.threshold("max_nondelocalized_fraction") * self.n
                  and self.outlier_ok(measured))
        return TrialOutcome(measured=measured, passed=passed)


class DigraphOutlierExperiment(BaseExperiment):
    """One eigenvalue outside (1+δ)√n, close to pn"""
    kind = ExperimentKind.DIGRAPH_OUTLIER
    requires_graph = True
    default_thresholds = {"outlier_distance_factor": 3.0}

    def run_trial(self, seed: int) -> TrialOutcome:
        adj = self.sample(seed)
        spectrum = eigen_decompose(adj)
        check = outlier_check(adj, self.config.ensemble.graph.p, self.params.delta, spectrum)
        bound = self.threshold("outlier_distance_factor") * math.sqrt(self.n)
        measured = {
            "outside_count": check.outside_count,
            "outlier_re": check.outlier.real if check.outlier is not None else None,
            "outlier_im": check.outlier.imag if check.outlier is not None else None,
            "distance_to_pn": check.distance_to_pn,
            **self.norm_measurements(adj),
        }
        passed = check.outside_count == 1 and check.distance_to_pn <= bound
        return TrialOutcome(measured=measured, passed=passed)


class DigraphPerronExperiment(BaseExperiment):
    """Strong connectivity plus a real, simple top eigenvalue with a positive eigenvector"""
    kind = ExperimentKind.DIGRAPH_PERRON
    requires_graph = True

    def run_trial(self, seed: int) -> TrialOutcome:
        adj = self.sample(seed)
        connected, scc_count = strongly_connected(adj)
        perron = perron_check(adj)
        measured = {
            "strongly_connected": connected,
            "scc_count": scc_count,
            "top_re": perron.top_eigenvalue.real,
            "top_im": perron.top_eigenvalue.imag,
            "is_real": perron.is_real,
            "is_simple": perron.is_simple,
            "min_entry": perron.min_entry,
        }
        passed = connected and perron.is_real and perron.is_simple and perron.positive
        return TrialOutcome(measured=measured, passed=passed)


class StrongConnectivityExperiment(BaseExperiment):
    """Single strongly connected component"""
    kind = ExperimentKind.STRONG_CONNECTIVITY
    requires_graph = True

    def run_trial(self, seed: int) -> TrialOutcome:
        connected, scc_count = strongly_connected(self.sample(seed))
        return TrialOutcome(measured={"scc_count": scc_count}, passed=connected)


class SignSymmetrizationExperiment(BaseExperiment):
    """
    SNS with S = diag(ε) is similar to N, and (SNS, ε) is controllable iff
    (N, 1) is; both are checked exactly.
    """
    kind = ExperimentKind.SIGN_SYMMETRIZATION
    requires_integer = True

    def run_trial(self, seed: int) -> TrialOutcome:
        N = self.sample(seed)
        signs = sample_vector(AtomDistribution.rademacher(), self.n, seed, stream=SIGN_STREAM)
        symmetrized = N * np.outer(signs, signs)
        same_charpoly = charpoly_exact(N) == charpoly_exact(symmetrized)
        ones = np.ones(self.n, dtype=np.int64)
        rank = is_controllable(N, ones, ControlMode.EXACT).exact_rank
        rank_symmetrized = is_controllable(symmetrized, signs, ControlMode.EXACT).exact_rank
        measured = {"charpoly_equal": same_charpoly, "rank": rank,
                    "rank_symmetrized": rank_symmetrized}
        return TrialOutcome(measured=measured,
                            passed=same_charpoly and rank == rank_symmetrized)


EXPERIMENTS: tuple[type[BaseExperiment], ...] = (
    SimpleSpectrumExperiment,
    GapDistributionExperiment,
    ControllabilityAllOnesExperiment,
    ControllabilityBasisExperiment,
    ControllabilityRandomBExperiment,
    EigvecSmallBallExperiment,
    ScaledSmallBallExperiment,
    DigraphOutlierExperiment,
    DigraphPerronExperiment,
    StrongConnectivityExperiment,
    SignSymmetrizationExperiment,
)
