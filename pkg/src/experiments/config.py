"""
Declarative experiment files.

The flat format is line oriented::

    # comment
    name = allones_n30
    trials = 200
    experiment = controllability_allones

    [ensemble]
    n = 30
    atom.kind = rademacher

Keys before the first section, or under ``[campaign]``, are top level; keys
under ``[section]`` are prefixed with ``section.``. Values are parsed as YAML
scalars or flow lists by OmegaConf. ``.yaml`` files are read as nested YAML.
"""
import hashlib
import json
import logging
from enum import Enum
from pathlib import Path
from typing import Any, Literal

from omegaconf import OmegaConf
from omegaconf.errors import OmegaConfBaseException
from yaml import YAMLError
from pydantic import BaseModel, ConfigDict, Field, ValidationError

from src.config import CONFIG
from src.control import ControlMode
from src.ensembles import SEED_LIMIT, AtomDistribution, EnsembleSpec
from src.errors import ConfigurationError

logger = logging.getLogger(__name__)

ROOT_SECTION = "campaign"


class ExperimentKind(str, Enum):
    SIMPLE_SPECTRUM = "simple_spectrum"
    GAP_DISTRIBUTION = "gap_distribution"
    CONTROLLABILITY_ALLONES = "controllability_allones"
    CONTROLLABILITY_BASIS = "controllability_basis"
    CONTROLLABILITY_RANDOM_B = "controllability_random_b"
    EIGVEC_SMALLBALL = "eigvec_smallball"
    SCALED_SMALLBALL = "scaled_smallball"
    DIGRAPH_OUTLIER = "digraph_outlier"
    DIGRAPH_PERRON = "digraph_perron"
    STRONG_CONNECTIVITY = "strong_connectivity"
    SIGN_SYMMETRIZATION = "sign_symmetrization"


class VectorKind(str, Enum):
    ONES = "ones"
    BASIS = "basis"
    RANDOM = "random"


class ExperimentParams(BaseModel):
    """Per-experiment knobs; each experiment reads the ones it needs."""
    model_config = ConfigDict(extra="forbid")

    vector: VectorKind = Field(default=VectorKind.ONES, description="Test vector b")
    basis_index: int = Field(default=1, ge=1, description="1-based index for vector = basis")
    b_atom: AtomDistribution | None = Field(
        default=None, description="Entry law of b for vector = random")
    t: float = Field(default=1e-6, ge=0, description="Small-ball radius")
    B: float = Field(default=2.0, ge=1, description="Delocalization bound")
    delta: float = Field(default=0.2, gt=0, description="Outlier disk margin")
    K: float = Field(default_factory=lambda: float(CONFIG.experiments.norm_K), gt=0,
                     description="Operator norm event constant")
    control_mode: ControlMode | None = Field(
        default=None, description="Controllability mode; exact for integer data when unset")
    basis_scan: bool = Field(default=False, description="Scan every e_i instead of one")
    exclude_outlier: bool = Field(
        default=True, description="Skip eigenvectors with |λ| > 2√n in small-ball runs")
    numeric_gap: bool = Field(default=False, description="Also record the floating gap")


class OutputConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    dir: str | None = Field(default=None, description="Defaults to experiments.output_dir")
    format: Literal["json", "csv", "both"] = "json"


class ExperimentConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    name: str
    ensemble: EnsembleSpec
    trials: int = Field(ge=1)
    master_seed: int = Field(ge=0, lt=SEED_LIMIT)
    experiment: ExperimentKind
    params: ExperimentParams = Field(default_factory=ExperimentParams)
    thresholds: dict[str, float] = Field(default_factory=dict)
    acceptance: bool = Field(default=False, description="Exit status follows min_pass")
    output: OutputConfig = Field(default_factory=OutputConfig)

    def config_hash(self) -> str:
        """Short SHA-256 of the canonical JSON form; names an output set."""
        canonical = json.dumps(self.model_dump(mode="json", exclude={"output"}),
                               sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode()).hexdigest()[:16]

    def with_thresholds(self, defaults: dict[str, float]) -> "ExperimentConfig":
        unknown = set(self.thresholds) - set(defaults)
        if unknown:
            raise ConfigurationError(
                f"unknown thresholds for {self.experiment.value}: {sorted(unknown)}")
        return self.model_copy(update={"thresholds": {**defaults, **self.thresholds}})


def parse_flat_config(text: str) -> dict[str, Any]:
    """Nested dict from the flat ``[section]`` / ``key = value`` format."""
    section = ""
    dotlist: list[str] = []
    seen: set[str] = set()
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            section = line[1:-1].strip()
            if section == ROOT_SECTION:
                section = ""
            continue
        if "=" not in line:
            raise ConfigurationError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if not key:
            raise ConfigurationError(f"line {lineno}: empty key")
        full_key = f"{section}.{key}" if section else key
        if full_key in seen:
            raise ConfigurationError(f"line {lineno}: duplicate key {full_key}")
        seen.add(full_key)
        dotlist.append(f"{full_key}={value}")
    try:
        return OmegaConf.to_container(OmegaConf.from_dotlist(dotlist))
    except OmegaConfBaseException as e:
        raise ConfigurationError(f"malformed experiment file: {e}") from e


def build_experiment_config(data: dict[str, Any]) -> ExperimentConfig:
    try:
        return ExperimentConfig.model_validate(data)
    except ValidationError as e:
        raise ConfigurationError(f"invalid experiment configuration:\n{e}") from e


def load_experiment_config(path: str | Path) -> ExperimentConfig:
    """Read a flat (``.cfg``/``.ini``) or YAML experiment file."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as e:
        raise ConfigurationError(f"cannot read experiment file {path}: {e}") from e
    if path.suffix in (".yaml", ".yml"):
        try:
            data = OmegaConf.to_container(OmegaConf.create(text))
        except (OmegaConfBaseException, YAMLError) as e:
            raise ConfigurationError(f"malformed YAML in {path}: {e}") from e
    else:
        data = parse_flat_config(text)
    config = build_experiment_config(data)
    logger.info("Loaded experiment %s (%s, %d trials) from %s",
                config.name, config.experiment.value, config.trials, path)
    return config
