import pytest
import tempfile
from rich.console import Console
from omegaconf import OmegaConf
import io
import logging

import numpy as np

from src.ensembles import AtomDistribution, EnsembleSpec
from src.experiments.config import ExperimentConfig, ExperimentKind


@pytest.fixture(scope="function")
def mock_config():
    return OmegaConf.create({
        'logging': {
            'level': 'INFO',
            'file': None
        },
        'spectral': {
            'tol': 1e-9
        },
        'experiments': {
            'workers': 2,
            'output_dir': 'somewhere'
        }
    })


@pytest.fixture(scope="function")
def temp_config_file(mock_config):
    with tempfile.NamedTemporaryFile(mode='w', suffix='.yaml') as temp:
        OmegaConf.save(mock_config, temp.name)
        temp.flush()
        yield temp.name


@pytest.fixture(scope="function")
def mock_console():
    output = io.StringIO()
    console = Console(file=output, force_terminal=True, width=120)
    return console, output


@pytest.fixture(scope="function")
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="function")
def rademacher_spec():
    return EnsembleSpec(n=6, atom=AtomDistribution.rademacher())


@pytest.fixture(scope="function")
def make_experiment_config():
    """Factory for small campaign configs; keyword overrides go straight to the model."""
    def factory(**overrides) -> ExperimentConfig:
        data = {
            "name": "unit",
            "ensemble": {"n": 6, "atom": {"kind": "rademacher"}},
            "trials": 4,
            "master_seed": 7,
            "experiment": ExperimentKind.SIMPLE_SPECTRUM,
        }
        data.update(overrides)
        return ExperimentConfig.model_validate(data)
    return factory


@pytest.fixture(autouse=True)
def setup_logging():
    logging.basicConfig(
        level=logging.DEBUG,
        format='%(asctime)s - %(name)s - %(levelname)s - %(message)s'
    )
