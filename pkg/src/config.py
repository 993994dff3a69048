import logging
import os
from pathlib import Path
from omegaconf import DictConfig, OmegaConf

logger = logging.getLogger(__name__)
project_path = Path(__file__).resolve().parents[1]

# Merged under the file, so the library imports with no config.yaml around.
DEFAULTS = {
    'logging': {'level': 'INFO', 'file': None},
    'spectral': {
        'tol': 1e-8,
        'max_refinements': 3,
        'pairing_collision_tol': 1e-10,
        'charpoly_max_n': 128,
    },
    'control': {'pbh_tol': 1e-8, 'cluster_tol': 1e-6, 'exact_max_n': 64},
    'structure': {
        'lcd': {
            'grid_step': 1e-3,
            'complex_grid_step': 1e-2,
            'refine_width': 1e-9,
            'complex_refine_width': 1e-6,
            'margin': 1e-12,
            'max_cells': 200_000,
            'log_base': 'e',
        },
        'levy': {
            'enumeration_cap': 10_000_000,
            'mc_min_samples': 1000,
            'sweep_cap': 5000,
            'max_centers': 2000,
            'slack': 1e-12,
        },
    },
    'graph': {
        'realness_tol': 1e-8,
        'simplicity_tol': 1e-6,
        'positivity_tol': 1e-10,
    },
    'experiments': {
        'output_dir': 'runs',
        'workers': 1,
        'schema_version': 1,
        'norm_K': 3.0,
    },
}


def load_config() -> DictConfig:
    """
    Load the lab configuration.

    The file named by ``CONFIG_PATH`` (default ``<project>/config.yaml``) is
    merged over the built-in defaults. An explicit ``CONFIG_PATH`` must exist.
    ``RMT_LAB_OUTPUT_DIR`` overrides ``experiments.output_dir``.
    """
    explicit = os.getenv('CONFIG_PATH')
    config_path = Path(explicit) if explicit else project_path / 'config.yaml'
    try:
        config = OmegaConf.create(DEFAULTS)
        if explicit or config_path.exists():
            config = OmegaConf.merge(config, OmegaConf.load(config_path))
        output_dir = os.getenv('RMT_LAB_OUTPUT_DIR')
        if output_dir:
            config.experiments.output_dir = output_dir
        logger.info("Configuration loaded successfully from %s", config_path)
        return config
    except Exception as e:
        logger.error("Failed to load config: %s", e)
        raise


# Load config once when module is imported
CONFIG = load_config()
