import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).resolve().parent.parent))

from elm_core import one_hot  # noqa: E402
from logger import logger  # noqa: E402


@pytest.fixture(autouse=True)
def quiet_logger():
    logger.set_log_level("ERROR")
    yield
    logger.set_log_level("INFO")


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def make_instance(seed: int, m: int = 30, n: int = 8, L: int = 12, c: int = 3):
    """Random hidden outputs in (0, 1) and one-hot labels for both domains"""
    r = np.random.default_rng(seed)
    H_s = r.uniform(0.0, 1.0, size=(m, L))
    H_t = r.uniform(0.0, 1.0, size=(n, L))
    Y_s = one_hot(np.arange(m) % c, c)
    Y_t = one_hot(np.arange(n) % c, c)
    return H_s, Y_s, H_t, Y_t


@pytest.fixture
def instance():
    return make_instance(7)


def synthetic_config(tmp_path, **overrides):
    """Small rotated-Gaussians experiment: 3 classes, 30 source and 3 labeled target per class"""
    from data_pipeline import SplitSpec
    from experiment_harness import ExperimentConfig, SyntheticShift
    from ptelm_solver import PtelmHyperparams

    cfg = ExperimentConfig(
        data_source="rotated_gaussians",
        split=SplitSpec(30, 3),
        trials=3,
        hyperparams=PtelmHyperparams(hidden_nodes=30),
        synthetic=SyntheticShift(source_per_class=40, target_per_class=20, rotation_deg=60.0),
        output_dir=str(tmp_path / "out"),
        progress_bar=False,
    )
    return cfg.with_overrides(**overrides) if overrides else cfg
