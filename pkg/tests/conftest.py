import os
import sys

import numpy as np
import pytest

# Make the repository root importable
sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), '..')))

from pbgnet.bam_core import NetworkArchitecture, NetworkParams
from pbgnet.data import load_task
from pbgnet.math_core import RngStream
from pbgnet.run_storage import init_run_db


def make_params(widths, seed=0, scale=1.0):
    """Random network weights with N(0, scale^2) entries."""
    rng = np.random.default_rng(seed)
    arch = NetworkArchitecture(tuple(widths))
    return NetworkParams([scale * rng.standard_normal(shape) for shape in arch.layer_shapes])


def relative_error(actual, expected):
    actual = np.asarray(actual, dtype=np.float64)
    expected = np.asarray(expected, dtype=np.float64)
    return float(np.max(np.abs(actual - expected)) / max(np.max(np.abs(expected)), 1e-12))


@pytest.fixture
def stream():
    return RngStream(1234)


@pytest.fixture
def blobs_task():
    return load_task("blobs:200", "data", 0)


@pytest.fixture
def registry():
    init_run_db("sqlite:///:memory:")
    yield
