import os

# single-threaded BLAS so timings are comparable across machines
os.environ.setdefault("OPENBLAS_NUM_THREADS", "1")
os.environ.setdefault("OMP_NUM_THREADS", "1")

import numpy as np
import pytest

from cmaxdenoise.core import CameraModel, EventSlice


def make_slice(x, y, t, p=None, sensor=None, t_ref=None):
    x = np.asarray(x)
    p = np.ones(len(x), dtype=np.int8) if p is None else p
    sensor = sensor or CameraModel.centered(32, 24)
    return EventSlice(x, y, t, p, sensor, t_ref)


@pytest.fixture
def cam():
    return CameraModel.centered(32, 24)


@pytest.fixture(scope="session")
def star_small():
    from cmaxdenoise.sim import star_scene

    return star_scene(0.15, seed=3, n_events=12000, size=100, omega=(0.0, 0.0, 2.0))
