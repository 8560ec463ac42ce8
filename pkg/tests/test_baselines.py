import numpy as np
import pytest

from cmaxdenoise import sim
from cmaxdenoise.baselines import BafConfig, baf_filter, random_downsample
from cmaxdenoise.core import CameraModel
from cmaxdenoise.metrics import precision_recall, roc_auc
from cmaxdenoise.warp import TileFlow

from conftest import make_slice


def baf_oracle(s, window, radius, chunk=512):
    """All-pairs check: k is signal iff some j < k sits within the Chebyshev radius and window."""
    x, y, t = s.x, s.y, s.t
    n = len(t)
    out = np.zeros(n, bool)
    idx = np.arange(n)
    for a in range(0, n, chunk):
        k = idx[a : a + chunk, None]
        near = (np.abs(x[k] - x[None, :]) <= radius) & (np.abs(y[k] - y[None, :]) <= radius)
        recent = (t[k] - t[None, :] <= window) & (idx[None, :] < k)
        out[a : a + chunk] = np.any(near & recent, axis=1)
    return out


@pytest.fixture(scope="module")
def sweep_scene():
    cam = CameraModel.centered(64, 48)
    spec = sim.SceneSpec(sim.Bar(width=8), TileFlow.uniform(cam, (60.0, 0.0)), 0.1, 180, cam, seed=3)
    clean = sim.generate_scene(spec)
    scene = sim.inject_ba_noise(clean, sim.noise_rate_for_fraction(clean, 0.10), seed=4)
    assert len(scene) <= 5000
    return scene


def test_single_event_is_noise(cam):
    lab = baf_filter(make_slice([3], [3], [0.0], sensor=cam))
    assert lab.labels.tolist() == [False]
    assert lab.scores.tolist() == [0.0]


def test_same_pixel_support(cam):
    lab = baf_filter(make_slice([3, 3], [3, 3], [0.0, 0.004], sensor=cam))
    assert lab.labels.tolist() == [False, True]
    lab = baf_filter(make_slice([3, 3], [3, 3], [0.0, 0.006], sensor=cam))
    assert lab.labels.tolist() == [False, False]


def test_neighbor_radius(cam):
    s = make_slice([3, 4, 6], [3, 4, 4], [0.0, 0.001, 0.002], sensor=cam)
    assert baf_filter(s).labels.tolist() == [False, True, False]
    assert baf_filter(s, BafConfig(5e-3, 2)).labels.tolist() == [False, True, True]


def test_polarity_ignored(cam):
    s = make_slice([3, 3], [3, 3], [0.0, 0.001], p=np.array([1, -1]), sensor=cam)
    assert baf_filter(s).labels.tolist() == [False, True]


def test_matches_all_pairs_oracle(sweep_scene):
    s = sweep_scene.slice
    lab = baf_filter(s, BafConfig(5e-3, 1))
    ref = baf_oracle(s, 5e-3, 1)
    assert np.array_equal(lab.labels, ref)
    gt = sweep_scene.gt_labels
    assert precision_recall(lab, gt) == precision_recall(ref, gt)
    assert lab.tau == pytest.approx(ref.mean())


def test_causal(sweep_scene):
    s = sweep_scene.slice
    cut = len(s) // 2
    head = s.select(np.arange(len(s)) < cut)
    assert np.array_equal(baf_filter(head).labels, baf_filter(s).labels[:cut])


def test_config_validation():
    with pytest.raises(ValueError):
        BafConfig(0.0, 1)
    with pytest.raises(ValueError):
        BafConfig(1e-3, 0)


def test_random_downsample_contract(sweep_scene):
    s = sweep_scene.slice
    assert random_downsample(s, 1.0, 0).labels.all()
    a, b = random_downsample(s, 0.6, 9), random_downsample(s, 0.6, 9)
    assert a == b
    assert a.num_signal == int(np.ceil(0.6 * len(s)))
    with pytest.raises(ValueError):
        random_downsample(s, 0.0, 0)


def test_random_downsample_auc_near_half(sweep_scene):
    gt = sweep_scene.gt_labels
    aucs = [roc_auc(random_downsample(sweep_scene.slice, 0.9, seed).scores, gt).auc for seed in range(20)]
    assert abs(np.mean(aucs) - 0.5) < 0.05
