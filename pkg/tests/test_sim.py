import math

import numpy as np
import pytest

from cmaxdenoise import sim
from cmaxdenoise.core import CameraModel, validate_slice
from cmaxdenoise.metrics import fwl
from cmaxdenoise.warp import AngularVelocity, Identity, TileFlow, warp_coords

CAM = CameraModel.centered(100, 80)


def _bar_edge_points(cam, bar):
    segs, _ = sim._segments(bar, cam)
    return sum(int(math.floor(math.hypot(x1 - x0, y1 - y0))) + 1 for x0, y0, x1, y1 in segs)


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_static_bar_count_is_poisson(seed):
    bar = sim.Bar()
    r, d = 50.0, 0.3
    scene = sim.generate_scene(sim.SceneSpec(bar, Identity(), d, r, CAM, seed))
    mean = r * d * _bar_edge_points(CAM, bar)
    assert abs(len(scene) - mean) <= 3 * math.sqrt(mean)
    assert scene.gt_labels.all()


SCENES = {
    "bar_flow": sim.SceneSpec(sim.Bar(), TileFlow.uniform(CAM, (50.0, 10.0)), 0.2, 100, CAM, 0),
    "bar_roll": sim.SceneSpec(sim.Bar(), AngularVelocity((0.0, 0.0, 1.0)), 0.2, 100, CAM, 0),
    "star_tilt": sim.SceneSpec(sim.Star(n_arms=5), AngularVelocity((0.4, -0.3, 1.2)), 0.2, 100, CAM, 1),
    "two_depth": sim.SceneSpec(sim.TwoDepth(), AngularVelocity((0.0, 0.2, 1.5)), 0.2, 100, CAM, 2),
}


@pytest.mark.parametrize("name", sorted(SCENES))
def test_scene_is_sharp_at_gt_motion(name):
    scene = sim.generate_scene(SCENES[name])
    assert fwl(scene.slice, scene.gt_motion) > 1.0
    noisy = sim.inject_ba_noise(scene, 2.0, seed=1)
    assert fwl(noisy.slice, noisy.gt_motion) > 1.0


@pytest.mark.parametrize("name", sorted(SCENES))
def test_generator_consistency(name):
    spec = SCENES[name]
    scene = sim.generate_scene(spec)
    s = scene.slice
    validate_slice(s)
    xw, yw = warp_coords(s.x, s.y, s.t, scene.t_start, s.sensor, spec.motion)
    assert np.max(sim.distance_to_edges(xw, yw, scene.segments)) <= 0.5


def test_invalid_duration():
    with pytest.raises(ValueError):
        sim.SceneSpec(sim.Bar(), Identity(), 0.0, 10, CAM)
    with pytest.raises(ValueError):
        sim.SceneSpec(sim.Bar(), Identity(), 0.1, -1, CAM)


def test_empty_scene():
    # a 10 px wide bar has both edges outside a 4 px sensor
    tiny = CameraModel.centered(4, 4)
    spec = sim.SceneSpec(sim.Bar(width=10), Identity(), 0.2, 100, tiny)
    with pytest.raises(sim.EmptyScene):
        sim.generate_scene(spec)


def test_noise_rate_zero_is_noop():
    scene = sim.generate_scene(SCENES["bar_roll"])
    assert sim.inject_ba_noise(scene, 0.0, 3) is scene


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_noise_count(seed):
    cam = CameraModel.centered(100, 100)
    scene = sim.generate_scene(sim.SceneSpec(sim.Bar(), Identity(), 0.1, 10, cam, seed))
    noisy = sim.inject_ba_noise(scene, 5.0, seed)
    added = len(noisy) - len(scene)
    assert abs(added - 5000) <= 3 * math.sqrt(5000)
    assert int((~noisy.gt_labels).sum()) == added
    assert np.all(noisy.source[~noisy.gt_labels] == -1)
    validate_slice(noisy.slice)
    assert set(np.unique(noisy.slice.p[~noisy.gt_labels])) == {-1, 1}


def test_determinism():
    a = sim.star_scene(0.1, seed=5, n_events=5000, size=80)
    b = sim.star_scene(0.1, seed=5, n_events=5000, size=80)
    assert a.slice == b.slice and np.array_equal(a.gt_labels, b.gt_labels)


@pytest.mark.parametrize("eta", [0.03, 0.15, 0.3])
def test_noise_fraction_control(eta):
    scene = sim.star_scene(eta, seed=0)
    assert abs(scene.noise_fraction - eta) < 0.02
    assert 45_000 < len(scene) < 55_000


def test_two_depth_groups():
    scene = sim.two_depth_scene(0.1, seed=0)
    src = scene.source
    assert set(np.unique(src)) == {-1, sim.NEAR, sim.FAR}
    assert np.array_equal(scene.gt_labels, src >= 0)
    assert (src == sim.NEAR).sum() > 5 * (src == sim.FAR).sum()
