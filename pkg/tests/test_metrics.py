import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cmaxdenoise import sim
from cmaxdenoise.core import CameraModel, EventSlice
from cmaxdenoise.metrics import (
    DegenerateLabels,
    GeometryMismatch,
    LengthMismatch,
    ZeroIdentityVariance,
    angvel_rms,
    flow_epe,
    fwl,
    precision_recall,
    roc_auc,
)
from cmaxdenoise.warp import AngularVelocity, Identity, TileFlow


def pair_auc(scores, gt):
    """P(signal score > noise score), ties counted 1/2, by enumerating all pairs."""
    s = np.asarray(scores, float)
    gt = np.asarray(gt, bool)
    pos, neg = s[gt], s[~gt]
    diff = pos[:, None] - neg[None, :]
    return (np.sum(diff > 0) + 0.5 * np.sum(diff == 0)) / (len(pos) * len(neg))


def test_perfect_and_inverted():
    gt = np.array([1, 1, 0, 0], bool)
    assert roc_auc([4, 3, 2, 1], gt).auc == 1.0
    assert roc_auc([1, 2, 3, 4], gt).auc == 0.0


def test_eight_ninths():
    scores = [0.9, 0.8, 0.7, 0.6, 0.5, 0.4]
    gt = np.array([1, 1, 0, 1, 0, 0], bool)
    assert pair_auc(scores, gt) == pytest.approx(8 / 9, abs=1e-12)
    assert abs(roc_auc(scores, gt).auc - 8 / 9) < 1e-9


@settings(max_examples=200, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 12), st.booleans()), min_size=2, max_size=60))
def test_auc_matches_pair_counting(pairs):
    scores = np.array([p[0] for p in pairs], float) / 4
    gt = np.array([p[1] for p in pairs])
    if gt.all() or not gt.any():
        with pytest.raises(DegenerateLabels):
            roc_auc(scores, gt)
        return
    roc = roc_auc(scores, gt)
    assert abs(roc.auc - pair_auc(scores, gt)) < 1e-9
    pts = roc.points
    assert tuple(pts[0]) == (0.0, 0.0) and tuple(pts[-1]) == (1.0, 1.0)
    assert np.all(np.diff(pts[:, 0]) >= 0) and np.all(np.diff(pts[:, 1]) >= 0)
    assert roc_auc(np.exp(scores) * 3 + 1, gt).auc == roc.auc


def test_auc_errors():
    with pytest.raises(DegenerateLabels):
        roc_auc([1, 2], [True, True])
    with pytest.raises(LengthMismatch):
        roc_auc([1, 2, 3], [True, False])


@pytest.fixture(scope="module")
def bar_scene():
    cam = CameraModel.centered(80, 60)
    spec = sim.SceneSpec(sim.Bar(), AngularVelocity((0.0, 0.5, 0.3)), 0.2, 150, cam, 0)
    return sim.inject_ba_noise(sim.generate_scene(spec), 1.0, 1)


def test_fwl_identity_exactly_one(bar_scene):
    assert fwl(bar_scene.slice, Identity()) == 1.0
    assert fwl(bar_scene.slice, AngularVelocity((0, 0, 0))) == 1.0


def test_fwl_true_vs_negated(bar_scene):
    s, gt = bar_scene.slice, bar_scene.gt_motion
    f_true = fwl(s, gt)
    assert f_true > 1
    assert fwl(s, AngularVelocity(tuple(-np.array(gt.omega)))) <= f_true
    assert fwl(s, gt, mask=bar_scene.gt_labels) > 1


def test_fwl_time_shift_invariance(bar_scene):
    s, gt = bar_scene.slice, bar_scene.gt_motion
    assert fwl(s.shifted(12.5), gt) == pytest.approx(fwl(s, gt), rel=1e-9)


def test_fwl_degenerate():
    s = EventSlice(np.array([0]), np.array([0]), np.array([0.0]), np.array([1]), CameraModel(1, 1))
    with pytest.raises(ZeroIdentityVariance):
        fwl(s, AngularVelocity((0, 0, 1)))


def test_angvel_rms_examples():
    w = [AngularVelocity((0.1, 0.2, 0.3)), AngularVelocity((1, 2, 3))]
    assert angvel_rms(w, w) == 0.0
    assert angvel_rms([(0.1, 0, 0)], [(0, 0, 0)]) == pytest.approx(5.7296, abs=1e-4)
    with pytest.raises(LengthMismatch):
        angvel_rms([(0, 0, 0)], [])


@settings(max_examples=50, deadline=None)
@given(st.lists(st.tuples(*[st.floats(-5, 5) for _ in range(6)]), min_size=1, max_size=20))
def test_rms_at_least_mean_error(rows):
    a = np.array(rows)
    est, gt = a[:, :3], a[:, 3:]
    mean_err = math.degrees(np.mean(np.linalg.norm(est - gt, axis=1)))
    assert angvel_rms(est, gt) >= mean_err - 1e-9


def test_flow_epe_examples():
    cam = CameraModel(64, 48)
    d = 0.25
    gt = TileFlow.uniform(cam, (10.0, -4.0))
    assert flow_epe(gt, gt, d, sensor=cam) == (0.0, 0.0)
    biased = TileFlow.uniform(cam, (10.0 + 1 / d, -4.0))
    epe, out = flow_epe(biased, gt, d, sensor=cam)
    assert epe == pytest.approx(1.0) and out == 0.0
    dense_gt = np.zeros((48, 64, 2))
    dense_est = dense_gt.copy()
    dense_est[:, :32, 0] = 4 / d
    epe, out = flow_epe(dense_est, dense_gt, d)
    assert epe == pytest.approx(2.0) and out == 50.0
    mask = np.zeros((48, 64), bool)
    mask[:, :32] = True
    assert flow_epe(dense_est, dense_gt, d, mask=mask) == (pytest.approx(4.0), 100.0)
    with pytest.raises(GeometryMismatch):
        flow_epe(dense_est, np.zeros((10, 10, 2)), d)


def test_precision_recall_examples():
    gt = np.array([1, 1, 0, 1, 0], bool)
    assert precision_recall(gt, gt) == (1.0, 1.0)
    p, r = precision_recall(np.ones(5, bool), gt)
    assert r == 1.0 and p == pytest.approx(gt.mean())
    with pytest.raises(DegenerateLabels):
        precision_recall(gt, np.ones(5, bool))


def test_random_labels_precision_is_base_rate():
    rng = np.random.default_rng(0)
    gt = rng.random(4000) < 0.8
    precs = []
    for seed in range(20):
        r = np.random.default_rng(seed)
        lab = np.zeros(4000, bool)
        lab[r.permutation(4000)[: int(gt.sum())]] = True
        precs.append(precision_recall(lab, gt)[0])
    assert abs(np.mean(precs) - gt.mean()) < 0.01
