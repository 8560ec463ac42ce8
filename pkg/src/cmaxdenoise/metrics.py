"""Evaluation metrics for denoising and motion estimation."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import EventSlice, LabelSet
from .iwe import splat_image, variance_objective
from .warp import Identity, MotionParams, TileFlow, dense_flow, in_sensor, warp_coords


class DegenerateLabels(ValueError):
    """Ground truth contains a single class."""


class ZeroIdentityVariance(ArithmeticError):
    pass


class LengthMismatch(ValueError):
    pass


class GeometryMismatch(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class RocCurve:
    fpr: np.ndarray
    tpr: np.ndarray
    thresholds: np.ndarray
    auc: float

    @property
    def points(self) -> np.ndarray:
        return np.stack([self.fpr, self.tpr], axis=1)


def _gt_bool(gt) -> np.ndarray:
    gt = gt.labels if isinstance(gt, LabelSet) else gt
    return np.asarray(gt, dtype=bool)


def roc_auc(scores, gt_labels) -> RocCurve:
    """ROC over every distinct score threshold (signal is the positive class).

    Equal scores form one sweep point, so the trapezoidal area equals the
    probability that a signal event outscores a noise event, ties counted 1/2.
    """
    scores = np.asarray(scores, dtype=np.float64)
    gt = _gt_bool(gt_labels)
    if scores.shape != gt.shape:
        raise LengthMismatch("scores and labels differ in length")
    n_pos = int(gt.sum())
    n_neg = len(gt) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise DegenerateLabels("ROC needs both signal and noise ground-truth labels")
    order = np.argsort(-scores, kind="stable")
    s = scores[order]
    g = gt[order]
    tp = np.cumsum(g)
    fp = np.cumsum(~g)
    last = np.r_[np.flatnonzero(s[1:] != s[:-1]), len(s) - 1]
    tpr = np.r_[0.0, tp[last] / n_pos]
    fpr = np.r_[0.0, fp[last] / n_neg]
    auc = float(np.sum((fpr[1:] - fpr[:-1]) * (tpr[1:] + tpr[:-1]) / 2.0))
    return RocCurve(fpr, tpr, np.r_[np.inf, s[last]], auc)


def precision_recall(labels, gt) -> tuple[float, float]:
    pred = _gt_bool(labels)
    gt = _gt_bool(gt)
    if pred.shape != gt.shape:
        raise LengthMismatch("labels and ground truth differ in length")
    if gt.all() or not gt.any():
        raise DegenerateLabels("ground truth contains a single class")
    tp = int(np.sum(pred & gt))
    n_pred = int(pred.sum())
    precision = tp / n_pred if n_pred else 0.0
    return precision, tp / int(gt.sum())


def _masked_variance(s: EventSlice, params: MotionParams, mask, epsilon: float) -> float:
    mask = np.ones(len(s), dtype=bool) if mask is None else np.asarray(mask, dtype=bool)
    if not mask.any():
        raise ValueError("mask selects no events")
    xw, yw = warp_coords(s.x[mask], s.y[mask], s.t[mask], s.t_ref, s.sensor, params)
    inb = in_sensor(xw, yw, s.sensor)
    return variance_objective(splat_image(xw[inb], yw[inb], s.sensor, epsilon))


def fwl(s: EventSlice, params: MotionParams, mask=None, epsilon: float = 1.0) -> float:
    """IWE variance under ``params`` relative to the identity warp (same events)."""
    base = _masked_variance(s, Identity(), mask, epsilon)
    if base == 0:
        raise ZeroIdentityVariance("identity-warp IWE is constant")
    if isinstance(params, Identity):
        return 1.0
    return _masked_variance(s, params, mask, epsilon) / base


def angvel_rms(estimates, gts) -> float:
    """RMS of the angular-velocity error norms, in deg/s."""
    est = [_omega(e) for e in estimates]
    gt = [_omega(g) for g in gts]
    if len(est) != len(gt) or len(est) == 0:
        raise LengthMismatch("need equally many (>= 1) estimates and ground truths")
    est = np.asarray(est, dtype=np.float64).reshape(len(est), 3)
    gt = np.asarray(gt, dtype=np.float64).reshape(len(gt), 3)
    err = np.linalg.norm(est - gt, axis=1)
    return float(math.degrees(math.sqrt(np.mean(err**2))))


def _omega(w):
    return w.as_vector() if hasattr(w, "as_vector") else w


def flow_epe(estimate, gt, duration: float, mask=None, sensor=None, outlier_px: float = 3.0) -> tuple[float, float]:
    """Mean endpoint error (px) of flow * duration over ``mask`` and the share (%) above ``outlier_px``.

    ``estimate`` and ``gt`` are :class:`TileFlow` or dense (H, W, 2) arrays.
    """
    dense_e = _dense(estimate, sensor, gt)
    dense_g = _dense(gt, sensor, estimate)
    if dense_e.shape != dense_g.shape:
        raise GeometryMismatch(f"flow fields differ in shape: {dense_e.shape} vs {dense_g.shape}")
    m = np.ones(dense_e.shape[:2], dtype=bool) if mask is None else np.asarray(mask, dtype=bool)
    if m.shape != dense_e.shape[:2]:
        raise GeometryMismatch("mask does not match the flow geometry")
    err = np.linalg.norm((dense_e - dense_g)[m] * duration, axis=-1)
    if err.size == 0:
        raise ValueError("mask selects no pixels")
    return float(err.mean()), float(100.0 * np.mean(err > outlier_px))


def _dense(flow, sensor, other):
    if isinstance(flow, TileFlow):
        if sensor is None:
            if isinstance(other, np.ndarray):
                from .core import CameraModel

                sensor = CameraModel(other.shape[1], other.shape[0])
            else:
                raise GeometryMismatch("sensor geometry needed to densify two tile flows")
        if not flow.fits(sensor):
            raise GeometryMismatch("tile grid does not match the sensor")
        return dense_flow(flow, sensor)
    arr = np.asarray(flow, dtype=np.float64)
    if arr.ndim != 3 or arr.shape[2] != 2:
        raise GeometryMismatch("dense flow must have shape (H, W, 2)")
    return arr
