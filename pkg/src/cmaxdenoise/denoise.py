"""Per-event scores, rank-threshold classification and the joint denoise/motion loop."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable

import numpy as np

from .cmax import CmaxStepper, FitProblem, MotionEstimate, MotionEstimator, OptimizerConfig, param_change
from .core import EventSlice, LabelSet, signal_count
from .iwe import splat_image
from .warp import MotionParams, WarpedEvents, in_sensor, warp_coords
from . import _kernels


class MissingPreviousLabels(ValueError):
    pass


class ScoreKind(enum.Enum):
    LOCAL_CONTRAST = "local_contrast"  # IWE value at the warped event
    SIGNAL_RATIO = "signal_ratio"  # share of that value coming from signal-labeled events


def _sample(img: np.ndarray, xw: np.ndarray, yw: np.ndarray, inb: np.ndarray) -> np.ndarray:
    out = np.zeros(len(xw))
    if inb.any():
        vals = np.empty(int(inb.sum()))
        _kernels.sample_bilinear(img, xw[inb], yw[inb], vals)
        out[inb] = vals
    return out


@dataclass(frozen=True, eq=False)
class SplitIwe:
    """IWEs of the signal and noise subsets under one warp, with every event's warped position."""

    signal_image: np.ndarray
    noise_image: np.ndarray
    warped: WarpedEvents

    @property
    def image(self) -> np.ndarray:
        return self.signal_image + self.noise_image

    def samples(self):
        """(I_k, I^s_k, I^n_k) at each event's warped position; 0 when out of bounds."""
        w = self.warped
        i_s = _sample(self.signal_image, w.x, w.y, w.in_bounds)
        i_n = _sample(self.noise_image, w.x, w.y, w.in_bounds)
        return _sample(self.image, w.x, w.y, w.in_bounds), i_s, i_n


def split_iwe(s: EventSlice, params: MotionParams, signal: np.ndarray, epsilon: float, signal_render=None) -> SplitIwe:
    """Warp the signal and noise subsets separately and splat each into its own IWE.

    ``signal_render`` may carry a precomputed ``(x, y, in_bounds, image)`` of
    the signal subset under ``params``.
    """
    signal = np.asarray(signal, dtype=bool)
    sensor = s.sensor
    cfg = OptimizerConfig(epsilon=epsilon)
    xw = np.empty(len(s))
    yw = np.empty(len(s))
    inb = np.zeros(len(s), dtype=bool)
    images = []
    for part, cached in ((signal, signal_render), (~signal, None)):
        if not part.any():
            images.append(np.zeros(sensor.shape))
            continue
        if cached is None:
            cached = FitProblem(s, part, cfg).render(params)
        px, py, pin, img = cached
        xw[part], yw[part], inb[part] = px, py, pin
        images.append(img)
    return SplitIwe(images[0], images[1], WarpedEvents(xw, yw, inb))


def score_events(
    s: EventSlice,
    params: MotionParams,
    labels_prev: LabelSet | np.ndarray | None = None,
    kind: ScoreKind = ScoreKind.LOCAL_CONTRAST,
    epsilon: float = 1.0,
) -> np.ndarray:
    """Score every event by sampling the IWE at its warped position.

    With a previous split, the full IWE is the sum of the signal and noise
    IWEs; ``SIGNAL_RATIO`` needs that split. An event's own splat is part of
    its score. Out-of-bounds events score 0.
    """
    kind = ScoreKind(kind)
    if labels_prev is None:
        if kind is ScoreKind.SIGNAL_RATIO:
            raise MissingPreviousLabels("signal-ratio scores need a previous signal/noise split")
        xw, yw = warp_coords(s.x, s.y, s.t, s.t_ref, s.sensor, params)
        inb = in_sensor(xw, yw, s.sensor)
        img = splat_image(xw[inb], yw[inb], s.sensor, epsilon)
        return _sample(img, xw, yw, inb)
    signal = labels_prev.labels if isinstance(labels_prev, LabelSet) else np.asarray(labels_prev, dtype=bool)
    return _scores_from_split(split_iwe(s, params, signal, epsilon), kind)


def _scores_from_split(split: SplitIwe, kind: ScoreKind) -> np.ndarray:
    i_all, i_s, _ = split.samples()
    if kind is ScoreKind.LOCAL_CONTRAST:
        return i_all
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(i_all > 0, i_s / i_all, 0.0)


def classify(scores, tau: float, t: np.ndarray | None = None) -> LabelSet:
    """Label the ceil(tau * N) highest-scoring events as signal.

    Ties go to the earlier timestamp, then the lower index. The threshold is
    the score of the last admitted event.
    """
    scores = np.asarray(scores, dtype=np.float64)
    n = len(scores)
    k = signal_count(n, tau)
    t = np.zeros(n) if t is None else np.asarray(t, dtype=np.float64)
    order = np.lexsort((np.arange(n), t, -scores))
    labels = np.zeros(n, dtype=bool)
    labels[order[:k]] = True
    threshold = float(scores[order[k - 1]]) if k > 0 else float("nan")
    return LabelSet(scores, labels, threshold, float(tau), source="rank")


def random_split(n: int, tau: float, rng: np.random.Generator) -> np.ndarray:
    labels = np.zeros(n, dtype=bool)
    labels[rng.permutation(n)[: signal_count(n, tau)]] = True
    return labels


@dataclass(frozen=True)
class IterationRecord:
    iteration: int
    objective: float
    threshold: float
    signal_count: int
    param_change: float
    params: tuple


@dataclass(frozen=True, eq=False)
class JointResult:
    labels: LabelSet
    motion: MotionEstimate
    iterations: int
    history: list[IterationRecord] = field(default_factory=list)
    initial_labels: np.ndarray | None = None

    def __eq__(self, other) -> bool:
        if not isinstance(other, JointResult):
            return NotImplemented
        return (
            self.labels == other.labels
            and self.motion.params.as_vector().tobytes() == other.motion.params.as_vector().tobytes()
            and self.motion == other.motion
            and self.iterations == other.iterations
            and self.history == other.history
            and np.array_equal(self.initial_labels, other.initial_labels)
        )


def joint_estimate(
    s: EventSlice,
    tau: float,
    kind: ScoreKind = ScoreKind.LOCAL_CONTRAST,
    cfg: OptimizerConfig | None = None,
    seed: int = 0,
    estimator: MotionEstimator | None = None,
    callback: Callable[[IterationRecord, LabelSet], None] | None = None,
) -> JointResult:
    """Alternate motion updates on the current signal set with re-scoring and re-ranking.

    Starts from a seeded random split with signal fraction ``tau``; each
    outer iteration takes one motion update fitted on the signal events,
    scores all events under the new motion and re-classifies at ``tau``.
    Stops when the motion change falls below ``cfg.param_tolerance``.
    """
    cfg = cfg or OptimizerConfig()
    kind = ScoreKind(kind)
    n = len(s)
    if n == 0:
        raise ValueError("cannot denoise an empty slice")
    rng = np.random.default_rng(seed)
    signal = random_split(n, tau, rng)
    initial = signal.copy()
    labels = LabelSet(np.zeros(n), signal, float("nan"), float(tau), source="random")
    est = CmaxStepper(cfg) if estimator is None else estimator
    params = cfg.initial_params
    history: list[IterationRecord] = []
    converged = False
    value = float("nan")
    it = 0
    for it in range(1, cfg.max_iters + 1):
        new = est(s, signal, params)
        cached = None
        if isinstance(est, CmaxStepper) and est.last is not None and est.last.params is new and np.array_equal(est.last_mask, signal):
            cached = est.last
            value = cached.value
            render = (cached.x, cached.y, cached.in_bounds, cached.image)
        else:
            prob = FitProblem(s, signal, cfg)
            ev = prob.evaluate(new)
            value = ev.value
            render = (ev.x, ev.y, ev.in_bounds, ev.image)
        change = param_change(new, params)
        split = split_iwe(s, new, signal, cfg.epsilon, signal_render=render)
        scores = _scores_from_split(split, kind)
        labels = classify(scores, tau, s.t)
        rec = IterationRecord(it, value, labels.threshold, labels.num_signal, change, tuple(new.as_vector().tolist()))
        history.append(rec)
        if callback is not None:
            callback(rec, labels)
        params = new
        signal = labels.labels
        if change < cfg.param_tolerance:
            converged = True
            break
    motion = MotionEstimate(params, value, it, converged)
    return JointResult(labels, motion, it, history, initial)


def equivalence_check(scores, noise_iwe_samples, t1: float) -> bool:
    """Whether thresholding I_k at ``t1`` and thresholding I^s_k / I_k at
    1 - I^n_k / t1 admit the same events.

    Evaluated in exact rational arithmetic on the given floats. Where
    I^n_k = 0 the induced threshold collapses to 1; the rule is then taken
    as its limit for vanishing noise, i.e. I_k > t1.
    """
    if not t1 > 0:
        raise ValueError("threshold must be positive")
    T1 = Fraction(t1)
    for c, n in zip(np.asarray(scores, dtype=np.float64), np.asarray(noise_iwe_samples, dtype=np.float64)):
        c, n = Fraction(float(c)), Fraction(float(n))
        rule1 = c > T1
        if n == 0 or c == 0:
            rule2 = c > T1
        else:
            ratio = (c - n) / c
            rule2 = ratio > 1 - n / T1
        if rule1 != rule2:
            return False
    return True
