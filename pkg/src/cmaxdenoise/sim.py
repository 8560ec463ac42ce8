"""Synthetic labeled event streams: moving edges plus Poisson background activity.

Edges are line segments defined at the generator reference time
``t_start``. Each edge point emits a Poisson number of events whose
timestamps are stratified over the slice; an event's pixel is the rounded
position of its edge point at that time under the ground-truth motion.
Events whose rounded pixel, warped back to ``t_start``, lands more than
0.5 px from their edge are dropped, so the warped stream always lies on
the edge set.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Union

import numpy as np

from .core import CameraModel, EventSlice
from .warp import (
    AngularVelocity,
    Identity,
    MotionParams,
    TileFlow,
    _rotate_points,
    flow_at,
    warp_coords,
)


class EmptyScene(ValueError):
    pass


@dataclass(frozen=True)
class Bar:
    """Vertical bar of ``width`` px; both long sides are edges."""

    width: int = 10
    length_fraction: float = 0.5


@dataclass(frozen=True)
class Star:
    n_arms: int = 6
    inner_radius: float = 8.0
    outer_fraction: float = 0.45


@dataclass(frozen=True)
class TwoDepth:
    """Dense square frame (near) around a sparse small cross (far) at the center."""

    near_density: float = 1.0
    far_density: float = 0.15


Pattern = Union[Bar, Star, TwoDepth]

NEAR, FAR = 0, 1


@dataclass(frozen=True)
class SceneSpec:
    pattern: Pattern
    motion: MotionParams
    duration: float
    events_per_edge_pixel: float  # Hz per edge point
    sensor: CameraModel
    seed: int = 0
    t_start: float = 0.0

    def __post_init__(self):
        if not self.duration > 0:
            raise ValueError("duration must be positive")
        if self.events_per_edge_pixel < 0:
            raise ValueError("event rate must be non-negative")


@dataclass(frozen=True, eq=False)
class LabeledSlice:
    """Events with ground truth.

    ``gt_labels`` is True for signal. ``source`` holds the edge group of
    signal events (0 near/default, 1 far) and -1 for injected noise.
    """

    slice: EventSlice
    gt_labels: np.ndarray
    gt_motion: MotionParams
    injected_noise_rate: float
    source: np.ndarray
    t_start: float
    duration: float
    segments: np.ndarray = field(repr=False)
    segment_groups: np.ndarray = field(repr=False)

    def __len__(self) -> int:
        return len(self.slice)

    @property
    def noise_fraction(self) -> float:
        return float(np.mean(~self.gt_labels)) if len(self) else 0.0


def _segments(pattern: Pattern, sensor: CameraModel):
    w, h = sensor.width, sensor.height
    cx, cy = (w - 1) / 2.0, (h - 1) / 2.0
    segs, groups = [], []
    if isinstance(pattern, Bar):
        half = pattern.width // 2
        xc = int(round(cx))
        ln = int(round(pattern.length_fraction * h))
        y0 = int(round(cy - ln / 2))
        for x in (xc - half, xc - half + pattern.width):
            segs.append((x, y0, x, y0 + ln))
            groups.append(NEAR)
    elif isinstance(pattern, Star):
        r1 = pattern.outer_fraction * min(w, h)
        for k in range(pattern.n_arms):
            a = 2 * math.pi * k / pattern.n_arms + 0.1
            ca, sa = math.cos(a), math.sin(a)
            segs.append((cx + pattern.inner_radius * ca, cy + pattern.inner_radius * sa, cx + r1 * ca, cy + r1 * sa))
            groups.append(NEAR)
    elif isinstance(pattern, TwoDepth):
        m = 0.12 * min(w, h)
        corners = [(m, m), (w - 1 - m, m), (w - 1 - m, h - 1 - m), (m, h - 1 - m)]
        for i in range(4):
            (x0, y0), (x1, y1) = corners[i], corners[(i + 1) % 4]
            segs.append((x0, y0, x1, y1))
            groups.append(NEAR)
        arm = 0.15 * min(w, h)
        for k in range(4):
            a = math.pi / 2 * k + 0.3
            segs.append((cx + 3 * math.cos(a), cy + 3 * math.sin(a), cx + arm * math.cos(a), cy + arm * math.sin(a)))
            groups.append(FAR)
    else:
        raise TypeError(f"unknown pattern {pattern!r}")
    return np.array(segs, dtype=np.float64), np.array(groups, dtype=np.int64)


def _density(pattern: Pattern, group: int) -> float:
    if isinstance(pattern, TwoDepth):
        return pattern.near_density if group == NEAR else pattern.far_density
    return 1.0


def point_segment_distance(px, py, segs: np.ndarray) -> np.ndarray:
    """Distance of each point to its own segment (``segs`` row per point)."""
    x0, y0, x1, y1 = segs.T
    dx, dy = x1 - x0, y1 - y0
    ln2 = dx * dx + dy * dy
    u = np.clip(((px - x0) * dx + (py - y0) * dy) / np.where(ln2 > 0, ln2, 1.0), 0.0, 1.0)
    return np.hypot(px - (x0 + u * dx), py - (y0 + u * dy))


def distance_to_edges(px, py, segs: np.ndarray) -> np.ndarray:
    """Distance of each point to the nearest segment."""
    px = np.asarray(px, dtype=np.float64)
    py = np.asarray(py, dtype=np.float64)
    best = np.full(len(px), np.inf)
    for s in segs:
        best = np.minimum(best, point_segment_distance(px, py, np.broadcast_to(s, (len(px), 4))))
    return best


def _positions_at(xr, yr, dt, sensor: CameraModel, motion: MotionParams):
    """Where reference points (at dt = 0) are after time ``dt`` under ``motion``."""
    if isinstance(motion, Identity):
        return xr.copy(), yr.copy()
    if isinstance(motion, AngularVelocity):
        X = (xr - sensor.cx) / sensor.fx
        Y = (yr - sensor.cy) / sensor.fy
        xo, yo, zo = _rotate_points(motion.as_vector(), dt, X, Y)
        return sensor.fx * xo / zo + sensor.cx, sensor.fy * yo / zo + sensor.cy
    if isinstance(motion, TileFlow):
        # invert x' = x + dt * v(x) by fixed-point iteration
        x, y = xr.copy(), yr.copy()
        for _ in range(50):
            v = flow_at(motion, np.clip(x, 0, sensor.width - 1), np.clip(y, 0, sensor.height - 1))
            x = xr - dt * v[:, 0]
            y = yr - dt * v[:, 1]
        return x, y
    raise TypeError(f"unknown motion model {motion!r}")


def generate_scene(spec: SceneSpec) -> LabeledSlice:
    """Render the labeled event stream of ``spec`` (signal events only)."""
    sensor = spec.sensor
    rng = np.random.default_rng(spec.seed)
    segs, groups = _segments(spec.pattern, sensor)
    # edge points at 1 px spacing along each segment
    pts, seg_of = [], []
    for i, (x0, y0, x1, y1) in enumerate(segs):
        n = int(math.floor(math.hypot(x1 - x0, y1 - y0) + 1e-9)) + 1
        u = np.linspace(0.0, 1.0, n) if n > 1 else np.zeros(1)
        pts.append(np.stack([x0 + u * (x1 - x0), y0 + u * (y1 - y0)], axis=1))
        seg_of.append(np.full(n, i))
    pts = np.concatenate(pts)
    seg_of = np.concatenate(seg_of)
    inside = (pts[:, 0] >= -0.5) & (pts[:, 0] <= sensor.width - 0.5) & (pts[:, 1] >= -0.5) & (pts[:, 1] <= sensor.height - 0.5)
    if not inside.any():
        raise EmptyScene("no edge points intersect the sensor")
    pts, seg_of = pts[inside], seg_of[inside]

    rates = spec.events_per_edge_pixel * np.array([_density(spec.pattern, groups[s]) for s in seg_of])
    counts = rng.poisson(rates * spec.duration)
    owner = np.repeat(np.arange(len(pts)), counts)
    # stratified timestamps: j-th of n events jittered within its 1/n interval
    start = np.repeat(np.cumsum(counts) - counts, counts)
    j = np.arange(len(owner)) - start
    n_own = counts[owner]
    t = spec.t_start + (j + rng.random(len(owner))) * spec.duration / np.maximum(n_own, 1)
    dt = t - spec.t_start

    xr, yr = pts[owner, 0], pts[owner, 1]
    xs, ys = _positions_at(xr, yr, dt, sensor, spec.motion)
    ok = np.isfinite(xs) & np.isfinite(ys)
    xi = np.where(ok, np.rint(np.where(ok, xs, 0)), -1).astype(np.int64)
    yi = np.where(ok, np.rint(np.where(ok, ys, 0)), -1).astype(np.int64)
    ok &= (xi >= 0) & (xi < sensor.width) & (yi >= 0) & (yi < sensor.height)
    xi, yi, t, owner = xi[ok], yi[ok], t[ok], owner[ok]
    if len(t):
        xw, yw = warp_coords(xi, yi, t, spec.t_start, sensor, spec.motion)
        near = point_segment_distance(xw, yw, segs[seg_of[owner]]) <= 0.5
        xi, yi, t, owner = xi[near], yi[near], t[near], owner[near]
    if len(t) == 0:
        raise EmptyScene("scene produced no events on the sensor")
    p = rng.choice(np.array([-1, 1], dtype=np.int8), size=len(t))
    order = np.argsort(t, kind="stable")
    sl = EventSlice(xi[order], yi[order], t[order], p[order], sensor)
    return LabeledSlice(
        slice=sl,
        gt_labels=np.ones(len(t), dtype=bool),
        gt_motion=spec.motion,
        injected_noise_rate=0.0,
        source=groups[seg_of[owner[order]]],
        t_start=spec.t_start,
        duration=spec.duration,
        segments=segs,
        segment_groups=groups,
    )


def inject_ba_noise(labeled: LabeledSlice, rate: float, seed: int = 0) -> LabeledSlice:
    """Add homogeneous Poisson background activity at ``rate`` Hz per pixel."""
    if rate < 0:
        raise ValueError("noise rate must be non-negative")
    if rate == 0:
        return labeled
    s = labeled.slice
    sensor = s.sensor
    rng = np.random.default_rng(seed)
    n = int(rng.poisson(rate * labeled.duration * sensor.num_pixels))
    nx = rng.integers(0, sensor.width, n)
    ny = rng.integers(0, sensor.height, n)
    nt = labeled.t_start + rng.random(n) * labeled.duration
    npol = rng.choice(np.array([-1, 1], dtype=np.int8), size=n)
    x = np.concatenate([s.x, nx])
    y = np.concatenate([s.y, ny])
    t = np.concatenate([s.t, nt])
    p = np.concatenate([s.p, npol])
    gt = np.concatenate([labeled.gt_labels, np.zeros(n, dtype=bool)])
    src = np.concatenate([labeled.source, np.full(n, -1, dtype=np.int64)])
    order = np.argsort(t, kind="stable")
    merged = EventSlice(x[order], y[order], t[order], p[order], sensor)
    return replace(
        labeled,
        slice=merged,
        gt_labels=gt[order],
        source=src[order],
        injected_noise_rate=labeled.injected_noise_rate + rate,
    )


def noise_rate_for_fraction(labeled: LabeledSlice, eta: float) -> float:
    """BA rate (Hz/px) whose expected share of the merged stream is ``eta``."""
    if not 0 <= eta < 1:
        raise ValueError("eta must be in [0, 1)")
    n_signal = int(labeled.gt_labels.sum())
    return eta / (1 - eta) * n_signal / (labeled.duration * labeled.slice.sensor.num_pixels)


def star_scene(
    noise_fraction: float = 0.15,
    seed: int = 0,
    n_events: int = 50_000,
    omega=(0.0, 0.0, 2.0),
    size: int = 200,
    duration: float = 0.2,
    n_arms: int = 6,
) -> LabeledSlice:
    """The standard benchmark: a rotating star with BA noise making up ``noise_fraction``."""
    sensor = CameraModel.centered(size, size)
    pattern = Star(n_arms=n_arms)
    segs, _ = _segments(pattern, sensor)
    edge_px = sum(int(math.floor(math.hypot(x1 - x0, y1 - y0))) + 1 for x0, y0, x1, y1 in segs)
    n_signal = n_events * (1 - noise_fraction)
    # the on-edge check thins about 6% of the candidates
    rate = n_signal / (0.94 * edge_px * duration)
    spec = SceneSpec(pattern, AngularVelocity(tuple(omega)), duration, rate, sensor, seed)
    scene = generate_scene(spec)
    if noise_fraction > 0:
        scene = inject_ba_noise(scene, noise_rate_for_fraction(scene, noise_fraction), seed + 7919)
    return scene


def two_depth_scene(
    noise_fraction: float = 0.15,
    seed: int = 0,
    size: int = 120,
    rate: float = 400.0,
    near_density: float = 1.0,
    far_density: float = 0.15,
    omega=(0.0, 0.0, 1.5),
    duration: float = 0.2,
) -> LabeledSlice:
    sensor = CameraModel.centered(size, size)
    spec = SceneSpec(TwoDepth(near_density, far_density), AngularVelocity(tuple(omega)), duration, rate, sensor, seed)
    scene = generate_scene(spec)
    if noise_fraction > 0:
        scene = inject_ba_noise(scene, noise_rate_for_fraction(scene, noise_fraction), seed + 7919)
    return scene
