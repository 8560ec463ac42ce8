"""Contrast maximization: fit motion parameters by gradient ascent on an IWE objective.

Gradients are central finite differences. Each update is a diagonally
preconditioned ascent step (gradient divided by the magnitude of the
per-parameter curvature from the same stencil, capped at a maximum step) followed by a backtracking line search that only
accepts strict increases of the objective.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Protocol

import numpy as np

from . import _kernels
from .core import EventSlice
from .iwe import OBJECTIVES, splat_image
from .warp import (
    AngularVelocity,
    Identity,
    MotionParams,
    NonFiniteResult,
    TileFlow,
    in_sensor,
    tile_weights,
    warp_coords,
)


class NoEventsSelected(ValueError):
    pass


class DegenerateObjective(ArithmeticError):
    """The objective does not vary across the finite-difference stencil."""


@dataclass(frozen=True)
class OptimizerConfig:
    max_iters: int = 100
    param_tolerance: float = 1e-4
    omega_fd_step: float = 1e-3  # rad/s
    flow_fd_step: float = 1e-1  # px/s
    line_search_shrink: float = 0.5
    max_backtracks: int = 20
    max_omega_step: float = 0.5  # rad/s per update
    max_flow_step: float = 50.0  # px/s per update
    initial_params: MotionParams = field(default_factory=AngularVelocity)
    objective: str = "gradient"
    epsilon: float = 1.0

    def __post_init__(self):
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        for name in ("param_tolerance", "omega_fd_step", "flow_fd_step", "max_omega_step", "max_flow_step", "epsilon"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if not 0 < self.line_search_shrink < 1:
            raise ValueError("line_search_shrink must be in (0, 1)")
        if self.objective not in OBJECTIVES:
            raise ValueError(f"objective must be one of {sorted(OBJECTIVES)}")

    def fd_step(self, params: MotionParams) -> float:
        return self.flow_fd_step if isinstance(params, TileFlow) else self.omega_fd_step

    def max_step(self, params: MotionParams) -> float:
        return self.max_flow_step if isinstance(params, TileFlow) else self.max_omega_step


@dataclass(frozen=True)
class MotionEstimate:
    params: MotionParams
    objective_value: float
    iterations_used: int
    converged: bool


@dataclass(frozen=True, eq=False)
class Evaluation:
    """Objective value at ``params`` plus the intermediate warp and image."""

    params: MotionParams
    value: float
    x: np.ndarray
    y: np.ndarray
    in_bounds: np.ndarray
    image: np.ndarray


class MotionEstimator(Protocol):
    """Anything that refines motion from the events selected by ``mask``."""

    def __call__(self, s: EventSlice, mask: np.ndarray, params: MotionParams) -> MotionParams: ...


class FitProblem:
    """The objective restricted to a fixed subset of events."""

    def __init__(self, s: EventSlice, mask: Optional[np.ndarray], cfg: OptimizerConfig):
        if mask is None:
            mask = np.ones(len(s), dtype=bool)
        mask = np.asarray(mask, dtype=bool)
        if mask.shape != (len(s),):
            raise ValueError("mask length must match the slice")
        if not mask.any():
            raise NoEventsSelected("subset selects no events")
        self.slice = s
        self.mask = mask
        self.cfg = cfg
        self.sensor = s.sensor
        self.x = np.ascontiguousarray(s.x[mask])
        self.y = np.ascontiguousarray(s.y[mask])
        self.t = np.ascontiguousarray(s.t[mask])
        self.t_ref = s.t_ref
        self.objective = OBJECTIVES[cfg.objective]
        self._members = None

    def render(self, params: MotionParams):
        """Warped coordinates, bounds flags and IWE of the subset."""
        xw, yw = warp_coords(self.x, self.y, self.t, self.t_ref, self.sensor, params)
        inb = in_sensor(xw, yw, self.sensor)
        img = splat_image(xw[inb], yw[inb], self.sensor, self.cfg.epsilon)
        return xw, yw, inb, img

    def evaluate(self, params: MotionParams) -> Evaluation:
        xw, yw, inb, img = self.render(params)
        return Evaluation(params, float(self.objective(img)), xw, yw, inb, img)

    # finite differences -------------------------------------------------

    def stencil(self, base: Evaluation, h: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Objective changes (f(+h) - f0, f(-h) - f0) per parameter, plus an active flag."""
        params = base.params
        if isinstance(params, TileFlow):
            return self._tile_stencil(base, h)
        theta = params.as_vector()
        up = np.zeros(len(theta))
        down = np.zeros(len(theta))
        for i in range(len(theta)):
            e = np.zeros(len(theta))
            e[i] = h
            up[i] = self.evaluate(params.with_vector(theta + e)).value - base.value
            down[i] = self.evaluate(params.with_vector(theta - e)).value - base.value
        return up, down, np.ones(len(theta), dtype=bool)

    def _tile_members(self, params: TileFlow):
        if self._members is None or self._members[0] != (params.grid.shape, params.tile):
            rows, cols, w = tile_weights(params, self.x, self.y)
            nc = params.grid.shape[1]
            tid = (rows * nc + cols).ravel()
            ev = np.repeat(np.arange(len(self.x)), 4)
            wt = w.ravel()
            keep = wt > 0
            tid, ev, wt = tid[keep], ev[keep], wt[keep]
            order = np.argsort(tid, kind="stable")
            tid, ev, wt = tid[order], ev[order], wt[order]
            bounds = np.searchsorted(tid, np.arange(params.grid.shape[0] * nc + 1))
            members = [(ev[a:b], wt[a:b]) for a, b in zip(bounds[:-1], bounds[1:])]
            self._members = ((params.grid.shape, params.tile), members)
        return self._members[1]

    def _tile_stencil(self, base: Evaluation, h: float):
        params = base.params
        members = self._tile_members(params)
        n = params.grid.size
        up = np.zeros(n)
        down = np.zeros(n)
        active = np.zeros(n, dtype=bool)
        img = base.image
        work = img.copy()
        kind = 0 if self.cfg.objective == "gradient" else 1
        radius = _kernels.kernel_radius(self.cfg.epsilon)
        mass = float(np.count_nonzero(base.in_bounds))
        hh, ww = img.shape
        norm = float((hh - 2) * (ww - 2)) if kind == 0 else 1.0
        dt = self.t - self.t_ref
        for j, (ev, wt) in enumerate(members):
            if len(ev) == 0:
                continue
            ox = base.x[ev]
            oy = base.y[ev]
            shift = h * wt * dt[ev]
            for comp in range(2):
                k = 2 * j + comp
                active[k] = True
                for sign, out in ((1.0, up), (-1.0, down)):
                    nx = ox + sign * shift if comp == 0 else ox
                    ny = oy + sign * shift if comp == 1 else oy
                    d = _kernels.local_delta(img, work, ox, oy, nx, ny, self.cfg.epsilon, radius, kind, mass)
                    out[k] = d / norm
        return up, down, active


def fd_gradient(s: EventSlice, subset, params: MotionParams, cfg: OptimizerConfig, step: float | None = None) -> np.ndarray:
    """Central finite-difference gradient of the objective w.r.t. the parameter vector."""
    prob = FitProblem(s, subset, cfg)
    h = cfg.fd_step(params) if step is None else step
    up, down, _ = prob.stencil(prob.evaluate(params), h)
    return (up - down) / (2 * h)


def _ascent_direction(up, down, active, h, max_step, f0):
    scale = max(abs(f0), np.finfo(float).tiny)
    if not np.any(active) or np.all(np.abs(np.concatenate([up[active], down[active]])) <= 8 * np.finfo(float).eps * scale):
        raise DegenerateObjective("objective is constant across the finite-difference stencil")
    g = (up - down) / (2 * h)
    curv = (up + down) / (h * h)
    g[~active] = 0.0
    # |curvature| keeps steps on the local scale of the objective even where it is convex
    denom = np.maximum(np.abs(curv), np.abs(g) / max_step)
    with np.errstate(divide="ignore", invalid="ignore"):
        step = np.where(denom > 0, g / denom, 0.0)
    return step


class CmaxStepper:
    """One line-searched ascent step per call; usable as a :class:`MotionEstimator`.

    After each call ``last`` holds the :class:`Evaluation` at the returned
    parameters (computed on the events selected by the mask), so callers can
    reuse the warped subset and its image.
    """

    def __init__(self, cfg: OptimizerConfig | None = None):
        self.cfg = cfg or OptimizerConfig()
        self.last: Evaluation | None = None
        self.last_mask: np.ndarray | None = None
        self._problem: FitProblem | None = None

    def problem(self, s: EventSlice, mask) -> FitProblem:
        p = self._problem
        if p is None or p.slice is not s or not np.array_equal(p.mask, mask if mask is not None else np.ones(len(s), bool)):
            p = FitProblem(s, mask, self.cfg)
            self._problem = p
        return p

    def __call__(self, s: EventSlice, mask, params: MotionParams) -> MotionParams:
        prob = self.problem(s, mask)
        ev = self.step(prob, params)
        return ev.params

    def step(self, prob: FitProblem, params: MotionParams) -> Evaluation:
        cfg = self.cfg
        base = prob.evaluate(params)
        self.last, self.last_mask = base, prob.mask
        if isinstance(params, Identity):
            raise DegenerateObjective("identity motion has no parameters to optimize")
        h = cfg.fd_step(params)
        up, down, active = prob.stencil(base, h)
        direction = _ascent_direction(up, down, active, h, cfg.max_step(params), base.value)
        if not np.any(direction):
            return base
        theta = params.as_vector()
        alpha = 1.0
        for _ in range(cfg.max_backtracks + 1):
            cand = params.with_vector(theta + alpha * direction)
            try:
                ev = prob.evaluate(cand)
            except NonFiniteResult:
                ev = None
            if ev is not None and ev.value > base.value:
                self.last = ev
                return ev
            alpha *= cfg.line_search_shrink
        return base


def one_step(s: EventSlice, subset, params: MotionParams, cfg: OptimizerConfig | None = None) -> MotionParams:
    """Single accepted ascent update of ``params`` fitted on the ``subset`` events."""
    return CmaxStepper(cfg)(s, subset, params)


def param_change(a: MotionParams, b: MotionParams) -> float:
    d = a.as_vector() - b.as_vector()
    return float(np.max(np.abs(d))) if d.size else 0.0


def estimate_motion(
    s: EventSlice,
    subset=None,
    cfg: OptimizerConfig | None = None,
    callback: Callable[[int, Evaluation], None] | None = None,
) -> MotionEstimate:
    """Iterate ascent steps from ``cfg.initial_params`` until the parameter change
    drops below ``cfg.param_tolerance`` or ``cfg.max_iters`` is reached."""
    cfg = cfg or OptimizerConfig()
    stepper = CmaxStepper(cfg)
    prob = stepper.problem(s, subset)
    params = cfg.initial_params
    converged = False
    it = 0
    ev = None
    for it in range(1, cfg.max_iters + 1):
        ev = stepper.step(prob, params)
        if callback is not None:
            callback(it, ev)
        change = param_change(ev.params, params)
        params = ev.params
        if change < cfg.param_tolerance:
            converged = True
            break
    return MotionEstimate(params, ev.value, it, converged)
