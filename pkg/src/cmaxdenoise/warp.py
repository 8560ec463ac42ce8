"""Motion models and the event warp that transports events to ``t_ref``."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

import numpy as np

from .core import CameraModel, EventSlice


class NonFiniteResult(ArithmeticError):
    """A warp produced non-finite coordinates (or a point behind the camera)."""


@dataclass(frozen=True)
class Identity:
    def as_vector(self) -> np.ndarray:
        return np.zeros(0)

    def with_vector(self, v) -> "Identity":
        return self


@dataclass(frozen=True)
class AngularVelocity:
    """Rotational ego-motion, angular velocity in rad/s (camera frame)."""

    omega: tuple[float, float, float] = (0.0, 0.0, 0.0)

    def __post_init__(self):
        omega = tuple(float(w) for w in self.omega)
        if len(omega) != 3:
            raise ValueError("omega must have 3 components")
        if not all(math.isfinite(w) for w in omega):
            raise ValueError("omega must be finite")
        object.__setattr__(self, "omega", omega)

    def as_vector(self) -> np.ndarray:
        return np.array(self.omega, dtype=np.float64)

    def with_vector(self, v) -> "AngularVelocity":
        return AngularVelocity(tuple(float(a) for a in v))


@dataclass(frozen=True, eq=False)
class TileFlow:
    """Optical flow on a coarse tile grid, bilinearly interpolated between tile centers.

    ``grid`` has shape (rows, cols, 2) holding (vx, vy) in px/s.
    """

    grid: np.ndarray
    tile: int = 16

    def __post_init__(self):
        g = np.array(self.grid, dtype=np.float64)
        if g.ndim != 3 or g.shape[2] != 2:
            raise ValueError("grid must have shape (rows, cols, 2)")
        if self.tile < 1:
            raise ValueError("tile size must be >= 1")
        if not np.all(np.isfinite(g)):
            raise ValueError("flow grid must be finite")
        g.setflags(write=False)
        object.__setattr__(self, "grid", g)

    @classmethod
    def zeros(cls, sensor: CameraModel, tile: int = 16) -> "TileFlow":
        return cls(np.zeros(grid_shape(sensor, tile) + (2,)), tile)

    @classmethod
    def uniform(cls, sensor: CameraModel, v, tile: int = 16) -> "TileFlow":
        g = np.zeros(grid_shape(sensor, tile) + (2,))
        g[...] = np.asarray(v, dtype=np.float64)
        return cls(g, tile)

    def as_vector(self) -> np.ndarray:
        return self.grid.ravel().copy()

    def with_vector(self, v) -> "TileFlow":
        return TileFlow(np.asarray(v, dtype=np.float64).reshape(self.grid.shape), self.tile)

    def __eq__(self, other) -> bool:
        if not isinstance(other, TileFlow):
            return NotImplemented
        return self.tile == other.tile and np.array_equal(self.grid, other.grid)

    def fits(self, sensor: CameraModel) -> bool:
        return self.grid.shape[:2] == grid_shape(sensor, self.tile)


MotionParams = Union[Identity, AngularVelocity, TileFlow]


def grid_shape(sensor: CameraModel, tile: int) -> tuple[int, int]:
    return (-(-sensor.height // tile), -(-sensor.width // tile))


@dataclass(frozen=True, eq=False)
class WarpedEvents:
    x: np.ndarray
    y: np.ndarray
    in_bounds: np.ndarray

    def __len__(self) -> int:
        return len(self.x)

    @property
    def coords(self) -> np.ndarray:
        return np.stack([self.x, self.y], axis=1)


def _axis_weights(pos: np.ndarray, tile: int, n: int):
    """Lower node index and upper-node weight along one grid axis."""
    g = (pos - (tile - 1) / 2.0) / tile
    if n == 1:
        return np.zeros(len(pos), dtype=np.int64), np.zeros(len(pos))
    g = np.clip(g, 0.0, n - 1.0)
    i0 = np.minimum(np.floor(g).astype(np.int64), n - 2)
    return i0, g - i0


def tile_weights(params: TileFlow, x: np.ndarray, y: np.ndarray):
    """Bilinear stencil of each query point on the tile grid.

    Returns ``(rows, cols, weights)`` each of shape (N, 4); corners ordered
    (r0,c0), (r0,c1), (r1,c0), (r1,c1).
    """
    nr, nc = params.grid.shape[:2]
    c0, wx = _axis_weights(np.asarray(x, dtype=np.float64), params.tile, nc)
    r0, wy = _axis_weights(np.asarray(y, dtype=np.float64), params.tile, nr)
    c1 = np.minimum(c0 + 1, nc - 1)
    r1 = np.minimum(r0 + 1, nr - 1)
    rows = np.stack([r0, r0, r1, r1], axis=1)
    cols = np.stack([c0, c1, c0, c1], axis=1)
    w = np.stack([(1 - wy) * (1 - wx), (1 - wy) * wx, wy * (1 - wx), wy * wx], axis=1)
    return rows, cols, w


def flow_at(params: TileFlow, x, y=None) -> np.ndarray:
    """Flow vector(s) at pixel position(s); constant extrapolation past the outer tile centers.

    Accepts ``flow_at(p, (x, y))`` for one point or ``flow_at(p, xs, ys)``
    for arrays (returns shape (N, 2)).
    """
    single = y is None
    if single:
        x, y = x
    xs = np.atleast_1d(np.asarray(x, dtype=np.float64))
    ys = np.atleast_1d(np.asarray(y, dtype=np.float64))
    rows, cols, w = tile_weights(params, xs, ys)
    v = np.einsum("nk,nkc->nc", w, params.grid[rows, cols])
    return v[0] if single else v


def dense_flow(params: TileFlow, sensor: CameraModel) -> np.ndarray:
    """Per-pixel flow image of shape (height, width, 2)."""
    yy, xx = np.mgrid[0 : sensor.height, 0 : sensor.width]
    return flow_at(params, xx.ravel(), yy.ravel()).reshape(sensor.height, sensor.width, 2)


def so3_exp(phi: np.ndarray) -> np.ndarray:
    """Rotation matrices exp(phi^) for an (N, 3) array of rotation vectors."""
    phi = np.atleast_2d(np.asarray(phi, dtype=np.float64))
    th2 = np.einsum("ni,ni->n", phi, phi)
    th = np.sqrt(th2)
    small = th < 1e-8
    safe = np.where(small, 1.0, th)
    a = np.where(small, 1.0 - th2 / 6.0, np.sin(safe) / safe)
    b = np.where(small, 0.5 - th2 / 24.0, (1.0 - np.cos(safe)) / (safe * safe))
    K = np.zeros((len(phi), 3, 3))
    K[:, 0, 1], K[:, 0, 2] = -phi[:, 2], phi[:, 1]
    K[:, 1, 0], K[:, 1, 2] = phi[:, 2], -phi[:, 0]
    K[:, 2, 0], K[:, 2, 1] = -phi[:, 1], phi[:, 0]
    return np.eye(3) + a[:, None, None] * K + b[:, None, None] * (K @ K)


def _rotate_points(omega: np.ndarray, dt: np.ndarray, X: np.ndarray, Y: np.ndarray):
    """Apply R(omega * dt_k) to the rays (X_k, Y_k, 1), elementwise Rodrigues."""
    wx, wy, wz = (float(w) for w in omega)
    px, py, pz = wx * dt, wy * dt, wz * dt
    th2 = px * px + py * py + pz * pz
    small = th2 < 1e-16
    th = np.sqrt(np.where(small, 1.0, th2))
    a = np.where(small, 1.0 - th2 / 6.0, np.sin(th) / th)
    b = np.where(small, 0.5 - th2 / 24.0, (1.0 - np.cos(th)) / (th * th))
    # phi x r and phi x (phi x r) = phi (phi.r) - r |phi|^2, with r = (X, Y, 1)
    cx_ = py - pz * Y
    cy_ = pz * X - px
    cz_ = px * Y - py * X
    dot = px * X + py * Y + pz
    xo = X + a * cx_ + b * (px * dot - X * th2)
    yo = Y + a * cy_ + b * (py * dot - Y * th2)
    zo = 1.0 + a * cz_ + b * (pz * dot - th2)
    return xo, yo, zo


def warp_coords(
    x: np.ndarray, y: np.ndarray, t: np.ndarray, t_ref: float, sensor: CameraModel, params: MotionParams
) -> tuple[np.ndarray, np.ndarray]:
    """Warped real-valued coordinates of raw event arrays (no bounds handling)."""
    xf = np.asarray(x, dtype=np.float64)
    yf = np.asarray(y, dtype=np.float64)
    if isinstance(params, Identity):
        return xf.copy(), yf.copy()
    if isinstance(params, AngularVelocity):
        omega = params.as_vector()
        if not omega.any():
            return xf.copy(), yf.copy()
        dt = t_ref - np.asarray(t, dtype=np.float64)
        X = (xf - sensor.cx) / sensor.fx
        Y = (yf - sensor.cy) / sensor.fy
        xo, yo, zo = _rotate_points(omega, dt, X, Y)
        with np.errstate(divide="ignore", invalid="ignore"):
            xw = sensor.fx * (xo / zo) + sensor.cx
            yw = sensor.fy * (yo / zo) + sensor.cy
        if len(zo) and (np.any(zo <= 0) or not (np.all(np.isfinite(xw)) and np.all(np.isfinite(yw)))):
            raise NonFiniteResult("rotation moved an event behind the camera or to infinity")
        return xw, yw
    if isinstance(params, TileFlow):
        if not params.fits(sensor):
            raise ValueError(f"flow grid {params.grid.shape[:2]} does not match sensor {grid_shape(sensor, params.tile)}")
        dt = np.asarray(t, dtype=np.float64) - t_ref
        v = flow_at(params, xf, yf)
        xw = xf + dt * v[:, 0]
        yw = yf + dt * v[:, 1]
        if not (np.all(np.isfinite(xw)) and np.all(np.isfinite(yw))):
            raise NonFiniteResult("flow warp produced non-finite coordinates")
        return xw, yw
    raise TypeError(f"unknown motion model {params!r}")


def in_sensor(xw: np.ndarray, yw: np.ndarray, sensor: CameraModel) -> np.ndarray:
    """True where a position falls on a pixel's area, i.e. [-0.5, W-0.5) x [-0.5, H-0.5)."""
    return (xw >= -0.5) & (xw < sensor.width - 0.5) & (yw >= -0.5) & (yw < sensor.height - 0.5)


def warp_events(s: EventSlice, params: MotionParams) -> WarpedEvents:
    """Transport every event of ``s`` to ``s.t_ref`` under ``params``.

    Events landing off the pixel area [-0.5, W-0.5) x [-0.5, H-0.5) are kept
    with ``in_bounds=False``.
    """
    xw, yw = warp_coords(s.x, s.y, s.t, s.t_ref, s.sensor, params)
    return WarpedEvents(xw, yw, in_sensor(xw, yw, s.sensor))
