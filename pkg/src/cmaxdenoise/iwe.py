"""Image of warped events (IWE) and contrast objectives."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .core import CameraModel
from .warp import WarpedEvents


class ImageTooSmall(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class Iwe:
    pixels: np.ndarray
    epsilon: float
    truncation_radius: int
    total_mass: float

    @property
    def shape(self) -> tuple[int, int]:
        return self.pixels.shape

    def __add__(self, other: "Iwe") -> "Iwe":
        if self.epsilon != other.epsilon or self.shape != other.shape:
            raise ValueError("cannot add IWEs with different kernels or shapes")
        return Iwe(self.pixels + other.pixels, self.epsilon, self.truncation_radius, self.total_mass + other.total_mass)


def splat_image(xs: np.ndarray, ys: np.ndarray, sensor: CameraModel, epsilon: float) -> np.ndarray:
    """Raw accumulation of in-bounds coordinates; callers filter bounds."""
    img = np.zeros(sensor.shape)
    if len(xs):
        _kernels.splat(
            img,
            np.ascontiguousarray(xs, dtype=np.float64),
            np.ascontiguousarray(ys, dtype=np.float64),
            1.0,
            float(epsilon),
            _kernels.kernel_radius(epsilon),
        )
    return img


def accumulate(warped: WarpedEvents, sensor: CameraModel, epsilon: float = 1.0) -> Iwe:
    """Sum one unit-mass Gaussian splat per in-bounds warped event.

    Each splat is a discrete Gaussian of std ``epsilon`` centred at the
    event's real-valued position, truncated to radius ceil(3*epsilon) and
    renormalized over the taps that fall inside the image.
    """
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")
    inb = warped.in_bounds
    img = splat_image(warped.x[inb], warped.y[inb], sensor, epsilon)
    return Iwe(img, float(epsilon), _kernels.kernel_radius(epsilon), float(np.count_nonzero(inb)))


def variance_objective(iwe: Iwe | np.ndarray) -> float:
    """Population variance of the image over all pixels."""
    img = iwe.pixels if isinstance(iwe, Iwe) else np.asarray(iwe, dtype=np.float64)
    return float(np.var(img))


def gradient_magnitude_objective(iwe: Iwe | np.ndarray) -> float:
    """Mean squared central-difference gradient magnitude over interior pixels."""
    img = iwe.pixels if isinstance(iwe, Iwe) else np.asarray(iwe, dtype=np.float64)
    h, w = img.shape
    if h < 3 or w < 3:
        raise ImageTooSmall(f"need at least 3x3 pixels, got {w}x{h}")
    img = np.ascontiguousarray(img, dtype=np.float64)
    return _kernels.grad_energy(img, 1, h - 1, 1, w - 1) / ((h - 2) * (w - 2))


OBJECTIVES = {
    "gradient": gradient_magnitude_objective,
    "variance": variance_objective,
}


def sample(iwe: Iwe | np.ndarray, warped: WarpedEvents) -> np.ndarray:
    """Bilinear IWE value at each warped position; 0 for out-of-bounds events."""
    img = iwe.pixels if isinstance(iwe, Iwe) else iwe
    out = np.zeros(len(warped))
    inb = warped.in_bounds
    if inb.any():
        vals = np.empty(int(inb.sum()))
        _kernels.sample_bilinear(np.ascontiguousarray(img), warped.x[inb], warped.y[inb], vals)
        out[inb] = vals
    return out
