"""Classical comparison filters: background-activity filter and random downsampling."""

from __future__ import annotations

from dataclasses import dataclass

import numba as nb
import numpy as np

from .core import EventSlice, LabelSet
from .denoise import random_split


@dataclass(frozen=True)
class BafConfig:
    """Background-activity filter settings.

    An event is kept when any earlier event fired within ``neighborhood_radius``
    (Chebyshev, own pixel included) at most ``time_window`` seconds before it.
    """

    time_window: float = 5e-3
    neighborhood_radius: int = 1

    def __post_init__(self):
        if not self.time_window > 0:
            raise ValueError("time_window must be positive")
        if int(self.neighborhood_radius) != self.neighborhood_radius or self.neighborhood_radius < 1:
            raise ValueError("neighborhood_radius must be an integer >= 1")


@nb.njit(cache=True)
def _baf(x, y, t, width, height, window, radius, out):
    last = np.full((height, width), -np.inf)
    for k in range(len(t)):
        xk, yk, tk = x[k], y[k], t[k]
        ok = False
        for yy in range(max(yk - radius, 0), min(yk + radius, height - 1) + 1):
            for xx in range(max(xk - radius, 0), min(xk + radius, width - 1) + 1):
                if tk - last[yy, xx] <= window:
                    ok = True
        out[k] = ok
        last[yk, xk] = tk


def baf_filter(s: EventSlice, cfg: BafConfig | None = None) -> LabelSet:
    """Label events by spatio-temporal neighbor support (polarity ignored).

    Scores are 1 for signal and 0 for noise; ``tau`` holds the achieved
    signal fraction.
    """
    cfg = cfg or BafConfig()
    n = len(s)
    out = np.zeros(n, dtype=np.bool_)
    if n:
        _baf(s.x, s.y, s.t, s.sensor.width, s.sensor.height, float(cfg.time_window), int(cfg.neighborhood_radius), out)
    frac = float(out.mean()) if n else 1.0
    return LabelSet(out.astype(np.float64), out, 0.5, frac, source="baf")


def random_downsample(s: EventSlice | int, tau: float, seed: int = 0) -> LabelSet:
    """Seeded uniform choice of ceil(tau * N) events as signal."""
    if not 0 < tau <= 1:
        raise ValueError("tau must be in (0, 1]")
    n = s if isinstance(s, int) else len(s)
    labels = random_split(n, tau, np.random.default_rng(seed))
    return LabelSet(labels.astype(np.float64), labels, 0.5, float(tau), source="random")
