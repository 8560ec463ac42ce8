"""Shared domain types: events, slices, camera geometry and labels."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np


class SliceError(ValueError):
    """Base class for slice validation failures.

    ``index`` is the position of the first offending event.
    """

    def __init__(self, index: int, message: str = ""):
        self.index = int(index)
        super().__init__(f"{type(self).__name__} at event {self.index}" + (f": {message}" if message else ""))


class UnsortedTimestamps(SliceError):
    pass


class OutOfBoundsPixel(SliceError):
    pass


class BadPolarity(SliceError):
    pass


class Event(NamedTuple):
    x: int
    y: int
    t: float
    p: int


@dataclass(frozen=True)
class CameraModel:
    """Sensor geometry and pinhole intrinsics (all in pixels)."""

    width: int
    height: int
    fx: float = 1.0
    fy: float = 1.0
    cx: float = 0.0
    cy: float = 0.0

    def __post_init__(self):
        if self.width <= 0 or self.height <= 0:
            raise ValueError("sensor width and height must be positive")
        if not (self.fx > 0 and self.fy > 0):
            raise ValueError("focal lengths must be positive")

    @classmethod
    def centered(cls, width: int, height: int, focal: float | None = None) -> "CameraModel":
        """Camera with the principal point at the image center."""
        f = float(focal) if focal is not None else float(max(width, height))
        return cls(width, height, f, f, (width - 1) / 2.0, (height - 1) / 2.0)

    @property
    def num_pixels(self) -> int:
        return self.width * self.height

    @property
    def shape(self) -> tuple[int, int]:
        return (self.height, self.width)


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class EventSlice:
    """A time-ordered batch of events on one sensor.

    Events are held column-wise (``x``, ``y``, ``t``, ``p``). ``t_ref`` defaults
    to the earliest timestamp.
    """

    x: np.ndarray
    y: np.ndarray
    t: np.ndarray
    p: np.ndarray
    sensor: CameraModel
    t_ref: float | None = None

    def __post_init__(self):
        x = _frozen(np.asarray(self.x, dtype=np.int64))
        y = _frozen(np.asarray(self.y, dtype=np.int64))
        t = _frozen(np.asarray(self.t, dtype=np.float64))
        p = _frozen(np.asarray(self.p, dtype=np.int8))
        if not (x.shape == y.shape == t.shape == p.shape) or x.ndim != 1:
            raise ValueError("x, y, t, p must be 1-D arrays of equal length")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "p", p)
        if self.t_ref is None:
            object.__setattr__(self, "t_ref", float(t.min()) if len(t) else 0.0)
        else:
            object.__setattr__(self, "t_ref", float(self.t_ref))

    @classmethod
    def from_events(cls, events, sensor: CameraModel, t_ref: float | None = None) -> "EventSlice":
        events = list(events)
        if not events:
            return cls.empty(sensor)
        x, y, t, p = zip(*events)
        return cls(np.array(x), np.array(y), np.array(t), np.array(p), sensor, t_ref)

    @classmethod
    def empty(cls, sensor: CameraModel) -> "EventSlice":
        return cls(np.zeros(0), np.zeros(0), np.zeros(0), np.zeros(0), sensor)

    def __len__(self) -> int:
        return len(self.t)

    def __iter__(self):
        for i in range(len(self)):
            yield self[i]

    def __getitem__(self, i: int) -> Event:
        return Event(int(self.x[i]), int(self.y[i]), float(self.t[i]), int(self.p[i]))

    def select(self, mask: np.ndarray) -> "EventSlice":
        """Sub-slice of the events where ``mask`` is true; ``t_ref`` is kept."""
        mask = np.asarray(mask)
        return EventSlice(self.x[mask], self.y[mask], self.t[mask], self.p[mask], self.sensor, self.t_ref)

    def shifted(self, dt: float) -> "EventSlice":
        """All timestamps and the reference time moved by ``dt``."""
        return EventSlice(self.x, self.y, self.t + dt, self.p, self.sensor, self.t_ref + dt)

    @property
    def duration(self) -> float:
        return float(self.t[-1] - self.t[0]) if len(self) else 0.0

    def __eq__(self, other) -> bool:
        if not isinstance(other, EventSlice):
            return NotImplemented
        return (
            self.sensor == other.sensor
            and self.t_ref == other.t_ref
            and all(np.array_equal(getattr(self, f), getattr(other, f)) for f in "xytp")
        )


def validate_slice(s: EventSlice) -> None:
    """Raise a :class:`SliceError` subclass for the first invalid event.

    Checks are reported in event order; for a single event, ordering is
    checked before bounds, and bounds before polarity.
    """
    n = len(s)
    if n == 0:
        return
    bad = np.zeros(n, dtype=np.int8)
    # Lower code wins for the same index.
    unsorted = np.zeros(n, dtype=bool)
    unsorted[1:] = s.t[1:] < s.t[:-1]
    oob = (s.x < 0) | (s.x >= s.sensor.width) | (s.y < 0) | (s.y >= s.sensor.height)
    badp = (s.p != 1) & (s.p != -1)
    bad[badp] = 3
    bad[oob] = 2
    bad[unsorted] = 1
    hits = np.flatnonzero(bad)
    if len(hits) == 0:
        return
    i = int(hits[0])
    kind = {1: UnsortedTimestamps, 2: OutOfBoundsPixel, 3: BadPolarity}[int(bad[i])]
    raise kind(i)


SIGNAL = True
NOISE = False


@dataclass(frozen=True, eq=False)
class LabelSet:
    """Per-event signal/noise flags with the scores and threshold that made them.

    ``labels`` is boolean with ``True`` meaning signal.
    """

    scores: np.ndarray
    labels: np.ndarray
    threshold: float
    tau: float
    source: str = field(default="")

    def __post_init__(self):
        scores = _frozen(np.asarray(self.scores, dtype=np.float64))
        labels = _frozen(np.asarray(self.labels, dtype=bool))
        if scores.shape != labels.shape:
            raise ValueError("scores and labels must have equal length")
        object.__setattr__(self, "scores", scores)
        object.__setattr__(self, "labels", labels)

    def __len__(self) -> int:
        return len(self.labels)

    @property
    def num_signal(self) -> int:
        return int(self.labels.sum())

    @property
    def signal(self) -> np.ndarray:
        return self.labels

    @property
    def noise(self) -> np.ndarray:
        return ~self.labels

    def __eq__(self, other) -> bool:
        if not isinstance(other, LabelSet):
            return NotImplemented
        return (
            np.array_equal(self.labels, other.labels)
            and np.array_equal(self.scores, other.scores)
            and (self.threshold == other.threshold or (np.isnan(self.threshold) and np.isnan(other.threshold)))
            and self.tau == other.tau
        )


def signal_count(n: int, tau: float) -> int:
    """Number of events admitted as signal for ratio ``tau``: ceil(tau * n).

    The product is rounded to 9 decimals first so that e.g. 0.7 * 10 gives 7.
    """
    if not 0.0 < tau <= 1.0:
        raise ValueError(f"tau must be in (0, 1], got {tau}")
    return min(n, int(np.ceil(round(tau * n, 9))))
