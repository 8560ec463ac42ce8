"""Text and image file formats: events, camera, labels, ground truth, motion, images.

Every text format starts with a ``# cmaxdenoise <kind> v1`` line. Floats
are written with ``repr`` so they read back bit-for-bit.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .core import CameraModel, EventSlice, LabelSet, validate_slice
from .warp import AngularVelocity, Identity, MotionParams, TileFlow

VERSION = 1


class FormatError(ValueError):
    """A file does not follow the expected format (line numbers are 1-based)."""


class IndexMismatch(ValueError):
    pass


def _header(kind: str) -> str:
    return f"# cmaxdenoise {kind} v{VERSION}\n"


def _data_lines(path):
    """Yield (line_number, stripped line) for non-blank, non-comment lines."""
    with open(path, "r", encoding="ascii") as fh:
        for i, line in enumerate(fh, 1):
            line = line.strip()
            if line and not line.startswith("#"):
                yield i, line


def _comments(path) -> list[str]:
    out = []
    with open(path, "r", encoding="ascii") as fh:
        for line in fh:
            if line.startswith("#"):
                out.append(line[1:].strip())
            elif line.strip():
                break
    return out


# events ------------------------------------------------------------------


def write_events(path, s: EventSlice) -> None:
    """``t x y p`` per line; t_ref goes into a comment so it survives the round trip."""
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write(_header("events"))
        if len(s):
            fh.write(f"# t_ref={float(s.t_ref)!r}\n")
        fh.write("".join(f"{t!r} {x} {y} {p}\n" for t, x, y, p in zip(s.t.tolist(), s.x.tolist(), s.y.tolist(), s.p.tolist())))


def read_events(path, sensor: CameraModel) -> EventSlice:
    """Parse an event file and validate it against ``sensor``."""
    t_ref = None
    for c in _comments(path):
        if c.startswith("t_ref="):
            t_ref = float(c.split("=", 1)[1])
    ts, xs, ys, ps = [], [], [], []
    for i, line in _data_lines(path):
        parts = line.split()
        if len(parts) != 4:
            raise FormatError(f"{path}:{i}: expected 't x y p', got {line!r}")
        try:
            ts.append(float(parts[0]))
            xs.append(int(parts[1]))
            ys.append(int(parts[2]))
            ps.append(int(parts[3]))
        except ValueError as exc:
            raise FormatError(f"{path}:{i}: {exc}") from None
    if not ts:
        return EventSlice.empty(sensor)
    p = np.asarray(ps, dtype=np.int64)
    if np.any((p != 1) & (p != -1)):
        raise FormatError(f"{path}: polarity must be 1 or -1 (event {int(np.flatnonzero((p != 1) & (p != -1))[0])})")
    x = np.asarray(xs, dtype=np.int64)
    y = np.asarray(ys, dtype=np.int64)
    t = np.asarray(ts, dtype=np.float64)
    s = EventSlice(x, y, t, p.astype(np.int8), sensor, t_ref)
    validate_slice(s)
    return s


# camera ------------------------------------------------------------------

_CAMERA_KEYS = ("width", "height", "fx", "fy", "cx", "cy")


def write_camera(path, cam: CameraModel) -> None:
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write(_header("camera"))
        for k in _CAMERA_KEYS:
            v = getattr(cam, k)
            fh.write(f"{k}={v!r}\n")


def read_camera(path) -> CameraModel:
    vals = {}
    for i, line in _data_lines(path):
        if "=" not in line:
            raise FormatError(f"{path}:{i}: expected key=value")
        k, v = (a.strip() for a in line.split("=", 1))
        if k not in _CAMERA_KEYS:
            raise FormatError(f"{path}:{i}: unknown camera key {k!r}")
        vals[k] = v
    missing = [k for k in _CAMERA_KEYS if k not in vals]
    if missing:
        raise FormatError(f"{path}: missing camera keys {missing}")
    try:
        return CameraModel(
            int(vals["width"]), int(vals["height"]),
            float(vals["fx"]), float(vals["fy"]), float(vals["cx"]), float(vals["cy"]),
        )
    except ValueError as exc:
        raise FormatError(f"{path}: {exc}") from None


# labels ------------------------------------------------------------------


def write_labels(path, labels: LabelSet) -> None:
    """``index S|N score`` per line, with tau/threshold/source in the header."""
    meta = {"tau": labels.tau, "threshold": labels.threshold, "source": labels.source}
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write(_header("labels"))
        fh.write("# " + json.dumps(meta, sort_keys=True) + "\n")
        fh.write("".join(
            f"{i} {'S' if lab else 'N'} {sc!r}\n"
            for i, (lab, sc) in enumerate(zip(labels.labels.tolist(), labels.scores.tolist()))
        ))


def _indexed_labels(path, with_scores: bool):
    labs, scores = [], []
    for i, line in _data_lines(path):
        parts = line.split()
        if len(parts) != (3 if with_scores else 2) or parts[1] not in ("S", "N"):
            raise FormatError(f"{path}:{i}: malformed label line {line!r}")
        if int(parts[0]) != len(labs):
            raise IndexMismatch(f"{path}:{i}: expected index {len(labs)}, found {parts[0]}")
        labs.append(parts[1] == "S")
        if with_scores:
            scores.append(float(parts[2]))
    return np.asarray(labs, dtype=bool), np.asarray(scores, dtype=np.float64)


def read_labels(path) -> LabelSet:
    meta = {}
    for c in _comments(path):
        if c.startswith("{"):
            meta = json.loads(c)
    labs, scores = _indexed_labels(path, True)
    return LabelSet(scores, labs, float(meta.get("threshold", float("nan"))), float(meta.get("tau", 1.0)), meta.get("source", ""))


# ground truth sidecar ----------------------------------------------------


def write_ground_truth(path, gt_labels: np.ndarray, gt_motion: MotionParams, noise_hz: float) -> None:
    meta = {"motion": motion_to_dict(gt_motion), "noise_hz": float(noise_hz)}
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write(_header("groundtruth"))
        fh.write("# " + json.dumps(meta, sort_keys=True) + "\n")
        fh.write("".join(f"{i} {'S' if g else 'N'}\n" for i, g in enumerate(np.asarray(gt_labels, bool).tolist())))


def read_ground_truth(path):
    """Returns ``(labels, motion or None, noise_hz)``."""
    meta = {}
    for c in _comments(path):
        if c.startswith("{"):
            meta = json.loads(c)
    labs, _ = _indexed_labels(path, False)
    motion = motion_from_dict(meta["motion"]) if meta.get("motion") else None
    return labs, motion, float(meta.get("noise_hz", 0.0))


# motion ------------------------------------------------------------------


def motion_to_dict(m: MotionParams) -> dict:
    if isinstance(m, Identity):
        return {"model": "identity"}
    if isinstance(m, AngularVelocity):
        return {"model": "angular_velocity", "omega": list(m.omega)}
    if isinstance(m, TileFlow):
        return {"model": "tile_flow", "tile": m.tile, "grid": m.grid.tolist()}
    raise TypeError(f"unknown motion model {m!r}")


def motion_from_dict(d: dict) -> MotionParams:
    model = d.get("model")
    if model == "identity":
        return Identity()
    if model == "angular_velocity":
        return AngularVelocity(tuple(d["omega"]))
    if model == "tile_flow":
        return TileFlow(np.asarray(d["grid"], dtype=np.float64), int(d["tile"]))
    raise FormatError(f"unknown motion model {model!r}")


def write_json(path, obj) -> None:
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


# images ------------------------------------------------------------------


def write_pgm(path, img: np.ndarray) -> None:
    """8-bit binary PGM, min-max normalized (a constant image maps to 0)."""
    img = np.asarray(img, dtype=np.float64)
    lo, hi = float(img.min()), float(img.max())
    scaled = np.zeros(img.shape) if hi <= lo else (img - lo) / (hi - lo) * 255.0
    data = np.clip(np.rint(scaled), 0, 255).astype(np.uint8)
    h, w = data.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        fh.write(data.tobytes())


def read_pgm(path) -> np.ndarray:
    raw = Path(path).read_bytes()
    fields, pos = [], 0
    while len(fields) < 4:
        while pos < len(raw) and raw[pos : pos + 1].isspace():
            pos += 1
        end = pos
        while end < len(raw) and not raw[end : end + 1].isspace():
            end += 1
        if end == pos:
            raise FormatError(f"{path}: truncated PGM header")
        fields.append(raw[pos:end])
        pos = end
    if fields[0] != b"P5":
        raise FormatError(f"{path}: not a binary PGM")
    w, h, maxval = (int(f) for f in fields[1:])
    if maxval != 255:
        raise FormatError(f"{path}: only 8-bit PGM is supported")
    # exactly one whitespace byte separates the header from the raster
    data = raw[pos + 1 : pos + 1 + w * h]
    if len(data) != w * h:
        raise FormatError(f"{path}: truncated PGM raster")
    return np.frombuffer(data, dtype=np.uint8).reshape(h, w)


def write_raw_image(path, img: np.ndarray) -> None:
    """Little-endian uint32 width and height, then row-major float64 values."""
    img = np.ascontiguousarray(img, dtype="<f8")
    h, w = img.shape
    with open(path, "wb") as fh:
        fh.write(np.array([w, h], dtype="<u4").tobytes())
        fh.write(img.tobytes())


def read_raw_image(path) -> np.ndarray:
    raw = Path(path).read_bytes()
    w, h = np.frombuffer(raw[:8], dtype="<u4")
    data = np.frombuffer(raw[8:], dtype="<f8")
    if data.size != int(w) * int(h):
        raise FormatError(f"{path}: expected {w}x{h} values, found {data.size}")
    return data.reshape(int(h), int(w)).astype(np.float64)
