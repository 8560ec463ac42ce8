import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cmaxdenoise.core import CameraModel
from cmaxdenoise.formats import read_pgm, write_pgm
from cmaxdenoise.iwe import (
    ImageTooSmall,
    Iwe,
    accumulate,
    gradient_magnitude_objective,
    splat_image,
    variance_objective,
)
from cmaxdenoise.warp import Identity, TileFlow, WarpedEvents, warp_events

from conftest import make_slice


def tap_oracle(x, y, eps, shape):
    """Enumerate the (2r+1)^2 taps around round(x, y), keep those inside, normalize."""
    r = math.ceil(3 * eps)
    img = np.zeros(shape)
    cx, cy = math.floor(x + 0.5), math.floor(y + 0.5)
    taps = []
    for j in range(cy - r, cy + r + 1):
        for i in range(cx - r, cx + r + 1):
            if 0 <= i < shape[1] and 0 <= j < shape[0]:
                taps.append((j, i, math.exp(-((i - x) ** 2 + (j - y) ** 2) / (2 * eps * eps))))
    total = sum(w for _, _, w in taps)
    for j, i, w in taps:
        img[j, i] = w / total
    return img


def _warped(xs, ys):
    xs = np.asarray(xs, float)
    return WarpedEvents(xs, np.asarray(ys, float), np.ones(len(xs), bool))


def test_empty_image():
    cam = CameraModel(20, 20)
    iwe = accumulate(_warped([], []), cam)
    assert not iwe.pixels.any() and iwe.total_mass == 0


def test_single_event_center_tap():
    cam = CameraModel(21, 21)
    iwe = accumulate(_warped([10], [10]), cam, 1.0)
    assert iwe.truncation_radius == 3
    oracle = tap_oracle(10, 10, 1.0, cam.shape)
    assert np.count_nonzero(oracle) == 49
    assert abs(iwe.pixels[10, 10] - oracle[10, 10]) < 1e-9
    assert np.max(np.abs(iwe.pixels - oracle)) < 1e-9


@settings(max_examples=60, deadline=None)
@given(st.floats(-0.5, 29.49), st.floats(-0.5, 19.49), st.sampled_from([0.5, 1.0, 1.7, 3.0]))
def test_splat_matches_tap_oracle(x, y, eps):
    cam = CameraModel(30, 20)
    img = splat_image(np.array([x]), np.array([y]), cam, eps)
    assert np.max(np.abs(img - tap_oracle(x, y, eps, cam.shape))) < 1e-9
    assert img.sum() == pytest.approx(1.0, rel=1e-12)


def test_two_coincident_events_double():
    cam = CameraModel(21, 21)
    one = accumulate(_warped([7.3], [9.8]), cam).pixels
    two = accumulate(_warped([7.3, 7.3], [9.8, 9.8]), cam).pixels
    assert np.allclose(two, 2 * one, rtol=0, atol=1e-15)


def test_mass_and_nonnegativity():
    rng = np.random.default_rng(1)
    cam = CameraModel(40, 30)
    xs, ys = rng.uniform(-0.5, 39.4, 500), rng.uniform(-0.5, 29.4, 500)
    iwe = accumulate(_warped(xs, ys), cam, 1.3)
    assert (iwe.pixels >= 0).all()
    assert iwe.pixels.sum() == pytest.approx(iwe.total_mass, rel=1e-6)
    assert iwe.total_mass == 500


def test_permutation_invariance():
    rng = np.random.default_rng(2)
    cam = CameraModel(40, 30)
    xs, ys = rng.uniform(0, 39, 300), rng.uniform(0, 29, 300)
    perm = rng.permutation(300)
    a = accumulate(_warped(xs, ys), cam).pixels
    b = accumulate(_warped(xs[perm], ys[perm]), cam).pixels
    assert np.allclose(a, b, rtol=1e-9, atol=1e-12)


def test_mass_non_increasing_when_events_leave(cam):
    s = make_slice(np.arange(0, 32, 2), np.full(16, 12), np.linspace(0, 1, 16), sensor=cam)
    masses = [accumulate(warp_events(s, TileFlow.uniform(cam, (v, 0.0))), cam).total_mass for v in (0, 5, 10, 20)]
    assert masses == sorted(masses, reverse=True)
    assert masses[0] > masses[-1]


def test_iwe_addition():
    cam = CameraModel(10, 10)
    a = accumulate(_warped([3], [3]), cam)
    b = accumulate(_warped([6], [6]), cam)
    c = a + b
    assert c.total_mass == 2 and np.allclose(c.pixels, a.pixels + b.pixels)


def test_variance_examples():
    assert variance_objective(np.zeros((5, 7))) == 0.0
    P = 35
    img = np.zeros((5, 7))
    img[2, 3] = P
    assert variance_objective(img) == pytest.approx(P - 1)
    rng = np.random.default_rng(0)
    r = rng.random((6, 6))
    assert variance_objective(r + 3.25) == pytest.approx(variance_objective(r), rel=1e-12)


def test_gradient_examples():
    assert gradient_magnitude_objective(np.full((5, 5), 2.0)) == 0.0
    ramp = np.tile(np.arange(9, dtype=float), (6, 1))
    assert gradient_magnitude_objective(ramp) == pytest.approx(1.0, abs=1e-12)
    yy, xx = np.mgrid[0:11, 0:11]
    blob = np.exp(-((xx - 5) ** 2 + (yy - 5) ** 2) / 6.0)
    assert gradient_magnitude_objective(blob) == pytest.approx(gradient_magnitude_objective(blob.T), rel=1e-12)
    with pytest.raises(ImageTooSmall):
        gradient_magnitude_objective(np.zeros((2, 5)))


def test_gradient_against_numpy():
    rng = np.random.default_rng(5)
    img = rng.random((12, 17))
    gx = (img[1:-1, 2:] - img[1:-1, :-2]) / 2
    gy = (img[2:, 1:-1] - img[:-2, 1:-1]) / 2
    assert gradient_magnitude_objective(img) == pytest.approx(np.mean(gx**2 + gy**2), rel=1e-12)


def test_pgm_round_trip(tmp_path):
    img = np.arange(12, dtype=float).reshape(3, 4)
    write_pgm(tmp_path / "a.pgm", img)
    back = read_pgm(tmp_path / "a.pgm")
    assert back.shape == (3, 4) and back[0, 0] == 0 and back[-1, -1] == 255
    # raster bytes that look like whitespace must survive
    img2 = np.full((2, 2), 32.0)
    img2[0, 0] = 0.0
    img2[1, 1] = 255.0
    write_pgm(tmp_path / "b.pgm", img2)
    assert read_pgm(tmp_path / "b.pgm").tolist() == [[0, 32], [32, 255]]


def test_raw_image_round_trip(tmp_path):
    from cmaxdenoise.formats import read_raw_image, write_raw_image

    img = np.random.default_rng(0).random((5, 8))
    write_raw_image(tmp_path / "a.f64", img)
    assert np.array_equal(read_raw_image(tmp_path / "a.f64"), img)
    assert (tmp_path / "a.f64").stat().st_size == 8 + 40 * 8
