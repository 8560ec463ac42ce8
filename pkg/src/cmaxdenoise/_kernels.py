"""Compiled inner loops for splatting, sampling and objective evaluation.

Loops run over events in input order so results are reproducible
bit-for-bit for identical inputs.
"""

from __future__ import annotations

import math

import numba as nb
import numpy as np

MAX_RADIUS = 64


@nb.njit(cache=True, inline="always")
def _axis_taps(pos, n, radius, inv_var, gk, out):
    """Normalized 1-D Gaussian taps around round(pos), clipped to [0, n-1].

    Writes weights for offsets -radius..radius into ``out`` (zero where the
    tap is outside the image) and returns the first tap's pixel index.
    """
    c = int(math.floor(pos + 0.5))
    f = pos - c
    q = math.exp(f * inv_var)
    qinv = 1.0 / q
    # w_k = g_k * q**k; the exp(-f^2/2s^2) factor cancels on normalization
    out[radius] = gk[radius]
    p = 1.0
    for k in range(1, radius + 1):
        p *= q
        out[radius + k] = gk[radius + k] * p
    p = 1.0
    for k in range(1, radius + 1):
        p *= qinv
        out[radius - k] = gk[radius - k] * p
    total = 0.0
    for k in range(2 * radius + 1):
        i = c - radius + k
        if i < 0 or i >= n:
            out[k] = 0.0
        else:
            total += out[k]
    for k in range(2 * radius + 1):
        out[k] /= total
    return c - radius


@nb.njit(cache=True)
def splat(img, xs, ys, sign, epsilon, radius):
    """Add (sign * unit-mass) truncated Gaussian splats at (xs[k], ys[k]) to ``img``.

    Coordinates must lie on the pixel area [-0.5, W-0.5) x [-0.5, H-0.5).
    """
    h, w = img.shape
    inv_var = 1.0 / (epsilon * epsilon)
    m = 2 * radius + 1
    gk = np.empty(m)
    for k in range(m):
        d = k - radius
        gk[k] = math.exp(-0.5 * d * d * inv_var)
    wx = np.empty(m)
    wy = np.empty(m)
    for e in range(len(xs)):
        x0 = _axis_taps(xs[e], w, radius, inv_var, gk, wx)
        y0 = _axis_taps(ys[e], h, radius, inv_var, gk, wy)
        for j in range(m):
            yy = y0 + j
            if wy[j] == 0.0:
                continue
            wyj = sign * wy[j]
            for i in range(m):
                if wx[i] != 0.0:
                    img[yy, x0 + i] += wyj * wx[i]


@nb.njit(cache=True)
def sample_bilinear(img, xs, ys, out):
    """Bilinear lookup of ``img``; constant extrapolation within half a pixel of the border."""
    h, w = img.shape
    for e in range(len(xs)):
        x = min(max(xs[e], 0.0), w - 1.0)
        y = min(max(ys[e], 0.0), h - 1.0)
        x0 = min(int(math.floor(x)), w - 2) if w > 1 else 0
        y0 = min(int(math.floor(y)), h - 2) if h > 1 else 0
        fx = x - x0
        fy = y - y0
        x1 = min(x0 + 1, w - 1)
        y1 = min(y0 + 1, h - 1)
        out[e] = (
            (1 - fy) * ((1 - fx) * img[y0, x0] + fx * img[y0, x1])
            + fy * ((1 - fx) * img[y1, x0] + fx * img[y1, x1])
        )


@nb.njit(cache=True)
def grad_energy(img, r0, r1, c0, c1):
    """Sum of squared central-difference gradients over interior rows r0..r1-1, cols c0..c1-1."""
    h, w = img.shape
    r0 = max(r0, 1)
    c0 = max(c0, 1)
    r1 = min(r1, h - 1)
    c1 = min(c1, w - 1)
    total = 0.0
    for r in range(r0, r1):
        for c in range(c0, c1):
            gx = 0.5 * (img[r, c + 1] - img[r, c - 1])
            gy = 0.5 * (img[r + 1, c] - img[r - 1, c])
            total += gx * gx + gy * gy
    return total


@nb.njit(cache=True)
def sq_sum(img, r0, r1, c0, c1):
    total = 0.0
    for r in range(max(r0, 0), min(r1, img.shape[0])):
        for c in range(max(c0, 0), min(c1, img.shape[1])):
            total += img[r, c] * img[r, c]
    return total


def kernel_radius(epsilon: float) -> int:
    r = int(math.ceil(3.0 * epsilon - 1e-12))
    if r > MAX_RADIUS:
        raise ValueError(f"epsilon {epsilon} too large (radius > {MAX_RADIUS})")
    return max(r, 1)


@nb.njit(cache=True, inline="always")
def _outside(x, y, w, h):
    return not (x >= -0.5 and x < w - 0.5 and y >= -0.5 and y < h - 0.5)


@nb.njit(cache=True)
def local_delta(img, work, ox, oy, nx, ny, epsilon, radius, kind, mass):
    """Objective change when events move from (ox, oy) to (nx, ny).

    Only in-bounds positions contribute. ``work`` must equal ``img`` on entry
    and is restored before returning. ``kind`` 0 returns the change of the
    gradient-energy sum, 1 the change of the population variance.
    """
    h, w = img.shape
    no = len(ox)
    rmin = h
    rmax = -1
    cmin = w
    cmax = -1
    n_old = 0
    n_new = 0
    for e in range(no):
        for s in range(2):
            x = ox[e] if s == 0 else nx[e]
            y = oy[e] if s == 0 else ny[e]
            if _outside(x, y, w, h):
                continue
            if s == 0:
                n_old += 1
            else:
                n_new += 1
            c = int(math.floor(x + 0.5))
            r = int(math.floor(y + 0.5))
            cmin = min(cmin, c)
            cmax = max(cmax, c)
            rmin = min(rmin, r)
            rmax = max(rmax, r)
    if rmax < 0:
        return 0.0
    oin_x = np.empty(n_old)
    oin_y = np.empty(n_old)
    nin_x = np.empty(n_new)
    nin_y = np.empty(n_new)
    a = 0
    b = 0
    for e in range(no):
        x = ox[e]
        y = oy[e]
        if not _outside(x, y, w, h):
            oin_x[a] = x
            oin_y[a] = y
            a += 1
        x = nx[e]
        y = ny[e]
        if not _outside(x, y, w, h):
            nin_x[b] = x
            nin_y[b] = y
            b += 1
    splat(work, oin_x, oin_y, -1.0, epsilon, radius)
    splat(work, nin_x, nin_y, 1.0, epsilon, radius)
    pr0 = max(rmin - radius, 0)
    pr1 = min(rmax + radius + 1, h)
    pc0 = max(cmin - radius, 0)
    pc1 = min(cmax + radius + 1, w)
    if kind == 0:
        before = grad_energy(img, pr0 - 1, pr1 + 1, pc0 - 1, pc1 + 1)
        after = grad_energy(work, pr0 - 1, pr1 + 1, pc0 - 1, pc1 + 1)
        out = after - before
    else:
        p = float(h * w)
        s2 = sq_sum(work, pr0, pr1, pc0, pc1) - sq_sum(img, pr0, pr1, pc0, pc1)
        m1 = mass + (n_new - n_old)
        out = s2 / p - (m1 * m1 - mass * mass) / (p * p)
    for r in range(pr0, pr1):
        for c in range(pc0, pc1):
            work[r, c] = img[r, c]
    return out
