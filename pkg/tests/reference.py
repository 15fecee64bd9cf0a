"""Independent reference implementations used as test oracles.

Everything here is deliberately naive — scalar per-pixel loops and textbook
formulas — so that agreement with the vectorized library code is meaningful.
Nothing in this module imports from depthaug.
"""

from __future__ import annotations

import math


def forward_pixel(j, z, B, beta, gamma):
    """Observed intensity of one pixel, one channel."""
    return j * math.exp(-beta * z) + B * (1.0 - math.exp(-gamma * z))


def restore_pixel(i, z, B, beta, gamma):
    """Scene radiance of one pixel, one channel."""
    return (i - B * (1.0 - math.exp(-gamma * z))) * math.exp(beta * z)


def render_loop(J, z, B, beta, gamma):
    """Triple-loop forward render. J is (H, W, 3) nested lists or an array."""
    h, w = len(z), len(z[0])
    out = [[[0.0] * 3 for _ in range(w)] for _ in range(h)]
    for y in range(h):
        for x in range(w):
            for c in range(3):
                out[y][x][c] = forward_pixel(J[y][x][c], z[y][x],
                                             B[c], beta[c], gamma[c])
    return out


def restore_loop(I, z, B, beta, gamma):
    """Triple-loop inversion of render_loop."""
    h, w = len(z), len(z[0])
    out = [[[0.0] * 3 for _ in range(w)] for _ in range(h)]
    for y in range(h):
        for x in range(w):
            for c in range(3):
                out[y][x][c] = restore_pixel(I[y][x][c], z[y][x],
                                             B[c], beta[c], gamma[c])
    return out


def jitter_loop(I, z, dz, depth_floor, B, beta, gamma):
    """Two-step per-pixel jitter: restore at z, re-render at max(z+dz, floor).

    Returns (modified image, modified depth) as nested lists.
    """
    h, w = len(z), len(z[0])
    out = [[[0.0] * 3 for _ in range(w)] for _ in range(h)]
    z_m = [[0.0] * w for _ in range(h)]
    for y in range(h):
        for x in range(w):
            zm = max(z[y][x] + dz, depth_floor)
            z_m[y][x] = zm
            for c in range(3):
                j = restore_pixel(I[y][x][c], z[y][x], B[c], beta[c], gamma[c])
                out[y][x][c] = forward_pixel(j, zm, B[c], beta[c], gamma[c])
    return out, z_m


def quantile_linear(values, q):
    """Quantile by sorting and linearly interpolating between the two
    closest order statistics (the rule numpy calls "linear")."""
    s = sorted(float(v) for v in values)
    if not s:
        raise ValueError("empty list")
    pos = (len(s) - 1) * q
    lo = math.floor(pos)
    hi = math.ceil(pos)
    frac = pos - lo
    return s[lo] + (s[hi] - s[lo]) * frac


def variance_two_pass(values):
    """Population variance (divide by N), two-pass formula."""
    vals = [float(v) for v in values]
    n = len(vals)
    if n == 0:
        raise ValueError("empty list")
    mean = sum(vals) / n
    return sum((v - mean) ** 2 for v in vals) / n


def ks_statistic_uniform(samples, lo, hi):
    """Kolmogorov-Smirnov distance between samples and U(lo, hi)."""
    s = sorted(samples)
    n = len(s)
    d = 0.0
    for i, v in enumerate(s):
        cdf = (v - lo) / (hi - lo)
        d = max(d, abs((i + 1) / n - cdf), abs(cdf - i / n))
    return d
