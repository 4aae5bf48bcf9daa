"""Kernel SSD and PSNR."""

import math
from typing import NamedTuple

import numpy as np
from scipy.signal import correlate

from .validation import DimensionError, check_image, check_kernel

__all__ = ["KernelSsdResult", "kernel_ssd", "psnr"]

PSNR_CAP_DB = 99.0


class KernelSsdResult(NamedTuple):
    ssd: float
    shift_applied: tuple
    common_size: int


def _center_pad(k, size):
    p = (size - k.shape[0]) // 2
    return np.pad(k, p)


def kernel_ssd(k_est, k_true):
    """Sum of squared differences after integer-shift alignment.

    Both kernels are zero-padded to a common odd canvas and ``k_est`` is
    shifted by the integer offset maximizing its cross-correlation with
    ``k_true``.  Mass shifted past the canvas is still counted, so the
    value is the SSD of the two kernels on an unbounded zero background.
    """
    a = check_kernel(k_est, name="k_est")
    b = check_kernel(k_true, name="k_true")
    size = max(a.shape[0], b.shape[0])
    a = _center_pad(a, size)
    b = _center_pad(b, size)
    xc = correlate(b, a, mode="full", method="direct")
    best = xc.max()
    # ties resolve toward the smallest shift so identical kernels report (0, 0)
    cand = np.argwhere(xc >= best - 1e-15 * max(abs(best), 1.0))
    centre = np.array([size - 1, size - 1])
    pick = cand[np.argmin(np.abs(cand - centre).sum(axis=1))]
    dy, dx = (int(v) for v in pick - centre)
    # difference on a canvas large enough to hold any shift, so identical
    # kernels give exactly zero
    n = 3 * size - 2
    canvas_a = np.zeros((n, n))
    canvas_b = np.zeros((n, n))
    o = size - 1
    canvas_b[o:o + size, o:o + size] = b
    canvas_a[o + dy:o + dy + size, o + dx:o + dx + size] = a
    ssd = float(np.sum((canvas_a - canvas_b) ** 2))
    return KernelSsdResult(ssd, (dy, dx), size)


def psnr(u_est, u_true, crop_border=0):
    """Peak signal-to-noise ratio on the [0, 1] scale, capped at 99 dB."""
    u_est = check_image(u_est, name="u_est")
    u_true = check_image(u_true, name="u_true")
    if u_est.shape != u_true.shape:
        raise DimensionError(f"image shapes differ: {u_est.shape} vs {u_true.shape}")
    c = int(crop_border)
    if c < 0 or 2 * c >= min(u_est.shape):
        raise ValueError(f"crop_border {crop_border} leaves no interior for shape {u_est.shape}")
    if c:
        u_est = u_est[c:-c, c:-c]
        u_true = u_true[c:-c, c:-c]
    mse = float(np.mean((u_est - u_true) ** 2))
    if mse < 1e-10:
        return PSNR_CAP_DB
    return min(10.0 * math.log10(1.0 / mse), PSNR_CAP_DB)
