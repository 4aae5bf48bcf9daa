"""Image and kernel file formats.

Images are 8-bit PNG or PGM/PPM, decoded to float64 in [0, 1].  Kernels
are plain text: a ``rows cols`` header line followed by ``rows`` lines of
space-separated decimals.
"""

import os

import numpy as np
from PIL import Image as PILImage

from .imgproc import split_luma_chroma
from .validation import DimensionError

__all__ = ["read_image", "read_luma", "write_image", "read_kernel", "write_kernel"]

KERNEL_SUM_TOL = 1e-6


class FormatError(ValueError):
    """A file could not be decoded into the expected format."""


def read_image(path):
    """Return a 2-D gray or (H, W, 3) RGB float64 array in [0, 1]."""
    try:
        with PILImage.open(path) as im:
            if im.mode in ("L", "P", "1", "I", "I;16"):
                im = im.convert("L")
            elif im.mode != "RGB":
                im = im.convert("RGB")
            arr = np.asarray(im, dtype=np.float64) / 255.0
    except OSError as exc:
        raise FormatError(f"cannot read image {os.fspath(path)!r}: {exc}") from exc
    return arr


def read_luma(path):
    """Read an image and return its luma (gray images pass through)."""
    arr = read_image(path)
    if arr.ndim == 3:
        return split_luma_chroma(arr)[0]
    return arr


def write_image(path, img):
    """Clip to [0, 1], quantize to 8 bits and save (format from the suffix)."""
    arr = np.asarray(img, dtype=np.float64)
    if arr.ndim not in (2, 3) or (arr.ndim == 3 and arr.shape[2] != 3):
        raise DimensionError(f"cannot write array of shape {arr.shape} as an image")
    q = np.clip(np.round(np.clip(arr, 0.0, 1.0) * 255.0), 0, 255).astype(np.uint8)
    ext = os.path.splitext(os.fspath(path))[1].lower()
    fmt = {".pgm": "PPM", ".ppm": "PPM", ".pnm": "PPM"}.get(ext)
    PILImage.fromarray(q).save(path, format=fmt)


def read_kernel(path):
    """Read a kernel text file; renormalize if its sum is off by more than 1e-6."""
    try:
        with open(path) as fh:
            lines = [ln.split() for ln in fh if ln.strip()]
    except OSError as exc:
        raise FormatError(f"cannot read kernel {os.fspath(path)!r}: {exc}") from exc
    try:
        rows, cols = (int(v) for v in lines[0])
        k = np.array([[float(v) for v in ln] for ln in lines[1:]], dtype=np.float64)
    except (ValueError, IndexError) as exc:
        raise FormatError(f"malformed kernel file {os.fspath(path)!r}: {exc}") from exc
    if k.shape != (rows, cols):
        raise FormatError(f"kernel file {os.fspath(path)!r} declares {rows}x{cols} but holds {k.shape}")
    if not np.all(np.isfinite(k)):
        raise FormatError(f"kernel file {os.fspath(path)!r} contains non-finite values")
    total = k.sum()
    if abs(total - 1.0) > KERNEL_SUM_TOL and total != 0:
        k = k / total
    return k


def write_kernel(path, k, precision=10):
    k = np.asarray(k, dtype=np.float64)
    with open(path, "w") as fh:
        fh.write(f"{k.shape[0]} {k.shape[1]}\n")
        for row in k:
            fh.write(" ".join(f"{v:.{precision}e}" for v in row) + "\n")
