"""Linear imaging operators and their adjoints.

Images are 2-D float64 arrays in the [0, 1] working range; kernels are
square odd-sized float64 arrays.  Every operator here is exactly linear and
ships with an adjoint, so the solvers can assemble normal equations from
them directly.

Convolution uses replicate padding of width ``ceil(size / 2)`` followed by
a linear convolution of the padded raster, cropped back to the input size.
The linear convolution is evaluated through zero-padded FFTs; the padded
length always exceeds the support so no wraparound enters the output.
"""

import math

import numpy as np
from scipy import fft as spfft

from .validation import DimensionError, check_image, check_kernel, check_scale

__all__ = [
    "ConvolutionOperator",
    "ImageAsKernelOperator",
    "convolve",
    "convolve_adjoint",
    "downsample",
    "upsample_zero",
    "gradient",
    "gradient_adjoint",
    "resize_bicubic",
    "upsample_kernel",
    "split_luma_chroma",
    "merge_luma_chroma",
    "dirac",
    "default_taper",
    "pad_to_multiple",
]


def default_taper(kernel_size):
    """Replicate-padding width used for a kernel of side ``kernel_size``."""
    return (int(kernel_size) + 1) // 2


def dirac(size):
    """Identity kernel: a single unit weight at the centre."""
    if size < 1 or size % 2 == 0:
        raise ValueError(f"kernel size must be odd and >= 1, got {size}")
    k = np.zeros((size, size))
    k[size // 2, size // 2] = 1.0
    return k


def _edge_pad_adjoint(y, t):
    """Adjoint of ``np.pad(x, t, mode="edge")`` for a 2-D array."""
    if t == 0:
        return np.array(y, dtype=np.float64, copy=True)
    out = y
    for axis in (0, 1):
        moved = np.moveaxis(out, axis, 0)
        core = moved[t:-t].copy()
        core[0] += moved[:t].sum(axis=0)
        core[-1] += moved[-t:].sum(axis=0)
        out = np.moveaxis(core, 0, axis)
    return np.ascontiguousarray(out)


class _PaddedGrid:
    # Geometry shared by both convolution operators: a (H, W) image padded by
    # ``taper`` on each side and convolved with an m x m kernel.
    def __init__(self, shape, kernel_size, taper):
        self.shape = tuple(int(n) for n in shape)
        self.m = int(kernel_size)
        self.r = self.m // 2
        self.t = default_taper(self.m) if taper is None else int(taper)
        if self.t < self.r:
            raise ValueError(f"taper {self.t} is smaller than kernel radius {self.r}")
        self.padded = tuple(n + 2 * self.t for n in self.shape)
        if any(n < self.m for n in self.padded):
            raise DimensionError(
                f"kernel of size {self.m} is larger than padded image {self.padded}"
            )
        self.fft_shape = tuple(spfft.next_fast_len(n, real=True) for n in self.padded)
        self.offset = self.t + self.r

    def crop(self, full):
        o = self.offset
        h, w = self.shape
        return full[o:o + h, o:o + w]

    def embed(self, y):
        z = np.zeros(self.fft_shape)
        o = self.offset
        h, w = self.shape
        z[o:o + h, o:o + w] = y
        return z

    def rfft(self, x):
        return spfft.rfft2(x, s=self.fft_shape)

    def irfft(self, x):
        return spfft.irfft2(x, s=self.fft_shape)


class ConvolutionOperator:
    """``u -> k * u`` for a fixed kernel on images of a fixed shape.

    The kernel spectrum is computed once, which is what the iterative
    solvers want: they apply the same blur hundreds of times.
    """

    def __init__(self, k, shape, taper=None):
        self.kernel = check_kernel(k)
        self._grid = _PaddedGrid(shape, self.kernel.shape[0], taper)
        self._kf = self._grid.rfft(self.kernel)

    @property
    def shape(self):
        return self._grid.shape

    def apply(self, u):
        g = self._grid
        padded = np.pad(u, g.t, mode="edge")
        return g.crop(g.irfft(g.rfft(padded) * self._kf))

    def adjoint(self, y):
        g = self._grid
        full = g.irfft(np.conj(self._kf) * g.rfft(g.embed(y)))
        h, w = g.padded
        return _edge_pad_adjoint(full[:h, :w], g.t)


class ImageAsKernelOperator:
    """``k -> k * u`` for a fixed image ``u``, viewed as a map on kernels.

    ``apply(k)`` equals ``convolve(u, k)`` exactly; ``adjoint`` maps an
    image-shaped residual back to an ``m x m`` kernel-shaped array.
    """

    def __init__(self, u, kernel_size, taper=None):
        u = check_image(u, name="u")
        self._grid = _PaddedGrid(u.shape, kernel_size, taper)
        self._uf = self._grid.rfft(np.pad(u, self._grid.t, mode="edge"))

    @property
    def kernel_size(self):
        return self._grid.m

    @property
    def shape(self):
        return self._grid.shape

    def apply(self, k):
        g = self._grid
        if k.shape != (g.m, g.m):
            raise DimensionError(f"expected a {g.m}x{g.m} kernel, got {k.shape}")
        return g.crop(g.irfft(g.rfft(k) * self._uf))

    def adjoint(self, y):
        g = self._grid
        full = g.irfft(np.conj(self._uf) * g.rfft(g.embed(y)))
        return full[:g.m, :g.m].copy()


def convolve(img, k, taper=None):
    """Blur ``img`` by ``k`` with replicate boundary handling.

    The output has the shape of ``img``.  Linear in ``img`` for fixed ``k``
    and in ``k`` for fixed ``img``.
    """
    img = check_image(img)
    return ConvolutionOperator(k, img.shape, taper).apply(img)


def convolve_adjoint(img, k, taper=None):
    """Adjoint of :func:`convolve` with respect to the image argument."""
    img = check_image(img)
    return ConvolutionOperator(k, img.shape, taper).adjoint(img)


def downsample(img, s):
    """Point decimation keeping pixel ``(s*r, s*c)``.

    Non-divisible sizes behave as if the image were first replicate-padded
    to the next multiple of ``s``; the padded pixels are never sampled.
    """
    s = check_scale(s)
    img = np.asarray(img, dtype=np.float64)
    return img[::s, ::s].copy()


def upsample_zero(img, s, shape=None):
    """Zero insertion, the adjoint of :func:`downsample`.

    ``shape`` is the high-resolution shape; defaults to ``s * img.shape``.
    """
    s = check_scale(s)
    img = np.asarray(img, dtype=np.float64)
    if shape is None:
        shape = (img.shape[0] * s, img.shape[1] * s)
    expected = (math.ceil(shape[0] / s), math.ceil(shape[1] / s))
    if img.shape != expected:
        raise DimensionError(
            f"cannot zero-insert {img.shape} into {tuple(shape)} at factor {s}"
        )
    out = np.zeros(shape)
    out[::s, ::s] = img
    return out


def pad_to_multiple(img, s):
    """Replicate-pad the bottom/right edges so both sides divide by ``s``."""
    h, w = img.shape
    ph = (-h) % s
    pw = (-w) % s
    if ph == 0 and pw == 0:
        return np.asarray(img, dtype=np.float64)
    return np.pad(img, ((0, ph), (0, pw)), mode="edge")


def gradient(img):
    """Forward differences ``(gh, gv)``; the last column/row difference is 0."""
    img = np.asarray(img, dtype=np.float64)
    gh = np.zeros_like(img)
    gv = np.zeros_like(img)
    gh[:, :-1] = img[:, 1:] - img[:, :-1]
    gv[:-1, :] = img[1:, :] - img[:-1, :]
    return gh, gv


def gradient_adjoint(gh, gv):
    """Adjoint of :func:`gradient` (a negative divergence)."""
    gh = np.asarray(gh, dtype=np.float64)
    gv = np.asarray(gv, dtype=np.float64)
    if gh.shape != gv.shape:
        raise DimensionError(f"gradient planes differ in shape: {gh.shape} vs {gv.shape}")
    out = np.zeros_like(gh)
    out[:, :-1] -= gh[:, :-1]
    out[:, 1:] += gh[:, :-1]
    out[:-1, :] -= gv[:-1, :]
    out[1:, :] += gv[:-1, :]
    return out


def _cubic(x, a=-0.5):
    x = np.abs(x)
    x2 = x * x
    x3 = x2 * x
    return np.where(
        x <= 1,
        (a + 2) * x3 - (a + 3) * x2 + 1,
        np.where(x < 2, a * x3 - 5 * a * x2 + 8 * a * x - 4 * a, 0.0),
    )


def _resize_matrix(n_in, n_out, antialias):
    # Sample positions use the top-left phase, x_in = x_out * n_in / n_out,
    # so pixel 0 maps to pixel 0 just like the decimation operator.
    scale = n_out / n_in
    pos = np.arange(n_out) * (n_in / n_out)
    if antialias and scale < 1:
        stretch = scale
        support = 2.0 / scale
    else:
        stretch = 1.0
        support = 2.0
    left = np.floor(pos - support).astype(int) + 1
    taps = int(math.ceil(2 * support)) + 1
    idx = left[:, None] + np.arange(taps)[None, :]
    w = stretch * _cubic(stretch * (pos[:, None] - idx))
    w /= w.sum(axis=1, keepdims=True)
    idx = np.clip(idx, 0, n_in - 1)
    mat = np.zeros((n_out, n_in))
    rows = np.repeat(np.arange(n_out), taps)
    np.add.at(mat, (rows, idx.ravel()), w.ravel())
    return mat


def resize_bicubic(img, out_w, out_h, antialias=True):
    """Catmull-Rom (a = -0.5) resize with replicate boundary.

    When shrinking and ``antialias`` is set, the cubic is stretched by the
    inverse scale (the MATLAB ``imresize`` convention) to limit aliasing.
    """
    img = check_image(img)
    out_w = int(out_w)
    out_h = int(out_h)
    if out_w < 1 or out_h < 1:
        raise ValueError(f"target size must be positive, got {out_w}x{out_h}")
    h, w = img.shape
    if (h, w) == (out_h, out_w):
        return img.copy()
    rows = _resize_matrix(h, out_h, antialias)
    cols = _resize_matrix(w, out_w, antialias)
    return rows @ img @ cols.T


def upsample_kernel(k, new_size, factor=2.0):
    """Bicubic magnification of a kernel about its centre.

    Output pixel ``x`` samples the input at ``c_in + (x - c_out) / factor``;
    samples falling outside the input support read zeros.  The result is
    not normalized; pass it through the kernel projection afterwards.
    """
    k = check_kernel(k)
    m = k.shape[0]
    pos = (np.arange(new_size) - new_size // 2) / factor + m // 2
    base = np.floor(pos).astype(int)
    idx = base[:, None] + np.arange(-1, 3)[None, :]
    w = _cubic(pos[:, None] - idx)
    valid = (idx >= 0) & (idx < m)
    mat = np.zeros((new_size, m))
    for j in range(4):
        sel = valid[:, j]
        np.add.at(mat, (np.nonzero(sel)[0], idx[sel, j]), w[sel, j])
    return mat @ k @ mat.T


# ITU-R BT.601 full-range RGB -> YCbCr (chroma offset 0.5 on the [0, 1] scale)
_RGB_TO_YCC = np.array(
    [
        [0.299, 0.587, 0.114],
        [-0.168735892, -0.331264108, 0.5],
        [0.5, -0.418687589, -0.081312411],
    ]
)
_YCC_TO_RGB = np.linalg.inv(_RGB_TO_YCC)
_YCC_OFFSET = np.array([0.0, 0.5, 0.5])


def split_luma_chroma(rgb):
    """Split an RGB image (``uint8`` or float in [0, 1]) into ``(y, cb, cr)``."""
    rgb = np.asarray(rgb)
    if rgb.ndim != 3 or rgb.shape[2] != 3:
        raise ValueError(f"expected an RGB image of shape (H, W, 3), got {rgb.shape}")
    if rgb.dtype == np.uint8:
        rgb = rgb / 255.0
    rgb = rgb.astype(np.float64)
    ycc = rgb @ _RGB_TO_YCC.T + _YCC_OFFSET
    return ycc[..., 0].copy(), ycc[..., 1].copy(), ycc[..., 2].copy()


def merge_luma_chroma(y, cb, cr):
    """Inverse of :func:`split_luma_chroma`; returns float RGB (unclipped)."""
    ycc = np.stack([y, cb, cr], axis=-1) - _YCC_OFFSET
    return ycc @ _YCC_TO_RGB.T
