"""Synthetic test instances: ground-truth kernels and degraded observations."""

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .imgproc import convolve, dirac, downsample, pad_to_multiple
from .validation import ConfigError, check_image, check_scale

__all__ = ["KernelSpec", "DegradeSpec", "make_kernel", "degrade", "parse_kernel_spec"]

KERNEL_KINDS = ("gaussian", "motion", "disk", "dirac")


@dataclass(frozen=True)
class KernelSpec:
    kind: str = "gaussian"
    size: int = 7
    sigma: float = 1.5
    length: Optional[float] = None
    angle: Optional[float] = None
    radius: Optional[float] = None
    rng_seed: int = 0

    def __post_init__(self):
        if self.kind not in KERNEL_KINDS:
            raise ConfigError(f"unknown kernel kind {self.kind!r}; expected one of {KERNEL_KINDS}")
        if not isinstance(self.size, (int, np.integer)) or self.size < 1 or self.size % 2 == 0:
            raise ConfigError(f"kernel size must be a positive odd integer, got {self.size!r}")
        if self.kind == "gaussian" and not self.sigma > 0:
            raise ConfigError(f"gaussian sigma must be positive, got {self.sigma!r}")

    def __str__(self):
        if self.kind == "gaussian":
            return f"gaussian:{self.size}:{self.sigma:g}"
        if self.kind == "disk":
            radius = self.radius if self.radius is not None else self.size / 2
            return f"disk:{self.size}:{radius:g}"
        if self.kind == "motion":
            if self.length is not None:
                return f"motion:{self.size}:{self.length:g}:{self.angle or 0:g}"
            return f"motion:{self.size}:seed={self.rng_seed}"
        return f"dirac:{self.size}"

    @property
    def sigma_value(self):
        return self.sigma if self.kind == "gaussian" else float("nan")


@dataclass(frozen=True)
class DegradeSpec:
    kernel: KernelSpec = field(default_factory=KernelSpec)
    scale: int = 2
    noise_sigma: float = 0.0
    rng_seed: int = 0

    def __post_init__(self):
        check_scale(self.scale)
        if self.noise_sigma < 0:
            raise ConfigError(f"noise_sigma must be >= 0, got {self.noise_sigma}")


def parse_kernel_spec(text, rng_seed=0):
    """Parse the CLI form ``kind:size[:params]``.

    Examples: ``gaussian:7:1.5``, ``dirac:5``, ``disk:9:3.5``,
    ``motion:19:12:30`` (length, angle in degrees) and ``motion:19``
    (seeded random-walk trajectory).
    """
    parts = [p.strip() for p in str(text).split(":")]
    kind = parts[0].lower()
    try:
        size = int(parts[1]) if len(parts) > 1 else 1
        extra = [float(p) for p in parts[2:]]
    except ValueError as exc:
        raise ConfigError(f"malformed kernel spec {text!r}: {exc}") from exc
    if kind == "gaussian":
        if len(extra) != 1:
            raise ConfigError(f"gaussian kernel spec needs size and sigma: {text!r}")
        return KernelSpec("gaussian", size, sigma=extra[0], rng_seed=rng_seed)
    if kind == "disk":
        return KernelSpec("disk", size, radius=extra[0] if extra else None, rng_seed=rng_seed)
    if kind == "motion":
        if len(extra) == 2:
            return KernelSpec("motion", size, length=extra[0], angle=extra[1], rng_seed=rng_seed)
        if extra:
            raise ConfigError(f"motion kernel spec takes length and angle or nothing: {text!r}")
        return KernelSpec("motion", size, rng_seed=rng_seed)
    if kind == "dirac":
        return KernelSpec("dirac", size)
    raise ConfigError(f"unknown kernel kind in {text!r}")


def _gaussian(size, sigma):
    c = size // 2
    x = np.arange(size) - c
    g = np.exp(-(x[:, None] ** 2 + x[None, :] ** 2) / (2.0 * sigma ** 2))
    return g / g.sum()


def _disk(size, radius):
    # supersampled coverage of a disk of the given radius
    sub = 8
    c = size // 2
    off = (np.arange(sub) + 0.5) / sub - 0.5
    x = (np.arange(size) - c)[:, None] + off[None, :]
    xx = x.reshape(-1)
    inside = (xx[:, None] ** 2 + xx[None, :] ** 2) <= radius ** 2
    k = inside.reshape(size, sub, size, sub).mean(axis=(1, 3))
    return k / k.sum()


def _splat(k, y, x, w):
    # bilinear splat of weight w at sub-pixel position (y, x)
    y0, x0 = int(np.floor(y)), int(np.floor(x))
    fy, fx = y - y0, x - x0
    n = k.shape[0]
    for dy, wy in ((0, 1 - fy), (1, fy)):
        for dx, wx in ((0, 1 - fx), (1, fx)):
            yy, xx = y0 + dy, x0 + dx
            if 0 <= yy < n and 0 <= xx < n:
                k[yy, xx] += w * wy * wx


def _motion_line(size, length, angle_deg):
    k = np.zeros((size, size))
    c = size // 2
    theta = np.deg2rad(angle_deg)
    n = max(int(np.ceil(length * 4)), 2)
    for t in np.linspace(-length / 2, length / 2, n):
        _splat(k, c - t * np.sin(theta), c + t * np.cos(theta), 1.0)
    return k


def _motion_walk(size, seed, momentum=0.7):
    # seeded random walk of unit steps with momentum, recentred on its centroid
    rng = np.random.default_rng(seed)
    steps = 4 * size
    pos = np.zeros((steps + 1, 2))
    vel = rng.standard_normal(2)
    vel /= np.linalg.norm(vel)
    for i in range(steps):
        turn = rng.standard_normal(2)
        vel = momentum * vel + (1 - momentum) * turn
        vel /= max(np.linalg.norm(vel), 1e-12)
        pos[i + 1] = pos[i] + vel
    pos -= pos.mean(axis=0)
    limit = size // 2 - 0.5
    extent = np.abs(pos).max()
    if extent > limit:
        pos *= limit / extent
    k = np.zeros((size, size))
    c = size // 2
    for y, x in pos:
        _splat(k, c + y, c + x, 1.0)
    return k


def make_kernel(spec):
    """Rasterize a :class:`KernelSpec` into a unit-sum nonnegative kernel."""
    if spec.kind == "dirac":
        return dirac(spec.size)
    if spec.kind == "gaussian":
        return _gaussian(spec.size, spec.sigma)
    if spec.kind == "disk":
        radius = spec.radius if spec.radius is not None else spec.size / 2
        return _disk(spec.size, radius)
    if spec.length is not None:
        k = _motion_line(spec.size, spec.length, spec.angle or 0.0)
    else:
        k = _motion_walk(spec.size, spec.rng_seed)
    return k / k.sum()


def degrade(u, spec, rng=None):
    """Blur, decimate and add white Gaussian noise: ``o = D K u + n``.

    ``spec.noise_sigma`` is in gray levels of the 0-255 scale.  The result is
    not clipped; clipping happens only when writing 8-bit files.
    """
    u = check_image(u, name="u")
    k = make_kernel(spec.kernel)
    o = downsample(pad_to_multiple(convolve(u, k), spec.scale), spec.scale)
    if spec.noise_sigma > 0:
        if rng is None:
            rng = np.random.default_rng(spec.rng_seed)
        o = o + rng.standard_normal(o.shape) * (spec.noise_sigma / 255.0)
    return o
