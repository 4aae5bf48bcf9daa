"""Coarse-to-fine blind kernel estimation and the estimator front end.

Per pyramid level the sharp image is initialized from the reference
upscale, then image and kernel updates alternate for a fixed number of
outer iterations while the regularization weights decay geometrically.
The kernel is carried to the next level by bicubic magnification followed
by projection onto the unit-sum nonnegative set.
"""

import enum
import logging
import math
import time
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import ndimage
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .imgproc import dirac, resize_bicubic, upsample_kernel
from .nonblind import TvSrConfig, bicubic_kernel, tv_super_resolve
from .solvers import (
    IterationWeights,
    SalParams,
    image_objective,
    kernel_objective,
    project_kernel_constraints,
    update_image_sal,
    update_kernel_sal,
)
from .validation import ConfigError, DimensionError, check_image, check_odd_size, check_scale

__all__ = [
    "RegularizerVariant",
    "EstimatorConfig",
    "PyramidLevel",
    "KernelEstimate",
    "EstimationError",
    "reference_upscale",
    "continuation_weights",
    "level_kernel_size",
    "build_pyramid",
    "estimate_kernel",
    "recenter_kernel",
    "BlindSuperResolver",
]

logger = logging.getLogger(__name__)

REFERENCE_METHODS = ("tv-bicubic", "bicubic-interp", "external-file")

# The reference only has to be consistent with the observation, not pleasant
# to look at; a light TV weight keeps texture the kernel update relies on.
REFERENCE_LAMBDA = 1e5


class RegularizerVariant(str, enum.Enum):
    """Which parts of the image/kernel regularizer are active."""

    FULL = "full"
    NO_IMAGE_L2 = "no-image-l2"
    NO_KERNEL_L0 = "no-kernel-l0"
    IMAGE_L0_ONLY = "image-l0-only"
    NO_CONTINUATION = "no-continuation"

    def __str__(self):
        return self.value


class EstimationError(RuntimeError):
    """A solver failure annotated with the pyramid level and iteration."""


@dataclass(frozen=True)
class EstimatorConfig:
    lam: float = 0.01
    eta: float = 100.0
    alpha_u: float = 1.0
    beta_u: float = 10.0
    alpha_k: float = 0.2
    beta_k: float = 1.0
    c_u: float = 2.0 / 3.0
    c_k: float = 4.0 / 5.0
    scales: int = 4
    outer_iters: int = 10
    kernel_size: int = 31
    sal: SalParams = field(default_factory=SalParams)
    variant: RegularizerVariant = RegularizerVariant.FULL
    reference_method: str = "tv-bicubic"
    reference_tv: TvSrConfig = field(default_factory=lambda: TvSrConfig(lambda_data=REFERENCE_LAMBDA))
    recenter: bool = True

    def __post_init__(self):
        check_odd_size(self.kernel_size)
        for name in ("lam", "eta", "alpha_u", "beta_u", "alpha_k", "beta_k"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be >= 0")
        for name in ("c_u", "c_k"):
            if not 0 < getattr(self, name) <= 1:
                raise ConfigError(f"{name} must lie in (0, 1]")
        if self.scales < 1 or self.outer_iters < 1:
            raise ConfigError("scales and outer_iters must be >= 1")
        if self.reference_method not in REFERENCE_METHODS:
            raise ConfigError(
                f"unknown reference_method {self.reference_method!r}; expected one of {REFERENCE_METHODS}"
            )
        object.__setattr__(self, "variant", RegularizerVariant(self.variant))


@dataclass
class PyramidLevel:
    level_index: int
    o: np.ndarray
    uref: np.ndarray
    scale_factor_to_finest: float
    kernel_size: int


@dataclass
class KernelEstimate:
    kernel: np.ndarray
    u: np.ndarray
    uref: np.ndarray
    trace: list
    runtime_s: float = 0.0


def reference_upscale(o, s, method="tv-bicubic", external=None, tv_cfg=TvSrConfig()):
    """Super-resolved but still blurred reference image at ``s`` times the size of ``o``.

    ``external`` is an array (or a path readable by :func:`blindsr.io.read_image`)
    holding a precomputed upscale, used with ``method="external-file"``.
    """
    o = check_image(o, name="o")
    s = check_scale(s)
    h, w = o.shape
    if method == "bicubic-interp":
        return resize_bicubic(o, w * s, h * s)
    if method == "tv-bicubic":
        return tv_super_resolve(o, bicubic_kernel(s), s, tv_cfg)
    if method == "external-file":
        if external is None:
            raise ConfigError("external-file reference needs an image or a path")
        if isinstance(external, (str, bytes)) or hasattr(external, "__fspath__"):
            from .io import read_luma

            external = read_luma(external)
        ref = check_image(external, name="reference image")
        if ref.shape != (h * s, w * s):
            raise DimensionError(
                f"reference image is {ref.shape}, expected {(h * s, w * s)} for scale {s}"
            )
        return ref.copy()
    raise ConfigError(f"unknown reference method {method!r}")


def continuation_weights(i, cfg):
    """Regularization weights for outer iteration ``i`` under ``cfg.variant``."""
    if i < 0:
        raise ValueError("iteration index must be >= 0")
    variant = RegularizerVariant(cfg.variant)
    if variant is RegularizerVariant.NO_CONTINUATION:
        cu = ck = 1.0
    else:
        cu = cfg.c_u ** i
        ck = cfg.c_k ** i
    au, bu = cu * cfg.alpha_u, cu * cfg.beta_u
    ak, bk = ck * cfg.alpha_k, ck * cfg.beta_k
    if variant is RegularizerVariant.NO_IMAGE_L2:
        bu = 0.0
    elif variant is RegularizerVariant.NO_KERNEL_L0:
        bu = ak = 0.0
    elif variant is RegularizerVariant.IMAGE_L0_ONLY:
        bu = ak = bk = 0.0
    return IterationWeights(au=au, bu=bu, ak=ak, bk=bk, lam=cfg.lam, eta=cfg.eta)


def level_kernel_size(kernel_size, factor):
    """Kernel side at a level ``factor`` times coarser: round half down, bump to odd, floor 3."""
    n = math.ceil(kernel_size / factor - 0.5)
    if n % 2 == 0:
        n += 1
    return max(n, 3)


def build_pyramid(o, uref, cfg, s=None):
    """Dyadic pyramid of (observation, reference) pairs, coarsest first."""
    o = check_image(o, name="o")
    uref = check_image(uref, name="uref")
    if s is None:
        s = uref.shape[0] // o.shape[0]
    s = check_scale(s)
    if uref.shape != (o.shape[0] * s, o.shape[1] * s):
        raise DimensionError(f"reference {uref.shape} is not {s} x observation {o.shape}")
    levels = []
    for level in range(1, cfg.scales + 1):
        factor = 2 ** (cfg.scales - level)
        m = cfg.kernel_size if factor == 1 else level_kernel_size(cfg.kernel_size, factor)
        if factor == 1:
            o_l, u_l = o, uref
        else:
            lh = max(int(round(o.shape[0] / factor)), 1)
            lw = max(int(round(o.shape[1] / factor)), 1)
            o_l = resize_bicubic(o, lw, lh)
            u_l = resize_bicubic(uref, lw * s, lh * s)
        if min(u_l.shape) < 3 * m:
            raise ConfigError(
                f"level {level} is {u_l.shape} at high resolution, smaller than 3x its "
                f"{m}x{m} kernel; use fewer scales or a smaller kernel_size"
            )
        levels.append(PyramidLevel(level, o_l, u_l, 1.0 / factor, m))
    return levels


def recenter_kernel(k, floor=0.25):
    """Shift ``k`` by a sub-pixel amount so its centroid sits on the middle pixel.

    The blur/image pair is only determined up to a translation; without this
    an off-centre kernel shifts the super-resolved image by the same amount.
    The centroid is taken over entries of at least ``floor`` times the peak so
    faint tails do not drag it.  The shift uses cubic interpolation and the
    result is projected back onto the kernel constraints.
    """
    k = np.asarray(k, dtype=np.float64)
    if k.max() <= 0:
        return k
    core = np.where(k >= floor * k.max(), k, 0.0)
    c = (k.shape[0] - 1) / 2.0
    y, x = np.indices(k.shape)
    dy = float((core * y).sum() / core.sum() - c)
    dx = float((core * x).sum() / core.sum() - c)
    moved = ndimage.shift(k, (-dy, -dx), order=3, mode="constant", cval=0.0)
    return project_kernel_constraints(moved)


def _total_objective(u, k, o, uref, s, w):
    # full alternating objective: image terms plus the kernel regularizer
    return image_objective(u, k, o, uref, s, w) + w.ak * np.count_nonzero(k) + w.bk * np.sum(k ** 2)


def estimate_kernel(o, cfg=EstimatorConfig(), s=2, uref=None, external=None):
    """Estimate the blur kernel of ``o`` for upscaling factor ``s``.

    Parameters
    ----------
    o : ndarray
        Low-resolution observation in [0, 1].
    cfg : EstimatorConfig
    s : int
    uref : ndarray, optional
        Precomputed reference upscale; generated with ``cfg.reference_method``
        when omitted.
    external : ndarray or path, optional
        Source for ``reference_method="external-file"``.

    Returns
    -------
    KernelEstimate
        Final kernel, intermediate sharp image at the finest level, the
        reference used and a per-iteration trace of dicts.
    """
    start = time.perf_counter()
    o = check_image(o, name="o")
    s = check_scale(s)
    if uref is None:
        uref = reference_upscale(o, s, cfg.reference_method, external, cfg.reference_tv)
    levels = build_pyramid(o, uref, cfg, s)
    trace = []
    k = dirac(levels[0].kernel_size)
    u = levels[0].uref
    for level in levels:
        if k.shape[0] != level.kernel_size:
            k = project_kernel_constraints(upsample_kernel(k, level.kernel_size, 2.0))
        u = level.uref.copy()
        for i in range(cfg.outer_iters):
            w = continuation_weights(i, cfg)
            try:
                u = update_image_sal(u, k, level.o, level.uref, s, w, cfg.sal)
                k = update_kernel_sal(k, u, level.o, level.uref, s, w, cfg.sal)
            except Exception as exc:
                raise EstimationError(
                    f"level {level.level_index}/{cfg.scales}, iteration {i}: {exc}"
                ) from exc
            trace.append(
                {
                    "scale": level.level_index,
                    "iteration": i,
                    "objective": _total_objective(u, k, level.o, level.uref, s, w),
                    "image_threshold": math.sqrt(2.0 * w.au / cfg.sal.gamma_u),
                    "kernel_threshold": math.sqrt(2.0 * w.ak / cfg.sal.gamma_k),
                }
            )
        logger.info(
            "level %d/%d done: %s, kernel %dx%d, objective %.6g",
            level.level_index, cfg.scales, level.uref.shape, level.kernel_size,
            level.kernel_size, trace[-1]["objective"],
        )
    if cfg.recenter:
        k = recenter_kernel(k)
    return KernelEstimate(k, u, uref, trace, time.perf_counter() - start)


class BlindSuperResolver(TransformerMixin, BaseEstimator):
    """Blind super-resolution as an estimator.

    ``fit(o)`` estimates the blur kernel of the low-resolution image ``o``;
    ``transform(o)`` reconstructs the high-resolution image with TV
    super-resolution using the fitted kernel.

    Attributes
    ----------
    kernel_ : ndarray
        Estimated kernel, unit sum and nonnegative.
    u_ : ndarray
        Intermediate sharp image at the finest level.
    reference_ : ndarray
        Reference upscale used during estimation.
    trace_ : list of dict
        Objective and thresholds per outer iteration.
    """

    def __init__(self, scale=2, kernel_size=31, lam=0.01, eta=100.0, alpha_u=1.0,
                 beta_u=10.0, alpha_k=0.2, beta_k=1.0, c_u=2.0 / 3.0, c_k=4.0 / 5.0,
                 scales=4, outer_iters=10, gamma_u=100.0, gamma_k=1e6, inner_iters=10,
                 cg_tol=1e-5, cg_max_iters=15, variant="full", reference_method="tv-bicubic",
                 reference_image=None, reference_lambda=REFERENCE_LAMBDA, recenter=True,
                 tv_config=None):
        self.scale = scale
        self.kernel_size = kernel_size
        self.lam = lam
        self.eta = eta
        self.alpha_u = alpha_u
        self.beta_u = beta_u
        self.alpha_k = alpha_k
        self.beta_k = beta_k
        self.c_u = c_u
        self.c_k = c_k
        self.scales = scales
        self.outer_iters = outer_iters
        self.gamma_u = gamma_u
        self.gamma_k = gamma_k
        self.inner_iters = inner_iters
        self.cg_tol = cg_tol
        self.cg_max_iters = cg_max_iters
        self.variant = variant
        self.reference_method = reference_method
        self.reference_image = reference_image
        self.reference_lambda = reference_lambda
        self.recenter = recenter
        self.tv_config = tv_config

    def get_config(self):
        """The :class:`EstimatorConfig` described by the current parameters."""
        sal = SalParams(self.gamma_u, self.gamma_k, self.inner_iters, self.cg_tol, self.cg_max_iters)
        return EstimatorConfig(
            lam=self.lam, eta=self.eta, alpha_u=self.alpha_u, beta_u=self.beta_u,
            alpha_k=self.alpha_k, beta_k=self.beta_k, c_u=self.c_u, c_k=self.c_k,
            scales=self.scales, outer_iters=self.outer_iters, kernel_size=self.kernel_size,
            sal=sal, variant=self.variant, reference_method=self.reference_method,
            reference_tv=TvSrConfig(lambda_data=self.reference_lambda), recenter=self.recenter,
        )

    def fit(self, X, y=None):
        X = check_image(X, name="X")
        cfg = self.get_config()
        method = cfg.reference_method
        if self.reference_image is not None and method != "external-file":
            cfg = replace(cfg, reference_method="external-file")
        result = estimate_kernel(X, cfg, check_scale(self.scale), external=self.reference_image)
        self.kernel_ = result.kernel
        self.u_ = result.u
        self.reference_ = result.uref
        self.trace_ = result.trace
        self.runtime_s_ = result.runtime_s
        return self

    def transform(self, X):
        check_is_fitted(self, "kernel_")
        X = check_image(X, name="X")
        return tv_super_resolve(X, self.kernel_, self.scale, self.tv_config or TvSrConfig())
