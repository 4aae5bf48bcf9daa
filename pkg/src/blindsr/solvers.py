"""Numerical building blocks for the alternating kernel/image estimation.

The two subproblems solved here are

    image:  au*||grad u||_0 + bu*||grad u||^2 + lam*||D K u - o||^2 + eta*||K u - uref||^2
    kernel: ak*||k||_0 + bk*||k||^2
            + sum_d lam*||D U_d k - o_d||^2 + eta*||U_d k - uref_d||^2,  k in C

Each l0 term is split off with one auxiliary variable (scaled augmented
Lagrangian); the l0 proximal step is a hard threshold and the remaining
quadratic is solved matrix-free by conjugate gradients.
"""

import warnings
from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np

from .imgproc import (
    ConvolutionOperator,
    ImageAsKernelOperator,
    dirac,
    downsample,
    gradient,
    gradient_adjoint,
    upsample_zero,
)
from .validation import DimensionError, check_image, check_kernel, check_scale

__all__ = [
    "SalParams",
    "IterationWeights",
    "LinearOperator",
    "CGInfo",
    "DegenerateKernelWarning",
    "cg_solve",
    "hard_threshold",
    "project_kernel_constraints",
    "strided_gradient",
    "strided_gradient_adjoint",
    "image_objective",
    "kernel_objective",
    "image_normal_operator",
    "kernel_normal_operator",
    "update_image_sal",
    "update_kernel_sal",
]


class DegenerateKernelWarning(RuntimeWarning):
    """Projection onto the kernel set had no positive mass to keep."""


@dataclass(frozen=True)
class SalParams:
    """Augmented-Lagrangian and CG settings shared by both subproblems."""

    gamma_u: float = 100.0
    gamma_k: float = 1e6
    inner_iters: int = 10
    cg_tol: float = 1e-5
    cg_max_iters: int = 15

    def __post_init__(self):
        for name in ("gamma_u", "gamma_k", "inner_iters", "cg_tol", "cg_max_iters"):
            if not getattr(self, name) > 0:
                raise ValueError(f"SalParams.{name} must be positive")


@dataclass(frozen=True)
class IterationWeights:
    """Effective weights of one outer iteration (continuation already applied)."""

    au: float
    bu: float
    ak: float
    bk: float
    lam: float = 0.01
    eta: float = 100.0

    def __post_init__(self):
        for name in ("au", "bu", "ak", "bk", "lam", "eta"):
            if getattr(self, name) < 0:
                raise ValueError(f"IterationWeights.{name} must be >= 0")

    @property
    def image_threshold_factor(self):
        return self.au

    @property
    def kernel_threshold_factor(self):
        return self.ak


@dataclass
class LinearOperator:
    """A matrix-free linear map together with its adjoint."""

    apply: Callable[[np.ndarray], np.ndarray]
    apply_adjoint: Callable[[np.ndarray], np.ndarray]
    description: str = ""

    def __call__(self, x):
        return self.apply(x)


class CGInfo(NamedTuple):
    iterations: int
    residuals: list
    status: str  # "converged", "max_iters", "breakdown" or "zero_rhs"


def _as_callable(A):
    if isinstance(A, LinearOperator):
        return A.apply
    if callable(A):
        return A
    mat = np.asarray(A)
    return lambda x: mat @ x


def cg_solve(A, b, x0=None, tol=1e-5, max_iters=15):
    """Conjugate gradients for a symmetric positive (semi-)definite ``A``.

    ``A`` is a :class:`LinearOperator`, a callable or a dense matrix; ``b``
    may be any array shape the operator understands.  The CG recurrence is
    followed by minimal-residual smoothing, so the returned iterate has a
    residual norm that never increases from one iteration to the next and
    is never worse than the raw CG iterate.

    Returns
    -------
    x : ndarray
    info : CGInfo
        ``residuals`` holds the relative residual after each iteration,
        starting with the initial guess.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    matvec = _as_callable(A)
    b = np.asarray(b, dtype=np.float64)
    bnorm = np.linalg.norm(b)
    if bnorm == 0.0:
        return np.zeros_like(b), CGInfo(0, [0.0], "zero_rhs")

    x = np.zeros_like(b) if x0 is None else np.array(x0, dtype=np.float64, copy=True)
    r = b - matvec(x) if x0 is not None else b.copy()
    xs, rs = x.copy(), r.copy()
    rs_norm = np.linalg.norm(rs)
    history = [rs_norm / bnorm]
    if history[-1] <= tol:
        return xs, CGInfo(0, history, "converged")

    p = r.copy()
    rr = np.vdot(r, r)
    status = "max_iters"
    it = 0
    for it in range(1, max_iters + 1):
        Ap = matvec(p)
        curv = np.vdot(p, Ap)
        if not curv > np.finfo(float).tiny:
            status = "breakdown"
            it -= 1
            break
        alpha = rr / curv
        x += alpha * p
        r -= alpha * Ap
        # smoothing step: pick the point on [xs, x] with the smallest residual
        dr = r - rs
        denom = np.vdot(dr, dr)
        theta = -np.vdot(rs, dr) / denom if denom > 0 else 0.0
        theta = min(max(theta, 0.0), 1.0)
        xs += theta * (x - xs)
        rs += theta * dr
        rs_norm = np.linalg.norm(rs)
        history.append(rs_norm / bnorm)
        if history[-1] <= tol:
            status = "converged"
            break
        rr_new = np.vdot(r, r)
        p = r + (rr_new / rr) * p
        rr = rr_new
    return xs, CGInfo(it, history, status)


def hard_threshold(x, weight_l0, gamma):
    """Proximal map of ``weight_l0 * ||z||_0`` with penalty ``gamma / 2``.

    Keeps entries with ``x**2 > 2 * weight_l0 / gamma`` and zeroes the rest.
    """
    if weight_l0 < 0 or gamma <= 0:
        raise ValueError("need weight_l0 >= 0 and gamma > 0")
    x = np.asarray(x, dtype=np.float64)
    if weight_l0 == 0:
        return x.copy()
    return np.where(x * x > 2.0 * weight_l0 / gamma, x, 0.0)


def project_kernel_constraints(k, return_flag=False):
    """Clip negative weights and renormalize to unit sum.

    A kernel with no positive mass is replaced by the centred Dirac of the
    same size and a :class:`DegenerateKernelWarning` is issued.
    """
    k = check_kernel(k)
    clipped = np.maximum(k, 0.0)
    total = clipped.sum()
    degenerate = total < 1e-12
    if degenerate:
        warnings.warn(
            f"kernel projection found no positive mass; falling back to a "
            f"{k.shape[0]}x{k.shape[0]} Dirac",
            DegenerateKernelWarning,
            stacklevel=2,
        )
        out = dirac(k.shape[0])
    elif abs(total - 1.0) <= 1e-14:
        # already in C up to rounding; returning it unchanged keeps the map idempotent
        out = clipped
    else:
        out = clipped / total
    return (out, degenerate) if return_flag else out


def strided_gradient(img, s):
    """Differences at stride ``s``: ``x[., j+s] - x[., j]`` (0 near the far edge).

    Decimating these gives exactly the unit-stride differences of the
    decimated image, which keeps the gradient-domain data term of the kernel
    update consistent for ``s > 1``.
    """
    img = np.asarray(img, dtype=np.float64)
    gh = np.zeros_like(img)
    gv = np.zeros_like(img)
    gh[:, :-s] = img[:, s:] - img[:, :-s]
    gv[:-s, :] = img[s:, :] - img[:-s, :]
    return gh, gv


def strided_gradient_adjoint(gh, gv, s):
    out = np.zeros_like(gh)
    out[:, :-s] -= gh[:, :-s]
    out[:, s:] += gh[:, :-s]
    out[:-s, :] -= gv[:-s, :]
    out[s:, :] += gv[:-s, :]
    return out


def _check_pair(o, uref, s):
    o = check_image(o, name="o")
    uref = check_image(uref, name="uref")
    expected = (o.shape[0] * s, o.shape[1] * s)
    if uref.shape != expected:
        raise DimensionError(
            f"reference image shape {uref.shape} does not match scale {s} x low-res {o.shape}"
        )
    return o, uref


def image_objective(u, k, o, uref, s, w):
    """Value of the image subproblem at ``u`` (l0 counts exact nonzeros)."""
    gh, gv = gradient(u)
    Ku = ConvolutionOperator(k, u.shape).apply(u)
    l0 = np.count_nonzero(gh) + np.count_nonzero(gv)
    return (
        w.au * l0
        + w.bu * (np.sum(gh ** 2) + np.sum(gv ** 2))
        + w.lam * np.sum((downsample(Ku, s) - o) ** 2)
        + w.eta * np.sum((Ku - uref) ** 2)
    )


def kernel_objective(k, u, o, uref, s, w):
    """Value of the kernel subproblem at ``k`` (derivative-domain data terms)."""
    m = k.shape[0]
    val = w.ak * np.count_nonzero(k) + w.bk * np.sum(k ** 2)
    for gu_s, gu, go, gr in zip(strided_gradient(u, s), gradient(u), gradient(o), gradient(uref)):
        val += w.lam * np.sum((downsample(ImageAsKernelOperator(gu_s, m).apply(k), s) - go) ** 2)
        val += w.eta * np.sum((ImageAsKernelOperator(gu, m).apply(k) - gr) ** 2)
    return val


def image_normal_operator(k, shape, s, w, gamma):
    """Normal matrix of the image quadratic, with ``gamma`` weighting grad^T grad.

    ``gamma`` is the splitting penalty (0 when the l0 term is inactive).
    """
    K = ConvolutionOperator(k, shape)
    c_grad = 2.0 * w.bu + gamma

    def apply(u):
        Ku = K.apply(u)
        inner = 2.0 * w.eta * Ku
        if w.lam:
            inner = inner + 2.0 * w.lam * upsample_zero(downsample(Ku, s), s, shape)
        out = K.adjoint(inner)
        if c_grad:
            out += c_grad * gradient_adjoint(*gradient(u))
        return out

    return LinearOperator(apply, apply, description=f"image normal operator, shape {shape}")


def update_image_sal(u0, k, o, uref, s, w, p=SalParams(), return_info=False):
    """Approximately solve the image subproblem for a fixed kernel.

    Runs ``p.inner_iters`` rounds of: hard threshold of ``grad u + d`` at
    ``sqrt(2 au / gamma_u)``, CG on the quadratic in ``u``, dual update.
    When ``au == 0`` no split is needed and a single CG solve is made.
    """
    s = check_scale(s)
    k = check_kernel(k)
    o, uref = _check_pair(o, uref, s)
    u = check_image(u0, name="u0", copy=True)
    if u.shape != uref.shape:
        raise DimensionError(f"u0 shape {u.shape} does not match reference {uref.shape}")
    shape = u.shape
    K = ConvolutionOperator(k, shape)
    data_rhs = K.adjoint(2.0 * w.eta * uref + 2.0 * w.lam * upsample_zero(o, s, shape))
    infos = []

    if w.au == 0:
        A = image_normal_operator(k, shape, s, w, 0.0)
        u, info = cg_solve(A, data_rhs, u, p.cg_tol, p.cg_max_iters)
        infos.append(info)
    else:
        gamma = p.gamma_u
        A = image_normal_operator(k, shape, s, w, gamma)
        dh = np.zeros(shape)
        dv = np.zeros(shape)
        for _ in range(p.inner_iters):
            gh, gv = gradient(u)
            zh = hard_threshold(gh + dh, w.au, gamma)
            zv = hard_threshold(gv + dv, w.au, gamma)
            rhs = data_rhs + gamma * gradient_adjoint(zh - dh, zv - dv)
            u, info = cg_solve(A, rhs, u, p.cg_tol, p.cg_max_iters)
            infos.append(info)
            gh, gv = gradient(u)
            dh += gh - zh
            dv += gv - zv
    return (u, infos) if return_info else u


class _KernelSystem:
    # Precomputed derivative-domain operators for one kernel update.
    def __init__(self, u, o, uref, s, m):
        self.s = s
        self.m = m
        self.shape = u.shape
        self.strided = [ImageAsKernelOperator(g, m) for g in strided_gradient(u, s)]
        self.unit = [ImageAsKernelOperator(g, m) for g in gradient(u)]
        self.o_d = gradient(o)
        self.uref_d = gradient(uref)

    def data_rhs(self, w):
        rhs = np.zeros((self.m, self.m))
        for Us, U, od, rd in zip(self.strided, self.unit, self.o_d, self.uref_d):
            if w.lam:
                rhs += 2.0 * w.lam * Us.adjoint(upsample_zero(od, self.s, self.shape))
            rhs += 2.0 * w.eta * U.adjoint(rd)
        return rhs

    def operator(self, w, gamma):
        diag = 2.0 * w.bk + gamma

        def apply(k):
            out = diag * k
            for Us, U in zip(self.strided, self.unit):
                if w.lam:
                    dec = upsample_zero(downsample(Us.apply(k), self.s), self.s, self.shape)
                    out += 2.0 * w.lam * Us.adjoint(dec)
                out += 2.0 * w.eta * U.adjoint(U.apply(k))
            return out

        return LinearOperator(apply, apply, description=f"kernel normal operator, {self.m}x{self.m}")


def kernel_normal_operator(u, s, m, w, gamma=0.0):
    """Normal matrix of the kernel quadratic as a :class:`LinearOperator`."""
    dummy_o = np.zeros((-(-u.shape[0] // s), -(-u.shape[1] // s)))
    return _KernelSystem(u, dummy_o, np.zeros_like(u), s, m).operator(w, gamma)


def update_kernel_sal(k0, u, o, uref, s, w, p=SalParams(), return_info=False):
    """Approximately solve the kernel subproblem for a fixed image.

    The data terms live in the derivative domain.  Each inner round hard
    thresholds ``k + d`` at ``sqrt(2 ak / gamma_k)``, solves the quadratic
    in ``k`` by CG and updates the dual.  The sparse split variable of the
    last round is projected onto the unit-sum nonnegative set and returned.
    """
    s = check_scale(s)
    k = check_kernel(k0, name="k0").copy()
    o, uref = _check_pair(o, uref, s)
    u = check_image(u, name="u")
    m = k.shape[0]
    if u.shape != uref.shape:
        raise DimensionError(f"u shape {u.shape} does not match reference {uref.shape}")
    if min(u.shape) < m:
        raise DimensionError(f"image {u.shape} is smaller than the {m}x{m} kernel support")
    system = _KernelSystem(u, o, uref, s, m)
    data_rhs = system.data_rhs(w)
    infos = []

    if w.ak == 0:
        A = system.operator(w, 0.0)
        k, info = cg_solve(A, data_rhs, k, p.cg_tol, p.cg_max_iters)
        infos.append(info)
        result = k
    else:
        gamma = p.gamma_k
        A = system.operator(w, gamma)
        d = np.zeros_like(k)
        for _ in range(p.inner_iters):
            h = hard_threshold(k + d, w.ak, gamma)
            k, info = cg_solve(A, data_rhs + gamma * (h - d), k, p.cg_tol, p.cg_max_iters)
            infos.append(info)
            d += k - h
        result = hard_threshold(k + d, w.ak, gamma)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", DegenerateKernelWarning)
        out, degenerate = project_kernel_constraints(result, return_flag=True)
    if degenerate:
        warnings.warn("kernel update collapsed; reset to Dirac", DegenerateKernelWarning, stacklevel=2)
    return (out, infos) if return_info else out
