"""Property-based checks of operator and metric invariants."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from blindsr.imgproc import convolve, convolve_adjoint, downsample, gradient, gradient_adjoint, resize_bicubic, upsample_zero
from blindsr.metrics import kernel_ssd, psnr
from blindsr.solvers import hard_threshold, project_kernel_constraints

finite = st.floats(-10, 10, allow_nan=False, width=64)
seeds = st.integers(0, 2**32 - 1)


def _vdot(a, b):
    return float(np.vdot(a, b))


@settings(max_examples=60, deadline=None)
@given(seeds, st.integers(4, 20), st.integers(4, 20), st.sampled_from([1, 3, 5, 7]))
def test_convolution_adjoint(seed, h, w, m):
    rng = np.random.default_rng(seed)
    u, y, k = rng.standard_normal((h, w)), rng.standard_normal((h, w)), rng.random((m, m))
    lhs, rhs = _vdot(convolve(u, k), y), _vdot(u, convolve_adjoint(y, k))
    assert abs(lhs - rhs) <= 1e-10 * max(1.0, abs(lhs))


@settings(max_examples=60, deadline=None)
@given(seeds, st.integers(2, 24), st.integers(2, 24), st.integers(1, 4))
def test_decimation_adjoint(seed, h, w, s):
    rng = np.random.default_rng(seed)
    u = rng.standard_normal((h, w))
    y = rng.standard_normal(downsample(u, s).shape)
    assert np.isclose(_vdot(downsample(u, s), y), _vdot(u, upsample_zero(y, s, u.shape)), rtol=1e-12, atol=1e-12)


@settings(max_examples=60, deadline=None)
@given(seeds, st.integers(1, 16), st.integers(1, 16))
def test_gradient_adjoint(seed, h, w):
    rng = np.random.default_rng(seed)
    u, ph, pv = (rng.standard_normal((h, w)) for _ in range(3))
    gh, gv = gradient(u)
    assert np.isclose(_vdot(gh, ph) + _vdot(gv, pv), _vdot(u, gradient_adjoint(ph, pv)), rtol=1e-12, atol=1e-12)


@settings(max_examples=200, deadline=None)
@given(finite, st.floats(0, 5), st.floats(0.01, 100))
def test_hard_threshold_is_prox(x, alpha, gamma):
    # prox of alpha*[z != 0] + gamma/2 (z - x)^2 over z in {0, x}
    z = float(hard_threshold(np.array([x]), alpha, gamma)[0])
    assert z in (0.0, x)
    cost = lambda v: alpha * (v != 0) + 0.5 * gamma * (v - x) ** 2
    assert cost(z) <= min(cost(0.0), cost(x)) + 1e-12
    assert float(hard_threshold(np.array([z]), alpha, gamma)[0]) == z or z == 0.0 or alpha == 0


@pytest.mark.filterwarnings("ignore::blindsr.solvers.DegenerateKernelWarning")
@settings(max_examples=100, deadline=None)
@given(arrays(np.float64, (5, 5), elements=finite))
def test_projection_lands_in_set(k):
    p = project_kernel_constraints(k)
    assert np.all(p >= 0) and abs(p.sum() - 1) < 1e-12
    np.testing.assert_array_equal(project_kernel_constraints(p), p)


@settings(max_examples=50, deadline=None)
@given(seeds, st.sampled_from([3, 5, 7]), st.sampled_from([3, 5, 7]), st.integers(0, 3))
def test_ssd_symmetric_and_pad_invariant(seed, m1, m2, pad):
    rng = np.random.default_rng(seed)
    a = rng.random((m1, m1)) ** 4
    b = rng.random((m2, m2)) ** 4
    a, b = a / a.sum(), b / b.sum()
    r = kernel_ssd(a, b).ssd
    assert r >= 0
    assert np.isclose(r, kernel_ssd(b, a).ssd, rtol=1e-9, atol=1e-14)
    assert np.isclose(r, kernel_ssd(np.pad(a, pad), b).ssd, rtol=1e-9, atol=1e-14)


@settings(max_examples=50, deadline=None)
@given(seeds, st.integers(3, 12), st.integers(3, 12))
def test_psnr_symmetric(seed, h, w):
    rng = np.random.default_rng(seed)
    a, b = rng.random((h, w)), rng.random((h, w))
    assert psnr(a, b) == psnr(b, a)


@settings(max_examples=40, deadline=None)
@given(st.floats(0, 1), st.integers(2, 20), st.integers(2, 20), st.integers(2, 40), st.integers(2, 40))
def test_resize_preserves_constants(c, h, w, oh, ow):
    out = resize_bicubic(np.full((h, w), c), ow, oh)
    assert out.shape == (oh, ow)
    np.testing.assert_allclose(out, c, atol=1e-12)
