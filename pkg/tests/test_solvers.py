import warnings

import numpy as np
import pytest

from blindsr.degradation import DegradeSpec, KernelSpec, degrade, make_kernel
from blindsr.imgproc import dirac, resize_bicubic
from blindsr.metrics import kernel_ssd
from blindsr.solvers import (
    DegenerateKernelWarning,
    IterationWeights,
    LinearOperator,
    SalParams,
    cg_solve,
    hard_threshold,
    image_normal_operator,
    image_objective,
    kernel_normal_operator,
    project_kernel_constraints,
    update_image_sal,
    update_kernel_sal,
)
from blindsr.validation import DimensionError
from conftest import natural_crop


def _brute_l0_prox(x, w, g):
    # exhaustive minimization over a 1e4-point grid that contains 0 and x
    grid = np.concatenate([np.linspace(-2 * abs(x) - 1, 2 * abs(x) + 1, 9998), [0.0, x]])
    obj = w * (grid != 0) + 0.5 * g * (grid - x) ** 2
    return grid[np.argmin(obj)]


class TestHardThreshold:
    def test_matches_scalar_brute_force(self):
        rng = np.random.default_rng(0)
        for _ in range(100):
            x = rng.uniform(-1, 1)
            w = rng.uniform(0, 0.5)
            g = rng.uniform(1, 200)
            if abs(x * x - 2 * w / g) < 1e-9:
                continue  # exact tie
            assert hard_threshold(np.array(x), w, g) == _brute_l0_prox(x, w, g)

    def test_documented_values(self):
        out = hard_threshold(np.array([0.10, 0.20, -0.20]), 1.0, 100.0)
        np.testing.assert_array_equal(out, [0.0, 0.20, -0.20])

    def test_zero_weight_and_zero_input(self, rng):
        x = rng.standard_normal(10)
        np.testing.assert_array_equal(hard_threshold(x, 0.0, 1.0), x)
        np.testing.assert_array_equal(hard_threshold(np.zeros(4), 1.0, 1.0), 0.0)

    def test_idempotent(self, rng):
        x = rng.standard_normal(50)
        once = hard_threshold(x, 0.3, 2.0)
        np.testing.assert_array_equal(hard_threshold(once, 0.3, 2.0), once)


class TestProjection:
    def test_documented_example(self):
        np.testing.assert_allclose(project_kernel_constraints(np.array([[-1.0, 2.0, 3.0]] * 3))[0],
                                   np.array([0, 0.4, 0.6]) / 3)

    def test_valid_kernel_unchanged(self):
        k = make_kernel(KernelSpec("gaussian", 7, 1.5))
        np.testing.assert_allclose(project_kernel_constraints(k), k, atol=1e-16)

    def test_idempotent_and_feasible(self, rng):
        for _ in range(50):
            k = rng.standard_normal((5, 5))
            p = project_kernel_constraints(k)
            assert np.all(p >= 0) and abs(p.sum() - 1) < 1e-12
            np.testing.assert_allclose(project_kernel_constraints(p), p, atol=1e-15)

    def test_all_negative_falls_back_to_dirac(self):
        with pytest.warns(DegenerateKernelWarning):
            k, flag = project_kernel_constraints(-np.ones((5, 5)), return_flag=True)
        assert flag
        np.testing.assert_array_equal(k, dirac(5))


class TestCG:
    def test_identity_one_iteration(self, rng):
        b = rng.standard_normal(8)
        x, info = cg_solve(np.eye(8), b)
        np.testing.assert_allclose(x, b)
        assert info.iterations == 1 and info.status == "converged"

    def test_scaled_identity(self, rng):
        b = rng.standard_normal((4, 4))
        x, _ = cg_solve(lambda v: 2 * v, b)
        np.testing.assert_allclose(x, b / 2)

    def test_dense_spd_systems(self):
        rng = np.random.default_rng(7)
        for _ in range(200):
            M = rng.standard_normal((16, 16))
            A = M.T @ M + np.eye(16)
            b = rng.standard_normal(16)
            x, info = cg_solve(A, b, tol=1e-13, max_iters=200)
            np.testing.assert_allclose(x, np.linalg.solve(A, b), atol=1e-6)
            assert all(b2 <= b1 for b1, b2 in zip(info.residuals, info.residuals[1:]))

    def test_zero_rhs(self, rng):
        x, info = cg_solve(np.eye(3), np.zeros(3), x0=rng.standard_normal(3))
        np.testing.assert_array_equal(x, 0)
        assert info.status == "zero_rhs"

    def test_breakdown_flagged(self):
        x, info = cg_solve(np.zeros((3, 3)), np.ones(3))
        assert info.status == "breakdown"
        assert np.all(np.isfinite(x))


def _objective_oracle(u, k, o, uref, s, w):
    # direct summation, sharing no code with the library operators
    m = k.shape[0]
    r, t = m // 2, (m + 1) // 2
    p = np.pad(u, t, mode="edge")
    ku = np.zeros_like(u)
    for i in range(m):
        for j in range(m):
            ku += k[i, j] * p[t + r - i:t + r - i + u.shape[0], t + r - j:t + r - j + u.shape[1]]
    dh = np.diff(u, axis=1)
    dv = np.diff(u, axis=0)
    return (w.au * (np.count_nonzero(dh) + np.count_nonzero(dv)) + w.bu * ((dh ** 2).sum() + (dv ** 2).sum())
            + w.lam * ((ku[::s, ::s] - o) ** 2).sum() + w.eta * ((ku - uref) ** 2).sum())


class TestImageUpdate:
    def test_pure_least_squares_reproduces_observation(self, rng):
        o = rng.random((16, 16))
        w = IterationWeights(0, 0, 0, 0, lam=0.01, eta=0.0)
        u = update_image_sal(rng.random((16, 16)), dirac(3), o, np.zeros_like(o), 1, w)
        assert np.linalg.norm(u - o) / np.linalg.norm(o) <= 1e-4

    def test_reference_only(self, rng):
        uref = rng.random((16, 16))
        w = IterationWeights(0, 0, 0, 0, lam=0.0, eta=100.0)
        u = update_image_sal(np.zeros_like(uref), dirac(3), rng.random((8, 8)), uref, 2, w)
        np.testing.assert_allclose(u, uref, rtol=1e-4, atol=1e-6)

    def test_weighted_least_squares_solution(self, rng):
        o, uref = rng.random((16, 16)), rng.random((16, 16))
        w = IterationWeights(0, 0, 0, 0, lam=0.01, eta=100.0)
        u = update_image_sal(o, dirac(1), o, uref, 1, w)
        np.testing.assert_allclose(u, (0.01 * o + 100 * uref) / 100.01, rtol=1e-4)

    def test_objective_decreases_from_reference(self, camera128):
        # with the l0 weight off the update is one CG solve of a convex
        # quadratic, so the exact objective cannot increase
        u_true = camera128[:32, :32]
        k = make_kernel(KernelSpec("gaussian", 5, 1.0))
        o = degrade(u_true, DegradeSpec(KernelSpec("gaussian", 5, 1.0), 2, 0.0))
        uref = resize_bicubic(o, 32, 32)
        w = IterationWeights(0.0, 10.0, 0.2, 1.0)
        u = update_image_sal(uref, k, o, uref, 2, w)
        before = _objective_oracle(uref, k, o, uref, 2, w)
        after = _objective_oracle(u, k, o, uref, 2, w)
        assert after <= before + 1e-6
        assert image_objective(u, k, o, uref, 2, w) == pytest.approx(after, rel=1e-9)

    def test_full_weights_flatten_small_gradients(self, camera128):
        u_true = camera128[:32, :32]
        o = degrade(u_true, DegradeSpec(KernelSpec("gaussian", 5, 1.0), 2, 0.0))
        uref = resize_bicubic(o, 32, 32)
        k = make_kernel(KernelSpec("gaussian", 5, 1.0))
        u = update_image_sal(uref, k, o, uref, 2, IterationWeights(1.0, 10.0, 0.2, 1.0))
        small = np.abs(np.diff(uref, axis=1)) < 0.05
        assert np.abs(np.diff(u, axis=1))[small].mean() < np.abs(np.diff(uref, axis=1))[small].mean()

    def test_shape_mismatch(self):
        with pytest.raises(DimensionError):
            update_image_sal(np.zeros((10, 10)), dirac(3), np.zeros((4, 4)), np.zeros((10, 10)), 2,
                             IterationWeights(1, 1, 1, 1))


class TestKernelUpdate:
    def test_dirac_is_recovered_from_ideal_images(self, camera128):
        u = camera128[:64, :64]
        o = degrade(u, DegradeSpec(KernelSpec("dirac", 1), 1, 0.0))
        k = update_kernel_sal(dirac(5), u, o, u, 1, IterationWeights(1.0, 10.0, 0.2, 1.0))
        assert kernel_ssd(k, dirac(5)).ssd <= 1e-3

    def test_blur_estimate_beats_dirac(self, camera128):
        u = camera128[40:88, 40:88]
        spec = DegradeSpec(KernelSpec("gaussian", 5, 1.0), 1, 0.0)
        kt = make_kernel(spec.kernel)
        o = degrade(u, spec)
        k = update_kernel_sal(dirac(5), u, o, o, 1, IterationWeights(1.0, 10.0, 0.2, 1.0))
        assert kernel_ssd(k, kt).ssd <= kernel_ssd(dirac(5), kt).ssd

    def test_output_always_feasible(self, rng):
        for _ in range(5):
            u = rng.standard_normal((20, 20))
            k = update_kernel_sal(rng.standard_normal((5, 5)), u, rng.standard_normal((10, 10)),
                                  rng.standard_normal((20, 20)), 2, IterationWeights(1, 1, 0.2, 1))
            assert np.all(k >= 0) and abs(k.sum() - 1) < 1e-12

    def test_image_smaller_than_support(self):
        with pytest.raises(DimensionError):
            update_kernel_sal(dirac(9), np.zeros((6, 6)), np.zeros((3, 3)), np.zeros((6, 6)), 2,
                              IterationWeights(1, 1, 1, 1))


class TestNormalOperators:
    @pytest.mark.parametrize("s", [1, 2, 3])
    def test_kernel_operator_symmetric(self, rng, s):
        u = rng.standard_normal((24, 24))
        A = kernel_normal_operator(u, s, 7, IterationWeights(1, 1, 0.2, 1.0), 1e3)
        x, y = rng.standard_normal((7, 7)), rng.standard_normal((7, 7))
        a, b = np.vdot(A(x), y), np.vdot(x, A(y))
        assert abs(a - b) <= 1e-8 * max(abs(a), 1)

    @pytest.mark.parametrize("s", [1, 2, 3])
    def test_image_operator_symmetric(self, rng, s):
        k = rng.random((5, 5))
        A = image_normal_operator(k, (18, 18), s, IterationWeights(1, 10, 0.2, 1.0), 100.0)
        x, y = rng.standard_normal((18, 18)), rng.standard_normal((18, 18))
        a, b = np.vdot(A(x), y), np.vdot(x, A(y))
        assert abs(a - b) <= 1e-8 * max(abs(a), 1)
        assert isinstance(A, LinearOperator)


def test_sal_params_validated():
    with pytest.raises(ValueError):
        SalParams(gamma_u=0)
