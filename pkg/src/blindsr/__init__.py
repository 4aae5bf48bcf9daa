"""Blind single-image super-resolution with bi-l0-l2 regularized kernel estimation."""

from .degradation import DegradeSpec, KernelSpec, degrade, make_kernel, parse_kernel_spec
from .estimator import (
    BlindSuperResolver,
    EstimatorConfig,
    RegularizerVariant,
    build_pyramid,
    continuation_weights,
    estimate_kernel,
    recenter_kernel,
    reference_upscale,
)
from .bench import BenchmarkReport, run_ablation, run_benchmark
from .config import JobConfig
from .metrics import kernel_ssd, psnr
from .nonblind import TvSrConfig, TVSuperResolver, bicubic_kernel, tv_super_resolve
from .solvers import SalParams, cg_solve, hard_threshold, project_kernel_constraints

__version__ = "0.1.0"
