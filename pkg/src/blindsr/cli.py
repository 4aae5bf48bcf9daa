"""Command-line interface: ``blindsr <subcommand> ...``.

Exit status is 0 on success, 1 when an input file or operand is unusable
and 2 for configuration errors (unknown keys, bad values, bad flags).
"""

import argparse
import csv
import logging
import os
import sys

import numpy as np

from . import io
from .bench import run_ablation, run_benchmark
from .config import DEFAULTS, HELP, JobConfig, _fmt
from .degradation import degrade, make_kernel
from .estimator import estimate_kernel
from .metrics import kernel_ssd, psnr
from .nonblind import super_resolve_rgb, tv_super_resolve
from .validation import ConfigError, DimensionError

__all__ = ["main", "dispatch", "build_parser"]

logger = logging.getLogger("blindsr")

EST_KEYS = ("kernel_size", "lam", "eta", "alpha_u", "beta_u", "alpha_k", "beta_k", "c_u", "c_k",
            "scales", "outer_iters", "gamma_u", "gamma_k", "inner_iters", "cg_tol", "cg_max_iters",
            "variant", "reference_method", "reference_lambda", "recenter")
TV_KEYS = ("tv_lambda", "tv_max_outer_iters", "tv_split_penalty", "tv_tol", "tv_cg_tol", "tv_cg_max_iters")
DEG_KEYS = ("kernel", "scale", "noise", "seed")

TRACE_COLUMNS = ("scale", "iteration", "objective", "image_threshold", "kernel_threshold")


class OperandError(Exception):
    """An input file or positional operand cannot be used."""


def _add_keys(parser, keys, title):
    group = parser.add_argument_group(title)
    for key in keys:
        group.add_argument(
            "--" + key.replace("_", "-"), dest=key, default=None, metavar=key.upper(),
            help=f"{HELP[key]} (default: {_fmt(DEFAULTS[key])})",
        )


def _common(parser):
    parser.add_argument("--config", help="key = value config file; flags override its values")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress (one line per scale)")


def build_parser():
    p = argparse.ArgumentParser(prog="blindsr", description="Blind single-image super-resolution toolkit.")
    sub = p.add_subparsers(dest="command", required=True, metavar="COMMAND")

    d = sub.add_parser("degrade", help="blur, decimate and add noise to an image")
    d.add_argument("input", help="ground-truth image (PNG/PGM/PPM)")
    d.add_argument("-o", "--output", required=True, help="low-resolution output image")
    d.add_argument("--kernel-out", help="write the blur kernel to this text file")
    _common(d)
    _add_keys(d, DEG_KEYS, "degradation")

    e = sub.add_parser("estimate", help="estimate the blur kernel of a low-resolution image")
    e.add_argument("input", help="low-resolution image; colour inputs use their luma")
    e.add_argument("-o", "--output", required=True, help="estimated kernel text file")
    e.add_argument("--trace", help="write per-iteration objective and thresholds as CSV")
    e.add_argument("--uref", help="external reference upscale (s times the input size)")
    _common(e)
    _add_keys(e, ("scale",) + EST_KEYS, "estimation")

    s = sub.add_parser("sr", help="TV super-resolution with a known kernel")
    s.add_argument("input", help="low-resolution image")
    s.add_argument("--kernel", required=True, help="kernel text file")
    s.add_argument("-o", "--output", required=True, help="high-resolution output image")
    _common(s)
    _add_keys(s, ("scale",) + TV_KEYS, "reconstruction")

    b = sub.add_parser("bench", help="benchmark every image of a folder")
    b.add_argument("dataset", help="folder of ground-truth images")
    b.add_argument("-o", "--output", required=True, help="CSV report")
    b.add_argument("--markdown", help="also write the formatted table here")
    b.add_argument("--jobs", type=int, default=1, help="worker processes (default: 1)")
    b.add_argument("--timing", action="store_true", help="fill the runtime column (output is then not reproducible)")
    b.add_argument("--no-baselines", action="store_true", help="skip the bicubic-kernel and true-kernel rows")
    _common(b)
    _add_keys(b, DEG_KEYS, "degradation")
    _add_keys(b, EST_KEYS, "estimation")
    _add_keys(b, TV_KEYS, "reconstruction")

    a = sub.add_parser("ablate", help="compare regularizer variants on one image")
    a.add_argument("input", help="ground-truth image")
    a.add_argument("-o", "--output", required=True, help="CSV report")
    a.add_argument("--markdown", help="also write the formatted table here")
    a.add_argument("--timing", action="store_true", help="fill the runtime column")
    a.add_argument("--no-psnr", action="store_true", help="skip reconstruction and report kernel SSD only")
    _common(a)
    _add_keys(a, DEG_KEYS, "degradation")
    _add_keys(a, EST_KEYS, "estimation")
    _add_keys(a, TV_KEYS, "reconstruction")

    k = sub.add_parser("kernel-ssd", help="print the aligned SSD between two kernel files")
    k.add_argument("estimate")
    k.add_argument("truth")
    k.add_argument("-v", "--verbose", action="store_true", help=argparse.SUPPRESS)

    q = sub.add_parser("psnr", help="print the PSNR (dB) between two images")
    q.add_argument("estimate")
    q.add_argument("truth")
    q.add_argument("--crop-border", type=int, default=0, help="pixels ignored at each border (default: 0)")
    q.add_argument("-v", "--verbose", action="store_true", help=argparse.SUPPRESS)
    return p


def _resolve(args, keys):
    overrides = {key: getattr(args, key) for key in keys if getattr(args, key, None) is not None}
    return JobConfig.resolve(args.config, overrides)


def _read(reader, path):
    if not os.path.exists(path):
        raise OperandError(f"no such file: {path!r}")
    try:
        return reader(path)
    except io.FormatError as exc:
        raise OperandError(str(exc)) from exc


def _cmd_degrade(args):
    job = _resolve(args, DEG_KEYS)
    specs = job.degrade_specs()
    if len(specs) != 1:
        raise ConfigError("degrade needs a single kernel, scale and noise value")
    spec = specs[0]
    u = _read(io.read_image, args.input)
    k = make_kernel(spec.kernel)
    rng = np.random.default_rng(spec.rng_seed)
    if u.ndim == 3:
        o = np.stack([degrade(u[..., c], spec, rng) for c in range(3)], axis=-1)
    else:
        o = degrade(u, spec, rng)
    io.write_image(args.output, o)
    if args.kernel_out:
        io.write_kernel(args.kernel_out, k)
    job.write_resolved(args.output)


def _cmd_estimate(args):
    job = _resolve(args, ("scale",) + EST_KEYS)
    s = job.single("scale")
    o = _read(io.read_luma, args.input)
    external = None
    if args.uref:
        external = _read(io.read_luma, args.uref)
        expected = (o.shape[0] * s, o.shape[1] * s)
        if external.shape != expected:
            raise OperandError(f"reference {args.uref!r} is {external.shape}, expected {expected}")
        job.set("reference_method", "external-file", source="--uref")
    cfg = job.estimator_config()
    try:
        result = estimate_kernel(o, cfg, s, external=external)
    except (ConfigError, DimensionError) as exc:
        # input too small for the requested kernel size or pyramid
        raise OperandError(f"{args.input}: {exc}") from exc
    io.write_kernel(args.output, result.kernel)
    if args.trace:
        with open(args.trace, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(TRACE_COLUMNS)
            for row in result.trace:
                w.writerow([row["scale"], row["iteration"]] + [f"{row[c]:.10g}" for c in TRACE_COLUMNS[2:]])
    job.write_resolved(args.output)


def _cmd_sr(args):
    job = _resolve(args, ("scale",) + TV_KEYS)
    tv = job.tv_config()
    s = job.single("scale")
    o = _read(io.read_image, args.input)
    k = _read(io.read_kernel, args.kernel)
    if k.shape[0] != k.shape[1] or k.shape[0] % 2 == 0:
        raise OperandError(f"kernel {args.kernel!r} must be square with odd size, got {k.shape}")
    u = super_resolve_rgb(o, k, s, tv) if o.ndim == 3 else tv_super_resolve(o, k, s, tv)
    io.write_image(args.output, u)
    job.write_resolved(args.output)


def _write_report(report, args):
    report.to_csv(args.output, include_runtime=args.timing)
    table = report.to_markdown()
    if args.markdown:
        with open(args.markdown, "w") as fh:
            fh.write(table)
    sys.stdout.write(table)


def _cmd_bench(args):
    job = _resolve(args, DEG_KEYS + EST_KEYS + TV_KEYS)
    if not os.path.isdir(args.dataset):
        raise OperandError(f"dataset folder not found: {args.dataset!r}")
    if args.jobs < 1:
        raise ConfigError(f"--jobs must be >= 1, got {args.jobs}")
    report = run_benchmark(args.dataset, job.degrade_specs(), job.estimator_config(), job.tv_config(),
                           jobs=args.jobs, baselines=not args.no_baselines)
    _write_report(report, args)
    job.write_resolved(args.output)


def _cmd_ablate(args):
    job = _resolve(args, DEG_KEYS + EST_KEYS + TV_KEYS)
    specs = job.degrade_specs()
    if len(specs) != 1:
        raise ConfigError("ablate needs a single kernel, scale and noise value")
    _read(io.read_luma, args.input)
    tv = None if args.no_psnr else job.tv_config()
    report = run_ablation(args.input, specs[0], job.estimator_config(), tv)
    _write_report(report, args)
    job.write_resolved(args.output)


def _cmd_kernel_ssd(args):
    a = _read(io.read_kernel, args.estimate)
    b = _read(io.read_kernel, args.truth)
    for path, k in ((args.estimate, a), (args.truth, b)):
        if k.shape[0] != k.shape[1] or k.shape[0] % 2 == 0:
            raise OperandError(f"kernel {path!r} must be square with odd size, got {k.shape}")
    print(f"{kernel_ssd(a, b).ssd:.6f}")


def _cmd_psnr(args):
    a = _read(io.read_luma, args.estimate)
    b = _read(io.read_luma, args.truth)
    try:
        value = psnr(a, b, args.crop_border)
    except ValueError as exc:
        raise OperandError(str(exc)) from exc
    print(f"{value:.2f}")


COMMANDS = {
    "degrade": _cmd_degrade,
    "estimate": _cmd_estimate,
    "sr": _cmd_sr,
    "bench": _cmd_bench,
    "ablate": _cmd_ablate,
    "kernel-ssd": _cmd_kernel_ssd,
    "psnr": _cmd_psnr,
}


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"blindsr {args.command}: config error: {exc}", file=sys.stderr)
        return 2
    except (OperandError, DimensionError, io.FormatError, OSError) as exc:
        print(f"blindsr {args.command}: {exc}", file=sys.stderr)
        return 1
    return 0


dispatch = main


def run():
    sys.exit(main())


if __name__ == "__main__":
    run()
