"""Flat ``key = value`` job configuration.

One setting per line, ``#`` starts a comment.  Values are resolved in the
order built-in defaults, then a config file, then command-line overrides.
List-valued keys (``kernel``, ``scale``, ``noise``) take comma-separated
values and expand to every combination when building benchmark conditions.
"""

import itertools
import logging
import os

from .degradation import DegradeSpec, parse_kernel_spec
from .estimator import REFERENCE_LAMBDA, REFERENCE_METHODS, EstimatorConfig, RegularizerVariant
from .nonblind import TvSrConfig
from .solvers import SalParams
from .validation import ConfigError

__all__ = ["JobConfig", "DEFAULTS", "HELP"]

logger = logging.getLogger(__name__)


def _bool(text):
    t = str(text).strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _list(conv):
    def parse(text):
        if isinstance(text, (list, tuple)):
            return [conv(v) for v in text]
        items = [v.strip() for v in str(text).split(",") if v.strip()]
        if not items:
            raise ValueError("empty list")
        return [conv(v) for v in items]

    parse.is_list = True
    return parse


def _kernel_item(text):
    parse_kernel_spec(text)  # validate eagerly so the error names the key
    return str(text).strip()


def _variant(text):
    return RegularizerVariant(str(text).strip()).value


def _reference(text):
    t = str(text).strip()
    if t not in REFERENCE_METHODS:
        raise ValueError(f"expected one of {', '.join(REFERENCE_METHODS)}")
    return t


_EST = EstimatorConfig()
_SAL = SalParams()
_TV = TvSrConfig()

# key -> (parser, default, help)
_SCHEMA = {
    # estimator
    "lam": (float, _EST.lam, "weight of the data fidelity term"),
    "eta": (float, _EST.eta, "weight of the consistency term with the reference"),
    "alpha_u": (float, _EST.alpha_u, "image l0 weight"),
    "beta_u": (float, _EST.beta_u, "image l2 weight"),
    "alpha_k": (float, _EST.alpha_k, "kernel l0 weight"),
    "beta_k": (float, _EST.beta_k, "kernel l2 weight"),
    "c_u": (float, _EST.c_u, "continuation factor for the image weights"),
    "c_k": (float, _EST.c_k, "continuation factor for the kernel weights"),
    "scales": (int, _EST.scales, "number of pyramid levels"),
    "outer_iters": (int, _EST.outer_iters, "alternating iterations per level"),
    "kernel_size": (int, _EST.kernel_size, "odd side length of the estimated kernel"),
    "gamma_u": (float, _SAL.gamma_u, "image splitting penalty"),
    "gamma_k": (float, _SAL.gamma_k, "kernel splitting penalty"),
    "inner_iters": (int, _SAL.inner_iters, "splitting rounds per update"),
    "cg_tol": (float, _SAL.cg_tol, "relative residual tolerance of CG"),
    "cg_max_iters": (int, _SAL.cg_max_iters, "iteration cap of CG"),
    "variant": (_variant, _EST.variant.value, "regularizer variant"),
    "reference_method": (_reference, _EST.reference_method, "how the reference upscale is made"),
    "reference_lambda": (float, REFERENCE_LAMBDA, "TV data weight used for the reference upscale"),
    "recenter": (_bool, _EST.recenter, "move the kernel centroid to the middle pixel"),
    # non-blind TV SR
    "tv_lambda": (float, _TV.lambda_data, "TV super-resolution data weight"),
    "tv_max_outer_iters": (int, _TV.max_outer_iters, "TV super-resolution Bregman iterations"),
    "tv_split_penalty": (float, _TV.split_penalty, "TV super-resolution splitting penalty"),
    "tv_tol": (float, _TV.tol, "TV super-resolution relative-change stopping tolerance"),
    "tv_cg_tol": (float, _TV.cg_tol, "TV super-resolution CG tolerance"),
    "tv_cg_max_iters": (int, _TV.cg_max_iters, "TV super-resolution CG iteration cap"),
    # degradation
    "kernel": (_list(_kernel_item), ["gaussian:7:1.5"], "blur kernel spec(s), e.g. gaussian:7:1.5"),
    "scale": (_list(int), [2], "upscaling factor(s)"),
    "noise": (_list(float), [0.0], "noise standard deviation(s) on the 0-255 scale"),
    "seed": (int, 0, "random seed for noise and random kernels"),
}

DEFAULTS = {k: v[1] for k, v in _SCHEMA.items()}
HELP = {k: v[2] for k, v in _SCHEMA.items()}


def _fmt(value):
    if isinstance(value, list):
        return ", ".join(_fmt(v) for v in value)
    if isinstance(value, bool):
        return "true" if value else "false"
    return repr(value) if isinstance(value, float) else str(value)


class JobConfig:
    """Resolved key-value settings for one CLI job."""

    def __init__(self, values=None):
        self.values = dict(DEFAULTS)
        self.sources = {k: "default" for k in DEFAULTS}
        if values:
            self.update(values, source="argument")

    @staticmethod
    def keys():
        return list(_SCHEMA)

    def set(self, key, raw, source="override"):
        if key not in _SCHEMA:
            raise ConfigError(f"unknown config key {key!r}")
        conv = _SCHEMA[key][0]
        try:
            value = conv(raw)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad value for {key!r}: {raw!r} ({exc})") from exc
        self.values[key] = value
        self.sources[key] = source

    def update(self, mapping, source="override"):
        for key, raw in mapping.items():
            if raw is not None:
                self.set(key, raw, source)
        return self

    def load(self, path):
        """Read a config file on top of the current values."""
        try:
            with open(path) as fh:
                lines = fh.readlines()
        except OSError as exc:
            raise ConfigError(f"cannot read config {os.fspath(path)!r}: {exc}") from exc
        for lineno, line in enumerate(lines, 1):
            text = line.split("#", 1)[0].strip()
            if not text:
                continue
            if "=" not in text:
                raise ConfigError(f"{os.fspath(path)}:{lineno}: expected 'key = value', got {text!r}")
            key, raw = (part.strip() for part in text.split("=", 1))
            try:
                self.set(key, raw, source=os.fspath(path))
            except ConfigError as exc:
                raise ConfigError(f"{os.fspath(path)}:{lineno}: {exc}") from exc
        return self

    @classmethod
    def resolve(cls, path=None, overrides=None):
        cfg = cls()
        if path is not None:
            cfg.load(path)
        if overrides:
            cfg.update(overrides)
        return cfg

    def __getitem__(self, key):
        return self.values[key]

    # builders -------------------------------------------------------------

    def tv_config(self):
        v = self.values
        try:
            return TvSrConfig(v["tv_lambda"], v["tv_max_outer_iters"], v["tv_split_penalty"],
                              v["tv_tol"], v["tv_cg_tol"], v["tv_cg_max_iters"])
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    def estimator_config(self):
        v = self.values
        try:
            sal = SalParams(v["gamma_u"], v["gamma_k"], v["inner_iters"], v["cg_tol"], v["cg_max_iters"])
            return EstimatorConfig(
                lam=v["lam"], eta=v["eta"], alpha_u=v["alpha_u"], beta_u=v["beta_u"],
                alpha_k=v["alpha_k"], beta_k=v["beta_k"], c_u=v["c_u"], c_k=v["c_k"],
                scales=v["scales"], outer_iters=v["outer_iters"], kernel_size=v["kernel_size"],
                sal=sal, variant=v["variant"], reference_method=v["reference_method"],
                reference_tv=TvSrConfig(lambda_data=v["reference_lambda"]), recenter=v["recenter"],
            )
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    def degrade_specs(self):
        """All (kernel, scale, noise) combinations, in file order."""
        v = self.values
        out = []
        for kern, s, noise in itertools.product(v["kernel"], v["scale"], v["noise"]):
            try:
                out.append(DegradeSpec(parse_kernel_spec(kern, v["seed"]), s, noise, v["seed"]))
            except ValueError as exc:
                raise ConfigError(str(exc)) from exc
        return out

    def single(self, key):
        """Value of a list key that must hold exactly one entry."""
        vals = self.values[key]
        if len(vals) != 1:
            raise ConfigError(f"config key {key!r} must hold a single value here, got {_fmt(vals)}")
        return vals[0]

    # output ---------------------------------------------------------------

    def dumps(self):
        lines = []
        for key in _SCHEMA:
            lines.append(f"{key} = {_fmt(self.values[key])}  # {self.sources[key]}")
        return "\n".join(lines) + "\n"

    def write_resolved(self, output_path):
        """Write ``<output_path>.resolved.cfg`` and return its path."""
        path = os.fspath(output_path) + ".resolved.cfg"
        with open(path, "w") as fh:
            fh.write(self.dumps())
        logger.info("resolved config:\n%s", self.dumps())
        return path
