"""Input validation helpers shared by the operators, solvers and estimators."""

import numbers

import numpy as np
from sklearn.utils.validation import check_array


class DimensionError(ValueError):
    """Operand shapes are incompatible with the requested operator."""


class ConfigError(ValueError):
    """A configuration value is invalid or inconsistent."""


def check_image(img, name="image", copy=False):
    """Return ``img`` as a finite 2-D float64 array.

    Raises ``ValueError`` for NaN/Inf entries or wrong dimensionality.
    """
    try:
        arr = check_array(
            img,
            dtype=np.float64,
            ensure_2d=True,
            ensure_all_finite=True,
            ensure_min_samples=1,
            ensure_min_features=1,
            copy=copy,
            input_name=name,
        )
    except ValueError as exc:
        raise ValueError(f"{name}: {exc}") from exc
    return arr


def check_kernel(k, name="kernel"):
    """Return ``k`` as a finite square odd-sized float64 array."""
    arr = check_image(k, name=name)
    rows, cols = arr.shape
    if rows != cols or rows % 2 == 0:
        raise DimensionError(f"{name} must be square with odd side length, got {arr.shape}")
    return arr


def check_scale(s, name="scale"):
    if isinstance(s, bool) or not isinstance(s, numbers.Integral):
        raise TypeError(f"{name} must be an integer, got {s!r}")
    if s < 1:
        raise ValueError(f"{name} must be >= 1, got {s}")
    return int(s)


def check_odd_size(n, name="kernel_size"):
    if isinstance(n, bool) or not isinstance(n, numbers.Integral) or n < 1 or n % 2 == 0:
        raise ConfigError(f"{name} must be a positive odd integer, got {n!r}")
    return int(n)


def check_positive(value, name, allow_zero=False):
    value = float(value)
    if not np.isfinite(value) or value < 0 or (value == 0 and not allow_zero):
        bound = ">= 0" if allow_zero else "> 0"
        raise ConfigError(f"{name} must be {bound}, got {value!r}")
    return value
