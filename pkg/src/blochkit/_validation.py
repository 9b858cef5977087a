"""Small argument checks shared by the public entry points."""

import numpy as np

from .errors import ConfigError


def as_vector(x, d=None, name="x"):
    arr = np.asarray(x, dtype=float)
    if arr.ndim != 1:
        raise ConfigError(f"{name} must be a 1-D vector, got shape {arr.shape}")
    if d is not None and len(arr) != d:
        raise ConfigError(f"{name} must have {d} components, got {len(arr)}")
    if not np.all(np.isfinite(arr)):
        raise ConfigError(f"{name} has non-finite entries")
    return arr


def as_int_vector(v, d=None, name="vector"):
    arr = np.asarray(v)
    if arr.ndim != 1 or (d is not None and len(arr) != d):
        raise ConfigError(f"{name} must be an integer vector of length {d}")
    as_float = arr.astype(float)
    if not np.all(np.isfinite(as_float)) or np.any(as_float != np.round(as_float)):
        raise ConfigError(f"{name} must have integer entries, got {arr.tolist()}")
    return np.round(as_float).astype(int)


def positive(value, name):
    try:
        v = float(value)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{name} must be a number, got {value!r}") from exc
    if not np.isfinite(v) or v <= 0:
        raise ConfigError(f"{name} must be positive, got {value!r}")
    return v


def positive_int(value, name):
    if isinstance(value, bool) or int(value) != value or int(value) <= 0:
        raise ConfigError(f"{name} must be a positive integer, got {value!r}")
    return int(value)


def choice(value, options, name):
    if value not in options:
        raise ConfigError(f"{name} must be one of {sorted(options)}, got {value!r}")
    return value
