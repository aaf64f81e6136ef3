"""Small argument checks shared across modules."""

import numbers

import numpy as np

CATEGORIES = ("hard", "inter", "easy")


class ConfigError(ValueError):
    """Raised for invalid hyperparameters or configuration files."""


def check_probability(value, name, *, allow_one=False):
    if not isinstance(value, numbers.Real) or isinstance(value, bool):
        raise ConfigError(f"{name} must be a real number, got {value!r}")
    upper_ok = value <= 1.0 if allow_one else value < 1.0
    if not (0.0 <= value and upper_ok):
        bound = "[0, 1]" if allow_one else "[0, 1)"
        raise ConfigError(f"{name} must lie in {bound}, got {value}")
    return float(value)


def check_positive_int(value, name, *, minimum=1):
    if not isinstance(value, numbers.Integral) or isinstance(value, bool):
        raise ConfigError(f"{name} must be an integer, got {value!r}")
    if value < minimum:
        raise ConfigError(f"{name} must be >= {minimum}, got {value}")
    return int(value)


def check_ratios(ratios):
    """Validate an (easy, hard, inter) triple and return it as floats.

    A mapping keyed by category name is also accepted.
    """
    if isinstance(ratios, dict):
        try:
            ratios = (ratios["easy"], ratios["hard"], ratios["inter"])
        except KeyError as exc:
            raise ConfigError(f"ratios mapping is missing {exc}") from None
    ratios = tuple(float(r) for r in ratios)
    if len(ratios) != 3:
        raise ConfigError(f"ratios must have three entries (easy, hard, inter), got {ratios}")
    if any(r < 0 or not np.isfinite(r) for r in ratios):
        raise ConfigError(f"ratios must be non-negative, got {ratios}")
    if abs(sum(ratios) - 1.0) > 1e-9:
        raise ConfigError(f"ratios must sum to 1, got sum {sum(ratios)}")
    return ratios


def check_finite(arr, name):
    arr = np.asarray(arr, dtype=np.float64)
    if not np.all(np.isfinite(arr)):
        raise FloatingPointError(f"{name} contains non-finite values")
    return arr
