"""Small argument checkers shared by the public functions."""

import math


def check_finite(value, name):
    value = float(value)
    if not math.isfinite(value):
        raise ValueError(f"{name} must be finite, got {value!r}")
    return value


def check_positive(value, name):
    value = check_finite(value, name)
    if value <= 0:
        raise ValueError(f"{name} must be > 0, got {value!r}")
    return value


def check_in_range(value, name, low, high, *, low_inclusive=True, high_inclusive=True):
    """Return ``value`` as float, raising ``ValueError`` if outside the interval."""
    value = check_finite(value, name)
    below = value < low if low_inclusive else value <= low
    above = value > high if high_inclusive else value >= high
    if below or above:
        lb = "[" if low_inclusive else "("
        hb = "]" if high_inclusive else ")"
        raise ValueError(f"{name} must be in {lb}{low}, {high}{hb}, got {value!r}")
    return value


def check_probability(value, name):
    return check_in_range(value, name, 0.0, 1.0)


def check_positive_int(value, name, minimum=1):
    if isinstance(value, bool) or int(value) != value:
        raise ValueError(f"{name} must be an integer, got {value!r}")
    value = int(value)
    if value < minimum:
        raise ValueError(f"{name} must be >= {minimum}, got {value}")
    return value
