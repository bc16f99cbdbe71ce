# tests/helpers.py
import mpmath

from models.real import Real


def close(actual, expected, bits):
    """|actual - expected| <= 2^-bits * max(|expected|, 1)"""
    actual = actual.value if isinstance(actual, Real) else mpmath.mpf(actual)
    expected = expected.value if isinstance(expected, Real) else mpmath.mpf(expected)
    return abs(actual - expected) <= mpmath.ldexp(1, -bits) * max(abs(expected), 1)
