# models/real.py
from dataclasses import dataclass
from fractions import Fraction

import mpmath

from config.settings import DEFAULT_PRECISION


def to_mpf(value):
    """Convert a Real, Fraction, int, float, str or mpf to an mpf at the current precision"""
    if isinstance(value, Real):
        return +value.value
    if isinstance(value, Fraction):
        return mpmath.mpf(value.numerator) / value.denominator
    return mpmath.mpf(value)


def precision_of(*values, default=DEFAULT_PRECISION):
    """Largest precision carried by any Real argument, else default"""
    bits = [v.precision_bits for v in values if isinstance(v, Real)]
    return max(bits) if bits else default


@dataclass(frozen=True)
class Real:
    """
    A precision-tagged real number

    value holds an mpf rounded at precision_bits or better. Arithmetic keeps
    the larger precision of the operands.
    """
    value: mpmath.mpf
    precision_bits: int = DEFAULT_PRECISION

    @classmethod
    def of(cls, value, precision_bits=None):
        bits = precision_bits or precision_of(value)
        with mpmath.workprec(bits):
            return cls(to_mpf(value), bits)

    def _binary(self, other, op):
        bits = precision_of(self, other, default=self.precision_bits)
        with mpmath.workprec(bits):
            return Real(op(to_mpf(self), to_mpf(other)), bits)

    def __add__(self, other):
        return self._binary(other, lambda a, b: a + b)

    def __radd__(self, other):
        return self._binary(other, lambda a, b: b + a)

    def __sub__(self, other):
        return self._binary(other, lambda a, b: a - b)

    def __rsub__(self, other):
        return self._binary(other, lambda a, b: b - a)

    def __mul__(self, other):
        return self._binary(other, lambda a, b: a * b)

    def __rmul__(self, other):
        return self._binary(other, lambda a, b: b * a)

    def __truediv__(self, other):
        return self._binary(other, lambda a, b: a / b)

    def __rtruediv__(self, other):
        return self._binary(other, lambda a, b: b / a)

    def __neg__(self):
        return Real(-self.value, self.precision_bits)

    def __abs__(self):
        return Real(abs(self.value), self.precision_bits)

    def _cmp_value(self, other):
        return other.value if isinstance(other, Real) else to_mpf(other)

    def __lt__(self, other):
        return self.value < self._cmp_value(other)

    def __le__(self, other):
        return self.value <= self._cmp_value(other)

    def __gt__(self, other):
        return self.value > self._cmp_value(other)

    def __ge__(self, other):
        return self.value >= self._cmp_value(other)

    def __float__(self):
        return float(self.value)

    def __str__(self):
        digits = max(1, int(self.precision_bits * 0.30103))
        return mpmath.nstr(self.value, digits)
