# models/jet.py
from dataclasses import dataclass

import mpmath

from config.settings import DEFAULT_PRECISION
from utils.errors import InsufficientOrderError


@dataclass(frozen=True)
class Jet:
    """
    Truncated Taylor tower of a function at base_point

    coeffs[n] holds f^(n)(x)/n!, so the jet carries derivatives 0..order.
    """
    base_point: mpmath.mpf
    coeffs: tuple
    precision_bits: int = DEFAULT_PRECISION

    def __post_init__(self):
        if not self.coeffs:
            raise ValueError("a jet needs at least the value coefficient")

    @property
    def order(self):
        return len(self.coeffs) - 1

    @property
    def value(self):
        return self.coeffs[0]

    def derivative(self, n):
        """f^(n)(x) = coeffs[n] * n!"""
        if n > self.order:
            raise InsufficientOrderError(f"jet of order {self.order} has no derivative {n}")
        return self.coeffs[n] * mpmath.factorial(n)

    def derivatives(self):
        return [self.derivative(n) for n in range(self.order + 1)]

    def differentiate(self):
        """Jet of f' with one order fewer"""
        if self.order == 0:
            raise InsufficientOrderError("cannot differentiate a jet of order 0")
        return Jet(self.base_point,
                   tuple((k + 1) * self.coeffs[k + 1] for k in range(self.order)),
                   self.precision_bits)

    def truncate(self, order):
        if order > self.order:
            raise InsufficientOrderError(f"jet of order {self.order} cannot be extended to {order}")
        return Jet(self.base_point, self.coeffs[:order + 1], self.precision_bits)

    @classmethod
    def variable(cls, x, order, precision_bits=DEFAULT_PRECISION):
        coeffs = [mpmath.mpf(x)] + [mpmath.mpf(1)] + [mpmath.mpf(0)] * (order - 1)
        return cls(mpmath.mpf(x), tuple(coeffs[:order + 1]), precision_bits)

    @classmethod
    def constant(cls, value, x, order, precision_bits=DEFAULT_PRECISION):
        return cls(mpmath.mpf(x), (mpmath.mpf(value),) + (mpmath.mpf(0),) * order, precision_bits)
