# services/numkernel.py
"""
Extended-precision scalar kernel

Public operations take Real-like arguments (Real, mpf, int, float, Fraction,
str) and return Real values at precision P. Internally they run at
P + 2 * GUARD_BITS and promise relative error at most 2^-(P - GUARD_BITS).

The *_raw functions work on bare mpf values at the caller's current mpmath
working precision; the jet engine uses them inside its own precision context.
"""
import logging
import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import mpmath

from config.settings import GUARD_BITS, MIN_PRECISION
from models.real import Real, precision_of, to_mpf
from utils.errors import DomainError

logger = logging.getLogger(__name__)

ASYMPTOTIC_FLOOR = 10  # smallest argument handed to an asymptotic series
MAX_F_TERMS = 10 ** 7
QUAD_MAX_DEPTH = 40

# Coefficients of B_k(a) in ascending powers of a
BERNOULLI_POLYNOMIALS = {
    1: (Fraction(-1, 2), Fraction(1)),
    2: (Fraction(1, 6), Fraction(-1), Fraction(1)),
    3: (Fraction(0), Fraction(1, 2), Fraction(-3, 2), Fraction(1)),
}


def working_bits(precision):
    return precision + 2 * GUARD_BITS


def _check_precision(precision):
    if precision < MIN_PRECISION:
        raise DomainError(f"precision {precision} is below the minimum of {MIN_PRECISION} bits")
    return precision


def _finish(value, precision):
    with mpmath.workprec(precision):
        return Real(+value, precision)


def lift_threshold(prec, order=0):
    """Argument above which the asymptotic series is used directly"""
    return max(ASYMPTOTIC_FLOOR, prec // 4, 2 * order)


def _lift_count(x, order=0):
    threshold = lift_threshold(mpmath.mp.prec, order)
    if x >= threshold:
        return 0
    return int(mpmath.ceil(threshold - x))


# ---------------------------------------------------------------------------
# Constants and Bernoulli polynomials
# ---------------------------------------------------------------------------

def euler_gamma(precision):
    """Euler-Mascheroni constant"""
    _check_precision(precision)
    with mpmath.workprec(working_bits(precision)):
        return _finish(+mpmath.euler, precision)


@lru_cache(maxsize=None)
def bernoulli_coefficients(k):
    """Ascending-power coefficients of B_k as Fractions"""
    if k <= 0:
        raise DomainError(f"Bernoulli polynomial index must be >= 1, got {k}")
    if k in BERNOULLI_POLYNOMIALS:
        return BERNOULLI_POLYNOMIALS[k]
    # B_k(a) = sum_j C(k, j) B_j a^(k-j)
    coeffs = [Fraction(0)] * (k + 1)
    for j in range(k + 1):
        num, den = mpmath.bernfrac(j)
        coeffs[k - j] = math.comb(k, j) * Fraction(int(num), int(den))
    return tuple(coeffs)


def _horner(coeffs, a):
    acc = 0 * a
    for c in reversed(coeffs):
        if isinstance(a, Fraction):
            acc = acc * a + c
        else:
            acc = acc * a + to_mpf(c)
    return acc


def bernoulli_poly(k, a, precision=None):
    """
    Evaluate the Bernoulli polynomial B_k(a)

    Rational arguments (int or Fraction) give an exact Fraction; anything else
    gives a Real.
    """
    coeffs = bernoulli_coefficients(k)
    if isinstance(a, (int, Fraction)) and not isinstance(a, bool):
        return _horner(coeffs, Fraction(a))
    precision = _check_precision(precision or precision_of(a))
    with mpmath.workprec(working_bits(precision)):
        return _finish(_horner(coeffs, to_mpf(a)), precision)


def bernoulli_poly_raw(k, a):
    return _horner(bernoulli_coefficients(k), a)


# ---------------------------------------------------------------------------
# log Gamma, digamma, polygamma
# ---------------------------------------------------------------------------

def _require_positive(x, name):
    if not x > 0:
        raise DomainError(f"{name} requires x > 0, got {mpmath.nstr(x, 10)}")


def log_gamma_raw(x):
    """log Gamma(x) for x > 0 at the current working precision"""
    _require_positive(x, "log_gamma")
    n = _lift_count(x)
    z = x + n
    eps = mpmath.eps
    total = (z - mpmath.mpf(0.5)) * mpmath.log(z) - z + mpmath.log(2 * mpmath.pi) / 2
    zinv = 1 / z
    zinv2 = zinv * zinv
    power = zinv
    previous = mpmath.inf
    k = 1
    while True:
        term = mpmath.bernoulli(2 * k) / (2 * k * (2 * k - 1)) * power
        magnitude = abs(term)
        if magnitude > previous:
            logger.debug(f"log_gamma series turned divergent at k={k} (z={mpmath.nstr(z, 8)})")
            break
        total += term
        if magnitude <= eps * abs(total):
            break
        previous = magnitude
        power *= zinv2
        k += 1
    if n:
        total -= mpmath.log(mpmath.rf(x, n))
    return total


def _asymptotic_tower(z, top):
    """psi^(m)(z) for m = 0..top from the Bernoulli-number series"""
    eps = mpmath.eps
    zinv = 1 / z
    zinv2 = zinv * zinv
    out = []

    total = mpmath.log(z) - zinv / 2
    power = zinv2
    previous = mpmath.inf
    k = 1
    while True:
        term = mpmath.bernoulli(2 * k) / (2 * k) * power
        magnitude = abs(term)
        if magnitude > previous:
            break
        total -= term
        if magnitude <= eps * abs(total):
            break
        previous = magnitude
        power *= zinv2
        k += 1
    out.append(total)

    zpow = zinv  # z^-m
    for m in range(1, top + 1):
        zpow_next = zpow * zinv
        fact = mpmath.factorial(m - 1)
        total = fact * zpow + fact * m * zpow_next / 2
        power = zpow_next * zinv
        previous = mpmath.inf
        k = 1
        while True:
            term = mpmath.bernoulli(2 * k) * mpmath.rf(2 * k + 1, m - 1) * power
            magnitude = abs(term)
            if magnitude > previous:
                break
            total += term
            if magnitude <= eps * abs(total):
                break
            previous = magnitude
            power *= zinv2
            k += 1
        out.append(total if m % 2 == 1 else -total)
        zpow = zpow_next
    return out


def polygamma_tower_raw(x, top):
    """[psi(x), psi'(x), ..., psi^(top)(x)] for x > 0 at the current working precision"""
    _require_positive(x, "polygamma")
    n = _lift_count(x, top)
    tower = _asymptotic_tower(x + n, top)
    if n:
        # psi^(m)(x) = psi^(m)(x+n) - (-1)^m m! sum_j (x+j)^-(m+1)
        sums = [mpmath.mpf(0)] * (top + 1)
        for j in range(n):
            inv = 1 / (x + j)
            p = inv
            for m in range(top + 1):
                sums[m] += p
                p *= inv
        for m in range(top + 1):
            sign = 1 if m % 2 == 0 else -1
            tower[m] -= sign * mpmath.factorial(m) * sums[m]
    return tower


def digamma_raw(x):
    return polygamma_tower_raw(x, 0)[0]


def log_gamma(x, precision=None):
    """log Gamma(x) for real x > 0"""
    precision = _check_precision(precision or precision_of(x))
    with mpmath.workprec(working_bits(precision)):
        return _finish(log_gamma_raw(to_mpf(x)), precision)


def digamma(x, precision=None):
    """psi(x) = Gamma'(x)/Gamma(x) for real x > 0"""
    precision = _check_precision(precision or precision_of(x))
    with mpmath.workprec(working_bits(precision)):
        return _finish(digamma_raw(to_mpf(x)), precision)


def polygamma(m, x, precision=None):
    """psi^(m)(x) for m >= 1 and real x > 0"""
    if m < 1:
        raise DomainError(f"polygamma order must be >= 1, got {m}")
    precision = _check_precision(precision or precision_of(x))
    with mpmath.workprec(working_bits(precision)):
        return _finish(polygamma_tower_raw(to_mpf(x), m)[m], precision)


def digamma_series(x, precision=None):
    """
    psi(x) from -gamma - 1/x + sum_{k>=1} x/(k(x+k)), summed with acceleration

    Independent of the lift-and-asymptotic path; used for cross-validation.
    """
    precision = _check_precision(precision or precision_of(x))
    with mpmath.workprec(working_bits(precision)):
        z = to_mpf(x)
        _require_positive(z, "digamma_series")
        tail = mpmath.nsum(lambda k: z / (k * (z + k)), [1, mpmath.inf])
        return _finish(-mpmath.euler - 1 / z + tail, precision)


# ---------------------------------------------------------------------------
# Truncated asymptotic expansions
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PsiExpansion:
    """Truncated large-x expansion of psi^(m)(x + shift) with term_count Bernoulli terms"""
    shift: object = 0
    term_count: int = 1
    derivative_order: int = 0

    def __post_init__(self):
        if self.term_count not in (1, 2, 3):
            raise DomainError(f"term_count must be 1, 2 or 3, got {self.term_count}")
        if self.derivative_order not in (0, 1):
            raise DomainError(f"derivative_order must be 0 or 1, got {self.derivative_order}")

    @property
    def error_exponent(self):
        """Exponent e in the O(x^e) truncation error"""
        return -(self.term_count + 1 + self.derivative_order)


def psi_asymptotic(x, expansion, precision=None):
    """
    Truncated expansion of psi(x+a) or psi'(x+a) in powers of 1/x

        psi(x+a)  ~ log x + sum_{k<K} (-1)^k B_{k+1}(a)/(k+1) x^-(k+1)
        psi'(x+a) ~ 1/x   + sum_{k<K} (-1)^(k+1) B_{k+1}(a) x^-(k+2)
    """
    precision = _check_precision(precision or precision_of(x, expansion.shift))
    with mpmath.workprec(working_bits(precision)):
        z = to_mpf(x)
        if z < ASYMPTOTIC_FLOOR:
            raise DomainError(f"psi_asymptotic requires x >= {ASYMPTOTIC_FLOOR}, got {mpmath.nstr(z, 10)}")
        a = to_mpf(expansion.shift)
        zinv = 1 / z
        if expansion.derivative_order == 0:
            total = mpmath.log(z)
            for k in range(expansion.term_count):
                total += (-1) ** k * bernoulli_poly_raw(k + 1, a) / (k + 1) * zinv ** (k + 1)
        else:
            total = zinv
            for k in range(expansion.term_count):
                total += (-1) ** (k + 1) * bernoulli_poly_raw(k + 1, a) * zinv ** (k + 2)
        return _finish(total, precision)


# ---------------------------------------------------------------------------
# Series and quadrature
# ---------------------------------------------------------------------------

def F_series(a, b, x, tol, precision=None):
    """
    F(a,b,x) = 1/(x+b) + (x+a) sum_{k>=1} 1/((x+a+k)(x+b+k))

    Summation stops at the first K with (x+a)/(K min(K+x+a, K+x+b)) <= tol,
    which bounds the neglected tail.
    """
    precision = _check_precision(precision or precision_of(a, b, x))
    with mpmath.workprec(working_bits(precision)):
        a, b, x, tol = (to_mpf(v) for v in (a, b, x, tol))
        u, v = x + a, x + b
        if not (u > 0 and v > 0):
            raise DomainError("F_series requires x > -a and x > -b")
        if not tol > 0:
            raise DomainError("F_series requires tol > 0")
        shift = min(u, v)
        # smallest K with u / (K (K + shift)) <= tol
        terms = int(mpmath.ceil((-shift + mpmath.sqrt(shift * shift + 4 * u / tol)) / 2))
        terms = max(terms, 1)
        while u / (terms * (terms + shift)) > tol:
            terms += 1
        if terms > MAX_F_TERMS:
            raise DomainError(f"F_series tolerance needs {terms} terms, above the cap of {MAX_F_TERMS}")
        logger.debug(f"F_series summing {terms} terms")
        tail = mpmath.fsum(1 / ((u + k) * (v + k)) for k in range(1, terms + 1))
        return _finish(1 / v + u * tail, precision)


def _adaptive_quad(f, lo, hi, tol, depth=0):
    value, error = mpmath.quad(f, [lo, hi], error=True, maxdegree=6)
    if error <= tol or depth >= QUAD_MAX_DEPTH:
        if error > tol:
            logger.warning(f"Quadrature depth cap hit on [{mpmath.nstr(lo, 6)}, {mpmath.nstr(hi, 6)}]")
        return value
    mid = (lo + hi) / 2
    return (_adaptive_quad(f, lo, mid, tol / 2, depth + 1)
            + _adaptive_quad(f, mid, hi, tol / 2, depth + 1))


def frullani_quad(s, A, B, tol, precision=None):
    """
    Integral over (0, inf) of e^(-st) (e^(-Bt) - e^(-At)) / t, which equals
    log((s+A)/(s+B))

    The head [0, T] is integrated by adaptive bisection; T is chosen so the
    tail is below tol/2.
    """
    precision = _check_precision(precision or precision_of(s, A, B))
    with mpmath.workprec(working_bits(precision)):
        s, A, B, tol = (to_mpf(v) for v in (s, A, B, tol))
        if not (s + A > 0 and s + B > 0):
            raise DomainError("frullani_quad requires s + A > 0 and s + B > 0")
        if not tol > 0:
            raise DomainError("frullani_quad requires tol > 0")
        if A == B:
            return _finish(mpmath.mpf(0), precision)

        rate = min(s + A, s + B)
        diff = A - B

        def integrand(t):
            if t == 0:
                return diff
            return -mpmath.exp(-(s + B) * t) * mpmath.expm1(-diff * t) / t

        # |tail| <= 2 e^(-rate T) / (rate T)
        horizon = 1 / rate
        while 2 * mpmath.exp(-rate * horizon) / (rate * horizon) > tol / 2:
            horizon *= 2
        logger.debug(f"frullani_quad head [0, {mpmath.nstr(horizon, 6)}]")
        return _finish(_adaptive_quad(integrand, mpmath.mpf(0), horizon, tol / 2), precision)
