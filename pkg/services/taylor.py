# services/taylor.py
"""
Truncated Taylor (jet) arithmetic

All jets store scaled coefficients f^(n)(x)/n!. Operations run at the caller's
mpmath working precision; the public entry points set that precision from P.
"""
import logging
import math
from fractions import Fraction

import mpmath

from config.settings import MAX_ORDER, default_precision
from models.expr import (Add, Const, Cos, Digamma, Div, Exp, FamilyRef, Log, LogGamma, Mul,
                         Neg, Polygamma, Pow, QuotientByX, Sin, Sub, Var, const_value)
from models.jet import Jet
from models.real import Real, precision_of, to_mpf
from services import numkernel
from utils.errors import DomainError, InsufficientOrderError

logger = logging.getLogger(__name__)

QUOTIENT_SERIES_RADIUS = Fraction(1, 256)  # |x| at or below this uses the series about 0
FD_MAX_ORDER = 12


def _check_compatible(a, b):
    if a.order != b.order:
        raise ValueError(f"jet orders differ: {a.order} vs {b.order}")
    if a.base_point != b.base_point:
        raise ValueError("jets are based at different points")


def _as_jet(value, like):
    if isinstance(value, Jet):
        _check_compatible(value, like)
        return value
    return Jet.constant(to_mpf(value), like.base_point, like.order, like.precision_bits)


def _pair(a, b):
    like = a if isinstance(a, Jet) else b
    return _as_jet(a, like), _as_jet(b, like)


def _new(like, coeffs):
    return Jet(like.base_point, tuple(coeffs), like.precision_bits)


def add(a, b):
    a, b = _pair(a, b)
    return _new(a, (x + y for x, y in zip(a.coeffs, b.coeffs)))


def sub(a, b):
    a, b = _pair(a, b)
    return _new(a, (x - y for x, y in zip(a.coeffs, b.coeffs)))


def neg(a):
    return _new(a, (-c for c in a.coeffs))


def scale(a, factor):
    factor = to_mpf(factor)
    return _new(a, (factor * c for c in a.coeffs))


def mul(a, b):
    """Cauchy product: the Leibniz rule on scaled coefficients"""
    a, b = _pair(a, b)
    ac, bc = a.coeffs, b.coeffs
    return _new(a, (mpmath.fdot(ac[:n + 1], bc[n::-1]) for n in range(a.order + 1)))


def div(a, b):
    a, b = _pair(a, b)
    b0 = b.coeffs[0]
    if b0 == 0:
        raise DomainError("division by a jet with zero leading value")
    out = []
    for n in range(a.order + 1):
        acc = a.coeffs[n] - mpmath.fdot(b.coeffs[1:n + 1], out[::-1]) if n else a.coeffs[0]
        out.append(acc / b0)
    return _new(a, out)


def recip(a):
    return div(Jet.constant(1, a.base_point, a.order, a.precision_bits), a)


def exp(a):
    out = [mpmath.exp(a.coeffs[0])]
    for n in range(1, a.order + 1):
        out.append(mpmath.fsum(k * a.coeffs[k] * out[n - k] for k in range(1, n + 1)) / n)
    return _new(a, out)


def log(a):
    a0 = a.coeffs[0]
    if not a0 > 0:
        raise DomainError("log of a jet with nonpositive leading value")
    out = [mpmath.log(a0)]
    for n in range(1, a.order + 1):
        acc = mpmath.fsum(k * out[k] * a.coeffs[n - k] for k in range(1, n)) / n
        out.append((a.coeffs[n] - acc) / a0)
    return _new(a, out)


def _is_integral(c):
    if isinstance(c, Fraction):
        return c.denominator == 1
    return mpmath.isint(c)


def pow_const(a, c):
    """a^c; integer c uses the power recurrence, other c goes through exp(c log a)"""
    if _is_integral(c):
        c = int(c)
        if c == 0:
            return Jet.constant(1, a.base_point, a.order, a.precision_bits)
        a0 = a.coeffs[0]
        if a0 == 0:
            if c < 0:
                raise DomainError("negative power of a jet with zero leading value")
            result, power, k = None, a, c
            while k:
                if k & 1:
                    result = power if result is None else mul(result, power)
                k >>= 1
                if k:
                    power = mul(power, power)
            return result
        out = [a0 ** c]
        for n in range(1, a.order + 1):
            acc = mpmath.fsum(((c + 1) * k - n) * a.coeffs[k] * out[n - k] for k in range(1, n + 1))
            out.append(acc / (n * a0))
        return _new(a, out)
    if not a.coeffs[0] > 0:
        raise DomainError("non-integer power of a jet with nonpositive leading value")
    return exp(scale(log(a), c))


def sin_cos(a):
    s = [mpmath.sin(a.coeffs[0])]
    c = [mpmath.cos(a.coeffs[0])]
    for n in range(1, a.order + 1):
        s.append(mpmath.fsum(k * a.coeffs[k] * c[n - k] for k in range(1, n + 1)) / n)
        c.append(-mpmath.fsum(k * a.coeffs[k] * s[n - k] for k in range(1, n + 1)) / n)
    return _new(a, s), _new(a, c)


def compose(outer, inner):
    """
    Jet of g(inner) from the scaled Taylor coefficients of g at inner's value

    outer[k] = g^(k)(u0)/k! with u0 = inner.coeffs[0].
    """
    order = inner.order
    if len(outer) < order + 1:
        raise InsufficientOrderError("outer coefficients shorter than the inner jet")
    slope = inner.coeffs[1] if order else 0
    if all(c == 0 for c in inner.coeffs[2:]):
        return _new(inner, (outer[k] * slope ** k for k in range(order + 1)))
    shifted = _new(inner, (mpmath.mpf(0),) + inner.coeffs[1:])
    result = Jet.constant(outer[order], inner.base_point, order, inner.precision_bits)
    for k in range(order - 1, -1, -1):
        result = add(mul(result, shifted), outer[k])
    return result


OPERATIONS = {
    'add': add,
    'sub': sub,
    'mul': mul,
    'div': div,
    'neg': neg,
    'recip': recip,
    'exp': exp,
    'log': log,
    'pow_const': pow_const,
}


def jet_arith(op, *args):
    """Apply a named jet operation (add, sub, mul, div, neg, pow_const, exp, log, recip)"""
    try:
        func = OPERATIONS[op]
    except KeyError:
        raise ValueError(f"Unknown jet operation: {op}")
    return func(*args)


# ---------------------------------------------------------------------------
# Special-function towers
# ---------------------------------------------------------------------------

def loggamma_coeffs(u0, order):
    """[log Gamma(u0), psi(u0)/1!, psi'(u0)/2!, ..., psi^(order-1)(u0)/order!]"""
    out = [numkernel.log_gamma_raw(u0)]
    if order:
        tower = numkernel.polygamma_tower_raw(u0, order - 1)
        out.extend(tower[n - 1] / mpmath.factorial(n) for n in range(1, order + 1))
    return out


def polygamma_coeffs(u0, m, order):
    """[psi^(m)(u0)/0!, psi^(m+1)(u0)/1!, ..., psi^(m+order)(u0)/order!]"""
    tower = numkernel.polygamma_tower_raw(u0, m + order)
    return [tower[m + n] / mpmath.factorial(n) for n in range(order + 1)]


def tower_loggamma(x, order, precision=None):
    """Jet of log Gamma at x > 0: (log Gamma, psi, psi', ..., psi^(N-1)) scaled by n!"""
    _check_order(order)
    precision = precision or precision_of(x, default=default_precision(order))
    with mpmath.workprec(numkernel.working_bits(precision)):
        x0 = to_mpf(x)
        return Jet(x0, tuple(loggamma_coeffs(x0, order)), precision)


# ---------------------------------------------------------------------------
# Expression evaluation
# ---------------------------------------------------------------------------

def _check_order(order):
    if not 0 <= order <= MAX_ORDER:
        raise InsufficientOrderError(f"derivative order must lie in [0, {MAX_ORDER}], got {order}")


def _describe(e):
    from services.parser import to_text
    try:
        return to_text(e)
    except Exception:
        return type(e).__name__


def _positive_argument(jet, e, name):
    if not jet.coeffs[0] > 0:
        raise DomainError(f"{name} needs a positive argument, got {mpmath.nstr(jet.coeffs[0], 10)}",
                          _describe(e))
    return jet.coeffs[0]


def _quotient_by_x(e, x, order, bits):
    if x != 0 and abs(x) > to_mpf(QUOTIENT_SERIES_RADIUS):
        return div(_evaluate(e.arg, x, order, bits), Jet.variable(x, order, bits))

    # Maclaurin coefficients of phi(x)/x are those of phi shifted down by one
    extra = 0 if x == 0 else (mpmath.mp.prec + 4 * order) // 8 + 4
    phi = _evaluate(e.arg, mpmath.mpf(0), order + extra + 1, bits)
    if abs(phi.coeffs[0]) > mpmath.ldexp(1, -(mpmath.mp.prec // 2)):
        raise DomainError("divx needs phi(0) = 0", _describe(e))
    series = phi.coeffs[1:]
    if x == 0:
        return Jet(mpmath.mpf(0), tuple(series[:order + 1]), bits)
    coeffs = []
    for n in range(order + 1):
        coeffs.append(mpmath.fsum(series[j] * math.comb(j, n) * x ** (j - n)
                                  for j in range(n, len(series))))
    return Jet(x, tuple(coeffs), bits)


def _evaluate(e, x, order, bits):
    """Jet of e at x (an mpf) at the current working precision"""
    if isinstance(e, Var):
        return Jet.variable(x, order, bits)
    if isinstance(e, Const):
        return Jet.constant(to_mpf(e.value), x, order, bits)
    if isinstance(e, FamilyRef):
        return _evaluate(e.body, x, order, bits)
    if isinstance(e, QuotientByX):
        return _quotient_by_x(e, x, order, bits)

    try:
        if isinstance(e, Add):
            return add(_evaluate(e.left, x, order, bits), _evaluate(e.right, x, order, bits))
        if isinstance(e, Sub):
            return sub(_evaluate(e.left, x, order, bits), _evaluate(e.right, x, order, bits))
        if isinstance(e, Mul):
            return mul(_evaluate(e.left, x, order, bits), _evaluate(e.right, x, order, bits))
        if isinstance(e, Div):
            return div(_evaluate(e.left, x, order, bits), _evaluate(e.right, x, order, bits))
        if isinstance(e, Neg):
            return neg(_evaluate(e.arg, x, order, bits))
        if isinstance(e, Pow):
            base = _evaluate(e.base, x, order, bits)
            exponent = const_value(e.exponent)
            if exponent is None and isinstance(e.exponent, Const):
                exponent = e.exponent.value
            if exponent is not None:
                return pow_const(base, exponent)
            return exp(mul(_evaluate(e.exponent, x, order, bits), log(base)))
        if isinstance(e, Exp):
            return exp(_evaluate(e.arg, x, order, bits))
        if isinstance(e, Log):
            return log(_evaluate(e.arg, x, order, bits))
        if isinstance(e, Sin):
            return sin_cos(_evaluate(e.arg, x, order, bits))[0]
        if isinstance(e, Cos):
            return sin_cos(_evaluate(e.arg, x, order, bits))[1]
        if isinstance(e, LogGamma):
            inner = _evaluate(e.arg, x, order, bits)
            u0 = _positive_argument(inner, e, "loggamma")
            return compose(loggamma_coeffs(u0, order), inner)
        if isinstance(e, Digamma):
            inner = _evaluate(e.arg, x, order, bits)
            u0 = _positive_argument(inner, e, "psi")
            return compose(polygamma_coeffs(u0, 0, order), inner)
        if isinstance(e, Polygamma):
            inner = _evaluate(e.arg, x, order, bits)
            u0 = _positive_argument(inner, e, f"psi{e.order}")
            return compose(polygamma_coeffs(u0, e.order, order), inner)
    except DomainError as err:
        if err.subexpression is None:
            raise DomainError(str(err), _describe(e)) from err
        raise
    raise TypeError(f"Unknown expression node: {type(e).__name__}")


def eval_derivatives(e, x, order, precision=None):
    """
    Jet of e at x through order N by structural recursion over the AST

    Args:
        e (Expr): Expression
        x: Point (Real-like)
        order (int): Highest derivative N
        precision (int, optional): P in bits; defaults to max(64, 8N)

    Returns:
        Jet: coefficients f^(n)(x)/n!, n = 0..N
    """
    _check_order(order)
    precision = precision or precision_of(x, default=default_precision(order))
    with mpmath.workprec(numkernel.working_bits(precision)):
        return _evaluate(e, to_mpf(x), order, precision)


def value_at(e, x):
    """Value of e at an mpf x at the current working precision"""
    return _evaluate(e, x, 0, mpmath.mp.prec).coeffs[0]


def fd_oracle(e, x, n, P_hi=None, precision=None):
    """
    Central finite-difference estimate of e^(n)(x)

    Runs mpmath.diff from base precision P_hi (default 4P) with its default
    step h = 2^-(P_hi + 10), evaluated at (P_hi + 20)(n + 1) bits so the
    n-th difference loses nothing to cancellation. A coarser step such as
    2^(-P/(n+2)) leaves an O(h^2) truncation error that swamps the n = 12
    cap. The error heuristic is the gap to a second estimate with
    addprec=30, i.e. a step 2^20 times smaller.

    Returns:
        tuple: (estimate, error heuristic) as Real values
    """
    if not 0 <= n <= FD_MAX_ORDER:
        raise DomainError(f"fd_oracle supports n <= {FD_MAX_ORDER}, got {n}")
    precision = precision or precision_of(x, default=default_precision(n))
    P_hi = P_hi or 4 * precision
    with mpmath.workprec(P_hi):
        x0 = to_mpf(x)

        def f(t):
            return value_at(e, t)

        estimate = mpmath.diff(f, x0, n)
        refined = mpmath.diff(f, x0, n, addprec=30)
        return Real(+estimate, P_hi), Real(abs(estimate - refined), P_hi)
