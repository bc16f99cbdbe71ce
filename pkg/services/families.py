# services/families.py
"""
Parametric Gamma/digamma families: closed forms, classifiers and builders

Classifiers work on exact rational parameters and return ClassVerdict records
citing the clause that decided them. Builders return (Expr, Interval) pairs
after checking their preconditions.
"""
import logging
from fractions import Fraction
from functools import lru_cache

import mpmath

from config.settings import DEFAULT_ORDER, DEFAULT_PRECISION, GUARD_BITS
from models.expr import (Add, Const, Digamma, Div, Exp, FamilyRef, Interval, Log, LogGamma, Mul,
                         Pow, QuotientByX, Sub, Var, as_fraction, validity)
from models.family import (CM, FAMILY_TYPES, LCM, NOT, UNKNOWN, ClassVerdict, GammaLogRatio,
                           GammaRatioPower, LinFracLog, PsiGap, ReciprocalPower, VogtGap)
from models.jet import Jet
from models.real import Real, precision_of, to_mpf
from services import numkernel, taylor
from utils.errors import DomainError, InsufficientOrderError, PreconditionError, UnsupportedPrimitiveError

logger = logging.getLogger(__name__)

FAMILY_NAMES = frozenset(FAMILY_TYPES)


def normalize_name(name):
    return name.lower().replace('-', '').replace('_', '')


# ---------------------------------------------------------------------------
# Closed forms
# ---------------------------------------------------------------------------

def affine(c, d):
    """Expr for c*x + d"""
    c, d = as_fraction(c), as_fraction(d)
    if c == 0:
        return Const(d)
    term = Var() if c == 1 else Mul(Const(c), Var())
    if d == 0:
        return term
    return Add(term, Const(d)) if d > 0 else Sub(term, Const(-d))


def family_body(p):
    if isinstance(p, LinFracLog):
        return Log(Div(affine(p.a, p.b), affine(p.c, p.d)))
    if isinstance(p, PsiGap):
        shifted = affine(1, p.a)
        bracket = Sub(Sub(Digamma(affine(1, p.b)), Digamma(shifted)), Div(Const(p.beta), shifted))
        return Mul(Pow(shifted, Const(p.alpha)), bracket)
    if isinstance(p, GammaRatioPower):
        shifted = affine(1, p.a)
        ratio = Exp(Sub(LogGamma(shifted), LogGamma(affine(1, p.b))))
        return Mul(Pow(shifted, Const(p.beta)), ratio)
    if isinstance(p, GammaLogRatio):
        return Sub(LogGamma(affine(p.a, p.b)), LogGamma(affine(p.c, p.d)))
    if isinstance(p, ReciprocalPower):
        return Pow(Add(Const(p.a), Div(Const(p.b), Var())), Const(p.mu))
    if isinstance(p, VogtGap):
        quotient = QuotientByX(LogGamma(affine(1, 1)))
        return Sub(Add(Const(1), quotient), Log(affine(1, p.beta)))
    raise TypeError(f"Unknown family: {type(p).__name__}")


def family_interval(p):
    """Natural domain of the family instance"""
    if isinstance(p, LinFracLog) and p.a == 0 and p.c == 0:
        return Interval.everything()
    if isinstance(p, (PsiGap, GammaRatioPower)):
        return Interval(max(-p.a, -p.b), None)
    if isinstance(p, GammaLogRatio):
        if p.a <= 0 or p.c <= 0:
            raise DomainError("gammalogratio needs a > 0 and c > 0")
        return Interval(max(-p.b / p.a, -p.d / p.c), None)
    if isinstance(p, ReciprocalPower):
        return Interval(Fraction(0), None)
    if isinstance(p, VogtGap):
        return Interval(Fraction(-1) if p.beta == 1 else Fraction(0), None)
    return validity(family_body(p))


def make_family(name, params):
    """Family parameter record from a registry name and a parameter mapping"""
    key = normalize_name(name)
    if key not in FAMILY_TYPES:
        raise KeyError(f"Unknown family {name!r}; known: {', '.join(sorted(FAMILY_TYPES))}")
    return FAMILY_TYPES[key].from_params({k: as_fraction(v) for k, v in params.items()})


def build_family(name, params):
    """FamilyRef node for a family instance"""
    p = make_family(name, params)
    return FamilyRef(p.NAME, p.params, family_body(p))


def family_of(ref):
    """Parameter record behind a FamilyRef"""
    return FAMILY_TYPES[ref.name].from_params(dict(ref.params))


# ---------------------------------------------------------------------------
# Classifiers
# ---------------------------------------------------------------------------

def classify_linfrac(p, interval=None):
    """
    CM test for log((ax+b)/(cx+d)) with a, c >= 0

    CM holds iff (1) a=c=0 with 0<d<=b or 0>d>=b; (2) a>0, c=a, d=b;
    (3) a>0, c=a, b>d; (4) a>c>0 with ad-bc<=0. For (2)-(4) the interval
    must start at or right of -d/c.
    """
    a, b, c, d = p.a, p.b, p.c, p.d
    citation = "Theorem 14"
    if a < 0 or c < 0:
        return ClassVerdict(UNKNOWN, 'linfrac-domain', citation, "classification needs a >= 0 and c >= 0")

    if a == 0 and c == 0:
        if 0 < d <= b or 0 > d >= b:
            return ClassVerdict(CM, 'theorem14-1', f"{citation} (1)", "constant log(b/d) >= 0", strict=False)
        return ClassVerdict(NOT, 'theorem14-1', f"{citation} (1)", "constant log(b/d) is negative")

    threshold = -d / c if c > 0 else None
    thresholds = {'-d/c': threshold} if threshold is not None else {}
    verdict = None
    if a > 0 and c == a and d == b:
        verdict = ClassVerdict(CM, 'theorem14-2', f"{citation} (2)", "f is identically zero",
                               thresholds, strict=False)
    elif a > 0 and c == a and b > d:
        verdict = ClassVerdict(CM, 'theorem14-3', f"{citation} (3)", "a = c and b > d", thresholds)
    elif a > 0 and a > c > 0 and a * d - b * c <= 0:
        # ad = bc collapses f to the constant log(a/c)
        verdict = ClassVerdict(CM, 'theorem14-4', f"{citation} (4)", "a > c > 0 and ad - bc <= 0", thresholds,
                               strict=a * d - b * c != 0)

    if verdict is None:
        if a == 0:
            reason = "f = log(b/(cx+d)) decreases to -infinity (fails n=0)"
        elif c == 0:
            reason = "f = log((ax+b)/d) increases without bound (fails n=1)"
        elif a < c:
            reason = "a < c forces the negative limit log(a/c) (fails n=0)"
        elif a == c:
            reason = "a = c and b < d make f negative (fails n=0)"
        else:
            reason = "ad - bc > 0 makes f increasing (fails n=1)"
        return ClassVerdict(NOT, 'theorem14', citation, reason, thresholds)

    if interval is not None and threshold is not None and (interval.lo is None or interval.lo < threshold):
        return ClassVerdict(NOT, 'theorem14-interval', citation,
                            f"interval {interval} starts left of -d/c = {threshold}", thresholds)
    return verdict


def classify_psi_gap(p):
    """CM classification of (x+a)^alpha [psi(x+b) - psi(x+a) - beta/(x+a)]"""
    a, b, alpha, beta = p.a, p.b, p.alpha, p.beta
    gap = b - a
    thresholds = {'b-a': gap}

    if b == a:
        if beta == 0:
            return ClassVerdict(CM, 'theorem17-i1', "Theorem 17 (i1)", "f is identically zero",
                                thresholds, strict=False)
        if beta < 0 and alpha <= 1:
            return ClassVerdict(CM, 'theorem17-i2', "Theorem 17 (i2)", "-beta (x+a)^(alpha-1) with beta < 0",
                                thresholds, strict=alpha < 1)
        reason = ("-beta (x+a)^(alpha-1) is negative" if beta > 0
                  else "alpha > 1 makes -beta (x+a)^(alpha-1) increasing")
        return ClassVerdict(NOT, 'theorem17-i', "Theorem 17 (i)", reason, thresholds)

    if b == a + 1:
        if beta == 1:
            return ClassVerdict(CM, 'theorem17-ii1', "Theorem 17 (ii1)", "f is identically zero",
                                thresholds, strict=False)
        if beta < 1 and alpha <= 1:
            return ClassVerdict(CM, 'theorem17-ii2', "Theorem 17 (ii2)", "(1-beta)(x+a)^(alpha-1) with beta < 1",
                                thresholds, strict=alpha < 1)
        reason = ("(1-beta)(x+a)^(alpha-1) is negative" if beta > 1
                  else "alpha > 1 makes (1-beta)(x+a)^(alpha-1) increasing")
        return ClassVerdict(NOT, 'theorem17-ii', "Theorem 17 (ii)", reason, thresholds)

    if not 0 < 1 - b + a < 1:
        return ClassVerdict(UNKNOWN, 'theorem17-regime', "Theorem 17 (iii)",
                            "outside 0 < 1-b+a < 1 with b not in {a, a+1}", thresholds)

    if beta > gap:
        return ClassVerdict(NOT, 'theorem17-iii1-sharp', "Theorem 17 (iii1)",
                            "beta > b-a; the bound on beta is sharp", thresholds)
    if alpha <= 1:
        return ClassVerdict(CM, 'theorem17-iii1', "Theorem 17 (iii1)", "beta <= b-a and alpha <= 1", thresholds)
    if beta < gap:
        return ClassVerdict(NOT, 'theorem17-iii2', "Theorem 17 (iii2)", "beta < b-a requires alpha <= 1",
                            thresholds)
    if alpha > 2:
        return ClassVerdict(NOT, 'theorem17-iii2', "Theorem 17 (iii2)", "beta = b-a requires alpha <= 2",
                            thresholds)
    remark = -1 - 2 * a + 2 * b
    thresholds['-1-2a+2b'] = remark
    if alpha == 2 and remark > 0:
        return ClassVerdict(NOT, 'remark18', "Remark 18", "-1-2a+2b > 0 requires alpha < 2", thresholds)
    return ClassVerdict(UNKNOWN, 'open-problem', "Open Problem",
                        "beta = b-a with alpha in the unresolved range (1, 2]", thresholds)


def classify_gamma_ratio_log(a, b, c, d):
    """CM iff a = c and b = d for log(Gamma(ax+b)/Gamma(cx+d)), a, c > 0"""
    a, b, c, d = (as_fraction(v) for v in (a, b, c, d))
    if a <= 0 or c <= 0:
        raise DomainError("classify_gamma_ratio_log needs a > 0 and c > 0")
    citation = "Theorem 16"
    if a == c and b == d:
        return ClassVerdict(CM, 'theorem16', citation, "f is identically zero", strict=False)
    if a > c:
        reason = "f ~ (a-c) x log x grows without bound (fails n=1)"
    elif a < c:
        reason = "f ~ -(c-a) x log x tends to -infinity (fails n=0)"
    elif b > d:
        reason = "f ~ (b-d) log(ax) increases without bound (fails n=1)"
    else:
        reason = "f ~ -(d-b) log(ax) tends to -infinity (fails n=0)"
    return ClassVerdict(NOT, 'theorem16', citation, reason)


def classify_gamma_ratio_power(p):
    """LCM iff beta <= b - a for (x+a)^beta Gamma(x+a)/Gamma(x+b) in the regime 0 < 1-b+a < 1"""
    thresholds = {'b-a': p.b - p.a}
    if not p.in_regime:
        return ClassVerdict(UNKNOWN, 'theorem19-regime', "Theorem 19", "outside 0 < 1-b+a < 1", thresholds)
    if p.beta <= p.b - p.a:
        return ClassVerdict(LCM, 'theorem19', "Theorem 19", "beta <= b-a", thresholds)
    return ClassVerdict(NOT, 'theorem19', "Theorem 19", "beta > b-a", thresholds)


def classify_family(p, interval=None):
    """Dispatch to the classifier of the family record p"""
    if isinstance(p, LinFracLog):
        return classify_linfrac(p, interval)
    if isinstance(p, PsiGap):
        return classify_psi_gap(p)
    if isinstance(p, GammaRatioPower):
        return classify_gamma_ratio_power(p)
    if isinstance(p, GammaLogRatio):
        return classify_gamma_ratio_log(p.a, p.b, p.c, p.d)
    if isinstance(p, ReciprocalPower):
        constant = p.b == 0 or p.mu == 0
        return ClassVerdict(CM, 'lemma13', "Lemma 13", "(a + b/x)^mu with a, b, mu >= 0", strict=not constant)
    if isinstance(p, VogtGap):
        if p.beta == 1:
            return ClassVerdict(CM, 'lemma21', "Lemma 21", "beta = 1")
        return ClassVerdict(CM, 'theorem22', "Theorem 22", "0 <= beta <= 1")
    raise TypeError(f"No classifier for {type(p).__name__}")


# ---------------------------------------------------------------------------
# Quotients phi(x)/x
# ---------------------------------------------------------------------------

def _check_base_point(phi, x):
    if to_mpf(x) != phi.base_point:
        raise ValueError(f"jet is based at {mpmath.nstr(phi.base_point, 10)}, not {x}")


def phi_over_x_jet(phi, x, n):
    """
    n-th derivative of f = phi(x)/x from a jet of phi, where phi(0) = 0

        f^(n)(x) = n!/x^(n+1) * sum_k (-1)^k x^(n-k) phi^(n-k)(x)/(n-k)!
        f^(n)(0) = phi^(n+1)(0)/(n+1)
    """
    with mpmath.workprec(numkernel.working_bits(phi.precision_bits)):
        _check_base_point(phi, x)
        z = phi.base_point
        if z == 0:
            return Real(+(phi.derivative(n + 1) / (n + 1)), phi.precision_bits)
        if n > phi.order:
            raise InsufficientOrderError(f"jet of order {phi.order} cannot give derivative {n}")
        total = mpmath.fsum((-1) ** k * z ** (n - k) * phi.coeffs[n - k] for k in range(n + 1))
        return Real(mpmath.factorial(n) * total / z ** (n + 1), phi.precision_bits)


def phi_over_x_sum_derivative_check(phi, x, n):
    """
    Both sides of d/dx sum_k (-1)^k n!/(n-k)! x^(n-k) phi^(n-k)(x) = x^n phi^(n+1)(x)

    The left side is differentiated with jets built from the derivative jets
    of phi.

    Returns:
        tuple: (left, right) as Real values
    """
    if phi.order < n + 1:
        raise InsufficientOrderError(f"jet of order {phi.order} is too short for n = {n}")
    bits = phi.precision_bits
    with mpmath.workprec(numkernel.working_bits(bits)):
        _check_base_point(phi, x)
        z = phi.base_point
        if z == 0:
            raise DomainError("phi_over_x_sum_derivative_check needs x != 0")
        top = phi.order - n
        variable = Jet.variable(z, top, bits)
        derivative_jets = [phi]
        for _ in range(n):
            derivative_jets.append(derivative_jets[-1].differentiate())

        total = Jet.constant(0, z, top, bits)
        for k in range(n + 1):
            j = n - k
            weight = (-1) ** k * mpmath.factorial(n) / mpmath.factorial(j)
            term = taylor.mul(taylor.pow_const(variable, j), derivative_jets[j].truncate(top))
            total = taylor.add(total, taylor.scale(term, weight))

        left = total.derivative(1)
        right = z ** n * phi.derivative(n + 1)
        return Real(+left, bits), Real(+right, bits)


# ---------------------------------------------------------------------------
# Builders
# ---------------------------------------------------------------------------

def _require_not_failing(report, what):
    if report.verdict.status == 'FAIL':
        v = report.verdict
        raise PreconditionError(f"{what} fails at n={v.order}, x={mpmath.nstr(v.point, 10)}")


def build_power_mean(f, g, b=None, order=DEFAULT_ORDER, precision=None):
    """
    f(x)^(g(x)/x) on (0, b), logarithmically completely monotone when log f is
    Bernstein and g is CM there

    Both premises are checked numerically with sign tests.

    Returns:
        tuple: (Expr, Interval)
    """
    from services.testers import sign_test

    interval = Interval.of(0, b)
    _require_not_failing(sign_test(Log(f), interval, order, mode='BERN', precision=precision),
                         "log f Bernstein")
    _require_not_failing(sign_test(g, interval, order, mode='CM', precision=precision), "g CM")
    return Exp(Mul(Div(g, Var()), Log(f))), interval


def build_gamma_power_mean(a, b, beta, c0, g=None, precision=DEFAULT_PRECISION):
    """
    (c0 Gamma(x+b) / ((x+a)^beta Gamma(x+a)))^(g(x)/x) on (0, inf)

    Requires c0 >= a^beta Gamma(a)/Gamma(b), that is phi(0) >= 0 for
    phi(x) = log Gamma(x+b) - log Gamma(x+a) - beta log(x+a) + log c0.

    Returns:
        tuple: (Expr, Interval)
    """
    a, b, beta = as_fraction(a), as_fraction(b), as_fraction(beta)
    if a <= 0 or b <= 0:
        raise PreconditionError("build_gamma_power_mean needs a > 0 and b > 0")
    with mpmath.workprec(numkernel.working_bits(precision)):
        c = to_mpf(c0)
        if not c > 0:
            raise PreconditionError("c_0 must be positive")
        terms = [numkernel.log_gamma_raw(to_mpf(b)), -numkernel.log_gamma_raw(to_mpf(a)),
                 -to_mpf(beta) * mpmath.log(to_mpf(a)), mpmath.log(c)]
        phi0 = mpmath.fsum(terms)
        tol = mpmath.ldexp(max(1, max(abs(t) for t in terms)), -(precision - GUARD_BITS))
        if phi0 < -tol:
            raise PreconditionError(
                f"c_0 >= a^beta Gamma(a)/Gamma(b) fails: phi(0) = {mpmath.nstr(phi0, 10)}")
        with mpmath.workprec(precision):
            log_c0 = as_fraction(+mpmath.log(c))

    phi = Sub(LogGamma(affine(1, b)), LogGamma(affine(1, a)))
    if beta != 0:
        phi = Sub(phi, Mul(Const(beta), Log(affine(1, a))))
    if log_c0 != 0:
        phi = Add(phi, Const(log_c0))
    g = g if g is not None else Const(Fraction(1))
    logger.debug(f"gamma power mean admitted with phi(0) = {mpmath.nstr(phi0, 10)}")
    return Exp(Mul(Div(g, Var()), phi)), Interval(Fraction(0), None)


def build_fraction_power(p, g, x0):
    """
    ((ax+b)/(cx+d))^g(x), logarithmically completely monotone on
    (max(x0, -d/c), inf) when g is CM on (x0, inf) and (1) a>0, c=a, b>=d or
    (2) a>0, a>c>0, ad-bc<=0

    Returns:
        tuple: (Expr, Interval)
    """
    from services.certifier import certify
    from services.testers import sign_test

    a, b, c, d = p.a, p.b, p.c, p.d
    if not (a > 0 and c == a and b >= d or a > 0 and a > c > 0 and a * d - b * c <= 0):
        raise PreconditionError("need a>0, c=a, b>=d or a>0, a>c>0, ad-bc<=0")
    x0 = as_fraction(x0)
    premise = Interval(x0, None)
    try:
        certified = certify(g, premise).certified
    except UnsupportedPrimitiveError:
        certified = False
    if not certified:
        _require_not_failing(sign_test(g, premise, mode='CM'), "g CM")
    return Pow(Div(affine(a, b), affine(c, d)), g), Interval(max(x0, -d / c), None)


# ---------------------------------------------------------------------------
# Kernel, Vogt-type expression, psi-gap expansions
# ---------------------------------------------------------------------------

def kernel_phi(t, a, b, beta, precision=None):
    """1 - beta - (e^((1-b+a)t) - 1)/(e^t - 1), with the limit b - a - beta at t = 0"""
    precision = precision or precision_of(t, a, b, beta)
    with mpmath.workprec(numkernel.working_bits(precision)):
        t, a, b, beta = (to_mpf(v) for v in (t, a, b, beta))
        if t < 0:
            raise DomainError("kernel_phi needs t >= 0")
        if t == 0:
            value = b - a - beta
        else:
            value = 1 - beta - mpmath.expm1((1 - b + a) * t) / mpmath.expm1(t)
        with mpmath.workprec(precision):
            return Real(+value, precision)


def vogt_expr(beta):
    """1 + log Gamma(x+1)/x - log(x+beta) for 0 <= beta <= 1, as a family node"""
    try:
        return build_family(VogtGap.NAME, {'beta': beta})
    except ValueError as err:
        raise PreconditionError(str(err)) from err


@lru_cache(maxsize=None)
def psi_gap_coefficients(a, b, depth):
    """
    Exact coefficients of the large-x expansions

        (x+a)[psi(x+b) - psi(x+a)] - (b-a)            ~ sum_j T_j x^-j
        -(x+a)^2 [psi'(x+b) - psi'(x+a)] + (a-b)      ~ sum_j U_j x^-j

    for j = 1..depth.
    """
    def value_coeff(k, s):
        return (-1) ** k * numkernel.bernoulli_poly(k + 1, s) / (k + 1)

    def slope_coeff(k, s):
        return (-1) ** (k + 1) * numkernel.bernoulli_poly(k + 1, s)

    d = [value_coeff(k, b) - value_coeff(k, a) for k in range(depth + 1)]
    delta = [slope_coeff(k, b) - slope_coeff(k, a) for k in range(depth + 1)]

    def at(seq, k):
        return seq[k] if k >= 0 else Fraction(0)

    values = tuple(d[j] + a * d[j - 1] for j in range(1, depth + 1))
    companions = tuple(-(delta[j] + 2 * a * delta[j - 1] + a * a * at(delta, j - 2))
                       for j in range(1, depth + 1))
    return values, companions


def asym_psi_gap(x, a, b, depth, precision=None):
    """
    Truncated expansions of (x+a)[psi(x+b) - psi(x+a)] - (b-a) and of
    -(x+a)^2 [psi'(x+b) - psi'(x+a)] + (a-b); errors are O(x^-(depth+1))

    Returns:
        tuple: (value expansion, companion expansion) as Real values
    """
    if depth not in (1, 2, 3):
        raise DomainError(f"depth must be 1, 2 or 3, got {depth}")
    precision = precision or precision_of(x, a, b)
    a, b = as_fraction(a), as_fraction(b)
    values, companions = psi_gap_coefficients(a, b, depth)
    with mpmath.workprec(numkernel.working_bits(precision)):
        z = to_mpf(x)
        if z < numkernel.ASYMPTOTIC_FLOOR:
            raise DomainError(f"asym_psi_gap needs x >= {numkernel.ASYMPTOTIC_FLOOR}, got {mpmath.nstr(z, 10)}")
        value = mpmath.fsum(to_mpf(T) * z ** -(j + 1) for j, T in enumerate(values))
        companion = mpmath.fsum(to_mpf(U) * z ** -(j + 1) for j, U in enumerate(companions))
        with mpmath.workprec(precision):
            return Real(+value, precision), Real(+companion, precision)
