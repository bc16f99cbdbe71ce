# tests/test_families.py
import random
from fractions import Fraction

import mpmath
import pytest

from models.expr import Const, Exp, FamilyRef, Interval, Pow
from models.family import (CM, LCM, NOT, UNKNOWN, ClassVerdict, GammaLogRatio, GammaRatioPower, LinFracLog,
                           PsiGap, ReciprocalPower, VogtGap)
from models.report import FAIL, INCONCLUSIVE, PASS
from services import families, taylor
from services.parser import parse_expr
from services.testers import sign_test, strictness_margins, witness_search
from tests.helpers import close
from utils.errors import DomainError, InsufficientOrderError, PreconditionError

POSITIVE = Interval(Fraction(0), None)
P = 128
F = Fraction


# ---------------------------------------------------------------------------
# Classifiers
# ---------------------------------------------------------------------------

@pytest.mark.parametrize('params, status, condition', [
    ((0, 2, 0, 1), CM, 'theorem14-1'),
    ((0, -2, 0, -1), CM, 'theorem14-1'),
    ((0, 1, 0, 2), NOT, 'theorem14-1'),
    ((1, 1, 1, 1), CM, 'theorem14-2'),
    ((1, 2, 1, 1), CM, 'theorem14-3'),
    ((2, 1, 1, 0), CM, 'theorem14-4'),
    ((1, 1, 1, 2), NOT, 'theorem14'),
    ((2, 1, 1, 1), NOT, 'theorem14'),
    ((1, 1, 2, 1), NOT, 'theorem14'),
    ((1, 1, 0, 1), NOT, 'theorem14'),
    ((-1, 1, 1, 1), UNKNOWN, 'linfrac-domain'),
])
def test_classify_linfrac(params, status, condition):
    verdict = families.classify_linfrac(LinFracLog(*params), POSITIVE)
    assert verdict.status == status
    assert verdict.condition_id == condition
    assert verdict.citation.startswith("Theorem 14")


def test_linfrac_identically_zero_is_non_strict():
    assert not families.classify_linfrac(LinFracLog(1, 1, 1, 1)).strict


@pytest.mark.parametrize('params, strict', [
    ((F(5, 2), F(3, 2), 1, F(3, 5)), False),
    ((4, 2, 2, 1), False),
    ((2, 1, 1, 0), True),
    ((1, 2, 1, 1), True),
    ((1, 1, 1, 1), False),
])
def test_linfrac_constant_cases_are_non_strict(params, strict):
    verdict = families.classify_linfrac(LinFracLog(*params))
    assert verdict.status == CM
    assert verdict.strict == strict


def test_linfrac_interval_left_of_threshold():
    verdict = families.classify_linfrac(LinFracLog(2, 1, 1, 0), Interval(F(-1), None))
    assert verdict.status == NOT
    assert verdict.condition_id == 'theorem14-interval'
    assert verdict.thresholds == {'-d/c': F(0)}


def test_linfrac_rejects_degenerate_parameters():
    with pytest.raises(ValueError):
        LinFracLog(0, 0, 1, 1)


@pytest.mark.parametrize('params, status, condition', [
    ((0, 0, 1, 0), CM, 'theorem17-i1'),
    ((0, 0, F(1, 2), -1), CM, 'theorem17-i2'),
    ((0, 0, 1, 1), NOT, 'theorem17-i'),
    ((0, 0, 2, -1), NOT, 'theorem17-i'),
    ((0, 1, 1, 1), CM, 'theorem17-ii1'),
    ((0, 1, 1, F(1, 2)), CM, 'theorem17-ii2'),
    ((1, 2, 2, F(1, 2)), NOT, 'theorem17-ii'),
    ((0, 1, 1, 2), NOT, 'theorem17-ii'),
    ((0, 2, 1, 0), UNKNOWN, 'theorem17-regime'),
    ((0, F(1, 2), 1, F(1, 2)), CM, 'theorem17-iii1'),
    ((0, F(1, 2), 1, F(1, 4)), CM, 'theorem17-iii1'),
    ((0, F(1, 2), 1, F(3, 5)), NOT, 'theorem17-iii1-sharp'),
    ((0, F(1, 2), F(3, 2), F(2, 5)), NOT, 'theorem17-iii2'),
    ((0, F(1, 2), 3, F(1, 2)), NOT, 'theorem17-iii2'),
    ((0, F(9, 10), 2, F(9, 10)), NOT, 'remark18'),
    ((0, F(3, 10), 2, F(3, 10)), UNKNOWN, 'open-problem'),
    ((0, F(1, 2), F(3, 2), F(1, 2)), UNKNOWN, 'open-problem'),
])
def test_classify_psi_gap(params, status, condition):
    verdict = families.classify_psi_gap(PsiGap(*params))
    assert verdict.status == status
    assert verdict.condition_id == condition


def test_psi_gap_thresholds():
    verdict = families.classify_psi_gap(PsiGap(0, F(9, 10), 2, F(9, 10)))
    assert verdict.thresholds == {'b-a': F(9, 10), '-1-2a+2b': F(4, 5)}
    assert verdict.to_dict()['thresholds'] == {'b-a': '9/10', '-1-2a+2b': '4/5'}


def test_psi_gap_strictness():
    assert families.classify_psi_gap(PsiGap(0, 0, F(1, 2), -1)).strict
    assert not families.classify_psi_gap(PsiGap(0, 0, 1, -1)).strict
    assert not families.classify_psi_gap(PsiGap(0, 1, 1, 1)).strict


def test_psi_gap_needs_nonnegative_shifts():
    with pytest.raises(ValueError):
        PsiGap(-1, 0, 1, 0)


@pytest.mark.parametrize('params, status', [
    ((1, 0, 1, 0), CM),
    ((2, 0, 1, 0), NOT),
    ((1, 0, 2, 0), NOT),
    ((1, 1, 1, 0), NOT),
    ((1, 0, 1, 1), NOT),
])
def test_classify_gamma_ratio_log(params, status):
    verdict = families.classify_gamma_ratio_log(*params)
    assert verdict.status == status
    assert verdict.citation == "Theorem 16"


def test_gamma_ratio_log_needs_positive_slopes():
    with pytest.raises(DomainError):
        families.classify_gamma_ratio_log(0, 1, 1, 0)


@pytest.mark.parametrize('params, status', [
    ((0, F(1, 2), F(1, 2)), LCM),
    ((0, F(1, 2), F(-1)), LCM),
    ((0, F(1, 2), F(3, 5)), NOT),
    ((0, 2, 0), UNKNOWN),
])
def test_classify_gamma_ratio_power(params, status):
    assert families.classify_gamma_ratio_power(GammaRatioPower(*params)).status == status


def test_classify_reciprocal_power():
    verdict = families.classify_family(ReciprocalPower(1, 1, F(1, 2)))
    assert verdict.status == CM
    assert verdict.citation == "Lemma 13"
    assert verdict.strict
    assert not families.classify_family(ReciprocalPower(1, 0, 2)).strict


@pytest.mark.parametrize('beta, condition', [(1, 'lemma21'), (F(1, 2), 'theorem22'), (0, 'theorem22')])
def test_classify_vogt(beta, condition):
    verdict = families.classify_family(VogtGap(beta))
    assert verdict.status == CM
    assert verdict.condition_id == condition


def test_vogt_rejects_beta_out_of_range():
    with pytest.raises(ValueError):
        VogtGap(2)


def test_class_verdict_rejects_unknown_status():
    with pytest.raises(ValueError):
        ClassVerdict('MAYBE', 'x', 'y')


# ---------------------------------------------------------------------------
# Registry and closed forms
# ---------------------------------------------------------------------------

@pytest.mark.parametrize('name', ['psigap', 'psi-gap', 'Psi_Gap', 'PSIGAP'])
def test_normalized_family_names(name):
    p = families.make_family(name, {'a': 0, 'b': F(1, 2), 'alpha': 1, 'beta': F(1, 2)})
    assert isinstance(p, PsiGap)
    assert str(p) == 'psigap a=0 b=1/2 alpha=1 beta=1/2'


def test_make_family_unknown_name():
    with pytest.raises(KeyError):
        families.make_family('zeta', {})


@pytest.mark.parametrize('params', [{'beta': 1, 'gamma': 2}, {}])
def test_make_family_parameter_mismatch(params):
    with pytest.raises(KeyError):
        families.make_family('vogt', params)


def test_build_family_round_trip():
    e = families.build_family('gammaratiopower', {'a': 0, 'b': '1/2', 'beta': '1/2'})
    assert isinstance(e, FamilyRef)
    assert e.params == (('a', F(0)), ('b', F(1, 2)), ('beta', F(1, 2)))
    assert families.family_of(e) == GammaRatioPower(0, F(1, 2), F(1, 2))


@pytest.mark.parametrize('name, params, interval', [
    ('psigap', {'a': 0, 'b': F(1, 2), 'alpha': 1, 'beta': 0}, Interval(F(0), None)),
    ('psigap', {'a': 1, 'b': F(1, 2), 'alpha': 1, 'beta': 0}, Interval(F(-1, 2), None)),
    ('gammalogratio', {'a': 2, 'b': 1, 'c': 1, 'd': 0}, Interval(F(0), None)),
    ('recippower', {'a': 1, 'b': 1, 'mu': 1}, Interval(F(0), None)),
    ('vogt', {'beta': 1}, Interval(F(-1), None)),
    ('vogt', {'beta': F(1, 2)}, Interval(F(0), None)),
    ('linfraclog', {'a': 0, 'b': 2, 'c': 0, 'd': 1}, Interval(None, None)),
])
def test_family_interval(name, params, interval):
    assert families.family_interval(families.make_family(name, params)) == interval


def test_family_body_evaluates_closed_form():
    # (x+1)^(1/2) Gamma(x+1)/Gamma(x+3/2) at x = 1
    e = families.build_family('gammaratiopower', {'a': 1, 'b': F(3, 2), 'beta': F(1, 2)})
    jet = taylor.eval_derivatives(e, 1, 0, P)
    with mpmath.workprec(P):
        expected = mpmath.sqrt(2) * mpmath.gamma(2) / mpmath.gamma(mpmath.mpf(5) / 2)
    assert close(jet.coeffs[0], expected, P - 16)


def test_vogt_expr_body_at_one():
    jet = taylor.eval_derivatives(families.vogt_expr(F(1, 2)), 1, 0, P)
    with mpmath.workprec(P):
        expected = 1 + mpmath.loggamma(2) - mpmath.log(mpmath.mpf(3) / 2)
    assert close(jet.coeffs[0], expected, P - 16)


def test_vogt_expr_rejects_beta_out_of_range():
    with pytest.raises(PreconditionError):
        families.vogt_expr(2)


# ---------------------------------------------------------------------------
# phi(x)/x helpers
# ---------------------------------------------------------------------------

def test_phi_over_x_at_zero():
    phi = taylor.eval_derivatives(parse_expr('exp(x) - 1'), 0, 5, P)
    # (e^x - 1)/x = sum x^k/(k+1)!, so f'''(0) = 3!/4!
    assert close(families.phi_over_x_jet(phi, 0, 3), 0.25, P - 16)


@pytest.mark.parametrize('n', [0, 1, 2, 4])
def test_phi_over_x_matches_quotient_jet(n):
    x = F(1, 2)
    phi = taylor.eval_derivatives(parse_expr('log(1 + x)'), x, n, P)
    quotient = taylor.eval_derivatives(parse_expr('log(1 + x) / x'), x, n, P)
    assert close(families.phi_over_x_jet(phi, x, n), quotient.derivative(n), P - 24)


def test_phi_over_x_rejects_wrong_base_point():
    phi = taylor.eval_derivatives(parse_expr('log(1 + x)'), 1, 3, P)
    with pytest.raises(ValueError):
        families.phi_over_x_jet(phi, 2, 1)


def test_phi_over_x_needs_order():
    phi = taylor.eval_derivatives(parse_expr('log(1 + x)'), 1, 2, P)
    with pytest.raises(InsufficientOrderError):
        families.phi_over_x_jet(phi, 1, 3)


@pytest.mark.parametrize('n', [1, 2, 3])
def test_phi_over_x_sum_derivative_identity(n):
    x = F(1, 2)
    phi = taylor.eval_derivatives(parse_expr('log(1 + x)'), x, 8, P)
    left, right = families.phi_over_x_sum_derivative_check(phi, x, n)
    assert close(left, right, P - 24)


def test_sum_derivative_check_rejects_zero():
    phi = taylor.eval_derivatives(parse_expr('log(1 + x)'), 0, 8, P)
    with pytest.raises(DomainError):
        families.phi_over_x_sum_derivative_check(phi, 0, 2)


def test_sum_derivative_check_needs_order():
    phi = taylor.eval_derivatives(parse_expr('log(1 + x)'), 1, 2, P)
    with pytest.raises(InsufficientOrderError):
        families.phi_over_x_sum_derivative_check(phi, 1, 2)


# ---------------------------------------------------------------------------
# Kernel and expansions
# ---------------------------------------------------------------------------

def test_kernel_phi_limit_at_zero():
    assert close(families.kernel_phi(0, 0, F(1, 2), F(1, 4), P), 0.25, P - 8)


def test_kernel_phi_closed_form():
    with mpmath.workprec(P):
        expected = 1 - mpmath.expm1(mpmath.mpf(1) / 2) / mpmath.expm1(1)
    assert close(families.kernel_phi(1, 0, F(1, 2), 0, P), expected, P - 16)


def test_kernel_phi_rejects_negative_t():
    with pytest.raises(DomainError):
        families.kernel_phi(-1, 0, F(1, 2), 0, P)


def test_psi_gap_coefficients_vanish_for_equal_shifts():
    values, companions = families.psi_gap_coefficients(F(1, 3), F(1, 3), 3)
    assert values == (0, 0, 0)
    assert companions == (0, 0, 0)


def test_psi_gap_coefficients_are_exact():
    values, companions = families.psi_gap_coefficients(F(0), F(9, 10), 3)
    assert all(isinstance(v, Fraction) for v in values + companions)


@pytest.mark.parametrize('depth', [1, 2, 3])
def test_asym_psi_gap_error_order(depth):
    a, b = F(0), F(9, 10)
    x = 1000
    value, companion = families.asym_psi_gap(x, a, b, depth, P)
    with mpmath.workprec(P):
        z, sa, sb = mpmath.mpf(x), mpmath.mpf(0), mpmath.mpf(b.numerator) / b.denominator
        exact = (z + sa) * (mpmath.digamma(z + sb) - mpmath.digamma(z + sa)) - (sb - sa)
        exact_companion = -(z + sa) ** 2 * (mpmath.psi(1, z + sb) - mpmath.psi(1, z + sa)) + (sa - sb)
        bound = 10 * z ** -(depth + 1)
    assert abs(exact - value.value) < bound
    assert abs(exact_companion - companion.value) < bound


def test_asym_psi_gap_rejects_depth():
    with pytest.raises(DomainError):
        families.asym_psi_gap(100, 0, F(1, 2), 4)


def test_asym_psi_gap_rejects_small_argument():
    with pytest.raises(DomainError):
        families.asym_psi_gap(1, 0, F(1, 2), 2, P)


# ---------------------------------------------------------------------------
# Builders
# ---------------------------------------------------------------------------

def test_build_power_mean():
    e, interval = families.build_power_mean(parse_expr('x + 1'), parse_expr('exp(-x)'), order=6, precision=P)
    assert isinstance(e, Exp)
    assert interval == POSITIVE


def test_build_power_mean_rejects_non_cm_exponent():
    with pytest.raises(PreconditionError):
        families.build_power_mean(parse_expr('x + 1'), parse_expr('x^2'), order=6, precision=P)


def test_build_gamma_power_mean():
    e, interval = families.build_gamma_power_mean(1, 2, 0, 1, precision=P)
    assert isinstance(e, Exp)
    assert interval == POSITIVE


@pytest.mark.parametrize('a, b, beta, c0', [(1, 2, 0, F(1, 2)), (0, 1, 0, 1), (1, 2, 0, 0)])
def test_build_gamma_power_mean_preconditions(a, b, beta, c0):
    with pytest.raises(PreconditionError):
        families.build_gamma_power_mean(a, b, beta, c0, precision=P)


def test_build_fraction_power():
    e, interval = families.build_fraction_power(LinFracLog(1, 2, 1, 1), parse_expr('exp(-x)'), 0)
    assert isinstance(e, Pow)
    assert interval == POSITIVE


def test_build_fraction_power_interval_starts_at_pole():
    _, interval = families.build_fraction_power(LinFracLog(2, 6, 1, 3), Const(F(1)), -5)
    assert interval == Interval(F(-3), None)


def test_build_fraction_power_preconditions():
    with pytest.raises(PreconditionError):
        families.build_fraction_power(LinFracLog(1, 1, 2, 1), parse_expr('exp(-x)'), 0)


# ---------------------------------------------------------------------------
# Agreement with the sign tests
# ---------------------------------------------------------------------------

SLOPES = [F(0), F(1, 2), F(1), F(3, 2), F(2), F(3)]
SHIFTS = [F(-2), F(-1), F(-1, 2), F(0), F(1, 2), F(1), F(2), F(3)]


def random_linfrac(rng):
    """LinFracLog whose logarithm is defined right of max(-b/a, -d/c)"""
    while True:
        a, c = rng.choice(SLOPES), rng.choice(SLOPES)
        b, d = rng.choice(SHIFTS), rng.choice(SHIFTS)
        if (a == 0 and b <= 0) or (c == 0 and d <= 0):
            continue
        return LinFracLog(a, b, c, d)


def defined_interval(p):
    ends = [-shift / slope for slope, shift in ((p.a, p.b), (p.c, p.d)) if slope > 0]
    return Interval(max(ends), None) if ends else Interval.everything()


@pytest.mark.slow
def test_linfrac_verdicts_agree_with_sign_tests():
    rng = random.Random(14)
    compared = 0
    for _ in range(500):
        p = random_linfrac(rng)
        interval = defined_interval(p)
        verdict = families.classify_linfrac(p, interval)
        e = families.family_body(p)
        report = sign_test(e, interval, order=12, grid_size=24)
        if report.verdict.status == INCONCLUSIVE:
            continue
        compared += 1
        if verdict.status == CM:
            assert report.verdict.status == PASS, str(p)
        else:
            assert verdict.status == NOT, str(p)
            assert report.verdict.status == FAIL or witness_search(e, interval, order=12).found, str(p)
    assert compared >= 250


def random_regime_cell(rng):
    """(a, b) with 0 < 1-b+a < 1"""
    a = F(rng.randint(0, 12), 4)
    return a, a + F(rng.randint(1, 19), 20)


@pytest.mark.slow
def test_psi_gap_regime_boundary_in_beta():
    rng = random.Random(17)
    for _ in range(20):
        a, b = random_regime_cell(rng)
        sharp = PsiGap(a, b, 1, b - a)
        assert families.classify_psi_gap(sharp).status == CM
        report = sign_test(families.family_body(sharp), families.family_interval(sharp), order=14)
        assert report.verdict.status == PASS, str(sharp)

        over = PsiGap(a, b, 1, b - a + F(1, 10))
        assert families.classify_psi_gap(over).status == NOT
        assert witness_search(families.family_body(over), families.family_interval(over), order=14).found, str(over)


@pytest.mark.slow
@pytest.mark.parametrize('beta, interval', [
    (1, Interval(F(-1) + F(1, 64), F(1000))),
    (0, Interval(F(1, 64), F(1000))),
    (F(1, 4), Interval(F(1, 64), F(1000))),
    (F(1, 2), Interval(F(1, 64), F(1000))),
    (1, Interval(F(1, 64), F(1000))),
])
def test_vogt_passes_sign_test(beta, interval):
    assert sign_test(families.vogt_expr(beta), interval, order=15).verdict.status == PASS


@pytest.mark.slow
def test_gamma_log_ratio_witnesses():
    rng = random.Random(16)
    for _ in range(20):
        while True:
            a, b, c, d = rng.randint(1, 3), rng.randint(0, 3), rng.randint(1, 3), rng.randint(0, 3)
            if (a, b) != (c, d):
                break
        assert families.classify_gamma_ratio_log(a, b, c, d).status == NOT
        p = GammaLogRatio(a, b, c, d)
        witness = witness_search(families.family_body(p), families.family_interval(p), order=12)
        assert witness.found, str(p)
        assert witness.confirmed_margin < 0


@pytest.mark.slow
def test_gamma_log_ratio_of_equal_arguments_is_zero():
    p = GammaLogRatio(2, 1, 2, 1)
    verdict = families.classify_gamma_ratio_log(2, 1, 2, 1)
    assert verdict.status == CM
    assert not verdict.strict
    report = sign_test(families.family_body(p), families.family_interval(p), order=12)
    assert report.verdict.status == PASS
    assert strictness_margins(report).value == 0
