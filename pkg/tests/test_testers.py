# tests/test_testers.py
from fractions import Fraction

import mpmath
import pytest

from models.expr import Interval
from models.family import CM, LinFracLog
from models.report import FAIL, INCONCLUSIVE, PASS
from services import families
from services.parser import parse_expr
from services.testers import radius_probe, sample_grid, sign_test, strictness_margins, witness_search
from tests.helpers import close
from utils.errors import DomainError, InsufficientOrderError, PreconditionError

POSITIVE = Interval(Fraction(0), None)
UNIT = Interval(Fraction(0), Fraction(1))
P = 128
F = Fraction


def run(text, interval=POSITIVE, mode='CM', order=8, grid_size=24, **kwargs):
    return sign_test(parse_expr(text), interval, order, grid_size, mode=mode, precision=P, **kwargs)


# ---------------------------------------------------------------------------
# Grid
# ---------------------------------------------------------------------------

def test_sample_grid_unbounded():
    grid = sample_grid(POSITIVE, 48)
    assert grid == sorted(grid)
    assert len(set(grid)) == len(grid)
    assert grid[0] == mpmath.ldexp(1, -10)
    assert grid[-1] == 10 ** 5
    assert len(grid) >= 48
    for k in range(-2, 6):
        assert any(close(x, mpmath.mpf(10) ** k, 40) for x in grid)


def test_sample_grid_bounded_stays_inside():
    grid = sample_grid(UNIT, 10)
    assert all(0 < x < 1 for x in grid)
    assert grid[0] == mpmath.ldexp(1, -10)
    assert grid[-1] == 1 - mpmath.ldexp(1, -10)
    # only lo + 10^-2 and lo + 10^-1 fall inside
    assert len(grid) == 12


def test_sample_grid_left_unbounded():
    grid = sample_grid(Interval(None, Fraction(0)), 8)
    assert all(x < 0 for x in grid)
    # the offset scale is the sampled span 10^5, not 1
    assert grid[0] == -10 ** 5 + mpmath.mpf(10 ** 5) / 1024


def test_sample_grid_single_geometric_point():
    grid = sample_grid(Interval(Fraction(2), Fraction(3)), 1)
    assert grid[0] == 2 + mpmath.ldexp(1, -10)
    assert len(grid) == 3


def test_sample_grid_rejects_empty_interval():
    with pytest.raises(DomainError):
        sample_grid(Interval(Fraction(1), Fraction(1)), 8)


def test_sample_grid_rejects_zero_points():
    with pytest.raises(ValueError):
        sample_grid(UNIT, 0)


# ---------------------------------------------------------------------------
# Sign tests
# ---------------------------------------------------------------------------

@pytest.mark.parametrize('text, mode', [
    ('exp(-x)', 'CM'),
    ('x^(-1/2) * exp(-x)', 'CM'),
    ('psi1(x)', 'CM'),
    ('log((x + 2)/(x + 1))', 'CM'),
    ('exp(-x) * x^(-1)', 'LCM'),
    ('x^2', 'AM'),
    ('exp(x)', 'AM'),
    ('sqrt(x)', 'BERN'),
    ('log(x + 1)', 'BERN'),
])
def test_sign_test_passes(text, mode):
    report = run(text, mode=mode)
    assert report.verdict.status == PASS
    assert report.mode == mode
    assert len(report.margins) == 9
    assert not report.skipped


@pytest.mark.parametrize('text, mode', [
    ('log((x + 1)/(x + 2))', 'CM'),
    ('x^2', 'CM'),
    ('exp(-x)', 'AM'),
    ('x - 1', 'BERN'),
])
def test_sign_test_fails(text, mode):
    report = run(text, mode=mode)
    verdict = report.verdict
    assert verdict.status == FAIL
    assert verdict.margin < 0
    assert verdict.point in report.grid
    assert report.margins[verdict.order][report.grid.index(verdict.point)] == verdict.margin


def test_lcm_mode_fails_on_nonpositive_value():
    report = run('x - 1', interval=UNIT, mode='LCM')
    assert report.verdict.status == FAIL
    assert report.verdict.order == 0


def test_rounding_noise_near_a_pole_is_not_a_failure():
    # ad = bc: log((5/2 x + 3/2)/(x + 3/5)) is the constant log(5/2)
    p = LinFracLog(F(5, 2), F(3, 2), 1, F(3, 5))
    verdict = families.classify_linfrac(p)
    assert verdict.status == CM
    assert verdict.condition_id == 'theorem14-4'

    report = sign_test(families.family_body(p), Interval(F(-3, 5), None), order=12, mode='CM')
    assert report.precision_bits == 96
    assert report.verdict.status != FAIL
    assert not witness_search(families.family_body(p), Interval(F(-3, 5), None), order=12).found


def test_sign_test_all_points_skipped_is_inconclusive():
    report = run('log(x - 2)', interval=UNIT)
    assert report.verdict.status == INCONCLUSIVE
    assert len(report.skipped) == len(report.grid)
    assert 'log(x - 2)' in report.skipped[0][1]


def test_sign_test_skips_points_outside_the_domain():
    report = run('log(x - 1/2)', interval=UNIT, mode='AM', order=0)
    assert report.skipped
    assert all(x <= 0.5 for x, _ in report.skipped)


def test_sign_test_rejects_unknown_mode():
    with pytest.raises(ValueError):
        run('exp(-x)', mode='XYZ')


def test_sign_test_default_tolerance():
    report = run('exp(-x)')
    assert report.tol == mpmath.ldexp(1, -P // 2)


def test_sign_test_does_not_depend_on_worker_count():
    single = run('exp(-x) * x^(-1)', order=4, grid_size=6)
    pooled = run('exp(-x) * x^(-1)', order=4, grid_size=6, threads=2)
    assert single.to_dict() == pooled.to_dict()


def test_report_rows_cover_every_cell():
    report = run('exp(-x)', order=3, grid_size=4)
    rows = report.to_rows()
    assert len(rows) == 4 * len(report.grid)
    assert {row['n'] for row in rows} == {0, 1, 2, 3}


def test_strictness_margin_of_exponential():
    report = run('exp(-x)', interval=UNIT, order=6, grid_size=16)
    margin = strictness_margins(report)
    # every derivative has magnitude e^-x, smallest at the right-most sample
    with mpmath.workprec(P):
        expected = mpmath.exp(-(1 - mpmath.ldexp(1, -10)))
    assert close(margin, expected, 100)


def test_strictness_needs_pass():
    with pytest.raises(PreconditionError):
        strictness_margins(run('x^2'))


# ---------------------------------------------------------------------------
# Witness search
# ---------------------------------------------------------------------------

def test_witness_search_confirms_violation():
    witness = witness_search(parse_expr('log((x + 1)/(x + 2))'), POSITIVE, order=6, precision=P)
    assert witness.found
    assert witness.point == mpmath.ldexp(1, -10)
    assert witness.confirmed_margin < 0
    assert witness.to_dict()['status'] == FAIL


def test_witness_search_respects_budget():
    result = witness_search(parse_expr('exp(-x)'), POSITIVE, order=6, budget=20, precision=P)
    assert not result.found
    assert result.evaluations == 20
    assert result.to_dict()['status'] == 'NOT_FOUND'


def test_witness_search_scans_right_end_early():
    # 100 - x is negative only near the right end, which is scanned second
    witness = witness_search(parse_expr('100 - x'), Interval(Fraction(0), Fraction(1000)), order=2,
                             budget=3, precision=P)
    assert witness.found
    assert witness.point > 900


# ---------------------------------------------------------------------------
# Radius probe
# ---------------------------------------------------------------------------

def test_radius_of_reciprocal():
    estimate = radius_probe(parse_expr('1/x'), 1, 0, order=16, precision=P)
    assert estimate.status == PASS
    assert close(estimate.radius, 1, 60)
    assert close(estimate.root_radius, 1, 60)
    assert estimate.coefficient_count == 17


def test_radius_of_shifted_reciprocal_exceeds_bound():
    estimate = radius_probe(parse_expr('1/(x + 1)'), 1, 0, order=16, precision=P)
    assert estimate.status == PASS
    assert close(estimate.radius, 2, 60)


def test_radius_below_bound_fails():
    estimate = radius_probe(parse_expr('1/(x - 1/2)'), 1, 0, order=16, precision=P)
    assert estimate.status == FAIL
    assert close(estimate.radius, 0.5, 60)


def test_radius_of_polynomial_is_inconclusive():
    estimate = radius_probe(parse_expr('x^2'), 1, 0, order=10, precision=P)
    assert estimate.status == INCONCLUSIVE
    assert estimate.radius is None


def test_radius_probe_needs_order():
    with pytest.raises(InsufficientOrderError):
        radius_probe(parse_expr('1/x'), 1, 0, order=4)


def test_radius_probe_needs_center_right_of_left_end():
    with pytest.raises(DomainError):
        radius_probe(parse_expr('1/x'), 1, 2, order=10)
