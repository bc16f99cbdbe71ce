# tests/test_alpha0.py
from fractions import Fraction
from types import SimpleNamespace

import mpmath
import pytest

from models.expr import FamilyRef
from models.report import FAIL, INCONCLUSIVE, PASS, Alpha0Estimate
from services import alpha0
from services.testers import sample_grid
from utils.errors import Alpha0Aborted, PreconditionError

F = Fraction


def fake_report(status, precision):
    return SimpleNamespace(verdict=SimpleNamespace(status=status, order=3, point=mpmath.mpf(1)),
                           precision_bits=precision, grid=(0,) * 10)


@pytest.fixture
def threshold_tester(monkeypatch):
    """Sign test stand-in that passes exactly when alpha <= 1.7"""
    calls = []

    def sign_test(e, interval, order, grid_size, mode, precision, threads):
        calls.append((e.param('alpha'), precision))
        status = PASS if e.param('alpha') <= F(17, 10) else FAIL
        return fake_report(status, precision)

    def witness_search(e, interval, order, mode, precision, grid_size):
        return SimpleNamespace(found=e.param('alpha') > F(17, 10), to_dict=lambda: {'status': FAIL})

    monkeypatch.setattr(alpha0, 'sign_test', sign_test)
    monkeypatch.setattr(alpha0, 'witness_search', witness_search)
    return calls


@pytest.mark.parametrize('a, b', [(-1, 0), (0, 1), (0, 0), (0, F(3, 2)), (1, F(1, 2))])
def test_check_regime_rejects(a, b):
    with pytest.raises(PreconditionError):
        alpha0.check_regime(a, b)


def test_check_regime_returns_exact_values():
    assert alpha0.check_regime(0.5, '0.9') == (F(1, 2), F(9, 10))


def test_probe_interval_puts_first_sample_at_offset():
    interval = alpha0.probe_interval(F(1, 2))
    grid = sample_grid(interval, 4)
    assert grid[0] == mpmath.mpf(-0.5) + mpmath.ldexp(1, -8)


def test_probe_expr_fixes_beta():
    e = alpha0.probe_expr(F(0), F(1, 2), F(3, 2))
    assert isinstance(e, FamilyRef)
    assert e.param('beta') == F(1, 2)
    assert e.param('alpha') == F(3, 2)


@pytest.mark.parametrize('kwargs', [{'order': 4}, {'bisect_tol': 2.0 ** -30}])
def test_estimate_preconditions(kwargs):
    with pytest.raises(PreconditionError):
        alpha0.estimate_alpha0(0, F(1, 2), **kwargs)


def test_estimate_brackets_threshold(threshold_tester):
    estimate = alpha0.estimate_alpha0(0, F(1, 2), order=8, bisect_tol=2.0 ** -6, precision=64)
    assert estimate.alpha_lo <= F(17, 10) < estimate.alpha_hi
    assert estimate.alpha_hi - estimate.alpha_lo <= F(1, 64)
    assert estimate.status == 'EMPIRICAL'
    assert estimate.beta == F(1, 2)
    # the final lower end is re-verified at doubled precision
    assert threshold_tester[-1] == (estimate.alpha_lo, 128)
    assert estimate.trace[0]['alpha'] == '1.0'
    assert estimate.trace[1]['alpha'] == '2.5'


def test_estimate_row_format(threshold_tester):
    row = alpha0.estimate_alpha0(0, F(1, 2), order=8, bisect_tol=2.0 ** -4, precision=64).to_row()
    assert list(row) == list(Alpha0Estimate.CSV_COLUMNS)
    assert row['N'] == 8
    assert row['P'] == 64
    assert float(row['alpha_lo']) <= 1.7 < float(row['alpha_hi'])


def test_estimate_aborts_when_lower_end_fails(monkeypatch):
    monkeypatch.setattr(alpha0, 'sign_test', lambda e, *args, **kwargs: fake_report(FAIL, kwargs['precision']))
    with pytest.raises(Alpha0Aborted) as err:
        alpha0.estimate_alpha0(0, F(1, 2), order=8, precision=64)
    assert len(err.value.trace) == 1


def test_estimate_aborts_when_upper_end_passes(monkeypatch):
    monkeypatch.setattr(alpha0, 'sign_test', lambda e, *args, **kwargs: fake_report(PASS, kwargs['precision']))
    with pytest.raises(Alpha0Aborted):
        alpha0.estimate_alpha0(0, F(1, 2), order=8, precision=64)


def test_inconclusive_probe_escalates_then_aborts(monkeypatch):
    precisions = []

    def sign_test(e, *args, **kwargs):
        precisions.append(kwargs['precision'])
        return fake_report(INCONCLUSIVE, kwargs['precision'])

    monkeypatch.setattr(alpha0, 'sign_test', sign_test)
    run = alpha0.Bisection(F(0), F(1, 2), 8, 16, 64, 1)
    with pytest.raises(Alpha0Aborted):
        run.probe(F(1))
    assert precisions == [64, 128, 256]
    assert [entry['status'] for entry in run.trace] == [INCONCLUSIVE] * 3


def test_non_monotone_evidence_aborts():
    run = alpha0.Bisection(F(0), F(1, 2), 8, 16, 64, 1)
    run.trace = [{'alpha': '1.5', 'status': FAIL}, {'alpha': '1.75', 'status': PASS}]
    with pytest.raises(Alpha0Aborted):
        run.check_monotone()


def test_sweep_orders_cells_and_keeps_aborted_rows(monkeypatch):
    def estimate(a, b, order, bisect_tol, precision, grid_size):
        if a == F(1, 2):
            raise Alpha0Aborted("stuck", [{'alpha': '1.0', 'status': INCONCLUSIVE}])
        return Alpha0Estimate(a=a, b=b, beta=b - a, alpha_lo=F(1), alpha_hi=F(2), order=order,
                              grid_points=10, precision_bits=precision)

    monkeypatch.setattr(alpha0, 'estimate_alpha0', estimate)
    rows = alpha0.sweep_alpha0([0.5, 0], [0.5, 0.1], order=8, precision=64)
    assert [(row.a, row.b) for row in rows] == [(F(0), F(1, 10)), (F(0), F(1, 2)),
                                                (F(1, 2), F(3, 5)), (F(1, 2), F(1))]
    assert [row.status for row in rows] == ['EMPIRICAL', 'EMPIRICAL', alpha0.ABORTED, alpha0.ABORTED]
    assert rows[2].alpha_lo is None
    assert rows[2].trace[-1] == {'error': 'stuck'}
    assert rows[2].to_row()['alpha_lo'] is None


@pytest.mark.slow
def test_estimate_alpha0_on_real_probes():
    estimate = alpha0.estimate_alpha0(0, F(1, 2), bisect_tol=2.0 ** -6)
    assert 1 <= estimate.alpha_lo < estimate.alpha_hi <= F(5, 2)
    assert estimate.alpha_hi - estimate.alpha_lo <= F(1, 64)
    assert estimate.witness.found
