# services/alpha0.py
"""
Empirical bracketing of the largest alpha for which

    (x+a)^alpha [psi(x+b) - psi(x+a) - (b-a)/(x+a)]

passes the CM sign test, for a >= 0 and 0 < 1-b+a < 1. Results are labeled
EMPIRICAL: a finite-order sign test cannot certify complete monotonicity.
"""
import logging
from fractions import Fraction

import mpmath

from config.settings import (ALPHA0_BISECT_TOL, ALPHA0_ESCALATIONS, ALPHA0_GRID_SIZE, ALPHA0_LEFT_OFFSET,
                             ALPHA0_MIN_BISECT_TOL, ALPHA0_MIN_ORDER, ALPHA0_ORDER, ALPHA0_SEARCH,
                             LEFT_OFFSET_EXPONENT, default_precision)
from models.expr import Interval, as_fraction
from models.family import PsiGap
from models.report import FAIL, INCONCLUSIVE, PASS, Alpha0Estimate
from services.families import build_family
from services.testers import sign_test, witness_search
from utils.errors import Alpha0Aborted, CmonoError, PreconditionError
from utils.parallel import ordered_map

logger = logging.getLogger(__name__)

ABORTED = 'ABORTED'


def check_regime(a, b):
    """Exact (a, b) after checking a >= 0 and 0 < 1-b+a < 1"""
    a, b = as_fraction(a), as_fraction(b)
    if a < 0:
        raise PreconditionError(f"alpha0 needs a >= 0, got a = {a}")
    if not 0 < 1 - b + a < 1:
        raise PreconditionError(f"alpha0 needs 0 < 1-b+a < 1, got a = {a}, b = {b}")
    return a, b


def probe_interval(a):
    # sample_grid puts its first point (len or 1) * 2^LEFT_OFFSET_EXPONENT right of lo
    first = Fraction(2) ** LEFT_OFFSET_EXPONENT
    return Interval(-a + as_fraction(ALPHA0_LEFT_OFFSET) - first, None)


def probe_expr(a, b, alpha):
    return build_family(PsiGap.NAME, {'a': a, 'b': b, 'alpha': alpha, 'beta': b - a})


class Bisection:
    """Probe bookkeeping for one (a, b) cell"""

    def __init__(self, a, b, order, grid_size, precision, threads):
        self.a, self.b = a, b
        self.order = order
        self.grid_size = grid_size
        self.precision = precision
        self.threads = threads
        self.interval = probe_interval(a)
        self.trace = []
        self.grid_points = 0

    def record(self, alpha, report):
        verdict = report.verdict
        entry = {'alpha': repr(float(alpha)), 'P': report.precision_bits, 'status': verdict.status}
        if verdict.status == FAIL:
            entry['order'] = verdict.order
            entry['point'] = mpmath.nstr(verdict.point, 12)
        self.trace.append(entry)
        self.grid_points = len(report.grid)
        logger.debug(f"alpha0 a={self.a} b={self.b}: alpha={float(alpha)} P={report.precision_bits} "
                     f"-> {verdict.status}")

    def probe(self, alpha, precision=None):
        """PASS or FAIL for alpha, doubling precision while the test is inconclusive"""
        precision = precision or self.precision
        e = probe_expr(self.a, self.b, alpha)
        for _ in range(ALPHA0_ESCALATIONS + 1):
            report = sign_test(e, self.interval, self.order, self.grid_size, mode='CM',
                               precision=precision, threads=self.threads)
            self.record(alpha, report)
            if report.verdict.status != INCONCLUSIVE:
                self.check_monotone()
                return report.verdict.status
            precision *= 2
        raise Alpha0Aborted(f"alpha={float(alpha)} stayed INCONCLUSIVE after {ALPHA0_ESCALATIONS} "
                            f"precision escalations", self.trace)

    def check_monotone(self):
        passing = [Fraction(t['alpha']) for t in self.trace if t['status'] == PASS]
        failing = [Fraction(t['alpha']) for t in self.trace if t['status'] == FAIL]
        if passing and failing and max(passing) >= min(failing):
            raise Alpha0Aborted(f"non-monotone evidence: alpha={float(max(passing))} passes while "
                                f"alpha={float(min(failing))} fails", self.trace)


def estimate_alpha0(a, b, order=ALPHA0_ORDER, bisect_tol=ALPHA0_BISECT_TOL, precision=None,
                    grid_size=ALPHA0_GRID_SIZE, threads=1):
    """
    Bisect alpha over the search range with beta = b - a fixed

    The lower end must pass and the upper end must fail before bisection
    starts. Both final endpoints are re-verified at doubled precision; the
    upper one with a confirmed witness.

    Args:
        a, b: Family parameters in the regime a >= 0, 0 < 1-b+a < 1
        order (int): Derivative order N of every probe, at least 8
        bisect_tol: Final bracket width, at least 2^-20
        precision (int, optional): Starting precision P; defaults to max(64, 8N)
        grid_size (int): Geometric grid points per probe
        threads (int): Worker processes per sign test

    Returns:
        Alpha0Estimate

    Raises:
        PreconditionError: Outside the regime, or N or bisect_tol too small
        Alpha0Aborted: Inconclusive probes past the escalation cap, non-monotone
                       evidence, or endpoints that do not re-verify
    """
    a, b = check_regime(a, b)
    if order < ALPHA0_MIN_ORDER:
        raise PreconditionError(f"alpha0 needs N >= {ALPHA0_MIN_ORDER}, got {order}")
    tol = as_fraction(bisect_tol)
    if tol < as_fraction(ALPHA0_MIN_BISECT_TOL):
        raise PreconditionError(f"bisect_tol must be at least 2^-20, got {float(tol)}")
    precision = precision or default_precision(order)

    run = Bisection(a, b, order, grid_size, precision, threads)
    lo, hi = (as_fraction(end) for end in ALPHA0_SEARCH)
    logger.info(f"Estimating alpha0 for a={a}, b={b} on [{float(lo)}, {float(hi)}] N={order} P={precision}")

    if run.probe(lo) != PASS:
        raise Alpha0Aborted(f"alpha={float(lo)} does not pass the sign test", run.trace)
    if run.probe(hi) != FAIL:
        raise Alpha0Aborted(f"alpha={float(hi)} does not fail the sign test", run.trace)

    while hi - lo > tol:
        mid = (lo + hi) / 2
        if run.probe(mid) == PASS:
            lo = mid
        else:
            hi = mid

    if run.probe(lo, 2 * precision) != PASS:
        raise Alpha0Aborted(f"alpha_lo={float(lo)} does not re-verify at {2 * precision} bits", run.trace)
    witness = witness_search(probe_expr(a, b, hi), run.interval, order, mode='CM', precision=precision,
                             grid_size=grid_size)
    if not witness.found:
        raise Alpha0Aborted(f"alpha_hi={float(hi)} has no witness confirmed at {2 * precision} bits", run.trace)

    logger.info(f"alpha0 for a={a}, b={b}: [{float(lo)}, {float(hi)}] after {len(run.trace)} probes")
    return Alpha0Estimate(a=a, b=b, beta=b - a, alpha_lo=lo, alpha_hi=hi, order=order,
                          grid_points=run.grid_points, precision_bits=precision, witness=witness,
                          trace=tuple(run.trace))


def aborted_estimate(a, b, order, precision, err):
    """ABORTED row for a cell whose estimate failed, keeping the bisection trace"""
    a, b = as_fraction(a), as_fraction(b)
    trace = tuple(getattr(err, 'trace', ())) + ({'error': str(err)},)
    return Alpha0Estimate(a=a, b=b, beta=b - a, alpha_lo=None, alpha_hi=None, order=order,
                          grid_points=0, precision_bits=precision or default_precision(order),
                          status=ABORTED, trace=trace)


def _sweep_cell(task):
    a, b, order, bisect_tol, precision, grid_size = task
    try:
        return estimate_alpha0(a, b, order, bisect_tol, precision, grid_size)
    except CmonoError as err:
        logger.warning(f"alpha0 cell a={a}, b={b} failed: {err}")
        return aborted_estimate(a, b, order, precision, err)


def sweep_alpha0(a_values, b_offsets, order=ALPHA0_ORDER, bisect_tol=ALPHA0_BISECT_TOL, precision=None,
                 grid_size=ALPHA0_GRID_SIZE, threads=1):
    """
    estimate_alpha0 over every (a, a + offset) pair, ordered by (a, b)

    Cells run in parallel; a failing cell becomes an ABORTED row and the sweep
    continues.
    """
    cells = sorted((as_fraction(a), as_fraction(a) + as_fraction(offset))
                   for a in a_values for offset in b_offsets)
    logger.info(f"alpha0 sweep over {len(cells)} cells")
    tasks = [(a, b, order, bisect_tol, precision, grid_size) for a, b in cells]
    rows = ordered_map(_sweep_cell, tasks, threads)
    aborted = sum(1 for row in rows if row.status == ABORTED)
    if aborted:
        logger.warning(f"alpha0 sweep: {aborted} of {len(rows)} cells aborted")
    return rows
