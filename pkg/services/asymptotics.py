# services/asymptotics.py
"""
Log-log slope fits of truncation errors for the large-x expansions

Each check samples x geometrically on a range, measures |expansion - exact|
against direct evaluation at twice the working precision, and fits the slope
of log|error| against log x. A slope within tolerance of the O-exponent
passes.
"""
import logging
import statistics

import mpmath

from config.settings import (ASYMCHECK_GAP, ASYMCHECK_POINTS, ASYMCHECK_PRECISION, ASYMCHECK_RANGE,
                             ASYMCHECK_SHIFT, ASYMCHECK_TOLERANCE)
from models.expr import as_fraction
from models.real import to_mpf
from models.report import SlopeFit
from services import numkernel
from services.families import asym_psi_gap
from utils.errors import DomainError
from utils.parallel import ordered_map

logger = logging.getLogger(__name__)


def sample_points(points=ASYMCHECK_POINTS, x_range=ASYMCHECK_RANGE):
    lo, hi = (to_mpf(end) for end in x_range)
    if points < 2 or not lo < hi:
        raise DomainError(f"need at least two points on an increasing range, got {points} on {x_range}")
    ratio = (hi / lo) ** (mpmath.mpf(1) / (points - 1))
    return [lo * ratio ** i for i in range(points)]


def fit_slope(xs, errors):
    """Least-squares slope of log|error| against log x; zero errors are dropped"""
    pairs = [(float(mpmath.log(x)), float(mpmath.log(abs(err)))) for x, err in zip(xs, errors) if err != 0]
    if len(pairs) < 2:
        raise DomainError("fewer than two non-zero errors to fit")
    log_x, log_err = zip(*pairs)
    return statistics.linear_regression(log_x, log_err).slope, len(pairs)


def psi_expansion_errors(expansion, xs, precision):
    """psi_asymptotic minus psi^(m)(x + shift) evaluated at 2P"""
    errors = []
    for x in xs:
        approx = numkernel.psi_asymptotic(x, expansion, precision)
        with mpmath.workprec(numkernel.working_bits(2 * precision)):
            z = to_mpf(x) + to_mpf(expansion.shift)
            tower = numkernel.polygamma_tower_raw(z, expansion.derivative_order)
            errors.append(to_mpf(approx) - tower[expansion.derivative_order])
    return errors


def psi_gap_errors(a, b, depth, xs, precision):
    """Errors of both asym_psi_gap expansions; the exact sides are evaluated at 2P"""
    values, companions = [], []
    for x in xs:
        value, companion = asym_psi_gap(x, a, b, depth, precision)
        with mpmath.workprec(numkernel.working_bits(2 * precision)):
            z, lower, upper = to_mpf(x), to_mpf(as_fraction(a)), to_mpf(as_fraction(b))
            low_tower = numkernel.polygamma_tower_raw(z + lower, 1)
            high_tower = numkernel.polygamma_tower_raw(z + upper, 1)
            shifted = z + lower
            exact_value = shifted * (high_tower[0] - low_tower[0]) - (upper - lower)
            exact_companion = -shifted ** 2 * (high_tower[1] - low_tower[1]) + (lower - upper)
            values.append(to_mpf(value) - exact_value)
            companions.append(to_mpf(companion) - exact_companion)
    return values, companions


def _run_check(task):
    kind, params, points, x_range, precision, tolerance = task
    xs = sample_points(points, x_range)
    if kind == 'psi':
        shift, term_count, derivative_order = params
        expansion = numkernel.PsiExpansion(as_fraction(shift), term_count, derivative_order)
        name = 'psi' if derivative_order == 0 else "psi'"
        label = f"{name}(x+{shift}) K={term_count}"
        series = [(label, expansion.error_exponent, psi_expansion_errors(expansion, xs, precision))]
    else:
        a, b, depth = params
        values, companions = psi_gap_errors(a, b, depth, xs, precision)
        expected = -(depth + 1)
        series = [
            (f"psi-gap value a={a} b={b} depth={depth}", expected, values),
            (f"psi-gap companion a={a} b={b} depth={depth}", expected, companions),
        ]

    fits = []
    for label, expected, errors in series:
        slope, used = fit_slope(xs, errors)
        fit = SlopeFit(label, float(expected), slope, tolerance, used)
        logger.info(f"{label}: slope {slope:.4f} vs {expected} -> {fit.status}")
        fits.append(fit)
    return fits


def asymptotic_checks(shift=ASYMCHECK_SHIFT, gap=ASYMCHECK_GAP, points=ASYMCHECK_POINTS,
                      x_range=ASYMCHECK_RANGE, precision=ASYMCHECK_PRECISION, tolerance=ASYMCHECK_TOLERANCE,
                      threads=1):
    """
    Slope fits for psi_asymptotic (K = 1..3, m = 0, 1) and asym_psi_gap (depth 1..3)

    Args:
        shift: a in psi(x+a) for the single-function expansions
        gap (tuple): (a, b) for the psi-gap expansions
        points (int): Sample count on x_range
        x_range (tuple): (lo, hi) of the geometric sample
        precision (int): Working precision P of the expansions
        tolerance (float): Allowed distance between fitted and expected slope
        threads (int): Worker processes, one check per task

    Returns:
        list: SlopeFit records, psi expansions first
    """
    tasks = [('psi', (shift, k, m), points, x_range, precision, tolerance)
             for m in (0, 1) for k in (1, 2, 3)]
    a, b = gap
    tasks += [('gap', (a, b, depth), points, x_range, precision, tolerance) for depth in (1, 2, 3)]
    logger.debug(f"Running {len(tasks)} asymptotic checks at P={precision}")
    return [fit for fits in ordered_map(_run_check, tasks, threads) for fit in fits]
