# services/testers.py
"""
Numerical sign tests on a finite grid and finite derivative order

Nothing here proves complete monotonicity: PASS means no cell was negative
beyond tolerance, and a Witness is a violation re-confirmed at doubled
precision.
"""
import logging
import math
from fractions import Fraction

import mpmath

from config.settings import (DECADE_POINTS, DEFAULT_GRID_SIZE, DEFAULT_ORDER, GUARD_BITS,
                             LEFT_OFFSET_EXPONENT, RADIUS_SLACK, default_precision)
from models.real import Real, to_mpf
from models.report import (FAIL, INCONCLUSIVE, MODES, PASS, NotFound, RadiusEstimate, SignReport,
                           Verdict, Witness)
from services import numkernel, taylor
from services.parser import to_text
from utils.errors import DomainError, InsufficientOrderError, PreconditionError
from utils.parallel import ordered_map

logger = logging.getLogger(__name__)

OPEN_RIGHT_SPAN = 10 ** 5  # an unbounded interval is sampled up to lo + 10^5
FIRST_DECADE = -2
DEFAULT_WITNESS_BUDGET = 200
MIN_RADIUS_ORDER = 8
FAIL_CONFIRM_POINTS = 8  # grid points recomputed at 2P before a FAIL is reported


def default_tol(precision):
    return mpmath.ldexp(1, -(precision // 2))


def sample_grid(interval, grid_size=DEFAULT_GRID_SIZE):
    """
    Sorted sample points strictly inside an open interval

    Points are geometric in the offset from the left end, starting at
    (len or 1) * 2^-10, plus the points lo + 10^k for k = -2..5 that fall
    inside. Endpoints are never sampled.
    """
    if interval.is_empty:
        raise DomainError(f"cannot sample the empty interval {interval}")
    if grid_size < 1:
        raise ValueError("grid_size must be at least 1")

    lo, hi = interval.lo, interval.hi
    if lo is None:
        lo = (hi if hi is not None else Fraction(0)) - OPEN_RIGHT_SPAN
    length = None if hi is None else hi - lo
    first = (length if length is not None else 1) * Fraction(2) ** LEFT_OFFSET_EXPONENT
    last = length - first if length is not None else Fraction(OPEN_RIGHT_SPAN)

    base = to_mpf(lo)
    offsets = set()
    if grid_size == 1:
        offsets.add(to_mpf(first))
    else:
        ratio = (to_mpf(last) / to_mpf(first)) ** (mpmath.mpf(1) / (grid_size - 1))
        offsets.update(to_mpf(first) * ratio ** i for i in range(grid_size - 1))
        offsets.add(to_mpf(last))
    for k in range(FIRST_DECADE, FIRST_DECADE + DECADE_POINTS):
        offset = Fraction(10) ** k
        if length is None or offset < length:
            offsets.add(to_mpf(offset))
    return [base + offset for offset in sorted(offsets)]


def _signed_rows(jet, mode):
    """Margins and scales for one grid point, indexed by order"""
    derivatives = jet.derivatives()
    if mode == 'CM':
        margins = [d if n % 2 == 0 else -d for n, d in enumerate(derivatives)]
    elif mode == 'AM':
        margins = list(derivatives)
    elif mode == 'BERN':
        margins = [derivatives[0]] + [d if n % 2 == 1 else -d for n, d in enumerate(derivatives) if n]
    else:
        value = derivatives[0]
        if not value > 0:
            return [value] + [None] * jet.order, [abs(value)] + [None] * jet.order
        logs = taylor.log(jet).derivatives()
        margins = [value] + [l if n % 2 == 0 else -l for n, l in enumerate(logs) if n]
        return margins, [abs(value)] + [abs(l) for l in logs[1:]]
    return margins, [abs(d) for d in derivatives]


def _evaluate_point(task):
    """Worker: (margins, scales, error text) at one grid point"""
    e, x, order, precision, mode = task
    try:
        jet = taylor.eval_derivatives(e, x, order, precision)
    except DomainError as err:
        return None, None, str(err)
    with mpmath.workprec(numkernel.working_bits(precision)):
        margins, scales = _signed_rows(jet, mode)
    return margins, scales, None


def _decide(margins, scales, tol):
    """(violating cells worst first as (severity, n, i), any small negative, cells evaluated)"""
    violations = []
    inconclusive = False
    evaluated = 0
    for n, row in enumerate(margins):
        for i, margin in enumerate(row):
            if margin is None:
                continue
            evaluated += 1
            scale = max(scales[n][i], 1)
            if margin < -tol * scale:
                violations.append((margin / scale, n, i))
            elif margin < 0:
                inconclusive = True
    violations.sort()
    return violations, inconclusive, evaluated


def _survives(margin, confirmed, confirmed_tol):
    """A violation holds at 2P when it stays beyond tolerance and agrees with the P-bit margin"""
    return (confirmed is not None and confirmed < -confirmed_tol
            and abs(confirmed - margin) <= abs(confirmed) / 2)


def _confirmed_violation(e, violations, margins, grid, order, mode, precision):
    """First (n, i) among the violations that survives at 2P, or None"""
    checked = {}
    for _, n, i in violations:
        if i not in checked:
            if len(checked) >= FAIL_CONFIRM_POINTS:
                break
            checked[i] = _evaluate_point((e, grid[i], order, 2 * precision, mode))
        high, high_scales, error = checked[i]
        if error is not None or high[n] is None:
            continue
        with mpmath.workprec(numkernel.working_bits(2 * precision)):
            if _survives(margins[n][i], high[n], default_tol(2 * precision) * max(high_scales[n], 1)):
                return n, i
        logger.debug(f"Violation n={n}, x={mpmath.nstr(grid[i], 10)} vanished at {2 * precision} bits")
    return None


def sign_test(e, interval, order=DEFAULT_ORDER, grid_size=DEFAULT_GRID_SIZE, tol=None, mode='CM',
              precision=None, threads=1):
    """
    Grid sign test of the CM, AM, LCM or Bernstein inequalities

    Violating cells are recomputed at 2P, worst first; the verdict is FAIL
    only for a cell that survives there, otherwise INCONCLUSIVE.

    Args:
        e (Expr): Expression under test
        interval (Interval): Open interval to sample
        order (int): Highest derivative order N
        grid_size (int): Geometric grid points (decade points are added)
        tol: Base tolerance; a cell's tolerance is tol * max(|scale|, 1).
             Defaults to 2^(-P/2)
        mode (str): CM, AM, LCM or BERN
        precision (int, optional): P in bits; defaults to max(64, 8N)
        threads (int): Worker processes for the grid

    Returns:
        SignReport
    """
    if mode not in MODES:
        raise ValueError(f"Unknown sign test mode: {mode}")
    precision = precision or default_precision(order)

    with mpmath.workprec(numkernel.working_bits(precision)):
        grid = sample_grid(interval, grid_size)
        base_tol = default_tol(precision) if tol is None else to_mpf(tol)

    logger.debug(f"sign_test {mode} N={order} P={precision} on {interval} with {len(grid)} points")
    results = ordered_map(_evaluate_point, [(e, x, order, precision, mode) for x in grid], threads)

    margins = [[None] * len(grid) for _ in range(order + 1)]
    scales = [[None] * len(grid) for _ in range(order + 1)]
    skipped = []
    for i, (column, column_scales, error) in enumerate(results):
        if error is not None:
            logger.warning(f"Skipping grid point {mpmath.nstr(grid[i], 10)}: {error}")
            skipped.append((grid[i], error))
            continue
        for n in range(order + 1):
            margins[n][i] = column[n]
            scales[n][i] = column_scales[n]

    with mpmath.workprec(numkernel.working_bits(precision)):
        violations, inconclusive, evaluated = _decide(margins, scales, base_tol)

    cell = None
    if violations:
        cell = _confirmed_violation(e, violations, margins, grid, order, mode, precision)
    if cell is not None:
        n, i = cell
        verdict = Verdict(FAIL, n, grid[i], margins[n][i])
    elif violations:
        logger.warning(f"sign_test {mode}: {len(violations)} violating cells did not survive {2 * precision} bits")
        verdict = Verdict(INCONCLUSIVE)
    elif inconclusive or not evaluated:
        verdict = Verdict(INCONCLUSIVE)
    else:
        verdict = Verdict(PASS)

    if verdict.status == FAIL:
        logger.info(f"sign_test {mode}: FAIL at n={verdict.order}, x={mpmath.nstr(verdict.point, 10)}")
    else:
        logger.info(f"sign_test {mode}: {verdict.status} over {len(grid) - len(skipped)} points, N={order}")

    return SignReport(
        expression=to_text(e),
        interval=interval,
        mode=mode,
        order=order,
        grid=tuple(grid),
        margins=tuple(tuple(row) for row in margins),
        scales=tuple(tuple(row) for row in scales),
        tol=base_tol,
        verdict=verdict,
        precision_bits=precision,
        skipped=tuple(skipped),
    )


def strictness_margins(report):
    """Minimum margin of a passing report; above tol suggests strict monotonicity"""
    if report.verdict.status != PASS:
        raise PreconditionError(f"strictness needs a PASS report, got {report.verdict.status}")
    values = [margin for _, _, _, margin in report.cells()]
    return Real(min(values), report.precision_bits)


def _extremes_first(points):
    """Interleave from both ends: p0, p_last, p1, p_last-1, ..."""
    ordered = []
    left, right = 0, len(points) - 1
    while left <= right:
        ordered.append(points[left])
        if left != right:
            ordered.append(points[right])
        left += 1
        right -= 1
    return ordered


def _confirm(e, x, n, order, mode, precision):
    """Margin and cell tolerance of cell (n, x) recomputed at precision"""
    margins, scales, error = _evaluate_point((e, x, order, precision, mode))
    if error is not None or margins[n] is None:
        return None, None
    with mpmath.workprec(numkernel.working_bits(precision)):
        return margins[n], default_tol(precision) * max(scales[n], 1)


def witness_search(e, interval, order=DEFAULT_ORDER, budget=DEFAULT_WITNESS_BUDGET, mode='CM',
                   precision=None, grid_size=None):
    """
    Look for a sign violation, scanning the extremes of the interval first

    Each candidate violation is recomputed at 2P before it is reported.

    Returns:
        Witness or NotFound
    """
    if mode not in MODES:
        raise ValueError(f"Unknown sign test mode: {mode}")
    precision = precision or default_precision(order)
    grid_size = grid_size or max(DEFAULT_GRID_SIZE, min(budget, 4 * DEFAULT_GRID_SIZE))
    with mpmath.workprec(numkernel.working_bits(precision)):
        points = _extremes_first(sample_grid(interval, grid_size))
        tol = default_tol(precision)

    evaluations = 0
    unconfirmed = 0
    for x in points:
        if evaluations >= budget:
            break
        evaluations += 1
        margins, scales, error = _evaluate_point((e, x, order, precision, mode))
        if error is not None:
            logger.debug(f"witness_search skipping {mpmath.nstr(x, 10)}: {error}")
            continue

        with mpmath.workprec(numkernel.working_bits(precision)):
            candidates = sorted(
                (margin / max(scales[n], 1), n) for n, margin in enumerate(margins)
                if margin is not None and margin < -tol * max(scales[n], 1)
            )
        for _, n in candidates:
            evaluations += 1
            confirmed, confirmed_tol = _confirm(e, x, n, order, mode, 2 * precision)
            if _survives(margins[n], confirmed, confirmed_tol):
                logger.info(f"Witness at n={n}, x={mpmath.nstr(x, 10)} after {evaluations} evaluations")
                return Witness(order=n, point=x, margin=margins[n], precision_bits=precision,
                               confirmed_margin=confirmed)
            unconfirmed += 1
            logger.debug(f"Candidate n={n}, x={mpmath.nstr(x, 10)} vanished at {2 * precision} bits")

    logger.info(f"No witness within a budget of {budget} evaluations")
    return NotFound(evaluations=evaluations, budget=budget, unconfirmed=unconfirmed)


def radius_probe(e, x0, a, order=DEFAULT_ORDER, precision=None):
    """
    Real-axis estimate of the Taylor radius of e at x0

    A function CM on (a, b) is analytic in the disc about x0 of radius x0 - a,
    so its coefficient ratios over the last ceil(N/2) orders should not fall
    below that distance by more than the slack. The bound only means something
    after a PASS sign test on (a, b); checking that is left to the caller.
    """
    if order < MIN_RADIUS_ORDER:
        raise InsufficientOrderError(f"radius_probe needs N >= {MIN_RADIUS_ORDER}, got {order}")
    precision = precision or default_precision(order)
    jet = taylor.eval_derivatives(e, x0, order, precision)

    with mpmath.workprec(numkernel.working_bits(precision)):
        center, left = to_mpf(x0), to_mpf(a)
        if not center > left:
            raise DomainError("radius_probe needs x0 > a")
        lower = center - left
        coeffs = [abs(c) for c in jet.coeffs]
        floor = mpmath.ldexp(max(coeffs), -(precision - GUARD_BITS))
        tail = math.ceil(order / 2)

        log_ratios, log_roots = [], []
        for k in range(order - tail + 1, order + 1):
            if coeffs[k] > floor:
                log_roots.append(-mpmath.log(coeffs[k]) / k)
                if coeffs[k - 1] > floor:
                    log_ratios.append(mpmath.log(coeffs[k - 1] / coeffs[k]))

        root_radius = mpmath.exp(mpmath.fsum(log_roots) / len(log_roots)) if log_roots else None
        if not log_ratios:
            logger.info(f"radius_probe at {mpmath.nstr(center, 10)}: tail coefficients below noise floor")
            return RadiusEstimate(center, order + 1, None, lower, INCONCLUSIVE, root_radius)

        radius = mpmath.exp(mpmath.fsum(log_ratios) / len(log_ratios))
        status = PASS if radius >= lower * (1 - mpmath.mpf(RADIUS_SLACK)) else FAIL

    logger.info(f"radius_probe at {mpmath.nstr(center, 10)}: {mpmath.nstr(radius, 8)} "
                f"vs bound {mpmath.nstr(lower, 8)} -> {status}")
    return RadiusEstimate(center, order + 1, radius, lower, status, root_radius)
