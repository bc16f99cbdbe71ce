# models/report.py
"""Result records produced by the testers, alpha0 and asymptotics services"""
from dataclasses import dataclass, field
from fractions import Fraction

import mpmath

PASS = 'PASS'
FAIL = 'FAIL'
INCONCLUSIVE = 'INCONCLUSIVE'

MODES = ('CM', 'AM', 'LCM', 'BERN')


def _num(value, digits=20):
    if value is None:
        return None
    if isinstance(value, mpmath.mpf):
        return mpmath.nstr(value, digits)
    if isinstance(value, Fraction):
        return str(value.numerator) if value.denominator == 1 else repr(float(value))
    return str(value)


@dataclass(frozen=True)
class Verdict:
    """PASS, INCONCLUSIVE or FAIL; FAIL names the most negative cell"""
    status: str
    order: int = None
    point: object = None
    margin: object = None

    def to_dict(self):
        return {
            'status': self.status,
            'order': self.order,
            'point': _num(self.point),
            'margin': _num(self.margin),
        }


@dataclass(frozen=True)
class SignReport:
    """
    Grid x order matrix of signed margins

    margins[n][i] is the signed quantity tested at order n and grid point i;
    None marks a cell that could not be evaluated (see skipped).
    """
    expression: str
    interval: object
    mode: str
    order: int
    grid: tuple
    margins: tuple
    scales: tuple
    tol: object
    verdict: Verdict
    precision_bits: int
    skipped: tuple = ()

    def cell_tol(self, n, i):
        return self.tol * max(self.scales[n][i], 1)

    def cells(self):
        """(n, i, x, margin) for every evaluated cell, in (n, i) order"""
        for n, row in enumerate(self.margins):
            for i, margin in enumerate(row):
                if margin is not None:
                    yield n, i, self.grid[i], margin

    def to_dict(self):
        return {
            'expression': self.expression,
            'interval': str(self.interval),
            'mode': self.mode,
            'order': self.order,
            'precision_bits': self.precision_bits,
            'tol': _num(self.tol),
            'grid': [_num(x) for x in self.grid],
            'margins': [[_num(m) for m in row] for row in self.margins],
            'skipped': [{'point': _num(x), 'reason': reason} for x, reason in self.skipped],
            'verdict': self.verdict.to_dict(),
        }

    def to_rows(self):
        rows = []
        for n, row in enumerate(self.margins):
            for i, margin in enumerate(row):
                rows.append({'n': n, 'i': i, 'x': _num(self.grid[i]), 'margin': _num(margin),
                             'tol': _num(self.cell_tol(n, i)) if margin is not None else None})
        return rows


@dataclass(frozen=True)
class Witness:
    """A sign violation that was re-confirmed at doubled precision"""
    order: int
    point: object
    margin: object
    precision_bits: int
    confirmed_margin: object = None

    found = True

    def to_dict(self):
        return {
            'status': FAIL,
            'order': self.order,
            'point': _num(self.point),
            'margin': _num(self.margin),
            'confirmed_margin': _num(self.confirmed_margin),
            'precision_bits': self.precision_bits,
        }


@dataclass(frozen=True)
class NotFound:
    """Budget exhausted without a confirmed violation; not a proof of monotonicity"""
    evaluations: int
    budget: int
    unconfirmed: int = 0

    found = False

    def to_dict(self):
        return {
            'status': 'NOT_FOUND',
            'evaluations': self.evaluations,
            'budget': self.budget,
            'unconfirmed': self.unconfirmed,
        }


@dataclass(frozen=True)
class RadiusEstimate:
    center: object
    coefficient_count: int
    radius: object
    lower_bound: object
    status: str
    root_radius: object = None

    def to_dict(self):
        return {
            'center': _num(self.center),
            'coefficient_count': self.coefficient_count,
            'radius': _num(self.radius),
            'root_radius': _num(self.root_radius),
            'lower_bound': _num(self.lower_bound),
            'status': self.status,
        }


@dataclass(frozen=True)
class Alpha0Estimate:
    """Empirical bracket [alpha_lo, alpha_hi] for the largest passing exponent"""
    a: object
    b: object
    beta: object
    alpha_lo: object
    alpha_hi: object
    order: int
    grid_points: int
    precision_bits: int
    status: str = 'EMPIRICAL'
    witness: object = field(default=None, compare=False)
    trace: tuple = field(default=(), compare=False)

    CSV_COLUMNS = ('a', 'b', 'beta', 'alpha_lo', 'alpha_hi', 'N', 'P', 'grid_points', 'status')

    def to_row(self):
        return {
            'a': _num(self.a),
            'b': _num(self.b),
            'beta': _num(self.beta),
            'alpha_lo': _num(self.alpha_lo, 12),
            'alpha_hi': _num(self.alpha_hi, 12),
            'N': self.order,
            'P': self.precision_bits,
            'grid_points': self.grid_points,
            'status': self.status,
        }

    def to_dict(self):
        row = self.to_row()
        row['witness'] = self.witness.to_dict() if self.witness is not None else None
        row['trace'] = list(self.trace)
        return row


@dataclass(frozen=True)
class SlopeFit:
    """Fitted log-log slope of |approximation error| against x"""
    label: str
    expected: float
    slope: float
    tolerance: float
    points: int

    @property
    def status(self):
        return PASS if abs(self.slope - self.expected) <= self.tolerance else FAIL

    def to_row(self):
        return {
            'label': self.label,
            'expected': self.expected,
            'slope': round(self.slope, 6),
            'tolerance': self.tolerance,
            'points': self.points,
            'status': self.status,
        }
