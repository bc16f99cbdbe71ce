# models/expr.py
"""
Expression AST over the single variable x

Nodes are frozen dataclasses, so they hash and compare structurally. Source
spans are carried for error messages but ignored by equality.
"""
from dataclasses import dataclass, field
from fractions import Fraction

import mpmath

from models.real import Real


def as_fraction(value):
    """Exact rational for int, Fraction, decimal str, float (by its repr) or mpf"""
    if isinstance(value, Fraction):
        return value
    if isinstance(value, bool):
        raise TypeError("bool is not a number")
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, float):
        return Fraction(repr(value))
    if isinstance(value, str):
        return Fraction(value.strip())
    if isinstance(value, Real):
        value = value.value
    if isinstance(value, mpmath.mpf):
        man, exp = value.man_exp
        return Fraction(int(man)) * (Fraction(2) ** int(exp))
    raise TypeError(f"cannot convert {type(value).__name__} to a rational")


@dataclass(frozen=True)
class Interval:
    """Open interval (lo, hi) with exact rational endpoints; None marks an infinite end"""
    lo: Fraction = None
    hi: Fraction = None

    @classmethod
    def of(cls, lo=None, hi=None):
        return cls(None if lo is None else as_fraction(lo),
                   None if hi is None else as_fraction(hi))

    @classmethod
    def everything(cls):
        return cls(None, None)

    @property
    def is_empty(self):
        return self.lo is not None and self.hi is not None and self.lo >= self.hi

    @property
    def length(self):
        if self.lo is None or self.hi is None:
            return None
        return self.hi - self.lo

    def contains(self, x):
        x = as_fraction(x) if not isinstance(x, Fraction) else x
        return (self.lo is None or x > self.lo) and (self.hi is None or x < self.hi)

    def intersect(self, other):
        lo = self.lo if other.lo is None else other.lo if self.lo is None else max(self.lo, other.lo)
        hi = self.hi if other.hi is None else other.hi if self.hi is None else min(self.hi, other.hi)
        return Interval(lo, hi)

    def within(self, other):
        """True when self is a subset of other"""
        lo_ok = other.lo is None or (self.lo is not None and self.lo >= other.lo)
        hi_ok = other.hi is None or (self.hi is not None and self.hi <= other.hi)
        return lo_ok and hi_ok

    def __str__(self):
        lo = '-inf' if self.lo is None else _fmt(self.lo)
        hi = 'inf' if self.hi is None else _fmt(self.hi)
        return f"({lo}, {hi})"


def _fmt(q):
    if q.denominator == 1:
        return str(q.numerator)
    return f"{q.numerator}/{q.denominator}"


# ---------------------------------------------------------------------------
# Nodes
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Expr:
    span: tuple = field(default=None, compare=False, repr=False, kw_only=True)

    @property
    def children(self):
        return ()


@dataclass(frozen=True)
class Var(Expr):
    pass


@dataclass(frozen=True)
class Const(Expr):
    value: object  # Fraction, or mpf for irrational constants

    @property
    def is_rational(self):
        return isinstance(self.value, Fraction)


@dataclass(frozen=True)
class _Unary(Expr):
    arg: Expr

    @property
    def children(self):
        return (self.arg,)


@dataclass(frozen=True)
class _Binary(Expr):
    left: Expr
    right: Expr

    @property
    def children(self):
        return (self.left, self.right)


@dataclass(frozen=True)
class Add(_Binary):
    pass


@dataclass(frozen=True)
class Sub(_Binary):
    pass


@dataclass(frozen=True)
class Mul(_Binary):
    pass


@dataclass(frozen=True)
class Div(_Binary):
    pass


@dataclass(frozen=True)
class Neg(_Unary):
    pass


@dataclass(frozen=True)
class Pow(Expr):
    base: Expr
    exponent: Expr

    @property
    def children(self):
        return (self.base, self.exponent)


@dataclass(frozen=True)
class Exp(_Unary):
    pass


@dataclass(frozen=True)
class Log(_Unary):
    pass


@dataclass(frozen=True)
class Sin(_Unary):
    pass


@dataclass(frozen=True)
class Cos(_Unary):
    pass


@dataclass(frozen=True)
class LogGamma(_Unary):
    pass


@dataclass(frozen=True)
class Digamma(_Unary):
    pass


@dataclass(frozen=True)
class Polygamma(Expr):
    order: int
    arg: Expr

    @property
    def children(self):
        return (self.arg,)


@dataclass(frozen=True)
class QuotientByX(_Unary):
    """phi(x)/x continued by phi'(0) at x = 0; requires phi(0) = 0"""


@dataclass(frozen=True)
class FamilyRef(Expr):
    """Named instance of a parametric family; body is its closed form"""
    name: str
    params: tuple  # ((key, Fraction), ...) in canonical order
    body: Expr

    @property
    def children(self):
        return (self.body,)

    def param(self, key):
        return dict(self.params)[key]


# ---------------------------------------------------------------------------
# Structural helpers
# ---------------------------------------------------------------------------

def const_value(e):
    """Exact rational value of a constant subtree, else None"""
    if isinstance(e, Const):
        return e.value if e.is_rational else None
    if isinstance(e, Neg):
        v = const_value(e.arg)
        return None if v is None else -v
    if isinstance(e, (Add, Sub, Mul, Div)):
        left, right = const_value(e.left), const_value(e.right)
        if left is None or right is None:
            return None
        if isinstance(e, Add):
            return left + right
        if isinstance(e, Sub):
            return left - right
        if isinstance(e, Mul):
            return left * right
        return None if right == 0 else left / right
    return None


def depends_on_x(e):
    if isinstance(e, Var):
        return True
    return any(depends_on_x(c) for c in e.children)


def affine_parts(e):
    """(c, d) with e == c*x + d exactly, or None"""
    if isinstance(e, Var):
        return Fraction(1), Fraction(0)
    value = const_value(e)
    if value is not None:
        return Fraction(0), value
    if isinstance(e, Neg):
        inner = affine_parts(e.arg)
        return None if inner is None else (-inner[0], -inner[1])
    if isinstance(e, (Add, Sub)):
        left, right = affine_parts(e.left), affine_parts(e.right)
        if left is None or right is None:
            return None
        sign = 1 if isinstance(e, Add) else -1
        return left[0] + sign * right[0], left[1] + sign * right[1]
    if isinstance(e, Mul):
        left, right = affine_parts(e.left), affine_parts(e.right)
        if left is None or right is None:
            return None
        if left[0] == 0:
            return left[1] * right[0], left[1] * right[1]
        if right[0] == 0:
            return right[1] * left[0], right[1] * left[1]
        return None
    if isinstance(e, Div):
        left, right = affine_parts(e.left), const_value(e.right)
        if left is None or not right:
            return None
        return left[0] / right, left[1] / right
    return None


def _affine_positive(c, d):
    if c > 0:
        return Interval(-d / c, None)
    if c < 0:
        return Interval(None, -d / c)
    return Interval.everything() if d > 0 else Interval(Fraction(0), Fraction(0))


def positive_region(e):
    """Interval on which e is known to be positive, or None if not determined"""
    parts = affine_parts(e)
    if parts is not None:
        return _affine_positive(*parts)
    if isinstance(e, Exp):
        return Interval.everything()
    if isinstance(e, (Mul, Div)):
        left, right = positive_region(e.left), positive_region(e.right)
        if left is None or right is None:
            return None
        return left.intersect(right)
    if isinstance(e, Add):
        left, right = positive_region(e.left), positive_region(e.right)
        if left is None or right is None:
            return None
        return left.intersect(right)
    if isinstance(e, Pow):
        return positive_region(e.base)
    return None


def validity(e):
    """
    Declared validity interval of e

    Parents intersect their children's intervals with their own constraints.
    Constraints that cannot be resolved exactly are left to evaluation time.
    """
    region = Interval.everything()
    for child in e.children:
        region = region.intersect(validity(child))

    if isinstance(e, (Log, LogGamma, Digamma, Polygamma)):
        positive = positive_region(e.arg)
        if positive is not None:
            region = region.intersect(positive)
    elif isinstance(e, Div) and const_value(e.right) is None:
        positive = positive_region(e.right)
        if positive is not None:
            region = region.intersect(positive)
    elif isinstance(e, Pow):
        exponent = const_value(e.exponent)
        integral = exponent is not None and exponent.denominator == 1
        if not (integral and exponent >= 0):
            positive = positive_region(e.base)
            if positive is not None:
                region = region.intersect(positive)
    return region
