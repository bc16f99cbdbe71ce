# models/family.py
"""
Parametric function families and classification verdicts

Parameters are exact rationals so that classifier thresholds such as -d/c and
b - a never drift.
"""
from dataclasses import dataclass, field, fields
from fractions import Fraction

from models.expr import as_fraction

CM = 'CM'
LCM = 'LCM'
NOT = 'NOT'
UNKNOWN = 'UNKNOWN'
STATUSES = (CM, LCM, NOT, UNKNOWN)


@dataclass(frozen=True)
class ClassVerdict:
    """Outcome of a closed-form classifier"""
    status: str
    condition_id: str
    citation: str
    reason: str = ''
    thresholds: dict = field(default_factory=dict)
    strict: bool = True

    def __post_init__(self):
        if self.status not in STATUSES:
            raise ValueError(f"Unknown verdict status: {self.status}")

    @property
    def is_monotone(self):
        return self.status in (CM, LCM)

    def to_dict(self):
        return {
            'status': self.status,
            'condition_id': self.condition_id,
            'citation': self.citation,
            'reason': self.reason,
            'thresholds': {key: str(value) for key, value in self.thresholds.items()},
            'strict': self.strict,
        }


@dataclass(frozen=True)
class Family:
    """Base for family parameter records; NAME is the registry and grammar name"""
    NAME = ''

    def __post_init__(self):
        for item in fields(self):
            object.__setattr__(self, item.name, as_fraction(getattr(self, item.name)))

    @classmethod
    def parameter_names(cls):
        return tuple(item.name for item in fields(cls))

    @classmethod
    def from_params(cls, params):
        names = cls.parameter_names()
        unknown = sorted(set(params) - set(names))
        missing = [name for name in names if name not in params]
        if unknown or missing:
            raise KeyError(f"{cls.NAME} takes parameters {', '.join(names)}"
                           f"{'; unknown ' + ', '.join(unknown) if unknown else ''}"
                           f"{'; missing ' + ', '.join(missing) if missing else ''}")
        return cls(**{name: params[name] for name in names})

    @property
    def params(self):
        return tuple((name, getattr(self, name)) for name in self.parameter_names())

    def __str__(self):
        args = ' '.join(f"{key}={value}" for key, value in self.params)
        return f"{self.NAME} {args}"


@dataclass(frozen=True)
class LinFracLog(Family):
    """log((a x + b)/(c x + d))"""
    NAME = 'linfraclog'
    a: Fraction
    b: Fraction
    c: Fraction
    d: Fraction

    def __post_init__(self):
        super().__post_init__()
        if self.a == 0 and self.b == 0:
            raise ValueError("a and b cannot both be zero")
        if self.c == 0 and self.d == 0:
            raise ValueError("c and d cannot both be zero")


@dataclass(frozen=True)
class PsiGap(Family):
    """(x+a)^alpha [psi(x+b) - psi(x+a) - beta/(x+a)] on x > max(-a, -b)"""
    NAME = 'psigap'
    a: Fraction
    b: Fraction
    alpha: Fraction
    beta: Fraction

    def __post_init__(self):
        super().__post_init__()
        if self.a < 0 or self.b < 0:
            raise ValueError("psigap needs a >= 0 and b >= 0")


@dataclass(frozen=True)
class GammaRatioPower(Family):
    """(x+a)^beta Gamma(x+a)/Gamma(x+b)"""
    NAME = 'gammaratiopower'
    a: Fraction
    b: Fraction
    beta: Fraction

    def __post_init__(self):
        super().__post_init__()
        if self.a < 0 or self.b <= 0:
            raise ValueError("gammaratiopower needs a >= 0 and b > 0")

    @property
    def in_regime(self):
        return 0 < 1 - self.b + self.a < 1


@dataclass(frozen=True)
class GammaLogRatio(Family):
    """log(Gamma(a x + b)/Gamma(c x + d))"""
    NAME = 'gammalogratio'
    a: Fraction
    b: Fraction
    c: Fraction
    d: Fraction


@dataclass(frozen=True)
class ReciprocalPower(Family):
    """(a + b/x)^mu with a, b, mu >= 0"""
    NAME = 'recippower'
    a: Fraction
    b: Fraction
    mu: Fraction

    def __post_init__(self):
        super().__post_init__()
        if min(self.a, self.b, self.mu) < 0:
            raise ValueError("recippower needs a, b, mu >= 0")


@dataclass(frozen=True)
class VogtGap(Family):
    """1 + log Gamma(x+1)/x - log(x+beta) with 0 <= beta <= 1"""
    NAME = 'vogt'
    beta: Fraction

    def __post_init__(self):
        super().__post_init__()
        if not 0 <= self.beta <= 1:
            raise ValueError(f"vogt needs 0 <= beta <= 1, got {self.beta}")


FAMILY_TYPES = {cls.NAME: cls for cls in (LinFracLog, PsiGap, GammaRatioPower, GammaLogRatio,
                                          ReciprocalPower, VogtGap)}
