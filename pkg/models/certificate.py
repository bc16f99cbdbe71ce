# models/certificate.py
from dataclasses import dataclass

CM = 'CM'
AM = 'AM'
LCM = 'LCM'
BERN = 'BERN'
POS = 'POS'
# working classes used inside derivations
DCM = 'DCM'      # -f' is CM
IBERN = 'IBERN'  # f' is CM, no sign condition on f

KINDS = (CM, AM, LCM, BERN, POS, DCM, IBERN)
REPORTED = (LCM, CM, AM, BERN)  # strongest first

LABELS = {
    CM: 'CM',
    AM: 'AM',
    LCM: 'LCM',
    BERN: 'Bernstein',
    POS: 'positive',
    DCM: "-f' CM",
    IBERN: "f' CM",
}


@dataclass(frozen=True)
class MonotoneClass:
    kind: str
    interval: object

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"Unknown monotonicity class: {self.kind}")

    def __str__(self):
        return f"{LABELS[self.kind]} on {self.interval}"


@dataclass(frozen=True)
class Certificate:
    """
    Derivation tree of a monotonicity fact

    Leaves are axiom facts; inner nodes apply a closure rule to their
    premises. An LCM conclusion carries the CM certificate it implies.
    """
    conclusion: MonotoneClass
    rule: str
    citation: str
    subject: str
    premises: tuple = ()
    strict: bool = True
    implied: object = None

    certified = True

    @property
    def is_axiom(self):
        return not self.premises

    def extend_to_cm(self):
        """CM certificate for an LCM conclusion"""
        if self.conclusion.kind == CM:
            return self
        if self.conclusion.kind != LCM:
            raise ValueError(f"{self.conclusion.kind} does not imply CM")
        if self.implied is not None:
            return self.implied
        return Certificate(MonotoneClass(CM, self.conclusion.interval), 'lcm-implies-cm', "Corollary 7",
                           self.subject, (self,), self.strict)

    def walk(self):
        yield self
        for premise in self.premises:
            yield from premise.walk()

    def to_dict(self):
        out = {
            'class': self.conclusion.kind,
            'interval': str(self.conclusion.interval),
            'subject': self.subject,
            'rule': self.rule,
            'citation': self.citation,
            'strict': self.strict,
            'premises': [p.to_dict() for p in self.premises],
        }
        if self.conclusion.kind == LCM:
            implied = self.extend_to_cm()
            out['implies_cm'] = {'rule': implied.rule, 'citation': implied.citation}
        return out


@dataclass(frozen=True)
class NoRuleApplies:
    """The calculus found no derivation; this is not a claim of non-monotonicity"""
    subject: str
    interval: object
    reason: str

    certified = False

    def to_dict(self):
        return {'class': None, 'subject': self.subject, 'interval': str(self.interval), 'reason': self.reason}
