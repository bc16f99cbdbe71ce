# services/certifier.py
"""
Rule-based monotonicity calculus

Facts are derived bottom-up over the AST on a fixed open interval. Each node
gets a table {class: Certificate}; the first derivation of a class wins and
tables are memoized per call by (node, interval). The calculus is sound but
not complete: NoRuleApplies says nothing about the function itself.
"""
import logging
from dataclasses import replace
from fractions import Fraction

import mpmath

from models.certificate import (AM, BERN, CM, DCM, IBERN, LCM, POS, REPORTED, Certificate,
                                MonotoneClass, NoRuleApplies)
from models.expr import (Add, Const, Cos, Digamma, Div, Exp, FamilyRef, Log, LogGamma, Mul, Neg,
                         Polygamma, Pow, Sin, Sub, Var, affine_parts, const_value, positive_region,
                         validity)
from models.family import CM as VERDICT_CM, LCM as VERDICT_LCM, LinFracLog, PsiGap
from services.families import (classify_family, classify_linfrac, classify_psi_gap, family_interval,
                               family_of)
from services.parser import to_text
from utils.errors import CmonoError, DomainError, UnsupportedPrimitiveError

logger = logging.getLogger(__name__)

UNSUPPORTED = (Sin, Cos)


def _constant(e):
    """Value of a constant subtree (Fraction or mpf), else None"""
    value = const_value(e)
    if value is not None:
        return value
    if isinstance(e, Const):
        return e.value
    if isinstance(e, Pow) and _constant(e.exponent) == 0:
        return Fraction(1)
    return None


def _is_positive_integer(c):
    if isinstance(c, Fraction):
        return c.denominator == 1 and c > 0
    return c > 0 and mpmath.isint(c)


def _reciprocal_affine(e):
    """(a, b) with e == a + b/x, else None"""
    def reciprocal(term):
        if isinstance(term, Div) and isinstance(term.right, Var):
            return const_value(term.left)
        return None

    b = reciprocal(e)
    if b is not None:
        return Fraction(0), b
    if isinstance(e, Add):
        for left, right in ((e.left, e.right), (e.right, e.left)):
            a, b = const_value(left), reciprocal(right)
            if a is not None and b is not None:
                return a, b
    return None


def _is_root_power(g):
    """x^alpha with 0 < alpha <= 1, possibly times a positive constant"""
    if isinstance(g, Mul):
        c = const_value(g.left)
        if c is not None and c > 0:
            return _is_root_power(g.right)
        return False
    if isinstance(g, Pow) and isinstance(g.base, Var):
        c = const_value(g.exponent)
        return c is not None and 0 < c <= 1
    return False


class Derivation:
    """Fact tables for the subexpressions of one certify call"""

    def __init__(self, interval):
        self.interval = interval
        self.memo = {}

    # -- helpers -------------------------------------------------------------

    def make(self, kind, rule, citation, e, premises=(), strict=None):
        if strict is None:
            strict = any(p.strict for p in premises) if premises else True
        return Certificate(MonotoneClass(kind, self.interval), rule, citation, to_text(e),
                           tuple(premises), strict)

    def facts(self, e):
        key = (e, self.interval)
        if key not in self.memo:
            self.memo[key] = self._close(e, self._derive(e))
            logger.debug(f"{to_text(e)}: {', '.join(sorted(self.memo[key])) or 'no facts'}")
        return self.memo[key]

    def _left_at_least(self, bound):
        lo = self.interval.lo
        return lo is not None and lo >= bound

    def _positive(self, e):
        region = positive_region(e)
        if region is not None and self.interval.within(region):
            return True
        return isinstance(e, Exp) or LCM in self.facts(e)

    def _affine_argument_ok(self, arg):
        """arg = cx + d with c > 0 and arg >= 0 on the interval"""
        parts = affine_parts(arg)
        if parts is None or parts[0] <= 0 or self.interval.lo is None:
            return False
        return parts[0] * self.interval.lo + parts[1] >= 0

    def _close(self, e, facts):
        if LCM in facts and CM not in facts:
            facts[CM] = facts[LCM].extend_to_cm()
        if CM in facts and DCM not in facts:
            facts[DCM] = self.make(DCM, 'cm-derivative', "derivative of a CM function", e, (facts[CM],))
        if BERN in facts and IBERN not in facts:
            facts[IBERN] = self.make(IBERN, 'bernstein-derivative', "definition of Bernstein", e, (facts[BERN],))
        for kind in (LCM, CM, AM, BERN):
            if kind in facts and POS not in facts:
                facts[POS] = self.make(POS, 'nonnegative', f"definition of {kind}", e, (facts[kind],))
        return facts

    # -- dispatch ------------------------------------------------------------

    def _derive(self, e):
        value = _constant(e)
        if value is not None:
            return self._constant_facts(e, value)
        if isinstance(e, FamilyRef):
            facts = self._family(e)
            return facts if facts else dict(self.facts(e.body))
        parts = affine_parts(e)
        if parts is not None:
            return self._affine(e, *parts)
        if isinstance(e, Add):
            return self._combine(e, self.facts(e.left), self.facts(e.right))
        if isinstance(e, Sub):
            return self._difference(e)
        if isinstance(e, Neg):
            return self._negation(e)
        if isinstance(e, Mul):
            return self._product(e, e.left, e.right)
        if isinstance(e, Div):
            return self._quotient(e)
        if isinstance(e, Pow):
            return self._power(e)
        if isinstance(e, Exp):
            return self._exponential(e)
        if isinstance(e, Log):
            return self._logarithm(e)
        if isinstance(e, Digamma):
            return self._digamma(e)
        if isinstance(e, Polygamma):
            return self._polygamma(e)
        return {}

    # -- leaves --------------------------------------------------------------

    def _constant_facts(self, e, c):
        facts = {
            DCM: self.make(DCM, 'constant', "constant function", e, strict=False),
            IBERN: self.make(IBERN, 'constant', "constant function", e, strict=False),
        }
        if c >= 0:
            for kind in (CM, AM, BERN, POS):
                facts[kind] = self.make(kind, 'constant', "constant function", e, strict=False)
        if c > 0:
            facts[LCM] = self.make(LCM, 'constant', "constant function", e, strict=False)
        return facts

    def _affine(self, e, c, d):
        facts = {}
        lo, hi = self.interval.lo, self.interval.hi
        if c > 0:
            facts[IBERN] = self.make(IBERN, 'affine', "increasing affine function", e, strict=False)
            if lo is not None and c * lo + d >= 0:
                facts[BERN] = self.make(BERN, 'affine', "nonnegative increasing affine function", e, strict=False)
                facts[AM] = self.make(AM, 'affine', "nonnegative increasing affine function", e, strict=False)
        else:
            facts[DCM] = self.make(DCM, 'affine', "decreasing affine function", e, strict=False)
            if hi is not None and c * hi + d >= 0:
                facts[CM] = self.make(CM, 'affine', "nonnegative decreasing affine function", e, strict=False)
        return facts

    def _family(self, e):
        try:
            p = family_of(e)
            if not self.interval.within(family_interval(p)):
                return {}
            verdict = classify_family(p, self.interval)
        except (CmonoError, ValueError) as err:
            logger.debug(f"family {e.name} gives no fact: {err}")
            return {}
        if verdict.status == VERDICT_CM:
            return {CM: self.make(CM, 'family-fact', verdict.citation, e, strict=verdict.strict)}
        if verdict.status == VERDICT_LCM:
            return {LCM: self.make(LCM, 'family-fact', verdict.citation, e, strict=verdict.strict)}
        return {}

    # -- sums ----------------------------------------------------------------

    def _combine(self, e, left, right):
        facts = {}
        for kind in (CM, AM, BERN, DCM, IBERN, POS):
            if kind in left and kind in right:
                facts[kind] = self.make(kind, 'linear-combination', "nonnegative linear combination", e,
                                        (left[kind], right[kind]))
        return facts

    def _difference(self, e):
        if e.left == e.right:
            citation = "Theorem 16" if isinstance(e.left, LogGamma) else "identically zero"
            return {kind: self.make(kind, 'zero-function', citation, e, strict=False)
                    for kind in (CM, AM, BERN, DCM, IBERN, POS)}
        facts = self._combine(e, self.facts(e.left), self.facts(Neg(e.right)))
        if isinstance(e.left, Digamma) and isinstance(e.right, Digamma) and CM not in facts:
            gap = self._psi_difference(e)
            if gap is not None:
                facts[CM] = gap
        return facts

    def _psi_difference(self, e):
        upper, lower = affine_parts(e.left.arg), affine_parts(e.right.arg)
        if upper is None or lower is None or upper[0] != 1 or lower[0] != 1:
            return None
        b, a = upper[1], lower[1]
        if a < 0 or b < 0 or not self._left_at_least(max(-a, -b)):
            return None
        verdict = classify_psi_gap(PsiGap(a, b, 0, 0))
        if verdict.status != VERDICT_CM:
            return None
        return self.make(CM, 'psi-difference', verdict.citation, e, strict=verdict.strict)

    def _negation(self, e):
        u = e.arg
        facts = {}
        if isinstance(u, Polygamma) and u.order % 2 == 0 and self._affine_argument_ok(u.arg):
            facts[CM] = self.make(CM, 'polygamma-axiom', "-psi^(m) is CM for even m", e)
        inner = self.facts(u)
        source = inner.get(BERN) or inner.get(IBERN)
        if source is not None:
            facts[DCM] = self.make(DCM, 'negation', "negated Bernstein-type function", e, (source,))
        if DCM in inner:
            facts[IBERN] = self.make(IBERN, 'negation', "negated function with -f' CM", e, (inner[DCM],))
        return facts

    # -- products ------------------------------------------------------------

    def _scaled(self, e, c, u):
        if c == 0:
            return self._constant_facts(e, 0)
        if c < 0:
            u = Neg(u)
        inner = self.facts(u)
        kinds = (CM, AM, BERN, DCM, IBERN, LCM, POS)
        return {kind: self.make(kind, 'scaling', "positive multiple", e, (inner[kind],))
                for kind in kinds if kind in inner}

    def _product(self, e, left, right):
        c = _constant(left)
        if c is not None:
            return self._scaled(e, c, right)
        c = _constant(right)
        if c is not None:
            return self._scaled(e, c, left)
        fl, fr = self.facts(left), self.facts(right)
        facts = {}
        if CM in fl and CM in fr:
            facts[CM] = self.make(CM, 'product', "Theorem 3", e, (fl[CM], fr[CM]))
        if AM in fl and AM in fr:
            facts[AM] = self.make(AM, 'product-am', "Leibniz rule", e, (fl[AM], fr[AM]))
        if LCM in fl and LCM in fr:
            facts[LCM] = self.make(LCM, 'product-lcm', "log(fg) = log f + log g", e, (fl[LCM], fr[LCM]))
        if POS in fl and POS in fr:
            facts[POS] = self.make(POS, 'product', "product of nonnegative functions", e, (fl[POS], fr[POS]))
        return facts

    def _quotient(self, e):
        c = _constant(e.right)
        if c is not None and c != 0:
            return self._scaled(e, 1 / c, e.left)
        return self._product(e, e.left, Pow(e.right, Const(Fraction(-1))))

    # -- powers, exp, log ----------------------------------------------------

    def _power(self, e):
        base = e.base
        c = _constant(e.exponent)
        if c is None:
            return self._variable_power(e)

        facts = {}
        on_positive_axis = self._left_at_least(0)
        if isinstance(base, Var) and on_positive_axis:
            if c < 0:
                facts[CM] = self.make(CM, 'power-axiom', "x^(-mu) is CM on (0, inf)", e)
                facts[LCM] = self.make(LCM, 'power-axiom', "x^(-mu) is LCM on (0, inf)", e)
                return facts
            if c <= 1:
                facts[BERN] = self.make(BERN, 'power-bernstein', "x^alpha is Bernstein for 0 < alpha <= 1 "
                                        "(Corollary 6)", e, strict=c < 1)
        reciprocal = _reciprocal_affine(base)
        if reciprocal is not None and c >= 0 and min(reciprocal) >= 0 and on_positive_axis:
            facts[CM] = self.make(CM, 'reciprocal-power-axiom', "Lemma 13", e, strict=min(reciprocal[1], c) > 0)

        inner = self.facts(base)
        if c < 0 and BERN in inner and self._positive(base):
            facts.setdefault(CM, self.make(CM, 'composition-bernstein', "Theorem 5 with t^c CM", e, (inner[BERN],)))
            facts.setdefault(LCM, self.make(LCM, 'bernstein-power-lcm', "Theorem 3, Theorem 5: -(log f)' = |c| g'/g",
                                            e, (inner[BERN],)))
        if c > 0 and LCM in inner:
            facts.setdefault(LCM, self.make(LCM, 'lcm-power', "positive power of an LCM function", e, (inner[LCM],)))
        if _is_positive_integer(c):
            if CM in inner:
                facts.setdefault(CM, self.make(CM, 'product', "Theorem 3", e, (inner[CM],)))
            if AM in inner:
                facts.setdefault(AM, self.make(AM, 'product-am', "Leibniz rule", e, (inner[AM],)))
        if 0 < c <= 1 and BERN in inner:
            facts.setdefault(BERN, self.make(BERN, 'bernstein-composition',
                                             "t^alpha Bernstein composed with a Bernstein function", e, (inner[BERN],)))
        return facts

    def _variable_power(self, e):
        log_base = self.facts(Log(e.base))
        exponent = self.facts(e.exponent)
        if CM in log_base and CM in exponent:
            return {LCM: self.make(LCM, 'power-lcm', "Corollary 4", e, (log_base[CM], exponent[CM]))}
        return {}

    def _exponential(self, e):
        u = e.arg
        inner = self.facts(u)
        facts = {POS: self.make(POS, 'exp-positive', "exp is positive", e)}
        if isinstance(u, Neg):
            g = self.facts(u.arg)
            if BERN in g:
                citation = "Theorem 5 (Corollary 6)" if _is_root_power(u.arg) else "Theorem 5"
                facts[CM] = self.make(CM, 'composition-bernstein', citation, e, (g[BERN],))
        if DCM in inner:
            facts.setdefault(CM, self.make(CM, 'composition-absolute', "Theorem 9 with exp AM", e, (inner[DCM],)))
            facts[LCM] = self.make(LCM, 'exp-lcm', "definition of LCM: -(log f)' is CM", e, (inner[DCM],))
        if AM in inner:
            facts[AM] = self.make(AM, 'composition-am', "exp of an AM function", e, (inner[AM],))
        return facts

    def _logarithm(self, e):
        u = e.arg
        facts = {}
        numerator, denominator = (u.left, u.right) if isinstance(u, Div) else (u, Const(Fraction(1)))
        top, bottom = affine_parts(numerator), affine_parts(denominator)
        if top is not None and bottom is not None:
            try:
                verdict = classify_linfrac(LinFracLog(*top, *bottom), self.interval)
            except ValueError:
                verdict = None
            if verdict is not None and verdict.status == VERDICT_CM:
                facts[CM] = self.make(CM, 'linear-fraction-log', verdict.citation, e, strict=verdict.strict)
            if bottom == (0, 1) and top[0] > 0 and self._affine_argument_ok(numerator):
                facts[IBERN] = self.make(IBERN, 'log-affine', "log of an increasing affine function", e)
                if top[0] * self.interval.lo + top[1] >= 1:
                    facts[BERN] = self.make(BERN, 'log-affine', "log of an affine function >= 1", e)
        inner = self.facts(u)
        if LCM in inner:
            facts[DCM] = self.make(DCM, 'log-of-lcm', "definition of LCM", e, (inner[LCM],))
        return facts

    # -- digamma family ------------------------------------------------------

    def _digamma(self, e):
        if self._affine_argument_ok(e.arg):
            return {IBERN: self.make(IBERN, 'digamma-axiom', "psi' is CM (Theorem 5 for an affine argument)", e)}
        return {}

    def _polygamma(self, e):
        if not self._affine_argument_ok(e.arg):
            return {}
        if e.order % 2 == 1:
            return {CM: self.make(CM, 'polygamma-axiom', "psi^(m) is CM for odd m", e)}
        return {IBERN: self.make(IBERN, 'polygamma-axiom', "psi^(m+1) is CM for even m", e)}


def _check_supported(e):
    if isinstance(e, UNSUPPORTED):
        raise UnsupportedPrimitiveError(f"{type(e).__name__.lower()} is outside the certifier's axiom base")
    if isinstance(e, FamilyRef):
        return
    for child in e.children:
        _check_supported(child)


def certify(e, interval=None):
    """
    Derive the strongest class of e on interval, in the order LCM, CM, AM, Bernstein

    An LCM certificate carries the CM certificate it implies: a direct CM
    derivation when one exists, otherwise the LCM-implies-CM step.

    Args:
        e (Expr): Expression
        interval (Interval, optional): Defaults to the validity interval of e

    Returns:
        Certificate or NoRuleApplies
    """
    _check_supported(e)
    region = validity(e)
    interval = interval or region
    if interval.is_empty:
        raise DomainError(f"empty interval {interval}", to_text(e))
    if not interval.within(region):
        raise DomainError(f"interval {interval} lies outside the validity interval {region}", to_text(e))

    derivation = Derivation(interval)
    facts = derivation.facts(e)
    for kind in REPORTED:
        if kind not in facts:
            continue
        certificate = facts[kind]
        if kind == LCM:
            direct = facts[CM] if facts[CM].rule != 'lcm-implies-cm' else None
            certificate = replace(certificate, implied=direct)
        logger.info(f"Certified {kind} for {certificate.subject} on {interval} by {certificate.rule}")
        return certificate

    logger.info(f"No rule applies to {to_text(e)} on {interval}")
    return NoRuleApplies(to_text(e), interval, "no rule derives LCM, CM, AM or Bernstein")


def _render(certificate, depth, lines, prefix=''):
    lines.append(f"{'  ' * depth}{prefix}{certificate.conclusion}: {certificate.subject}"
                 f"  [{certificate.rule}; {certificate.citation}]")
    for premise in certificate.premises:
        _render(premise, depth + 1, lines)


def print_certificate(certificate):
    """Line-oriented derivation text; one line per fact, premises indented"""
    if isinstance(certificate, NoRuleApplies):
        return f"no rule applies: {certificate.subject} on {certificate.interval} ({certificate.reason})"
    lines = []
    _render(certificate, 0, lines)
    lines[0] += ' (strict)' if certificate.strict else ' (non-strict)'
    if certificate.conclusion.kind == LCM:
        implied = certificate.extend_to_cm()
        if implied.rule == 'lcm-implies-cm':
            lines.append(f"=> {implied.conclusion}: {implied.subject}  [{implied.rule}; {implied.citation}]")
        else:
            _render(implied, 0, lines, prefix='=> ')
    return '\n'.join(lines)
