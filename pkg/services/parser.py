# services/parser.py
"""
Expression language: tokenizer, recursive-descent parser and printer

The grammar is documented in docs/grammar.md. parse() returns the AST and the
optional `on (a, b)` interval; to_text() prints an AST so that parsing it back
gives a structurally equal tree.
"""
import codecs
import json
import logging
import re
from dataclasses import dataclass
from fractions import Fraction

from models.expr import (Add, Const, Cos, Digamma, Div, Exp, FamilyRef, Interval, Log, LogGamma,
                         Mul, Neg, Polygamma, Pow, QuotientByX, Sin, Sub, Var, as_fraction, const_value)
from utils.errors import ParseError, PreconditionError

logger = logging.getLogger(__name__)

ENCODING = 'utf-8'

TOKEN_SPEC = [
    ('NUMBER', r'\d+(?:\.\d*)?(?:[eE][+-]?\d+)?|\.\d+(?:[eE][+-]?\d+)?'),
    ('IDENT', r'[A-Za-z_][A-Za-z_0-9]*'),
    ('OP', r'[-+*/^(),=]'),
    ('SKIP', r'\s+'),
    ('MISMATCH', r'.'),
]
TOKEN_RE = re.compile('|'.join(f'(?P<{name}>{pattern})' for name, pattern in TOKEN_SPEC))
POLYGAMMA_RE = re.compile(r'psi(\d+)$')

UNARY_FUNCTIONS = {
    'exp': Exp,
    'log': Log,
    'sin': Sin,
    'cos': Cos,
    'loggamma': LogGamma,
    'lgamma': LogGamma,
    'psi': Digamma,
    'digamma': Digamma,
    'divx': QuotientByX,
}


@dataclass(frozen=True)
class Token:
    kind: str
    text: str
    start: int

    @property
    def end(self):
        return self.start + len(self.text)

    @property
    def is_integer(self):
        return self.kind == 'NUMBER' and re.fullmatch(r'\d+', self.text) is not None


def tokenize(text):
    tokens = []
    for match in TOKEN_RE.finditer(text):
        kind = match.lastgroup
        if kind == 'SKIP':
            continue
        if kind == 'MISMATCH':
            raise ParseError(f"unexpected character {match.group()!r}", match.start(), text)
        tokens.append(Token(kind, match.group(), match.start()))
    tokens.append(Token('EOF', '', len(text)))
    return tokens


class Parser:
    """Recursive-descent parser over the token stream of one input string"""

    def __init__(self, text):
        self.text = text
        self.tokens = tokenize(text)
        self.pos = 0

    # -- token helpers -------------------------------------------------------

    @property
    def current(self):
        return self.tokens[self.pos]

    def peek(self, offset=1):
        index = min(self.pos + offset, len(self.tokens) - 1)
        return self.tokens[index]

    def advance(self):
        token = self.current
        if token.kind != 'EOF':
            self.pos += 1
        return token

    def at(self, text):
        return self.current.kind in ('OP', 'IDENT') and self.current.text == text

    def expect(self, text):
        if not self.at(text):
            self.error(f"expected {text!r}")
        return self.advance()

    def error(self, message, token=None):
        token = token or self.current
        found = 'end of input' if token.kind == 'EOF' else repr(token.text)
        raise ParseError(f"{message}, found {found}", token.start, self.text)

    # -- grammar -------------------------------------------------------------

    def parse_input(self):
        e = self.parse_expr()
        interval = None
        if self.at('on'):
            self.advance()
            interval = self.parse_interval()
        if self.current.kind != 'EOF':
            self.error("unexpected trailing input")
        return e, interval

    def parse_expr(self):
        start = self.current.start
        left = self.parse_term()
        while self.at('+') or self.at('-'):
            node = Add if self.advance().text == '+' else Sub
            right = self.parse_term()
            left = node(left, right, span=(start, self.current.start))
        return left

    def parse_term(self):
        start = self.current.start
        left, literal = self.parse_unary()
        while True:
            if self.at('*'):
                self.advance()
                right, _ = self.parse_unary()
                left, literal = Mul(left, right, span=(start, self.current.start)), False
            elif self.at('/'):
                self.advance()
                if literal and self.current.is_integer and not self.peek().text == '^':
                    # 1/3 is a rational literal, not a division node
                    denominator = Fraction(self.advance().text)
                    if denominator == 0:
                        self.error("division by zero in a rational literal", self.tokens[self.pos - 1])
                    left = Const(left.value / denominator, span=(start, self.current.start))
                    continue
                right, _ = self.parse_unary()
                left, literal = Div(left, right, span=(start, self.current.start)), False
            elif literal and (self.current.kind == 'IDENT' and not self.at('on') or self.at('(')):
                # implicit multiplication after a number: 2x, 3(x+1)
                right, _ = self.parse_unary()
                left, literal = Mul(left, right, span=(start, self.current.start)), False
            else:
                return left

    def parse_unary(self):
        """Returns (node, is_numeric_literal)"""
        token = self.current
        if self.at('-'):
            self.advance()
            if self.current.kind == 'NUMBER' and not self.peek().text == '^':
                number = self.advance()
                return Const(-Fraction(number.text), span=(token.start, number.end)), True
            arg, _ = self.parse_unary()
            return Neg(arg, span=(token.start, self.current.start)), False
        if self.at('+'):
            self.advance()
            return self.parse_unary()
        return self.parse_power()

    def parse_power(self):
        start = self.current.start
        base, literal = self.parse_primary()
        if not self.at('^'):
            return base, literal
        self.advance()
        exponent, _ = self.parse_unary()
        value = const_value(exponent)
        if value is not None and not isinstance(exponent, Const):
            exponent = Const(value, span=exponent.span)
        return Pow(base, exponent, span=(start, self.current.start)), False

    def parse_primary(self):
        token = self.current
        if token.kind == 'NUMBER':
            self.advance()
            return Const(Fraction(token.text), span=(token.start, token.end)), True
        if self.at('('):
            self.advance()
            inner = self.parse_expr()
            self.expect(')')
            return inner, False
        if token.kind == 'IDENT':
            if token.text == 'x':
                self.advance()
                return Var(span=(token.start, token.end)), False
            if self.peek().text == '(':
                return self.parse_call(), False
            self.error(f"unknown identifier {token.text!r}")
        self.error("expected an expression")

    def parse_call(self):
        name_token = self.advance()
        name = name_token.text
        self.expect('(')
        start = name_token.start

        if name == 'polygamma':
            order = self.parse_order()
            self.expect(',')
            arg = self.parse_expr()
            self.expect(')')
            return _polygamma(order, arg, (start, self.tokens[self.pos - 1].end))

        match = POLYGAMMA_RE.match(name)
        if match or name in UNARY_FUNCTIONS or name in ('sqrt', 'gamma'):
            arg = self.parse_expr()
            end_token = self.expect(')')
            span = (start, end_token.end)
            if match:
                return _polygamma(int(match.group(1)), arg, span)
            if name == 'sqrt':
                return Pow(arg, Const(Fraction(1, 2)), span=span)
            if name == 'gamma':
                return Exp(LogGamma(arg, span=span), span=span)
            return UNARY_FUNCTIONS[name](arg, span=span)

        from services.families import FAMILY_NAMES, build_family
        if name in FAMILY_NAMES:
            params = self.parse_keyword_args()
            self.expect(')')
            try:
                return build_family(name, params)
            except (ValueError, KeyError, PreconditionError) as err:
                raise ParseError(f"bad parameters for {name}: {err}", start, self.text)
        self.error(f"unknown identifier {name!r}", name_token)

    def parse_order(self):
        token = self.current
        if not token.is_integer:
            self.error("expected a nonnegative integer order")
        self.advance()
        return int(token.text)

    def parse_signed_number(self):
        negative = False
        if self.at('-') or self.at('+'):
            negative = self.advance().text == '-'
        token = self.current
        if token.kind != 'NUMBER':
            self.error("expected a number")
        self.advance()
        value = Fraction(token.text)
        if self.at('/') and self.peek().is_integer:
            self.advance()
            denominator = Fraction(self.advance().text)
            if denominator == 0:
                self.error("division by zero in a rational literal", self.tokens[self.pos - 1])
            value /= denominator
        return -value if negative else value

    def parse_keyword_args(self):
        params = {}
        while not self.at(')'):
            key = self.current
            if key.kind != 'IDENT':
                self.error("expected a parameter name")
            self.advance()
            self.expect('=')
            params[key.text] = self.parse_signed_number()
            if not self.at(','):
                break
            self.advance()
        return params

    def parse_bound(self):
        """Returns (infinity marker or None, Fraction or None)"""
        signed = self.at('-') or self.at('+')
        if self.at('inf') or signed and self.peek().text == 'inf':
            negative = signed and self.advance().text == '-'
            self.advance()
            return ('-inf' if negative else 'inf'), None
        if not (self.current.kind == 'NUMBER' or signed and self.peek().kind == 'NUMBER'):
            self.error("malformed interval bound")
        return None, self.parse_signed_number()

    def parse_interval(self):
        open_token = self.current
        if not self.at('('):
            self.error("malformed interval: expected '('")
        self.advance()
        lo_inf, lo = self.parse_bound()
        if not self.at(','):
            self.error("malformed interval: expected ','")
        self.advance()
        hi_inf, hi = self.parse_bound()
        if not self.at(')'):
            self.error("malformed interval: expected ')'")
        self.advance()
        if lo_inf == 'inf' or hi_inf == '-inf':
            raise ParseError("malformed interval: infinite bound on the wrong side", open_token.start, self.text)
        interval = Interval(lo, hi)
        if interval.is_empty:
            raise ParseError("malformed interval: empty", open_token.start, self.text)
        return interval


def _polygamma(order, arg, span):
    if order == 0:
        return Digamma(arg, span=span)
    return Polygamma(order, arg, span=span)


def parse(text):
    """
    Parse `expr [on (lo, hi)]`

    Args:
        text (str): Source text

    Returns:
        tuple: (Expr, Interval or None)

    Raises:
        ParseError: with the character position of the problem
    """
    return Parser(text).parse_input()


def parse_expr(text):
    """Parse an expression with no interval suffix"""
    parser = Parser(text)
    e = parser.parse_expr()
    if parser.current.kind != 'EOF':
        parser.error("unexpected trailing input")
    return e


def parse_interval(text):
    parser = Parser(text)
    interval = parser.parse_interval()
    if parser.current.kind != 'EOF':
        parser.error("unexpected trailing input")
    return interval


def parse_family_spec(text):
    """
    Parse a family spec string such as "gammalogratio a=2 b=0 c=1 d=0"

    Returns:
        tuple: (name, dict of Fraction parameters)
    """
    parts = text.split()
    if not parts:
        raise ParseError("empty family spec", 0, text)
    name, params = parts[0], {}
    offset = len(parts[0])
    for part in parts[1:]:
        offset = text.index(part, offset)
        key, sep, raw = part.partition('=')
        if not sep or not key or not raw:
            raise ParseError(f"expected key=value, found {part!r}", offset, text)
        try:
            params[key] = as_fraction(raw)
        except (ValueError, ZeroDivisionError):
            raise ParseError(f"bad number {raw!r} for {key}", offset + len(key) + 1, text)
        offset += len(part)
    return name, params


# ---------------------------------------------------------------------------
# Printer
# ---------------------------------------------------------------------------

PREC_SUM, PREC_PRODUCT, PREC_UNARY, PREC_POWER, PREC_ATOM = 1, 2, 3, 4, 5


def format_number(value):
    """Terminating decimal when exact, else a parenthesized p/q"""
    q = as_fraction(value)
    den = q.denominator
    twos = fives = 0
    while den % 2 == 0:
        den //= 2
        twos += 1
    while den % 5 == 0:
        den //= 5
        fives += 1
    if den != 1:
        return f"({q.numerator}/{q.denominator})"
    digits = max(twos, fives)
    scaled = abs(q.numerator) * (10 ** digits) // q.denominator
    sign = '-' if q < 0 else ''
    if digits == 0:
        return f"{sign}{scaled}"
    whole, frac = divmod(scaled, 10 ** digits)
    return f"{sign}{whole}.{str(frac).rjust(digits, '0').rstrip('0')}"


def _wrap(text, prec, minimum):
    return f"({text})" if prec < minimum else text


def _render(e):
    """Returns (text, precedence)"""
    if isinstance(e, Var):
        return 'x', PREC_ATOM
    if isinstance(e, Const):
        text = format_number(e.value)
        return text, PREC_UNARY if text.startswith('-') else PREC_ATOM
    if isinstance(e, (Add, Sub)):
        op = '+' if isinstance(e, Add) else '-'
        left, lp = _render(e.left)
        right, rp = _render(e.right)
        return f"{_wrap(left, lp, PREC_SUM)} {op} {_wrap(right, rp, PREC_SUM + 1)}", PREC_SUM
    if isinstance(e, (Mul, Div)):
        op = '*' if isinstance(e, Mul) else '/'
        left, lp = _render(e.left)
        right, rp = _render(e.right)
        # keep c/d from folding into a rational literal when reparsed
        if isinstance(e, Div) and isinstance(e.left, Const) and isinstance(e.right, Const):
            right, rp = f"({right})", PREC_ATOM
        return f"{_wrap(left, lp, PREC_PRODUCT)} {op} {_wrap(right, rp, PREC_PRODUCT + 1)}", PREC_PRODUCT
    if isinstance(e, Neg):
        arg, ap = _render(e.arg)
        if ap < PREC_UNARY or arg[0].isdigit():
            arg = f"({arg})"
        return f"-{arg}", PREC_UNARY
    if isinstance(e, Pow):
        base, bp = _render(e.base)
        exponent, ep = _render(e.exponent)
        return f"{_wrap(base, bp, PREC_ATOM)}^{_wrap(exponent, ep, PREC_POWER)}", PREC_POWER
    if isinstance(e, Polygamma):
        return f"psi{e.order}({to_text(e.arg)})", PREC_ATOM
    if isinstance(e, FamilyRef):
        args = ', '.join(f"{key}={format_number(value).strip('()')}" for key, value in e.params)
        return f"{e.name}({args})", PREC_ATOM
    for name, node in PRINT_NAMES.items():
        if type(e) is node:
            return f"{name}({to_text(e.arg)})", PREC_ATOM
    raise TypeError(f"Unknown expression node: {type(e).__name__}")


PRINT_NAMES = {
    'exp': Exp,
    'log': Log,
    'sin': Sin,
    'cos': Cos,
    'loggamma': LogGamma,
    'psi': Digamma,
    'divx': QuotientByX,
}


def to_text(e):
    """Print e with explicit operators; parse(to_text(e)) equals e"""
    return _render(e)[0]


# ---------------------------------------------------------------------------
# Family parameter files
# ---------------------------------------------------------------------------

class FamilyFileParser:
    """Parses a JSON file of family instances: a list of records or one record"""

    REQUIRED_FIELDS = ('family', 'params')

    def __init__(self, file_path):
        self.file_path = file_path

    def parse(self, start_index=0):
        """
        Parse the file and return validated records

        Args:
            start_index (int): Index of the first record to keep

        Returns:
            list: dicts with 'family' (str), 'params' (dict of Fraction) and
                  'interval' (Interval or None)
        """
        records = []
        error_count = 0

        try:
            with open(self.file_path, 'rb') as f:
                first_bytes = f.read(4)

            if first_bytes.startswith(codecs.BOM_UTF8):
                encoding = 'utf-8-sig'
            elif first_bytes.startswith(codecs.BOM_UTF16_LE) or first_bytes.startswith(codecs.BOM_UTF16_BE):
                encoding = 'utf-16'
            else:
                encoding = ENCODING

            with open(self.file_path, 'r', encoding=encoding) as file:
                try:
                    data = json.load(file)
                except json.JSONDecodeError as e:
                    raise ParseError(f"invalid JSON: {e.msg}", e.pos)

            if isinstance(data, dict):
                data = [data]
            if not isinstance(data, list):
                raise ParseError("expected a JSON object or list of objects", 0)

            for index, raw in enumerate(data):
                if index < start_index:
                    continue
                record = self._create_record(raw, index)
                if record is None:
                    error_count += 1
                    continue
                records.append(record)

            logger.info(f"Parsed {len(records)} family records with {error_count} rejected")
            return records

        except Exception as e:
            logger.error(f"Error parsing family file {self.file_path}: {e}")
            raise

    def _validate_record(self, raw, index):
        if not isinstance(raw, dict):
            logger.warning(f"Record {index}: expected an object, got {type(raw).__name__}")
            return False
        missing = [name for name in self.REQUIRED_FIELDS if name not in raw]
        if missing:
            logger.warning(f"Record {index}: missing fields {missing}")
            return False
        if not isinstance(raw['params'], dict):
            logger.warning(f"Record {index}: params must be an object")
            return False
        return True

    def _create_record(self, raw, index):
        if not self._validate_record(raw, index):
            return None
        try:
            params = {key: as_fraction(value) for key, value in raw['params'].items()}
            interval = raw.get('interval')
            if interval is not None:
                interval = parse_interval(interval) if isinstance(interval, str) else Interval.of(*interval)
        except (ValueError, TypeError, ZeroDivisionError) as e:
            logger.warning(f"Record {index}: {e}")
            return None
        return {'family': str(raw['family']), 'params': params, 'interval': interval}
