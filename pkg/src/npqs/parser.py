"""Text format for holomorphic test functions.

Grammar::

    expr    := term (('+' | '-') term)*
    term    := unary (('*' | '/') unary)*
    unary   := '-' unary | power
    power   := atom ['^' signed_number]
    atom    := number | imaginary | 'i' | var | call | '(' expr ')'
    var     := 'z' digits                      (1-based, at most n)
    call    := ('log' | 'exp') '(' expr ')' | 'dot' '(' 'z' ',' vector ')'
    vector  := '[' complex (',' complex)* ']'
    complex := ['-'] number [('+' | '-') number 'i'] | ['-'] number 'i'

``^`` binds tighter than unary minus, so ``-z1^2`` is ``-(z1^2)``; a chain
``x^a^b`` folds its exponents right to left. An exponent written without a
decimal point or exponent marker becomes an integer power, anything else a
real (principal-branch) power. ``dot(z, [b1, ..., bn])`` denotes <z, b>, the
bracketed constants being the conjugated side.

A parenthesized complex literal such as ``(2+3i)`` or ``(-1)`` parses to a
single constant, which is the form :func:`pretty_print` emits.
"""

from __future__ import annotations

import enum
import math
import re
from dataclasses import dataclass

from .holo import (
    Add,
    Const,
    Div,
    Exp,
    HoloExpr,
    IntPow,
    LinForm,
    Log,
    Mul,
    RealPow,
    Sub,
    Var,
)

__all__ = [
    "ErrorKind",
    "ParseError",
    "SourceSpan",
    "normalize",
    "parse",
    "pretty_print",
]

MAX_DEPTH = 100


class ErrorKind(enum.Enum):
    UNEXPECTED_TOKEN = "UnexpectedToken"
    UNKNOWN_IDENTIFIER = "UnknownIdentifier"
    ARITY_MISMATCH = "ArityMismatch"
    DIMENSION_EXCEEDED = "DimensionExceeded"
    BAD_NUMBER = "BadNumber"


@dataclass(frozen=True)
class SourceSpan:
    start: int
    end: int

    def __post_init__(self):
        if not 0 <= self.start <= self.end:
            raise ValueError(f"bad span {self.start}..{self.end}")


class ParseError(ValueError):
    def __init__(self, kind: ErrorKind, span: SourceSpan, message: str):
        super().__init__(f"{kind.value} at {span.start}..{span.end}: {message}")
        self.kind = kind
        self.span = span
        self.message = message


# -- lexer --------------------------------------------------------------------

_NUMBER = re.compile(r"(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?", re.ASCII)
_IDENT = re.compile(r"[A-Za-z_][A-Za-z_0-9]*")
_PUNCT = set("+-*/^()[],")
_DIGITS = frozenset("0123456789")
_IDENT_START = frozenset("abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ_")


@dataclass(frozen=True)
class Token:
    kind: str  # "num", "imag", "ident", "punct", "end"
    text: str
    start: int
    end: int
    value: float = 0.0
    is_int: bool = False

    @property
    def span(self) -> SourceSpan:
        return SourceSpan(self.start, self.end)


def _tokenize(text: str) -> list[Token]:
    tokens = []
    i = 0
    while i < len(text):
        c = text[i]
        if c.isspace():
            i += 1
            continue
        if c in _DIGITS or (c == "." and i + 1 < len(text) and text[i + 1] in _DIGITS):
            m = _NUMBER.match(text, i)
            end = m.end()
            # trailing junk glued to a number ("1e", "1.2.3", "3x") is a bad number,
            # except a single 'i' which marks an imaginary literal
            j = end
            while j < len(text) and (text[j].isalnum() or text[j] in "._"):
                j += 1
            lexeme = text[i:j]
            if j == end + 1 and text[end] == "i":
                kind = "imag"
            elif j != end:
                raise ParseError(
                    ErrorKind.BAD_NUMBER, SourceSpan(i, j), f"malformed number {lexeme!r}"
                )
            else:
                kind = "num"
            digits = text[i:end]
            value = float(digits)
            if not math.isfinite(value):
                raise ParseError(
                    ErrorKind.BAD_NUMBER, SourceSpan(i, j), f"number out of range {lexeme!r}"
                )
            is_int = all(ch in _DIGITS for ch in digits)
            tokens.append(Token(kind, lexeme, i, j, value, is_int))
            i = j
            continue
        if c in _IDENT_START:
            m = _IDENT.match(text, i)
            tokens.append(Token("ident", m.group(), i, m.end()))
            i = m.end()
            continue
        if c in _PUNCT:
            tokens.append(Token("punct", c, i, i + 1))
            i += 1
            continue
        raise ParseError(
            ErrorKind.UNEXPECTED_TOKEN, SourceSpan(i, i + 1), f"unexpected character {c!r}"
        )
    tokens.append(Token("end", "", len(text), len(text)))
    return tokens


# -- parser -------------------------------------------------------------------

_VAR = re.compile(r"z([0-9]+)")


class _Parser:
    def __init__(self, text: str, n: int):
        self.text = text
        self.n = n
        self.toks = _tokenize(text)
        self.pos = 0
        self.depth = 0

    # token helpers
    @property
    def tok(self) -> Token:
        return self.toks[self.pos]

    def at(self, text: str) -> bool:
        t = self.tok
        return t.kind in ("punct", "ident") and t.text == text

    def advance(self) -> Token:
        t = self.tok
        if t.kind != "end":
            self.pos += 1
        return t

    def unexpected(self, what: str) -> ParseError:
        t = self.tok
        if t.kind == "end":
            return ParseError(ErrorKind.UNEXPECTED_TOKEN, t.span, f"expected {what}, found end of input")
        return ParseError(ErrorKind.UNEXPECTED_TOKEN, t.span, f"expected {what}, found {t.text!r}")

    def expect(self, text: str) -> Token:
        if not self.at(text):
            raise self.unexpected(repr(text))
        return self.advance()

    def enter(self):
        self.depth += 1
        if self.depth > MAX_DEPTH:
            raise ParseError(ErrorKind.UNEXPECTED_TOKEN, self.tok.span, f"nesting deeper than {MAX_DEPTH} at {self.tok.text!r}")

    # grammar
    def parse(self) -> HoloExpr:
        e = self.expr()
        if self.tok.kind != "end":
            raise self.unexpected("operator or end of input")
        return e

    def expr(self) -> HoloExpr:
        self.enter()
        left = self.term()
        while self.at("+") or self.at("-"):
            op = self.advance().text
            right = self.term()
            left = Add(left, right) if op == "+" else Sub(left, right)
        self.depth -= 1
        return left

    def term(self) -> HoloExpr:
        left = self.unary()
        while self.at("*") or self.at("/"):
            op = self.advance().text
            right = self.unary()
            left = Mul(left, right) if op == "*" else Div(left, right)
        return left

    def unary(self) -> HoloExpr:
        if self.at("-"):
            self.enter()
            self.advance()
            t = self.tok
            if t.kind in ("num", "imag") and not self.toks[self.pos + 1].text == "^":
                self.advance()
                self.depth -= 1
                return Const(-t.value if t.kind == "num" else -1j * t.value)
            operand = self.unary()
            self.depth -= 1
            return Mul(Const(-1), operand)
        return self.power()

    def power(self) -> HoloExpr:
        base = self.atom()
        if not self.at("^"):
            return base
        exps = []
        while self.at("^"):
            self.advance()
            exps.append(self.signed_number())
        value, is_int = exps[-1]
        try:
            for v, i in reversed(exps[:-1]):
                value, is_int = v**value, i and is_int and value >= 0
        except (OverflowError, ZeroDivisionError):
            value = math.nan
        if not isinstance(value, float) or not math.isfinite(value):
            t = self.toks[self.pos - 1]
            raise ParseError(ErrorKind.BAD_NUMBER, t.span, f"exponent chain ending in {t.text!r} is not a finite real")
        if is_int:
            return IntPow(base, int(value))
        return RealPow(base, value)

    def signed_number(self) -> tuple[float, bool]:
        sign = 1.0
        if self.at("-") or self.at("+"):
            sign = -1.0 if self.advance().text == "-" else 1.0
        t = self.tok
        if t.kind != "num":
            raise self.unexpected("exponent number")
        self.advance()
        return sign * t.value, t.is_int

    def atom(self) -> HoloExpr:
        t = self.tok
        if t.kind == "num":
            self.advance()
            return Const(t.value)
        if t.kind == "imag":
            self.advance()
            return Const(1j * t.value)
        if t.kind == "ident":
            return self.identifier()
        if self.at("("):
            lit = self.try_paren_literal()
            if lit is not None:
                return lit
            self.advance()
            e = self.expr()
            self.expect(")")
            return e
        raise self.unexpected("a number, variable, call or '('")

    def try_paren_literal(self) -> Const | None:
        save = self.pos
        self.advance()
        try:
            value = self.complex_literal()
            if self.at(")"):
                self.advance()
                return Const(value)
        except ParseError:
            pass
        self.pos = save
        return None

    def complex_literal(self) -> complex:
        sign = 1.0
        if self.at("-"):
            self.advance()
            sign = -1.0
        t = self.tok
        if t.kind == "imag":
            self.advance()
            return complex(0.0, sign * t.value)
        if t.kind != "num":
            raise self.unexpected("complex constant")
        self.advance()
        re_part = sign * t.value
        if (self.at("+") or self.at("-")) and self.toks[self.pos + 1].kind == "imag":
            s2 = 1.0 if self.advance().text == "+" else -1.0
            return complex(re_part, s2 * self.advance().value)
        return complex(re_part, 0.0)

    def identifier(self) -> HoloExpr:
        t = self.advance()
        name = t.text
        if name == "i":
            return Const(1j)
        m = _VAR.fullmatch(name)
        if m:
            k = int(m.group(1))
            if not 1 <= k <= self.n:
                raise ParseError(
                    ErrorKind.DIMENSION_EXCEEDED,
                    t.span,
                    f"variable {name!r} not available in dimension {self.n}",
                )
            return Var(k)
        if name in ("log", "exp"):
            self.expect("(")
            if self.at(")"):
                raise ParseError(ErrorKind.ARITY_MISMATCH, self.tok.span, f"{name!r} takes one argument, found {self.tok.text!r}")
            self.enter()
            arg = self.expr()
            if self.at(","):
                raise ParseError(ErrorKind.ARITY_MISMATCH, self.tok.span, f"{name!r} takes one argument, found {self.tok.text!r}")
            self.expect(")")
            self.depth -= 1
            return Log(arg) if name == "log" else Exp(arg)
        if name == "dot":
            return self.dot_call(t)
        raise ParseError(ErrorKind.UNKNOWN_IDENTIFIER, t.span, f"unknown identifier {name!r}")

    def dot_call(self, name_tok: Token) -> HoloExpr:
        self.expect("(")
        if not self.at("z"):
            raise self.unexpected("'z' as first argument of 'dot'")
        self.advance()
        self.expect(",")
        open_tok = self.expect("[")
        entries = [self.complex_literal()]
        while self.at(","):
            self.advance()
            entries.append(self.complex_literal())
        close_tok = self.expect("]")
        self.expect(")")
        if len(entries) != self.n:
            raise ParseError(
                ErrorKind.ARITY_MISMATCH,
                SourceSpan(open_tok.start, close_tok.end),
                f"vector {self.text[open_tok.start:close_tok.end]!r} has {len(entries)} entries, dimension is {self.n}",
            )
        return LinForm(tuple(entries))


def parse(text: str, n: int) -> HoloExpr:
    """Parse ``text`` into an expression over C^n."""
    if n < 1:
        raise ValueError("dimension must be at least 1")
    return _Parser(text, n).parse()


# -- printer ------------------------------------------------------------------


def _num(x: float) -> str:
    if x == int(x) and abs(x) < 1e15:
        return str(int(x))
    return repr(x)


def _const(v: complex) -> str:
    re_, im = v.real, v.imag
    if im == 0.0:
        return _num(re_) if re_ >= 0 else f"(-{_num(-re_)})"
    sign = "+" if im >= 0 else "-"
    return f"({_num(re_)}{sign}{_num(abs(im))}i)"


def _entry(v: complex) -> str:
    s = _const(complex(v))
    return s[1:-1] if s.startswith("(") else s


_PREC = {Add: 1, Sub: 1, Mul: 2, Div: 2, IntPow: 4, RealPow: 4}


def _prec(f: HoloExpr) -> int:
    return _PREC.get(type(f), 5)


def _wrap(f: HoloExpr, need: int) -> str:
    s = pretty_print(f)
    return f"({s})" if _prec(f) < need else s


def _exponent(x: float, integer: bool) -> str:
    if integer:
        return str(int(x))
    s = repr(float(x))
    if "." not in s and "e" not in s and "inf" not in s:
        s += ".0"
    return s


def pretty_print(f: HoloExpr) -> str:
    """Render ``f`` in the text format accepted by :func:`parse`."""
    match f:
        case Const(v):
            return _const(v)
        case Var(k):
            return f"z{k}"
        case LinForm(b):
            return "dot(z,[" + ", ".join(_entry(v) for v in b) + "])"
        case Add(l, r):
            return f"{_wrap(l, 1)} + {_wrap(r, 2)}" if isinstance(r, (Add, Sub)) else f"{_wrap(l, 1)} + {_wrap(r, 1)}"
        case Sub(l, r):
            return f"{_wrap(l, 1)} - {_wrap(r, 2)}"
        case Mul(l, r):
            return f"{_wrap(l, 2)}*{_wrap(r, 3)}" if isinstance(r, (Mul, Div)) else f"{_wrap(l, 2)}*{_wrap(r, 2)}"
        case Div(l, r):
            return f"{_wrap(l, 2)}/{_wrap(r, 3)}"
        case IntPow(u, m):
            return f"{_wrap(u, 5)}^{_exponent(m, True)}"
        case RealPow(u, t):
            return f"{_wrap(u, 5)}^{_exponent(t, False)}"
        case Log(u):
            return f"log({pretty_print(u)})"
        case Exp(u):
            return f"exp({pretty_print(u)})"
    raise TypeError(f"not an expression: {f!r}")


def normalize(f: HoloExpr):
    """Canonical form modulo associativity of ``+`` and ``*``.

    Sums and products are flattened into tuples; used to compare parse trees
    whose only difference is grouping.
    """
    match f:
        case Add():
            return ("+", tuple(normalize(t) for t in _flatten(f, Add)))
        case Mul():
            return ("*", tuple(normalize(t) for t in _flatten(f, Mul)))
        case Sub(l, r):
            return ("-", normalize(l), normalize(r))
        case Div(l, r):
            return ("/", normalize(l), normalize(r))
        case IntPow(u, m):
            return ("^", normalize(u), m)
        case RealPow(u, t):
            return ("^.", normalize(u), t)
        case Log(u):
            return ("log", normalize(u))
        case Exp(u):
            return ("exp", normalize(u))
    return f


def _flatten(f: HoloExpr, cls) -> list:
    if isinstance(f, cls):
        return _flatten(f.left, cls) + _flatten(f.right, cls)
    return [f]
