"""
Parser for the field expression language

Grammar (lowest to highest precedence):

    expr   := term (('+' | '-') term)*
    term   := unary (('*' | '/') unary)*
    unary  := ('+' | '-') unary | power
    power  := atom (('^' | '**') unary)?        right associative
    atom   := number | 'x' | 'y' | 'pi' | call | '(' expr ')'
    call   := name '(' expr (',' expr)* ')'

Functions: sin, cos, exp, log, sqrt (one argument) and pow (two arguments).
Expressions become sympy trees over the symbols X and Y so that fields can be
differentiated exactly.
"""

import re
import logging

import sympy

from exceptions import ParseError

logger = logging.getLogger(__name__)

X, Y = sympy.symbols("x y", real=True)

_TOKEN_REGEXP = re.compile(
    r"\s*(?:(?P<number>(?:\d+\.\d*|\.\d+|\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>\*\*|[-+*/^(),]))"
)

_FUNCTIONS = {
    "sin": (1, sympy.sin),
    "cos": (1, sympy.cos),
    "exp": (1, sympy.exp),
    "log": (1, sympy.log),
    "sqrt": (1, sympy.sqrt),
    "pow": (2, sympy.Pow),
}

_CONSTANTS = {"x": X, "y": Y, "pi": sympy.pi}


def _tokenize(text):
    tokens = []
    pos = 0
    while pos < len(text):
        if text[pos:].strip() == "":
            break
        match = _TOKEN_REGEXP.match(text, pos)
        if match is None or match.end() == pos:
            bad = pos + (len(text[pos:]) - len(text[pos:].lstrip()))
            raise ParseError(f"unexpected character {text[bad]!r}", position=bad)
        kind = match.lastgroup
        start = match.start(kind)
        tokens.append((kind, match.group(kind), start))
        pos = match.end()
    tokens.append(("end", "", len(text)))
    return tokens


class _Parser:
    def __init__(self, text):
        self.text = text
        self.tokens = _tokenize(text)
        self.index = 0

    @property
    def current(self):
        return self.tokens[self.index]

    def _advance(self):
        token = self.tokens[self.index]
        self.index += 1
        return token

    def _expect(self, value):
        kind, text, position = self.current
        if text != value or kind != "op":
            found = "end of input" if kind == "end" else repr(text)
            raise ParseError(f"expected {value!r}, found {found}", position=position)
        return self._advance()

    def parse(self):
        if self.current[0] == "end":
            raise ParseError("empty expression", position=0)
        result = self._expr()
        kind, text, position = self.current
        if kind != "end":
            raise ParseError(f"unexpected token {text!r}", position=position)
        return result

    def _expr(self):
        result = self._term()
        while self.current[1] in ("+", "-") and self.current[0] == "op":
            op = self._advance()[1]
            right = self._term()
            result = result + right if op == "+" else result - right
        return result

    def _term(self):
        result = self._unary()
        while self.current[1] in ("*", "/") and self.current[0] == "op":
            op = self._advance()[1]
            right = self._unary()
            result = result * right if op == "*" else result / right
        return result

    def _unary(self):
        if self.current[0] == "op" and self.current[1] in ("+", "-"):
            op = self._advance()[1]
            operand = self._unary()
            return operand if op == "+" else -operand
        return self._power()

    def _power(self):
        base = self._atom()
        if self.current[0] == "op" and self.current[1] in ("^", "**"):
            self._advance()
            exponent = self._unary()
            return sympy.Pow(base, exponent)
        return base

    def _atom(self):
        kind, text, position = self.current
        if kind == "number":
            self._advance()
            return sympy.Rational(text)
        if kind == "name":
            self._advance()
            if self.current[1] == "(" and self.current[0] == "op":
                return self._call(text, position)
            if text in _CONSTANTS:
                return _CONSTANTS[text]
            if text in _FUNCTIONS:
                raise ParseError(f"function {text!r} needs arguments", position=position)
            raise ParseError(f"unknown name {text!r}", position=position)
        if kind == "op" and text == "(":
            self._advance()
            inner = self._expr()
            self._expect(")")
            return inner
        found = "end of input" if kind == "end" else repr(text)
        raise ParseError(f"unexpected {found}", position=position)

    def _call(self, name, position):
        if name not in _FUNCTIONS:
            raise ParseError(f"unknown function {name!r}", position=position)
        arity, function = _FUNCTIONS[name]
        self._expect("(")
        args = [self._expr()]
        while self.current[0] == "op" and self.current[1] == ",":
            self._advance()
            args.append(self._expr())
        self._expect(")")
        if len(args) != arity:
            raise ParseError(
                f"{name} takes {arity} argument(s), got {len(args)}", position=position
            )
        return function(*args)


def parse_expression(text):
    """Parse an expression string into a sympy expression over x and y"""
    if not isinstance(text, str):
        text = str(text)
    expression = _Parser(text).parse()
    logger.debug(f"Parsed {text!r} -> {expression}")
    return expression
