"""Tokenizer and precedence-climbing parser for the ASCII expression grammar.

Grammar::

    expr   := term (('+' | '-') term)*
    term   := unary (('*' | '/') unary)*
    unary  := ('-' | '+') unary | power
    power  := atom ('^' exponent)?
    atom   := INTEGER | IDENT | ('sin' | 'cos') '(' expr ')' | '(' expr ')'

``^`` binds tighter than unary minus, so ``-x^2`` is ``-(x^2)``.  Exponents
must fold to integer constants.  ``a/b`` is ``a*(b)^(-1)``.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from ..errors import ExprSyntaxError, UnknownSymbol
from .core import Add, Const, Cos, Expr, Mul, Pow, Sin, Sym, canonicalize, const_value
from .indexpoly import IndexPoly, split_index_poly
from .symbols import SymbolTable

_TOKEN = re.compile(r"\s*(?:(\d+\.\d*|\.\d+|\d+[eE][+-]?\d+)|(\d+)|([A-Za-z_][A-Za-z0-9_]*)|(\S))")


@dataclass
class _Tok:
    kind: str  # int | ident | op | float | end
    text: str
    pos: int


def tokenize(text: str) -> list[_Tok]:
    toks = []
    pos = 0
    n = len(text)
    while pos < n:
        m = _TOKEN.match(text, pos)
        if m is None:
            break
        start = m.start(m.lastindex)
        if m.group(1):
            toks.append(_Tok("float", m.group(1), start))
        elif m.group(2):
            toks.append(_Tok("int", m.group(2), start))
        elif m.group(3):
            toks.append(_Tok("ident", m.group(3), start))
        else:
            ch = m.group(4)
            if ch not in "+-*/^()":
                raise ExprSyntaxError(f"unexpected character {ch!r}", start, "operator or operand")
            toks.append(_Tok("op", ch, start))
        pos = m.end()
    toks.append(_Tok("end", "", len(text)))
    return toks


class _Parser:
    def __init__(self, text: str, symbols: SymbolTable | None, field: str = ""):
        self.text = text
        self.toks = tokenize(text)
        self.i = 0
        self.symbols = symbols
        self.field = field

    def peek(self) -> _Tok:
        return self.toks[self.i]

    def take(self) -> _Tok:
        tok = self.toks[self.i]
        self.i += 1
        return tok

    def fail(self, message: str, expected: str) -> ExprSyntaxError:
        return ExprSyntaxError(message, self.peek().pos, expected, self.field)

    def expect(self, text: str) -> None:
        tok = self.peek()
        if tok.kind != "op" or tok.text != text:
            got = tok.text or "end of input"
            raise self.fail(f"expected {text!r}, got {got!r}", text)
        self.take()

    def parse(self) -> Expr:
        if self.peek().kind == "end":
            raise self.fail("empty expression", "operand")
        node = self.expr()
        if self.peek().kind != "end":
            raise self.fail(f"unexpected token {self.peek().text!r}", "operator or end of input")
        return node

    def expr(self) -> Expr:
        terms = [self.term()]
        while self.peek().kind == "op" and self.peek().text in "+-":
            op = self.take().text
            t = self.term()
            terms.append(t if op == "+" else Mul([Const(-1), t]))
        return terms[0] if len(terms) == 1 else Add(terms)

    def term(self) -> Expr:
        factors = [self.unary()]
        while self.peek().kind == "op" and self.peek().text in "*/":
            op = self.take().text
            f = self.unary()
            factors.append(f if op == "*" else Pow(f, -1))
        return factors[0] if len(factors) == 1 else Mul(factors)

    def unary(self) -> Expr:
        tok = self.peek()
        if tok.kind == "op" and tok.text == "-":
            self.take()
            return Mul([Const(-1), self.unary()])
        if tok.kind == "op" and tok.text == "+":
            self.take()
            return self.unary()
        return self.power()

    def power(self) -> Expr:
        base = self.atom()
        if self.peek().kind == "op" and self.peek().text == "^":
            self.take()
            pos = self.peek().pos
            exp_node = self.unary()
            value = const_value(canonicalize(exp_node)) if not exp_node.free_symbols else None
            if value is None or value.denominator != 1:
                raise ExprSyntaxError("exponent must be an integer constant", pos, "integer", self.field)
            base = Pow(base, int(value))
            if self.peek().kind == "op" and self.peek().text == "^":
                raise self.fail("chained '^' is ambiguous; add parentheses", "operator")
        return base

    def atom(self) -> Expr:
        tok = self.peek()
        if tok.kind == "int":
            self.take()
            return Const(int(tok.text))
        if tok.kind == "float":
            raise self.fail("floating-point literals are not allowed; use a/b", "integer")
        if tok.kind == "ident":
            self.take()
            if tok.text in ("sin", "cos"):
                self.expect("(")
                arg = self.expr()
                self.expect(")")
                return Sin(arg) if tok.text == "sin" else Cos(arg)
            if self.peek().kind == "op" and self.peek().text == "(":
                raise ExprSyntaxError(f"unknown function {tok.text!r}", tok.pos, "sin or cos", self.field)
            if self.symbols is not None and tok.text not in self.symbols:
                raise UnknownSymbol(tok.text, field=self.field)
            return Sym(tok.text)
        if tok.kind == "op" and tok.text == "(":
            self.take()
            node = self.expr()
            self.expect(")")
            return node
        got = tok.text or "end of input"
        raise self.fail(f"unexpected {got!r}", "operand")


def parse_tree(text: str, symbols: SymbolTable | None = None, field: str = "") -> Expr:
    """Parse into a raw (non-canonical) tree."""
    return _Parser(text, symbols, field).parse()


def parse(text: str, symbols: SymbolTable | None = None, field: str = "") -> Expr | IndexPoly:
    """Parse and canonicalize.

    Returns an :class:`IndexPoly` when the text mentions index symbols,
    otherwise an :class:`Expr`.
    """
    tree = parse_tree(text, symbols, field)
    expr = canonicalize(tree)
    if symbols is None:
        return expr
    present = [n for n in symbols.indices if n in expr.free_symbols]
    if not present:
        return expr
    return split_index_poly(expr, present)


def parse_expr(text: str, symbols: SymbolTable | None = None, field: str = "") -> Expr:
    result = parse(text, symbols, field)
    if isinstance(result, IndexPoly):
        raise ExprSyntaxError("index symbols are not allowed here", -1, "index-free expression", field)
    return result


def parse_index_poly(text: str, symbols: SymbolTable, indices, field: str = "") -> IndexPoly:
    """Parse as a polynomial in ``indices`` (a constant text gives degree 0)."""
    expr = canonicalize(parse_tree(text, symbols, field))
    return split_index_poly(expr, list(indices))
