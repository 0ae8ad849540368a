"""Expression kernel: immutable trees, exact canonicalization, parsing."""

from .core import (
    Add,
    Const,
    Cos,
    DEFAULT_RULES,
    Expr,
    Mul,
    Pow,
    RuleSet,
    Sin,
    Sym,
    as_expr,
    canonicalize,
    const_value,
    current_rules,
    eval_numeric,
    is_zero,
    substitute,
    term_count,
    use_rules,
)
from .equality import Verdict, equals_canonical, numeric_agreement
from .indexpoly import IndexPoly, constant_poly, split_index_poly
from .parser import parse, parse_expr, parse_index_poly, parse_tree
from .printer import to_text
from .symbols import SymbolInfo, SymbolTable

__all__ = [
    "Add", "Const", "Cos", "DEFAULT_RULES", "Expr", "IndexPoly", "Mul", "Pow", "RuleSet", "Sin", "Sym",
    "SymbolInfo", "SymbolTable", "Verdict", "as_expr", "canonicalize", "const_value", "constant_poly",
    "current_rules", "equals_canonical", "eval_numeric", "is_zero", "numeric_agreement", "parse",
    "parse_expr", "parse_index_poly", "parse_tree", "split_index_poly", "substitute", "term_count",
    "to_text", "use_rules",
]
