"""Logic language core: terms, parser, interpreter, justifications."""

from .engine import SolveOptions, check_consistency, eval_constraint, solve
from .errors import (
    DepthLimitError,
    FlounderError,
    LogicError,
    ParseError,
    RangeRestrictionError,
    StratificationError,
)
from .justify import JustificationNode, render_justification
from .parser import parse_ground_atom, parse_program, parse_query
from .program import (
    FALSE,
    BodyItem,
    Constraint,
    Literal,
    Program,
    Rule,
    predicate_key,
)
from .terms import (
    Compound,
    Constant,
    Integer,
    ListTerm,
    Substitution,
    Term,
    Variable,
    term_text,
    unify,
)

__all__ = [
    "BodyItem",
    "Compound",
    "Constant",
    "Constraint",
    "DepthLimitError",
    "FALSE",
    "FlounderError",
    "Integer",
    "JustificationNode",
    "ListTerm",
    "Literal",
    "LogicError",
    "ParseError",
    "Program",
    "RangeRestrictionError",
    "Rule",
    "SolveOptions",
    "StratificationError",
    "Substitution",
    "Term",
    "Variable",
    "check_consistency",
    "eval_constraint",
    "parse_ground_atom",
    "parse_program",
    "parse_query",
    "predicate_key",
    "render_justification",
    "solve",
    "term_text",
    "unify",
]
