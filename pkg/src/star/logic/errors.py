"""Errors raised by the logic language loader and interpreter."""

from __future__ import annotations


class LogicError(Exception):
    """Base class for every logic-language error."""


class ParseError(LogicError):
    """Malformed program or query text."""

    def __init__(self, message: str, line: int, column: int) -> None:
        super().__init__(f"{message} (line {line}, column {column})")
        self.line = line
        self.column = column


class RangeRestrictionError(LogicError):
    """A rule uses a variable that no positive body literal or constraint can bind."""

    def __init__(self, message: str, rule_text: str) -> None:
        super().__init__(f"{message} in rule: {rule_text}")
        self.rule_text = rule_text


class StratificationError(LogicError):
    """The predicate dependency graph has a cycle through negation."""

    def __init__(self, predicates: tuple[str, ...]) -> None:
        super().__init__(
            "negation cycle through predicates: " + ", ".join(predicates)
        )
        self.predicates = predicates


class FlounderError(LogicError):
    """A constraint or negated call cannot be evaluated with its current bindings."""


class DepthLimitError(LogicError):
    """Proof search exceeded the configured depth limit (not a failure)."""
