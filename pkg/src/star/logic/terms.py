"""Term representation, unification, and substitutions.

Terms form the syntax trees of the logic language: variables, constants,
integers, compound terms, and lists. Bindings are kept in plain dicts keyed
by variable name during search; the public ``Substitution`` type is the
normalized (fully resolved, idempotent) form handed back to callers.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator, Mapping, Union


@dataclass(frozen=True, slots=True)
class Variable:
    name: str


@dataclass(frozen=True, slots=True)
class Constant:
    symbol: str


@dataclass(frozen=True, slots=True)
class Integer:
    value: int


@dataclass(frozen=True, slots=True)
class Compound:
    functor: str
    args: tuple["Term", ...]

    def __post_init__(self) -> None:
        if not self.args:
            raise ValueError("zero-arity compounds must be Constants")


@dataclass(frozen=True, slots=True)
class ListTerm:
    elements: tuple["Term", ...] = ()


Term = Union[Variable, Constant, Integer, Compound, ListTerm]

#: Infix rendering for the arithmetic functors used inside constraints.
ARITH_FUNCTORS = ("+", "-")


def term_text(t: Term) -> str:
    """Render a term in source syntax (arithmetic compounds print infix)."""
    if isinstance(t, Variable):
        return t.name
    if isinstance(t, Constant):
        return t.symbol
    if isinstance(t, Integer):
        return str(t.value)
    if isinstance(t, ListTerm):
        return "[" + ",".join(term_text(e) for e in t.elements) + "]"
    if t.functor in ARITH_FUNCTORS and len(t.args) == 2:
        return f"{term_text(t.args[0])}{t.functor}{term_text(t.args[1])}"
    return t.functor + "(" + ",".join(term_text(a) for a in t.args) + ")"


def walk(t: Term, bindings: Mapping[str, Term]) -> Term:
    """Chase variable links until a non-variable or unbound variable."""
    while isinstance(t, Variable):
        nxt = bindings.get(t.name)
        if nxt is None:
            return t
        t = nxt
    return t


def resolve(t: Term, bindings: Mapping[str, Term]) -> Term:
    """Apply bindings throughout a term, following chains transitively."""
    t = walk(t, bindings)
    if isinstance(t, Compound):
        return Compound(t.functor, tuple(resolve(a, bindings) for a in t.args))
    if isinstance(t, ListTerm):
        return ListTerm(tuple(resolve(e, bindings) for e in t.elements))
    return t


def free_variables(t: Term) -> Iterator[Variable]:
    """Yield the variables of a term in first-appearance order (with repeats)."""
    if isinstance(t, Variable):
        yield t
    elif isinstance(t, Compound):
        for a in t.args:
            yield from free_variables(a)
    elif isinstance(t, ListTerm):
        for e in t.elements:
            yield from free_variables(e)


def is_ground(t: Term, bindings: Mapping[str, Term] | None = None) -> bool:
    if bindings:
        t = walk(t, bindings)
    if isinstance(t, Variable):
        return False
    if isinstance(t, Compound):
        return all(is_ground(a, bindings) for a in t.args)
    if isinstance(t, ListTerm):
        return all(is_ground(e, bindings) for e in t.elements)
    return True


def rename_term(t: Term, mapping: Mapping[str, Variable]) -> Term:
    if isinstance(t, Variable):
        return mapping.get(t.name, t)
    if isinstance(t, Compound):
        return Compound(t.functor, tuple(rename_term(a, mapping) for a in t.args))
    if isinstance(t, ListTerm):
        return ListTerm(tuple(rename_term(e, mapping) for e in t.elements))
    return t


def occurs_in(name: str, t: Term, bindings: Mapping[str, Term]) -> bool:
    """Occurs check: does the variable ``name`` occur in ``t`` under bindings?"""
    t = walk(t, bindings)
    if isinstance(t, Variable):
        return t.name == name
    if isinstance(t, Compound):
        return any(occurs_in(name, a, bindings) for a in t.args)
    if isinstance(t, ListTerm):
        return any(occurs_in(name, e, bindings) for e in t.elements)
    return False


def unify_raw(a: Term, b: Term, bindings: dict[str, Term]) -> dict[str, Term] | None:
    """Unify two terms under a binding dict; None on failure.

    The input dict is never mutated; successful extensions return a copy.
    The occurs check is always on.
    """
    a = walk(a, bindings)
    b = walk(b, bindings)
    if isinstance(a, Variable):
        if isinstance(b, Variable) and b.name == a.name:
            return bindings
        if occurs_in(a.name, b, bindings):
            return None
        out = dict(bindings)
        out[a.name] = b
        return out
    if isinstance(b, Variable):
        if occurs_in(b.name, a, bindings):
            return None
        out = dict(bindings)
        out[b.name] = a
        return out
    if isinstance(a, Constant) and isinstance(b, Constant):
        return bindings if a.symbol == b.symbol else None
    if isinstance(a, Integer) and isinstance(b, Integer):
        return bindings if a.value == b.value else None
    if isinstance(a, Compound) and isinstance(b, Compound):
        if a.functor != b.functor or len(a.args) != len(b.args):
            return None
        current: dict[str, Term] | None = bindings
        for x, y in zip(a.args, b.args):
            current = unify_raw(x, y, current)
            if current is None:
                return None
        return current
    if isinstance(a, ListTerm) and isinstance(b, ListTerm):
        if len(a.elements) != len(b.elements):
            return None
        current = bindings
        for x, y in zip(a.elements, b.elements):
            current = unify_raw(x, y, current)
            if current is None:
                return None
        return current
    return None


@dataclass(frozen=True)
class Substitution:
    """An idempotent variable binding map.

    Every range term is fully resolved, so applying a substitution to its
    own range changes nothing.
    """

    bindings: dict[str, Term] = field(default_factory=dict)

    @classmethod
    def from_raw(cls, raw: Mapping[str, Term]) -> "Substitution":
        resolved = {name: resolve(t, raw) for name, t in raw.items()}
        return cls(resolved)

    def apply(self, t: Term) -> Term:
        return resolve(t, self.bindings)

    def get(self, name: str) -> Term | None:
        return self.bindings.get(name)

    def __contains__(self, name: str) -> bool:
        return name in self.bindings

    def __len__(self) -> int:
        return len(self.bindings)

    def __repr__(self) -> str:
        inner = ", ".join(
            f"{name} -> {term_text(t)}" for name, t in sorted(self.bindings.items())
        )
        return "{" + inner + "}"


EMPTY_SUBSTITUTION = Substitution()


def unify(t1: Term, t2: Term, s: Substitution | None = None) -> Substitution | None:
    """Most general unifier of two terms, extending ``s``; None on failure."""
    base = dict(s.bindings) if s else {}
    raw = unify_raw(t1, t2, base)
    if raw is None:
        return None
    return Substitution.from_raw(raw)
