"""Rules, programs, and load-time validation.

A program is a sequence of rules over literals and arithmetic constraints.
Two properties are checked when a program is loaded:

* range restriction — variables in rule heads, negated literals, and
  constraints must be bindable from positive body literals (constraints of
  the ``#=`` kind may bind one further variable each). Head variables whose
  names start with ``_`` are exempt: they mark slots intentionally left to
  be bound by the caller's query.
* stratification — the predicate dependency graph may not contain a cycle
  that passes through negation.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Union

from .errors import RangeRestrictionError, StratificationError
from .terms import (
    Compound,
    Constant,
    Term,
    free_variables,
    is_ground,
    rename_term,
    term_text,
)

#: The reserved head symbol of integrity constraints.
FALSE = Constant("false")

CONSTRAINT_RELATIONS = ("#=", "#<", "#>", "#=<", "#>=", "#\\=")

#: Relation inversion used when a constraint literal is negated in source.
INVERTED_RELATION = {
    "#=": "#\\=",
    "#\\=": "#=",
    "#<": "#>=",
    "#>=": "#<",
    "#>": "#=<",
    "#=<": "#>",
}


@dataclass(frozen=True, slots=True)
class Literal:
    atom: Term
    negated: bool = False

    def text(self) -> str:
        prefix = "not " if self.negated else ""
        return prefix + term_text(self.atom)


@dataclass(frozen=True, slots=True)
class Constraint:
    lhs: Term
    rel: str
    rhs: Term

    def __post_init__(self) -> None:
        if self.rel not in CONSTRAINT_RELATIONS:
            raise ValueError(f"unknown constraint relation {self.rel!r}")

    def inverted(self) -> "Constraint":
        return Constraint(self.lhs, INVERTED_RELATION[self.rel], self.rhs)

    def text(self) -> str:
        return f"{term_text(self.lhs)} {self.rel} {term_text(self.rhs)}"


BodyItem = Union[Literal, Constraint]


@dataclass(frozen=True, slots=True)
class Rule:
    """head :- body. A ``None`` head designates an integrity constraint."""

    head: Term | None
    body: tuple[BodyItem, ...] = ()
    rule_id: str = ""

    @property
    def is_fact(self) -> bool:
        return self.head is not None and not self.body

    @property
    def is_integrity(self) -> bool:
        return self.head is None

    def text(self) -> str:
        head_text = "false" if self.head is None else term_text(self.head)
        if not self.body:
            return head_text + "."
        return head_text + " :- " + ", ".join(item.text() for item in self.body) + "."


def predicate_key(atom: Term) -> tuple[str, int]:
    if isinstance(atom, Compound):
        return (atom.functor, len(atom.args))
    if isinstance(atom, Constant):
        return (atom.symbol, 0)
    raise ValueError(f"not a predicate atom: {term_text(atom)}")


def rule_variable_names(rule: Rule) -> tuple[str, ...]:
    """Distinct variable names of a rule, in first-appearance order."""
    names: dict[str, None] = {}
    if rule.head is not None:
        for v in free_variables(rule.head):
            names.setdefault(v.name, None)
    for item in rule.body:
        if isinstance(item, Literal):
            for v in free_variables(item.atom):
                names.setdefault(v.name, None)
        else:
            for v in free_variables(item.lhs):
                names.setdefault(v.name, None)
            for v in free_variables(item.rhs):
                names.setdefault(v.name, None)
    return tuple(names)


def rename_rule(rule: Rule, suffix: str, names: tuple[str, ...] | None = None) -> Rule:
    """Return a copy of the rule with every variable renamed apart."""
    if names is None:
        names = rule_variable_names(rule)
    if not names:
        return rule
    from .terms import Variable

    mapping = {name: Variable(f"{name}#{suffix}") for name in names}
    head = None if rule.head is None else rename_term(rule.head, mapping)
    body = []
    for item in rule.body:
        if isinstance(item, Literal):
            body.append(Literal(rename_term(item.atom, mapping), item.negated))
        else:
            body.append(
                Constraint(
                    rename_term(item.lhs, mapping),
                    item.rel,
                    rename_term(item.rhs, mapping),
                )
            )
    return Rule(head, tuple(body), rule.rule_id)


def _check_range_restriction(rule: Rule) -> None:
    safe = {
        v.name
        for item in rule.body
        if isinstance(item, Literal) and not item.negated
        for v in free_variables(item.atom)
    }
    # #= constraints may each bind one remaining variable; iterate to fixpoint.
    equalities = [item for item in rule.body if isinstance(item, Constraint) and item.rel == "#="]
    changed = True
    while changed:
        changed = False
        for con in equalities:
            names = {v.name for v in free_variables(con.lhs)}
            names |= {v.name for v in free_variables(con.rhs)}
            unbound = names - safe
            if len(unbound) == 1:
                safe |= unbound
                changed = True

    def fail(message: str) -> None:
        raise RangeRestrictionError(message, rule.text())

    if rule.head is not None:
        for v in free_variables(rule.head):
            if v.name not in safe and not v.name.startswith("_"):
                fail(f"head variable {v.name} is not range-restricted")
    for item in rule.body:
        if isinstance(item, Literal) and item.negated:
            for v in free_variables(item.atom):
                if v.name not in safe:
                    fail(f"variable {v.name} in negated literal is not range-restricted")
        elif isinstance(item, Constraint):
            for side in (item.lhs, item.rhs):
                for v in free_variables(side):
                    if v.name not in safe:
                        fail(f"constraint variable {v.name} is not range-restricted")


def _check_stratified(rules: Iterable[Rule]) -> None:
    edges: dict[str, set[tuple[str, bool]]] = {}
    for rule in rules:
        head_key = "false/0" if rule.head is None else "%s/%d" % predicate_key(rule.head)
        edges.setdefault(head_key, set())
        for item in rule.body:
            if isinstance(item, Literal):
                dep = "%s/%d" % predicate_key(item.atom)
                edges.setdefault(dep, set())
                edges[head_key].add((dep, item.negated))

    # Tarjan SCC; a negative edge inside one component is a violation.
    index: dict[str, int] = {}
    low: dict[str, int] = {}
    on_stack: set[str] = set()
    stack: list[str] = []
    component: dict[str, int] = {}
    counter = [0]
    comp_counter = [0]

    def visit(node: str) -> None:
        work = [(node, iter(sorted(edges[node])))]
        index[node] = low[node] = counter[0]
        counter[0] += 1
        stack.append(node)
        on_stack.add(node)
        while work:
            current, it = work[-1]
            advanced = False
            for dep, _neg in it:
                if dep not in index:
                    index[dep] = low[dep] = counter[0]
                    counter[0] += 1
                    stack.append(dep)
                    on_stack.add(dep)
                    work.append((dep, iter(sorted(edges[dep]))))
                    advanced = True
                    break
                if dep in on_stack:
                    low[current] = min(low[current], index[dep])
            if advanced:
                continue
            work.pop()
            if work:
                parent = work[-1][0]
                low[parent] = min(low[parent], low[current])
            if low[current] == index[current]:
                while True:
                    member = stack.pop()
                    on_stack.discard(member)
                    component[member] = comp_counter[0]
                    if member == current:
                        break
                comp_counter[0] += 1

    for node in sorted(edges):
        if node not in index:
            visit(node)

    for src, deps in edges.items():
        for dep, negated in deps:
            if negated and component[src] == component[dep]:
                members = tuple(sorted(n for n, c in component.items() if c == component[src]))
                raise StratificationError(members)


@dataclass(frozen=True)
class Program:
    """An immutable, validated rule base, indexed by predicate."""

    rules: tuple[Rule, ...]
    _index: dict[tuple[str, int], tuple[Rule, ...]] = field(
        default_factory=dict, repr=False, compare=False
    )
    _integrity: tuple[Rule, ...] = field(default=(), repr=False, compare=False)

    def __post_init__(self) -> None:
        index: dict[tuple[str, int], list[Rule]] = {}
        integrity: list[Rule] = []
        for rule in self.rules:
            if rule.head is None:
                integrity.append(rule)
            else:
                index.setdefault(predicate_key(rule.head), []).append(rule)
        object.__setattr__(self, "_index", {k: tuple(v) for k, v in index.items()})
        object.__setattr__(self, "_integrity", tuple(integrity))

    @classmethod
    def create(cls, rules: Iterable[Rule], validate: bool = True) -> "Program":
        numbered = []
        for i, rule in enumerate(rules):
            numbered.append(
                rule if rule.rule_id else Rule(rule.head, rule.body, f"r{i}")
            )
        program = cls(tuple(numbered))
        if validate:
            for rule in program.rules:
                _check_range_restriction(rule)
            _check_stratified(program.rules)
        return program

    @property
    def facts(self) -> tuple[Term, ...]:
        return tuple(
            r.head for r in self.rules if r.is_fact and r.head is not None and is_ground(r.head)
        )

    @property
    def integrity_rules(self) -> tuple[Rule, ...]:
        return self._integrity

    def rules_for(self, key: tuple[str, int]) -> tuple[Rule, ...]:
        return self._index.get(key, ())

    def rule_by_id(self, rule_id: str) -> Rule | None:
        for rule in self.rules:
            if rule.rule_id == rule_id:
                return rule
        return None

    def with_facts(self, atoms: Iterable[Term]) -> "Program":
        """Extend with ground facts; validation is unaffected by ground facts."""
        extra = []
        offset = len(self.rules)
        for i, atom in enumerate(atoms):
            if not is_ground(atom):
                raise ValueError(f"with_facts requires ground atoms: {term_text(atom)}")
            extra.append(Rule(atom, (), f"r{offset + i}"))
        return Program(self.rules + tuple(extra))

    def text(self) -> str:
        return "\n".join(rule.text() for rule in self.rules)
