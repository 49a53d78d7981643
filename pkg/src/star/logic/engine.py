"""Query-driven interpreter: SLD resolution with negation as failure.

Search follows Prolog-family conventions: leftmost literal selection,
rules tried in source order, depth-first with an explicit depth limit.
Negated calls must be ground when reached and succeed when the subproof
space is exhausted without an answer. ``#=`` constraints solve for at most
one unbound integer variable; all other relations require ground operands.

Answers are deduplicated syntactically (first justification kept) and every
yielded substitution is normalized, so identical inputs produce identical
answer sequences and identical rendered justifications.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Iterator, Mapping

from .errors import DepthLimitError, FlounderError
from .justify import JustificationNode
from .program import (
    FALSE,
    BodyItem,
    Constraint,
    Literal,
    Program,
    predicate_key,
    rename_rule,
    rule_variable_names,
)
from .terms import (
    Compound,
    Integer,
    ListTerm,
    Substitution,
    Term,
    Variable,
    free_variables,
    is_ground,
    resolve,
    term_text,
    unify_raw,
    walk,
)


@dataclass(frozen=True)
class SolveOptions:
    max_depth: int = 512
    max_answers: int | None = None


DEFAULT_OPTIONS = SolveOptions()


# --- constraint evaluation ---------------------------------------------------


def _eval_arith(t: Term, bindings: Mapping[str, Term]) -> int:
    t = walk(t, bindings)
    if isinstance(t, Integer):
        return t.value
    if isinstance(t, Compound) and t.functor in ("+", "-") and len(t.args) == 2:
        left = _eval_arith(t.args[0], bindings)
        right = _eval_arith(t.args[1], bindings)
        return left + right if t.functor == "+" else left - right
    if isinstance(t, Variable):
        raise FlounderError(f"unbound variable {t.name} in arithmetic expression")
    raise FlounderError(f"non-integer term {term_text(t)} in arithmetic expression")


def _unbound_vars(t: Term, bindings: Mapping[str, Term]) -> set[str]:
    out: set[str] = set()
    for v in free_variables(t):
        walked = walk(v, bindings)
        if isinstance(walked, Variable):
            out.add(walked.name)
        else:
            out |= _unbound_vars(walked, bindings)
    return out


def _solve_linear(t: Term, value: int, bindings: Mapping[str, Term]) -> tuple[str, int]:
    """Isolate the single unbound variable of ``t`` so that t == value."""
    t = walk(t, bindings)
    if isinstance(t, Variable):
        return t.name, value
    if isinstance(t, Compound) and t.functor in ("+", "-") and len(t.args) == 2:
        left, right = t.args
        left_unbound = _unbound_vars(left, bindings)
        if left_unbound:
            other = _eval_arith(right, bindings)
            target = value - other if t.functor == "+" else value + other
            return _solve_linear(left, target, bindings)
        other = _eval_arith(left, bindings)
        target = value - other if t.functor == "+" else other - value
        return _solve_linear(right, target, bindings)
    raise FlounderError(f"cannot isolate a variable in {term_text(t)}")


_RELATION_TESTS = {
    "#=": lambda a, b: a == b,
    "#\\=": lambda a, b: a != b,
    "#<": lambda a, b: a < b,
    "#>": lambda a, b: a > b,
    "#=<": lambda a, b: a <= b,
    "#>=": lambda a, b: a >= b,
}


def eval_constraint_raw(
    con: Constraint, bindings: dict[str, Term]
) -> dict[str, Term] | None:
    """Evaluate a constraint under bindings; None means ordinary failure."""
    unbound = _unbound_vars(con.lhs, bindings) | _unbound_vars(con.rhs, bindings)
    if len(unbound) > 1:
        raise FlounderError(f"{len(unbound)} unbound variables in constraint {con.text()}")
    if not unbound:
        ok = _RELATION_TESTS[con.rel](
            _eval_arith(con.lhs, bindings), _eval_arith(con.rhs, bindings)
        )
        return bindings if ok else None
    if con.rel != "#=":
        raise FlounderError(f"relation {con.rel} cannot bind variable in {con.text()}")
    lhs_unbound = _unbound_vars(con.lhs, bindings)
    if lhs_unbound and _unbound_vars(con.rhs, bindings):
        raise FlounderError(f"variable on both sides of {con.text()}")
    if lhs_unbound:
        name, value = _solve_linear(con.lhs, _eval_arith(con.rhs, bindings), bindings)
    else:
        name, value = _solve_linear(con.rhs, _eval_arith(con.lhs, bindings), bindings)
    out = dict(bindings)
    out[name] = Integer(value)
    return out


def eval_constraint(con: Constraint, s: Substitution | None = None) -> Substitution | None:
    """Public constraint check: extended substitution on success, else None."""
    base = dict(s.bindings) if s else {}
    raw = eval_constraint_raw(con, base)
    if raw is None:
        return None
    return Substitution.from_raw(raw)


# --- resolution --------------------------------------------------------------


def _resolve_node(node: JustificationNode, bindings: Mapping[str, Term]) -> JustificationNode:
    if isinstance(node.atom, Constraint):
        atom: Term | Constraint = Constraint(
            resolve(node.atom.lhs, bindings), node.atom.rel, resolve(node.atom.rhs, bindings)
        )
    else:
        atom = resolve(node.atom, bindings)
    children = tuple(_resolve_node(c, bindings) for c in node.children)
    return JustificationNode(atom, node.kind, node.rule_id, children)


def _collect_residuals(term: Term, mapping: dict[str, Variable]) -> Term:
    if isinstance(term, Variable):
        if term.name not in mapping:
            mapping[term.name] = Variable(f"_G{len(mapping)}")
        return mapping[term.name]
    if isinstance(term, Compound):
        return Compound(term.functor, tuple(_collect_residuals(a, mapping) for a in term.args))
    if isinstance(term, ListTerm):
        return ListTerm(tuple(_collect_residuals(e, mapping) for e in term.elements))
    return term


def _canonical_node(node: JustificationNode, mapping: dict[str, Variable]) -> JustificationNode:
    if isinstance(node.atom, Constraint):
        atom: Term | Constraint = Constraint(
            _collect_residuals(node.atom.lhs, mapping),
            node.atom.rel,
            _collect_residuals(node.atom.rhs, mapping),
        )
    else:
        atom = _collect_residuals(node.atom, mapping)
    return JustificationNode(
        atom, node.kind, node.rule_id, tuple(_canonical_node(c, mapping) for c in node.children)
    )


class _Solver:
    def __init__(self, program: Program, options: SolveOptions) -> None:
        self.program = program
        self.options = options
        self.counter = itertools.count()
        self._rule_vars: dict[str, tuple[str, ...]] = {}

    def prove_all(
        self, items: tuple[BodyItem, ...], bindings: dict[str, Term], depth: int
    ) -> Iterator[tuple[dict[str, Term], tuple[JustificationNode, ...]]]:
        if not items:
            yield bindings, ()
            return
        head, rest = items[0], items[1:]
        for b1, node in self.prove_one(head, bindings, depth):
            for b2, nodes in self.prove_all(rest, b1, depth):
                yield b2, (node,) + nodes

    def prove_one(
        self, item: BodyItem, bindings: dict[str, Term], depth: int
    ) -> Iterator[tuple[dict[str, Term], JustificationNode]]:
        if isinstance(item, Constraint):
            result = eval_constraint_raw(item, bindings)
            if result is not None:
                yield result, JustificationNode(item, "constraint")
            return
        if item.negated:
            target = resolve(item.atom, bindings)
            if not is_ground(target):
                raise FlounderError(f"negated call not ground: {term_text(target)}")
            for _ in self.prove_one(Literal(target), bindings, depth + 1):
                return  # a proof exists, so negation fails
            yield bindings, JustificationNode(target, "naf-success")
            return
        if depth >= self.options.max_depth:
            raise DepthLimitError(
                f"depth limit {self.options.max_depth} exceeded proving {item.text()}"
            )
        atom = item.atom
        for rule in self.program.rules_for(predicate_key(atom)):
            names = self._rule_vars.get(rule.rule_id)
            if names is None:
                names = rule_variable_names(rule)
                self._rule_vars[rule.rule_id] = names
            fresh = rename_rule(rule, str(next(self.counter)), names) if names else rule
            assert fresh.head is not None
            b1 = unify_raw(atom, fresh.head, bindings)
            if b1 is None:
                continue
            if not fresh.body:
                yield b1, JustificationNode(fresh.head, "fact", rule.rule_id)
                continue
            for b2, children in self.prove_all(fresh.body, b1, depth + 1):
                yield b2, JustificationNode(
                    fresh.head, "rule-application", rule.rule_id, children
                )


def _goal_vars(goals: tuple[BodyItem, ...]) -> list[Variable]:
    seen: dict[str, Variable] = {}
    for item in goals:
        terms = (item.atom,) if isinstance(item, Literal) else (item.lhs, item.rhs)
        for t in terms:
            for v in free_variables(t):
                seen.setdefault(v.name, v)
    return list(seen.values())


def solve(
    program: Program,
    goals: tuple[BodyItem, ...] | list[BodyItem],
    options: SolveOptions | None = None,
) -> Iterator[tuple[Substitution, JustificationNode]]:
    """Yield (answer substitution, justification) for a goal conjunction.

    Answers arrive in search order, deduplicated syntactically; the
    justification root covers the whole conjunction (single goals yield
    their proof node directly).
    """
    opts = options or DEFAULT_OPTIONS
    goal_tuple = tuple(goals)
    solver = _Solver(program, opts)
    query_vars = _goal_vars(goal_tuple)
    seen: set[str] = set()
    produced = 0
    for bindings, nodes in solver.prove_all(goal_tuple, {}, 0):
        if len(nodes) == 1:
            root = nodes[0]
        else:
            atoms = tuple(
                n.atom if not isinstance(n.atom, Constraint) else Compound("constraint", (n.atom.lhs, n.atom.rhs))
                for n in nodes
            )
            root = JustificationNode(
                Compound("query", atoms) if atoms else FALSE,
                "rule-application",
                None,
                nodes,
            )
        resolved_root = _resolve_node(root, bindings)
        residuals: dict[str, Variable] = {}
        answer_bindings = {
            v.name: _collect_residuals(resolve(v, bindings), residuals) for v in query_vars
        }
        canonical_root = _canonical_node(resolved_root, residuals)
        key = "\x1f".join(
            f"{name}={term_text(t)}" for name, t in sorted(answer_bindings.items())
        )
        if key in seen:
            continue
        seen.add(key)
        yield Substitution(answer_bindings), canonical_root
        produced += 1
        if opts.max_answers is not None and produced >= opts.max_answers:
            return


def check_consistency(
    program: Program, options: SolveOptions | None = None
) -> list[JustificationNode]:
    """One justification per derivable integrity-constraint violation."""
    violations: list[JustificationNode] = []
    for ic in program.integrity_rules:
        for _sub, node in solve(program, ic.body, options):
            children = node.children if len(ic.body) > 1 else (node,)
            violations.append(
                JustificationNode(FALSE, "rule-application", ic.rule_id, children)
            )
    return violations
