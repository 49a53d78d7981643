"""One-unknown addition/subtraction word problems over has/transfer/total facts.

A problem is a sequence of facts, exactly one of which is flagged ``q`` with
an unknown quantity. The rule base relates holdings across consecutive
timestamps; solving executes the query fact against the rules plus the
known facts and returns the unknown with a proof.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Union

from .errors import DataError
from .logic import (
    Compound,
    Constant,
    Integer,
    JustificationNode,
    Literal,
    Program,
    Rule,
    Variable,
    parse_program,
    render_justification,
    solve,
)
from .logic.program import Constraint
from .logic.terms import Term

UNKNOWN = "unknown"
Quantity = Union[int, str]  # a non-negative int, or UNKNOWN


class AlgebraError(DataError):
    """Malformed problem text or facts."""


class NoSolutionError(AlgebraError):
    """The rule base cannot derive the query."""


class AmbiguousAnswerError(AlgebraError):
    """Multiple distinct answers: the extracted facts underdetermine the problem."""

    def __init__(self, answers: list[int]) -> None:
        super().__init__("ambiguous problem, answers: " + ", ".join(map(str, answers)))
        self.answers = answers


@dataclass(frozen=True)
class AlgebraFact:
    kind: str  # has | transfer | total
    entities: tuple[str, ...]
    quantity: Quantity
    timestamp: int
    flag: str  # k | q

    def __post_init__(self) -> None:
        if self.kind not in ("has", "transfer", "total"):
            raise AlgebraError(f"unknown fact kind {self.kind!r}")
        if self.flag == "q" and self.quantity != UNKNOWN:
            raise AlgebraError("a q-flagged fact must have an unknown quantity")
        if self.flag == "k" and self.quantity == UNKNOWN:
            raise AlgebraError("a k-flagged fact must have a known quantity")
        if isinstance(self.quantity, int) and self.quantity < 0:
            raise AlgebraError(f"negative quantity {self.quantity}")
        expected_entities = 2 if self.kind == "transfer" else 1
        if len(self.entities) != expected_entities:
            raise AlgebraError(f"{self.kind} takes {expected_entities} entity name(s)")
        if self.kind == "transfer" and self.entities[0] == self.entities[1]:
            raise AlgebraError("transfer needs two distinct entities")

    def term(self, quantity: Term | None = None) -> Compound:
        if quantity is None:
            quantity = (
                Variable("X") if self.quantity == UNKNOWN else Integer(int(self.quantity))
            )
        args: tuple[Term, ...] = tuple(Constant(e) for e in self.entities)
        args += (quantity, Integer(self.timestamp), Constant(self.flag))
        return Compound(self.kind, args)

    def text(self) -> str:
        from .logic import term_text

        return term_text(self.term()) + "."


@dataclass(frozen=True)
class AlgebraProblem:
    facts: tuple[AlgebraFact, ...]

    def __post_init__(self) -> None:
        queries = [f for f in self.facts if f.flag == "q"]
        if len(queries) != 1:
            raise AlgebraError(f"expected exactly one query fact, found {len(queries)}")
        if [f.timestamp for f in self.facts] != list(range(len(self.facts))):
            raise AlgebraError("timestamps must be 0..n-1 in fact order")

    @property
    def query(self) -> AlgebraFact:
        return next(f for f in self.facts if f.flag == "q")

    def text(self) -> str:
        return " ".join(f.text() for f in self.facts)


@dataclass(frozen=True)
class AlgebraSolution:
    answer: int
    justification: JustificationNode

    def rendered(self) -> str:
        return "JUSTIFICATION_TREE:\n" + render_justification(self.justification)


def _term_to_fact(atom: Term) -> AlgebraFact:
    if not isinstance(atom, Compound) or atom.functor not in ("has", "transfer", "total"):
        raise AlgebraError(f"expected has/transfer/total fact, got {atom!r}")
    n_entities = 2 if atom.functor == "transfer" else 1
    if len(atom.args) != n_entities + 3:
        raise AlgebraError(f"{atom.functor} has wrong arity")
    entities = []
    for arg in atom.args[:n_entities]:
        # capitalized names lex as variables; entity slots are names either way
        if isinstance(arg, Constant):
            entities.append(arg.symbol.lower())
        elif isinstance(arg, Variable) and not arg.name.startswith("_"):
            entities.append(arg.name.lower())
        else:
            raise AlgebraError(f"entity must be a name, got {arg!r}")
    qty_term, ts_term, flag_term = atom.args[n_entities:]
    quantity: Quantity
    if isinstance(qty_term, Variable):
        quantity = UNKNOWN
    elif isinstance(qty_term, Integer):
        quantity = qty_term.value
    else:
        raise AlgebraError(f"quantity must be an integer or variable, got {qty_term!r}")
    if not isinstance(ts_term, Integer) or ts_term.value < 0:
        raise AlgebraError("timestamp must be a non-negative integer")
    if not isinstance(flag_term, Constant) or flag_term.symbol not in ("k", "q"):
        raise AlgebraError("flag must be k or q")
    return AlgebraFact(atom.functor, tuple(entities), quantity, ts_term.value, flag_term.symbol)


def parse_facts(text: str) -> AlgebraProblem:
    """Parse predicate text into a problem; timestamps are renumbered 0..n-1."""
    try:
        # the query fact carries a free variable, so load-time validation is
        # skipped; each clause is checked as an AlgebraFact below
        program = parse_program(text, validate=False)
    except Exception as exc:
        raise AlgebraError(f"malformed problem text: {exc}") from exc
    raw: list[AlgebraFact] = []
    for rule in program.rules:
        if rule.body or rule.head is None:
            raise AlgebraError("problem text must contain only facts")
        raw.append(_term_to_fact(rule.head))
    if not raw:
        raise AlgebraError("no facts in problem text")
    ordered = sorted(enumerate(raw), key=lambda pair: (pair[1].timestamp, pair[0]))
    normalized = tuple(
        AlgebraFact(f.kind, f.entities, f.quantity, i, f.flag)
        for i, (_orig, f) in enumerate(ordered)
    )
    return AlgebraProblem(normalized)


# The commonsense rule base. Underscore-prefixed head variables are bound by
# the query fact rather than the body (the queried total/transfer names them).
_RULES = """
total(_E3, X, T2, q) :- has(E1, A, T0, k), has(E2, B, T1, k), X #= A + B, T1 #= T0 + 1, T2 #= T0 + 2.
has(E1, X, T2, q) :- has(E1, A, T0, k), transfer(E2, E1, B, T1, k), X #= A + B, T1 #= T0 + 1, T2 #= T0 + 2.
has(E1, X, T2, q) :- has(E1, A, T0, k), transfer(E1, E2, B, T1, k), A #> B, X #= A - B, T1 #= T0 + 1, T2 #= T0 + 2.
transfer(E1, _E2, X, T1, q) :- has(E1, A, T0, k), has(E1, B, T2, k), A #>= B, X #= A - B, T1 #= T0 + 1, T2 #= T0 + 2.
transfer(_E1, E2, X, T1, q) :- has(E2, A, T0, k), has(E2, B, T2, k), B #> A, X #= B - A, T1 #= T0 + 1, T2 #= T0 + 2.
"""


def compile_rules() -> Program:
    """The five-rule schema covering total, gain, loss, give, and receive."""
    return parse_program(_RULES)


def _prune_guards(node: JustificationNode) -> JustificationNode:
    """Keep the facts and the first value-computing ``#=`` child.

    The rule bodies carry ordering guards (timestamp arithmetic and
    non-negativity); the proof a reader needs shows the source facts and the
    equation that produced the answer.
    """
    kept: list[JustificationNode] = []
    seen_equation = False
    for child in node.children:
        if child.kind == "constraint":
            assert isinstance(child.atom, Constraint)
            if child.atom.rel == "#=" and not seen_equation:
                kept.append(child)
                seen_equation = True
            continue
        kept.append(child)
    return JustificationNode(node.atom, node.kind, node.rule_id, tuple(kept))


def solve_problem(problem: AlgebraProblem) -> AlgebraSolution:
    """Execute the query fact against the rules and the known facts."""
    known = [f for f in problem.facts if f.flag == "k"]
    rules = compile_rules()
    program = Program.create(
        tuple(rules.rules) + tuple(Rule(f.term()) for f in known), validate=False
    )
    query_var = Variable("Answer")
    goal = Literal(problem.query.term(quantity=query_var))
    answers: list[tuple[int, JustificationNode]] = []
    for sub, justification in solve(program, (goal,)):
        value = sub.get("Answer")
        if not isinstance(value, Integer):
            raise NoSolutionError("query variable was not bound to an integer")
        if all(value.value != v for v, _ in answers):
            answers.append((value.value, justification))
    if not answers:
        raise NoSolutionError(f"no rule derives the query: {problem.query.text()}")
    if len(answers) > 1:
        raise AmbiguousAnswerError([v for v, _ in answers])
    value, justification = answers[0]
    assert value >= 0, "guard constraints keep holdings non-negative"
    return AlgebraSolution(value, _prune_guards(justification))


@dataclass(frozen=True)
class ProblemBlock:
    source: str
    expected_answer: int | None = None


def read_problem_file(path: str | Path) -> list[ProblemBlock]:
    """Blocks separated by blank lines; ``# answer: N`` annotates a block."""
    blocks: list[ProblemBlock] = []
    current: list[str] = []
    expected: int | None = None

    def flush() -> None:
        nonlocal current, expected
        if current:
            blocks.append(ProblemBlock("\n".join(current), expected))
        current = []
        expected = None

    for raw in Path(path).read_text(encoding="utf-8").splitlines():
        line = raw.rstrip()
        if not line.strip():
            flush()
            continue
        if line.lstrip().startswith("#"):
            stripped = line.lstrip().lstrip("#").strip()
            if stripped.lower().startswith("answer:"):
                expected = int(stripped.split(":", 1)[1].strip())
            continue
        current.append(line)
    flush()
    if not blocks:
        raise AlgebraError(f"no problems in {path}")
    return blocks
