"""Qualitative comparison questions: two worlds, one observation, two options.

A question's logical form carries one observed property comparison and two
candidate conclusions. The knowledge base relates properties through
positive/negative correlations; the answerer asserts the observation and
checks which candidate conclusion is entailed.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Callable, Literal as LiteralType

from .errors import DataError
from .logic import (
    Compound,
    Constant,
    JustificationNode,
    Literal,
    Program,
    SolveOptions,
    parse_program,
    solve,
)

VALUES = ("higher", "lower")
WORLDS = ("world1", "world2")

Verdict = LiteralType["A", "B", "Unknown", "Contradictory"]


class PropertyTableError(DataError):
    """Malformed or inconsistent property table."""


class LogicalFormError(DataError):
    """A logical form does not match the qrel grammar or vocabulary."""


class UnknownPropertyError(DataError):
    """A logical form mentions a property the table does not define."""


class DatasetError(DataError):
    """The evaluation dataset file is unusable as a whole."""


@dataclass(frozen=True)
class PropertyTable:
    properties: tuple[str, ...]
    qplus: tuple[tuple[str, str], ...]
    qminus: tuple[tuple[str, str], ...]

    def __post_init__(self) -> None:
        known = set(self.properties)
        plus = {frozenset(p) for p in self.qplus}
        minus = {frozenset(p) for p in self.qminus}
        for a, b in self.qplus + self.qminus:
            if a == b:
                raise PropertyTableError(f"property {a} paired with itself")
            for name in (a, b):
                if name not in known:
                    raise PropertyTableError(f"unknown property {name} in correlation pair")
        overlap = plus & minus
        if overlap:
            pair = ", ".join(sorted(next(iter(overlap))))
            raise PropertyTableError(f"pair ({pair}) is both qplus and qminus")

    def correlated(self, a: str, b: str) -> bool:
        pair = frozenset((a, b))
        return any(frozenset(p) == pair for p in self.qplus + self.qminus)


@dataclass(frozen=True)
class QAtom:
    property: str
    value: str
    world: str
    role: LiteralType["obs", "conc"]

    def __post_init__(self) -> None:
        if self.value not in VALUES:
            raise LogicalFormError(f"value must be higher/lower, got {self.value!r}")
        if self.world not in WORLDS:
            raise LogicalFormError(f"world must be world1/world2, got {self.world!r}")

    def atom(self) -> Compound:
        return Compound(
            self.role, (Constant(self.property), Constant(self.value), Constant(self.world))
        )

    def text(self) -> str:
        return f"qrel({self.property}, {self.value}, {self.world})"


@dataclass(frozen=True)
class QrelForm:
    observation: QAtom
    option_a: QAtom
    option_b: QAtom

    def __post_init__(self) -> None:
        if self.option_a == self.option_b:
            raise LogicalFormError("the two candidate conclusions are identical")

    def text(self) -> str:
        return f"{self.observation.text()} -> {self.option_a.text()} ; {self.option_b.text()}"


@dataclass(frozen=True)
class QAnswer:
    verdict: Verdict
    justification_a: JustificationNode | None = None
    justification_b: JustificationNode | None = None


def default_table_path() -> Path:
    return Path(str(resources.files("star").joinpath("data/quarel_properties.txt")))


def load_property_table(path: str | Path) -> PropertyTable:
    """Load a table file of ``property``/``qplus``/``qminus`` lines."""
    properties: list[str] = []
    qplus: list[tuple[str, str]] = []
    qminus: list[tuple[str, str]] = []
    text = Path(path).read_text(encoding="utf-8")
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if parts[0] == "property" and len(parts) == 2:
            properties.append(parts[1])
        elif parts[0] == "qplus" and len(parts) == 3:
            qplus.append((parts[1], parts[2]))
        elif parts[0] == "qminus" and len(parts) == 3:
            qminus.append((parts[1], parts[2]))
        else:
            raise PropertyTableError(f"line {lineno}: cannot parse {line!r}")
    return PropertyTable(tuple(properties), tuple(qplus), tuple(qminus))


def default_property_table() -> PropertyTable:
    return load_property_table(default_table_path())


_QREL_RE = re.compile(r"(?:qrel|obs|conc)\(\s*(\w+)\s*,\s*(\w+)\s*,\s*(\w+)\s*\)")


def parse_logical_form(text: str) -> QrelForm:
    """Parse ``qrel(p,v,w) -> qrel(p,v,w) ; qrel(p,v,w)`` (``→`` accepted)."""
    normalized = text.replace("→", "->").strip().rstrip(".")
    pieces = normalized.split("->")
    if len(pieces) != 2:
        raise LogicalFormError(f"expected one arrow in logical form: {text!r}")
    options = pieces[1].split(";")
    if len(options) != 2:
        raise LogicalFormError(f"expected two ;-separated conclusions: {text!r}")
    atoms: list[QAtom] = []
    for chunk, role in ((pieces[0], "obs"), (options[0], "conc"), (options[1], "conc")):
        m = _QREL_RE.fullmatch(chunk.strip())
        if m is None:
            raise LogicalFormError(f"cannot parse qrel atom from {chunk.strip()!r}")
        atoms.append(QAtom(m.group(1), m.group(2), m.group(3), role))  # type: ignore[arg-type]
    return QrelForm(atoms[0], atoms[1], atoms[2])


# The commonsense rule base: the same-property restatement rule plus the four
# correlation cases (positive/negative crossed with same/opposite world).
_KB_RULES = """
positive(X, Y) :- qplus(X, Y).
positive(X, Y) :- qplus(Y, X).
negative(X, Y) :- qminus(X, Y).
negative(X, Y) :- qminus(Y, X).

opposite_w(world1, world2).
opposite_w(world2, world1).
opposite_v(higher, lower).
opposite_v(lower, higher).

conc(P, V, W) :- obs(P, Vr, Wr), property(P), opposite_w(W, Wr), opposite_v(V, Vr).

conc(P, V, W) :- obs(Pr, V, W), property(P), property(Pr), positive(P, Pr).
conc(P, V, W) :- obs(Pr, Vr, Wr), property(P), property(Pr), opposite_w(W, Wr), opposite_v(V, Vr), positive(P, Pr).
conc(P, V, W) :- obs(Pr, Vr, W), property(P), property(Pr), opposite_v(V, Vr), negative(P, Pr).
conc(P, V, W) :- obs(Pr, V, Wr), property(P), property(Pr), opposite_w(W, Wr), negative(P, Pr).
"""

_IDENTITY_RULE = "conc(P, V, W) :- obs(P, V, W), property(P).\n"


def compile_kb(table: PropertyTable, identity_rule: bool = False) -> Program:
    """Compile a property table into the qualitative rule base."""
    lines = [f"property({p})." for p in table.properties]
    lines += [f"qplus({a}, {b})." for a, b in table.qplus]
    lines += [f"qminus({a}, {b})." for a, b in table.qminus]
    source = "\n".join(lines) + "\n" + _KB_RULES
    if identity_rule:
        source += _IDENTITY_RULE
    return parse_program(source)


def _require_known_property(kb: Program, name: str) -> None:
    fact = Compound("property", (Constant(name),))
    for rule in kb.rules_for(("property", 1)):
        if rule.head == fact:
            return
    raise UnknownPropertyError(f"property {name!r} is not in the table")


def entails(
    kb: Program, observation: QAtom, conclusion: QAtom
) -> tuple[bool, JustificationNode | None]:
    """Assert the observation, then try to prove the conclusion."""
    if observation.role != "obs" or conclusion.role != "conc":
        raise ValueError("entails expects an obs atom and a conc atom")
    _require_known_property(kb, observation.property)
    _require_known_property(kb, conclusion.property)
    program = kb.with_facts([observation.atom()])
    goal = Literal(conclusion.atom())
    for _sub, justification in solve(program, (goal,), SolveOptions(max_answers=1)):
        return True, justification
    return False, None


def answer(kb: Program, form: QrelForm) -> QAnswer:
    """Pick option A or B by entailment of the candidate conclusions."""
    ok_a, just_a = entails(kb, form.observation, form.option_a)
    ok_b, just_b = entails(kb, form.observation, form.option_b)
    if ok_a and ok_b:
        return QAnswer("Contradictory", just_a, just_b)
    if ok_a:
        return QAnswer("A", just_a, None)
    if ok_b:
        return QAnswer("B", None, just_b)
    return QAnswer("Unknown", None, None)


@dataclass(frozen=True)
class DatasetRecord:
    record_id: str
    logical_form: str
    gold_index: int
    question_text: str = ""
    world1: str = ""
    world2: str = ""


@dataclass
class EvalReport:
    total: int = 0
    correct: int = 0
    verdict_counts: dict[str, int] = field(
        default_factory=lambda: {"A": 0, "B": 0, "Unknown": 0, "Contradictory": 0}
    )
    failures: list[tuple[str, str]] = field(default_factory=list)

    @property
    def accuracy(self) -> float:
        return self.correct / self.total if self.total else 0.0

    @property
    def accuracy_percent(self) -> float:
        return round(100.0 * self.accuracy, 1)

    def render(self) -> str:
        lines = [
            f"records: {self.total}",
            f"correct: {self.correct}",
            f"accuracy: {self.accuracy_percent}",
            "verdicts: "
            + " ".join(f"{k}={self.verdict_counts[k]}" for k in ("A", "B", "Unknown", "Contradictory")),
        ]
        for record_id, message in self.failures:
            lines.append(f"failure {record_id}: {message}")
        return "\n".join(lines)


def read_dataset(path: str | Path) -> list[DatasetRecord]:
    """Tab-separated records: id, logical_form, gold_index[, question, w1, w2]."""
    records: list[DatasetRecord] = []
    text = Path(path).read_text(encoding="utf-8")
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.rstrip("\n")
        if not line.strip() or line.startswith("#"):
            continue
        fields = line.split("\t")
        if len(fields) < 3:
            records.append(DatasetRecord(f"line{lineno}", "", -1))
            continue
        try:
            gold = int(fields[2])
        except ValueError:
            gold = -1
        records.append(
            DatasetRecord(
                fields[0],
                fields[1],
                gold,
                fields[3] if len(fields) > 3 else "",
                fields[4] if len(fields) > 4 else "",
                fields[5] if len(fields) > 5 else "",
            )
        )
    if not records:
        raise DatasetError(f"empty dataset: {path}")
    return records


FormSource = Callable[[DatasetRecord], str]


def evaluate(kb: Program, dataset: str | Path, form_source: FormSource | None = None) -> EvalReport:
    """Score every record; Unknown/Contradictory verdicts count as incorrect.

    ``form_source`` supplies the logical form per record (defaults to the
    gold annotation); malformed records are reported and the run continues.
    """
    records = read_dataset(dataset)
    report = EvalReport()
    for record in records:
        report.total += 1
        try:
            if record.gold_index not in (0, 1):
                raise DatasetError(f"gold index must be 0 or 1, got {record.gold_index}")
            form_text = form_source(record) if form_source else record.logical_form
            form = parse_logical_form(form_text)
            result = answer(kb, form)
        except DataError as exc:
            report.verdict_counts["Unknown"] += 1
            report.failures.append((record.record_id, str(exc)))
            continue
        report.verdict_counts[result.verdict] += 1
        expected: Verdict = "A" if record.gold_index == 0 else "B"
        if result.verdict == expected:
            report.correct += 1
    return report
