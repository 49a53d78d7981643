"""Justification trees: proof structure for derived answers.

Nodes record how an atom was established: as a stored fact, by applying a
rule (children mirror the rule body in order), by negation-as-failure
success, or by a satisfied arithmetic constraint.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Literal as LiteralType
from typing import Union

from .program import Constraint
from .terms import Term, term_text

NodeKind = LiteralType["fact", "rule-application", "naf-success", "constraint"]


@dataclass(frozen=True)
class JustificationNode:
    atom: Union[Term, Constraint]
    kind: NodeKind
    rule_id: str | None = None
    children: tuple["JustificationNode", ...] = field(default=())

    def __post_init__(self) -> None:
        if self.kind in ("fact", "constraint") and self.children:
            raise ValueError(f"{self.kind} nodes are leaves")

    def atom_text(self) -> str:
        if isinstance(self.atom, Constraint):
            return self.atom.text()
        prefix = "not " if self.kind == "naf-success" else ""
        return prefix + term_text(self.atom)


def _emit(node: JustificationNode, indent: int, lines: list[str]) -> None:
    pad = " " * indent
    if node.children:
        lines.append(pad + node.atom_text() + " :-")
        for child in node.children:
            _emit(child, indent + 4, lines)
    else:
        lines.append(pad + node.atom_text())


def render_justification(j: JustificationNode) -> str:
    """Deterministic indented proof text, ending with ``global_constraint.``.

    Lines that open a sub-proof end with `` :-``; every other line gets a
    trailing comma except the final one, which ends with a period.
    """
    lines: list[str] = []
    _emit(j, 0, lines)
    out: list[str] = []
    for i, line in enumerate(lines):
        if line.endswith(" :-"):
            out.append(line)
        elif i == len(lines) - 1:
            out.append(line + ".")
        else:
            out.append(line + ",")
    out.append("global_constraint.")
    return "\n".join(out)
