"""Forward-chaining oracle for the qualitative rule base.

Implements the conclusion semantics directly over Python sets, independent
of the logic interpreter: the same-property restatement plus the four
correlation cases.
"""

from __future__ import annotations

OPP_VALUE = {"higher": "lower", "lower": "higher"}
OPP_WORLD = {"world1": "world2", "world2": "world1"}

Atom = tuple[str, str, str]  # (property, value, world)


def entailed_conclusions(
    properties: tuple[str, ...],
    qplus: tuple[tuple[str, str], ...],
    qminus: tuple[tuple[str, str], ...],
    obs: Atom,
    identity: bool = False,
) -> set[Atom]:
    p, v, w = obs
    plus = {frozenset(pair) for pair in qplus}
    minus = {frozenset(pair) for pair in qminus}
    out: set[Atom] = set()
    if p in properties:
        out.add((p, OPP_VALUE[v], OPP_WORLD[w]))
        if identity:
            out.add((p, v, w))
    for other in properties:
        pair = frozenset((other, p))
        if len(pair) == 1:
            continue
        if pair in plus:
            out.add((other, v, w))
            out.add((other, OPP_VALUE[v], OPP_WORLD[w]))
        elif pair in minus:
            out.add((other, OPP_VALUE[v], w))
            out.add((other, v, OPP_WORLD[w]))
    return out


def all_atoms(properties: tuple[str, ...]) -> list[Atom]:
    return [
        (p, v, w)
        for p in properties
        for v in ("higher", "lower")
        for w in ("world1", "world2")
    ]
