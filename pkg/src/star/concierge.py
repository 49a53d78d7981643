"""Goal-directed restaurant recommendation: state, questions, matching.

Each session keeps per-attribute constraints built from extracted
predicates. The bot asks for whichever key attribute is still missing,
expands preferences (curry implies Indian or Thai cuisine), and once all
key information is present recommends restaurants straight from the
database, never inventing or altering a field.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path
from typing import Callable, Mapping, Sequence, Union

from .errors import DataError, ExtractionError
from .logic import Compound, Constant, JustificationNode, render_justification

logger = logging.getLogger(__name__)

ATTRIBUTES = (
    "restaurant-name",
    "typeToEat",
    "cuisine",
    "priceRange",
    "customerRating",
    "familyFriendly",
)

#: Attributes the bot must know before it can recommend, in asking order.
KEY_INFO = ("typeToEat", "cuisine", "priceRange", "customerRating", "familyFriendly")

DETAIL_FIELDS = ("address", "phoneNumber")

VOCABULARY = {
    "typeToEat": ("restaurant", "coffee shop", "pub"),
    "priceRange": ("cheap", "moderate", "high"),
    "customerRating": ("low", "average", "high"),
    "familyFriendly": ("yes", "no"),
}

_FIELD_OF_ATTRIBUTE = {
    "restaurant-name": "name",
    "typeToEat": "typeToEat",
    "cuisine": "cuisine",
    "priceRange": "priceRange",
    "customerRating": "customerRating",
    "familyFriendly": "familyFriendly",
}


class DatabaseError(DataError):
    """The restaurant database file is malformed."""


@dataclass(frozen=True)
class RestaurantRecord:
    name: str
    typeToEat: str
    cuisine: str
    priceRange: str
    customerRating: str
    familyFriendly: str
    address: str
    phoneNumber: str

    def field_value(self, attribute: str) -> str:
        return getattr(self, _FIELD_OF_ATTRIBUTE[attribute])


@dataclass(frozen=True)
class AttributeConstraint:
    """Query (asked-for output), Any (don't care), or OneOf(values)."""

    attribute: str
    kind: str  # query | any | one_of
    values: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if self.kind not in ("query", "any", "one_of"):
            raise ValueError(f"unknown constraint kind {self.kind!r}")
        if self.kind == "one_of" and not self.values:
            raise ValueError("one_of constraint needs at least one value")

    @classmethod
    def query(cls, attribute: str) -> "AttributeConstraint":
        return cls(attribute, "query")

    @classmethod
    def any(cls, attribute: str) -> "AttributeConstraint":
        return cls(attribute, "any")

    @classmethod
    def one_of(cls, attribute: str, values: Sequence[str]) -> "AttributeConstraint":
        deduped: list[str] = []
        for v in values:
            if v not in deduped:
                deduped.append(v)
        return cls(attribute, "one_of", tuple(deduped))

    def predicate_text(self) -> str:
        if self.kind == "query":
            return f"{self.attribute}(query)"
        if self.kind == "any":
            return f"{self.attribute}(any)"
        if len(self.values) == 1:
            return f"{self.attribute}({self.values[0]})"
        return f"{self.attribute}([{', '.join(self.values)}])"


@dataclass(frozen=True)
class ConversationState:
    constraints: dict[str, AttributeConstraint] = field(default_factory=dict)
    preferences: tuple[str, ...] = ()
    detail_requests: tuple[str, ...] = ()
    history: tuple[tuple[str, tuple[str, ...]], ...] = ()

    def predicate_texts(self) -> list[str]:
        lines = [self.constraints[a].predicate_text() for a in ATTRIBUTES if a in self.constraints]
        lines += [f"{d}(query)" for d in self.detail_requests]
        lines += [f"prefer({p})" for p in self.preferences]
        return lines


@dataclass(frozen=True)
class Ask:
    attribute: str

    def __post_init__(self) -> None:
        if self.attribute not in KEY_INFO:
            raise ValueError(f"can only ask for key attributes, not {self.attribute!r}")


@dataclass(frozen=True)
class Recommend:
    records: tuple[RestaurantRecord, ...]
    justification: JustificationNode

    def __post_init__(self) -> None:
        if not self.records:
            raise ValueError("a recommendation carries at least one record")


@dataclass(frozen=True)
class Fail:
    reason: str


@dataclass(frozen=True)
class Close:
    pass


BotAction = Union[Ask, Recommend, Fail, Close]


def action_kind(action: BotAction) -> str:
    return {Ask: "ask", Recommend: "recommend", Fail: "fail", Close: "close"}[type(action)]


# --- database -----------------------------------------------------------------


def default_db_path() -> Path:
    return Path(str(resources.files("star").joinpath("data/restaurants.csv")))


def load_db(path: str | Path) -> tuple[RestaurantRecord, ...]:
    """Load and validate the restaurant CSV; rows are immutable records."""
    expected = ["name", "typeToEat", "cuisine", "priceRange", "customerRating",
                "familyFriendly", "address", "phoneNumber"]
    records: list[RestaurantRecord] = []
    names: set[str] = set()
    with open(path, newline="", encoding="utf-8") as handle:
        reader = csv.DictReader(handle)
        if reader.fieldnames != expected:
            raise DatabaseError(f"header must be {','.join(expected)}")
        for row_number, row in enumerate(reader, start=2):
            for column in expected:
                if not (row.get(column) or "").strip():
                    raise DatabaseError(f"row {row_number}: empty {column}")
            for column, allowed in VOCABULARY.items():
                if row[column] not in allowed:
                    raise DatabaseError(
                        f"row {row_number}: {column} must be one of {allowed}, got {row[column]!r}"
                    )
            if row["name"].lower() in names:
                raise DatabaseError(f"row {row_number}: duplicate name {row['name']!r}")
            names.add(row["name"].lower())
            records.append(RestaurantRecord(**row))
    return tuple(records)


# --- preference rules ------------------------------------------------------------


def default_preferences_path() -> Path:
    return Path(str(resources.files("star").joinpath("data/preferences.txt")))


def load_preference_rules(path: str | Path) -> dict[str, tuple[str, ...]]:
    """Lines of ``prefer <symbol> <cuisine> [<cuisine>...]``."""
    rules: dict[str, tuple[str, ...]] = {}
    for lineno, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if parts[0] != "prefer" or len(parts) < 3:
            raise DataError(f"line {lineno}: expected 'prefer <symbol> <cuisine>...'")
        rules[parts[1]] = tuple(parts[2:])
    return rules


DEFAULT_PREFERENCE_RULES = {"curry": ("indian", "thai")}


# --- predicates -------------------------------------------------------------------


@dataclass(frozen=True)
class ExtractedPredicate:
    """One ``name(arg)`` or ``name([args])`` unit from the extractor."""

    name: str
    values: tuple[str, ...]
    is_list: bool = False

    def text(self) -> str:
        if self.is_list:
            return f"{self.name}([{', '.join(self.values)}])"
        return f"{self.name}({self.values[0]})"


def ingest(state: ConversationState, predicates: Sequence[ExtractedPredicate]) -> ConversationState:
    """Fold validated predicates into the state; later turns override earlier."""
    constraints = dict(state.constraints)
    preferences = list(state.preferences)
    details = list(state.detail_requests)
    for predicate in predicates:
        if predicate.name == "prefer":
            for symbol in predicate.values:
                if symbol not in preferences:
                    preferences.append(symbol)
            continue
        if predicate.name in DETAIL_FIELDS:
            if predicate.name not in details:
                details.append(predicate.name)
            continue
        if predicate.name not in ATTRIBUTES:
            continue  # unknown names are rejected upstream; ignore defensively
        if len(predicate.values) == 1 and predicate.values[0] == "query":
            constraints[predicate.name] = AttributeConstraint.query(predicate.name)
        elif len(predicate.values) == 1 and predicate.values[0] == "any":
            constraints[predicate.name] = AttributeConstraint.any(predicate.name)
        else:
            constraints[predicate.name] = AttributeConstraint.one_of(
                predicate.name, predicate.values
            )
    turn = ("user", tuple(p.text() for p in predicates))
    return ConversationState(
        constraints, tuple(preferences), tuple(details), state.history + (turn,)
    )


def expand_preferences(
    state: ConversationState, rules: Mapping[str, Sequence[str]] | None = None
) -> ConversationState:
    """Turn preference symbols into cuisine constraints; idempotent."""
    rules = DEFAULT_PREFERENCE_RULES if rules is None else rules
    constraints = dict(state.constraints)
    for symbol in state.preferences:
        mapped = rules.get(symbol)
        if mapped is None:
            logger.warning("no expansion rule for preference %r", symbol)
            continue
        existing = constraints.get("cuisine")
        if existing is not None and existing.kind != "one_of":
            continue  # an explicit don't-care or query is not narrowed
        base = list(existing.values) if existing is not None else []
        merged = base + [c for c in mapped if c not in base]
        constraints["cuisine"] = AttributeConstraint.one_of("cuisine", merged)
    return replace(state, constraints=constraints)


# --- matching and actions -----------------------------------------------------------


def match(record: RestaurantRecord, state: ConversationState) -> bool:
    """Does the record satisfy every constraint? (Any/Query always match.)"""
    for attribute, constraint in state.constraints.items():
        if constraint.kind in ("any", "query"):
            continue
        value = record.field_value(attribute).lower()
        if value not in {v.lower() for v in constraint.values}:
            return False
    return True


def _match_justification(record: RestaurantRecord, state: ConversationState) -> JustificationNode:
    children = []
    for attribute in ATTRIBUTES:
        constraint = state.constraints.get(attribute)
        if constraint is None or constraint.kind != "one_of":
            continue
        children.append(
            JustificationNode(
                Compound("matched", (Constant(attribute), Constant(record.field_value(attribute)))),
                "fact",
            )
        )
    return JustificationNode(
        Compound("recommend", (Constant(record.name),)),
        "rule-application",
        None,
        tuple(children),
    )


def next_action(state: ConversationState, db: Sequence[RestaurantRecord]) -> BotAction:
    """Ask for the first missing key attribute, else recommend or fail."""
    name_constraint = state.constraints.get("restaurant-name")
    if name_constraint is not None and name_constraint.kind == "one_of":
        wanted = {v.lower() for v in name_constraint.values}
        found = tuple(r for r in db if r.name.lower() in wanted)
        if not found:
            return Fail("no restaurant named " + ", ".join(name_constraint.values))
        return Recommend(found, _match_justification(found[0], state))
    for attribute in KEY_INFO:
        if attribute not in state.constraints:
            return Ask(attribute)
    matches = tuple(r for r in db if match(r, state))
    if not matches:
        return Fail("no matching restaurant")
    return Recommend(matches, _match_justification(matches[0], state))


def _relaxed(state: ConversationState, attribute: str) -> ConversationState:
    constraints = dict(state.constraints)
    constraints[attribute] = AttributeConstraint.any(attribute)
    return replace(state, constraints=constraints)


def explain(action: BotAction, state: ConversationState | None = None,
            db: Sequence[RestaurantRecord] = ()) -> str:
    """Why the bot asked, recommended, or failed."""
    if isinstance(action, Ask):
        return f"attribute {action.attribute} is required and unknown"
    if isinstance(action, Recommend):
        return render_justification(action.justification)
    if isinstance(action, Fail):
        if state is None:
            return action.reason
        for attribute in KEY_INFO:
            constraint = state.constraints.get(attribute)
            if constraint is None or constraint.kind != "one_of":
                continue
            candidates = [r for r in db if match(r, _relaxed(state, attribute))]
            if candidates:
                names = ", ".join(r.name for r in candidates)
                return f"relaxing {attribute} would yield: {names}"
        return "no single relaxation suffices"
    raise ValueError("explain covers Ask, Recommend, and Fail actions")


def verify_recommendation(
    action: Recommend, state: ConversationState, db: Sequence[RestaurantRecord]
) -> bool:
    """Faithfulness check: records are database rows and satisfy the state."""
    rows = set(db)
    return all(record in rows and match(record, state) for record in action.records)


# --- sessions -------------------------------------------------------------------------

ExtractFn = Callable[[str], Sequence[ExtractedPredicate]]
RespondFn = Callable[[BotAction, ConversationState], str]

#: Marker predicate the extractor emits for goodbye/thanks turns.
END_PREDICATE = "end-conversation"

REPHRASE_TEXT = "Sorry, I could not understand that. Could you rephrase?"


@dataclass
class ChatSession:
    db: tuple[RestaurantRecord, ...]
    extract: ExtractFn
    respond: RespondFn
    preference_rules: Mapping[str, Sequence[str]] | None = None
    state: ConversationState = field(default_factory=ConversationState)
    last_action: BotAction | None = None
    last_justification: str = ""
    closed: bool = False


def run_turn(session: ChatSession, user_text: str) -> tuple[str, BotAction | None, ConversationState]:
    """One dialogue step: extract, ingest, expand, act, respond.

    On extraction failure the state is left unchanged and the bot asks the
    user to rephrase (returned action is None).
    """
    try:
        predicates = list(session.extract(user_text))
    except ExtractionError:
        return REPHRASE_TEXT, None, session.state
    if any(p.name == END_PREDICATE for p in predicates):
        action: BotAction = Close()
        session.state = replace(
            session.state, history=session.state.history + (("user", (END_PREDICATE,)),)
        )
        session.closed = True
    else:
        state = ingest(session.state, [p for p in predicates if p.name != END_PREDICATE])
        state = expand_preferences(state, session.preference_rules)
        session.state = state
        action = next_action(state, session.db)
    bot_text = session.respond(action, session.state)
    session.last_action = action
    session.last_justification = explain(action, session.state, session.db) if not isinstance(action, Close) else ""
    session.state = replace(
        session.state, history=session.state.history + (("bot", (action_kind(action),)),)
    )
    return bot_text, action, session.state
