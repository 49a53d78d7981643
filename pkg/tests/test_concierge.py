"""Dialogue state, matching, explanations, and the paper conversation."""

from __future__ import annotations

import dataclasses
import random

import pytest

from star.concierge import (
    KEY_INFO,
    Ask,
    AttributeConstraint,
    ChatSession,
    Close,
    ConversationState,
    DatabaseError,
    ExtractedPredicate,
    Fail,
    Recommend,
    RestaurantRecord,
    action_kind,
    default_db_path,
    default_preferences_path,
    expand_preferences,
    explain,
    ingest,
    load_db,
    load_preference_rules,
    match,
    next_action,
    run_turn,
    verify_recommendation,
)
from star.errors import ExtractionError
from star.llm import make_extractor, respond_stub
from star.llm import ExtractorConfig


@pytest.fixture(scope="module")
def db():
    return load_db(default_db_path())


def one_of(attr, *values):
    return AttributeConstraint.one_of(attr, values)


def state_of(*constraints, preferences=(), details=()):
    return ConversationState(
        {c.attribute: c for c in constraints}, tuple(preferences), tuple(details)
    )


# --- database -----------------------------------------------------------------


def test_fixture_contains_the_rice_boat(db):
    boat = next(r for r in db if r.name == "The Rice Boat")
    assert boat.address == "901 Bangkok Road"
    assert boat.cuisine == "Thai"
    assert boat.priceRange == "high"
    assert boat.customerRating == "average"
    assert boat.familyFriendly == "no"


def test_noncanonical_price_rejected(tmp_path):
    f = tmp_path / "db.csv"
    f.write_text(
        "name,typeToEat,cuisine,priceRange,customerRating,familyFriendly,address,phoneNumber\n"
        "X,restaurant,Thai,expensive,average,no,1 Road,+1\n"
    )
    with pytest.raises(DatabaseError) as exc:
        load_db(f)
    assert "row 2" in str(exc.value)


def test_duplicate_names_rejected(tmp_path):
    f = tmp_path / "db.csv"
    f.write_text(
        "name,typeToEat,cuisine,priceRange,customerRating,familyFriendly,address,phoneNumber\n"
        "X,restaurant,Thai,high,average,no,1 Road,+1\n"
        "X,pub,Thai,high,average,no,2 Road,+2\n"
    )
    with pytest.raises(DatabaseError):
        load_db(f)


def test_empty_db_is_valid(tmp_path):
    f = tmp_path / "db.csv"
    f.write_text(
        "name,typeToEat,cuisine,priceRange,customerRating,familyFriendly,address,phoneNumber\n"
    )
    records = load_db(f)
    assert records == ()
    action = next_action(
        state_of(*(AttributeConstraint.any(a) for a in KEY_INFO)), records
    )
    assert isinstance(action, Fail)


def test_preference_rules_file():
    rules = load_preference_rules(default_preferences_path())
    assert rules["curry"] == ("indian", "thai")


# --- ingest -----------------------------------------------------------------------


def test_ingest_curry_utterance_predicates():
    predicates = (
        ExtractedPredicate("restaurant-name", ("query",)),
        ExtractedPredicate("prefer", ("curry",)),
        ExtractedPredicate("priceRange", ("cheap", "moderate"), is_list=True),
    )
    state = ingest(ConversationState(), predicates)
    assert state.constraints["priceRange"] == one_of("priceRange", "cheap", "moderate")
    assert state.constraints["restaurant-name"].kind == "query"
    assert state.preferences == ("curry",)
    assert len(state.history) == 1


def test_later_utterance_overrides_price():
    state = ingest(
        ConversationState(), (ExtractedPredicate("priceRange", ("cheap", "moderate"), True),)
    )
    state = ingest(state, (ExtractedPredicate("priceRange", ("high",)),))
    assert state.constraints["priceRange"] == one_of("priceRange", "high")


def test_ingest_empty_list_only_touches_history():
    state = ingest(ConversationState(), ())
    assert state.constraints == {}
    assert len(state.history) == 1


# --- preference expansion ------------------------------------------------------------


def test_curry_expands_to_indian_thai():
    state = ingest(ConversationState(), (ExtractedPredicate("prefer", ("curry",)),))
    expanded = expand_preferences(state)
    assert expanded.constraints["cuisine"] == one_of("cuisine", "indian", "thai")


def test_expansion_is_idempotent():
    state = ingest(ConversationState(), (ExtractedPredicate("prefer", ("curry",)),))
    once = expand_preferences(state)
    twice = expand_preferences(once)
    assert once == twice


def test_expansion_unions_existing_cuisines():
    state = ingest(
        ConversationState(),
        (
            ExtractedPredicate("cuisine", ("japanese",)),
            ExtractedPredicate("prefer", ("curry",)),
        ),
    )
    expanded = expand_preferences(state)
    assert expanded.constraints["cuisine"] == one_of("cuisine", "japanese", "indian", "thai")


def test_unknown_preference_left_in_state(caplog):
    state = ingest(ConversationState(), (ExtractedPredicate("prefer", ("smoky",)),))
    with caplog.at_level("WARNING"):
        expanded = expand_preferences(state)
    assert "smoky" in expanded.preferences
    assert "cuisine" not in expanded.constraints
    assert any("smoky" in r.message for r in caplog.records)


# --- matching --------------------------------------------------------------------------


def test_rice_boat_matches_high_price(db):
    boat = next(r for r in db if r.name == "The Rice Boat")
    assert match(boat, state_of(one_of("priceRange", "high")))


def test_rice_boat_rejects_family_friendly(db):
    boat = next(r for r in db if r.name == "The Rice Boat")
    assert not match(boat, state_of(one_of("familyFriendly", "yes")))


def test_all_any_state_matches_everything(db):
    state = state_of(*(AttributeConstraint.any(a) for a in KEY_INFO))
    assert all(match(r, state) for r in db)


def test_match_is_case_insensitive(db):
    boat = next(r for r in db if r.name == "The Rice Boat")
    assert match(boat, state_of(one_of("cuisine", "THAI")))


# --- next action -----------------------------------------------------------------------


def test_asks_first_missing_key_attribute(db):
    state = state_of(one_of("typeToEat", "restaurant"))
    action = next_action(state, db)
    assert action == Ask("cuisine")


def test_paper_state_recommends_rice_boat(db):
    state = state_of(
        one_of("cuisine", "indian", "thai"),
        one_of("priceRange", "high"),
        AttributeConstraint.any("customerRating"),
        one_of("typeToEat", "restaurant"),
        one_of("familyFriendly", "no"),
    )
    action = next_action(state, db)
    assert isinstance(action, Recommend)
    assert [r.name for r in action.records] == ["The Rice Boat"]


def test_cheap_price_fails_on_fixture(db):
    state = state_of(
        one_of("cuisine", "indian", "thai"),
        one_of("priceRange", "cheap", "moderate"),
        AttributeConstraint.any("customerRating"),
        one_of("typeToEat", "restaurant"),
        one_of("familyFriendly", "no"),
    )
    assert isinstance(next_action(state, db), Fail)


def test_never_asks_constrained_attribute(db):
    state = state_of(
        AttributeConstraint.any("typeToEat"),
        one_of("cuisine", "thai"),
        AttributeConstraint.any("priceRange"),
        AttributeConstraint.any("customerRating"),
    )
    action = next_action(state, db)
    assert action == Ask("familyFriendly")


def test_concrete_name_switches_to_lookup(db):
    state = state_of(one_of("restaurant-name", "The Rice Boat"))
    action = next_action(state, db)
    assert isinstance(action, Recommend)
    assert action.records[0].name == "The Rice Boat"


def test_unknown_name_lookup_fails(db):
    state = state_of(one_of("restaurant-name", "Nowhere House"))
    assert isinstance(next_action(state, db), Fail)


# --- explanations ------------------------------------------------------------------------


def test_explain_ask():
    assert explain(Ask("cuisine")) == "attribute cuisine is required and unknown"


def test_explain_recommendation_lists_matches(db):
    state = state_of(
        one_of("cuisine", "indian", "thai"),
        one_of("priceRange", "high"),
        one_of("typeToEat", "restaurant"),
        one_of("familyFriendly", "no"),
        AttributeConstraint.any("customerRating"),
    )
    action = next_action(state, db)
    text = explain(action, state, db)
    assert "recommend(The Rice Boat)" in text
    assert "matched(priceRange,high)" in text


def test_explain_fail_names_relaxable_constraint(db):
    state = state_of(
        one_of("cuisine", "indian", "thai"),
        one_of("priceRange", "cheap", "moderate"),
        AttributeConstraint.any("customerRating"),
        one_of("typeToEat", "restaurant"),
        one_of("familyFriendly", "no"),
    )
    action = next_action(state, db)
    text = explain(action, state, db)
    assert text.startswith("relaxing priceRange")
    assert "The Rice Boat" in text


def test_explain_fail_without_single_relaxation(db):
    state = state_of(
        one_of("cuisine", "mexican"),
        one_of("priceRange", "high"),
        one_of("typeToEat", "pub"),
        one_of("familyFriendly", "no"),
        AttributeConstraint.any("customerRating"),
    )
    action = next_action(state, db)
    assert isinstance(action, Fail)
    assert explain(action, state, db) == "no single relaxation suffices"


# --- faithfulness -------------------------------------------------------------------------


def test_verifier_accepts_genuine_recommendation(db):
    state = state_of(one_of("priceRange", "high"), one_of("familyFriendly", "no"))
    action = next_action(
        state_of(
            one_of("priceRange", "high"),
            one_of("familyFriendly", "no"),
            *(AttributeConstraint.any(a) for a in ("typeToEat", "cuisine", "customerRating")),
        ),
        db,
    )
    assert isinstance(action, Recommend)
    assert verify_recommendation(action, state, db)


def test_verifier_rejects_mutated_recommendation(db):
    full_state = state_of(
        one_of("priceRange", "high"),
        one_of("familyFriendly", "no"),
        *(AttributeConstraint.any(a) for a in ("typeToEat", "cuisine", "customerRating")),
    )
    action = next_action(full_state, db)
    assert isinstance(action, Recommend)
    tampered = dataclasses.replace(action.records[0], priceRange="cheap")
    fake = Recommend((tampered,) + action.records[1:], action.justification)
    assert not verify_recommendation(fake, full_state, db)


def test_monotone_filtering(db):
    base = state_of(one_of("familyFriendly", "yes"))
    narrowed = state_of(one_of("familyFriendly", "yes"), one_of("priceRange", "cheap"))
    base_matches = {r.name for r in db if match(r, base)}
    narrowed_matches = {r.name for r in db if match(r, narrowed)}
    assert narrowed_matches <= base_matches


# --- sessions ------------------------------------------------------------------------------


def make_session(db):
    return ChatSession(
        db=db,
        extract=make_extractor(ExtractorConfig(mode="stub"), "concierge-extract"),
        respond=respond_stub,
    )


PAPER_TURNS = [
    ("Can you help me find a place for food with curry? I don't want a pricey one.", "ask"),
    ("A normal restaurant.", "ask"),
    ("No, I don't mind the rating.", "ask"),
    ("No. Just for myself.", "fail"),
    (
        "How about one with a high price? But it should be then at least above average quality.",
        "recommend",
    ),
    ("Yes, that's what I need! Tell me where it is.", "recommend"),
    ("Great! Thank you for the service!", "close"),
]


def test_paper_transcript_action_sequence(db):
    session = make_session(db)
    kinds = []
    for text, _expected in PAPER_TURNS:
        bot_text, action, _state = run_turn(session, text)
        assert action is not None, bot_text
        kinds.append(action_kind(action))
    assert kinds == [expected for _text, expected in PAPER_TURNS]


def test_paper_transcript_fail_and_faithful_recommendation(db):
    session = make_session(db)
    texts = {}
    for text, expected in PAPER_TURNS:
        bot_text, action, _state = run_turn(session, text)
        texts[expected] = (bot_text, action)
    fail_text, _ = texts["fail"]
    assert fail_text == "Unfortunately, we cannot provide the results to your request."
    rec_text, rec_action = texts["recommend"]
    assert isinstance(rec_action, Recommend)
    record = rec_action.records[0]
    boat = next(r for r in db if r.name == "The Rice Boat")
    assert record == boat  # byte-identical row
    for fragment in (boat.name, boat.cuisine, boat.priceRange, boat.address):
        assert fragment in rec_text


def test_close_turn(db):
    session = make_session(db)
    bot_text, action, _ = run_turn(session, "Great! Thank you for the service!")
    assert isinstance(action, Close)
    assert session.closed
    assert bot_text == "It's no problem, I'm happy to assist."


def test_unparseable_input_asks_for_rephrase(db):
    session = make_session(db)

    def broken(_text):
        raise ExtractionError("nope")

    session.extract = broken
    before = session.state
    bot_text, action, state = run_turn(session, "mumble")
    assert action is None
    assert state == before
    assert "rephrase" in bot_text.lower()


def test_termination_with_cooperative_user(db):
    answers = {
        "typeToEat": "A normal restaurant.",
        "cuisine": "Thai food please.",
        "priceRange": "How about one with a high price?",
        "customerRating": "No, I don't mind the rating.",
        "familyFriendly": "No. Just for myself.",
    }
    session = make_session(db)
    bot_text, action, _ = run_turn(session, "Can you help me find a place for food?")
    asks = 0
    while isinstance(action, Ask):
        asks += 1
        assert asks <= len(KEY_INFO)
        bot_text, action, _ = run_turn(session, answers[action.attribute])
    assert action_kind(action) in ("recommend", "fail")


def test_ask_soundness_random_states(db):
    rng = random.Random(5)
    for _ in range(200):
        constraints = {}
        for attr in KEY_INFO:
            roll = rng.random()
            if roll < 0.4:
                continue
            if roll < 0.6:
                constraints[attr] = AttributeConstraint.any(attr)
            else:
                from star.concierge import VOCABULARY

                values = VOCABULARY.get(attr)
                if values:
                    constraints[attr] = one_of(attr, rng.choice(values))
                else:
                    constraints[attr] = one_of(attr, rng.choice(["thai", "indian", "french"]))
        state = ConversationState(constraints)
        action = next_action(state, db)
        if isinstance(action, Ask):
            assert action.attribute not in constraints
