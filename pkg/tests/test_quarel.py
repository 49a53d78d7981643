"""Qualitative reasoning: table loading, compilation, entailment, answering."""

from __future__ import annotations

import pytest

from star.quarel import (
    DatasetError,
    LogicalFormError,
    PropertyTable,
    PropertyTableError,
    QAtom,
    UnknownPropertyError,
    answer,
    compile_kb,
    default_property_table,
    entails,
    evaluate,
    load_property_table,
    parse_logical_form,
)

from quarel_oracle import all_atoms, entailed_conclusions

EQ1 = (
    "qrel(distance, higher, world1) -> "
    "qrel(friction, higher, world2) ; qrel(friction, higher, world1)"
)

PAPER_TABLE = PropertyTable(
    properties=("friction", "heat", "speed", "distance", "loudness"),
    qplus=(("friction", "heat"), ("speed", "distance")),
    qminus=(("friction", "speed"), ("distance", "loudness")),
)


@pytest.fixture(scope="module")
def shipped_table():
    return default_property_table()


@pytest.fixture(scope="module")
def shipped_kb(shipped_table):
    return compile_kb(shipped_table)


# --- table loading --------------------------------------------------------------


def test_load_table_positive_pair(tmp_path):
    f = tmp_path / "t.txt"
    f.write_text("property friction\nproperty heat\nqplus friction heat\n")
    table = load_property_table(f)
    assert table.correlated("friction", "heat")
    assert table.correlated("heat", "friction")


def test_load_table_negative_pair_is_symmetric(tmp_path):
    f = tmp_path / "t.txt"
    f.write_text("property distance\nproperty loudness\nqminus distance loudness\n")
    table = load_property_table(f)
    assert ("distance", "loudness") in table.qminus
    assert table.correlated("loudness", "distance")


def test_pair_in_both_sets_rejected(tmp_path):
    f = tmp_path / "t.txt"
    f.write_text("property a\nproperty b\nqplus a b\nqminus a b\n")
    with pytest.raises(PropertyTableError):
        load_property_table(f)


def test_self_pair_rejected(tmp_path):
    f = tmp_path / "t.txt"
    f.write_text("property a\nqplus a a\n")
    with pytest.raises(PropertyTableError):
        load_property_table(f)


def test_unknown_property_in_pair_rejected(tmp_path):
    f = tmp_path / "t.txt"
    f.write_text("property a\nqplus a b\n")
    with pytest.raises(PropertyTableError):
        load_property_table(f)


def test_shipped_table_has_19_properties_and_paper_pairs(shipped_table):
    assert len(shipped_table.properties) == 19
    assert shipped_table.correlated("friction", "heat")
    assert shipped_table.correlated("friction", "speed")
    assert shipped_table.correlated("speed", "distance")
    assert shipped_table.correlated("distance", "loudness")


# --- logical forms ----------------------------------------------------------------


def test_parse_eq1():
    form = parse_logical_form(EQ1)
    assert form.observation == QAtom("distance", "higher", "world1", "obs")
    assert form.option_a == QAtom("friction", "higher", "world2", "conc")
    assert form.option_b == QAtom("friction", "higher", "world1", "conc")


def test_parse_accepts_unicode_arrow_and_obs_conc_functors():
    text = "obs(speed, lower, world2) → conc(time, higher, world1) ; conc(time, lower, world1)"
    form = parse_logical_form(text)
    assert form.observation.property == "speed"
    assert form.option_b.value == "lower"


def test_parse_rejects_bad_value():
    with pytest.raises(LogicalFormError):
        parse_logical_form(
            "qrel(speed, fast, world1) -> qrel(time, higher, world1) ; qrel(time, lower, world1)"
        )


def test_parse_rejects_bad_world():
    with pytest.raises(LogicalFormError):
        parse_logical_form(
            "qrel(speed, higher, world3) -> qrel(time, higher, world1) ; qrel(time, lower, world1)"
        )


def test_parse_rejects_identical_options():
    with pytest.raises(LogicalFormError):
        parse_logical_form(
            "qrel(speed, higher, world1) -> qrel(time, higher, world1) ; qrel(time, higher, world1)"
        )


# --- compilation ------------------------------------------------------------------


def test_compiled_rule_counts_for_paper_table():
    kb = compile_kb(PAPER_TABLE)
    conc_rules = [r for r in kb.rules_for(("conc", 3)) if r.body]
    symmetry_rules = kb.rules_for(("positive", 2)) + kb.rules_for(("negative", 2))
    assert len(conc_rules) == 5
    assert len(symmetry_rules) == 4


def test_empty_table_only_restates_the_observation():
    table = PropertyTable(("speed", "time"), (), ())
    kb = compile_kb(table)
    obs = QAtom("speed", "higher", "world1", "obs")
    entailed = {
        atom
        for atom in all_atoms(table.properties)
        if entails(kb, obs, QAtom(*atom, role="conc"))[0]
    }
    assert entailed == {("speed", "lower", "world2")}


def test_single_qplus_pair_derives_same_world_conclusion():
    table = PropertyTable(("speed", "distance"), (("speed", "distance"),), ())
    kb = compile_kb(table)
    obs = QAtom("speed", "higher", "world1", "obs")
    ok, just = entails(kb, obs, QAtom("distance", "higher", "world1", "conc"))
    assert ok and just is not None


def test_identity_rule_flag():
    table = PropertyTable(("speed",), (), ())
    obs = QAtom("speed", "higher", "world1", "obs")
    same = QAtom("speed", "higher", "world1", "conc")
    assert not entails(compile_kb(table), obs, same)[0]
    assert entails(compile_kb(table, identity_rule=True), obs, same)[0]


# --- entailment ---------------------------------------------------------------------


def test_paper_true_false_pair(shipped_kb):
    obs = QAtom("distance", "higher", "world1", "obs")
    assert entails(shipped_kb, obs, QAtom("friction", "higher", "world2", "conc"))[0] is True
    assert entails(shipped_kb, obs, QAtom("friction", "higher", "world1", "conc"))[0] is False


def test_qplus_entailment(shipped_kb):
    obs = QAtom("friction", "higher", "world1", "obs")
    ok, _ = entails(shipped_kb, obs, QAtom("heat", "higher", "world1", "conc"))
    assert ok


def test_unknown_property_raises(shipped_kb):
    obs = QAtom("smoke", "higher", "world1", "obs")
    with pytest.raises(UnknownPropertyError):
        entails(shipped_kb, obs, QAtom("heat", "higher", "world1", "conc"))


# --- answering ----------------------------------------------------------------------


def test_example_answer_is_a(shipped_kb):
    result = answer(shipped_kb, parse_logical_form(EQ1))
    assert result.verdict == "A"
    assert result.justification_a is not None
    assert result.justification_b is None


def test_swapped_options_answer_is_b(shipped_kb):
    swapped = (
        "qrel(distance, higher, world1) -> "
        "qrel(friction, higher, world1) ; qrel(friction, higher, world2)"
    )
    result = answer(shipped_kb, parse_logical_form(swapped))
    assert result.verdict == "B"
    assert result.justification_b is not None
    assert result.justification_a is None


def test_uncorrelated_property_answer_unknown(shipped_kb):
    form = parse_logical_form(
        "qrel(distance, higher, world1) -> qrel(gravity, higher, world1) ; qrel(gravity, higher, world2)"
    )
    result = answer(shipped_kb, form)
    assert result.verdict == "Unknown"


def test_contradictory_verdict_on_user_table():
    # both options entailed: same conclusion reachable through two pairs
    table = PropertyTable(("a", "b"), (("a", "b"),), ())
    kb = compile_kb(table)
    form = parse_logical_form("qrel(a, higher, world1) -> qrel(b, higher, world1) ; qrel(b, lower, world2)")
    result = answer(kb, form)
    assert result.verdict == "Contradictory"
    assert result.justification_a is not None and result.justification_b is not None


# --- invariants over the shipped table ------------------------------------------------


def _entailed_set(kb, table, obs_atom):
    obs = QAtom(*obs_atom, role="obs")
    return {
        atom
        for atom in all_atoms(table.properties)
        if entails(kb, obs, QAtom(*atom, role="conc"))[0]
    }


def test_oracle_equivalence_sampled(shipped_table, shipped_kb):
    # the full 76x76 sweep runs in the acceptance suite
    for obs in all_atoms(shipped_table.properties)[:8]:
        expected = entailed_conclusions(
            shipped_table.properties, shipped_table.qplus, shipped_table.qminus, obs
        )
        assert _entailed_set(shipped_kb, shipped_table, obs) == expected


def test_opposite_involution_sampled(shipped_table, shipped_kb):
    # with the identity rule off, the observation's own property only gets
    # the double-flipped restatement, so it is excluded here (as in the
    # never-both invariant)
    from quarel_oracle import OPP_VALUE, OPP_WORLD

    for obs in all_atoms(shipped_table.properties)[:4]:
        entailed = _entailed_set(shipped_kb, shipped_table, obs)
        for p, v, w in entailed:
            if p != obs[0]:
                assert (p, OPP_VALUE[v], OPP_WORLD[w]) in entailed


def test_opposite_involution_with_identity_rule(shipped_table):
    from quarel_oracle import OPP_VALUE, OPP_WORLD

    kb = compile_kb(shipped_table, identity_rule=True)
    for obs in all_atoms(shipped_table.properties)[:2]:
        entailed = _entailed_set(kb, shipped_table, obs)
        for p, v, w in entailed:
            assert (p, OPP_VALUE[v], OPP_WORLD[w]) in entailed


def test_never_both_sampled(shipped_table, shipped_kb):
    for obs in all_atoms(shipped_table.properties)[:4]:
        obs_p = obs[0]
        entailed = _entailed_set(shipped_kb, shipped_table, obs)
        for p in shipped_table.properties:
            higher_w1 = (p, "higher", "world1") in entailed
            higher_w2 = (p, "higher", "world2") in entailed
            if shipped_table.correlated(p, obs_p):
                assert higher_w1 != higher_w2
            elif p != obs_p:
                assert not higher_w1 and not higher_w2


def test_answer_invariant_under_option_swap(shipped_kb):
    forms = [
        EQ1,
        "qrel(speed, lower, world2) -> qrel(time, higher, world2) ; qrel(time, lower, world2)",
        "qrel(mass, higher, world1) -> qrel(gravity, higher, world1) ; qrel(gravity, lower, world1)",
    ]
    for text in forms:
        form = parse_logical_form(text)
        swapped = type(form)(form.observation, form.option_b, form.option_a)
        v1 = answer(shipped_kb, form).verdict
        v2 = answer(shipped_kb, swapped).verdict
        flip = {"A": "B", "B": "A", "Unknown": "Unknown", "Contradictory": "Contradictory"}
        assert v2 == flip[v1]


# --- evaluation ------------------------------------------------------------------------


def make_gold_fixture(table, kb, count):
    """Build records whose gold label follows the forward-chaining oracle."""
    records = []
    atoms = all_atoms(table.properties)
    i = 0
    for obs in atoms:
        expected = entailed_conclusions(table.properties, table.qplus, table.qminus, obs)
        wrong = [a for a in atoms if a not in expected and a[0] != obs[0]]
        for conc in sorted(expected):
            if not wrong:
                continue
            distractor = wrong[i % len(wrong)]
            if i % 2 == 0:
                form = f"qrel{obs} -> qrel{conc} ; qrel{distractor}".replace("'", "")
                gold = 0
            else:
                form = f"qrel{obs} -> qrel{distractor} ; qrel{conc}".replace("'", "")
                gold = 1
            records.append((f"q{i}", form, gold))
            i += 1
            if i >= count:
                return records
    return records


def test_evaluate_gold_fixture_is_perfect(tmp_path, shipped_table, shipped_kb):
    records = make_gold_fixture(shipped_table, shipped_kb, 10)
    data = tmp_path / "fixture.tsv"
    data.write_text("\n".join(f"{rid}\t{form}\t{gold}" for rid, form, gold in records) + "\n")
    report = evaluate(shipped_kb, data)
    assert report.total == 10
    assert report.accuracy == 1.0
    assert report.accuracy_percent == 100.0


def test_evaluate_survives_corrupted_line(tmp_path, shipped_table, shipped_kb):
    records = make_gold_fixture(shipped_table, shipped_kb, 9)
    lines = [f"{rid}\t{form}\t{gold}" for rid, form, gold in records]
    lines.append("q9\tnot a logical form\t0")
    data = tmp_path / "fixture.tsv"
    data.write_text("\n".join(lines) + "\n")
    report = evaluate(shipped_kb, data)
    assert report.total == 10
    assert report.accuracy <= 0.9
    assert len(report.failures) == 1
    assert report.failures[0][0] == "q9"


def test_evaluate_empty_file_errors(tmp_path, shipped_kb):
    data = tmp_path / "empty.tsv"
    data.write_text("")
    with pytest.raises(DatasetError):
        evaluate(shipped_kb, data)


def test_report_render_is_deterministic(tmp_path, shipped_table, shipped_kb):
    records = make_gold_fixture(shipped_table, shipped_kb, 6)
    data = tmp_path / "fixture.tsv"
    data.write_text("\n".join(f"{rid}\t{form}\t{gold}" for rid, form, gold in records) + "\n")
    r1 = evaluate(shipped_kb, data).render()
    r2 = evaluate(shipped_kb, data).render()
    assert r1 == r2
    assert "accuracy: 100.0" in r1
