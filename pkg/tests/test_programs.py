import pytest
from hypothesis import given, settings, strategies as st

from qdecomp.programs import (
    ActionExists,
    And,
    Answer,
    ChooseObject,
    ChooseTime,
    EqualsObject,
    First,
    InteractionExists,
    Last,
    Localized,
    LongerChoose,
    LongerThan,
    Longest,
    ObjExists,
    ObjectsQuery,
    ActionsQuery,
    OccursAfter,
    OccursBefore,
    ProgramParseError,
    ProgramValidationError,
    RelationExists,
    ShorterChoose,
    ShorterThan,
    Shortest,
    Xor,
    canonical_key,
    classify,
    parse_program,
    render_program,
    validate_labels,
)

OBJECTS = ["person", "dish", "phone", "bottle", "book"]
RELATIONS = ["touching", "holding", "carrying"]
ACTIONS = ["walking through the doorway", "smiling at something", "looking in the mirror"]


# ---------------------------------------------------------------------------
# Hypothesis program sampler


obj_leaf = st.sampled_from(OBJECTS).map(ObjExists)
rel_leaf = st.sampled_from(RELATIONS).map(RelationExists)
act_leaf = st.sampled_from(ACTIONS).map(ActionExists)

interaction = st.builds(InteractionExists, obj_leaf, rel_leaf, obj_leaf)
objects_query = st.builds(ObjectsQuery, obj_leaf, rel_leaf)
actions_query = st.just(ActionsQuery())

bool_atom = st.one_of(obj_leaf, rel_leaf, act_leaf, interaction)

localizer_one = st.sampled_from(["before", "after", "while"])


def localized(body_strategy):
    simple = st.builds(
        lambda body, loc, cond: Localized(body=body, localizer=loc, cond1=cond),
        body_strategy,
        localizer_one,
        act_leaf,
    )
    between = st.builds(
        lambda body, c1, c2: Localized(body=body, localizer="between", cond1=c1, cond2=c2),
        body_strategy,
        act_leaf,
        act_leaf,
    )
    return st.one_of(simple, between)


boolean_program = st.recursive(
    bool_atom,
    lambda inner: st.one_of(
        st.builds(And, inner, inner),
        st.builds(Xor, inner, inner),
        localized(inner),
        st.builds(OccursBefore, inner, inner),
        st.builds(OccursAfter, inner, inner),
    ),
    max_leaves=6,
)

set_query = st.one_of(objects_query, actions_query, localized(objects_query), localized(actions_query))
selection = st.one_of(
    st.builds(First, set_query),
    st.builds(Last, set_query),
    st.builds(Longest, st.one_of(actions_query, localized(actions_query))),
    st.builds(Shortest, st.one_of(actions_query, localized(actions_query))),
)
equals = st.builds(EqualsObject, obj_leaf, selection)
longer_than = st.builds(LongerThan, st.sampled_from(ACTIONS), st.sampled_from(ACTIONS))
shorter_than = st.builds(ShorterThan, st.sampled_from(ACTIONS), st.sampled_from(ACTIONS))
choose = st.one_of(
    st.builds(ChooseObject, equals, equals),
    st.builds(
        ChooseTime,
        st.builds(OccursBefore, act_leaf, act_leaf),
        st.builds(OccursAfter, act_leaf, act_leaf),
    ),
    st.builds(LongerChoose, longer_than, longer_than),
    st.builds(ShorterChoose, shorter_than, shorter_than),
)

any_program = st.one_of(
    boolean_program, set_query, selection, equals, longer_than, shorter_than, choose
)


# ---------------------------------------------------------------------------
# Parsing


def test_paper_example_parses_to_expected_ast():
    text = "first(objects(objExists(person), relationExists(touching)))"
    assert parse_program(text) == First(
        ObjectsQuery(ObjExists("person"), RelationExists("touching"))
    )


def test_single_leaf():
    assert parse_program("objExists(person)") == ObjExists("person")


def test_arity_mismatch_rejected():
    with pytest.raises(ProgramParseError, match="expects 2 argument"):
        parse_program("first(objects(objExists(person)))")


def test_unknown_function_rejected():
    with pytest.raises(ProgramParseError, match="unknown function"):
        parse_program("frobnicate(objExists(person))")


def test_syntax_error_reports_position():
    with pytest.raises(ProgramParseError) as err:
        parse_program("objExists(person")
    assert err.value.position >= 0


def test_empty_text_rejected():
    with pytest.raises(ProgramParseError):
        parse_program("   ")


def test_trailing_garbage_rejected():
    with pytest.raises(ProgramParseError, match="trailing"):
        parse_program("objExists(person) extra")


def test_unknown_label_rejected(tiny_vocab):
    with pytest.raises(ProgramValidationError, match="unknown object label"):
        parse_program("objExists(zeppelin)", tiny_vocab)
    with pytest.raises(ProgramValidationError, match="unknown action label"):
        parse_program("longerThan(flying, swimming)", tiny_vocab)


def test_labels_keep_internal_spaces():
    p = parse_program("actionExists(looking in the mirror)")
    assert p == ActionExists("looking in the mirror")
    assert render_program(p) == "actionExists(looking in the mirror)"


def test_whitespace_insensitive_between_tokens():
    a = parse_program("and( actionExists(smiling at something) ,actionExists(washing a cup) )")
    b = parse_program("and(actionExists(smiling at something), actionExists(washing a cup))")
    assert a == b


def test_structural_slot_validation():
    with pytest.raises(ProgramValidationError):
        parse_program("first(objExists(person))")  # body must be a set query
    with pytest.raises(ProgramParseError, match="expects a label"):
        parse_program("objExists(objExists(person))")
    with pytest.raises(ProgramValidationError, match="between requires two"):
        Localized(body=ObjExists("dish"), localizer="between", cond1=ActionExists("x"))


# ---------------------------------------------------------------------------
# Round trips and canonical keys


@given(any_program)
@settings(max_examples=300, deadline=None)
def test_render_parse_round_trip(program):
    assert parse_program(render_program(program)) == program


@given(any_program)
@settings(max_examples=300, deadline=None)
def test_classify_stable_under_round_trip(program):
    assert classify(parse_program(render_program(program))) == classify(program)


@given(any_program, any_program)
@settings(max_examples=200, deadline=None)
def test_canonical_key_injective(a, b):
    if a == b:
        assert canonical_key(a) == canonical_key(b)
    else:
        assert canonical_key(a) != canonical_key(b)


def test_canonical_key_distinguishes_operand_order():
    # xor reads "left but not right", so operand order is meaningful; and
    # keeps textual order too (no commutative folding).
    x = ActionExists("smiling at something")
    y = ActionExists("washing a cup")
    assert canonical_key(And(x, y)) != canonical_key(And(y, x))
    assert canonical_key(Xor(x, y)) != canonical_key(Xor(y, x))
    assert canonical_key(ObjExists("person")) != canonical_key(ObjExists("dish"))


def test_canonical_key_deterministic_across_parses():
    text = "first(objects(objExists(person), relationExists(touching)))"
    assert canonical_key(parse_program(text)) == canonical_key(parse_program(text))


# ---------------------------------------------------------------------------
# Classification


def test_classify_paper_examples():
    assert classify(parse_program("objExists(doorway)")).name == "objectExists"
    loc = parse_program("after(objExists(phone), actionExists(looking in the mirror))")
    assert classify(loc).name == "existsTemporalLoc"
    oq = parse_program("objects(objExists(person), relationExists(touching))")
    qt = classify(oq)
    assert qt.name == "objectsQuery" and qt.banned


def test_classify_variants():
    cases = {
        "relationExists(touching)": "relationExists",
        "actionExists(smiling at something)": "relationExists",
        "interactionExists(objExists(person), relationExists(touching), objExists(dish))": "interaction",
        "while(interactionExists(objExists(person), relationExists(touching), objExists(dish)), actionExists(smiling at something))": "interactionTemporalLoc",
        "first(objects(objExists(person), relationExists(touching)))": "firstLast",
        "longest(actions())": "longestShortestAction",
        "and(actionExists(smiling at something), actionExists(washing a cup))": "conjunction",
        "equals(objExists(dish), first(objects(objExists(person), relationExists(touching))))": "equals",
        "longerThan(washing a cup, smiling at something)": "equals",
        "occursBefore(actionExists(washing a cup), actionExists(smiling at something))": "existsTemporalLoc",
        "actions()": "actionTemporalLoc",
        "before(actions(), actionExists(smiling at something))": "actionTemporalLoc",
    }
    for text, expected in cases.items():
        assert classify(parse_program(text)).name == expected, text


def test_banned_flag_follows_ban_list():
    oq = parse_program("objects(objExists(person), relationExists(touching))")
    assert classify(oq).banned
    assert not classify(oq, banned_types=frozenset()).banned
    assert classify(parse_program("longest(actions())")).name == "longestShortestAction"
    assert not classify(parse_program("longest(actions())")).banned


# ---------------------------------------------------------------------------
# Answers


def test_answer_alphabet():
    assert Answer.from_bool(True).text == "yes"
    assert Answer.label(" Dish ").text == "dish"
    assert Answer.temporal("before").text == "before"
    with pytest.raises(ValueError):
        Answer("bool", "maybe")
    with pytest.raises(ValueError):
        Answer("temporal", "during")
    with pytest.raises(ValueError):
        Answer("label", "")


def test_validate_labels_accepts_known(tiny_vocab):
    p = parse_program("interactionExists(objExists(person), relationExists(touching), objExists(dish))")
    validate_labels(p, tiny_vocab)
