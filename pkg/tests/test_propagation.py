import pytest

from qdecomp.corpus import derive_gold
from qdecomp.decompose import decompose
from qdecomp.programs import parse_program
from qdecomp.propagation import (
    AnswerEntry,
    ContradictionError,
    NegativeAnnotation,
    annotate_absent_objects,
    apply_negative_annotations,
    audit_gold,
    propagate_answers,
)
from qdecomp.scenegraph import execute


def seeded(dag, answer):
    return {dag.root_id: AnswerEntry(answer=answer, provenance="executed")}


def answers_by_question(dag, result):
    out = {}
    for node in dag.nodes:
        entry = result.get(node.id)
        out[node.question] = entry.answer if entry else None
    return out


XOR_BLANKET = (
    "xor(interactionExists(objExists(person), relationExists(throwing), objExists(blanket)),"
    " interactionExists(objExists(person), relationExists(holding), objExists(blanket)))"
)


def test_xor_yes_forces_left_yes_right_no(templates):
    dag = decompose(parse_program(XOR_BLANKET), "v1", templates)
    got = answers_by_question(dag, propagate_answers(dag, seeded(dag, "yes")))
    assert got["Is the person throwing a blanket but not holding a blanket?"] == "yes"
    assert got["Is a person throwing a blanket?"] == "yes"
    assert got["Is a person holding a blanket?"] == "no"
    # the winning branch recursively turns yes
    assert got["Does a person exist?"] == "yes"
    assert got["Is the person throwing something?"] == "yes"
    assert got["Does a blanket exist?"] == "yes"
    # nothing forces the losing branch's relation question
    assert got["Is the person holding something?"] is None


INTERACTION = "interactionExists(objExists(person), relationExists(touching), objExists(dish))"


def test_interaction_no_does_not_reach_children(templates):
    dag = decompose(parse_program(INTERACTION), "v1", templates)
    result = propagate_answers(dag, seeded(dag, "no"))
    assert set(result) == {dag.root_id}


def test_interaction_yes_reaches_all_children(templates):
    dag = decompose(parse_program(INTERACTION), "v1", templates)
    result = propagate_answers(dag, seeded(dag, "yes"))
    assert len(result) == 4
    assert all(e.answer == "yes" for e in result.values())


def test_child_no_forces_parent_no_upward(templates):
    dag = decompose(parse_program(INTERACTION), "v1", templates)
    dish_exists = next(n for n in dag.nodes if n.question == "Does a dish exist?")
    result = propagate_answers(
        dag, {dish_exists.id: AnswerEntry(answer="no", provenance="annotated")}
    )
    assert result[dag.root_id].answer == "no"
    assert result[dag.root_id].provenance == "propagated"


def test_equals_yes_assigns_query_label(templates):
    program = parse_program(
        "equals(objExists(dish), first(objects(objExists(person), relationExists(touching))))"
    )
    dag = decompose(program, "v1", templates)
    got = answers_by_question(dag, propagate_answers(dag, seeded(dag, "yes")))
    assert got["What is the first object that the person is touching?"] == "dish"
    assert got["Does a dish exist?"] == "yes"


def test_choose_object_splits_branches(templates):
    first = "first(objects(objExists(person), relationExists(touching)))"
    program = parse_program(
        f"chooseObject(equals(objExists(dish), {first}), equals(objExists(phone), {first}))"
    )
    dag = decompose(program, "v1", templates)
    got = answers_by_question(dag, propagate_answers(dag, seeded(dag, "dish")))
    assert got["Is a dish the first object that the person is touching?"] == "yes"
    assert got["Is a phone the first object that the person is touching?"] == "no"
    assert got["What is the first object that the person is touching?"] == "dish"
    assert got["Does a dish exist?"] == "yes"


def test_choose_time_splits_branches(templates):
    walk = "actionExists(walking through the doorway)"
    smile = "actionExists(smiling at something)"
    program = parse_program(
        f"chooseTime(occursBefore({walk}, {smile}), occursAfter({walk}, {smile}))"
    )
    dag = decompose(program, "v1", templates)
    got = answers_by_question(dag, propagate_answers(dag, seeded(dag, "before")))
    assert (
        got["Is the person walking through the doorway before smiling at something?"] == "yes"
    )
    assert (
        got["Is the person walking through the doorway after smiling at something?"] == "no"
    )
    # the before-branch recursion reaches the action questions
    assert got["Is the person walking through the doorway?"] == "yes"
    assert got["Is the person smiling at something?"] == "yes"


def test_between_yes_forces_both_anchor_conditions(templates):
    program = parse_program(
        "between(objExists(dish), actionExists(washing a cup), actionExists(smiling at something))"
    )
    dag = decompose(program, "v1", templates)
    result = propagate_answers(dag, seeded(dag, "yes"))
    assert len(result) == 4
    assert all(e.answer == "yes" for e in result.values())


def test_choose_no_rule_for_unmatched_label(templates):
    first = "first(objects(objExists(person), relationExists(touching)))"
    program = parse_program(
        f"chooseObject(equals(objExists(dish), {first}), equals(objExists(phone), {first}))"
    )
    dag = decompose(program, "v1", templates)
    with pytest.raises(ContradictionError):
        propagate_answers(dag, seeded(dag, "bottle"))


def test_contradictory_seeds_raise(templates):
    dag = decompose(parse_program(INTERACTION), "v1", templates)
    dish_exists = next(n for n in dag.nodes if n.question == "Does a dish exist?")
    seeds = {
        dag.root_id: AnswerEntry(answer="yes", provenance="executed"),
        dish_exists.id: AnswerEntry(answer="no", provenance="annotated"),
    }
    with pytest.raises(ContradictionError):
        propagate_answers(dag, seeds)


def test_propagation_never_overwrites_seeds(templates):
    dag = decompose(parse_program(INTERACTION), "v1", templates)
    seeds = seeded(dag, "yes")
    result = propagate_answers(dag, seeds)
    assert result[dag.root_id] == seeds[dag.root_id]
    assert set(seeds).issubset(set(result))


def test_propagation_idempotent(templates):
    dag = decompose(parse_program(XOR_BLANKET), "v1", templates)
    once = propagate_answers(dag, seeded(dag, "yes"))
    twice = propagate_answers(dag, once)
    assert twice == once


def test_unknown_seed_node_rejected(templates):
    dag = decompose(parse_program(INTERACTION), "v1", templates)
    with pytest.raises(KeyError):
        propagate_answers(dag, {"deadbeef": AnswerEntry(answer="yes", provenance="executed")})


# ---------------------------------------------------------------------------
# Agreement with the executor


def test_propagated_answers_match_execution(corpus):
    graphs = {g.video_id: g for g in corpus["graphs"]}
    checked = 0
    for dag in corpus["dags"]:
        graph = graphs[dag.video_id]
        root_answer = execute(dag.node(dag.root_id).program, graph)
        result = propagate_answers(dag, seeded(dag, root_answer.text))
        for node in dag.nodes:
            if node.id in result:
                checked += 1
                assert execute(node.program, graph).text == result[node.id].answer
    assert checked > 1000


# ---------------------------------------------------------------------------
# Gold audit


def test_oracle_gold_passes_audit(corpus):
    for dag in corpus["dags"]:
        answers = {
            n.id: AnswerEntry(answer=corpus["gold"][n.id].answer, provenance="executed")
            for n in dag.nodes
            if n.id in corpus["gold"]
        }
        assert audit_gold(dag, answers) == []


def test_corrupted_child_is_reported(templates):
    dag = decompose(parse_program(INTERACTION), "v1", templates)
    answers = {n.id: AnswerEntry(answer="yes", provenance="executed") for n in dag.nodes}
    dish_exists = next(n for n in dag.nodes if n.question == "Does a dish exist?")
    answers[dish_exists.id] = AnswerEntry(answer="no", provenance="executed")
    violations = audit_gold(dag, answers)
    rule_ids = sorted(v["rule_id"] for v in violations)
    # one corrupted answer breaks the yes-rule and the implied-no
    # contrapositive; both report (double counting is deliberate)
    assert rule_ids == ["interaction-no", "interaction-yes"]
    assert all(v["parent"] == dag.root_id for v in violations)


def test_empty_answer_map_passes_vacuously(templates):
    dag = decompose(parse_program(INTERACTION), "v1", templates)
    assert audit_gold(dag, {}) == []


# ---------------------------------------------------------------------------
# Negative annotations


def test_absent_object_negatives(sg1, vocab, templates):
    ann = annotate_absent_objects(sg1, vocab)
    assert "doorknob" in ann.absent_objects
    assert not set(ann.absent_objects) & vocab.never_absent
    pairs = apply_negative_annotations(ann, sg1, vocab)
    assert all(answer == "no" for _, answer in pairs)
    programs = {str(p) for p, _ in pairs}
    # plain existence negatives for each absent object
    from qdecomp.programs import ObjExists, render_program

    rendered = {render_program(p) for p, _ in pairs}
    assert "objExists(doorknob)" in rendered
    # invalid-anchor temporal negatives anchored on actions missing from the video
    present = {"walking through the doorway", "smiling at something"}
    localized = [r for r in rendered if r.startswith(("before(", "after("))]
    assert localized
    assert all(not any(a in r for a in present) for r in localized)
    # and every negative really executes to "no"
    for program, answer in pairs:
        assert execute(program, sg1).text == answer == "no"


def test_empty_absent_list_yields_only_invalid_anchor_negatives(sg1, vocab):
    ann = NegativeAnnotation(video_id=sg1.video_id, absent_objects=())
    pairs = apply_negative_annotations(ann, sg1, vocab, max_invalid_actions=0)
    assert pairs == []


def test_video_mismatch_rejected(sg1, vocab):
    ann = NegativeAnnotation(video_id="other", absent_objects=("doorknob",))
    with pytest.raises(ValueError):
        apply_negative_annotations(ann, sg1, vocab)


def test_derive_gold_marks_unknown_nodes(templates, sg1):
    # a choose whose options tie has no defined root answer; execution covers
    # the children and propagation cannot reach the root
    first = "first(objects(objExists(person), relationExists(touching)))"
    program = parse_program(
        f"chooseObject(equals(objExists(phone), {first}), equals(objExists(bottle), {first}))"
    )
    dag = decompose(program, "v1", templates)
    gold = derive_gold(dag, sg1)
    assert dag.root_id not in gold
    assert len(gold) == len(dag.nodes) - 1
