"""Synthetic question corpus: sampling, gold derivation, record streams.

For each video the sampler emits a deterministic battery of root questions
spanning every composition rule, with both positive and negative instances
(absent objects and actions supply the negatives under the closed world).
Temporal localizers rotate across videos so corpus-wide coverage includes
all four window kinds for both exists-style and interaction-style bodies.
Gold answers come from executing every DAG node; roots any node of which
fails to execute are dropped, so generated corpora are fully answerable.
"""

from __future__ import annotations

import random
from typing import Dict, Iterable, Iterator, List, Optional, Tuple

from .decompose import QuestionDag, TemplateTable, decompose, default_templates
from .programs import (
    ActionExists,
    ActionsQuery,
    And,
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
    OccursAfter,
    OccursBefore,
    RelationExists,
    ShorterChoose,
    ShorterThan,
    Shortest,
    Vocabulary,
    Xor,
    YES,
    canonical_key,
    render_program,
)
from .propagation import (
    AnswerEntry,
    AnswerMap,
    ContradictionError,
    annotate_absent_objects,
    apply_negative_annotations,
    propagate_answers,
)
from .scenegraph import SceneGraph, UndefinedAnswerError, execute

LOCALIZER_CYCLE = ("after", "before", "while", "between")


def derive_gold(dag: QuestionDag, graph: SceneGraph) -> AnswerMap:
    """Gold answers for every derivable node of a DAG.

    Every node is executed against the scene graph; if any node has no
    defined answer, entailment propagation from the executed nodes fills
    what the rules can reach.  Unreached nodes stay absent ("unknown").
    """
    executed: AnswerMap = {}
    for node in dag.nodes:
        try:
            answer = execute(node.program, graph)
        except UndefinedAnswerError:
            continue
        executed[node.id] = AnswerEntry(answer=answer.text, provenance="executed")
    if len(executed) == len(dag.nodes):
        return executed
    try:
        return propagate_answers(dag, executed)
    except ContradictionError:
        return executed


def _fully_executable(dag: QuestionDag, graph: SceneGraph) -> bool:
    for node in dag.nodes:
        try:
            execute(node.program, graph)
        except UndefinedAnswerError:
            return False
    return True


def _interaction(span) -> InteractionExists:
    return InteractionExists(
        subject=ObjExists(span.subject),
        relation=RelationExists(span.relation),
        object=ObjExists(span.object),
    )


def _localized(body, localizer: str, anchors: Tuple[str, ...]) -> Localized:
    return Localized(
        body=body,
        localizer=localizer,
        cond1=ActionExists(anchors[0]),
        cond2=ActionExists(anchors[1]) if localizer == "between" else None,
    )


def sample_video_programs(
    graph: SceneGraph, vocab: Vocabulary, video_index: int, rng: random.Random
) -> List[object]:
    """Deterministic battery of root programs for one video."""
    programs: List[object] = []
    tuples = sorted(graph.relationships, key=lambda s: (s.relation, s.object))
    actions = sorted(graph.actions, key=lambda a: (a.start, a.label))
    present_objects = sorted({s.object for s in tuples})
    absent_objs = sorted(
        vocab.objects - graph.objects_present() - vocab.never_absent
    )
    absent_acts = sorted(vocab.actions - {a.label for a in actions})

    # Interactions: two positives plus one absent-object negative.
    for span in tuples[:2]:
        programs.append(_interaction(span))
    if tuples and absent_objs:
        programs.append(
            InteractionExists(
                subject=ObjExists(tuples[0].subject),
                relation=RelationExists(tuples[0].relation),
                object=ObjExists(absent_objs[0]),
            )
        )

    # Conjunctions over action existence; negatives keep "no" the majority
    # parent answer while the operand questions stay majority "yes".
    if len(actions) >= 2:
        a1, a2 = actions[0].label, actions[1].label
        programs.append(And(ActionExists(a1), ActionExists(a2)))
        programs.append(Xor(ActionExists(a1), ActionExists(a2)))
        programs.append(Xor(ActionExists(a2), ActionExists(a1)))
        if absent_acts:
            bogus = absent_acts[0]
            programs.append(And(ActionExists(a1), ActionExists(bogus)))
            programs.append(Xor(ActionExists(a1), ActionExists(bogus)))

    # Temporal localization with rotating localizers: one satisfied and one
    # absent-body instance each for exists-style and interaction-style bodies.
    def anchors_for(localizer: str) -> Optional[Tuple[str, ...]]:
        if localizer == "between":
            if len(actions) < 2:
                return None
            tuple_frames = {f for span in tuples for f in span.frames}
            fallback = None
            for i in range(len(actions)):
                for j in range(i + 1, len(actions)):
                    gap = range(actions[i].end + 1, actions[j].start)
                    if not gap:
                        continue
                    pair = (actions[i].label, actions[j].label)
                    fallback = fallback or pair
                    if tuple_frames.intersection(gap):
                        return pair
            return fallback or (actions[0].label, actions[1].label)
        if not actions:
            return None
        if localizer == "after":
            return (actions[0].label,)
        if localizer == "before":
            return (actions[-1].label,)
        longest_action = max(actions, key=lambda a: (a.duration, a.label))
        return (longest_action.label,)

    loc1 = LOCALIZER_CYCLE[video_index % 4]
    anchors = anchors_for(loc1)
    if anchors and present_objects:
        hit = None
        for obj in present_objects:
            candidate = _localized(ObjExists(obj), loc1, anchors)
            if execute(candidate, graph) == YES:
                hit = candidate
                break
        programs.append(hit or _localized(ObjExists(present_objects[0]), loc1, anchors))
        if absent_objs:
            programs.append(_localized(ObjExists(absent_objs[0]), loc1, anchors))

    loc2 = LOCALIZER_CYCLE[(video_index + 1) % 4]
    anchors = anchors_for(loc2)
    if anchors and tuples:
        hit = None
        for span in tuples:
            candidate = _localized(_interaction(span), loc2, anchors)
            if execute(candidate, graph) == YES:
                hit = candidate
                break
        programs.append(hit or _localized(_interaction(tuples[0]), loc2, anchors))
        if absent_objs:
            programs.append(
                _localized(
                    InteractionExists(
                        subject=ObjExists(tuples[0].subject),
                        relation=RelationExists(tuples[0].relation),
                        object=ObjExists(absent_objs[0]),
                    ),
                    loc2,
                    anchors,
                )
            )

    # Selection over objects, equality checks and the object/time chooses.
    if tuples:
        relation = tuples[0].relation
        query_first = First(ObjectsQuery(ObjExists(tuples[0].subject), RelationExists(relation)))
        query_last = Last(ObjectsQuery(ObjExists(tuples[0].subject), RelationExists(relation)))
        true_first = execute(query_first, graph).value
        true_last = execute(query_last, graph).value
        programs.append(query_first)
        programs.append(query_last)
        programs.append(EqualsObject(ObjExists(true_first), query_first))
        programs.append(EqualsObject(ObjExists(true_last), query_last))
        decoys = [o for o in present_objects if o != true_first] or [
            o for o in absent_objs if o != true_first
        ]
        if decoys:
            decoy = decoys[0]
            programs.append(EqualsObject(ObjExists(decoy), query_first))
            programs.append(
                ChooseObject(
                    option_a=EqualsObject(ObjExists(true_first), query_first),
                    option_b=EqualsObject(ObjExists(decoy), query_first),
                )
            )

    if len(actions) >= 2:
        early, late = actions[0].label, actions[1].label
        x, y = (early, late) if video_index % 2 == 0 else (late, early)
        programs.append(
            ChooseTime(
                before_option=OccursBefore(ActionExists(x), ActionExists(y)),
                after_option=OccursAfter(ActionExists(x), ActionExists(y)),
            )
        )

    # Action-duration questions.
    if actions:
        programs.append(Longest(ActionsQuery()))
        programs.append(Shortest(ActionsQuery()))
    if len(actions) >= 2:
        by_duration = sorted(actions, key=lambda a: (a.duration, a.label))
        shortest_action = by_duration[0].label
        longest_action = by_duration[-1].label
        if by_duration[0].duration != by_duration[-1].duration:
            programs.append(
                LongerChoose(
                    option_a=LongerThan(longest_action, shortest_action),
                    option_b=LongerThan(shortest_action, longest_action),
                )
            )
            programs.append(
                ShorterChoose(
                    option_a=ShorterThan(shortest_action, longest_action),
                    option_b=ShorterThan(longest_action, shortest_action),
                )
            )
    return programs


def build_video_corpus(
    graph: SceneGraph,
    vocab: Vocabulary,
    templates: TemplateTable,
    video_index: int,
    seed: int = 0,
    max_negative_objects: int = 2,
    annotation=None,
) -> Tuple[List[dict], List[QuestionDag]]:
    """Question records and DAGs for one video, gold answers attached.

    ``annotation`` overrides the closed-world absent-object derivation with
    an externally supplied negative annotation for this video.
    """
    rng = random.Random(seed * 1000003 + video_index)
    records: Dict[str, dict] = {}
    dags: List[QuestionDag] = []
    seen_roots = set()

    def add_root(program, root_provenance: Optional[str] = None):
        key = canonical_key(program)
        if key in seen_roots:
            return
        seen_roots.add(key)
        dag = decompose(program, graph.video_id, templates)
        if not _fully_executable(dag, graph):
            return
        gold = derive_gold(dag, graph)
        dags.append(dag)
        for node in dag.nodes:
            entry = gold.get(node.id)
            provenance = entry.provenance if entry else "unknown"
            if root_provenance and node.id == dag.root_id:
                provenance = root_provenance
            if node.id in records:
                continue
            records[node.id] = {
                "id": node.id,
                "video_id": graph.video_id,
                "program": render_program(node.program),
                "question": node.question,
                "qtype": node.qtype,
                "answer": entry.answer if entry else None,
                "answer_provenance": provenance,
            }

    for program in sample_video_programs(graph, vocab, video_index, rng):
        add_root(program)

    if annotation is None:
        annotation = annotate_absent_objects(graph, vocab, limit=max_negative_objects)
    for program, answer in apply_negative_annotations(annotation, graph, vocab):
        add_root(program, root_provenance="annotated")

    return list(records.values()), dags


def build_corpus(
    graphs: Iterable[SceneGraph],
    vocab: Vocabulary,
    templates: Optional[TemplateTable] = None,
    seed: int = 0,
    annotations: Optional[Dict[str, object]] = None,
) -> Iterator[Tuple[List[dict], List[QuestionDag]]]:
    """Per-video (records, dags) stream over a scene-graph corpus."""
    if templates is None:
        templates = default_templates()
    for index, graph in enumerate(graphs):
        annotation = annotations.get(graph.video_id) if annotations else None
        yield build_video_corpus(
            graph, vocab, templates, index, seed=seed, annotation=annotation
        )
