"""Gold-answer derivation: entailment propagation and negative annotations.

Given a DAG and seed answers (at least the root), answers flow to other
nodes through the consistency rules: a "yes" on a composite question forces
its components, a choose answer forces its branches, and the sound
contrapositives force "no" upward.  "No" answers never force children
except where a rule explicitly does (xor's right operand, the losing choose
branch).  Propagation is a fixed point and never overwrites an assignment;
conflicting forced values raise ContradictionError.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, Iterable, List, Optional, Tuple

from .consistency import FAIL, evaluate_check, instantiate_checks
from .decompose import QuestionDag, TemplateTable, decompose, node_id_for
from .programs import (
    DEFAULT_BANNED_TYPES,
    ActionExists,
    And,
    ChooseObject,
    ChooseTime,
    EqualsObject,
    InteractionExists,
    Localized,
    ObjExists,
    OccursAfter,
    OccursBefore,
    Vocabulary,
    Xor,
    canonical_answer,
    child_programs,
)
from .scenegraph import SceneGraph, absent_objects

PROVENANCES = ("executed", "propagated", "annotated", "unknown")


@dataclass(frozen=True)
class AnswerEntry:
    answer: str  # canonical answer string
    provenance: str

    def __post_init__(self):
        if self.provenance not in PROVENANCES:
            raise ValueError(f"unknown provenance {self.provenance!r}")


AnswerMap = Dict[str, AnswerEntry]


class ContradictionError(Exception):
    """Propagation forced two different answers onto one node."""


def _role_ids(video_id: str, program) -> Dict[str, str]:
    return {role: node_id_for(video_id, sub) for role, sub in child_programs(program)}


def _downward(program, answer: str, roles: Dict[str, str]) -> List[Tuple[str, str]]:
    """Forced (node id, answer) pairs implied by a parent's answer."""
    forced: List[Tuple[str, str]] = []
    if isinstance(program, (InteractionExists, Localized, OccursBefore, OccursAfter)):
        if answer == "yes":
            forced.extend((nid, "yes") for nid in roles.values())
    elif isinstance(program, And):
        if answer == "yes":
            forced.extend((nid, "yes") for nid in roles.values())
    elif isinstance(program, Xor):
        if answer == "yes":
            forced.append((roles["left"], "yes"))
            forced.append((roles["right"], "no"))
    elif isinstance(program, EqualsObject):
        if answer == "yes":
            forced.append((roles["candidate"], "yes"))
            forced.append((roles["query"], program.candidate.object))
    elif isinstance(program, ChooseObject):
        labels = {
            program.option_a.candidate.object: "option_a",
            program.option_b.candidate.object: "option_b",
        }
        if answer in labels:
            winner = labels[answer]
            for role in ("option_a", "option_b"):
                forced.append((roles[role], "yes" if role == winner else "no"))
        elif answer not in ("yes", "no"):
            raise ContradictionError(
                f"choose answer {answer!r} matches neither option"
            )
    elif isinstance(program, ChooseTime):
        if answer in ("before", "after"):
            winner = "option_a" if answer == "before" else "option_b"
            for role in ("option_a", "option_b"):
                forced.append((roles[role], "yes" if role == winner else "no"))
    elif type(program).__name__ in ("LongerChoose", "ShorterChoose"):
        first_actions = {
            program.option_a.first_action: "option_a",
            program.option_b.first_action: "option_b",
        }
        if answer in first_actions:
            winner = first_actions[answer]
            for role in ("option_a", "option_b"):
                forced.append((roles[role], "yes" if role == winner else "no"))
    return forced


def _upward(program, parent_id: str, roles: Dict[str, str],
            assigned: Dict[str, str]) -> List[Tuple[str, str]]:
    """Contrapositive forcings from children onto a parent."""
    forced: List[Tuple[str, str]] = []
    if isinstance(program, (InteractionExists, Localized, OccursBefore, OccursAfter, And)):
        if any(assigned.get(nid) == "no" for nid in roles.values()):
            forced.append((parent_id, "no"))
    elif isinstance(program, Xor):
        if assigned.get(roles["left"]) == "no" or assigned.get(roles["right"]) == "yes":
            forced.append((parent_id, "no"))
    elif isinstance(program, EqualsObject):
        if assigned.get(roles["candidate"]) == "no":
            forced.append((parent_id, "no"))
        query_answer = assigned.get(roles["query"])
        if query_answer is not None and query_answer != program.candidate.object:
            forced.append((parent_id, "no"))
    return forced


def propagate_answers(dag: QuestionDag, seeds: AnswerMap) -> AnswerMap:
    """Fixed-point propagation of seed answers through a DAG.

    The returned map contains every seed unchanged plus entries with
    provenance "propagated" for each node a rule reached.  Nodes no rule
    reaches are absent (callers may treat them as "unknown").
    """
    node_by_id = dag.node_map()
    for qid in seeds:
        if qid not in node_by_id:
            raise KeyError(f"seed answer for unknown node {qid}")

    answers: Dict[str, str] = {}
    provenance: Dict[str, str] = {}

    def assign(qid: str, answer: str, source: str):
        answer = canonical_answer(answer)
        if qid in answers:
            if answers[qid] != answer:
                raise ContradictionError(
                    f"node {qid} forced to {answer!r} but already {answers[qid]!r}"
                )
            return False
        answers[qid] = answer
        provenance[qid] = source
        return True

    for qid, entry in seeds.items():
        assign(qid, entry.answer, entry.provenance)

    parents_of: Dict[str, List[str]] = {}
    for node in dag.nodes:
        for _, sub in child_programs(node.program):
            parents_of.setdefault(node_id_for(dag.video_id, sub), []).append(node.id)

    changed = True
    while changed:
        changed = False
        for node in dag.nodes:
            roles = _role_ids(dag.video_id, node.program)
            if node.id in answers:
                for qid, forced in _downward(node.program, answers[node.id], roles):
                    if assign(qid, forced, "propagated"):
                        changed = True
            if node.id not in answers:
                for qid, forced in _upward(node.program, node.id, roles, answers):
                    if assign(qid, forced, "propagated"):
                        changed = True

    return {qid: AnswerEntry(answer=answers[qid], provenance=provenance[qid]) for qid in answers}


def audit_gold(
    dag: QuestionDag,
    answers: AnswerMap,
    banned_types: frozenset = DEFAULT_BANNED_TYPES,
) -> List[dict]:
    """Consistency violations of a gold answer set; empty when clean."""
    predictions = {qid: entry.answer for qid, entry in answers.items()}
    violations = []
    for template in instantiate_checks(dag, banned_types):
        instance = evaluate_check(template, predictions)
        if instance.verdict == FAIL:
            violations.append(
                {
                    "dag_root": dag.root_id,
                    "rule_id": template.rule_id,
                    "parent": template.parent,
                    "children": list(template.children),
                    "verdict": instance.verdict,
                }
            )
    return violations


# ---------------------------------------------------------------------------
# Negative annotations


@dataclass(frozen=True)
class NegativeAnnotation:
    """Objects known not to appear anywhere in a video."""

    video_id: str
    absent_objects: Tuple[str, ...]


def load_negative_annotations(path, vocab: Optional[Vocabulary] = None):
    """Read annotation rows ({"video_id", "absent_objects": [...]}) from
    JSONL; labels are canonicalized and optionally vocabulary-checked."""
    from . import jsonl

    annotations = []
    for row in jsonl.read_jsonl(path):
        objects = tuple(canonical_answer(o) for o in row["absent_objects"])
        if vocab is not None:
            for obj in objects:
                if obj not in vocab.objects:
                    raise ValueError(f"unknown object label {obj!r} in {path}")
                if obj in vocab.never_absent:
                    raise ValueError(f"{obj!r} is on the always-present list")
        annotations.append(
            NegativeAnnotation(video_id=str(row["video_id"]), absent_objects=objects)
        )
    return annotations


def annotate_absent_objects(
    g: SceneGraph, vocab: Vocabulary, limit: Optional[int] = None
) -> NegativeAnnotation:
    """Closed-world stand-in for a human absent-object annotation pass."""
    absent = sorted(absent_objects(g, vocab.objects, vocab.never_absent))
    if limit is not None:
        absent = absent[:limit]
    return NegativeAnnotation(video_id=g.video_id, absent_objects=tuple(absent))


def apply_negative_annotations(
    ann: NegativeAnnotation,
    g: SceneGraph,
    vocab: Vocabulary,
    max_invalid_actions: int = 2,
) -> List[Tuple[object, str]]:
    """Programs answered "no" that entailment alone cannot derive.

    Emits one existence question per annotated absent object, plus
    temporally localized existence questions anchored on actions that never
    occur in the video (an invalid anchor forces a "no").  Returns
    (program, answer) pairs; answers are always "no".
    """
    if ann.video_id != g.video_id:
        raise ValueError(f"annotation video {ann.video_id} does not match {g.video_id}")
    out: List[Tuple[object, str]] = []
    for obj in ann.absent_objects:
        out.append((ObjExists(obj), "no"))

    present_actions = {a.label for a in g.actions}
    invalid_actions = sorted(vocab.actions - present_actions)[:max_invalid_actions]
    anchored_objects = sorted(
        o for o in g.objects_present() if o not in vocab.never_absent
    )
    if not anchored_objects:
        anchored_objects = list(ann.absent_objects)
    for index, action in enumerate(invalid_actions):
        if not anchored_objects:
            break
        obj = anchored_objects[index % len(anchored_objects)]
        localizer = "before" if index % 2 == 0 else "after"
        program = Localized(
            body=ObjExists(obj),
            localizer=localizer,
            cond1=ActionExists(action),
        )
        out.append((program, "no"))
    return out
