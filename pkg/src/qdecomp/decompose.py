"""Recursive question decomposition into DAGs of sub-questions.

Every sub-program of a question program becomes a node; an edge links each
question to the sub-questions it is composed from, labeled with one of the
13 composition rules.  Natural-language surface forms come from a template
table (data, not code): each program variant has a question template and an
indirect-reference template, and parents splice their children's indirect
references into their own templates.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from importlib import resources
from typing import Dict, List, Optional, Tuple

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
    Xor,
    DEFAULT_BANNED_TYPES,
    canonical_key,
    child_programs,
    classify,
    parse_program,
)

COMPOSITION_RULES = (
    "interaction",
    "first",
    "last",
    "equals",
    "and",
    "xor",
    "choose",
    "longerChoose",
    "shorterChoose",
    "after",
    "before",
    "while",
    "between",
)


class TemplateError(KeyError):
    """Missing or malformed template entry (configuration error)."""


class TemplateTable:
    """Question and indirect-reference templates per program variant."""

    def __init__(self, data: dict):
        self.variants = dict(data.get("variants", {}))
        self.localizers = dict(data.get("localizers", {}))

    def entry(self, name: str) -> dict:
        try:
            return self.variants[name]
        except KeyError:
            raise TemplateError(f"no template entry for variant {name!r}") from None

    def localizer_phrase(self, name: str) -> str:
        try:
            return self.localizers[name]
        except KeyError:
            raise TemplateError(f"no localizer phrase for {name!r}") from None


def load_templates(path) -> TemplateTable:
    with open(path, "r", encoding="utf-8") as fh:
        return TemplateTable(json.load(fh))


def default_templates() -> TemplateTable:
    text = resources.files("qdecomp").joinpath("data/templates.json").read_text("utf-8")
    return TemplateTable(json.loads(text))


def _fill(template: str, **slots) -> str:
    try:
        return template.format(**slots)
    except (KeyError, IndexError) as exc:
        raise TemplateError(f"template {template!r} has unknown placeholder: {exc}") from None


_VARIANT_NAMES = {
    ObjExists: "objExists",
    RelationExists: "relationExists",
    ActionExists: "actionExists",
    InteractionExists: "interactionExists",
    ObjectsQuery: "objects",
    ActionsQuery: "actions",
    First: "first",
    Last: "last",
    Longest: "longest",
    Shortest: "shortest",
    And: "and",
    Xor: "xor",
    EqualsObject: "equals",
    LongerThan: "longerThan",
    ShorterThan: "shorterThan",
    OccursBefore: "occursBefore",
    OccursAfter: "occursAfter",
    ChooseObject: "chooseObject",
    ChooseTime: "chooseTime",
    LongerChoose: "longerChoose",
    ShorterChoose: "shorterChoose",
}


def variant_name(p) -> str:
    if isinstance(p, Localized):
        return "localized"
    try:
        return _VARIANT_NAMES[type(p)]
    except KeyError:
        raise TemplateError(f"no variant name for {type(p).__name__}") from None


def composition_rule_for(p) -> Optional[str]:
    """Composition rule labeling the edges from a parent node to its
    sub-questions; None for leaves.  A pure function of the root variant."""
    if isinstance(p, (InteractionExists, ObjectsQuery)):
        return "interaction"
    # Longest/shortest select an extremal element from an open set, the same
    # composition family as first/last.
    if isinstance(p, (First, Longest)):
        return "first"
    if isinstance(p, (Last, Shortest)):
        return "last"
    if isinstance(p, And):
        return "and"
    if isinstance(p, Xor):
        return "xor"
    if isinstance(p, EqualsObject):
        return "equals"
    if isinstance(p, (ChooseObject, ChooseTime)):
        return "choose"
    if isinstance(p, LongerChoose):
        return "longerChoose"
    if isinstance(p, ShorterChoose):
        return "shorterChoose"
    if isinstance(p, OccursBefore):
        return "before"
    if isinstance(p, OccursAfter):
        return "after"
    if isinstance(p, Localized):
        return p.localizer
    return None


def _localizer_phrase(p: Localized, table: TemplateTable) -> str:
    template = table.localizer_phrase(p.localizer)
    if p.localizer == "between":
        return _fill(
            template,
            cond1=_render(p.cond1, table)[1],
            cond2=_render(p.cond2, table)[1],
        )
    return _fill(template, cond=_render(p.cond1, table)[1])


def _render(p, table: TemplateTable) -> Tuple[str, str]:
    """(question, indirect reference) for a program."""
    entry = table.entry(variant_name(p))
    question_t, indirect_t = entry["question"], entry["indirect"]

    if isinstance(p, ObjExists):
        slots = {"object": p.object}
    elif isinstance(p, RelationExists):
        slots = {"relation": p.relation}
    elif isinstance(p, ActionExists):
        slots = {"action": p.action}
    elif isinstance(p, InteractionExists):
        slots = {
            "subject": p.subject.object,
            "relation": p.relation.relation,
            "object": p.object.object,
        }
    elif isinstance(p, ObjectsQuery):
        slots = {"subject": _render(p.subject, table)[1], "relation": p.relation.relation}
    elif isinstance(p, ActionsQuery):
        slots = {}
    elif isinstance(p, (First, Last)):
        slots = {"body": _render(p.body, table)[1]}
    elif isinstance(p, (Longest, Shortest)):
        suffix = ""
        if isinstance(p.body, Localized):
            suffix = " " + _localizer_phrase(p.body, table)
        slots = {"suffix": suffix}
    elif isinstance(p, (And, Xor)):
        slots = {"left": _render(p.left, table)[1], "right": _render(p.right, table)[1]}
    elif isinstance(p, EqualsObject):
        slots = {"candidate": p.candidate.object, "query": _render(p.query, table)[1]}
    elif isinstance(p, (LongerThan, ShorterThan)):
        slots = {"first_action": p.first_action, "second_action": p.second_action}
    elif isinstance(p, (OccursBefore, OccursAfter)):
        slots = {
            "first_event": _render(p.first_event, table)[1],
            "second_event": _render(p.second_event, table)[1],
        }
    elif isinstance(p, ChooseObject):
        slots = {
            "candidate_a": p.option_a.candidate.object,
            "candidate_b": p.option_b.candidate.object,
            "query": _render(p.option_a.query, table)[1],
        }
    elif isinstance(p, ChooseTime):
        slots = {
            "first_event": _render(p.before_option.first_event, table)[1],
            "second_event": _render(p.before_option.second_event, table)[1],
        }
    elif isinstance(p, (LongerChoose, ShorterChoose)):
        slots = {"action_a": p.option_a.first_action, "action_b": p.option_b.first_action}
    elif isinstance(p, Localized):
        body_question = _render(p.body, table)[0].rstrip("?").rstrip()
        phrase = _localizer_phrase(p, table)
        slots = {
            "body_question": body_question,
            "body": _render(p.body, table)[1],
            "phrase": phrase,
        }
    else:
        raise TemplateError(f"cannot render {type(p).__name__}")

    return _fill(question_t, **slots), _fill(indirect_t, **slots)


def render_question(p, table: TemplateTable) -> dict:
    """Deterministic question text and indirect reference for a program."""
    question, indirect = _render(p, table)
    return {"question": question, "indirect": indirect}


# ---------------------------------------------------------------------------
# DAG model


@dataclass(frozen=True)
class DagNode:
    id: str
    program: object
    question: str
    qtype: str


@dataclass(frozen=True)
class DagEdge:
    parent: str
    child: str
    rule: str


@dataclass
class QuestionDag:
    root_id: str
    video_id: str
    nodes: List[DagNode] = field(default_factory=list)
    edges: List[DagEdge] = field(default_factory=list)

    def node(self, node_id: str) -> DagNode:
        for n in self.nodes:
            if n.id == node_id:
                return n
        raise KeyError(node_id)

    def node_map(self) -> Dict[str, DagNode]:
        return {n.id: n for n in self.nodes}

    def children(self, parent_id: str) -> List[str]:
        return [e.child for e in self.edges if e.parent == parent_id]

    def parents(self, child_id: str) -> List[str]:
        return [e.parent for e in self.edges if e.child == child_id]


def node_id_for(video_id: str, program) -> str:
    """Stable question id: content hash of (video, canonical program)."""
    key = f"{video_id}|{canonical_key(program)}"
    return hashlib.sha1(key.encode("utf-8")).hexdigest()[:16]


def decompose(
    program,
    video_id: str,
    templates: Optional[TemplateTable] = None,
    banned_types: frozenset = DEFAULT_BANNED_TYPES,
) -> QuestionDag:
    """Build the sub-question DAG for a program.

    Sub-programs are visited recursively; duplicate sub-programs share one
    node (keyed by canonical program text), and each parent-child edge is
    labeled with the parent's composition rule.
    """
    if templates is None:
        templates = default_templates()
    nodes: Dict[str, DagNode] = {}
    edges: List[DagEdge] = []
    edge_seen = set()

    def build(p) -> str:
        key = canonical_key(p)
        nid = node_id_for(video_id, p)
        if key in nodes:
            return nodes[key].id
        child_ids = []
        rule = composition_rule_for(p)
        for _, sub in child_programs(p):
            child_ids.append(build(sub))
        question, _ = _render(p, templates)
        nodes[key] = DagNode(
            id=nid,
            program=p,
            question=question,
            qtype=classify(p, banned_types).name,
        )
        for cid in child_ids:
            mark = (nid, cid, rule)
            if mark not in edge_seen:
                edge_seen.add(mark)
                edges.append(DagEdge(parent=nid, child=cid, rule=rule))
        return nid

    root_id = build(program)
    return QuestionDag(
        root_id=root_id,
        video_id=video_id,
        nodes=list(nodes.values()),
        edges=edges,
    )


def validate_dag(dag: QuestionDag):
    """Structural invariants: single root, acyclic, known edge rules."""
    ids = [n.id for n in dag.nodes]
    if len(ids) != len(set(ids)):
        raise ValueError("duplicate node ids")
    id_set = set(ids)
    targets = {e.child for e in dag.edges}
    roots = [i for i in ids if i not in targets]
    if roots != [dag.root_id] and set(roots) != {dag.root_id}:
        raise ValueError(f"expected single root {dag.root_id}, found {roots}")
    for e in dag.edges:
        if e.parent not in id_set or e.child not in id_set:
            raise ValueError("edge references unknown node")
        if e.rule not in COMPOSITION_RULES:
            raise ValueError(f"unknown composition rule {e.rule!r}")
    # Cycle check by depth-first search.
    adjacency: Dict[str, List[str]] = {}
    for e in dag.edges:
        adjacency.setdefault(e.parent, []).append(e.child)
    state: Dict[str, int] = {}

    def visit(node_id):
        state[node_id] = 1
        for nxt in adjacency.get(node_id, []):
            mark = state.get(nxt, 0)
            if mark == 1:
                raise ValueError("cycle detected")
            if mark == 0:
                visit(nxt)
        state[node_id] = 2

    for i in ids:
        if state.get(i, 0) == 0:
            visit(i)


# ---------------------------------------------------------------------------
# Serialization


def dag_to_dict(dag: QuestionDag) -> dict:
    from .programs import render_program

    return {
        "root_id": dag.root_id,
        "video_id": dag.video_id,
        "nodes": [
            {
                "id": n.id,
                "program": render_program(n.program),
                "question": n.question,
                "qtype": n.qtype,
            }
            for n in dag.nodes
        ],
        "edges": [{"parent": e.parent, "child": e.child, "rule": e.rule} for e in dag.edges],
    }


def dag_from_dict(data: dict) -> QuestionDag:
    nodes = [
        DagNode(
            id=n["id"],
            program=parse_program(n["program"]),
            question=n["question"],
            qtype=n["qtype"],
        )
        for n in data["nodes"]
    ]
    edges = [DagEdge(parent=e["parent"], child=e["child"], rule=e["rule"]) for e in data["edges"]]
    return QuestionDag(
        root_id=data["root_id"],
        video_id=data["video_id"],
        nodes=nodes,
        edges=edges,
    )
