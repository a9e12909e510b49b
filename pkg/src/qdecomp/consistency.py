"""Logical consistency rules over predicted answers.

Each rule is an implication between a parent question's answer and its
sub-questions' answers, evaluated on model predictions alone (no ground
truth).  Rules come in polarity variants: a ``*-yes`` variant applies when
the parent is answered or implied to be "yes" and a ``*-no`` variant when it
is answered or implied to be "no".  For conjunction-like rules (and, xor,
equals) the implied direction is sound both ways, so either side of the
biconditional triggers the check; for interaction and temporal rules only
the stated direction is sound, so the ``-no`` variant is the contrapositive
triggered by child predictions.  A prediction outside a choose question's
option set leaves its check not applicable.

Verdicts: pass, fail, or not_applicable (antecedent false or a referenced
prediction missing).  The same contradiction can fail both variants of a
pair; that double counting is intentional.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, List, Optional, Tuple

from .decompose import QuestionDag, node_id_for
from .programs import (
    DEFAULT_BANNED_TYPES,
    And,
    ChooseObject,
    ChooseTime,
    EqualsObject,
    InteractionExists,
    Localized,
    ObjectsQuery,
    OccursAfter,
    OccursBefore,
    Xor,
    child_programs,
)

PASS = "pass"
FAIL = "fail"
NOT_APPLICABLE = "not_applicable"

TEMPORAL_COMPOSITIONS = ("after", "before", "while", "between")

RULE_IDS = (
    "interaction-yes",
    "interaction-no",
    "after-yes",
    "after-no",
    "before-yes",
    "before-no",
    "while-yes",
    "while-no",
    "between-yes",
    "between-no",
    "and-yes",
    "and-no",
    "xor-yes",
    "xor-no",
    "equals-yes",
    "equals-no",
    "choose-object",
    "choose-temporal",
)

RULE_COMPOSITION = {rule: rule.rsplit("-", 1)[0] for rule in RULE_IDS}
RULE_COMPOSITION["choose-object"] = "choose"
RULE_COMPOSITION["choose-temporal"] = "choose"

#: Rules evaluated for each composition rule (empty tuple: no rules exist,
#: so conditioned IC is undefined for that composition).
COMPOSITION_RULE_SETS = {
    "interaction": ("interaction-yes", "interaction-no"),
    "first": (),
    "last": (),
    "equals": ("equals-yes", "equals-no"),
    "and": ("and-yes", "and-no"),
    "xor": ("xor-yes", "xor-no"),
    "choose": ("choose-object", "choose-temporal"),
    "longerChoose": (),
    "shorterChoose": (),
    "after": ("after-yes", "after-no"),
    "before": ("before-yes", "before-no"),
    "while": ("while-yes", "while-no"),
    "between": ("between-yes", "between-no"),
}

_TEMPORAL_RULES = (
    "after-yes", "after-no", "before-yes", "before-no",
    "while-yes", "while-no", "between-yes", "between-no",
)

#: Rules evaluated for each parent question type.
TYPE_RULE_SETS = {
    "objectExists": (),
    "relationExists": (),
    "interaction": ("interaction-yes", "interaction-no"),
    "interactionTemporalLoc": _TEMPORAL_RULES,
    "existsTemporalLoc": _TEMPORAL_RULES,
    "firstLast": (),
    "longestShortestAction": (),
    "conjunction": ("and-yes", "and-no", "xor-yes", "xor-no"),
    "choose": ("choose-object", "choose-temporal"),
    "equals": ("equals-yes", "equals-no"),
    "objectsQuery": (),
    "actionTemporalLoc": (),
}


@dataclass(frozen=True)
class CheckTemplate:
    """One instantiable consistency check bound to nodes of a DAG."""

    rule_id: str
    composition: str
    video_id: str
    dag_root: str
    parent: str
    parent_qtype: str
    children: Tuple[str, ...]
    roles: dict  # rule-specific node roles and option labels


@dataclass(frozen=True)
class CheckInstance:
    rule_id: str
    parent: str
    children: Tuple[str, ...]
    verdict: str


def instantiate_checks(
    dag: QuestionDag, banned_types: frozenset = DEFAULT_BANNED_TYPES
) -> List[CheckTemplate]:
    """One template per (rule, matching parent) pair in a DAG.

    Nodes of banned question types never participate, neither as parents
    nor as children.
    """
    templates: List[CheckTemplate] = []
    node_by_id = dag.node_map()

    def banned(node_id: str) -> bool:
        node = node_by_id.get(node_id)
        return node is None or node.qtype in banned_types

    for node in dag.nodes:
        p = node.program
        role_ids = {
            role: node_id_for(dag.video_id, sub) for role, sub in child_programs(p)
        }
        if not role_ids:
            continue
        children = tuple(dict.fromkeys(role_ids.values()))
        if banned(node.id) or any(banned(c) for c in children):
            continue

        def add(rule_id: str, roles: dict):
            templates.append(
                CheckTemplate(
                    rule_id=rule_id,
                    composition=RULE_COMPOSITION[rule_id],
                    video_id=dag.video_id,
                    dag_root=dag.root_id,
                    parent=node.id,
                    parent_qtype=node.qtype,
                    children=children,
                    roles=roles,
                )
            )

        if isinstance(p, (InteractionExists, ObjectsQuery)):
            add("interaction-yes", {})
            add("interaction-no", {})
        elif isinstance(p, Localized):
            add(f"{p.localizer}-yes", {})
            add(f"{p.localizer}-no", {})
        elif isinstance(p, OccursBefore):
            add("before-yes", {})
            add("before-no", {})
        elif isinstance(p, OccursAfter):
            add("after-yes", {})
            add("after-no", {})
        elif isinstance(p, And):
            roles = {"left": role_ids["left"], "right": role_ids["right"]}
            add("and-yes", roles)
            add("and-no", roles)
        elif isinstance(p, Xor):
            roles = {"left": role_ids["left"], "right": role_ids["right"]}
            add("xor-yes", roles)
            add("xor-no", roles)
        elif isinstance(p, EqualsObject):
            roles = {
                "candidate": p.candidate.object,
                "exists": role_ids["candidate"],
                "query": role_ids["query"],
            }
            add("equals-yes", roles)
            add("equals-no", roles)
        elif isinstance(p, ChooseObject):
            add(
                "choose-object",
                {
                    "options": (
                        (p.option_a.candidate.object, role_ids["option_a"]),
                        (p.option_b.candidate.object, role_ids["option_b"]),
                    )
                },
            )
        elif isinstance(p, ChooseTime):
            add(
                "choose-temporal",
                {"before": role_ids["option_a"], "after": role_ids["option_b"]},
            )
    return templates


def evaluate_check(template: CheckTemplate, predictions: Dict[str, str]) -> CheckInstance:
    """Evaluate one check against canonical predicted-answer strings."""
    referenced = (template.parent,) + template.children
    if any(q not in predictions for q in referenced):
        return _instance(template, NOT_APPLICABLE)
    parent = predictions[template.parent]
    kids = {q: predictions[q] for q in template.children}
    rule = template.rule_id

    if rule == "interaction-yes" or rule in ("after-yes", "before-yes", "while-yes", "between-yes"):
        if parent != "yes":
            return _instance(template, NOT_APPLICABLE)
        ok = all(v == "yes" for v in kids.values())
        return _instance(template, PASS if ok else FAIL)

    if rule == "interaction-no" or rule in ("after-no", "before-no", "while-no", "between-no"):
        if not any(v == "no" for v in kids.values()):
            return _instance(template, NOT_APPLICABLE)
        return _instance(template, PASS if parent == "no" else FAIL)

    if rule in ("and-yes", "and-no", "xor-yes", "xor-no"):
        left = predictions[template.roles["left"]]
        right = predictions[template.roles["right"]]
        if rule == "and-yes":
            implied = left == "yes" and right == "yes"
            stated = parent == "yes"
        elif rule == "and-no":
            implied = left == "no" or right == "no"
            stated = parent == "no"
        elif rule == "xor-yes":
            implied = left == "yes" and right == "no"
            stated = parent == "yes"
        else:  # xor-no
            implied = left == "no" or right == "yes"
            stated = parent == "no"
        if not (stated or implied):
            return _instance(template, NOT_APPLICABLE)
        return _instance(template, PASS if (stated and implied) else FAIL)

    if rule in ("equals-yes", "equals-no"):
        candidate = template.roles["candidate"]
        query = predictions[template.roles["query"]]
        exists = predictions[template.roles["exists"]]
        if rule == "equals-yes":
            implied = query == candidate and exists == "yes"
            stated = parent == "yes"
        else:
            implied = query != candidate
            stated = parent == "no"
        if not (stated or implied):
            return _instance(template, NOT_APPLICABLE)
        return _instance(template, PASS if (stated and implied) else FAIL)

    if rule == "choose-object":
        options = template.roles["options"]
        labels = [label for label, _ in options]
        if parent not in labels:
            return _instance(template, NOT_APPLICABLE)
        ok = all(
            predictions[qid] == ("yes" if label == parent else "no")
            for label, qid in options
        )
        return _instance(template, PASS if ok else FAIL)

    if rule == "choose-temporal":
        if parent not in ("before", "after"):
            return _instance(template, NOT_APPLICABLE)
        before = predictions[template.roles["before"]]
        after = predictions[template.roles["after"]]
        if parent == "before":
            ok = before == "yes" and after == "no"
        else:
            ok = after == "yes" and before == "no"
        return _instance(template, PASS if ok else FAIL)

    raise ValueError(f"unknown rule {rule!r}")


def _instance(template: CheckTemplate, verdict: str) -> CheckInstance:
    return CheckInstance(
        rule_id=template.rule_id,
        parent=template.parent,
        children=template.children,
        verdict=verdict,
    )


def dag_consistency(
    dag: QuestionDag,
    predictions: Dict[str, str],
    banned_types: frozenset = DEFAULT_BANNED_TYPES,
) -> Tuple[int, int]:
    """(passed, failed) counts over the applicable checks of one DAG."""
    passed = failed = 0
    for template in instantiate_checks(dag, banned_types):
        verdict = evaluate_check(template, predictions).verdict
        if verdict == PASS:
            passed += 1
        elif verdict == FAIL:
            failed += 1
    return passed, failed


def violation_records(
    dag: QuestionDag,
    predictions: Dict[str, str],
    banned_types: frozenset = DEFAULT_BANNED_TYPES,
    include_passes: bool = False,
) -> List[dict]:
    """Audit-friendly dump rows for failed (optionally all decided) checks."""
    rows = []
    for template in instantiate_checks(dag, banned_types):
        verdict = evaluate_check(template, predictions).verdict
        if verdict == NOT_APPLICABLE:
            continue
        if verdict == FAIL or include_passes:
            rows.append(
                {
                    "dag_root": dag.root_id,
                    "rule_id": template.rule_id,
                    "parent": template.parent,
                    "children": list(template.children),
                    "verdict": verdict,
                }
            )
    return rows
