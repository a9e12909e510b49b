"""Compositional-consistency metric suite.

Definitions, with Acc(q) = 1 when the prediction for question q equals its
gold answer (a missing prediction counts as incorrect):

* Accuracy: per question type, accuracy is computed per ground-truth answer
  and then averaged across answers, elevating rare answers.
* CA (compositional accuracy): parent accuracy over compositions whose
  immediate sub-questions were all answered correctly.
* RWR (right for the wrong reasons): parent accuracy over compositions with
  at least one incorrectly answered sub-question; RWR-n fixes the number of
  incorrect sub-questions at exactly n.
* Delta: RWR - CA wherever both are defined.
* IC (internal consistency): per consistency rule, the pass rate over
  applicable checks; group values macro-average their rule set and are
  undefined whenever any constituent rule has zero applicable checks.

A composition is one (video, parent question) pair with children; repeats
of the same pair across DAGs of a video count once.  Compositions touching
a banned-type node are excluded, as are banned questions everywhere.
All aggregation state is counters, so evaluation streams over DAGs and is
independent of how DAGs are partitioned across workers.
"""

from __future__ import annotations

import statistics
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

from .consistency import (
    COMPOSITION_RULE_SETS,
    FAIL,
    PASS,
    RULE_IDS,
    TYPE_RULE_SETS,
    evaluate_check,
    instantiate_checks,
)
from .decompose import COMPOSITION_RULES, QuestionDag
from .programs import DEFAULT_BANNED_TYPES, canonical_answer

#: Question-type report rows (banned open-answer types are not reported).
QTYPE_ROWS = (
    "objectExists",
    "relationExists",
    "interaction",
    "interactionTemporalLoc",
    "existsTemporalLoc",
    "firstLast",
    "longestShortestAction",
    "conjunction",
    "choose",
    "equals",
)

RULE_ROWS = COMPOSITION_RULES

DEFAULT_RWR_MAX_N = 5


@dataclass(frozen=True)
class Cell:
    """A metric value in [0, 100] or undefined, with its denominator."""

    value: Optional[float]
    count: int

    def as_dict(self) -> dict:
        return {"value": self.value, "count": self.count}

    def render(self) -> str:
        return "N/A" if self.value is None else f"{self.value:.2f}"


UNDEFINED = Cell(value=None, count=0)


@dataclass(frozen=True)
class GoldEntry:
    answer: str
    qtype: str
    video_id: str


def gold_from_records(records: Iterable[dict]) -> Dict[str, GoldEntry]:
    """Index gold answers by question id; records without answers are skipped."""
    gold: Dict[str, GoldEntry] = {}
    for rec in records:
        answer = rec.get("answer")
        if answer is None:
            continue
        gold[rec["id"]] = GoldEntry(
            answer=canonical_answer(answer),
            qtype=rec["qtype"],
            video_id=rec.get("video_id", ""),
        )
    return gold


def predictions_from_records(records: Iterable[dict]) -> Dict[str, str]:
    return {rec["id"]: canonical_answer(rec["answer"]) for rec in records}


# ---------------------------------------------------------------------------
# Accuracy


def accuracy(
    gold: Dict[str, GoldEntry],
    predictions: Dict[str, str],
    banned_types: frozenset = DEFAULT_BANNED_TYPES,
) -> dict:
    """Per-type normalized accuracy plus pooled and macro overall values."""
    per_type_answer: Dict[str, Dict[str, List[int]]] = {}
    pooled_answer: Dict[str, List[int]] = {}
    for qid, entry in gold.items():
        if entry.qtype in banned_types:
            continue
        hit = int(predictions.get(qid) == entry.answer)
        tally = per_type_answer.setdefault(entry.qtype, {}).setdefault(entry.answer, [0, 0])
        tally[0] += hit
        tally[1] += 1
        pooled = pooled_answer.setdefault(entry.answer, [0, 0])
        pooled[0] += hit
        pooled[1] += 1

    def normalized(tallies: Dict[str, List[int]]) -> Cell:
        if not tallies:
            return UNDEFINED
        rates = [100.0 * hit / total for hit, total in tallies.values()]
        total = sum(total for _, total in tallies.values())
        return Cell(value=sum(rates) / len(rates), count=total)

    by_type = {t: normalized(per_type_answer.get(t, {})) for t in QTYPE_ROWS}
    per_answer = {
        t: {a: Cell(value=100.0 * c / n, count=n) for a, (c, n) in sorted(answers.items())}
        for t, answers in sorted(per_type_answer.items())
    }
    defined = [cell.value for cell in by_type.values() if cell.value is not None]
    macro = (
        Cell(value=sum(defined) / len(defined), count=sum(c.count for c in by_type.values()))
        if defined
        else UNDEFINED
    )
    return {
        "by_type": by_type,
        "overall_pooled_answers": normalized(pooled_answer),
        "overall_macro_types": macro,
        "per_answer": per_answer,
    }


# ---------------------------------------------------------------------------
# Compositions (CA / RWR / RWR-n)


@dataclass(frozen=True)
class CompositionStat:
    video_id: str
    parent: str
    parent_qtype: str
    rule: str
    parent_correct: bool
    num_children: int
    num_incorrect: int


def _dag_compositions(
    dag: QuestionDag,
    gold: Dict[str, GoldEntry],
    predictions: Dict[str, str],
    banned_types: frozenset,
) -> List[CompositionStat]:
    stats = []
    node_by_id = dag.node_map()
    children_of: Dict[str, List[str]] = {}
    rule_of: Dict[str, str] = {}
    for edge in dag.edges:
        children_of.setdefault(edge.parent, []).append(edge.child)
        rule_of[edge.parent] = edge.rule
    for parent_id, child_ids in children_of.items():
        parent = node_by_id[parent_id]
        members = [parent] + [node_by_id[c] for c in child_ids]
        if any(m.qtype in banned_types for m in members):
            continue
        if any(m.id not in gold for m in members):
            continue

        def correct(node_id: str) -> bool:
            return predictions.get(node_id) == gold[node_id].answer

        stats.append(
            CompositionStat(
                video_id=dag.video_id,
                parent=parent_id,
                parent_qtype=parent.qtype,
                rule=rule_of[parent_id],
                parent_correct=correct(parent_id),
                num_children=len(child_ids),
                num_incorrect=sum(not correct(c) for c in child_ids),
            )
        )
    return stats


def composition_populations(
    dags: Iterable[QuestionDag],
    gold: Dict[str, GoldEntry],
    predictions: Dict[str, str],
    banned_types: frozenset = DEFAULT_BANNED_TYPES,
) -> List[CompositionStat]:
    """Deduplicated composition statistics over a corpus of DAGs."""
    seen: Dict[Tuple[str, str], CompositionStat] = {}
    for dag in dags:
        for stat in _dag_compositions(dag, gold, predictions, banned_types):
            seen.setdefault((stat.video_id, stat.parent), stat)
    return list(seen.values())


def _group_key(stat: CompositionStat, condition: Optional[str]) -> str:
    if condition == "type":
        return stat.parent_qtype
    if condition == "rule":
        return stat.rule
    return "overall"


def _parent_rate(stats: Sequence[CompositionStat]) -> Cell:
    if not stats:
        return UNDEFINED
    return Cell(
        value=100.0 * sum(s.parent_correct for s in stats) / len(stats),
        count=len(stats),
    )


def compositional_accuracy(
    populations: Sequence[CompositionStat], condition: Optional[str] = None
) -> Dict[str, Cell]:
    """Parent accuracy over compositions with all children correct."""
    groups: Dict[str, List[CompositionStat]] = {}
    for stat in populations:
        if stat.num_incorrect == 0:
            groups.setdefault(_group_key(stat, condition), []).append(stat)
    return {key: _parent_rate(stats) for key, stats in groups.items()}


def rwr(
    populations: Sequence[CompositionStat], condition: Optional[str] = None
) -> Dict[str, Cell]:
    """Parent accuracy over compositions with at least one incorrect child."""
    groups: Dict[str, List[CompositionStat]] = {}
    for stat in populations:
        if stat.num_incorrect >= 1:
            groups.setdefault(_group_key(stat, condition), []).append(stat)
    return {key: _parent_rate(stats) for key, stats in groups.items()}


def rwr_n(
    populations: Sequence[CompositionStat], n: int, condition: Optional[str] = None
) -> Dict[str, Cell]:
    """Parent accuracy over compositions with exactly n incorrect children."""
    if n < 1:
        raise ValueError("n must be at least 1")
    groups: Dict[str, List[CompositionStat]] = {}
    for stat in populations:
        if stat.num_incorrect == n:
            groups.setdefault(_group_key(stat, condition), []).append(stat)
    return {key: _parent_rate(stats) for key, stats in groups.items()}


def delta(ca_cell: Cell, rwr_cell: Cell) -> Cell:
    if ca_cell.value is None or rwr_cell.value is None:
        return UNDEFINED
    return Cell(value=rwr_cell.value - ca_cell.value, count=ca_cell.count + rwr_cell.count)


# ---------------------------------------------------------------------------
# Internal consistency


@dataclass(frozen=True)
class CheckRecord:
    video_id: str
    parent: str
    parent_qtype: str
    rule_id: str
    verdict: str  # pass | fail


def check_instances(
    dags: Iterable[QuestionDag],
    predictions: Dict[str, str],
    banned_types: frozenset = DEFAULT_BANNED_TYPES,
) -> List[CheckRecord]:
    """Deduplicated decided (pass/fail) checks over a corpus of DAGs."""
    seen: Dict[Tuple[str, str, str], CheckRecord] = {}
    for dag in dags:
        for record in _dag_check_records(dag, predictions, banned_types):
            seen.setdefault((record.video_id, record.parent, record.rule_id), record)
    return list(seen.values())


def _dag_check_records(
    dag: QuestionDag, predictions: Dict[str, str], banned_types: frozenset
) -> List[CheckRecord]:
    records = []
    for template in instantiate_checks(dag, banned_types):
        verdict = evaluate_check(template, predictions).verdict
        if verdict in (PASS, FAIL):
            records.append(
                CheckRecord(
                    video_id=template.video_id,
                    parent=template.parent,
                    parent_qtype=template.parent_qtype,
                    rule_id=template.rule_id,
                    verdict=verdict,
                )
            )
    return records


def _rule_pass_rates(records: Sequence[CheckRecord]) -> Dict[str, Cell]:
    tallies: Dict[str, List[int]] = {}
    for rec in records:
        tally = tallies.setdefault(rec.rule_id, [0, 0])
        tally[0] += int(rec.verdict == PASS)
        tally[1] += 1
    return {
        rule: Cell(value=100.0 * hit / total, count=total)
        for rule, (hit, total) in tallies.items()
    }


def _macro(rule_set: Sequence[str], rates: Dict[str, Cell]) -> Cell:
    """Unweighted mean over a rule set; undefined if the set is empty or any
    constituent rule has zero applicable checks."""
    if not rule_set:
        return UNDEFINED
    cells = [rates.get(rule) for rule in rule_set]
    if any(c is None or c.count == 0 for c in cells):
        return Cell(value=None, count=sum(c.count for c in cells if c is not None))
    return Cell(value=sum(c.value for c in cells) / len(cells), count=sum(c.count for c in cells))


def internal_consistency(
    records: Sequence[CheckRecord], condition: Optional[str] = None
) -> dict:
    """Per-rule pass rates and macro IC, optionally conditioned.

    condition=None  -> {"per_rule": ..., "macro": Cell over all rules}
    condition="rule" -> {"groups": {composition rule: Cell}}
    condition="type" -> {"groups": {question type: Cell}}
    """
    if condition is None:
        rates = _rule_pass_rates(records)
        return {"per_rule": rates, "macro": _macro(RULE_IDS, rates)}
    if condition == "rule":
        rates = _rule_pass_rates(records)
        groups = {
            rule: _macro(COMPOSITION_RULE_SETS[rule], rates) for rule in RULE_ROWS
        }
        return {"groups": groups}
    if condition == "type":
        groups = {}
        for qtype in QTYPE_ROWS:
            scoped = [r for r in records if r.parent_qtype == qtype]
            rates = _rule_pass_rates(scoped)
            groups[qtype] = _macro(TYPE_RULE_SETS[qtype], rates)
        return {"groups": groups}
    raise ValueError(f"unknown condition {condition!r}")


# ---------------------------------------------------------------------------
# Correlation between per-DAG consistency and per-DAG accuracy


@dataclass(frozen=True)
class DagPoint:
    dag_root: str
    video_id: str
    ic: float
    accuracy: float


def per_dag_points(
    dags: Iterable[QuestionDag],
    gold: Dict[str, GoldEntry],
    predictions: Dict[str, str],
    banned_types: frozenset = DEFAULT_BANNED_TYPES,
) -> List[DagPoint]:
    """(IC%, accuracy%) per DAG; DAGs without applicable checks or scored
    nodes are excluded."""
    points = []
    for dag in dags:
        records = _dag_check_records(dag, predictions, banned_types)
        decided = len(records)
        if decided == 0:
            continue
        passed = sum(r.verdict == PASS for r in records)
        scored = [
            n for n in dag.nodes if n.qtype not in banned_types and n.id in gold
        ]
        if not scored:
            continue
        correct = sum(predictions.get(n.id) == gold[n.id].answer for n in scored)
        points.append(
            DagPoint(
                dag_root=dag.root_id,
                video_id=dag.video_id,
                ic=100.0 * passed / decided,
                accuracy=100.0 * correct / len(scored),
            )
        )
    return points


def pearson(points: Sequence[DagPoint]) -> Tuple[Optional[float], Optional[str]]:
    if len(points) < 2:
        return None, "fewer than 2 points"
    xs = [p.ic for p in points]
    ys = [p.accuracy for p in points]
    try:
        return statistics.correlation(xs, ys), None
    except statistics.StatisticsError:
        return None, "zero variance"


def ic_accuracy_correlation(
    dags: Iterable[QuestionDag],
    gold: Dict[str, GoldEntry],
    predictions: Dict[str, str],
    banned_types: frozenset = DEFAULT_BANNED_TYPES,
) -> dict:
    points = per_dag_points(dags, gold, predictions, banned_types)
    r, reason = pearson(points)
    return {"points": points, "r": r, "reason": reason}


# ---------------------------------------------------------------------------
# Full report


def _process_chunk(args):
    dags, gold, predictions, banned_types = args
    comps = []
    checks = []
    points = []
    for dag in dags:
        comps.extend(_dag_compositions(dag, gold, predictions, banned_types))
        checks.extend(_dag_check_records(dag, predictions, banned_types))
    points = per_dag_points(dags, gold, predictions, banned_types)
    return comps, checks, points


def _composition_block(populations, condition, rwr_max_n):
    rows = QTYPE_ROWS if condition == "type" else RULE_ROWS
    ca_map = compositional_accuracy(populations, condition)
    rwr_map = rwr(populations, condition)
    rwr_n_maps = {n: rwr_n(populations, n, condition) for n in range(1, rwr_max_n + 1)}
    block = {}
    for row in rows:
        ca_cell = ca_map.get(row, UNDEFINED)
        rwr_cell = rwr_map.get(row, UNDEFINED)
        block[row] = {
            "ca": ca_cell,
            "rwr": rwr_cell,
            "rwr_n": {n: rwr_n_maps[n].get(row, UNDEFINED) for n in rwr_n_maps},
            "delta": delta(ca_cell, rwr_cell),
        }
    overall = {
        "ca": compositional_accuracy(populations).get("overall", UNDEFINED),
        "rwr": rwr(populations).get("overall", UNDEFINED),
        "rwr_n": {
            n: rwr_n(populations, n).get("overall", UNDEFINED)
            for n in range(1, rwr_max_n + 1)
        },
    }
    overall["delta"] = delta(overall["ca"], overall["rwr"])
    return block, overall


def evaluate_predictions(
    dags: Sequence[QuestionDag],
    gold: Dict[str, GoldEntry],
    predictions: Dict[str, str],
    banned_types: frozenset = DEFAULT_BANNED_TYPES,
    rwr_max_n: int = DEFAULT_RWR_MAX_N,
    workers: int = 1,
) -> dict:
    """Compute the full metric report; output is independent of workers."""
    dags = list(dags)
    if workers > 1 and len(dags) > 1:
        chunk_size = max(1, (len(dags) + workers - 1) // workers)
        chunks = [dags[i : i + chunk_size] for i in range(0, len(dags), chunk_size)]
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(
                pool.map(
                    _process_chunk,
                    [(chunk, gold, predictions, banned_types) for chunk in chunks],
                )
            )
    else:
        results = [_process_chunk((dags, gold, predictions, banned_types))]

    comp_seen: Dict[Tuple[str, str], CompositionStat] = {}
    check_seen: Dict[Tuple[str, str, str], CheckRecord] = {}
    points: List[DagPoint] = []
    for comps, checks, chunk_points in results:
        for stat in comps:
            comp_seen.setdefault((stat.video_id, stat.parent), stat)
        for rec in checks:
            check_seen.setdefault((rec.video_id, rec.parent, rec.rule_id), rec)
        points.extend(chunk_points)
    populations = list(comp_seen.values())
    records = list(check_seen.values())

    acc = accuracy(gold, predictions, banned_types)
    by_type_comp, overall_comp = _composition_block(populations, "type", rwr_max_n)
    by_rule_comp, _ = _composition_block(populations, "rule", rwr_max_n)
    ic_overall = internal_consistency(records)
    ic_by_type = internal_consistency(records, "type")["groups"]
    ic_by_rule_group = internal_consistency(records, "rule")["groups"]
    r, reason = pearson(points)

    node_ids = set(gold)
    for dag in dags:
        node_ids.update(n.id for n in dag.nodes)
    unknown_ids = sorted(set(predictions) - node_ids)

    def cell(c: Cell) -> dict:
        return c.as_dict()

    def comp_row(row: dict, ic_cell: Cell, accuracy_cell: Optional[Cell] = None) -> dict:
        out = {}
        if accuracy_cell is not None:
            out["accuracy"] = cell(accuracy_cell)
        out.update(
            {
                "ca": cell(row["ca"]),
                "rwr": cell(row["rwr"]),
                "rwr_n": {str(n): cell(c) for n, c in row["rwr_n"].items()},
                "delta": cell(row["delta"]),
                "ic": cell(ic_cell),
            }
        )
        return out

    report = {
        "config": {
            "banned_types": sorted(banned_types),
            "rwr_max_n": rwr_max_n,
        },
        "counts": {
            "dags": len(dags),
            "gold_questions": len(gold),
            "scored_questions": sum(1 for e in gold.values() if e.qtype not in banned_types),
            "predictions": len(predictions),
            "unknown_prediction_ids": len(unknown_ids),
            "compositions": len(populations),
            "decided_checks": len(records),
        },
        "by_question_type": {
            qtype: comp_row(
                by_type_comp[qtype], ic_by_type[qtype], acc["by_type"][qtype]
            )
            for qtype in QTYPE_ROWS
        },
        "overall": {
            "accuracy_pooled_answers": cell(acc["overall_pooled_answers"]),
            "accuracy_macro_types": cell(acc["overall_macro_types"]),
            "ca": cell(overall_comp["ca"]),
            "rwr": cell(overall_comp["rwr"]),
            "rwr_n": {str(n): cell(c) for n, c in overall_comp["rwr_n"].items()},
            "delta": cell(overall_comp["delta"]),
            "ic": cell(ic_overall["macro"]),
        },
        "by_composition_rule": {
            rule: comp_row(by_rule_comp[rule], ic_by_rule_group[rule])
            for rule in RULE_ROWS
        },
        "ic_by_rule": {
            rule: cell(ic_overall["per_rule"].get(rule, UNDEFINED)) for rule in RULE_IDS
        },
        "accuracy_per_answer": {
            qtype: {answer: cell(c) for answer, c in answers.items()}
            for qtype, answers in acc["per_answer"].items()
        },
        "correlation": {
            "points": [
                {
                    "dag_root": p.dag_root,
                    "video_id": p.video_id,
                    "ic": p.ic,
                    "accuracy": p.accuracy,
                }
                for p in points
            ],
            "r": r,
            "reason": reason,
        },
    }
    return report


build_report = evaluate_predictions


# ---------------------------------------------------------------------------
# CSV rendering


def _fmt(value: Optional[float]) -> str:
    return "N/A" if value is None else f"{value:.2f}"


def report_csv_tables(report: dict, rwr_max_n: int = DEFAULT_RWR_MAX_N) -> Dict[str, str]:
    """CSV tables keyed by file name, mirroring the report's row layouts."""
    rwr_cols = [f"rwr_{n}" for n in range(1, rwr_max_n + 1)]

    def comp_cols(row: dict) -> List[str]:
        out = [_fmt(row["ca"]["value"]), _fmt(row["rwr"]["value"])]
        out += [_fmt(row["rwr_n"][str(n)]["value"]) for n in range(1, rwr_max_n + 1)]
        out += [_fmt(row["delta"]["value"]), _fmt(row["ic"]["value"])]
        return out

    lines = ["question_type,accuracy,ca,rwr," + ",".join(rwr_cols) + ",delta,ic"]
    for qtype in QTYPE_ROWS:
        row = report["by_question_type"][qtype]
        lines.append(
            ",".join([qtype, _fmt(row["accuracy"]["value"])] + comp_cols(row))
        )
    overall = report["overall"]
    overall_row = {
        "ca": overall["ca"],
        "rwr": overall["rwr"],
        "rwr_n": overall["rwr_n"],
        "delta": overall["delta"],
        "ic": overall["ic"],
    }
    lines.append(
        ",".join(
            ["Overall", _fmt(overall["accuracy_pooled_answers"]["value"])]
            + comp_cols(overall_row)
        )
    )
    by_type_csv = "\n".join(lines) + "\n"

    lines = ["composition_rule,ca,rwr," + ",".join(rwr_cols) + ",delta,ic"]
    for rule in RULE_ROWS:
        row = report["by_composition_rule"][rule]
        lines.append(",".join([rule] + comp_cols(row)))
    lines.append(",".join(["Overall"] + comp_cols(overall_row)))
    by_rule_csv = "\n".join(lines) + "\n"

    lines = ["rule_id,ic,applicable_checks"]
    for rule in RULE_IDS:
        c = report["ic_by_rule"][rule]
        lines.append(f"{rule},{_fmt(c['value'])},{c['count']}")
    ic_csv = "\n".join(lines) + "\n"

    lines = ["dag_root,video_id,ic,accuracy"]
    for point in report["correlation"]["points"]:
        lines.append(
            f"{point['dag_root']},{point['video_id']},{point['ic']:.4f},{point['accuracy']:.4f}"
        )
    scatter_csv = "\n".join(lines) + "\n"

    return {
        "by_question_type.csv": by_type_csv,
        "by_composition_rule.csv": by_rule_csv,
        "ic_by_rule.csv": ic_csv,
        "correlation_points.csv": scatter_csv,
    }
