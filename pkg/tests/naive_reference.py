"""Naive reference implementation of the metric suite.

Materializes every population as plain lists with nested loops, computing
each metric directly from its definition.  Used to cross-check the
streaming aggregator; intentionally avoids the library's counter-based
aggregation paths.
"""

from qdecomp.consistency import (
    COMPOSITION_RULE_SETS,
    RULE_IDS,
    TYPE_RULE_SETS,
    evaluate_check,
    instantiate_checks,
)
from qdecomp.metrics import QTYPE_ROWS, RULE_ROWS


def _value(pairs):
    # pairs: list of 0/1 bits
    if not pairs:
        return None, 0
    return 100.0 * sum(pairs) / len(pairs), len(pairs)


def naive_report(dags, gold, preds, banned, rwr_max_n=5):
    correct = {
        qid: (preds.get(qid) == entry.answer) for qid, entry in gold.items()
    }

    # --- accuracy, normalized per ground-truth answer -----------------
    by_type_answers = {}
    pooled_answers = {}
    for qid, entry in gold.items():
        if entry.qtype in banned:
            continue
        by_type_answers.setdefault(entry.qtype, {}).setdefault(entry.answer, []).append(
            int(correct[qid])
        )
        pooled_answers.setdefault(entry.answer, []).append(int(correct[qid]))

    def normalized(answer_map):
        if not answer_map:
            return None, 0
        rates = []
        total = 0
        for answer in answer_map:
            bits = answer_map[answer]
            rates.append(100.0 * sum(bits) / len(bits))
            total += len(bits)
        return sum(rates) / len(rates), total

    accuracy_by_type = {t: normalized(by_type_answers.get(t, {})) for t in QTYPE_ROWS}
    accuracy_pooled = normalized(pooled_answers)

    # --- compositions: unique (video, parent) pairs -------------------
    compositions = {}
    for dag in dags:
        nodes = {n.id: n for n in dag.nodes}
        parents = []
        for edge in dag.edges:
            if edge.parent not in parents:
                parents.append(edge.parent)
        for parent_id in parents:
            children = [e.child for e in dag.edges if e.parent == parent_id]
            rule = [e.rule for e in dag.edges if e.parent == parent_id][0]
            members = [parent_id] + children
            if any(nodes[m].qtype in banned for m in members):
                continue
            if any(m not in gold for m in members):
                continue
            key = (dag.video_id, parent_id)
            if key in compositions:
                continue
            compositions[key] = {
                "qtype": nodes[parent_id].qtype,
                "rule": rule,
                "parent_bit": int(correct[parent_id]),
                "wrong_children": sum(1 for c in children if not correct[c]),
            }

    def comp_metric(group_of, rows, predicate):
        out = {}
        for row in rows:
            bits = [
                c["parent_bit"]
                for c in compositions.values()
                if group_of(c) == row and predicate(c)
            ]
            out[row] = _value(bits)
        overall = _value([c["parent_bit"] for c in compositions.values() if predicate(c)])
        return out, overall

    def by_qtype(c):
        return c["qtype"]

    def by_rule(c):
        return c["rule"]

    def ca_pred(c):
        return c["wrong_children"] == 0

    def rwr_pred(c):
        return c["wrong_children"] >= 1

    result = {"accuracy_by_type": accuracy_by_type, "accuracy_pooled": accuracy_pooled}
    for name, group_of, rows in (("type", by_qtype, QTYPE_ROWS), ("rule", by_rule, RULE_ROWS)):
        ca, ca_all = comp_metric(group_of, rows, ca_pred)
        rwr_, rwr_all = comp_metric(group_of, rows, rwr_pred)
        rwr_ns = {}
        rwr_ns_all = {}
        for n in range(1, rwr_max_n + 1):
            rwr_ns[n], rwr_ns_all[n] = comp_metric(
                group_of, rows, lambda c, n=n: c["wrong_children"] == n
            )
        result[f"ca_by_{name}"] = ca
        result[f"rwr_by_{name}"] = rwr_
        result[f"rwr_n_by_{name}"] = rwr_ns
    result["ca_overall"] = ca_all
    result["rwr_overall"] = rwr_all
    result["rwr_n_overall"] = rwr_ns_all

    # --- consistency: unique (video, parent, rule) checks -------------
    decided = {}
    for dag in dags:
        for template in instantiate_checks(dag, banned):
            verdict = evaluate_check(template, preds).verdict
            if verdict == "not_applicable":
                continue
            key = (dag.video_id, template.parent, template.rule_id)
            if key not in decided:
                decided[key] = {
                    "rule_id": template.rule_id,
                    "qtype": template.parent_qtype,
                    "bit": int(verdict == "pass"),
                }

    def rule_rate(rule_id, qtype=None):
        bits = [
            d["bit"]
            for d in decided.values()
            if d["rule_id"] == rule_id and (qtype is None or d["qtype"] == qtype)
        ]
        return _value(bits)

    def macro(rule_set, qtype=None):
        if not rule_set:
            return None, 0
        rates = [rule_rate(rule, qtype) for rule in rule_set]
        if any(value is None for value, _ in rates):
            return None, sum(count for _, count in rates)
        return sum(value for value, _ in rates) / len(rates), sum(c for _, c in rates)

    result["ic_per_rule"] = {rule: rule_rate(rule) for rule in RULE_IDS}
    result["ic_overall"] = macro(RULE_IDS)
    result["ic_by_rule_group"] = {
        rule: macro(COMPOSITION_RULE_SETS[rule]) for rule in RULE_ROWS
    }
    result["ic_by_type"] = {
        qtype: macro(TYPE_RULE_SETS[qtype], qtype) for qtype in QTYPE_ROWS
    }
    return result
