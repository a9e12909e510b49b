"""Reference predictors: oracle, most-likely, constant, seeded random.

Every predictor maps a question record to an answer string (or None for no
prediction) so baselines and external models share one evaluation path.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional

from .programs import canonical_answer, parse_program
from .scenegraph import SceneGraph, UndefinedAnswerError, execute


class MostLikelyPredictor:
    """Outputs the most common training answer for each question type.

    Ties break lexicographically.  Question types absent from training fall
    back to a configured default and are flagged in ``missing_types``.
    """

    def __init__(self, modal: Dict[str, str], default: str = "no"):
        self.modal = dict(modal)
        self.default = canonical_answer(default)
        self.missing_types = set()

    def predict(self, record: dict) -> Optional[str]:
        qtype = record["qtype"]
        if qtype not in self.modal:
            self.missing_types.add(qtype)
            return self.default
        return self.modal[qtype]


def fit_most_likely(records: Iterable[dict], default: str = "no") -> MostLikelyPredictor:
    histogram: Dict[str, Dict[str, int]] = {}
    for rec in records:
        answer = rec.get("answer")
        if answer is None:
            continue
        counts = histogram.setdefault(rec["qtype"], {})
        answer = canonical_answer(answer)
        counts[answer] = counts.get(answer, 0) + 1
    modal = {
        qtype: min(counts, key=lambda a: (-counts[a], a))
        for qtype, counts in histogram.items()
    }
    return MostLikelyPredictor(modal, default=default)


class ConstantPredictor:
    def __init__(self, answer: str):
        self.answer = canonical_answer(answer)

    def predict(self, record: dict) -> Optional[str]:
        return self.answer


class OraclePredictor:
    """Answers by executing each question's program on its scene graph."""

    def __init__(self, graphs: Iterable[SceneGraph]):
        self.by_video = {g.video_id: g for g in graphs}

    def predict(self, record: dict) -> Optional[str]:
        graph = self.by_video.get(record["video_id"])
        if graph is None:
            return None
        try:
            return execute(parse_program(record["program"]), graph).text
        except UndefinedAnswerError:
            return None


class RandomPredictor:
    """Uniform draw from the training answer pool of the question's type,
    deterministic in (seed, question id) and independent of stream order."""

    def __init__(self, seed: int, pools: Dict[str, List[str]], default: str = "no"):
        self.seed = seed
        self.pools = {qtype: sorted(set(answers)) for qtype, answers in pools.items()}
        self.default = canonical_answer(default)

    def predict(self, record: dict) -> Optional[str]:
        pool = self.pools.get(record["qtype"])
        if not pool:
            return self.default
        digest = hashlib.sha256(f"{self.seed}:{record['id']}".encode("utf-8")).digest()
        index = int.from_bytes(digest[:8], "big") % len(pool)
        return pool[index]


def fit_random(records: Iterable[dict], seed: int, default: str = "no") -> RandomPredictor:
    pools: Dict[str, List[str]] = {}
    for rec in records:
        answer = rec.get("answer")
        if answer is None:
            continue
        pools.setdefault(rec["qtype"], []).append(canonical_answer(answer))
    return RandomPredictor(seed=seed, pools=pools, default=default)


def predict_records(predictor, records: Iterable[dict]) -> List[dict]:
    """Prediction rows ({"id", "answer"}) for every answerable record."""
    out = []
    for rec in records:
        answer = predictor.predict(rec)
        if answer is not None:
            out.append({"id": rec["id"], "answer": answer})
    return out
