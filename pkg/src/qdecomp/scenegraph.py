"""Spatio-temporal scene graphs and the program executor.

A scene graph stores, per video, the person-object relationship tuples with
the frames where they hold and one interval per action label.  The executor
answers question programs by brute-force search over frames under a
closed-world assumption: anything not annotated does not exist.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Tuple

from .programs import (
    NO,
    YES,
    ActionExists,
    ActionsQuery,
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
    OccursAfter,
    OccursBefore,
    RelationExists,
    ShorterChoose,
    ShorterThan,
    Shortest,
    Vocabulary,
    Xor,
    canonical_label,
    is_boolean,
)


class UndefinedAnswerError(Exception):
    """Raised when a program has no well-defined answer on a scene graph."""


@dataclass(frozen=True)
class RelationshipSpan:
    subject: str
    relation: str
    object: str
    frames: Tuple[int, ...]  # sorted, deduplicated, non-empty


@dataclass(frozen=True)
class ActionInterval:
    label: str
    start: int
    end: int

    @property
    def duration(self) -> int:
        return self.end - self.start + 1


@dataclass(frozen=True)
class SceneGraph:
    video_id: str
    num_frames: int
    relationships: Tuple[RelationshipSpan, ...]
    actions: Tuple[ActionInterval, ...]

    def __post_init__(self):
        if self.num_frames < 1:
            raise ValueError(f"{self.video_id}: num_frames must be positive")
        for span in self.relationships:
            if not span.frames:
                raise ValueError(f"{self.video_id}: relationship with empty frame set")
            if list(span.frames) != sorted(set(span.frames)):
                raise ValueError(f"{self.video_id}: relationship frames must be sorted and unique")
            if span.frames[0] < 1 or span.frames[-1] > self.num_frames:
                raise ValueError(f"{self.video_id}: relationship frame out of range")
        labels = [a.label for a in self.actions]
        if len(labels) != len(set(labels)):
            raise ValueError(f"{self.video_id}: duplicate action labels")
        for act in self.actions:
            if not (1 <= act.start <= act.end <= self.num_frames):
                raise ValueError(f"{self.video_id}: action interval out of range")

    def action(self, label: str) -> Optional[ActionInterval]:
        label = canonical_label(label)
        for act in self.actions:
            if act.label == label:
                return act
        return None

    def full_window(self) -> frozenset:
        return frozenset(range(1, self.num_frames + 1))

    def objects_present(self) -> frozenset:
        present = {span.object for span in self.relationships}
        present.update(span.subject for span in self.relationships)
        return frozenset(present)


# ---------------------------------------------------------------------------
# Serialization (JSONL schema: one video per line)


def scene_graph_to_dict(g: SceneGraph) -> dict:
    return {
        "video_id": g.video_id,
        "num_frames": g.num_frames,
        "relationships": [
            {
                "subject": s.subject,
                "relation": s.relation,
                "object": s.object,
                "frames": list(s.frames),
            }
            for s in g.relationships
        ],
        "actions": [{"label": a.label, "start": a.start, "end": a.end} for a in g.actions],
    }


def scene_graph_from_dict(data: dict) -> SceneGraph:
    relationships = tuple(
        RelationshipSpan(
            subject=canonical_label(r["subject"]),
            relation=canonical_label(r["relation"]),
            object=canonical_label(r["object"]),
            frames=tuple(sorted(set(int(f) for f in r["frames"]))),
        )
        for r in data.get("relationships", [])
    )
    actions = tuple(
        ActionInterval(label=canonical_label(a["label"]), start=int(a["start"]), end=int(a["end"]))
        for a in data.get("actions", [])
    )
    return SceneGraph(
        video_id=str(data["video_id"]),
        num_frames=int(data["num_frames"]),
        relationships=relationships,
        actions=actions,
    )


# ---------------------------------------------------------------------------
# Executor


def _span_frames(span: RelationshipSpan) -> frozenset:
    return frozenset(span.frames)


def _action_frames(act: ActionInterval) -> frozenset:
    return frozenset(range(act.start, act.end + 1))


def _sat_frames(p, g: SceneGraph) -> frozenset:
    """Frames at which a boolean event program holds, over the full video.

    Only frame-localizable programs can serve as events or localizer
    anchors; comparison programs (equals, longerThan, occurs*) cannot.
    """
    if isinstance(p, ObjExists):
        frames = set()
        for span in g.relationships:
            if span.object == p.object or span.subject == p.object:
                frames.update(span.frames)
        return frozenset(frames)
    if isinstance(p, RelationExists):
        frames = set()
        for span in g.relationships:
            if span.relation == p.relation:
                frames.update(span.frames)
        return frozenset(frames)
    if isinstance(p, ActionExists):
        act = g.action(p.action)
        return _action_frames(act) if act else frozenset()
    if isinstance(p, InteractionExists):
        frames = set()
        for span in g.relationships:
            if (
                span.subject == p.subject.object
                and span.relation == p.relation.relation
                and span.object == p.object.object
            ):
                frames.update(span.frames)
        return frozenset(frames)
    if isinstance(p, And):
        return _sat_frames(p.left, g) & _sat_frames(p.right, g)
    if isinstance(p, Xor):
        return _sat_frames(p.left, g) - _sat_frames(p.right, g)
    if isinstance(p, Localized):
        window = _localizer_window(p, g)
        if window is None:
            return frozenset()
        return _sat_frames(p.body, g) & window
    raise UndefinedAnswerError(
        f"{type(p).__name__} is not frame-localizable and cannot act as an event"
    )


def _anchor_span(cond, g: SceneGraph) -> Optional[Tuple[int, int]]:
    """(first, last) satisfying frame of an anchor condition, or None if the
    condition never holds (an invalid anchor)."""
    frames = _sat_frames(cond, g)
    if not frames:
        return None
    return (min(frames), max(frames))


def _localizer_window(p: Localized, g: SceneGraph) -> Optional[frozenset]:
    """Frame window selected by a localizer, or None on an invalid anchor.

    after a  -> frames strictly after a ends; before a -> strictly before a
    starts; while a -> a's own span; between a,b -> the open interval from
    the earlier anchor's end to the later anchor's start.
    """
    span1 = _anchor_span(p.cond1, g)
    if span1 is None:
        return None
    full = g.full_window()
    if p.localizer == "after":
        return frozenset(f for f in full if f > span1[1])
    if p.localizer == "before":
        return frozenset(f for f in full if f < span1[0])
    if p.localizer == "while":
        return frozenset(f for f in full if span1[0] <= f <= span1[1])
    span2 = _anchor_span(p.cond2, g)
    if span2 is None:
        return None
    earlier, later = (span1, span2) if span1[0] <= span2[0] else (span2, span1)
    return frozenset(f for f in full if earlier[1] < f < later[0])


def _open_candidates(p, g: SceneGraph, window: frozenset) -> Dict[str, int]:
    """Open-query candidates: label -> earliest in-window matching frame."""
    if isinstance(p, ObjectsQuery):
        out: Dict[str, int] = {}
        for span in g.relationships:
            if span.subject != p.subject.object or span.relation != p.relation.relation:
                continue
            hits = [f for f in span.frames if f in window]
            if not hits:
                continue
            first = min(hits)
            if span.object not in out or first < out[span.object]:
                out[span.object] = first
        return out
    if isinstance(p, ActionsQuery):
        out = {}
        for act in g.actions:
            hits = _action_frames(act) & window
            if hits:
                out[act.label] = min(hits)
        return out
    if isinstance(p, Localized):
        loc = _localizer_window(p, g)
        if loc is None:
            raise UndefinedAnswerError(
                f"{g.video_id}: localizer anchor never occurs for open query"
            )
        return _open_candidates(p.body, g, window & loc)
    raise UndefinedAnswerError(f"{type(p).__name__} is not an open set query")


def _action_candidates(p, g: SceneGraph, window: frozenset) -> List[ActionInterval]:
    """In-window actions for longest/shortest selection."""
    if isinstance(p, ActionsQuery):
        return [act for act in g.actions if _action_frames(act) & window]
    if isinstance(p, Localized):
        loc = _localizer_window(p, g)
        if loc is None:
            raise UndefinedAnswerError(
                f"{g.video_id}: localizer anchor never occurs for open query"
            )
        return _action_candidates(p.body, g, window & loc)
    raise UndefinedAnswerError(f"{type(p).__name__} is not an actions query")


def _eval(p, g: SceneGraph, window: frozenset) -> Answer:
    if isinstance(p, ObjExists):
        hit = any(
            (span.object == p.object or span.subject == p.object) and (_span_frames(span) & window)
            for span in g.relationships
        )
        return Answer.from_bool(hit)
    if isinstance(p, RelationExists):
        hit = any(
            span.relation == p.relation and (_span_frames(span) & window)
            for span in g.relationships
        )
        return Answer.from_bool(hit)
    if isinstance(p, ActionExists):
        act = g.action(p.action)
        return Answer.from_bool(bool(act and (_action_frames(act) & window)))
    if isinstance(p, InteractionExists):
        hit = any(
            span.subject == p.subject.object
            and span.relation == p.relation.relation
            and span.object == p.object.object
            and (_span_frames(span) & window)
            for span in g.relationships
        )
        return Answer.from_bool(hit)
    if isinstance(p, (ObjectsQuery, ActionsQuery)):
        candidates = _open_candidates(p, g, window)
        if not candidates:
            raise UndefinedAnswerError(f"{g.video_id}: open query has no matches")
        # Set-valued in principle; answered with the lexicographically least
        # member so the record stays a single vocabulary label.
        return Answer.label(min(candidates))
    if isinstance(p, (First, Last)):
        candidates = _open_candidates(p.body, g, window)
        if not candidates:
            raise UndefinedAnswerError(f"{g.video_id}: open query has no matches")
        ranked = sorted(candidates.items(), key=lambda kv: (kv[1], kv[0]))
        if isinstance(p, First):
            return Answer.label(ranked[0][0])
        last_frame = max(frame for _, frame in candidates.items())
        winners = sorted(label for label, frame in candidates.items() if frame == last_frame)
        return Answer.label(winners[0])
    if isinstance(p, (Longest, Shortest)):
        candidates = _action_candidates(p.body, g, window)
        if not candidates:
            raise UndefinedAnswerError(f"{g.video_id}: no in-window actions")
        if isinstance(p, Longest):
            best = sorted(candidates, key=lambda a: (-a.duration, a.label))[0]
        else:
            best = sorted(candidates, key=lambda a: (a.duration, a.label))[0]
        return Answer.label(best.label)
    if isinstance(p, And):
        return Answer.from_bool(
            _eval(p.left, g, window) == YES and _eval(p.right, g, window) == YES
        )
    if isinstance(p, Xor):
        return Answer.from_bool(
            _eval(p.left, g, window) == YES and _eval(p.right, g, window) == NO
        )
    if isinstance(p, EqualsObject):
        answer = _eval(p.query, g, window)
        return Answer.from_bool(answer.value == p.candidate.object)
    if isinstance(p, (LongerThan, ShorterThan)):
        first = g.action(p.first_action)
        second = g.action(p.second_action)
        if first is None or second is None:
            return NO
        if isinstance(p, LongerThan):
            return Answer.from_bool(first.duration > second.duration)
        return Answer.from_bool(first.duration < second.duration)
    if isinstance(p, (OccursBefore, OccursAfter)):
        first = _sat_frames(p.first_event, g) & window
        second = _sat_frames(p.second_event, g) & window
        if not first or not second:
            return NO
        if isinstance(p, OccursBefore):
            return Answer.from_bool(min(first) < min(second))
        return Answer.from_bool(min(first) > min(second))
    if isinstance(p, (ChooseObject, LongerChoose, ShorterChoose)):
        a = _eval(p.option_a, g, window)
        b = _eval(p.option_b, g, window)
        if a == b:
            raise UndefinedAnswerError(
                f"{g.video_id}: choose options both answer {a.value!r}"
            )
        winner = p.option_a if a == YES else p.option_b
        if isinstance(p, ChooseObject):
            return Answer.label(winner.candidate.object)
        return Answer.label(winner.first_action)
    if isinstance(p, ChooseTime):
        before = _eval(p.before_option, g, window)
        after = _eval(p.after_option, g, window)
        if before == after:
            raise UndefinedAnswerError(
                f"{g.video_id}: chooseTime options both answer {before.value!r}"
            )
        return Answer.temporal("before" if before == YES else "after")
    if isinstance(p, Localized):
        loc = _localizer_window(p, g)
        if loc is None:
            if is_boolean(p.body):
                # Invalid anchor action: the localized claim fails outright.
                return NO
            raise UndefinedAnswerError(
                f"{g.video_id}: localizer anchor never occurs for open query"
            )
        return _eval(p.body, g, window & loc)
    raise UndefinedAnswerError(f"cannot execute {type(p).__name__}")


def execute(p, g: SceneGraph) -> Answer:
    """Answer a program on a scene graph by searching through all frames."""
    return _eval(p, g, g.full_window())


def absent_objects(g: SceneGraph, vocab_objects: Iterable[str],
                   never_absent: frozenset = frozenset()) -> frozenset:
    """Vocabulary objects that never occur in the graph's tuples, minus the
    always-present exclusion list."""
    present = g.objects_present()
    pool = frozenset(canonical_label(o) for o in vocab_objects)
    return frozenset(o for o in pool - present if o not in never_absent)


# ---------------------------------------------------------------------------
# Synthetic generator


def generate_scene_graphs(
    seed: int,
    num_videos: int,
    frames: int = 30,
    density: float = 0.7,
    vocab: Optional[Vocabulary] = None,
) -> List[SceneGraph]:
    """Deterministic synthetic corpus of scene graphs.

    ``density`` scales the number of relationship tuples per video; 0 yields
    videos with no tuples at all.  Action intervals get pairwise-distinct
    starts and durations so selection questions have unambiguous answers.
    """
    if num_videos < 1:
        raise ValueError("num_videos must be positive")
    if frames < 16:
        raise ValueError("frames must be at least 16")
    if density < 0:
        raise ValueError("density must be non-negative")
    if vocab is None:
        from .programs import default_vocabulary

        vocab = default_vocabulary()

    object_pool = sorted(vocab.objects - vocab.never_absent)
    relation_pool = sorted(vocab.relations)
    action_pool = sorted(vocab.actions)
    if not object_pool or not relation_pool or not action_pool:
        raise ValueError("vocabulary too small to generate scene graphs")

    rng = random.Random(seed)
    graphs = []
    for index in range(num_videos):
        video_id = f"v{index:04d}"
        num_actions = min(len(action_pool), rng.randint(2, 4))
        labels = rng.sample(action_pool, num_actions)
        durations = rng.sample(range(2, 2 + max(4, frames // 4)), num_actions)
        starts: List[int] = []
        intervals = []
        # The first two actions are placed disjoint with a gap so windows
        # between and around them are never degenerate.
        first_start = rng.randint(1, max(1, frames // 5))
        first_end = first_start + durations[0] - 1
        second_start = rng.randint(first_end + 4, frames - durations[1] + 1)
        intervals.append(ActionInterval(labels[0], first_start, first_end))
        intervals.append(ActionInterval(labels[1], second_start, second_start + durations[1] - 1))
        starts.extend([first_start, second_start])
        for label, duration in zip(labels[2:], durations[2:]):
            limit = frames - duration + 1
            start = rng.randint(1, limit)
            while start in starts:
                start = start % limit + 1
            starts.append(start)
            intervals.append(ActionInterval(label=label, start=start, end=start + duration - 1))
        intervals.sort(key=lambda a: (a.start, a.label))

        num_tuples = round(density * 6)
        spans: Dict[Tuple[str, str, str], set] = {}
        for _ in range(num_tuples):
            relation = rng.choice(relation_pool)
            obj = rng.choice(object_pool)
            size = rng.randint(1, 4)
            hit_frames = rng.sample(range(1, frames + 1), min(size, frames))
            spans.setdefault(("person", relation, obj), set()).update(hit_frames)
        relationships = tuple(
            RelationshipSpan(subject=s, relation=r, object=o, frames=tuple(sorted(f)))
            for (s, r, o), f in sorted(spans.items())
        )
        graphs.append(
            SceneGraph(
                video_id=video_id,
                num_frames=frames,
                relationships=relationships,
                actions=tuple(intervals),
            )
        )
    return graphs
