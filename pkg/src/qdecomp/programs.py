"""Question programs: AST, textual grammar, classification and canonical keys.

A question is represented as a small functional program, written as
``name(arg, ..., arg)`` with bare-word atoms.  Atoms are vocabulary labels
and may contain spaces, e.g. ``first(objects(objExists(person),
relationExists(touching)))``.  Programs are immutable trees; the canonical
rendering of a program doubles as its deduplication key.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Iterator, Optional, Union

LOCALIZERS = ("before", "after", "while", "between")
TEMPORAL_TOKENS = ("before", "after")

QUESTION_TYPES = (
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
    "objectsQuery",
    "actionTemporalLoc",
)

# Open-answer types excluded from scoring unless the ban list is overridden.
DEFAULT_BANNED_TYPES = frozenset({"objectsQuery", "actionTemporalLoc"})

DEFAULT_NEVER_ABSENT = frozenset({"person", "clothes", "floor", "hands", "hair"})


class ProgramError(ValueError):
    """Base class for program construction and parsing failures."""


class ProgramParseError(ProgramError):
    """Syntax error, unknown function name or arity mismatch in program text."""

    def __init__(self, message: str, position: int):
        super().__init__(f"{message} (at position {position})")
        self.position = position


class ProgramValidationError(ProgramError):
    """Structurally or lexically invalid program."""


def canonical_label(text: str) -> str:
    """Lowercase and collapse whitespace; labels keep internal spaces."""
    return " ".join(str(text).lower().split())


def canonical_answer(text: str) -> str:
    """Answers compare by lowercase, whitespace-normalized string equality."""
    return " ".join(str(text).lower().split())


# ---------------------------------------------------------------------------
# Answers


@dataclass(frozen=True)
class Answer:
    """A question answer: yes/no, a vocabulary label, or before/after."""

    kind: str  # "bool" | "label" | "temporal"
    value: str

    def __post_init__(self):
        if self.kind == "bool":
            if self.value not in ("yes", "no"):
                raise ValueError(f"bool answer must be yes/no, got {self.value!r}")
        elif self.kind == "temporal":
            if self.value not in TEMPORAL_TOKENS:
                raise ValueError(f"temporal answer must be before/after, got {self.value!r}")
        elif self.kind == "label":
            if not self.value:
                raise ValueError("label answer must be non-empty")
        else:
            raise ValueError(f"unknown answer kind {self.kind!r}")

    @property
    def text(self) -> str:
        return self.value

    @staticmethod
    def from_bool(flag: bool) -> "Answer":
        return YES if flag else NO

    @staticmethod
    def label(text: str) -> "Answer":
        return Answer("label", canonical_answer(text))

    @staticmethod
    def temporal(token: str) -> "Answer":
        return Answer("temporal", canonical_answer(token))


YES = Answer("bool", "yes")
NO = Answer("bool", "no")


# ---------------------------------------------------------------------------
# Vocabulary


@dataclass(frozen=True)
class Vocabulary:
    """Label inventories for objects, relations and actions."""

    objects: frozenset
    relations: frozenset
    actions: frozenset
    never_absent: frozenset = DEFAULT_NEVER_ABSENT

    @staticmethod
    def from_dict(data: dict) -> "Vocabulary":
        def labels(key, default=()):
            return frozenset(canonical_label(x) for x in data.get(key, default))

        return Vocabulary(
            objects=labels("objects"),
            relations=labels("relations"),
            actions=labels("actions"),
            never_absent=labels("never_absent", DEFAULT_NEVER_ABSENT),
        )

    def pool(self, kind: str) -> frozenset:
        return getattr(self, kind)


def load_vocabulary(path) -> Vocabulary:
    with open(path, "r", encoding="utf-8") as fh:
        return Vocabulary.from_dict(json.load(fh))


def default_vocabulary() -> Vocabulary:
    text = resources.files("qdecomp").joinpath("data/vocab.json").read_text("utf-8")
    return Vocabulary.from_dict(json.loads(text))


# ---------------------------------------------------------------------------
# AST


def _clean_label(slot: str, value) -> str:
    if not isinstance(value, str):
        raise ProgramValidationError(f"{slot} expects a label, got {type(value).__name__}")
    label = canonical_label(value)
    if not label:
        raise ProgramValidationError(f"{slot} label is empty")
    if any(ch in label for ch in "(),"):
        raise ProgramValidationError(f"{slot} label {label!r} contains reserved characters")
    return label


def _expect(condition: bool, message: str):
    if not condition:
        raise ProgramValidationError(message)


@dataclass(frozen=True)
class ObjExists:
    object: str

    def __post_init__(self):
        object.__setattr__(self, "object", _clean_label("objExists", self.object))


@dataclass(frozen=True)
class RelationExists:
    relation: str

    def __post_init__(self):
        object.__setattr__(self, "relation", _clean_label("relationExists", self.relation))


@dataclass(frozen=True)
class ActionExists:
    action: str

    def __post_init__(self):
        object.__setattr__(self, "action", _clean_label("actionExists", self.action))


@dataclass(frozen=True)
class InteractionExists:
    subject: "Program"
    relation: "Program"
    object: "Program"

    def __post_init__(self):
        _expect(isinstance(self.subject, ObjExists), "interactionExists subject must be objExists")
        _expect(isinstance(self.relation, RelationExists), "interactionExists relation must be relationExists")
        _expect(isinstance(self.object, ObjExists), "interactionExists object must be objExists")


@dataclass(frozen=True)
class ObjectsQuery:
    subject: "Program"
    relation: "Program"

    def __post_init__(self):
        _expect(isinstance(self.subject, ObjExists), "objects subject must be objExists")
        _expect(isinstance(self.relation, RelationExists), "objects relation must be relationExists")


@dataclass(frozen=True)
class ActionsQuery:
    pass


@dataclass(frozen=True)
class First:
    body: "Program"

    def __post_init__(self):
        _expect(is_set_query(self.body), "first body must be an open set query")


@dataclass(frozen=True)
class Last:
    body: "Program"

    def __post_init__(self):
        _expect(is_set_query(self.body), "last body must be an open set query")


@dataclass(frozen=True)
class Longest:
    body: "Program"

    def __post_init__(self):
        _expect(_is_action_query(self.body), "longest body must be an actions query")


@dataclass(frozen=True)
class Shortest:
    body: "Program"

    def __post_init__(self):
        _expect(_is_action_query(self.body), "shortest body must be an actions query")


@dataclass(frozen=True)
class And:
    left: "Program"
    right: "Program"

    def __post_init__(self):
        _expect(is_boolean(self.left), "and operands must be boolean programs")
        _expect(is_boolean(self.right), "and operands must be boolean programs")


@dataclass(frozen=True)
class Xor:
    """Asymmetric conjunction: left holds but right does not."""

    left: "Program"
    right: "Program"

    def __post_init__(self):
        _expect(is_boolean(self.left), "xor operands must be boolean programs")
        _expect(is_boolean(self.right), "xor operands must be boolean programs")


@dataclass(frozen=True)
class EqualsObject:
    candidate: "Program"
    query: "Program"

    def __post_init__(self):
        _expect(isinstance(self.candidate, ObjExists), "equals candidate must be objExists")
        _expect(is_selection_query(self.query), "equals query must be a single-answer open query")


@dataclass(frozen=True)
class LongerThan:
    first_action: str
    second_action: str

    def __post_init__(self):
        object.__setattr__(self, "first_action", _clean_label("longerThan", self.first_action))
        object.__setattr__(self, "second_action", _clean_label("longerThan", self.second_action))


@dataclass(frozen=True)
class ShorterThan:
    first_action: str
    second_action: str

    def __post_init__(self):
        object.__setattr__(self, "first_action", _clean_label("shorterThan", self.first_action))
        object.__setattr__(self, "second_action", _clean_label("shorterThan", self.second_action))


@dataclass(frozen=True)
class OccursBefore:
    first_event: "Program"
    second_event: "Program"

    def __post_init__(self):
        _expect(is_boolean(self.first_event), "occursBefore events must be boolean programs")
        _expect(is_boolean(self.second_event), "occursBefore events must be boolean programs")


@dataclass(frozen=True)
class OccursAfter:
    first_event: "Program"
    second_event: "Program"

    def __post_init__(self):
        _expect(is_boolean(self.first_event), "occursAfter events must be boolean programs")
        _expect(is_boolean(self.second_event), "occursAfter events must be boolean programs")


@dataclass(frozen=True)
class ChooseObject:
    option_a: "Program"
    option_b: "Program"

    def __post_init__(self):
        _expect(isinstance(self.option_a, EqualsObject), "chooseObject options must be equals programs")
        _expect(isinstance(self.option_b, EqualsObject), "chooseObject options must be equals programs")


@dataclass(frozen=True)
class ChooseTime:
    before_option: "Program"
    after_option: "Program"

    def __post_init__(self):
        _expect(isinstance(self.before_option, OccursBefore), "chooseTime first option must be occursBefore")
        _expect(isinstance(self.after_option, OccursAfter), "chooseTime second option must be occursAfter")


@dataclass(frozen=True)
class LongerChoose:
    option_a: "Program"
    option_b: "Program"

    def __post_init__(self):
        _expect(isinstance(self.option_a, LongerThan), "longerChoose options must be longerThan programs")
        _expect(isinstance(self.option_b, LongerThan), "longerChoose options must be longerThan programs")


@dataclass(frozen=True)
class ShorterChoose:
    option_a: "Program"
    option_b: "Program"

    def __post_init__(self):
        _expect(isinstance(self.option_a, ShorterThan), "shorterChoose options must be shorterThan programs")
        _expect(isinstance(self.option_b, ShorterThan), "shorterChoose options must be shorterThan programs")


@dataclass(frozen=True)
class Localized:
    """Restricts a boolean or open-query body to a frame window anchored on
    one condition (before/after/while) or two (between)."""

    body: "Program"
    localizer: str
    cond1: "Program"
    cond2: Optional["Program"] = None

    def __post_init__(self):
        _expect(self.localizer in LOCALIZERS, f"unknown localizer {self.localizer!r}")
        _expect(
            is_boolean(self.body) or is_set_query(self.body),
            "localized body must be boolean or an open set query",
        )
        _expect(is_boolean(self.cond1), "localizer condition must be a boolean program")
        if self.localizer == "between":
            _expect(self.cond2 is not None, "between requires two conditions")
            _expect(is_boolean(self.cond2), "localizer condition must be a boolean program")
        else:
            _expect(self.cond2 is None, f"{self.localizer} takes exactly one condition")


Program = Union[
    ObjExists, RelationExists, ActionExists, InteractionExists, ObjectsQuery,
    ActionsQuery, First, Last, Longest, Shortest, And, Xor, EqualsObject,
    LongerThan, ShorterThan, OccursBefore, OccursAfter, ChooseObject,
    ChooseTime, LongerChoose, ShorterChoose, Localized,
]

_BOOLEAN_TYPES = (
    ObjExists, RelationExists, ActionExists, InteractionExists, And, Xor,
    EqualsObject, LongerThan, ShorterThan, OccursBefore, OccursAfter,
)


def is_boolean(p) -> bool:
    """True for programs whose answer is yes/no."""
    if isinstance(p, _BOOLEAN_TYPES):
        return True
    if isinstance(p, Localized):
        return is_boolean(p.body)
    return False


def is_set_query(p) -> bool:
    """True for open queries producing a set of labels (objects/actions)."""
    if isinstance(p, (ObjectsQuery, ActionsQuery)):
        return True
    if isinstance(p, Localized):
        return is_set_query(p.body)
    return False


def _is_action_query(p) -> bool:
    if isinstance(p, ActionsQuery):
        return True
    if isinstance(p, Localized):
        return _is_action_query(p.body)
    return False


def is_selection_query(p) -> bool:
    """True for open queries with a single label answer (first/last/...)."""
    return isinstance(p, (First, Last, Longest, Shortest))


def is_open_query(p) -> bool:
    return is_set_query(p) or is_selection_query(p)


def child_programs(p) -> tuple:
    """Direct sub-programs of a node, tagged with their argument role."""
    if isinstance(p, InteractionExists):
        return (("subject", p.subject), ("relation", p.relation), ("object", p.object))
    if isinstance(p, ObjectsQuery):
        return (("subject", p.subject), ("relation", p.relation))
    if isinstance(p, (First, Last, Longest, Shortest)):
        return (("body", p.body),)
    if isinstance(p, (And, Xor)):
        return (("left", p.left), ("right", p.right))
    if isinstance(p, EqualsObject):
        return (("candidate", p.candidate), ("query", p.query))
    if isinstance(p, (OccursBefore, OccursAfter)):
        return (("first_event", p.first_event), ("second_event", p.second_event))
    if isinstance(p, (ChooseObject, LongerChoose, ShorterChoose)):
        return (("option_a", p.option_a), ("option_b", p.option_b))
    if isinstance(p, ChooseTime):
        return (("option_a", p.before_option), ("option_b", p.after_option))
    if isinstance(p, Localized):
        out = [("body", p.body), ("cond1", p.cond1)]
        if p.cond2 is not None:
            out.append(("cond2", p.cond2))
        return tuple(out)
    return ()


def program_labels(p) -> Iterator:
    """Yield (vocabulary kind, label) pairs for every atom in the program."""
    if isinstance(p, ObjExists):
        yield ("objects", p.object)
    elif isinstance(p, RelationExists):
        yield ("relations", p.relation)
    elif isinstance(p, ActionExists):
        yield ("actions", p.action)
    elif isinstance(p, (LongerThan, ShorterThan)):
        yield ("actions", p.first_action)
        yield ("actions", p.second_action)
    for _, sub in child_programs(p):
        yield from program_labels(sub)


def validate_labels(p, vocab: Vocabulary):
    """Reject programs whose atoms are not in the configured vocabulary."""
    for kind, label in program_labels(p):
        if label not in vocab.pool(kind):
            raise ProgramValidationError(f"unknown {kind[:-1]} label {label!r}")


# ---------------------------------------------------------------------------
# Grammar: parse and render


_SIG = {
    "objExists": (ObjExists, ("label",)),
    "relationExists": (RelationExists, ("label",)),
    "actionExists": (ActionExists, ("label",)),
    "interactionExists": (InteractionExists, ("program", "program", "program")),
    "objects": (ObjectsQuery, ("program", "program")),
    "actions": (ActionsQuery, ()),
    "first": (First, ("program",)),
    "last": (Last, ("program",)),
    "longest": (Longest, ("program",)),
    "shortest": (Shortest, ("program",)),
    "and": (And, ("program", "program")),
    "xor": (Xor, ("program", "program")),
    "equals": (EqualsObject, ("program", "program")),
    "longerThan": (LongerThan, ("label", "label")),
    "shorterThan": (ShorterThan, ("label", "label")),
    "occursBefore": (OccursBefore, ("program", "program")),
    "occursAfter": (OccursAfter, ("program", "program")),
    "chooseObject": (ChooseObject, ("program", "program")),
    "chooseTime": (ChooseTime, ("program", "program")),
    "longerChoose": (LongerChoose, ("program", "program")),
    "shorterChoose": (ShorterChoose, ("program", "program")),
    "before": (None, ("program", "program")),
    "after": (None, ("program", "program")),
    "while": (None, ("program", "program")),
    "between": (None, ("program", "program", "program")),
}

GRAMMAR_FUNCTIONS = tuple(sorted(_SIG))

_DELIMITERS = "(),"


class _Scanner:
    def __init__(self, text: str):
        self.text = text
        self.pos = 0

    def skip_ws(self):
        while self.pos < len(self.text) and self.text[self.pos].isspace():
            self.pos += 1

    def _until_delimiter(self) -> int:
        cur = self.pos
        while cur < len(self.text) and self.text[cur] not in _DELIMITERS:
            cur += 1
        return cur

    def parse_node(self):
        self.skip_ws()
        start = self.pos
        cut = self._until_delimiter()
        name = self.text[start:cut].strip()
        if not name:
            raise ProgramParseError("expected a function name", start)
        if cut >= len(self.text) or self.text[cut] != "(":
            raise ProgramParseError(f"expected '(' after {name!r}", cut)
        self.pos = cut + 1
        args = self._parse_args(name)
        return _build(name, args, start)

    def _parse_args(self, name: str) -> list:
        args = []
        self.skip_ws()
        if self.pos < len(self.text) and self.text[self.pos] == ")":
            self.pos += 1
            return args
        while True:
            args.append(self._parse_arg())
            self.skip_ws()
            if self.pos >= len(self.text):
                raise ProgramParseError(f"unterminated argument list for {name!r}", self.pos)
            ch = self.text[self.pos]
            if ch == ",":
                self.pos += 1
                continue
            if ch == ")":
                self.pos += 1
                return args
            raise ProgramParseError(f"expected ',' or ')' in {name!r} arguments", self.pos)

    def _parse_arg(self):
        self.skip_ws()
        start = self.pos
        cut = self._until_delimiter()
        if cut < len(self.text) and self.text[cut] == "(":
            return self.parse_node()
        atom = self.text[start:cut].strip()
        if not atom:
            raise ProgramParseError("empty argument", start)
        self.pos = cut
        return atom


def _build(name: str, args: list, position: int):
    if name not in _SIG:
        raise ProgramParseError(f"unknown function {name!r}", position)
    cls, slots = _SIG[name]
    if len(args) != len(slots):
        raise ProgramParseError(
            f"{name!r} expects {len(slots)} argument(s), got {len(args)}", position
        )
    for slot, arg in zip(slots, args):
        if slot == "label" and not isinstance(arg, str):
            raise ProgramParseError(f"{name!r} expects a label argument", position)
        if slot == "program" and isinstance(arg, str):
            raise ProgramParseError(
                f"{name!r} expects a program argument, got atom {arg!r}", position
            )
    if cls is None:  # localizer form: name(body, cond[, cond2])
        cond2 = args[2] if name == "between" else None
        return Localized(body=args[0], localizer=name, cond1=args[1], cond2=cond2)
    return cls(*args)


def parse_program(text: str, vocab: Optional[Vocabulary] = None):
    """Parse program text into an AST; optionally validate labels against a
    vocabulary.  Raises ProgramParseError / ProgramValidationError."""
    if not isinstance(text, str) or not text.strip():
        raise ProgramParseError("empty program text", 0)
    scanner = _Scanner(text)
    node = scanner.parse_node()
    scanner.skip_ws()
    if scanner.pos != len(scanner.text):
        raise ProgramParseError("trailing characters after program", scanner.pos)
    if vocab is not None:
        validate_labels(node, vocab)
    return node


def render_program(p) -> str:
    """Deterministic canonical text; parse_program(render_program(p)) == p."""
    if isinstance(p, ObjExists):
        return f"objExists({p.object})"
    if isinstance(p, RelationExists):
        return f"relationExists({p.relation})"
    if isinstance(p, ActionExists):
        return f"actionExists({p.action})"
    if isinstance(p, InteractionExists):
        return "interactionExists({}, {}, {})".format(
            render_program(p.subject), render_program(p.relation), render_program(p.object)
        )
    if isinstance(p, ObjectsQuery):
        return f"objects({render_program(p.subject)}, {render_program(p.relation)})"
    if isinstance(p, ActionsQuery):
        return "actions()"
    if isinstance(p, First):
        return f"first({render_program(p.body)})"
    if isinstance(p, Last):
        return f"last({render_program(p.body)})"
    if isinstance(p, Longest):
        return f"longest({render_program(p.body)})"
    if isinstance(p, Shortest):
        return f"shortest({render_program(p.body)})"
    if isinstance(p, And):
        return f"and({render_program(p.left)}, {render_program(p.right)})"
    if isinstance(p, Xor):
        return f"xor({render_program(p.left)}, {render_program(p.right)})"
    if isinstance(p, EqualsObject):
        return f"equals({render_program(p.candidate)}, {render_program(p.query)})"
    if isinstance(p, LongerThan):
        return f"longerThan({p.first_action}, {p.second_action})"
    if isinstance(p, ShorterThan):
        return f"shorterThan({p.first_action}, {p.second_action})"
    if isinstance(p, OccursBefore):
        return f"occursBefore({render_program(p.first_event)}, {render_program(p.second_event)})"
    if isinstance(p, OccursAfter):
        return f"occursAfter({render_program(p.first_event)}, {render_program(p.second_event)})"
    if isinstance(p, ChooseObject):
        return f"chooseObject({render_program(p.option_a)}, {render_program(p.option_b)})"
    if isinstance(p, ChooseTime):
        return f"chooseTime({render_program(p.before_option)}, {render_program(p.after_option)})"
    if isinstance(p, LongerChoose):
        return f"longerChoose({render_program(p.option_a)}, {render_program(p.option_b)})"
    if isinstance(p, ShorterChoose):
        return f"shorterChoose({render_program(p.option_a)}, {render_program(p.option_b)})"
    if isinstance(p, Localized):
        parts = [render_program(p.body), render_program(p.cond1)]
        if p.cond2 is not None:
            parts.append(render_program(p.cond2))
        return "{}({})".format(p.localizer, ", ".join(parts))
    raise ProgramValidationError(f"cannot render {type(p).__name__}")


def canonical_key(p) -> str:
    """Structural identity key; equal ASTs yield equal keys."""
    return render_program(p)


# ---------------------------------------------------------------------------
# Question-type classification


@dataclass(frozen=True)
class QuestionType:
    name: str
    banned: bool


def _base_type(p) -> str:
    if isinstance(p, ObjExists):
        return "objectExists"
    if isinstance(p, (RelationExists, ActionExists)):
        return "relationExists"
    if isinstance(p, InteractionExists):
        return "interaction"
    if isinstance(p, ObjectsQuery):
        return "objectsQuery"
    if isinstance(p, ActionsQuery):
        return "actionTemporalLoc"
    if isinstance(p, (First, Last)):
        return "firstLast"
    if isinstance(p, (Longest, Shortest)):
        return "longestShortestAction"
    if isinstance(p, (And, Xor)):
        return "conjunction"
    if isinstance(p, (EqualsObject, LongerThan, ShorterThan)):
        return "equals"
    if isinstance(p, (OccursBefore, OccursAfter)):
        return "existsTemporalLoc"
    if isinstance(p, (ChooseObject, ChooseTime, LongerChoose, ShorterChoose)):
        return "choose"
    if isinstance(p, Localized):
        inner = _base_type(p.body)
        if inner == "interaction":
            return "interactionTemporalLoc"
        if inner in ("objectExists", "relationExists"):
            return "existsTemporalLoc"
        return inner
    raise ProgramValidationError(f"cannot classify {type(p).__name__}")


def classify(p, banned_types: frozenset = DEFAULT_BANNED_TYPES) -> QuestionType:
    """Evaluation question type of a program; pure function of the AST root
    (plus a localizer wrapper for the temporal-localization types)."""
    name = _base_type(p)
    return QuestionType(name=name, banned=name in banned_types)
