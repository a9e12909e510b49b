"""qdecomp: question-program decomposition and consistency evaluation.

Decomposes compositional video-QA question programs into DAGs of
sub-questions, derives gold answers from spatio-temporal scene graphs or by
logical propagation, and evaluates prediction files with a
compositional-consistency metric suite (Accuracy, CA, RWR, RWR-n, Delta,
IC, and the per-DAG consistency/accuracy correlation).
"""

from .programs import (
    Answer,
    DEFAULT_BANNED_TYPES,
    ProgramError,
    ProgramParseError,
    ProgramValidationError,
    QUESTION_TYPES,
    QuestionType,
    Vocabulary,
    canonical_key,
    classify,
    default_vocabulary,
    load_vocabulary,
    parse_program,
    render_program,
)
from .scenegraph import (
    ActionInterval,
    RelationshipSpan,
    SceneGraph,
    UndefinedAnswerError,
    absent_objects,
    execute,
    generate_scene_graphs,
)
from .decompose import (
    COMPOSITION_RULES,
    QuestionDag,
    TemplateTable,
    decompose,
    default_templates,
    load_templates,
    render_question,
)
from .propagation import (
    AnswerEntry,
    ContradictionError,
    NegativeAnnotation,
    apply_negative_annotations,
    audit_gold,
    propagate_answers,
)
from .consistency import (
    CheckInstance,
    CheckTemplate,
    RULE_IDS,
    dag_consistency,
    evaluate_check,
    instantiate_checks,
)
from .metrics import (
    accuracy,
    build_report,
    compositional_accuracy,
    evaluate_predictions,
    ic_accuracy_correlation,
    internal_consistency,
    rwr,
    rwr_n,
)
from .baselines import (
    ConstantPredictor,
    MostLikelyPredictor,
    OraclePredictor,
    RandomPredictor,
    fit_most_likely,
    fit_random,
)
from .corpus import build_corpus, derive_gold

__version__ = "0.1.0"
