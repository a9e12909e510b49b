import pytest

from qdecomp.corpus import build_corpus
from qdecomp.decompose import default_templates
from qdecomp.metrics import gold_from_records
from qdecomp.programs import Vocabulary, default_vocabulary
from qdecomp.scenegraph import (
    ActionInterval,
    RelationshipSpan,
    SceneGraph,
    generate_scene_graphs,
)

CORPUS_SEED = 7
CORPUS_VIDEOS = 30


@pytest.fixture(scope="session")
def vocab():
    return default_vocabulary()


@pytest.fixture(scope="session")
def templates():
    return default_templates()


@pytest.fixture(scope="session")
def tiny_vocab():
    return Vocabulary(
        objects=frozenset({"person", "dish", "phone", "bottle", "doorknob", "book", "doorway"}),
        relations=frozenset({"touching", "holding", "carrying"}),
        actions=frozenset(
            {"walking through the doorway", "smiling at something", "looking in the mirror"}
        ),
        never_absent=frozenset({"person"}),
    )


@pytest.fixture(scope="session")
def sg1():
    """10-frame video: doorway walk [1,4], smiling [6,9]; person touches a
    dish at {2,3}, a phone at {7,8}, and holds a bottle at {5..8}."""
    return SceneGraph(
        video_id="v1",
        num_frames=10,
        relationships=(
            RelationshipSpan("person", "touching", "dish", (2, 3)),
            RelationshipSpan("person", "touching", "phone", (7, 8)),
            RelationshipSpan("person", "holding", "bottle", (5, 6, 7, 8)),
        ),
        actions=(
            ActionInterval("walking through the doorway", 1, 4),
            ActionInterval("smiling at something", 6, 9),
        ),
    )


def _build(vocab, videos, seed):
    graphs = generate_scene_graphs(
        seed=seed, num_videos=videos, frames=30, density=0.7, vocab=vocab
    )
    records, dags = [], []
    for video_records, video_dags in build_corpus(graphs, vocab, seed=seed):
        records.extend(video_records)
        dags.extend(video_dags)
    return {
        "graphs": graphs,
        "records": records,
        "dags": dags,
        "gold": gold_from_records(records),
    }


@pytest.fixture(scope="session")
def corpus(vocab):
    """Main synthetic corpus: 30 videos, >= 500 DAGs."""
    return _build(vocab, CORPUS_VIDEOS, CORPUS_SEED)


@pytest.fixture(scope="session")
def small_corpus(vocab):
    """Compact corpus for randomized-prediction property loops."""
    return _build(vocab, 4, 11)


@pytest.fixture(scope="session")
def oracle_predictions(corpus):
    return {qid: entry.answer for qid, entry in corpus["gold"].items()}
