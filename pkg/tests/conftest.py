from datetime import datetime, timedelta, timezone

import numpy as np
import pytest

from cqakit.ingest import QAPair

_EPOCH = datetime(2021, 1, 1, tzinfo=timezone.utc)


def rand_words(rng, n: int, length: int = 8) -> list[str]:
    letters = list("abcdefghijklmnopqrstuvwxyz")
    out, seen = [], set()
    while len(out) < n:
        word = "".join(rng.choice(letters, length))
        if word not in seen:
            seen.add(word)
            out.append(word)
    return out


def make_separable_corpus(n_pairs=64, seed=0, noise_vocab=50, noise_words=12):
    """Pairs whose query and answer share one unique marker token buried in
    random filler, so a linear model that keeps only marker features ranks
    perfectly while lexical overlap alone is noisy. Returns (pairs, held-out
    (question_id, query_text) probes with fresh filler)."""
    rng = np.random.default_rng(seed)
    words = rand_words(rng, noise_vocab + n_pairs)
    vocab, markers = words[:noise_vocab], words[noise_vocab:]

    def noise():
        return [vocab[i] for i in rng.integers(0, noise_vocab, noise_words)]

    pairs, heldout = [], []
    for i, marker in enumerate(markers):
        pairs.append(
            QAPair(
                question_id=i + 1,
                question=f"topic {marker}",
                description=" ".join(noise() + [marker]),
                answer=" ".join(noise() + [marker]),
                tags=("synthetic",),
                creation_date=_EPOCH + timedelta(days=i),
            )
        )
        heldout.append((i + 1, f"topic {marker}\n" + " ".join(noise() + [marker])))
    return pairs, heldout


def heldout_mrr_at_10(model, pairs, heldout) -> float:
    from cqakit.evaluation import mrr_at_k
    from cqakit.retrieval import build_dense_index, dense_search

    index = build_dense_index(model, {p.question_id: p.answer for p in pairs})
    run = {qid: dense_search(index, model, text, 10) for qid, text in heldout}
    return mrr_at_k(run, {p.question_id: {p.question_id} for p in pairs}, 10)


def make_pair(
    qid: int,
    day: int = 0,
    question: str = "How do I frobnicate the widget?",
    description: str = "I tried frobnicating the widget but it raises an error every time.",
    answer: str = "Call configure before frobnicate, the widget needs a backend first.",
    tags=("python",),
) -> QAPair:
    return QAPair(
        question_id=qid,
        question=question,
        description=description,
        answer=answer,
        tags=tuple(tags),
        creation_date=_EPOCH + timedelta(days=day),
    )


@pytest.fixture
def toy_posts_path():
    from cqakit.fixtures import toy_posts_path

    return toy_posts_path()


@pytest.fixture
def toy_eval_queries_path():
    from cqakit.fixtures import toy_eval_queries_path

    return toy_eval_queries_path()


@pytest.fixture
def toy_pairs(toy_posts_path):
    from cqakit.ingest import assemble_qa_pairs, parse_posts

    with open(toy_posts_path, "rb") as fh:
        return assemble_qa_pairs(parse_posts(fh))
