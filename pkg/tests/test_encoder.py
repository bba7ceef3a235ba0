import io
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cqakit.encoder import (
    EncoderModel,
    FeatureVector,
    TrainingBatch,
    batch_from_pairs,
    encode,
    featurize,
    info_nce_loss,
    init_model,
    learning_rate,
    load_model,
    loss_gradient,
    model_fingerprint,
    query_text,
    save_model,
    train,
    write_trace_csv,
)
from cqakit.errors import DegenerateEmbeddingError, TrainingDivergedError
from cqakit.sampling import BatchSampler

from conftest import heldout_mrr_at_10, make_separable_corpus


def random_feature(rng, dim, nnz=4) -> FeatureVector:
    idx = np.sort(rng.choice(dim, size=min(nnz, dim), replace=False)).astype(np.int64)
    vals = rng.random(len(idx)) + 0.1
    vals /= np.linalg.norm(vals)
    return FeatureVector(indices=idx, values=vals, dim=dim)


def single_feature(i, dim) -> FeatureVector:
    return FeatureVector(
        indices=np.array([i], dtype=np.int64), values=np.array([1.0]), dim=dim
    )


def random_batch(rng, dim=32, embed=8, n=4, tau=1.0, extras=0):
    model = EncoderModel(projection=rng.normal(size=(dim, embed)) * 0.5, temperature=tau)
    batch = TrainingBatch(
        queries=[random_feature(rng, dim) for _ in range(n)],
        documents=[random_feature(rng, dim) for _ in range(n)],
        extra_negatives=[random_feature(rng, dim) for _ in range(extras)],
    )
    return model, batch


def finite_difference_gradient(model, batch, symmetric=False, h=1e-5):
    dense = np.zeros_like(model.projection)
    for r in range(model.dim):
        for c in range(model.embed_dim):
            plus = model.projection.copy()
            plus[r, c] += h
            minus = model.projection.copy()
            minus[r, c] -= h
            lp, _ = info_nce_loss(
                EncoderModel(projection=plus, temperature=model.temperature), batch, symmetric
            )
            lm, _ = info_nce_loss(
                EncoderModel(projection=minus, temperature=model.temperature), batch, symmetric
            )
            dense[r, c] = (lp - lm) / (2 * h)
    return dense


def max_relative_error(analytic, reference):
    return float(
        np.max(np.abs(analytic - reference) / np.maximum(1e-6, np.abs(analytic) + np.abs(reference)))
    )


class TestFeaturize:
    def test_punctuation_insensitive(self):
        a, b = featurize("malloc(5)", 256), featurize("malloc( 5 )", 256)
        assert np.array_equal(a.indices, b.indices)
        assert np.allclose(a.values, b.values)

    def test_unit_norm(self):
        f = featurize("some tokens with_underscores and camelCaseIdentifiers", 4096)
        assert abs(np.linalg.norm(f.values) - 1.0) <= 1e-9

    def test_truncation_at_256_tokens(self):
        words = [f"w{i}" for i in range(300)]
        full = featurize(" ".join(words), 4096)
        prefix = featurize(" ".join(words[:256]), 4096)
        assert np.array_equal(full.indices, prefix.indices)
        assert np.allclose(full.values, prefix.values)

    def test_empty_token_stream_rejected(self):
        with pytest.raises(ValueError):
            featurize("  ... !!! ", 256)

    @given(st.text(alphabet=st.characters(min_codepoint=32, max_codepoint=126), min_size=1, max_size=80))
    @settings(max_examples=60)
    def test_indices_sorted_and_bounded(self, text):
        try:
            f = featurize(text, 512)
        except ValueError:
            return
        assert np.all(np.diff(f.indices) > 0)
        assert f.indices[0] >= 0 and f.indices[-1] < 512
        assert abs(np.linalg.norm(f.values) - 1.0) <= 1e-9


class TestEncode:
    def test_identity_projection_returns_features(self):
        model = EncoderModel(projection=np.eye(8), temperature=1.0)
        f = FeatureVector(indices=np.array([1, 4], dtype=np.int64),
                          values=np.array([0.6, 0.8]), dim=8)
        e = encode(model, f)
        expected = np.zeros(8)
        expected[[1, 4]] = [0.6, 0.8]
        assert np.allclose(e, expected)

    def test_projection_scale_invariance(self):
        rng = np.random.default_rng(1)
        model, batch = random_batch(rng)
        scaled = EncoderModel(projection=3.7 * model.projection, temperature=model.temperature)
        for f in batch.queries:
            assert np.allclose(encode(model, f), encode(scaled, f), atol=1e-9)

    def test_disjoint_features_orthogonal_under_identity(self):
        model = EncoderModel(projection=np.eye(6), temperature=1.0)
        e1 = encode(model, single_feature(0, 6))
        e2 = encode(model, single_feature(3, 6))
        assert abs(float(e1 @ e2)) <= 1e-12

    def test_degenerate_embedding_rejected(self):
        model = EncoderModel(projection=np.zeros((6, 3)), temperature=1.0)
        with pytest.raises(DegenerateEmbeddingError):
            encode(model, single_feature(2, 6))


class TestInfoNceLoss:
    def _equal_similarity_batch(self, n):
        # every query and document is the same vector, so s(q_i, d_j) is one
        # constant for all i, j
        f = single_feature(0, 4)
        return TrainingBatch(queries=[f] * n, documents=[f] * n)

    def test_equal_similarities_give_log_n(self):
        model = EncoderModel(projection=np.eye(4), temperature=1.0)
        for n in (2, 4, 16):
            loss, per_pair = info_nce_loss(model, self._equal_similarity_batch(n))
            assert abs(loss - math.log(n)) <= 1e-12
            assert np.allclose(per_pair, math.log(n), atol=1e-12)

    def test_worked_two_pair_case(self):
        # cos(q_i, d_i) = 1, cos(q_i, d_j) = 0, tau = 1
        model = EncoderModel(projection=np.eye(2), temperature=1.0)
        batch = TrainingBatch(
            queries=[single_feature(0, 2), single_feature(1, 2)],
            documents=[single_feature(0, 2), single_feature(1, 2)],
        )
        loss, per_pair = info_nce_loss(model, batch)
        expected = math.log(1.0 + math.exp(-1.0))
        assert abs(loss - expected) <= 1e-12
        assert np.allclose(per_pair, expected, atol=1e-12)

    def test_sharp_temperature_limit(self):
        model = EncoderModel(projection=np.eye(2), temperature=0.01)
        batch = TrainingBatch(
            queries=[single_feature(0, 2), single_feature(1, 2)],
            documents=[single_feature(0, 2), single_feature(1, 2)],
        )
        loss, per_pair = info_nce_loss(model, batch)
        assert np.all(per_pair >= 0)
        assert loss < 1e-40

    def test_extra_negative_duplicate_of_positive_adds_log2(self):
        model = EncoderModel(projection=np.eye(2), temperature=0.01)
        q, d = single_feature(0, 2), single_feature(1, 2)
        base = TrainingBatch(queries=[q, d], documents=[q, d])
        with_extra = TrainingBatch(queries=[q, d], documents=[q, d], extra_negatives=[q])
        base_loss, base_pp = info_nce_loss(model, base)
        extra_loss, extra_pp = info_nce_loss(model, with_extra)
        # the duplicate ties the positive for query 0 only
        assert abs(extra_pp[0] - (base_pp[0] + math.log(2.0))) <= 1e-12
        assert abs(extra_pp[1] - base_pp[1]) <= 1e-12

    def test_loss_nonnegative_and_stable_at_sharp_temperature(self):
        rng = np.random.default_rng(42)
        for _ in range(300):
            model, batch = random_batch(rng, dim=24, embed=6, n=3, tau=0.01)
            loss, per_pair = info_nce_loss(model, batch)
            assert np.isfinite(loss)
            assert np.all(per_pair >= -1e-12)

    def test_embedding_scale_leaves_loss_unchanged(self):
        rng = np.random.default_rng(5)
        model, batch = random_batch(rng, tau=0.5)
        scaled = EncoderModel(projection=0.01 * model.projection, temperature=0.5)
        assert abs(info_nce_loss(model, batch)[0] - info_nce_loss(scaled, batch)[0]) <= 1e-9

    def test_small_batch_rejected(self):
        f = single_feature(0, 4)
        with pytest.raises(ValueError):
            TrainingBatch(queries=[f], documents=[f])


class TestLossGradient:
    def test_matches_finite_differences(self):
        rng = np.random.default_rng(11)
        for extras, symmetric in [(0, False), (2, False), (0, True)]:
            model, batch = random_batch(rng, dim=16, embed=5, n=3, tau=0.7, extras=extras)
            analytic = loss_gradient(model, batch, symmetric=symmetric).to_dense()
            reference = finite_difference_gradient(model, batch, symmetric=symmetric)
            assert max_relative_error(analytic, reference) <= 1e-4

    def test_gradient_orthogonal_to_projection(self):
        # cosine is invariant to rescaling the projection, so the directional
        # derivative along the projection itself must vanish
        rng = np.random.default_rng(3)
        model, batch = random_batch(rng, tau=0.5)
        grad = loss_gradient(model, batch).to_dense()
        assert abs(float((grad * model.projection).sum())) <= 1e-10

    def test_identical_pairs_have_zero_gradient(self):
        # fully symmetric configuration: uniform softmax, pulls cancel pushes
        f = featurize("identical content for every pair", 64)
        batch = TrainingBatch(queries=[f] * 4, documents=[f] * 4)
        model = init_model(dim=64, embed_dim=8, temperature=0.5, seed=1)
        grad = loss_gradient(model, batch)
        assert np.allclose(grad.block, 0.0, atol=1e-12)

    def test_sparse_gradient_touches_only_batch_rows(self):
        rng = np.random.default_rng(8)
        model, batch = random_batch(rng, dim=50, embed=4, n=2)
        grad = loss_gradient(model, batch)
        touched = set()
        for f in batch.queries + batch.documents:
            touched.update(f.indices.tolist())
        assert set(grad.indices.tolist()) == touched
        dense = grad.to_dense()
        untouched = [i for i in range(50) if i not in touched]
        assert np.all(dense[untouched] == 0.0)


class TestTrain:
    def test_separable_corpus_converges(self):
        pairs, heldout = make_separable_corpus(seed=0, noise_words=8)
        model = init_model(dim=2048, embed_dim=128, temperature=0.2, seed=3)
        untrained_mrr = heldout_mrr_at_10(model, pairs, heldout)
        sampler = BatchSampler({"synthetic": pairs}, batch_size=16, alpha=0.5, seed=3)
        trace = train(model, sampler, steps=200, peak_lr=3.0)
        tail = float(np.mean([t.loss for t in trace[-20:]]))
        assert trace[0].loss > math.log(16) / 2  # starts in the log(N) region
        assert tail < math.log(16) / 4
        trained_mrr = heldout_mrr_at_10(model, pairs, heldout)
        assert trained_mrr > untrained_mrr

    def test_zero_learning_rate_is_a_no_op(self):
        pairs, _ = make_separable_corpus(n_pairs=8, seed=1)
        model = init_model(dim=512, embed_dim=16, temperature=1.0, seed=2)
        before = model.projection.tobytes()
        sampler = BatchSampler({"synthetic": pairs}, batch_size=4, seed=2)
        train(model, sampler, steps=10, peak_lr=0.0)
        assert model.projection.tobytes() == before

    def test_seeded_runs_are_identical(self):
        def run():
            pairs, _ = make_separable_corpus(n_pairs=16, seed=5)
            model = init_model(dim=512, embed_dim=16, temperature=0.5, seed=5)
            sampler = BatchSampler({"synthetic": pairs}, batch_size=4, seed=5)
            trace = train(model, sampler, steps=30, peak_lr=1.0)
            return [t.loss for t in trace], model.projection.tobytes()

        (trace_a, weights_a), (trace_b, weights_b) = run(), run()
        assert trace_a == trace_b
        assert weights_a == weights_b

    def test_divergence_aborts_with_diagnostic(self):
        pairs, _ = make_separable_corpus(n_pairs=8, seed=1)
        model = init_model(dim=512, embed_dim=16, temperature=1.0, seed=2)
        model.projection[:] = np.nan
        sampler = BatchSampler({"synthetic": pairs}, batch_size=4, seed=2)
        with pytest.raises(TrainingDivergedError) as excinfo:
            train(model, sampler, steps=5, peak_lr=1.0)
        assert excinfo.value.step == 0
        assert excinfo.value.language == "synthetic"

    def test_learning_rate_schedule_shape(self):
        peak = 2.0
        steps = 100
        lrs = [learning_rate(s, steps, peak) for s in range(steps)]
        assert lrs[9] == peak  # top of the 10% warmup
        assert all(a < b for a, b in zip(lrs[:9], lrs[1:10]))  # rising
        assert all(a >= b for a, b in zip(lrs[10:], lrs[11:]))  # decaying
        assert lrs[-1] > 0


class TestCheckpoint:
    def test_round_trip_and_stable_fingerprint(self, tmp_path):
        model = init_model(dim=256, embed_dim=8, temperature=0.01, seed=9)
        path = tmp_path / "model.ckpt"
        save_model(model, path)
        loaded = load_model(path)
        assert loaded.dim == 256 and loaded.embed_dim == 8
        assert loaded.temperature == 0.01 and loaded.seed == 9
        assert np.array_equal(
            loaded.projection, model.projection.astype("<f4").astype(np.float64)
        )
        assert model_fingerprint(loaded) == model_fingerprint(model)

    def test_trace_csv_format(self):
        pairs, _ = make_separable_corpus(n_pairs=8, seed=1)
        model = init_model(dim=512, embed_dim=16, temperature=1.0, seed=2)
        sampler = BatchSampler({"synthetic": pairs}, batch_size=4, seed=2)
        trace = train(model, sampler, steps=3, peak_lr=0.1)
        buf = io.StringIO()
        write_trace_csv(trace, buf)
        lines = buf.getvalue().splitlines()
        assert lines[0] == "step,language,loss,lr"
        assert len(lines) == 4
        assert lines[1].startswith("0,synthetic,")


class TestBatchFromPairs:
    def test_query_is_question_plus_description(self, toy_pairs):
        pair = toy_pairs[0]
        assert query_text(pair) == f"{pair.question}\n{pair.description}"
        batch = batch_from_pairs(toy_pairs[:3], dim=1024, language="c")
        assert len(batch) == 3 and batch.language == "c"
