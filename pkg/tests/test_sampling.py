import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cqakit.sampling import (
    BatchSampler,
    draw_subset_index,
    make_rng,
    sample_batch,
    subset_probabilities,
)

from conftest import make_pair


def _subsets(sizes):
    return {
        f"lang{j}": [make_pair(j * 10_000 + i, day=i % 30) for i in range(n)]
        for j, n in enumerate(sizes)
    }


class TestSubsetProbabilities:
    def test_sqrt_smoothing_exact(self):
        weights = subset_probabilities([100, 400], alpha=0.5)
        assert weights.probs == (1 / 3, 2 / 3)

    def test_equal_sizes_symmetric(self):
        for alpha in (0.0, 0.5, 1.0, 2.0):
            weights = subset_probabilities([7, 7, 7], alpha=alpha)
            assert weights.probs == (1 / 3, 1 / 3, 1 / 3)

    def test_limiting_alphas(self):
        uniform = subset_probabilities([10, 1000, 50], alpha=0.0)
        assert uniform.probs == (1 / 3, 1 / 3, 1 / 3)
        proportional = subset_probabilities([10, 30], alpha=1.0)
        assert proportional.probs == (0.25, 0.75)

    def test_invalid_inputs(self):
        with pytest.raises(ValueError):
            subset_probabilities([])
        with pytest.raises(ValueError):
            subset_probabilities([5, 0])
        with pytest.raises(ValueError):
            subset_probabilities([5, 5], alpha=-0.1)

    @given(
        st.lists(st.integers(1, 10_000), min_size=1, max_size=8),
        st.floats(0.0, 3.0, allow_nan=False),
        st.integers(2, 50),
    )
    @settings(max_examples=80)
    def test_normalized_and_scale_free(self, sizes, alpha, scale):
        weights = subset_probabilities(sizes, alpha)
        assert abs(sum(weights.probs) - 1.0) <= 1e-12
        assert all(p > 0 for p in weights.probs)
        rescaled = subset_probabilities([scale * n for n in sizes], alpha)
        assert np.allclose(weights.probs, rescaled.probs, atol=1e-12, rtol=0)

    def test_monotonicity_in_sizes(self):
        base = subset_probabilities([50, 80, 120], alpha=0.5)
        grown = subset_probabilities([75, 80, 120], alpha=0.5)
        assert grown.probs[0] > base.probs[0]
        assert grown.probs[1] < base.probs[1]
        assert grown.probs[2] < base.probs[2]


class TestSampleBatch:
    def test_single_language_per_batch(self):
        subsets = _subsets([6, 9])
        weights = subset_probabilities([6, 9])
        rng = make_rng(3)
        for _ in range(30):
            batch = sample_batch(weights, subsets, batch_size=4, rng=rng)
            languages = {f"lang{p.question_id // 10_000}" for p in batch.pairs}
            assert languages == {batch.language}

    def test_without_replacement_unless_small(self):
        subsets = _subsets([3])
        weights = subset_probabilities([3])
        batch = sample_batch(weights, subsets, batch_size=3, rng=make_rng(0))
        assert not batch.with_replacement
        assert len({p.question_id for p in batch.pairs}) == 3
        big = sample_batch(weights, subsets, batch_size=5, rng=make_rng(0))
        assert big.with_replacement

    def test_batch_size_floor(self):
        subsets = _subsets([4])
        weights = subset_probabilities([4])
        with pytest.raises(ValueError):
            sample_batch(weights, subsets, batch_size=1, rng=make_rng(0))

    def test_seeded_determinism(self):
        def stream(seed):
            sampler = BatchSampler(_subsets([5, 8, 13]), batch_size=3, alpha=0.5, seed=seed)
            return [[p.question_id for p in sampler.draw().pairs] for _ in range(40)]

        assert stream(11) == stream(11)
        assert stream(11) != stream(12)

    def test_empirical_frequencies_match_probs(self):
        weights = subset_probabilities([100, 400], alpha=0.5)
        rng = make_rng(123)
        draws = 20_000
        hits = np.zeros(2)
        for _ in range(draws):
            hits[draw_subset_index(weights, rng)] += 1
        freq = hits / draws
        assert abs(freq[0] - 1 / 3) < 0.01
        assert abs(freq[1] - 2 / 3) < 0.01

    def test_sampler_manifest_contents(self):
        sampler = BatchSampler(_subsets([4, 9]), batch_size=2, alpha=0.5, seed=99)
        manifest = sampler.manifest()
        assert manifest["rng"] == "numpy PCG64"
        assert manifest["sizes"] == [4, 9]
        assert manifest["probs"] == [2 / 5, 3 / 5]
        assert manifest["seed"] == 99
