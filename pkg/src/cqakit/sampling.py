"""Smoothed multinomial batch sampling over per-language subsets.

Each batch is drawn from a single language subset; subset i is picked with
probability size_i**alpha / sum_j size_j**alpha, which boosts low-resource
subsets for alpha < 1. The RNG is an explicit numpy Generator (PCG64) so
batch streams are bit-reproducible from the seed.
"""

import json
import math
from dataclasses import dataclass

import numpy as np

from .ingest import QAPair

RNG_ALGORITHM = "numpy PCG64"


@dataclass(frozen=True)
class SubsetWeights:
    sizes: tuple[int, ...]
    alpha: float
    probs: tuple[float, ...]


@dataclass(frozen=True)
class DrawnBatch:
    pairs: list[QAPair]
    language: str
    with_replacement: bool


def make_rng(seed: int, stream: int = 0) -> np.random.Generator:
    """PCG64 generator for a (seed, stream) pair; streams keep independent
    uses of one run seed (init vs sampling) from colliding."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, stream])))


def subset_probabilities(sizes, alpha: float = 0.5) -> SubsetWeights:
    """Smoothed sampling weights: p_i = n_i**alpha / sum_j n_j**alpha."""
    sizes = tuple(int(n) for n in sizes)
    if not sizes:
        raise ValueError("sizes must be non-empty")
    if any(n <= 0 for n in sizes):
        raise ValueError(f"all subset sizes must be positive, got {sizes}")
    if alpha < 0:
        raise ValueError(f"alpha must be non-negative, got {alpha}")
    smoothed = [math.pow(n, alpha) for n in sizes]
    total = sum(smoothed)
    return SubsetWeights(sizes=sizes, alpha=alpha, probs=tuple(s / total for s in smoothed))


def draw_subset_index(weights: SubsetWeights, rng: np.random.Generator) -> int:
    """Draw one subset index from the smoothed multinomial."""
    u = rng.random()
    acc = 0.0
    for i, p in enumerate(weights.probs):
        acc += p
        if u < acc:
            return i
    return len(weights.probs) - 1


def sample_batch(
    weights: SubsetWeights,
    subsets: dict[str, list[QAPair]],
    batch_size: int,
    rng: np.random.Generator,
) -> DrawnBatch:
    """Draw a batch from one subset: first the subset per the smoothed
    multinomial, then batch_size pairs uniformly without replacement (with
    replacement, flagged, iff the subset is smaller than the batch)."""
    if batch_size < 2:
        raise ValueError(f"batch_size must be >= 2 for in-batch negatives, got {batch_size}")
    languages = list(subsets.keys())
    actual = tuple(len(v) for v in subsets.values())
    if weights.sizes != actual:
        raise ValueError(f"weights sizes {weights.sizes} do not match subsets {actual}")
    if any(n == 0 for n in actual):
        raise ValueError("every subset must be non-empty")
    idx = draw_subset_index(weights, rng)
    language = languages[idx]
    pool = subsets[language]
    replace = len(pool) < batch_size
    chosen = rng.choice(len(pool), size=batch_size, replace=replace)
    return DrawnBatch(
        pairs=[pool[i] for i in chosen], language=language, with_replacement=replace
    )


class BatchSampler:
    """Stateful sampler bundling subsets, weights, batch size, and RNG."""

    def __init__(
        self,
        subsets: dict[str, list[QAPair]],
        batch_size: int,
        alpha: float = 0.5,
        seed: int = 0,
    ):
        self.subsets = subsets
        self.batch_size = batch_size
        self.seed = seed
        self.weights = subset_probabilities([len(v) for v in subsets.values()], alpha)
        self.rng = make_rng(seed, stream=1)

    def draw(self) -> DrawnBatch:
        return sample_batch(self.weights, self.subsets, self.batch_size, self.rng)

    def manifest(self) -> dict:
        return {
            "rng": RNG_ALGORITHM,
            "seed": self.seed,
            "alpha": self.weights.alpha,
            "batch_size": self.batch_size,
            "languages": list(self.subsets.keys()),
            "sizes": list(self.weights.sizes),
            "probs": list(self.weights.probs),
        }

    def write_manifest(self, fh) -> None:
        json.dump(self.manifest(), fh, indent=2)
        fh.write("\n")
