"""Remove training pairs that overlap evaluation sets.

Two passes: exact substring matching of eval queries against pair text, and
MinHash-based fuzzy duplicate detection. Both passes compare casefolded text
with whitespace runs collapsed, so formatting differences cannot hide a
duplicate.
"""

from collections import deque
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .errors import ConfigError
from .ingest import QAPair
from .textnorm import normalize_ws, stable_hash32

_MERSENNE_PRIME = np.uint64((1 << 61) - 1)
_LOW29 = np.uint64((1 << 29) - 1)
_U29, _U32, _U61 = np.uint64(29), np.uint64(32), np.uint64(61)


@dataclass(frozen=True)
class DecontamConfig:
    eval_query_sets: tuple[tuple[str, tuple[str, ...]], ...] = ()
    num_permutations: int = 128
    shingle_width: int = 5
    jaccard_threshold: float = 0.8
    seed: int = 0

    def __post_init__(self):
        if self.num_permutations < 16:
            raise ConfigError(f"num_permutations must be >= 16, got {self.num_permutations}")
        if not (0 < self.jaccard_threshold <= 1):
            raise ConfigError(f"jaccard_threshold must be in (0, 1], got {self.jaccard_threshold}")
        if self.shingle_width < 1:
            raise ConfigError(f"shingle_width must be >= 1, got {self.shingle_width}")


@dataclass(frozen=True)
class MinHashSignature:
    """Per-permutation minima over a text's character shingles."""

    values: np.ndarray  # uint64, length num_permutations
    shingle_width: int
    seed: int

    @property
    def num_permutations(self) -> int:
        return len(self.values)


class MultiPatternMatcher:
    """Aho-Corasick automaton over a fixed pattern set.

    Built once, scanned in time linear in the text length regardless of the
    number of patterns.
    """

    def __init__(self, patterns: list[str]):
        self.patterns = list(patterns)
        self._goto: list[dict[str, int]] = [{}]
        self._fail: list[int] = [0]
        self._out: list[set[int]] = [set()]
        for idx, pattern in enumerate(self.patterns):
            node = 0
            for ch in pattern:
                nxt = self._goto[node].get(ch)
                if nxt is None:
                    self._goto.append({})
                    self._fail.append(0)
                    self._out.append(set())
                    nxt = len(self._goto) - 1
                    self._goto[node][ch] = nxt
                node = nxt
            self._out[node].add(idx)
        queue = deque(self._goto[0].values())
        while queue:
            node = queue.popleft()
            for ch, nxt in self._goto[node].items():
                queue.append(nxt)
                f = self._fail[node]
                while f and ch not in self._goto[f]:
                    f = self._fail[f]
                self._fail[nxt] = self._goto[f].get(ch, 0)
                self._out[nxt] |= self._out[self._fail[nxt]]

    def _walk(self, node: int, ch: str) -> int:
        while node and ch not in self._goto[node]:
            node = self._fail[node]
        return self._goto[node].get(ch, 0)

    def matches_any(self, text: str) -> bool:
        node = 0
        for ch in text:
            node = self._walk(node, ch)
            if self._out[node]:
                return True
        return False

    def matched_patterns(self, text: str) -> set[int]:
        found: set[int] = set()
        node = 0
        for ch in text:
            node = self._walk(node, ch)
            found |= self._out[node]
        return found


def pair_text(pair: QAPair) -> str:
    return f"{pair.question}\n{pair.description}\n{pair.answer}"


def _normalized_queries(eval_queries) -> list[str]:
    normalized = []
    for query in eval_queries:
        norm = normalize_ws(query)
        if not norm:
            raise ConfigError("empty eval query would drop every pair")
        normalized.append(norm)
    return normalized


def substring_decontaminate(
    train: list[QAPair], eval_queries: list[str]
) -> tuple[list[QAPair], list[QAPair]]:
    """Drop every pair containing any eval query as a contiguous substring.

    Matching is over normalized text (casefold, whitespace collapsed) of
    question + description + answer. Both outputs preserve input order.
    """
    matcher = MultiPatternMatcher(_normalized_queries(eval_queries))
    kept, dropped = [], []
    for pair in train:
        if matcher.matches_any(normalize_ws(pair_text(pair))):
            dropped.append(pair)
        else:
            kept.append(pair)
    return kept, dropped


def shingles(text: str, width: int) -> list[str]:
    """Contiguous character windows; texts shorter than the width yield one
    whole-text shingle."""
    if len(text) < width:
        return [text]
    return [text[i : i + width] for i in range(len(text) - width + 1)]


@lru_cache(maxsize=32)
def _perm_params(num_permutations: int, seed: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, 0x317A])))
    a = rng.integers(1, int(_MERSENNE_PRIME), size=num_permutations, dtype=np.uint64)
    b = rng.integers(0, int(_MERSENNE_PRIME), size=num_permutations, dtype=np.uint64)
    # a is split so every product in the hash fits uint64 (see _perm_hashes)
    return a >> _U32, a & np.uint64(0xFFFFFFFF), b


def _fold_mod_p(x: np.ndarray) -> np.ndarray:
    """Reduce uint64 values modulo the Mersenne prime 2**61 - 1."""
    x = (x & _MERSENNE_PRIME) + (x >> _U61)
    x = (x & _MERSENNE_PRIME) + (x >> _U61)
    return np.where(x >= _MERSENNE_PRIME, x - _MERSENNE_PRIME, x)


def _perm_hashes(base32: np.ndarray, a_hi, a_lo, b) -> np.ndarray:
    """(a * x + b) mod (2**61 - 1) for 32-bit x, exactly and overflow-free.

    a = a_hi * 2**32 + a_lo with a_hi < 2**29, so a_lo*x < 2**64 and
    a_hi*x < 2**61; the a_hi part is multiplied by 2**32 via a 61-bit
    rotate (2**61 == 1 mod p). Full-range multipliers matter: small ones
    barely wrap the modulus, leaving the permutations correlated and the
    Jaccard estimate biased.
    """
    x = base32[:, None]
    t_lo = _fold_mod_p(a_lo[None, :] * x)
    t_hi = _fold_mod_p(a_hi[None, :] * x)
    t_hi = ((t_hi & _LOW29) << _U32) | (t_hi >> _U29)
    t_hi = np.where(t_hi == _MERSENNE_PRIME, np.uint64(0), t_hi)
    return _fold_mod_p(t_lo + t_hi + b[None, :])


def minhash_signature(text: str, cfg: DecontamConfig) -> MinHashSignature:
    """Signature of the normalized text's shingle set under the config's
    permutation family; deterministic for fixed text and seed."""
    norm = normalize_ws(text)
    if not norm:
        raise ConfigError("cannot sign empty text")
    base = np.fromiter(
        (stable_hash32(s) for s in set(shingles(norm, cfg.shingle_width))),
        dtype=np.uint64,
    )
    a_hi, a_lo, b = _perm_params(cfg.num_permutations, cfg.seed)
    hashed = _perm_hashes(base, a_hi, a_lo, b)
    return MinHashSignature(
        values=hashed.min(axis=0), shingle_width=cfg.shingle_width, seed=cfg.seed
    )


def estimate_jaccard(a: MinHashSignature, b: MinHashSignature) -> float:
    """Fraction of positions where the two signatures agree."""
    if (
        a.num_permutations != b.num_permutations
        or a.shingle_width != b.shingle_width
        or a.seed != b.seed
    ):
        raise ConfigError("signatures built under different configurations")
    return float(np.count_nonzero(a.values == b.values)) / a.num_permutations


def fuzzy_dedup(
    train: list[QAPair], eval_queries: list[str], cfg: DecontamConfig
) -> tuple[list[QAPair], list[QAPair]]:
    """Drop pairs whose estimated Jaccard similarity to any eval query reaches
    the configured threshold.

    Every pair is compared against every query signature (no banding), so no
    candidate above threshold can be missed.
    """
    queries = _normalized_queries(eval_queries)
    query_matrix = np.stack([minhash_signature(q, cfg).values for q in queries])
    kept, dropped = [], []
    for pair in train:
        sig = minhash_signature(pair_text(pair), cfg)
        agreement = (query_matrix == sig.values[None, :]).mean(axis=1)
        if float(agreement.max()) >= cfg.jaccard_threshold:
            dropped.append(pair)
        else:
            kept.append(pair)
    return kept, dropped
