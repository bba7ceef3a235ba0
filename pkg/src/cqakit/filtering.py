"""Quality filtering, per-language partitioning, chronological splits, and
corpus statistics."""

from dataclasses import dataclass, field

from .errors import ConfigError, PipelineError
from .ingest import QAPair

# Target languages, matched against question tags.
DEFAULT_LANGUAGES = (
    "c", "c++", "java", "python", "ruby", "lisp", "javascript", "c#", "go", "rust", "php",
)

DEFAULT_RATIOS = (0.8, 0.1, 0.1)

# Word-count histogram buckets: powers of two up to 4096, then overflow.
_BUCKET_EDGES = [2**i for i in range(13)]  # 1 .. 4096
HISTOGRAM_BUCKETS = ["0"] + [str(e) for e in _BUCKET_EDGES] + [">4096"]


@dataclass(frozen=True)
class FilterConfig:
    min_chars: int = 20
    max_chars: int = 4096
    languages: tuple[str, ...] = DEFAULT_LANGUAGES

    def __post_init__(self):
        if not (0 < self.min_chars < self.max_chars):
            raise ConfigError(
                f"need 0 < min_chars < max_chars, got {self.min_chars}/{self.max_chars}"
            )
        if not self.languages:
            raise ConfigError("languages must be non-empty")


@dataclass(frozen=True)
class FilterDecision:
    keep: bool
    reason: str | None = None


@dataclass
class SplitCorpus:
    """Chronological train/valid/test split of one language subset."""

    language: str
    train: list[QAPair]
    valid: list[QAPair]
    test: list[QAPair]


def length_filter(pair: QAPair, cfg: FilterConfig) -> FilterDecision:
    """Drop a pair iff its description or answer is strictly shorter than
    min_chars or strictly longer than max_chars (Unicode scalar count)."""
    for text in (pair.description, pair.answer):
        n = len(text)
        if n < cfg.min_chars:
            return FilterDecision(keep=False, reason="too_short")
        if n > cfg.max_chars:
            return FilterDecision(keep=False, reason="too_long")
    return FilterDecision(keep=True)


def partition_by_language(pairs, cfg: FilterConfig) -> tuple[dict[str, list[QAPair]], int]:
    """Partition pairs into per-language subsets by tag membership.

    A pair carrying several target tags is duplicated into each matching
    subset; pairs with no target tag are discarded (count returned).
    """
    subsets: dict[str, list[QAPair]] = {lang: [] for lang in cfg.languages}
    discarded = 0
    for pair in pairs:
        tags = set(pair.tags)
        matched = False
        for lang in cfg.languages:
            if lang in tags:
                subsets[lang].append(pair)
                matched = True
        if not matched:
            discarded += 1
    return subsets, discarded


def chronological_split(
    pairs: list[QAPair],
    ratios: tuple[float, float, float] = DEFAULT_RATIOS,
    language: str = "",
    allow_degenerate: bool = False,
) -> SplitCorpus:
    """Sort by (creation_date, question_id) and cut into train/valid/test.

    Train takes floor(r0*n), valid floor(r1*n), test the remainder, so the
    sizes differ from the exact ratios by less than one pair each.
    """
    if abs(sum(ratios) - 1.0) > 1e-9:
        raise ConfigError(f"split ratios must sum to 1, got {ratios}")
    if any(r < 0 for r in ratios):
        raise ConfigError(f"split ratios must be non-negative, got {ratios}")
    n = len(pairs)
    if n < 3 and not allow_degenerate:
        raise PipelineError(
            f"{n} pairs cannot fill three splits (pass allow_degenerate to permit empty ones)"
        )
    ordered = sorted(pairs, key=lambda p: (p.creation_date, p.question_id))
    n_train = int(ratios[0] * n)
    n_valid = int(ratios[1] * n)
    return SplitCorpus(
        language=language,
        train=ordered[:n_train],
        valid=ordered[n_train : n_train + n_valid],
        test=ordered[n_train + n_valid :],
    )


def word_count_bucket(n_words: int) -> str:
    if n_words <= 0:
        return "0"
    for edge in _BUCKET_EDGES:
        if n_words <= edge:
            return str(edge)
    return ">4096"


def _empty_histogram() -> dict[str, int]:
    return {bucket: 0 for bucket in HISTOGRAM_BUCKETS}


@dataclass
class LanguageStats:
    count: int = 0
    question_words: dict[str, int] = field(default_factory=_empty_histogram)
    answer_words: dict[str, int] = field(default_factory=_empty_histogram)

    def to_dict(self) -> dict:
        return {
            "count": self.count,
            "question_words": self.question_words,
            "answer_words": self.answer_words,
        }


def compute_stats(subsets: dict[str, list[QAPair]]) -> dict[str, LanguageStats]:
    """Per-language pair counts and word-count histograms.

    Question length counts the title plus description (the full question
    content); words are whitespace-delimited tokens. Empty subsets report
    count 0 with empty histograms.
    """
    report: dict[str, LanguageStats] = {}
    for lang, pairs in subsets.items():
        if not pairs:
            report[lang] = LanguageStats(count=0, question_words={}, answer_words={})
            continue
        stats = LanguageStats(count=len(pairs))
        for pair in pairs:
            q_words = len(pair.question.split()) + len(pair.description.split())
            a_words = len(pair.answer.split())
            stats.question_words[word_count_bucket(q_words)] += 1
            stats.answer_words[word_count_bucket(a_words)] += 1
        report[lang] = stats
    return report
