"""Desk-scale dual encoder.

Texts become hashed n-gram feature vectors; a learned linear projection maps
them to L2-normalized embeddings scored by cosine similarity. Training
minimizes the contrastive softmax loss over in-batch negatives at a sharp
temperature, with analytic gradients and plain SGD under a linear
warmup/decay schedule. The featurizer is the only text-dependent part, so a
different backbone can be slotted in behind the same interfaces.
"""

import csv
import hashlib
import json
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateEmbeddingError, TrainingDivergedError
from .ingest import QAPair
from .textnorm import TOKENIZER_VERSION, stable_hash, tokenize

DEFAULT_DIM = 1 << 18
DEFAULT_EMBED_DIM = 128
DEFAULT_TEMPERATURE = 0.01
MAX_TOKENS = 256

FEATURIZER_VERSION = f"hashed-ngram-v1/{TOKENIZER_VERSION}"
CHECKPOINT_FORMAT = "cqakit-encoder-v1"


@dataclass(frozen=True)
class FeatureVector:
    """Sparse L2-normalized term-frequency vector in a hashed space."""

    indices: np.ndarray  # int64, strictly increasing
    values: np.ndarray  # float64, positive
    dim: int

    def __post_init__(self):
        if len(self.indices) != len(self.values):
            raise ValueError("indices and values must have equal length")
        if len(self.indices) and np.any(np.diff(self.indices) <= 0):
            raise ValueError("indices must be strictly increasing")


@dataclass
class EncoderModel:
    projection: np.ndarray  # dim x embed_dim
    temperature: float = DEFAULT_TEMPERATURE
    seed: int = 0
    featurizer_version: str = FEATURIZER_VERSION

    @property
    def dim(self) -> int:
        return self.projection.shape[0]

    @property
    def embed_dim(self) -> int:
        return self.projection.shape[1]


@dataclass
class TrainingBatch:
    """Aligned query/document features; position i is the only positive for
    query i, every other document (plus any extra negatives) is negative."""

    queries: list[FeatureVector]
    documents: list[FeatureVector]
    language: str = ""
    extra_negatives: list[FeatureVector] = field(default_factory=list)

    def __post_init__(self):
        if len(self.queries) != len(self.documents):
            raise ValueError("queries and documents must be aligned")
        if len(self.queries) < 2:
            raise ValueError("batch needs >= 2 pairs for in-batch negatives")

    def __len__(self) -> int:
        return len(self.queries)


@dataclass(frozen=True)
class TraceEntry:
    step: int
    language: str
    loss: float
    lr: float


def featurize(text: str, dim: int = DEFAULT_DIM, max_tokens: int = MAX_TOKENS) -> FeatureVector:
    """Hash token unigrams plus per-token character trigrams into [0, dim).

    The text is truncated to its first ``max_tokens`` tokens; counts are
    accumulated and L2-normalized. Raises ValueError on an empty token
    stream (callers should have filtered such texts).
    """
    tokens = tokenize(text, max_tokens=max_tokens)
    if not tokens:
        raise ValueError("text produced no tokens")
    counts: dict[int, float] = {}
    for tok in tokens:
        key = stable_hash("u\x1f" + tok) % dim
        counts[key] = counts.get(key, 0.0) + 1.0
        for i in range(len(tok) - 2):
            key = stable_hash("3\x1f" + tok[i : i + 3]) % dim
            counts[key] = counts.get(key, 0.0) + 1.0
    indices = np.array(sorted(counts), dtype=np.int64)
    values = np.array([counts[i] for i in indices], dtype=np.float64)
    values /= np.linalg.norm(values)
    return FeatureVector(indices=indices, values=values, dim=dim)


def query_text(pair: QAPair) -> str:
    """Retrieval query: question and description joined by a newline."""
    return f"{pair.question}\n{pair.description}"


def batch_from_pairs(pairs: list[QAPair], dim: int, language: str = "") -> TrainingBatch:
    return TrainingBatch(
        queries=[featurize(query_text(p), dim) for p in pairs],
        documents=[featurize(p.answer, dim) for p in pairs],
        language=language,
    )


def init_model(
    dim: int = DEFAULT_DIM,
    embed_dim: int = DEFAULT_EMBED_DIM,
    temperature: float = DEFAULT_TEMPERATURE,
    seed: int = 0,
) -> EncoderModel:
    """Fresh model with projection entries uniform in +-1/sqrt(dim)."""
    if temperature <= 0:
        raise ValueError(f"temperature must be positive, got {temperature}")
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, 0])))
    bound = 1.0 / np.sqrt(dim)
    projection = rng.uniform(-bound, bound, size=(dim, embed_dim))
    return EncoderModel(projection=projection, temperature=temperature, seed=seed)


def _project(model: EncoderModel, f: FeatureVector) -> np.ndarray:
    if f.dim != model.dim:
        raise ValueError(f"feature dim {f.dim} != model dim {model.dim}")
    return model.projection[f.indices].T @ f.values


def encode(model: EncoderModel, f: FeatureVector) -> np.ndarray:
    """L2-normalized embedding; cosine of two encodings is their dot product."""
    u = _project(model, f)
    norm = np.linalg.norm(u)
    if norm < 1e-12:
        raise DegenerateEmbeddingError(f"projected vector has norm {norm:.3e}")
    return u / norm


def _embed_many(model: EncoderModel, fs: list[FeatureVector]) -> tuple[np.ndarray, np.ndarray]:
    raw = np.stack([_project(model, f) for f in fs])
    norms = np.linalg.norm(raw, axis=1)
    if np.any(norms < 1e-12):
        bad = int(np.argmin(norms))
        raise DegenerateEmbeddingError(f"feature vector {bad} collapsed to norm {norms[bad]:.3e}")
    return raw / norms[:, None], norms


def _log_softmax_diag(similarities: np.ndarray, tau: float) -> np.ndarray:
    """Per-row loss: logsumexp of the scaled row minus its diagonal entry,
    computed with max subtraction so tau = 0.01 cannot overflow."""
    logits = similarities / tau
    peak = logits.max(axis=1)
    lse = peak + np.log(np.exp(logits - peak[:, None]).sum(axis=1))
    n = similarities.shape[0]
    return lse - logits[np.arange(n), np.arange(n)]


def info_nce_loss(
    model: EncoderModel, batch: TrainingBatch, symmetric: bool = False
) -> tuple[float, np.ndarray]:
    """Contrastive softmax loss over in-batch candidates.

    For query i the positive is document i; candidates are all in-batch
    documents plus any extra negatives. With ``symmetric`` a document-side
    term over in-batch queries is averaged in (off by default).
    """
    eq, _ = _embed_many(model, batch.queries)
    ed, _ = _embed_many(model, list(batch.documents) + list(batch.extra_negatives))
    sims = eq @ ed.T
    per_pair = _log_softmax_diag(sims, model.temperature)
    if symmetric:
        n = len(batch)
        per_pair = 0.5 * (per_pair + _log_softmax_diag(sims[:, :n].T, model.temperature))
    return float(per_pair.mean()), per_pair


@dataclass
class SparseGradient:
    """Gradient restricted to the projection rows touched by a batch."""

    indices: np.ndarray  # int64, sorted unique
    block: np.ndarray  # len(indices) x embed_dim
    dim: int

    def to_dense(self) -> np.ndarray:
        dense = np.zeros((self.dim, self.block.shape[1]))
        dense[self.indices] = self.block
        return dense

    def apply(self, projection: np.ndarray, lr: float) -> None:
        projection[self.indices] -= lr * self.block


def _softmax_weights(similarities: np.ndarray, tau: float) -> np.ndarray:
    logits = similarities / tau
    peak = logits.max(axis=1, keepdims=True)
    exp = np.exp(logits - peak)
    probs = exp / exp.sum(axis=1, keepdims=True)
    n = similarities.shape[0]
    probs[np.arange(n), np.arange(n)] -= 1.0
    return probs / (n * tau)


def loss_gradient(
    model: EncoderModel, batch: TrainingBatch, symmetric: bool = False
) -> SparseGradient:
    """Exact gradient of the mean loss w.r.t. the projection.

    Cost is proportional to the nonzeros in the batch (plus the batch-size-
    squared similarity matrix), never to the full projection.
    """
    queries = list(batch.queries)
    documents = list(batch.documents) + list(batch.extra_negatives)
    eq, nq = _embed_many(model, queries)
    ed, nd = _embed_many(model, documents)
    sims = eq @ ed.T

    directions = [(queries, eq, nq, documents, ed, nd, sims, 1.0)]
    if symmetric:
        n = len(batch)
        directions = [
            (queries, eq, nq, documents, ed, nd, sims, 0.5),
            (documents[:n], ed[:n], nd[:n], queries, eq, nq, sims[:, :n].T, 0.5),
        ]

    touched = np.unique(
        np.concatenate([f.indices for f in queries + documents])
    )
    block = np.zeros((touched.size, model.embed_dim))

    for a_fs, a_e, a_n, c_fs, c_e, c_n, s, scale in directions:
        w = _softmax_weights(s, model.temperature) * scale
        # anchors: d s_ij / d u_i = (e_cj - s_ij * e_ai) / ||u_i||
        grad_anchor = (w @ c_e - (w * s).sum(axis=1)[:, None] * a_e) / a_n[:, None]
        # candidates: d s_ij / d v_j = (e_ai - s_ij * e_cj) / ||v_j||
        grad_cand = (w.T @ a_e - (w * s).sum(axis=0)[:, None] * c_e) / c_n[:, None]
        for f, g in zip(a_fs, grad_anchor):
            rows = np.searchsorted(touched, f.indices)
            block[rows] += f.values[:, None] * g[None, :]
        for f, g in zip(c_fs, grad_cand):
            rows = np.searchsorted(touched, f.indices)
            block[rows] += f.values[:, None] * g[None, :]

    return SparseGradient(indices=touched, block=block, dim=model.dim)


def learning_rate(step: int, steps: int, peak_lr: float, warmup_frac: float = 0.1) -> float:
    """Linear warmup to the peak over the first warmup_frac of steps, then
    linear decay (0-based step index)."""
    warmup = max(1, round(warmup_frac * steps))
    if step < warmup:
        return peak_lr * (step + 1) / warmup
    remaining = max(1, steps - warmup)
    return peak_lr * (steps - step) / remaining


def train(
    model: EncoderModel,
    sampler,
    steps: int,
    peak_lr: float = 0.1,
    warmup_frac: float = 0.1,
    symmetric: bool = False,
) -> list[TraceEntry]:
    """SGD over sampled batches; mutates the model's projection in place.

    ``sampler.draw()`` must yield objects with ``pairs`` and ``language``
    attributes. Returns the per-step loss trace. Raises
    TrainingDivergedError on a non-finite loss.
    """
    if steps < 1:
        raise ValueError(f"steps must be >= 1, got {steps}")
    trace: list[TraceEntry] = []
    for step in range(steps):
        drawn = sampler.draw()
        batch = batch_from_pairs(drawn.pairs, model.dim, drawn.language)
        loss, _ = info_nce_loss(model, batch, symmetric=symmetric)
        if not np.isfinite(loss):
            raise TrainingDivergedError(step, drawn.language, loss)
        grad = loss_gradient(model, batch, symmetric=symmetric)
        lr = learning_rate(step, steps, peak_lr, warmup_frac)
        grad.apply(model.projection, lr)
        trace.append(TraceEntry(step=step, language=drawn.language, loss=loss, lr=lr))
    return trace


def write_trace_csv(trace: list[TraceEntry], fh) -> None:
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(["step", "language", "loss", "lr"])
    for entry in trace:
        writer.writerow([entry.step, entry.language, repr(entry.loss), repr(entry.lr)])


def model_bytes(model: EncoderModel) -> bytes:
    """Serialized checkpoint: one JSON header line, then the projection as
    row-major little-endian float32."""
    header = {
        "format": CHECKPOINT_FORMAT,
        "dim": model.dim,
        "embed_dim": model.embed_dim,
        "temperature": model.temperature,
        "seed": model.seed,
        "featurizer": model.featurizer_version,
    }
    payload = np.ascontiguousarray(model.projection, dtype="<f4").tobytes()
    return json.dumps(header, sort_keys=True).encode("utf-8") + b"\n" + payload


def model_fingerprint(model: EncoderModel) -> str:
    """Checkpoint hash; stable across a save/load round trip."""
    return hashlib.sha256(model_bytes(model)).hexdigest()


def save_model(model: EncoderModel, path) -> None:
    from .manifest import atomic_write_bytes

    atomic_write_bytes(path, model_bytes(model))


def load_model(path) -> EncoderModel:
    with open(path, "rb") as fh:
        header_line = fh.readline()
        header = json.loads(header_line.decode("utf-8"))
        if header.get("format") != CHECKPOINT_FORMAT:
            raise ValueError(f"unsupported checkpoint format {header.get('format')!r}")
        raw = fh.read()
    projection = np.frombuffer(raw, dtype="<f4").astype(np.float64)
    projection = projection.reshape(header["dim"], header["embed_dim"])
    return EncoderModel(
        projection=projection,
        temperature=header["temperature"],
        seed=header["seed"],
        featurizer_version=header["featurizer"],
    )
