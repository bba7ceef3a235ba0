"""Searchable indices over answer corpora: an Okapi BM25 inverted index and a
brute-force dense index, sharing one tokenizer so lexical and dense runs are
comparable. Results order by score descending with ties broken by ascending
document id."""

import heapq
import json
import math
import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import DataFormatError, DegenerateEmbeddingError, FingerprintMismatchError
from .encoder import EncoderModel, encode, featurize, model_fingerprint, MAX_TOKENS
from .textnorm import TOKENIZER_VERSION, tokenize

_MAGIC = b"CQAIDX1\n"
INDEX_FORMAT_VERSION = 1

DEFAULT_K1 = 1.2
DEFAULT_B = 0.75


@dataclass
class Bm25Index:
    postings: dict[str, list[tuple[int, int]]]  # term -> [(doc_id, tf)], by doc_id
    doc_lengths: dict[int, int]
    avg_doc_length: float
    doc_count: int
    k1: float = DEFAULT_K1
    b: float = DEFAULT_B


@dataclass
class DenseIndex:
    doc_ids: np.ndarray  # int64, ascending
    embeddings: np.ndarray  # float32, len(doc_ids) x embed_dim, unit rows
    fingerprint: str
    skipped_doc_ids: list[int] = field(default_factory=list)


def _top_k(scored, k: int) -> list[tuple[int, float]]:
    """Best k by (score desc, doc_id asc); identical to a full sort cut at k."""
    best = heapq.nsmallest(k, scored, key=lambda item: (-item[1], item[0]))
    return [(doc_id, float(score)) for doc_id, score in best]


def build_bm25_index(
    corpus: dict[int, str], k1: float = DEFAULT_K1, b: float = DEFAULT_B
) -> Bm25Index:
    """Index a doc_id -> text corpus; empty documents index with length 0 and
    can never score above 0."""
    if not corpus:
        raise ValueError("corpus must be non-empty")
    postings: dict[str, list[tuple[int, int]]] = {}
    doc_lengths: dict[int, int] = {}
    for doc_id in sorted(corpus):
        tokens = tokenize(corpus[doc_id])
        doc_lengths[doc_id] = len(tokens)
        tf: dict[str, int] = {}
        for tok in tokens:
            tf[tok] = tf.get(tok, 0) + 1
        for term in sorted(tf):
            postings.setdefault(term, []).append((doc_id, tf[term]))
    n = len(doc_lengths)
    avg = sum(doc_lengths.values()) / n
    return Bm25Index(
        postings=postings, doc_lengths=doc_lengths, avg_doc_length=avg,
        doc_count=n, k1=k1, b=b,
    )


def bm25_idf(index: Bm25Index, term: str) -> float:
    """ln(1 + (N - df + 0.5)/(df + 0.5)); positive for every df <= N."""
    df = len(index.postings.get(term, ()))
    return math.log(1.0 + (index.doc_count - df + 0.5) / (df + 0.5))


def bm25_search(
    index: Bm25Index, query: str, k: int, max_query_tokens: int = MAX_TOKENS
) -> list[tuple[int, float]]:
    """Top-k documents for the query under Okapi BM25.

    score(q, d) = sum over query tokens t (with multiplicity) of
    IDF(t) * tf / (tf + k1 * (1 - b + b * len(d)/avg_len)). A query with no
    indexed terms returns an empty list.
    """
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    scores: dict[int, float] = {}
    for term in tokenize(query, max_tokens=max_query_tokens):
        plist = index.postings.get(term)
        if not plist:
            continue
        idf = bm25_idf(index, term)
        for doc_id, tf in plist:
            norm = 1.0 - index.b + index.b * index.doc_lengths[doc_id] / index.avg_doc_length
            scores[doc_id] = scores.get(doc_id, 0.0) + idf * tf / (tf + index.k1 * norm)
    return _top_k(scores.items(), k)


def build_dense_index(
    model: EncoderModel, corpus: dict[int, str]
) -> DenseIndex:
    """Embed every document with the model; documents whose features collapse
    (no tokens, or a degenerate projection) are skipped and recorded."""
    if not corpus:
        raise ValueError("corpus must be non-empty")
    doc_ids: list[int] = []
    rows: list[np.ndarray] = []
    skipped: list[int] = []
    for doc_id in sorted(corpus):
        try:
            rows.append(encode(model, featurize(corpus[doc_id], model.dim)).astype(np.float32))
            doc_ids.append(doc_id)
        except (ValueError, DegenerateEmbeddingError):
            skipped.append(doc_id)
    if not rows:
        raise DataFormatError("every document was skipped while building the dense index")
    return DenseIndex(
        doc_ids=np.array(doc_ids, dtype=np.int64),
        embeddings=np.stack(rows),
        fingerprint=model_fingerprint(model),
        skipped_doc_ids=skipped,
    )


def dense_search(
    index: DenseIndex, model: EncoderModel, query: str, k: int
) -> list[tuple[int, float]]:
    """Exact brute-force scan: dot products of the query embedding against
    every document embedding, cut to the top k."""
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    if model_fingerprint(model) != index.fingerprint:
        raise FingerprintMismatchError(
            "query encoder fingerprint does not match the index; re-index or load "
            "the checkpoint that built it"
        )
    q = encode(model, featurize(query, model.dim)).astype(np.float32)
    scores = index.embeddings @ q
    return _top_k(zip(index.doc_ids.tolist(), scores.tolist()), k)


def _write_container(path, header: dict, blocks: list[bytes]) -> None:
    from .manifest import atomic_write_bytes

    buf = bytearray(_MAGIC)
    header_bytes = json.dumps(header, sort_keys=True).encode("utf-8")
    buf += struct.pack("<I", len(header_bytes))
    buf += header_bytes
    buf += struct.pack("<I", len(blocks))
    for block in blocks:
        buf += struct.pack("<Q", len(block))
        buf += block
    atomic_write_bytes(path, bytes(buf))


def _read_container(path) -> tuple[dict, list[bytes]]:
    with open(path, "rb") as fh:
        data = fh.read()
    if not data.startswith(_MAGIC):
        raise DataFormatError("not an index file (bad magic)", path=str(path))
    pos = len(_MAGIC)
    (header_len,) = struct.unpack_from("<I", data, pos)
    pos += 4
    header = json.loads(data[pos : pos + header_len].decode("utf-8"))
    pos += header_len
    (n_blocks,) = struct.unpack_from("<I", data, pos)
    pos += 4
    blocks = []
    for _ in range(n_blocks):
        (length,) = struct.unpack_from("<Q", data, pos)
        pos += 8
        blocks.append(data[pos : pos + length])
        pos += length
    return header, blocks


def save_index(index, path) -> None:
    if isinstance(index, Bm25Index):
        header = {
            "version": INDEX_FORMAT_VERSION,
            "type": "bm25",
            "k1": index.k1,
            "b": index.b,
            "doc_count": index.doc_count,
            "avg_doc_length": index.avg_doc_length,
            "tokenizer": TOKENIZER_VERSION,
        }
        payload = {
            "postings": {term: [[d, tf] for d, tf in plist] for term, plist in index.postings.items()},
            "doc_lengths": {str(doc_id): n for doc_id, n in index.doc_lengths.items()},
        }
        _write_container(path, header, [json.dumps(payload).encode("utf-8")])
    elif isinstance(index, DenseIndex):
        header = {
            "version": INDEX_FORMAT_VERSION,
            "type": "dense",
            "embed_dim": int(index.embeddings.shape[1]),
            "count": int(index.embeddings.shape[0]),
            "fingerprint": index.fingerprint,
            "skipped_doc_ids": index.skipped_doc_ids,
            "tokenizer": TOKENIZER_VERSION,
        }
        blocks = [
            np.ascontiguousarray(index.doc_ids, dtype="<i8").tobytes(),
            np.ascontiguousarray(index.embeddings, dtype="<f4").tobytes(),
        ]
        _write_container(path, header, blocks)
    else:
        raise TypeError(f"cannot serialize {type(index).__name__}")


def load_index(path):
    header, blocks = _read_container(path)
    if header.get("version") != INDEX_FORMAT_VERSION:
        raise DataFormatError(f"unsupported index version {header.get('version')!r}", path=str(path))
    if header["type"] == "bm25":
        payload = json.loads(blocks[0].decode("utf-8"))
        postings = {
            term: [(int(d), int(tf)) for d, tf in plist]
            for term, plist in payload["postings"].items()
        }
        doc_lengths = {int(doc_id): int(n) for doc_id, n in payload["doc_lengths"].items()}
        for term, plist in postings.items():
            for doc_id, _ in plist:
                if doc_id not in doc_lengths:
                    raise DataFormatError(
                        f"posting for {term!r} references unknown doc {doc_id}", path=str(path)
                    )
        return Bm25Index(
            postings=postings,
            doc_lengths=doc_lengths,
            avg_doc_length=header["avg_doc_length"],
            doc_count=header["doc_count"],
            k1=header["k1"],
            b=header["b"],
        )
    if header["type"] == "dense":
        doc_ids = np.frombuffer(blocks[0], dtype="<i8").astype(np.int64)
        embeddings = np.frombuffer(blocks[1], dtype="<f4").astype(np.float32)
        embeddings = embeddings.reshape(header["count"], header["embed_dim"])
        return DenseIndex(
            doc_ids=doc_ids,
            embeddings=embeddings,
            fingerprint=header["fingerprint"],
            skipped_doc_ids=list(header.get("skipped_doc_ids", [])),
        )
    raise DataFormatError(f"unknown index type {header['type']!r}", path=str(path))


def write_run_file(fh, results, header: dict | None = None) -> None:
    """Write ranked results as tab-separated (query_id, rank, doc_id, score)
    lines; the optional header is recorded as leading '#' comments."""
    if header:
        for key in sorted(header):
            fh.write(f"# {key}={header[key]}\n")
    for query_id, ranked in results:
        for rank, (doc_id, score) in enumerate(ranked, start=1):
            fh.write(f"{query_id}\t{rank}\t{doc_id}\t{score:.9g}\n")
