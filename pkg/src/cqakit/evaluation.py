"""Retrieval metrics (MRR@k, Recall@k, MAP) over run files and relevance
judgments, with JSON and aligned-table reporting.

Ranks are 1-based everywhere. Queries present in the judgments but missing
from a run score 0 rather than being skipped, so sparse runs cannot inflate
aggregates; a run that scores a query absent from the judgments is an error.
"""

import json
from dataclasses import dataclass, field

from .errors import DataFormatError

RetrievalRun = dict[int, list[tuple[int, float]]]
Qrels = dict[int, set[int]]


def load_qrels(path) -> Qrels:
    """Tab-separated (query_id, doc_id), one relevant pair per line."""
    qrels: Qrels = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) != 2:
                raise DataFormatError("expected 2 tab-separated fields", path=str(path), line=lineno)
            try:
                query_id, doc_id = int(parts[0]), int(parts[1])
            except ValueError:
                raise DataFormatError("query_id and doc_id must be integers", path=str(path), line=lineno)
            qrels.setdefault(query_id, set()).add(doc_id)
    if not qrels:
        raise DataFormatError("no judgments found", path=str(path))
    return qrels


def load_run(path) -> RetrievalRun:
    """Tab-separated (query_id, rank, doc_id, score); '#' lines are comments.

    Per query, ranks must be consecutive from 1, scores non-increasing, and
    document ids unique.
    """
    run: RetrievalRun = {}
    seen_docs: dict[int, set[int]] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line or line.startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) != 4:
                raise DataFormatError("expected 4 tab-separated fields", path=str(path), line=lineno)
            try:
                query_id, rank, doc_id = int(parts[0]), int(parts[1]), int(parts[2])
                score = float(parts[3])
            except ValueError:
                raise DataFormatError("malformed run record", path=str(path), line=lineno)
            ranked = run.setdefault(query_id, [])
            docs = seen_docs.setdefault(query_id, set())
            if rank != len(ranked) + 1:
                raise DataFormatError(
                    f"rank {rank} out of order for query {query_id}", path=str(path), line=lineno
                )
            if doc_id in docs:
                raise DataFormatError(
                    f"duplicate doc {doc_id} for query {query_id}", path=str(path), line=lineno
                )
            if ranked and score > ranked[-1][1]:
                raise DataFormatError(
                    f"scores increase at rank {rank} for query {query_id}", path=str(path), line=lineno
                )
            ranked.append((doc_id, score))
            docs.add(doc_id)
    return run


def _check_queries(run: RetrievalRun, qrels: Qrels) -> None:
    unknown = sorted(set(run) - set(qrels))
    if unknown:
        raise DataFormatError(f"run scores queries absent from qrels: {unknown[:5]}")


def mrr_at_k(run: RetrievalRun, qrels: Qrels, k: int) -> float:
    """Mean reciprocal rank of the first relevant doc within the top k."""
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    _check_queries(run, qrels)
    total = 0.0
    for query_id in sorted(qrels):
        relevant = qrels[query_id]
        for rank, (doc_id, _) in enumerate(run.get(query_id, [])[:k], start=1):
            if doc_id in relevant:
                total += 1.0 / rank
                break
    return total / len(qrels)


def recall_at_k(run: RetrievalRun, qrels: Qrels, k: int) -> float:
    """Mean fraction of each query's relevant docs found in its top k."""
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    _check_queries(run, qrels)
    total = 0.0
    for query_id in sorted(qrels):
        relevant = qrels[query_id]
        top = {doc_id for doc_id, _ in run.get(query_id, [])[:k]}
        total += len(relevant & top) / len(relevant)
    return total / len(qrels)


def mean_average_precision(run: RetrievalRun, qrels: Qrels) -> float:
    """Mean over queries of the average of precision values at each relevant
    retrieved rank (no cutoff)."""
    _check_queries(run, qrels)
    total = 0.0
    for query_id in sorted(qrels):
        relevant = qrels[query_id]
        hits = 0
        precision_sum = 0.0
        for rank, (doc_id, _) in enumerate(run.get(query_id, []), start=1):
            if doc_id in relevant:
                hits += 1
                precision_sum += hits / rank
        total += precision_sum / len(relevant)
    return total / len(qrels)


@dataclass
class EvalReport:
    mrr: dict[int, float]
    recall: dict[int, float]
    map_score: float
    query_count: int
    per_query: dict[int, dict] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "queries": self.query_count,
            "mrr_at_k": {str(k): v for k, v in self.mrr.items()},
            "recall_at_k": {str(k): v for k, v in self.recall.items()},
            "map": self.map_score,
            "per_query": {str(q): d for q, d in sorted(self.per_query.items())},
        }

    def to_table(self) -> str:
        """Aligned columns, values scaled to percentages."""
        headers = [f"MRR@{k}" for k in self.mrr] + [f"R@{k}" for k in self.recall] + ["MAP"]
        values = [self.mrr[k] for k in self.mrr] + [self.recall[k] for k in self.recall]
        values.append(self.map_score)
        cells = [f"{100 * v:.2f}" for v in values]
        widths = [max(len(h), len(c)) for h, c in zip(headers, cells)]
        head = "  ".join(h.rjust(w) for h, w in zip(headers, widths))
        body = "  ".join(c.rjust(w) for c, w in zip(cells, widths))
        return f"{head}\n{body}\n"


def evaluate(run: RetrievalRun, qrels: Qrels, ks: list[int]) -> EvalReport:
    if not ks:
        raise ValueError("ks must be non-empty")
    per_query: dict[int, dict] = {}
    for query_id in sorted(qrels):
        relevant = qrels[query_id]
        ranked = run.get(query_id, [])
        first_rank = None
        hits = 0
        precision_sum = 0.0
        for rank, (doc_id, _) in enumerate(ranked, start=1):
            if doc_id in relevant:
                if first_rank is None:
                    first_rank = rank
                hits += 1
                precision_sum += hits / rank
        per_query[query_id] = {
            "retrieved": len(ranked),
            "relevant": len(relevant),
            "relevant_retrieved": hits,
            "first_relevant_rank": first_rank,
            "ap": precision_sum / len(relevant),
        }
    return EvalReport(
        mrr={k: mrr_at_k(run, qrels, k) for k in ks},
        recall={k: recall_at_k(run, qrels, k) for k in ks},
        map_score=mean_average_precision(run, qrels),
        query_count=len(qrels),
        per_query=per_query,
    )


def evaluate_run(run_path, qrels_path, ks: list[int]) -> EvalReport:
    """Load a run file and judgments, compute all requested metrics."""
    return evaluate(load_run(run_path), load_qrels(qrels_path), ks)


def report_json(report: EvalReport) -> str:
    return json.dumps(report.to_dict(), indent=2) + "\n"
