"""Figure rendering for the report paths (corpus stats, training trace,
retrieval metrics). Figures are written as PNG files next to the delimited
or JSON outputs they illustrate, with fixed metadata so reruns are
byte-identical."""

import io

from .manifest import atomic_write_bytes

_PNG_METADATA = {"Software": "cqakit"}


def _render(fig, path) -> None:
    buf = io.BytesIO()
    fig.savefig(buf, format="png", dpi=110, metadata=_PNG_METADATA)
    atomic_write_bytes(path, buf.getvalue())


def _pyplot():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    return plt


def save_length_histogram(language: str, stats, path) -> None:
    """Side-by-side question/answer word-count histogram for one language."""
    plt = _pyplot()
    buckets = list(stats.question_words.keys())
    q_counts = [stats.question_words[b] for b in buckets]
    a_counts = [stats.answer_words.get(b, 0) for b in buckets]
    x = range(len(buckets))
    fig, ax = plt.subplots(figsize=(7, 3.2))
    ax.bar([i - 0.2 for i in x], q_counts, width=0.4, label="question")
    ax.bar([i + 0.2 for i in x], a_counts, width=0.4, label="answer")
    ax.set_xticks(list(x))
    ax.set_xticklabels(buckets, rotation=45, ha="right", fontsize=7)
    ax.set_xlabel("words (bucket upper bound)")
    ax.set_ylabel("pairs")
    ax.set_title(f"{language}: question/answer length distribution")
    ax.legend()
    fig.tight_layout()
    _render(fig, path)
    plt.close(fig)


def save_pair_counts(counts: dict[str, int], path) -> None:
    """Pair count per language subset."""
    plt = _pyplot()
    languages = list(counts.keys())
    fig, ax = plt.subplots(figsize=(7, 3.2))
    ax.bar(languages, [counts[lang] for lang in languages])
    ax.set_ylabel("QA pairs")
    ax.set_title("pairs per language subset")
    ax.tick_params(axis="x", rotation=45)
    fig.tight_layout()
    _render(fig, path)
    plt.close(fig)


def save_loss_curve(trace, path) -> None:
    """Training loss and learning rate against the step index."""
    plt = _pyplot()
    steps = [entry.step for entry in trace]
    fig, ax = plt.subplots(figsize=(7, 3.2))
    ax.plot(steps, [entry.loss for entry in trace], label="loss")
    ax.set_xlabel("step")
    ax.set_ylabel("loss")
    twin = ax.twinx()
    twin.plot(steps, [entry.lr for entry in trace], color="tab:orange", label="lr")
    twin.set_ylabel("learning rate")
    ax.set_title("training trace")
    fig.tight_layout()
    _render(fig, path)
    plt.close(fig)


def save_metric_bars(report, path) -> None:
    """Bar chart of the aggregate retrieval metrics in an EvalReport."""
    plt = _pyplot()
    labels = [f"MRR@{k}" for k in report.mrr] + [f"R@{k}" for k in report.recall] + ["MAP"]
    values = [report.mrr[k] for k in report.mrr] + [report.recall[k] for k in report.recall]
    values.append(report.map_score)
    fig, ax = plt.subplots(figsize=(6, 3.2))
    ax.bar(labels, values)
    ax.set_ylim(0, 1.05)
    ax.set_ylabel("score")
    ax.set_title("retrieval metrics")
    fig.tight_layout()
    _render(fig, path)
    plt.close(fig)


def save_contamination_bars(report: dict, path) -> None:
    """Dropped-pair fractions per eval set for both decontamination passes."""
    plt = _pyplot()
    sets = list(report.keys())
    sub = [report[name]["substring"]["matched_fraction"] for name in sets]
    fuzzy = [report[name]["fuzzy"]["matched_fraction"] for name in sets]
    x = range(len(sets))
    fig, ax = plt.subplots(figsize=(6, 3.2))
    ax.bar([i - 0.2 for i in x], sub, width=0.4, label="substring")
    ax.bar([i + 0.2 for i in x], fuzzy, width=0.4, label="fuzzy")
    ax.set_xticks(list(x))
    ax.set_xticklabels(sets, rotation=30, ha="right")
    ax.set_ylabel("fraction of input pairs dropped")
    ax.set_title("decontamination")
    ax.legend()
    fig.tight_layout()
    _render(fig, path)
    plt.close(fig)
