"""Composable pipeline subcommands: ingest, filter, split, decontaminate,
stats, train, index, search, eval.

Stages are connected only by files so any stage can be swapped or inspected.
Every run writes its artifacts atomically plus a manifest recording the
resolved configuration and input/output digests. Exit codes: 2 for flag
errors, 66 for missing inputs, 65 for data or config problems.
"""

import argparse
import json
import sys
import traceback
from pathlib import Path

from . import __version__
from .errors import ConfigError, PipelineError
from . import decontam as dc
from . import encoder as enc
from . import evaluation as ev
from . import filtering as fl
from . import ingest as ing
from . import retrieval as rt
from .manifest import RunManifest, atomic_write_text, manifest_path_for
from .sampling import BatchSampler

_REQUIRED = object()

_DEFAULTS = {
    "ingest": {"posts": _REQUIRED, "out": _REQUIRED, "diagnostics": None},
    "filter": {
        "pairs": _REQUIRED, "out_dir": _REQUIRED,
        "min_chars": 20, "max_chars": 4096,
        "languages": ",".join(fl.DEFAULT_LANGUAGES),
    },
    "split": {
        "in_dir": _REQUIRED, "out_dir": _REQUIRED,
        "ratios": "0.8,0.1,0.1", "allow_degenerate": False,
    },
    "stats": {"in_dir": _REQUIRED, "out": _REQUIRED, "figures": True},
    "decontaminate": {
        "pairs": _REQUIRED, "out": _REQUIRED, "eval_set": _REQUIRED,
        "dropped_out": None, "report": None, "figures": True,
        "num_permutations": 128, "shingle_width": 5,
        "jaccard_threshold": 0.8, "seed": 0,
    },
    "train": {
        "train_dir": None, "subset": None, "out": _REQUIRED,
        "steps": 200, "batch_size": 16, "alpha": 0.5, "seed": 0,
        "lr": 0.5, "dim": enc.DEFAULT_DIM, "embed_dim": enc.DEFAULT_EMBED_DIM,
        "temperature": enc.DEFAULT_TEMPERATURE, "symmetric": False,
        "figures": True,
    },
    "index": {
        "kind": _REQUIRED, "pairs": _REQUIRED, "out": _REQUIRED,
        "model": None, "k1": rt.DEFAULT_K1, "b": rt.DEFAULT_B,
    },
    "search": {
        "index": _REQUIRED, "queries": _REQUIRED, "out": _REQUIRED,
        "k": 10, "model": None, "qrels_out": None,
    },
    "eval": {
        "run": _REQUIRED, "qrels": _REQUIRED, "out": _REQUIRED,
        "k": "10,100", "figures": True,
    },
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cqakit", description=__doc__)
    parser.add_argument("--version", action="version", version=f"cqakit {__version__}")
    sub = parser.add_subparsers(dest="subcommand", required=True)

    def add(name, help_text):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", help="JSON config file; explicit flags override its values")
        return p

    p = add("ingest", "parse a posts XML dump into QA pairs (JSON lines)")
    p.add_argument("--posts", help="posts XML file")
    p.add_argument("--out", help="output pairs .jsonl")
    p.add_argument("--diagnostics", help="sidecar diagnostics JSON (default <out>.diagnostics.json)")

    p = add("filter", "apply length rules and partition pairs by language tag")
    p.add_argument("--pairs", help="input pairs .jsonl")
    p.add_argument("--out-dir", help="directory for per-language {lang}.jsonl files")
    p.add_argument("--min-chars", type=int)
    p.add_argument("--max-chars", type=int)
    p.add_argument("--languages", help="comma-separated target language tags")

    p = add("split", "chronological train/valid/test split per language")
    p.add_argument("--in-dir", help="directory of {lang}.jsonl files")
    p.add_argument("--out-dir", help="directory for {lang}.{train,valid,test}.jsonl")
    p.add_argument("--ratios", help="three comma-separated ratios summing to 1")
    p.add_argument("--allow-degenerate", action=argparse.BooleanOptionalAction)

    p = add("stats", "per-language pair counts and length histograms")
    p.add_argument("--in-dir", help="directory of {lang}[.split].jsonl files")
    p.add_argument("--out", help="stats report JSON")
    p.add_argument("--figures", action=argparse.BooleanOptionalAction,
                   help="render histogram figures next to the report")

    p = add("decontaminate", "drop training pairs overlapping eval query sets")
    p.add_argument("--pairs", help="input pairs .jsonl")
    p.add_argument("--out", help="output kept pairs .jsonl")
    p.add_argument("--eval-set", action="append",
                   help="NAME=path of a query .jsonl ({\"query\": ...} per line); repeatable")
    p.add_argument("--dropped-out", help="optional .jsonl for the dropped pairs")
    p.add_argument("--report", help="contamination report JSON (default <out>.contamination.json)")
    p.add_argument("--num-permutations", type=int)
    p.add_argument("--shingle-width", type=int)
    p.add_argument("--jaccard-threshold", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--figures", action=argparse.BooleanOptionalAction)

    p = add("train", "train the dual encoder on per-language training splits")
    p.add_argument("--train-dir", help="directory of {lang}.train.jsonl files")
    p.add_argument("--subset", action="append", help="LANG=path of a training .jsonl; repeatable")
    p.add_argument("--out", help="model checkpoint path")
    p.add_argument("--steps", type=int)
    p.add_argument("--batch-size", type=int)
    p.add_argument("--alpha", type=float, help="subset sampling smoothing exponent")
    p.add_argument("--seed", type=int)
    p.add_argument("--lr", type=float, help="peak learning rate")
    p.add_argument("--dim", type=int, help="hashed feature dimension")
    p.add_argument("--embed-dim", type=int)
    p.add_argument("--temperature", type=float)
    p.add_argument("--symmetric", action=argparse.BooleanOptionalAction,
                   help="add the document-to-query loss direction")
    p.add_argument("--figures", action=argparse.BooleanOptionalAction)

    p = add("index", "build a BM25 or dense index over answer corpora")
    p.add_argument("--kind", choices=["bm25", "dense"])
    p.add_argument("--pairs", action="append", help="pairs .jsonl forming the answer corpus; repeatable")
    p.add_argument("--out", help="index file")
    p.add_argument("--model", help="encoder checkpoint (dense only)")
    p.add_argument("--k1", type=float)
    p.add_argument("--b", type=float)

    p = add("search", "run top-k retrieval for every query pair")
    p.add_argument("--index", help="index file from the index subcommand")
    p.add_argument("--queries", help="pairs .jsonl; the query is question + description")
    p.add_argument("--out", help="run file (TSV)")
    p.add_argument("--k", type=int)
    p.add_argument("--model", help="encoder checkpoint (dense only)")
    p.add_argument("--qrels-out", help="also write (query_id, query_id) self-qrels")

    p = add("eval", "score a run file against relevance judgments")
    p.add_argument("--run", help="run file (TSV)")
    p.add_argument("--qrels", help="qrels file (TSV: query_id, doc_id)")
    p.add_argument("--k", help="comma-separated cutoffs")
    p.add_argument("--out", help="report JSON; table and figure are written alongside")
    p.add_argument("--figures", action=argparse.BooleanOptionalAction)

    return parser


def _resolve(args) -> dict:
    defaults = _DEFAULTS[args.subcommand]
    file_cfg = {}
    if getattr(args, "config", None):
        with open(args.config, "r", encoding="utf-8") as fh:
            file_cfg = json.load(fh)
        unknown = set(file_cfg) - set(defaults)
        if unknown:
            raise ConfigError(f"unknown config keys for {args.subcommand}: {sorted(unknown)}")
    resolved = {}
    for key, default in defaults.items():
        value = getattr(args, key, None)
        if value is None:
            value = file_cfg.get(key, default)
        if value is _REQUIRED:
            flag = "--" + key.replace("_", "-")
            raise ConfigError(f"missing required option {flag}")
        if value is None and default is not None and default is not _REQUIRED:
            value = default
        resolved[key] = value
    return resolved


def _require_file(path) -> Path:
    p = Path(path)
    if not p.is_file():
        raise FileNotFoundError(p)
    return p


def _require_dir(path) -> Path:
    p = Path(path)
    if not p.is_dir():
        raise FileNotFoundError(p)
    return p


def _read_pairs(path) -> list[ing.QAPair]:
    with open(_require_file(path), "r", encoding="utf-8") as fh:
        return ing.read_pairs_jsonl(fh, path=str(path))


def _pairs_text(pairs) -> str:
    return "".join(json.dumps(p.to_dict(), ensure_ascii=False) + "\n" for p in pairs)


def _json_text(obj) -> str:
    return json.dumps(obj, indent=2) + "\n"


def _language_groups(in_dir: Path) -> dict[str, list[Path]]:
    groups: dict[str, list[Path]] = {}
    for path in sorted(in_dir.glob("*.jsonl")):
        lang = path.name.split(".")[0]
        groups.setdefault(lang, []).append(path)
    if not groups:
        raise ConfigError(f"no .jsonl corpus files found in {in_dir}")
    return groups


def _cmd_ingest(cfg, manifest):
    posts = _require_file(cfg["posts"])
    out = Path(cfg["out"])
    diag_path = Path(cfg["diagnostics"]) if cfg["diagnostics"] else Path(str(out) + ".diagnostics.json")
    manifest.add_input(posts)

    diag = ing.IngestDiagnostics()
    with open(posts, "rb") as fh:
        pairs = ing.assemble_qa_pairs(ing.parse_posts(fh, diag), diag)
    atomic_write_text(out, _pairs_text(pairs))
    atomic_write_text(diag_path, _json_text(diag.to_dict()))
    manifest.add_output(out)
    manifest.add_output(diag_path)
    print(
        f"[ingest] rows_read={diag.rows_read} rows_skipped={diag.rows_skipped} "
        f"dangling_accepted={diag.dangling_accepted} pairs={diag.pairs_emitted} -> {out}"
    )
    return out


def _cmd_filter(cfg, manifest):
    pairs_path = _require_file(cfg["pairs"])
    out_dir = Path(cfg["out_dir"])
    languages = tuple(lang.strip() for lang in cfg["languages"].split(",") if lang.strip())
    fcfg = fl.FilterConfig(min_chars=cfg["min_chars"], max_chars=cfg["max_chars"], languages=languages)
    manifest.add_input(pairs_path)

    pairs = _read_pairs(pairs_path)
    kept = []
    reasons = {"too_short": 0, "too_long": 0}
    for pair in pairs:
        decision = fl.length_filter(pair, fcfg)
        if decision.keep:
            kept.append(pair)
        else:
            reasons[decision.reason] += 1
    subsets, discarded = fl.partition_by_language(kept, fcfg)

    out_dir.mkdir(parents=True, exist_ok=True)
    per_language = {}
    for lang, members in subsets.items():
        per_language[lang] = len(members)
        if members:
            path = out_dir / f"{lang}.jsonl"
            atomic_write_text(path, _pairs_text(members))
            manifest.add_output(path)
    report = {
        "input": len(pairs),
        "kept_after_length": len(kept),
        "dropped_too_short": reasons["too_short"],
        "dropped_too_long": reasons["too_long"],
        "no_target_tag": discarded,
        "per_language": per_language,
    }
    report_path = out_dir / "filter_report.json"
    atomic_write_text(report_path, _json_text(report))
    manifest.add_output(report_path)
    print(
        f"[filter] input={len(pairs)} kept={len(kept)} "
        f"short={reasons['too_short']} long={reasons['too_long']} untagged={discarded} -> {out_dir}"
    )
    return out_dir


def _cmd_split(cfg, manifest):
    in_dir = _require_dir(cfg["in_dir"])
    out_dir = Path(cfg["out_dir"])
    parts = [float(r) for r in cfg["ratios"].split(",")]
    if len(parts) != 3:
        raise ConfigError(f"--ratios needs three values, got {cfg['ratios']!r}")
    ratios = (parts[0], parts[1], parts[2])

    out_dir.mkdir(parents=True, exist_ok=True)
    report = {}
    for lang, paths in _language_groups(in_dir).items():
        if len(paths) > 1 or paths[0].name != f"{lang}.jsonl":
            raise ConfigError(f"split expects one {lang}.jsonl per language, found {paths}")
        manifest.add_input(paths[0])
        pairs = _read_pairs(paths[0])
        corpus = fl.chronological_split(
            pairs, ratios=ratios, language=lang, allow_degenerate=bool(cfg["allow_degenerate"])
        )
        for name, members in (("train", corpus.train), ("valid", corpus.valid), ("test", corpus.test)):
            path = out_dir / f"{lang}.{name}.jsonl"
            atomic_write_text(path, _pairs_text(members))
            manifest.add_output(path)
        report[lang] = {
            "train": len(corpus.train), "valid": len(corpus.valid), "test": len(corpus.test),
        }
        print(
            f"[split] {lang}: train={len(corpus.train)} valid={len(corpus.valid)} test={len(corpus.test)}"
        )
    report_path = out_dir / "split_report.json"
    atomic_write_text(report_path, _json_text(report))
    manifest.add_output(report_path)
    return out_dir


def _cmd_stats(cfg, manifest):
    in_dir = _require_dir(cfg["in_dir"])
    out = Path(cfg["out"])
    subsets: dict[str, list[ing.QAPair]] = {}
    for lang, paths in _language_groups(in_dir).items():
        subsets[lang] = []
        for path in paths:
            manifest.add_input(path)
            subsets[lang].extend(_read_pairs(path))
    report = fl.compute_stats(subsets)
    atomic_write_text(out, _json_text({lang: stats.to_dict() for lang, stats in report.items()}))
    manifest.add_output(out)
    if cfg["figures"]:
        from . import plots

        counts_path = out.parent / "pair_counts.png"
        plots.save_pair_counts({lang: s.count for lang, s in report.items()}, counts_path)
        manifest.add_output(counts_path)
        for lang, stats in report.items():
            if stats.count == 0:
                continue
            fig_path = out.parent / f"lengths_{lang}.png"
            plots.save_length_histogram(lang, stats, fig_path)
            manifest.add_output(fig_path)
    print(f"[stats] languages={len(report)} -> {out}")
    return out


def _load_eval_sets(specs) -> list[tuple[str, list[str]]]:
    sets = []
    for spec in specs:
        if "=" not in spec:
            raise ConfigError(f"--eval-set expects NAME=path, got {spec!r}")
        name, _, path = spec.partition("=")
        queries = []
        with open(_require_file(path), "r", encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                line = line.strip()
                if not line:
                    continue
                record = json.loads(line)
                if "query" not in record:
                    raise ConfigError(f"{path}: line {lineno} has no 'query' key")
                queries.append(record["query"])
        if not queries:
            raise ConfigError(f"eval set {name!r} is empty")
        sets.append((name, queries))
    return sets


def _cmd_decontaminate(cfg, manifest):
    pairs_path = _require_file(cfg["pairs"])
    out = Path(cfg["out"])
    report_path = Path(cfg["report"]) if cfg["report"] else Path(str(out) + ".contamination.json")
    eval_sets = _load_eval_sets(cfg["eval_set"])
    dcfg = dc.DecontamConfig(
        num_permutations=cfg["num_permutations"],
        shingle_width=cfg["shingle_width"],
        jaccard_threshold=cfg["jaccard_threshold"],
        seed=cfg["seed"],
    )
    manifest.add_input(pairs_path)
    for spec in cfg["eval_set"]:
        manifest.add_input(spec.partition("=")[2])

    pairs = _read_pairs(pairs_path)
    total = len(pairs)
    kept = pairs
    dropped_all: list[ing.QAPair] = []
    report: dict[str, dict] = {}
    for name, queries in eval_sets:
        kept, dropped_sub = dc.substring_decontaminate(kept, queries)
        matcher = dc.MultiPatternMatcher([dc.normalize_ws(q) for q in queries])
        hit_queries = set()
        for pair in dropped_sub:
            hit_queries |= matcher.matched_patterns(dc.normalize_ws(dc.pair_text(pair)))
        kept, dropped_fuzzy = dc.fuzzy_dedup(kept, queries, dcfg)
        dropped_all.extend(dropped_sub)
        dropped_all.extend(dropped_fuzzy)
        report[name] = {
            "substring": {
                "matched_count": len(dropped_sub),
                "matched_fraction": len(dropped_sub) / total if total else 0.0,
                "queries_hit": len(hit_queries),
                "queries_total": len(queries),
            },
            "fuzzy": {
                "matched_count": len(dropped_fuzzy),
                "matched_fraction": len(dropped_fuzzy) / total if total else 0.0,
            },
        }
        print(
            f"[decontaminate] {name}: substring={len(dropped_sub)} fuzzy={len(dropped_fuzzy)}"
        )

    atomic_write_text(out, _pairs_text(kept))
    manifest.add_output(out)
    if cfg["dropped_out"]:
        atomic_write_text(cfg["dropped_out"], _pairs_text(dropped_all))
        manifest.add_output(cfg["dropped_out"])
    full_report = {
        "input": total,
        "kept": len(kept),
        "dropped": total - len(kept),
        "eval_sets": report,
        "config": {
            "num_permutations": dcfg.num_permutations,
            "shingle_width": dcfg.shingle_width,
            "jaccard_threshold": dcfg.jaccard_threshold,
            "seed": dcfg.seed,
        },
    }
    atomic_write_text(report_path, _json_text(full_report))
    manifest.add_output(report_path)
    if cfg["figures"]:
        from . import plots

        fig_path = report_path.with_suffix(".png")
        plots.save_contamination_bars(report, fig_path)
        manifest.add_output(fig_path)
    print(f"[decontaminate] input={total} kept={len(kept)} -> {out}")
    return out


def _cmd_train(cfg, manifest):
    if not cfg["train_dir"] and not cfg["subset"]:
        raise ConfigError("provide --train-dir or at least one --subset LANG=path")
    if cfg["batch_size"] < 2:
        raise ConfigError("--batch-size must be >= 2 for in-batch negatives")
    subsets: dict[str, list[ing.QAPair]] = {}
    if cfg["train_dir"]:
        train_dir = _require_dir(cfg["train_dir"])
        for path in sorted(train_dir.glob("*.train.jsonl")):
            lang = path.name.split(".")[0]
            manifest.add_input(path)
            subsets[lang] = _read_pairs(path)
        if not subsets:
            raise ConfigError(f"no *.train.jsonl files found in {train_dir}")
    for spec in cfg["subset"] or []:
        if "=" not in spec:
            raise ConfigError(f"--subset expects LANG=path, got {spec!r}")
        lang, _, path = spec.partition("=")
        manifest.add_input(_require_file(path))
        subsets[lang] = _read_pairs(path)
    empty = [lang for lang, members in subsets.items() if not members]
    if empty:
        raise ConfigError(f"empty training subsets: {empty}")

    out = Path(cfg["out"])
    model = enc.init_model(
        dim=cfg["dim"], embed_dim=cfg["embed_dim"],
        temperature=cfg["temperature"], seed=cfg["seed"],
    )
    sampler = BatchSampler(
        subsets, batch_size=cfg["batch_size"], alpha=cfg["alpha"], seed=cfg["seed"]
    )
    trace = enc.train(
        model, sampler, steps=cfg["steps"], peak_lr=cfg["lr"],
        symmetric=bool(cfg["symmetric"]),
    )
    enc.save_model(model, out)
    manifest.add_output(out)

    import io

    trace_path = Path(str(out) + ".trace.csv")
    buf = io.StringIO()
    enc.write_trace_csv(trace, buf)
    atomic_write_text(trace_path, buf.getvalue())
    manifest.add_output(trace_path)

    sampler_path = Path(str(out) + ".sampler.json")
    atomic_write_text(sampler_path, _json_text(sampler.manifest()))
    manifest.add_output(sampler_path)

    if cfg["figures"]:
        from . import plots

        fig_path = Path(str(out) + ".loss.png")
        plots.save_loss_curve(trace, fig_path)
        manifest.add_output(fig_path)
    print(
        f"[train] steps={cfg['steps']} final_loss={trace[-1].loss:.4f} "
        f"fingerprint={enc.model_fingerprint(model)[:12]} -> {out}"
    )
    return out


def _answer_corpus(paths, manifest) -> dict[int, str]:
    corpus: dict[int, str] = {}
    for path in paths:
        manifest.add_input(_require_file(path))
        for pair in _read_pairs(path):
            existing = corpus.get(pair.question_id)
            if existing is not None and existing != pair.answer:
                raise ConfigError(
                    f"conflicting answers for question {pair.question_id} across corpus files"
                )
            corpus[pair.question_id] = pair.answer
    return corpus


def _cmd_index(cfg, manifest):
    out = Path(cfg["out"])
    corpus = _answer_corpus(cfg["pairs"], manifest)
    if cfg["kind"] == "bm25":
        index = rt.build_bm25_index(corpus, k1=cfg["k1"], b=cfg["b"])
        detail = f"terms={len(index.postings)}"
    else:
        if not cfg["model"]:
            raise ConfigError("dense indexing requires --model")
        model = enc.load_model(_require_file(cfg["model"]))
        manifest.add_input(cfg["model"])
        index = rt.build_dense_index(model, corpus)
        detail = f"skipped={len(index.skipped_doc_ids)}"
    rt.save_index(index, out)
    manifest.add_output(out)
    print(f"[index] kind={cfg['kind']} docs={len(corpus)} {detail} -> {out}")
    return out


def _cmd_search(cfg, manifest):
    index_path = _require_file(cfg["index"])
    manifest.add_input(index_path)
    index = rt.load_index(index_path)
    queries = _read_pairs(cfg["queries"])
    manifest.add_input(cfg["queries"])
    k = cfg["k"]

    if isinstance(index, rt.Bm25Index):
        header = {"kind": "bm25", "k": k, "k1": index.k1, "b": index.b,
                  "tokenizer": rt.TOKENIZER_VERSION}
        searcher = lambda text: rt.bm25_search(index, text, k)
    else:
        if not cfg["model"]:
            raise ConfigError("dense search requires --model")
        model = enc.load_model(_require_file(cfg["model"]))
        manifest.add_input(cfg["model"])
        header = {"kind": "dense", "k": k, "fingerprint": index.fingerprint,
                  "tokenizer": rt.TOKENIZER_VERSION}
        searcher = lambda text: rt.dense_search(index, model, text, k)

    results = [(pair.question_id, searcher(enc.query_text(pair))) for pair in queries]

    import io

    buf = io.StringIO()
    rt.write_run_file(buf, results, header=header)
    out = Path(cfg["out"])
    atomic_write_text(out, buf.getvalue())
    manifest.add_output(out)
    if cfg["qrels_out"]:
        qrels_text = "".join(f"{p.question_id}\t{p.question_id}\n" for p in queries)
        atomic_write_text(cfg["qrels_out"], qrels_text)
        manifest.add_output(cfg["qrels_out"])
    print(f"[search] kind={header['kind']} queries={len(queries)} k={k} -> {out}")
    return out


def _cmd_eval(cfg, manifest):
    run_path = _require_file(cfg["run"])
    qrels_path = _require_file(cfg["qrels"])
    manifest.add_input(run_path)
    manifest.add_input(qrels_path)
    ks = [int(x) for x in str(cfg["k"]).split(",") if x.strip()]
    report = ev.evaluate_run(run_path, qrels_path, ks)

    out = Path(cfg["out"])
    atomic_write_text(out, ev.report_json(report))
    manifest.add_output(out)
    table = report.to_table()
    table_path = out.with_suffix(".txt")
    atomic_write_text(table_path, table)
    manifest.add_output(table_path)
    if cfg["figures"]:
        from . import plots

        fig_path = out.with_suffix(".png")
        plots.save_metric_bars(report, fig_path)
        manifest.add_output(fig_path)
    sys.stdout.write(table)
    print(f"[eval] queries={report.query_count} -> {out}")
    return out


_HANDLERS = {
    "ingest": _cmd_ingest,
    "filter": _cmd_filter,
    "split": _cmd_split,
    "stats": _cmd_stats,
    "decontaminate": _cmd_decontaminate,
    "train": _cmd_train,
    "index": _cmd_index,
    "search": _cmd_search,
    "eval": _cmd_eval,
}


def _emit_error(kind: str, exc: BaseException) -> None:
    sys.stderr.write(json.dumps({"error": kind, "message": str(exc)}) + "\n")


def run_command(argv) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        cfg = _resolve(args)
        manifest = RunManifest(
            subcommand=args.subcommand,
            argv=list(argv),
            config={k: (str(v) if isinstance(v, Path) else v) for k, v in cfg.items()},
            seed=cfg.get("seed"),
        ).start()
        primary = _HANDLERS[args.subcommand](cfg, manifest)
        manifest.write(manifest_path_for(primary))
        return 0
    except FileNotFoundError as exc:
        _emit_error("input_not_found", exc)
        return 66
    except (PipelineError, ValueError, json.JSONDecodeError) as exc:
        _emit_error(type(exc).__name__, exc)
        return 65
    except Exception as exc:  # pragma: no cover - defensive
        traceback.print_exc()
        _emit_error("internal_error", exc)
        return 70


def main() -> None:
    sys.exit(run_command(sys.argv[1:]))


if __name__ == "__main__":
    main()
