"""Bundled toy fixtures: a 30-post dump spanning three languages plus a tiny
eval query set. They exercise every join and filter edge (dangling accepted
answers, non-QA rows, multi-tag pairs, out-of-bounds lengths) and serve as
the universal end-to-end fixture."""

from importlib import resources
from pathlib import Path


def toy_posts_path() -> Path:
    return Path(resources.files("cqakit").joinpath("data/toy_posts.xml"))


def toy_eval_queries_path() -> Path:
    return Path(resources.files("cqakit").joinpath("data/toy_eval_queries.jsonl"))
