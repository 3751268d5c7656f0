"""Paths of the toy data files shipped with the package."""
from importlib import resources
from pathlib import Path

FILES = ("toy_kb.tsv", "toy_linker.tsv", "toy_geo.jsonl", "toy_weak.jsonl", "toy_weak_dev.jsonl",
         "toy_distant.jsonl", "stopwords.txt")


def data_path(name: str) -> Path:
    if name not in FILES:
        raise KeyError(f"no shipped data file {name!r}")
    return Path(str(resources.files("tsparser") / "data" / name))
