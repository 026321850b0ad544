"""Bundled example germs, loadable by name."""

from __future__ import annotations

from importlib import resources
from pathlib import Path

from .germ import MapGerm, parse_germ

NAMES = ("identity", "projection", "squaring", "gstar", "example1")


def germ_source(name: str) -> str:
    if name not in NAMES:
        raise KeyError(f"unknown corpus germ {name!r}; choose from {NAMES}")
    return resources.files("milnor").joinpath("data", f"{name}.germ").read_text()


def corpus_germ(name: str) -> MapGerm:
    return parse_germ(germ_source(name), name)


def corpus_path(name: str) -> Path:
    germ_source(name)
    return Path(str(resources.files("milnor").joinpath("data", f"{name}.germ")))


def all_germs() -> dict[str, MapGerm]:
    return {name: corpus_germ(name) for name in NAMES}
