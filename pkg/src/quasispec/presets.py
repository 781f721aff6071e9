"""Named sequence presets shipped with the package."""

from __future__ import annotations

import json
from functools import lru_cache
from importlib import resources

from .generators import (SturmianParams, Substitution, quadratic_theta,
                         sturmian_window, substitution_fixed_point)
from .words import Window


@lru_cache(maxsize=1)
def load_catalog() -> dict:
    text = resources.files("quasispec").joinpath("data/catalog.json").read_text()
    return json.loads(text)


def preset_names() -> list[str]:
    return sorted(load_catalog())


def preset_substitution(name: str) -> tuple[Substitution, int]:
    entry = _entry(name)
    if entry["kind"] != "substitution":
        raise ValueError(f"preset {name!r} is not a substitution")
    return Substitution(entry["rules"]), int(entry["seed"])


def preset_sturmian(name: str) -> SturmianParams:
    entry = _entry(name)
    if entry["kind"] != "sturmian":
        raise ValueError(f"preset {name!r} is not a Sturmian family")
    theta = quadratic_theta(entry["continued_fraction"])
    return SturmianParams(theta, entry.get("phi", "0"), entry.get("variant", "left"))


def preset_window(name: str, start: int, stop: int) -> Window:
    """Window [start, stop) of a preset; substitution presets are one-sided (start >= 0)."""
    entry = _entry(name)
    if entry["kind"] == "sturmian":
        return sturmian_window(preset_sturmian(name), start, stop)
    if start < 0:
        raise ValueError("substitution presets are one-sided fixed points; start must be >= 0")
    sub, seed = preset_substitution(name)
    return substitution_fixed_point(sub, seed, stop).sub(start, stop)


def _entry(name: str) -> dict:
    cat = load_catalog()
    if name not in cat:
        raise KeyError(f"unknown preset {name!r}; choose from {sorted(cat)}")
    return cat[name]
