"""Universal constants left symbolic by the theory, with their defaults.

Values live in ``data/constants.json`` (one entry per constant, with a note
on the role it plays); callers may override any of them per run.
"""
from __future__ import annotations

import json
from importlib import resources


def _load():
    text = resources.files("isoslice").joinpath("data/constants.json").read_text("utf-8")
    return json.loads(text)


LEDGER = _load()
CONSTANTS = {k: v["value"] for k, v in LEDGER.items()}


def resolve(overrides: dict | None = None) -> dict:
    """Defaults merged with ``overrides``; unknown names are rejected."""
    out = dict(CONSTANTS)
    for k, v in (overrides or {}).items():
        if k not in out:
            raise KeyError(f"unknown constant {k!r}")
        out[k] = v
    return out
