"""Enumeration caps shared by the brute-force routines.

Defaults can be overridden with the ``PASTAT_CAPS`` environment variable,
a comma separated list such as ``flatten=5000,brute=100000``.
"""

from __future__ import annotations

import os

DEFAULTS = {
    "flatten": 20_000,   # affine selection pieces produced by flatten_pieces
    "brute": 50_000,     # gradient pairs examined by one brute-force call
    "sat_vars": 20,      # truth-table width for CNF ground truth
    "zonotope": 16,      # generators enumerated by zonotope_vertices
    "subsets": 100_000,  # (d+1)-subsets examined by general_position
}


class CapExceeded(RuntimeError):
    """Raised when an enumeration would exceed its configured cap."""

    def __init__(self, name: str, required: int, cap: int):
        super().__init__(f"{name} cap exceeded: need {required}, cap is {cap}")
        self.name = name
        self.required = required
        self.cap = cap


def _parse(spec: str) -> dict[str, int]:
    out: dict[str, int] = {}
    for item in spec.split(","):
        item = item.strip()
        if not item:
            continue
        key, _, val = item.partition("=")
        key = key.strip()
        if key not in DEFAULTS:
            raise ValueError(f"unknown cap {key!r} in PASTAT_CAPS")
        out[key] = int(val)
    return out


def get(name: str) -> int:
    overrides = _parse(os.environ.get("PASTAT_CAPS", ""))
    return overrides.get(name, DEFAULTS[name])


def check(name: str, required: int) -> None:
    cap = get(name)
    if required > cap:
        raise CapExceeded(name, required, cap)
