"""Numerical tolerances and worker settings shared by every module."""

from __future__ import annotations

import os
from dataclasses import dataclass, fields, replace


@dataclass(frozen=True)
class Tolerances:
    """Central tolerance record.

    ``rel`` is the default relative tolerance for exact finite-sum identities,
    ``fast`` the looser one for the moment-based p=2 kernel (squaring loses
    digits), ``slack`` the relative slack allowed on norm inequalities that
    compare two separately computed maxima, and ``search`` the argument
    tolerance for one-dimensional convex searches.
    """

    rel: float = 1e-12
    fast: float = 1e-10
    slack: float = 1e-9
    search: float = 1e-12
    negative_variance: float = 1e-9

    def override(self, spec: str | dict | None) -> "Tolerances":
        """Return a copy with fields replaced from ``"rel=1e-10,fast=1e-8"`` or a dict."""
        if not spec:
            return self
        if isinstance(spec, str):
            items = {}
            for part in spec.split(","):
                key, _, value = part.partition("=")
                items[key.strip()] = value
            spec = items
        known = {f.name for f in fields(self)}
        unknown = set(spec) - known
        if unknown:
            raise ValueError(f"unknown tolerance field(s): {sorted(unknown)}")
        return replace(self, **{k: float(v) for k, v in spec.items()})


TOL = Tolerances()


def worker_count() -> int:
    """Worker cap from ``OSCILLAB_THREADS`` (defaults to the CPU count)."""
    raw = os.environ.get("OSCILLAB_THREADS")
    if raw:
        try:
            return max(1, int(raw))
        except ValueError:
            pass
    return os.cpu_count() or 1
