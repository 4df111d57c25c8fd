"""Residual reports: named identity checks with tolerances and verdicts."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from typing import Optional


@dataclass
class Entry:
    name: str
    reference: str
    residual: float
    tolerance: float
    passed: bool
    note: str = ""
    error: Optional[str] = None


@dataclass
class ResidualReport:
    scenario: str
    suite: str
    entries: list = field(default_factory=list)
    metadata: dict = field(default_factory=dict)

    def add(self, name: str, reference: str, residual: float, tolerance: float, note: str = "") -> Entry:
        """Record a check; it passes iff residual <= tolerance."""
        residual = float(residual)
        entry = Entry(name, reference or "plumbing", residual, float(tolerance), bool(residual <= tolerance), note)
        self.entries.append(entry)
        return entry

    def add_error(self, name: str, reference: str, tolerance: float, exc: BaseException) -> Entry:
        entry = Entry(name, reference or "plumbing", math.inf, float(tolerance), False,
                      error=f"{type(exc).__name__}: {exc}")
        self.entries.append(entry)
        return entry

    def extend(self, other: "ResidualReport") -> None:
        self.entries.extend(other.entries)

    @property
    def passed(self) -> bool:
        return all(e.passed for e in self.entries)

    def failures(self) -> list:
        return [e for e in self.entries if not e.passed]

    def entry(self, name: str) -> Entry:
        for e in self.entries:
            if e.name == name:
                return e
        raise KeyError(name)

    def to_dict(self) -> dict:
        def clean(v):
            if isinstance(v, float) and not math.isfinite(v):
                return str(v)
            return v

        return {
            "scenario": self.scenario,
            "suite": self.suite,
            "passed": self.passed,
            "entries": [{k: clean(v) for k, v in asdict(e).items()} for e in self.entries],
            "metadata": self.metadata,
        }

    def to_json(self, indent: int = 2) -> str:
        return json.dumps(self.to_dict(), indent=indent, sort_keys=False)

    def summary(self) -> str:
        lines = []
        for e in self.entries:
            flag = "PASS" if e.passed else "FAIL"
            extra = f"  [{e.error}]" if e.error else ""
            lines.append(f"{flag}  {e.name}: {e.residual:.3e} (tol {e.tolerance:.1e}){extra}")
        return "\n".join(lines)
