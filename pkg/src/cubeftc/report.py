"""Check reports shared by the additivity auditor and the verifier."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any

__all__ = ["CheckReport", "RefinementRow", "DEFAULT_CONFIDENCE", "make_report"]

DEFAULT_CONFIDENCE = 4.0


@dataclass(frozen=True)
class RefinementRow:
    level: int
    lhs: complex | float
    rhs: complex | float
    error: float


@dataclass
class CheckReport:
    """One verified identity.  ``passed`` iff ``abs_error <= tol + confidence * sigma``."""

    name: str
    lhs: complex | float
    rhs: complex | float
    abs_error: float
    rel_error: float
    tol: float
    sigma: float = 0.0
    confidence: float = DEFAULT_CONFIDENCE
    passed: bool = False
    table: list[RefinementRow] = field(default_factory=list)
    details: dict[str, Any] = field(default_factory=dict)

    @property
    def budget(self) -> float:
        return self.tol + self.confidence * self.sigma


def make_report(
    name: str,
    lhs,
    rhs,
    tol: float,
    sigma: float = 0.0,
    confidence: float = DEFAULT_CONFIDENCE,
    abs_error: float | None = None,
    table: list[RefinementRow] | None = None,
    details: dict[str, Any] | None = None,
) -> CheckReport:
    if abs_error is None:
        abs_error = abs(lhs - rhs)
    abs_error = float(abs_error)
    scale = max(abs(lhs), abs(rhs))
    rel_error = abs_error / scale if scale > 0 else (0.0 if abs_error == 0 else math.inf)
    passed = bool(abs_error <= tol + confidence * sigma)
    return CheckReport(
        name=name,
        lhs=lhs,
        rhs=rhs,
        abs_error=abs_error,
        rel_error=float(rel_error),
        tol=float(tol),
        sigma=float(sigma),
        confidence=float(confidence),
        passed=passed,
        table=list(table or []),
        details=dict(details or {}),
    )
