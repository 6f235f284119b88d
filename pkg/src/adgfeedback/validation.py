"""Shared validation report types used by the graph and template checkers."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum


class Severity(str, Enum):
    ERROR = "error"
    WARNING = "warning"


@dataclass(frozen=True)
class Finding:
    severity: Severity
    code: str
    message: str
    subject: str  # node-id, edge index (as "edge:<i>"), criterion id, or template key


@dataclass(frozen=True)
class ValidationReport:
    findings: tuple[Finding, ...] = field(default_factory=tuple)

    @property
    def ok(self) -> bool:
        return not any(f.severity is Severity.ERROR for f in self.findings)

    def errors(self) -> tuple[Finding, ...]:
        return tuple(f for f in self.findings if f.severity is Severity.ERROR)

    def warnings(self) -> tuple[Finding, ...]:
        return tuple(f for f in self.findings if f.severity is Severity.WARNING)

    def to_document(self) -> dict:
        return {
            "ok": self.ok,
            "findings": [
                {
                    "severity": f.severity.value,
                    "code": f.code,
                    "message": f.message,
                    "subject": f.subject,
                }
                for f in self.findings
            ],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_document(), ensure_ascii=False, sort_keys=True)


def build_report(findings: list[Finding]) -> ValidationReport:
    """Order findings deterministically (by subject, then code, then message)."""
    ordered = sorted(findings, key=lambda f: (f.subject, f.code, f.message))
    return ValidationReport(findings=tuple(ordered))
