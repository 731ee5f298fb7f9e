from __future__ import annotations

from dataclasses import dataclass

from vdc.lang.syntax import Span


@dataclass(frozen=True)
class Diagnostic:
    severity: str
    message: str
    span: Span

    def __str__(self) -> str:
        return f"{self.span}: {self.severity}: {self.message}"

    def to_json(self) -> dict:
        return {"severity": self.severity, "message": self.message, "span": self.span.to_json()}
