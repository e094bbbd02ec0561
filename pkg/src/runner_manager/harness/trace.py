"""Scenario traces: a strictly ordered record of everything that happened."""

from __future__ import annotations

import json
import threading
from dataclasses import dataclass


@dataclass(frozen=True)
class TraceEntry:
    at: float  # seconds since scenario start
    actor: str  # manager | fake_github | fake_kube | fake_runner | driver
    action: str
    detail: dict

    def as_dict(self) -> dict:
        return {"at": self.at, "actor": self.actor, "action": self.action, "detail": self.detail}


class Trace:
    """Append-only, time-ordered (ties keep insertion order)."""

    def __init__(self, epoch: float):
        self._epoch = epoch
        self._lock = threading.Lock()
        self._entries: list[TraceEntry] = []

    def append(self, at_abs: float, actor: str, action: str, detail: dict | None = None) -> None:
        entry = TraceEntry(at=at_abs - self._epoch, actor=actor, action=action, detail=detail or {})
        with self._lock:
            self._entries.append(entry)

    @property
    def entries(self) -> list[TraceEntry]:
        with self._lock:
            return list(self._entries)

    def select(self, actor: str | None = None, action: str | None = None) -> list[TraceEntry]:
        return [
            e
            for e in self.entries
            if (actor is None or e.actor == actor) and (action is None or e.action == action)
        ]

    def to_ndjson(self) -> str:
        return "\n".join(json.dumps(e.as_dict(), sort_keys=True) for e in self.entries) + "\n"

    def fingerprint(self) -> str:
        """Stable digest used by determinism checks."""
        import hashlib

        return hashlib.sha256(self.to_ndjson().encode()).hexdigest()
