"""Append-only clinician label log with startup replay.

One JSON object per line; nothing is ever rewritten, so the file doubles
as the full adjudication history. The effective label for a case is the
latest event. Timestamps are server-assigned and monotone non-decreasing
(client clocks are untrusted); within equal timestamps, file order wins.
"""

from __future__ import annotations

import json
import threading
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path

from .dataset import QualityLabel
from .errors import StorageError


@dataclass(frozen=True)
class LabelEvent:
    case_id: str
    label: QualityLabel
    reviewer: str
    note: str | None
    timestamp: str

    def to_dict(self) -> dict:
        return {
            "case_id": self.case_id,
            "label": self.label.value,
            "reviewer": self.reviewer,
            "note": self.note,
            "timestamp": self.timestamp,
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "LabelEvent":
        return cls(
            case_id=obj["case_id"],
            label=QualityLabel(obj["label"]),
            reviewer=obj["reviewer"],
            note=obj.get("note"),
            timestamp=obj["timestamp"],
        )


class LabelStore:
    """Single-writer label log: appends are serialized, reads see every
    acknowledged write (read-your-write)."""

    def __init__(self, path: str | Path):
        self.path = Path(path)
        self._lock = threading.Lock()
        self._events: list[LabelEvent] = []
        self._last_ts = ""
        self._replay()

    def _replay(self) -> None:
        if not self.path.exists():
            return
        for line_no, line in enumerate(self.path.read_text(encoding="utf-8").splitlines(), start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError:
                # torn fragment from a crashed writer (acknowledged events
                # are always written whole, so nothing real is lost)
                continue
            try:
                event = LabelEvent.from_dict(obj)
            except (KeyError, ValueError, TypeError) as exc:
                raise StorageError(f"corrupt label log at line {line_no}: {exc}") from exc
            self._events.append(event)
            self._last_ts = max(self._last_ts, event.timestamp)

    def _next_timestamp(self) -> str:
        now = datetime.now(timezone.utc).isoformat()
        return max(now, self._last_ts)

    def append(self, case_id: str, label: QualityLabel, reviewer: str, note: str | None = None) -> LabelEvent:
        """Durably record one event and return it; raises StorageError if
        the log cannot be written."""
        with self._lock:
            event = LabelEvent(
                case_id=case_id,
                label=label,
                reviewer=reviewer,
                note=note,
                timestamp=self._next_timestamp(),
            )
            line = json.dumps(event.to_dict(), ensure_ascii=False) + "\n"
            try:
                self.path.parent.mkdir(parents=True, exist_ok=True)
                with open(self.path, "ab") as fh:
                    # heal a torn tail from a crashed writer: give the
                    # fragment its own line so the new event parses
                    if fh.tell() > 0:
                        with open(self.path, "rb") as reader:
                            reader.seek(-1, 2)
                            if reader.read(1) != b"\n":
                                fh.write(b"\n")
                    fh.write(line.encode("utf-8"))
                    fh.flush()
            except OSError as exc:
                raise StorageError(f"cannot append to label log: {exc}") from exc
            self._events.append(event)
            self._last_ts = event.timestamp
            return event

    def history(self, case_id: str) -> list[LabelEvent]:
        return [e for e in self._events if e.case_id == case_id]

    def effective_labels(self) -> dict[str, QualityLabel]:
        """Latest event wins per case."""
        labels: dict[str, QualityLabel] = {}
        for event in self._events:
            labels[event.case_id] = event.label
        return labels

    def __len__(self) -> int:
        return len(self._events)
