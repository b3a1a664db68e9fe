"""Append-only home timeline: every observable effect lands here once.

Storage is line-delimited JSON, one entry per line, appended and flushed
atomically per line.  Indexes are in-memory only and rebuilt when an existing
log file is opened.  Redaction is a read-time view; the log itself is never
rewritten.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Iterable, Optional, Union

from .errors import TimeRegressionError

CATEGORIES = (
    "device-event",
    "state-change",
    "action",
    "degraded-skip",
    "rule-fired",
    "program-lifecycle",
    "registry-change",
    "denial",
)


@dataclass(frozen=True)
class TraceEntry:
    seq: int
    at: int  # simulated milliseconds
    category: str
    subject: str  # device or program id ("scenario" for scenario markers)
    details: dict
    cause: str  # "dashboard" | "scenario" | program id

    def to_json(self) -> str:
        return json.dumps(
            {
                "seq": self.seq,
                "at": self.at,
                "category": self.category,
                "subject": self.subject,
                "details": self.details,
                "cause": self.cause,
            },
            sort_keys=True,
            separators=(",", ":"),
        )

    @staticmethod
    def from_json(line: str) -> "TraceEntry":
        d = json.loads(line)
        return TraceEntry(
            seq=d["seq"],
            at=d["at"],
            category=d["category"],
            subject=d["subject"],
            details=d["details"],
            cause=d["cause"],
        )


@dataclass(frozen=True)
class TimelineQuery:
    from_at: Optional[int] = None  # inclusive
    to_at: Optional[int] = None  # inclusive
    subject: Optional[str] = None
    category: Optional[str] = None
    limit: Optional[int] = None
    cursor: Optional[int] = None  # resume strictly after this seq


@dataclass(frozen=True)
class RedactionPolicy:
    suppress_categories: tuple[str, ...] = ()
    bucket_ms: Optional[int] = None  # coarsen timestamps down to multiples
    exempt_subjects: tuple[str, ...] = ()  # bypass suppression (not coarsening)


@dataclass
class QueryResult:
    entries: list[TraceEntry]
    next_cursor: Optional[int] = None


class TraceLog:
    """Single-writer append-only log with query and redaction views."""

    def __init__(self, path: Union[str, Path, None] = None):
        self.path = Path(path) if path is not None else None
        self.entries: list[TraceEntry] = []
        self._by_category: dict[str, list[int]] = {}
        self._by_subject: dict[str, list[int]] = {}
        self._fh = None
        self._listeners: list[Callable[[TraceEntry], None]] = []
        if self.path is not None:
            if self.path.exists():
                with open(self.path, "r", encoding="utf-8") as fh:
                    for line in fh:
                        line = line.strip()
                        if line:
                            self._index(TraceEntry.from_json(line))
            self.path.parent.mkdir(parents=True, exist_ok=True)
            self._fh = open(self.path, "a", encoding="utf-8")

    def close(self) -> None:
        if self._fh is not None:
            self._fh.close()
            self._fh = None

    def subscribe(self, listener: Callable[[TraceEntry], None]) -> None:
        self._listeners.append(listener)

    @property
    def last_at(self) -> int:
        return self.entries[-1].at if self.entries else 0

    def _index(self, entry: TraceEntry) -> None:
        self.entries.append(entry)
        self._by_category.setdefault(entry.category, []).append(entry.seq)
        self._by_subject.setdefault(entry.subject, []).append(entry.seq)

    def record(self, at: int, category: str, subject: str, details: dict, cause: str) -> int:
        if category not in CATEGORIES:
            raise ValueError(f"unknown trace category {category!r}")
        if self.entries and at < self.entries[-1].at:
            raise TimeRegressionError(
                f"entry at {at} precedes last entry at {self.entries[-1].at}"
            )
        entry = TraceEntry(
            seq=len(self.entries),
            at=at,
            category=category,
            subject=subject,
            details=details,
            cause=cause,
        )
        self._index(entry)
        if self._fh is not None:
            self._fh.write(entry.to_json() + "\n")
            self._fh.flush()
        for listener in self._listeners:
            listener(entry)
        return entry.seq

    def _candidates(self, q: TimelineQuery) -> Iterable[TraceEntry]:
        # narrowest index first; seq order falls out because index lists are
        # append-ordered
        if q.subject is not None and q.category is not None:
            subj = self._by_subject.get(q.subject, [])
            cats = set(self._by_category.get(q.category, []))
            seqs = [s for s in subj if s in cats]
        elif q.subject is not None:
            seqs = self._by_subject.get(q.subject, [])
        elif q.category is not None:
            seqs = self._by_category.get(q.category, [])
        else:
            seqs = range(len(self.entries))
        return (self.entries[s] for s in seqs)

    def query(self, q: TimelineQuery) -> QueryResult:
        if q.cursor is not None and (not isinstance(q.cursor, int) or q.cursor < -1):
            raise ValueError(f"malformed cursor {q.cursor!r}")
        out: list[TraceEntry] = []
        more_after: Optional[int] = None
        for entry in self._candidates(q):
            if q.cursor is not None and entry.seq <= q.cursor:
                continue
            if q.from_at is not None and entry.at < q.from_at:
                continue
            if q.to_at is not None and entry.at > q.to_at:
                continue
            if q.limit is not None and len(out) >= q.limit:
                # resume after the last delivered entry (or where we started)
                more_after = out[-1].seq if out else (q.cursor if q.cursor is not None else -1)
                break
            out.append(entry)
        return QueryResult(entries=out, next_cursor=more_after)

    def redacted(self, q: TimelineQuery, policy: RedactionPolicy) -> QueryResult:
        base = self.query(q)
        out = []
        for entry in base.entries:
            if (
                entry.category in policy.suppress_categories
                and entry.subject not in policy.exempt_subjects
            ):
                continue
            at = entry.at
            if policy.bucket_ms:
                # coarsening applies uniformly so view times stay monotone
                at = (at // policy.bucket_ms) * policy.bucket_ms
            out.append(
                TraceEntry(
                    seq=entry.seq,
                    at=at,
                    category=entry.category,
                    subject=entry.subject,
                    details=entry.details,
                    cause=entry.cause,
                )
            )
        return QueryResult(entries=out, next_cursor=base.next_cursor)

    def content_hash(self) -> str:
        h = hashlib.sha256()
        for entry in self.entries:
            h.update(entry.to_json().encode("utf-8"))
            h.update(b"\n")
        return h.hexdigest()
