"""Event vocabulary, validation, and the embedded event store.

Events are the raw material for every metric: one record per tracked learner
action, carrying user, course, verb, resource and a UTC timestamp.  The store
is an embedded append-only log with per-(course, user) indexes so the rest of
the pipeline never needs an external database.
"""

from __future__ import annotations

import json
import threading
from dataclasses import dataclass
from datetime import datetime, timezone
from enum import Enum
from pathlib import Path
from typing import Iterable, Optional


class EventError(Exception):
    """Base class for ingestion/validation failures."""


class MalformedLine(EventError):
    pass


class MissingField(EventError):
    pass


class UnknownVerb(EventError):
    pass


class InvalidScore(EventError):
    pass


class StorageFailure(EventError):
    pass


class UnknownCourse(EventError):
    pass


class Verb(str, Enum):
    VISITED_ITEM = "visited_item"
    VIDEO_PLAY = "video_play"
    VIDEO_PAUSE = "video_pause"
    VIDEO_RESIZE = "video_resize"
    VIDEO_FULLSCREEN = "video_fullscreen"
    VIDEO_SPEED_CHANGE = "video_speed_change"
    DOWNLOAD = "download"
    FORUM_QUESTION = "forum_question"
    FORUM_COMMENT = "forum_comment"
    FORUM_ANSWER = "forum_answer"
    FORUM_VISIT = "forum_visit"
    FORUM_SUBSCRIBE = "forum_subscribe"
    QUIZ_SUBMIT = "quiz_submit"
    ENROLL = "enroll"


class Track(str, Enum):
    MAIN = "main"
    BONUS = "bonus"
    UNGRADED = "ungraded"


@dataclass(frozen=True)
class Result:
    score: float
    graded: bool
    track: Track

    def __post_init__(self):
        if not 0.0 <= self.score <= 1.0:
            raise InvalidScore(f"score {self.score} outside [0, 1]")
        if (self.track is Track.UNGRADED) == self.graded:
            raise MalformedLine(
                f"track {self.track.value!r} inconsistent with graded={self.graded}"
            )


@dataclass(frozen=True)
class Event:
    user_id: str
    course_id: str
    verb: Verb
    resource_id: str
    timestamp: datetime
    context: Optional[dict] = None
    result: Optional[Result] = None

    def __post_init__(self):
        for name in ("user_id", "course_id", "resource_id"):
            if not getattr(self, name):
                raise MissingField(f"{name} is empty")
        ts = self.timestamp
        if ts.tzinfo is None:
            raise MalformedLine("timestamp: missing timezone")
        # normalize to UTC and truncate to millisecond precision at construction;
        # session arithmetic is tz-free and serialization round-trips exactly
        ts = ts.astimezone(timezone.utc)
        ts = ts.replace(microsecond=(ts.microsecond // 1000) * 1000)
        object.__setattr__(self, "timestamp", ts)


@dataclass(frozen=True)
class CatalogItem:
    resource_id: str
    kind: str  # "quiz" | "video"


@dataclass(frozen=True)
class CourseCatalog:
    course_id: str
    items: tuple[CatalogItem, ...]

    def __post_init__(self):
        ids = [it.resource_id for it in self.items]
        if len(set(ids)) != len(ids):
            raise MalformedLine("catalog: duplicate resource_ids")
        for it in self.items:
            if it.kind not in ("quiz", "video"):
                raise MalformedLine(f"catalog: bad item kind {it.kind!r}")

    def count(self, kind: Optional[str] = None) -> int:
        if kind is None:
            return len(self.items)
        return sum(1 for it in self.items if it.kind == kind)

    def ids_of_kind(self, kind: Optional[str] = None) -> set[str]:
        if kind is None:
            return {it.resource_id for it in self.items}
        return {it.resource_id for it in self.items if it.kind == kind}


_EVENT_KEYS = {"user_id", "course_id", "verb", "resource_id", "timestamp", "context", "result"}
_REQUIRED_KEYS = ("user_id", "course_id", "verb", "resource_id", "timestamp")
_RESULT_KEYS = {"score", "graded", "track"}


def _parse_timestamp(raw) -> datetime:
    if not isinstance(raw, str):
        raise MalformedLine("timestamp: not a string")
    try:
        ts = datetime.fromisoformat(raw.replace("Z", "+00:00"))
    except ValueError as exc:
        raise MalformedLine(f"timestamp: {exc}") from None
    if ts.tzinfo is None:
        raise MalformedLine("timestamp: missing timezone offset")
    return ts.astimezone(timezone.utc)


def _parse_result(raw) -> Result:
    if not isinstance(raw, dict):
        raise MalformedLine("result: not an object")
    extra = set(raw) - _RESULT_KEYS
    if extra:
        raise MalformedLine(f"result: unknown keys {sorted(extra)}")
    for key in _RESULT_KEYS:
        if key not in raw:
            raise MissingField(f"result.{key}")
    score = raw["score"]
    if not isinstance(score, (int, float)) or isinstance(score, bool):
        raise InvalidScore("result.score: not a number")
    if not 0.0 <= score <= 1.0:
        raise InvalidScore(f"result.score: {score} outside [0, 1]")
    if not isinstance(raw["graded"], bool):
        raise MalformedLine("result.graded: not a boolean")
    try:
        track = Track(raw["track"])
    except ValueError:
        raise MalformedLine(f"result.track: unknown track {raw['track']!r}") from None
    return Result(score=float(score), graded=raw["graded"], track=track)


def parse_event(line: str) -> Event:
    """Parse one JSON-Lines record into a validated Event.

    Rejects unknown top-level keys, unknown verbs, missing required fields and
    out-of-range scores; each error names the offending field.
    """
    try:
        raw = json.loads(line)
    except (json.JSONDecodeError, TypeError) as exc:
        raise MalformedLine(str(exc)) from None
    if not isinstance(raw, dict):
        raise MalformedLine("line is not a JSON object")
    extra = set(raw) - _EVENT_KEYS
    if extra:
        raise MalformedLine(f"unknown keys {sorted(extra)}")
    for key in _REQUIRED_KEYS:
        if key not in raw or raw[key] in (None, ""):
            raise MissingField(key)
    try:
        verb = Verb(raw["verb"])
    except ValueError:
        raise UnknownVerb(str(raw["verb"])) from None
    context = raw.get("context")
    if context is not None:
        if not isinstance(context, dict) or not all(
            isinstance(k, str) and isinstance(v, str) for k, v in context.items()
        ):
            raise MalformedLine("context: must map strings to strings")
    result = raw.get("result")
    return Event(
        user_id=str(raw["user_id"]),
        course_id=str(raw["course_id"]),
        verb=verb,
        resource_id=str(raw["resource_id"]),
        timestamp=_parse_timestamp(raw["timestamp"]),
        context=dict(context) if context else None,
        result=_parse_result(result) if result is not None else None,
    )


def serialize_event(event: Event) -> str:
    """Inverse of parse_event; emits one JSON line with a Z-suffixed timestamp."""
    raw = {
        "user_id": event.user_id,
        "course_id": event.course_id,
        "verb": event.verb.value,
        "resource_id": event.resource_id,
        "timestamp": event.timestamp.strftime("%Y-%m-%dT%H:%M:%S.%f")[:-3] + "Z",
    }
    if event.context is not None:
        raw["context"] = event.context
    if event.result is not None:
        raw["result"] = {
            "score": event.result.score,
            "graded": event.result.graded,
            "track": event.result.track.value,
        }
    return json.dumps(raw, separators=(",", ":"))


def parse_catalog(text: str) -> CourseCatalog:
    """Parse the catalog file format: {"course_id": ..., "items": [...]}."""
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise MalformedLine(str(exc)) from None
    if not isinstance(raw, dict) or "course_id" not in raw or "items" not in raw:
        raise MalformedLine("catalog: need course_id and items")
    items = tuple(
        CatalogItem(resource_id=str(it["resource_id"]), kind=str(it["kind"]))
        for it in raw["items"]
    )
    return CourseCatalog(course_id=str(raw["course_id"]), items=items)


def serialize_catalog(catalog: CourseCatalog) -> str:
    return json.dumps(
        {
            "course_id": catalog.course_id,
            "items": [
                {"resource_id": it.resource_id, "kind": it.kind} for it in catalog.items
            ],
        },
        separators=(",", ":"),
    )


class EventStore:
    """Append-only event log with per-(course, user) indexes.

    Backed by a directory (events.jsonl + catalogs.json) when a path is given,
    purely in-memory otherwise.  Single exclusive writer, concurrent readers;
    readers get a consistent snapshot as of query start.
    """

    def __init__(self, path: Optional[str | Path] = None):
        self._lock = threading.RLock()
        self._closed = False
        self._by_course: dict[str, dict[str, list[Event]]] = {}
        self._catalogs: dict[str, CourseCatalog] = {}
        self._path = Path(path) if path is not None else None
        if self._path is not None:
            self._path.mkdir(parents=True, exist_ok=True)
            self._load()

    @property
    def path(self) -> Optional[Path]:
        return self._path

    def _events_file(self) -> Path:
        return self._path / "events.jsonl"

    def _catalogs_file(self) -> Path:
        return self._path / "catalogs.json"

    def _load(self):
        ef = self._events_file()
        if ef.exists():
            with ef.open() as fh:
                for line in fh:
                    line = line.strip()
                    if line:
                        self._index(parse_event(line))
        cf = self._catalogs_file()
        if cf.exists():
            raw = json.loads(cf.read_text())
            for text in raw.values():
                cat = parse_catalog(text)
                self._catalogs[cat.course_id] = cat

    def _index(self, event: Event):
        self._by_course.setdefault(event.course_id, {}).setdefault(
            event.user_id, []
        ).append(event)

    def append_events(self, events: Iterable[Event]) -> int:
        batch = list(events)
        with self._lock:
            if self._closed:
                raise StorageFailure("store is closed")
            if self._path is not None:
                try:
                    with self._events_file().open("a") as fh:
                        for ev in batch:
                            fh.write(serialize_event(ev) + "\n")
                except OSError as exc:
                    raise StorageFailure(str(exc)) from None
            for ev in batch:
                self._index(ev)
        return len(batch)

    def add_catalog(self, catalog: CourseCatalog):
        with self._lock:
            if self._closed:
                raise StorageFailure("store is closed")
            self._catalogs[catalog.course_id] = catalog
            if self._path is not None:
                payload = {cid: serialize_catalog(c) for cid, c in self._catalogs.items()}
                try:
                    self._catalogs_file().write_text(json.dumps(payload))
                except OSError as exc:
                    raise StorageFailure(str(exc)) from None

    def catalog_for(self, course_id: str) -> Optional[CourseCatalog]:
        with self._lock:
            return self._catalogs.get(course_id)

    def courses(self) -> list[str]:
        with self._lock:
            return sorted(set(self._by_course) | set(self._catalogs))

    def events_for(
        self,
        course_id: str,
        user_id: Optional[str] = None,
        verb: Optional[Verb] = None,
    ) -> list[Event]:
        """Events sorted by (user_id, timestamp); timestamp ties keep insertion order."""
        with self._lock:
            if course_id not in self._by_course and course_id not in self._catalogs:
                raise UnknownCourse(course_id)
            per_user = self._by_course.get(course_id, {})
            if user_id is not None:
                users = [user_id] if user_id in per_user else []
            else:
                users = sorted(per_user)
            out: list[Event] = []
            for uid in users:
                stream = per_user[uid]
                if verb is not None:
                    stream = [ev for ev in stream if ev.verb is verb]
                out.extend(sorted(stream, key=lambda ev: ev.timestamp))
            return out

    def close(self):
        with self._lock:
            self._closed = True
