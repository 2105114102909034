"""The 17 per-user activity metrics and the metric matrix they form.

Five metric families: platform exploration, sessions, forum, video/download,
item discovery and quiz performance.  ``build_matrix`` computes every
requested metric in a single pass over a course's event stream and drops rows
where all requested values are zero.
"""

from __future__ import annotations

import io
from dataclasses import dataclass
from datetime import datetime, timedelta
from enum import Enum
from typing import Optional, Sequence

from .events import CourseCatalog, Event, EventStore, Track, Verb


class MetricError(Exception):
    pass


class UnsortedInput(MetricError):
    pass


class MissingCatalog(MetricError):
    pass


class UnknownMetric(MetricError):
    pass


class MetricId(str, Enum):
    PE = "PE"    # distinct verbs
    S = "S"      # session count
    TSD = "TSD"  # total session duration, seconds
    ASD = "ASD"  # average session duration, seconds
    FA = "FA"    # forum activity = TFC + FO
    TFC = "TFC"  # textual forum contributions
    FO = "FO"    # forum observation
    VPA = "VPA"  # video player events
    DA = "DA"    # downloads
    ID = "ID"    # share of visited items
    QD = "QD"    # share of visited quizzes
    VD = "VD"    # share of visited videos
    QP = "QP"    # mean score, all quiz submissions
    GQP = "GQP"  # mean score, graded submissions
    UQP = "UQP"  # mean score, ungraded submissions
    MQP = "MQP"  # mean score, graded main-track submissions
    BQP = "BQP"  # mean score, graded bonus-track submissions


ALL_METRICS: tuple[MetricId, ...] = tuple(MetricId)

METRIC_DESCRIPTIONS: dict[MetricId, str] = {
    MetricId.PE: "Platform exploration: number of distinct verbs used",
    MetricId.S: "Sessions: event runs with no gap wider than 30 minutes",
    MetricId.TSD: "Total session duration in seconds",
    MetricId.ASD: "Average session duration in seconds (0 when no sessions)",
    MetricId.FA: "Forum activity: contributions plus observation",
    MetricId.TFC: "Textual forum contributions: questions, comments, answers",
    MetricId.FO: "Forum observation: visits and subscriptions",
    MetricId.VPA: "Video player activity: play/pause/resize/fullscreen/speed events",
    MetricId.DA: "Download activity: number of download events",
    MetricId.ID: "Item discovery: share of catalog items visited",
    MetricId.QD: "Quiz discovery: share of catalog quizzes visited",
    MetricId.VD: "Video discovery: share of catalog videos visited",
    MetricId.QP: "Quiz performance: mean score over all submissions",
    MetricId.GQP: "Graded quiz performance: mean score over graded submissions",
    MetricId.UQP: "Ungraded quiz performance: mean score over ungraded submissions",
    MetricId.MQP: "Main quiz performance: mean score over graded main-track submissions",
    MetricId.BQP: "Bonus quiz performance: mean score over graded bonus-track submissions",
}

SESSION_GAP = timedelta(minutes=30)

_FORUM_CONTRIB = {Verb.FORUM_QUESTION, Verb.FORUM_COMMENT, Verb.FORUM_ANSWER}
_FORUM_OBSERVE = {Verb.FORUM_VISIT, Verb.FORUM_SUBSCRIBE}
_VIDEO_VERBS = {
    Verb.VIDEO_PLAY,
    Verb.VIDEO_PAUSE,
    Verb.VIDEO_RESIZE,
    Verb.VIDEO_FULLSCREEN,
    Verb.VIDEO_SPEED_CHANGE,
}
_DISCOVERY = {MetricId.ID, MetricId.QD, MetricId.VD}


@dataclass(frozen=True)
class Session:
    user_id: str
    start: datetime
    end: datetime
    event_count: int

    @property
    def duration(self) -> float:
        return (self.end - self.start).total_seconds()


@dataclass(frozen=True)
class MetricVector:
    user_id: str
    values: tuple[float, ...]


@dataclass(frozen=True)
class MetricMatrix:
    course_id: str
    metric_ids: tuple[MetricId, ...]
    rows: tuple[MetricVector, ...]

    @property
    def n(self) -> int:
        return len(self.rows)

    @property
    def m(self) -> int:
        return len(self.metric_ids)

    @property
    def user_ids(self) -> tuple[str, ...]:
        return tuple(r.user_id for r in self.rows)

    def to_csv(self) -> str:
        """Header ``user_id,<ids>``; values as decimals, up to 6 fractional digits."""
        buf = io.StringIO()
        buf.write("user_id," + ",".join(m.value for m in self.metric_ids) + "\n")
        for row in self.rows:
            cells = [_format_value(v) for v in row.values]
            buf.write(row.user_id + "," + ",".join(cells) + "\n")
        return buf.getvalue()


def _format_value(v: float) -> str:
    text = f"{v:.6f}".rstrip("0").rstrip(".")
    return text if text else "0"


def sessionize(user_events: Sequence[Event]) -> list[Session]:
    """Partition one user's time-ordered events into sessions.

    A new session starts when the gap to the previous event is strictly wider
    than 30 minutes; a gap of exactly 30 minutes does not split.
    """
    sessions: list[Session] = []
    start = prev = None
    count = 0
    for ev in user_events:
        if prev is not None and ev.timestamp < prev:
            raise UnsortedInput("events not sorted by timestamp")
        if prev is None or ev.timestamp - prev > SESSION_GAP:
            if prev is not None:
                sessions.append(Session(ev.user_id, start, prev, count))
            start = ev.timestamp
            count = 0
        prev = ev.timestamp
        count += 1
    if prev is not None:
        sessions.append(Session(user_events[-1].user_id, start, prev, count))
    return sessions


def _session_events(events: Sequence[Event]) -> list[Event]:
    # enrollment is not a platform login; it never opens a session
    return [ev for ev in events if ev.verb is not Verb.ENROLL]


def _mean(scores: list[float]) -> float:
    return sum(scores) / len(scores) if scores else 0.0


def compute_metric(
    metric: MetricId,
    user_events: Sequence[Event],
    catalog: Optional[CourseCatalog] = None,
) -> float:
    """Direct per-metric computation for one user's events (sorted by time)."""
    if metric is MetricId.PE:
        return float(len({ev.verb for ev in user_events}))
    if metric in (MetricId.S, MetricId.TSD, MetricId.ASD):
        sessions = sessionize(_session_events(user_events))
        if metric is MetricId.S:
            return float(len(sessions))
        tsd = sum(s.duration for s in sessions)
        if metric is MetricId.TSD:
            return tsd
        return tsd / len(sessions) if sessions else 0.0
    if metric is MetricId.TFC:
        return float(sum(1 for ev in user_events if ev.verb in _FORUM_CONTRIB))
    if metric is MetricId.FO:
        return float(sum(1 for ev in user_events if ev.verb in _FORUM_OBSERVE))
    if metric is MetricId.FA:
        return compute_metric(MetricId.TFC, user_events) + compute_metric(
            MetricId.FO, user_events
        )
    if metric is MetricId.VPA:
        return float(sum(1 for ev in user_events if ev.verb in _VIDEO_VERBS))
    if metric is MetricId.DA:
        return float(sum(1 for ev in user_events if ev.verb is Verb.DOWNLOAD))
    if metric in _DISCOVERY:
        if catalog is None:
            raise MissingCatalog(f"{metric.value} needs a course catalog")
        kind = {MetricId.ID: None, MetricId.QD: "quiz", MetricId.VD: "video"}[metric]
        eligible = catalog.ids_of_kind(kind)
        total = len(eligible)
        if total == 0:
            return 0.0
        visited = {
            ev.resource_id
            for ev in user_events
            if ev.verb is Verb.VISITED_ITEM and ev.resource_id in eligible
        }
        return len(visited) / total
    if metric in (MetricId.QP, MetricId.GQP, MetricId.UQP, MetricId.MQP, MetricId.BQP):
        scores = []
        for ev in user_events:
            if ev.verb is not Verb.QUIZ_SUBMIT or ev.result is None:
                continue
            r = ev.result
            if (
                metric is MetricId.QP
                or (metric is MetricId.GQP and r.graded)
                or (metric is MetricId.UQP and not r.graded)
                or (metric is MetricId.MQP and r.graded and r.track is Track.MAIN)
                or (metric is MetricId.BQP and r.graded and r.track is Track.BONUS)
            ):
                scores.append(r.score)
        return _mean(scores)
    raise UnknownMetric(str(metric))


class _UserAccumulator:
    """Single-pass per-user state for all 17 metrics."""

    __slots__ = (
        "verbs", "session_count", "session_seconds", "session_start", "last_ts",
        "counts", "visited", "scores",
    )

    def __init__(self):
        self.verbs: set[Verb] = set()
        self.session_count = 0
        self.session_seconds = 0.0
        self.session_start: Optional[datetime] = None
        self.last_ts: Optional[datetime] = None
        self.counts = {"tfc": 0, "fo": 0, "vpa": 0, "da": 0}
        self.visited: set[str] = set()
        self.scores: dict[str, list[float]] = {"all": [], "g": [], "u": [], "m": [], "b": []}

    def feed(self, ev: Event):
        self.verbs.add(ev.verb)
        if ev.verb is not Verb.ENROLL:
            if self.last_ts is None or ev.timestamp - self.last_ts > SESSION_GAP:
                if self.last_ts is not None:
                    self.session_count += 1
                    self.session_seconds += (self.last_ts - self.session_start).total_seconds()
                self.session_start = ev.timestamp
            self.last_ts = ev.timestamp
        if ev.verb in _FORUM_CONTRIB:
            self.counts["tfc"] += 1
        elif ev.verb in _FORUM_OBSERVE:
            self.counts["fo"] += 1
        elif ev.verb in _VIDEO_VERBS:
            self.counts["vpa"] += 1
        elif ev.verb is Verb.DOWNLOAD:
            self.counts["da"] += 1
        elif ev.verb is Verb.VISITED_ITEM:
            self.visited.add(ev.resource_id)
        elif ev.verb is Verb.QUIZ_SUBMIT and ev.result is not None:
            r = ev.result
            self.scores["all"].append(r.score)
            if r.graded:
                self.scores["g"].append(r.score)
                if r.track is Track.MAIN:
                    self.scores["m"].append(r.score)
                elif r.track is Track.BONUS:
                    self.scores["b"].append(r.score)
            else:
                self.scores["u"].append(r.score)

    def finalize(
        self, metric_ids: Sequence[MetricId], catalog: Optional[CourseCatalog]
    ) -> tuple[float, ...]:
        if self.last_ts is not None:
            self.session_count += 1
            self.session_seconds += (self.last_ts - self.session_start).total_seconds()
            self.last_ts = None
        s, tsd = self.session_count, self.session_seconds
        out = []
        for metric in metric_ids:
            if metric is MetricId.PE:
                out.append(float(len(self.verbs)))
            elif metric is MetricId.S:
                out.append(float(s))
            elif metric is MetricId.TSD:
                out.append(tsd)
            elif metric is MetricId.ASD:
                out.append(tsd / s if s else 0.0)
            elif metric is MetricId.TFC:
                out.append(float(self.counts["tfc"]))
            elif metric is MetricId.FO:
                out.append(float(self.counts["fo"]))
            elif metric is MetricId.FA:
                out.append(float(self.counts["tfc"]) + float(self.counts["fo"]))
            elif metric is MetricId.VPA:
                out.append(float(self.counts["vpa"]))
            elif metric is MetricId.DA:
                out.append(float(self.counts["da"]))
            elif metric in _DISCOVERY:
                kind = {MetricId.ID: None, MetricId.QD: "quiz", MetricId.VD: "video"}[metric]
                eligible = catalog.ids_of_kind(kind)
                out.append(len(self.visited & eligible) / len(eligible) if eligible else 0.0)
            elif metric is MetricId.QP:
                out.append(_mean(self.scores["all"]))
            elif metric is MetricId.GQP:
                out.append(_mean(self.scores["g"]))
            elif metric is MetricId.UQP:
                out.append(_mean(self.scores["u"]))
            elif metric is MetricId.MQP:
                out.append(_mean(self.scores["m"]))
            elif metric is MetricId.BQP:
                out.append(_mean(self.scores["b"]))
            else:
                raise UnknownMetric(str(metric))
        return tuple(out)


def build_matrix(
    store: EventStore, course_id: str, metric_ids: Sequence[MetricId]
) -> MetricMatrix:
    """All requested metrics for every user of a course, in one stream pass.

    Rows whose requested metrics are all zero are dropped; remaining rows are
    ordered by user_id.
    """
    metric_ids = tuple(metric_ids)
    catalog = store.catalog_for(course_id)
    if any(m in _DISCOVERY for m in metric_ids) and catalog is None:
        raise MissingCatalog(f"course {course_id} has no catalog")
    accumulators: dict[str, _UserAccumulator] = {}
    for ev in store.events_for(course_id):
        acc = accumulators.get(ev.user_id)
        if acc is None:
            acc = accumulators[ev.user_id] = _UserAccumulator()
        acc.feed(ev)
    rows = []
    for user_id in sorted(accumulators):
        values = accumulators[user_id].finalize(metric_ids, catalog)
        if any(v != 0.0 for v in values):
            rows.append(MetricVector(user_id=user_id, values=values))
    return MetricMatrix(course_id=course_id, metric_ids=metric_ids, rows=tuple(rows))


def parse_metric_ids(names: Sequence[str]) -> tuple[MetricId, ...]:
    out = []
    for name in names:
        try:
            out.append(MetricId(name.strip().upper()))
        except ValueError:
            raise UnknownMetric(name.strip()) from None
    return tuple(out)
