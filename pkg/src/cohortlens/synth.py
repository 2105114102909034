"""Synthetic, ground-truth-labeled cohorts for pipeline and performance tests.

Five learner archetypes from the characteristic-group literature drive the
generator: no-shows, observers, drop-ins, passive and active participants.
The generative parameters (session counts, event intensities, score
distributions) are this module's own invention; they are tabulated in
ARCHETYPE_PROFILES so tests and docs share one source.
"""

from __future__ import annotations

from dataclasses import dataclass
from datetime import datetime, timedelta, timezone
from enum import Enum
from typing import Optional

import numpy as np

from .events import CatalogItem, CourseCatalog, Event, Result, Track, Verb
from .metrics import ALL_METRICS, MetricMatrix, MetricVector


class SynthError(Exception):
    pass


class BadSpec(SynthError):
    pass


class Archetype(str, Enum):
    NO_SHOW = "no_show"
    OBSERVER = "observer"
    DROP_IN = "drop_in"
    PASSIVE_PARTICIPANT = "passive_participant"
    ACTIVE_PARTICIPANT = "active_participant"


# Per-archetype behavior profile. sessions: (lo, hi) uniform; events_per_session:
# Poisson mean; quiz/forum rates are per-session Poisson means; score_beta are
# Beta(a, b) parameters for quiz scores.
ARCHETYPE_PROFILES: dict[Archetype, dict] = {
    Archetype.NO_SHOW: {
        "sessions": (0, 0),
    },
    Archetype.OBSERVER: {
        "sessions": (1, 2),
        "visits_per_session": 3.0,
        "videos_per_session": 0.0,
        "forum_per_session": 0.0,
        "quizzes_per_session": 0.0,
    },
    Archetype.DROP_IN: {
        "sessions": (2, 4),
        "visits_per_session": 2.0,
        "videos_per_session": 5.0,
        "forum_per_session": 0.0,
        "quizzes_per_session": 0.0,
        "item_pool": 3,  # watches a small subset of videos only
    },
    Archetype.PASSIVE_PARTICIPANT: {
        "sessions": (8, 14),
        "visits_per_session": 4.0,
        "videos_per_session": 6.0,
        "forum_per_session": 0.0,
        "quizzes_per_session": 0.0,
    },
    Archetype.ACTIVE_PARTICIPANT: {
        "sessions": (10, 18),
        "visits_per_session": 4.0,
        "videos_per_session": 5.0,
        "forum_per_session": 1.5,
        "quizzes_per_session": 1.0,
        "score_beta": (8.0, 2.0),
    },
}

_VIDEO_VERBS = (
    Verb.VIDEO_PLAY,
    Verb.VIDEO_PAUSE,
    Verb.VIDEO_RESIZE,
    Verb.VIDEO_FULLSCREEN,
    Verb.VIDEO_SPEED_CHANGE,
)
_FORUM_VERBS = (
    Verb.FORUM_QUESTION,
    Verb.FORUM_COMMENT,
    Verb.FORUM_ANSWER,
    Verb.FORUM_VISIT,
    Verb.FORUM_SUBSCRIBE,
)

_COURSE_START = datetime(2024, 1, 1, 8, 0, tzinfo=timezone.utc)


@dataclass(frozen=True)
class ArchetypeSpec:
    archetype: Archetype
    count: int
    overrides: Optional[dict] = None

    def __post_init__(self):
        if self.count < 0:
            raise BadSpec("archetype count must be >= 0")


@dataclass(frozen=True)
class CohortSpec:
    course_id: str
    duration_days: int
    archetypes: tuple[ArchetypeSpec, ...]
    seed: int = 0

    def __post_init__(self):
        if self.duration_days < 1:
            raise BadSpec("duration must be at least one day")
        if sum(a.count for a in self.archetypes) < 1:
            raise BadSpec("cohort must contain at least one user")


@dataclass(frozen=True)
class Cohort:
    events: tuple[Event, ...]
    truth: dict[str, Archetype]
    catalog: CourseCatalog


def default_catalog(course_id: str, quizzes: int = 6, videos: int = 10) -> CourseCatalog:
    items = tuple(
        [CatalogItem(f"quiz-{i:02d}", "quiz") for i in range(quizzes)]
        + [CatalogItem(f"video-{i:02d}", "video") for i in range(videos)]
    )
    return CourseCatalog(course_id=course_id, items=items)


def _ts(base: datetime, offset_seconds: float) -> datetime:
    return base + timedelta(seconds=float(offset_seconds))


def _forum_verb(rng: np.random.Generator, ensure_contribution: bool) -> Verb:
    if ensure_contribution:
        return _FORUM_VERBS[int(rng.integers(3))]  # question/comment/answer
    return _FORUM_VERBS[int(rng.integers(len(_FORUM_VERBS)))]


def _user_events(
    user_id: str,
    course_id: str,
    archetype: Archetype,
    profile: dict,
    catalog: CourseCatalog,
    duration_days: int,
    rng: np.random.Generator,
) -> list[Event]:
    events: list[Event] = []
    enroll_at = _ts(_COURSE_START, rng.uniform(0, 3600))
    events.append(Event(user_id, course_id, Verb.ENROLL, "course", enroll_at))
    lo, hi = profile["sessions"]
    n_sessions = int(rng.integers(lo, hi + 1)) if hi > 0 else 0
    if n_sessions == 0:
        return events

    quiz_ids = sorted(catalog.ids_of_kind("quiz"))
    video_ids = sorted(catalog.ids_of_kind("video"))
    if "item_pool" in profile:
        pool = min(profile["item_pool"], len(video_ids))
        video_ids = list(rng.choice(video_ids, size=pool, replace=False))

    day_span = duration_days * 86400.0
    gap_scale = max(day_span / (n_sessions + 1), 3600.0)
    made_contribution = False
    cursor = rng.uniform(3600, 3600 + gap_scale)
    for s_idx in range(n_sessions):
        t = cursor
        budget = []
        for _ in range(int(rng.poisson(profile["visits_per_session"]))):
            kind_pool = quiz_ids + list(video_ids)
            rid = kind_pool[int(rng.integers(len(kind_pool)))]
            budget.append((Verb.VISITED_ITEM, rid, None))
        for _ in range(int(rng.poisson(profile["videos_per_session"]))):
            rid = video_ids[int(rng.integers(len(video_ids)))] if video_ids else "video-00"
            budget.append((_VIDEO_VERBS[int(rng.integers(len(_VIDEO_VERBS)))], rid, None))
        for _ in range(int(rng.poisson(profile["forum_per_session"]))):
            verb = _forum_verb(rng, ensure_contribution=not made_contribution)
            if verb in (Verb.FORUM_QUESTION, Verb.FORUM_COMMENT, Verb.FORUM_ANSWER):
                made_contribution = True
            budget.append((verb, f"thread-{int(rng.integers(20)):02d}", None))
        for _ in range(int(rng.poisson(profile.get("quizzes_per_session", 0.0)))):
            a, b = profile["score_beta"]
            score = float(np.clip(rng.beta(a, b), 0.0, 1.0))
            graded = bool(rng.random() < 0.7)
            if graded:
                track = Track.MAIN if rng.random() < 0.75 else Track.BONUS
            else:
                track = Track.UNGRADED
            rid = quiz_ids[int(rng.integers(len(quiz_ids)))]
            budget.append((Verb.QUIZ_SUBMIT, rid, Result(score, graded, track)))
        if not budget:  # a session needs at least one event
            rid = video_ids[0] if video_ids else quiz_ids[0]
            budget.append((Verb.VISITED_ITEM, rid, None))
        for i in rng.permutation(len(budget)):
            verb, rid, result = budget[int(i)]
            events.append(Event(user_id, course_id, verb, rid, _ts(_COURSE_START, t), result=result))
            t += rng.uniform(20, 300)  # well under the 30-minute gap
        # next session opens strictly more than 30 minutes after this one ends
        cursor = t + 2400.0 + rng.uniform(0, gap_scale)
    # active participants must leave a textual trace
    if archetype is Archetype.ACTIVE_PARTICIPANT and not made_contribution:
        events.append(
            Event(
                user_id,
                course_id,
                Verb.FORUM_QUESTION,
                "thread-00",
                events[-1].timestamp + timedelta(seconds=60),
            )
        )
    return events


def generate_cohort(spec: CohortSpec) -> Cohort:
    """Deterministic labeled cohort: events, a truth map and a matching catalog."""
    catalog = default_catalog(spec.course_id)
    truth: dict[str, Archetype] = {}
    events: list[Event] = []
    children = np.random.SeedSequence(spec.seed).spawn(
        sum(a.count for a in spec.archetypes)
    )
    user_index = 0
    for arch_spec in spec.archetypes:
        profile = dict(ARCHETYPE_PROFILES[arch_spec.archetype])
        if arch_spec.overrides:
            profile.update(arch_spec.overrides)
        for _ in range(arch_spec.count):
            user_id = f"user-{user_index:05d}"
            rng = np.random.default_rng(children[user_index])
            user_events = _user_events(
                user_id,
                spec.course_id,
                arch_spec.archetype,
                profile,
                catalog,
                spec.duration_days,
                rng,
            )
            user_events.sort(key=lambda ev: ev.timestamp)
            events.extend(user_events)
            truth[user_id] = arch_spec.archetype
            user_index += 1
    return Cohort(events=tuple(events), truth=truth, catalog=catalog)


# Archetype mean profiles over the 17 metrics, used for the dense benchmark
# matrix.  Column order follows metrics.ALL_METRICS.
_BENCHMARK_MEANS = np.array(
    [
        # PE    S   TSD    ASD   FA  TFC  FO  VPA  DA   ID   QD   VD   QP  GQP  UQP  MQP  BQP
        [1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
        [2.0, 1.5, 900, 600, 0.0, 0.0, 0.0, 0.0, 0.0, 0.2, 0.1, 0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
        [4.0, 3.0, 3000, 1000, 0.5, 0.0, 0.5, 15, 1.0, 0.3, 0.1, 0.4, 0.0, 0.0, 0.0, 0.0, 0.0],
        [6.0, 11, 14000, 1300, 1.0, 0.0, 1.0, 60, 3.0, 0.6, 0.3, 0.8, 0.0, 0.0, 0.0, 0.0, 0.0],
        [10.0, 14, 20000, 1400, 12, 6.0, 6.0, 70, 5.0, 0.9, 0.9, 0.9, 0.8, 0.8, 0.8, 0.8, 0.7],
    ]
)
_BENCHMARK_WEIGHTS = np.array([0.15, 0.2, 0.2, 0.25, 0.2])


def generate_benchmark(n_users: int = 15000, m_metrics: int = 17, seed: int = 0) -> MetricMatrix:
    """Dense metric matrix drawn from a Gaussian mixture of archetype profiles.

    Bypasses event generation; intended for timing the clustering pipeline at
    realistic scale.  Zero rows are filtered like any real matrix.
    """
    if n_users < 1:
        raise BadSpec("need at least one user")
    if not 1 <= m_metrics <= len(ALL_METRICS):
        raise BadSpec(f"m_metrics must be in [1, {len(ALL_METRICS)}]")
    rng = np.random.default_rng(seed)
    components = rng.choice(len(_BENCHMARK_MEANS), size=n_users, p=_BENCHMARK_WEIGHTS)
    means = _BENCHMARK_MEANS[components][:, :m_metrics]
    noise = rng.normal(0.0, 1.0, size=means.shape) * (0.15 * np.abs(means) + 0.05)
    values = np.clip(means + noise, 0.0, None)
    metric_ids = ALL_METRICS[:m_metrics]
    rows = []
    for i in range(n_users):
        vals = tuple(float(v) for v in values[i])
        if any(v != 0.0 for v in vals):
            rows.append(MetricVector(user_id=f"user-{i:05d}", values=vals))
    return MetricMatrix(course_id="benchmark", metric_ids=metric_ids, rows=tuple(rows))
