from datetime import datetime, timedelta, timezone

import pytest

from cohortlens.events import (
    CatalogItem,
    CourseCatalog,
    Event,
    EventStore,
    Result,
    Track,
    Verb,
)

T0 = datetime(2024, 1, 1, 10, 0, tzinfo=timezone.utc)


def ev(user="u1", course="c1", verb=Verb.VIDEO_PLAY, rid="v1", minutes=0.0, result=None):
    return Event(
        user_id=user,
        course_id=course,
        verb=verb,
        resource_id=rid,
        timestamp=T0 + timedelta(minutes=minutes),
        result=result,
    )


def quiz(user, minutes, score, graded=True, track=Track.MAIN, rid="q1", course="c1"):
    if not graded:
        track = Track.UNGRADED
    return ev(
        user=user,
        course=course,
        verb=Verb.QUIZ_SUBMIT,
        rid=rid,
        minutes=minutes,
        result=Result(score=score, graded=graded, track=track),
    )


@pytest.fixture
def catalog():
    return CourseCatalog(
        course_id="c1",
        items=(
            CatalogItem("q1", "quiz"),
            CatalogItem("q2", "quiz"),
            CatalogItem("q3", "quiz"),
            CatalogItem("q4", "quiz"),
            CatalogItem("v1", "video"),
            CatalogItem("v2", "video"),
        ),
    )


@pytest.fixture
def store(catalog):
    s = EventStore()
    s.add_catalog(catalog)
    return s
