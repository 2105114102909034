"""Encouragement actions: targeted email campaigns with optional A/B split
and before/after effect reports.

Mail delivery is a port with two adapters: a real SMTP client and a
file-based outbox (JSON lines) so campaigns can be exercised offline.
"""

from __future__ import annotations

import json
import os
import random
import smtplib
import threading
import uuid
from dataclasses import dataclass, replace
from datetime import datetime, timezone
from email.message import EmailMessage
from math import ceil
from pathlib import Path
from typing import Optional, Sequence

from .events import EventStore
from .insights import StudentGroup
from .metrics import MetricId, compute_metric


class ActionError(Exception):
    pass


class EmptyGroup(ActionError):
    pass


class AlreadyDispatched(ActionError):
    pass


class MailerUnavailable(ActionError):
    pass


class NotDispatched(ActionError):
    pass


class BadWindows(ActionError):
    pass


class UnknownCampaign(ActionError):
    pass


def ab_split(user_ids: Sequence[str], seed: int) -> tuple[tuple[str, ...], tuple[str, ...]]:
    """Seeded uniform shuffle; the first ceil(n/2) users form the treatment arm."""
    ids = list(user_ids)
    if not ids:
        raise EmptyGroup("cannot split an empty group")
    rng = random.Random(seed)
    rng.shuffle(ids)
    cut = ceil(len(ids) / 2)
    return tuple(ids[:cut]), tuple(ids[cut:])


@dataclass(frozen=True)
class Campaign:
    campaign_id: str
    group_id: str
    subject: str
    body: str
    ab_test: bool
    treatment_ids: tuple[str, ...]
    control_ids: tuple[str, ...]
    seed: int
    dispatched_at: Optional[datetime] = None

    def to_dict(self) -> dict:
        return {
            "campaign_id": self.campaign_id,
            "group_id": self.group_id,
            "subject": self.subject,
            "body": self.body,
            "ab_test": self.ab_test,
            "treatment_ids": list(self.treatment_ids),
            "control_ids": list(self.control_ids),
            "seed": self.seed,
            "dispatched_at": self.dispatched_at.isoformat() if self.dispatched_at else None,
        }

    @staticmethod
    def from_dict(raw: dict) -> "Campaign":
        return Campaign(
            campaign_id=raw["campaign_id"],
            group_id=raw["group_id"],
            subject=raw["subject"],
            body=raw["body"],
            ab_test=raw["ab_test"],
            treatment_ids=tuple(raw["treatment_ids"]),
            control_ids=tuple(raw["control_ids"]),
            seed=raw["seed"],
            dispatched_at=(
                datetime.fromisoformat(raw["dispatched_at"])
                if raw.get("dispatched_at")
                else None
            ),
        )


def create_campaign(
    group: StudentGroup, subject: str, body: str, ab_test: bool, seed: int = 0
) -> Campaign:
    if not group.user_ids:
        raise EmptyGroup(group.group_id)
    if ab_test:
        treatment, control = ab_split(group.user_ids, seed)
    else:
        treatment, control = tuple(group.user_ids), ()
    return Campaign(
        campaign_id=uuid.uuid4().hex[:12],
        group_id=group.group_id,
        subject=subject,
        body=body,
        ab_test=ab_test,
        treatment_ids=treatment,
        control_ids=control,
        seed=seed,
    )


def render_template(text: str, user_id: str) -> str:
    return text.replace("{{user_id}}", user_id)


class FileOutbox:
    """Mailer adapter writing one JSON object per message to an outbox file."""

    def __init__(self, path: str | Path):
        self.path = Path(path)

    def check(self):
        self.path.parent.mkdir(parents=True, exist_ok=True)
        if not os.access(self.path.parent, os.W_OK):
            raise MailerUnavailable(f"outbox directory {self.path.parent} not writable")

    def send(self, campaign_id: str, user_id: str, subject: str, body: str):
        record = {
            "campaign_id": campaign_id,
            "user_id": user_id,
            "subject": subject,
            "body": body,
            "timestamp": datetime.now(timezone.utc).isoformat(),
        }
        with self.path.open("a") as fh:
            fh.write(json.dumps(record) + "\n")


class SmtpMailer:
    """SMTP adapter; credentials come from SMTP_USERNAME / SMTP_PASSWORD."""

    def __init__(self, host: str, port: int, sender: str):
        self.host = host
        self.port = port
        self.sender = sender

    def _connect(self) -> smtplib.SMTP:
        try:
            client = smtplib.SMTP(self.host, self.port, timeout=10)
        except OSError as exc:
            raise MailerUnavailable(str(exc)) from None
        username = os.environ.get("SMTP_USERNAME")
        password = os.environ.get("SMTP_PASSWORD")
        if username and password:
            client.login(username, password)
        return client

    def check(self):
        self._connect().quit()

    def send(self, campaign_id: str, user_id: str, subject: str, body: str):
        msg = EmailMessage()
        msg["From"] = self.sender
        msg["To"] = user_id
        msg["Subject"] = subject
        msg.set_content(body)
        client = self._connect()
        try:
            client.send_message(msg)
        finally:
            client.quit()


@dataclass(frozen=True)
class DispatchRecord:
    campaign_id: str
    sent: tuple[str, ...]
    failed: tuple[tuple[str, str], ...]  # (user_id, error)
    dispatched_at: datetime

    def to_dict(self) -> dict:
        return {
            "campaign_id": self.campaign_id,
            "sent": list(self.sent),
            "failed": [list(f) for f in self.failed],
            "dispatched_at": self.dispatched_at.isoformat(),
        }


class CampaignStore:
    """Single-file campaign registry; dispatch is single-flight per campaign."""

    def __init__(self, path: Optional[str | Path] = None):
        self._lock = threading.RLock()
        self._campaigns: dict[str, Campaign] = {}
        self._records: dict[str, DispatchRecord] = {}
        self._path = Path(path) if path is not None else None
        if self._path is not None and self._path.exists():
            raw = json.loads(self._path.read_text())
            for doc in raw["campaigns"].values():
                c = Campaign.from_dict(doc)
                self._campaigns[c.campaign_id] = c

    def _flush(self):
        if self._path is not None:
            self._path.parent.mkdir(parents=True, exist_ok=True)
            payload = {"campaigns": {cid: c.to_dict() for cid, c in self._campaigns.items()}}
            self._path.write_text(json.dumps(payload))

    def add(self, campaign: Campaign) -> Campaign:
        with self._lock:
            self._campaigns[campaign.campaign_id] = campaign
            self._flush()
        return campaign

    def get(self, campaign_id: str) -> Campaign:
        with self._lock:
            try:
                return self._campaigns[campaign_id]
            except KeyError:
                raise UnknownCampaign(campaign_id) from None

    def for_group(self, group_id: str) -> list[Campaign]:
        with self._lock:
            return [c for c in self._campaigns.values() if c.group_id == group_id]

    def dispatch(self, campaign_id: str, mailer) -> DispatchRecord:
        """Send one message per treatment member; never to control.

        Partial per-recipient failures are recorded and the campaign is still
        marked dispatched.  A second dispatch attempt raises AlreadyDispatched;
        an unreachable mailer aborts before anything is sent.
        """
        with self._lock:
            campaign = self.get(campaign_id)
            if campaign.dispatched_at is not None:
                raise AlreadyDispatched(campaign_id)
            mailer.check()
            now = datetime.now(timezone.utc)
            # claim the campaign before sending so concurrent attempts lose
            campaign = replace(campaign, dispatched_at=now)
            self._campaigns[campaign_id] = campaign
            self._flush()
        sent = []
        failed = []
        for user_id in campaign.treatment_ids:
            try:
                mailer.send(
                    campaign.campaign_id,
                    user_id,
                    render_template(campaign.subject, user_id),
                    render_template(campaign.body, user_id),
                )
                sent.append(user_id)
            except Exception as exc:  # per-recipient failure, keep going
                failed.append((user_id, str(exc)))
        record = DispatchRecord(
            campaign_id=campaign_id,
            sent=tuple(sent),
            failed=tuple(failed),
            dispatched_at=now,
        )
        with self._lock:
            self._records[campaign_id] = record
        return record

    def record_for(self, campaign_id: str) -> Optional[DispatchRecord]:
        with self._lock:
            return self._records.get(campaign_id)


@dataclass(frozen=True)
class EffectReport:
    group_id: str
    campaign_id: str
    metric_ids: tuple[MetricId, ...]
    window_before: tuple[datetime, datetime]
    window_after: tuple[datetime, datetime]
    arms: dict  # arm name -> {"before": means, "after": means, "delta": means}

    def to_dict(self) -> dict:
        return {
            "group_id": self.group_id,
            "campaign_id": self.campaign_id,
            "metric_ids": [m.value for m in self.metric_ids],
            "window_before": [t.isoformat() for t in self.window_before],
            "window_after": [t.isoformat() for t in self.window_after],
            "arms": self.arms,
        }


def _arm_means(
    store: EventStore,
    course_id: str,
    user_ids: Sequence[str],
    metric_ids: Sequence[MetricId],
    window: tuple[datetime, datetime],
) -> list[float]:
    catalog = store.catalog_for(course_id)
    start, end = window
    totals = [0.0] * len(metric_ids)
    for uid in user_ids:
        events = [
            ev
            for ev in store.events_for(course_id, user_id=uid)
            if start <= ev.timestamp < end
        ]
        for i, metric in enumerate(metric_ids):
            totals[i] += compute_metric(metric, events, catalog)
    n = len(user_ids)
    return [t / n for t in totals] if n else [0.0] * len(metric_ids)


def effect_report(
    store: EventStore,
    group: StudentGroup,
    campaign: Campaign,
    metric_ids: Sequence[MetricId],
    window_before: tuple[datetime, datetime],
    window_after: tuple[datetime, datetime],
) -> EffectReport:
    """Per-arm metric means inside each window and their after-minus-before
    deltas.  Arms are fixed populations: zero-row filtering does not apply."""
    if campaign.dispatched_at is None:
        raise NotDispatched(campaign.campaign_id)
    for start, end in (window_before, window_after):
        if end <= start:
            raise BadWindows("window end must be after start")
    if window_after[0] < window_before[1]:
        raise BadWindows("windows overlap")
    if window_after[0] < campaign.dispatched_at:
        raise BadWindows("after-window starts before dispatch")
    metric_ids = tuple(metric_ids)
    arms = {}
    for arm_name, ids in (("treatment", campaign.treatment_ids), ("control", campaign.control_ids)):
        before = _arm_means(store, group.course_id, ids, metric_ids, window_before)
        after = _arm_means(store, group.course_id, ids, metric_ids, window_after)
        arms[arm_name] = {
            "size": len(ids),
            "before": before,
            "after": after,
            "delta": [a - b for a, b in zip(after, before)],
        }
    return EffectReport(
        group_id=group.group_id,
        campaign_id=campaign.campaign_id,
        metric_ids=metric_ids,
        window_before=window_before,
        window_after=window_after,
        arms=arms,
    )
