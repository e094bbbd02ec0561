"""Scenario scripts: timed event lists driving the fake world.

Scripts live in YAML or JSON files::

    horizon: 3600
    pod_startup_delay: 20
    events:
      - {at: 10, kind: enqueue_job, labels: [self-hosted, linux-gpu-cuda], duration: 300}
      - {at: 900, kind: github_fault, status: 503}
      - {at: 1200, kind: github_recover}

Event times are seconds from scenario start. ``complete_job`` refers to a
previous ``enqueue_job`` by its ``ref``.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field

import yaml

from ..config import DEFAULT_RUNNER_LABELS

EVENT_KINDS = (
    "enqueue_job",
    "complete_job",
    "github_fault",
    "github_recover",
    "kube_fault",
    "kube_recover",
    "restart_manager",
    "rate_limit",
)

DEFAULT_POD_STARTUP_DELAY = 20.0
DEFAULT_JOB_DURATION = 300.0


@dataclass(frozen=True)
class ScenarioEvent:
    at: float
    kind: str
    payload: dict = field(default_factory=dict)


@dataclass
class ScenarioScript:
    horizon: float
    events: list[ScenarioEvent] = field(default_factory=list)
    pod_startup_delay: float = DEFAULT_POD_STARTUP_DELAY
    initial_last_active: float | None = None  # seconds relative to start, may be negative
    policy: dict = field(default_factory=dict)  # optional Policy overrides for the CLI

    def __post_init__(self):
        validate_script(self)


def validate_script(script: ScenarioScript) -> None:
    if script.horizon <= 0:
        raise ValueError("scenario horizon must be positive")
    seen_refs: set[str] = set()
    last_at = float("-inf")
    for event in script.events:
        if event.kind not in EVENT_KINDS:
            raise ValueError(f"unknown event kind {event.kind!r}")
        if event.at < last_at:
            raise ValueError(f"events must be sorted by time: {event}")
        last_at = event.at
        if event.kind == "enqueue_job":
            ref = event.payload.get("ref")
            if ref is not None:
                if ref in seen_refs:
                    raise ValueError(f"duplicate job ref {ref!r}")
                seen_refs.add(ref)
            if float(event.payload.get("duration", DEFAULT_JOB_DURATION)) < 0:
                raise ValueError(f"job duration must be >= 0: {event}")
        elif event.kind == "complete_job":
            ref = event.payload.get("ref")
            if ref is None or ref not in seen_refs:
                raise ValueError(f"complete_job must reference a previously enqueued job: {event}")
        elif event.kind == "github_fault":
            status = int(event.payload.get("status", 500))
            if not 400 <= status <= 599:
                raise ValueError(f"github_fault status out of range: {event}")
        elif event.kind == "rate_limit":
            if float(event.payload.get("retry_after", 60)) <= 0:
                raise ValueError(f"rate_limit retry_after must be positive: {event}")
        elif event.kind == "restart_manager":
            if float(event.payload.get("downtime", 0)) < 0:
                raise ValueError(f"restart downtime must be >= 0: {event}")


def load_script(path: str) -> ScenarioScript:
    """Load a YAML/JSON scenario file (JSON is a YAML subset)."""
    with open(path, encoding="utf-8") as fh:
        raw = yaml.safe_load(fh)
    if not isinstance(raw, dict):
        raise ValueError(f"{path}: scenario file must hold a mapping")
    return script_from_dict(raw)


def script_from_dict(raw: dict) -> ScenarioScript:
    events = []
    for idx, entry in enumerate(raw.get("events") or []):
        if not isinstance(entry, dict) or "at" not in entry or "kind" not in entry:
            raise ValueError(f"event #{idx} needs 'at' and 'kind': {entry!r}")
        payload = {k: v for k, v in entry.items() if k not in ("at", "kind")}
        events.append(ScenarioEvent(at=float(entry["at"]), kind=str(entry["kind"]), payload=payload))
    events.sort(key=lambda e: e.at)
    return ScenarioScript(
        horizon=float(raw.get("horizon", 3600)),
        events=events,
        pod_startup_delay=float(raw.get("pod_startup_delay", DEFAULT_POD_STARTUP_DELAY)),
        initial_last_active=(
            float(raw["initial_last_active"]) if raw.get("initial_last_active") is not None else None
        ),
        policy=dict(raw.get("policy") or {}),
    )


def script_to_dict(script: ScenarioScript) -> dict:
    out: dict = {
        "horizon": script.horizon,
        "pod_startup_delay": script.pod_startup_delay,
        "events": [{"at": e.at, "kind": e.kind, **e.payload} for e in script.events],
    }
    if script.initial_last_active is not None:
        out["initial_last_active"] = script.initial_last_active
    if script.policy:
        out["policy"] = script.policy
    return out


def generate_random_script(
    seed: int,
    poll_interval: float = 60.0,
    min_ticks: int = 25,
    max_ticks: int = 60,
    max_concurrent_jobs: int = 10,
    with_faults: bool = True,
    with_restarts: bool = False,
    matching_labels: tuple[str, ...] = DEFAULT_RUNNER_LABELS,
) -> ScenarioScript:
    """Randomized but reproducible workload: job bursts, faults, restarts.

    Job arrivals keep at most ``max_concurrent_jobs`` outstanding; most jobs
    request matching labels, some request foreign labels and must be ignored.
    """
    rng = random.Random(seed)
    horizon = poll_interval * rng.randint(min_ticks, max_ticks)
    events: list[tuple[float, str, dict]] = []

    # Job arrivals: bursty Poisson-ish process.
    outstanding: list[float] = []  # completion estimates, for the concurrency cap
    t = 0.0
    while True:
        t += rng.expovariate(1.0 / (6.0 * poll_interval))
        if t >= horizon * 0.9:
            break
        outstanding = [done for done in outstanding if done > t]
        burst = rng.randint(1, 3)
        for _ in range(burst):
            if len(outstanding) >= max_concurrent_jobs:
                break
            duration = rng.uniform(0.5, 8.0) * poll_interval
            matching = rng.random() > 0.15
            labels = list(matching_labels) if matching else ["self-hosted", "windows-arm"]
            events.append(
                (round(t + rng.uniform(0, 30), 3), "enqueue_job", {"labels": labels, "duration": round(duration, 3)})
            )
            if matching:
                outstanding.append(t + duration + 3 * poll_interval)

    if with_faults:
        for _ in range(rng.randint(0, 2)):
            start = rng.uniform(0, horizon * 0.85)
            span = rng.uniform(0.5, 6.0) * poll_interval
            if rng.random() < 0.3:
                events.append((round(start, 3), "rate_limit", {"retry_after": rng.choice([15, 30, 90, 180])}))
            else:
                events.append((round(start, 3), "github_fault", {"status": rng.choice([500, 502, 503])}))
            events.append((round(min(start + span, horizon - 1), 3), "github_recover", {}))
        if rng.random() < 0.25:
            start = rng.uniform(0, horizon * 0.85)
            span = rng.uniform(0.5, 4.0) * poll_interval
            events.append((round(start, 3), "kube_fault", {"status": 500}))
            events.append((round(min(start + span, horizon - 1), 3), "kube_recover", {}))

    if with_restarts:
        for _ in range(rng.randint(1, 3)):
            at = rng.uniform(poll_interval, horizon * 0.9)
            events.append((round(at, 3), "restart_manager", {"downtime": rng.choice([0.0, 5.0, 45.0])}))

    events.sort(key=lambda item: item[0])
    return ScenarioScript(
        horizon=horizon,
        events=[ScenarioEvent(at=at, kind=kind, payload=payload) for at, kind, payload in events],
        pod_startup_delay=rng.choice([0.0, 5.0, 20.0, 45.0]),
    )
