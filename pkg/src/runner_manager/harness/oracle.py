"""Brute-force decision oracle.

A flat, side-effect-free simulation that replays a scenario script with
perfect knowledge and applies the documented decision rules at every poll
tick. It shares no code with the reconciler or the clients -- only the
published contracts (decision priority, backoff schedule, annotation keys,
tick anchoring) -- so agreement between the two is meaningful evidence.

Returned decisions are keyed by poll-tick time; ticks where the manager was
stopped mid-poll (restart, horizon) yield no decision, matching the live
manager's log.
"""

from __future__ import annotations

import heapq
import itertools
from dataclasses import dataclass

from ..config import Policy
from ..labels import LabelSet
from .scenario import ScenarioScript
from .virtual_clock import SIM_EPOCH

# Documented contracts mirrored here on purpose (not imported from the
# implementation): decision reasons, backoff schedule, keepalive lead.
HOLD, DEMAND, KEEPALIVE, IDLE = "hold", "demand", "keepalive", "idle"
BACKOFF_CAP = 60.0


@dataclass
class _Job:
    job_id: int
    created_at: float
    labels: LabelSet
    duration: float
    ref: str | None
    status: str = "queued"
    claim_generation: int = 0


@dataclass
class _Pod:
    name: str
    running: bool = False
    busy_job: int | None = None
    busy_generation: int = 0


@dataclass
class OracleResult:
    decisions: list[tuple[float, int, str]]
    writes: list[tuple[float, int]]

    def replica_timeline(self) -> list[tuple[float, int]]:
        return [(0.0, 0)] + list(self.writes)


def oracle_decisions(
    script: ScenarioScript,
    policy: Policy | None = None,
    deployment: str = "gha-runner",
) -> OracleResult:
    policy = policy or Policy()
    sim = _OracleSim(script, policy, deployment)
    sim.run()
    return OracleResult(
        decisions=[(t - SIM_EPOCH, target, reason) for t, target, reason in sim.decisions],
        writes=[(t - SIM_EPOCH, n) for t, n in sim.writes],
    )


_ENV, _MANAGER = 0, 1  # same-instant ordering: environment before manager


class _OracleSim:
    def __init__(self, script: ScenarioScript, policy: Policy, deployment: str):
        self.script = script
        self.policy = policy
        self.deployment = deployment
        self.epoch = SIM_EPOCH
        self.horizon = self.epoch + script.horizon

        self._heap: list = []
        self._seq = itertools.count()

        # environment
        self.jobs: list[_Job] = []
        self.jobs_by_ref: dict[str, _Job] = {}
        self._job_seq = 0
        self.pods: list[_Pod] = []
        self._pod_seq = 0
        self.spec_replicas = 0
        self.github_fault: tuple[str, float] | None = None
        self.kube_fault: bool = False

        # durable store (Deployment annotations)
        self.ann_last_active: float | None = (
            self.epoch + script.initial_last_active if script.initial_last_active is not None else None
        )
        self.ann_keepalive_started: float | None = None

        # manager incarnation
        self.incarnation = 0
        self.anchor = self.epoch
        self.iteration = 0
        self.backoff_failures = 0
        self.next_allowed = 0.0
        self.mem_last_active: float | None = None
        self.mem_keepalive_started: float | None = None
        self.mem_last_written: int | None = None
        self.durable_loaded = False
        self.online = True

        # outputs
        self.decisions: list[tuple[float, int, str]] = []
        self.writes: list[tuple[float, int]] = []

        self._current_time = self.epoch

    # -- event plumbing ------------------------------------------------------

    def _push(self, t: float, priority: int, fn) -> None:
        heapq.heappush(self._heap, (t, priority, next(self._seq), fn))

    def run(self) -> None:
        for event in self.script.events:
            at = self.epoch + event.at
            if at <= self.epoch:
                self._apply_scenario_event(event)
            else:
                self._push(at, _ENV, lambda e=event: self._apply_scenario_event(e))
        self._push(self.anchor, _MANAGER, lambda inc=self.incarnation: self._tick(self.anchor, inc))

        while self._heap:
            t, _, _, fn = heapq.heappop(self._heap)
            if t >= self.horizon:
                break
            self._current_time = t
            fn()

    # -- environment ---------------------------------------------------------

    def _apply_scenario_event(self, event) -> None:
        kind, payload = event.kind, event.payload
        if kind == "enqueue_job":
            self._job_seq += 1
            job = _Job(
                job_id=self._job_seq,
                created_at=self.epoch + event.at,
                labels=LabelSet(payload.get("labels", self.policy.runner_labels.as_list())),
                duration=float(payload.get("duration", 300.0)),
                ref=payload.get("ref"),
            )
            self.jobs.append(job)
            if job.ref:
                self.jobs_by_ref[job.ref] = job
            self._settle()
        elif kind == "complete_job":
            job = self.jobs_by_ref.get(payload["ref"])
            if job is not None and job.status != "completed":
                job.status = "completed"
                for pod in self.pods:
                    if pod.busy_job == job.job_id:
                        pod.busy_job = None
                self._settle()
        elif kind == "github_fault":
            self.github_fault = ("status", float(payload.get("status", 500)))
        elif kind == "github_recover":
            self.github_fault = None
        elif kind == "rate_limit":
            self.github_fault = ("rate_limit", float(payload.get("retry_after", 60)))
        elif kind == "kube_fault":
            self.kube_fault = True
        elif kind == "kube_recover":
            self.kube_fault = False
        elif kind == "restart_manager":
            self.incarnation += 1
            self.online = False
            start_at = self.epoch + event.at + float(payload.get("downtime", 0))
            self._push(start_at, _MANAGER, lambda inc=self.incarnation: self._manager_start(start_at, inc))

    def _manager_start(self, at: float, inc: int) -> None:
        if inc != self.incarnation:
            return
        self.online = True
        self.anchor = at
        self.iteration = 0
        self.backoff_failures = 0
        self.next_allowed = 0.0
        self.mem_last_active = None
        self.mem_keepalive_started = None
        self.mem_last_written = None
        self.durable_loaded = False
        self._push(at, _MANAGER, lambda: self._tick(at, inc))

    # -- pods and claims -------------------------------------------------------

    def _apply_scale(self, target: int, at: float) -> None:
        self.spec_replicas = target
        while len(self.pods) < target:
            self._pod_seq += 1
            pod = _Pod(name=f"{self.deployment}-{self._pod_seq}")
            self.pods.append(pod)
            self._push(
                at + self.script.pod_startup_delay,
                _ENV,
                lambda p=pod: self._pod_running(p),
            )
        while len(self.pods) > target:
            pod = self.pods.pop()
            if pod.busy_job is not None:
                job = self._job_by_id(pod.busy_job)
                if job is not None and job.status == "in_progress":
                    job.status = "queued"
                    job.claim_generation += 1
        self._settle()

    def _pod_running(self, pod: _Pod) -> None:
        if pod not in self.pods or pod.running:
            return
        pod.running = True
        self._settle()

    def _settle(self) -> None:
        """Idle running pods claim the oldest eligible queued job, to fixpoint."""
        at = self._current_time
        progressed = True
        while progressed:
            progressed = False
            for pod in sorted((p for p in self.pods if p.running and p.busy_job is None),
                              key=lambda p: p.name):
                queued = [
                    j for j in self.jobs
                    if j.status == "queued" and j.labels.issubset(self.policy.runner_labels)
                ]
                if not queued:
                    break
                job = min(queued, key=lambda j: (j.created_at, j.job_id))
                job.status = "in_progress"
                job.claim_generation += 1
                pod.busy_job = job.job_id
                pod.busy_generation = job.claim_generation
                self._push(
                    at + job.duration,
                    _ENV,
                    lambda p=pod, j=job, g=job.claim_generation: self._complete(p, j, g),
                )
                progressed = True

    def _complete(self, pod: _Pod, job: _Job, generation: int) -> None:
        if job.status != "in_progress" or job.claim_generation != generation:
            return
        if pod not in self.pods or pod.busy_job != job.job_id:
            return
        job.status = "completed"
        pod.busy_job = None
        self._settle()

    def _job_by_id(self, job_id: int) -> _Job | None:
        for job in self.jobs:
            if job.job_id == job_id:
                return job
        return None

    # -- the manager model ---------------------------------------------------

    def _tick(self, tick: float, inc: int) -> None:
        if inc != self.incarnation or not self.online:
            return
        window_end = tick + self.policy.poll_interval
        if self.next_allowed > tick:
            if self.next_allowed >= window_end:
                self._finalize(tick, tick, inc, poll_ok=False)
                return
            self._push(self.next_allowed, _MANAGER, lambda a=self.next_allowed: self._attempt(tick, a, inc))
            return
        self._attempt(tick, tick, inc)

    def _attempt(self, tick: float, at: float, inc: int) -> None:
        if inc != self.incarnation or not self.online:
            return
        window_end = tick + self.policy.poll_interval
        fault = self.github_fault
        if fault is None:
            self.backoff_failures = 0
            self.next_allowed = at
            self._finalize(tick, at, inc, poll_ok=True)
            return
        self.backoff_failures += 1
        kind, value = fault
        if kind == "rate_limit":
            delay = value
        else:
            delay = min(2.0 ** (self.backoff_failures - 1), BACKOFF_CAP)
        self.next_allowed = at + delay
        if self.next_allowed >= window_end:
            self._finalize(tick, at, inc, poll_ok=False)
        else:
            self._push(self.next_allowed, _MANAGER, lambda a=self.next_allowed: self._attempt(tick, a, inc))

    def _finalize(self, tick: float, now: float, inc: int, poll_ok: bool) -> None:
        policy = self.policy
        kube_ok = not self.kube_fault
        if kube_ok and not self.durable_loaded:
            self.mem_last_active = self.ann_last_active
            self.mem_keepalive_started = self.ann_keepalive_started
            self.durable_loaded = True

        spec = self.spec_replicas
        running = sum(1 for p in self.pods if p.running)
        saw_running = running >= 1

        if not poll_ok:
            target = self.mem_last_written
            if target is None:
                target = spec if kube_ok else 0
            target, reason = min(target, policy.max_runners), HOLD
        else:
            outstanding = sum(
                1
                for j in self.jobs
                if j.status in policy.outstanding_statuses
                and j.labels.issubset(policy.runner_labels)
            )
            if outstanding > 0:
                target, reason = min(outstanding, policy.max_runners), DEMAND
            elif (
                self.mem_keepalive_started is not None
                and now - self.mem_keepalive_started < policy.min_dwell
            ):
                target, reason = 1, KEEPALIVE
            elif self.mem_last_active is None or (
                now - self.mem_last_active >= policy.force_interval - policy.min_dwell
            ):
                target, reason = 1, KEEPALIVE
            else:
                target, reason = 0, IDLE

        self.decisions.append((tick, target, reason))

        wrote = False
        if kube_ok and target != spec:
            self._apply_scale(target, now)
            self.writes.append((now, target))
            wrote = True

        if kube_ok and saw_running:
            self.mem_last_active = now if self.mem_last_active is None else max(self.mem_last_active, now)
        if reason == KEEPALIVE:
            if self.mem_keepalive_started is None:
                self.mem_keepalive_started = now
        elif reason in (DEMAND, IDLE):
            self.mem_keepalive_started = None
        if wrote:
            self.mem_last_written = target

        if kube_ok and self.durable_loaded:
            self.ann_last_active = self.mem_last_active
            self.ann_keepalive_started = self.mem_keepalive_started

        self.iteration += 1
        next_tick = self.anchor + self.iteration * policy.poll_interval
        self._push(next_tick, _MANAGER, lambda t=next_tick: self._tick(t, inc))
