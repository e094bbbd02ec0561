"""The stand-in for GitHub's proprietary runner binary.

Two forms share the claim/complete behavior:

* :class:`RunnerWorld` -- in-process actors bound to fake-kube pods, used by
  scenarios so everything stays on the virtual clock.
* ``main()`` -- a real subprocess (console script ``fake-github-runner``)
  that registers over HTTP, claims the oldest eligible job, drops a
  workspace file per job and exits cleanly on SIGTERM. Used to exercise the
  bootstrap entrypoint contract end to end.
"""

from __future__ import annotations

import json
import os
import signal
import sys
import threading
import urllib.error
import urllib.request
from dataclasses import dataclass
from typing import Callable

from .fake_github import FakeGitHub, FakeJob


@dataclass
class _Actor:
    pod_name: str
    runner_id: int
    busy_job: int | None = None
    claim_generation: int = 0


class RunnerWorld:
    """Keeps one fake runner per Running pod and drives job claims."""

    def __init__(
        self,
        github: FakeGitHub,
        labels: list[str],
        schedule: Callable[[float, Callable[[], None]], None],
        clock,
        on_event: Callable[[str, dict], None] | None = None,
    ):
        self.github = github
        self.labels = list(labels)
        self.schedule = schedule
        self.clock = clock
        self.on_event = on_event
        self.actors: dict[str, _Actor] = {}

    # fake_kube callbacks ---------------------------------------------------

    def pod_running(self, pod_name: str) -> None:
        if pod_name in self.actors:
            return
        runner_id = self.github.register_runner(pod_name, self.labels)
        self.actors[pod_name] = _Actor(pod_name=pod_name, runner_id=runner_id)
        self._emit("runner_registered", {"pod": pod_name})
        self.settle()

    def pod_terminating(self, pod_name: str) -> None:
        actor = self.actors.pop(pod_name, None)
        if actor is None:
            return
        # Deregistration re-queues any in-flight job on the fake GitHub side.
        self.github.deregister_runner(actor.runner_id)
        self._emit("runner_deregistered", {"pod": pod_name})
        self.settle()

    # claims ------------------------------------------------------------------

    def settle(self) -> None:
        """Let every idle runner claim work until nothing changes."""
        progressed = True
        while progressed:
            progressed = False
            for pod_name in sorted(self.actors):
                actor = self.actors[pod_name]
                if actor.busy_job is not None:
                    continue
                job = self.github.claim_job(actor.runner_id)
                if job is None:
                    continue
                actor.busy_job = job.job_id
                actor.claim_generation = job.claim_generation
                self._emit("job_claimed", {"pod": pod_name, "job": job.job_id})
                self.schedule(
                    self.clock.now() + job.duration,
                    lambda a=actor, j=job: self._complete(a, j),
                )
                progressed = True

    def _complete(self, actor: _Actor, job: FakeJob) -> None:
        current = self.github.jobs.get(job.job_id)
        if (
            actor.busy_job != job.job_id
            or current is None
            or current.status != "in_progress"
            or current.claim_generation != actor.claim_generation
        ):
            return  # stale timer: job was re-queued or force-completed
        self.github.complete_job(actor.runner_id, job.job_id)
        actor.busy_job = None
        self._emit("job_completed", {"pod": actor.pod_name, "job": job.job_id})
        self.settle()

    def poke(self) -> None:
        """Re-check claims after external state changes (enqueues, requeues)."""
        self.settle()

    def sync_busy(self) -> None:
        """Drop busy markers for jobs completed externally (scripted cancels)."""
        for actor in self.actors.values():
            if actor.busy_job is None:
                continue
            job = self.github.jobs.get(actor.busy_job)
            if job is None or job.status != "in_progress" or job.claimed_by != actor.runner_id:
                actor.busy_job = None
        self.settle()

    def _emit(self, action: str, detail: dict) -> None:
        if self.on_event is not None:
            self.on_event(action, detail)


# -- subprocess form ---------------------------------------------------------


def _http_json(method: str, url: str, payload: dict | None = None) -> tuple[int, dict]:
    data = json.dumps(payload).encode() if payload is not None else None
    request = urllib.request.Request(url, data=data, method=method)
    request.add_header("Content-Type", "application/json")
    try:
        with urllib.request.urlopen(request, timeout=10) as response:
            body = response.read()
            return response.status, json.loads(body) if body else {}
    except urllib.error.HTTPError as exc:
        return exc.code, {}


def main(argv: list[str] | None = None) -> int:
    """Entry point for the subprocess fake runner.

    Reads its connection details from the JSON config file produced by
    ``runner-bootstrap init`` (path in RUNNER_CONFIG); the work directory
    comes from RUNNER_WORK_DIR. Job durations are scaled down so tests
    complete quickly.
    """
    config_path = os.environ.get("RUNNER_CONFIG")
    if not config_path and argv:
        config_path = argv[0]
    if not config_path or not os.path.exists(config_path):
        print("fake runner: RUNNER_CONFIG not set or missing", file=sys.stderr)
        return 2
    with open(config_path, encoding="utf-8") as fh:
        config = json.load(fh)

    api_base = config["github_api_base"].rstrip("/")
    work_dir = os.environ.get("RUNNER_WORK_DIR") or config.get("work_dir") or "."
    poll_seconds = float(os.environ.get("FAKE_RUNNER_POLL_MS", "50")) / 1000.0
    time_scale = float(os.environ.get("FAKE_RUNNER_TIME_SCALE", "0.01"))

    stop = threading.Event()
    signal.signal(signal.SIGTERM, lambda *_: stop.set())
    signal.signal(signal.SIGINT, lambda *_: stop.set())

    status, body = _http_json(
        "POST",
        f"{api_base}/_harness/runners",
        {
            "name": config.get("runner_name", "fake-runner"),
            "labels": config.get("labels", []),
            "token": config.get("registration_token", ""),
        },
    )
    if status != 201:
        print(f"fake runner: registration rejected ({status})", file=sys.stderr)
        return 3
    runner_id = body["runner_id"]

    os.makedirs(work_dir, exist_ok=True)
    try:
        while not stop.is_set():
            status, job = _http_json("POST", f"{api_base}/_harness/runners/{runner_id}/claim")
            if status != 200 or not job:
                stop.wait(poll_seconds)
                continue
            workspace = os.path.join(work_dir, f"job-{job['id']}")
            os.makedirs(workspace, exist_ok=True)
            with open(os.path.join(workspace, "result.txt"), "w", encoding="utf-8") as fh:
                fh.write(f"job {job['id']} ran with labels {job['labels']}\n")
            stop.wait(min(job.get("duration", 0) * time_scale, 0.5))
            _http_json(
                "POST",
                f"{api_base}/_harness/runners/{runner_id}/complete",
                {"job_id": job["id"]},
            )
    finally:
        _http_json("DELETE", f"{api_base}/_harness/runners/{runner_id}")
    return 0


if __name__ == "__main__":
    sys.exit(main(sys.argv[1:]))
