"""Fake GitHub Actions API server.

Serves the three endpoints the manager touches (run listing, per-run job
listing, registration-token minting) plus a private ``/_harness`` surface
the fake runner uses to register, claim and complete jobs. Job status
transitions follow the real lifecycle: queued until a registered runner
claims the job, then in_progress, then completed.

Faults are scripted behavior, not errors: while a fault span is active,
every ``/repos/...`` request answers with the injected status.
"""

from __future__ import annotations

import re
import threading
from dataclasses import dataclass

from ..clock import Clock, SystemClock, to_rfc3339
from ..labels import LabelSet
from .httpserver import FakeHttpServer, Request, Response

PAGE_SIZE = 100

_RUNS_RE = re.compile(r"^/repos/([^/]+)/([^/]+)/actions/runs$")
_JOBS_RE = re.compile(r"^/repos/([^/]+)/([^/]+)/actions/runs/(\d+)/jobs$")
_REG_TOKEN_RE = re.compile(r"^/repos/([^/]+)/([^/]+)/actions/runners/registration-token$")
_RUNNER_RE = re.compile(r"^/_harness/runners/(\d+)(?:/(claim|complete))?$")

REQUIRED_HEADERS = {
    "accept": "application/vnd.github+json",
    "x-github-api-version": "2022-11-28",
}


@dataclass
class FakeJob:
    job_id: int
    run_id: int
    labels: list[str]
    created_at: float
    duration: float
    status: str = "queued"  # queued | in_progress | completed
    claimed_by: int | None = None
    claimed_at: float | None = None
    completed_at: float | None = None
    claim_generation: int = 0
    ref: str | None = None


@dataclass
class FakeRunnerRegistration:
    runner_id: int
    name: str
    labels: LabelSet
    busy_job: int | None = None


@dataclass
class RequestRecord:
    at: float
    method: str
    path: str
    headers: dict[str, str]
    status: int
    body: bytes = b""


class FakeGitHub:
    """In-memory Actions state plus the HTTP server in front of it."""

    def __init__(
        self,
        owner: str = "biocore",
        repo: str = "unifrac",
        expected_token: str | None = None,
        clock: Clock | None = None,
        keep_request_log: bool = False,
        fixed_registration_token: str | None = None,
        registration_token_ttl: float = 3600.0,
    ):
        self.owner = owner
        self.repo = repo
        self.expected_token = expected_token
        self.clock = clock or SystemClock()
        self.keep_request_log = keep_request_log
        self.fixed_registration_token = fixed_registration_token
        self.registration_token_ttl = registration_token_ttl

        self._lock = threading.RLock()
        self.jobs: dict[int, FakeJob] = {}
        self.runners: dict[int, FakeRunnerRegistration] = {}
        self.issued_registration_tokens: list[str] = []
        self._job_seq = 0
        self._run_seq = 0
        self._runner_seq = 0
        self._token_seq = 0
        self.fault: tuple[str, float] | None = None  # ("status", code) | ("rate_limit", retry_after)
        self.registration_status: int | None = None  # force a status on token minting

        self.api_request_count = 0
        self.request_log: list[RequestRecord] = []
        self.header_violations: list[str] = []
        self.on_transition = None  # callback(kind, job) for trace hooks

        self._server = FakeHttpServer(lambda request: _handle(self, request))

    # -- lifecycle ----------------------------------------------------------

    def start(self) -> "FakeGitHub":
        self._server.start()
        return self

    def close(self) -> None:
        self._server.close()

    @property
    def base_url(self) -> str:
        return self._server.base_url

    # -- state manipulation (driver / tests) --------------------------------

    def enqueue_job(
        self,
        labels: list[str],
        duration: float = 300.0,
        ref: str | None = None,
        jobs_in_run: int = 1,
    ) -> list[FakeJob]:
        """Create one run containing ``jobs_in_run`` queued jobs."""
        now = self.clock.now()
        with self._lock:
            self._run_seq += 1
            run_id = 1000 + self._run_seq
            created = []
            for _ in range(jobs_in_run):
                self._job_seq += 1
                job = FakeJob(
                    job_id=self._job_seq,
                    run_id=run_id,
                    labels=list(labels),
                    created_at=now,
                    duration=duration,
                    ref=ref,
                )
                self.jobs[job.job_id] = job
                created.append(job)
                self._emit("job_enqueued", job)
            return created

    def force_complete(self, ref: str) -> None:
        """Scripted completion (e.g. a cancelled workflow), runner or not."""
        now = self.clock.now()
        with self._lock:
            for job in self.jobs.values():
                if job.ref == ref and job.status != "completed":
                    self._complete_locked(job, now)

    def set_fault(self, kind: str, value: float) -> None:
        with self._lock:
            self.fault = (kind, value)

    def clear_fault(self) -> None:
        with self._lock:
            self.fault = None

    # -- runner-side operations (HTTP for subprocesses, direct for actors) --

    def register_runner(self, name: str, labels: list[str]) -> int:
        with self._lock:
            self._runner_seq += 1
            runner = FakeRunnerRegistration(self._runner_seq, name, LabelSet(labels))
            self.runners[runner.runner_id] = runner
            return runner.runner_id

    def deregister_runner(self, runner_id: int) -> None:
        with self._lock:
            runner = self.runners.pop(runner_id, None)
            if runner is not None and runner.busy_job is not None:
                job = self.jobs.get(runner.busy_job)
                if job is not None and job.status == "in_progress":
                    # Runner died mid-job: GitHub re-queues the work.
                    job.status = "queued"
                    job.claimed_by = None
                    job.claimed_at = None
                    job.claim_generation += 1
                    self._emit("job_requeued", job)

    def claim_job(self, runner_id: int) -> FakeJob | None:
        """Oldest queued job whose requested labels fit this runner."""
        now = self.clock.now()
        with self._lock:
            runner = self.runners.get(runner_id)
            if runner is None or runner.busy_job is not None:
                return None
            candidates = [
                job
                for job in self.jobs.values()
                if job.status == "queued" and LabelSet(job.labels).issubset(runner.labels)
            ]
            if not candidates:
                return None
            job = min(candidates, key=lambda j: (j.created_at, j.job_id))
            job.status = "in_progress"
            job.claimed_by = runner_id
            job.claimed_at = now
            job.claim_generation += 1
            runner.busy_job = job.job_id
            self._emit("job_claimed", job)
            return job

    def complete_job(self, runner_id: int, job_id: int) -> bool:
        now = self.clock.now()
        with self._lock:
            job = self.jobs.get(job_id)
            if job is None or job.status != "in_progress" or job.claimed_by != runner_id:
                return False
            self._complete_locked(job, now)
            return True

    def _complete_locked(self, job: FakeJob, now: float) -> None:
        job.status = "completed"
        job.completed_at = now
        if job.claimed_by is not None:
            runner = self.runners.get(job.claimed_by)
            if runner is not None and runner.busy_job == job.job_id:
                runner.busy_job = None
        self._emit("job_completed", job)

    def _emit(self, kind: str, job: FakeJob) -> None:
        if self.on_transition is not None:
            self.on_transition(kind, job)

    # -- read models ----------------------------------------------------------

    def run_status(self, run_id: int) -> str:
        jobs = [j for j in self.jobs.values() if j.run_id == run_id]
        if any(j.status == "in_progress" for j in jobs):
            return "in_progress"
        if any(j.status == "queued" for j in jobs):
            return "queued"
        return "completed"

    def snapshot_outstanding(self, statuses: set[str], runner_labels: LabelSet) -> list[FakeJob]:
        with self._lock:
            eligible = [
                job
                for job in self.jobs.values()
                if job.status in statuses and LabelSet(job.labels).issubset(runner_labels)
            ]
            return sorted(eligible, key=lambda j: (j.created_at, j.job_id))

    def mint_registration_token(self) -> tuple[str, float]:
        with self._lock:
            self._token_seq += 1
            token = self.fixed_registration_token or f"REG-{self._token_seq:04d}"
            self.issued_registration_tokens.append(token)
            return token, self.clock.now() + self.registration_token_ttl

    # -- request bookkeeping -----------------------------------------------

    def record_request(self, method: str, path: str, headers: dict[str, str], status: int) -> None:
        if path.startswith("/repos/"):
            self.api_request_count += 1
            auth = headers.get("authorization", "")
            expected = f"Bearer {self.expected_token}" if self.expected_token else None
            if expected is not None and auth != expected:
                self.header_violations.append(f"{method} {path}: bad authorization {auth!r}")
            for name, wanted in REQUIRED_HEADERS.items():
                if headers.get(name) != wanted:
                    self.header_violations.append(
                        f"{method} {path}: header {name}={headers.get(name)!r}, want {wanted!r}"
                    )
        if self.keep_request_log:
            self.request_log.append(
                RequestRecord(self.clock.now(), method, path, dict(headers), status)
            )


def _handle(gh: FakeGitHub, request: Request) -> Response:
    response = _dispatch(gh, request)
    gh.record_request(request.method, request.path, request.headers, response.status)
    return response


def _dispatch(gh: FakeGitHub, request: Request) -> Response:
    method, path, query = request.method, request.path, request.query

    if path.startswith("/repos/"):
        fault = _maybe_fault(gh)
        if fault is not None:
            return fault

    if method == "GET":
        match = _RUNS_RE.match(path)
        if match:
            if not _repo_ok(gh, match):
                return _not_found()
            wanted = query.get("status")
            with gh._lock:
                run_ids = sorted({job.run_id for job in gh.jobs.values()})
                runs = [
                    {"id": run_id, "status": gh.run_status(run_id), "created_at": _run_iso(gh, run_id)}
                    for run_id in run_ids
                ]
            if wanted:
                runs = [r for r in runs if r["status"] == wanted]
            return Response.json(200, {"total_count": len(runs), "workflow_runs": _page(runs, query)})

        match = _JOBS_RE.match(path)
        if match:
            if not _repo_ok(gh, match):
                return _not_found()
            run_id = int(match.group(3))
            with gh._lock:
                jobs = sorted(
                    (j for j in gh.jobs.values() if j.run_id == run_id),
                    key=lambda j: j.job_id,
                )
                payload = [
                    {
                        "id": j.job_id,
                        "run_id": j.run_id,
                        "status": j.status,
                        "labels": list(j.labels),
                        "created_at": to_rfc3339(j.created_at),
                    }
                    for j in jobs
                ]
            return Response.json(200, {"total_count": len(payload), "jobs": _page(payload, query)})

        return _not_found()

    if method == "POST":
        match = _REG_TOKEN_RE.match(path)
        if match:
            if not _repo_ok(gh, match):
                return _not_found()
            if gh.registration_status is not None:
                return Response.json(gh.registration_status, {"message": "forced status"})
            token, expires = gh.mint_registration_token()
            return Response.json(201, {"token": token, "expires_at": to_rfc3339(expires)})

        match = _RUNNER_RE.match(path)
        if match:
            runner_id, action = int(match.group(1)), match.group(2)
            if action == "claim":
                job = gh.claim_job(runner_id)
                if job is None:
                    return Response(204)
                return Response.json(
                    200,
                    {
                        "id": job.job_id,
                        "run_id": job.run_id,
                        "labels": list(job.labels),
                        "duration": job.duration,
                    },
                )
            if action == "complete":
                body = request.json()
                ok = gh.complete_job(runner_id, int(body.get("job_id", 0)))
                return Response.json(200 if ok else 409, {"ok": ok})
            return _not_found()

        if path == "/_harness/runners":
            body = request.json()
            token = str(body.get("token", ""))
            if gh.issued_registration_tokens and token not in gh.issued_registration_tokens:
                return Response.json(403, {"message": "bad registration token"})
            runner_id = gh.register_runner(str(body.get("name", "runner")), list(body.get("labels", [])))
            return Response.json(201, {"runner_id": runner_id})

        return _not_found()

    if method == "DELETE":
        match = _RUNNER_RE.match(path)
        if match and match.group(2) is None:
            gh.deregister_runner(int(match.group(1)))
            return Response.json(200, {"ok": True})
        return _not_found()

    return Response.json(405, {"message": f"method {method} not supported"})


def _maybe_fault(gh: FakeGitHub) -> Response | None:
    with gh._lock:
        fault = gh.fault
    if fault is None:
        return None
    kind, value = fault
    if kind == "rate_limit":
        return Response.json(429, {"message": "rate limited"}, {"Retry-After": str(int(value))})
    code = int(value)
    return Response.json(code, {"message": f"injected fault {code}"})


def _repo_ok(gh: FakeGitHub, match) -> bool:
    return match.group(1) == gh.owner and match.group(2) == gh.repo


def _not_found() -> Response:
    return Response.json(404, {"message": "not found"})


def _page(items: list, query: dict[str, str]) -> list:
    per_page = int(query.get("per_page", PAGE_SIZE))
    page = int(query.get("page", 1))
    start = (page - 1) * per_page
    return items[start : start + per_page]


def _run_iso(gh: FakeGitHub, run_id: int) -> str:
    jobs = [j for j in gh.jobs.values() if j.run_id == run_id]
    return to_rfc3339(min(j.created_at for j in jobs)) if jobs else to_rfc3339(0)
