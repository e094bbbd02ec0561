"""Classification corners and less-traveled policy shapes."""

import pytest

from runner_manager.config import Policy, RepoCoordinates
from runner_manager.errors import RateLimitedError, TransientError
from runner_manager.github import BackoffState, GitHubClient, execute_with_backoff
from runner_manager.harness.driver import run_scenario
from runner_manager.harness.httpserver import FakeHttpServer, Response
from runner_manager.harness.oracle import oracle_decisions
from runner_manager.harness.scenario import ScenarioEvent, ScenarioScript
from runner_manager.kube import KubeClient, KubeCredentials
from runner_manager.labels import LabelSet

from conftest import SteppingClock

REPO = RepoCoordinates("biocore", "unifrac")
MATCHING = ["self-hosted", "linux-gpu-cuda"]


def test_403_with_exhausted_quota_is_rate_limit_not_credential(clock):
    clock.t = 1000.0
    server = FakeHttpServer(
        lambda request: Response.json(
            403,
            {"message": "API rate limit exceeded"},
            {"X-RateLimit-Remaining": "0", "X-RateLimit-Reset": "1600"},
        )
    )
    server.start()
    try:
        client = GitHubClient(server.base_url, "t", clock=clock)
        with pytest.raises(RateLimitedError) as excinfo:
            client.list_runs(REPO, "queued")
        assert excinfo.value.retry_after == pytest.approx(600.0)
    finally:
        server.close()


def test_rate_limit_without_retry_after_falls_back_to_schedule():
    clock = SteppingClock()
    calls = []

    def call():
        calls.append(clock.now())
        raise RateLimitedError("limited", 429, retry_after=None)

    with pytest.raises(RateLimitedError):
        execute_with_backoff(call, BackoffState(), clock, window_end=10.0)
    assert calls == [0.0, 1.0, 3.0, 7.0]  # exponential schedule applies


def test_kube_409_conflict_is_transient(clock):
    server = FakeHttpServer(lambda request: Response.json(409, {"message": "conflict"}))
    server.start()
    try:
        creds = KubeCredentials(api_base=server.base_url, bearer_token="t", ca_bundle=None, namespace="ci")
        client = KubeClient(creds, "gha-runner", max_replicas=1, clock=clock)
        with pytest.raises(TransientError):
            client.write_scale(1)
    finally:
        server.close()


def test_scripted_cancellation_releases_the_runner():
    # A workflow cancelled from the GitHub side must free the runner and
    # let the manager scale down at the next poll.
    script = ScenarioScript(
        horizon=900,
        events=[
            ScenarioEvent(at=10, kind="enqueue_job",
                          payload={"labels": MATCHING, "duration": 5000, "ref": "big"}),
            ScenarioEvent(at=310, kind="complete_job", payload={"ref": "big"}),
        ],
        pod_startup_delay=20,
        initial_last_active=0,
    )
    result = run_scenario(script)
    assert not result.scenario_failed
    assert result.decisions == oracle_decisions(script, result.policy).decisions
    assert result.writes == [(60.0, 1), (360.0, 0)]


def test_two_runners_serve_three_jobs_with_cap_two():
    script = ScenarioScript(
        horizon=1200,
        events=[
            ScenarioEvent(at=10, kind="enqueue_job", payload={"labels": MATCHING, "duration": 200}),
            ScenarioEvent(at=12, kind="enqueue_job", payload={"labels": MATCHING, "duration": 200}),
            ScenarioEvent(at=14, kind="enqueue_job", payload={"labels": MATCHING, "duration": 200}),
        ],
        pod_startup_delay=20,
        initial_last_active=0,
        policy={"max_runners": 2},
    )
    result = run_scenario(script)
    assert not result.scenario_failed
    assert result.decisions == oracle_decisions(script, result.policy).decisions
    assert max(v for _, v in result.writes) == 2
    assert all(v <= 2 for _, v in result.writes)
    # Two pods work in parallel: three 200s jobs finish well before three
    # sequential runs would.
    completed = result.trace.select(actor="fake_github", action="job_completed")
    assert len(completed) == 3
    assert max(e.at for e in completed) < 10 + 20 + 2 * 200 + 120


def test_outstanding_statuses_knob_limits_what_pins_the_runner(clock, fake_github, gh_client):
    # With outstanding_statuses narrowed to {queued}, an in_progress job no
    # longer counts as demand.
    fake_github.enqueue_job(MATCHING)
    runner = fake_github.register_runner("r", MATCHING)
    fake_github.claim_job(runner)
    narrowed = frozenset({"queued"})
    jobs = gh_client.list_outstanding_jobs(REPO, narrowed, LabelSet(MATCHING))
    assert jobs == []
    default = Policy().outstanding_statuses
    jobs = gh_client.list_outstanding_jobs(REPO, default, LabelSet(MATCHING))
    assert len(jobs) == 1 and jobs[0].status == "in_progress"
