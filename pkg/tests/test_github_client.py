import pytest

from runner_manager.config import RepoCoordinates
from runner_manager.errors import CredentialError, ProtocolError, RateLimitedError, TransientError
from runner_manager.github import GitHubClient, RegistrationToken
from runner_manager.harness.httpserver import FakeHttpServer, Response
from runner_manager.labels import LabelSet

from conftest import TEST_TOKEN

REPO = RepoCoordinates("biocore", "unifrac")
STATUSES = frozenset({"queued", "in_progress"})
RUNNER_LABELS = LabelSet(["self-hosted", "linux-gpu-cuda", "x64"])


def test_label_filtering_returns_only_eligible_jobs(fake_github, gh_client):
    fake_github.enqueue_job(["self-hosted", "linux-gpu-cuda"])
    fake_github.enqueue_job(["self-hosted", "linux-gpu-cuda"])
    fake_github.enqueue_job(["ubuntu-latest"])
    jobs = gh_client.list_outstanding_jobs(REPO, STATUSES, RUNNER_LABELS)
    assert len(jobs) == 2
    assert all(job.status == "queued" for job in jobs)


def test_zero_runs_gives_empty_list(gh_client):
    assert gh_client.list_outstanding_jobs(REPO, STATUSES, RUNNER_LABELS) == []


def test_pagination_across_runs(fake_github, gh_client, clock):
    # 150 matching queued jobs spread over 150 runs: the run listing paginates.
    for i in range(150):
        clock.advance(1)
        fake_github.enqueue_job(["self-hosted", "linux-gpu-cuda"])
    jobs = gh_client.list_outstanding_jobs(REPO, STATUSES, RUNNER_LABELS)
    assert len(jobs) == 150
    assert [j.job_id for j in jobs] == list(range(1, 151))


def test_pagination_within_one_run(fake_github, gh_client):
    # One run holding 150 jobs: the per-run job listing paginates.
    fake_github.enqueue_job(["self-hosted", "linux-gpu-cuda"], jobs_in_run=150)
    jobs = gh_client.list_outstanding_jobs(REPO, STATUSES, RUNNER_LABELS)
    assert len(jobs) == 150


def test_ordering_is_by_created_at_then_id(fake_github, gh_client, clock):
    clock.advance(10)
    late_first = fake_github.enqueue_job(["self-hosted", "linux-gpu-cuda"])[0]
    clock.t = 5
    earlier = fake_github.enqueue_job(["self-hosted", "linux-gpu-cuda"])[0]
    jobs = gh_client.list_outstanding_jobs(REPO, STATUSES, RUNNER_LABELS)
    assert [j.job_id for j in jobs] == [earlier.job_id, late_first.job_id]


def test_repeated_listing_is_pure(fake_github, gh_client):
    fake_github.enqueue_job(["self-hosted", "linux-gpu-cuda"])
    first = gh_client.list_outstanding_jobs(REPO, STATUSES, RUNNER_LABELS)
    second = gh_client.list_outstanding_jobs(REPO, STATUSES, RUNNER_LABELS)
    assert first == second


def test_every_request_carries_required_headers(fake_github, gh_client):
    fake_github.enqueue_job(["self-hosted", "linux-gpu-cuda"])
    gh_client.list_outstanding_jobs(REPO, STATUSES, RUNNER_LABELS)
    gh_client.create_registration_token(REPO)
    assert fake_github.api_request_count >= 4
    assert fake_github.header_violations == []
    for record in fake_github.request_log:
        assert record.headers["authorization"] == f"Bearer {TEST_TOKEN}"
        assert record.headers["accept"] == "application/vnd.github+json"
        assert record.headers["x-github-api-version"] == "2022-11-28"


def test_wrong_token_flagged_by_fake(fake_github, clock):
    client = GitHubClient(fake_github.base_url, "wrong-token", clock=clock)
    client.list_outstanding_jobs(REPO, STATUSES, RUNNER_LABELS)
    assert fake_github.header_violations


def test_401_classified_as_credential_error(fake_github, gh_client):
    fake_github.set_fault("status", 401)
    with pytest.raises(CredentialError):
        gh_client.list_outstanding_jobs(REPO, STATUSES, RUNNER_LABELS)


def test_429_carries_retry_after(fake_github, gh_client):
    fake_github.set_fault("rate_limit", 120)
    with pytest.raises(RateLimitedError) as excinfo:
        gh_client.list_outstanding_jobs(REPO, STATUSES, RUNNER_LABELS)
    assert excinfo.value.retry_after == 120.0


def test_5xx_classified_transient(fake_github, gh_client):
    fake_github.set_fault("status", 503)
    with pytest.raises(TransientError):
        gh_client.list_outstanding_jobs(REPO, STATUSES, RUNNER_LABELS)


def test_registration_token_echoes_fixture(clock):
    from runner_manager.harness.fake_github import FakeGitHub

    gh = FakeGitHub(fixed_registration_token="REG-abc", registration_token_ttl=3600, clock=clock).start()
    try:
        client = GitHubClient(gh.base_url, TEST_TOKEN, clock=clock)
        token = client.create_registration_token(REPO)
        assert token == RegistrationToken(token="REG-abc", expires_at=clock.now() + 3600)
    finally:
        gh.close()


def test_registration_403_is_credential_error_without_retry(fake_github, gh_client):
    fake_github.registration_status = 403
    with pytest.raises(CredentialError):
        gh_client.create_registration_token(REPO)
    token_posts = [r for r in fake_github.request_log if "registration-token" in r.path]
    assert len(token_posts) == 1


def test_missing_expires_at_is_protocol_error(clock):
    server = FakeHttpServer(lambda request: Response.json(201, {"token": "REG-x"}))
    server.start()
    try:
        client = GitHubClient(server.base_url, TEST_TOKEN, clock=clock)
        with pytest.raises(ProtocolError):
            client.create_registration_token(REPO)
    finally:
        server.close()


def test_non_json_body_is_protocol_error(clock):
    server = FakeHttpServer(lambda request: Response(200, b"<html>nope</html>", "text/html"))
    server.start()
    try:
        client = GitHubClient(server.base_url, TEST_TOKEN, clock=clock)
        with pytest.raises(ProtocolError):
            client.list_outstanding_jobs(REPO, STATUSES, RUNNER_LABELS)
    finally:
        server.close()


def test_unknown_repo_is_distinct_from_transient(fake_github, clock):
    client = GitHubClient(fake_github.base_url, TEST_TOKEN, clock=clock)
    with pytest.raises(CredentialError):
        client.list_outstanding_jobs(RepoCoordinates("nobody", "nothing"), STATUSES, RUNNER_LABELS)
