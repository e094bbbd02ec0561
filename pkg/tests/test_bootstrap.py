"""Runner directory lifecycle: init-once semantics and the entrypoint contract."""

import hashlib
import json
import os
import sys
import threading
import time
from pathlib import Path

import pytest

from runner_manager.bootstrap import (
    MARKER_NAME,
    RunnerProfile,
    init_runner_dir,
    run_runner,
)
from runner_manager.bootstrap.profile import InitStatus
from runner_manager.config import RepoCoordinates
from runner_manager.errors import CredentialError
from runner_manager.github import GitHubClient
from runner_manager.harness.fake_github import FakeGitHub

REPO = RepoCoordinates("biocore", "unifrac")
LABELS = ["self-hosted", "linux-gpu-cuda"]


def _dir_digest(root: str) -> str:
    """Stable digest of a directory tree: paths plus file contents."""
    digest = hashlib.sha256()
    for path in sorted(Path(root).rglob("*")):
        digest.update(str(path.relative_to(root)).encode())
        if path.is_file():
            digest.update(path.read_bytes())
    return digest.hexdigest()


@pytest.fixture
def github():
    server = FakeGitHub(fixed_registration_token="REG-abc").start()
    yield server
    server.close()


@pytest.fixture
def profile(tmp_path):
    persistent = tmp_path / "runner"
    work = tmp_path / "work"
    persistent.mkdir()
    work.mkdir()
    from runner_manager.labels import LabelSet

    return RunnerProfile(
        persistent_dir=str(persistent),
        work_dir=str(work),
        labels=LabelSet(LABELS),
    )


def _client(github):
    return GitHubClient(github.base_url, "t")


def test_init_writes_config_with_labels_and_token(github, profile):
    result = init_runner_dir(profile, REPO, _client(github))
    assert result.status is InitStatus.INITIALIZED
    assert os.path.exists(result.config_marker)
    config = json.loads(Path(profile.persistent_dir, "runner-config.json").read_text())
    assert config["registration_token"] == "REG-abc"
    assert "linux-gpu-cuda" in config["labels"]
    assert config["work_dir"] == profile.work_dir
    assert config["repo_url"] == "https://github.com/biocore/unifrac"


def test_second_init_is_noop_and_directory_byte_identical(github, profile):
    init_runner_dir(profile, REPO, _client(github))
    before = _dir_digest(profile.persistent_dir)
    result = init_runner_dir(profile, REPO, _client(github))
    assert result.status is InitStatus.ALREADY_INITIALIZED
    assert _dir_digest(profile.persistent_dir) == before
    assert len(github.issued_registration_tokens) == 1


def test_failed_token_acquisition_leaves_no_marker(github, profile):
    github.registration_status = 403
    with pytest.raises(CredentialError):
        init_runner_dir(profile, REPO, _client(github))
    assert not os.path.exists(os.path.join(profile.persistent_dir, MARKER_NAME))
    assert not os.path.exists(os.path.join(profile.persistent_dir, "runner-config.json"))


def test_init_requires_existing_directory(github, tmp_path):
    from runner_manager.labels import LabelSet

    profile = RunnerProfile(
        persistent_dir=str(tmp_path / "missing"),
        work_dir=str(tmp_path / "work"),
        labels=LabelSet(LABELS),
    )
    with pytest.raises(OSError):
        init_runner_dir(profile, REPO, _client(github))


def test_run_refuses_without_marker(profile):
    assert run_runner(profile, environment={}) == 2


def test_profile_rejects_shared_directories(tmp_path):
    with pytest.raises(ValueError):
        RunnerProfile(persistent_dir=str(tmp_path), work_dir=str(tmp_path))


def fake_runner_exe() -> str:
    import shutil

    found = shutil.which("fake-github-runner")
    return found or f"{sys.executable} -m runner_manager.harness.fake_runner"


def _fake_runner_env():
    return {
        **os.environ,
        "FAKE_RUNNER_EXE": fake_runner_exe(),
        "FAKE_RUNNER_POLL_MS": "20",
        "FAKE_RUNNER_TIME_SCALE": "0.001",
    }


def test_entrypoint_runs_fake_runner_through_a_job(github, profile):
    # End to end: init, launch, claim, complete, terminate cleanly.
    github.enqueue_job(LABELS, duration=50.0)
    init_runner_dir(profile, REPO, _client(github))

    stop = threading.Event()
    exit_codes = []
    thread = threading.Thread(
        target=lambda: exit_codes.append(run_runner(profile, stop=stop, environment=_fake_runner_env()))
    )
    thread.start()
    try:
        deadline = time.time() + 15
        while time.time() < deadline:
            if all(job.status == "completed" for job in github.jobs.values()) and github.jobs:
                break
            time.sleep(0.05)
        assert github.jobs[1].status == "completed"
    finally:
        stop.set()
        thread.join(timeout=10)
    assert exit_codes == [0]
    assert not github.runners, "fake runner should deregister on shutdown"

    # Persistent/ephemeral separation: workspace artifacts live under work_dir,
    # configuration and marker state under persistent_dir.
    work_files = [str(p.relative_to(profile.work_dir)) for p in Path(profile.work_dir).rglob("*") if p.is_file()]
    assert any("job-1" in f for f in work_files)
    persistent_files = {p.name for p in Path(profile.persistent_dir).iterdir()}
    assert MARKER_NAME in persistent_files
    assert "runner-config.json" in persistent_files
    assert not any("job-" in name for name in persistent_files)


def test_marker_contains_timestamp(github, profile):
    init_runner_dir(profile, REPO, _client(github), now=1704067200.0)
    marker = Path(profile.persistent_dir, MARKER_NAME).read_text().strip()
    assert marker == "2024-01-01T00:00:00Z"
