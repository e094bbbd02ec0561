"""The three command line surfaces."""

import json

import yaml

import runner_manager.bootstrap.cli as bootstrap_cli
import runner_manager.harness.cli as harness_cli
import runner_manager.service as service
from runner_manager.harness.fake_github import FakeGitHub
from runner_manager.harness.scenario import ScenarioScript, ScenarioEvent, script_to_dict


def test_harness_run_with_script_and_oracle_check(tmp_path, capsys):
    script = ScenarioScript(
        horizon=600,
        events=[
            ScenarioEvent(at=10, kind="enqueue_job",
                          payload={"labels": ["self-hosted", "linux-gpu-cuda"], "duration": 120})
        ],
        pod_startup_delay=20,
        initial_last_active=0,
    )
    script_path = tmp_path / "scenario.yaml"
    script_path.write_text(yaml.safe_dump(script_to_dict(script)))
    trace_path = tmp_path / "trace.ndjson"

    rc = harness_cli.main(
        ["run", "--script", str(script_path), "--trace-out", str(trace_path), "--check-oracle"]
    )
    assert rc == 0
    summary = json.loads(capsys.readouterr().out)
    assert summary["oracle_match"] is True
    assert summary["scale_writes"] == [[60.0, 1], [240.0, 0]]

    entries = [json.loads(line) for line in trace_path.read_text().splitlines()]
    assert entries
    assert all({"at", "actor", "action", "detail"} <= set(e) for e in entries)


def test_harness_run_generated_scenario(capsys):
    rc = harness_cli.main(["run", "--seed", "3"])
    assert rc == 0
    summary = json.loads(capsys.readouterr().out)
    assert summary["scenario_failed"] is False


def test_bootstrap_manifests_to_stdout(capsys):
    rc = bootstrap_cli.main(
        ["manifests", "--owner", "biocore", "--repo", "unifrac", "--namespace", "ci"]
    )
    assert rc == 0
    objs = [o for o in yaml.safe_load_all(capsys.readouterr().out) if o]
    assert any(o["kind"] == "Deployment" for o in objs)


def test_bootstrap_init_via_cli(tmp_path, monkeypatch):
    github = FakeGitHub(fixed_registration_token="REG-cli").start()
    try:
        runner_dir = tmp_path / "runner"
        runner_dir.mkdir()
        monkeypatch.setenv("GITHUB_TOKEN", "tok")
        rc = bootstrap_cli.main(
            [
                "init",
                "--dir", str(runner_dir),
                "--owner", "biocore",
                "--repo", "unifrac",
                "--labels", "self-hosted,linux-gpu-cuda",
                "--work-dir", str(tmp_path / "work"),
                "--github-api", github.base_url,
            ]
        )
        assert rc == 0
        assert (runner_dir / ".runner-initialized").exists()
        config = json.loads((runner_dir / "runner-config.json").read_text())
        assert config["registration_token"] == "REG-cli"
    finally:
        github.close()


def test_bootstrap_init_without_token_fails(tmp_path, monkeypatch, capsys):
    monkeypatch.delenv("GITHUB_TOKEN", raising=False)
    monkeypatch.delenv("GITHUB_TOKEN_FILE", raising=False)
    rc = bootstrap_cli.main(
        ["init", "--dir", str(tmp_path), "--owner", "o", "--repo", "r"]
    )
    assert rc == 1
    assert "configuration error" in capsys.readouterr().err


def test_service_main_reports_config_errors(capsys, monkeypatch):
    for var in ("GH_OWNER", "GH_REPO", "KUBE_DEPLOYMENT", "GITHUB_TOKEN"):
        monkeypatch.delenv(var, raising=False)
    rc = service.main([])
    assert rc == service.EXIT_CONFIG
    assert "configuration error" in capsys.readouterr().err


def test_fake_runner_requires_config(monkeypatch):
    from runner_manager.harness import fake_runner

    monkeypatch.delenv("RUNNER_CONFIG", raising=False)
    assert fake_runner.main([]) == 2
