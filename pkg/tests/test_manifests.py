import yaml

from runner_manager.bootstrap import RunnerProfile, emit_manifests
from runner_manager.config import Config, Policy, RepoCoordinates
from runner_manager.harness.fake_kube import FakeKube
from runner_manager.labels import LabelSet


def _default_output():
    profile = RunnerProfile(persistent_dir="/runner", work_dir="/work")
    config = Config(
        repo=RepoCoordinates("biocore", "unifrac"),
        policy=Policy(),
        kube_deployment="gha-runner",
        kube_namespace="ci",
    )
    return emit_manifests(config, profile)


def _runner_deployment(text):
    objs = list(yaml.safe_load_all(text))
    return next(
        o for o in objs if o and o.get("kind") == "Deployment" and o["metadata"]["name"] == "gha-runner"
    )


def test_runner_resources_match_defaults():
    deployment = _runner_deployment(_default_output())
    resources = deployment["spec"]["template"]["spec"]["containers"][0]["resources"]
    assert resources["requests"] == {
        "cpu": 4,
        "memory": "8Gi",
        "ephemeral-storage": "80Gi",
        "nvidia.com/gpu": 1,
    }


def test_runner_starts_at_zero_replicas():
    assert _runner_deployment(_default_output())["spec"]["replicas"] == 0


def test_labels_include_custom_os_string():
    assert "linux-gpu-cuda" in _default_output()


def test_manager_mounts_token_from_secret():
    objs = list(yaml.safe_load_all(_default_output()))
    manager = next(o for o in objs if o.get("kind") == "Deployment" and "manager" in o["metadata"]["name"])
    volumes = manager["spec"]["template"]["spec"]["volumes"]
    assert any("secret" in v for v in volumes)
    env = manager["spec"]["template"]["spec"]["containers"][0]["env"]
    token_file = next(e for e in env if e["name"] == "GITHUB_TOKEN_FILE")
    assert token_file["value"].startswith("/secrets/")


def test_output_is_valid_yaml_and_passes_fake_validation():
    objs = [o for o in yaml.safe_load_all(_default_output()) if o]
    assert {o["kind"] for o in objs} >= {
        "Deployment",
        "ServiceAccount",
        "Secret",
        "PersistentVolumeClaim",
        "Role",
        "RoleBinding",
    }
    kube = FakeKube()
    try:
        assert kube.validate_objects(objs) == []
    finally:
        kube.close()


def test_output_deterministic():
    assert _default_output() == _default_output()


def test_custom_gpu_resource_key():
    profile = RunnerProfile(
        persistent_dir="/runner",
        work_dir="/work",
        gpu_resource_key="amd.com/gpu",
        gpu_count=2,
        labels=LabelSet(["self-hosted", "linux-rocm"]),
    )
    config = Config(
        repo=RepoCoordinates("o", "r"),
        policy=Policy(runner_labels=profile.labels),
        kube_deployment="rocm-runner",
    )
    text = emit_manifests(config, profile)
    assert "amd.com/gpu: 2" in text
    assert "linux-rocm" in text
