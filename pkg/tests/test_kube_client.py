import re

import pytest

from runner_manager.errors import ConfigError, MissingDeploymentError, TransientError
from runner_manager.kube import KubeClient, KubeCredentials, load_incluster_credentials

NAMESPACED = re.compile(r"^/(apis/apps/v1|api/v1)/namespaces/ci/")


def _mount(tmp_path, token="T", namespace="ci", ca=None):
    (tmp_path / "token").write_text(token)
    if namespace is not None:
        (tmp_path / "namespace").write_text(namespace)
    if ca:
        (tmp_path / "ca.crt").write_text(ca)
    return str(tmp_path)


def test_incluster_credentials_echo_mounted_files(tmp_path):
    creds = load_incluster_credentials(
        _mount(tmp_path), {"KUBERNETES_SERVICE_HOST": "10.0.0.1", "KUBERNETES_SERVICE_PORT": "443"}
    )
    assert creds.bearer_token == "T"
    assert creds.namespace == "ci"
    assert creds.api_base == "https://10.0.0.1:443"


def test_missing_namespace_file_is_config_error(tmp_path):
    (tmp_path / "token").write_text("T")
    with pytest.raises(ConfigError, match="namespace"):
        load_incluster_credentials(str(tmp_path), {"KUBERNETES_SERVICE_HOST": "x"})


def test_api_override_keeps_mounted_token(tmp_path):
    creds = load_incluster_credentials(
        _mount(tmp_path), {}, api_base_override="http://127.0.0.1:9999"
    )
    assert creds.api_base == "http://127.0.0.1:9999"
    assert creds.bearer_token == "T"
    assert creds.ca_bundle is None  # plain http harness endpoint


def test_read_scale_sees_seeded_replicas(fake_kube, kube_client):
    fake_kube.spec_replicas = 1
    snapshot = kube_client.read_scale()
    assert snapshot.spec_replicas == 1


def test_missing_deployment_is_fatal_classification(fake_kube, clock):
    creds = KubeCredentials(
        api_base=fake_kube.base_url, bearer_token="t", ca_bundle=None, namespace="ci"
    )
    client = KubeClient(creds, "other-deployment", max_replicas=1, clock=clock)
    with pytest.raises(MissingDeploymentError):
        client.read_scale()


def test_status_lag_reported_distinctly(fake_kube, kube_client):
    fake_kube.spec_replicas = 1  # spec says one, controller has not realized it yet
    snapshot = kube_client.read_scale()
    assert (snapshot.spec_replicas, snapshot.status_replicas) == (1, 0)


def test_write_then_read_scale(fake_kube, kube_client):
    written = kube_client.write_scale(1)
    assert written.spec_replicas == 1
    assert kube_client.read_scale().spec_replicas == 1


def test_write_equal_to_current_is_permitted(fake_kube, kube_client):
    kube_client.write_scale(0)
    assert kube_client.read_scale().spec_replicas == 0


def test_write_above_max_rejected_before_any_http(fake_kube, kube_client):
    before = len(fake_kube.request_paths)
    with pytest.raises(ValueError):
        kube_client.write_scale(2)
    assert len(fake_kube.request_paths) == before


def test_annotation_roundtrip(fake_kube, kube_client):
    kube_client.write_annotation("runner-manager/last-active", "2024-01-01T00:00:00Z")
    annotations = kube_client.read_annotations()
    assert annotations["runner-manager/last-active"] == "2024-01-01T00:00:00Z"


def test_annotations_absent_on_fresh_deployment(kube_client):
    assert "runner-manager/last-active" not in kube_client.read_annotations()


def test_annotation_last_write_wins_and_null_deletes(fake_kube, kube_client):
    kube_client.write_annotation("k", "v1")
    kube_client.write_annotation("k", "v2")
    assert kube_client.read_annotations()["k"] == "v2"
    kube_client.write_annotation("k", None)
    assert "k" not in kube_client.read_annotations()


def test_pod_listing_matches_selector(fake_kube, kube_client):
    fake_kube.set_status_lag(1)
    pods = kube_client.list_runner_pods("app=gha-runner")
    assert len(pods) == 1
    assert pods[0].phase == "Running"
    assert kube_client.list_runner_pods("app=something-else") == []


def test_pod_listing_empty_at_zero_replicas(kube_client):
    assert kube_client.list_runner_pods("app=gha-runner") == []


def test_every_request_is_namespaced(fake_kube, kube_client):
    kube_client.read_scale()
    kube_client.write_scale(1)
    kube_client.read_annotations()
    kube_client.write_annotation("a", "b")
    kube_client.list_runner_pods("app=gha-runner")
    assert fake_kube.request_paths, "fake kube recorded no requests"
    for path in fake_kube.request_paths:
        assert NAMESPACED.match(path), path
    assert fake_kube.cross_namespace_requests == []


def test_scale_and_annotations_are_isolated(fake_kube, kube_client):
    kube_client.write_annotation("k", "v")
    replicas_before = fake_kube.spec_replicas
    annotations_before = dict(fake_kube.annotations)
    kube_client.write_scale(1)
    assert fake_kube.annotations == annotations_before
    kube_client.write_annotation("k2", "v2")
    assert fake_kube.spec_replicas == 1
    assert replicas_before == 0


def test_kube_fault_is_transient(fake_kube, kube_client):
    fake_kube.set_fault(500)
    with pytest.raises(TransientError):
        kube_client.read_scale()
