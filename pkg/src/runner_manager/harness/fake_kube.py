"""Fake Kubernetes API server for one namespace.

Implements exactly the surfaces the manager may touch: the Deployment
scale subresource, Deployment metadata patching, and the pod list. Every
request outside the configured namespace is answered 403 and flags the
scenario as failed -- the unprivileged-operation guarantee made testable.

Scaling behaves like a (simplified) Deployment controller: on 0->N the
fake creates Pending pods that turn Running after a configurable startup
delay; on scale-down it terminates pods, newest first, notifying the
attached runner world so an in-flight fake runner can be torn down.
"""

from __future__ import annotations

import re
import threading
from dataclasses import dataclass
from typing import Callable

from ..clock import Clock, SystemClock, to_rfc3339
from .httpserver import FakeHttpServer, Request, Response

_SCALE_RE = re.compile(r"^/apis/apps/v1/namespaces/([^/]+)/deployments/([^/]+)/scale$")
_DEPLOY_RE = re.compile(r"^/apis/apps/v1/namespaces/([^/]+)/deployments/([^/]+)$")
_PODS_RE = re.compile(r"^/api/v1/namespaces/([^/]+)/pods$")

MERGE_PATCH = "application/merge-patch+json"


@dataclass
class FakePod:
    name: str
    phase: str  # Pending | Running
    created_at: float
    started_at: float | None = None
    incarnation: int = 0


@dataclass
class ScaleWrite:
    at: float
    replicas: int
    content_type_ok: bool
    body_shape_ok: bool


@dataclass
class AnnotationWrite:
    at: float
    patch: dict
    touched_other_fields: bool


class FakeKube:
    def __init__(
        self,
        namespace: str = "ci",
        deployment: str = "gha-runner",
        clock: Clock | None = None,
        pod_startup_delay: float = 0.0,
        schedule: Callable[[float, Callable[[], None]], None] | None = None,
        initial_replicas: int = 0,
        initial_annotations: dict[str, str] | None = None,
    ):
        self.namespace = namespace
        self.deployment = deployment
        self.clock = clock or SystemClock()
        self.pod_startup_delay = pod_startup_delay
        self._schedule = schedule

        self._lock = threading.RLock()
        self.spec_replicas = initial_replicas
        self.annotations: dict[str, str] = dict(initial_annotations or {})
        self.resource_version = 1
        self.pods: list[FakePod] = []
        self._pod_seq = 0
        self._incarnation = 0
        self.fault_status: int | None = None

        self.cross_namespace_requests: list[str] = []
        self.scenario_failed = False
        self.scale_write_log: list[ScaleWrite] = []
        self.annotation_write_log: list[AnnotationWrite] = []
        self.request_paths: list[str] = []
        self.keep_request_paths = False

        self.on_pod_running: Callable[[str], None] | None = None
        self.on_pod_terminating: Callable[[str], None] | None = None
        self.on_scale_write: Callable[[float, int], None] | None = None

        self._server = FakeHttpServer(lambda request: _handle(self, request))

    # -- lifecycle -----------------------------------------------------------

    def start(self) -> "FakeKube":
        self._server.start()
        return self

    def close(self) -> None:
        self._server.close()

    @property
    def base_url(self) -> str:
        return self._server.base_url

    # -- state helpers ---------------------------------------------------------

    def running_count(self) -> int:
        with self._lock:
            return sum(1 for p in self.pods if p.phase == "Running")

    def set_fault(self, status: int = 500) -> None:
        with self._lock:
            self.fault_status = status

    def clear_fault(self) -> None:
        with self._lock:
            self.fault_status = None

    def set_status_lag(self, running: int) -> None:
        """Force the realized pod count for spec/status divergence tests."""
        with self._lock:
            self.pods = []
            for _ in range(running):
                self._pod_seq += 1
                now = self.clock.now()
                self.pods.append(
                    FakePod(
                        name=f"{self.deployment}-{self._pod_seq}",
                        phase="Running",
                        created_at=now,
                        started_at=now,
                    )
                )

    def apply_scale(self, replicas: int) -> None:
        """The Deployment-controller half: converge pods toward spec.replicas."""
        now = self.clock.now()
        to_terminate: list[FakePod] = []
        became_running: list[str] = []
        with self._lock:
            self.spec_replicas = replicas
            self.resource_version += 1
            while len(self.pods) < replicas:
                self._pod_seq += 1
                self._incarnation += 1
                pod = FakePod(
                    name=f"{self.deployment}-{self._pod_seq}",
                    phase="Pending",
                    created_at=now,
                    incarnation=self._incarnation,
                )
                self.pods.append(pod)
                if self._schedule is not None:
                    self._schedule(
                        now + self.pod_startup_delay,
                        lambda name=pod.name, inc=pod.incarnation: self.pod_set_running(name, inc),
                    )
                else:
                    pod.phase = "Running"
                    pod.started_at = now
                    became_running.append(pod.name)
            while len(self.pods) > replicas:
                to_terminate.append(self.pods.pop())  # newest first
        for name in became_running:
            if self.on_pod_running is not None:
                self.on_pod_running(name)
        for pod in to_terminate:
            if self.on_pod_terminating is not None:
                self.on_pod_terminating(pod.name)

    def pod_set_running(self, name: str, incarnation: int) -> None:
        with self._lock:
            pod = next((p for p in self.pods if p.name == name and p.incarnation == incarnation), None)
            if pod is None or pod.phase == "Running":
                return
            pod.phase = "Running"
            pod.started_at = self.clock.now()
        if self.on_pod_running is not None:
            self.on_pod_running(name)

    # -- manifest validation -----------------------------------------------

    def validate_objects(self, objects: list[dict]) -> list[str]:
        """Shape-check parsed manifests the way the API server would.

        Returns a list of complaints; empty means everything would apply.
        """
        problems: list[str] = []
        for obj in objects:
            if not isinstance(obj, dict):
                problems.append(f"not a mapping: {obj!r}")
                continue
            kind = obj.get("kind")
            meta = obj.get("metadata") or {}
            if not kind or not isinstance(meta, dict) or not meta.get("name"):
                problems.append(f"object missing kind or metadata.name: {kind!r}")
                continue
            if kind == "Deployment":
                spec = obj.get("spec") or {}
                if not isinstance(spec.get("replicas"), int) or spec["replicas"] < 0:
                    problems.append(f"{meta['name']}: spec.replicas must be a non-negative integer")
                selector = ((spec.get("selector") or {}).get("matchLabels")) or {}
                template_labels = (
                    ((spec.get("template") or {}).get("metadata") or {}).get("labels")
                ) or {}
                if not selector or any(template_labels.get(k) != v for k, v in selector.items()):
                    problems.append(f"{meta['name']}: selector does not match template labels")
                for container in ((spec.get("template") or {}).get("spec") or {}).get("containers", []):
                    for bucket in (container.get("resources") or {}).values():
                        for quantity in bucket.values():
                            if not _QUANTITY_RE.match(str(quantity)):
                                problems.append(
                                    f"{meta['name']}: bad resource quantity {quantity!r}"
                                )
        return problems


_QUANTITY_RE = re.compile(r"^\d+(\.\d+)?(m|Ki|Mi|Gi|Ti|k|M|G|T)?$")


def _handle(kube: FakeKube, request: Request) -> Response:
    path = request.path
    if kube.keep_request_paths:
        kube.request_paths.append(path)

    scale = _SCALE_RE.match(path)
    deploy = _DEPLOY_RE.match(path)
    pods = _PODS_RE.match(path)
    match = scale or deploy or pods
    if match is None or match.group(1) != kube.namespace:
        with kube._lock:
            kube.cross_namespace_requests.append(path)
            kube.scenario_failed = True
        return Response.json(403, {"message": f"forbidden outside namespace {kube.namespace}"})
    with kube._lock:
        fault = kube.fault_status
    if fault is not None:
        return Response.json(fault, {"message": f"injected fault {fault}"})
    if (scale or deploy) and match.group(2) != kube.deployment:
        return Response.json(404, {"message": "deployment not found"})

    if request.method == "GET":
        if scale:
            return Response.json(200, _scale_body(kube))
        if deploy:
            return Response.json(200, _deployment_body(kube))
        selector = _parse_selector(request.query.get("labelSelector", ""))
        pod_labels = {"app": kube.deployment}
        items = []
        if all(pod_labels.get(k) == v for k, v in selector.items()):
            with kube._lock:
                for pod in kube.pods:
                    status: dict = {"phase": pod.phase}
                    if pod.started_at is not None:
                        status["startTime"] = to_rfc3339(pod.started_at)
                    items.append(
                        {
                            "metadata": {
                                "name": pod.name,
                                "namespace": kube.namespace,
                                "labels": dict(pod_labels),
                            },
                            "status": status,
                        }
                    )
        return Response.json(200, {"kind": "PodList", "items": items})

    if request.method == "PATCH":
        content_type = (request.headers.get("content-type") or "").split(";")[0].strip()
        body = request.json()
        now = kube.clock.now()
        if scale:
            content_ok = content_type == MERGE_PATCH
            spec = body.get("spec")
            shape_ok = (
                set(body.keys()) == {"spec"}
                and isinstance(spec, dict)
                and set(spec.keys()) == {"replicas"}
                and isinstance(spec.get("replicas"), int)
            )
            with kube._lock:
                kube.scale_write_log.append(
                    ScaleWrite(now, spec["replicas"] if shape_ok else -1, content_ok, shape_ok)
                )
            if not (content_ok and shape_ok):
                return Response.json(422, {"message": "scale patch must be merge-patch {spec:{replicas:N}}"})
            replicas = spec["replicas"]
            if replicas < 0:
                return Response.json(422, {"message": "replicas must be >= 0"})
            kube.apply_scale(replicas)
            if kube.on_scale_write is not None:
                kube.on_scale_write(now, replicas)
            return Response.json(200, _scale_body(kube))
        if deploy:
            extra_top = set(body.keys()) - {"metadata"}
            extra_meta = set((body.get("metadata") or {}).keys()) - {"annotations"}
            touched_other = bool(extra_top or extra_meta)
            patch = ((body.get("metadata") or {}).get("annotations")) or {}
            with kube._lock:
                kube.annotation_write_log.append(AnnotationWrite(now, dict(patch), touched_other))
            if touched_other or content_type != MERGE_PATCH:
                return Response.json(422, {"message": "only metadata.annotations may be patched"})
            with kube._lock:
                for key, value in patch.items():
                    if value is None:
                        kube.annotations.pop(key, None)
                    else:
                        kube.annotations[key] = str(value)
                kube.resource_version += 1
            return Response.json(200, _deployment_body(kube))
        return Response.json(405, {"message": "pods are managed by the deployment controller"})

    return Response.json(405, {"message": f"method {request.method} not supported"})


def _scale_body(kube: FakeKube) -> dict:
    with kube._lock:
        return {
            "kind": "Scale",
            "apiVersion": "autoscaling/v1",
            "metadata": {
                "name": kube.deployment,
                "namespace": kube.namespace,
                "resourceVersion": str(kube.resource_version),
            },
            "spec": {"replicas": kube.spec_replicas},
            "status": {"replicas": kube.running_count(), "selector": f"app={kube.deployment}"},
        }


def _deployment_body(kube: FakeKube) -> dict:
    with kube._lock:
        return {
            "kind": "Deployment",
            "apiVersion": "apps/v1",
            "metadata": {
                "name": kube.deployment,
                "namespace": kube.namespace,
                "annotations": dict(kube.annotations),
                "resourceVersion": str(kube.resource_version),
            },
            "spec": {"replicas": kube.spec_replicas},
            "status": {"replicas": kube.running_count(), "readyReplicas": kube.running_count()},
        }


def _parse_selector(selector: str) -> dict[str, str]:
    result: dict[str, str] = {}
    for clause in selector.split(","):
        clause = clause.strip()
        if not clause:
            continue
        key, _, value = clause.partition("=")
        result[key.strip()] = value.strip().lstrip("=")
    return result
