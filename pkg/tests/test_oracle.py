"""The oracle against hand-computed expectations.

The oracle is the ground truth for scenario assertions, so its first
activations are derived by hand here and frozen:

Zero load, defaults (poll 60s, dwell 900s, force 84h = 302400s), fresh
install:

* tick 0: no history -> keepalive, write 1; dwell starts at 0.
* pod Running at 20s; every tick >= 60 refreshes last_active while up.
* tick 900: dwell complete (900 >= 900); last refresh was 840, and
  900 - 840 < force - dwell, so idle -> write 0. last_active ends at 900
  (the pod was still Running when observed at the scale-down tick).
* next due when now - 900 >= 302400 - 900, i.e. now >= 302400 (84h): the
  activation period equals force_interval exactly.
"""

from runner_manager.config import Policy
from runner_manager.harness.oracle import oracle_decisions
from runner_manager.harness.scenario import ScenarioEvent, ScenarioScript

DAY = 86400.0


def test_zero_load_first_two_activations_by_hand():
    script = ScenarioScript(horizon=4 * DAY, events=[], pod_startup_delay=20.0)
    result = oracle_decisions(script, Policy())
    assert result.writes[:4] == [
        (0.0, 1),
        (900.0, 0),
        (302400.0, 1),
        (303300.0, 0),
    ]


def test_single_job_sequence_is_idle_demand_idle():
    script = ScenarioScript(
        horizon=900,
        events=[ScenarioEvent(at=10, kind="enqueue_job", payload={"duration": 120})],
        pod_startup_delay=20.0,
        initial_last_active=0.0,
    )
    result = oracle_decisions(script, Policy())
    reasons = [reason for _, _, reason in result.decisions]
    assert reasons[0] == "idle"
    assert "demand" in reasons
    first_demand = reasons.index("demand")
    assert all(r == "demand" for r in reasons[first_demand : reasons.index("idle", first_demand)])
    # enqueue at 10s -> demand seen at the 60s tick; claim at 80s; done at 200s;
    # the 240s tick scales back down.
    assert result.writes == [(60.0, 1), (240.0, 0)]


def test_fault_span_produces_hold_decisions():
    script = ScenarioScript(
        horizon=600,
        events=[
            ScenarioEvent(at=70, kind="github_fault", payload={"status": 500}),
            ScenarioEvent(at=430, kind="github_recover"),
        ],
        initial_last_active=0.0,
    )
    result = oracle_decisions(script, Policy())
    by_tick = {tick: reason for tick, _, reason in result.decisions}
    assert by_tick[0.0] == "idle"
    assert by_tick[120.0] == "hold"
    assert by_tick[180.0] == "hold"
    assert by_tick[540.0] == "idle"


def test_hold_never_scales_down_a_running_runner():
    script = ScenarioScript(
        horizon=1200,
        events=[
            ScenarioEvent(at=5, kind="enqueue_job", payload={"duration": 3000, "ref": "j"}),
            ScenarioEvent(at=130, kind="github_fault", payload={"status": 503}),
            ScenarioEvent(at=1100, kind="github_recover"),
        ],
        pod_startup_delay=20.0,
        initial_last_active=0.0,
    )
    result = oracle_decisions(script, Policy())
    assert result.writes == [(60.0, 1)]
    reasons = {reason for _, _, reason in result.decisions}
    assert "hold" in reasons
    targets_during_fault = [t for tick, t, r in result.decisions if r == "hold"]
    assert all(t == 1 for t in targets_during_fault)
