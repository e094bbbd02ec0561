"""Virtual time with a driver/actor handshake.

The scenario driver owns time. Registered actor threads (the manager) run
until they block in ``wait_until``; the driver advances the clock only when
every actor is blocked, fires due environment work, then releases the
actors whose deadlines arrived. No thread ever sleeps on the wall clock, so
traces are deterministic and 30 simulated days cost seconds.
"""

from __future__ import annotations

import threading

from ..clock import Clock, from_rfc3339

# Scenario time zero: an arbitrary fixed instant so RFC 3339 rendering is stable.
SIM_EPOCH = from_rfc3339("2024-01-01T00:00:00Z")


class _Waiter:
    __slots__ = ("deadline", "event", "interrupt")

    def __init__(self, deadline: float, interrupt: threading.Event | None):
        self.deadline = deadline
        self.event = threading.Event()
        self.interrupt = interrupt


class VirtualClock(Clock):
    def __init__(self, start: float = SIM_EPOCH):
        self._now = start
        self._cond = threading.Condition()
        self._busy = 0
        self._waiters: list[_Waiter] = []

    # -- Clock interface (actor side) --------------------------------------

    def now(self) -> float:
        with self._cond:
            return self._now

    def wait_until(self, deadline: float, interrupt: threading.Event | None = None) -> None:
        with self._cond:
            if interrupt is not None and interrupt.is_set():
                return
            if deadline <= self._now:
                return
            waiter = _Waiter(deadline, interrupt)
            self._waiters.append(waiter)
            self._busy -= 1
            self._cond.notify_all()
        waiter.event.wait()

    # -- actor lifecycle ----------------------------------------------------

    def register_actor(self) -> None:
        """Count a thread as busy before it starts running."""
        with self._cond:
            self._busy += 1

    def actor_done(self) -> None:
        with self._cond:
            self._busy -= 1
            self._cond.notify_all()

    # -- driver side ---------------------------------------------------------

    def wait_quiescent(self, timeout: float = 60.0) -> None:
        """Block (on the wall clock) until every actor is parked in wait_until."""
        with self._cond:
            if not self._cond.wait_for(lambda: self._busy == 0, timeout=timeout):
                raise RuntimeError(f"actors failed to quiesce within {timeout}s (busy={self._busy})")

    def next_deadline(self) -> float | None:
        with self._cond:
            if not self._waiters:
                return None
            return min(w.deadline for w in self._waiters)

    def advance_to(self, t: float) -> None:
        """Move time forward without waking anyone; release_due() wakes."""
        with self._cond:
            if t < self._now:
                raise ValueError(f"time cannot move backward: {t} < {self._now}")
            self._now = t

    def release_due(self) -> None:
        with self._cond:
            due = [w for w in self._waiters if w.deadline <= self._now]
            for waiter in due:
                self._waiters.remove(waiter)
                self._busy += 1  # on the waiter's behalf, before it runs
                waiter.event.set()

    def kick(self) -> None:
        """Wake waiters whose interrupt event has been set (shutdown path)."""
        with self._cond:
            interrupted = [w for w in self._waiters if w.interrupt is not None and w.interrupt.is_set()]
            for waiter in interrupted:
                self._waiters.remove(waiter)
                self._busy += 1
                waiter.event.set()
