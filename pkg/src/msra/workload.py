"""Closed-loop synthetic load: virtual users issue a request, await the
response, think, and repeat. User counts step between phases; new users fire
their first request exactly at the phase boundary, surplus users retire once
their in-flight request resolves."""

from __future__ import annotations

import random
from dataclasses import dataclass

from .cluster import ClusterSim, RequestRecord
from .errors import ConfigurationError

_IDLE = 0
_BUSY = 1  # request in flight or think timer pending


@dataclass(frozen=True)
class LoadProfile:
    phases: tuple[tuple[float, int], ...]  # (duration seconds, concurrent users)
    target_service: str = "frontend"
    think_time: float = 1.0
    think_jitter: float = 0.0  # fraction of think_time; 0 keeps runs seed-independent

    def __post_init__(self):
        if not self.phases:
            raise ConfigurationError("profile needs at least one phase")
        for duration, users in self.phases:
            if duration <= 0:
                raise ConfigurationError("phase durations must be positive")
            if users < 0:
                raise ConfigurationError("user counts must be non-negative")
        if self.think_time < 0:
            raise ConfigurationError("think_time must be non-negative")
        if not 0.0 <= self.think_jitter < 1.0:
            raise ConfigurationError("think_jitter must be in [0, 1)")

    @property
    def total_duration(self) -> float:
        return sum(duration for duration, _ in self.phases)

    @property
    def max_users(self) -> int:
        return max(users for _, users in self.phases)


def benchmark_profile(service: str = "frontend", think_time: float = 1.0) -> LoadProfile:
    """Six five-minute phases stepping through 10, 20, 30, 10, 30, 20 users."""
    steps = (10, 20, 30, 10, 30, 20)
    return LoadProfile(
        phases=tuple((300.0, users) for users in steps),
        target_service=service,
        think_time=think_time,
    )


class ClosedLoopDriver:
    """Feeds a ClusterSim with the arrival stream of a LoadProfile.

    Attach before advancing the sim; arrivals are generated inside the event
    loop, so the stream reacts to the simulator's own response times.
    """

    def __init__(self, sim: ClusterSim, profile: LoadProfile, seed: int = 0):
        if profile.target_service not in sim.services:
            raise ConfigurationError(f"profile targets unknown service {profile.target_service!r}")
        self.sim = sim
        self.profile = profile
        self.rng = random.Random(seed)
        self.active_users = 0
        self._user_state = [_IDLE] * profile.max_users
        self._req_user: dict[int, int] = {}
        sim.resolve_hooks.append(self._on_resolve)
        boundary = sim.now
        for duration, users in profile.phases:
            sim.schedule_timer(boundary, self._phase_setter(users))
            boundary += duration
        self._end = boundary
        sim.schedule_timer(boundary, self._phase_setter(0))

    def _phase_setter(self, users: int):
        def apply():
            self.active_users = users
            for idx in range(users):
                if self._user_state[idx] == _IDLE:
                    self._issue(idx)
        return apply

    def _issue(self, idx: int) -> None:
        self._user_state[idx] = _BUSY
        rid = self.sim.submit(self.sim.now, self.profile.target_service)
        self._req_user[rid] = idx

    def _on_resolve(self, record: RequestRecord) -> None:
        idx = self._req_user.pop(record.request_id, None)
        if idx is None:
            return  # not one of ours
        if idx >= self.active_users or self.sim.now >= self._end:
            self._user_state[idx] = _IDLE
            return
        think = self.profile.think_time
        if self.profile.think_jitter and think > 0:
            think *= 1.0 + self.profile.think_jitter * (2.0 * self.rng.random() - 1.0)
        self.sim.schedule_timer(self.sim.now + think, self._think_done(idx))

    def _think_done(self, idx: int):
        def fire():
            if idx < self.active_users and self.sim.now < self._end:
                self._issue(idx)
            else:
                self._user_state[idx] = _IDLE
        return fire
