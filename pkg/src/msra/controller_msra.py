"""SLO-driven adaptation loop: classify the SLO picture as met, exceeded, or
poor; pick a strategy from the remaining error budget; plan threshold-based
scaling actions; execute them through rolling updates.

Rules, in order:

* any violated SLO forces the conservative strategy;
* a minimum error budget tighter than ``tight_budget_threshold`` also forces
  conservative, otherwise the customer's preferred strategy applies;
* verdict ``poor`` scales up (+1 replica when allowed, plus a vertical boost of
  the configured rates), ``exceeded`` scales down (-1 replica, or a vertical
  trim once at min replicas), ``met`` does nothing.

Windows with no samples evaluate as met-with-warning and never drive scaling.
"""

from __future__ import annotations

from dataclasses import dataclass

from .cluster import ClusterSim, ServiceView
from .errors import BoundViolation, ConfigurationError
from .slo import SloSpec, SloStatus, StrategyLevel, build_status, measure
from .telemetry import MetricStore

MET = "met"
EXCEEDED = "exceeded"
POOR = "poor"


@dataclass(frozen=True)
class MsRaConfig:
    slos: tuple[SloSpec, ...]
    preferred_strategy: StrategyLevel = StrategyLevel.NORMAL
    vertical_cpu_rate: float = 20.0  # percent added to (removed from) each replica's CPU
    vertical_mem_rate: float = 20.0
    evaluation_interval: float = 15.0
    cooldown: float = 30.0
    exceed_hysteresis: float = 2.0  # percentage points above target before "exceeded"
    tight_budget_threshold: float = 2.0  # budgets below this force conservative

    def __post_init__(self):
        if not self.slos:
            raise ConfigurationError("at least one SLO is required")
        if self.vertical_cpu_rate < 0 or self.vertical_mem_rate < 0:
            raise ConfigurationError("vertical rates must be non-negative")
        if self.evaluation_interval <= 0 or self.cooldown < 0:
            raise ConfigurationError("intervals must be positive")
        if self.exceed_hysteresis < 0:
            raise ConfigurationError("exceed_hysteresis must be non-negative")


@dataclass(frozen=True)
class Verdict:
    value: str
    per_slo: tuple[SloStatus, ...]


@dataclass(frozen=True)
class ScalingAction:
    service: str
    horizontal_delta: int = 0
    new_cpu_per_replica: float | None = None
    new_mem_per_replica: float | None = None
    reason: str = ""


@dataclass
class TickResult:
    time: float
    verdict: Verdict
    strategy: StrategyLevel
    statuses: tuple[SloStatus, ...]
    actions: tuple[ScalingAction, ...]
    min_error_budget: float | None


def analyze(statuses, cfg: MsRaConfig) -> Verdict:
    """Holistic verdict over all SLOs: poor beats exceeded beats met."""
    statuses = tuple(statuses)
    if not statuses:
        raise ConfigurationError("cannot analyze an empty status vector")
    present = [s for s in statuses if s.samples_present]
    if any(s.violated for s in present):
        return Verdict(POOR, statuses)
    if any(s.measured_compliance >= s.target + cfg.exceed_hysteresis for s in present):
        return Verdict(EXCEEDED, statuses)
    return Verdict(MET, statuses)


def select_strategy(statuses, cfg: MsRaConfig) -> StrategyLevel:
    """Forced conservative on violation or a tight minimum budget; else the preference."""
    present = [s for s in statuses if s.samples_present]
    if any(s.violated for s in present):
        return StrategyLevel.CONSERVATIVE
    budgets = [s.error_budget for s in present]
    if budgets and min(budgets) < cfg.tight_budget_threshold:
        return StrategyLevel.CONSERVATIVE
    return cfg.preferred_strategy


def _clamp(value: float, lo: float, hi: float) -> float:
    return max(lo, min(hi, value))


def plan(
    verdict: Verdict,
    strategy: StrategyLevel,
    views: dict[str, ServiceView],
    cfg: MsRaConfig,
    now: float = 0.0,
    last_action: dict[str, float] | None = None,
) -> list[ScalingAction]:
    """Turn a verdict into per-service scaling actions, honoring cooldowns and bounds."""
    if verdict.value == MET:
        return []
    last_action = last_action or {}
    if verdict.value == POOR:
        trigger = [s for s in verdict.per_slo if s.samples_present and s.violated]
    else:
        trigger = [
            s for s in verdict.per_slo
            if s.samples_present and s.measured_compliance >= s.target + cfg.exceed_hysteresis
        ]
    actions = []
    for service in sorted({s.service for s in trigger}):
        if now - last_action.get(service, float("-inf")) < cfg.cooldown:
            continue
        view = views[service]
        reqs = view.requirements
        if verdict.value == POOR:
            action = _plan_scale_up(service, view, reqs, cfg)
        else:
            action = _plan_scale_down(service, view, reqs, cfg)
        if action is not None:
            actions.append(action)
    return actions


def _plan_scale_up(service, view, reqs, cfg) -> ScalingAction | None:
    notes = []
    new_cpu = new_mem = None
    if reqs.vertical_enabled and cfg.vertical_cpu_rate > 0:
        boosted = view.cpu_per_replica * (1.0 + cfg.vertical_cpu_rate / 100.0)
        new_cpu = _clamp(boosted, reqs.min_cpu, reqs.max_cpu)
        if new_cpu != boosted:
            notes.append("cpu clamped to bounds")
        if new_cpu == view.cpu_per_replica:
            new_cpu = None
    if reqs.vertical_enabled and cfg.vertical_mem_rate > 0:
        boosted = view.mem_per_replica * (1.0 + cfg.vertical_mem_rate / 100.0)
        new_mem = _clamp(boosted, reqs.min_mem, reqs.max_mem)
        if new_mem != boosted:
            notes.append("mem clamped to bounds")
        if new_mem == view.mem_per_replica:
            new_mem = None
    delta = 0
    if reqs.horizontal_enabled:
        if view.active < reqs.max_replicas:
            delta = 1
        else:
            notes.append("at max replicas")
    if delta == 0 and new_cpu is None and new_mem is None:
        return None
    notes.insert(0, "verdict poor: scale up")
    return ScalingAction(service, delta, new_cpu, new_mem, "; ".join(notes))


def _plan_scale_down(service, view, reqs, cfg) -> ScalingAction | None:
    if reqs.horizontal_enabled and view.active > reqs.min_replicas:
        return ScalingAction(service, -1, None, None, "verdict exceeded: release one replica")
    if reqs.vertical_enabled:
        notes = []
        new_cpu = new_mem = None
        if cfg.vertical_cpu_rate > 0:
            trimmed = view.cpu_per_replica * (1.0 - cfg.vertical_cpu_rate / 100.0)
            new_cpu = _clamp(trimmed, reqs.min_cpu, reqs.max_cpu)
            if new_cpu != trimmed:
                notes.append("cpu clamped to bounds")
            if new_cpu == view.cpu_per_replica:
                new_cpu = None
        if cfg.vertical_mem_rate > 0:
            trimmed = view.mem_per_replica * (1.0 - cfg.vertical_mem_rate / 100.0)
            new_mem = _clamp(trimmed, reqs.min_mem, reqs.max_mem)
            if new_mem != trimmed:
                notes.append("mem clamped to bounds")
            if new_mem == view.mem_per_replica:
                new_mem = None
        if new_cpu is not None or new_mem is not None:
            notes.insert(0, "verdict exceeded: trim allocations at min replicas")
            return ScalingAction(service, 0, new_cpu, new_mem, "; ".join(notes))
    return None


def execute(actions, sim: ClusterSim) -> list[str]:
    """Apply planned actions through rolling updates; bound violations are logged, not fatal."""
    outcomes = []
    for action in actions:
        view = sim.service_view(action.service)
        reqs = view.requirements
        target = int(_clamp(view.active + action.horizontal_delta, reqs.min_replicas, reqs.max_replicas))
        try:
            sim.apply_rolling_update(
                action.service, target,
                cpu=action.new_cpu_per_replica,
                mem=action.new_mem_per_replica,
            )
            outcomes.append("applied")
        except BoundViolation as exc:
            outcomes.append(f"rejected: {exc}")
    return outcomes


class MsRaController:
    """One adaptation loop instance driving one simulated cluster."""

    def __init__(self, cfg: MsRaConfig):
        self.cfg = cfg
        self.last_action: dict[str, float] = {}
        self.ticks: list[TickResult] = []

    def tick(self, now: float, store: MetricStore, sim: ClusterSim) -> TickResult:
        measured = [(slo, measure(store, slo, now)) for slo in self.cfg.slos]
        # Strategy selection reads only violations and budgets, so provisional
        # statuses (targets recomputed below) are enough to pick it.
        provisional = [build_status(slo, value, StrategyLevel.BEST_EFFORT) for slo, value in measured]
        strategy = select_strategy(provisional, self.cfg)
        statuses = tuple(build_status(slo, value, strategy) for slo, value in measured)
        verdict = analyze(statuses, self.cfg)
        actions = tuple(plan(verdict, strategy, sim.views(), self.cfg, now, self.last_action))
        outcomes = execute(actions, sim)
        for action, outcome in zip(actions, outcomes):
            if outcome == "applied":
                self.last_action[action.service] = now
        budgets = [s.error_budget for s in statuses if s.samples_present]
        result = TickResult(
            time=now,
            verdict=verdict,
            strategy=strategy,
            statuses=statuses,
            actions=actions,
            min_error_budget=min(budgets) if budgets else None,
        )
        self.ticks.append(result)
        return result
