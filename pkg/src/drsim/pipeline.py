"""Automatic recovery flow: detection, resource comparison, target selection, restore."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .cluster import BackupRecord, Status, World
from .errors import ReplayExhaustedError, UnknownClusterError
from .forecast.lstm import ForecastModel, predict

DEFAULT_DETECTION_INTERVAL_S = 15.0
DEFAULT_OVERHEAD_S = 0.25


@dataclass(frozen=True)
class DisconnectEvent:
    cluster: str
    failed_at_s: float
    detected_at_s: float

    @property
    def delay_s(self) -> float:
        return self.detected_at_s - self.failed_at_s


@dataclass(frozen=True)
class CandidateSet:
    affected: str
    candidates: tuple


@dataclass(frozen=True)
class Alert:
    kind: str
    cluster: str
    at_s: float
    message: str = ""


@dataclass(frozen=True)
class RecoveryTimeline:
    cluster: str
    target: str
    backup_name: str
    failed_at_s: float
    detected_at_s: float
    command_issued_at_s: float
    restore_completed_at_s: float

    @property
    def recovery_time(self) -> float:
        """A: failure to restored service."""
        return self.restore_completed_at_s - self.failed_at_s

    @property
    def restoration_time(self) -> float:
        """B: restore command to restored service."""
        return self.restore_completed_at_s - self.command_issued_at_s

    @property
    def detection_delay(self) -> float:
        return self.detected_at_s - self.failed_at_s

    @property
    def overhead(self) -> float:
        return self.command_issued_at_s - self.detected_at_s


# ---------------------------------------------------------------- detection

def _poll_instant(failed_at_s: float, interval: float) -> float:
    # first poll at or after the failure; polls sit on a global grid from t=0
    return math.ceil(failed_at_s / interval) * interval


def next_detection_time(world: World, interval: float = DEFAULT_DETECTION_INTERVAL_S) -> float | None:
    times = [_poll_instant(c.failed_at_s, interval) for c in world.clusters.values()
             if c.failed_at_s is not None and c.name not in world.reported]
    return min(times) if times else None


def detect(world: World, interval: float = DEFAULT_DETECTION_INTERVAL_S) -> list:
    """Report clusters found Disconnected at polls up to the current time.

    Each failure is reported once; reported clusters are remembered on the world.
    """
    if interval <= 0:
        raise ValueError("detection interval must be positive")
    events = []
    for c in world.clusters.values():
        if c.failed_at_s is None or c.name in world.reported:
            continue
        t = _poll_instant(c.failed_at_s, interval)
        if t <= world.now_s:
            events.append(DisconnectEvent(c.name, c.failed_at_s, t))
            world.reported.add(c.name)
    events.sort(key=lambda e: (e.detected_at_s, world.clusters[e.cluster].spec.order_index))
    for e in events:
        world.events.append({"kind": "detected", "t": e.detected_at_s, "cluster": e.cluster,
                             "details": {"failed_at_s": e.failed_at_s}})
    return events


# ------------------------------------------------------ resource comparison

def compare_resources(world: World, affected: str, strict_more: bool = False):
    """Active clusters with at least the affected cluster's cores, or an Alert.

    With ``strict_more`` a candidate needs strictly more cores.
    """
    need = world.cluster(affected).spec.alloc_millicores
    out = []
    for c in world.clusters.values():  # already in order_index order
        if c.name == affected or c.status_at(world.now_s) is not Status.ACTIVE:
            continue
        have = c.spec.alloc_millicores
        if have > need or (have == need and not strict_more):
            out.append(c.name)
    if not out:
        alert = Alert("NoViableCluster", affected, world.now_s,
                      f"no active cluster has enough CPU to host the workloads of {affected}")
        world.log("alert", affected, reason=alert.kind)
        return alert
    return CandidateSet(affected, tuple(out))


# ------------------------------------------------------------ target choice

def _argmin_by_order(names: Sequence[str], scores: Sequence[float], world: World) -> str:
    best = min(range(len(names)),
               key=lambda k: (scores[k], world.cluster(names[k]).spec.order_index))
    return names[best]


class SelectionPolicy:
    kind = "base"

    def choose(self, candidates: Sequence[str], world: World):
        """Return (target, per-candidate scores or None)."""
        raise NotImplementedError


class ForecastPolicy(SelectionPolicy):
    """Pick the candidate with the lowest predicted next-slot utilization.

    ``predictor`` maps a raw history window (fractions) to a prediction; by
    default it is the LSTM ``model``'s one-step forecast.
    """
    kind = "forecast"

    def __init__(self, model: ForecastModel | None = None,
                 predictor: Callable[[Sequence[float]], float] | None = None,
                 lookback: int | None = None):
        if model is None and predictor is None:
            raise ValueError("ForecastPolicy needs a model or a predictor")
        self.model = model
        self.predictor = predictor if predictor is not None else (lambda w: predict(model, w))
        self.lookback = lookback or (model.lookback if model is not None else 3)

    def choose(self, candidates, world):
        preds = [float(self.predictor(world.history_window(n, self.lookback))) for n in candidates]
        return _argmin_by_order(candidates, preds, world), dict(zip(candidates, preds))


class CurrentLowestPolicy(SelectionPolicy):
    kind = "current"

    def choose(self, candidates, world):
        cur = [world.utilization(n) for n in candidates]
        return _argmin_by_order(candidates, cur, world), dict(zip(candidates, cur))


class RandomPolicy(SelectionPolicy):
    kind = "random"

    def __init__(self, seed: int = 0):
        self.seed = seed
        self._rng = np.random.default_rng(seed)

    def choose(self, candidates, world):
        return candidates[int(self._rng.integers(len(candidates)))], None


class ReplayPolicy(SelectionPolicy):
    """Follow a recorded target list; integers refer to cluster order_index."""
    kind = "replay"

    def __init__(self, targets: Sequence):
        self.targets = list(targets)
        self.position = 0

    def choose(self, candidates, world):
        if self.position >= len(self.targets):
            raise ReplayExhaustedError(f"replay list of {len(self.targets)} targets consumed")
        t = self.targets[self.position]
        self.position += 1
        name = world.by_order_index(t).name if isinstance(t, int) else str(t)
        if name not in candidates:
            raise UnknownClusterError(f"replayed target {name!r} is not a viable candidate")
        return name, None


def select_target(candidates, policy: SelectionPolicy, world: World) -> str:
    if isinstance(candidates, CandidateSet):
        names = list(candidates.candidates)
    else:
        names = list(candidates)
    if not names:
        raise ValueError("no candidates to choose from")
    if len(names) == 1 and not isinstance(policy, ReplayPolicy):
        # nothing to schedule
        world.log("selected", names[0], policy=policy.kind, scores=None)
        return names[0]
    target, scores = policy.choose(names, world)
    world.log("selected", target, policy=policy.kind, scores=scores)
    return target


# ------------------------------------------------------------------ restore

@dataclass(frozen=True)
class RestoreFragment:
    target: str
    backup_name: str
    command_issued_at_s: float
    restore_completed_at_s: float


def execute_restore(world: World, target: str, backup: BackupRecord) -> RestoreFragment:
    """Issue the restore now; the app starts on the target after its restore duration."""
    p = world.schedule_restore(target, backup)
    world.log("restore_issued", target, backup=backup.backup_name)
    return RestoreFragment(target, backup.backup_name, p.issued_at_s, p.complete_at_s)


# ------------------------------------------------------------- composition

@dataclass
class RecoveryOutcome:
    event: DisconnectEvent
    timeline: RecoveryTimeline | None = None
    alert: Alert | None = None
    scores: dict | None = field(default=None)

    @property
    def halted(self) -> bool:
        return self.alert is not None


def run_recovery(world: World, policy: SelectionPolicy,
                 detection_interval: float = DEFAULT_DETECTION_INTERVAL_S,
                 overhead_s: float = DEFAULT_OVERHEAD_S,
                 strict_more: bool = False) -> RecoveryOutcome:
    """Drive one failure through detection, comparison, selection and restore.

    The clock is moved to the detection poll, then by ``overhead_s`` to the
    restore command, then to restore completion. Raises BackupNotFoundError
    when the failed cluster has no backup.
    """
    if not 0 <= overhead_s < 1.0:
        raise ValueError("overhead_s must lie in [0, 1)")
    t_detect = next_detection_time(world, detection_interval)
    if t_detect is None:
        raise ValueError("no pending cluster failure to recover")
    world.advance_to(max(world.now_s, t_detect))
    events = detect(world, detection_interval)
    if len(events) != 1:
        raise ValueError(f"expected exactly one new disconnect event, got {len(events)}")
    event = events[0]

    found = compare_resources(world, event.cluster, strict_more)
    if isinstance(found, Alert):
        return RecoveryOutcome(event, alert=found)
    n_events = len(world.events)
    target = select_target(found, policy, world)
    scores = world.events[n_events]["details"].get("scores") if len(world.events) > n_events else None
    backup = world.latest_backup(event.cluster)

    world.advance(overhead_s)
    frag = execute_restore(world, target, backup)
    world.advance_to(frag.restore_completed_at_s)
    world.log("restore_completed", target, backup=backup.backup_name)

    timeline = RecoveryTimeline(event.cluster, target, backup.backup_name, event.failed_at_s,
                                event.detected_at_s, frag.command_issued_at_s,
                                frag.restore_completed_at_s)
    return RecoveryOutcome(event, timeline=timeline, scores=scores)
