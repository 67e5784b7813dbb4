"""Discrete-time model of managed clusters and an object-store backup repository.

Time is a float number of seconds. Utilization is piecewise constant between
events and is sampled into each cluster's history at every slot boundary.
"""

from __future__ import annotations

import enum
import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (AlreadyDisconnectedError, AppNotRunningError, BackupNotFoundError,
                     TargetDisconnectedError, UnknownClusterError)


class Status(str, enum.Enum):
    ACTIVE = "Active"
    DISCONNECTED = "Disconnected"


@dataclass(frozen=True)
class ClusterSpec:
    name: str
    order_index: int
    alloc_millicores: int
    initial_utilization: float = 0.0

    def __post_init__(self):
        if self.alloc_millicores <= 0:
            raise ValueError(f"{self.name}: alloc_millicores must be positive")
        if not 0.0 <= self.initial_utilization <= 1.0:
            raise ValueError(f"{self.name}: initial_utilization must lie in [0, 1]")


@dataclass(frozen=True)
class AppSpec:
    name: str
    cpu_millicores: int = 200
    restore_duration_s: float = 20.0

    def __post_init__(self):
        if self.cpu_millicores < 0:
            raise ValueError("cpu_millicores must be >= 0")
        if self.restore_duration_s < 0:
            raise ValueError("restore_duration_s must be >= 0")


@dataclass
class ClusterState:
    spec: ClusterSpec
    failed_at_s: float | None = None
    running_apps: list = field(default_factory=list)
    history: list = field(default_factory=list)

    @property
    def name(self) -> str:
        return self.spec.name

    def status_at(self, t: float) -> Status:
        if self.failed_at_s is not None and t >= self.failed_at_s:
            return Status.DISCONNECTED
        return Status.ACTIVE

    def utilization_at(self, t: float) -> float:
        alloc = self.spec.alloc_millicores
        # baseline and app loads are summed in millicores before dividing so that
        # equal loads give bit-identical fractions
        load = round(self.spec.initial_utilization * alloc, 6)
        if self.status_at(t) is Status.ACTIVE:
            load += sum(app.cpu_millicores for app in self.running_apps)
        return min(max(load / alloc, 0.0), 1.0)


@dataclass(frozen=True)
class BackupRecord:
    source_cluster: str
    app: AppSpec
    created_at_s: float
    backup_name: str


class BackupStore:
    """Append-only backup catalogue; survives the failure of any cluster."""

    def __init__(self):
        self.records: list[BackupRecord] = []
        self._seq = itertools.count(1)

    def create_backup(self, cluster: ClusterState, app: AppSpec, now: float) -> BackupRecord:
        if app not in cluster.running_apps:
            raise AppNotRunningError(f"{app.name} is not running on {cluster.name}")
        rec = BackupRecord(cluster.name, app, now, f"{cluster.name}-{app.name}-{next(self._seq):04d}")
        self.records.append(rec)
        return rec

    def latest_backup(self, cluster_name: str) -> BackupRecord:
        best = None
        for rec in self.records:
            # >= so that later insertions win ties
            if rec.source_cluster == cluster_name and (best is None or rec.created_at_s >= best.created_at_s):
                best = rec
        if best is None:
            raise BackupNotFoundError(f"no backup recorded for {cluster_name}")
        return best

    def to_list(self) -> list:
        return [
            {"backup_name": r.backup_name, "source_cluster": r.source_cluster,
             "app": r.app.name, "created_at_s": r.created_at_s}
            for r in self.records
        ]


@dataclass(frozen=True)
class PendingRestore:
    target: str
    app: AppSpec
    backup_name: str
    issued_at_s: float
    complete_at_s: float


class World:
    """All simulated clusters, the backup store and the clock, advanced by one driver."""

    def __init__(self, specs, slot_seconds: int = 300, noise_std: float = 0.0, noise_seed: int = 0):
        specs = list(specs)
        names = [s.name for s in specs]
        if len(set(names)) != len(names):
            raise ValueError("cluster names must be unique")
        if len({s.order_index for s in specs}) != len(specs):
            raise ValueError("cluster order_index values must be unique")
        if slot_seconds <= 0:
            raise ValueError("slot_seconds must be positive")
        self.clusters = {s.name: ClusterState(s) for s in sorted(specs, key=lambda s: s.order_index)}
        self.slot_seconds = slot_seconds
        self.now_s = 0.0
        self.store = BackupStore()
        self.pending: list[PendingRestore] = []
        self.reported: set[str] = set()
        self.events: list[dict] = []
        self.noise_std = noise_std
        self._rng = np.random.default_rng(noise_seed)
        for c in self.clusters.values():
            c.history.append(self._sample(c, 0.0))

    def cluster(self, name: str) -> ClusterState:
        try:
            return self.clusters[name]
        except KeyError:
            raise UnknownClusterError(name) from None

    def by_order_index(self, idx: int) -> ClusterState:
        for c in self.clusters.values():
            if c.spec.order_index == idx:
                return c
        raise UnknownClusterError(f"no cluster with order_index {idx}")

    def status(self, name: str) -> Status:
        return self.cluster(name).status_at(self.now_s)

    def log(self, kind: str, cluster: str | None, **details) -> None:
        self.events.append({"kind": kind, "t": self.now_s, "cluster": cluster, "details": details})

    def _sample(self, c: ClusterState, t: float) -> float:
        u = c.utilization_at(t)
        if self.noise_std > 0:
            u = min(max(u + self.noise_std * float(self._rng.standard_normal()), 0.0), 1.0)
        return u

    def _complete_due(self, t: float) -> None:
        due = [p for p in self.pending if p.complete_at_s <= t]
        if not due:
            return
        self.pending = [p for p in self.pending if p.complete_at_s > t]
        for p in sorted(due, key=lambda p: p.complete_at_s):
            self.clusters[p.target].running_apps.append(p.app)

    def advance_to(self, t: float) -> "World":
        if t < self.now_s:
            raise ValueError(f"cannot move clock backwards from {self.now_s} to {t}")
        s = self.slot_seconds
        next_boundary = (math.floor(self.now_s / s) + 1) * s
        while next_boundary <= t:
            self._complete_due(next_boundary)
            for c in self.clusters.values():
                c.history.append(self._sample(c, next_boundary))
            next_boundary += s
        self._complete_due(t)
        self.now_s = t
        return self

    def advance(self, dt_s: float) -> "World":
        if dt_s < 0:
            raise ValueError("dt_s must be >= 0")
        return self.advance_to(self.now_s + dt_s)

    def next_slot_boundary(self) -> float:
        s = self.slot_seconds
        return float(math.ceil(self.now_s / s) * s)

    def utilization(self, name: str) -> float:
        return self.cluster(name).utilization_at(self.now_s)

    def utilizations(self) -> dict:
        return {name: c.utilization_at(self.now_s) for name, c in self.clusters.items()}

    def inject_failure(self, name: str, at_s: float | None = None) -> "World":
        c = self.cluster(name)
        at_s = self.now_s if at_s is None else at_s
        if c.failed_at_s is not None:
            raise AlreadyDisconnectedError(f"{name} already failed at {c.failed_at_s}")
        c.failed_at_s = float(at_s)
        return self

    def rearm(self, name: str, apps=()) -> "World":
        """Bring a cluster back to Active with the given apps running."""
        c = self.cluster(name)
        c.failed_at_s = None
        c.running_apps = list(apps)
        self.reported.discard(name)
        return self

    def start_app(self, name: str, app: AppSpec) -> "World":
        self.cluster(name).running_apps.append(app)
        return self

    def stop_app(self, name: str, app: AppSpec) -> "World":
        self.cluster(name).running_apps.remove(app)
        return self

    def create_backup(self, name: str, app: AppSpec) -> BackupRecord:
        return self.store.create_backup(self.cluster(name), app, self.now_s)

    def latest_backup(self, name: str) -> BackupRecord:
        return self.store.latest_backup(name)

    def schedule_restore(self, target: str, backup: BackupRecord) -> PendingRestore:
        c = self.cluster(target)
        if c.status_at(self.now_s) is not Status.ACTIVE:
            raise TargetDisconnectedError(f"{target} is not Active")
        p = PendingRestore(target, backup.app, backup.backup_name, self.now_s,
                           self.now_s + backup.app.restore_duration_s)
        self.pending.append(p)
        if p.complete_at_s <= self.now_s:
            self._complete_due(self.now_s)
        return p

    def history_window(self, name: str, length: int) -> list:
        """Last ``length`` history samples, left-padded with the earliest sample."""
        hist = self.cluster(name).history
        if len(hist) >= length:
            return list(hist[-length:])
        return [hist[0]] * (length - len(hist)) + list(hist)

    def snapshot(self) -> dict:
        return {
            "now_s": self.now_s,
            "slot_seconds": self.slot_seconds,
            "clusters": [
                {
                    "name": c.name,
                    "order_index": c.spec.order_index,
                    "alloc_millicores": c.spec.alloc_millicores,
                    "status": c.status_at(self.now_s).value,
                    "utilization": c.utilization_at(self.now_s),
                    "running_apps": [a.name for a in c.running_apps],
                    "history": list(c.history),
                }
                for c in self.clusters.values()
            ],
            "pending_restores": [
                {"target": p.target, "backup_name": p.backup_name,
                 "issued_at_s": p.issued_at_s, "complete_at_s": p.complete_at_s}
                for p in self.pending
            ],
            "backups": self.store.to_list(),
        }
