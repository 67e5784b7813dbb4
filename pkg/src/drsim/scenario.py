"""Scenario configuration, the multi-round experiment driver, and report rendering."""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field, replace
from pathlib import Path
from statistics import fmean

import numpy as np
import yaml

from .cluster import AppSpec, ClusterSpec, World
from .errors import ConfigInvalidError, ConfigParseError
from .pipeline import (DEFAULT_DETECTION_INTERVAL_S, DEFAULT_OVERHEAD_S, CurrentLowestPolicy,
                       ForecastPolicy, RandomPolicy, RecoveryTimeline, ReplayPolicy,
                       run_recovery)

POLICY_KINDS = ("forecast", "current", "random", "replay")


@dataclass
class ScenarioConfig:
    clusters: list
    app: AppSpec
    source_cluster: str
    rounds: int = 10
    policy: str = "current"
    replay_targets: list = field(default_factory=list)
    detection_interval_s: float = DEFAULT_DETECTION_INTERVAL_S
    overhead_s: float = DEFAULT_OVERHEAD_S
    slot_seconds: int = 300
    seed: int = 0
    degradation_threshold: float = 0.80
    model_path: str | None = None
    strict_more: bool = False

    def validate(self) -> "ScenarioConfig":
        names = [c.name for c in self.clusters]
        if len(set(names)) != len(names):
            raise ConfigInvalidError("cluster names must be unique")
        if len({c.order_index for c in self.clusters}) != len(self.clusters):
            raise ConfigInvalidError("cluster order_index values must be unique")
        if self.source_cluster not in names:
            raise ConfigInvalidError(f"source_cluster {self.source_cluster!r} is not a configured cluster")
        if self.rounds < 0:
            raise ConfigInvalidError("rounds must be >= 0")
        if self.policy not in POLICY_KINDS:
            raise ConfigInvalidError(f"unknown policy {self.policy!r}")
        if self.policy == "replay" and len(self.replay_targets) < self.rounds:
            raise ConfigInvalidError("replay_targets must cover every round")
        if self.detection_interval_s <= 0 or self.slot_seconds <= 0:
            raise ConfigInvalidError("detection_interval_s and slot_seconds must be positive")
        if not 0 <= self.overhead_s < 1:
            raise ConfigInvalidError("overhead_s must lie in [0, 1)")
        if not 0 < self.degradation_threshold <= 1:
            raise ConfigInvalidError("degradation_threshold must lie in (0, 1]")
        return self

    @property
    def observed(self) -> list:
        """Clusters shown in reports: every cluster except the failing source."""
        return [c.name for c in sorted(self.clusters, key=lambda c: c.order_index)
                if c.name != self.source_cluster]


# ------------------------------------------------------------- config files

def _need(doc: dict, key: str, path):
    if key not in doc:
        raise ConfigParseError(path, key, "missing required key")
    return doc[key]


def _as(kind, value, path, key):
    try:
        if kind is int and isinstance(value, float) and not value.is_integer():
            raise ValueError(f"{value} is not an integer")
        if isinstance(value, bool) and kind is not bool:
            raise ValueError("booleans are not numbers")
        return kind(value)
    except (TypeError, ValueError) as exc:
        raise ConfigParseError(path, key, str(exc)) from None


def config_from_dict(doc: dict, path="<dict>") -> ScenarioConfig:
    if not isinstance(doc, dict):
        raise ConfigParseError(path, "<root>", "expected a mapping")
    known = {"clusters", "app", "source_cluster", "rounds", "policy", "replay_targets",
             "detection_interval_s", "overhead_s", "slot_seconds", "seed",
             "degradation_threshold", "model_path", "strict_more"}
    for key in doc:
        if key not in known:
            raise ConfigParseError(path, key, "unknown key")

    clusters = []
    raw_clusters = _need(doc, "clusters", path)
    if not isinstance(raw_clusters, list) or not raw_clusters:
        raise ConfigParseError(path, "clusters", "expected a non-empty list")
    for k, c in enumerate(raw_clusters):
        key = f"clusters[{k}]"
        if not isinstance(c, dict):
            raise ConfigParseError(path, key, "expected a mapping")
        pct = _as(float, c.get("initial_utilization", 0), path, f"{key}.initial_utilization")
        if not 0 <= pct <= 100:
            raise ConfigParseError(path, f"{key}.initial_utilization", "percent must lie in [0, 100]")
        try:
            clusters.append(ClusterSpec(
                name=str(_need(c, "name", path)),
                order_index=_as(int, c.get("order_index", k + 1), path, f"{key}.order_index"),
                alloc_millicores=_as(int, _need(c, "alloc_millicores", path), path, f"{key}.alloc_millicores"),
                initial_utilization=pct / 100.0,
            ))
        except ValueError as exc:
            raise ConfigParseError(path, key, str(exc)) from None

    a = _need(doc, "app", path)
    if not isinstance(a, dict):
        raise ConfigParseError(path, "app", "expected a mapping")
    try:
        app = AppSpec(
            name=str(a.get("name", "app")),
            cpu_millicores=_as(int, a.get("cpu_millicores", 200), path, "app.cpu_millicores"),
            restore_duration_s=_as(float, a.get("restore_duration_s", 20.0), path, "app.restore_duration_s"),
        )
    except ValueError as exc:
        raise ConfigParseError(path, "app", str(exc)) from None

    policy = doc.get("policy", "current")
    if policy not in POLICY_KINDS:
        raise ConfigParseError(path, "policy", f"expected one of {POLICY_KINDS}, got {policy!r}")
    targets = doc.get("replay_targets", []) or []
    if not isinstance(targets, list):
        raise ConfigParseError(path, "replay_targets", "expected a list")

    cfg = ScenarioConfig(
        clusters=clusters,
        app=app,
        source_cluster=str(_need(doc, "source_cluster", path)),
        rounds=_as(int, doc.get("rounds", 10), path, "rounds"),
        policy=policy,
        replay_targets=list(targets),
        detection_interval_s=_as(float, doc.get("detection_interval_s", DEFAULT_DETECTION_INTERVAL_S),
                                 path, "detection_interval_s"),
        overhead_s=_as(float, doc.get("overhead_s", DEFAULT_OVERHEAD_S), path, "overhead_s"),
        slot_seconds=_as(int, doc.get("slot_seconds", 300), path, "slot_seconds"),
        seed=_as(int, doc.get("seed", 0), path, "seed"),
        degradation_threshold=_as(float, doc.get("degradation_threshold", 0.80), path,
                                  "degradation_threshold"),
        model_path=doc.get("model_path"),
        strict_more=bool(doc.get("strict_more", False)),
    )
    return cfg.validate()


def config_to_dict(cfg: ScenarioConfig) -> dict:
    return {
        "clusters": [
            {"name": c.name, "order_index": c.order_index, "alloc_millicores": c.alloc_millicores,
             "initial_utilization": round(c.initial_utilization * 100.0, 9)}
            for c in cfg.clusters
        ],
        "app": {"name": cfg.app.name, "cpu_millicores": cfg.app.cpu_millicores,
                "restore_duration_s": cfg.app.restore_duration_s},
        "source_cluster": cfg.source_cluster,
        "rounds": cfg.rounds,
        "policy": cfg.policy,
        "replay_targets": list(cfg.replay_targets),
        "detection_interval_s": cfg.detection_interval_s,
        "overhead_s": cfg.overhead_s,
        "slot_seconds": cfg.slot_seconds,
        "seed": cfg.seed,
        "degradation_threshold": cfg.degradation_threshold,
        "model_path": cfg.model_path,
        "strict_more": cfg.strict_more,
    }


def load_config(path) -> ScenarioConfig:
    """Read a YAML or JSON scenario file; utilizations are given in percent."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigParseError(path, "<file>", str(exc)) from None
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigParseError(path, "<document>", str(exc)) from None
    return config_from_dict(doc, path)


def dump_config(cfg: ScenarioConfig) -> str:
    return yaml.safe_dump(config_to_dict(cfg), sort_keys=False)


# ------------------------------------------------------------------ reports

@dataclass
class RoundRow:
    round: int
    target: str | None
    status: str  # "OK" or "HALTED"
    utilizations: tuple


@dataclass
class ScenarioReport:
    clusters: list
    initial: tuple
    rows: list = field(default_factory=list)
    timelines: list = field(default_factory=list)
    degradation_threshold: float = 0.80
    source_cluster: str = ""
    policy: str = ""

    @property
    def final(self) -> tuple:
        return self.rows[-1].utilizations if self.rows else self.initial

    @property
    def targets(self) -> list:
        return [r.target for r in self.rows]

    @property
    def flags(self) -> list:
        return [n for n, u in zip(self.clusters, self.final) if u >= self.degradation_threshold]

    @property
    def halted_rounds(self) -> list:
        return [r.round for r in self.rows if r.status == "HALTED"]

    def summary(self) -> dict:
        tl = [t for t in self.timelines if t is not None]
        if not tl:
            return {"mean_A": None, "mean_B": None, "mean_A_minus_B": None}
        return {
            "mean_A": fmean(t.recovery_time for t in tl),
            "mean_B": fmean(t.restoration_time for t in tl),
            "mean_A_minus_B": fmean(t.recovery_time - t.restoration_time for t in tl),
        }

    def spread(self) -> float:
        return max(self.final) - min(self.final)


def make_policy(cfg: ScenarioConfig, model=None, predictor=None, seed: int | None = None):
    kind = cfg.policy
    if kind == "current":
        return CurrentLowestPolicy()
    if kind == "random":
        return RandomPolicy(cfg.seed if seed is None else seed)
    if kind == "replay":
        return ReplayPolicy(cfg.replay_targets)
    if kind == "forecast":
        if model is None and predictor is None:
            from .forecast import checkpoint
            if not cfg.model_path:
                raise ConfigInvalidError("forecast policy requires model_path")
            model = checkpoint.load(cfg.model_path)
        return ForecastPolicy(model=model, predictor=predictor)
    raise ConfigInvalidError(f"unknown policy {kind!r}")


def run_scenario(cfg: ScenarioConfig, policy=None, model=None, predictor=None) -> ScenarioReport:
    """Repeat fail-and-recover rounds for the source cluster and record utilizations.

    Each round starts on a slot boundary: the source cluster is brought back
    with its app, backed up, and failed at a seeded offset inside one
    detection interval. Utilizations are recorded at restore completion.
    """
    cfg.validate()
    if policy is None:
        policy = make_policy(cfg, model, predictor)
    world = World(cfg.clusters, cfg.slot_seconds)
    rng = np.random.default_rng(cfg.seed)
    observed = cfg.observed
    report = ScenarioReport(observed, tuple(world.utilization(n) for n in observed),
                            degradation_threshold=cfg.degradation_threshold,
                            source_cluster=cfg.source_cluster, policy=cfg.policy)

    for rnd in range(1, cfg.rounds + 1):
        start = world.next_slot_boundary()
        if rnd > 1 and start == world.now_s:
            start += cfg.slot_seconds
        world.advance_to(start)
        world.rearm(cfg.source_cluster, [cfg.app])
        world.create_backup(cfg.source_cluster, cfg.app)
        offset = float(rng.uniform(0.0, cfg.detection_interval_s))
        world.inject_failure(cfg.source_cluster, world.now_s + offset)
        outcome = run_recovery(world, policy, cfg.detection_interval_s, cfg.overhead_s,
                               cfg.strict_more)
        utils = tuple(world.utilization(n) for n in observed)
        if outcome.halted:
            report.rows.append(RoundRow(rnd, None, "HALTED", utils))
            report.timelines.append(None)
        else:
            report.rows.append(RoundRow(rnd, outcome.timeline.target, "OK", utils))
            report.timelines.append(outcome.timeline)
    return report


def compare_policies(cfg: ScenarioConfig, policies, trials: int = 100, model=None,
                     predictor=None) -> dict:
    """Run each policy over ``trials`` seeds and summarize final-state balance.

    Trial k uses seed cfg.seed + k for both failure offsets and, for the
    random policy, target picks. Results are ordered by (policy, seed).
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    out = {}
    for kind in policies:
        per_trial = []
        for k in range(trials):
            seed = cfg.seed + k
            tcfg = replace(cfg, policy=kind, seed=seed)
            rep = run_scenario(tcfg, model=model, predictor=predictor)
            per_trial.append({
                "seed": seed,
                "final_max": max(rep.final),
                "spread": rep.spread(),
                "flagged": len(rep.flags),
                "targets": rep.targets,
            })
        out[kind] = {
            "trials": per_trial,
            "mean_final_max": fmean(t["final_max"] for t in per_trial),
            "mean_spread": fmean(t["spread"] for t in per_trial),
            "max_spread": max(t["spread"] for t in per_trial),
            "mean_flagged": fmean(t["flagged"] for t in per_trial),
            "fraction_flagged": sum(t["flagged"] > 0 for t in per_trial) / trials,
        }
    return out


# ---------------------------------------------------------------- rendering

def _pct(u: float) -> str:
    return f"{round(u * 100):d}%"


def report_to_dict(rep: ScenarioReport) -> dict:
    return {
        "policy": rep.policy,
        "source_cluster": rep.source_cluster,
        "degradation_threshold": rep.degradation_threshold,
        "clusters": list(rep.clusters),
        "initial": list(rep.initial),
        "rows": [
            {"round": r.round, "target": r.target, "status": r.status,
             "utilizations": list(r.utilizations)}
            for r in rep.rows
        ],
        "timelines": [
            None if t is None else {
                "cluster": t.cluster, "target": t.target, "backup_name": t.backup_name,
                "failed_at_s": t.failed_at_s, "detected_at_s": t.detected_at_s,
                "command_issued_at_s": t.command_issued_at_s,
                "restore_completed_at_s": t.restore_completed_at_s,
            }
            for t in rep.timelines
        ],
        "flags": rep.flags,
        "summary": rep.summary(),
    }


def report_from_dict(doc: dict) -> ScenarioReport:
    return ScenarioReport(
        clusters=list(doc["clusters"]),
        initial=tuple(doc["initial"]),
        rows=[RoundRow(r["round"], r["target"], r["status"], tuple(r["utilizations"]))
              for r in doc["rows"]],
        timelines=[None if t is None else RecoveryTimeline(**t) for t in doc["timelines"]],
        degradation_threshold=doc["degradation_threshold"],
        source_cluster=doc["source_cluster"],
        policy=doc["policy"],
    )


_TIMELINE_COLS = ("cluster", "backup_name", "failed_at_s", "detected_at_s",
                  "command_issued_at_s", "restore_completed_at_s")


def report_to_csv(rep: ScenarioReport) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["round", "target", "status", *rep.clusters, *_TIMELINE_COLS,
                "degradation_threshold", "source_cluster", "policy"])
    meta = [repr(rep.degradation_threshold), rep.source_cluster, rep.policy]
    w.writerow([0, "", "INITIAL", *map(repr, rep.initial), *[""] * len(_TIMELINE_COLS), *meta])
    for row, tl in zip(rep.rows, rep.timelines):
        if tl is None:
            times = [""] * len(_TIMELINE_COLS)
        else:
            times = [tl.cluster, tl.backup_name, repr(tl.failed_at_s), repr(tl.detected_at_s),
                     repr(tl.command_issued_at_s), repr(tl.restore_completed_at_s)]
        w.writerow([row.round, row.target or "", row.status, *map(repr, row.utilizations), *times, *meta])
    return buf.getvalue()


def report_from_csv(text: str) -> ScenarioReport:
    rows = list(csv.reader(io.StringIO(text)))
    header, body = rows[0], rows[1:]
    n_clusters = len(header) - 3 - len(_TIMELINE_COLS) - 3
    clusters = header[3:3 + n_clusters]
    first = body[0]
    rep = ScenarioReport(clusters, tuple(float(v) for v in first[3:3 + n_clusters]),
                         degradation_threshold=float(first[-3]), source_cluster=first[-2],
                         policy=first[-1])
    for r in body[1:]:
        utils = tuple(float(v) for v in r[3:3 + n_clusters])
        rep.rows.append(RoundRow(int(r[0]), r[1] or None, r[2], utils))
        t = r[3 + n_clusters:3 + n_clusters + len(_TIMELINE_COLS)]
        if t[0] == "":
            rep.timelines.append(None)
        else:
            rep.timelines.append(RecoveryTimeline(t[0], r[1], t[1], *map(float, t[2:])))
    return rep


def report_to_text(rep: ScenarioReport) -> str:
    thr = round(rep.degradation_threshold * 100)
    first_col = ["Restoration Count", "Initial State"]
    first_col += [str(r.round) if r.status == "OK" else f"{r.round} (HALTED)" for r in rep.rows]
    first_col.append(f"Clusters with CPU utilization under {thr}%")
    cells = [list(rep.clusters), [_pct(u) for u in rep.initial]]
    cells += [[_pct(u) for u in r.utilizations] for r in rep.rows]
    cells.append(["O" if u < rep.degradation_threshold else "X" for u in rep.final])

    w0 = max(len(s) for s in first_col)
    widths = [max(len(row[j]) for row in cells) for j in range(len(rep.clusters))]
    lines = []
    for label, row in zip(first_col, cells):
        lines.append("  ".join([label.ljust(w0)] + [c.rjust(w) for c, w in zip(row, widths)]).rstrip())

    lines.append("")
    lines.append(f"{'Round':>5}  {'Target':<12}  {'A (s)':>8}  {'B (s)':>8}  {'A-B (s)':>8}")
    for row, tl in zip(rep.rows, rep.timelines):
        if tl is None:
            lines.append(f"{row.round:>5}  {'HALTED':<12}  {'-':>8}  {'-':>8}  {'-':>8}")
        else:
            a, b = tl.recovery_time, tl.restoration_time
            lines.append(f"{row.round:>5}  {tl.target:<12}  {a:8.2f}  {b:8.2f}  {a - b:8.2f}")
    s = rep.summary()
    if s["mean_A"] is not None:
        lines.append(f"{'AVG':>5}  {'':<12}  {s['mean_A']:8.2f}  {s['mean_B']:8.2f}  {s['mean_A_minus_B']:8.2f}")
    flagged = ", ".join(rep.flags) if rep.flags else "none"
    lines.append(f"Clusters at or above {thr}%: {flagged}")
    return "\n".join(lines) + "\n"


def emit_report(rep: ScenarioReport, fmt: str = "text") -> bytes:
    if fmt == "text":
        return report_to_text(rep).encode()
    if fmt == "json":
        return (json.dumps(report_to_dict(rep), indent=2, sort_keys=True) + "\n").encode()
    if fmt == "csv":
        return report_to_csv(rep).encode()
    raise ValueError(f"unknown report format {fmt!r}")


def parse_report(blob: bytes, fmt: str) -> ScenarioReport:
    if fmt == "json":
        return report_from_dict(json.loads(blob))
    if fmt == "csv":
        return report_from_csv(blob.decode())
    raise ValueError(f"format {fmt!r} cannot be parsed back")
