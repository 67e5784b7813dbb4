"""Task-resource-usage trace parsing and fixed-slot CPU aggregation.

Rows follow the ClusterData-2011 task usage layout: measurement start and end
in integer microseconds, followed by job/task/machine identifiers and the mean
CPU rate in core-seconds per second. Only the timing and CPU columns are read.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass
from typing import IO, Iterable, Sequence, Union

import numpy as np

from .errors import EmptyTraceError, RecordParseError

US_PER_S = 1_000_000

PROFILES = ("sinusoid-mix", "logistic-chaotic", "step-bursts")


@dataclass(frozen=True)
class TraceSchema:
    start_col: int = 0
    end_col: int = 1
    cpu_col: int = 5
    delimiter: str = ","
    has_header: bool = False
    timestamp_unit: str = "us"

    def __post_init__(self):
        cols = (self.start_col, self.end_col, self.cpu_col)
        if len(set(cols)) != 3:
            raise ValueError(f"column indices must be distinct, got {cols}")
        if min(cols) < 0:
            raise ValueError("column indices must be non-negative")
        if self.timestamp_unit != "us":
            raise ValueError("only microsecond timestamps are supported")

    @property
    def width(self) -> int:
        return max(self.start_col, self.end_col, self.cpu_col) + 1


DEFAULT_SCHEMA = TraceSchema()


@dataclass(frozen=True)
class UsageRecord:
    start_us: int
    end_us: int
    cpu_rate: float

    def __post_init__(self):
        if self.end_us <= self.start_us:
            raise ValueError(f"end_us {self.end_us} <= start_us {self.start_us}")
        if not self.cpu_rate >= 0:
            raise ValueError(f"cpu_rate must be >= 0, got {self.cpu_rate}")


@dataclass(frozen=True)
class SlotSeries:
    origin_us: int
    slot_seconds: int
    values: tuple

    def __post_init__(self):
        if self.slot_seconds <= 0:
            raise ValueError("slot_seconds must be positive")
        object.__setattr__(self, "values", tuple(float(v) for v in self.values))

    def __len__(self):
        return len(self.values)

    def to_array(self) -> np.ndarray:
        return np.asarray(self.values, dtype=np.float64)

    def to_csv(self) -> str:
        lines = ["slot_index,value"]
        lines += [f"{k},{v!r}" for k, v in enumerate(self.values)]
        return "\n".join(lines) + "\n"

    def to_dict(self) -> dict:
        return {
            "origin_us": self.origin_us,
            "slot_seconds": self.slot_seconds,
            "values": list(self.values),
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "SlotSeries":
        return cls(int(doc["origin_us"]), int(doc["slot_seconds"]), doc["values"])

    @classmethod
    def from_csv(cls, text: str, origin_us: int = 0, slot_seconds: int = 300) -> "SlotSeries":
        rows = list(csv.reader(io.StringIO(text)))
        if rows and rows[0] and rows[0][0].strip() == "slot_index":
            rows = rows[1:]
        values = [float(r[1]) for r in rows if r]
        return cls(origin_us, slot_seconds, values)


def load_series(path) -> SlotSeries:
    """Read a SlotSeries written as JSON (``.json``) or as a ``slot_index,value`` table."""
    with open(path) as fh:
        text = fh.read()
    if str(path).endswith(".json"):
        return SlotSeries.from_dict(json.loads(text))
    return SlotSeries.from_csv(text)


def save_series(series: SlotSeries, path) -> None:
    with open(path, "w") as fh:
        if str(path).endswith(".json"):
            json.dump(series.to_dict(), fh)
        else:
            fh.write(series.to_csv())


def _lines(source) -> Iterable[str]:
    if isinstance(source, (bytes, bytearray)):
        source = bytes(source).decode("utf-8")
    if isinstance(source, str):
        source = io.StringIO(source)
    for line in source:
        yield line.decode("utf-8") if isinstance(line, bytes) else line


def _parse_row(fields: Sequence[str], schema: TraceSchema) -> UsageRecord:
    if len(fields) < schema.width:
        raise ValueError(f"expected at least {schema.width} columns, got {len(fields)}")
    try:
        start = int(fields[schema.start_col])
        end = int(fields[schema.end_col])
    except ValueError:
        raise ValueError("non-integer timestamp") from None
    try:
        rate = float(fields[schema.cpu_col])
    except ValueError:
        raise ValueError(f"non-numeric cpu rate {fields[schema.cpu_col]!r}") from None
    if not math.isfinite(rate) or rate < 0:
        raise ValueError(f"invalid cpu rate {rate}")
    if end <= start:
        raise ValueError(f"end {end} <= start {start}")
    return UsageRecord(start, end, rate)


def parse_usage_records(
    source: Union[bytes, str, IO],
    schema: TraceSchema = DEFAULT_SCHEMA,
    strict: bool = True,
    skipped: list | None = None,
) -> list[UsageRecord]:
    """Parse delimiter-separated usage rows into records, in input order.

    In strict mode the first bad row raises RecordParseError. Otherwise bad
    rows are dropped; if ``skipped`` is given, one RecordParseError per
    dropped row is appended to it.
    """
    reader = csv.reader(_lines(source), delimiter=schema.delimiter)
    records = []
    for idx, fields in enumerate(reader):
        if idx == 0 and schema.has_header:
            continue
        if not fields:
            continue
        try:
            records.append(_parse_row(fields, schema))
        except ValueError as exc:
            err = RecordParseError(idx, str(exc))
            if strict:
                raise err from None
            if skipped is not None:
                skipped.append(err)
    return records


def format_usage_records(records: Iterable[UsageRecord], schema: TraceSchema = DEFAULT_SCHEMA) -> str:
    """Inverse of parse_usage_records; unmapped columns are left empty."""
    out = []
    for r in records:
        fields = [""] * schema.width
        fields[schema.start_col] = str(r.start_us)
        fields[schema.end_col] = str(r.end_us)
        fields[schema.cpu_col] = repr(float(r.cpu_rate))
        out.append(schema.delimiter.join(fields))
    return "".join(line + "\n" for line in out)


def aggregate_to_slots(records: Sequence[UsageRecord], slot_seconds: int = 300,
                       origin_us: int | None = None) -> SlotSeries:
    """Overlap-weighted aggregation of CPU rates into fixed slots.

    Slot k holds sum(rate * overlap(record, slot k)) / slot_length, so the
    series conserves core-seconds. Slots span [origin, max end); the origin
    defaults to the earliest start and may be set earlier to align the grid.
    """
    if not records:
        raise EmptyTraceError("no usage records to aggregate")
    if slot_seconds <= 0:
        raise ValueError("slot_seconds must be positive")

    start = np.fromiter((r.start_us for r in records), dtype=np.int64, count=len(records))
    end = np.fromiter((r.end_us for r in records), dtype=np.int64, count=len(records))
    rate = np.fromiter((r.cpu_rate for r in records), dtype=np.float64, count=len(records))
    # canonical order so the float sums do not depend on input order
    order = np.lexsort((rate, end, start))
    start, end, rate = start[order], end[order], rate[order]

    origin = int(start[0]) if origin_us is None else int(origin_us)
    if origin > start[0]:
        raise ValueError(f"origin_us {origin} is after the earliest record start {int(start[0])}")
    slot_us = slot_seconds * US_PER_S
    n = -(-(int(end.max()) - origin) // slot_us)

    s = start - origin
    e = end - origin
    first = s // slot_us
    last = (e - 1) // slot_us

    values = np.zeros(n, dtype=np.float64)
    same = first == last
    np.add.at(values, first[same], rate[same] * (e[same] - s[same]) / slot_us)

    multi = ~same
    f, l = first[multi], last[multi]
    sm, em, rm = s[multi], e[multi], rate[multi]
    np.add.at(values, f, rm * ((f + 1) * slot_us - sm) / slot_us)
    np.add.at(values, l, rm * (em - l * slot_us) / slot_us)
    # interior slots are fully covered: difference array over [f+1, l)
    diff = np.zeros(n + 1, dtype=np.float64)
    np.add.at(diff, f + 1, rm)
    np.add.at(diff, l, -rm)
    values += np.cumsum(diff[:n])
    np.maximum(values, 0.0, out=values)
    # slots no record touches are exactly zero, not cumsum residue
    cover = np.zeros(n + 1, dtype=np.int64)
    np.add.at(cover, first, 1)
    np.add.at(cover, last + 1, -1)
    values[np.cumsum(cover[:n]) == 0] = 0.0
    return SlotSeries(origin, slot_seconds, values.tolist())


def synth_trace(length: int, seed: int = 0, profile: str = "sinusoid-mix",
                slot_seconds: int = 300) -> SlotSeries:
    """Deterministic synthetic cluster CPU series for desk-scale experiments.

    Values are utilization-like fractions. ``sinusoid-mix`` overlays daily and
    sub-daily cycles with light noise; ``logistic-chaotic`` drives the level
    with a logistic map in its chaotic regime; ``step-bursts`` holds random
    levels with short spikes.
    """
    if length < 1:
        raise ValueError("length must be >= 1")
    rng = np.random.default_rng(seed)
    t = np.arange(length, dtype=np.float64)
    slots_per_day = 86400 / slot_seconds

    if profile == "sinusoid-mix":
        noise = 0.025
        ph = rng.uniform(0, 2 * np.pi, size=3)
        x = (0.5
             + 0.18 * np.sin(2 * np.pi * t / slots_per_day + ph[0])
             + 0.08 * np.sin(2 * np.pi * t / (slots_per_day / 4) + ph[1])
             + 0.04 * np.sin(2 * np.pi * t / 37.0 + ph[2])
             + noise * rng.standard_normal(length))
    elif profile == "logistic-chaotic":
        z = np.empty(length)
        z[0] = rng.uniform(0.1, 0.9)
        for k in range(1, length):
            z[k] = 3.9 * z[k - 1] * (1 - z[k - 1])
        trend = 0.1 * np.sin(2 * np.pi * t / slots_per_day + rng.uniform(0, 2 * np.pi))
        x = 0.45 + 0.25 * z + trend
    elif profile == "step-bursts":
        x = np.empty(length)
        level = rng.uniform(0.3, 0.7)
        for k in range(length):
            if rng.random() < 0.02:
                level = rng.uniform(0.2, 0.8)
            x[k] = level
        bursts = rng.random(length) < 0.03
        x = x + bursts * rng.uniform(0.1, 0.3, size=length) + 0.01 * rng.standard_normal(length)
    else:
        raise ValueError(f"unknown profile {profile!r}; expected one of {PROFILES}")

    return SlotSeries(0, slot_seconds, np.clip(x, 0.0, None).tolist())
