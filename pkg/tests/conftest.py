from pathlib import Path

import pytest

from drsim.scenario import load_config

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


def brute_force_slots(records, slot_seconds):
    """Accumulate each record's rate second by second; timestamps must be whole seconds."""
    origin = min(r.start_us for r in records) // 1_000_000
    t_max = max(r.end_us for r in records) // 1_000_000
    n = -(-(t_max - origin) // slot_seconds)
    acc = [0.0] * n
    for r in records:
        for sec in range(r.start_us // 1_000_000, r.end_us // 1_000_000):
            acc[(sec - origin) // slot_seconds] += r.cpu_rate
    return [a / slot_seconds for a in acc]


@pytest.fixture
def table_config():
    return load_config(CONFIGS / "five_clusters.yaml")


@pytest.fixture(scope="session")
def desk_model():
    from drsim.forecast import train_desk_model
    return train_desk_model().result.model
