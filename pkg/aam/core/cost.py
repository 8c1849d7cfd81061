"""
Synthetic cost model.

Every transactional attempt, abort, serialization, atomic, activity and
network message is charged a configurable number of simulated nanoseconds to
the meter installed on the calling thread. Workers own one meter each; the
runtime turns meters into a makespan. This keeps experiment shapes
independent of the host machine.
"""

import threading
from contextlib import contextmanager
from typing import Dict, Iterator, Optional

from aam.utils.config import CostSettings

EVENTS = (
    "atomic",
    "txn_begin",
    "txn_commit",
    "txn_access",
    "abort",
    "serial",
    "activity",
    "message",
    "element",
    "latency",
)

_local = threading.local()


class CostModel:
    """Prices for the simulated events, in nanoseconds."""

    def __init__(self, settings: Optional[CostSettings] = None):
        settings = settings or CostSettings()
        self.prices: Dict[str, float] = {event: getattr(settings, f"{event}_ns") for event in EVENTS}

    def price(self, event: str, count: float = 1) -> float:
        return self.prices[event] * count


class CostMeter:
    """Per-worker accumulator of simulated time."""

    def __init__(self, model: CostModel):
        self.model = model
        self.elapsed_ns = 0.0

    def charge(self, event: str, count: float = 1) -> None:
        self.elapsed_ns += self.model.price(event, count)

    def add_ns(self, ns: float) -> None:
        self.elapsed_ns += ns


@contextmanager
def metering(meter: CostMeter) -> Iterator[CostMeter]:
    """Install meter as the calling thread's meter for the block."""
    previous = getattr(_local, "meter", None)
    _local.meter = meter
    try:
        yield meter
    finally:
        _local.meter = previous


def current_meter() -> Optional[CostMeter]:
    return getattr(_local, "meter", None)


def charge(event: str, count: float = 1) -> None:
    """Charge an event to the current thread's meter; no meter, no charge."""
    meter = getattr(_local, "meter", None)
    if meter is not None:
        meter.charge(event, count)


def charge_ns(ns: float) -> None:
    meter = getattr(_local, "meter", None)
    if meter is not None:
        meter.add_ns(ns)
