"""
Run statistics.

RunStats is shared by all workers of a run; updates go through a lock so the
counters stay consistent under real threads.

Key functionality:
- RunStats: Commit, abort-by-reason, serialization and operator counters
- record_abort / add: Thread-safe updates
- merge: Fold another RunStats into this one
- serialization_ratio / abort_breakdown: Derived metrics
- as_row: Flat dict for CSV output
"""

import threading
from dataclasses import dataclass, field, fields
from typing import Any, Dict

COUNTERS = (
    "commits",
    "aborts_conflict",
    "aborts_capacity",
    "aborts_other",
    "serializations",
    "atomics",
    "activities",
    "operators_spawned",
    "operators_executed",
    "operators_skipped",
    "operator_failures",
    "replies_delivered",
    "messages_sent",
    "batches_sent",
    "backoffs",
    "supersteps",
)

CSV_COLUMNS = ("commits", "aborts_conflict", "aborts_capacity", "aborts_other", "serializations")


@dataclass
class RunStats:
    """Counters for one run. All counters are non-negative and only grow."""

    commits: int = 0
    aborts_conflict: int = 0
    aborts_capacity: int = 0
    aborts_other: int = 0
    serializations: int = 0
    atomics: int = 0
    activities: int = 0
    operators_spawned: int = 0
    operators_executed: int = 0
    operators_skipped: int = 0
    operator_failures: int = 0
    replies_delivered: int = 0
    messages_sent: int = 0
    batches_sent: int = 0
    backoffs: int = 0
    supersteps: int = 0
    sim_time_ns: float = 0.0
    wall_time_s: float = 0.0
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False, compare=False)

    def record_abort(self, reason: Any) -> None:
        """Count one aborted attempt; reason is an AbortReason."""
        name = f"aborts_{reason.value}"
        with self._lock:
            setattr(self, name, getattr(self, name) + 1)

    def add(self, **deltas: float) -> None:
        with self._lock:
            for name, delta in deltas.items():
                if delta < 0:
                    raise ValueError(f"counter {name} cannot decrease")
                setattr(self, name, getattr(self, name) + delta)

    def merge(self, other: "RunStats") -> "RunStats":
        """Add every counter of other into self and return self."""
        with self._lock:
            for f in fields(self):
                if f.name.startswith("_"):
                    continue
                setattr(self, f.name, getattr(self, f.name) + getattr(other, f.name))
        return self

    @property
    def total_aborts(self) -> int:
        return self.aborts_conflict + self.aborts_capacity + self.aborts_other

    @property
    def serialization_ratio(self) -> float:
        """Serializations per abort (0 when nothing aborted)."""
        return self.serializations / self.total_aborts if self.total_aborts else 0.0

    def abort_breakdown(self) -> Dict[str, float]:
        """Per-cent share of each abort reason."""
        total = self.total_aborts
        if not total:
            return {"conflict": 0.0, "capacity": 0.0, "other": 0.0}
        return {
            "conflict": 100.0 * self.aborts_conflict / total,
            "capacity": 100.0 * self.aborts_capacity / total,
            "other": 100.0 * self.aborts_other / total,
        }

    def as_row(self) -> Dict[str, Any]:
        """Counters plus derived metrics, flat, for CSV rows."""
        row: Dict[str, Any] = {name: getattr(self, name) for name in COUNTERS}
        row["total_aborts"] = self.total_aborts
        row["serialization_ratio"] = round(self.serialization_ratio, 6)
        row["sim_time_ns"] = round(self.sim_time_ns, 3)
        row["wall_time_s"] = round(self.wall_time_s, 6)
        return row
