"""
Ownership protocol for transactions over remote elements.

A transaction first runs on its home node as is. When it touches an element
owned by another node it aborts, and the process marks the whole footprint
with its id (CAS ⊥ → pid, ascending element order), pulls the remote
payloads into local copies, runs an ordinary local transaction over the
unified element set, then writes the payloads back and clears the markers.
Any failed mark releases everything taken so far and backs off for a
random, exponentially growing time.

Key functionality:
- RelocatedElement: Local copy of a remote element
- OwnershipManager.acquire / release: Marker protocol
- OwnershipManager.run_distributed_txn: unmarked attempt, then acquire → txn_execute → release
"""

import random
import threading
import time
from collections.abc import Mapping
from dataclasses import dataclass
from enum import Enum
from typing import Any, Callable, Dict, Iterable, Iterator, List, Optional, Sequence, Tuple

from aam.core.cost import charge, charge_ns
from aam.core.errors import ContractError, WatchdogError
from aam.core.graph import Partition
from aam.core.scheduler import pause
from aam.core.stats import RunStats
from aam.core.txn import AbortReason, Cell, CommitOutcome, RetryPolicy, TxnContext, TxnEngine, marker_cas
from aam.logging import get_logger
from aam.utils.config import Settings

logger = get_logger(__name__)


class AcquireOutcome(Enum):
    ACQUIRED = "acquired"
    BACKOFF = "backoff"


@dataclass
class RelocatedElement:
    """A remote element's payload cached at the acquiring process."""

    element: int
    home_process: int
    cached_at: int
    payload: Cell


@dataclass
class AcquireResult:
    outcome: AcquireOutcome
    relocated: Dict[int, RelocatedElement]
    delay_us: float = 0.0


class _RemoteAccess(Exception):
    """A transaction without markers touched a remote element."""

    def __init__(self, element: int):
        super().__init__(f"remote element {element}")
        self.element = element


class _HomeView(Mapping):
    """Element -> home cell for local elements; remote ones raise _RemoteAccess."""

    def __init__(self, cells: Sequence[Cell], local: Sequence[int], remote: Sequence[int]):
        self._cells = cells
        self._local = set(local)
        self._remote = set(remote)
        self._order = list(local) + list(remote)

    def __getitem__(self, e: int) -> Cell:
        if e in self._local:
            return self._cells[e]
        if e in self._remote:
            raise _RemoteAccess(e)
        raise KeyError(e)

    def __iter__(self) -> Iterator[int]:
        return iter(self._order)

    def __len__(self) -> int:
        return len(self._order)


class OwnershipManager:
    """
    Marker protocol over one cell per element.

    Args:
        cells: Home cell of every element, indexed by element id
        partition: Element ownership
        settings: Backoff and watchdog tunables
        seed: Seed for backoff randomization (one stream per process)
    """

    def __init__(
        self,
        cells: Sequence[Cell],
        partition: Partition,
        settings: Optional[Settings] = None,
        seed: int = 0,
    ):
        self.cells = cells
        self.partition = partition
        self.settings = settings or Settings()
        self._rngs = [random.Random(seed * 1_000_003 + p) for p in range(partition.N)]
        self._failures = [0] * partition.N
        self._held: Dict[int, int] = {}
        self._held_lock = threading.Lock()

    def acquire(self, pid: int, elements: Iterable[int]) -> AcquireResult:
        """
        Mark every element for pid, all or nothing.

        Returns:
            ACQUIRED with the relocated copies of non-local elements, or
            BACKOFF with a randomized delay after releasing partial marks
        """
        taken: List[int] = []
        for e in sorted(set(elements)):
            if not marker_cas(self.cells[e], None, pid):
                for held in reversed(taken):
                    self._unmark(pid, held)
                self._failures[pid] += 1
                return AcquireResult(AcquireOutcome.BACKOFF, {}, self._backoff_delay(pid))
            self._note_held(pid, e)
            taken.append(e)

        self._failures[pid] = 0
        relocated = {}
        for e in taken:
            home = self.partition.owner(e)
            if home != pid:
                relocated[e] = RelocatedElement(
                    element=e, home_process=home, cached_at=pid, payload=Cell(self.cells[e].load())
                )
        return AcquireResult(AcquireOutcome.ACQUIRED, relocated)

    def release(self, pid: int, elements: Iterable[int], relocated: Optional[Dict[int, RelocatedElement]] = None) -> None:
        """
        Write relocated payloads home, then clear the markers.

        Raises:
            ContractError: pid does not hold one of the markers
        """
        elements = sorted(set(elements))
        relocated = relocated or {}
        for e in elements:
            if self.cells[e].marker != pid:
                raise ContractError(f"process {pid} does not hold element {e}")
        for e in elements:
            if e in relocated:
                self.cells[e].store(relocated[e].payload.load())
            self._unmark(pid, e)

    def run_distributed_txn(
        self,
        pid: int,
        local: Iterable[int],
        remote: Iterable[int],
        body: Callable[[TxnContext, Mapping[int, Cell]], Any],
        policy: RetryPolicy,
        engine: TxnEngine,
        stats: RunStats,
    ) -> CommitOutcome:
        """
        Execute body over local and remote elements as one transaction.

        The first attempt runs on the home cells without any marker. A remote
        element cannot be reached from inside a transaction, so touching one
        aborts that attempt (reason Other). Only then is every element of the
        footprint marked, local ones included, so two processes can never each
        hold an element the other one needs. Markers stay held across HTM
        retries and are released after the commit.

        Args:
            body: Receives the TxnContext and a map element -> cell to use
                (home cell for local elements, relocated copy otherwise)

        Raises:
            ContractError: A "local" element is not owned by pid
            WatchdogError: No acquisition within the watchdog budget
        """
        local = sorted(set(local))
        remote = sorted(set(remote) - set(local))
        for e in local:
            if self.partition.owner(e) != pid:
                raise ContractError(f"element {e} is not local to process {pid}")

        home_view = _HomeView(self.cells, local, remote)
        try:
            return engine.execute(lambda ctx: body(ctx, home_view), policy, stats)
        except _RemoteAccess as access:
            stats.record_abort(AbortReason.OTHER)
            charge("abort")
            logger.debug("process %d touched remote element %d, acquiring markers", pid, access.element)

        footprint = local + remote
        started = time.monotonic()
        while True:
            result = self.acquire(pid, footprint)
            if result.outcome is AcquireOutcome.ACQUIRED:
                break
            stats.add(backoffs=1)
            charge_ns(result.delay_us * 1000.0)
            pause(result.delay_us / 1e6)
            if time.monotonic() - started > self.settings.watchdog_seconds:
                raise WatchdogError(f"process {pid} could not acquire {footprint}")

        view = {e: self.cells[e] for e in local}
        view.update({e: r.payload for e, r in result.relocated.items()})
        try:
            return engine.execute(lambda ctx: body(ctx, view), policy, stats)
        finally:
            self.release(pid, footprint, result.relocated)

    def holders(self) -> Dict[int, int]:
        """Snapshot of element -> holding process."""
        with self._held_lock:
            return dict(self._held)

    def _note_held(self, pid: int, e: int) -> None:
        with self._held_lock:
            if e in self._held:
                raise ContractError(f"element {e} double-held by {self._held[e]} and {pid}")
            self._held[e] = pid

    def _unmark(self, pid: int, e: int) -> None:
        with self._held_lock:
            self._held.pop(e, None)
        if not marker_cas(self.cells[e], pid, None):
            raise ContractError(f"marker of element {e} not held by {pid}")

    def _backoff_delay(self, pid: int) -> float:
        """Uniform in [0, 2^k · base] µs for k consecutive failures, capped."""
        k = self._failures[pid]
        bound = min(self.settings.ownership_backoff_cap_us, self.settings.ownership_backoff_base_us * (2 ** k))
        return self._rngs[pid].uniform(0.0, bound)


def marks_replay(n: int, operations: Iterable[Tuple[int, ...]]) -> List[int]:
    """Sequential replay oracle: how often each element was marked."""
    counts = [0] * n
    for footprint in operations:
        for e in footprint:
            counts[e] += 1
    return counts
