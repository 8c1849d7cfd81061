"""
Software-emulated hardware transactional memory.

Transactions run over versioned Cells with eager write locking and read-set
validation (TL2 style). A transaction that cannot make progress speculatively
is eventually executed under the system-wide fallback lock, which always
succeeds. Aborts carry one of three reasons: memory conflict, buffer
overflow (footprint above the policy capacity) or other (fault injection).

Key functionality:
- Cell / TxnContext / AbortReason / RetryPolicy: the data types
- txn_read / txn_write: Transactional accesses
- TxnEngine.execute (txn_execute): Retry loop with policy-driven serialization
- atomic_cas / atomic_acc / atomic_fao: Linearizable single-word atomics
- make_policy: Policy spec string to RetryPolicy
- FaultInjector: Scripted or probabilistic "other" aborts
"""

import itertools
import operator as _operator
import random
import threading
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Callable, Dict, Iterable, List, Optional, Set

from aam.core.cost import charge, charge_ns
from aam.core.errors import ConfigError, ContractError
from aam.core.scheduler import pause, wait_while, yield_point
from aam.core.stats import RunStats
from aam.logging import get_logger
from aam.utils.config import Settings

logger = get_logger(__name__)

# Guards every cell's metadata, the fallback lock and the commit clock
_meta = threading.Lock()
_commit_clock = 0
_txn_ids = itertools.count(1)


class AbortReason(Enum):
    """Why a transactional attempt was rolled back."""

    MEMORY_CONFLICT = "conflict"
    BUFFER_OVERFLOW = "capacity"
    OTHER = "other"


class TxnStatus(Enum):
    LIVE = "live"
    COMMITTED = "committed"
    ABORTED = "aborted"


class TransactionAbort(Exception):
    """Control-flow signal for a rolled back attempt; never leaves the engine."""

    def __init__(self, reason: AbortReason, wait_for: Optional["Cell"] = None):
        super().__init__(reason.value)
        self.reason = reason
        self.wait_for = wait_for


class Cell:
    """A versioned mutable word with a write lock and an ownership marker."""

    __slots__ = ("value", "version", "lock_owner", "marker")

    def __init__(self, value: Any = None):
        self.value = value
        self.version = 0
        self.lock_owner: Optional["TxnContext"] = None
        self.marker: Optional[int] = None

    def load(self) -> Any:
        """Non-transactional read."""
        return self.value

    def store(self, value: Any) -> None:
        """Non-transactional write; conflicts with any live holder."""
        global _commit_clock
        with _meta:
            _doom_holder(self)
            self.value = value
            self.version += 1
            _commit_clock += 1

    def __repr__(self) -> str:
        return f"Cell(value={self.value!r}, version={self.version})"


class FallbackLock:
    """
    The single serialization lock of the whole simulated machine.

    Taking it bumps the epoch, which aborts every live speculative
    transaction of every node exactly once; they wait for the release before
    starting again. At most one serialized transaction exists at a time, so
    serialized transactions never wait on each other.
    """

    def __init__(self):
        self.holder: Optional["TxnContext"] = None
        self.epoch = 0
        self.live: Set["TxnContext"] = set()

    @property
    def held(self) -> bool:
        return self.holder is not None


_fallback = FallbackLock()


def fallback_lock() -> FallbackLock:
    """The system-wide fallback lock."""
    return _fallback


class SerializationDomain:
    """
    The transactions of one node: its pid (ownership markers compare against
    it) over the shared fallback lock.
    """

    def __init__(self, pid: int = 0):
        self.pid = pid
        self.fallback = _fallback

    @property
    def holder(self) -> Optional["TxnContext"]:
        return self.fallback.holder


@dataclass(eq=False)
class TxnContext:
    """State of one transactional attempt; confined to the executing thread."""

    domain: SerializationDomain
    capacity: Optional[int]
    serialized: bool = False
    id: int = field(default_factory=lambda: next(_txn_ids))
    start_epoch: int = 0
    snapshot: int = 0
    read_set: Dict[Cell, int] = field(default_factory=dict)
    write_set: Dict[Cell, Any] = field(default_factory=dict)
    locked: List[Cell] = field(default_factory=list)
    status: TxnStatus = TxnStatus.LIVE
    reason: Optional[AbortReason] = None
    doomed: Optional[AbortReason] = None

    @property
    def footprint(self) -> int:
        """|read_set ∪ write_set|."""
        return len(self.read_set.keys() | self.write_set.keys())


class PolicyKind(Enum):
    RTM = "rtm"
    HLE = "hle"
    BGQ = "bgq"
    LOCKS = "locks"
    ATOMICS = "atomics"


class CapacityMode(Enum):
    SHORT = "short"
    LONG = "long"
    UNBOUNDED = "unbounded"


@dataclass(frozen=True)
class RetryPolicy:
    """How a transaction is retried and when it falls back to serialization."""

    name: str
    kind: PolicyKind
    max_retries: int
    capacity_mode: CapacityMode
    capacity: Optional[int]
    backoff: bool = False
    backoff_base_us: float = 1.0
    backoff_cap_us: float = 1000.0

    def should_serialize(self, aborts: int) -> bool:
        if self.kind in (PolicyKind.LOCKS, PolicyKind.ATOMICS):
            return True
        return aborts >= self.max_retries

    @property
    def uses_atomics(self) -> bool:
        return self.kind is PolicyKind.ATOMICS


POLICY_SPECS = ("rtm", "hle", "bgq-short", "bgq-long", "atomics", "locks")


def make_policy(spec: str, settings: Optional[Settings] = None) -> RetryPolicy:
    """
    Build a RetryPolicy from a CLI policy string.

    Args:
        spec: One of rtm, hle, bgq-short, bgq-long, atomics, locks
        settings: Capacity and retry tunables (defaults if omitted)

    Raises:
        ConfigError: Unknown spec
    """
    settings = settings or Settings()
    spec = spec.strip().lower()
    short, long_ = settings.short_capacity, settings.long_capacity

    if spec == "rtm":
        return RetryPolicy(
            name=spec, kind=PolicyKind.RTM, max_retries=settings.rtm_max_retries,
            capacity_mode=CapacityMode.SHORT, capacity=short, backoff=True,
            backoff_base_us=settings.txn_backoff_base_us, backoff_cap_us=settings.txn_backoff_cap_us,
        )
    if spec == "hle":
        return RetryPolicy(
            name=spec, kind=PolicyKind.HLE, max_retries=1,
            capacity_mode=CapacityMode.SHORT, capacity=short,
        )
    if spec in ("bgq-short", "bgq-long"):
        long_mode = spec == "bgq-long"
        return RetryPolicy(
            name=spec, kind=PolicyKind.BGQ, max_retries=settings.bgq_max_rollbacks,
            capacity_mode=CapacityMode.LONG if long_mode else CapacityMode.SHORT,
            capacity=long_ if long_mode else short,
        )
    if spec == "locks":
        return RetryPolicy(
            name=spec, kind=PolicyKind.LOCKS, max_retries=0,
            capacity_mode=CapacityMode.UNBOUNDED, capacity=None,
        )
    if spec == "atomics":
        return RetryPolicy(
            name=spec, kind=PolicyKind.ATOMICS, max_retries=0,
            capacity_mode=CapacityMode.UNBOUNDED, capacity=None,
        )
    raise ConfigError(f"unknown policy '{spec}' (expected one of {', '.join(POLICY_SPECS)})")


class FaultInjector:
    """
    Decides whether a speculative commit fails with reason Other.

    A script (iterable of booleans) is consumed first; afterwards each
    attempt fails with the given probability.
    """

    def __init__(self, probability: float = 0.0, seed: int = 0, script: Optional[Iterable[bool]] = None):
        if not 0.0 <= probability <= 1.0:
            raise ConfigError(f"fault probability must be in [0, 1], got {probability}")
        self.probability = probability
        self._rng = random.Random(seed)
        self._script = iter(script) if script is not None else None
        self.injected = 0

    def should_fail(self) -> bool:
        if self._script is not None:
            try:
                fail = bool(next(self._script))
            except StopIteration:
                self._script = None
            else:
                self.injected += fail
                return fail
        fail = self.probability > 0 and self._rng.random() < self.probability
        self.injected += fail
        return fail


@dataclass(frozen=True)
class CommitOutcome:
    """Committed(result) when serialized is False, SerializedCommit(result) otherwise."""

    result: Any
    serialized: bool = False
    aborts: int = 0


# Helpers below expect _meta to be held


def _doom_holder(cell: Cell, unless_pid: Optional[int] = None) -> None:
    owner = cell.lock_owner
    if owner is not None and not owner.serialized and owner.domain.pid != unless_pid:
        owner.doomed = owner.doomed or AbortReason.MEMORY_CONFLICT


def _marked_by_other(ctx: TxnContext, cell: Cell) -> bool:
    return cell.marker is not None and cell.marker != ctx.domain.pid


def _check_live(ctx: TxnContext) -> None:
    if ctx.status is not TxnStatus.LIVE:
        raise ContractError(f"transaction {ctx.id} is not live ({ctx.status.value})")
    if ctx.doomed is not None:
        raise TransactionAbort(ctx.doomed)
    if not ctx.serialized:
        if _fallback.epoch != ctx.start_epoch or _fallback.held:
            raise TransactionAbort(AbortReason.MEMORY_CONFLICT)


def _admit(ctx: TxnContext, cell: Cell) -> None:
    """Account for a new cell in the footprint."""
    if cell in ctx.read_set or cell in ctx.write_set:
        return
    if ctx.capacity is not None and ctx.footprint >= ctx.capacity:
        raise TransactionAbort(AbortReason.BUFFER_OVERFLOW)


def _revalidate(ctx: TxnContext) -> None:
    if ctx.snapshot == _commit_clock:
        return
    for cell, version in ctx.read_set.items():
        if cell.version != version:
            raise TransactionAbort(AbortReason.MEMORY_CONFLICT)
    ctx.snapshot = _commit_clock


def txn_read(ctx: TxnContext, cell: Cell) -> Any:
    """
    Read a cell inside a transaction.

    Reading a cell write-locked by another live transaction, or one whose
    version moved since it was first read, aborts with MemoryConflict; a new
    cell beyond capacity aborts with BufferOverflow. A serialized transaction
    waits for the holder instead of aborting.
    """
    yield_point()
    charge("txn_access")
    while True:
        with _meta:
            _check_live(ctx)
            if cell in ctx.write_set:
                return ctx.write_set[cell]
            if _marked_by_other(ctx, cell):
                raise TransactionAbort(AbortReason.MEMORY_CONFLICT, wait_for=cell)
            owner = cell.lock_owner
            if owner is None or owner is ctx:
                if cell in ctx.read_set:
                    if cell.version != ctx.read_set[cell]:
                        raise TransactionAbort(AbortReason.MEMORY_CONFLICT)
                else:
                    _admit(ctx, cell)
                    if not ctx.serialized:
                        _revalidate(ctx)
                    ctx.read_set[cell] = cell.version
                return cell.value
            if not ctx.serialized:
                raise TransactionAbort(AbortReason.MEMORY_CONFLICT)
            # ctx holds the fallback lock, so owner is speculative
            owner.doomed = owner.doomed or AbortReason.MEMORY_CONFLICT
        wait_while(lambda: cell.lock_owner is owner)


def txn_write(ctx: TxnContext, cell: Cell, value: Any) -> None:
    """
    Write a cell inside a transaction.

    The cell's lock is taken eagerly; the value stays in the write set until
    commit. A lock held by another live transaction aborts the writer with
    MemoryConflict (a serialized writer waits instead).
    """
    yield_point()
    charge("txn_access")
    while True:
        with _meta:
            _check_live(ctx)
            if _marked_by_other(ctx, cell):
                raise TransactionAbort(AbortReason.MEMORY_CONFLICT, wait_for=cell)
            owner = cell.lock_owner
            if owner is ctx:
                ctx.write_set[cell] = value
                return
            if owner is None:
                _admit(ctx, cell)
                if cell in ctx.read_set and cell.version != ctx.read_set[cell]:
                    raise TransactionAbort(AbortReason.MEMORY_CONFLICT)
                cell.lock_owner = ctx
                ctx.locked.append(cell)
                ctx.write_set[cell] = value
                return
            if not ctx.serialized:
                raise TransactionAbort(AbortReason.MEMORY_CONFLICT)
            # ctx holds the fallback lock, so owner is speculative
            owner.doomed = owner.doomed or AbortReason.MEMORY_CONFLICT
        wait_while(lambda: cell.lock_owner is owner)


def _commit(ctx: TxnContext, faults: Optional[FaultInjector]) -> None:
    global _commit_clock
    yield_point()
    with _meta:
        _check_live(ctx)
        for cell in itertools.chain(ctx.read_set, ctx.write_set):
            if _marked_by_other(ctx, cell):
                raise TransactionAbort(AbortReason.MEMORY_CONFLICT, wait_for=cell)
        if not ctx.serialized and faults is not None and faults.should_fail():
            raise TransactionAbort(AbortReason.OTHER)
        for cell, version in ctx.read_set.items():
            if cell.version != version:
                raise TransactionAbort(AbortReason.MEMORY_CONFLICT)
        if ctx.write_set:
            _commit_clock += 1
        for cell, value in ctx.write_set.items():
            cell.value = value
            cell.version += 1
            cell.lock_owner = None
        ctx.locked.clear()
        ctx.status = TxnStatus.COMMITTED
        _fallback.live.discard(ctx)
    charge("txn_commit")


def _rollback(ctx: TxnContext, reason: Optional[AbortReason] = None) -> None:
    with _meta:
        for cell in ctx.locked:
            if cell.lock_owner is ctx:
                cell.lock_owner = None
        ctx.locked.clear()
        ctx.write_set.clear()
        ctx.status = TxnStatus.ABORTED
        ctx.reason = reason
        _fallback.live.discard(ctx)


def _held_by_other(cell: Cell, pid: int) -> bool:
    return cell.marker is not None and cell.marker != pid


class TxnEngine:
    """
    Executes transaction bodies for one node.

    Serialized attempts of every engine share one fallback lock.

    Args:
        settings: Tunables (defaults when omitted)
        domain: The node these transactions run on; one per simulated node
        faults: Optional injector of "other" aborts
        seed: Seed for backoff jitter
    """

    def __init__(
        self,
        settings: Optional[Settings] = None,
        domain: Optional[SerializationDomain] = None,
        faults: Optional[FaultInjector] = None,
        seed: int = 0,
    ):
        self.settings = settings or Settings()
        self.domain = domain or SerializationDomain()
        self.faults = faults
        self._rng = random.Random(seed)

    def execute(
        self, body: Callable[[TxnContext], Any], policy: RetryPolicy, stats: RunStats
    ) -> CommitOutcome:
        """
        Run body atomically, retrying per policy.

        Args:
            body: Callable receiving the TxnContext; accesses cells only via
                txn_read / txn_write
            policy: Retry and capacity policy
            stats: Counters updated for every attempt

        Returns:
            CommitOutcome with serialized=False (Committed) or True (SerializedCommit)

        Raises:
            Any non-transactional exception raised by body, after rollback
        """
        aborts = 0
        while True:
            if policy.should_serialize(aborts):
                return self._execute_serialized(body, stats, aborts)

            wait_while(lambda: _fallback.held)
            ctx = self._begin(policy.capacity)
            charge("txn_begin")
            try:
                result = body(ctx)
                _commit(ctx, self.faults)
            except TransactionAbort as abort:
                _rollback(ctx, abort.reason)
                stats.record_abort(abort.reason)
                charge("abort")
                aborts += 1
                logger.debug("txn %d aborted (%s), attempt %d", ctx.id, abort.reason.value, aborts)
                if abort.wait_for is not None:
                    wait_while(lambda: _held_by_other(abort.wait_for, self.domain.pid))
                if policy.backoff and not policy.should_serialize(aborts):
                    self._backoff(policy, aborts)
                continue
            except BaseException:
                _rollback(ctx)
                raise

            stats.add(commits=1)
            return CommitOutcome(result=result, serialized=False, aborts=aborts)

    def _begin(self, capacity: Optional[int]) -> TxnContext:
        with _meta:
            ctx = TxnContext(
                domain=self.domain,
                capacity=capacity,
                start_epoch=_fallback.epoch,
                snapshot=_commit_clock,
            )
            _fallback.live.add(ctx)
        return ctx

    def _execute_serialized(
        self, body: Callable[[TxnContext], Any], stats: RunStats, aborts: int
    ) -> CommitOutcome:
        while True:
            ctx = TxnContext(domain=self.domain, capacity=None, serialized=True)
            self._acquire_fallback(ctx)
            charge("serial")
            try:
                result = body(ctx)
                _commit(ctx, None)
            except TransactionAbort as abort:
                _rollback(ctx, abort.reason)
                self._release_fallback(ctx)
                stats.record_abort(abort.reason)
                charge("abort")
                aborts += 1
                if abort.wait_for is not None:
                    wait_while(lambda: _held_by_other(abort.wait_for, self.domain.pid))
                continue
            except BaseException:
                _rollback(ctx)
                self._release_fallback(ctx)
                raise

            self._release_fallback(ctx)
            stats.add(serializations=1)
            return CommitOutcome(result=result, serialized=True, aborts=aborts)

    def _acquire_fallback(self, ctx: TxnContext) -> None:
        while True:
            with _meta:
                if _fallback.holder is None:
                    _fallback.holder = ctx
                    _fallback.epoch += 1
                    for live in _fallback.live:
                        live.doomed = live.doomed or AbortReason.MEMORY_CONFLICT
                    return
            wait_while(lambda: _fallback.held)

    def _release_fallback(self, ctx: TxnContext) -> None:
        with _meta:
            if _fallback.holder is ctx:
                _fallback.holder = None

    def _backoff(self, policy: RetryPolicy, aborts: int) -> None:
        """Exponential backoff with ±50% jitter, capped."""
        delay_us = policy.backoff_base_us * (2 ** (aborts - 1))
        delay_us = min(policy.backoff_cap_us, delay_us * self._rng.uniform(0.5, 1.5))
        charge_ns(delay_us * 1000.0)
        pause(delay_us / 1e6)


_default_engine: Optional[TxnEngine] = None


def default_engine() -> TxnEngine:
    global _default_engine
    if _default_engine is None:
        _default_engine = TxnEngine()
    return _default_engine


def txn_execute(
    body: Callable[[TxnContext], Any],
    policy: RetryPolicy,
    stats: RunStats,
    engine: Optional[TxnEngine] = None,
) -> CommitOutcome:
    """Run body as one transaction on engine (the process-wide default when omitted)."""
    return (engine or default_engine()).execute(body, policy, stats)


ACC_OPS: Dict[str, Callable[[Any, Any], Any]] = {
    "sum": _operator.add,
    "min": min,
    "max": max,
}


def _acc_fn(op: str) -> Callable[[Any, Any], Any]:
    try:
        return ACC_OPS[op]
    except KeyError:
        raise ContractError(f"unsupported accumulate op '{op}'") from None


def _run_atomic(cell: Cell, update: Callable[[Any], Any]) -> Any:
    """
    Apply update to cell's value as one indivisible step and return the old value.

    Atomics wait while a serialized transaction runs. A speculative holder of
    the cell is doomed.
    update returns the new value, or the cell itself to leave it untouched.
    """
    global _commit_clock
    while True:
        with _meta:
            if not _fallback.held:
                _doom_holder(cell)
                previous = cell.value
                new = update(previous)
                if new is not cell:
                    cell.value = new
                    cell.version += 1
                    _commit_clock += 1
                return previous
        wait_while(lambda: _fallback.held)


def atomic_cas(cell: Cell, compare: Any, new: Any) -> bool:
    """Compare-and-swap outside any transaction."""
    yield_point()
    charge("atomic")
    previous = _run_atomic(cell, lambda value: new if value == compare else cell)
    return previous == compare


def atomic_fao(cell: Cell, arg: Any, op: str = "sum") -> Any:
    """Fetch-and-op: apply op(cell, arg) and return the previous value."""
    fn = _acc_fn(op)
    yield_point()
    charge("atomic")
    return _run_atomic(cell, lambda value: fn(value, arg))


def atomic_acc(cell: Cell, arg: Any, op: str = "sum") -> None:
    """Accumulate: cell = op(cell, arg)."""
    atomic_fao(cell, arg, op)


def marker_cas(cell: Cell, expected: Optional[int], new: Optional[int]) -> bool:
    """
    Atomically move a cell's ownership marker from expected to new.

    Setting a marker aborts transactions of other nodes that hold the cell.
    """
    yield_point()
    with _meta:
        if cell.marker != expected:
            return False
        cell.marker = new
        if new is not None:
            _doom_holder(cell, unless_pid=new)
        return True
