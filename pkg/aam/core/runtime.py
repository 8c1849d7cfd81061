"""
The AAM runtime.

Operators are registered once, then messages are spawned at the owner of
their element. Each simulated process coarsens its local queue into
activities of up to M operators and executes every activity as one
transaction on T worker threads. Remote messages travel through the
simulated network, coalesced C at a time. Fire-and-return results are
queued at the spawner and its failure handler runs on the driver thread.

Key functionality:
- AAMRuntime.register_operator: Build the dispatch table
- AAMRuntime.spawn: Route a message locally or over the network
- coarsen: Pop up to M queued operators into an Activity
- AAMRuntime.execute_activity: Run an activity as one transaction (or as atomics)
- AAMRuntime.deliver_result: Invoke the spawner's failure handler
- AAMRuntime.run_to_quiescence: Superstep driver until nothing is pending
"""

import random
import threading
import time
from collections import deque
from concurrent.futures import ThreadPoolExecutor, wait
from concurrent.futures import TimeoutError as FutureTimeout
from dataclasses import dataclass
from typing import Any, Callable, Deque, List, Optional, Tuple

from aam.core.cost import CostMeter, CostModel, charge, metering
from aam.core.errors import ContractError, WatchdogError
from aam.core.graph import Partition
from aam.core.messages import Activity, AtomicMessage, MessageClass, OperatorResult
from aam.core.network import SimNetwork, SimProcess
from aam.core.scheduler import ABORT_JOIN_SECONDS, ProgressWatchdog, StepScheduler, abort_on
from aam.core.stats import RunStats
from aam.core.txn import (
    Cell,
    FaultInjector,
    SerializationDomain,
    TxnContext,
    TxnEngine,
    atomic_acc,
    atomic_cas,
    atomic_fao,
    make_policy,
    txn_read,
    txn_write,
)
from aam.logging import get_logger
from aam.models import RunConfig
from aam.utils.config import Settings

logger = get_logger(__name__)

Selection = Callable[[Deque[AtomicMessage], int], List[AtomicMessage]]

# How often a threaded superstep checks the watchdog
WATCHDOG_POLL_SECONDS = 0.1


def fifo_selection(queue: Deque[AtomicMessage], M: int) -> List[AtomicMessage]:
    return [queue.popleft() for _ in range(min(M, len(queue)))]


def sorted_selection(queue: Deque[AtomicMessage], M: int) -> List[AtomicMessage]:
    """FIFO batch, then ordered by element id so neighbouring elements share a transaction."""
    batch = fifo_selection(queue, M)
    batch.sort(key=lambda m: m.element)
    return batch


SELECTIONS = {"fifo": fifo_selection, "sorted": sorted_selection}


def coarsen(queue: Deque[AtomicMessage], M: int, selection: Selection = fifo_selection) -> Activity:
    """
    Pop up to M operators from queue into one activity.

    Raises:
        ContractError: M < 1 or the queue is empty
    """
    if M < 1:
        raise ContractError(f"coarsening factor must be >= 1, got {M}")
    if not queue:
        raise ContractError("cannot coarsen an empty queue")
    return Activity(operators=selection(queue, M), M=M)


@dataclass(frozen=True)
class Operator:
    """A registered operator and its optional companions."""

    id: int
    name: str
    body: Callable[["OperatorContext", int, Tuple[Any, ...]], Any]
    msg_class: MessageClass
    handler: Optional[Callable[["AAMRuntime", OperatorResult, int], None]] = None
    atomic_form: Optional[Callable[["AtomicContext", int, Tuple[Any, ...]], Any]] = None
    precheck: Optional[Callable[[int, Tuple[Any, ...]], bool]] = None


class _SpawnMixin:
    runtime: "AAMRuntime"
    pid: int

    def message(self, operator_id: int, element: int, params: Tuple[Any, ...] = ()) -> AtomicMessage:
        return self.runtime.make_message(operator_id, element, params, spawner=self.pid)


class OperatorContext(_SpawnMixin):
    """
    What an operator body sees inside its transaction.

    Spawns are buffered and released only if the enclosing transaction
    commits.
    """

    def __init__(self, runtime: "AAMRuntime", pid: int, txn: TxnContext):
        self.runtime = runtime
        self.pid = pid
        self.txn = txn
        self.spawned: List[AtomicMessage] = []
        self._failed = False

    def read(self, cell: Cell) -> Any:
        return txn_read(self.txn, cell)

    def write(self, cell: Cell, value: Any) -> None:
        txn_write(self.txn, cell, value)

    def fail(self) -> None:
        """Report an algorithm-level failure of the current operator (MF only)."""
        self._failed = True

    def spawn(self, operator_id: int, element: int, params: Tuple[Any, ...] = ()) -> None:
        self.spawned.append(self.message(operator_id, element, params))

    def _next_operator(self) -> None:
        self._failed = False


class AtomicContext(_SpawnMixin):
    """What an operator's atomic form sees: single-word atomics, immediate spawns."""

    def __init__(self, runtime: "AAMRuntime", pid: int):
        self.runtime = runtime
        self.pid = pid
        self._failed = False

    def load(self, cell: Cell) -> Any:
        return cell.load()

    def cas(self, cell: Cell, compare: Any, new: Any) -> bool:
        self.runtime.stats.add(atomics=1)
        return atomic_cas(cell, compare, new)

    def acc(self, cell: Cell, arg: Any, op: str = "sum") -> None:
        self.runtime.stats.add(atomics=1)
        atomic_acc(cell, arg, op)

    def fao(self, cell: Cell, arg: Any, op: str = "sum") -> Any:
        self.runtime.stats.add(atomics=1)
        return atomic_fao(cell, arg, op)

    def fail(self) -> None:
        self._failed = True

    def spawn(self, operator_id: int, element: int, params: Tuple[Any, ...] = ()) -> None:
        self.runtime.spawn(self.message(operator_id, element, params), self.pid)


class AAMRuntime:
    """
    One simulated machine running atomic active messages.

    Args:
        partition: Vertex ownership (N = partition.N processes)
        config: M, C, T, policy, seed, scheduling mode
        settings: Tunables (capacities, retry bounds, cost model, watchdog)
        stats: Counters to update (a fresh RunStats when omitted)
    """

    def __init__(
        self,
        partition: Partition,
        config: Optional[RunConfig] = None,
        settings: Optional[Settings] = None,
        stats: Optional[RunStats] = None,
    ):
        self.partition = partition
        self.config = config or RunConfig(procs=partition.N)
        self.settings = settings or Settings()
        self.stats = stats if stats is not None else RunStats()
        self.policy = make_policy(self.config.policy, self.settings)
        self.selection = SELECTIONS[self.config.selection]
        self.cost_model = CostModel(self.settings.cost)
        self.network = SimNetwork(partition, self.config.coalesce, self.stats)
        self.processes: List[SimProcess] = self.network.processes

        faults = None
        if self.config.fault_probability > 0:
            faults = FaultInjector(self.config.fault_probability, seed=self.config.seed)
        for proc in self.processes:
            proc.engine = TxnEngine(
                self.settings,
                SerializationDomain(proc.pid),
                faults,
                seed=self.config.seed * 7919 + proc.pid,
            )

        self._operators: List[Operator] = []
        self._started = False
        self._cancelled = threading.Event()
        self._schedule_rng = random.Random(self.config.seed)

    # Registration and dispatch

    def register_operator(
        self,
        name: str,
        body: Callable[[OperatorContext, int, Tuple[Any, ...]], Any],
        msg_class: MessageClass,
        handler: Optional[Callable[["AAMRuntime", OperatorResult, int], None]] = None,
        atomic_form: Optional[Callable[[AtomicContext, int, Tuple[Any, ...]], Any]] = None,
        precheck: Optional[Callable[[int, Tuple[Any, ...]], bool]] = None,
    ) -> int:
        """
        Add an operator to the dispatch table.

        Returns:
            The operator id, stable for the run

        Raises:
            ContractError: Execution already started, or a precheck was given
                for a fire-and-return operator
        """
        if self._started:
            raise ContractError("operators cannot be registered after execution started")
        if precheck is not None and msg_class.returns:
            raise ContractError("fire-and-return operators cannot be skipped by a precheck")
        op = Operator(
            id=len(self._operators), name=name, body=body, msg_class=msg_class,
            handler=handler, atomic_form=atomic_form, precheck=precheck,
        )
        self._operators.append(op)
        logger.debug("registered operator %d (%s, %s)", op.id, name, msg_class)
        return op.id

    def operator(self, operator_id: int) -> Operator:
        if not 0 <= operator_id < len(self._operators):
            raise ContractError(f"unknown operator id {operator_id}")
        return self._operators[operator_id]

    # Messaging

    def make_message(
        self,
        operator_id: int,
        element: int,
        params: Tuple[Any, ...] = (),
        spawner: Optional[int] = None,
    ) -> AtomicMessage:
        """Address a message to the owner of element; FR messages reply to spawner."""
        op = self.operator(operator_id)
        target = self.partition.owner(element)
        if spawner is None:
            spawner = target
        return AtomicMessage(
            msg_class=op.msg_class,
            target_process=target,
            operator_id=operator_id,
            element=element,
            params=tuple(params),
            reply_to=spawner if op.msg_class.returns else None,
        )

    def spawn(self, msg: AtomicMessage, src: int) -> None:
        """
        Issue msg from process src.

        Raises:
            ContractError: msg is not addressed to the owner of its element
        """
        self.operator(msg.operator_id)
        if self.partition.owner(msg.element) != msg.target_process:
            raise ContractError(
                f"element {msg.element} is owned by {self.partition.owner(msg.element)}, "
                f"not {msg.target_process}"
            )
        self.stats.add(operators_spawned=1)
        if msg.target_process == src:
            proc = self.processes[src]
            with proc.queue_lock:
                proc.queue.append(msg)
        else:
            self.network.send_aam(src, msg)

    def seed(self, operator_id: int, element: int, params: Tuple[Any, ...] = (), src: Optional[int] = None) -> None:
        """Spawn an initial message from src (the element's owner by default)."""
        msg = self.make_message(operator_id, element, params, spawner=src)
        self.spawn(msg, msg.target_process if src is None else src)

    # Execution

    def execute_activity(self, act: Activity, pid: int) -> List[OperatorResult]:
        """
        Run every operator of act inside one transaction at process pid.

        Under the atomics policy, activities whose operators all have an
        atomic form run as independent atomics instead.

        Returns:
            One OperatorResult per executed operator (prechecked-out ones excluded)

        Raises:
            ContractError: An element is not local, or an AS operator failed
        """
        proc = self.processes[pid]
        batch: List[Tuple[Operator, AtomicMessage]] = []
        skipped = 0
        for msg in act.operators:
            if msg.target_process != pid:
                raise ContractError(f"activity at {pid} contains element {msg.element} of {msg.target_process}")
            op = self.operator(msg.operator_id)
            if op.precheck is not None and not op.precheck(msg.element, msg.params):
                skipped += 1
                continue
            batch.append((op, msg))

        if skipped:
            self.stats.add(operators_skipped=skipped)
        if not batch:
            return []

        if self.policy.uses_atomics and all(op.atomic_form is not None for op, _ in batch):
            results = self._execute_atomics(batch, pid)
        else:
            def body(txn: TxnContext):
                octx = OperatorContext(self, pid, txn)
                out = []
                for op, msg in batch:
                    octx._next_operator()
                    value = op.body(octx, msg.element, msg.params)
                    out.append(OperatorResult(op.id, msg.element, value, octx._failed, msg.reply_to, msg.params))
                return out, octx.spawned

            outcome = proc.engine.execute(body, self.policy, self.stats)
            results, spawned = outcome.result
            charge("activity")
            for msg in spawned:
                self.spawn(msg, pid)

        failures = 0
        for (op, _), result in zip(batch, results):
            if result.failed:
                if not op.msg_class.may_fail:
                    raise ContractError(f"always-succeed operator {op.name} reported failure")
                failures += 1
            if result.reply_to is not None:
                self.processes[result.reply_to].replies.append(result)

        self.stats.add(activities=1, operators_executed=len(results), operator_failures=failures)
        return results

    def _execute_atomics(self, batch: List[Tuple[Operator, AtomicMessage]], pid: int) -> List[OperatorResult]:
        results = []
        for op, msg in batch:
            actx = AtomicContext(self, pid)
            value = op.atomic_form(actx, msg.element, msg.params)
            results.append(OperatorResult(op.id, msg.element, value, actx._failed, msg.reply_to, msg.params))
        return results

    def deliver_result(self, result: OperatorResult, spawner: int) -> None:
        """
        Invoke the failure handler of result's operator at spawner.

        Raises:
            ContractError: The operator has no handler
        """
        op = self.operator(result.operator_id)
        if op.handler is None:
            raise ContractError(f"operator {op.name} returned a result but has no failure handler")
        self.stats.add(replies_delivered=1)
        op.handler(self, result, spawner)

    def cancel(self) -> None:
        """Stop the run early; in-flight activities may still commit."""
        self._cancelled.set()

    @property
    def cancelled(self) -> bool:
        return self._cancelled.is_set()

    def run_to_quiescence(self) -> RunStats:
        """
        Drive supersteps until no operator, message or reply is pending.

        Returns:
            The run's RunStats

        Raises:
            WatchdogError: No commit progress within settings.watchdog_seconds,
                whether between supersteps or inside one
            ContractError: Spawned and executed operator counts disagree
        """
        self._started = True
        started = time.perf_counter()
        watchdog = ProgressWatchdog(
            self.settings.watchdog_seconds,
            self._progress,
            lambda: f"{self._pending()} operators pending",
        )
        workers = self.partition.N * self.config.threads

        pool = None if self.config.deterministic else ThreadPoolExecutor(max_workers=workers)
        try:
            while not self.cancelled:
                self._deliver_mail()
                self._run_handlers()
                if self._idle():
                    flush_meter = CostMeter(self.cost_model)
                    with metering(flush_meter):
                        flushed = self.network.flush_everyone()
                    self.stats.add(sim_time_ns=flush_meter.elapsed_ns)
                    if flushed:
                        continue
                    break
                self._superstep(pool, watchdog)
                watchdog.check()
        finally:
            if pool is not None:
                pool.shutdown(wait=True)
            self.stats.add(wall_time_s=time.perf_counter() - started)

        if not self.cancelled:
            done = self.stats.operators_executed + self.stats.operators_skipped
            if done != self.stats.operators_spawned:
                raise ContractError(
                    f"quiescent with {self.stats.operators_spawned} spawned but {done} executed"
                )
        return self.stats

    def _superstep(self, pool: Optional[ThreadPoolExecutor], watchdog: ProgressWatchdog) -> None:
        tasks = []
        for proc in self.processes:
            if proc.queue:
                tasks.extend(lambda p=proc: self._worker(p) for _ in range(self.config.threads))

        if pool is None:
            scheduler = StepScheduler(seed=self._schedule_rng.randrange(2 ** 32), watchdog=watchdog)
            elapsed = scheduler.run(tasks)
        else:
            elapsed = self._run_threaded(pool, tasks, watchdog)

        self.stats.add(supersteps=1, sim_time_ns=max(elapsed) if elapsed else 0.0)

    def _run_threaded(
        self, pool: ThreadPoolExecutor, tasks: List[Callable[[], float]], watchdog: ProgressWatchdog
    ) -> List[float]:
        abort = threading.Event()

        def abortable(task: Callable[[], float]) -> float:
            with abort_on(abort):
                return task()

        futures = [pool.submit(abortable, task) for task in tasks]
        try:
            for future in futures:
                while True:
                    try:
                        future.result(timeout=WATCHDOG_POLL_SECONDS)
                        break
                    except FutureTimeout:
                        watchdog.check()
        except WatchdogError:
            abort.set()
            wait(futures, timeout=ABORT_JOIN_SECONDS)
            raise
        return [f.result() for f in futures]

    def _worker(self, proc: SimProcess) -> float:
        meter = CostMeter(self.cost_model)
        with metering(meter):
            while not self.cancelled:
                with proc.queue_lock:
                    if not proc.queue:
                        break
                    act = coarsen(proc.queue, self.config.coarsen, self.selection)
                self.execute_activity(act, proc.pid)
        return meter.elapsed_ns

    def _deliver_mail(self) -> None:
        for proc in self.processes:
            for batch in self.network.receive(proc.pid):
                with proc.queue_lock:
                    proc.queue.extend(batch.messages)

    def _run_handlers(self) -> None:
        for proc in self.processes:
            while proc.replies and not self.cancelled:
                self.deliver_result(proc.replies.popleft(), proc.pid)

    def _idle(self) -> bool:
        return (
            all(not p.queue and not p.replies for p in self.processes)
            and self.network.in_flight() == 0
        )

    def _pending(self) -> int:
        return sum(len(p.queue) for p in self.processes) + self.network.in_flight() + self.network.buffered()

    def _progress(self) -> Tuple[int, ...]:
        s = self.stats
        return (s.commits, s.serializations, s.atomics, s.operators_skipped, s.replies_delivered)
