"""
Deterministic cooperative step scheduler.

Tasks run on real threads but only one is runnable at a time: control passes
between them at yield points placed inside the transaction engine, the
ownership protocol and the network. The next task is picked by a seeded RNG
or by an explicit choice prefix, so every interleaving is replayable.

Key functionality:
- StepScheduler: Run a set of callables under a single-runner discipline
- yield_point: Hand control back to the scheduler (no-op outside it)
- pause / wait_while: Backoff and polling that stay deterministic under the scheduler
- explore_schedules: Depth-first enumeration of all interleavings
- ProgressWatchdog / abort_on: Give up on tasks that stop making progress
"""

import random
import threading
import time
from contextlib import contextmanager
from dataclasses import dataclass, field
from typing import Any, Callable, Hashable, Iterator, List, Optional, Sequence, Tuple

from aam.core.errors import WatchdogError
from aam.logging import get_logger

logger = get_logger(__name__)

_local = threading.local()

# Seconds to wait for aborted tasks to unwind
ABORT_JOIN_SECONDS = 5.0


class TaskAborted(BaseException):
    """Unwinds a task that its scheduler or watchdog gave up on."""


@dataclass
class _Task:
    index: int
    fn: Callable[[], Any]
    gate: threading.Semaphore = field(default_factory=lambda: threading.Semaphore(0))
    done: bool = False
    result: Any = None
    error: Optional[BaseException] = None
    thread: Optional[threading.Thread] = None


def current_scheduler() -> Optional["StepScheduler"]:
    """The scheduler driving the calling thread, if any."""
    return getattr(_local, "scheduler", None)


@contextmanager
def abort_on(event: threading.Event) -> Iterator[None]:
    """Make the calling thread's yield points raise TaskAborted once event is set."""
    previous = getattr(_local, "abort", None)
    _local.abort = event
    try:
        yield
    finally:
        _local.abort = previous


def yield_point() -> None:
    """Let the scheduler switch tasks. Outside a scheduler this only checks for an abort."""
    abort = getattr(_local, "abort", None)
    if abort is not None and abort.is_set():
        raise TaskAborted()
    scheduler = getattr(_local, "scheduler", None)
    if scheduler is not None:
        scheduler._yield(_local.task)


def pause(seconds: float) -> None:
    """Back off for a while; under the scheduler this is a single yield."""
    yield_point()
    if current_scheduler() is None and seconds > 0:
        time.sleep(seconds)


def wait_while(predicate: Callable[[], bool], poll_seconds: float = 0.0) -> None:
    """Spin until predicate() is false, yielding or sleeping between polls."""
    while predicate():
        yield_point()
        if current_scheduler() is None:
            time.sleep(poll_seconds)


class ProgressWatchdog:
    """
    Raises WatchdogError once progress() has not changed for seconds of wall time.

    Args:
        seconds: Budget without progress
        progress: Returns a comparable snapshot of the progress counters
        describe: Extra context appended to the error message
    """

    def __init__(
        self,
        seconds: float,
        progress: Callable[[], Hashable],
        describe: Optional[Callable[[], str]] = None,
    ):
        self.seconds = seconds
        self.progress = progress
        self.describe = describe
        self._last = progress()
        self._since = time.perf_counter()

    def check(self) -> None:
        now = time.perf_counter()
        current = self.progress()
        if current != self._last:
            self._last, self._since = current, now
        elif now - self._since > self.seconds:
            detail = f" ({self.describe()})" if self.describe is not None else ""
            raise WatchdogError(f"no commit progress for {self.seconds:.1f}s{detail}")


class StepScheduler:
    """
    Runs tasks one at a time, switching only at yield points.

    With a seed the next task is drawn at random among runnable ones. With
    seed=None the choice prefix is followed and round-robin order is used
    after it. Either way the run is recorded in trace (chosen option index
    per step) and choice_counts (options available per step).

    A watchdog, when given, is checked every watchdog_interval steps. When it
    fires, or max_steps is exceeded, every unfinished task is unwound with
    TaskAborted before the WatchdogError propagates.
    """

    def __init__(
        self,
        seed: Optional[int] = 0,
        prefix: Optional[Sequence[int]] = None,
        max_steps: int = 10_000_000,
        watchdog: Optional[ProgressWatchdog] = None,
        watchdog_interval: int = 64,
    ):
        self.seed = seed
        self.rng = random.Random(seed) if seed is not None else None
        self.prefix = list(prefix or [])
        self.max_steps = max_steps
        self.watchdog = watchdog
        self.watchdog_interval = watchdog_interval
        self.trace: List[int] = []
        self.choice_counts: List[int] = []
        self._control = threading.Semaphore(0)
        self._last = -1
        self._aborting = False

    def run(self, fns: Sequence[Callable[[], Any]]) -> List[Any]:
        """
        Run every callable to completion under the scheduler.

        Args:
            fns: Task bodies

        Returns:
            Task results in input order

        Raises:
            The first task exception (by task index) after all tasks finish
            WatchdogError: More than max_steps switches were made, or the
                watchdog saw no progress
        """
        tasks = [_Task(index=i, fn=fn) for i, fn in enumerate(fns)]
        for task in tasks:
            task.thread = threading.Thread(
                target=self._body, args=(task,), name=f"step-task-{task.index}", daemon=True
            )
            task.thread.start()

        steps = 0
        while True:
            runnable = [t for t in tasks if not t.done]
            if not runnable:
                break
            steps += 1
            try:
                if steps > self.max_steps:
                    raise WatchdogError(f"step scheduler exceeded {self.max_steps} steps")
                if self.watchdog is not None and steps % self.watchdog_interval == 0:
                    self.watchdog.check()
            except WatchdogError:
                self._abort(tasks)
                raise
            task = self._choose(runnable)
            task.gate.release()
            self._control.acquire()

        for task in tasks:
            task.thread.join()

        for task in tasks:
            if task.error is not None:
                raise task.error
        return [t.result for t in tasks]

    def _abort(self, tasks: List[_Task]) -> None:
        self._aborting = True
        for task in tasks:
            if not task.done:
                task.gate.release()
        for task in tasks:
            task.thread.join(ABORT_JOIN_SECONDS)
            if task.thread.is_alive():
                logger.warning("step task %d did not unwind after abort", task.index)

    def _choose(self, runnable: List[_Task]) -> _Task:
        # Options are rotated to start after the last runner, so option 0 is round-robin
        options = sorted(runnable, key=lambda t: (t.index <= self._last, t.index))
        step = len(self.trace)
        if step < len(self.prefix):
            choice = min(self.prefix[step], len(options) - 1)
        elif self.rng is not None:
            choice = self.rng.randrange(len(options))
        else:
            choice = 0
        self.trace.append(choice)
        self.choice_counts.append(len(options))
        chosen = options[choice]
        self._last = chosen.index
        return chosen

    def _body(self, task: _Task) -> None:
        _local.scheduler = self
        _local.task = task
        task.gate.acquire()
        try:
            if self._aborting:
                raise TaskAborted()
            task.result = task.fn()
        except BaseException as e:
            task.error = e
        finally:
            task.done = True
            _local.scheduler = None
            _local.task = None
            self._control.release()

    def _yield(self, task: _Task) -> None:
        if self._aborting:
            raise TaskAborted()
        self._control.release()
        task.gate.acquire()
        if self._aborting:
            raise TaskAborted()


def explore_schedules(
    make_tasks: Callable[[], Sequence[Callable[[], Any]]],
    max_schedules: int = 100_000,
) -> Iterator[Tuple[List[int], List[Any]]]:
    """
    Enumerate every interleaving of a small task set.

    make_tasks is called once per schedule and must build fresh state.
    Each yielded item is (trace, results) for one complete schedule.
    """
    stack: List[List[int]] = [[]]
    explored = 0
    while stack and explored < max_schedules:
        prefix = stack.pop()
        scheduler = StepScheduler(seed=None, prefix=prefix)
        results = scheduler.run(make_tasks())
        explored += 1
        trace, counts = scheduler.trace, scheduler.choice_counts
        for i in range(len(trace) - 1, len(prefix) - 1, -1):
            for alternative in range(counts[i] - 1, trace[i], -1):
                stack.append(trace[:i] + [alternative])
        yield trace, results

    if stack:
        logger.warning("schedule exploration stopped after %d schedules", explored)
