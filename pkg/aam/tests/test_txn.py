"""
Tests for the transaction engine: commit and rollback, retry policies,
capacity aborts, atomics, serializability and cost accounting.
"""

import itertools
from unittest.mock import patch

import pytest

from aam.core.cost import CostMeter, CostModel, metering
from aam.core.errors import ConfigError, ContractError
from aam.core.scheduler import StepScheduler, explore_schedules, wait_while, yield_point
from aam.core.stats import RunStats
from aam.core.txn import (
    POLICY_SPECS,
    AbortReason,
    CapacityMode,
    Cell,
    FaultInjector,
    SerializationDomain,
    TxnEngine,
    atomic_acc,
    atomic_cas,
    atomic_fao,
    fallback_lock,
    make_policy,
    txn_execute,
    txn_read,
    txn_write,
)


def _abort_identity(stats: RunStats) -> bool:
    return stats.total_aborts == stats.aborts_conflict + stats.aborts_capacity + stats.aborts_other


class TestCommitAndRollback:
    """Single-threaded transaction behaviour."""

    def test_commit_applies_writes(self, stats):
        """A committed body's writes become visible."""
        a, b = Cell(1), Cell(2)

        def body(ctx):
            txn_write(ctx, a, txn_read(ctx, a) + txn_read(ctx, b))
            return "done"

        outcome = txn_execute(body, make_policy("rtm"), stats, engine=TxnEngine())

        assert outcome.result == "done"
        assert not outcome.serialized
        assert a.load() == 3
        assert stats.commits == 1 and stats.total_aborts == 0

    def test_read_own_write(self, stats):
        """Reads inside a transaction see its own pending writes."""
        cell = Cell(0)

        def body(ctx):
            txn_write(ctx, cell, 5)
            return txn_read(ctx, cell)

        assert TxnEngine().execute(body, make_policy("rtm"), stats).result == 5

    def test_body_exception_rolls_back(self, stats):
        """A failing body leaves every cell pristine and propagates its error."""
        cell = Cell(10)

        def body(ctx):
            txn_write(ctx, cell, 99)
            raise KeyError("operator fault")

        with pytest.raises(KeyError):
            TxnEngine().execute(body, make_policy("rtm"), stats)

        assert cell.load() == 10
        assert cell.lock_owner is None
        assert cell.version == 0

    def test_aborted_attempt_leaves_state_pristine(self, stats):
        """Writes of an attempt that aborts are never published."""
        cell = Cell(0)
        seen = []

        def body(ctx):
            seen.append(txn_read(ctx, cell))
            txn_write(ctx, cell, len(seen))

        engine = TxnEngine(faults=FaultInjector(script=[True, True]))
        engine.execute(body, make_policy("bgq-short"), stats)

        # Every attempt started from the untouched value
        assert seen == [0, 0, 0]
        assert cell.load() == 3
        assert stats.aborts_other == 2

    def test_footprint_counts_distinct_cells(self, stats):
        """Reading and writing the same cell counts once against capacity."""
        cells = [Cell(0) for _ in range(64)]

        def body(ctx):
            for c in cells:
                txn_write(ctx, c, txn_read(ctx, c) + 1)
            return ctx.footprint

        outcome = TxnEngine().execute(body, make_policy("rtm"), stats)
        assert outcome.result == 64
        assert stats.aborts_capacity == 0


class TestPolicies:
    """Retry bounds and serialization triggers, driven by fault injection."""

    def test_hle_serializes_after_one_abort(self, stats):
        """HLE falls back to the lock after exactly one abort."""
        engine = TxnEngine(faults=FaultInjector(script=[True]))
        outcome = engine.execute(lambda ctx: None, make_policy("hle"), stats)

        assert outcome.serialized
        assert outcome.aborts == 1
        assert stats.aborts_other == 1
        assert stats.serializations == 1 and stats.commits == 0

    def test_bgq_serializes_after_ten_rollbacks(self, stats):
        """BG/Q auto-retry serializes after the tenth rollback."""
        engine = TxnEngine(faults=FaultInjector(script=[True] * 10))
        outcome = engine.execute(lambda ctx: None, make_policy("bgq-short"), stats)

        assert outcome.serialized
        assert stats.aborts_other == 10
        assert stats.serializations == 1

    def test_bgq_commits_on_tenth_attempt(self, stats):
        """Nine rollbacks still leave room for a speculative commit."""
        engine = TxnEngine(faults=FaultInjector(script=[True] * 9))
        outcome = engine.execute(lambda ctx: None, make_policy("bgq-long"), stats)

        assert not outcome.serialized
        assert outcome.aborts == 9
        assert stats.commits == 1

    def test_rtm_respects_retry_bound(self, stats):
        """RTM never exceeds its retry bound and backs off between retries."""
        engine = TxnEngine(faults=FaultInjector(probability=1.0))
        with patch("aam.core.txn.pause") as mock_pause:
            outcome = engine.execute(lambda ctx: None, make_policy("rtm"), stats)

        assert outcome.serialized
        assert stats.aborts_other == 8
        # One backoff between consecutive speculative attempts
        assert mock_pause.call_count == 7

    def test_locks_always_serialize(self, stats):
        """The lock baseline never runs speculatively."""
        outcome = TxnEngine().execute(lambda ctx: 7, make_policy("locks"), stats)

        assert outcome.serialized and outcome.result == 7
        assert stats.total_aborts == 0

    def test_serialized_commit_ignores_fault_injection(self, stats):
        """Serialized execution cannot fail with reason Other."""
        engine = TxnEngine(faults=FaultInjector(probability=1.0))
        outcome = engine.execute(lambda ctx: None, make_policy("hle"), stats)

        assert outcome.serialized
        assert stats.aborts_other == 1

    def test_make_policy(self, settings):
        """Policy specs map to capacity profiles and retry bounds."""
        assert make_policy("rtm", settings).capacity == 64
        assert make_policy("bgq-long", settings).capacity == 1024
        assert make_policy("bgq-long", settings).capacity_mode is CapacityMode.LONG
        assert make_policy("locks").capacity is None
        assert make_policy("atomics").uses_atomics
        assert make_policy(" HLE ").max_retries == 1
        assert set(POLICY_SPECS) == {"rtm", "hle", "bgq-short", "bgq-long", "atomics", "locks"}

    def test_unknown_policy(self):
        """Unknown specs are configuration errors."""
        with pytest.raises(ConfigError):
            make_policy("tsx")

    def test_fault_injector_validation(self):
        """Probabilities outside [0, 1] are rejected."""
        with pytest.raises(ConfigError):
            FaultInjector(probability=2.0)

    def test_fault_injector_script_then_probability(self):
        """The script is consumed first, then the probability applies."""
        injector = FaultInjector(probability=0.0, script=[True, False, True])

        assert [injector.should_fail() for _ in range(5)] == [True, False, True, False, False]
        assert injector.injected == 2


class TestCapacity:
    """Buffer overflow aborts."""

    def test_overflow_aborts_and_serializes(self, stats):
        """65 cells overflow the short profile on every attempt, then serialize."""
        cells = [Cell(0) for _ in range(65)]

        def body(ctx):
            for c in cells:
                txn_write(ctx, c, 1)

        outcome = TxnEngine().execute(body, make_policy("bgq-short"), stats)

        assert outcome.serialized
        assert stats.aborts_capacity == 10
        assert all(c.load() == 1 for c in cells)
        assert _abort_identity(stats)

    def test_long_mode_fits(self, stats):
        """The long-running profile holds the same footprint speculatively."""
        cells = [Cell(0) for _ in range(65)]

        def body(ctx):
            for c in cells:
                txn_write(ctx, c, 1)

        outcome = TxnEngine().execute(body, make_policy("bgq-long"), stats)

        assert not outcome.serialized
        assert stats.aborts_capacity == 0

    def test_overflow_iff_footprint_exceeds_capacity(self, settings):
        """Capacity aborts happen exactly when the footprint is above capacity."""
        small = settings.model_copy(update={"short_capacity": 4})
        for footprint in range(1, 8):
            stats = RunStats()
            cells = [Cell(0) for _ in range(footprint)]

            def body(ctx, cells=cells):
                for c in cells:
                    txn_read(ctx, c)

            TxnEngine(small).execute(body, make_policy("hle", small), stats)
            assert (stats.aborts_capacity > 0) == (footprint > 4)

    def test_raising_capacity_never_adds_overflows(self, settings):
        """Buffer overflow aborts never increase as the capacity grows."""
        footprints = [3, 8, 12, 20, 33, 40]
        overflows = []
        for capacity in (2, 4, 8, 16, 32, 64):
            tuned = settings.model_copy(update={"short_capacity": capacity})
            stats = RunStats()
            for footprint in footprints:
                cells = [Cell(0) for _ in range(footprint)]

                def body(ctx, cells=cells):
                    for c in cells:
                        txn_write(ctx, c, txn_read(ctx, c) + 1)

                TxnEngine(tuned).execute(body, make_policy("bgq-short", tuned), stats)
            overflows.append(stats.aborts_capacity)

        assert overflows == sorted(overflows, reverse=True)
        assert overflows[0] > 0 and overflows[-1] == 0


class TestAtomics:
    """Single-word atomics."""

    def test_cas(self):
        """CAS succeeds only on the expected value."""
        cell = Cell(0)
        assert atomic_cas(cell, 0, 1)
        assert not atomic_cas(cell, 0, 2)
        assert cell.load() == 1

    def test_fao_and_acc(self):
        """Fetch-and-op returns the previous value; accumulate supports sum, min and max."""
        cell = Cell(5)
        assert atomic_fao(cell, 3) == 5
        atomic_acc(cell, 2, "min")
        assert cell.load() == 2
        atomic_acc(cell, 9, "max")
        assert cell.load() == 9

    def test_unknown_op(self):
        """Unsupported accumulate operations are contract errors."""
        with pytest.raises(ContractError):
            atomic_acc(Cell(0), 1, "xor")

    def test_atomic_write_conflicts_with_reader(self, stats):
        """An atomic update between a transaction's read and write aborts it."""
        cell = Cell(0)
        attempts = []

        def body(ctx):
            value = txn_read(ctx, cell)
            if not attempts:
                atomic_acc(cell, 10)
            attempts.append(value)
            txn_write(ctx, cell, value + 1)

        TxnEngine().execute(body, make_policy("rtm"), stats)

        assert attempts == [0, 10]
        assert cell.load() == 11
        assert stats.aborts_conflict == 1


def _programs():
    """Four small read-modify-write programs over six cells."""
    def p0(get, put):
        put(0, get(0) + get(1))

    def p1(get, put):
        put(1, get(1) * 2 + 1)
        put(2, get(2) + 3)

    def p2(get, put):
        put(3, get(2) - get(0))
        put(4, get(4) + 1)

    def p3(get, put):
        put(5, get(3) + get(4) + get(5))
        put(0, get(0) + 7)

    return [p0, p1, p2, p3]


def _sequential_states(programs, initial):
    states = set()
    for order in itertools.permutations(programs):
        memory = dict(enumerate(initial))
        for program in order:
            program(memory.__getitem__, memory.__setitem__)
        states.add(tuple(memory[i] for i in range(len(initial))))
    return states


def _transactional_tasks(programs, cells, engine, policy, stats):
    """One task per program; engine may be a list giving each program its own node."""
    engines = engine if isinstance(engine, list) else [engine] * len(programs)

    def task_for(program, engine):
        def body(ctx):
            program(lambda i: txn_read(ctx, cells[i]), lambda i, v: txn_write(ctx, cells[i], v))

        return lambda: engine.execute(body, policy, stats)

    return [task_for(p, e) for p, e in zip(programs, engines)]


class TestSerializability:
    """Concurrent transactions behave like some sequential order."""

    def test_every_interleaving_of_two_transactions(self):
        """Exhaustive exploration of two conflicting transactions under HLE."""
        programs = _programs()[:2]
        initial = [1, 2, 3, 4, 5, 6]
        allowed = _sequential_states(programs, initial)
        finals = []

        def make_tasks():
            cells = [Cell(v) for v in initial]
            finals.append(cells)
            return _transactional_tasks(programs, cells, TxnEngine(), make_policy("hle"), RunStats())

        schedules = sum(1 for _ in explore_schedules(make_tasks, max_schedules=5000))

        assert schedules > 1
        for cells in finals:
            assert tuple(c.load() for c in cells) in allowed

    @pytest.mark.parametrize("policy", ["hle", "locks"])
    def test_every_interleaving_of_three_transactions_on_two_nodes(self, policy):
        """Bounded exhaustive exploration of three transactions split over two nodes."""
        programs = [_programs()[i] for i in (0, 1, 3)]
        initial = [1, 2, 3, 4, 5, 6]
        allowed = _sequential_states(programs, initial)
        finals = []

        def make_tasks():
            cells = [Cell(v) for v in initial]
            finals.append(cells)
            node0 = TxnEngine(domain=SerializationDomain(0))
            node1 = TxnEngine(domain=SerializationDomain(1))
            return _transactional_tasks(programs, cells, [node0, node1, node0], make_policy(policy), RunStats())

        schedules = sum(1 for _ in explore_schedules(make_tasks, max_schedules=1000))

        assert schedules > 1
        assert len(finals) == schedules
        for cells in finals:
            assert tuple(c.load() for c in cells) in allowed
            assert all(c.lock_owner is None for c in cells)
        assert not fallback_lock().held

    @pytest.mark.parametrize("policy", ["rtm", "hle", "bgq-short", "locks"])
    @pytest.mark.parametrize("seed", range(12))
    @pytest.mark.parametrize("nodes", [1, 2])
    def test_random_schedules_of_four_transactions(self, policy, seed, nodes):
        """Seeded schedules of four transactions over six cells stay serializable on one or two nodes."""
        programs = _programs()
        initial = [3, 1, 4, 1, 5, 9]
        cells = [Cell(v) for v in initial]
        stats = RunStats()
        engines = [TxnEngine(domain=SerializationDomain(i % nodes), seed=seed) for i in range(4)]

        with patch("aam.core.txn.pause"):
            StepScheduler(seed=seed).run(
                _transactional_tasks(programs, cells, engines, make_policy(policy), stats)
            )

        assert tuple(c.load() for c in cells) in _sequential_states(programs, initial)
        assert stats.commits + stats.serializations == 4
        assert _abort_identity(stats)
        assert all(c.lock_owner is None for c in cells)

    def test_contended_counter_on_real_threads(self):
        """Real threads incrementing one cell lose no update."""
        from concurrent.futures import ThreadPoolExecutor

        cell = Cell(0)
        stats = RunStats()
        engine = TxnEngine()
        policy = make_policy("rtm")

        def worker():
            for _ in range(200):
                engine.execute(lambda ctx: txn_write(ctx, cell, txn_read(ctx, cell) + 1), policy, stats)

        with ThreadPoolExecutor(max_workers=4) as pool:
            for f in [pool.submit(worker) for _ in range(4)]:
                f.result()

        assert cell.load() == 800
        assert stats.commits + stats.serializations == 800


class TestFallbackLock:
    """Serialized transactions of every node share one fallback lock."""

    def test_opposite_lock_order_on_two_nodes(self):
        """Two nodes writing a and b in opposite order both commit under every schedule."""
        finals = []

        def make_tasks():
            a, b = Cell(0), Cell(0)
            finals.append((a, b))
            policy, stats = make_policy("locks"), RunStats()
            node0 = TxnEngine(domain=SerializationDomain(0))
            node1 = TxnEngine(domain=SerializationDomain(1))

            def write_a_read_b(ctx):
                txn_write(ctx, a, 1)
                return txn_read(ctx, b)

            def write_b_read_a(ctx):
                txn_write(ctx, b, 1)
                return txn_read(ctx, a)

            return [
                lambda: node0.execute(write_a_read_b, policy, stats).result,
                lambda: node1.execute(write_b_read_a, policy, stats).result,
            ]

        outcomes = [results for _, results in explore_schedules(make_tasks, max_schedules=2000)]

        assert len(outcomes) > 1
        # The later transaction sees the earlier one's write
        assert all(sorted(results) == [0, 1] for results in outcomes)
        assert all((a.load(), b.load()) == (1, 1) for a, b in finals)
        assert not fallback_lock().held

    def test_seeded_run_stays_within_step_budget(self):
        """The opposite-order pair finishes well inside a small step budget."""
        a, b = Cell(0), Cell(0)
        policy, stats = make_policy("locks"), RunStats()
        node0 = TxnEngine(domain=SerializationDomain(0))
        node1 = TxnEngine(domain=SerializationDomain(1))

        StepScheduler(seed=None, max_steps=20_000).run([
            lambda: node0.execute(lambda ctx: (txn_write(ctx, a, 1), txn_read(ctx, b)), policy, stats),
            lambda: node1.execute(lambda ctx: (txn_write(ctx, b, 1), txn_read(ctx, a)), policy, stats),
        ])

        assert stats.serializations == 2

    def test_serialization_dooms_speculative_transactions_of_other_nodes(self, stats):
        """Taking the fallback lock on one node aborts a live transaction on another."""
        cell = Cell(0)
        node1 = TxnEngine(domain=SerializationDomain(1))
        attempts = []

        def speculative(ctx):
            attempts.append(txn_read(ctx, cell))
            if len(attempts) == 1:
                TxnEngine(domain=SerializationDomain(0)).execute(lambda inner: None, make_policy("locks"), stats)
            txn_write(ctx, cell, 5)

        node1.execute(speculative, make_policy("rtm"), stats)

        assert len(attempts) == 2
        assert stats.aborts_conflict == 1
        assert cell.load() == 5

    def test_atomics_wait_for_a_serialized_transaction(self):
        """An atomic issued while a serialized transaction runs lands after its commit."""
        runs = []

        def make_tasks():
            cell, stats, reads = Cell(0), RunStats(), []
            runs.append((cell, stats, reads))

            def body(ctx):
                reads.append(txn_read(ctx, cell))
                yield_point()
                txn_write(ctx, cell, reads[-1] + 1)

            def increment():
                wait_while(lambda: not reads)
                atomic_acc(cell, 10)

            engine = TxnEngine(domain=SerializationDomain(0))
            return [lambda: engine.execute(body, make_policy("locks"), stats), increment]

        schedules = sum(1 for _ in explore_schedules(make_tasks, max_schedules=2000))

        assert schedules > 1
        for cell, stats, reads in runs:
            assert reads == [0]
            assert stats.total_aborts == 0
            assert cell.load() == 11


class TestCostAccounting:
    """Simulated time charged by the engine."""

    def test_commit_cost(self, settings, stats):
        """A commit charges begin, one access per read or write, and commit."""
        cell = Cell(0)
        meter = CostMeter(CostModel(settings.cost))
        with metering(meter):
            TxnEngine(settings).execute(
                lambda ctx: txn_write(ctx, cell, txn_read(ctx, cell) + 1), make_policy("rtm"), stats
            )

        assert meter.elapsed_ns == 60 + 2 * 4 + 60

    def test_atomic_cost(self, settings):
        """Each atomic costs the configured per-atomic price."""
        meter = CostMeter(CostModel(settings.cost))
        with metering(meter):
            atomic_acc(Cell(0), 1)
            atomic_cas(Cell(0), 0, 1)

        assert meter.elapsed_ns == 40

    def test_abort_reason_values(self):
        """Abort reasons name the RunStats counters they feed."""
        stats = RunStats()
        for reason in AbortReason:
            stats.record_abort(reason)

        assert stats.aborts_conflict == stats.aborts_capacity == stats.aborts_other == 1
