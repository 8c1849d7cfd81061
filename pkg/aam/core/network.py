"""
Simulated distributed-memory machine.

Processes exchange atomic active messages through in-process mailboxes.
Messages bound for the same peer are coalesced into batches of up to C
before they are sent; each batch is one network message and is charged the
synthetic per-message, per-element and latency costs.

Key functionality:
- SimProcess: Mailbox, coalescing buffers and local operator queue of one node
- SimNetwork.send_aam: Buffer a message, sending a batch when C are pending
- SimNetwork.flush_all: Send every non-empty buffer of a process
- SimNetwork.receive: Drain a mailbox (per-pair FIFO)
"""

import itertools
import threading
from collections import defaultdict, deque
from typing import Deque, Dict, Iterator, List, Optional

from aam.core.cost import charge
from aam.core.errors import ContractError
from aam.core.graph import Partition
from aam.core.messages import AtomicMessage, MessageBatch, OperatorResult
from aam.core.scheduler import yield_point
from aam.core.stats import RunStats
from aam.logging import get_logger

logger = get_logger(__name__)


class SimProcess:
    """One simulated node."""

    def __init__(self, pid: int, local_vertices: range):
        self.pid = pid
        self.local_vertices = local_vertices
        self.mailbox: Deque[MessageBatch] = deque()
        self.coalesce_buffers: Dict[int, List[AtomicMessage]] = defaultdict(list)
        self.queue: Deque[AtomicMessage] = deque()
        self.replies: Deque[OperatorResult] = deque()
        self.queue_lock = threading.Lock()
        self.buffer_lock = threading.Lock()
        self.mailbox_lock = threading.Lock()
        self.engine = None

    def __repr__(self) -> str:
        return f"SimProcess(pid={self.pid}, vertices={self.local_vertices})"


class SimNetwork:
    """
    In-process network between the processes of a partition.

    Args:
        partition: Vertex ownership
        coalesce: Default coalescing factor C (1 sends immediately)
        stats: Counters for messages and batches
    """

    def __init__(self, partition: Partition, coalesce: int = 1, stats: Optional[RunStats] = None):
        if coalesce < 1:
            raise ContractError(f"coalescing factor must be >= 1, got {coalesce}")
        self.partition = partition
        self.coalesce = coalesce
        self.stats = stats if stats is not None else RunStats()
        self.processes = [SimProcess(p, partition.local_vertices(p)) for p in range(partition.N)]
        self._seq: Dict[tuple, Iterator[int]] = defaultdict(itertools.count)
        self._received_seq: Dict[tuple, int] = {}
        self._seq_lock = threading.Lock()

    def send_aam(self, src: int, msg: AtomicMessage, C: Optional[int] = None) -> None:
        """
        Queue msg for its target; a full buffer is sent as one batch.

        Raises:
            ContractError: msg targets the sending process
        """
        if msg.target_process == src:
            raise ContractError(f"process {src} cannot send to itself")
        C = C or self.coalesce
        proc = self.processes[src]
        with proc.buffer_lock:
            buffer = proc.coalesce_buffers[msg.target_process]
            buffer.append(msg)
            if len(buffer) >= C:
                # Sent under the buffer lock to keep per-pair order
                self._transmit(src, msg.target_process, list(buffer))
                buffer.clear()
        yield_point()

    def flush_all(self, src: int) -> int:
        """Send every non-empty coalescing buffer of src. Returns batches sent."""
        proc = self.processes[src]
        sent = 0
        with proc.buffer_lock:
            for dst in sorted(proc.coalesce_buffers):
                buffer = proc.coalesce_buffers[dst]
                if buffer:
                    self._transmit(src, dst, list(buffer))
                    buffer.clear()
                    sent += 1
        return sent

    def flush_everyone(self) -> int:
        return sum(self.flush_all(p.pid) for p in self.processes)

    def receive(self, pid: int) -> List[MessageBatch]:
        """Drain pid's mailbox, checking per-pair FIFO order."""
        proc = self.processes[pid]
        with proc.mailbox_lock:
            batches = list(proc.mailbox)
            proc.mailbox.clear()
        with self._seq_lock:
            for batch in batches:
                key = (batch.src, batch.dst)
                last = self._received_seq.get(key, -1)
                if batch.seq != last + 1:
                    raise ContractError(f"out-of-order batch {batch.seq} after {last} on {key}")
                self._received_seq[key] = batch.seq
        return batches

    def buffered(self) -> int:
        """Messages still sitting in coalescing buffers."""
        total = 0
        for proc in self.processes:
            with proc.buffer_lock:
                total += sum(len(b) for b in proc.coalesce_buffers.values())
        return total

    def in_flight(self) -> int:
        """Messages sent but not yet received."""
        total = 0
        for proc in self.processes:
            with proc.mailbox_lock:
                total += sum(len(b) for b in proc.mailbox)
        return total

    def _transmit(self, src: int, dst: int, messages: List[AtomicMessage]) -> None:
        with self._seq_lock:
            seq = next(self._seq[(src, dst)])
        batch = MessageBatch(src=src, dst=dst, seq=seq, messages=tuple(messages))
        target = self.processes[dst]
        with target.mailbox_lock:
            target.mailbox.append(batch)
        charge("message")
        charge("element", len(messages))
        charge("latency")
        self.stats.add(messages_sent=len(messages), batches_sent=1)
        logger.debug("batch %d %d->%d (%d messages)", seq, src, dst, len(messages))
