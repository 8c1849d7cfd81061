"""
Tests for the simulated network and the message types.
"""

import pytest

from aam.core.cost import CostMeter, CostModel, metering
from aam.core.errors import ContractError
from aam.core.graph import partition_1d
from aam.core.messages import FF_AS, FF_MF, FR_AS, FR_MF, AtomicMessage, MessageBatch
from aam.core.network import SimNetwork
from aam.utils.config import CostSettings


def _msg(target, element, params=()):
    return AtomicMessage(FF_AS, target_process=target, operator_id=0, element=element, params=params)


@pytest.fixture
def network():
    """Two processes owning vertices 0-7 and 8-15, coalescing three at a time."""
    return SimNetwork(partition_1d(16, 2), coalesce=3)


def test_coalescing_batches(network):
    """Full buffers go out as batches; the rest waits for a flush."""
    for i in range(7):
        network.send_aam(0, _msg(1, 8 + i))

    assert network.stats.batches_sent == 2
    assert network.buffered() == 1
    assert network.in_flight() == 6

    assert network.flush_all(0) == 1
    batches = network.receive(1)

    assert [b.seq for b in batches] == [0, 1, 2]
    assert [len(b) for b in batches] == [3, 3, 1]
    # Send order survives coalescing
    assert [m.element for b in batches for m in b.messages] == list(range(8, 15))
    assert network.stats.messages_sent == 7
    assert network.in_flight() == 0


def test_explicit_coalescing_factor(network):
    """A per-call C overrides the network default."""
    network.send_aam(0, _msg(1, 9), C=1)
    assert network.stats.batches_sent == 1


def test_flush_of_empty_buffers(network):
    """Flushing with nothing buffered sends nothing."""
    assert network.flush_everyone() == 0
    assert network.receive(0) == []


def test_self_send_rejected(network):
    """A process cannot message itself over the network."""
    with pytest.raises(ContractError):
        network.send_aam(0, _msg(0, 1))


def test_out_of_order_batches_detected(network):
    """Per-pair FIFO violations are contract errors."""
    proc = network.processes[1]
    proc.mailbox.append(MessageBatch(src=0, dst=1, seq=1, messages=(_msg(1, 8),)))
    proc.mailbox.append(MessageBatch(src=0, dst=1, seq=0, messages=(_msg(1, 9),)))

    with pytest.raises(ContractError):
        network.receive(1)


def test_bad_coalescing_factor():
    """C must be at least one."""
    with pytest.raises(ContractError):
        SimNetwork(partition_1d(4, 2), coalesce=0)


def test_batch_cost():
    """A batch is charged once per message plus once per element plus latency."""
    network = SimNetwork(partition_1d(8, 2), coalesce=4)
    meter = CostMeter(CostModel(CostSettings(message_ns=100.0, element_ns=10.0, latency_ns=5.0)))

    with metering(meter):
        for i in range(4):
            network.send_aam(0, _msg(1, 4 + i))

    assert meter.elapsed_ns == 100 + 4 * 10 + 5


class TestAtomicMessage:
    """Message class contracts."""

    def test_class_names(self):
        """Classes print as data-flow & commit-mode."""
        assert [str(c) for c in (FF_AS, FF_MF, FR_AS, FR_MF)] == ["FF&AS", "FF&MF", "FR&AS", "FR&MF"]
        assert FR_MF.returns and FR_MF.may_fail
        assert not FF_AS.returns and not FF_AS.may_fail

    def test_fire_and_return_needs_reply_to(self):
        """FR messages must say where the result goes."""
        with pytest.raises(ContractError):
            AtomicMessage(FR_AS, target_process=0, operator_id=0, element=0)
        assert AtomicMessage(FR_AS, target_process=0, operator_id=0, element=0, reply_to=1).reply_to == 1

    def test_fire_and_forget_has_no_reply_to(self):
        """FF messages must not carry a reply address."""
        with pytest.raises(ContractError):
            AtomicMessage(FF_MF, target_process=0, operator_id=0, element=0, reply_to=0)

    def test_params_must_be_a_tuple(self):
        """Mutable params are rejected."""
        with pytest.raises(ContractError):
            AtomicMessage(FF_AS, target_process=0, operator_id=0, element=0, params=[1])
