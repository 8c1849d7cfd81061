"""
Message types for atomic active messages.

A message names an operator, the element it targets and its arguments;
its class fixes whether a result flows back to the spawner (FF / FR) and
whether operators may fail at the algorithm level (AS / MF).
"""

from dataclasses import dataclass, field
from enum import Enum
from typing import Any, List, Optional, Tuple

from aam.core.errors import ContractError


class DataFlow(Enum):
    FIRE_AND_FORGET = "FF"
    FIRE_AND_RETURN = "FR"


class CommitMode(Enum):
    ALWAYS_SUCCEED = "AS"
    MAY_FAIL = "MF"


@dataclass(frozen=True)
class MessageClass:
    """One of FF&AS, FF&MF, FR&AS, FR&MF."""

    data_flow: DataFlow
    commit_mode: CommitMode

    @property
    def returns(self) -> bool:
        return self.data_flow is DataFlow.FIRE_AND_RETURN

    @property
    def may_fail(self) -> bool:
        return self.commit_mode is CommitMode.MAY_FAIL

    def __str__(self) -> str:
        return f"{self.data_flow.value}&{self.commit_mode.value}"


FF_AS = MessageClass(DataFlow.FIRE_AND_FORGET, CommitMode.ALWAYS_SUCCEED)
FF_MF = MessageClass(DataFlow.FIRE_AND_FORGET, CommitMode.MAY_FAIL)
FR_AS = MessageClass(DataFlow.FIRE_AND_RETURN, CommitMode.ALWAYS_SUCCEED)
FR_MF = MessageClass(DataFlow.FIRE_AND_RETURN, CommitMode.MAY_FAIL)


@dataclass(frozen=True)
class AtomicMessage:
    """
    An operator invocation addressed to the owner of its element.

    params must be immutable (a tuple of plain values) so messages can cross
    threads without shared mutable aliasing.
    """

    msg_class: MessageClass
    target_process: int
    operator_id: int
    element: int
    params: Tuple[Any, ...] = ()
    reply_to: Optional[int] = None

    def __post_init__(self):
        if self.msg_class.returns and self.reply_to is None:
            raise ContractError("fire-and-return message requires reply_to")
        if not self.msg_class.returns and self.reply_to is not None:
            raise ContractError("fire-and-forget message must not carry reply_to")
        if not isinstance(self.params, tuple):
            raise ContractError("message params must be a tuple")


@dataclass
class OperatorResult:
    """Outcome of one operator application inside a committed activity."""

    operator_id: int
    element: int
    value: Any = None
    failed: bool = False
    reply_to: Optional[int] = None
    params: Tuple[Any, ...] = ()


@dataclass
class Activity:
    """Up to M operator applications executed as one transaction."""

    operators: List[AtomicMessage] = field(default_factory=list)
    M: int = 1

    def __len__(self) -> int:
        return len(self.operators)


@dataclass(frozen=True)
class MessageBatch:
    """One network message: coalesced AAMs from src to dst, in send order."""

    src: int
    dst: int
    seq: int
    messages: Tuple[AtomicMessage, ...]

    def __len__(self) -> int:
        return len(self.messages)
