"""
Validated configuration models.

RunConfig parameterizes one runtime (M, C, T, N, policy, ...); BenchConfig one
benchmark invocation. Both are pydantic models so that invalid values fail
early with a readable message; the CLI maps such failures to exit code 2.
"""

from typing import List, Literal, Optional

from pydantic import BaseModel, Field, field_validator

from aam.core.txn import POLICY_SPECS

BENCHMARKS = (
    "single-vertex-cas",
    "single-vertex-acc",
    "coarsen-sweep",
    "thread-sweep",
    "coalesce-sweep",
    "distributed-scenario",
    "pr-scaling",
    "algorithm-run",
)


def _check_policy(value: str) -> str:
    value = value.strip().lower()
    if value not in POLICY_SPECS:
        raise ValueError(f"unknown policy '{value}' (expected one of {', '.join(POLICY_SPECS)})")
    return value


class RunConfig(BaseModel):
    """Knobs of one runtime instance."""

    coarsen: int = Field(1, ge=1, description="Coarsening factor M")
    coalesce: int = Field(1, ge=1, description="Coalescing factor C")
    threads: int = Field(1, ge=1, description="Worker threads per process T")
    procs: int = Field(1, ge=1, description="Simulated processes N")
    policy: str = "rtm"
    seed: int = 0
    deterministic: bool = False
    selection: Literal["fifo", "sorted"] = "fifo"
    visited_check: bool = True
    fault_probability: float = Field(0.0, ge=0.0, le=1.0)

    @field_validator("policy")
    @classmethod
    def _policy_known(cls, value: str) -> str:
        return _check_policy(value)


class BenchConfig(BaseModel):
    """One benchmark invocation."""

    benchmark: Literal[
        "single-vertex-cas",
        "single-vertex-acc",
        "coarsen-sweep",
        "thread-sweep",
        "coalesce-sweep",
        "distributed-scenario",
        "pr-scaling",
        "algorithm-run",
    ]
    graph: str = "kron:10,16"
    m_values: List[int] = Field(default_factory=lambda: list(range(1, 321, 16)))
    c_values: List[int] = Field(default_factory=lambda: [1, 2, 4, 8, 16, 32, 64])
    t_values: List[int] = Field(default_factory=lambda: [1, 2, 4, 8])
    axis: Literal["procs", "threads", "vertices"] = "procs"
    axis_values: List[int] = Field(default_factory=lambda: [1, 2, 4, 8])
    vertices_per_process: int = Field(256, ge=1)
    edge_probability: float = Field(0.005, gt=0.0, le=1.0)
    threads: int = Field(4, ge=1)
    procs: int = Field(2, ge=1)
    policy: str = "rtm"
    seed: int = 0
    repetitions: Optional[int] = Field(None, ge=1)
    contention: Literal[10, 100] = 10
    scenario: Literal["o1", "o2", "o3", "o4"] = "o1"
    deterministic: bool = True
    fan_in: bool = False
    ops_per_process: int = Field(256, ge=1)
    algorithm: Literal["bfs", "pr", "mst", "st", "color"] = "bfs"

    @field_validator("policy")
    @classmethod
    def _policy_known(cls, value: str) -> str:
        return _check_policy(value)

    @field_validator("m_values", "c_values", "t_values", "axis_values")
    @classmethod
    def _range_valid(cls, values: List[int]) -> List[int]:
        if not values:
            raise ValueError("range must not be empty")
        if any(v < 1 for v in values):
            raise ValueError("range values must be >= 1")
        return values

    def reps(self, default: int) -> int:
        return self.repetitions if self.repetitions is not None else default
