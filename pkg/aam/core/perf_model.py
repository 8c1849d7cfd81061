"""
Linear performance model.

The time of an activity that modifies N vertices is modeled as A·N + B,
once for fine-grained atomics and once for transactions. Fitting both lines
by ordinary least squares tells where (if anywhere) transactions become the
cheaper mechanism.

Key functionality:
- CostSample / LinearFit / Crossing: the data types
- fit_linear: OLS fit with r²
- crossing_point: N* where the transactional line undercuts the atomics line
- read_samples_csv / write_samples_csv: mechanism,n_vertices,mean_time_ns files
"""

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Union

import numpy as np

from aam.core.errors import FitError, MalformedInputError

MECHANISMS = ("atomics", "htm")


@dataclass(frozen=True)
class CostSample:
    n_vertices: int
    mean_time: float
    mechanism: str

    def __post_init__(self):
        if self.n_vertices < 1:
            raise MalformedInputError(f"n_vertices must be >= 1, got {self.n_vertices}")
        if self.mean_time <= 0:
            raise MalformedInputError(f"mean_time must be > 0, got {self.mean_time}")
        if self.mechanism not in MECHANISMS:
            raise MalformedInputError(f"mechanism must be one of {MECHANISMS}, got {self.mechanism!r}")


@dataclass(frozen=True)
class LinearFit:
    """time = slope · N + intercept."""

    slope: float
    intercept: float
    r2: float

    def predict(self, n: float) -> float:
        return self.slope * n + self.intercept


@dataclass(frozen=True)
class Crossing:
    """Result of crossing_point: n_star is None when the lines do not cross as predicted."""

    n_star: Optional[float]
    reason: str = ""

    @property
    def exists(self) -> bool:
        return self.n_star is not None


def fit_linear(samples: Sequence[CostSample]) -> LinearFit:
    """
    Ordinary least squares over (n_vertices, mean_time).

    Raises:
        FitError: Fewer than two distinct n_vertices values
    """
    x = np.array([s.n_vertices for s in samples], dtype=np.float64)
    y = np.array([s.mean_time for s in samples], dtype=np.float64)
    if len(np.unique(x)) < 2:
        raise FitError("need at least two distinct n_vertices values")

    design = np.column_stack([x, np.ones_like(x)])
    (slope, intercept), *_ = np.linalg.lstsq(design, y, rcond=None)

    residual = y - (slope * x + intercept)
    ss_res = float(residual @ residual)
    ss_tot = float(((y - y.mean()) ** 2).sum())
    r2 = 1.0 if ss_tot == 0 else max(0.0, 1.0 - ss_res / ss_tot)
    return LinearFit(slope=float(slope), intercept=float(intercept), r2=r2)


def crossing_point(atomics: LinearFit, htm: LinearFit) -> Crossing:
    """
    N* = (B_htm − B_at) / (A_at − A_htm) when A_at > A_htm and B_htm > B_at.

    Returns:
        Crossing with n_star set, or with a reason explaining why not
    """
    if atomics.slope <= htm.slope:
        return Crossing(None, "htm slope is not below the atomics slope")
    if htm.intercept <= atomics.intercept:
        return Crossing(None, "htm intercept is not above the atomics intercept")
    n_star = (htm.intercept - atomics.intercept) / (atomics.slope - htm.slope)
    return Crossing(n_star, "htm cheaper for N > n_star")


def split_by_mechanism(samples: Iterable[CostSample]) -> Dict[str, List[CostSample]]:
    grouped: Dict[str, List[CostSample]] = {m: [] for m in MECHANISMS}
    for s in samples:
        grouped[s.mechanism].append(s)
    return grouped


def read_samples_csv(path: Union[str, Path]) -> List[CostSample]:
    """
    Read a mechanism,n_vertices,mean_time_ns CSV.

    Raises:
        MalformedInputError: Missing columns or unparsable values
    """
    samples = []
    with open(path, newline="") as f:
        reader = csv.DictReader(f)
        required = {"mechanism", "n_vertices", "mean_time_ns"}
        if reader.fieldnames is None or not required <= set(reader.fieldnames):
            raise MalformedInputError(f"CSV must have columns {sorted(required)}")
        for line_number, row in enumerate(reader, 2):
            try:
                samples.append(CostSample(
                    n_vertices=int(row["n_vertices"]),
                    mean_time=float(row["mean_time_ns"]),
                    mechanism=row["mechanism"].strip(),
                ))
            except ValueError as e:
                raise MalformedInputError(f"line {line_number}: {e}") from None
    return samples


def write_samples_csv(samples: Iterable[CostSample], path: Union[str, Path]) -> None:
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["mechanism", "n_vertices", "mean_time_ns"])
        for s in samples:
            writer.writerow([s.mechanism, s.n_vertices, s.mean_time])
