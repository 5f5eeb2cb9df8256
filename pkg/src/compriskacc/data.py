"""Observed competing-risks data: records, validated samples, smoothing specs."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import (
    DataError,
    EmptySample,
    InvalidKernelSpec,
    InvalidStatusCode,
    NoEventsOfInterest,
    NonFiniteValue,
)

KERNELS = ("epanechnikov", "gaussian", "uniform")


@dataclass(frozen=True)
class SubjectRecord:
    """One subject: observed time, status code (0 = censored) and risk score."""

    time: float
    status: int
    score: float


class CompetingRiskSample:
    """Validated, time-sorted competing-risks sample.

    Arrays are stored read-only; at tied times event records precede
    censored records.

    Parameters
    ----------
    time, status, score : array_like
        Observed times, status codes in ``{0, ..., n_causes}`` and risk
        scores, already validated and sorted. Use :func:`validate_sample`
        or :meth:`from_arrays` instead of calling this directly.
    n_causes : int
    cause_of_interest : int
    raw_marker : bool
        Scores are an arbitrary marker rather than probabilities.
    """

    __slots__ = ("time", "status", "score", "n_causes", "cause_of_interest", "raw_marker")

    def __init__(self, time, status, score, n_causes, cause_of_interest=1, raw_marker=False):
        self.time = _frozen(np.asarray(time, dtype=float))
        self.status = _frozen(np.asarray(status, dtype=np.int64))
        self.score = _frozen(np.asarray(score, dtype=float))
        self.n_causes = int(n_causes)
        self.cause_of_interest = int(cause_of_interest)
        self.raw_marker = bool(raw_marker)

    @classmethod
    def from_arrays(cls, time, status, score, n_causes=2, cause_of_interest=1, raw_marker=False):
        """Validate and sort raw arrays."""
        time = np.asarray(time, dtype=float).ravel()
        status_raw = np.asarray(status).ravel()
        score = np.asarray(score, dtype=float).ravel()
        if time.size == 0:
            raise EmptySample("sample has no records")
        if not (time.size == status_raw.size == score.size):
            raise DataError("time, status and score must have equal length")
        if not np.all(np.isfinite(time)) or not np.all(np.isfinite(score)):
            bad = np.flatnonzero(~(np.isfinite(time) & np.isfinite(score)))[0]
            raise NonFiniteValue(f"non-finite time or score at record {bad}")
        if np.any(time < 0):
            raise DataError(f"negative observed time at record {np.flatnonzero(time < 0)[0]}")
        status = status_raw.astype(np.int64)
        if not np.array_equal(status, status_raw):
            raise InvalidStatusCode("status codes must be integers")
        n_causes = int(n_causes)
        if n_causes < 2:
            raise InvalidStatusCode(f"n_causes must be >= 2, got {n_causes}")
        bad = (status < 0) | (status > n_causes)
        if bad.any():
            i = np.flatnonzero(bad)[0]
            raise InvalidStatusCode(f"status {status[i]} at record {i} outside 0..{n_causes}")
        if not 1 <= cause_of_interest <= n_causes:
            raise InvalidStatusCode(f"cause_of_interest {cause_of_interest} outside 1..{n_causes}")
        if not np.any(status == cause_of_interest):
            raise NoEventsOfInterest(f"no records with status {cause_of_interest}")
        if not raw_marker and (np.any(score < 0) or np.any(score > 1)):
            raise DataError("scores outside [0, 1]; pass raw_marker=True for an arbitrary marker")
        # events before censorings at tied times
        order = np.lexsort((status == 0, time))
        return cls(time[order], status[order], score[order], n_causes, cause_of_interest, raw_marker)

    @property
    def n(self) -> int:
        return self.time.size

    def __len__(self) -> int:
        return self.time.size

    @property
    def records(self) -> list[SubjectRecord]:
        return [
            SubjectRecord(float(t), int(s), float(u))
            for t, s, u in zip(self.time, self.status, self.score)
        ]

    def subset(self, index) -> "CompetingRiskSample":
        """Re-validated sample made of the rows in ``index`` (repeats allowed)."""
        index = np.asarray(index)
        return CompetingRiskSample.from_arrays(
            self.time[index],
            self.status[index],
            self.score[index],
            self.n_causes,
            self.cause_of_interest,
            self.raw_marker,
        )

    def __eq__(self, other):
        if not isinstance(other, CompetingRiskSample):
            return NotImplemented
        return (
            self.n_causes == other.n_causes
            and self.cause_of_interest == other.cause_of_interest
            and self.raw_marker == other.raw_marker
            and np.array_equal(self.time, other.time)
            and np.array_equal(self.status, other.status)
            and np.array_equal(self.score, other.score)
        )

    __hash__ = None

    def __repr__(self):
        return (
            f"CompetingRiskSample(n={self.n}, n_causes={self.n_causes}, "
            f"cause_of_interest={self.cause_of_interest}, raw_marker={self.raw_marker})"
        )


def _frozen(a: np.ndarray) -> np.ndarray:
    a = a.copy()
    a.flags.writeable = False
    return a


def validate_sample(
    records: Iterable[SubjectRecord | Sequence],
    n_causes: int = 2,
    cause_of_interest: int = 1,
    raw_marker: bool = False,
) -> CompetingRiskSample:
    """Validate records and return them as a time-sorted sample.

    Records may be :class:`SubjectRecord` instances or ``(time, status,
    score)`` tuples. A :class:`CompetingRiskSample` is accepted too and
    re-validated, which reproduces it unchanged.
    """
    if isinstance(records, CompetingRiskSample):
        s = records
        return CompetingRiskSample.from_arrays(
            s.time, s.status, s.score, s.n_causes, s.cause_of_interest, s.raw_marker
        )
    rows = [(r.time, r.status, r.score) if isinstance(r, SubjectRecord) else tuple(r) for r in records]
    if not rows:
        raise EmptySample("sample has no records")
    for i, row in enumerate(rows):
        if len(row) != 3:
            raise DataError(f"record {i} must have 3 fields (time, status, score)")
    time, status, score = (np.array(col, dtype=object) for col in zip(*rows))
    try:
        time = time.astype(float)
        score = score.astype(float)
    except (TypeError, ValueError) as exc:
        raise NonFiniteValue(f"non-numeric time or score: {exc}") from None
    status_f = status.astype(float)
    if not np.all(np.isfinite(status_f)) or np.any(status_f != np.round(status_f)):
        raise InvalidStatusCode("status codes must be integers")
    return CompetingRiskSample.from_arrays(
        time, status_f.astype(np.int64), score, n_causes, cause_of_interest, raw_marker
    )


def check_horizon(tau: float, sample: CompetingRiskSample | None = None) -> float:
    """Return ``tau`` as a float; warn if it lies past the last observed time."""
    tau = float(tau)
    if not math.isfinite(tau) or tau <= 0:
        raise DataError(f"horizon must be positive and finite, got {tau}")
    if sample is not None and tau > sample.time[-1]:
        warnings.warn(
            f"horizon {tau:g} exceeds the largest observed time {sample.time[-1]:g}",
            stacklevel=2,
        )
    return tau


@dataclass(frozen=True)
class KernelSpec:
    """Smoothing over the risk score.

    ``mode="span"`` uses a uniform kernel over the ``ceil(n * span)``
    subjects nearest in score rank; ``mode="bandwidth"`` uses a metric
    kernel ``K((u - u0) / h) / h``.
    """

    mode: str = "span"
    span: float = 0.05
    bandwidth: float | None = None
    kernel: str = "epanechnikov"

    def __post_init__(self):
        if self.mode == "span":
            if not (0 < self.span <= 1):
                raise InvalidKernelSpec(f"span must lie in (0, 1], got {self.span}")
        elif self.mode == "bandwidth":
            if self.bandwidth is None or not (self.bandwidth > 0) or not math.isfinite(self.bandwidth):
                raise InvalidKernelSpec(f"bandwidth must be positive, got {self.bandwidth}")
            if self.kernel not in KERNELS:
                raise InvalidKernelSpec(f"unknown kernel {self.kernel!r}; choose from {KERNELS}")
        else:
            raise InvalidKernelSpec(f"mode must be 'span' or 'bandwidth', got {self.mode!r}")

    @classmethod
    def with_span(cls, span: float) -> "KernelSpec":
        return cls(mode="span", span=span)

    @classmethod
    def with_bandwidth(cls, h: float, kernel: str = "epanechnikov") -> "KernelSpec":
        return cls(mode="bandwidth", bandwidth=h, kernel=kernel)

    def describe(self) -> str:
        if self.mode == "span":
            return f"span={self.span:g}"
        return f"bandwidth={self.bandwidth:g},kernel={self.kernel}"
