"""Kernel-weighted conditional survival, cumulative incidence and case weights.

For an anchor subject the neighbours' contributions to the product-limit
survival and the Aalen-Johansen cumulative incidence are weighted by a
kernel in the risk score. A subject censored before the horizon then gets,
for every cause ``k``, the conditional probability of a cause-``k`` event by
the horizon given its censoring time and score::

    W_k = (F_k(tau | u) - F_k(t | u)) / S(t | u)

Subjects whose status at the horizon is observed get exact 0/1 weights.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.stats import rankdata

from .data import CompetingRiskSample, KernelSpec, check_horizon
from .errors import DegenerateNeighborhood, UndefinedWeight

DEFAULT_SPEC = KernelSpec.with_span(0.05)

UNDEFINED_TOL = 1e-12

# anchors processed per block; bounds memory at block * n * (K + 3) floats
_BLOCK = 256


def _kernel_values(x: np.ndarray, kernel: str) -> np.ndarray:
    if kernel == "gaussian":
        return np.exp(-0.5 * x * x) / math.sqrt(2 * math.pi)
    inside = np.abs(x) <= 1
    if kernel == "epanechnikov":
        return np.where(inside, 0.75 * (1 - x * x), 0.0)
    if kernel == "uniform":
        return np.where(inside, 0.5, 0.0)
    raise ValueError(f"unknown kernel {kernel!r}")


def _neighborhood_size(n: int, span: float) -> int:
    # guard against 300 * 0.05 == 15.000000000000002
    return max(1, min(n, math.ceil(n * span - 1e-9)))


def kernel_weight_matrix(score: np.ndarray, anchors: np.ndarray, spec: KernelSpec) -> np.ndarray:
    """Kernel weights of every subject for each anchor, shape ``(len(anchors), n)``."""
    score = np.asarray(score, dtype=float)
    anchors = np.atleast_1d(np.asarray(anchors, dtype=np.intp))
    n = score.size
    if spec.mode == "span":
        rank = rankdata(score, method="average")
        dist = np.abs(rank[anchors, None] - rank[None, :])
        k = _neighborhood_size(n, spec.span)
        kth = np.partition(dist, k - 1, axis=1)[:, k - 1]
        w = (dist <= kth[:, None]).astype(float)
        counts = w.sum(axis=1)
        if np.any(counts < 2):
            bad = anchors[np.argmax(counts < 2)]
            raise DegenerateNeighborhood(
                f"span {spec.span:g} selects fewer than 2 subjects around subject {bad} (n={n})"
            )
        return w
    x = (score[None, :] - score[anchors, None]) / spec.bandwidth
    return _kernel_values(x, spec.kernel) / spec.bandwidth


def kernel_weights(sample: CompetingRiskSample, anchor: int, spec: KernelSpec = DEFAULT_SPEC) -> np.ndarray:
    """Length-``n`` kernel weight vector centred on subject ``anchor``."""
    return kernel_weight_matrix(sample.score, np.array([anchor]), spec)[0]


def _time_groups(time: np.ndarray):
    # time is sorted, so equal times are contiguous
    grid, start = np.unique(time, return_index=True)
    group = np.searchsorted(grid, time)
    return grid, start, group


def _weighted_curves(w: np.ndarray, status: np.ndarray, start: np.ndarray, n_causes: int):
    """Survival and per-cause CIF on the distinct-time grid for each weight row.

    Returns ``surv`` of shape ``(m, G)`` and ``cif`` of shape ``(n_causes, m, G)``
    holding the right-continuous values at each grid time.
    """
    at_risk = np.add.reduceat(w, start, axis=1)
    at_risk = np.cumsum(at_risk[:, ::-1], axis=1)[:, ::-1]
    events = np.stack(
        [np.add.reduceat(w * (status == k), start, axis=1) for k in range(1, n_causes + 1)]
    )
    positive = at_risk > 0
    safe = np.where(positive, at_risk, 1.0)
    # zero risk set: no hazard, curve stays frozen
    cause_hazard = np.where(positive, events / safe, 0.0)
    hazard = np.minimum(cause_hazard.sum(axis=0), 1.0)
    surv = np.cumprod(1.0 - hazard, axis=1)
    surv_left = np.empty_like(surv)
    surv_left[:, 0] = 1.0
    surv_left[:, 1:] = surv[:, :-1]
    cif = np.cumsum(cause_hazard * surv_left, axis=2)
    return surv, cif


@dataclass(frozen=True)
class ConditionalCurves:
    """Step functions conditional on one anchor's risk score.

    ``survival[g]`` and ``cif_by_cause[k - 1][g]`` are the values on
    ``[event_grid[g], event_grid[g + 1])``; before the first grid time the
    survival is 1 and every CIF 0.
    """

    anchor_index: int
    event_grid: np.ndarray
    survival: np.ndarray
    cif_by_cause: np.ndarray

    def _locate(self, t):
        return np.searchsorted(self.event_grid, np.asarray(t, dtype=float), side="right") - 1

    def survival_at(self, t):
        g = self._locate(t)
        return np.where(g >= 0, self.survival[np.maximum(g, 0)] if self.survival.size else 1.0, 1.0)

    def cif_at(self, cause: int, t):
        g = self._locate(t)
        curve = self.cif_by_cause[cause - 1]
        return np.where(g >= 0, curve[np.maximum(g, 0)] if curve.size else 0.0, 0.0)


def conditional_curves(
    sample: CompetingRiskSample, anchor: int, spec: KernelSpec = DEFAULT_SPEC
) -> ConditionalCurves:
    """Kernel-weighted survival and cumulative incidences around ``anchor``."""
    w = kernel_weight_matrix(sample.score, np.array([anchor]), spec)
    grid, start, _ = _time_groups(sample.time)
    surv, cif = _weighted_curves(w, sample.status, start, sample.n_causes)
    on_omega = np.isin(grid, sample.time[sample.status != 0])
    return ConditionalCurves(
        anchor_index=int(anchor),
        event_grid=grid[on_omega],
        survival=surv[0, on_omega],
        cif_by_cause=cif[:, 0, on_omega],
    )


def conditional_survival(sample, anchor, spec=DEFAULT_SPEC):
    """Survival step function ``(grid, values)`` for the anchor's neighbourhood."""
    c = conditional_curves(sample, anchor, spec)
    return c.event_grid, c.survival


def conditional_cif(sample, anchor, cause, spec=DEFAULT_SPEC):
    """Cause-``cause`` cumulative incidence step function ``(grid, values)``."""
    c = conditional_curves(sample, anchor, spec)
    return c.event_grid, c.cif_by_cause[cause - 1]


@dataclass(frozen=True)
class CaseWeightMatrix:
    """Per-subject, per-cause probabilities of being a case by ``tau``.

    Attributes
    ----------
    tau : float
    weights : ndarray, shape (n, n_causes)
        Column ``k - 1`` holds ``W_k``.
    cause_of_interest : int
    undefined : ndarray of int
        Subjects whose conditional survival vanished; their rows are zero.
    max_violation : float
        Largest amount by which a raw ratio left ``[0, 1]`` or a row sum
        exceeded 1 before clamping.
    """

    tau: float
    weights: np.ndarray
    cause_of_interest: int = 1
    undefined: np.ndarray = np.zeros(0, dtype=np.intp)
    max_violation: float = 0.0

    @property
    def n_undefined(self) -> int:
        return int(self.undefined.size)

    @property
    def case_mass(self) -> np.ndarray:
        return self.weights[:, self.cause_of_interest - 1]

    def control_mass(self, definition: str = "A") -> np.ndarray:
        """Control mass per subject: ``1 - W_k*`` (A) or ``1 - sum_k W_k`` (B)."""
        if definition == "A":
            return 1.0 - self.case_mass
        if definition == "B":
            return 1.0 - self.weights.sum(axis=1)
        raise ValueError(f"definition must be 'A' or 'B', got {definition!r}")


def case_weights(
    sample: CompetingRiskSample,
    tau: float,
    spec: KernelSpec = DEFAULT_SPEC,
    allow_undefined: bool = False,
) -> CaseWeightMatrix:
    """Case-probability weights for every subject and cause at horizon ``tau``.

    Raises
    ------
    UndefinedWeight
        If a subject censored before ``tau`` has conditional survival below
        1e-12 at its censoring time. With ``allow_undefined=True`` such rows
        are set to zero and listed in ``CaseWeightMatrix.undefined`` instead.
    """
    tau = check_horizon(tau)
    time, status, K = sample.time, sample.status, sample.n_causes
    n = sample.n
    observed = time <= tau
    weights = np.zeros((n, K))
    for k in range(1, K + 1):
        weights[:, k - 1] = (observed & (status == k)).astype(float)

    censored = np.flatnonzero(observed & (status == 0))
    undefined = []
    max_violation = 0.0
    if censored.size:
        grid, start, group = _time_groups(time)
        g_tau = np.searchsorted(grid, tau, side="right") - 1
        for lo in range(0, censored.size, _BLOCK):
            anchors = censored[lo : lo + _BLOCK]
            w = kernel_weight_matrix(sample.score, anchors, spec)
            surv, cif = _weighted_curves(w, status, start, K)
            rows = np.arange(anchors.size)
            g_i = group[anchors]
            s_i = surv[rows, g_i]
            gain = cif[:, rows, g_tau] - cif[:, rows, g_i]
            bad = s_i < UNDEFINED_TOL
            ratio = gain / np.where(bad, 1.0, s_i)
            ratio[:, bad] = 0.0
            raw = ratio.T
            clamped = np.clip(raw, 0.0, 1.0)
            rowsum = clamped.sum(axis=1)
            max_violation = max(
                max_violation,
                float(np.max(np.abs(raw - clamped), initial=0.0)),
                float(np.max(rowsum - 1.0, initial=0.0)),
            )
            over = rowsum > 1.0
            clamped[over] /= rowsum[over, None]
            weights[anchors] = clamped
            undefined.extend(anchors[bad].tolist())
    undefined = np.array(sorted(undefined), dtype=np.intp)
    if undefined.size and not allow_undefined:
        raise UndefinedWeight(undefined)
    return CaseWeightMatrix(
        tau=tau,
        weights=weights,
        cause_of_interest=sample.cause_of_interest,
        undefined=undefined,
        max_violation=max_violation,
    )
