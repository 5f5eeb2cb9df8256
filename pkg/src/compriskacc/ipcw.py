"""Inverse-probability-of-censoring-weighted comparator estimators.

The censoring survival ``G`` is estimated either by the reverse
Kaplan-Meier (ignoring the score) or by a univariate Cox model on the
score. Subjects whose status at ``tau`` is observed are reweighted by
``1 / G(t-)`` (events before ``tau``) or ``1 / G(tau)`` (survivors);
subjects censored before ``tau`` get weight 0.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import CompetingRiskSample, check_horizon
from .errors import NonConvergence, SingularFit, ZeroCensoringProbability
from .metrics import DEFINITIONS, AccuracyReport, accuracy_report

COX_TOL = 1e-8
COX_MAX_ITER = 50


@dataclass(frozen=True)
class CensoringModel:
    """Estimated censoring survival function.

    For ``kind="km"`` ``values`` is the reverse Kaplan-Meier curve on
    ``grid``; for ``kind="cox"`` it is the Breslow baseline cumulative hazard
    (at score ``center``) and ``coefficient`` the log hazard ratio per unit
    of score.
    """

    kind: str
    grid: np.ndarray
    values: np.ndarray
    coefficient: float = 0.0
    center: float = 0.0
    std_error: float = float("nan")
    n_iter: int = 0

    def _step(self, t, left):
        t = np.asarray(t, dtype=float)
        g = np.searchsorted(self.grid, t, side="left" if left else "right") - 1
        if self.values.size == 0:
            return np.zeros_like(t), g
        return np.where(g >= 0, self.values[np.maximum(g, 0)], 0.0), g

    def survival(self, t, score=None, left: bool = False):
        """``G(t | score)``; ``left=True`` gives the left limit ``G(t-)``."""
        step, g = self._step(t, left)
        if self.kind == "km":
            return np.where(g >= 0, step, 1.0) if self.values.size else np.ones_like(step)
        if score is None:
            raise ValueError("Cox censoring model needs the score")
        lin = self.coefficient * (np.asarray(score, dtype=float) - self.center)
        return np.exp(-step * np.exp(lin))


def _reverse_counts(sample: CompetingRiskSample):
    grid, start = np.unique(sample.time, return_index=True)
    cens = np.add.reduceat((sample.status == 0).astype(float), start)
    at_risk = sample.n - start
    return grid, cens, at_risk, start


def fit_censoring_km(sample: CompetingRiskSample) -> CensoringModel:
    """Reverse Kaplan-Meier: censoring is the event, any failure censors."""
    grid, cens, at_risk, _ = _reverse_counts(sample)
    keep = cens > 0
    surv = np.cumprod(1.0 - cens[keep] / at_risk[keep])
    return CensoringModel("km", grid[keep], surv)


def _cox_terms(theta, x, start, d, xd):
    """Breslow log partial likelihood, score and information."""
    e = np.exp(theta * x)
    s0 = np.add.reduceat(e, start)[::-1].cumsum()[::-1]
    s1 = np.add.reduceat(e * x, start)[::-1].cumsum()[::-1]
    s2 = np.add.reduceat(e * x * x, start)[::-1].cumsum()[::-1]
    m = d > 0
    ll = theta * xd - float(np.sum(d[m] * np.log(s0[m])))
    grad = xd - float(np.sum(d[m] * s1[m] / s0[m]))
    info = float(np.sum(d[m] * (s2[m] / s0[m] - (s1[m] / s0[m]) ** 2)))
    return ll, grad, info, s0


def fit_censoring_cox(sample: CompetingRiskSample) -> CensoringModel:
    """Cox model for the censoring hazard with the risk score as covariate.

    Newton-Raphson with step halving on the Breslow partial likelihood;
    the baseline cumulative hazard is the Breslow estimator. A sample
    without censoring yields ``G = 1``.
    """
    is_cens = sample.status == 0
    n_cens = int(is_cens.sum())
    if n_cens == 0:
        return CensoringModel("cox", np.zeros(0), np.zeros(0), 0.0, 0.0, 0.0, 0)
    if n_cens < 2:
        raise SingularFit("need at least two censored subjects")
    u = sample.score
    if np.ptp(u) == 0 or np.ptp(u[is_cens]) == 0:
        raise SingularFit("no score variation among censored subjects")
    center = float(np.mean(u))
    x = u - center
    grid, start = np.unique(sample.time, return_index=True)
    d = np.add.reduceat(is_cens.astype(float), start)
    xd = float(np.sum(x[is_cens]))

    theta = 0.0
    ll, grad, info, s0 = _cox_terms(theta, x, start, d, xd)
    for it in range(1, COX_MAX_ITER + 1):
        if info <= 0:
            raise SingularFit("non-positive information")
        step = grad / info
        new = theta + step
        new_ll, new_grad, new_info, new_s0 = _cox_terms(new, x, start, d, xd)
        halvings = 0
        while not np.isfinite(new_ll) or new_ll < ll - 1e-12:
            halvings += 1
            if halvings > 30:
                raise NonConvergence("step halving failed")
            step /= 2
            new = theta + step
            new_ll, new_grad, new_info, new_s0 = _cox_terms(new, x, start, d, xd)
        theta, ll, grad, info, s0 = new, new_ll, new_grad, new_info, new_s0
        if abs(grad) < COX_TOL:
            break
        if abs(theta) > 1e3:
            raise SingularFit("coefficient diverges (monotone likelihood)")
    else:
        raise NonConvergence(f"no convergence in {COX_MAX_ITER} iterations (|score|={abs(grad):.2e})")
    keep = d > 0
    cumhaz = np.cumsum(d[keep] / s0[keep])
    return CensoringModel(
        "cox", grid[keep], cumhaz, float(theta), center, float(1.0 / np.sqrt(info)), it
    )


@dataclass(frozen=True)
class IpcwWeights:
    """Per-subject inverse censoring weights at horizon ``tau``.

    ``omega`` is zero for subjects censored before ``tau``.
    """

    tau: float
    omega: np.ndarray
    is_case: np.ndarray
    is_competing: np.ndarray
    is_survivor: np.ndarray
    n_undefined: int = 0

    @property
    def case_mass(self) -> np.ndarray:
        return self.omega * self.is_case

    def control_mass(self, definition: str = "A") -> np.ndarray:
        if definition == "A":
            return self.omega * (self.is_survivor | self.is_competing)
        if definition == "B":
            return self.omega * self.is_survivor
        raise ValueError(f"definition must be 'A' or 'B', got {definition!r}")


def ipcw_weights(model: CensoringModel, sample: CompetingRiskSample, tau: float) -> IpcwWeights:
    """Inverse censoring weights evaluated at ``t-`` for early failures, ``tau`` for survivors."""
    tau = check_horizon(tau)
    t, s, u = sample.time, sample.status, sample.score
    failed = (t <= tau) & (s != 0)
    survivor = t > tau
    g = np.ones(sample.n)
    g[failed] = model.survival(t[failed], u[failed], left=True)
    g[survivor] = model.survival(np.full(int(survivor.sum()), tau), u[survivor])
    included = failed | survivor
    zero = included & ~(g > 0)
    if zero.any():
        raise ZeroCensoringProbability(np.flatnonzero(zero)[0])
    omega = np.where(included, 1.0 / np.where(included, g, 1.0), 0.0)
    return IpcwWeights(
        tau=tau,
        omega=omega,
        is_case=failed & (s == sample.cause_of_interest),
        is_competing=failed & (s != sample.cause_of_interest),
        is_survivor=survivor,
    )


def ipcw_metrics(weights: IpcwWeights, sample: CompetingRiskSample, tau: float | None = None,
                 method: str = "ipcw-km", definitions=DEFINITIONS) -> AccuracyReport:
    """Both AUCs and the calibration metrics under inverse censoring weights."""
    if tau is not None and float(tau) != weights.tau:
        raise ValueError("weights were computed at a different horizon")
    return accuracy_report(weights, sample.score, method, sample.raw_marker, definitions)
