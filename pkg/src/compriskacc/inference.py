"""Nonparametric bootstrap percentile intervals for the accuracy metrics."""

from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .data import CompetingRiskSample, KernelSpec
from .errors import CompRiskError, TooManyFailures
from .estimate import compute_weights
from .kernel import DEFAULT_SPEC
from .metrics import abs_err, auc_concordance, brier, kullback_leibler

log = logging.getLogger(__name__)

METRIC_NAMES = ("auc_a", "auc_b", "brier", "kl", "abs_err")
MAX_FAILURE_FRACTION = 0.10
CALIBRATION = ("brier", "kl", "abs_err")

_METRIC_FN = {
    "auc_a": lambda w, u: auc_concordance(w, u, "A"),
    "auc_b": lambda w, u: auc_concordance(w, u, "B"),
    "brier": brier,
    "kl": kullback_leibler,
    "abs_err": abs_err,
}


@dataclass(frozen=True)
class BootstrapResult:
    metric: str
    estimate: float
    replicates: np.ndarray
    lower: float
    upper: float
    alpha: float
    n_failed: int

    @property
    def width(self) -> float:
        return self.upper - self.lower


def _metric_values(sample, tau, spec, method, metrics):
    w = compute_weights(sample, tau, method, spec)
    return [_METRIC_FN[m](w, sample.score) for m in metrics]


def _replicate(args):
    sample, tau, spec, method, metrics, seed, b = args
    rng = np.random.default_rng(np.random.SeedSequence([seed, b]))
    idx = rng.integers(0, sample.n, sample.n)
    try:
        return _metric_values(sample.subset(idx), tau, spec, method, metrics)
    except CompRiskError as exc:
        log.debug("bootstrap replicate %d failed: %s", b, exc)
        return None


def bootstrap_metrics(
    sample: CompetingRiskSample,
    tau: float,
    spec: KernelSpec = DEFAULT_SPEC,
    metrics=METRIC_NAMES,
    B: int = 1000,
    alpha: float = 0.05,
    seed: int = 0,
    method: str = "proposed",
    workers: int = 1,
) -> dict[str, BootstrapResult]:
    """Percentile intervals for several metrics from one set of resamples.

    Only the requested metrics are computed, so e.g. a Brier interval is
    available on samples where an AUC is undefined. The whole pipeline,
    kernel neighbourhoods included, is recomputed in every resample. Resamples on which the estimator fails are dropped;
    more than 10% failures raises :class:`TooManyFailures`. Metrics that
    are undefined for the sample (calibration on a raw marker) are skipped.
    """
    metrics = tuple(metrics)
    for m in metrics:
        if m not in METRIC_NAMES:
            raise ValueError(f"metric must be one of {METRIC_NAMES}, got {m!r}")
    if B < 2:
        raise ValueError("B must be at least 2")
    if not 0 < alpha < 1:
        raise ValueError("alpha must lie in (0, 1)")
    if sample.raw_marker:
        metrics = tuple(m for m in metrics if m not in CALIBRATION)
    if not metrics:
        raise ValueError("no metric is defined for a raw-marker sample")
    point = dict(zip(metrics, _metric_values(sample, tau, spec, method, metrics)))
    tasks = [(sample, tau, spec, method, metrics, seed, b) for b in range(B)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            values = list(pool.map(_replicate, tasks, chunksize=max(1, B // (4 * workers))))
    else:
        values = [_replicate(t) for t in tasks]
    ok = np.array([v for v in values if v is not None], dtype=float).reshape(-1, len(metrics))
    n_failed = B - ok.shape[0]
    if n_failed > MAX_FAILURE_FRACTION * B:
        raise TooManyFailures(f"{n_failed} of {B} bootstrap replicates failed")
    out = {}
    for j, m in enumerate(metrics):
        lower, upper = np.quantile(ok[:, j], [alpha / 2, 1 - alpha / 2])
        out[m] = BootstrapResult(m, float(point[m]), ok[:, j], float(lower), float(upper), alpha, n_failed)
    return out


def bootstrap_ci(
    sample: CompetingRiskSample,
    tau: float,
    spec: KernelSpec = DEFAULT_SPEC,
    metric: str = "auc_a",
    B: int = 1000,
    alpha: float = 0.05,
    seed: int = 0,
    method: str = "proposed",
    workers: int = 1,
) -> BootstrapResult:
    """Percentile bootstrap interval for one metric."""
    if sample.raw_marker and metric in CALIBRATION:
        raise ValueError(f"{metric} is undefined for a raw-marker sample")
    return bootstrap_metrics(sample, tau, spec, (metric,), B, alpha, seed, method, workers)[metric]
