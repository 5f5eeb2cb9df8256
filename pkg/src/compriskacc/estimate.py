"""One-call estimation for the proposed and IPCW methods."""

from __future__ import annotations

from .data import CompetingRiskSample, KernelSpec
from .ipcw import fit_censoring_cox, fit_censoring_km, ipcw_weights
from .kernel import DEFAULT_SPEC, case_weights
from .metrics import DEFINITIONS, AccuracyReport, accuracy_report

METHODS = ("proposed", "ipcw-km", "ipcw-cox")


def compute_weights(
    sample: CompetingRiskSample,
    tau: float,
    method: str = "proposed",
    spec: KernelSpec = DEFAULT_SPEC,
    allow_undefined: bool = False,
):
    """Weights object for ``method`` at ``tau`` (see :mod:`compriskacc.metrics`)."""
    if method == "proposed":
        return case_weights(sample, tau, spec, allow_undefined=allow_undefined)
    if method == "ipcw-km":
        return ipcw_weights(fit_censoring_km(sample), sample, tau)
    if method == "ipcw-cox":
        return ipcw_weights(fit_censoring_cox(sample), sample, tau)
    raise ValueError(f"unknown method {method!r}; choose from {METHODS}")


def evaluate(
    sample: CompetingRiskSample,
    tau: float,
    method: str = "proposed",
    spec: KernelSpec = DEFAULT_SPEC,
    allow_undefined: bool = False,
    definitions=DEFINITIONS,
) -> AccuracyReport:
    """AUC (both definitions), Brier, KL and absolute error at ``tau``."""
    w = compute_weights(sample, tau, method, spec, allow_undefined)
    return accuracy_report(w, sample.score, method, sample.raw_marker, definitions)
