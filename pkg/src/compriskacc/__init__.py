"""Time-dependent predictive accuracy for competing-risks data.

Censored subjects are weighted by their kernel-estimated conditional
probability of being a case by the horizon; IPCW estimators are provided
for comparison, together with a Fine-Gray simulation harness.
"""

from .data import CompetingRiskSample, KernelSpec, SubjectRecord, validate_sample
from .estimate import compute_weights, evaluate
from .inference import BootstrapResult, bootstrap_ci, bootstrap_metrics
from .ipcw import CensoringModel, IpcwWeights, fit_censoring_cox, fit_censoring_km, ipcw_metrics, ipcw_weights
from .kernel import (
    CaseWeightMatrix,
    ConditionalCurves,
    case_weights,
    conditional_cif,
    conditional_curves,
    conditional_survival,
    kernel_weights,
)
from .metrics import (
    AccuracyReport,
    RocCurve,
    abs_err,
    accuracy_report,
    auc_concordance,
    brier,
    kullback_leibler,
    roc_curve,
    sensitivity,
    specificity,
)

__version__ = "0.1.0"
