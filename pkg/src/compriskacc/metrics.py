"""Time-dependent discrimination and calibration metrics from case weights.

Every function takes a *weights* object exposing ``case_mass`` (array) and
``control_mass(definition)``; :class:`~compriskacc.kernel.CaseWeightMatrix`
and :class:`~compriskacc.ipcw.IpcwWeights` both qualify. Definition ``"A"``
counts competing-event subjects as controls, ``"B"`` only event-free ones.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import NoCases, NoControls, NoPairs, RawMarkerNotAllowed

KL_CLIP = 1e-12
_MASS_TOL = 1e-14
DEFINITIONS = ("A", "B")


def _case_total(weights) -> float:
    total = float(np.sum(weights.case_mass))
    if total <= _MASS_TOL:
        raise NoCases("total case mass is zero")
    return total


def _control(weights, definition):
    mass = weights.control_mass(definition)
    total = float(np.sum(mass))
    if total <= _MASS_TOL:
        raise NoControls(f"total control mass is zero under definition {definition}")
    return mass, total


def sensitivity(weights, scores, c: float) -> float:
    """Weighted fraction of case mass with score strictly above ``c``."""
    scores = np.asarray(scores, dtype=float)
    case = weights.case_mass
    return float(np.sum(case[scores > c])) / _case_total(weights)


def specificity(weights, scores, c: float, definition: str = "A") -> float:
    """Weighted fraction of control mass with score at or below ``c``."""
    scores = np.asarray(scores, dtype=float)
    mass, total = _control(weights, definition)
    return float(np.sum(mass[scores <= c])) / total


@dataclass(frozen=True)
class RocCurve:
    """ROC points ordered by decreasing threshold, from ``+inf`` to ``-inf``."""

    definition: str
    tau: float
    thresholds: np.ndarray
    sensitivity: np.ndarray
    specificity: np.ndarray
    auc_trapezoid: float

    @property
    def points(self) -> list[tuple[float, float, float]]:
        return list(zip(self.thresholds.tolist(), self.sensitivity.tolist(), self.specificity.tolist()))

    @property
    def false_positive_rate(self) -> np.ndarray:
        return 1.0 - self.specificity


def _grouped_mass(scores, *masses):
    """Distinct scores ascending and each mass summed within score groups."""
    values, inverse = np.unique(scores, return_inverse=True)
    return values, [np.bincount(inverse, weights=m, minlength=values.size) for m in masses]


def roc_curve(weights, scores, definition: str = "A") -> RocCurve:
    """Sensitivity/specificity at every distinct score plus the two sentinels."""
    scores = np.asarray(scores, dtype=float)
    case_total = _case_total(weights)
    ctrl, ctrl_total = _control(weights, definition)
    values, (case_g, ctrl_g) = _grouped_mass(scores, weights.case_mass, ctrl)
    # thresholds descending: +inf, values[::-1], -inf
    case_above = np.concatenate(([0.0], np.cumsum(case_g[::-1])))
    ctrl_above = np.concatenate(([0.0], np.cumsum(ctrl_g[::-1])))
    se = np.concatenate(([0.0], case_above[:-1] / case_total, [1.0]))
    sp = np.concatenate(([1.0], 1.0 - ctrl_above[:-1] / ctrl_total, [0.0]))
    # exact endpoints; interior values clipped against rounding
    se = np.clip(se, 0.0, 1.0)
    sp = np.clip(sp, 0.0, 1.0)
    thresholds = np.concatenate(([np.inf], values[::-1], [-np.inf]))
    fpr = 1.0 - sp
    auc = float(np.sum(np.diff(fpr) * (se[1:] + se[:-1]) / 2.0))
    tau = getattr(weights, "tau", float("nan"))
    return RocCurve(definition, tau, thresholds, se, sp, auc)


def auc_concordance(weights, scores, definition: str = "A", pairing: str = "corrected") -> float:
    """Weighted concordance AUC with ties counted one half.

    ``pairing="corrected"`` pairs the case mass of ``i`` with the control
    mass of ``j``. ``pairing="strict"`` uses ``W_i * control_i`` for both
    factors of the pair, as the estimator is sometimes printed.
    """
    scores = np.asarray(scores, dtype=float)
    case = weights.case_mass
    ctrl = weights.control_mass(definition)
    if pairing == "corrected":
        _case_total(weights)
        _control(weights, definition)
        values, (case_g, ctrl_g) = _grouped_mass(scores, case, ctrl)
        ctrl_below = np.cumsum(ctrl_g) - ctrl_g
        num = float(np.sum(case_g * (ctrl_below + 0.5 * ctrl_g)))
        den = float(np.sum(case_g)) * float(np.sum(ctrl_g))
    elif pairing == "strict":
        pair = case * ctrl
        values, (pair_g, count_g) = _grouped_mass(scores, pair, np.ones_like(pair))
        below = np.cumsum(count_g) - count_g
        num = float(np.sum(pair_g * (below + 0.5 * count_g)))
        den = float(np.sum(pair_g)) * scores.size
    else:
        raise ValueError(f"pairing must be 'corrected' or 'strict', got {pairing!r}")
    if den <= _MASS_TOL:
        raise NoPairs("no case-control pair mass")
    return num / den


def _check_probabilities(scores):
    scores = np.asarray(scores, dtype=float)
    if np.any(scores < 0) or np.any(scores > 1):
        raise RawMarkerNotAllowed("calibration metrics need scores in [0, 1]")
    return scores


def _loss(weights, scores, case_loss, control_loss):
    case = weights.case_mass
    ctrl = weights.control_mass("A")
    return float(np.mean(case * case_loss + ctrl * control_loss))


def brier(weights, scores) -> float:
    """Weighted squared error between case status and predicted risk."""
    u = _check_probabilities(scores)
    return _loss(weights, u, (1.0 - u) ** 2, u**2)


def abs_err(weights, scores) -> float:
    """Weighted absolute error between case status and predicted risk."""
    u = _check_probabilities(scores)
    return _loss(weights, u, 1.0 - u, u)


def kullback_leibler(weights, scores, return_clipped: bool = False):
    """Weighted negative log-likelihood of case status under the predicted risk.

    Scores are clipped to ``[1e-12, 1 - 1e-12]`` first; with
    ``return_clipped=True`` the number of clipped scores is returned too.
    """
    u = _check_probabilities(scores)
    clipped = np.clip(u, KL_CLIP, 1.0 - KL_CLIP)
    value = _loss(weights, u, -np.log(clipped), -np.log1p(-clipped))
    if return_clipped:
        return value, int(np.count_nonzero(clipped != u))
    return value


@dataclass
class AccuracyReport:
    """Metrics at one horizon for one estimation method.

    Calibration fields are ``None`` when the scores are a raw marker, and
    an AUC field is ``None`` when its definition was not requested.
    """

    tau: float
    auc_a: float | None
    auc_b: float | None
    brier: float | None
    kl: float | None
    abs_err: float | None
    n_undefined_weights: int = 0
    kl_clipped: int = 0
    method: str = "proposed"
    extra: dict = field(default_factory=dict)

    def auc(self, definition: str) -> float:
        return self.auc_a if definition == "A" else self.auc_b

    def to_dict(self) -> dict:
        return asdict(self)


def accuracy_report(weights, scores, method: str = "proposed", raw_marker: bool | None = None,
                    definitions=DEFINITIONS) -> AccuracyReport:
    """All metrics for one weights object; AUCs only for ``definitions``."""
    scores = np.asarray(scores, dtype=float)
    if raw_marker is None:
        raw_marker = bool(np.any(scores < 0) or np.any(scores > 1))
    b = kl = ae = None
    clipped = 0
    if not raw_marker:
        b = brier(weights, scores)
        kl, clipped = kullback_leibler(weights, scores, return_clipped=True)
        ae = abs_err(weights, scores)
    return AccuracyReport(
        tau=float(getattr(weights, "tau", float("nan"))),
        auc_a=auc_concordance(weights, scores, "A") if "A" in definitions else None,
        auc_b=auc_concordance(weights, scores, "B") if "B" in definitions else None,
        brier=b,
        kl=kl,
        abs_err=ae,
        n_undefined_weights=int(getattr(weights, "n_undefined", 0)),
        kl_clipped=clipped,
        method=method,
    )
