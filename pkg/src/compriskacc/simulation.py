"""Fine-Gray competing-risks simulation harness.

Covariates are ``Z1 ~ N(0, 1)`` and ``Z2 ~ Bernoulli(0.5)`` with linear
predictor ``zeta = Z @ beta``. Cause 1 occurs with probability
``1 - (1 - p) ** exp(zeta)`` and its time is drawn by inverting the
conditional subdistribution

    F1(t | Z) = 1 - (1 - p * (1 - exp(-lam * t ** alpha))) ** exp(zeta),

otherwise cause 2 occurs after an exponential time with rate
``rate_scale * exp(Z @ gamma)``. The risk score of a subject is its true
cause-1 cumulative incidence at the horizon, ``F1(tau | Z)``.

Censoring is either a mixture of uniforms on ``(0,3], (3,6], ..., (15,18]``
whose interval probabilities are tilted to hit a target censoring rate,
a Weibull whose mean depends on whether ``zeta`` is extreme ("threshold"),
or a Weibull proportional-hazards model on ``zeta`` ("cox").
"""

from __future__ import annotations

import functools
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace

import numpy as np
from scipy.special import gamma as gamma_fn

from .data import CompetingRiskSample, KernelSpec
from .errors import CompRiskError, InvalidConfig
from .estimate import compute_weights
from .metrics import auc_concordance, brier

log = logging.getLogger(__name__)

INTERVAL_EDGES = np.arange(0.0, 19.0, 3.0)
EVENT1_P = {0.30: 0.22, 0.50: 0.42, 0.70: 0.61}
CENSORING_TARGETS = {"medium": 0.275, "high": 0.475}
MECHANISMS = ("independent", "threshold", "cox")
METRICS = ("auc_a", "auc_b", "brier")
TAU_QUANTILE = 0.65
CALIBRATION_N = 100_000


@dataclass(frozen=True)
class FineGrayConfig:
    beta: tuple[float, float] = (-0.6, 0.5)
    gamma: tuple[float, float] = (-0.1, -0.2)
    p: float = 0.61
    weibull_scale: float = 0.1
    weibull_shape: float = 1.0
    cause2_rate_scale: float = 0.25

    def __post_init__(self):
        if not 0 < self.p < 1:
            raise InvalidConfig(f"p must lie in (0, 1), got {self.p}")
        for name in ("weibull_scale", "weibull_shape", "cause2_rate_scale"):
            v = getattr(self, name)
            if not (v > 0 and math.isfinite(v)):
                raise InvalidConfig(f"{name} must be positive, got {v}")
        if len(self.beta) != 2 or len(self.gamma) != 2:
            raise InvalidConfig("beta and gamma must each have two entries")

    @classmethod
    def for_event1_fraction(cls, fraction: float, **kw) -> "FineGrayConfig":
        key = round(float(fraction), 2)
        if key not in EVENT1_P:
            raise InvalidConfig(f"event-1 fraction must be one of {sorted(EVENT1_P)}, got {fraction}")
        return cls(p=EVENT1_P[key], **kw)

    def cif1(self, t, zeta):
        """True cause-1 cumulative incidence ``F1(t | Z)``."""
        base = 1.0 - np.exp(-self.weibull_scale * np.asarray(t, dtype=float) ** self.weibull_shape)
        return 1.0 - (1.0 - self.p * base) ** np.exp(zeta)


@dataclass(frozen=True)
class CensoringConfig:
    """Censoring mechanism.

    kind="mixture": ``probs`` over the six uniform intervals.
    kind="threshold": Weibull with shape ``shape`` and mean ``a`` when
    ``zeta > 0.4`` or ``zeta < -0.6``, else ``b``.
    kind="cox": survival ``exp(-scale * exp(coefficient * zeta) * t ** shape)``.
    kind="none": no censoring.
    """

    kind: str = "mixture"
    probs: tuple[float, ...] = (0.0, 0.0, 0.0, 0.0, 0.0, 1.0)
    a: float = 1.0
    b: float = 1.0
    shape: float = 1.0
    coefficient: float = 0.0
    scale: float = 1.0

    def __post_init__(self):
        if self.kind == "mixture":
            probs = np.asarray(self.probs, dtype=float)
            if probs.size != len(INTERVAL_EDGES) - 1 or np.any(probs < 0):
                raise InvalidConfig("mixture needs six nonnegative interval probabilities")
            if abs(probs.sum() - 1.0) > 1e-9:
                raise InvalidConfig(f"mixture probabilities sum to {probs.sum()}, not 1")
        elif self.kind == "threshold":
            if not (self.a > 0 and self.b > 0 and self.shape > 0):
                raise InvalidConfig("threshold censoring needs a, b, shape > 0")
        elif self.kind == "cox":
            if not (self.scale > 0 and self.shape > 0):
                raise InvalidConfig("cox censoring needs scale, shape > 0")
        elif self.kind != "none":
            raise InvalidConfig(f"unknown censoring kind {self.kind!r}")


def mixture_probs(tilt: float) -> np.ndarray:
    """Interval probabilities proportional to ``exp(tilt * k)``, k = 0..5."""
    k = np.arange(len(INTERVAL_EDGES) - 1)
    logits = tilt * k
    w = np.exp(logits - logits.max())
    return w / w.sum()


def _weibull_scale_for_mean(mean, shape):
    # S(t) = exp(-lam * t**shape) has mean Gamma(1 + 1/shape) / lam**(1/shape)
    return (gamma_fn(1.0 + 1.0 / shape) / np.asarray(mean, dtype=float)) ** shape


def _threshold_extreme(zeta):
    return (zeta > 0.4) | (zeta < -0.6)


@dataclass
class Latent:
    """Uncensored truth for generated subjects."""

    z1: np.ndarray
    z2: np.ndarray
    zeta: np.ndarray
    cause: np.ndarray
    time: np.ndarray


def generate_latent(config: FineGrayConfig, n: int, rng: np.random.Generator) -> Latent:
    z1 = rng.standard_normal(n)
    z2 = rng.integers(0, 2, n).astype(float)
    zeta = config.beta[0] * z1 + config.beta[1] * z2
    eta2 = config.gamma[0] * z1 + config.gamma[1] * z2
    v_cause = rng.random(n)
    v_time = rng.random(n)
    p1 = 1.0 - (1.0 - config.p) ** np.exp(zeta)
    is1 = v_cause < p1
    # invert F1(t|Z) = v * P1 for cause 1
    target = v_time * p1
    inner = (1.0 - (1.0 - target) ** np.exp(-zeta)) / config.p
    inner = np.clip(inner, 0.0, 1.0 - 1e-16)
    t1 = (-np.log1p(-inner) / config.weibull_scale) ** (1.0 / config.weibull_shape)
    rate2 = config.cause2_rate_scale * np.exp(eta2)
    t2 = -np.log1p(-v_time) / rate2
    time = np.where(is1, t1, t2)
    cause = np.where(is1, 1, 2)
    return Latent(z1, z2, zeta, cause, time)


def draw_censoring(censoring: CensoringConfig, zeta: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    n = zeta.size
    v1 = rng.random(n)
    v2 = rng.random(n)
    if censoring.kind == "none":
        return np.full(n, np.inf)
    if censoring.kind == "mixture":
        cum = np.cumsum(censoring.probs)
        k = np.minimum(np.searchsorted(cum, v1 * cum[-1], side="right"), len(cum) - 1)
        return INTERVAL_EDGES[k] + 3.0 * (1.0 - v2)  # (lo, lo + 3]
    if censoring.kind == "threshold":
        mean = np.where(_threshold_extreme(zeta), censoring.a, censoring.b)
        lam = _weibull_scale_for_mean(mean, censoring.shape)
    else:
        lam = censoring.scale * np.exp(censoring.coefficient * zeta)
    return (-np.log1p(-v2) / lam) ** (1.0 / censoring.shape)


def generate_dataset(
    config: FineGrayConfig,
    censoring: CensoringConfig,
    n: int,
    rng_seed,
    tau: float,
) -> tuple[CompetingRiskSample, Latent]:
    """Simulated sample scored by ``F1(tau | Z)`` plus latent truth in sample order."""
    if n < 1:
        raise InvalidConfig("n must be positive")
    rng = np.random.default_rng(rng_seed)
    lat = generate_latent(config, n, rng)
    c = draw_censoring(censoring, lat.zeta, rng)
    observed = np.minimum(lat.time, c)
    status = np.where(lat.time <= c, lat.cause, 0)
    score = config.cif1(tau, lat.zeta)
    order = np.lexsort((status == 0, observed))
    sample = CompetingRiskSample(observed[order], status[order], score[order], n_causes=2)
    lat = Latent(*(getattr(lat, f)[order] for f in ("z1", "z2", "zeta", "cause", "time")))
    return sample, lat


def censoring_rate(censoring: CensoringConfig, lat: Latent) -> float:
    """Expected fraction censored given latent event times (exact in C)."""
    t = lat.time
    if censoring.kind == "none":
        return 0.0
    if censoring.kind == "mixture":
        lo = INTERVAL_EDGES[:-1]
        per_interval = np.clip((t[:, None] - lo[None, :]) / 3.0, 0.0, 1.0).mean(axis=0)
        return float(np.dot(censoring.probs, per_interval))
    if censoring.kind == "threshold":
        mean = np.where(_threshold_extreme(lat.zeta), censoring.a, censoring.b)
        lam = _weibull_scale_for_mean(mean, censoring.shape)
    else:
        lam = censoring.scale * np.exp(censoring.coefficient * lat.zeta)
    return float(np.mean(-np.expm1(-lam * t**censoring.shape)))


def _bisect(f, lo, hi, target, increasing, tol=1e-10, max_iter=200):
    flo, fhi = f(lo), f(hi)
    if increasing:
        ok = flo <= target <= fhi
    else:
        ok = fhi <= target <= flo
    if not ok:
        raise InvalidConfig(f"target {target} outside attainable range [{min(flo, fhi):.4f}, {max(flo, fhi):.4f}]")
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        fm = f(mid)
        if (fm < target) == increasing:
            lo = mid
        else:
            hi = mid
        if hi - lo < tol:
            break
    return 0.5 * (lo + hi)


@dataclass(frozen=True)
class DependentDefaults:
    """Shape parameters of the dependent-censoring settings.

    ``ratio`` is ``b / a`` for the threshold setting; the overall level is
    calibrated. ``coefficient`` is the log hazard ratio per unit ``zeta``
    for the Cox setting.
    """

    threshold_shape: float = 4.0
    threshold_ratio: float = 0.1
    cox_shape: float = 1.0
    cox_coefficient: float = 1.0


DEPENDENT_DEFAULTS = DependentDefaults()


def calibrate_censoring(
    config: FineGrayConfig,
    mechanism: str,
    target: float,
    seed=0,
    n_calib: int = CALIBRATION_N,
    dependent: DependentDefaults = DEPENDENT_DEFAULTS,
) -> CensoringConfig:
    """Censoring config whose expected censoring fraction equals ``target``."""
    if not 0 < target < 1:
        raise InvalidConfig(f"censoring target must lie in (0, 1), got {target}")
    lat = generate_latent(config, n_calib, np.random.default_rng(seed))
    if mechanism == "independent":
        def rate(tilt):
            return censoring_rate(CensoringConfig("mixture", tuple(mixture_probs(tilt))), lat)

        tilt = _bisect(rate, -20.0, 20.0, target, increasing=False)
        return CensoringConfig("mixture", tuple(mixture_probs(tilt)))
    if mechanism == "threshold":
        ratio, shape = dependent.threshold_ratio, dependent.threshold_shape

        def rate(log_a):
            a = math.exp(log_a)
            return censoring_rate(CensoringConfig("threshold", a=a, b=a * ratio, shape=shape), lat)

        log_a = _bisect(rate, -10.0, 10.0, target, increasing=False)
        a = math.exp(log_a)
        return CensoringConfig("threshold", a=a, b=a * ratio, shape=shape)
    if mechanism == "cox":
        coef, shape = dependent.cox_coefficient, dependent.cox_shape

        def rate(log_s):
            return censoring_rate(
                CensoringConfig("cox", coefficient=coef, scale=math.exp(log_s), shape=shape), lat
            )

        log_s = _bisect(rate, -15.0, 10.0, target, increasing=True)
        return CensoringConfig("cox", coefficient=coef, scale=math.exp(log_s), shape=shape)
    raise InvalidConfig(f"unknown censoring mechanism {mechanism!r}; choose from {MECHANISMS}")


def select_tau(config: FineGrayConfig, censoring: CensoringConfig, rng_seed=0, n_calib: int = CALIBRATION_N) -> float:
    """65% quantile of the observed times in a large calibration sample."""
    rng = np.random.default_rng(rng_seed)
    lat = generate_latent(config, n_calib, rng)
    c = draw_censoring(censoring, lat.zeta, rng)
    return float(np.quantile(np.minimum(lat.time, c), TAU_QUANTILE))


@dataclass(frozen=True)
class TrueValues:
    auc_a: float
    auc_b: float
    brier: float
    se: dict = field(default_factory=dict)

    def get(self, metric: str) -> float:
        return getattr(self, metric)


class _Indicators:
    """Weights object built from known case/control status."""

    def __init__(self, tau, case, competing, survivor):
        self.tau = tau
        self.case_mass = case.astype(float)
        self._a = (competing | survivor).astype(float)
        self._b = survivor.astype(float)

    def control_mass(self, definition="A"):
        return self._a if definition == "A" else self._b


def latent_indicators(lat: Latent, tau: float) -> _Indicators:
    early = lat.time <= tau
    return _Indicators(tau, early & (lat.cause == 1), early & (lat.cause != 1), ~early)


def true_values(
    config: FineGrayConfig,
    tau: float,
    n_oracle_datasets: int = 200,
    n_per_dataset: int = 5000,
    rng_seed=0,
    score_fn=None,
) -> TrueValues:
    """Monte Carlo truth from uncensored datasets, with standard errors.

    ``score_fn(lat, rng)`` replaces the default score ``F1(tau | Z)``.
    """
    if n_oracle_datasets < 1:
        raise InvalidConfig("need at least one oracle dataset")
    ss = np.random.SeedSequence(rng_seed)
    vals = np.empty((n_oracle_datasets, 3))
    for d, child in enumerate(ss.spawn(n_oracle_datasets)):
        rng = np.random.default_rng(child)
        lat = generate_latent(config, n_per_dataset, rng)
        u = config.cif1(tau, lat.zeta) if score_fn is None else score_fn(lat, rng)
        ind = latent_indicators(lat, tau)
        vals[d] = (
            auc_concordance(ind, u, "A"),
            auc_concordance(ind, u, "B"),
            brier(ind, np.clip(u, 0, 1)),
        )
    mean = vals.mean(axis=0)
    se = vals.std(axis=0, ddof=1) / math.sqrt(n_oracle_datasets) if n_oracle_datasets > 1 else np.zeros(3)
    return TrueValues(*mean.tolist(), se=dict(zip(METRICS, se.tolist())))


@dataclass(frozen=True)
class ScenarioConfig:
    event1_fraction: float = 0.70
    censoring_level: str = "medium"
    n: int = 300
    replicates: int = 200
    spec: KernelSpec = KernelSpec.with_span(0.05)
    seed: int = 1
    mechanism: str = "independent"
    tau: float | None = None
    n_oracle_datasets: int = 200
    n_per_dataset: int = 5000
    calibration_seed: int = 20190611

    def __post_init__(self):
        if self.replicates < 1:
            raise InvalidConfig("replicates must be >= 1")
        if self.n < 2:
            raise InvalidConfig("n must be >= 2")
        if self.censoring_level not in CENSORING_TARGETS:
            raise InvalidConfig(f"censoring level must be one of {sorted(CENSORING_TARGETS)}")
        if self.mechanism not in MECHANISMS:
            raise InvalidConfig(f"mechanism must be one of {MECHANISMS}")
        FineGrayConfig.for_event1_fraction(self.event1_fraction)

    @property
    def label(self) -> str:
        return (
            f"{int(round(self.event1_fraction * 100))}%/{self.censoring_level}/n={self.n}/"
            f"{self.spec.describe()}/{self.mechanism}"
        )


@dataclass(frozen=True)
class ScenarioSetup:
    """Per-cell calibration shared by every replicate and sample size."""

    fine_gray: FineGrayConfig
    censoring: CensoringConfig
    tau: float
    truth: TrueValues


@functools.lru_cache(maxsize=64)
def scenario_setup(
    event1_fraction: float,
    censoring_level: str,
    mechanism: str,
    tau: float | None = None,
    n_oracle_datasets: int = 200,
    n_per_dataset: int = 5000,
    calibration_seed: int = 20190611,
) -> ScenarioSetup:
    fg = FineGrayConfig.for_event1_fraction(event1_fraction)
    cens = calibrate_censoring(fg, mechanism, CENSORING_TARGETS[censoring_level], seed=calibration_seed)
    if tau is None:
        tau = select_tau(fg, cens, rng_seed=calibration_seed + 1)
    truth = true_values(fg, tau, n_oracle_datasets, n_per_dataset, rng_seed=calibration_seed + 2)
    return ScenarioSetup(fg, cens, float(tau), truth)


def setup_for(scenario: ScenarioConfig) -> ScenarioSetup:
    return scenario_setup(
        scenario.event1_fraction,
        scenario.censoring_level,
        scenario.mechanism,
        scenario.tau,
        scenario.n_oracle_datasets,
        scenario.n_per_dataset,
        scenario.calibration_seed,
    )


# a replicate fails when more than this fraction of weights is undefined
MAX_UNDEFINED_FRACTION = 0.05


def run_replicate(setup: ScenarioSetup, scenario: ScenarioConfig, methods, index: int):
    """Estimates for one replicate: ``{method: (auc_a, auc_b, brier) or None}`` and diagnostics."""
    seed = np.random.SeedSequence([scenario.seed, index])
    sample, _ = generate_dataset(setup.fine_gray, setup.censoring, scenario.n, seed, setup.tau)
    out = {}
    for method in methods:
        try:
            w = compute_weights(sample, setup.tau, method, scenario.spec, allow_undefined=True)
            if getattr(w, "n_undefined", 0) > MAX_UNDEFINED_FRACTION * sample.n:
                out[method] = None
                continue
            out[method] = (
                auc_concordance(w, sample.score, "A"),
                auc_concordance(w, sample.score, "B"),
                brier(w, sample.score),
            )
        except CompRiskError as exc:
            log.debug("replicate %d, %s failed: %s", index, method, exc)
            out[method] = None
    return out, float(np.mean(sample.status == 0))


@dataclass
class MetricSummary:
    method: str
    metric: str
    truth: float
    mean: float
    bias_pct: float
    mse_x1e3: float
    mc_se: float
    n_ok: int
    n_failed: int


@dataclass
class ScenarioResult:
    scenario: ScenarioConfig
    tau: float
    truth: TrueValues
    censoring: CensoringConfig
    summaries: list[MetricSummary]
    mean_censoring_fraction: float
    estimates: dict = field(default_factory=dict, repr=False)

    def get(self, method: str, metric: str) -> MetricSummary:
        for s in self.summaries:
            if s.method == method and s.metric == metric:
                return s
        raise KeyError((method, metric))

    def to_dict(self) -> dict:
        sc = asdict(self.scenario)
        sc["spec"] = self.scenario.spec.describe()
        return {
            "scenario": sc,
            "tau": self.tau,
            "truth": {m: self.truth.get(m) for m in METRICS},
            "truth_se": self.truth.se,
            "censoring": asdict(self.censoring),
            "mean_censoring_fraction": self.mean_censoring_fraction,
            "summaries": [asdict(s) for s in self.summaries],
        }


def _replicate_task(args):
    return run_replicate(*args)


def summarize(method, metric, truth, values, n_failed) -> MetricSummary:
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        nan = float("nan")
        return MetricSummary(method, metric, truth, nan, nan, nan, nan, 0, n_failed)
    mean = float(values.mean())
    mse = float(np.mean((values - truth) ** 2))
    se = float(values.std(ddof=1) / math.sqrt(values.size)) if values.size > 1 else 0.0
    return MetricSummary(
        method, metric, truth, mean, 100.0 * (mean - truth) / truth, 1e3 * mse, se, int(values.size), n_failed
    )


def run_scenario(
    scenario: ScenarioConfig,
    methods=("proposed", "ipcw-km", "ipcw-cox"),
    workers: int = 1,
) -> ScenarioResult:
    """Monte Carlo bias% and MSE of each method's estimates in one cell.

    Replicate ``r`` draws from ``SeedSequence([seed, r])`` so results do not
    depend on ``workers``.
    """
    setup = setup_for(scenario)
    methods = tuple(methods)
    tasks = [(setup, scenario, methods, r) for r in range(scenario.replicates)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_replicate_task, tasks, chunksize=max(1, len(tasks) // (4 * workers))))
    else:
        results = [_replicate_task(t) for t in tasks]
    estimates = {m: [r[0][m] for r in results] for m in methods}
    summaries = []
    for m in methods:
        ok = [e for e in estimates[m] if e is not None]
        failed = len(estimates[m]) - len(ok)
        arr = np.array(ok, dtype=float).reshape(-1, 3)
        for j, metric in enumerate(METRICS):
            summaries.append(summarize(m, metric, setup.truth.get(metric), arr[:, j], failed))
    cens = float(np.mean([r[1] for r in results]))
    return ScenarioResult(scenario, setup.tau, setup.truth, setup.censoring, summaries, cens, estimates)


def factorial_scenarios(replicates: int = 200, seed: int = 1, spec: KernelSpec | None = None,
                        mechanism: str = "independent", **kw) -> list[ScenarioConfig]:
    """The 3 x 2 x 2 grid of event-1 fraction, censoring level and n."""
    spec = spec or KernelSpec.with_span(0.05)
    return [
        ScenarioConfig(f, level, n, replicates, spec, seed, mechanism, **kw)
        for f in (0.70, 0.50, 0.30)
        for level in ("medium", "high")
        for n in (300, 600)
    ]


def with_replicates(scenario: ScenarioConfig, replicates: int) -> ScenarioConfig:
    return replace(scenario, replicates=replicates)
