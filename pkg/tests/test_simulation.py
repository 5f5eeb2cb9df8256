import numpy as np
import pytest
from scipy import integrate, stats

from compriskacc.data import KernelSpec
from compriskacc.errors import InvalidConfig
from compriskacc.estimate import evaluate
from compriskacc.simulation import (
    CensoringConfig,
    FineGrayConfig,
    ScenarioConfig,
    calibrate_censoring,
    censoring_rate,
    draw_censoring,
    factorial_scenarios,
    generate_dataset,
    generate_latent,
    mixture_probs,
    run_scenario,
    select_tau,
    true_values,
)

LATE = CensoringConfig("mixture", (0, 0, 0, 0, 0, 1.0))


def test_event1_fraction_thirty_percent():
    cfg = FineGrayConfig.for_event1_fraction(0.30)
    lat = generate_latent(cfg, 100_000, np.random.default_rng(3))
    assert abs(np.mean(lat.cause == 1) - 0.30) < 0.01


def _expected_p1(cfg):
    def integrand(z1):
        return sum(0.5 * (1 - (1 - cfg.p) ** np.exp(cfg.beta[0] * z1 + cfg.beta[1] * z2)) for z2 in (0, 1))

    return integrate.quad(lambda z: integrand(z) * stats.norm.pdf(z), -12, 12)[0]


@pytest.mark.parametrize("fraction", [0.30, 0.50, 0.70])
def test_event1_fraction_matches_closed_form(fraction):
    cfg = FineGrayConfig.for_event1_fraction(fraction)
    n = 100_000
    lat = generate_latent(cfg, n, np.random.default_rng(4))
    expected = _expected_p1(cfg)
    assert abs(expected - fraction) < 0.02
    assert abs(np.mean(lat.cause == 1) - expected) < 3 * np.sqrt(expected * (1 - expected) / n)


def test_cause1_time_inverse_cdf():
    cfg = FineGrayConfig(beta=(0.0, 0.0), weibull_scale=0.3, weibull_shape=1.7)
    lat = generate_latent(cfg, 30_000, np.random.default_rng(8))
    t = lat.time[lat.cause == 1]
    assert t.size > 10_000
    p1 = cfg.cif1(np.inf, 0.0)
    res = stats.kstest(t[:10_000], lambda x: cfg.cif1(x, 0.0) / p1)
    assert res.pvalue > 0.01


def test_cause2_time_exponential():
    cfg = FineGrayConfig(gamma=(0.0, 0.0), cause2_rate_scale=0.7)
    lat = generate_latent(cfg, 20_000, np.random.default_rng(9))
    t = lat.time[lat.cause == 2]
    assert stats.kstest(t, "expon", args=(0, 1 / 0.7)).pvalue > 0.01


def test_late_censoring_rate_near_zero():
    cfg = FineGrayConfig(weibull_scale=2.0)
    lat = generate_latent(cfg, 20_000, np.random.default_rng(1))
    assert censoring_rate(LATE, lat) < 0.01


def test_mixture_draws_on_intervals():
    probs = mixture_probs(0.3)
    assert probs.sum() == pytest.approx(1.0) and np.all(np.diff(probs) > 0)
    c = draw_censoring(CensoringConfig("mixture", tuple(probs)), np.zeros(60_000), np.random.default_rng(2))
    assert c.min() > 0 and c.max() <= 18
    counts = np.bincount(np.minimum((np.ceil(c / 3) - 1).astype(int), 5), minlength=6) / c.size
    assert np.allclose(counts, probs, atol=0.01)


def test_invalid_configs():
    with pytest.raises(InvalidConfig):
        FineGrayConfig(p=1.2)
    with pytest.raises(InvalidConfig):
        CensoringConfig("mixture", (0.5, 0.5, 0.5, 0, 0, 0))
    with pytest.raises(InvalidConfig):
        CensoringConfig("threshold", a=-1.0)
    with pytest.raises(InvalidConfig):
        FineGrayConfig.for_event1_fraction(0.4)
    with pytest.raises(InvalidConfig):
        ScenarioConfig(replicates=0)


@pytest.mark.parametrize("mechanism,target", [("independent", 0.275), ("independent", 0.475),
                                              ("threshold", 0.275), ("cox", 0.275)])
def test_calibrated_censoring_hits_target(mechanism, target):
    cfg = FineGrayConfig.for_event1_fraction(0.7)
    cens = calibrate_censoring(cfg, mechanism, target, seed=4, n_calib=50_000)
    n = 100_000
    s, _ = generate_dataset(cfg, cens, n, rng_seed=77, tau=3.0)
    rate = np.mean(s.status == 0)
    assert abs(rate - target) < 3 * np.sqrt(target * (1 - target) / n) + 0.005


def test_tau_quantile_and_determinism():
    cfg = FineGrayConfig.for_event1_fraction(0.7)
    cens = calibrate_censoring(cfg, "independent", 0.275, n_calib=50_000)
    tau = select_tau(cfg, cens, rng_seed=5, n_calib=50_000)
    assert tau == select_tau(cfg, cens, rng_seed=5, n_calib=50_000)
    s, _ = generate_dataset(cfg, cens, 100_000, rng_seed=6, tau=tau)
    frac = np.mean(s.time <= tau)
    assert abs(frac - 0.65) < 3 * np.sqrt(0.65 * 0.35 / 100_000) + 0.003


def test_heavier_censoring_shifts_tau_left():
    cfg = FineGrayConfig.for_event1_fraction(0.5)
    med = calibrate_censoring(cfg, "independent", 0.275, n_calib=50_000)
    high = calibrate_censoring(cfg, "independent", 0.475, n_calib=50_000)
    taus = {k: [select_tau(cfg, c, rng_seed=s, n_calib=20_000) for s in range(5)] for k, c in
            (("med", med), ("high", high))}
    diff = np.mean(taus["med"]) - np.mean(taus["high"])
    spread = np.std(taus["med"] + taus["high"], ddof=1)
    assert diff > 3 * spread / np.sqrt(5)


def test_uncensored_tau_is_event_time_quantile():
    cfg = FineGrayConfig(weibull_scale=1.0, cause2_rate_scale=1.0)
    tau = select_tau(cfg, LATE, rng_seed=2, n_calib=50_000)
    lat = generate_latent(cfg, 50_000, np.random.default_rng(2))
    assert tau == pytest.approx(np.quantile(lat.time, 0.65))


def test_true_values_with_noise_score():
    cfg = FineGrayConfig.for_event1_fraction(0.5)
    tv = true_values(cfg, 3.0, n_oracle_datasets=20, n_per_dataset=2000, rng_seed=1,
                     score_fn=lambda lat, rng: rng.random(lat.zeta.size))
    assert abs(tv.auc_a - 0.5) < 4 * tv.se["auc_a"] + 1e-3
    assert abs(tv.auc_b - 0.5) < 4 * tv.se["auc_b"] + 1e-3


def test_true_values_order_of_magnitude():
    cfg = FineGrayConfig.for_event1_fraction(0.7)
    tv = true_values(cfg, 5.57, n_oracle_datasets=10, n_per_dataset=5000, rng_seed=3)
    assert 0.65 < tv.auc_a < 0.75 and 0.6 < tv.auc_b < 0.72 and 0.17 < tv.brier < 0.23
    assert tv.auc_a > tv.auc_b


def test_proposed_on_uncensored_reproduces_truth():
    cfg = FineGrayConfig.for_event1_fraction(0.7)
    none = CensoringConfig("none")
    tau = 4.0
    tv = true_values(cfg, tau, n_oracle_datasets=40, n_per_dataset=2000, rng_seed=10)
    est = []
    for r in range(40):
        s, _ = generate_dataset(cfg, none, 2000, rng_seed=np.random.SeedSequence([99, r]), tau=tau)
        est.append(evaluate(s, tau).auc_a)
    se = np.std(est, ddof=1) / np.sqrt(len(est))
    assert abs(np.mean(est) - tv.auc_a) < 3 * np.hypot(se, tv.se["auc_a"])


def test_dataset_sorted_and_scored():
    cfg = FineGrayConfig.for_event1_fraction(0.7)
    cens = CensoringConfig("mixture", tuple(mixture_probs(0.0)))
    s, lat = generate_dataset(cfg, cens, 500, rng_seed=4, tau=3.0)
    assert np.all(np.diff(s.time) >= 0)
    assert np.allclose(s.score, cfg.cif1(3.0, lat.zeta))
    observed = s.status != 0
    assert np.allclose(s.time[observed], lat.time[observed])
    assert np.array_equal(s.status[observed], lat.cause[observed])
    assert np.all(lat.time[~observed] >= s.time[~observed])


SMALL = dict(n_oracle_datasets=5, n_per_dataset=2000)


def test_run_scenario_reproducible():
    sc = ScenarioConfig(0.7, "medium", 150, 6, KernelSpec.with_span(0.1), seed=3, **SMALL)
    a = run_scenario(sc)
    b = run_scenario(sc)
    assert a.to_dict() == b.to_dict()
    assert len(a.summaries) == 9
    for m in a.summaries:
        assert m.mse_x1e3 >= 0 and m.n_ok + m.n_failed == 6
        assert m.bias_pct == pytest.approx(100 * (m.mean - m.truth) / m.truth)


def test_run_scenario_worker_invariant():
    sc = ScenarioConfig(0.5, "high", 120, 4, KernelSpec.with_span(0.2), seed=9, **SMALL)
    assert run_scenario(sc, ("proposed",), workers=1).to_dict() == run_scenario(sc, ("proposed",), workers=2).to_dict()


def test_factorial_size():
    cells = factorial_scenarios(replicates=10)
    assert len(cells) == 12 and len({c.label for c in cells}) == 12
