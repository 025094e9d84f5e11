import math

import numpy as np
import pytest

from limebsi.forward_model import ExperimentConditions, error_amplification
from limebsi.probability import Normal, Observation, TruncatedNormal, Uniform
from limebsi.problems import (
    SIGMA_MEAS,
    GroundTruth,
    ProblemError,
    ProblemSpec,
    build_problem_I,
    build_problem_IIa,
    build_problem_IIb,
    default_schedule,
    ill_conditioning_sweep,
    initial_scales,
    run_problem,
    synthesize_data,
)
from limebsi.sampler import ChainConfig, split_rhat

TRUTH = GroundTruth(0.98, ExperimentConditions(0.0, 5.0, 20.0), 0.16, seed=1)


def test_schedule_and_synthesis():
    t = default_schedule(0.98, 20)
    assert t[0] == 0 and t[-1] == pytest.approx(3.92) and t.size == 20
    a = synthesize_data(TRUTH, t, np.random.default_rng(0))
    b = synthesize_data(TRUTH, t, np.random.default_rng(0))
    assert a == b
    with pytest.raises(ProblemError):
        synthesize_data(TRUTH, [-1.0], np.random.default_rng(0))


def test_problem_I_priors():
    data = synthesize_data(TRUTH, default_schedule(0.98), np.random.default_rng(0))
    p = build_problem_I(data, 5.1, 19.8)
    assert p.param_names == ("lam", "theta0", "theta_air", "sigma")
    assert p.prior("lam") == TruncatedNormal(1.0, 0.3, 0.0, math.inf)
    assert p.prior("theta0") == Normal(5.1, SIGMA_MEAS)
    assert p.prior("sigma") == Uniform(0.0, 1.0)
    assert p.fixed == {"t0": 0.0}
    with pytest.raises(ProblemError):
        build_problem_I([], 5.0, 20.0)


def test_problem_II_priors():
    a = build_problem_IIa(14.0, 1.0, 20.0)
    assert a.prior("theta0") == Uniform(0.0, 15.0)
    assert a.prior("lam") == Normal(0.98, 0.02)
    assert a.prior("sigma") == TruncatedNormal(0.16, 0.03, 0.0, math.inf)
    b = build_problem_IIb(14.0, 1.0, 20.0)
    assert b.prior("t0") == TruncatedNormal(-0.1, 0.25, -1.0, 1.0)
    assert b.strict_elapsed and b.fixed == {}
    with pytest.raises(ProblemError):
        build_problem_IIa(14.0, 0.0, 20.0)


def test_every_name_bound_once():
    with pytest.raises(ProblemError, match="'t0'"):
        ProblemSpec("x", (("lam", Normal(1, 1)), ("theta0", Normal(1, 1)), ("theta_air", Normal(1, 1)), ("sigma", Normal(1, 1))))
    with pytest.raises(ProblemError, match="'lam'"):
        ProblemSpec(
            "x",
            (("lam", Normal(1, 1)), ("theta0", Normal(1, 1)), ("theta_air", Normal(1, 1)), ("sigma", Normal(1, 1))),
            {"t0": 0.0, "lam": 1.0},
        )


def test_observation_before_fixed_t0_rejected():
    with pytest.raises(ProblemError):
        build_problem_I([Observation(-0.1, 5.0)], 5.0, 20.0)


def test_negative_lambda_and_late_t0_are_minus_inf():
    p = build_problem_IIa(14.0, 1.0, 20.0, priors={"lam": Normal(0.0, 1.0)})
    u = np.array([5.0, -0.5, 20.0, 0.16])
    assert p.log_posterior(u) == -math.inf
    b = build_problem_IIb(14.0, 0.5, 20.0)
    names = b.param_names
    u = dict(t0=0.5, theta0=5.0, lam=0.98, theta_air=20.0, sigma=0.16)
    assert b.log_posterior(np.array([u[n] for n in names])) == -math.inf
    u["t0"] = 0.4
    assert math.isfinite(b.log_posterior(np.array([u[n] for n in names])))


def test_initial_scales():
    p = build_problem_IIa(14.0, 1.0, 20.0)
    s = dict(zip(p.param_names, initial_scales(p)))
    assert s["theta0"] == pytest.approx(0.1 * 15 / math.sqrt(12))
    assert s["lam"] == pytest.approx(0.002)


def test_problem_I_recovers_lambda():
    rng = np.random.default_rng(3)
    data = synthesize_data(TRUTH, default_schedule(0.98), rng)
    p = build_problem_I(data, 5.0 + rng.normal(0, 0.16), 20.0 + rng.normal(0, 0.16))
    s = run_problem(p, ChainConfig(n_chains=4, n_steps=8000, seed=3))
    assert np.all(split_rhat(s) < 1.05)
    assert abs(s.column("lam").mean() - 0.98) < 0.05


def test_sweep_posterior_widens():
    cfg = ChainConfig(n_chains=2, n_steps=6000, seed=4)
    pts = ill_conditioning_sweep(TRUTH, [0.49, 1.96], cfg)
    assert pts[0].theta0_std < pts[1].theta0_std
    # first-order propagation of reading, air-temperature and lam uncertainty
    tp, lam = 0.49, 0.98
    amp = error_amplification(tp, 0.0, lam)
    gap = pts[0].theta_prime_obs - 20.0
    sd = math.sqrt((amp * 0.16) ** 2 + ((1 - amp) * SIGMA_MEAS) ** 2 + (gap * amp * tp / lam**2 * 0.02) ** 2)
    assert pts[0].theta0_std == pytest.approx(sd, rel=0.2)
    with pytest.raises(ProblemError):
        ill_conditioning_sweep(TRUTH, [1.0, 0.5], cfg)


def test_sweep_is_reproducible():
    cfg = ChainConfig(n_chains=2, n_steps=600, seed=5)
    a = ill_conditioning_sweep(TRUTH, [0.5, 1.0], cfg)
    b = ill_conditioning_sweep(TRUTH, [0.5, 1.0], cfg)
    assert [p.theta0_mean for p in a] == [p.theta0_mean for p in b]


def test_replicate_noise_statistics():
    t = np.full(10_000, 1.0)
    y = np.array([o.theta_obs for o in synthesize_data(TRUTH, t, np.random.default_rng(6))])
    assert y.std(ddof=1) == pytest.approx(0.16, rel=0.02)
    expected = 20 - 15 * math.exp(-1 / 0.98)
    assert abs(y.mean() - expected) < 3 * 0.16 / math.sqrt(t.size)


def test_prior_only_sampling_reproduces_every_marginal():
    from scipy import stats

    p = ProblemSpec(
        "prior",
        (("lam", TruncatedNormal(1.0, 0.3, 0.0, math.inf)), ("theta0", Normal(5.0, 0.5)), ("theta_air", Uniform(15, 25)), ("sigma", Uniform(0.0, 1.0))),
        {"t0": 0.0},
    )
    s = run_problem(p, ChainConfig(n_chains=4, n_steps=60_000, seed=7))
    for name, d in p.unknowns:
        x = s.chains(name)[:, ::30].ravel()  # thin to roughly independent draws
        assert stats.kstest(x, d.cdf).pvalue > 0.01, name


def _fit_I(n, seed, steps=8000):
    rng = np.random.default_rng(seed)
    data = synthesize_data(TRUTH, default_schedule(0.98, n), rng)
    p = build_problem_I(data, 5.0 + rng.normal(0, 0.16), 20.0 + rng.normal(0, 0.16))
    return p, run_problem(p, ChainConfig(n_chains=4, n_steps=steps, seed=seed))


def test_problem_I_trajectories_and_residuals():
    from limebsi.analysis import posterior_trajectories, residual_distributions

    p, s = _fit_I(20, 8)
    t = np.array([o.t for o in p.data])
    y = np.array([o.theta_obs for o in p.data])
    ens = posterior_trajectories(s, 200, t, fixed=p.fixed, rng=np.random.default_rng(0))
    assert np.max(np.abs(ens.mean_curve() - y)) < 0.25 + 3 * 0.16  # within the band plus one noisy reading
    assert np.mean(np.abs(ens.mean_curve() - y) < 0.25) > 0.8
    res = residual_distributions(s, p.data, p.fixed)
    assert np.all(np.abs(np.median(res, axis=0)) < 3 * 0.16)


def test_residual_spread_shrinks_with_more_data():
    from limebsi.analysis import residual_distributions

    widths = []
    for n in (10, 100):
        p, s = _fit_I(n, 9)
        res = residual_distributions(s, p.data, p.fixed)
        # spread of the predicted mean across draws, averaged over times
        widths.append(np.mean(np.std(res, axis=0)))
    assert widths[1] < widths[0]


def test_IIa_interval_contains_truth_at_one_hour():
    rng = np.random.default_rng(10)
    (obs,) = synthesize_data(TRUTH, [1.0], rng)
    p = build_problem_IIa(obs.theta_obs, 1.0, 20.0 + rng.normal(0, 0.16))
    s = run_problem(p, ChainConfig(n_chains=4, n_steps=8000, seed=10))
    from limebsi.analysis import equal_tailed_ci, posterior_trajectories

    lo, hi = equal_tailed_ci(s.column("theta0"), 0.9)
    assert lo < 5.0 < hi
    ens = posterior_trajectories(s, 200, [1.0], fixed=p.fixed, rng=np.random.default_rng(0))
    sig = s.column("sigma").mean()
    assert np.all(np.abs(ens.curves[:, 0] - obs.theta_obs) < 4 * sig)


def test_sweep_limits():
    from scipy import stats

    cfg = ChainConfig(n_chains=4, n_steps=10_000, seed=11)
    near, far = ill_conditioning_sweep(TRUTH, [0.01, 5 * 0.98], cfg)
    # amplification ~1: spread is the reading noise
    assert near.theta0_std == pytest.approx(0.16, rel=0.25)
    assert stats.kstest(far.theta0_draws, stats.uniform(0, 15).cdf).statistic < 0.1
