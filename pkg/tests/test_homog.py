import math

import numpy as np
import pytest

from hjhomog.env import DomainError, EnvSpec, sample_environment, with_seed
from hjhomog.families import bind_env_constants, transport
from hjhomog.game import shift_momentum
from hjhomog.homog import (A_OVER_KHAT, UTable, additive_surrogate_tails,
                           azuma_bound, check_concentration,
                           check_subadditivity, effective_H_properties,
                           estimate_U, extract_effective_H,
                           general_datum_homogenization, rate_experiment,
                           solve_box_for, strip_experiment,
                           subadditivity_defects, synthetic_table)

DX = DT = 0.25


def spec(seed=0, lo=-4.0, hi=12.0, amp=(0.0, 1.0)):
    return EnvSpec(dimension=1, rho=1.0, bump_radius=0.5, amp_lo=amp[0],
                   amp_hi=amp[1], channels=1, box_lo=(lo,), box_hi=(hi,),
                   seed=seed)


@pytest.fixture(scope="module")
def table():
    return estimate_U(transport(1.0), spec(), theta=[0.0], times=[2.0, 4.0, 8.0],
                      M=48, base_seed=101, dx=DX, dt=DT)


# ---------------------------------------------------------------------------
# sampling


def test_zero_amplitude_field_gives_zero_table():
    t = estimate_U(transport(1.0), spec(amp=(0.0, 0.0)), theta=[0.0],
                   times=[2.0, 4.0], M=6, base_seed=1, dx=DX, dt=DT)
    assert np.all(t.samples == 0.0)
    assert np.all(t.variances() == 0.0)


def test_momentum_shift_is_additive_per_sample():
    # singleton actions: u_theta(t, 0) = u_0(t, 0) + t * f * theta exactly
    theta = 0.7
    t0 = estimate_U(transport(1.0), spec(), theta=[0.0], times=[2.0, 4.0],
                    M=8, base_seed=33, dx=DX, dt=DT)
    t1 = estimate_U(transport(1.0), spec(), theta=[theta], times=[2.0, 4.0],
                    M=8, base_seed=33, dx=DX, dt=DT)
    for k, t in enumerate(t0.times):
        assert np.max(np.abs(t1.samples[k] - t0.samples[k] - t * theta)) < 1e-12


def test_worker_pool_matches_serial_bitwise():
    kw = dict(theta=[0.0], times=[2.0, 4.0], M=8, base_seed=7, dx=DX, dt=DT)
    serial = estimate_U(transport(1.0), spec(), **kw)
    pooled = estimate_U(transport(1.0), spec(), workers=2,
                        family_desc=("transport", {"speed": 1.0}), **kw)
    assert np.array_equal(serial.samples, pooled.samples)
    assert np.array_equal(serial.means(), pooled.means())


def test_mean_matches_field_mean_oracle(table):
    # singleton transport: E[u(t, 0)] = t * mean cost, so -U(t)/t = -mean
    env = sample_environment(spec())
    mu = env.mean_value
    k = table.times.index(8.0)
    se = table.stderr()[k]
    assert abs(table.means()[k] - 8.0 * mu) < 4 * 8.0 * se / math.sqrt(1)


def test_time_lipschitz_of_means(table):
    bound = table.beta
    m = table.means()
    se = table.stderr()
    for (t1, m1, s1), (t2, m2, s2) in zip(
            zip(table.times, m, se), list(zip(table.times, m, se))[1:]):
        assert abs(m2 - m1) <= bound * (t2 - t1) + 3 * (s1 + s2)


def test_env_box_must_cover_solve_box():
    with pytest.raises(DomainError, match="does not cover"):
        estimate_U(transport(1.0), spec(lo=-1.0, hi=4.0), theta=[0.0],
                   times=[8.0], M=2, base_seed=0, dx=DX, dt=DT)


def test_solve_box_for_covers_drift():
    lo, hi = solve_box_for(bind_env_constants(transport(1.5),
                                              sample_environment(spec())),
                           t_max=4.0, dx=0.25, report_radius=1.0)
    assert lo[0] <= -1.0
    assert hi[0] >= 1.0 + 4.0 * 1.5


# ---------------------------------------------------------------------------
# concentration


def test_azuma_bound_values():
    assert azuma_bound(np.ones(4), 2.0) == pytest.approx(2.0 * math.exp(-0.5))
    assert azuma_bound(np.ones(4), 0.0) == 2.0
    assert azuma_bound(np.zeros(3), 1.0) == 0.0
    assert azuma_bound(np.zeros(3), -1.0) == 2.0
    # doubling every increment quarters the exponent's rate
    b1 = azuma_bound(np.ones(4), 2.0)
    b2 = azuma_bound(2 * np.ones(4), 2.0)
    assert b2 == pytest.approx(2.0 * (b1 / 2.0) ** 0.25)
    with pytest.raises(ValueError):
        azuma_bound([-1.0, 1.0], 1.0)


def test_concentration_tails_qualitative(table):
    rep = check_concentration(table, t=8.0, M_grid=[0.0, 0.2, 0.4, 0.8])
    assert rep["tail_freqs"][0] == 1.0
    assert rep["monotone"]
    assert rep["log_tail_concave"]


def test_concentration_degenerate_and_order_invariance(table):
    const = UTable(theta=np.zeros(1), times=[1.0],
                   samples=np.full((1, 20), 3.0), base_seed=0, beta=1.0)
    rep = check_concentration(const, t=1.0, M_grid=[0.0, 0.5])
    assert rep["tail_freqs"] == [1.0, 0.0]
    assert rep["monotone"]
    fwd = check_concentration(table, t=8.0, M_grid=[0.2, 0.6])
    rev = check_concentration(table, t=8.0, M_grid=[0.6, 0.2])
    assert fwd["tail_freqs"] == rev["tail_freqs"]


def test_additive_surrogate_is_subgaussian():
    rep = additive_surrogate_tails(t=16, n_samples=20000,
                                   M_grid=[0.25, 0.5, 0.75, 1.0], seed=3)
    assert rep["slope"] < 0
    assert rep["r2"] > 0.95
    # the fitted rate actually dominates the observed far tail
    far = rep["tail_freqs"][-1]
    assert far <= 3.0 * math.exp(-rep["c_hat"] * 1.0**2)


# ---------------------------------------------------------------------------
# strip perturbation


def test_strip_zero_shift_is_inert():
    env = sample_environment(spec(seed=2))
    rep = strip_experiment(transport(1.0), env, lo=1.0, hi=2.5, shift=[0.0],
                           theta=[0.0], t=4.0, dx=DX, dt=DT,
                           box=((-1.0,), (6.0,)))
    assert rep["observed"] == 0.0
    assert rep["bound"] == 0.0


def test_strip_observed_within_crossing_bound():
    env = sample_environment(spec(seed=5))
    rep = strip_experiment(transport(1.0), env, lo=1.0, hi=2.5, shift=[0.8],
                           theta=[0.0], t=4.0, dx=DX, dt=DT,
                           box=((-1.0,), (6.0,)))
    assert rep["delta"] == 1.0
    assert rep["strip_width"] == pytest.approx(1.5)
    assert rep["bound"] == pytest.approx(1.5 * rep["cost_gap_sup"])
    # crossing-time estimate plus first-order scheme error on both solves
    assert rep["observed"] <= rep["bound"] + 10 * DX


def test_strip_rejects_degenerate():
    env = sample_environment(spec(seed=1))
    with pytest.raises(ValueError, match="strip"):
        strip_experiment(transport(1.0), env, lo=2.0, hi=2.0, shift=[0.5],
                         theta=[0.0], t=2.0, dx=DX, dt=DT,
                         box=((-1.0,), (4.0,)))


# ---------------------------------------------------------------------------
# subadditivity and extraction


def test_purely_additive_sequence_has_zero_defects():
    times = [4.0, 8.0, 16.0, 32.0]
    samples = np.array([[-2.0 * t] * 5 for t in times])
    t = UTable(theta=np.zeros(1), times=times, samples=samples,
               base_seed=0, beta=10.0)
    rows = subadditivity_defects(t)
    assert rows
    assert all(r["defect"] == 0.0 for r in rows)
    rep = check_subadditivity(t)
    assert rep["stable"]
    assert rep["K_hat_implied"] == 0.0


def test_planted_defect_normalization():
    t = synthetic_table([4.0, 8.0, 12.0, 16.0, 24.0, 32.0], h=1.0)
    rep = check_subadditivity(t)
    assert 0.0 < rep["K_hat_implied"] <= 2.5
    assert all(r["defect"] > 0 for r in rep["defects"])


@pytest.mark.parametrize("h", [-1.0, 0.0, 2.0])
def test_extract_recovers_planted_value(h):
    t = synthetic_table([4.0, 8.0, 12.0, 16.0, 24.0, 32.0], h=h)
    est = extract_effective_H(t)
    assert abs(est.H_hat - h) <= est.ci_halfwidth
    assert est.bias_band > 0


def test_extract_requires_three_times():
    t = synthetic_table([4.0, 8.0], h=1.0)
    with pytest.raises(ValueError, match="at least 3"):
        extract_effective_H(t)


def test_extract_is_odd_under_sample_negation():
    t = synthetic_table([4.0, 8.0, 16.0, 32.0], h=1.5)
    neg = UTable(theta=t.theta, times=t.times, samples=-t.samples,
                 base_seed=t.base_seed, beta=t.beta)
    # negating every sample flips the estimate; the band is sign-blind
    assert extract_effective_H(neg, K_hat=1.0).H_hat == pytest.approx(
        -extract_effective_H(t, K_hat=1.0).H_hat)


def test_extract_on_real_table_matches_mean_oracle(table):
    est = extract_effective_H(table)
    mu = sample_environment(spec()).mean_value
    assert abs(est.H_hat - (-mu)) <= est.ci_halfwidth
    assert est.ci_halfwidth < 1.0


def test_effective_H_properties_flags_violation():
    good = extract_effective_H(synthetic_table(
        [4.0, 8.0, 16.0, 32.0], h=0.5, beta=2.0))
    rep = effective_H_properties([good], beta=2.0)
    assert rep["growth_ok"]
    bad = extract_effective_H(synthetic_table(
        [4.0, 8.0, 16.0, 32.0], h=50.0, beta=2.0))
    bad.ci_halfwidth = 0.0
    rep2 = effective_H_properties([bad], beta=2.0)
    assert not rep2["growth_ok"]


def test_bias_band_constant():
    # sum over k >= 1 of 2^(-k/2) sqrt(k+1), evaluated independently
    want = sum(2.0 ** (-k / 2.0) * math.sqrt(k + 1.0) for k in range(1, 2000))
    assert A_OVER_KHAT == pytest.approx(want, abs=1e-9)
    assert 4.5 < A_OVER_KHAT < 5.0


# ---------------------------------------------------------------------------
# epsilon-rate


def test_rate_rejects_large_epsilon():
    with pytest.raises(ValueError, match="1/2"):
        rate_experiment(transport(1.0), spec(), theta=[0.0], eps_list=[0.75],
                        R=1.0, T=2.0, M=2, H_bar=-0.5, dx=DX, dt=DT,
                        base_seed=0)


def test_rate_degenerate_on_constant_field():
    s = spec(lo=-12.0, hi=28.0, amp=(0.0, 0.0))
    rep = rate_experiment(transport(1.0), s, theta=[0.0],
                          eps_list=[0.25, 0.125], R=1.0, T=2.0, M=3,
                          H_bar=0.0, dx=DX, dt=DT, base_seed=4)
    assert rep["degenerate"]
    assert rep["slope"] is None


def test_rate_small_run_shape():
    s = spec(lo=-12.0, hi=28.0)
    mu = sample_environment(s).mean_value
    rep = rate_experiment(transport(1.0), s, theta=[0.0],
                          eps_list=[0.25, 0.125], R=1.0, T=2.0, M=6,
                          H_bar=-mu, dx=DX, dt=DT, base_seed=11,
                          calibration_fraction=0.5)
    assert set(rep["medians"]) == {0.25, 0.125}
    assert rep["medians"][0.125] < rep["medians"][0.25]
    assert rep["K_hat"] > 0
    assert rep["exceedance_ok"]


# ---------------------------------------------------------------------------
# general initial data


def test_general_datum_distance_shrinks():
    # the scaled solves read the field at x / eps, so the box must cover
    # the solve box divided by the smallest epsilon
    env = sample_environment(spec(seed=13, lo=-50.0, hi=50.0))
    mu = env.mean_value

    def g(pts):
        x = np.atleast_2d(pts)[:, 0]
        return np.maximum(0.0, 1.0 - np.abs(x))

    grid = np.linspace(-2.0, 2.0, 81)
    rep = general_datum_homogenization(
        transport(1.0), env, H_bar_grid=grid, H_bar_vals=-mu - grid, g=g,
        speed_bound=1.0, eps_list=[0.25, 0.0625], R=1.0, T=1.0,
        dx0=DX, dt0=DT)
    assert set(rep["distances"]) == {0.25, 0.0625}
    assert rep["decreasing"]
