"""Degradation truth, diagnosis, forecast fitting, and RUL distributions."""

import math

import numpy as np
import pytest

from rescap.line import make_analytic2
from rescap.oracle import check_feasibility
from rescap.phm import (DegradationParams, ForecastPosterior, NotEnoughData,
                        RulSummary, SingularDesign, clip_onset, crossing_time,
                        fit_forecast, rul_over_time, rul_pmf, rul_summary,
                        sample_trajectories, simulate_observations,
                        true_degradation)

TWO_MACHINES = [DegradationParams(theta=0.1, beta=0.21),
                DegradationParams(theta=0.1, beta=0.21)]


def analytic2_feasible(d):
    line = make_analytic2()
    return check_feasibility(line, np.clip(d, 0.0, 1.0)).feasible


def analytic2_membership(x):
    line = make_analytic2()
    return np.array([1.0 if check_feasibility(line, np.clip(d, 0.0, 1.0)).feasible
                     else 0.0 for d in np.atleast_2d(x)])


# ------------------------------------------------------------------ truth

def test_params_validation():
    with pytest.raises(ValueError):
        DegradationParams(theta=0.0, beta=0.1)
    with pytest.raises(ValueError):
        DegradationParams(theta=0.1, beta=-0.1)
    with pytest.raises(ValueError):
        DegradationParams(theta=0.1, beta=0.1, phi=1.0)


def test_true_degradation_values_and_clip():
    p = DegradationParams(theta=0.1, beta=0.21)
    assert true_degradation(p, 0.0) == pytest.approx(0.1)
    assert true_degradation(p, 5.0) == pytest.approx(0.1 * math.exp(1.05))
    assert true_degradation(p, 20.0) == 1.0
    onset = clip_onset(p)
    assert onset == pytest.approx(math.log(10.0) / 0.21)
    assert true_degradation(p, onset + 0.01) == 1.0
    assert true_degradation(p, onset - 0.01) < 1.0


def test_clip_onset_edge_cases():
    assert clip_onset(DegradationParams(theta=1.5, beta=0.1)) == 0.0
    assert clip_onset(DegradationParams(theta=0.1, beta=0.0)) is None
    assert clip_onset(DegradationParams(theta=0.2, beta=0.0, phi=0.85)) == 0.0


def test_true_degradation_is_monotone():
    p = DegradationParams(theta=0.05, beta=0.3, phi=0.1)
    t = np.linspace(0.0, 30.0, 200)
    d = true_degradation(p, t)
    assert np.all(np.diff(d) >= 0.0)
    assert np.all((d >= 0.1) & (d <= 1.0))


# -------------------------------------------------------------- diagnosis

def test_observations_zero_noise_equal_truth():
    times = np.arange(10.0)
    obs = simulate_observations(TWO_MACHINES, times, 0.0, seed=4)
    want = true_degradation(TWO_MACHINES[0], times)
    assert np.array_equal(obs[:, 0], want)
    assert np.array_equal(obs[:, 1], want)


def test_observations_noisy_clipped_and_seeded():
    times = np.arange(50.0)
    a = simulate_observations(TWO_MACHINES, times, 0.2, seed=7)
    b = simulate_observations(TWO_MACHINES, times, 0.2, seed=7)
    c = simulate_observations(TWO_MACHINES, times, 0.2, seed=8)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)
    assert np.all((a >= 0.0) & (a <= 1.0))
    assert not np.array_equal(a[:, 0], a[:, 1])   # independent noise per machine
    with pytest.raises(ValueError):
        simulate_observations(TWO_MACHINES, times, -0.1, seed=0)


# ------------------------------------------------------------ forecasting

def test_fit_recovers_exact_exponential():
    p = DegradationParams(theta=0.07, beta=0.12)
    times = np.arange(15.0)
    post = fit_forecast(times, true_degradation(p, times))
    assert post.mean[0] == pytest.approx(math.log(0.07), abs=1e-9)
    assert post.mean[1] == pytest.approx(0.12, abs=1e-10)
    assert post.sigma2 == pytest.approx(0.0, abs=1e-20)
    assert post.n_used == 15
    assert np.allclose(post.cov, post.cov.T)
    curve = post.curve(times)
    assert np.max(np.abs(curve - true_degradation(p, times))) < 1e-9


def test_fit_with_offset_phi():
    p = DegradationParams(theta=0.05, beta=0.2, phi=0.3)
    times = np.arange(10.0)
    post = fit_forecast(times, true_degradation(p, times), phi=0.3)
    assert post.phi == 0.3
    assert post.mean[1] == pytest.approx(0.2, abs=1e-10)


def test_fit_excludes_observations_at_floor():
    times = np.arange(8.0)
    obs = np.array([0.0, 0.0, 0.0, 0.1, 0.12, 0.15, 0.19, 0.24])
    post = fit_forecast(times, obs)
    assert post.n_used == 5


def test_fit_not_enough_data():
    with pytest.raises(NotEnoughData):
        fit_forecast(np.arange(2.0), np.array([0.1, 0.2]))
    with pytest.raises(NotEnoughData):
        fit_forecast(np.arange(5.0), np.array([0.0, 0.0, 0.0, 0.1, 0.2]))


def test_fit_singular_design():
    with pytest.raises(SingularDesign):
        fit_forecast(np.array([2.0, 2.0, 2.0]), np.array([0.1, 0.12, 0.14]))


def test_fit_input_validation():
    with pytest.raises(ValueError):
        fit_forecast(np.arange(4.0), np.array([0.1, 0.2, 0.3]))
    with pytest.raises(ValueError):
        fit_forecast(np.arange(3.0), np.array([0.1, np.nan, 0.3]))


def test_fit_posterior_covers_truth_under_noise():
    p = DegradationParams(theta=0.3, beta=0.02)
    times = np.arange(50.0)
    hits = 0
    for seed in range(20):
        obs = simulate_observations([p], times, 0.1, seed=seed)[:, 0]
        post = fit_forecast(times, obs)
        if abs(post.mean[1] - 0.02) <= 2.0 * math.sqrt(post.cov[1, 1]):
            hits += 1
    assert hits >= 17


# ------------------------------------------------------------ trajectories

def test_trajectories_deterministic_and_clipped():
    p = DegradationParams(theta=0.3, beta=0.02)
    times = np.arange(40.0)
    obs = simulate_observations([p], times, 0.05, seed=3)[:, 0]
    post = fit_forecast(times, obs)
    future = np.arange(40.0, 90.0)
    a = sample_trajectories(post, future, 30, seed=11)
    b = sample_trajectories(post, future, 30, seed=11)
    c = sample_trajectories(post, future, 30, seed=12)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)
    assert a.shape == (30, 50)
    assert np.all((a >= 0.0) & (a <= 1.0))
    with pytest.raises(ValueError):
        sample_trajectories(post, future, 0, seed=0)


def test_trajectories_collapse_without_uncertainty():
    post = ForecastPosterior(phi=0.0, mean=np.array([math.log(0.1), 0.2]),
                             cov=np.zeros((2, 2)), sigma2=0.0, n_used=10)
    times = np.arange(10.0)
    traj = sample_trajectories(post, times, 25, seed=5)
    want = post.curve(times)
    assert np.max(np.abs(traj - want[None, :])) == 0.0


# ------------------------------------------------------------------- pmf

def test_rul_pmf_half_membership_is_geometric():
    pmf, survival = rul_pmf(np.full(10, 0.5))
    assert np.array_equal(pmf, 0.5 ** np.arange(1, 11))
    assert survival == 0.5 ** 10


def test_rul_pmf_certain_exit_at_known_interval():
    c = np.array([1.0, 1.0, 0.0, 1.0])
    pmf, survival = rul_pmf(c)
    assert pmf.tolist() == [0.0, 0.0, 1.0, 0.0]
    assert survival == 0.0


def test_rul_pmf_averages_rows():
    rows = np.array([[0.0, 1.0], [1.0, 0.0]])
    pmf, survival = rul_pmf(rows)
    assert pmf.tolist() == [0.5, 0.5]
    assert survival == 0.0


def test_rul_pmf_normalization_in_random_cases():
    rng = np.random.default_rng(3)
    worst = 0.0
    for _ in range(1000):
        pmf, survival = rul_pmf(rng.uniform(size=100))
        worst = max(worst, abs(pmf.sum() + survival - 1.0))
    assert worst <= 1e-12


def test_rul_pmf_validation():
    with pytest.raises(ValueError):
        rul_pmf(np.array([0.5, 1.2]))


# --------------------------------------------------------------- summary

def test_rul_summary_hand_case():
    s = rul_summary(np.array([0.2, 0.5, 0.3]), 0.0)
    assert s.mean == pytest.approx(2.1)
    assert s.ml == 2
    assert s.q05 == 1
    assert s.q95 == 3
    assert not s.all_survived


def test_rul_summary_conditional_on_exit():
    s = rul_summary(np.array([0.1, 0.1]), 0.8)
    assert s.mean == pytest.approx(1.5)
    assert s.survival_mass == 0.8


def test_rul_summary_earliest_mode_on_tie():
    assert rul_summary(np.array([0.4, 0.4, 0.2]), 0.0).ml == 1


def test_rul_summary_all_survived():
    s = rul_summary(np.zeros(5), 1.0)
    assert s.all_survived
    assert math.isnan(s.mean)
    assert s.survival_mass == 1.0


# ------------------------------------------------------------- crossings

def test_crossing_time_matches_analytic_value():
    t_star = crossing_time(TWO_MACHINES, analytic2_feasible, t_max=50.0)
    assert t_star == pytest.approx(math.log(4.0) / 0.21, abs=1e-6)


def test_crossing_time_edges():
    hot = [DegradationParams(theta=0.9, beta=0.1),
           DegradationParams(theta=0.9, beta=0.1)]
    assert crossing_time(hot, analytic2_feasible, t_max=10.0) == 0.0
    cold = [DegradationParams(theta=0.1, beta=0.0),
            DegradationParams(theta=0.1, beta=0.0)]
    assert crossing_time(cold, analytic2_feasible, t_max=10.0) is None


# ------------------------------------------------------- full pipeline

def test_rul_over_time_zero_noise_exact_oracle():
    rows = rul_over_time(TWO_MACHINES, analytic2_membership, analytic2_feasible,
                         [2.0, 4.0], sigma_obs=0.0, n_traj=25, horizon=15, seed=1)
    t_star = math.log(4.0) / 0.21
    for row, want_ml in zip(rows, (5, 3)):
        s = row.summary
        assert s.ml == want_ml
        assert s.mean == want_ml
        assert s.q05 == s.q95 == want_ml
        assert s.survival_mass == 0.0
        assert row.ground_truth == pytest.approx(t_star - row.now, abs=1e-5)


def test_rul_over_time_unit_mass_is_exact():
    rows = rul_over_time(TWO_MACHINES, analytic2_membership, analytic2_feasible,
                         [3.0], sigma_obs=0.0, n_traj=10, horizon=10, seed=2)
    pmf_like = rows[0].summary
    assert pmf_like.ml == 4                        # crossing at 6.6014
    assert pmf_like.mean == 4.0


def test_rul_over_time_survivor_flag():
    cold = [DegradationParams(theta=0.05, beta=0.0),
            DegradationParams(theta=0.05, beta=0.0)]
    rows = rul_over_time(cold, analytic2_membership, analytic2_feasible,
                         [3.0], sigma_obs=0.0, n_traj=10, horizon=10, seed=3)
    assert rows[0].summary.all_survived
    assert rows[0].ground_truth == math.inf


def test_rul_over_time_deterministic():
    a = rul_over_time(TWO_MACHINES, analytic2_membership, analytic2_feasible,
                      [3.0, 4.0], sigma_obs=0.05, n_traj=20, horizon=12, seed=9)
    b = rul_over_time(TWO_MACHINES, analytic2_membership, analytic2_feasible,
                      [3.0, 4.0], sigma_obs=0.05, n_traj=20, horizon=12, seed=9)
    assert a == b
    c = rul_over_time(TWO_MACHINES, analytic2_membership, analytic2_feasible,
                      [3.0, 4.0], sigma_obs=0.05, n_traj=20, horizon=12, seed=10)
    assert a != c


def test_rul_over_time_validation():
    with pytest.raises(NotEnoughData):
        rul_over_time(TWO_MACHINES, analytic2_membership, analytic2_feasible,
                      [1.0], sigma_obs=0.0, n_traj=5, horizon=5, seed=0)
    with pytest.raises(ValueError):
        rul_over_time(TWO_MACHINES, analytic2_membership, analytic2_feasible,
                      [], sigma_obs=0.0)
    with pytest.raises(ValueError):
        rul_over_time(TWO_MACHINES, analytic2_membership, analytic2_feasible,
                      [3.0], sigma_obs=0.0, horizon=0)
