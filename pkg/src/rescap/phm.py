"""Degradation prognostics against a learned or exact capacity.

The health model is exponential per machine, d(t) = min(1, phi + theta
exp(beta t)) with t in control-interval units. Diagnosis observes d plus
Gaussian noise, clipped to [0, 1]. Forecasting fits log(d - phi) by ordinary
least squares, keeps the Gaussian coefficient posterior, and propagates it by
sampling trajectories. A capacity membership function c(d) in [0, 1] turns
trajectories into a remaining-useful-life distribution over future intervals:
within one trajectory the probability of first exit at interval k telescopes,
so the pmf plus the survival mass is exactly one.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .util import derive_seed

# seed-derivation stream ids (prognostics namespace)
_S_OBS = 11
_S_TRAJ = 12
_S_COEF = 13

LOG_EXCLUSION_DELTA = 1e-6


class NotEnoughData(ValueError):
    """Fewer than three observations usable for the log-space fit."""


class SingularDesign(ValueError):
    """All usable observation times coincide; the slope is unidentifiable."""


@dataclass(frozen=True)
class DegradationParams:
    """Exponential health-index parameters for one machine."""
    theta: float
    beta: float
    phi: float = 0.0

    def __post_init__(self):
        if not (0.0 <= self.phi < 1.0):
            raise ValueError("phi must lie in [0, 1)")
        if not (self.theta > 0.0) or not math.isfinite(self.theta):
            raise ValueError("theta must be positive")
        if not (self.beta >= 0.0) or not math.isfinite(self.beta):
            raise ValueError("beta must be nonnegative")


def true_degradation(params: DegradationParams, times) -> np.ndarray:
    """Deterministic health index min(1, phi + theta exp(beta t))."""
    t = np.asarray(times, dtype=np.float64)
    with np.errstate(over="ignore"):
        d = params.phi + params.theta * np.exp(params.beta * t)
    return np.minimum(d, 1.0)


def clip_onset(params: DegradationParams) -> float | None:
    """Time from which the health index saturates at 1, None if it never does."""
    if params.phi + params.theta >= 1.0:
        return 0.0
    if params.beta == 0.0:
        return None
    return math.log((1.0 - params.phi) / params.theta) / params.beta


def simulate_observations(params: list[DegradationParams], times,
                          sigma_obs: float, seed: int = 0) -> np.ndarray:
    """Noisy clipped diagnosis, one row per time, one column per machine."""
    if sigma_obs < 0.0:
        raise ValueError("sigma_obs must be nonnegative")
    t = np.asarray(times, dtype=np.float64)
    rng = np.random.default_rng(derive_seed(seed, _S_OBS))
    out = np.empty((len(t), len(params)))
    for m, p in enumerate(params):
        noise = rng.normal(0.0, sigma_obs, size=len(t)) if sigma_obs else 0.0
        out[:, m] = np.clip(true_degradation(p, t) + noise, 0.0, 1.0)
    return out


@dataclass(frozen=True)
class ForecastPosterior:
    """Gaussian posterior over (log theta, beta) from the log-space fit."""
    phi: float
    mean: np.ndarray        # (2,)
    cov: np.ndarray         # (2, 2)
    sigma2: float           # residual variance in log space
    n_used: int

    def curve(self, times, coef=None) -> np.ndarray:
        """Health index implied by a coefficient pair (posterior mean default)."""
        c = self.mean if coef is None else np.asarray(coef, dtype=np.float64)
        t = np.asarray(times, dtype=np.float64)
        with np.errstate(over="ignore"):
            d = self.phi + np.exp(c[0] + c[1] * t)
        return np.clip(d, 0.0, 1.0)


def fit_forecast(times, observed, phi: float = 0.0,
                 delta: float = LOG_EXCLUSION_DELTA) -> ForecastPosterior:
    """Least squares on log(observed - phi) over observation times.

    Observations at or below phi + delta are excluded (their logarithm is
    undefined or dominated by noise). Needs at least three usable points and
    at least two distinct times; the coefficient covariance is the usual
    sigma^2 (X^T X)^-1 with the residual variance on n - 2 degrees of
    freedom.
    """
    t = np.asarray(times, dtype=np.float64)
    d = np.asarray(observed, dtype=np.float64)
    if t.ndim != 1 or t.shape != d.shape:
        raise ValueError("times and observations must be matching 1-D arrays")
    if not (np.all(np.isfinite(t)) and np.all(np.isfinite(d))):
        raise ValueError("times and observations must be finite")
    usable = d - phi > delta
    t_u, d_u = t[usable], d[usable]
    n = len(t_u)
    if n < 3:
        raise NotEnoughData(
            f"only {n} observations exceed phi + {delta}; need at least 3")
    if np.ptp(t_u) == 0.0:
        raise SingularDesign("all usable observations share one time")
    y = np.log(d_u - phi)
    x = np.column_stack([np.ones(n), t_u])
    xtx = x.T @ x
    coef = np.linalg.solve(xtx, x.T @ y)
    residuals = y - x @ coef
    sigma2 = float(residuals @ residuals) / (n - 2)
    cov = sigma2 * np.linalg.inv(xtx)
    cov = (cov + cov.T) / 2.0
    return ForecastPosterior(phi, coef, cov, sigma2, n)


def sample_trajectories(post: ForecastPosterior, times, n_traj: int,
                        seed: int = 0) -> np.ndarray:
    """Posterior-predictive health curves, one row per trajectory.

    Each trajectory draws one coefficient pair from the posterior, then adds
    independent log-space noise at the fitted residual scale per time point.
    """
    if n_traj < 1:
        raise ValueError("need at least one trajectory")
    t = np.asarray(times, dtype=np.float64)
    rng = np.random.default_rng(derive_seed(seed, _S_COEF))
    coefs = rng.multivariate_normal(post.mean, post.cov, size=n_traj,
                                    check_valid="ignore", method="svd")
    scale = math.sqrt(max(post.sigma2, 0.0))
    eps = rng.normal(0.0, 1.0, size=(n_traj, len(t))) * scale
    with np.errstate(over="ignore"):
        d = post.phi + np.exp(coefs[:, :1] + coefs[:, 1:] * t[None, :] + eps)
    return np.clip(d, 0.0, 1.0)


def rul_pmf(membership) -> tuple[np.ndarray, float]:
    """First-exit distribution over future intervals from membership curves.

    `membership` holds c(d(t_k)) in [0, 1] for k = 1..K, one row per
    trajectory (a single row may be passed as a 1-D array). Within a row the
    chance of first exit at interval k is (prod_{i<k} c_i)(1 - c_k) and the
    survival mass is prod_i c_i, which together sum to one. Rows average into
    the returned (pmf, survival_mass).
    """
    c = np.atleast_2d(np.asarray(membership, dtype=np.float64))
    if np.any(c < 0.0) or np.any(c > 1.0):
        raise ValueError("membership values must lie in [0, 1]")
    cum = np.cumprod(c, axis=1)
    alive_before = np.column_stack([np.ones(len(c)), cum[:, :-1]])
    p = alive_before * (1.0 - c)
    return p.mean(axis=0), float(cum[:, -1].mean())


@dataclass(frozen=True)
class RulSummary:
    """Moments of a first-exit distribution, conditional on exiting."""
    mean: float
    ml: int                 # earliest mode, in intervals ahead (1-based)
    q05: int
    q95: int
    survival_mass: float
    all_survived: bool


def rul_summary(pmf, survival_mass: float) -> RulSummary:
    """Conditional mean, earliest mode, and 5/95 quantiles of the exit time."""
    p = np.asarray(pmf, dtype=np.float64)
    total = float(p.sum())
    if total <= 0.0:
        return RulSummary(math.nan, 0, 0, 0, survival_mass, True)
    k = np.arange(1, len(p) + 1)
    mean = float((k * p).sum() / total)
    ml = int(np.argmax(p)) + 1
    cdf = np.cumsum(p) / total
    q05 = int(np.searchsorted(cdf, 0.05) + 1)
    q95 = int(np.searchsorted(cdf, 0.95) + 1)
    return RulSummary(mean, ml, q05, q95, survival_mass, False)


def crossing_time(params: list[DegradationParams], is_feasible, t_max: float,
                  tol: float = 1e-6) -> float | None:
    """Earliest time the true degradation leaves the satisfiable set.

    Assumes monotone degradation growth against a monotone capacity, so
    feasibility flips exactly once; bisection narrows the flip to `tol`.
    Returns None when the line stays feasible through `t_max`.
    """
    def feasible_at(t: float) -> bool:
        d = np.array([true_degradation(p, t) for p in params])
        return bool(is_feasible(d))

    if not feasible_at(0.0):
        return 0.0
    if feasible_at(t_max):
        return None
    lo, hi = 0.0, float(t_max)
    while hi - lo > tol:
        mid = (lo + hi) / 2.0
        if feasible_at(mid):
            lo = mid
        else:
            hi = mid
    return (lo + hi) / 2.0


@dataclass(frozen=True)
class RulRow:
    """One prognosis: summary at a decision time plus the truth for scoring."""
    now: float
    summary: RulSummary
    ground_truth: float     # intervals until the true trajectory exits (inf if never)


def rul_over_time(params: list[DegradationParams], membership, is_feasible,
                  now_times, sigma_obs: float, n_traj: int = 200,
                  horizon: int = 100, seed: int = 0,
                  delta: float = LOG_EXCLUSION_DELTA) -> list[RulRow]:
    """Prognosis sequence as observations accumulate interval by interval.

    Observations arrive at integer interval times; at each decision time the
    fit uses everything seen so far, trajectories extend one interval apart
    over `horizon` intervals, and `membership` (batch d-vectors to [0, 1])
    scores them. `is_feasible` is the exact oracle used only for the
    ground-truth crossing. Raises NotEnoughData when the earliest decision
    time has too few usable observations.
    """
    now_times = [float(v) for v in now_times]
    if not now_times or any(v < 0 for v in now_times):
        raise ValueError("decision times must be nonnegative")
    if horizon < 1:
        raise ValueError("horizon must be at least one interval")
    n_machines = len(params)
    obs_times = np.arange(0.0, math.floor(max(now_times)) + 1.0)
    obs = simulate_observations(params, obs_times, sigma_obs, seed)
    t_star = crossing_time(params, is_feasible,
                           t_max=max(now_times) + horizon + 1.0)

    rows = []
    for now_index, now in enumerate(now_times):
        seen = obs_times <= now
        future = now + 1.0 + np.arange(horizon)
        curves = np.empty((n_traj, horizon, n_machines))
        for m in range(n_machines):
            post = fit_forecast(obs_times[seen], obs[seen, m],
                                phi=params[m].phi, delta=delta)
            curves[:, :, m] = sample_trajectories(
                post, future, n_traj, derive_seed(seed, _S_TRAJ, now_index, m))
        c = np.asarray(membership(curves.reshape(-1, n_machines)),
                       dtype=np.float64).reshape(n_traj, horizon)
        pmf, survival = rul_pmf(c)
        truth = math.inf if t_star is None else max(t_star - now, 0.0)
        rows.append(RulRow(now, rul_summary(pmf, survival), truth))
    return rows
