"""Variational-Bayes outlier indicators fused with Gaussian filtering.

Each measurement dimension carries a latent Bernoulli indicator on {eps, 1}.
The posterior probability of "no outlier", omega, rescales the effective
measurement precision; the state and indicator posteriors are refined in an
alternating loop until the state mean stops moving.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Literal, Sequence

import numpy as np
from scipy.special import expit

from .gaussian import (
    FilterNumericsError,
    JointFactor,
    PredictedMeasurement,
    SerialUpdateResult,
    innovation,
    joint_factor_from_moments,
    joint_factor_from_sigma,
    posterior_predictive_meas,
    predict,
    predict_measurement,
    serial_conditioning,
    update_parallel,
)
from .model import GaussianBelief, Measurement, NonlinearSSM
from .unscented import (
    UTParams,
    draw_sigma_points,
    eval_sigma_points,
    moments_from_values,
)

Variant = Literal["parallel", "serial"]

DELTA_DENOM_FLOOR = 1e-12


@dataclass(frozen=True)
class IndicatorConfig:
    """Indicator-model parameters: outlier floor eps, no-outlier prior theta,
    convergence threshold tau, and the iteration cap."""

    epsilon: float = 1e-6
    theta_prior: float | np.ndarray = 0.5
    tau: float = 1e-4
    max_iters: int = 50

    def __post_init__(self) -> None:
        if not 0.0 < self.epsilon < 1.0:
            raise ValueError("epsilon must lie strictly inside (0, 1)")
        theta = np.atleast_1d(np.asarray(self.theta_prior, dtype=float))
        if np.any(theta <= 0.0) or np.any(theta >= 1.0):
            raise ValueError("theta_prior entries must lie strictly inside (0, 1)")
        if self.tau <= 0.0:
            raise ValueError("tau must be > 0")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")

    def thetas(self, m: int) -> np.ndarray:
        theta = np.atleast_1d(np.asarray(self.theta_prior, dtype=float))
        if theta.size == 1:
            return np.full(m, theta[0])
        if theta.size != m:
            raise ValueError(f"theta_prior length {theta.size} does not match m={m}")
        return theta


@dataclass(frozen=True)
class IndicatorBelief:
    """Per-dimension posterior probability of "no outlier"."""

    omega: np.ndarray

    def __post_init__(self) -> None:
        omega = np.atleast_1d(np.asarray(self.omega, dtype=float))
        if np.any(omega < 0.0) or np.any(omega > 1.0):
            raise ValueError("omega entries must lie in [0, 1]")
        object.__setattr__(self, "omega", omega)

    def expected(self, epsilon: float) -> np.ndarray:
        """Expected indicator <I_i> = omega_i + (1 - omega_i) * eps."""
        return self.omega + (1.0 - self.omega) * epsilon


@dataclass(frozen=True)
class SorStepResult:
    posterior: GaussianBelief
    indicators: IndicatorBelief
    iterations: int
    converged: bool


def omega_update(W_ii, R_ii, theta, epsilon):
    """Posterior no-outlier probability.

    Closed form 1 / (1 + sqrt(eps) (1/theta - 1) exp(W (1 - eps) / (2R))),
    evaluated as a logistic of the log-odds so large W underflows to 0
    cleanly instead of overflowing.
    """
    w = np.asarray(W_ii, dtype=float)
    r = np.asarray(R_ii, dtype=float)
    th = np.asarray(theta, dtype=float)
    eps = np.asarray(epsilon, dtype=float)
    if np.any(eps <= 0.0) or np.any(eps >= 1.0):
        raise ValueError("epsilon must lie strictly inside (0, 1)")
    if np.any(~np.isfinite(w)) or np.any(w < 0.0):
        raise ValueError("W_ii must be finite and >= 0")
    if np.any(r <= 0.0):
        raise ValueError("R_ii must be > 0")
    if np.any(th <= 0.0) or np.any(th >= 1.0):
        raise ValueError("theta must lie strictly inside (0, 1)")
    log_odds_outlier = (
        0.5 * np.log(eps)
        + np.log1p(-th)
        - np.log(th)
        + w * (1.0 - eps) / (2.0 * r)
    )
    out = expit(-log_odds_outlier)
    return float(out) if out.ndim == 0 else out


def effective_precision(indicators, R_diag, epsilon: float) -> np.ndarray:
    """Vinv_diag[i] = <I_i> / R_ii with <I_i> = omega_i + (1 - omega_i) eps."""
    omega = np.asarray(getattr(indicators, "omega", indicators), dtype=float)
    r = np.atleast_1d(np.asarray(R_diag, dtype=float))
    if omega.shape != r.shape:
        raise ValueError("omega and R_diag lengths disagree")
    return (omega + (1.0 - omega) * epsilon) / r


def _joint_factor(
    model: NonlinearSSM, prediction: GaussianBelief, params: UTParams
) -> JointFactor:
    sigma = draw_sigma_points(prediction, params)
    values = eval_sigma_points(sigma, model.meas_fn, model.vectorized)
    if np.all(sigma.cov_weights >= 0.0):
        return joint_factor_from_sigma(prediction, sigma, values)
    mu, cov, cross = moments_from_values(sigma, values)
    return joint_factor_from_moments(
        prediction, PredictedMeasurement(mu=mu, U=cov, C=cross)
    )


def sor_step(
    model: NonlinearSSM,
    prediction: GaussianBelief,
    y,
    cfg: IndicatorConfig,
    params: UTParams,
    variant: Variant = "parallel",
    force_indicators=None,
) -> SorStepResult:
    """One measurement update with alternating indicator/state refinement.

    Starts from effective precision R^-1, then repeats: expected squared
    residuals W -> omega -> Vinv -> state re-update from the same prediction.
    Stops once the relative mean change delta falls to tau or max_iters is
    hit (reported via converged, not an error).

    force_indicators short-circuits the loop with a fixed expected-indicator
    vector; all ones reproduces the plain Gaussian-filter update through the
    identical code path.
    """
    if variant not in ("parallel", "serial"):
        raise ValueError(f"unknown variant {variant!r}")
    m = model.meas_dim
    r_diag = model.meas_var_diag
    mask = model.angular_mask
    yv = y.values if isinstance(y, Measurement) else np.atleast_1d(np.asarray(y, float))

    serial = variant == "serial"
    if serial:
        factor = _joint_factor(model, prediction, params)
    else:
        predmeas = predict_measurement(model, prediction, params)

    def run_update(vinv, iteration):
        try:
            if serial:
                res = serial_conditioning(factor, yv, vinv, mask)
                return res.posterior, res.mu_post, res.udiag_post
            belief = update_parallel(prediction, predmeas, yv, vinv, mask)
            return belief, None, None
        except FilterNumericsError as exc:
            raise FilterNumericsError(
                f"measurement update failed at VB iteration {iteration}: {exc}"
            ) from exc

    if force_indicators is not None:
        forced = np.atleast_1d(np.asarray(force_indicators, dtype=float))
        posterior, _, _ = run_update(forced / r_diag, 0)
        return SorStepResult(
            posterior=posterior,
            indicators=IndicatorBelief(np.clip(forced, 0.0, 1.0)),
            iterations=0,
            converged=True,
        )

    thetas = cfg.thetas(m)
    posterior, mu_pp, udiag_pp = run_update(1.0 / r_diag, 0)

    omega = np.ones(m)
    iterations = 0
    converged = False
    for l in range(1, cfg.max_iters + 1):
        if mu_pp is None:
            mu_pp, udiag_pp = posterior_predictive_meas(model, posterior, params)
        resid = innovation(yv, mu_pp, mask)
        w = resid**2 + udiag_pp
        omega = omega_update(w, r_diag, thetas, cfg.epsilon)
        vinv = (omega + (1.0 - omega) * cfg.epsilon) / r_diag

        prev_mean = posterior.mean
        posterior, mu_pp, udiag_pp = run_update(vinv, l)
        iterations = l

        denom = float(np.linalg.norm(prev_mean))
        delta = float(np.linalg.norm(posterior.mean - prev_mean))
        if denom >= DELTA_DENOM_FLOOR:
            delta /= denom
        if delta <= cfg.tau:
            converged = True
            break

    return SorStepResult(
        posterior=posterior,
        indicators=IndicatorBelief(omega),
        iterations=iterations,
        converged=converged,
    )


def ukf_step(
    model: NonlinearSSM,
    prediction: GaussianBelief,
    y,
    params: UTParams,
    variant: Variant = "parallel",
) -> GaussianBelief:
    """Plain (non-robust) Gaussian-filter update with noise R."""
    mask = model.angular_mask
    vinv = 1.0 / model.meas_var_diag
    if variant == "serial":
        factor = _joint_factor(model, prediction, params)
        return serial_conditioning(factor, y, vinv, mask).posterior
    predmeas = predict_measurement(model, prediction, params)
    return update_parallel(prediction, predmeas, y, vinv, mask)


def _check_ordering(measurements: Sequence[Measurement]) -> None:
    last = 0
    for meas in measurements:
        if isinstance(meas, Measurement):
            if meas.time_index <= last:
                raise ValueError("measurements must be ordered by time_index")
            last = meas.time_index


def sor_filter_run(
    model: NonlinearSSM,
    init: GaussianBelief,
    measurements: Iterable,
    cfg: IndicatorConfig,
    params: UTParams,
    variant: Variant = "parallel",
    force_indicators=None,
) -> list[SorStepResult]:
    """Alternate predict and sor_step over an ordered measurement sequence."""
    measurements = list(measurements)
    _check_ordering(measurements)
    belief = init
    results: list[SorStepResult] = []
    for meas in measurements:
        prediction = predict(model, belief, params)
        step = sor_step(
            model, prediction, meas, cfg, params, variant, force_indicators
        )
        belief = step.posterior
        results.append(step)
    return results


def ukf_filter_run(
    model: NonlinearSSM,
    init: GaussianBelief,
    measurements: Iterable,
    params: UTParams,
    variant: Variant = "parallel",
) -> list[GaussianBelief]:
    """Plain Gaussian-filter trajectory used as the non-robust baseline."""
    measurements = list(measurements)
    _check_ordering(measurements)
    belief = init
    results: list[GaussianBelief] = []
    for meas in measurements:
        prediction = predict(model, belief, params)
        belief = ukf_step(model, prediction, meas, params, variant)
        results.append(belief)
    return results
