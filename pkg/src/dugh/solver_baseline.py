"""Champagne with heteroscedastic noise learning.

The temporally unstructured comparator: ``B`` is pinned to the identity and
source and noise variances follow the classic fixed-point updates, written
here in terms of posterior means and residuals.
"""
import numpy as np

from .model import H_MIN, SpatialParams, check_lead_field, check_trials, posterior_mean, sigma_y
from .pdlinalg import safe_inverse
from .solver_full import FitConfig, run_mm

NOISE_NORMALIZATIONS = ("mean", "sum")


def _h(state):
    return state.h if isinstance(state, SpatialParams) else np.asarray(state, dtype=float)


def update_gamma_champagne(state, lead, trials, sigma_y_inv=None):
    """``gamma_n = sqrt(mean_t xbar_n(t)^2 / L_n^T Sigma_y^-1 L_n)``.

    The mean runs over all time samples of all trials.
    """
    h = _h(state)
    lead = check_lead_field(lead)
    trials = check_trials(trials, lead.shape[0])
    if sigma_y_inv is None:
        sigma_y_inv = safe_inverse(sigma_y(h, lead))
    x = posterior_mean(h, lead, trials, sigma_y_inv)
    num = np.mean(x**2, axis=(0, 2))
    den = np.einsum("mn,mk,kn->n", lead, sigma_y_inv, lead)
    return np.maximum(np.sqrt(num / den), H_MIN)


def _residual_power(h, lead, trials, sigma_y_inv, time_normalization):
    x = posterior_mean(h, lead, trials, sigma_y_inv)
    resid = trials - np.einsum("mn,gnt->gmt", lead, x)
    power = np.mean(resid**2, axis=(0, 2))
    return power * trials.shape[2] if time_normalization == "sum" else power


def update_lambda_hetero(state, lead, trials, sigma_y_inv=None, time_normalization="mean"):
    """``lam_m = sqrt(S_m / [Sigma_y^-1]_mm)`` from the residuals ``Y - L xbar``.

    ``S_m`` is the squared residual of sensor ``m`` averaged over trials and
    either averaged (``"mean"``) or summed (``"sum"``) over time. Only the
    mean form is a descent step for the likelihood; the summed form is kept
    for comparison with implementations that use it.
    """
    if time_normalization not in NOISE_NORMALIZATIONS:
        raise ValueError(f"time_normalization must be one of {NOISE_NORMALIZATIONS}")
    h = _h(state)
    lead = check_lead_field(lead)
    trials = check_trials(trials, lead.shape[0])
    if sigma_y_inv is None:
        sigma_y_inv = safe_inverse(sigma_y(h, lead))
    num = _residual_power(h, lead, trials, sigma_y_inv, time_normalization)
    return np.maximum(np.sqrt(num / np.diag(sigma_y_inv)), H_MIN)


def fit_champagne(lead, trials, config=None, init=None, time_normalization="mean"):
    """Champagne with ``B = I`` and heteroscedastic (or tied) noise.

    Accepts ``T = 1``. ``init`` is an optional starting ``h``.
    """
    config = config or FitConfig()
    lead = check_lead_field(lead)
    trials = check_trials(trials, lead.shape[0])
    if time_normalization not in NOISE_NORMALIZATIONS:
        raise ValueError(f"time_normalization must be one of {NOISE_NORMALIZATIONS}")
    n = lead.shape[1]
    if init is None:
        rng = np.random.default_rng(config.seed)
        h0 = np.abs(rng.standard_normal(n + lead.shape[0]))
        if config.homoscedastic:
            h0[n:] = h0[n]
    else:
        h0 = np.asarray(init, dtype=float)

    def spatial_step(h, sy, _b, data):
        sy_inv = safe_inverse(sy)
        gamma = update_gamma_champagne(h, lead, data, sy_inv)
        power = _residual_power(h, lead, data, sy_inv, time_normalization)
        if config.homoscedastic:
            # tied noise: pool numerator and denominator across sensors
            lam = np.full(power.size, np.sqrt(power.sum() / np.trace(sy_inv)))
        else:
            lam = np.sqrt(power / np.diag(sy_inv))
        return np.concatenate([gamma, np.maximum(lam, H_MIN)])

    return run_mm(
        lead,
        trials,
        config,
        None,
        init=(h0, np.eye(trials.shape[2])),
        spatial_step=spatial_step,
    )
