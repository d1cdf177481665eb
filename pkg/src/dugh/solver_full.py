"""Full Dugh: alternating MM updates of a dense temporal covariance ``B``
and diagonal source/noise variances ``h``.

Each iteration computes the posterior means, replaces ``B`` by the
geometric mean of ``B`` and the spatially whitened temporal sample
covariance, then updates ``h`` in closed form. Both steps minimise a convex
upper bound that touches the likelihood at the current iterate, so the
negative log-likelihood never increases.
"""
import logging
import warnings
from dataclasses import dataclass

import numpy as np

from .model import (
    H_MIN,
    FitResult,
    NonFiniteObjectiveError,
    SpatialParams,
    augmented_design,
    check_lead_field,
    check_trials,
    nll_kron,
    posterior_mean,
    sigma_y,
)
from .pdlinalg import geometric_mean, pd_solve, safe_inverse, symmetrize

log = logging.getLogger(__name__)


@dataclass
class FitConfig:
    tol: float = 1e-8
    max_iter: int = 1000
    seed: int = 0
    homoscedastic: bool = False
    # record the likelihood after every iteration (costs one extra evaluation)
    track_nll: bool = True


@dataclass
class FullDughState:
    spatial: SpatialParams
    b: np.ndarray
    sigma_y: np.ndarray
    iteration: int = 0


def m_time(trials, sigma_y_mat):
    """``(1/MG) sum_g Y_g^T Sigma_y^-1 Y_g``, shape ``(T, T)``."""
    trials = check_trials(trials)
    g, m, t = trials.shape
    ys = trials.transpose(1, 0, 2)  # (M, G, T)
    solved = pd_solve(sigma_y_mat, ys.reshape(m, g * t)).reshape(m, g, t)
    prod = np.einsum("mgt,mgs->ts", ys, solved)
    return symmetrize(prod / (m * g))


def m_space(trials, b):
    """``(1/TG) sum_g Y_g B^-1 Y_g^T``, shape ``(M, M)``."""
    trials = check_trials(trials)
    g, m, t = trials.shape
    ys = trials.reshape(g * m, t)
    binv_yt = pd_solve(b, ys.T)  # (T, G*M)
    prod = np.einsum("gmt,gkt->mk", trials, binv_yt.T.reshape(g, m, t))
    return symmetrize(prod / (t * g))


def _as_spatial(spatial):
    return spatial.h if isinstance(spatial, SpatialParams) else np.asarray(spatial, dtype=float)


def m_sn(h, phi, sigma_y_mat, m_space_mat):
    """Dense ``H Phi^T Sigma_y^-1 M_space Sigma_y^-1 Phi H``."""
    h = _as_spatial(h)
    w = h[:, None] * pd_solve(sigma_y_mat, phi).T  # (N+M, M)
    return symmetrize(w @ m_space_mat @ w.T)


def m_sn_diag(h, phi, sigma_y_mat, m_space_mat):
    """Diagonal of :func:`m_sn` without forming the full matrix."""
    h = _as_spatial(h)
    w = h[:, None] * pd_solve(sigma_y_mat, phi).T
    return np.einsum("im,mk,ik->i", w, m_space_mat, w)


def z_diag(phi, sigma_y_mat):
    """``diag(Phi^T Sigma_y^-1 Phi)``."""
    return np.einsum("mi,mi->i", phi, pd_solve(sigma_y_mat, phi))


def update_spatial(h, phi, sigma_y_mat, g_diag, homoscedastic=False, n_sources=None):
    """Closed-form minimiser of the spatial surrogate over diagonal ``H``.

    ``h_i = sqrt(g_i / z_i)`` floored at ``H_MIN``. With ``homoscedastic`` the
    noise block shares one value ``sqrt(sum g / sum z)`` over the noise
    indices, which is the minimiser under the equality constraint.
    """
    h = _as_spatial(h)
    z = z_diag(phi, sigma_y_mat)
    g = np.maximum(np.asarray(g_diag, dtype=float), 0.0)
    new = np.sqrt(g / z)
    if homoscedastic:
        if n_sources is None:
            n_sources = phi.shape[1] - phi.shape[0]
        new[n_sources:] = np.sqrt(g[n_sources:].sum() / z[n_sources:].sum())
    return np.maximum(new, H_MIN)


def update_temporal_full(b, m_time_mat):
    """Geodesic midpoint between the current ``B`` and ``M_time``."""
    b = b.b if isinstance(b, FullDughState) else b
    return geometric_mean(b, m_time_mat)


def temporal_surrogate(b_k, m_time_mat, b):
    """``tr(B_k^-1 B) + tr(M_time B^-1)``."""
    return float(np.trace(pd_solve(b_k, b)) + np.trace(pd_solve(b, m_time_mat)))


def spatial_surrogate(h, phi, sigma_y_k, g_diag):
    """``sum_i z_i h_i + g_i / h_i`` with ``z`` taken at the current iterate."""
    h = np.asarray(h, dtype=float)
    z = z_diag(phi, sigma_y_k)
    return float(np.sum(z * h + np.asarray(g_diag) / h))


def init_params(n_sources, m_sensors, t_samples, rng, homoscedastic=False):
    """Random ``|N(0,1)|`` variances and identity ``B``."""
    h = np.abs(rng.standard_normal(n_sources + m_sensors))
    if homoscedastic:
        h[n_sources:] = h[n_sources]
    return np.maximum(h, H_MIN), np.eye(t_samples)


def _validate(lead, trials, config):
    lead = check_lead_field(lead)
    trials = check_trials(trials, lead.shape[0])
    if trials.shape[2] < 2:
        raise ValueError("T = 1 carries no temporal structure; use fit_champagne")
    if config.tol <= 0 or config.max_iter < 1:
        raise ValueError("tol must be positive and max_iter at least 1")
    g, m, t = trials.shape
    if m * g < t:
        warnings.warn(
            f"M*G = {m * g} < T = {t}: the temporal sample covariance is rank deficient, "
            "the likelihood is unbounded below and B collapses onto the jitter floor",
            RuntimeWarning,
            stacklevel=3,
        )
    return lead, trials


def run_mm(lead, trials, config, temporal_step, init=None, spatial_step=None, posterior=None):
    """Shared MM loop for all solvers.

    ``temporal_step(b, m_time_mat)`` returns the next temporal covariance;
    pass ``None`` to keep ``B`` fixed. ``spatial_step`` overrides the default
    closed-form ``h`` update; it receives ``(h, sigma_y, b, trials)``.
    ``posterior(h, sigma_y_inv)`` overrides the per-trial posterior means.
    """
    if posterior is None:
        def posterior(h_, sy_inv_):
            return posterior_mean(h_, lead, trials, sy_inv_)

    n = lead.shape[1]
    g, m, t = trials.shape
    phi = augmented_design(lead)
    if init is None:
        rng = np.random.default_rng(config.seed)
        h, b = init_params(n, m, t, rng, config.homoscedastic)
    else:
        h, b = (np.maximum(np.asarray(init[0], dtype=float), H_MIN), np.asarray(init[1], dtype=float))

    def objective(h_, b_):
        value = nll_kron(h_, b_, trials, lead)
        if not np.isfinite(value):
            raise NonFiniteObjectiveError(f"non-finite likelihood at iteration {k}")
        return value

    k = 0
    trace = [objective(h, b)] if config.track_nll else []
    x_prev = None
    converged = False
    while k < config.max_iter:
        sy = sigma_y(h, lead)
        sy_inv = safe_inverse(sy)
        x = posterior(h, sy_inv)
        if x_prev is not None:
            change = np.linalg.norm(x - x_prev)
            if change <= config.tol * np.linalg.norm(x_prev):
                converged = True
                break
        x_prev = x

        if temporal_step is not None:
            b = temporal_step(b, m_time(trials, sy))
        if spatial_step is None:
            g_diag = m_sn_diag(h, phi, sy, m_space(trials, b))
            h = update_spatial(h, phi, sy, g_diag, config.homoscedastic, n)
        else:
            h = spatial_step(h, sy, b, trials)
        k += 1
        if config.track_nll:
            trace.append(objective(h, b))

    spatial = SpatialParams(h, n, config.homoscedastic)
    means = posterior(h, safe_inverse(sigma_y(h, lead)))
    log.debug("MM stopped after %d iterations (converged=%s)", k, converged)
    return FitResult(
        posterior_means=means,
        spatial=spatial,
        b=b,
        nll_trace=np.asarray(trace),
        converged=converged,
        iterations=k,
    )


def fit_full(lead, trials, config=None, init=None, learn_temporal=True):
    """Full Dugh.

    Parameters
    ----------
    lead : ndarray, shape (M, N)
    trials : ndarray, shape (G, M, T)
    config : FitConfig, optional
    init : tuple (h, B), optional
        Starting point; defaults to ``|N(0,1)|`` variances and ``B = I``.
    learn_temporal : bool
        When False ``B`` stays at its initial value.

    Returns
    -------
    FitResult
    """
    config = config or FitConfig()
    lead, trials = _validate(lead, trials, config)

    temporal_step = update_temporal_full if learn_temporal else None
    return run_mm(lead, trials, config, temporal_step, init=init)
