"""Generative model, marginal likelihood and dense posterior formulas.

Shapes follow the conventions used throughout the package:

* lead field ``L``: ``(M, N)``
* trials ``Y``: ``(G, M, T)``, one ``M x T`` block per trial
* spatial variances ``h``: ``(N + M,)``, sources first then sensor noise
* temporal covariance ``B``: ``(T, T)``

Vectorisation uses ``vec(Y.T)``, i.e. a row-major flatten of ``Y``, so the
spatio-temporal covariance of a trial is ``kron(Sigma_y, B)``.
"""
from dataclasses import dataclass, field

import numpy as np

from .pdlinalg import check_symmetric, pd_factor, pd_solve, safe_inverse, symmetrize

H_MIN = 1e-12
P_MIN = 1e-12


class NonFiniteObjectiveError(FloatingPointError):
    pass


def check_lead_field(lead, normalize=False):
    """Validate a lead field and optionally scale its columns to unit norm."""
    lead = np.asarray(lead, dtype=float)
    if lead.ndim != 2 or 0 in lead.shape:
        raise ValueError(f"lead field must be a non-empty 2-D array, got shape {lead.shape}")
    if not np.all(np.isfinite(lead)):
        raise ValueError("lead field contains NaN or Inf")
    if normalize:
        norms = np.linalg.norm(lead, axis=0)
        if np.any(norms == 0):
            raise ValueError("cannot normalize a zero column")
        lead = lead / norms
    return lead


def augmented_design(lead):
    """``Phi = [L, I]``, mapping stacked sources and noise to sensors."""
    lead = np.asarray(lead, dtype=float)
    return np.hstack([lead, np.eye(lead.shape[0])])


def check_trials(trials, m_sensors=None):
    trials = np.asarray(trials, dtype=float)
    if trials.ndim == 2:
        trials = trials[None]
    if trials.ndim != 3 or 0 in trials.shape:
        raise ValueError(f"trials must have shape (G, M, T), got {trials.shape}")
    if m_sensors is not None and trials.shape[1] != m_sensors:
        raise ValueError(f"trials have {trials.shape[1]} sensors, lead field has {m_sensors}")
    if not np.all(np.isfinite(trials)):
        raise ValueError("trials contain NaN or Inf")
    return trials


@dataclass
class SpatialParams:
    """Source variances ``gamma`` and noise variances ``lam`` in one vector."""

    h: np.ndarray
    n_sources: int
    homoscedastic: bool = False

    def __post_init__(self):
        self.h = np.maximum(np.asarray(self.h, dtype=float), H_MIN)
        if self.h.ndim != 1 or not 0 < self.n_sources < self.h.size:
            raise ValueError("h must be a vector of length N + M with N, M > 0")
        if self.homoscedastic:
            noise = self.h[self.n_sources:]
            if not np.allclose(noise, noise[0], rtol=1e-12, atol=0):
                raise ValueError("homoscedastic params need equal noise variances")

    @classmethod
    def from_parts(cls, gamma, lam, homoscedastic=False):
        gamma = np.atleast_1d(np.asarray(gamma, dtype=float))
        lam = np.atleast_1d(np.asarray(lam, dtype=float))
        return cls(np.concatenate([gamma, lam]), gamma.size, homoscedastic)

    @property
    def gamma(self):
        return self.h[: self.n_sources]

    @property
    def lam(self):
        return self.h[self.n_sources:]

    @property
    def m_sensors(self):
        return self.h.size - self.n_sources


@dataclass
class FitResult:
    posterior_means: np.ndarray  # (G, N, T)
    spatial: SpatialParams
    b: np.ndarray
    nll_trace: np.ndarray
    converged: bool
    iterations: int
    spectrum: np.ndarray = None
    diagnostics: dict = field(default_factory=dict)

    @property
    def gamma(self):
        return self.spatial.gamma

    @property
    def lam(self):
        return self.spatial.lam


def sigma_y(h, lead):
    """Spatial model covariance ``L diag(gamma) L^T + diag(lam)``."""
    lead = np.asarray(lead, dtype=float)
    h = np.asarray(h, dtype=float)
    m, n = lead.shape
    if h.shape != (n + m,):
        raise ValueError(f"h has length {h.size}, expected N + M = {n + m}")
    out = (lead * h[:n]) @ lead.T
    out[np.diag_indices(m)] += h[n:]
    return symmetrize(out)


def _as_h(spatial):
    return spatial.h if isinstance(spatial, SpatialParams) else np.asarray(spatial, dtype=float)


def nll_kron(spatial, b, trials, lead):
    """Type-II negative log marginal likelihood, additive constant dropped.

    ``T log|Sigma_y| + M log|B| + mean_g tr(Sigma_y^-1 Y_g B^-1 Y_g^T)``
    """
    lead = np.asarray(lead, dtype=float)
    trials = check_trials(trials, lead.shape[0])
    g, m, t = trials.shape
    b = check_symmetric(b, "B")
    if b.shape != (t, t):
        raise ValueError(f"B has shape {b.shape}, expected {(t, t)}")
    sy = sigma_y(_as_h(spatial), lead)
    cy, _ = pd_factor(sy)
    cb, _ = pd_factor(b)
    logdet = 2 * t * np.sum(np.log(np.diag(cy))) + 2 * m * np.sum(np.log(np.diag(cb)))
    # || Cy^-1 Y Cb^-T ||_F^2 summed over trials
    w = np.linalg.solve(np.tril(cy), trials)  # (G, M, T)
    w = np.linalg.solve(np.tril(cb), np.swapaxes(w, 1, 2))  # (G, T, M)
    value = float(logdet + np.sum(w * w) / g)
    if not np.isfinite(value):
        raise NonFiniteObjectiveError("negative log-likelihood is not finite")
    return value


def nll_smv(spatial, b, trials, lead):
    """Same objective evaluated on the dense vectorised (MT x MT) covariance.

    Only practical at small scale; kept as an exactness reference.
    """
    lead = np.asarray(lead, dtype=float)
    trials = check_trials(trials, lead.shape[0])
    full = np.kron(sigma_y(_as_h(spatial), lead), np.asarray(b, dtype=float))
    ys = trials.reshape(trials.shape[0], -1)
    quad = np.einsum("gi,gi->g", ys, np.linalg.solve(full, ys.T).T)
    return float(np.linalg.slogdet(full)[1] + quad.mean())


def _dense_parts(h, b, lead):
    lead = np.asarray(lead, dtype=float)
    m, n = lead.shape
    t = b.shape[0]
    sigma0 = np.kron(np.diag(h[:n]), b)
    d = np.kron(lead, np.eye(t))
    sigma_tilde = np.kron(sigma_y(h, lead), b)
    return sigma0, d, sigma_tilde


def naive_posterior_mean(spatial, b, lead, trials):
    """Posterior source means from the dense Kronecker formulas.

    Returns an array of shape ``(G, N, T)``.
    """
    h = _as_h(spatial)
    b = np.asarray(b, dtype=float)
    lead = np.asarray(lead, dtype=float)
    trials = check_trials(trials, lead.shape[0])
    sigma0, d, sigma_tilde = _dense_parts(h, b, lead)
    ys = trials.reshape(trials.shape[0], -1).T
    x = sigma0 @ d.T @ pd_solve(sigma_tilde, ys)
    n, t = lead.shape[1], b.shape[0]
    return x.T.reshape(trials.shape[0], n, t)


def naive_posterior_cov(spatial, b, lead):
    """Dense ``NT x NT`` posterior covariance."""
    h = _as_h(spatial)
    b = np.asarray(b, dtype=float)
    sigma0, d, sigma_tilde = _dense_parts(h, b, lead)
    k = sigma0 @ d.T
    return symmetrize(sigma0 - k @ pd_solve(sigma_tilde, k.T))


def posterior_mean(spatial, lead, trials, sigma_y_inv=None):
    """Per-trial posterior means ``Gamma L^T Sigma_y^-1 Y_g``.

    With noise sharing the temporal covariance of the sources the ``B``
    factors cancel, so no temporal quantity is needed here.
    """
    h = _as_h(spatial)
    lead = np.asarray(lead, dtype=float)
    n = lead.shape[1]
    if sigma_y_inv is None:
        sigma_y_inv = safe_inverse(sigma_y(h, lead))
    w = (h[:n, None] * lead.T) @ sigma_y_inv
    return np.einsum("nm,gmt->gnt", w, trials)
