"""Synthetic data: AR source time courses, SNR-calibrated noise mixing,
Kronecker-structured trials and lead fields.

Every generator takes an explicit ``numpy.random.Generator`` so results are
a pure function of the seed.
"""
from dataclasses import dataclass

import numpy as np
from scipy.signal import lfilter

from .matio import load_matrix
from .model import check_lead_field

REFLECTION_BOUND = 0.95
BURN_IN_FACTOR = 10


@dataclass(frozen=True)
class ARProcess:
    """``x(t) = sum_p coeffs[p-1] x(t-p) + xi(t)``."""

    coeffs: tuple

    def __post_init__(self):
        object.__setattr__(self, "coeffs", tuple(float(c) for c in np.atleast_1d(self.coeffs)))

    @property
    def order(self):
        return len(self.coeffs)

    @property
    def roots(self):
        return np.roots(np.concatenate([[1.0], -np.asarray(self.coeffs)]))

    @property
    def is_stable(self):
        return bool(np.all(np.abs(self.roots) < 1.0))

    def filter(self, innovations):
        return lfilter([1.0], np.concatenate([[1.0], -np.asarray(self.coeffs)]), innovations)


def reflection_to_ar(kappas):
    """Map reflection (partial autocorrelation) coefficients to AR coefficients."""
    a = np.zeros(0)
    for kappa in kappas:
        a = np.concatenate([a - kappa * a[::-1], [kappa]])
    return a


def _reflection_sampler(rng, order):
    return reflection_to_ar(rng.uniform(-REFLECTION_BOUND, REFLECTION_BOUND, size=order))


def random_stable_ar(order, rng, sampler=None, max_attempts=1000):
    """Draw a stable AR process of the given order.

    Candidates come from ``sampler(rng, order)`` (default: uniform reflection
    coefficients, stable by construction) and are rejected until one passes
    the root test.
    """
    if order < 1:
        raise ValueError("AR order must be at least 1")
    sampler = sampler or _reflection_sampler
    for _ in range(max_attempts):
        proc = ARProcess(sampler(rng, order))
        if proc.order != order:
            raise ValueError(f"sampler returned order {proc.order}, expected {order}")
        if proc.is_stable:
            return proc
    raise RuntimeError(f"no stable AR({order}) candidate in {max_attempts} attempts")


def ar_autocovariance(proc, nlags, tol=1e-15):
    """Stationary autocovariance at lags ``0..nlags-1`` for unit innovations."""
    rho = float(np.max(np.abs(proc.roots))) if proc.order else 0.0
    if rho >= 1:
        raise ValueError("process is not stable")
    n_imp = nlags + (int(np.ceil(np.log(tol) / np.log(rho))) if rho > 0 else 1)
    impulse = np.zeros(n_imp)
    impulse[0] = 1.0
    psi = proc.filter(impulse)
    return np.array([psi[: n_imp - k] @ psi[k:] for k in range(nlags)])


@dataclass
class SimConfig:
    n_sources: int = 100
    n_active: int = 3
    m_sensors: int = 20
    t_samples: int = 100
    ar_order: int = 1
    alpha: float = 0.8
    g_trials: int = 1
    beta: float = 0.8
    seed: int = 0

    def __post_init__(self):
        for name in ("n_sources", "m_sensors", "t_samples", "ar_order", "g_trials"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")
        if not 0 <= self.n_active <= self.n_sources:
            raise ValueError("n_active must lie in [0, n_sources]")
        if not 0 < self.alpha < 1:
            raise ValueError(f"alpha must lie in (0, 1), got {self.alpha}")
        if not -1 < self.beta < 1:
            raise ValueError(f"beta must lie in (-1, 1), got {self.beta}")


def gen_ar_sources(config, rng, processes=None, active=None):
    """Source matrix ``(N, T)`` with ``n_active`` AR rows at random indices.

    Returns ``(x, active, processes)``; pass ``processes`` and ``active`` back
    in to draw further trials from the same sources.
    """
    n, t = config.n_sources, config.t_samples
    if active is None:
        active = np.sort(rng.choice(n, size=config.n_active, replace=False))
    if processes is None:
        processes = [random_stable_ar(config.ar_order, rng) for _ in active]
    x = np.zeros((n, t))
    burn = BURN_IN_FACTOR * t
    for idx, proc in zip(active, processes):
        x[idx] = proc.filter(rng.standard_normal(burn + t))[burn:]
    return x, np.asarray(active), processes


def snr_from_alpha(alpha):
    """``20 log10(alpha / (1 - alpha))`` in dB."""
    if not 0 < alpha < 1:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    return 20.0 * np.log10(alpha / (1.0 - alpha))


def mix_noise(signal, noise, alpha):
    """Add ``noise`` rescaled so ``||added|| / ||signal|| = (1 - alpha) / alpha``."""
    if not 0 < alpha < 1:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    signal = np.asarray(signal, dtype=float)
    noise = np.asarray(noise, dtype=float)
    s_norm, e_norm = np.linalg.norm(signal), np.linalg.norm(noise)
    if s_norm == 0 or e_norm == 0:
        raise ValueError("signal and noise must both have non-zero norm")
    return signal + ((1.0 - alpha) * s_norm / (alpha * e_norm)) * noise


def gen_temporal_cov(kind, t_samples, beta=0.8, rng=None):
    """Ground-truth temporal covariance.

    ``"toeplitz_ar1"`` gives ``beta ** |i - j|``; ``"full_random"`` gives
    ``W W^T / T + 1e-6 I`` with standard normal ``W``.
    """
    if kind == "toeplitz_ar1":
        if not -1 < beta < 1:
            raise ValueError("beta must lie in (-1, 1)")
        lags = np.abs(np.subtract.outer(np.arange(t_samples), np.arange(t_samples)))
        return beta**lags
    if kind == "full_random":
        if rng is None:
            raise ValueError("full_random needs an rng")
        w = rng.standard_normal((t_samples, t_samples))
        return w @ w.T / t_samples + 1e-6 * np.eye(t_samples)
    raise ValueError(f"unknown temporal covariance kind {kind!r}")


def gen_trialset_kron(gamma, b, lead, g_trials, alpha, rng):
    """Trials with sources ``~ N(0, Gamma (x) B)`` and noise ``~ N(0, I (x) B)``.

    The noise of each trial is rescaled to the requested ``alpha``. With an
    all-zero signal the raw noise is returned. Returns ``(trials, sources)``
    of shapes ``(G, M, T)`` and ``(G, N, T)``.
    """
    lead = check_lead_field(lead)
    gamma = np.asarray(gamma, dtype=float)
    m, n = lead.shape
    if gamma.shape != (n,):
        raise ValueError(f"gamma has shape {gamma.shape}, expected {(n,)}")
    t = b.shape[0]
    chol = np.linalg.cholesky(b)
    trials = np.empty((g_trials, m, t))
    sources = np.empty((g_trials, n, t))
    for g in range(g_trials):
        x = np.sqrt(gamma)[:, None] * (rng.standard_normal((n, t)) @ chol.T)
        e = rng.standard_normal((m, t)) @ chol.T
        signal = lead @ x
        sources[g] = x
        trials[g] = mix_noise(signal, e, alpha) if np.any(signal) else e
    return trials, sources


def gen_lead_field_synthetic(m_sensors, n_sources, rng):
    """Standard normal lead field with unit-norm columns."""
    return check_lead_field(rng.standard_normal((m_sensors, n_sources)), normalize=True)


def load_lead_field(path, normalize=False, shape=None):
    lead = check_lead_field(load_matrix(path), normalize=normalize)
    if shape is not None and lead.shape != tuple(shape):
        raise ValueError(f"lead field in {path} has shape {lead.shape}, expected {tuple(shape)}")
    return lead


def simulate_ar_dataset(config, rng, lead=None):
    """AR-source / white-noise protocol used for source-localisation benchmarks.

    Returns a dict with ``lead``, ``trials`` ``(G, M, T)``, ``sources``
    ``(G, N, T)``, ``active`` indices and ``b_true``, the mean stationary
    autocovariance (Toeplitz) of the active AR processes.
    """
    if lead is None:
        lead = gen_lead_field_synthetic(config.m_sensors, config.n_sources, rng)
    lead = check_lead_field(lead)
    if lead.shape != (config.m_sensors, config.n_sources):
        raise ValueError(f"lead field shape {lead.shape} does not match config")
    g, m, t = config.g_trials, config.m_sensors, config.t_samples
    trials = np.empty((g, m, t))
    sources = np.empty((g, config.n_sources, t))
    active = processes = None
    for k in range(g):
        x, active, processes = gen_ar_sources(config, rng, processes, active)
        signal = lead @ x
        noise = rng.standard_normal((m, t))
        sources[k] = x
        trials[k] = mix_noise(signal, noise, config.alpha) if np.any(signal) else noise
    if processes:
        acov = np.mean([ar_autocovariance(p, t) for p in processes], axis=0)
    else:
        acov = np.eye(1, t)[0]
    lags = np.abs(np.subtract.outer(np.arange(t), np.arange(t)))
    return {
        "lead": lead,
        "trials": trials,
        "sources": sources,
        "active": active,
        "b_true": acov[lags],
    }


def simulate_kron_dataset(config, rng, kind="toeplitz_ar1", lead=None):
    """Gamma (x) B protocol used for temporal covariance recovery.

    ``n_active`` randomly placed sources get unit variance; the rest are zero.
    """
    if lead is None:
        lead = gen_lead_field_synthetic(config.m_sensors, config.n_sources, rng)
    b = gen_temporal_cov(kind, config.t_samples, config.beta, rng)
    gamma = np.zeros(config.n_sources)
    active = np.sort(rng.choice(config.n_sources, size=config.n_active, replace=False))
    gamma[active] = 1.0
    trials, sources = gen_trialset_kron(gamma, b, lead, config.g_trials, config.alpha, rng)
    return {"lead": lead, "trials": trials, "sources": sources, "active": active, "b_true": b}
