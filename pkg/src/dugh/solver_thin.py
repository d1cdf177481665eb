"""Thin Dugh: Toeplitz temporal covariance learned through the spectrum of
its circulant embedding.

A symmetric Toeplitz ``B`` (``T x T``) is the leading block of a circulant
``C`` (``L x L``). ``C = F diag(p) F^H`` with the unitary DFT ``F``, so
``B = Q diag(p) Q^H`` with ``Q = [I_T, 0] F``. Here ``p`` holds the actual
eigenvalues of ``C``, i.e. the unnormalised DFT of its first row.
"""
import warnings
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.linalg import toeplitz

from .model import P_MIN, check_lead_field
from .pdlinalg import pd_solve, symmetrize, sym_eig
from .solver_full import FitConfig, _validate, init_params, run_mm

CLIP_WARN_FRACTION = 0.1


@dataclass(frozen=True)
class CirculantBasis:
    """Selector-times-DFT operator for ``T`` samples embedded in length ``L``.

    ``L >= 2T - 1`` embeds any symmetric Toeplitz matrix. ``L == T`` is also
    accepted and restricts ``B`` itself to be circulant (``Q`` is unitary).
    """

    t_samples: int
    embed_len: int

    def __post_init__(self):
        if self.t_samples < 1:
            raise ValueError("t_samples must be positive")
        if self.embed_len != self.t_samples and self.embed_len < 2 * self.t_samples - 1:
            raise ValueError(
                f"embedding length {self.embed_len} < 2T - 1 = {2 * self.t_samples - 1}"
            )

    @classmethod
    def for_samples(cls, t_samples, embed_len=None):
        return cls(t_samples, 2 * t_samples + 1 if embed_len is None else embed_len)

    @cached_property
    def dft(self):
        """Unitary DFT matrix ``F[m, l] = exp(2i pi l m / L) / sqrt(L)``."""
        idx = np.arange(self.embed_len)
        return np.exp(2j * np.pi * np.outer(idx, idx) / self.embed_len) / np.sqrt(self.embed_len)

    @cached_property
    def q(self):
        return self.dft[: self.t_samples]


def embed_first_row(first_row, embed_len):
    """First row of the symmetric circulant extension of a Toeplitz row.

    Positions not fixed by symmetry are filled with the last Toeplitz
    coefficient.
    """
    first_row = np.asarray(first_row, dtype=float)
    t = first_row.size
    if embed_len < 2 * t - 1:
        raise ValueError(f"embedding length {embed_len} < 2T - 1 = {2 * t - 1}")
    c = np.full(embed_len, first_row[-1])
    c[:t] = first_row
    if t > 1:
        c[embed_len - np.arange(1, t)] = first_row[1:]
    return c


def toeplitz_spectrum(first_row, embed_len, return_clipped=False):
    """Eigenvalues of the circulant embedding of a symmetric Toeplitz matrix.

    Negative eigenvalues are clipped to ``P_MIN``; pass
    ``return_clipped=True`` to also get the number of clipped entries.
    """
    c = embed_first_row(first_row, embed_len)
    p = np.fft.fft(c).real
    clipped = int(np.sum(p < P_MIN))
    if clipped > CLIP_WARN_FRACTION * embed_len:
        warnings.warn(
            f"{clipped} of {embed_len} embedding eigenvalues clipped; "
            "Toeplitz matrix is poorly represented",
            RuntimeWarning,
            stacklevel=2,
        )
    p = np.maximum(p, P_MIN)
    return (p, clipped) if return_clipped else p


def build_b_from_spectrum(p, basis):
    """``Re(Q diag(p) Q^H)``: a real symmetric Toeplitz ``T x T`` matrix."""
    p = np.asarray(p, dtype=float)
    if p.shape != (basis.embed_len,):
        raise ValueError(f"spectrum has length {p.size}, expected {basis.embed_len}")
    # Q diag(p) Q^H only depends on the lag, via the inverse DFT of p.
    col = np.fft.ifft(p).real[: basis.t_samples]
    return symmetrize(toeplitz(col))


def _q_quadratic_diag(basis, mat):
    """``diag(Q^H mat Q)`` for a real symmetric ``mat``."""
    q = basis.q
    return np.real(np.einsum("tl,tl->l", q.conj(), mat @ q))


def update_spectrum(p_k, b_k, m_time_mat, basis):
    """One closed-form MM step on the circulant spectrum.

    ``p_l = sqrt(g_l / z_l)`` with ``g = p_k^2 diag(Q^H B^-1 M B^-1 Q)`` and
    ``z = diag(Q^H B^-1 Q)``, floored at ``P_MIN``.
    """
    p_k = np.asarray(p_k, dtype=float)
    binv = pd_solve(b_k, np.eye(b_k.shape[0]))
    binv = symmetrize(binv)
    z = _q_quadratic_diag(basis, binv)
    g = p_k**2 * _q_quadratic_diag(basis, symmetrize(binv @ m_time_mat @ binv))
    return np.maximum(np.sqrt(np.maximum(g, 0.0) / z), P_MIN)


def toeplitz_surrogate(p, p_k, b_k, m_time_mat, basis):
    """Separable upper bound on the temporal surrogate, as a function of ``p``."""
    binv = symmetrize(pd_solve(b_k, np.eye(b_k.shape[0])))
    z = _q_quadratic_diag(basis, binv)
    g = np.asarray(p_k) ** 2 * _q_quadratic_diag(basis, symmetrize(binv @ m_time_mat @ binv))
    return float(np.sum(z * p + g / p))


def pi_weights(lam, d, p):
    """``Pi[l, m] = 1 / (p_l (lam_m + d_m))``.

    The noise term carries ``p_l`` because the noise shares the temporal
    covariance of the sources.
    """
    return 1.0 / (np.outer(p, np.asarray(lam) + np.asarray(d)))


def efficient_posterior_mean(spatial, p, basis, lead, trial):
    """Posterior mean from the diagonalised Kronecker form.

    The lead field and data are whitened by the noise standard deviations so
    that a single eigenbasis diagonalises the whole spatial covariance; the
    result is already in source units. ``trial`` is one ``M x T`` block
    (returns ``N x T``) or a ``(G, M, T)`` stack (returns ``(G, N, T)``).
    """
    h = spatial.h if hasattr(spatial, "h") else np.asarray(spatial, dtype=float)
    lead = check_lead_field(lead)
    m, n = lead.shape
    gamma, lam = h[:n], h[n:]
    trial = np.asarray(trial, dtype=float)
    scale = 1.0 / np.sqrt(lam)
    lead_w = lead * scale[:, None]
    y_w = trial * scale[:, None]
    u, d = sym_eig(symmetrize((lead_w * gamma) @ lead_w.T))
    d = np.maximum(d, 0.0)
    q = basis.q
    pi = pi_weights(np.ones(m), d, p)  # (L, M)
    inner = pi * (q.conj().T @ np.swapaxes(y_w, -1, -2) @ u)  # (..., L, M)
    xt = (q * p) @ inner @ (u.T @ lead_w * gamma)  # (..., T, N)
    return np.swapaxes(np.real(xt), -1, -2)


def fit_thin(lead, trials, config=None, init=None, embed_len=None):
    """Thin Dugh with a Toeplitz temporal covariance.

    ``init`` is an optional ``(h, p)`` pair; by default ``h`` is drawn as
    ``|N(0,1)|`` and ``p`` is all ones (``B = I``).
    """
    config = config or FitConfig()
    lead, trials = _validate(lead, trials, config)
    t = trials.shape[2]
    basis = CirculantBasis.for_samples(t, embed_len)
    state = {"p": np.ones(basis.embed_len)}
    h0 = None
    if init is not None:
        h0, state["p"] = np.asarray(init[0], dtype=float), np.asarray(init[1], dtype=float)
    b0 = build_b_from_spectrum(state["p"], basis)

    def temporal_step(b, mt):
        state["p"] = update_spectrum(state["p"], b, mt, basis)
        return build_b_from_spectrum(state["p"], basis)

    if h0 is None:
        rng = np.random.default_rng(config.seed)
        h0, _ = init_params(lead.shape[1], lead.shape[0], t, rng, config.homoscedastic)

    def posterior(h, _sy_inv):
        return efficient_posterior_mean(h, state["p"], basis, lead, trials)

    result = run_mm(lead, trials, config, temporal_step, init=(h0, b0), posterior=posterior)
    result.spectrum = state["p"]
    result.diagnostics["clipped"] = int(np.sum(state["p"] <= P_MIN))
    return result

