"""Independent reference computations shared by the test modules."""
import itertools

import numpy as np
from scipy.optimize import minimize


def dense_spatial_surrogate(h, phi, sigma_y_k, m_sn_mat):
    """``tr(Sigma_k^-1 Phi H Phi^T) + tr(M_SN H^-1)`` for diagonal ``H``."""
    return float(np.trace(np.linalg.solve(sigma_y_k, phi @ np.diag(h) @ phi.T)) + np.trace(m_sn_mat / h))


def minimize_spatial_surrogate(phi, sigma_y_k, m_sn_mat, h0, homoscedastic=False, n_sources=None):
    """Numerical minimiser over positive diagonal ``H`` (log parametrisation)."""
    size = phi.shape[1]
    if homoscedastic:
        def expand(u):
            return np.exp(np.r_[u[:n_sources], np.full(size - n_sources, u[-1])])
        u0 = np.log(np.r_[h0[:n_sources], h0[n_sources]])
    else:
        def expand(u):
            return np.exp(u)
        u0 = np.log(h0)

    def f(u):
        return dense_spatial_surrogate(expand(u), phi, sigma_y_k, m_sn_mat)

    res = minimize(f, u0, method="L-BFGS-B", options={"ftol": 1e-15, "gtol": 1e-12, "maxiter": 20000})
    # polish with a derivative-free pass so the answer does not lean on gradients
    res = minimize(f, res.x, method="Nelder-Mead", options={"xatol": 1e-10, "fatol": 1e-15, "maxiter": 200000})
    return expand(res.x)


def brute_force_emd_1d(a_counts, b_counts, positions):
    """Optimal transport by exhaustive search over atom permutations.

    Weights are integer counts with equal totals; each unit of mass is an
    atom, and every transport plan between equal-mass atom sets is a
    permutation (Birkhoff), so the minimum over all permutations is exact.
    """
    pos = np.asarray(positions, dtype=float)
    src = np.repeat(np.arange(len(a_counts)), a_counts)
    dst = np.repeat(np.arange(len(b_counts)), b_counts)
    if pos.ndim == 1:
        dist = np.abs(pos[:, None] - pos[None, :])
    else:
        dist = np.linalg.norm(pos[:, None, :] - pos[None, :, :], axis=-1)
    cost = dist[src][:, dst]
    best = min(cost[np.arange(len(src)), list(p)].sum() for p in itertools.permutations(range(len(dst))))
    return best / len(src) / dist.max()
