"""Reconstruction quality measures.

``emd`` compares normalised source-power maps by optimal transport, ``tce``
compares time courses, and ``nmse`` / ``similarity_error`` compare temporal
covariance estimates.
"""
import numpy as np
from scipy.optimize import linear_sum_assignment, linprog
from scipy.spatial.distance import cdist
from scipy.stats import wasserstein_distance


def source_power(x):
    """Per-source power: Euclidean norm of each row over time."""
    x = np.asarray(x, dtype=float)
    if x.ndim == 3:  # (G, N, T): pool all trials
        x = np.concatenate(list(x), axis=1)
    return np.linalg.norm(x, axis=1)


def _normalize_weights(w, name):
    w = np.asarray(w, dtype=float)
    if w.ndim != 1:
        raise ValueError(f"{name} must be 1-D")
    if np.any(w < 0) or not np.all(np.isfinite(w)):
        raise ValueError(f"{name} must be finite and nonnegative")
    total = w.sum()
    if total <= 0:
        raise ValueError(f"{name} has no nonzero weight")
    return w / total


def _transport_lp(a, b, cost):
    n = a.size
    # row sums = a, column sums = b
    a_eq = np.vstack([np.kron(np.eye(n), np.ones(n)), np.kron(np.ones(n), np.eye(n))])
    res = linprog(cost.ravel(), A_eq=a_eq, b_eq=np.concatenate([a, b]), bounds=(0, None), method="highs")
    if res.status != 0:
        raise RuntimeError(f"transport LP failed: {res.message}")
    return res.fun


def emd(a, b, positions=None):
    """Earth mover's distance between two weight maps on shared positions.

    Parameters
    ----------
    a, b : array_like, shape (N,)
        Nonnegative weights, normalised internally to unit mass.
    positions : array_like, shape (N,) or (N, d), optional
        Support coordinates with Euclidean ground metric. Defaults to the
        indices ``0..N-1``.

    Returns
    -------
    float
        Optimal transport cost divided by the largest pairwise distance, so
        the result lies in ``[0, 1]``.
    """
    a = _normalize_weights(a, "a")
    b = _normalize_weights(b, "b")
    if a.shape != b.shape:
        raise ValueError(f"weight vectors differ in length: {a.size} vs {b.size}")
    if a.size == 1:
        return 0.0
    pos = np.arange(a.size, dtype=float) if positions is None else np.asarray(positions, dtype=float)
    if pos.shape[0] != a.size:
        raise ValueError(f"{pos.shape[0]} positions for {a.size} weights")
    if pos.ndim == 2 and pos.shape[1] == 1:
        pos = pos[:, 0]
    if pos.ndim == 1:
        scale = pos.max() - pos.min()
        if scale == 0:
            return 0.0
        return float(np.clip(wasserstein_distance(pos, pos, a, b) / scale, 0.0, 1.0))
    cost = cdist(pos, pos)
    scale = cost.max()
    if scale == 0:
        return 0.0
    return float(np.clip(_transport_lp(a, b, cost) / scale, 0.0, 1.0))


def _abs_corr(true_sources, estimated):
    """``|corr|`` between rows, zeros where either row is constant."""
    def standardize(x):
        x = x - x.mean(axis=1, keepdims=True)
        norm = np.linalg.norm(x, axis=1)
        ok = norm > 0
        x[ok] /= norm[ok, None]
        return x, ok

    t, t_ok = standardize(np.asarray(true_sources, dtype=float).copy())
    e, e_ok = standardize(np.asarray(estimated, dtype=float).copy())
    return np.abs(t @ e.T), t_ok, e_ok


def tce(true_sources, estimated, exclusive=False):
    """Time-course correlation error: ``1 - mean |r|`` over matched sources.

    Each true row is matched to the estimated row with the largest absolute
    Pearson correlation (first index on ties); several true rows may share an
    estimate. ``exclusive=True`` instead uses a one-to-one assignment that
    maximises the total absolute correlation. Constant estimated rows never
    match; if no estimated row varies, the error is 1.
    """
    true_sources = np.atleast_2d(true_sources)
    estimated = np.atleast_2d(estimated)
    if true_sources.shape[1] != estimated.shape[1]:
        raise ValueError("true and estimated time courses differ in length")
    corr, _, e_ok = _abs_corr(true_sources, estimated)
    if not e_ok.any():
        return 1.0
    corr = corr[:, e_ok]
    if exclusive:
        rows, cols = linear_sum_assignment(corr, maximize=True)
        matched = np.zeros(corr.shape[0])
        matched[rows] = corr[rows, cols]
    else:
        matched = corr.max(axis=1)
    return float(np.clip(1.0 - matched.mean(), 0.0, 1.0))


def nmse(b_true, b_est):
    """``||B_est - B_true||_F^2 / ||B_true||_F^2``."""
    b_true = np.asarray(b_true, dtype=float)
    b_est = np.asarray(b_est, dtype=float)
    if b_true.shape != b_est.shape:
        raise ValueError(f"shape mismatch {b_true.shape} vs {b_est.shape}")
    denom = np.sum(b_true**2)
    if denom == 0:
        raise ValueError("b_true is zero")
    return float(np.sum((b_est - b_true) ** 2) / denom)


def similarity_error(b_true, b_est):
    """``1 - r`` with ``r`` the Pearson correlation of the flattened matrices."""
    u = np.asarray(b_true, dtype=float).ravel()
    v = np.asarray(b_est, dtype=float).ravel()
    if u.shape != v.shape:
        raise ValueError("shape mismatch")
    if np.ptp(u) == 0 or np.ptp(v) == 0:
        raise ValueError("similarity error undefined for a constant matrix")
    return float(1.0 - np.corrcoef(u, v)[0, 1])
