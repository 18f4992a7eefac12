"""One-sided Jacobi SVD for small dense square matrices.

Sized for the d x d cross-covariance matrices the alignment step produces
(d <= 256). Rank-deficient inputs are handled by completing the left factor
to a full orthonormal basis, so downstream rotation products stay orthogonal.
"""

from __future__ import annotations

import numpy as np

SWEEP_TOL = 1e-12
MAX_SWEEPS = 60


def _complete_basis(u: np.ndarray, rank: int) -> np.ndarray:
    """Fill columns rank..d-1 of u with an orthonormal complement."""
    d = u.shape[0]
    filled = rank
    for cand in range(d):
        if filled == d:
            break
        vec = np.zeros(d)
        vec[cand] = 1.0
        vec -= u[:, :filled] @ (u[:, :filled].T @ vec)
        norm = np.linalg.norm(vec)
        if norm > 1e-8:
            u[:, filled] = vec / norm
            filled += 1
    return u


def jacobi_svd(a: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Decompose a square matrix as a = u @ diag(s) @ v.T.

    One-sided rotations orthogonalize the columns of a working copy until
    every pairwise inner product falls below SWEEP_TOL (at most MAX_SWEEPS
    passes). Singular values come back descending; each column of u is
    sign-fixed so its largest-magnitude entry is nonnegative, making the
    output deterministic.
    """
    a = np.asarray(a, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    d = a.shape[0]
    m = a.copy()
    v = np.eye(d)

    for _ in range(MAX_SWEEPS):
        off = 0.0
        for p in range(d - 1):
            for q in range(p + 1, d):
                alpha = m[:, p] @ m[:, p]
                beta = m[:, q] @ m[:, q]
                gamma = m[:, p] @ m[:, q]
                if abs(gamma) <= SWEEP_TOL * np.sqrt(alpha * beta):
                    continue
                off = max(off, abs(gamma))
                zeta = (beta - alpha) / (2.0 * gamma)
                t = np.sign(zeta) / (abs(zeta) + np.sqrt(1.0 + zeta * zeta))
                if zeta == 0.0:
                    t = 1.0
                c = 1.0 / np.sqrt(1.0 + t * t)
                s = c * t
                mp = m[:, p].copy()
                m[:, p] = c * mp - s * m[:, q]
                m[:, q] = s * mp + c * m[:, q]
                vp = v[:, p].copy()
                v[:, p] = c * vp - s * v[:, q]
                v[:, q] = s * vp + c * v[:, q]
        if off == 0.0:
            break

    sigma = np.linalg.norm(m, axis=0)
    order = np.argsort(-sigma, kind="stable")
    sigma = sigma[order]
    m = m[:, order]
    v = v[:, order]

    u = np.zeros((d, d))
    cutoff = max(sigma[0], 1.0) * 1e-13 if d else 0.0
    rank = 0
    for j in range(d):
        if sigma[j] > cutoff:
            u[:, j] = m[:, j] / sigma[j]
            rank += 1
        else:
            sigma[j] = 0.0
    if rank < d:
        u = _complete_basis(u, rank)

    # sign convention: largest-magnitude entry of each u column nonnegative
    for j in range(d):
        i = int(np.argmax(np.abs(u[:, j])))
        if u[i, j] < 0:
            u[:, j] = -u[:, j]
            v[:, j] = -v[:, j]

    return u, sigma, v.T
