"""Krylov (Lanczos) propagator for Hermitian operators.

Computes exp(-i * scale * H) @ v without forming exp(H).  The step is split
adaptively: a first guess from the Ritz spectral radius, then halving until
the standard residual estimate fits the tolerance budget, so accuracy does
not depend on the magnitude of `scale`.
"""

from __future__ import annotations

from typing import Callable

import numpy as np
import scipy.linalg

_BREAKDOWN = 1e-14


def expm_multiply_hermitian(
    matvec: Callable[[np.ndarray], np.ndarray],
    v: np.ndarray,
    scale: float,
    tol: float = 1e-12,
    max_subspace: int = 30,
) -> np.ndarray:
    """Return exp(-1j * scale * H) @ v for Hermitian H given through `matvec`."""
    w = np.array(v, dtype=complex, copy=True)
    if np.linalg.norm(w) == 0.0 or scale == 0.0:
        return w
    remaining = float(scale)
    budget_rate = tol / abs(scale)  # error budget per unit |step|
    min_step = abs(scale) * 2.0**-40
    while remaining != 0.0:
        norm_w = np.linalg.norm(w)
        basis, alpha, offdiag, beta_res = _lanczos(matvec, w / norm_w, max_subspace)
        m = len(alpha)
        evals, evecs = scipy.linalg.eigh_tridiagonal(alpha, offdiag)
        if beta_res <= _BREAKDOWN:
            # invariant subspace: the projected exponential is exact
            small = _subspace_exponential(evals, evecs, remaining)
            step = remaining
        else:
            radius = max(np.max(np.abs(evals)), 1e-30)
            step = min(abs(remaining), 0.5 * m / radius) * np.sign(remaining)
            while True:
                small = _subspace_exponential(evals, evecs, step)
                err = abs(step) * beta_res * abs(small[-1])
                if err <= budget_rate * abs(step) or abs(step) <= min_step:
                    break
                step /= 2.0
        w = norm_w * (basis @ small)
        remaining -= step
    return w


def _subspace_exponential(evals: np.ndarray, evecs: np.ndarray, step: float) -> np.ndarray:
    """exp(-1j * step * T) e1 through the eigendecomposition of T."""
    return evecs @ (np.exp(-1j * step * evals) * evecs[0, :].conj())


def _lanczos(
    matvec: Callable[[np.ndarray], np.ndarray],
    q0: np.ndarray,
    m_max: int,
) -> tuple[np.ndarray, np.ndarray, np.ndarray, float]:
    """Lanczos factorization with full reorthogonalization.

    Returns (basis, alpha, offdiag, beta_res): basis is n x m orthonormal,
    T_m = tridiag(offdiag, alpha, offdiag), and beta_res is the residual norm
    (zero on breakdown, i.e. when the span is an invariant subspace).
    """
    n = q0.shape[0]
    m_max = min(m_max, n)
    basis = np.zeros((n, m_max), dtype=complex)
    alpha = np.zeros(m_max)
    offdiag = np.zeros(max(m_max - 1, 0))
    basis[:, 0] = q0
    m = m_max
    beta_res = 0.0
    for j in range(m_max):
        w = matvec(basis[:, j])
        alpha[j] = float(np.real(np.vdot(basis[:, j], w)))
        w = w - alpha[j] * basis[:, j]
        if j > 0:
            w = w - offdiag[j - 1] * basis[:, j - 1]
        # full reorthogonalization keeps the basis numerically orthonormal
        w = w - basis[:, : j + 1] @ (basis[:, : j + 1].conj().T @ w)
        b = float(np.linalg.norm(w))
        if j + 1 == m_max:
            beta_res = b
            break
        if b < _BREAKDOWN:
            m = j + 1
            beta_res = 0.0
            break
        offdiag[j] = b
        basis[:, j + 1] = w / b
    return basis[:, :m], alpha[:m], offdiag[: m - 1], beta_res
