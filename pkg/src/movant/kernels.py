"""Hot numeric kernels.

Each kernel exists twice: a loop version compiled by numba and a vectorised
numpy version. ``MOVANT_NUMBA=0`` selects the numpy path (see ``_accel``).
Both paths must agree to rounding; ``tests/test_kernels.py`` pins that.
The Adam update is the exception: it is numpy-only on both backends.
"""

import numpy as np

from ._accel import USE_NUMBA, njit


class NotPositiveDefinite(ValueError):
    """A Cholesky pivot was not strictly positive."""


# ---------------------------------------------------------------------------
# Hermitian positive definite solves


@njit
def _chol_inplace(L):
    # Lower Cholesky factor of a Hermitian PD matrix; returns False on a bad pivot.
    n = L.shape[0]
    for j in range(n):
        d = L[j, j].real
        for p in range(j):
            d -= (L[j, p] * np.conj(L[j, p])).real
        if not d > 0.0:
            return False
        d = np.sqrt(d)
        L[j, j] = d
        for i in range(j + 1, n):
            s = L[i, j]
            for p in range(j):
                s -= L[i, p] * np.conj(L[j, p])
            L[i, j] = s / d
        for i in range(j):
            L[i, j] = 0.0
    return True


@njit
def _chol_solve_nb(M, B):
    n = M.shape[0]
    L = M.copy()
    if not _chol_inplace(L):
        return B * np.nan, False
    X = B.copy()
    m = B.shape[1]
    for c in range(m):
        for i in range(n):
            s = X[i, c]
            for p in range(i):
                s -= L[i, p] * X[p, c]
            X[i, c] = s / L[i, i]
        for i in range(n - 1, -1, -1):
            s = X[i, c]
            for p in range(i + 1, n):
                s -= np.conj(L[p, i]) * X[p, c]
            X[i, c] = s / L[i, i].real
    return X, True


@njit
def _quad_inv_nb(G, v):
    # out[s] = v[s]^H G[s]^{-1} v[s] for a batch of Hermitian PD matrices.
    S, n = v.shape
    out = np.empty(S)
    L = np.empty((n, n), dtype=np.complex128)
    y = np.empty(n, dtype=np.complex128)
    for s in range(S):
        for i in range(n):
            for j in range(n):
                L[i, j] = G[s, i, j]
        if not _chol_inplace(L):
            out[s] = np.nan
            continue
        acc = 0.0
        for i in range(n):
            t = v[s, i]
            for p in range(i):
                t -= L[i, p] * y[p]
            y[i] = t / L[i, i].real
            acc += (y[i] * np.conj(y[i])).real
        out[s] = acc
    return out


def _chol_solve_np(M, B):
    from scipy.linalg import cho_factor, cho_solve

    try:
        c = cho_factor(M, lower=True, check_finite=False)
    except np.linalg.LinAlgError:
        return B * np.nan, False
    if not np.all(np.diag(c[0]).real > 0):
        return B * np.nan, False
    return cho_solve(c, B, check_finite=False), True


def _quad_inv_np(G, v):
    try:
        L = np.linalg.cholesky(G)
    except np.linalg.LinAlgError:
        return np.full(G.shape[0], np.nan)
    y = np.linalg.solve(L, v[..., None])[..., 0]
    return np.sum(y.real ** 2 + y.imag ** 2, axis=-1)


def chol_solve(M, B):
    """Solve ``M X = B`` for Hermitian PD ``M`` (2-D ``B``)."""
    M = np.ascontiguousarray(M, dtype=np.complex128)
    B = np.ascontiguousarray(B, dtype=np.complex128)
    X, ok = (_chol_solve_nb if USE_NUMBA else _chol_solve_np)(M, B)
    if not ok:
        raise NotPositiveDefinite("NotPositiveDefinite")
    return X


def quad_inv_forms(G, v):
    """Batched ``v^H G^{-1} v`` for ``G`` of shape (S, n, n), ``v`` of shape (S, n)."""
    G = np.ascontiguousarray(G, dtype=np.complex128)
    v = np.ascontiguousarray(v, dtype=np.complex128)
    out = (_quad_inv_nb if USE_NUMBA else _quad_inv_np)(G, v)
    if np.isnan(out).any():
        raise NotPositiveDefinite("NotPositiveDefinite")
    return out


# ---------------------------------------------------------------------------
# Imperfect-CSI interference covariance, batched over CEE draws


@njit
def _mc_cov_nb(dH, W, base):
    # Jhat[s] = sum_k' dH[s]^H w_k' w_k'^H dH[s] + base
    S, N, M = dH.shape
    K = W.shape[1]
    out = np.empty((S, M, M), dtype=np.complex128)
    d = np.empty((K, M), dtype=np.complex128)
    for s in range(S):
        for k in range(K):
            for m in range(M):
                acc = 0j
                for n in range(N):
                    acc += np.conj(dH[s, n, m]) * W[n, k]
                d[k, m] = acc
        for i in range(M):
            for j in range(M):
                acc = base[i, j]
                for k in range(K):
                    acc += d[k, i] * np.conj(d[k, j])
                out[s, i, j] = acc
    return out


def _mc_cov_np(dH, W, base):
    D = np.conj(np.swapaxes(dH, 1, 2)) @ W  # (S, M, K)
    return D @ np.conj(np.swapaxes(D, 1, 2)) + base


def mc_covariances(dH, W, base):
    dH = np.ascontiguousarray(dH, dtype=np.complex128)
    W = np.ascontiguousarray(W, dtype=np.complex128)
    base = np.ascontiguousarray(base, dtype=np.complex128)
    return (_mc_cov_nb if USE_NUMBA else _mc_cov_np)(dH, W, base)


# ---------------------------------------------------------------------------
# Fixed-depth MLP: in -> h1 -> h2 -> out, params packed in one flat vector as
# [W1 (n0*n1), b1, W2 (n1*n2), b2, W3 (n2*n3), b3]; layers compute x @ W + b.


def _mlp_forward(theta, n0, n1, n2, n3, x):
    # returns hidden activations and the pre-head output z; the head is applied by the caller
    o = 0
    W1 = theta[o:o + n0 * n1].reshape(n0, n1)
    o += n0 * n1
    b1 = theta[o:o + n1]
    o += n1
    W2 = theta[o:o + n1 * n2].reshape(n1, n2)
    o += n1 * n2
    b2 = theta[o:o + n2]
    o += n2
    W3 = theta[o:o + n2 * n3].reshape(n2, n3)
    o += n2 * n3
    b3 = theta[o:o + n3]
    h1 = np.maximum(x @ W1 + b1, 0.0)
    h2 = np.maximum(h1 @ W2 + b2, 0.0)
    z = h2 @ W3 + b3
    return h1, h2, z


def _mlp_backward(theta, n0, n1, n2, n3, x, h1, h2, gz):
    # gz is the gradient with respect to the pre-head output
    o1 = n0 * n1 + n1
    o2 = o1 + n1 * n2 + n2
    W1 = theta[0:n0 * n1].reshape(n0, n1)
    W2 = theta[o1:o1 + n1 * n2].reshape(n1, n2)
    W3 = theta[o2:o2 + n2 * n3].reshape(n2, n3)
    grad = np.empty_like(theta)
    gW3 = h2.T @ gz
    gb3 = gz.sum(axis=0)
    g2 = (gz @ W3.T) * (h2 > 0.0)
    gW2 = h1.T @ g2
    gb2 = g2.sum(axis=0)
    g1 = (g2 @ W2.T) * (h1 > 0.0)
    gW1 = x.T @ g1
    gb1 = g1.sum(axis=0)
    gx = g1 @ W1.T
    grad[0:n0 * n1] = gW1.ravel()
    grad[n0 * n1:o1] = gb1
    grad[o1:o1 + n1 * n2] = gW2.ravel()
    grad[o1 + n1 * n2:o2] = gb2
    grad[o2:o2 + n2 * n3] = gW3.ravel()
    grad[o2 + n2 * n3:] = gb3
    return grad, gx


def _adam_np(theta, grad, m, v, lr, b1, b2, eps, t):
    # in place; t is the post-increment step count. A compiled loop was measured
    # slower than these five vector ops at critic sizes, so both backends use this.
    m *= b1
    m += (1.0 - b1) * grad
    v *= b2
    v += (1.0 - b2) * grad * grad
    theta -= lr * (m / (1.0 - b1 ** t)) / (np.sqrt(v / (1.0 - b2 ** t)) + eps)


mlp_forward = njit(_mlp_forward)
mlp_backward = njit(_mlp_backward)
adam_update = _adam_np


def numpy_twins():
    """Uncompiled reference versions, used by the backend-agreement tests and the benchmark."""
    return {
        "chol_solve": _chol_solve_np,
        "quad_inv_forms": _quad_inv_np,
        "mc_covariances": _mc_cov_np,
        "mlp_forward": _mlp_forward,
        "mlp_backward": _mlp_backward,
        "adam_update": _adam_np,
    }

