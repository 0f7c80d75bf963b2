"""Achievable-rate functionals for the multi-receiver downlink (bits per channel use)."""

from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .channel import sample_cee


@dataclass
class RateBreakdown:
    per_receiver: np.ndarray
    covariances: list = field(default_factory=list, repr=False)
    stderr: np.ndarray | None = None

    @property
    def sum_rate(self):
        return float(np.sum(self.per_receiver))


def power(W):
    """Total transmit power tr(W W^H)."""
    W = np.asarray(W)
    return float(np.sum(W.real ** 2 + W.imag ** 2))


def _interference(H_k, W, k):
    # sum_{k' != k} H_k^H w_k' w_k'^H H_k
    D = H_k.conj().T @ W  # (M_k, K): column k' is H_k^H w_k'
    D = np.delete(D, k, axis=1)
    return D @ D.conj().T


def _rate_with(H, W, extra, sigma2):
    W = np.asarray(W, dtype=complex)
    rates = np.empty(len(H))
    covs = []
    for k, H_k in enumerate(H):
        M_k = H_k.shape[1]
        J = _interference(H_k, W, k) + sigma2 * np.eye(M_k)
        if extra is not None:
            J = J + extra[k]
        v = H_k.conj().T @ W[:, k]
        q = kernels.quad_inv_forms(J[None], v[None])[0]
        rates[k] = np.log2(1.0 + q)
        covs.append(J)
    return RateBreakdown(rates, covs)


def perfect_rate(H, W, sigma2):
    """Perfect-CSI rate log2(1 + w_k^H H_k J_k^{-1} H_k^H w_k) per receiver."""
    return _rate_with(H, W, None, sigma2)


def cee_covariance(cee, W, k):
    """Expected error-induced interference tr(B_k W W^H) A_k^T, summed over all beams."""
    W = np.asarray(W, dtype=complex)
    t = np.real(np.trace(cee.B[k] @ W @ W.conj().T))
    return t * np.asarray(cee.A[k]).T


def ub_rate(H_hat, W, cee, sigma2):
    """Closed-form rate with the CEE covariance folded into the interference term."""
    extra = [cee_covariance(cee, W, k) for k in range(len(H_hat))]
    return _rate_with(H_hat, W, extra, sigma2)


def mc_rate(H_hat, W, cee, sigma2, rng, samples):
    """Monte-Carlo estimate of the expected imperfect-CSI rate.

    Returns per-receiver means with sample standard errors.
    """
    if samples < 1:
        raise ValueError("samples must be >= 1")
    W = np.asarray(W, dtype=complex)
    if cee.is_zero:
        # every draw is dH = 0, so all samples coincide with the closed form
        br = _rate_with(H_hat, W, None, sigma2)
        return RateBreakdown(br.per_receiver, br.covariances, np.zeros(len(H_hat)))
    K = len(H_hat)
    means = np.empty(K)
    errs = np.empty(K)
    covs = []
    for k, Hh in enumerate(H_hat):
        M_k = Hh.shape[1]
        base = _interference(Hh, W, k) + sigma2 * np.eye(M_k)
        v = Hh.conj().T @ W[:, k]
        dH = sample_cee(rng, cee, k, Hh.shape, size=samples)
        J = kernels.mc_covariances(dH, W, base)
        q = kernels.quad_inv_forms(J, np.broadcast_to(v, (samples, M_k)))
        r = np.log2(1.0 + q)
        means[k] = r.mean()
        errs[k] = r.std(ddof=1) / np.sqrt(samples) if samples > 1 else 0.0
        covs.append(J.mean(axis=0))
    return RateBreakdown(means, covs, errs)


def capacity_ceiling(H_hat, P, sigma2):
    """Sum over receivers of log2(1 + P lambda_max(H_k H_k^H) / sigma^2)."""
    total = 0.0
    for Hh in H_hat:
        lam = np.linalg.eigvalsh(Hh @ Hh.conj().T)[-1]
        total += np.log2(1.0 + P * max(lam, 0.0) / sigma2)
    return total
