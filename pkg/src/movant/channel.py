"""Field-response channel synthesis and the channel-estimation-error model."""

import json
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .numerics import sample_cn

TWO_PI = 2.0 * np.pi


@dataclass
class PathSet:
    """Far-field paths per receiver; arrays of length L_k, path 0 is LoS.

    ``theta_t``/``phi_t`` are elevation/azimuth departure angles, ``theta_r``/
    ``phi_r`` the arrival angles, all in radians.
    """

    theta_t: list
    phi_t: list
    theta_r: list
    phi_r: list
    gains: list

    @property
    def K(self):
        return len(self.gains)


@dataclass
class CeeModel:
    """Kronecker error covariance: receiver side A_k (M_k x M_k), transmitter side B_k (N x N)."""

    A: list
    B: list
    nmse: float = 0.0

    @classmethod
    def scaled_identity(cls, N, M, nmse):
        return cls([np.eye(m, dtype=complex) for m in M],
                   [nmse * np.eye(N, dtype=complex) for _ in M], nmse)

    @cached_property
    def sqrt_A(self):
        return [_psd_sqrt(a) for a in self.A]

    @cached_property
    def sqrt_B(self):
        return [_psd_sqrt(b) for b in self.B]

    @cached_property
    def is_zero(self):
        return all(not np.any(a) for a in self.A) or all(not np.any(b) for b in self.B)


def _psd_sqrt(M):
    M = np.asarray(M, dtype=complex)
    if np.allclose(M, np.diag(np.diag(M))):
        return np.diag(np.sqrt(np.maximum(np.diag(M).real, 0.0))).astype(complex)
    vals, vecs = np.linalg.eigh(M)
    return (vecs * np.sqrt(np.maximum(vals, 0.0))) @ vecs.conj().T


@dataclass
class ChannelRealization:
    perfect: list  # H_k, N x M_k
    estimated: list  # Hhat_k
    cee: CeeModel
    error: list = field(default_factory=list)  # Delta H_k = H_k - Hhat_k

    def to_json(self):
        def enc(mats):
            return [np.stack([m.real, m.imag], axis=-1).tolist() for m in mats]

        return json.dumps({
            "perfect": enc(self.perfect),
            "estimated": enc(self.estimated),
            "error": enc(self.error),
            "cee": {"A": enc(self.cee.A), "B": enc(self.cee.B), "nmse": self.cee.nmse},
        })

    @classmethod
    def from_json(cls, text):
        d = json.loads(text)

        def dec(mats):
            out = []
            for m in mats:
                a = np.asarray(m, dtype=float)
                out.append(a[..., 0] + 1j * a[..., 1])
            return out

        cee = CeeModel(dec(d["cee"]["A"]), dec(d["cee"]["B"]), d["cee"]["nmse"])
        return cls(dec(d["perfect"]), dec(d["estimated"]), cee, dec(d["error"]))


def path_difference(position, theta, phi):
    """Propagation difference x sin(theta) cos(phi) + y cos(theta) relative to the region origin.

    Broadcasts over leading position dimensions and over angle arrays.
    """
    position = np.asarray(position, dtype=float)
    x, y = position[..., 0], position[..., 1]
    return x * np.sin(theta) * np.cos(phi) + y * np.cos(theta)


def _response(positions, theta, phi):
    positions = np.asarray(positions, dtype=float)
    return np.exp(1j * TWO_PI * path_difference(positions, theta, phi))


def tx_response(tx_positions, theta, phi):
    """Transmit array response, shape (1, N)."""
    return _response(tx_positions, theta, phi)[None, :]


def rx_response(rx_positions, theta, phi):
    """Receive array response, shape (1, M_k)."""
    return _response(rx_positions, theta, phi)[None, :]


def _responses(positions, theta, phi):
    # (L, P): one response row per path
    positions = np.asarray(positions, dtype=float)
    d = (positions[None, :, 0] * (np.sin(theta) * np.cos(phi))[:, None]
         + positions[None, :, 1] * np.cos(theta)[:, None])
    return np.exp(1j * TWO_PI * d)


def synthesize(layout, paths):
    """Perfect channel matrices H_k = sum_l g_l a(d_t)^H f(d_r), each N x M_k."""
    out = []
    for k, rx in enumerate(layout.rx):
        a = _responses(layout.tx, paths.theta_t[k], paths.phi_t[k])
        f = _responses(rx, paths.theta_r[k], paths.phi_r[k])
        out.append(a.conj().T @ (paths.gains[k][:, None] * f))
    return out


def sample_paths(rng, config):
    """Random paths: angles iid uniform on [angle_low, angle_high], LoS gain CN(0, los_var), NLoS CN(0, nlos_var)."""
    lo, hi = config.angle_low, config.angle_high
    cols = {name: [] for name in ("theta_t", "phi_t", "theta_r", "phi_r", "gains")}
    for L in config.L:
        ang = rng.uniform(lo, hi, size=(4, L))
        for name, row in zip(("theta_t", "phi_t", "theta_r", "phi_r"), ang):
            cols[name].append(row)
        var = np.full(L, config.nlos_var)
        var[0] = config.los_var
        cols["gains"].append(np.sqrt(var) * sample_cn(rng, L))
    return PathSet(**cols)


def sample_cee(rng, cee, k, dims, size=None):
    """Draw Delta H_k = B_k^{1/2} G (A_k^{1/2})^T with G iid CN(0, 1).

    ``dims`` is (N, M_k); ``size`` adds a leading batch dimension.
    """
    N, M = dims
    if cee.is_zero:
        shape = (N, M) if size is None else (size, N, M)
        return np.zeros(shape, dtype=complex)
    G = sample_cn(rng, N, M, size=size)
    return cee.sqrt_B[k] @ G @ cee.sqrt_A[k].T


def realize_channel(rng, layout, paths, cee):
    perfect = synthesize(layout, paths)
    error = [sample_cee(rng, cee, k, H.shape) for k, H in enumerate(perfect)]
    estimated = [H - dH for H, dH in zip(perfect, error)]
    # store the difference actually realised so H - Hhat == error bit-for-bit
    error = [H - Hh for H, Hh in zip(perfect, estimated)]
    return ChannelRealization(perfect, estimated, cee, error)
