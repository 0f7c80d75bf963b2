"""Brute-force and closed-form references, independent of the learner.

The search layer here never touches ``env`` or ``maddpg``; only the shared
rate functionals are reused.
"""

import itertools
from dataclasses import dataclass

import numpy as np

from . import channel, geometry, rates
from .geometry import AntennaLayout

MAX_COMBINATIONS = 1_000_000


class GridTooLarge(ValueError):
    pass


@dataclass
class GridResult:
    layout: AntennaLayout
    sum_rate: float
    rates: np.ndarray  # sum-rates of every feasible candidate, enumeration order
    count: int  # feasible candidates evaluated

    def __iter__(self):
        yield self.layout
        yield self.sum_rate


def grid_points(side, resolution):
    if resolution < 2:
        raise ValueError("grid resolution must be >= 2")
    ax = np.linspace(0.0, side, int(resolution))
    return np.array([(x, y) for x in ax for y in ax])


def refine(resolution):
    """Nested refinement: twice the intervals, so every old point survives."""
    return 2 * int(resolution) - 1


def movable_arrays(config):
    n_rx = len(config.M)
    if config.scheme == "FPA":
        return []
    if config.scheme == "RMA":
        return list(range(1, n_rx + 1))
    return list(range(n_rx + 1))


def grid_search_positions(paths, cee, config, grid, beamformer, base_layout=None, movable=None):
    """Exhaustive search over grid layouts of the movable antennas.

    ``grid`` is a points-per-axis resolution shared by all movable antennas, or a
    sequence with one resolution per movable array. Each candidate is scored as
    the closed-form robust sum-rate with Hhat taken as the noiseless channel at
    that layout and ``W = beamformer(Hhat, P)``. The first maximiser in
    lexicographic enumeration order wins ties. ``movable`` overrides which
    arrays (indices into ``layout.arrays()``) are searched; the rest stay at
    ``base_layout``.
    """
    base = base_layout or geometry.init_layout(None, config, "fpa-grid")
    movable = movable_arrays(config) if movable is None else list(movable)
    arrays = base.arrays()
    if np.isscalar(grid):
        grid = [grid] * len(movable)
    per_antenna = []
    for arr_idx, res in zip(movable, grid):
        pts = grid_points(config.region, res)
        per_antenna.extend([(arr_idx, m, pts) for m in range(len(arrays[arr_idx]))])
    total = 1
    for _, _, pts in per_antenna:
        total *= len(pts)
    if total > MAX_COMBINATIONS:
        raise GridTooLarge(f"GridTooLarge: {total} combinations exceed {MAX_COMBINATIONS}")

    region = geometry.Region(config.region)
    best, best_rate, values = None, -np.inf, []
    for combo in itertools.product(*[range(len(p)) for _, _, p in per_antenna]):
        layout = base.copy()
        arrs = layout.arrays()
        for (arr_idx, m, pts), c in zip(per_antenna, combo):
            arrs[arr_idx][m] = pts[c]
        if not geometry.measure_feasibility(layout, region).feasible:
            continue
        H = channel.synthesize(layout, paths)
        W = beamformer(H, config.power)
        r = rates.ub_rate(H, W, cee, config.sigma2).sum_rate
        values.append(r)
        if r > best_rate:
            best, best_rate = layout, r
    return GridResult(best, float(best_rate), np.array(values), len(values))


def principal_direction(H, tol=1e-10, max_iter=10_000):
    """Unit principal left singular vector of H via power iteration on H H^H."""
    G = H @ H.conj().T
    n = G.shape[0]
    if not np.any(np.abs(G) > 0):
        return np.zeros(n, dtype=complex)
    # start from the strongest column so the iterate is never orthogonal to the answer
    u = G[:, np.argmax(np.sum(np.abs(G) ** 2, axis=0))].astype(complex)
    u /= np.linalg.norm(u)
    for _ in range(max_iter):
        nxt = G @ u
        nrm = np.linalg.norm(nxt)
        if nrm == 0.0:
            return np.zeros(n, dtype=complex)
        nxt /= nrm
        # fix the global phase before comparing iterates
        ph = np.vdot(u, nxt)
        if abs(ph) > 0:
            nxt *= np.conj(ph) / abs(ph)
        if np.linalg.norm(nxt - u) < tol:
            return nxt
        u = nxt
    return u


def mrt_beamformer(H_hat, P):
    """Single-receiver matched beam: sqrt(P) times the principal direction of Hhat_1."""
    if len(H_hat) != 1:
        raise ValueError("mrt_beamformer needs exactly one receiver")
    return (np.sqrt(P) * principal_direction(np.asarray(H_hat[0])))[:, None]


def zero_forcing_beamformer(H_hat, P, rcond=1e-10):
    """Right pseudo-inverse of the stacked rows h_k^H, one unit-norm column per receiver at power P/K."""
    if any(np.asarray(H).shape[1] != 1 for H in H_hat):
        raise ValueError("zero forcing reference needs M_k = 1 for every receiver")
    G = np.vstack([np.asarray(H).conj().T for H in H_hat])  # K x N
    K, N = G.shape
    if K > N:
        raise ValueError("zero forcing needs K <= N")
    s = np.linalg.svd(G, compute_uv=False)
    if s[-1] <= rcond * max(s[0], 1e-300):
        raise np.linalg.LinAlgError("stacked channel is rank deficient")
    W = G.conj().T @ np.linalg.inv(G @ G.conj().T)
    W /= np.linalg.norm(W, axis=0, keepdims=True)
    return W * np.sqrt(P / K)
