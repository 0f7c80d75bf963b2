"""Complex dense helpers and seeded random streams."""

import numpy as np

from .kernels import NotPositiveDefinite, chol_solve

__all__ = [
    "NotPositiveDefinite",
    "hermitian",
    "solve_hermitian_positive",
    "sample_cn",
    "make_rng",
    "substreams",
    "STREAMS",
    "real_quadratic",
]

Rng = np.random.Generator

# Independent sub-streams fanned out from one master seed.
STREAMS = ("channel", "cee", "init", "explore", "replay", "networks", "eval")


def hermitian(M):
    return np.conj(np.asarray(M)).T


def solve_hermitian_positive(M, B):
    """Return ``M^{-1} B`` for Hermitian positive definite ``M`` via Cholesky.

    Raises
    ------
    NotPositiveDefinite
        If a pivot of the factorisation is not strictly positive.
    """
    M = np.asarray(M, dtype=np.complex128)
    B = np.asarray(B, dtype=np.complex128)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError("M must be square")
    vec = B.ndim == 1
    X = chol_solve(M, B[:, None] if vec else B)
    return X[:, 0] if vec else X


def sample_cn(rng, rows, cols=None, size=None):
    """iid CN(0, 1) entries: real and imaginary parts each N(0, 1/2).

    ``size`` prepends batch dimensions.
    """
    shape = (rows,) if cols is None else (rows, cols)
    if size is not None:
        shape = tuple(np.atleast_1d(size)) + shape
    z = rng.standard_normal(shape + (2,))
    return (z[..., 0] + 1j * z[..., 1]) * np.sqrt(0.5)


def make_rng(seed):
    return np.random.Generator(np.random.PCG64(seed))


def substreams(seed, names=STREAMS):
    """One Generator per named purpose, each keyed by (master seed, purpose index)."""
    return {
        name: np.random.Generator(np.random.PCG64(np.random.SeedSequence([int(seed), i])))
        for i, name in enumerate(STREAMS)
        if name in names
    }


def real_quadratic(w, M):
    """``w^H M w`` for Hermitian ``M``, clamped to its real part.

    The imaginary residue must be rounding-level; anything larger means ``M``
    was not Hermitian.
    """
    q = np.vdot(w, M @ w)
    if abs(q.imag) > 1e-9 * max(abs(q.real), 1e-300) and abs(q.imag) > 1e-12:
        raise ValueError("quadratic form has a non-negligible imaginary part")
    return float(q.real)
