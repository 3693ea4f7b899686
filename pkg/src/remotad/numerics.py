"""Deterministic numerical primitives: eigendecompositions, orthonormal
matrices, Gaussian sampling and seeded random streams.

Everything here is a thin, contract-checked layer over numpy/scipy so the
rest of the library can rely on a single set of conventions (descending
eigenvalues, fixed eigenvector signs, reproducible streams).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import ndtr

from remotad.errors import ContractViolation, DimensionError, DomainError

__all__ = [
    "RngStream",
    "eig_sym",
    "fix_eigvec_signs",
    "random_orthonormal_columns",
    "std_normal_cdf",
    "gaussian_vec",
]

_SYM_RTOL = 1e-12


@dataclass(frozen=True)
class RngStream:
    """Seeded, splittable random stream.

    A stream is identified by a 64-bit seed plus a tuple of non-negative
    integers (the stream id).  Equal (seed, stream id) pairs reproduce
    bit-identical draws; distinct ids give streams that are independent by
    construction (numpy SeedSequence spawn keys over the Philox counter
    generator).  Streams are cheap value objects: derive one per unit of
    work instead of sharing a generator across threads.
    """

    seed: int
    stream: tuple[int, ...] = field(default=())

    def child(self, *ids: int) -> "RngStream":
        """Derive a sub-stream by appending ``ids`` to the stream id."""
        return RngStream(self.seed, self.stream + tuple(int(i) for i in ids))

    def generator(self) -> np.random.Generator:
        """Fresh numpy Generator positioned at the start of this stream."""
        ss = np.random.SeedSequence(self.seed, spawn_key=self.stream)
        return np.random.Generator(np.random.Philox(ss))


def _as_generator(rng: "RngStream | np.random.Generator") -> np.random.Generator:
    if isinstance(rng, RngStream):
        return rng.generator()
    return rng


def eig_sym(m: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Eigendecomposition of a symmetric matrix, eigenvalues descending.

    Args:
        m: Symmetric (n, n) array.  Asymmetry beyond 1e-12 relative is a
           contract violation.

    Returns:
        (eigenvalues, eigenvectors): eigenvalues sorted descending,
        eigenvectors as columns in matching order with a fixed sign
        convention (first non-negligible component positive).
    """
    m = np.asarray(m, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise DimensionError(f"expected a square matrix, got shape {m.shape}")
    scale = max(float(np.max(np.abs(m))), 1e-300)
    if float(np.max(np.abs(m - m.T))) > _SYM_RTOL * scale:
        raise ContractViolation("matrix is not symmetric to 1e-12 relative")
    w, v = np.linalg.eigh(m)
    order = np.argsort(w)[::-1]
    return w[order], fix_eigvec_signs(v[:, order])


def fix_eigvec_signs(v: np.ndarray) -> np.ndarray:
    """Flip column signs so the first non-negligible entry is positive."""
    v = np.array(v, copy=True)
    for j in range(v.shape[1]):
        col = v[:, j]
        nz = np.nonzero(np.abs(col) > 1e-12 * max(np.max(np.abs(col)), 1e-300))[0]
        idx = nz[0] if nz.size else 0
        if col[idx] < 0:
            v[:, j] = -col
    return v


def random_orthonormal_columns(
    rows: int, cols: int, rng: RngStream | np.random.Generator
) -> np.ndarray:
    """Random (rows, cols) matrix Q with orthonormal columns, Q^T Q = I.

    Drawn by QR of a Gaussian matrix (rotation-invariant); near-dependent
    draws are rejected and re-drawn.  Requires rows >= cols.
    """
    if rows < cols:
        raise DimensionError(f"rows ({rows}) must be >= cols ({cols})")
    gen = _as_generator(rng)
    for _ in range(100):
        g = gen.standard_normal((rows, cols))
        q, r = np.linalg.qr(g)
        d = np.diag(r)
        if np.min(np.abs(d)) < 1e-10:
            continue
        # fix signs so the factorization (and hence Q) is unique
        q = q * np.sign(d)
        return q
    raise RuntimeError("failed to draw a non-degenerate Gaussian matrix")


def std_normal_cdf(x):
    """Standard normal CDF, accurate in both tails (scipy ndtr)."""
    return ndtr(x)


def gaussian_vec(
    n: int,
    mean: float,
    variance: float,
    rng: RngStream | np.random.Generator,
) -> np.ndarray:
    """i.i.d. Gaussian vector of length n with the given mean and variance."""
    if variance < 0:
        raise DomainError(f"variance must be >= 0, got {variance}")
    gen = _as_generator(rng)
    return mean + np.sqrt(variance) * gen.standard_normal(n)
