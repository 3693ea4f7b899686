"""Nominal and anomalous feature-vector sources.

Nominal samples are zero-mean Gaussian with a prescribed covariance
spectrum normalized so the average per-entry power is one.  Anomalies add
a sphere-uniform fault vector and shrink the nominal part so the total
power stays normalized.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from remotad.errors import DimensionError, DomainError
from remotad.numerics import RngStream, _as_generator, random_orthonormal_columns

__all__ = [
    "SourceSpec",
    "FaultSpec",
    "paper_spectrum",
    "rotate_spec",
    "sample_nominal",
    "sample_fault",
    "sample_anomalous",
]

_TRACE_TOL = 1e-9


@dataclass(frozen=True)
class SourceSpec:
    """Gaussian source with covariance V diag(eigenvalues) V^T.

    Attributes:
        n: feature dimension.
        eigenvalues: covariance eigenvalues, sorted descending, strictly
            positive, summing to n (unit average per-entry power).
        basis: orthonormal eigenvector matrix V, or None for the identity
            (diagonal covariance).
    """

    n: int
    eigenvalues: np.ndarray
    basis: np.ndarray | None = None

    def __post_init__(self):
        eig = np.asarray(self.eigenvalues, dtype=float)
        object.__setattr__(self, "eigenvalues", eig)
        if eig.shape != (self.n,):
            raise DimensionError(f"expected {self.n} eigenvalues, got shape {eig.shape}")
        if np.any(eig <= 0):
            raise DomainError("eigenvalues must be strictly positive")
        if np.any(np.diff(eig) > 0):
            raise DomainError("eigenvalues must be sorted descending")
        if abs(float(np.sum(eig)) - self.n) > _TRACE_TOL * self.n:
            raise DomainError(
                f"eigenvalues must sum to n={self.n} (got {float(np.sum(eig)):.12g})"
            )
        if self.basis is not None:
            b = np.asarray(self.basis, dtype=float)
            object.__setattr__(self, "basis", b)
            if b.shape != (self.n, self.n):
                raise DimensionError("basis must be (n, n)")
            if float(np.max(np.abs(b.T @ b - np.eye(self.n)))) > 1e-10:
                raise DomainError("basis columns must be orthonormal")

    def covariance(self) -> np.ndarray:
        """Dense covariance matrix."""
        if self.basis is None:
            return np.diag(self.eigenvalues)
        return (self.basis * self.eigenvalues) @ self.basis.T

    def entry_variances(self) -> np.ndarray:
        """Diagonal of the covariance in the coordinate basis."""
        if self.basis is None:
            return self.eigenvalues.copy()
        return np.einsum("ij,j,ij->i", self.basis, self.eigenvalues, self.basis)

    def to_eigen_coords(self, x: np.ndarray) -> np.ndarray:
        """Coordinates of x (or rows of x) in the eigenbasis."""
        if self.basis is None:
            return np.asarray(x, dtype=float)
        return np.asarray(x, dtype=float) @ self.basis


@dataclass(frozen=True)
class FaultSpec:
    """Additive fault with a fixed squared norm."""

    squared_norm: float

    def __post_init__(self):
        if self.squared_norm < 0:
            raise DomainError(f"squared_norm must be >= 0, got {self.squared_norm}")


def paper_spectrum(n: int) -> SourceSpec:
    """Source with five dominant eigenvalues in ratios 50:40:30:20:10 and a
    flat tail, scaled so the eigenvalues sum to n.

    The five dominant components carry beta * (50, 40, 30, 20, 10) and the
    remaining n - 5 eigenvalues equal beta, with
    beta = n / (50 + 40 + 30 + 20 + 10 + (n - 5)).
    """
    if n < 6:
        raise DomainError(f"need n >= 6 for the five-component spectrum, got {n}")
    beta = n / (50.0 + 40.0 + 30.0 + 20.0 + 10.0 + (n - 5))
    eig = np.full(n, beta)
    eig[:5] = beta * np.array([50.0, 40.0, 30.0, 20.0, 10.0])
    # absorb float rounding into the tail so the trace is exact
    eig[5:] += (n - eig.sum()) / (n - 5)
    return SourceSpec(n=n, eigenvalues=eig)


def rotate_spec(spec: SourceSpec, rng: RngStream | np.random.Generator) -> SourceSpec:
    """Same spectrum, random orthonormal eigenbasis."""
    q = random_orthonormal_columns(spec.n, spec.n, rng)
    return SourceSpec(n=spec.n, eigenvalues=spec.eigenvalues, basis=q)


def sample_nominal(
    spec: SourceSpec,
    rng: RngStream | np.random.Generator,
    size: int | None = None,
) -> np.ndarray:
    """Draw nominal samples; shape (n,) or (size, n)."""
    gen = _as_generator(rng)
    shape = (spec.n,) if size is None else (size, spec.n)
    g = gen.standard_normal(shape)
    x = g * np.sqrt(spec.eigenvalues)
    if spec.basis is not None:
        x = x @ spec.basis.T
    return x


def sample_fault(
    spec: SourceSpec,
    fault: FaultSpec,
    rng: RngStream | np.random.Generator,
    size: int | None = None,
) -> np.ndarray:
    """Fault vectors drawn uniformly on the sphere of radius sqrt(squared_norm)."""
    gen = _as_generator(rng)
    shape = (spec.n,) if size is None else (size, spec.n)
    g = gen.standard_normal(shape)
    norms = np.linalg.norm(g, axis=-1, keepdims=True)
    if fault.squared_norm == 0.0:
        return np.zeros(shape)
    return g * (np.sqrt(fault.squared_norm) / norms)


def sample_anomalous(
    spec: SourceSpec,
    fault: FaultSpec,
    rng: RngStream | np.random.Generator,
    size: int | None = None,
) -> np.ndarray:
    """Draw anomalous samples sqrt(eta) * x0 + f with eta = 1 - |f|^2 / n.

    The shrinkage keeps the expected per-entry power at one; it requires
    squared_norm <= n.
    """
    if fault.squared_norm > spec.n:
        raise DomainError(
            f"fault squared_norm {fault.squared_norm} exceeds n={spec.n} (eta < 0)"
        )
    gen = _as_generator(rng)
    eta = 1.0 - fault.squared_norm / spec.n
    x0 = sample_nominal(spec, gen, size=size)
    f = sample_fault(spec, fault, gen, size=size)
    return np.sqrt(eta) * x0 + f
