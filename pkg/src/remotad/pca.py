"""PCA subspace anomaly detector and its closed-form error probabilities.

The detector projects a received sample onto the orthogonal complement of
the top-K principal subspace and thresholds the squared residual norm.
For uncoded (additive Gaussian) channels the residual norm is a Gaussian
quadratic form, so false/true positive probabilities follow from a
three-moment power-transform normal approximation.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from remotad.errors import (
    ContractViolation,
    DegenerateParameterError,
    DimensionError,
    DomainError,
)
from remotad.numerics import eig_sym, std_normal_cdf
from remotad.source import SourceSpec
from remotad.transmission import ChannelParams

__all__ = [
    "PcaDetector",
    "QuadFormParams",
    "fit",
    "fit_from_samples",
    "residual_norm_sq",
    "residual_lambdas",
    "noncentrality",
    "approx_tail_prob",
    "fp_prob",
    "tp_prob",
]


@dataclass(frozen=True)
class PcaDetector:
    """Residual-projector detector from a covariance eigendecomposition.

    Attributes:
        k: principal subspace size.
        v_hat: (n, k) top-K eigenvectors.
        eigenvalues: all n fitted eigenvalues, descending.
    """

    k: int
    v_hat: np.ndarray
    eigenvalues: np.ndarray

    @property
    def n(self) -> int:
        return self.v_hat.shape[0]

    def residual_projector(self) -> np.ndarray:
        """Dense projector I - V V^T onto the residual subspace."""
        return np.eye(self.n) - self.v_hat @ self.v_hat.T

    def to_sidecar(self) -> dict:
        """Reproducibility export: eigenvalues and principal directions."""
        return {
            "k": self.k,
            "eigenvalues": self.eigenvalues.tolist(),
            "v_hat": self.v_hat.tolist(),
        }


def fit(cov: np.ndarray, k: int) -> PcaDetector:
    """Fit the detector from a covariance matrix.

    Takes the K eigenvectors with the largest eigenvalues; eigenvector
    signs are fixed (first non-negligible component positive) so the fit
    is deterministic.  A tied eigenvalue at the K/K+1 cut is resolved by
    index order and reported as a warning.
    """
    cov = np.asarray(cov, dtype=float)
    n = cov.shape[0]
    if not 1 <= k < n:
        raise DomainError(f"need 1 <= k < n, got k={k}, n={n}")
    w, v = eig_sym(cov)
    if np.any(w < -1e-8 * max(w[0], 1.0)):
        raise ContractViolation("covariance must be positive semi-definite")
    if np.isclose(w[k - 1], w[k], rtol=1e-9, atol=1e-12):
        warnings.warn(
            f"eigenvalues {k} and {k + 1} are tied ({w[k - 1]:.6g}); "
            "subspace cut resolved by index order",
            stacklevel=2,
        )
    return PcaDetector(k=k, v_hat=v[:, :k], eigenvalues=w)


def fit_from_samples(x: np.ndarray, k: int) -> PcaDetector:
    """Fit from received samples (rows) via their second-moment matrix."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 2:
        raise DimensionError(f"expected (m, n) samples, got shape {x.shape}")
    cov = x.T @ x / x.shape[0]
    return fit(0.5 * (cov + cov.T), k)


def residual_norm_sq(det: PcaDetector, x_prime: np.ndarray) -> np.ndarray | float:
    """Squared norm of the residual component of x' (batched over rows)."""
    x = np.asarray(x_prime, dtype=float)
    if x.shape[-1] != det.n:
        raise DimensionError(f"expected trailing dimension {det.n}, got {x.shape}")
    proj = x @ det.v_hat
    out = np.maximum(np.sum(x * x, axis=-1) - np.sum(proj * proj, axis=-1), 0.0)
    return float(out) if np.isscalar(out) or out.ndim == 0 else out


@dataclass(frozen=True)
class QuadFormParams:
    """Eigenvalues and non-centralities of the residual quadratic form."""

    lambdas: np.ndarray
    noncentrality: np.ndarray | None = None

    def __post_init__(self):
        lam = np.asarray(self.lambdas, dtype=float)
        object.__setattr__(self, "lambdas", lam)
        if lam.size == 0:
            raise DomainError("need at least one residual eigenvalue")
        if np.any(lam <= 0) or not np.all(np.isfinite(lam)):
            raise DomainError("residual eigenvalues must be positive and finite")
        t = self.noncentrality
        if t is None:
            t = np.zeros_like(lam)
        else:
            t = np.asarray(t, dtype=float)
            if t.shape != lam.shape:
                raise DimensionError("noncentrality must match lambdas in shape")
        object.__setattr__(self, "noncentrality", t)

    def moments(self) -> tuple[float, float, float]:
        """Cumulant-style moments theta_1, theta_2, theta_3."""
        lam, t2 = self.lambdas, self.noncentrality**2
        return tuple(float(np.sum(lam**j * (1.0 + j * t2))) for j in (1, 2, 3))

    def mean(self) -> float:
        """Expected value sum lambda_i (1 + t_i^2) of the quadratic form."""
        return self.moments()[0]


def residual_lambdas(
    spec: SourceSpec, params: ChannelParams, eta: float, k: int
) -> QuadFormParams:
    """Residual-space eigenvalues eta * sigma_i + (n/d)/snr for i > k."""
    if not 0.0 <= eta <= 1.0:
        raise DomainError(f"eta must lie in [0, 1], got {eta}")
    if not 0 <= k < spec.n:
        raise DomainError(f"need 0 <= k < n, got k={k}")
    lam = eta * spec.eigenvalues[k:] + params.noise_var_per_entry
    return QuadFormParams(lambdas=lam)


def noncentrality(
    v: np.ndarray, cov_prime: np.ndarray, f_residual: np.ndarray, k: int
) -> np.ndarray:
    """Whitened projected fault coordinates t_i for i > k.

    Computes t = V^T cov'^(-1/2) f_residual and returns the residual
    coordinates.  cov' must be positive definite.
    """
    w, u = eig_sym(np.asarray(cov_prime, dtype=float))
    if np.any(w <= 0):
        raise DomainError("cov_prime must be positive definite")
    inv_sqrt = (u / np.sqrt(w)) @ u.T
    t = np.asarray(v, dtype=float).T @ (inv_sqrt @ np.asarray(f_residual, dtype=float))
    return t[k:]


def approx_tail_prob(qf: QuadFormParams, delta: float | np.ndarray) -> float | np.ndarray:
    """Pr(quadratic form > delta^2) by the power-transform normal approximation.

    With moments theta_j = sum lambda_i^j (1 + j t_i^2) and exponent
    h0 = 1 - 2 theta1 theta3 / (3 theta2^2), the transformed threshold

        c(y) = theta1 ((y/theta1)^h0 - 1 - theta2 h0 (h0-1) / theta1^2)
               / sqrt(2 theta2 h0^2)

    is approximately standard normal, so the tail is 1 - Phi(c(delta^2)).
    """
    delta_arr = np.asarray(delta, dtype=float)
    if np.any(delta_arr < 0):
        raise DomainError("delta must be >= 0")
    th1, th2, th3 = qf.moments()
    if th1 <= 0 or th2 <= 0:
        raise DegenerateParameterError("first two moments must be positive")
    h0 = 1.0 - 2.0 * th1 * th3 / (3.0 * th2**2)
    if h0 <= 1e-12:
        raise DegenerateParameterError(
            f"power-transform exponent h0={h0:.3g} is not positive; "
            "the normal approximation does not apply to this spectrum"
        )
    y = delta_arr**2
    c = th1 * ((y / th1) ** h0 - 1.0 - th2 * h0 * (h0 - 1.0) / th1**2) / np.sqrt(
        2.0 * th2 * h0**2
    )
    out = 1.0 - std_normal_cdf(c)
    return float(out) if out.ndim == 0 else out


def fp_prob(
    spec: SourceSpec, params: ChannelParams, k: int, delta: float | np.ndarray
) -> float | np.ndarray:
    """False positive probability Pr(residual norm > delta) for nominal input."""
    return approx_tail_prob(residual_lambdas(spec, params, 1.0, k), delta)


def tp_prob(
    spec: SourceSpec,
    params: ChannelParams,
    k: int,
    fault_vec: np.ndarray,
    delta: float | np.ndarray,
) -> float | np.ndarray:
    """True positive probability given a fault vector (uncoded channel).

    Valid when the detector subspace comes from the source covariance (the
    shifted covariance eta Sigma + (n/d)/snr I shares its eigenvectors),
    so the whitening reduces to per-eigenvalue scaling of the fault's
    eigenbasis coordinates.
    """
    f = np.asarray(fault_vec, dtype=float)
    if f.shape != (spec.n,):
        raise DimensionError(f"fault vector must have shape ({spec.n},)")
    sq = float(f @ f)
    if sq > spec.n:
        raise DomainError(f"fault squared norm {sq:.6g} exceeds n={spec.n}")
    eta = 1.0 - sq / spec.n
    qf = residual_lambdas(spec, params, eta, k)
    f_eig = spec.to_eigen_coords(f)
    t = f_eig[k:] / np.sqrt(qf.lambdas)
    return approx_tail_prob(QuadFormParams(lambdas=qf.lambdas, noncentrality=t), delta)
