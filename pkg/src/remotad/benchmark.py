"""Synthetic nonlinear benchmark for the autoencoder detector.

Nominal samples live on a smooth low-dimensional manifold embedded in a
high-dimensional feature space: each coordinate is a fixed random
linear-plus-tanh mixture of a handful of latent Gaussians, scaled by a
decaying per-coordinate profile and normalized to unit average per-entry
power.  Anomalies perturb the latent variables (off the training
distribution but on the same coordinate scale), or, for detectors that
only see linear structure, shift samples inside their own principal
subspace.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from remotad.errors import DomainError
from remotad.numerics import RngStream, _as_generator

__all__ = ["ManifoldBenchmark", "make_benchmark"]


@dataclass(frozen=True)
class ManifoldBenchmark:
    """Frozen random embedding of a latent Gaussian onto a feature manifold."""

    ambient_dim: int
    latent_dim: int
    mix_linear: np.ndarray     # (ambient, latent)
    mix_nonlinear: np.ndarray  # (ambient, latent)
    row_scale: np.ndarray      # (ambient,) decaying coordinate profile
    nonlinearity: float
    power_scale: float         # calibrated so (1/N) E|x|^2 = 1

    def embed(self, u: np.ndarray) -> np.ndarray:
        """Map latent rows u to feature space."""
        u = np.atleast_2d(np.asarray(u, dtype=float))
        lin = u @ self.mix_linear.T
        nonlin = np.tanh(u @ self.mix_nonlinear.T)
        x = self.row_scale * (lin + self.nonlinearity * nonlin)
        return self.power_scale * x

    def sample_latent(self, rng, size: int) -> np.ndarray:
        return _as_generator(rng).standard_normal((size, self.latent_dim))

    def sample_nominal(self, rng, size: int) -> np.ndarray:
        return self.embed(self.sample_latent(rng, size))

    def coordinate_stds(self) -> np.ndarray:
        """Per-coordinate standard deviations of nominal samples (analytic)."""
        lin_var = np.sum(self.mix_linear**2, axis=1)
        # tanh(z) variance for z ~ N(0, s2), tight two-moment fit
        s2 = np.sum(self.mix_nonlinear**2, axis=1)
        tanh_var = s2 / (1.0 + s2)
        var = self.row_scale**2 * (lin_var + self.nonlinearity**2 * tanh_var)
        return self.power_scale * np.sqrt(var)

    def sample_anomalous(
        self, rng, size: int, spike_entries: int = 8, spike_scale: float = 3.0
    ) -> np.ndarray:
        """Nominal samples with sparse coordinate spikes (off the manifold).

        Each anomalous sample gets ``spike_entries`` coordinates, drawn with
        probability proportional to their nominal variance, shifted by
        +/- spike_scale times their own standard deviation.  The spikes
        break the learned manifold structure while staying on the nominal
        per-coordinate scale.
        """
        if spike_entries < 1 or spike_entries > self.ambient_dim:
            raise DomainError("spike_entries must lie in [1, ambient_dim]")
        if spike_scale < 0:
            raise DomainError("spike_scale must be >= 0")
        gen = _as_generator(rng)
        x = self.sample_nominal(gen, size)
        stds = self.coordinate_stds()
        weights = stds**2 / np.sum(stds**2)
        for row in x:
            idx = gen.choice(self.ambient_dim, size=spike_entries,
                             replace=False, p=weights)
            signs = gen.integers(0, 2, size=spike_entries) * 2 - 1
            row[idx] += spike_scale * signs * stds[idx]
        return x

    def sample_subspace_anomalous(
        self, rng, size: int, subspace: np.ndarray, shift_norm: float
    ) -> np.ndarray:
        """Nominal samples shifted inside the given orthonormal subspace.

        The shift leaves any residual w.r.t. that subspace untouched, so a
        linear subspace detector built on it cannot see these anomalies.
        """
        gen = _as_generator(rng)
        x = self.sample_nominal(gen, size)
        k = subspace.shape[1]
        c = gen.standard_normal((size, k))
        c *= shift_norm / np.linalg.norm(c, axis=1, keepdims=True)
        return x + c @ subspace.T


def make_benchmark(
    ambient_dim: int = 320,
    latent_dim: int = 5,
    structure_seed: int = 0,
    nonlinearity: float = 1.0,
    profile_decay: float = 0.985,
) -> ManifoldBenchmark:
    """Build a benchmark with a frozen random structure.

    The per-coordinate scale profile decays geometrically so a minority of
    coordinates carries most of the signal power (coarse bit budgets then
    have informative entries to spend bits on).
    """
    if latent_dim < 1 or ambient_dim <= latent_dim:
        raise DomainError("need ambient_dim > latent_dim >= 1")
    if not 0 < profile_decay <= 1:
        raise DomainError("profile_decay must lie in (0, 1]")
    gen = RngStream(structure_seed, (0xBEAC,)).generator()
    mix_linear = gen.standard_normal((ambient_dim, latent_dim)) / np.sqrt(latent_dim)
    mix_nonlinear = gen.standard_normal((ambient_dim, latent_dim)) / np.sqrt(latent_dim)
    row_scale = profile_decay ** np.arange(ambient_dim)
    bench = ManifoldBenchmark(
        ambient_dim=ambient_dim,
        latent_dim=latent_dim,
        mix_linear=mix_linear,
        mix_nonlinear=mix_nonlinear,
        row_scale=row_scale,
        nonlinearity=nonlinearity,
        power_scale=1.0,
    )
    # calibrate average per-entry power to 1 on a fixed draw
    probe = bench.sample_nominal(RngStream(structure_seed, (0xCA1,)), 4096)
    mean_power = float(np.mean(np.sum(probe**2, axis=1)) / ambient_dim)
    return ManifoldBenchmark(
        ambient_dim=ambient_dim,
        latent_dim=latent_dim,
        mix_linear=mix_linear,
        mix_nonlinear=mix_nonlinear,
        row_scale=row_scale,
        nonlinearity=nonlinearity,
        power_scale=1.0 / np.sqrt(mean_power),
    )
