"""Coded and uncoded transmission of feature vectors over an AWGN channel.

Coded path: a capacity-rate bit budget is split greedily across vector
entries by expected distortion, each entry gets a Lloyd-Max scalar
quantizer, and the quantized values arrive error-free.  Uncoded path: the
vector is spread to the symbol budget with an orthonormal matrix, sent as
analog symbols, and despread at the receiver; the net effect is additive
Gaussian noise with per-entry variance (n/d) / snr.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.special import ndtr, ndtri

from remotad.errors import DimensionError, DomainError
from remotad.numerics import RngStream, _as_generator, random_orthonormal_columns

__all__ = [
    "ChannelParams",
    "BitAllocation",
    "ScalarQuantizer",
    "CodedScheme",
    "UncodedScheme",
    "capacity_bits",
    "allocate_bits",
    "design_quantizer",
    "coded_transmit",
    "uncoded_transmit",
    "transmit_power_check",
    "scheme_to_json",
    "scheme_from_json",
]

LLOYD_TOL = 1e-9
LLOYD_MAX_ITER = 10_000


@dataclass(frozen=True)
class ChannelParams:
    """AWGN channel description: linear SNR, source dimension n, symbol budget d."""

    snr_linear: float
    n: int
    d: int

    def __post_init__(self):
        if not self.snr_linear > 0:
            raise DomainError(f"snr_linear must be > 0, got {self.snr_linear}")
        if self.d < self.n:
            raise DomainError(f"symbol budget d={self.d} must be >= n={self.n}")

    @classmethod
    def from_db(cls, snr_db: float, n: int, d: int) -> "ChannelParams":
        return cls(snr_linear=float(10.0 ** (snr_db / 10.0)), n=n, d=d)

    @property
    def inv_snr(self) -> float:
        return 0.0 if np.isinf(self.snr_linear) else 1.0 / self.snr_linear

    @property
    def noise_var_per_entry(self) -> float:
        """Effective per-entry noise variance after despreading, (n/d)/snr."""
        return (self.n / self.d) * self.inv_snr


def capacity_bits(params: ChannelParams) -> int:
    """Total bit budget floor(d * 0.5 * log2(1 + snr)) at capacity rate."""
    if np.isinf(params.snr_linear):
        raise DomainError("bit budget is unbounded at infinite SNR")
    rate = 0.5 * np.log2(1.0 + params.snr_linear)
    return int(np.floor(params.d * rate))


@dataclass(frozen=True)
class BitAllocation:
    """Per-entry bit counts summing to the total budget."""

    bits: np.ndarray
    total: int

    def __post_init__(self):
        b = np.asarray(self.bits, dtype=int)
        object.__setattr__(self, "bits", b)
        if np.any(b < 0):
            raise DomainError("bit counts must be non-negative")
        if int(b.sum()) != self.total:
            raise DomainError(f"bits sum to {int(b.sum())}, expected {self.total}")


def allocate_bits(variances: np.ndarray, total: int) -> BitAllocation:
    """Greedy bit allocation: repeatedly give one bit to the entry with the
    largest expected distortion variance_i * 2^(-2 b_i), ties to the lowest
    index.
    """
    variances = np.asarray(variances, dtype=float)
    if np.any(variances <= 0):
        raise DomainError("variances must be strictly positive")
    if total < 0:
        raise DomainError("total bit budget must be >= 0")
    bits = np.zeros(variances.shape[0], dtype=int)
    distortion = variances.copy()
    for _ in range(total):
        i = int(np.argmax(distortion))
        bits[i] += 1
        distortion[i] = variances[i] * 4.0 ** (-bits[i])
    return BitAllocation(bits=bits, total=total)


def _gauss_pdf(t: np.ndarray) -> np.ndarray:
    return np.exp(-0.5 * t * t) / np.sqrt(2.0 * np.pi)


@lru_cache(maxsize=None)
def _lloyd_standard(bits: int) -> tuple[tuple[float, ...], float, tuple[float, ...]]:
    """Lloyd-Max design for the standard Gaussian at 2^bits levels.

    Uses exact partial moments of the Gaussian density (no sampling), so
    the fixed point is deterministic.  Returns (points, mse, mse history).
    """
    if bits == 0:
        return (0.0,), 1.0, (1.0,)
    m = 2 ** bits
    pts = ndtri((np.arange(m) + 0.5) / m)
    history: list[float] = []
    prev = np.inf
    for _ in range(LLOYD_MAX_ITER):
        edges = np.concatenate(([-np.inf], 0.5 * (pts[:-1] + pts[1:]), [np.inf]))
        lo, hi = edges[:-1], edges[1:]
        pdf_lo = np.where(np.isfinite(lo), _gauss_pdf(np.where(np.isfinite(lo), lo, 0.0)), 0.0)
        pdf_hi = np.where(np.isfinite(hi), _gauss_pdf(np.where(np.isfinite(hi), hi, 0.0)), 0.0)
        p = ndtr(hi) - ndtr(lo)
        m1 = pdf_lo - pdf_hi
        m2 = p - (np.where(np.isfinite(hi), hi, 0.0) * pdf_hi
                  - np.where(np.isfinite(lo), lo, 0.0) * pdf_lo)
        pts = np.where(p > 0, m1 / np.maximum(p, 1e-300), pts)
        mse = float(np.sum(m2 - 2.0 * pts * m1 + pts * pts * p))
        history.append(mse)
        if abs(prev - mse) < LLOYD_TOL * max(abs(mse), 1e-300):
            break
        prev = mse
    return tuple(pts), history[-1], tuple(history)


@dataclass(frozen=True)
class ScalarQuantizer:
    """Nearest-point scalar quantizer with strictly increasing levels."""

    points: np.ndarray
    bits: int
    design_mse: float
    mse_history: tuple[float, ...] = field(default=(), repr=False)

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        object.__setattr__(self, "points", pts)
        if pts.ndim != 1 or pts.size != 2 ** self.bits:
            raise DimensionError(
                f"expected {2 ** self.bits} points for {self.bits} bits, got {pts.size}"
            )
        if pts.size > 1 and np.any(np.diff(pts) <= 0):
            raise DomainError("quantizer points must be strictly increasing")

    def indices(self, x: np.ndarray) -> np.ndarray:
        """Index of the nearest point for each value."""
        if self.points.size == 1:
            return np.zeros(np.shape(x), dtype=int)
        mids = 0.5 * (self.points[:-1] + self.points[1:])
        return np.searchsorted(mids, x)

    def quantize(self, x: np.ndarray) -> np.ndarray:
        """Nearest reconstruction point for each value."""
        return self.points[self.indices(x)]


def design_quantizer(
    variance: float,
    bits: int,
    samples: np.ndarray | None = None,
) -> ScalarQuantizer:
    """Lloyd(-Max) quantizer for one vector entry.

    Analytic mode (samples is None): optimal quantizer for a zero-mean
    Gaussian of the given variance, computed by scaling the cached
    standard-Gaussian design.  Sample mode: Lloyd iteration (1-D k-means)
    on the provided training values, for sources known only empirically.
    bits == 0 yields the single point at the design mean.
    """
    if bits < 0:
        raise DomainError("bits must be >= 0")
    if samples is None:
        if variance <= 0:
            raise DomainError(f"variance must be > 0, got {variance}")
        pts, mse, hist = _lloyd_standard(bits)
        s = np.sqrt(variance)
        return ScalarQuantizer(
            points=s * np.asarray(pts),
            bits=bits,
            design_mse=variance * mse,
            mse_history=tuple(variance * h for h in hist),
        )
    return _design_from_samples(np.asarray(samples, dtype=float).ravel(), bits)


def _design_from_samples(samples: np.ndarray, bits: int) -> ScalarQuantizer:
    if samples.size == 0:
        raise DomainError("sample-based quantizer design needs a non-empty sample set")
    if bits == 0:
        mean = float(samples.mean())
        mse = float(np.mean((samples - mean) ** 2))
        return ScalarQuantizer(points=np.array([mean]), bits=0,
                               design_mse=mse, mse_history=(mse,))
    m = 2 ** bits
    # quantile init, de-duplicated to keep levels strictly increasing
    pts = np.quantile(samples, (np.arange(m) + 0.5) / m)
    pts = _spread_duplicates(pts, samples)
    sorted_samples = np.sort(samples)
    csum = np.concatenate(([0.0], np.cumsum(sorted_samples)))
    history: list[float] = []
    prev = np.inf
    for _ in range(LLOYD_MAX_ITER):
        mids = 0.5 * (pts[:-1] + pts[1:])
        splits = np.searchsorted(sorted_samples, mids)
        bounds = np.concatenate(([0], splits, [samples.size]))
        counts = np.diff(bounds)
        sums = csum[bounds[1:]] - csum[bounds[:-1]]
        pts = np.where(counts > 0, sums / np.maximum(counts, 1), pts)
        pts = np.sort(pts)
        q = pts[np.searchsorted(0.5 * (pts[:-1] + pts[1:]), sorted_samples)]
        mse = float(np.mean((sorted_samples - q) ** 2))
        history.append(mse)
        if abs(prev - mse) < LLOYD_TOL * max(abs(mse), 1e-300):
            break
        prev = mse
    pts = _spread_duplicates(pts, samples)
    return ScalarQuantizer(points=pts, bits=bits,
                           design_mse=history[-1], mse_history=tuple(history))


def _spread_duplicates(pts: np.ndarray, samples: np.ndarray) -> np.ndarray:
    """Nudge coincident levels apart so the point set stays strictly increasing."""
    pts = np.sort(pts)
    span = max(float(samples.max() - samples.min()), 1.0)
    for i in range(1, pts.size):
        if pts[i] <= pts[i - 1]:
            pts[i] = pts[i - 1] + 1e-12 * span
    return pts


@dataclass(frozen=True)
class CodedScheme:
    """Bank of per-entry quantizers under a shared bit budget.

    If ``basis`` is set, vectors are rotated into that orthonormal basis
    before quantization and rotated back after (quantization basis switch).
    """

    allocation: BitAllocation
    quantizers: tuple[ScalarQuantizer, ...]
    basis: np.ndarray | None = None

    def __post_init__(self):
        if len(self.quantizers) != self.allocation.bits.shape[0]:
            raise DimensionError("one quantizer per entry required")
        for b, q in zip(self.allocation.bits, self.quantizers):
            if q.bits != b:
                raise DomainError("quantizer resolution disagrees with the allocation")

    @property
    def n(self) -> int:
        return len(self.quantizers)

    @classmethod
    def design(
        cls,
        variances: np.ndarray,
        total_bits: int,
        samples: np.ndarray | None = None,
        basis: np.ndarray | None = None,
    ) -> "CodedScheme":
        """Allocate the budget across entries and design each quantizer.

        With ``samples`` (shape (m, n)), both the allocation variances and
        the quantizers come from the training columns; otherwise the
        allocation uses ``variances`` and the quantizers are analytic
        Gaussian designs.
        """
        if samples is not None:
            samples = np.asarray(samples, dtype=float)
            if basis is not None:
                samples = samples @ basis
            variances = samples.var(axis=0)
            variances = np.maximum(variances, 1e-12)
        alloc = allocate_bits(variances, total_bits)
        quants = tuple(
            design_quantizer(
                float(variances[i]),
                int(alloc.bits[i]),
                samples=None if samples is None else samples[:, i],
            )
            for i in range(len(variances))
        )
        return cls(allocation=alloc, quantizers=quants, basis=basis)

    def transmit(self, x: np.ndarray) -> np.ndarray:
        """Quantize each entry to its nearest reconstruction point."""
        x = np.asarray(x, dtype=float)
        if x.shape[-1] != self.n:
            raise DimensionError(f"expected trailing dimension {self.n}, got {x.shape}")
        if self.basis is not None:
            x = x @ self.basis
        out = np.empty_like(x)
        for i, q in enumerate(self.quantizers):
            out[..., i] = q.quantize(x[..., i])
        if self.basis is not None:
            out = out @ self.basis.T
        return out


@dataclass(frozen=True)
class UncodedScheme:
    """Analog transmission through a (d, n) spreading matrix with
    orthonormal columns."""

    q: np.ndarray

    def __post_init__(self):
        q = np.asarray(self.q, dtype=float)
        object.__setattr__(self, "q", q)
        gram_err = float(np.max(np.abs(q.T @ q - np.eye(q.shape[1]))))
        if gram_err > 1e-10:
            raise DomainError(f"spreading matrix is not orthonormal (err {gram_err:.2e})")

    @property
    def n(self) -> int:
        return self.q.shape[1]

    @property
    def d(self) -> int:
        return self.q.shape[0]

    @classmethod
    def draw(cls, params: ChannelParams, rng: RngStream | np.random.Generator) -> "UncodedScheme":
        return cls(q=random_orthonormal_columns(params.d, params.n, rng))

    def encode(self, x: np.ndarray) -> np.ndarray:
        """Spread to d symbols, scaled to unit per-symbol power."""
        scale = np.sqrt(self.d / self.n)
        return scale * (np.asarray(x, dtype=float) @ self.q.T)

    def decode(self, y: np.ndarray) -> np.ndarray:
        scale = np.sqrt(self.n / self.d)
        return scale * (np.asarray(y, dtype=float) @ self.q)

    def transmit(
        self,
        x: np.ndarray,
        params: ChannelParams,
        rng: RngStream | np.random.Generator,
    ) -> np.ndarray:
        """Spread, add channel noise of variance 1/snr per symbol, despread.

        Equivalent in distribution to x + w with w ~ N(0, (n/d)/snr I).
        """
        gen = _as_generator(rng)
        y = self.encode(x)
        if params.inv_snr > 0:
            y = y + np.sqrt(params.inv_snr) * gen.standard_normal(y.shape)
        return self.decode(y)


def coded_transmit(scheme: CodedScheme, x: np.ndarray) -> np.ndarray:
    """Deterministic coded transmission (error-free at capacity)."""
    return scheme.transmit(x)


def uncoded_transmit(
    scheme: UncodedScheme,
    x: np.ndarray,
    params: ChannelParams,
    rng: RngStream | np.random.Generator,
) -> np.ndarray:
    """Uncoded transmission through the spreading matrix plus AWGN."""
    return scheme.transmit(x, params, rng)


def transmit_power_check(scheme, samples: np.ndarray) -> float:
    """Empirical per-symbol power of the encoded signal (diagnostic).

    For the uncoded scheme this is the mean of |encode(x)|^2 / d; for the
    coded scheme, the per-entry power of the quantized reconstruction.
    """
    samples = np.asarray(samples, dtype=float)
    if samples.ndim != 2 or samples.shape[0] < 1000:
        raise DomainError("power check needs at least 1000 samples")
    if isinstance(scheme, UncodedScheme):
        enc = scheme.encode(samples)
        return float(np.mean(np.sum(enc**2, axis=1)) / scheme.d)
    if isinstance(scheme, CodedScheme):
        rec = scheme.transmit(samples)
        return float(np.mean(np.sum(rec**2, axis=1)) / scheme.n)
    raise TypeError(f"unknown scheme type {type(scheme)!r}")


def scheme_to_json(scheme: CodedScheme) -> str:
    """Serialize a coded scheme (allocation + codebooks) for reproducibility."""
    payload = {
        "total_bits": scheme.allocation.total,
        "bits": scheme.allocation.bits.tolist(),
        "codebooks": [q.points.tolist() for q in scheme.quantizers],
        "design_mse": [q.design_mse for q in scheme.quantizers],
        "basis": None if scheme.basis is None else scheme.basis.tolist(),
    }
    return json.dumps(payload)


def scheme_from_json(text: str) -> CodedScheme:
    payload = json.loads(text)
    bits = np.asarray(payload["bits"], dtype=int)
    alloc = BitAllocation(bits=bits, total=int(payload["total_bits"]))
    quants = tuple(
        ScalarQuantizer(points=np.asarray(pts), bits=int(b), design_mse=float(mse))
        for pts, b, mse in zip(payload["codebooks"], bits, payload["design_mse"])
    )
    basis = payload.get("basis")
    return CodedScheme(
        allocation=alloc,
        quantizers=quants,
        basis=None if basis is None else np.asarray(basis, dtype=float),
    )
