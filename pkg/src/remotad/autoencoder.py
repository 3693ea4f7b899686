"""Fully-connected autoencoder anomaly detector.

A small MLP (ReLU hidden layers, linear output) trained on nominal
received samples to minimize the squared reconstruction error; the same
error serves as the anomaly score.  Forward, backward and the optimizers
are plain numpy so gradients are explicit and checkable against finite
differences.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from remotad.errors import (
    DimensionError,
    DomainError,
    TrainingDivergedError,
)
from remotad.numerics import RngStream

__all__ = [
    "MlpSpec",
    "TrainConfig",
    "Autoencoder",
    "load_features",
    "save_checkpoint",
    "load_checkpoint",
]

DEFAULT_LAYER_SIZES = (320, 64, 64, 8, 64, 64, 320)

_CHECKPOINT_MAGIC = b"RMAE"


@dataclass(frozen=True)
class MlpSpec:
    """Layer widths, input first and output last; ReLU everywhere but the
    final (linear) layer."""

    layer_sizes: tuple[int, ...] = DEFAULT_LAYER_SIZES

    def __post_init__(self):
        sizes = tuple(int(s) for s in self.layer_sizes)
        object.__setattr__(self, "layer_sizes", sizes)
        if len(sizes) < 2 or any(s < 1 for s in sizes):
            raise DomainError(f"invalid layer sizes {sizes}")
        if sizes[0] != sizes[-1]:
            raise DomainError("input and output widths must match")
        hidden = sizes[1:-1]
        if hidden and min(hidden) >= sizes[0]:
            raise DomainError("bottleneck must be narrower than the input")

    @property
    def input_dim(self) -> int:
        return self.layer_sizes[0]


@dataclass(frozen=True)
class TrainConfig:
    """Training hyperparameters (mini-batch gradient descent)."""

    epochs: int = 100
    batch_size: int = 256
    learning_rate: float = 1e-3
    seed: int = 0
    optimizer: str = "adam"

    def __post_init__(self):
        if self.epochs < 1 or self.batch_size < 1 or self.learning_rate <= 0:
            raise DomainError("epochs, batch_size and learning_rate must be positive")
        if self.optimizer not in ("adam", "sgd"):
            raise DomainError(f"unknown optimizer {self.optimizer!r}")


class Autoencoder:
    """MLP autoencoder with explicit numpy forward/backward passes."""

    def __init__(self, spec: MlpSpec, seed: int = 0):
        self.spec = spec
        self.seed = seed
        gen = RngStream(seed).generator()
        self.weights: list[np.ndarray] = []
        self.biases: list[np.ndarray] = []
        for fan_in, fan_out in zip(spec.layer_sizes[:-1], spec.layer_sizes[1:]):
            bound = 1.0 / np.sqrt(fan_in)
            self.weights.append(gen.uniform(-bound, bound, size=(fan_out, fan_in)))
            self.biases.append(gen.uniform(-bound, bound, size=fan_out))

    @property
    def n_layers(self) -> int:
        return len(self.weights)

    def _forward_full(self, x: np.ndarray) -> list[np.ndarray]:
        """Activations of every layer (input included), batched over rows."""
        acts = [x]
        a = x
        last = self.n_layers - 1
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            z = a @ w.T + b
            a = z if i == last else np.maximum(z, 0.0)
            acts.append(a)
        return acts

    def forward(self, x: np.ndarray) -> np.ndarray:
        """Reconstruction of x; accepts a single vector or a batch of rows."""
        x = np.asarray(x, dtype=float)
        if x.shape[-1] != self.spec.input_dim:
            raise DimensionError(
                f"expected input width {self.spec.input_dim}, got {x.shape[-1]}"
            )
        single = x.ndim == 1
        out = self._forward_full(np.atleast_2d(x))[-1]
        return out[0] if single else out

    def loss(self, x: np.ndarray) -> np.ndarray | float:
        """Squared reconstruction error per sample."""
        x = np.asarray(x, dtype=float)
        single = x.ndim == 1
        xb = np.atleast_2d(x)
        err = self._forward_full(xb)[-1] - xb
        out = np.sum(err * err, axis=1)
        return float(out[0]) if single else out

    def score(self, x: np.ndarray) -> np.ndarray | float:
        """Anomaly score; identical to the reconstruction loss."""
        return self.loss(x)

    def gradients(self, x: np.ndarray) -> tuple[list[np.ndarray], list[np.ndarray], float]:
        """Gradients of the mean per-sample loss over the batch.

        Returns (weight grads, bias grads, mean loss).
        """
        xb = np.atleast_2d(np.asarray(x, dtype=float))
        m = xb.shape[0]
        acts = self._forward_full(xb)
        err = acts[-1] - xb
        mean_loss = float(np.sum(err * err) / m)
        delta = 2.0 * err / m
        grads_w: list[np.ndarray] = [np.empty(0)] * self.n_layers
        grads_b: list[np.ndarray] = [np.empty(0)] * self.n_layers
        for i in range(self.n_layers - 1, -1, -1):
            grads_w[i] = delta.T @ acts[i]
            grads_b[i] = delta.sum(axis=0)
            if i > 0:
                delta = (delta @ self.weights[i]) * (acts[i] > 0)
        return grads_w, grads_b, mean_loss

    def parameters(self) -> np.ndarray:
        """All parameters flattened in layer order (W then b per layer)."""
        return np.concatenate(
            [np.concatenate((w.ravel(), b)) for w, b in zip(self.weights, self.biases)]
        )

    def set_parameters(self, flat: np.ndarray) -> None:
        flat = np.asarray(flat, dtype=float)
        pos = 0
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            self.weights[i] = flat[pos:pos + w.size].reshape(w.shape).copy()
            pos += w.size
            self.biases[i] = flat[pos:pos + b.size].copy()
            pos += b.size
        if pos != flat.size:
            raise DimensionError(f"parameter vector has {flat.size} entries, expected {pos}")

    def train(self, data: np.ndarray, cfg: TrainConfig) -> list[float]:
        """Mini-batch training on nominal samples; returns per-epoch mean loss.

        Deterministic for a fixed config seed.  Raises
        TrainingDivergedError if the loss turns non-finite.
        """
        data = np.asarray(data, dtype=float)
        if data.ndim != 2 or data.shape[1] != self.spec.input_dim:
            raise DimensionError(
                f"training data must be (m, {self.spec.input_dim}), got {data.shape}"
            )
        if data.shape[0] < cfg.batch_size:
            raise DomainError(
                f"need at least batch_size={cfg.batch_size} samples, got {data.shape[0]}"
            )
        gen = RngStream(cfg.seed, (0xAE,)).generator()
        opt = _AdamState(self) if cfg.optimizer == "adam" else None
        history: list[float] = []
        m = data.shape[0]
        for epoch in range(cfg.epochs):
            order = gen.permutation(m)
            epoch_losses = []
            for start in range(0, m - cfg.batch_size + 1, cfg.batch_size):
                batch = data[order[start:start + cfg.batch_size]]
                gw, gb, batch_loss = self.gradients(batch)
                if not np.isfinite(batch_loss):
                    raise TrainingDivergedError(
                        f"non-finite loss at epoch {epoch}, batch offset {start}; "
                        "reduce the learning rate or rescale the inputs"
                    )
                if opt is None:
                    for i in range(self.n_layers):
                        self.weights[i] -= cfg.learning_rate * gw[i]
                        self.biases[i] -= cfg.learning_rate * gb[i]
                else:
                    opt.step(self, gw, gb, cfg.learning_rate)
                epoch_losses.append(batch_loss)
            history.append(float(np.mean(epoch_losses)))
        return history


class _AdamState:
    """Adaptive-moment optimizer state (beta1=0.9, beta2=0.999)."""

    def __init__(self, model: Autoencoder, beta1: float = 0.9, beta2: float = 0.999,
                 eps: float = 1e-8):
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.t = 0
        self.mw = [np.zeros_like(w) for w in model.weights]
        self.vw = [np.zeros_like(w) for w in model.weights]
        self.mb = [np.zeros_like(b) for b in model.biases]
        self.vb = [np.zeros_like(b) for b in model.biases]

    def step(self, model: Autoencoder, gw, gb, lr: float) -> None:
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        corr1 = 1.0 - b1**self.t
        corr2 = 1.0 - b2**self.t
        for i in range(model.n_layers):
            self.mw[i] = b1 * self.mw[i] + (1 - b1) * gw[i]
            self.vw[i] = b2 * self.vw[i] + (1 - b2) * gw[i] ** 2
            self.mb[i] = b1 * self.mb[i] + (1 - b1) * gb[i]
            self.vb[i] = b2 * self.vb[i] + (1 - b2) * gb[i] ** 2
            model.weights[i] -= lr * (self.mw[i] / corr1) / (np.sqrt(self.vw[i] / corr2) + self.eps)
            model.biases[i] -= lr * (self.mb[i] / corr1) / (np.sqrt(self.vb[i] / corr2) + self.eps)


def load_features(path: str | Path, expected_width: int) -> np.ndarray:
    """Load feature vectors from a delimited text file, one vector per row."""
    arr = np.loadtxt(path, dtype=float, ndmin=2)
    if arr.shape[1] != expected_width:
        raise DimensionError(
            f"feature file {path} has width {arr.shape[1]}, expected {expected_width}"
        )
    return arr


def save_checkpoint(model: Autoencoder, path: str | Path) -> None:
    """Write layer sizes, seed and the flat little-endian float64 parameters."""
    header = json.dumps(
        {"layer_sizes": list(model.spec.layer_sizes), "seed": model.seed}
    ).encode()
    flat = model.parameters().astype("<f8")
    with open(path, "wb") as fh:
        fh.write(_CHECKPOINT_MAGIC)
        fh.write(struct.pack("<I", len(header)))
        fh.write(header)
        fh.write(flat.tobytes())


def load_checkpoint(path: str | Path) -> Autoencoder:
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != _CHECKPOINT_MAGIC:
            raise DomainError(f"{path} is not an autoencoder checkpoint")
        (hlen,) = struct.unpack("<I", fh.read(4))
        header = json.loads(fh.read(hlen).decode())
        flat = np.frombuffer(fh.read(), dtype="<f8")
    model = Autoencoder(MlpSpec(tuple(header["layer_sizes"])), seed=int(header["seed"]))
    model.set_parameters(flat)
    return model
