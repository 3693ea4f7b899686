"""Experiment configuration: defaults, flat config files, flag merging.

Config files are flat ``key = value`` text (diff-friendly): one key per
line, ``#`` comments, arrays written as comma- or space-separated values
with optional brackets.  Command-line flags override file values; the two
grid-valued flags may instead append by prefixing the value with ``+``.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from remotad.errors import ConfigError

__all__ = ["ExperimentConfig", "parse_config_file", "build_config", "config_hash"]

MODES = ("pca-sweep", "ae-sweep", "quantizer-design", "fp-tp-table")
SCHEMES = ("coded", "uncoded", "both")
BASES = ("identity", "random")
QUANTIZE_BASES = ("coordinate", "eigen")


@dataclass(frozen=True)
class ExperimentConfig:
    """Validated experiment description (defaults reproduce the main sweep)."""

    mode: str = "pca-sweep"
    n: int = 128
    d: int = 128
    k: int = 5
    snr_db_grid: tuple[float, ...] = tuple(float(s) for s in range(-10, 31))
    fault_radii_sq: tuple[float, ...] = (10.0, 50.0, 100.0)
    trials: int = 10_000
    seed: int = 0
    scheme: str = "both"
    basis: str = "random"
    quantize_basis: str = "coordinate"
    detector_train_samples: int = 10_000
    analytic_directions: int = 128
    delta_grid_points: int = 512
    out_dir: str = "runs"
    features: str | None = None
    ae_input_dim: int = 320
    ae_latent_dim: int = 5
    ae_spike_entries: int = 8
    ae_spike_scale: float = 3.0
    ae_train_samples: int = 8192
    ae_test_samples: int = 2048
    ae_epochs: int = 100
    ae_batch_size: int = 256
    ae_learning_rate: float = 1e-3
    ae_optimizer: str = "adam"

    def validate(self) -> "ExperimentConfig":
        """Check every cross-field constraint; raises ConfigError."""
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.scheme not in SCHEMES:
            raise ConfigError(f"scheme must be one of {SCHEMES}, got {self.scheme!r}")
        if self.basis not in BASES:
            raise ConfigError(f"basis must be one of {BASES}, got {self.basis!r}")
        if self.quantize_basis not in QUANTIZE_BASES:
            raise ConfigError(
                f"quantize_basis must be one of {QUANTIZE_BASES}, got {self.quantize_basis!r}"
            )
        if self.n < 6:
            raise ConfigError(f"n must be >= 6 (five-component spectrum), got {self.n}")
        if self.d < self.n:
            raise ConfigError(f"d must be >= n: got d={self.d}, n={self.n}")
        if not 1 <= self.k < self.n:
            raise ConfigError(f"k must satisfy 1 <= k < n: got k={self.k}, n={self.n}")
        if len(self.snr_db_grid) == 0:
            raise ConfigError("snr_db_grid must be non-empty")
        if any(np.isnan(s) for s in self.snr_db_grid):
            raise ConfigError("snr_db_grid entries must not be NaN")
        if any(np.isinf(s) for s in self.snr_db_grid) and self.scheme != "uncoded":
            raise ConfigError(
                "infinite SNR (noiseless override) is only valid with scheme=uncoded; "
                "the coded bit budget is unbounded there"
            )
        if len(self.fault_radii_sq) == 0:
            raise ConfigError("fault_radii_sq must be non-empty")
        for r in self.fault_radii_sq:
            if not 0 <= r <= self.n:
                raise ConfigError(
                    f"fault radius^2 must lie in [0, n]: got {r} with n={self.n}"
                )
        for name in ("trials", "detector_train_samples", "analytic_directions",
                     "delta_grid_points", "ae_input_dim", "ae_latent_dim",
                     "ae_train_samples", "ae_test_samples", "ae_epochs",
                     "ae_batch_size"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1, got {getattr(self, name)}")
        if self.ae_learning_rate <= 0:
            raise ConfigError("ae_learning_rate must be > 0")
        if self.ae_anomaly_radius < 0:
            raise ConfigError("ae_anomaly_radius must be >= 0")
        if self.ae_optimizer not in ("adam", "sgd"):
            raise ConfigError(f"ae_optimizer must be adam or sgd, got {self.ae_optimizer!r}")
        if self.ae_latent_dim >= self.ae_input_dim:
            raise ConfigError("ae_latent_dim must be smaller than ae_input_dim")
        return self

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


_LIST_FIELDS = {"snr_db_grid", "fault_radii_sq"}
_INT_FIELDS = {
    "n", "d", "k", "trials", "seed", "detector_train_samples",
    "analytic_directions", "delta_grid_points", "ae_input_dim",
    "ae_latent_dim", "ae_train_samples", "ae_test_samples", "ae_epochs",
    "ae_batch_size",
}
_FLOAT_FIELDS = {"ae_learning_rate", "ae_anomaly_radius"}
_STR_FIELDS = {
    "mode", "scheme", "basis", "quantize_basis", "out_dir", "features",
    "ae_optimizer",
}
_ALL_FIELDS = _LIST_FIELDS | _INT_FIELDS | _FLOAT_FIELDS | _STR_FIELDS


def parse_value_list(text: str) -> tuple[float, ...]:
    """Parse a comma- or space-separated number list, brackets optional."""
    cleaned = text.strip().strip("[]()").replace(",", " ")
    parts = [p for p in cleaned.split() if p]
    try:
        return tuple(float(p) for p in parts)
    except ValueError as exc:
        raise ConfigError(f"cannot parse number list from {text!r}: {exc}") from None


def _coerce(key: str, raw: str):
    if key in _LIST_FIELDS:
        return parse_value_list(raw)
    if key in _INT_FIELDS:
        try:
            return int(raw)
        except ValueError:
            raise ConfigError(f"{key} expects an integer, got {raw!r}") from None
    if key in _FLOAT_FIELDS:
        try:
            return float(raw)
        except ValueError:
            raise ConfigError(f"{key} expects a number, got {raw!r}") from None
    return raw


def parse_config_file(path: str | Path) -> dict:
    """Read a flat key-value config file into typed values."""
    values: dict = {}
    unknown: list[str] = []
    text = Path(path).read_text()
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {line!r}")
        key, raw = (part.strip() for part in stripped.split("=", 1))
        if key not in _ALL_FIELDS:
            unknown.append(key)
            continue
        values[key] = _coerce(key, raw)
    if unknown:
        raise ConfigError(
            f"unknown config keys in {path}: {', '.join(sorted(unknown))}"
        )
    return values


def build_config(
    file_path: str | Path | None = None,
    overrides: dict | None = None,
) -> ExperimentConfig:
    """Defaults <- config file <- flag overrides, then validate.

    List-valued overrides given as strings starting with ``+`` append to
    the current grid instead of replacing it.
    """
    values: dict = {}
    if file_path is not None:
        values.update(parse_config_file(file_path))
    for key, raw in (overrides or {}).items():
        if raw is None:
            continue
        if key not in _ALL_FIELDS:
            raise ConfigError(f"unknown config key {key!r}")
        if key in _LIST_FIELDS and isinstance(raw, str):
            if raw.lstrip().startswith("+"):
                base = values.get(key, getattr(ExperimentConfig, key))
                values[key] = tuple(base) + parse_value_list(raw.lstrip()[1:])
            else:
                values[key] = parse_value_list(raw)
        elif isinstance(raw, str):
            values[key] = _coerce(key, raw)
        else:
            values[key] = raw
    return ExperimentConfig(**values).validate()


def config_hash(cfg: ExperimentConfig) -> str:
    """Stable short hash of the full configuration."""
    blob = json.dumps(cfg.to_dict(), sort_keys=True, default=str).encode()
    return hashlib.sha256(blob).hexdigest()[:16]
