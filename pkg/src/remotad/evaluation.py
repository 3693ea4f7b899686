"""Accuracy computation, threshold sweeps, and experiment orchestration.

The accuracy of a scored dataset is the best balanced classification rate
over all thresholds (computed exactly from the sorted score multiset).
Sweeps run both transmission schemes over an SNR grid and a set of fault
radii, with every random draw tied to a (seed, purpose, grid-index)
stream so results are reproducible bit for bit.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from remotad import pca
from remotad.autoencoder import Autoencoder, MlpSpec, TrainConfig, load_features
from remotad.benchmark import make_benchmark
from remotad.config import ExperimentConfig
from remotad.errors import (
    ConfigError,
    DomainError,
    TrainingDivergedError,
    UnsupportedAnalyticError,
)
from remotad.numerics import RngStream
from remotad.source import (
    FaultSpec,
    SourceSpec,
    paper_spectrum,
    rotate_spec,
    sample_anomalous,
    sample_fault,
    sample_nominal,
)
from remotad.transmission import (
    ChannelParams,
    CodedScheme,
    UncodedScheme,
    capacity_bits,
)

__all__ = [
    "ScoredDataset",
    "SweepResult",
    "AeSweepResult",
    "best_accuracy",
    "sphere_directions",
    "analytic_accuracy",
    "run_sweep",
    "run_ae_sweep",
    "crossover_snr",
    "write_sweep_tables",
    "write_ae_tables",
]

# stream-id roles: every random draw in a sweep derives from (seed, role, ...)
_R_BASIS, _R_DIRECTIONS, _R_SPREAD, _R_TRAIN, _R_NOM, _R_ANOM, _R_CF = range(7)
_R_AE_DATA, _R_AE_NOISE, _R_AE_STRUCT = 8, 9, 10

_SCHEME_ID = {"uncoded": 0, "coded": 1}


@dataclass(frozen=True)
class ScoredDataset:
    """Detector scores for a balanced evaluation set."""

    nominal_scores: np.ndarray
    anomalous_scores: np.ndarray

    def __post_init__(self):
        nom = np.asarray(self.nominal_scores, dtype=float).ravel()
        anom = np.asarray(self.anomalous_scores, dtype=float).ravel()
        object.__setattr__(self, "nominal_scores", nom)
        object.__setattr__(self, "anomalous_scores", anom)
        if nom.size == 0 or anom.size == 0:
            raise DomainError("both score sets must be non-empty")
        if not (np.all(np.isfinite(nom)) and np.all(np.isfinite(anom))):
            raise DomainError("scores must be finite")


def best_accuracy(ds: ScoredDataset) -> tuple[float, float]:
    """Exact sup-threshold accuracy and its maximizing threshold.

    A sample is declared anomalous when its score exceeds the threshold.
    All distinct threshold positions of the merged score multiset are
    evaluated; ties pick the smallest threshold (midpoints between
    adjacent distinct scores, plus one position below and one at the top).
    """
    nom = np.sort(ds.nominal_scores)
    anom = np.sort(ds.anomalous_scores)
    n_neg, n_pos = nom.size, anom.size
    values = np.unique(np.concatenate((nom, anom)))
    if values.size == 1:
        candidates = np.array([values[0] - 1.0, values[0]])
    else:
        mids = 0.5 * (values[:-1] + values[1:])
        candidates = np.concatenate(([values[0] - 1.0], mids, [values[-1]]))
    tp = n_pos - np.searchsorted(anom, candidates, side="right")
    tn = np.searchsorted(nom, candidates, side="right")
    acc = (tp + tn) / (n_neg + n_pos)
    best = int(np.argmax(acc))
    return float(acc[best]), float(candidates[best])


def sphere_directions(n: int, count: int, rng) -> np.ndarray:
    """(count, n) unit vectors, uniform on the sphere."""
    gen = rng.generator() if isinstance(rng, RngStream) else rng
    u = gen.standard_normal((count, n))
    return u / np.linalg.norm(u, axis=1, keepdims=True)


def _delta_grid(theta1_max: float, points: int) -> np.ndarray:
    return np.linspace(0.0, 3.0 * np.sqrt(theta1_max), points)


def analytic_accuracy(
    spec: SourceSpec,
    params: ChannelParams,
    k: int,
    fault_radius_sq: float,
    directions: np.ndarray | None = None,
    n_directions: int = 128,
    delta_grid: np.ndarray | None = None,
    n_delta: int = 512,
    rng: RngStream | None = None,
) -> tuple[float, float]:
    """Closed-form balanced accuracy for the uncoded scheme.

    The true-positive rate is averaged over sphere-uniform fault
    directions (pass ``directions`` to share them across SNR points); the
    supremum is taken over a threshold grid spanning three residual RMS
    values.
    """
    if fault_radius_sq > spec.n:
        raise DomainError(f"fault radius^2 {fault_radius_sq} exceeds n={spec.n}")
    if directions is None:
        directions = sphere_directions(
            spec.n, n_directions, rng if rng is not None else RngStream(0, (_R_DIRECTIONS,))
        )
    qf_fp = pca.residual_lambdas(spec, params, 1.0, k)
    eta = 1.0 - fault_radius_sq / spec.n
    qf_tp_base = pca.residual_lambdas(spec, params, eta, k)
    radius = np.sqrt(fault_radius_sq)
    theta1_max = qf_fp.mean()
    tps = []
    for u in directions:
        f_eig = spec.to_eigen_coords(radius * u)
        t = f_eig[k:] / np.sqrt(qf_tp_base.lambdas)
        qf = pca.QuadFormParams(lambdas=qf_tp_base.lambdas, noncentrality=t)
        theta1_max = max(theta1_max, qf.mean())
        tps.append(qf)
    if delta_grid is None:
        delta_grid = _delta_grid(theta1_max, n_delta)
    fp = pca.approx_tail_prob(qf_fp, delta_grid)
    tp = np.mean([pca.approx_tail_prob(qf, delta_grid) for qf in tps], axis=0)
    acc = 0.5 * (tp + 1.0 - fp)
    best = int(np.argmax(acc))
    return float(acc[best]), float(delta_grid[best])


@dataclass(frozen=True)
class SweepResult:
    """Accuracies over (SNR grid x fault radii) per transmission scheme."""

    snr_db: np.ndarray
    radii_sq: np.ndarray
    accuracy: dict          # scheme name -> (n_snr, n_radii) array
    analytic: np.ndarray | None
    channel_free: np.ndarray
    channel_free_analytic: np.ndarray


def _build_spec(cfg: ExperimentConfig) -> SourceSpec:
    spec = paper_spectrum(cfg.n)
    if cfg.basis == "random":
        spec = rotate_spec(spec, RngStream(cfg.seed, (_R_BASIS,)))
    return spec


def _design_coded(spec: SourceSpec, cfg: ExperimentConfig, budget: int) -> CodedScheme:
    if cfg.quantize_basis == "eigen" and spec.basis is not None:
        return CodedScheme.design(spec.eigenvalues, budget, basis=spec.basis)
    return CodedScheme.design(spec.entry_variances(), budget)


def _mc_accuracy_point(
    spec: SourceSpec,
    det: pca.PcaDetector,
    transmit,
    nominal_received: np.ndarray,
    radius_sq: float,
    trials: int,
    anom_stream: RngStream,
) -> float:
    """Accuracy from fresh anomalous draws against shared nominal scores."""
    gen = anom_stream.generator()
    xf = sample_anomalous(spec, FaultSpec(radius_sq), gen, size=trials)
    xf_rx = transmit(xf, gen)
    ds = ScoredDataset(
        nominal_scores=pca.residual_norm_sq(det, nominal_received),
        anomalous_scores=pca.residual_norm_sq(det, xf_rx),
    )
    return best_accuracy(ds)[0]


def run_sweep(cfg: ExperimentConfig) -> SweepResult:
    """Monte Carlo (and analytic, for uncoded) accuracy sweep with the PCA
    detector.

    Per grid point and scheme: build the scheme, draw balanced test sets,
    transmit, score with the scheme's detector (analytic covariance for
    uncoded, empirical covariance of received training samples for coded),
    and take the exact sup-threshold accuracy.  Deterministic given the
    config seed.
    """
    cfg.validate()
    spec = _build_spec(cfg)
    snr_db = np.unique(np.asarray(cfg.snr_db_grid, dtype=float))
    radii = np.asarray(cfg.fault_radii_sq, dtype=float)
    schemes = ["uncoded", "coded"] if cfg.scheme == "both" else [cfg.scheme]

    directions = sphere_directions(
        spec.n, cfg.analytic_directions, RngStream(cfg.seed, (_R_DIRECTIONS,))
    )
    accuracy = {s: np.zeros((snr_db.size, radii.size)) for s in schemes}
    analytic = np.zeros((snr_db.size, radii.size)) if "uncoded" in schemes else None

    # channel-free references (identity transmission, detector from the
    # source covariance)
    cf_params = ChannelParams(snr_linear=np.inf, n=cfg.n, d=cfg.d)
    cf_det = pca.fit(spec.covariance(), cfg.k)
    cf_gen = RngStream(cfg.seed, (_R_CF,)).generator()
    cf_nominal = sample_nominal(spec, cf_gen, size=cfg.trials)
    channel_free = np.zeros(radii.size)
    channel_free_analytic = np.zeros(radii.size)
    for ri, r in enumerate(radii):
        channel_free[ri] = _mc_accuracy_point(
            spec, cf_det, lambda x, g: x, cf_nominal, float(r), cfg.trials,
            RngStream(cfg.seed, (_R_CF, 1 + ri)),
        )
        channel_free_analytic[ri] = analytic_accuracy(
            spec, cf_params, cfg.k, float(r), directions=directions,
            n_delta=cfg.delta_grid_points,
        )[0]

    spread = None
    for si, db in enumerate(snr_db):
        params = ChannelParams.from_db(float(db), cfg.n, cfg.d)
        for scheme_name in schemes:
            sid = _SCHEME_ID[scheme_name]
            if scheme_name == "uncoded":
                if spread is None:
                    spread = UncodedScheme.draw(params, RngStream(cfg.seed, (_R_SPREAD,)))
                q = spread

                def transmit(x, gen, _q=q, _p=params):
                    return _q.transmit(x, _p, gen)

                det = pca.fit(
                    spec.covariance() + params.noise_var_per_entry * np.eye(cfg.n),
                    cfg.k,
                )
            else:
                coded = _design_coded(spec, cfg, capacity_bits(params))

                def transmit(x, gen, _c=coded):
                    return _c.transmit(x)

                train_gen = RngStream(cfg.seed, (_R_TRAIN, si)).generator()
                train = sample_nominal(spec, train_gen, size=cfg.detector_train_samples)
                det = pca.fit_from_samples(coded.transmit(train), cfg.k)

            nom_gen = RngStream(cfg.seed, (_R_NOM, si, sid)).generator()
            nominal = sample_nominal(spec, nom_gen, size=cfg.trials)
            nominal_rx = transmit(nominal, nom_gen)
            for ri, r in enumerate(radii):
                accuracy[scheme_name][si, ri] = _mc_accuracy_point(
                    spec, det, transmit, nominal_rx, float(r), cfg.trials,
                    RngStream(cfg.seed, (_R_ANOM, si, sid, ri)),
                )
        if analytic is not None:
            for ri, r in enumerate(radii):
                analytic[si, ri] = analytic_accuracy(
                    spec, params, cfg.k, float(r), directions=directions,
                    n_delta=cfg.delta_grid_points,
                )[0]

    return SweepResult(
        snr_db=snr_db,
        radii_sq=radii,
        accuracy=accuracy,
        analytic=analytic,
        channel_free=channel_free,
        channel_free_analytic=channel_free_analytic,
    )


def crossover_snr(result: SweepResult, radius_sq: float) -> float | None:
    """Smallest grid SNR from which uncoded accuracy stays >= coded.

    Returns None when either scheme is missing or uncoded never takes over
    for the rest of the grid.
    """
    if "uncoded" not in result.accuracy or "coded" not in result.accuracy:
        return None
    ri = int(np.argmin(np.abs(result.radii_sq - radius_sq)))
    if abs(result.radii_sq[ri] - radius_sq) > 1e-9:
        raise DomainError(f"radius^2 {radius_sq} is not in the sweep")
    unc = result.accuracy["uncoded"][:, ri]
    cod = result.accuracy["coded"][:, ri]
    ge = unc >= cod
    for i in range(ge.size):
        if np.all(ge[i:]):
            return float(result.snr_db[i])
    return None


def analytic_accuracy_for_scheme(scheme_name: str, *args, **kwargs):
    """Guarded analytic accuracy: only the uncoded scheme has a closed form."""
    if scheme_name != "uncoded":
        raise UnsupportedAnalyticError(
            f"no closed-form accuracy for scheme {scheme_name!r}; "
            "use the Monte Carlo sweep"
        )
    return analytic_accuracy(*args, **kwargs)


# ---------------------------------------------------------------------------
# autoencoder sweep


@dataclass(frozen=True)
class AeSweepResult:
    """Autoencoder accuracies per scheme over the SNR grid."""

    snr_db: np.ndarray
    accuracy: dict                  # scheme -> (n_snr,) array (nan = diverged)
    channel_free: float
    models: dict                    # (scheme, snr index) -> Autoencoder
    failures: dict                  # (scheme, snr index) -> error message


def _ae_datasets(cfg: ExperimentConfig):
    """Training and balanced test sets in feature space.

    Either the synthetic nonlinear benchmark, or three delimited text
    files ``train.txt``, ``test_nominal.txt``, ``test_anomalous.txt``
    inside the directory given by ``features``.
    """
    if cfg.features is not None:
        root = Path(cfg.features)
        if not root.is_dir():
            raise ConfigError(
                f"features path {root} must be a directory containing "
                "train.txt, test_nominal.txt and test_anomalous.txt"
            )
        train = load_features(root / "train.txt", cfg.ae_input_dim)
        test_nom = load_features(root / "test_nominal.txt", cfg.ae_input_dim)
        test_anom = load_features(root / "test_anomalous.txt", cfg.ae_input_dim)
        return train, test_nom, test_anom
    bench = make_benchmark(
        ambient_dim=cfg.ae_input_dim,
        latent_dim=cfg.ae_latent_dim,
        structure_seed=cfg.seed,
    )
    gen = RngStream(cfg.seed, (_R_AE_DATA,)).generator()
    train = bench.sample_nominal(gen, cfg.ae_train_samples)
    test_nom = bench.sample_nominal(gen, cfg.ae_test_samples)
    test_anom = bench.sample_anomalous(gen, cfg.ae_test_samples, cfg.ae_anomaly_radius)
    return train, test_nom, test_anom


def _ae_spec(cfg: ExperimentConfig) -> MlpSpec:
    hidden = (64, 64, 8, 64, 64)
    return MlpSpec((cfg.ae_input_dim, *hidden, cfg.ae_input_dim))


def _train_and_score(cfg, train, test_nom, test_anom, seed) -> tuple[float, Autoencoder]:
    model = Autoencoder(_ae_spec(cfg), seed=seed)
    tc = TrainConfig(
        epochs=cfg.ae_epochs,
        batch_size=min(cfg.ae_batch_size, train.shape[0]),
        learning_rate=cfg.ae_learning_rate,
        seed=seed,
        optimizer=cfg.ae_optimizer,
    )
    model.train(train, tc)
    ds = ScoredDataset(
        nominal_scores=model.score(test_nom),
        anomalous_scores=model.score(test_anom),
    )
    return best_accuracy(ds)[0], model


def run_ae_sweep(cfg: ExperimentConfig) -> AeSweepResult:
    """Train one autoencoder per (scheme, SNR) on transmitted nominal data
    and measure sup-threshold accuracy on a balanced transmitted test set.

    Training failures at one grid point are recorded without aborting the
    other points.
    """
    cfg.validate()
    train, test_nom, test_anom = _ae_datasets(cfg)
    n = cfg.ae_input_dim
    snr_db = np.unique(np.asarray(cfg.snr_db_grid, dtype=float))
    schemes = ["uncoded", "coded"] if cfg.scheme == "both" else [cfg.scheme]
    accuracy = {s: np.full(snr_db.size, np.nan) for s in schemes}
    models: dict = {}
    failures: dict = {}

    cf_acc, _ = _train_and_score(cfg, train, test_nom, test_anom, seed=cfg.seed)

    spread = None
    for si, db in enumerate(snr_db):
        params = ChannelParams.from_db(float(db), n, n)
        for scheme_name in schemes:
            sid = _SCHEME_ID[scheme_name]
            noise = RngStream(cfg.seed, (_R_AE_NOISE, si, sid))
            if scheme_name == "uncoded":
                if spread is None:
                    spread = UncodedScheme.draw(
                        ChannelParams(snr_linear=1.0, n=n, d=n),
                        RngStream(cfg.seed, (_R_SPREAD, 0xAE)),
                    )
                gen = noise.generator()
                tr = spread.transmit(train, params, gen)
                te_n = spread.transmit(test_nom, params, gen)
                te_a = spread.transmit(test_anom, params, gen)
            else:
                budget = capacity_bits(params)
                coded = CodedScheme.design(
                    np.ones(n), budget, samples=train
                )
                tr = coded.transmit(train)
                te_n = coded.transmit(test_nom)
                te_a = coded.transmit(test_anom)
            try:
                acc, model = _train_and_score(
                    cfg, tr, te_n, te_a, seed=cfg.seed + 1000 * si + sid
                )
            except TrainingDivergedError as exc:
                failures[(scheme_name, si)] = str(exc)
                continue
            accuracy[scheme_name][si] = acc
            models[(scheme_name, si)] = model

    return AeSweepResult(
        snr_db=snr_db,
        accuracy=accuracy,
        channel_free=cf_acc,
        models=models,
        failures=failures,
    )


# ---------------------------------------------------------------------------
# plot-data output


def _write_table(path: Path, header: str, columns: list[np.ndarray]) -> None:
    data = np.column_stack(columns)
    np.savetxt(path, data, fmt="%.6f", header=header)


def write_sweep_tables(result: SweepResult, out_dir: str | Path, prefix: str = "pca") -> list[Path]:
    """Whitespace-delimited tables: column 0 is SNR in dB, then one
    accuracy column per fault radius (ascending as configured)."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    radii_hdr = "snr_db " + " ".join(f"radius_sq={r:g}" for r in result.radii_sq)
    written: list[Path] = []

    def emit(name: str, table: np.ndarray) -> None:
        path = out / name
        _write_table(path, radii_hdr, [result.snr_db] + [table[:, ri] for ri in range(result.radii_sq.size)])
        written.append(path)

    if "uncoded" in result.accuracy:
        emit(f"{prefix}_uncoded_numeric.dat", result.accuracy["uncoded"])
    if result.analytic is not None:
        emit(f"{prefix}_uncoded_analytic.dat", result.analytic)
    if "coded" in result.accuracy:
        emit(f"{prefix}_coded_numeric.dat", result.accuracy["coded"])
    cf = np.tile(result.channel_free, (result.snr_db.size, 1))
    emit(f"{prefix}_channel_free.dat", cf)
    return written


def write_ae_tables(result: AeSweepResult, out_dir: str | Path, prefix: str = "ae") -> list[Path]:
    """One accuracy table per scheme plus the channel-free reference."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []
    for scheme_name, acc in result.accuracy.items():
        path = out / f"{prefix}_{scheme_name}.dat"
        _write_table(path, "snr_db accuracy", [result.snr_db, acc])
        written.append(path)
    path = out / f"{prefix}_channel_free.dat"
    _write_table(
        path, "snr_db accuracy",
        [result.snr_db, np.full(result.snr_db.size, result.channel_free)],
    )
    written.append(path)
    return written
