"""Command-line front end: run sweeps, design quantizers, train detectors.

Exit codes: 0 on success, 2 for configuration errors, 3 for runtime
failures.  Every command writes a JSON run manifest (config echo, config
hash, seed, version, wall time, status) into the output directory, even
when the run fails partway.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

import numpy as np

from remotad import __version__
from remotad.autoencoder import save_checkpoint
from remotad.config import ExperimentConfig, build_config, config_hash
from remotad.errors import ConfigError, RemotadError
from remotad.evaluation import (
    analytic_accuracy,
    crossover_snr,
    run_ae_sweep,
    run_sweep,
    sphere_directions,
    write_ae_tables,
    write_sweep_tables,
)
from remotad import pca
from remotad.numerics import RngStream
from remotad.source import paper_spectrum, rotate_spec
from remotad.transmission import (
    ChannelParams,
    CodedScheme,
    capacity_bits,
    scheme_to_json,
)

__all__ = ["main", "cmd_pca_sweep", "cmd_ae_sweep", "cmd_quantizer_design", "cmd_fp_tp_table"]


def _build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="remotad",
        description="Remote anomaly detection over noisy channels: "
                    "coded vs. uncoded feature transmission.",
    )
    p.add_argument("--config", help="flat key=value config file")
    p.add_argument("--mode", help="pca-sweep | ae-sweep | quantizer-design | fp-tp-table")
    p.add_argument("--seed", help="master seed (integer)")
    p.add_argument("--out-dir", dest="out_dir", help="output directory")
    p.add_argument(
        "--snr-grid", dest="snr_db_grid",
        help="comma-separated SNR grid in dB; prefix with + to append to the "
             "config-file grid (e.g. --snr-grid=+20)",
    )
    p.add_argument("--trials", help="Monte Carlo trials per class")
    p.add_argument("--scheme", help="coded | uncoded | both")
    p.add_argument("--features", help="directory with train.txt/test_nominal.txt/"
                                      "test_anomalous.txt feature files")
    p.add_argument("--n", help="feature dimension")
    p.add_argument("--d", help="channel symbol budget (>= n)")
    p.add_argument("--k", help="principal subspace size")
    p.add_argument(
        "--radii-sq", dest="fault_radii_sq",
        help="comma-separated fault radii squared; + prefix appends",
    )
    return p


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    overrides = {
        key: getattr(args, key)
        for key in ("mode", "seed", "out_dir", "snr_db_grid", "trials", "scheme",
                    "features", "n", "d", "k", "fault_radii_sq")
    }
    try:
        cfg = build_config(args.config, overrides)
    except ConfigError as exc:
        print(f"error: {_one_line(exc)}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: cannot read config: {_one_line(exc)}", file=sys.stderr)
        return 2
    return _run(cfg)


def _one_line(exc: BaseException) -> str:
    return " ".join(str(exc).split())


_COMMANDS = {}


def _run(cfg: ExperimentConfig) -> int:
    out = Path(cfg.out_dir)
    started = time.monotonic()
    status = "ok"
    error = ""
    code = 0
    try:
        out.mkdir(parents=True, exist_ok=True)
        _COMMANDS[cfg.mode](cfg, out)
    except ConfigError as exc:
        status, error, code = "config-error", _one_line(exc), 2
    except (RemotadError, OSError, ValueError) as exc:
        status, error, code = "runtime-error", _one_line(exc), 3
    finally:
        manifest = {
            "version": f"remotad {__version__}",
            "config": cfg.to_dict(),
            "config_hash": config_hash(cfg),
            "seed": cfg.seed,
            "status": status,
            "error": error,
            "wall_time_s": round(time.monotonic() - started, 3),
        }
        try:
            out.mkdir(parents=True, exist_ok=True)
            (out / "run_manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")
        except OSError:
            pass
    if error:
        print(f"error: {error}", file=sys.stderr)
    return code


def cmd_pca_sweep(cfg: ExperimentConfig, out: Path) -> None:
    """Run the PCA accuracy sweep and write the four plot-data tables."""
    result = run_sweep(cfg)
    written = write_sweep_tables(result, out)
    for path in written:
        print(f"wrote {path}")
    if "uncoded" in result.accuracy and "coded" in result.accuracy:
        for r in result.radii_sq:
            cross = crossover_snr(result, float(r))
            label = "none" if cross is None else f"{cross:g} dB"
            print(f"crossover radius_sq={r:g}: {label}")


def cmd_ae_sweep(cfg: ExperimentConfig, out: Path) -> None:
    """Per-SNR autoencoder training/evaluation; writes tables and checkpoints."""
    result = run_ae_sweep(cfg)
    for path in write_ae_tables(result, out):
        print(f"wrote {path}")
    for (scheme_name, si), model in sorted(result.models.items()):
        db = result.snr_db[si]
        path = out / f"ae_{scheme_name}_snr{db:+g}dB.ckpt"
        save_checkpoint(model, path)
        print(f"wrote {path}")
    for (scheme_name, si), message in sorted(result.failures.items()):
        print(
            f"training failed ({scheme_name}, {result.snr_db[si]:+g} dB): {message}",
            file=sys.stderr,
        )
    if result.failures:
        raise RemotadError(f"{len(result.failures)} grid point(s) failed to train")


def cmd_quantizer_design(cfg: ExperimentConfig, out: Path) -> None:
    """Design the coded scheme at each grid SNR and dump allocation + codebooks."""
    spec = paper_spectrum(cfg.n)
    if cfg.basis == "random":
        spec = rotate_spec(spec, RngStream(cfg.seed, (0,)))
    variances = spec.entry_variances()
    for db in cfg.snr_db_grid:
        params = ChannelParams.from_db(float(db), cfg.n, cfg.d)
        budget = capacity_bits(params)
        scheme = CodedScheme.design(variances, budget)
        tag = f"snr{db:+g}dB"
        table = np.column_stack([
            np.arange(cfg.n, dtype=float),
            variances,
            scheme.allocation.bits.astype(float),
        ])
        alloc_path = out / f"bit_allocation_{tag}.dat"
        np.savetxt(alloc_path, table, fmt=["%d", "%.6f", "%d"],
                   header="entry variance bits")
        (out / f"codebooks_{tag}.json").write_text(scheme_to_json(scheme) + "\n")
        mse = sum(q.design_mse for q in scheme.quantizers)
        print(f"{tag}: budget {budget} bits, total design MSE {mse:.6f}")
        if budget == 0:
            print(f"{tag}: notice: zero bit budget, all entries decode to the mean")
        print(f"wrote {alloc_path}")


def cmd_fp_tp_table(cfg: ExperimentConfig, out: Path) -> None:
    """Analytic FP / mean-TP tables over delta for each radius and grid SNR."""
    spec = paper_spectrum(cfg.n)
    if cfg.basis == "random":
        spec = rotate_spec(spec, RngStream(cfg.seed, (0,)))
    directions = sphere_directions(cfg.n, cfg.analytic_directions,
                                   RngStream(cfg.seed, (1,)))
    n_delta = 64
    for r in cfg.fault_radii_sq:
        rows = []
        eta = 1.0 - float(r) / cfg.n
        for db in cfg.snr_db_grid:
            params = ChannelParams.from_db(float(db), cfg.n, cfg.d)
            qf_fp = pca.residual_lambdas(spec, params, 1.0, cfg.k)
            qf_tp = pca.residual_lambdas(spec, params, eta, cfg.k)
            deltas = np.linspace(0.0, 3.0 * np.sqrt(qf_fp.mean()), n_delta)
            fp = pca.approx_tail_prob(qf_fp, deltas)
            tps = []
            for u in directions:
                f_eig = spec.to_eigen_coords(np.sqrt(float(r)) * u)
                t = f_eig[cfg.k:] / np.sqrt(qf_tp.lambdas)
                tps.append(pca.approx_tail_prob(
                    pca.QuadFormParams(lambdas=qf_tp.lambdas, noncentrality=t), deltas))
            tp = np.mean(tps, axis=0)
            rows.append(np.column_stack([np.full(n_delta, float(db)), deltas, fp, tp]))
        path = out / f"fp_tp_radius{r:g}.dat"
        np.savetxt(path, np.vstack(rows), fmt="%.6f",
                   header="snr_db delta fp_prob tp_prob_mean")
        print(f"wrote {path}")


_COMMANDS.update({
    "pca-sweep": cmd_pca_sweep,
    "ae-sweep": cmd_ae_sweep,
    "quantizer-design": cmd_quantizer_design,
    "fp-tp-table": cmd_fp_tp_table,
})


if __name__ == "__main__":
    sys.exit(main())
