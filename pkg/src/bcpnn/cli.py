"""Command line: ``bcpnn {train,eval,sweep,export}``.

Exit codes: 0 success, 1 configuration error, 2 runtime error.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import metrics
from .config import ExperimentConfig, SweepSpec
from .engine import Network, new_recording, present_pattern, write_training_log
from .errors import ConfigError, IdxParseError
from .experiment import cell_config, evaluate_network, load_splits, run_cell, train_network
from .rng import generator

log = logging.getLogger("bcpnn")

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2
EXPORT_STREAM = 51
REPLAY_MS = 6000.0
N_TRACE_UNITS = 30


def git_blob_hash(data: bytes) -> str:
    """Same digest ``git hash-object`` prints for a file with these bytes."""
    return hashlib.sha1(b"blob %d\0" % len(data) + data).hexdigest()


def _load_config(args) -> ExperimentConfig:
    overrides = {}
    if args.config:
        cfg = ExperimentConfig.load(args.config)
        overrides = dict(cfg.values)
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.mode is not None:
        overrides["run.mode"] = args.mode
    if args.out is not None:
        overrides["output.dir"] = args.out
    cfg = ExperimentConfig.from_dict(overrides)
    if args.out is not None and cfg["output.dir"] != args.out:
        # BCPNN_OUT_DIR won over --out; keep the explicit flag
        cfg = cfg.with_(output__dir=args.out)
    return cfg


def _out_dir(cfg) -> Path:
    out = Path(cfg["output.dir"])
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_train(cfg: ExperimentConfig, checkpoint: str | None = None) -> Path:
    out = _out_dir(cfg)
    train, _ = load_splits(cfg)
    net, rows = train_network(cfg, train, on_epoch=lambda r: log.info("epoch %d: %.3f Hz, %d swaps", r.epoch, r.mean_rate_hz, r.n_swaps))
    ckpt = Path(checkpoint) if checkpoint else out / "checkpoint.zip"
    net.save(ckpt)
    write_training_log(rows, out / "training_log.csv")
    cfg.save(out / "config.yaml")
    files = {p.name: git_blob_hash(p.read_bytes()) for p in (ckpt, out / "training_log.csv", out / "config.yaml")}
    manifest = {"config": dict(cfg.values), "files": files}
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return ckpt


def cmd_eval(cfg: ExperimentConfig, checkpoint: str) -> dict:
    out = _out_dir(cfg)
    net = Network.load(checkpoint)
    train, test = load_splits(cfg)
    res = evaluate_network(net, cfg, train, test)
    report = {
        "accuracy_mean": res.mean,
        "accuracy_std": res.std,
        "accuracies": res.accuracies,
        "summary": res.summary(),
        "runs": [json.loads(r.to_json()) for r in res.reports],
    }
    (out / "eval_report.json").write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
    return report


def _sweep_cell(args):
    base, tau_z, f_max = args
    try:
        res = run_cell(base, tau_z, f_max)
        return tau_z, f_max, res.mean, res.std, ""
    except Exception as exc:  # recorded per cell; the sweep continues
        return tau_z, f_max, math.nan, math.nan, f"{type(exc).__name__}: {exc}"


def cmd_sweep(spec: SweepSpec) -> Path:
    out = _out_dir(spec.base)
    jobs = [(spec.base, t, f) for t, f in spec.cells()]
    workers = spec.base["sweep.workers"]
    if workers > 1:
        with ProcessPoolExecutor(workers) as pool:
            rows = list(pool.map(_sweep_cell, jobs))
    else:
        rows = [_sweep_cell(j) for j in jobs]
    path = out / "sweep.csv"
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["tau_z_ms", "f_max_hz", "accuracy_mean", "accuracy_std", "seed", "error"])
        for tau_z, f_max, mean, std, err in rows:
            seed = cell_config(spec.base, tau_z, f_max)["seed"]
            w.writerow([f"{tau_z:g}", f"{f_max:g}", f"{mean:.6f}", f"{std:.6f}", seed, err])
    return path


def _replay(net: Network, cfg: ExperimentConfig, units, seed: int):
    """Present test images with plasticity off for REPLAY_MS, recording ``units``."""
    _, test = load_splits(cfg)
    protocol = cfg.protocol()
    p = net.params
    per_pattern = protocol.pattern_steps(p) + protocol.gap_steps(p)
    n_patterns = max(1, int(math.ceil(REPLAY_MS / (per_pattern * p.dt_ms))))
    order = generator(seed, EXPORT_STREAM, 1).choice(len(test), size=n_patterns, replace=len(test) < n_patterns)
    rec = new_recording(net, units, n_patterns * per_pattern)
    mode = cfg.run_mode().frozen()
    for i in order:
        present_pattern(net, test.images[i], mode, protocol, record=rec)
    return rec


def cmd_export(cfg: ExperimentConfig, checkpoint: str, what: str) -> Path:
    if what not in ("rf", "rates", "supports"):
        raise ConfigError(f"unknown export kind {what!r}; expected rf, rates or supports")
    out = _out_dir(cfg)
    net = Network.load(checkpoint)
    rng = generator(cfg["seed"], EXPORT_STREAM)
    if what == "rf":
        return metrics.export_receptive_fields(net, out / "receptive_fields")
    if what == "rates":
        h = int(rng.integers(net.geom_hid.n_hypercolumns))
        rec = _replay(net, cfg, net.geom_hid.units_of(h), cfg["seed"])
        spikes = metrics.SpikeRecord.from_recording(rec)
        rates = metrics.estimate_rates(spikes, metrics.RateEstimateParams())
        path = out / "rates.csv"
        metrics.write_rates_csv(path, spikes, rates)
        return path
    n = min(N_TRACE_UNITS, net.geom_hid.n_units)
    units = np.sort(rng.choice(net.geom_hid.n_units, size=n, replace=False))
    rec = _replay(net, cfg, units, cfg["seed"])
    path = out / "supports.csv"
    flat = metrics.export_support_traces(path, rec)
    if flat:
        log.warning("constant support for units %s; drawn at -80 mV", flat)
    return path


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="YAML file of dotted keys")
    common.add_argument("--out", help="output directory (overrides output.dir)")
    common.add_argument("--seed", type=int, help="master seed")
    common.add_argument("--mode", choices=("spiking", "rate"), help="activity mode")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="bcpnn", description="Spiking BCPNN simulator")
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("train", parents=[common], help="unsupervised training")
    p.add_argument("--checkpoint", help="checkpoint path (default OUT/checkpoint.zip)")
    p = sub.add_parser("eval", parents=[common], help="linear readout accuracy of a checkpoint")
    p.add_argument("--checkpoint", required=True)
    sub.add_parser("sweep", parents=[common], help="tau_z x f_max grid on the configured data")
    p = sub.add_parser("export", parents=[common], help="receptive fields, rates or support traces")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("what", choices=("rf", "rates", "supports"))
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        cfg = _load_config(args)
        if args.command == "train":
            print(cmd_train(cfg, args.checkpoint))
        elif args.command == "eval":
            print(cmd_eval(cfg, args.checkpoint)["summary"])
        elif args.command == "sweep":
            print(cmd_sweep(SweepSpec.from_config(cfg)))
        else:
            print(cmd_export(cfg, args.checkpoint, args.what))
    except (ConfigError, IdxParseError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
