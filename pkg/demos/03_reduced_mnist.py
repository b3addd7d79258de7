"""Reduced-MNIST run: unsupervised training, linear readout, exports.

Trains the desk-scale network from configs/reduced_mnist.yaml (1000 train
and 1000 test images drawn from data/mnist5k), reports readout accuracy
next to an untrained network, and writes receptive fields and one
hypercolumn's firing rates under out/demo.  Takes several minutes.

    python demos/03_reduced_mnist.py [--mode rate|spiking] [--tau-z 50]
"""

import argparse
from pathlib import Path

import numpy as np

from bcpnn.config import ExperimentConfig
from bcpnn.engine import new_recording, present_pattern
from bcpnn.experiment import build_network, evaluate_network, load_splits, train_network
from bcpnn.metrics import (
    RateEstimateParams,
    SpikeRecord,
    estimate_rates,
    export_receptive_fields,
    mean_pairwise_distance,
    receptive_fields,
    write_rates_csv,
)

ROOT = Path(__file__).resolve().parents[1]

if __name__ == "__main__":
    ap = argparse.ArgumentParser()
    ap.add_argument("--mode", default="spiking", choices=("spiking", "rate"))
    ap.add_argument("--tau-z", type=float, default=50.0)
    ap.add_argument("--out", default=str(ROOT / "out" / "demo"))
    args = ap.parse_args()

    cfg = ExperimentConfig.load(ROOT / "configs" / "reduced_mnist.yaml")
    cfg = cfg.with_(
        run__mode=args.mode,
        sim__tau_z_ms=args.tau_z,
        data__train_images=str(ROOT / cfg["data.train_images"]),
        data__train_labels=str(ROOT / cfg["data.train_labels"]),
    )
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    train, test = load_splits(cfg)

    untrained = build_network(cfg)
    print("untrained network:", evaluate_network(untrained, cfg, train, test).summary())
    masks0, _ = receptive_fields(untrained)

    net, log = train_network(cfg, train, on_epoch=lambda r: print(f"  epoch {r.epoch}: {r.mean_rate_hz:.2f} Hz, {r.n_swaps} swaps"))
    print("trained network:  ", evaluate_network(net, cfg, train, test).summary())

    masks, _ = receptive_fields(net)
    d0 = np.mean([mean_pairwise_distance(m) for m in masks0])
    d1 = np.mean([mean_pairwise_distance(m) for m in masks])
    print(f"mean pairwise pixel distance within masks: {d0:.2f} -> {d1:.2f}")
    print("receptive fields:", export_receptive_fields(net, out / "receptive_fields"))

    if args.mode == "rate":
        raise SystemExit("rate mode emits no spikes; rerun with --mode spiking for the firing-rate export")

    # rates of hypercolumn 0 over 20 test images, plasticity off
    units = net.geom_hid.units_of(0)
    protocol = cfg.protocol()
    per = protocol.pattern_steps(net.params) + protocol.gap_steps(net.params)
    rec = new_recording(net, units, 20 * per)
    for img in test.images[:20]:
        present_pattern(net, img, cfg.run_mode().frozen(), protocol, record=rec)
    spikes = SpikeRecord.from_recording(rec)
    rates = estimate_rates(spikes, RateEstimateParams())
    write_rates_csv(out / "rates.csv", spikes, rates)
    mean_rates = rates.mean(axis=0)
    print(f"hypercolumn 0: top unit {mean_rates.max():.2f} Hz, median {np.median(mean_rates):.3f} Hz")
