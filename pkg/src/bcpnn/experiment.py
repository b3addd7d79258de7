"""Train/evaluate pipeline shared by the command line and the acceptance tests."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import ExperimentConfig
from .dataio import ImageDataset, load_idx, subsample
from .engine import Network, extract_features, train_unsupervised
from .errors import ContractViolation
from .readout import evaluate, train_classifier
from .rng import derive_seed, generator

SUBSAMPLE_STREAM = 41


def build_network(cfg: ExperimentConfig, **sim_changes) -> Network:
    geom_in, geom_hid = cfg.geometry()
    return Network(
        geom_in,
        geom_hid,
        cfg.sim_params(**sim_changes),
        p_conn=cfg["network.p_conn"],
        refresh_every=cfg["network.refresh_every"],
        init_noise=cfg["network.init_noise"],
        bias_regulation=cfg.regulation(),
    )


def load_splits(cfg: ExperimentConfig):
    """Train and test sets as configured.

    With ``data.n_train`` > 0 both splits are a stratified subsample of the
    train files (disjoint, seeded by ``seed``), and the test files may be
    left unset.  Otherwise the train and test files are used whole.
    """
    train = load_idx(*cfg.data_paths("train"), name="train")
    if cfg["data.n_train"] > 0:
        n_test = cfg["data.n_test"]
        if n_test > 0 and not cfg["data.test_images"]:
            return subsample(train, cfg["data.n_train"], n_test, generator(cfg["seed"], SUBSAMPLE_STREAM))
        tr, _ = subsample(train, cfg["data.n_train"], 0, generator(cfg["seed"], SUBSAMPLE_STREAM))
        test = load_idx(*cfg.data_paths("test"), name="test")
        if n_test > 0:
            _, test = subsample(test, 0, n_test, generator(cfg["seed"], SUBSAMPLE_STREAM, 1))
        return tr, test
    return train, load_idx(*cfg.data_paths("test"), name="test")


def train_network(cfg: ExperimentConfig, train: ImageDataset, net: Network | None = None, **kwargs):
    net = build_network(cfg) if net is None else net
    log = train_unsupervised(net, train, cfg.protocol(), cfg.run_mode(), cfg.rewire_schedule(), **kwargs)
    return net, log


@dataclass
class EvalResult:
    accuracies: list
    reports: list

    @property
    def mean(self) -> float:
        return float(np.mean(self.accuracies))

    @property
    def std(self) -> float:
        return float(np.std(self.accuracies))

    def summary(self) -> str:
        return f"{100 * self.mean:.2f} ± {100 * self.std:.2f} %"


def features_for(net: Network, cfg: ExperimentConfig, dataset: ImageDataset):
    return extract_features(net, dataset, cfg.run_mode().frozen(), cfg.protocol())[0]


def evaluate_network(net: Network, cfg: ExperimentConfig, train: ImageDataset, test: ImageDataset) -> EvalResult:
    """Frozen features, then ``classifier.n_runs`` classifiers with distinct seeds."""
    geom_in, geom_hid = cfg.geometry()
    if (net.geom_in, net.geom_hid) != (geom_in, geom_hid):
        raise ContractViolation(
            f"checkpoint geometry {net.geom_in}/{net.geom_hid} does not match config {geom_in}/{geom_hid}"
        )
    f_train = features_for(net, cfg, train)
    f_test = features_for(net, cfg, test)
    accs, reports = [], []
    for run in range(cfg["classifier.n_runs"]):
        params = cfg.classifier_params(seed=derive_seed(cfg["seed"], "classifier", run))
        model, _ = train_classifier(f_train, train.labels, params)
        rep = evaluate(model, f_test, test.labels)
        accs.append(rep.accuracy)
        reports.append(rep)
    return EvalResult(accs, reports)


def cell_config(base: ExperimentConfig, tau_z_ms: float, f_max_hz: float) -> ExperimentConfig:
    """Config of one sweep cell; its seed depends only on (master seed, tau_z, f_max)."""
    seed = derive_seed(base["seed"], float(tau_z_ms), float(f_max_hz))
    return base.with_(sim__tau_z_ms=tau_z_ms, sim__f_max_hz=f_max_hz, seed=seed)


def run_cell(base: ExperimentConfig, tau_z_ms: float, f_max_hz: float, splits=None) -> EvalResult:
    cfg = cell_config(base, tau_z_ms, f_max_hz)
    train, test = load_splits(base) if splits is None else splits
    net, _ = train_network(cfg, train)
    return evaluate_network(net, cfg, train, test)
