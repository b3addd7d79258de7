"""Experiment configuration as a flat YAML mapping of dotted keys.

Example file::

    sim.tau_z_ms: 20.0
    hidden.n_hypercolumns: 100
    data.train_images: data/mnist/train-images-idx3-ubyte.gz

Every key has a default (``DEFAULTS``); unknown keys are rejected so typos
fail loudly.  ``BCPNN_OUT_DIR`` in the environment overrides ``output.dir``.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, replace
from pathlib import Path

import yaml

from .dynamics import SimParams
from .engine import BiasRegulation, ProtocolParams, RunMode
from .errors import ConfigError
from .readout import ClassifierParams
from .topology import LayerGeometry, RewireSchedule

OUT_DIR_ENV = "BCPNN_OUT_DIR"

# key -> (type, default)
_SCHEMA = {
    "seed": (int, 0),
    "sim.dt_ms": (float, 1.0),
    "sim.tau_z_ms": (float, 20.0),
    "sim.tau_p_ms": (float, 5000.0),
    "sim.f_max_hz": (float, 50.0),
    "sim.eps": (float, 1e-6),
    "protocol.t_pat_ms": (float, 200.0),
    "protocol.t_gap_ms": (float, 100.0),
    "protocol.n_epochs": (int, 10),
    "protocol.n_patterns": (int, 60000),
    "protocol.gap_plasticity": (bool, False),
    "input.n_hypercolumns": (int, 784),
    "input.n_minicolumns": (int, 2),
    "hidden.n_hypercolumns": (int, 100),
    "hidden.n_minicolumns": (int, 100),
    "network.p_conn": (float, 0.10),
    "network.refresh_every": (int, 1),
    "network.init_noise": (float, 0.01),
    "regulation.enabled": (bool, True),
    "regulation.usage_min": (float, 0.3),
    "regulation.gain_low": (float, -10.0),
    "regulation.tau_ms": (float, 5000.0),
    "rewire.enabled": (bool, True),
    "rewire.interval_steps": (int, 30000),
    "rewire.swaps_per_event": (int, 1),
    "run.mode": (str, "spiking"),
    "classifier.lr": (float, 1e-3),
    "classifier.beta1": (float, 0.9),
    "classifier.beta2": (float, 0.999),
    "classifier.adam_eps": (float, 1e-8),
    "classifier.batch_size": (int, 128),
    "classifier.n_epochs": (int, 100),
    "classifier.n_runs": (int, 3),
    "data.train_images": (str, ""),
    "data.train_labels": (str, ""),
    "data.test_images": (str, ""),
    "data.test_labels": (str, ""),
    "data.n_train": (int, 0),
    "data.n_test": (int, 0),
    "output.dir": (str, "out"),
    "sweep.tau_z_grid": (list, [1.0, 10.0, 50.0, 100.0, 300.0]),
    "sweep.f_max_grid": (list, [50.0, 500.0]),
    "sweep.workers": (int, 1),
}

DEFAULTS = {k: v for k, (_, v) in _SCHEMA.items()}


def _coerce(key, value):
    kind = _SCHEMA[key][0]
    if kind is bool:
        if isinstance(value, bool):
            return value
        raise ConfigError(f"{key}: expected true/false, got {value!r}")
    if kind is int:
        if isinstance(value, bool) or not isinstance(value, int):
            if isinstance(value, float) and value.is_integer():
                return int(value)
            raise ConfigError(f"{key}: expected an integer, got {value!r}")
        return value
    if kind is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{key}: expected a number, got {value!r}")
        return float(value)
    if kind is list:
        if not isinstance(value, list) or not all(
            isinstance(v, (int, float)) and not isinstance(v, bool) for v in value
        ):
            raise ConfigError(f"{key}: expected a list of numbers, got {value!r}")
        return [float(v) for v in value]
    if value is None:
        return ""
    if not isinstance(value, str):
        raise ConfigError(f"{key}: expected a string, got {value!r}")
    return value


@dataclass(frozen=True)
class ExperimentConfig:
    values: dict

    @classmethod
    def from_dict(cls, overrides: dict | None = None, env=None) -> "ExperimentConfig":
        values = dict(DEFAULTS)
        for key, value in (overrides or {}).items():
            if key not in _SCHEMA:
                raise ConfigError(f"unknown config key {key!r}")
            values[key] = _coerce(key, value)
        env = os.environ if env is None else env
        if env.get(OUT_DIR_ENV):
            values["output.dir"] = env[OUT_DIR_ENV]
        cfg = cls(values)
        cfg.validate()
        return cfg

    @classmethod
    def load(cls, path, env=None) -> "ExperimentConfig":
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc.strerror}") from exc
        try:
            raw = yaml.safe_load(text)
        except yaml.YAMLError as exc:
            raise ConfigError(f"{path}: not valid YAML ({exc})") from exc
        if raw is None:
            raw = {}
        if not isinstance(raw, dict):
            raise ConfigError(f"{path}: expected a mapping of dotted keys")
        return cls.from_dict(raw, env=env)

    def dumps(self) -> str:
        return yaml.safe_dump(dict(self.values), sort_keys=True, default_flow_style=None)

    def save(self, path):
        Path(path).write_text(self.dumps())

    def with_(self, **changes) -> "ExperimentConfig":
        """Copy with overrides; use ``__`` for dots, e.g. ``sim__tau_z_ms=50``."""
        values = dict(self.values)
        for k, v in changes.items():
            key = k.replace("__", ".")
            if key not in _SCHEMA:
                raise ConfigError(f"unknown config key {key!r}")
            values[key] = _coerce(key, v)
        cfg = replace(self, values=values)
        cfg.validate()
        return cfg

    def __getitem__(self, key):
        return self.values[key]

    # -- typed views ------------------------------------------------------------

    def validate(self):
        """Build every typed view once so that any invalid field raises now."""
        self.sim_params()
        self.protocol().validate(self.sim_params())
        self.geometry()
        self.rewire_schedule()
        self.regulation()
        self.classifier_params()
        self.run_mode()
        if not 0 < self["network.p_conn"] <= 1:
            raise ConfigError("network.p_conn must be in (0, 1]")
        if self["network.refresh_every"] < 1:
            raise ConfigError("network.refresh_every must be >= 1")
        if self["network.init_noise"] < 0:
            raise ConfigError("network.init_noise must be >= 0")
        if self["classifier.n_runs"] < 1:
            raise ConfigError("classifier.n_runs must be >= 1")
        if self["data.n_train"] < 0 or self["data.n_test"] < 0:
            raise ConfigError("data.n_train and data.n_test must be >= 0")
        if self["sweep.workers"] < 1:
            raise ConfigError("sweep.workers must be >= 1")

    def sim_params(self, **changes) -> SimParams:
        return SimParams(
            dt_ms=self["sim.dt_ms"],
            tau_z_ms=self["sim.tau_z_ms"],
            tau_p_ms=self["sim.tau_p_ms"],
            f_max_hz=self["sim.f_max_hz"],
            eps=self["sim.eps"],
            seed=self["seed"],
        ).with_(**changes)

    def protocol(self) -> ProtocolParams:
        return ProtocolParams(
            t_pat_ms=self["protocol.t_pat_ms"],
            t_gap_ms=self["protocol.t_gap_ms"],
            n_epochs=self["protocol.n_epochs"],
            n_patterns=self["protocol.n_patterns"],
            gap_plasticity=self["protocol.gap_plasticity"],
        )

    def geometry(self):
        return (
            LayerGeometry(self["input.n_hypercolumns"], self["input.n_minicolumns"]),
            LayerGeometry(self["hidden.n_hypercolumns"], self["hidden.n_minicolumns"]),
        )

    def rewire_schedule(self) -> RewireSchedule | None:
        sched = RewireSchedule(self["rewire.interval_steps"], self["rewire.swaps_per_event"])
        return sched if self["rewire.enabled"] else None

    def regulation(self) -> BiasRegulation | None:
        reg = BiasRegulation(self["regulation.usage_min"], self["regulation.gain_low"], self["regulation.tau_ms"])
        return reg if self["regulation.enabled"] else None

    def classifier_params(self, seed: int = 0) -> ClassifierParams:
        return ClassifierParams(
            lr=self["classifier.lr"],
            beta1=self["classifier.beta1"],
            beta2=self["classifier.beta2"],
            adam_eps=self["classifier.adam_eps"],
            batch_size=self["classifier.batch_size"],
            n_epochs=self["classifier.n_epochs"],
            seed=seed,
        )

    def run_mode(self) -> RunMode:
        mode = self["run.mode"]
        if mode not in ("spiking", "rate"):
            raise ConfigError(f"run.mode must be 'spiking' or 'rate', got {mode!r}")
        return RunMode(mode)

    def data_paths(self, split: str):
        keys = (f"data.{split}_images", f"data.{split}_labels")
        for key in keys:
            if not self[key]:
                raise ConfigError(f"{key} is not set")
        return self[keys[0]], self[keys[1]]


@dataclass(frozen=True)
class SweepSpec:
    tau_z_grid: tuple
    f_max_grid: tuple
    base: ExperimentConfig

    def __post_init__(self):
        if not self.tau_z_grid or not self.f_max_grid:
            raise ConfigError("sweep grids must be non-empty")
        for v in (*self.tau_z_grid, *self.f_max_grid):
            if not v > 0:
                raise ConfigError(f"sweep grid values must be > 0, got {v}")
        for tau_z, f_max in self.cells():
            # builds SimParams for the cell, which rejects f_max * dt > 1
            self.base.sim_params(tau_z_ms=tau_z, f_max_hz=f_max)

    @classmethod
    def from_config(cls, cfg: ExperimentConfig) -> "SweepSpec":
        return cls(tuple(cfg["sweep.tau_z_grid"]), tuple(cfg["sweep.f_max_grid"]), cfg)

    def cells(self):
        return [(t, f) for f in self.f_max_grid for t in self.tau_z_grid]
