"""Post-run diagnostics: firing rates, support traces in millivolts, receptive fields."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigError, ContractViolation

IMAGE_SIDE = 28

# support-trace plotting convention
MV_LOW = -80.0
MV_HIGH = -55.0
MV_SPIKE = 40.0
MV_OFFSET = 50.0


@dataclass
class SpikeRecord:
    """Spike events of a unit selection over a window of ``n_steps`` steps.

    ``steps`` are relative to the window start and ``units`` index into
    ``unit_ids``; events are sorted by (step, unit) with no duplicates.
    """

    steps: np.ndarray
    units: np.ndarray
    unit_ids: np.ndarray
    n_steps: int
    dt_ms: float = 1.0
    t0_ms: float = 0.0

    def __post_init__(self):
        self.steps = np.asarray(self.steps, dtype=np.int64)
        self.units = np.asarray(self.units, dtype=np.int64)
        self.unit_ids = np.asarray(self.unit_ids, dtype=np.int64)
        if self.steps.shape != self.units.shape:
            raise ContractViolation("steps and units must have equal length")
        if self.steps.size:
            if self.steps.min() < 0 or self.steps.max() >= self.n_steps:
                raise ContractViolation("spike step outside the window")
            if self.units.min() < 0 or self.units.max() >= self.unit_ids.size:
                raise ContractViolation("spike unit outside the selection")
            key = self.steps * self.unit_ids.size + self.units
            if np.any(np.diff(key) <= 0):
                raise ContractViolation("events must be strictly increasing in (step, unit)")

    @classmethod
    def from_raster(cls, raster, unit_ids, dt_ms=1.0, t0_ms=0.0) -> "SpikeRecord":
        """Build from a (n_steps, n_units) 0/1 array."""
        raster = np.asarray(raster)
        steps, units = np.nonzero(raster)  # row-major, hence (step, unit) order
        return cls(steps, units, unit_ids, raster.shape[0], dt_ms, t0_ms)

    @classmethod
    def from_recording(cls, recording) -> "SpikeRecord":
        return cls.from_raster(
            recording.spikes, recording.units, recording.dt_ms, 0.0
        )

    def raster(self) -> np.ndarray:
        out = np.zeros((self.n_steps, self.unit_ids.size), dtype=np.uint8)
        out[self.steps, self.units] = 1
        return out

    def times_ms(self) -> np.ndarray:
        return self.t0_ms + np.arange(self.n_steps) * self.dt_ms


@dataclass(frozen=True)
class RateEstimateParams:
    sigma_ms: float = 50.0
    truncation: float = 4.0

    def __post_init__(self):
        if not self.sigma_ms > 0:
            raise ConfigError(f"sigma_ms must be > 0, got {self.sigma_ms}")
        if not self.truncation > 0:
            raise ConfigError(f"truncation must be > 0, got {self.truncation}")


def gaussian_kernel(params: RateEstimateParams, dt_ms: float) -> np.ndarray:
    """Sampled Gaussian with unit area in seconds: sum(kernel) * dt / 1000 = 1."""
    half = int(np.floor(params.truncation * params.sigma_ms / dt_ms))
    t = np.arange(-half, half + 1) * dt_ms
    g = np.exp(-0.5 * (t / params.sigma_ms) ** 2)
    return g / (g.sum() * dt_ms / 1000.0)


def estimate_rates(record: SpikeRecord, params: RateEstimateParams = RateEstimateParams(), dt_ms=None):
    """Instantaneous firing rate (spikes/s) of every recorded unit.

    Returns an (n_steps, n_units) array aligned with ``record.times_ms()``.
    Spikes closer than the kernel half-width to a window edge lose the part
    of their mass that falls outside the window.
    """
    dt = record.dt_ms if dt_ms is None else dt_ms
    if record.n_steps < 1:
        raise ContractViolation("empty window")
    kernel = gaussian_kernel(params, dt)
    raster = record.raster().astype(np.float64)
    out = np.empty_like(raster)
    half = kernel.size // 2
    for u in range(raster.shape[1]):
        full = np.convolve(raster[:, u], kernel)
        out[:, u] = full[half : half + record.n_steps]
    return out


def write_rates_csv(path, record: SpikeRecord, rates):
    times = record.times_ms()
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["time_ms", "unit", "rate_hz"])
        for k, unit in enumerate(record.unit_ids):
            for t, r in zip(times, rates[:, k]):
                w.writerow([f"{t:g}", int(unit), f"{r:.6g}"])


def support_to_mv(support, spikes):
    """Map each column of a support history to the millivolt plotting range.

    Column k is scaled affinely so its minimum is -80 mV and its maximum is
    -55 mV, spike steps get +40 mV, and the whole trace is shifted up by
    50 mV * k.  Returns (values, degenerate) where ``degenerate`` lists the
    columns whose support was constant; those sit at -80 mV.
    """
    support = np.asarray(support, dtype=np.float64)
    spikes = np.asarray(spikes)
    if support.shape != spikes.shape:
        raise ContractViolation(f"support {support.shape} and spikes {spikes.shape} differ in shape")
    lo = support.min(axis=0)
    span = support.max(axis=0) - lo
    flat = span <= 0
    scaled = np.where(flat, 0.0, (support - lo) / np.where(flat, 1.0, span))
    values = MV_LOW + (MV_HIGH - MV_LOW) * scaled + MV_SPIKE * (spikes != 0)
    values = values + MV_OFFSET * np.arange(support.shape[1])
    return values, [int(k) for k in np.flatnonzero(flat)]


def export_support_traces(path, recording, t0_ms: float = 0.0):
    """Write a recording's support traces as CSV (time_ms, unit, value_mv).

    Returns the list of unit ids whose support was constant over the window.
    """
    values, flat = support_to_mv(recording.support, recording.spikes)
    times = t0_ms + np.arange(values.shape[0]) * recording.dt_ms
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["time_ms", "unit", "value_mv"])
        for k, unit in enumerate(recording.units):
            for t, v in zip(times, values[:, k]):
                w.writerow([f"{t:g}", int(unit), f"{v:.6g}"])
    return [int(recording.units[k]) for k in flat]


def receptive_fields(net):
    """Connected-pixel masks and ON-minus-OFF weight filters.

    Returns ``masks`` (H_hid, 28, 28) bool and ``filters``
    (H_hid, M_hid, 28, 28).  Input hypercolumn p is pixel p; its unit 2p is
    the ON channel and 2p + 1 the OFF channel.
    """
    if net.geom_in.n_minicolumns != 2 or net.geom_in.n_hypercolumns != IMAGE_SIDE * IMAGE_SIDE:
        raise ContractViolation("receptive fields need a 784 x 2 complement-coded input layer")
    H, M = net.geom_hid.n_hypercolumns, net.geom_hid.n_minicolumns
    masks = net.mask.active.reshape(H, IMAGE_SIDE, IMAGE_SIDE)
    w = net.full_weights()
    diff = (w[0::2] - w[1::2]).reshape(IMAGE_SIDE * IMAGE_SIDE, H, M)
    filters = np.transpose(diff, (1, 2, 0)) * net.mask.active[:, None, :]
    return masks.copy(), filters.reshape(H, M, IMAGE_SIDE, IMAGE_SIDE)


def export_receptive_fields(net, out_dir):
    """One text matrix per hidden hypercolumn plus ``index.csv``.

    File ``hc_XXX.txt`` stacks 1 + M blocks of 28 rows: the 0/1 mask first,
    then the filter of each minicolumn in order.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    masks, filters = receptive_fields(net)
    rows = []
    for h in range(masks.shape[0]):
        name = f"hc_{h:03d}.txt"
        block = np.concatenate([masks[h][None].astype(np.float64), filters[h]], axis=0)
        np.savetxt(out / name, block.reshape(-1, IMAGE_SIDE), fmt="%.6g")
        rows.append((h, name, int(masks[h].sum()), filters.shape[1]))
    with open(out / "index.csv", "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["hypercolumn", "file", "n_pixels", "n_minicolumns"])
        w.writerows(rows)
    return out / "index.csv"


def mean_pairwise_distance(mask2d) -> float:
    """Mean Euclidean distance (pixels) between all pairs of connected pixels."""
    r, c = np.nonzero(np.asarray(mask2d))
    if r.size < 2:
        return 0.0
    d = np.hypot(r[:, None] - r[None, :], c[:, None] - c[None, :])
    n = r.size
    return float(d.sum() / (n * (n - 1)))


def rate_contrast(counts, n_minicolumns: int):
    """Per hypercolumn: (top-unit count, median-unit count) from per-unit spike counts."""
    c = np.asarray(counts, dtype=np.float64).reshape(-1, n_minicolumns)
    return c.max(axis=1), np.median(c, axis=1)
