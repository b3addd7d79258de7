"""Time-stepped simulation of the two-layer (input -> hidden) network.

Each tick does, in order: input spikes (or input rates), support
integration, hypercolumn softmax, hidden spikes (or hidden rates), then the
Z and P trace updates and, on the refresh cadence, b and w.

``Network.refresh_every`` sets how many ticks pass between recomputations of
b and w from the P traces.  With the default of 1 every tick sees fresh
parameters.  Larger values batch the joint-trace update into one matrix
product per refresh (``dynamics.accumulate_joint``), which is what makes
desk-scale training runs affordable.
"""

from __future__ import annotations

import io
import json
import time
import zipfile
from dataclasses import asdict, dataclass, field
from enum import Enum
from pathlib import Path

import numba as nb
import numpy as np

from . import dynamics as dyn
from .dynamics import SimParams, TraceState
from .errors import ConfigError, ContractViolation
from .rng import HIDDEN_SPIKES, INPUT_SPIKES, CounterStream, counter_uniform, generator
from .topology import ConnectivityMask, LayerGeometry, RewireSchedule, init_connectivity, rewire

CHECKPOINT_FORMAT = "bcpnn-checkpoint"
CHECKPOINT_VERSION = 1

INIT_STREAM = 21
SHUFFLE_STREAM = 22


class Activity(str, Enum):
    SPIKING = "spiking"
    RATE = "rate"


class Plasticity(str, Enum):
    LEARNING = "learning"
    FROZEN = "frozen"


@dataclass(frozen=True)
class RunMode:
    activity: Activity = Activity.SPIKING
    plasticity: Plasticity = Plasticity.LEARNING

    def __post_init__(self):
        object.__setattr__(self, "activity", Activity(self.activity))
        object.__setattr__(self, "plasticity", Plasticity(self.plasticity))

    @property
    def spiking(self) -> bool:
        return self.activity is Activity.SPIKING

    @property
    def learning(self) -> bool:
        return self.plasticity is Plasticity.LEARNING

    def frozen(self) -> "RunMode":
        return RunMode(self.activity, Plasticity.FROZEN)


@dataclass(frozen=True)
class ProtocolParams:
    """Presentation schedule.

    ``gap_plasticity`` keeps the P traces learning through the blank gaps.
    It is off by default: during a gap every hidden unit still fires but
    sees no input, so units that win gaps gain P_j with no matching P_ij,
    their conditionals shrink, and within a few hundred patterns a single
    minicolumn per hypercolumn takes over.  Z traces and the support keep
    evolving through gaps either way.
    """

    t_pat_ms: float = 200.0
    t_gap_ms: float = 100.0
    n_epochs: int = 10
    n_patterns: int = 60000
    gap_plasticity: bool = False

    def validate(self, params: SimParams):
        if self.t_pat_ms < params.dt_ms:
            raise ConfigError(f"t_pat_ms ({self.t_pat_ms}) must be >= dt_ms ({params.dt_ms})")
        if self.t_gap_ms < 0:
            raise ConfigError("t_gap_ms must be >= 0")
        if self.n_epochs < 0 or self.n_patterns < 0:
            raise ConfigError("n_epochs and n_patterns must be >= 0")

    def pattern_steps(self, params: SimParams) -> int:
        return int(round(self.t_pat_ms / params.dt_ms))

    def gap_steps(self, params: SimParams) -> int:
        return int(round(self.t_gap_ms / params.dt_ms))


def encode_input(image) -> np.ndarray:
    """Complement coding: pixel p becomes (p, 1 - p) on its hypercolumn's two units."""
    x = np.asarray(image, dtype=np.float64).reshape(-1)
    if x.size and (np.isnan(x).any() or x.min() < 0.0 or x.max() > 1.0):
        raise ContractViolation("pixel values must lie in [0, 1]")
    out = np.empty(2 * x.size)
    out[0::2] = x
    out[1::2] = 1.0 - x
    return out


@nb.njit(cache=True)
def _run_kernel(
    n_steps, t0, spiking, learning, has_input,
    pi_in, drive_rate, weights, bias, support, activation,
    spikes_in, spikes_h, z_in, z_h, p_in, p_h,
    hist_in, hist_h, hist_off,
    z_decay, leak, p_rate, scale, m_hid,
    keys_in, keys_h,
    in_window, counts, pi_sum,
    rec_units, rec_support, rec_spikes, rec_off,
):  # fmt: skip
    n_in = pi_in.shape[0]
    n_h = support.shape[0]
    for k in range(n_steps):
        t = t0 + k
        # input layer
        if spiking:
            if has_input:
                dyn._sample_inplace(pi_in, scale, keys_in, np.uint64(t), spikes_in)
            else:
                spikes_in[:] = 0
        # hidden support
        dyn._leak_inplace(support, bias, leak)
        if spiking:
            for u in range(n_in):
                if spikes_in[u]:
                    for j in range(n_h):
                        support[j] += weights[u, j]
        else:
            for j in range(n_h):
                support[j] += drive_rate[j]
        dyn._softmax_inplace(support, m_hid, activation)
        # hidden output and traces
        if spiking:
            dyn._sample_inplace(activation, scale, keys_h, np.uint64(t), spikes_h)
            dyn._update_z_inplace(z_in, spikes_in, z_decay)
            dyn._update_z_inplace(z_h, spikes_h, z_decay)
        else:
            for u in range(n_in):
                z_in[u] = pi_in[u] if has_input else 0.0
            z_h[:] = activation
        if learning:
            dyn._low_pass_inplace(p_in, z_in, p_rate)
            dyn._low_pass_inplace(p_h, z_h, p_rate)
            hist_in[hist_off + k, :] = z_in
            hist_h[hist_off + k, :] = z_h
        if in_window:
            for j in range(n_h):
                counts[j] += spikes_h[j]
                pi_sum[j] += activation[j]
        for r in range(rec_units.shape[0]):
            rec_support[rec_off + k, r] = support[rec_units[r]]
            rec_spikes[rec_off + k, r] = spikes_h[rec_units[r]]


@dataclass(frozen=True)
class BiasRegulation:
    """Usage-dependent bias gain that revives starved minicolumns.

    Usage u_j is P_j relative to the hypercolumn mean of P (1 = fair share).
    The gain target is 1 for well-used units and falls smoothly to
    ``gain_low`` (negative) as u_j drops to ``usage_min / 2``; the gain
    follows its target with time constant ``tau_ms``.  The bias becomes
    gain_j * log P_j, so a negative gain turns a starved unit's very
    negative log-prior into a growing advantage.
    """

    usage_min: float = 0.3
    gain_low: float = -10.0
    tau_ms: float = 5000.0

    def __post_init__(self):
        if not 0 < self.usage_min < 1:
            raise ConfigError("usage_min must be in (0, 1)")
        if self.gain_low >= 1:
            raise ConfigError("gain_low must be < 1")
        if self.tau_ms <= 0:
            raise ConfigError("tau_ms must be > 0")

    def target(self, usage):
        q = self.usage_min / 4.0
        with np.errstate(divide="ignore"):
            g = 1.0 + (self.gain_low - 1.0) * q * q / (usage - q) ** 2
        return np.where(usage > 2 * q, np.maximum(g, self.gain_low), self.gain_low)


@dataclass
class PatternSummary:
    spike_counts: np.ndarray
    mean_activation: np.ndarray
    pattern_steps: int
    gap_steps: int


@dataclass
class Recording:
    """Per-step support and spikes of selected hidden units."""

    units: np.ndarray
    support: np.ndarray
    spikes: np.ndarray
    dt_ms: float
    t0_step: int = 0


@dataclass
class EpochLog:
    epoch: int
    mean_rate_hz: float
    n_swaps: int
    wall_time_s: float


@dataclass
class _Progress:
    epoch: int = 0
    index: int = 0
    spikes: float = 0.0
    window_steps: int = 0
    swaps: int = 0
    steps_since_rewire: int = 0


class Network:
    """Input layer (H_in x M_in) feeding a hidden layer (H_hid x M_hid).

    ``init_noise`` multiplies the initial joint traces by exp(noise * N(0,1)),
    giving small random initial weights to break the symmetry between
    minicolumns; 0 leaves every weight at exactly 0.  ``bias_regulation``
    (None = off) scales each bias by a usage-dependent gain, see
    ``BiasRegulation``.
    """

    def __init__(
        self,
        geom_in: LayerGeometry,
        geom_hid: LayerGeometry,
        params: SimParams,
        p_conn: float = 0.10,
        refresh_every: int = 1,
        init_noise: float = 0.0,
        mask: ConnectivityMask | None = None,
        bias_regulation: BiasRegulation | None = None,
    ):
        if refresh_every < 1:
            raise ConfigError("refresh_every must be >= 1")
        self.geom_in = geom_in
        self.geom_hid = geom_hid
        self.params = params
        self.p_conn = float(p_conn)
        self.refresh_every = int(refresh_every)
        self.init_noise = float(init_noise)
        self.bias_regulation = bias_regulation
        self.mask = mask if mask is not None else init_connectivity(geom_in, geom_hid, p_conn, params.seed)
        if self.mask.active.shape != (geom_hid.n_hypercolumns, geom_in.n_hypercolumns):
            raise ContractViolation("mask shape does not match layer geometry")

        n_in, n_h = geom_in.n_units, geom_hid.n_units
        self.traces = TraceState.uniform(n_in, geom_in.n_minicolumns, n_h, geom_hid.n_minicolumns)
        if init_noise > 0:
            rng = generator(params.seed, INIT_STREAM)
            self.traces.p_joint *= np.exp(init_noise * rng.standard_normal(self.traces.p_joint.shape))
        self.bias_gain = np.ones(n_h)
        self.bias = dyn.compute_bias(self.traces.p_post, params.eps)
        self.weights = np.zeros((n_in, n_h))
        self.support = self.bias.copy()
        self.activation = dyn.hypercolumn_softmax(self.support, geom_hid)
        self.spikes_in = np.zeros(n_in, dtype=np.uint8)
        self.spikes_h = np.zeros(n_h, dtype=np.uint8)
        self.t = 0
        self.pending = 0
        self._hist_in = np.zeros((self.refresh_every, n_in))
        self._hist_h = np.zeros((self.refresh_every, n_h))
        self.progress = _Progress()
        self._streams()
        self._index_active()
        self.refresh_parameters()

    def _streams(self):
        self.stream_in = CounterStream(self.params.seed, INPUT_SPIKES, self.geom_in.n_units)
        self.stream_h = CounterStream(self.params.seed, HIDDEN_SPIKES, self.geom_hid.n_units)

    def _index_active(self):
        mi, mh = self.geom_in.n_minicolumns, self.geom_hid.n_minicolumns
        n_h = self.geom_hid.n_units
        table = self.mask.input_table()  # (H_hid, k)
        in_units = (table[:, :, None] * mi + np.arange(mi)).reshape(table.shape[0], -1)  # (H_hid, k*mi)
        hid_units = np.arange(n_h).reshape(-1, mh)  # (H_hid, mh)
        rows = np.broadcast_to(in_units[:, :, None], (table.shape[0], in_units.shape[1], mh))
        cols = np.broadcast_to(hid_units[:, None, :], rows.shape)
        self._rows = rows.reshape(-1)
        self._cols = cols.reshape(-1)
        self._active_idx = self._rows * n_h + self._cols

    # -- plasticity ---------------------------------------------------------

    @property
    def conn_mask(self) -> np.ndarray:
        return self.mask.unit_mask(self.geom_in, self.geom_hid)

    def refresh_parameters(self, elapsed_steps: int = 0):
        """Recompute b and the active entries of w from the P traces.

        ``elapsed_steps`` advances the bias-gain filter, if regulation is on.
        """
        eps = self.params.eps
        tr = self.traces
        log_p = dyn.compute_bias(tr.p_post, eps)
        reg = self.bias_regulation
        if reg is not None and elapsed_steps:
            m = self.geom_hid.n_minicolumns
            p = tr.p_post.reshape(-1, m)
            usage = (p / p.mean(axis=1, keepdims=True)).reshape(-1)
            rate = min(1.0, elapsed_steps * self.params.dt_ms / reg.tau_ms)
            self.bias_gain += rate * (reg.target(usage) - self.bias_gain)
        self.bias = self.bias_gain * log_p
        w = dyn.compute_weight(
            tr.p_pre[self._rows], tr.p_post[self._cols], tr.p_joint.reshape(-1)[self._active_idx], eps
        )
        self.weights.reshape(-1)[self._active_idx] = w

    def full_weights(self) -> np.ndarray:
        """w_ij for every unit pair, connected or not."""
        tr = self.traces
        return dyn.compute_weight(tr.p_pre[:, None], tr.p_post[None, :], tr.p_joint, self.params.eps)

    def flush(self):
        """Fold buffered Z history into the joint traces and refresh b, w."""
        elapsed = self.pending
        if self.pending:
            dyn.accumulate_joint(
                self.traces.p_joint, self._hist_in[: self.pending], self._hist_h[: self.pending], self.params
            )
            self.pending = 0
        self.refresh_parameters(elapsed)

    def apply_rewire(self, schedule: RewireSchedule):
        new_mask, log = rewire(self.mask, self.traces, schedule, self.params.eps, self.geom_in, self.geom_hid)
        if log:
            self.mask = new_mask
            self.weights[:] = 0.0
            self._index_active()
            self.refresh_parameters()
        return log

    # -- simulation ---------------------------------------------------------

    def run(self, n_steps: int, input_activation, mode: RunMode, in_window: bool = False, record=None):
        """Advance ``n_steps`` ticks with a fixed input (None for a gap).

        Returns (spike_counts, activation_sum) accumulated when ``in_window``.
        ``record`` is an optional (units, support_buf, spikes_buf, offset) tuple.
        """
        p = self.params
        n_in, n_h = self.geom_in.n_units, self.geom_hid.n_units
        has_input = input_activation is not None
        if has_input:
            pi_in = np.ascontiguousarray(input_activation, dtype=np.float64)
            if pi_in.shape != (n_in,):
                raise ContractViolation(f"input activation has shape {pi_in.shape}, expected ({n_in},)")
            if pi_in.min() < 0 or pi_in.max() > 1:
                raise ContractViolation("input activation outside [0, 1]")
        else:
            pi_in = np.zeros(n_in)
        counts = np.zeros(n_h)
        pi_sum = np.zeros(n_h)
        if record is None:
            rec_units, rec_sup, rec_spk, rec_off = np.zeros(0, np.int64), np.zeros((0, 0)), np.zeros((0, 0), np.uint8), 0
        else:
            rec_units, rec_sup, rec_spk, rec_off = record
        learning = mode.learning
        spiking = mode.spiking
        done = 0
        while done < n_steps:
            n = n_steps - done
            if learning:
                n = min(n, self.refresh_every - self.pending)
            if spiking or not has_input:
                drive = np.zeros(n_h)
            else:
                # rate mode: presynaptic signal (dt/tau_z) * pi_i, constant until the next refresh
                drive = (p.support_leak * pi_in) @ self.weights
            _run_kernel(
                n, self.t, spiking, learning, has_input,
                pi_in, drive, self.weights, self.bias, self.support, self.activation,
                self.spikes_in, self.spikes_h,
                self.traces.z_pre, self.traces.z_post, self.traces.p_pre, self.traces.p_post,
                self._hist_in, self._hist_h, self.pending,
                p.z_decay, p.support_leak, p.p_rate, p.spike_scale, self.geom_hid.n_minicolumns,
                self.stream_in.keys, self.stream_h.keys,
                in_window, counts, pi_sum,
                rec_units, rec_sup, rec_spk, rec_off + done,
            )  # fmt: skip
            if not spiking:
                self.spikes_h[:] = 0
                self.spikes_in[:] = 0
            done += n
            self.t += n
            if learning:
                self.pending += n
                if self.pending == self.refresh_every:
                    self.flush()
        return counts, pi_sum

    # -- persistence -----------------------------------------------------------

    def save(self, path):
        """Write a checkpoint; identical state always gives identical bytes."""
        header = {
            "format": CHECKPOINT_FORMAT,
            "version": CHECKPOINT_VERSION,
            "geom_in": asdict(self.geom_in),
            "geom_hid": asdict(self.geom_hid),
            "params": asdict(self.params),
            "p_conn": self.p_conn,
            "refresh_every": self.refresh_every,
            "init_noise": self.init_noise,
            "bias_regulation": None if self.bias_regulation is None else asdict(self.bias_regulation),
            "t": self.t,
            "pending": self.pending,
            "progress": asdict(self.progress),
        }
        arrays = {
            "z_pre": self.traces.z_pre,
            "z_post": self.traces.z_post,
            "p_pre": self.traces.p_pre,
            "p_post": self.traces.p_post,
            "p_joint": self.traces.p_joint,
            "bias": self.bias,
            "bias_gain": self.bias_gain,
            "weights": self.weights,
            "mask": self.mask.active.astype(np.uint8),
            "support": self.support,
            "activation": self.activation,
            "spikes_in": self.spikes_in,
            "spikes_h": self.spikes_h,
            "hist_in": self._hist_in[: self.pending],
            "hist_h": self._hist_h[: self.pending],
        }
        with zipfile.ZipFile(path, "w", compression=zipfile.ZIP_STORED) as zf:
            zf.writestr(zipfile.ZipInfo("header.json", date_time=(1980, 1, 1, 0, 0, 0)), json.dumps(header, sort_keys=True))
            for name, arr in arrays.items():
                buf = io.BytesIO()
                np.lib.format.write_array(buf, np.ascontiguousarray(arr), allow_pickle=False)
                zf.writestr(zipfile.ZipInfo(name + ".npy", date_time=(1980, 1, 1, 0, 0, 0)), buf.getvalue())

    @classmethod
    def load(cls, path) -> "Network":
        with zipfile.ZipFile(path) as zf:
            header = json.loads(zf.read("header.json"))
            if header.get("format") != CHECKPOINT_FORMAT:
                raise ContractViolation(f"{path} is not a network checkpoint")
            if header.get("version") != CHECKPOINT_VERSION:
                raise ContractViolation(f"unsupported checkpoint version {header.get('version')}")
            arrays = {n[:-4]: np.lib.format.read_array(io.BytesIO(zf.read(n))) for n in zf.namelist() if n.endswith(".npy")}
        net = cls.__new__(cls)
        net.geom_in = LayerGeometry(**header["geom_in"])
        net.geom_hid = LayerGeometry(**header["geom_hid"])
        net.params = SimParams(**header["params"])
        net.p_conn = header["p_conn"]
        net.refresh_every = header["refresh_every"]
        net.init_noise = header["init_noise"]
        reg = header["bias_regulation"]
        net.bias_regulation = None if reg is None else BiasRegulation(**reg)
        net.bias_gain = arrays["bias_gain"]
        net.mask = ConnectivityMask(arrays["mask"])
        net.traces = TraceState(arrays["z_pre"], arrays["z_post"], arrays["p_pre"], arrays["p_post"], arrays["p_joint"])
        net.bias = arrays["bias"]
        net.weights = arrays["weights"]
        net.support = arrays["support"]
        net.activation = arrays["activation"]
        net.spikes_in = arrays["spikes_in"]
        net.spikes_h = arrays["spikes_h"]
        net.t = header["t"]
        net.pending = header["pending"]
        net._hist_in = np.zeros((net.refresh_every, net.geom_in.n_units))
        net._hist_h = np.zeros((net.refresh_every, net.geom_hid.n_units))
        net._hist_in[: net.pending] = arrays["hist_in"]
        net._hist_h[: net.pending] = arrays["hist_h"]
        net.progress = _Progress(**header["progress"])
        net._streams()
        net._index_active()
        return net


def step(net: Network, input_activation, mode: RunMode):
    """Advance one tick.  ``input_activation`` is None during gaps."""
    net.run(1, input_activation, mode)
    return net


def present_pattern(
    net: Network, image, mode: RunMode, protocol: ProtocolParams, record: Recording | None = None
) -> PatternSummary:
    """Show one image for t_pat, then a blank gap of t_gap.

    Spike counts and mean activation cover the pattern window only.  When
    ``record`` is given, its buffers receive every tick (pattern and gap)
    starting at ``record.t0_step``.
    """
    p = net.params
    n_pat = protocol.pattern_steps(p)
    n_gap = protocol.gap_steps(p)
    x = encode_input(image)
    if x.size != net.geom_in.n_units:
        raise ContractViolation(f"image encodes to {x.size} units, input layer has {net.geom_in.n_units}")
    rec = None
    if record is not None:
        rec = (record.units, record.support, record.spikes, record.t0_step)
    counts, pi_sum = net.run(n_pat, x, mode, in_window=True, record=rec)
    if n_gap:
        if rec is not None:
            rec = (record.units, record.support, record.spikes, record.t0_step + n_pat)
        gap_mode = mode if protocol.gap_plasticity else mode.frozen()
        net.run(n_gap, None, gap_mode, record=rec)
    if record is not None:
        record.t0_step += n_pat + n_gap
    return PatternSummary(counts, pi_sum / n_pat, n_pat, n_gap)


def new_recording(net: Network, units, n_steps: int) -> Recording:
    units = np.asarray(units, dtype=np.int64)
    return Recording(
        units=units,
        support=np.zeros((n_steps, units.size)),
        spikes=np.zeros((n_steps, units.size), dtype=np.uint8),
        dt_ms=net.params.dt_ms,
    )


def train_unsupervised(
    net: Network,
    dataset,
    protocol: ProtocolParams,
    mode: RunMode,
    schedule: RewireSchedule | None = None,
    stop_after: int | None = None,
    log: list | None = None,
    on_epoch=None,
):
    """Unsupervised training; resumes from ``net.progress``.

    Each epoch presents ``min(n_patterns, len(dataset))`` images in an order
    shuffled by (seed, epoch).  Rewiring, when ``schedule`` is given, runs
    between patterns once ``interval_steps`` ticks have elapsed since the
    last event.  ``stop_after`` halts after that many presentations (for
    mid-epoch checkpoints).  Returns the list of EpochLog rows.
    """
    if not mode.learning:
        raise ContractViolation("training requires plasticity=learning")
    images = dataset.images
    if len(images) == 0:
        raise ContractViolation("dataset is empty")
    if images.shape[1] != net.geom_in.n_hypercolumns:
        raise ContractViolation(
            f"dataset has {images.shape[1]} pixels, input layer has {net.geom_in.n_hypercolumns} hypercolumns"
        )
    protocol.validate(net.params)
    log = [] if log is None else log
    n_per_epoch = min(protocol.n_patterns, len(images))
    per_pattern = protocol.pattern_steps(net.params) + protocol.gap_steps(net.params)
    pr = net.progress
    presented = 0
    t_start = time.perf_counter()
    while pr.epoch < protocol.n_epochs:
        order = generator(net.params.seed, SHUFFLE_STREAM, pr.epoch).permutation(len(images))[:n_per_epoch]
        while pr.index < n_per_epoch:
            if stop_after is not None and presented >= stop_after:
                return log
            s = present_pattern(net, images[order[pr.index]], mode, protocol)
            pr.index += 1
            presented += 1
            if mode.spiking:
                pr.spikes += float(s.spike_counts.sum())
            else:
                pr.spikes += float(s.mean_activation.sum()) * s.pattern_steps * net.params.spike_scale
            pr.window_steps += s.pattern_steps
            pr.steps_since_rewire += per_pattern
            if schedule is not None and pr.steps_since_rewire >= schedule.interval_steps:
                pr.swaps += len(net.apply_rewire(schedule))
                pr.steps_since_rewire = 0
        n_h = net.geom_hid.n_units
        rate = pr.spikes / (n_h * pr.window_steps * net.params.dt_ms / 1000.0) if pr.window_steps else 0.0
        row = EpochLog(pr.epoch, rate, pr.swaps, time.perf_counter() - t_start)
        log.append(row)
        if on_epoch is not None:
            on_epoch(row)
        t_start = time.perf_counter()
        net.progress = pr = _Progress(epoch=pr.epoch + 1, steps_since_rewire=pr.steps_since_rewire)
    return log


def extract_features(net: Network, dataset, mode: RunMode, protocol: ProtocolParams):
    """Hidden-layer features for every image, with plasticity off.

    Spiking mode: spike count over the pattern window divided by the count a
    unit firing at f_max would produce.  Rate mode: mean activation over the
    window.  Spiking features are not clipped, so sampling noise can push
    one slightly above 1.
    """
    if mode.learning:
        raise ContractViolation("feature extraction requires plasticity=frozen")
    images = dataset.images
    feats = np.empty((len(images), net.geom_hid.n_units))
    for n, img in enumerate(images):
        s = present_pattern(net, img, mode, protocol)
        if mode.spiking:
            feats[n] = s.spike_counts / (net.params.f_max_hz * s.pattern_steps * net.params.dt_ms / 1000.0)
        else:
            feats[n] = s.mean_activation
    return feats, np.asarray(dataset.labels).copy()


def write_training_log(rows, path):
    with open(path, "w") as f:
        f.write("epoch,mean_rate_hz,n_swaps,wall_time_s\n")
        for r in rows:
            f.write(f"{r.epoch},{r.mean_rate_hz:.9g},{r.n_swaps},{r.wall_time_s:.3f}\n")
