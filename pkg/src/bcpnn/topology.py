"""Layer geometry, hypercolumn-level sparse connectivity, and rewiring."""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .dynamics import TraceState, compute_weight
from .errors import ConfigError, ContractViolation
from .rng import generator

WIRING_STREAM = 11


@dataclass(frozen=True)
class LayerGeometry:
    n_hypercolumns: int
    n_minicolumns: int

    def __post_init__(self):
        if self.n_hypercolumns < 1 or self.n_minicolumns < 1:
            raise ConfigError(f"invalid layer geometry {self.n_hypercolumns}x{self.n_minicolumns}")

    @property
    def n_units(self) -> int:
        return self.n_hypercolumns * self.n_minicolumns

    def hypercolumn_of(self, unit):
        return np.asarray(unit) // self.n_minicolumns

    def minicolumn_of(self, unit):
        return np.asarray(unit) % self.n_minicolumns

    def unit(self, hypercolumn, minicolumn):
        return np.asarray(hypercolumn) * self.n_minicolumns + np.asarray(minicolumn)

    def units_of(self, hypercolumn: int) -> np.ndarray:
        return np.arange(hypercolumn * self.n_minicolumns, (hypercolumn + 1) * self.n_minicolumns)


@dataclass(frozen=True)
class RewireSchedule:
    """How often and how much the connectivity may change.

    The default (30000 steps) is one event per 100 patterns at 200 + 100 ms
    per pattern and dt = 1 ms.
    """

    interval_steps: int = 30000
    swaps_per_event: int = 1

    def __post_init__(self):
        if self.interval_steps < 1:
            raise ConfigError("interval_steps must be >= 1")
        if self.swaps_per_event < 0:
            raise ConfigError("swaps_per_event must be >= 0")


def n_active_inputs(p_conn: float, n_input_hypercolumns: int) -> int:
    # round half up; Python's round() would send 0.5 to 0
    return int(math.floor(p_conn * n_input_hypercolumns + 0.5))


class ConnectivityMask:
    """Which input hypercolumns feed each hidden hypercolumn.

    ``active`` has one row per hidden hypercolumn and one column per input
    hypercolumn.  Unit-level connectivity is c_ij = active[hc(j), hc(i)].
    """

    def __init__(self, active):
        active = np.asarray(active)
        if active.ndim != 2:
            raise ContractViolation("connectivity must be a 2-d matrix")
        if not np.all((active == 0) | (active == 1)):
            raise ContractViolation("connectivity entries must be 0 or 1")
        self.active = active.astype(bool)
        counts = self.active.sum(axis=1)
        if counts.size and np.any(counts != counts[0]):
            raise ContractViolation(f"hidden hypercolumns have unequal fan-in {np.unique(counts)}")

    @property
    def n_hidden(self) -> int:
        return self.active.shape[0]

    @property
    def n_input(self) -> int:
        return self.active.shape[1]

    @property
    def k(self) -> int:
        return int(self.active[0].sum()) if self.n_hidden else 0

    def inputs_of(self, h_hid: int) -> np.ndarray:
        return np.flatnonzero(self.active[h_hid])

    def input_table(self) -> np.ndarray:
        """(n_hidden, k) array of connected input hypercolumns, ascending."""
        return np.nonzero(self.active)[1].reshape(self.n_hidden, self.k)

    def unit_mask(self, geom_in: LayerGeometry, geom_hid: LayerGeometry) -> np.ndarray:
        """Dense (n_in_units, n_hidden_units) 0/1 matrix c_ij."""
        return np.repeat(np.repeat(self.active.T, geom_in.n_minicolumns, axis=0), geom_hid.n_minicolumns, axis=1).astype(
            np.uint8
        )

    def copy(self) -> "ConnectivityMask":
        return ConnectivityMask(self.active.copy())

    def __eq__(self, other):
        return isinstance(other, ConnectivityMask) and np.array_equal(self.active, other.active)

    def save(self, path):
        """Text matrix: one line per hidden hypercolumn, 0/1 per input hypercolumn."""
        np.savetxt(path, self.active.astype(np.uint8), fmt="%d", delimiter=" ")

    @classmethod
    def load(cls, path) -> "ConnectivityMask":
        return cls(np.loadtxt(Path(path), dtype=np.uint8, ndmin=2))


def init_connectivity(geom_in: LayerGeometry, geom_hid: LayerGeometry, p_conn: float, seed: int) -> ConnectivityMask:
    """Each hidden hypercolumn picks k = round(p_conn * H_in) distinct inputs.

    Hidden hypercolumn h draws from its own substream ``(seed, h)``.
    """
    if not 0 < p_conn <= 1:
        raise ConfigError(f"p_conn must be in (0, 1], got {p_conn}")
    k = n_active_inputs(p_conn, geom_in.n_hypercolumns)
    if k == 0:
        raise ConfigError(f"p_conn={p_conn} gives zero connections for {geom_in.n_hypercolumns} input hypercolumns")
    active = np.zeros((geom_hid.n_hypercolumns, geom_in.n_hypercolumns), dtype=bool)
    for h in range(geom_hid.n_hypercolumns):
        rng = generator(seed, WIRING_STREAM, h)
        active[h, rng.choice(geom_in.n_hypercolumns, size=k, replace=False)] = True
    return ConnectivityMask(active)


def _pair_scores(p_pre, p_post, p_joint, eps):
    # p_pre (Hi, Mi), p_post (Hh, Mh), p_joint (Hi, Mi, Hh, Mh)
    pi = p_pre / p_pre.sum(axis=1, keepdims=True)
    pj = p_post / p_post.sum(axis=1, keepdims=True)
    pij = p_joint / p_joint.sum(axis=(1, 3), keepdims=True)
    w = compute_weight(pi[:, :, None, None], pj[None, None, :, :], pij, eps)
    return (pij * w).sum(axis=(1, 3))


def usage_scores(
    traces: TraceState, geom_in: LayerGeometry, geom_hid: LayerGeometry, eps: float, chunk: int = 8
) -> np.ndarray:
    """Usage score for every (hidden hc, input hc) pair, shape (H_hid, H_in).

    The score is the mutual information between the two hypercolumns'
    discrete states as estimated from their normalized P traces.
    """
    Hi, Mi = geom_in.n_hypercolumns, geom_in.n_minicolumns
    Hh, Mh = geom_hid.n_hypercolumns, geom_hid.n_minicolumns
    p_pre = traces.p_pre.reshape(Hi, Mi)
    p_post = traces.p_post.reshape(Hh, Mh)
    joint = traces.p_joint.reshape(Hi, Mi, Hh, Mh)
    out = np.empty((Hh, Hi))
    for lo in range(0, Hh, chunk):
        hi = min(lo + chunk, Hh)
        out[lo:hi] = _pair_scores(p_pre, p_post[lo:hi], joint[:, :, lo:hi, :], eps).T
    return out


def usage_score(
    h_in: int, h_hid: int, traces: TraceState, geom_in: LayerGeometry, geom_hid: LayerGeometry, eps: float
) -> float:
    i = geom_in.units_of(h_in)
    j = geom_hid.units_of(h_hid)
    s = _pair_scores(
        traces.p_pre[i][None, :],
        traces.p_post[j][None, :],
        traces.p_joint[np.ix_(i, j)][None, :, None, :],
        eps,
    )
    return float(s[0, 0])


def rewire_from_scores(mask: ConnectivityMask, scores: np.ndarray, swaps_per_event: int):
    """Swap weakest active inputs for strongest silent ones, strict improvement only.

    Returns the new mask and a list of (hidden hc, dropped input hc, added input hc).
    """
    scores = np.asarray(scores)
    if scores.shape != mask.active.shape:
        raise ContractViolation(f"score table {scores.shape} != mask {mask.active.shape}")
    active = mask.active.copy()
    log = []
    for h in range(active.shape[0]):
        on = np.flatnonzero(active[h])
        off = np.flatnonzero(~active[h])
        n = min(swaps_per_event, on.size, off.size)
        if n == 0:
            continue
        # stable sorts so ties resolve toward lower indices
        worst_on = on[np.argsort(scores[h, on], kind="stable")[:n]]
        best_off = off[np.argsort(-scores[h, off], kind="stable")[:n]]
        for drop, add in zip(worst_on, best_off):
            if scores[h, add] > scores[h, drop]:
                active[h, drop] = False
                active[h, add] = True
                log.append((h, int(drop), int(add)))
    return ConnectivityMask(active), log


def rewire(
    mask: ConnectivityMask,
    traces: TraceState,
    schedule: RewireSchedule,
    eps: float,
    geom_in: LayerGeometry,
    geom_hid: LayerGeometry,
):
    scores = usage_scores(traces, geom_in, geom_hid, eps)
    return rewire_from_scores(mask, scores, schedule.swaps_per_event)


def total_active_score(mask: ConnectivityMask, scores: np.ndarray) -> float:
    return float(scores[mask.active].sum())
