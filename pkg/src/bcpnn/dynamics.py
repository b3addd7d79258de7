"""Model equations of the spiking BCPNN, discretized with forward Euler.

All public functions are pure: they validate their inputs, copy, and return
new arrays.  The ``_*_inplace`` kernels underneath are numba-compiled and are
the same ones the engine's inner loop calls, so there is one implementation
of each update.

Discrete updates at time step ``dt`` (all times in ms)::

    z'      = (1 - dt/tau_z) z + s
    p'      = p + (dt/tau_p) (z - p)
    p_ij'   = p_ij + (dt/tau_p) (z_i z_j - p_ij)
    b_j     = log p_j
    w_ij    = log p_ij / (p_i p_j)
    I'      = I + (dt/tau_z) (b - I) + sum_i s_i w_ij c_ij
    pi      = softmax(I) within each hypercolumn
    P(s=1)  = pi * f_max * dt / 1000
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numba as nb
import numpy as np

from .errors import ContractViolation, ConfigError
from .rng import CounterStream, counter_uniform


@dataclass(frozen=True)
class SimParams:
    dt_ms: float = 1.0
    tau_z_ms: float = 20.0
    tau_p_ms: float = 5000.0
    f_max_hz: float = 50.0
    eps: float = 1e-6
    seed: int = 0

    def __post_init__(self):
        if not self.dt_ms > 0:
            raise ConfigError(f"dt_ms must be > 0, got {self.dt_ms}")
        if self.tau_z_ms < self.dt_ms:
            raise ConfigError(f"tau_z_ms ({self.tau_z_ms}) must be >= dt_ms ({self.dt_ms})")
        if self.tau_p_ms < self.tau_z_ms:
            raise ConfigError(f"tau_p_ms ({self.tau_p_ms}) must be >= tau_z_ms ({self.tau_z_ms})")
        if self.f_max_hz < 0:
            raise ConfigError(f"f_max_hz must be >= 0, got {self.f_max_hz}")
        if self.spike_scale > 1.0:
            raise ConfigError(
                f"f_max_hz * dt_ms / 1000 = {self.spike_scale:g} > 1; not a valid per-step probability"
            )
        if not 0 < self.eps <= 1e-2:
            raise ConfigError(f"eps must be in (0, 1e-2], got {self.eps}")

    @property
    def spike_scale(self) -> float:
        """Per-step spike probability of a unit with activation 1."""
        return self.f_max_hz * self.dt_ms / 1000.0

    @property
    def z_decay(self) -> float:
        return 1.0 - self.dt_ms / self.tau_z_ms

    @property
    def support_leak(self) -> float:
        return self.dt_ms / self.tau_z_ms

    @property
    def p_rate(self) -> float:
        return self.dt_ms / self.tau_p_ms

    @property
    def z_max(self) -> float:
        """Upper bound of a Z trace when a unit spikes at most once per step."""
        return self.tau_z_ms / self.dt_ms

    def with_(self, **changes) -> "SimParams":
        return replace(self, **changes)


@dataclass
class TraceState:
    z_pre: np.ndarray
    z_post: np.ndarray
    p_pre: np.ndarray
    p_post: np.ndarray
    p_joint: np.ndarray

    @classmethod
    def uniform(cls, n_pre: int, m_pre: int, n_post: int, m_post: int) -> "TraceState":
        """Zero Z traces; P traces at the uniform prior of each hypercolumn."""
        return cls(
            z_pre=np.zeros(n_pre),
            z_post=np.zeros(n_post),
            p_pre=np.full(n_pre, 1.0 / m_pre),
            p_post=np.full(n_post, 1.0 / m_post),
            p_joint=np.full((n_pre, n_post), 1.0 / (m_pre * m_post)),
        )

    def copy(self) -> "TraceState":
        return TraceState(*(a.copy() for a in (self.z_pre, self.z_post, self.p_pre, self.p_post, self.p_joint)))


@dataclass
class NeuronState:
    support: np.ndarray
    activation: np.ndarray


# -- compiled kernels ---------------------------------------------------------


# Z values below this are set to zero; long silent stretches would otherwise
# decay into subnormal floats, which are very slow to compute with.
Z_FLUSH = 1e-30


@nb.njit(cache=True)
def _update_z_inplace(z, s, decay):
    for k in range(z.shape[0]):
        v = decay * z[k] + s[k]
        z[k] = v if v >= Z_FLUSH else 0.0


@nb.njit(cache=True)
def _low_pass_inplace(p, z, rate):
    for k in range(p.shape[0]):
        p[k] = p[k] + rate * (z[k] - p[k])


@nb.njit(cache=True)
def _leak_inplace(support, bias, leak):
    for k in range(support.shape[0]):
        support[k] = support[k] + leak * (bias[k] - support[k])


@nb.njit(cache=True)
def _softmax_inplace(support, m, out):
    n_hc = support.shape[0] // m
    for h in range(n_hc):
        lo = h * m
        top = support[lo]
        for k in range(lo + 1, lo + m):
            if support[k] > top:
                top = support[k]
        total = 0.0
        for k in range(lo, lo + m):
            d = support[k] - top
            # exp(-69) < Z_FLUSH; skip subnormal results
            e = np.exp(d) if d > -69.0 else 0.0
            out[k] = e
            total += e
        inv = 1.0 / total
        for k in range(lo, lo + m):
            out[k] *= inv


@nb.njit(cache=True)
def _sample_inplace(activation, scale, keys, step, out):
    for k in range(activation.shape[0]):
        out[k] = 1 if counter_uniform(keys[k], step) < activation[k] * scale else 0


# -- public operations ----------------------------------------------------------


def _check_binary(spikes, name="spikes"):
    s = np.asarray(spikes)
    if s.size and not np.all((s == 0) | (s == 1)):
        raise ContractViolation(f"{name} must be binary")
    return s


def update_z(z, spikes, params: SimParams) -> np.ndarray:
    """One Euler step of a Z trace; each spike adds exactly 1."""
    z = np.array(z, dtype=np.float64)
    s = _check_binary(spikes)
    if z.shape != s.shape:
        raise ContractViolation(f"trace length {z.shape} != spike vector length {s.shape}")
    _update_z_inplace(z.reshape(-1), s.reshape(-1).astype(np.float64), params.z_decay)
    return z


def update_p(traces: TraceState, params: SimParams) -> TraceState:
    """One Euler step of all P traces, including pairs with no active connection."""
    if traces.p_joint.shape != (traces.z_pre.size, traces.z_post.size):
        raise ContractViolation(
            f"p_joint shape {traces.p_joint.shape} does not match "
            f"({traces.z_pre.size}, {traces.z_post.size})"
        )
    r = params.p_rate
    out = traces.copy()
    _low_pass_inplace(out.p_pre, traces.z_pre, r)
    _low_pass_inplace(out.p_post, traces.z_post, r)
    out.p_joint += r * (np.outer(traces.z_pre, traces.z_post) - traces.p_joint)
    return out


def accumulate_joint(p_joint: np.ndarray, z_pre_hist: np.ndarray, z_post_hist: np.ndarray, params: SimParams):
    """Apply B consecutive p_joint Euler steps in place as one matrix product.

    ``z_pre_hist`` is (B, n_pre) and ``z_post_hist`` is (B, n_post), row k
    holding the Z traces after step k.  Equal to B calls of ``update_p`` on
    the joint trace up to rounding.
    """
    n = z_pre_hist.shape[0]
    if n == 0:
        return p_joint
    keep = 1.0 - params.p_rate
    coef = params.p_rate * keep ** np.arange(n - 1, -1, -1, dtype=np.float64)
    p_joint *= keep**n
    p_joint += (z_pre_hist * coef[:, None]).T @ z_post_hist
    return p_joint


def compute_bias(p_post, eps: float):
    return np.log(np.maximum(p_post, eps))


def compute_weight(p_pre, p_post, p_joint, eps: float):
    """log P_ij / (P_i P_j) with floors eps (marginals) and eps**2 (joint).

    Broadcasts, so ``compute_weight(p_pre[:, None], p_post[None, :], p_joint, eps)``
    gives the full matrix.
    """
    return (
        np.log(np.maximum(p_joint, eps * eps))
        - np.log(np.maximum(p_pre, eps))
        - np.log(np.maximum(p_post, eps))
    )


def integrate_support(support, bias, spikes_in, weights, conn_mask, params: SimParams) -> np.ndarray:
    """One Euler step of the support; each presynaptic spike deposits w_ij c_ij.

    ``spikes_in`` may also be a real-valued presynaptic signal (rate mode).
    """
    support = np.array(support, dtype=np.float64)
    weights = np.asarray(weights)
    s = np.asarray(spikes_in, dtype=np.float64)
    if weights.shape != (s.size, support.size):
        raise ContractViolation(f"weights shape {weights.shape} != ({s.size}, {support.size})")
    if np.shape(conn_mask) != weights.shape:
        raise ContractViolation(f"mask shape {np.shape(conn_mask)} != weights shape {weights.shape}")
    _leak_inplace(support, np.asarray(bias, dtype=np.float64), params.support_leak)
    support += s @ (weights * conn_mask)
    return support


def hypercolumn_softmax(support, geometry) -> np.ndarray:
    support = np.ascontiguousarray(support, dtype=np.float64)
    m = geometry.n_minicolumns
    if support.size != geometry.n_units:
        raise ContractViolation(f"support has {support.size} entries, geometry has {geometry.n_units} units")
    if np.isnan(support).any():
        raise ContractViolation("support contains NaN")
    out = np.empty_like(support)
    _softmax_inplace(support, m, out)
    return out


def sample_spikes(activation, params: SimParams, stream: CounterStream, step: int) -> np.ndarray:
    """Bernoulli spikes with probability activation * f_max * dt.

    Unit k draws from ``stream`` substream k at counter ``step``.
    """
    a = np.ascontiguousarray(activation, dtype=np.float64)
    if a.size != len(stream):
        raise ContractViolation(f"{a.size} activations but stream covers {len(stream)} units")
    if a.size and (a.min() < 0 or a.max() > 1):
        raise ContractViolation("activation outside [0, 1]")
    if a.size and a.max() * params.spike_scale > 1.0 + 1e-12:
        raise ContractViolation("spike probability exceeds 1")
    out = np.empty(a.size, dtype=np.uint8)
    _sample_inplace(a, params.spike_scale, stream.keys, np.uint64(step), out)
    return out
