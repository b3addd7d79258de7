"""Traces of a single synapse under Bernoulli spiking.

A presynaptic unit fires at 40 Hz and a postsynaptic unit at 10 Hz, either
independently or with the postsynaptic spikes copied from a subset of the
presynaptic ones.  The P traces estimate the marginal and joint firing
probabilities, and the weight log(P_ij / (P_i P_j)) separates the two cases:
about zero for independent units, positive for correlated ones.

    python demos/01_traces.py
"""

import numpy as np

from bcpnn.dynamics import SimParams, TraceState, compute_weight, sample_spikes, update_p, update_z
from bcpnn.rng import CounterStream

params = SimParams(tau_z_ms=20.0, tau_p_ms=5000.0, f_max_hz=50.0)
n_steps = 60_000


def run(correlated: bool) -> float:
    pre_stream = CounterStream(1, 1, 1)
    post_stream = CounterStream(1, 2, 1)
    tr = TraceState.uniform(1, 1, 1, 1)
    tr.p_pre[:] = tr.p_post[:] = tr.p_joint[:] = 0.0
    for t in range(n_steps):
        s_pre = sample_spikes(np.array([0.8]), params, pre_stream, t)
        if correlated:
            s_post = s_pre & sample_spikes(np.array([0.25]), SimParams(f_max_hz=1000.0), post_stream, t)
        else:
            s_post = sample_spikes(np.array([0.2]), params, post_stream, t)
        tr.z_pre = update_z(tr.z_pre, s_pre, params)
        tr.z_post = update_z(tr.z_post, s_post, params)
        tr = update_p(tr, params)
    w = compute_weight(tr.p_pre[0], tr.p_post[0], tr.p_joint[0, 0], params.eps)
    print(
        f"{'correlated ' if correlated else 'independent'}: "
        f"P_i={tr.p_pre[0]:.3f}  P_j={tr.p_post[0]:.3f}  P_ij={tr.p_joint[0, 0]:.3f}  w={w:+.3f}"
    )
    return w


if __name__ == "__main__":
    print(f"{n_steps / 1000:.0f} s of simulated time, tau_z={params.tau_z_ms} ms, tau_p={params.tau_p_ms} ms")
    run(False)
    run(True)
