import numpy as np
import pytest

from bcpnn.dataio import ImageDataset
from bcpnn.dynamics import SimParams
from bcpnn.engine import (
    BiasRegulation,
    Network,
    ProtocolParams,
    RunMode,
    encode_input,
    extract_features,
    new_recording,
    present_pattern,
    step,
    train_unsupervised,
    write_training_log,
)
from bcpnn.errors import ConfigError, ContractViolation
from bcpnn.topology import LayerGeometry, RewireSchedule

RATE = RunMode("rate")
SPIKING = RunMode("spiking")


def _dataset(n=12, seed=0):
    rng = np.random.default_rng(seed)
    imgs = np.zeros((n, 784))
    for k in range(n):
        img = np.zeros((28, 28))
        pos = rng.integers(4, 24)
        if k % 2:
            img[:, pos - 2 : pos + 2] = 1.0
        else:
            img[pos - 2 : pos + 2, :] = 1.0
        imgs[k] = img.reshape(-1)
    return ImageDataset(imgs, np.arange(n) % 2)


def _net(h=3, m=4, seed=0, **kw):
    kw.setdefault("refresh_every", 20)
    kw.setdefault("init_noise", 0.1)
    return Network(LayerGeometry(784, 2), LayerGeometry(h, m), SimParams(seed=seed), **kw)


SHORT = ProtocolParams(t_pat_ms=40, t_gap_ms=20, n_epochs=2, n_patterns=12)


# -- input encoding -----------------------------------------------------------


def test_encode_input_complement():
    np.testing.assert_array_equal(encode_input([0.0, 1.0, 0.25]), [0.0, 1.0, 1.0, 0.0, 0.25, 0.75])


def test_encode_input_rejects_out_of_range():
    for bad in ([1.5], [-0.1], [np.nan]):
        with pytest.raises(ContractViolation):
            encode_input(bad)


def test_protocol_validation():
    with pytest.raises(ConfigError):
        ProtocolParams(t_pat_ms=0.5).validate(SimParams())
    with pytest.raises(ConfigError):
        ProtocolParams(t_gap_ms=-1).validate(SimParams())
    with pytest.raises(ConfigError):
        _net(refresh_every=0)
    with pytest.raises(ConfigError):
        BiasRegulation(usage_min=1.5)


# -- single steps -------------------------------------------------------------


def test_frozen_step_leaves_traces_untouched():
    net = _net()
    p_joint, p_post = net.traces.p_joint.copy(), net.traces.p_post.copy()
    for _ in range(30):
        step(net, encode_input(np.full(784, 0.3)), SPIKING.frozen())
    np.testing.assert_array_equal(net.traces.p_joint, p_joint)
    np.testing.assert_array_equal(net.traces.p_post, p_post)
    assert net.t == 30


def test_learning_step_moves_traces():
    net = _net(refresh_every=1)
    before = net.traces.p_pre.copy()
    step(net, encode_input(np.full(784, 1.0)), RATE)
    # ON units drift up from 0.5, OFF units down
    assert np.all(net.traces.p_pre[0::2] > before[0::2])
    assert np.all(net.traces.p_pre[1::2] < before[1::2])


def test_wrong_input_size_rejected():
    with pytest.raises(ContractViolation):
        step(_net(), np.zeros(10), RATE)


def test_rate_mode_support_reaches_fixed_point():
    net = _net(init_noise=0.3)
    x = encode_input(np.random.default_rng(0).random(784))
    net.run(2000, x, RATE.frozen())
    np.testing.assert_allclose(net.support, net.bias + x @ net.weights, atol=1e-9)
    sums = net.activation.reshape(3, 4).sum(axis=1)
    np.testing.assert_allclose(sums, 1.0, atol=1e-12)


def test_gap_returns_support_to_bias_in_rate_mode():
    net = _net(init_noise=0.3)
    x = encode_input(np.random.default_rng(1).random(784))
    present_pattern(net, x[0::2], RATE.frozen(), ProtocolParams(t_pat_ms=50, t_gap_ms=400))
    assert np.max(np.abs(net.support - net.bias)) < 1e-3


def test_spiking_with_unit_probability_scale_follows_rates():
    # f_max * dt = 1000 Hz * 1 ms: each unit spikes with probability pi per tick
    params = SimParams(f_max_hz=1000.0, seed=4)
    net = Network(LayerGeometry(784, 2), LayerGeometry(2, 2), params, init_noise=0.0)
    img = np.random.default_rng(2).random(784)
    x = encode_input(img)
    n = 4000
    counts = np.zeros(net.geom_in.n_units)
    for _ in range(n):
        step(net, x, SPIKING.frozen())
        counts += net.spikes_in
    freq = counts / n
    se = np.sqrt(x * (1 - x) / n)
    assert np.mean(np.abs(freq - x) <= 4 * se + 1e-12) > 0.999


# -- pattern presentation -----------------------------------------------------


def test_present_pattern_step_bookkeeping():
    net = _net()
    rec = new_recording(net, [0, 5], 300)
    s = present_pattern(net, np.full(784, 0.5), SPIKING, ProtocolParams(), record=rec)
    assert (s.pattern_steps, s.gap_steps) == (200, 100)
    assert net.t == 300
    assert rec.t0_step == 300
    # counts cover the pattern window only
    assert s.spike_counts[[0, 5]].tolist() == rec.spikes[:200].sum(axis=0).tolist()
    assert np.all(s.mean_activation >= 0) and np.all(s.mean_activation <= 1)


def test_zero_gap_protocol():
    net = _net()
    s = present_pattern(net, np.full(784, 0.5), RATE, ProtocolParams(t_pat_ms=30, t_gap_ms=0))
    assert s.gap_steps == 0 and net.t == 30


def test_gap_is_frozen_by_default_and_learns_when_enabled():
    img = np.full(784, 0.5)
    proto = ProtocolParams(t_pat_ms=20, t_gap_ms=20)
    a, b = _net(refresh_every=1), _net(refresh_every=1)
    present_pattern(a, img, RATE, proto)
    present_pattern(b, img, RATE, ProtocolParams(t_pat_ms=20, t_gap_ms=20, gap_plasticity=True))
    p_after_pattern = _net(refresh_every=1)
    present_pattern(p_after_pattern, img, RATE, ProtocolParams(t_pat_ms=20, t_gap_ms=0))
    np.testing.assert_array_equal(a.traces.p_post, p_after_pattern.traces.p_post)
    assert not np.array_equal(b.traces.p_post, a.traces.p_post)


# -- training -----------------------------------------------------------------


def test_zero_epochs_leaves_network_unchanged():
    net = _net()
    joint, w = net.traces.p_joint.copy(), net.weights.copy()
    log = train_unsupervised(net, _dataset(), ProtocolParams(n_epochs=0), RATE)
    assert log == []
    np.testing.assert_array_equal(net.traces.p_joint, joint)
    np.testing.assert_array_equal(net.weights, w)
    assert net.t == 0


def test_training_requires_learning_and_matching_data():
    with pytest.raises(ContractViolation):
        train_unsupervised(_net(), _dataset(), SHORT, RATE.frozen())
    bad = ImageDataset(np.zeros((2, 100)), np.zeros(2))
    with pytest.raises(ContractViolation):
        train_unsupervised(_net(), bad, SHORT, RATE)


def test_training_log_rows(tmp_path):
    net = _net(bias_regulation=BiasRegulation())
    log = train_unsupervised(net, _dataset(), SHORT, SPIKING, RewireSchedule(interval_steps=300))
    assert [r.epoch for r in log] == [0, 1]
    assert all(0 < r.mean_rate_hz < 50 for r in log)
    # 12 patterns of 60 ms per epoch: two rewiring events per epoch
    assert log[-1].n_swaps >= log[0].n_swaps >= 0
    write_training_log(log, tmp_path / "log.csv")
    lines = (tmp_path / "log.csv").read_text().splitlines()
    assert lines[0] == "epoch,mean_rate_hz,n_swaps,wall_time_s"
    assert len(lines) == 3


def test_rewiring_conserves_fan_in_during_training():
    net = _net(h=4, bias_regulation=BiasRegulation())
    train_unsupervised(net, _dataset(), SHORT, RATE, RewireSchedule(interval_steps=60, swaps_per_event=3))
    np.testing.assert_array_equal(net.mask.active.sum(axis=1), 78)
    # weights of inactive connections are zero
    assert np.all(net.weights[~net.conn_mask] == 0)


def _train(seed, mode=SPIKING, stop_after=None, net=None):
    net = _net(seed=seed, refresh_every=30, bias_regulation=BiasRegulation()) if net is None else net
    log = train_unsupervised(net, _dataset(), SHORT, mode, RewireSchedule(interval_steps=200), stop_after=stop_after)
    return net, log


def _state(net):
    tr = net.traces
    return [tr.z_pre, tr.z_post, tr.p_pre, tr.p_post, tr.p_joint, net.weights, net.bias, net.support, net.mask.active]


def test_same_seed_is_bit_identical_and_seed_matters():
    a, la = _train(3)
    b, lb = _train(3)
    c, _ = _train(4)
    for x, y in zip(_state(a), _state(b)):
        np.testing.assert_array_equal(x, y)
    assert [(r.epoch, r.mean_rate_hz, r.n_swaps) for r in la] == [(r.epoch, r.mean_rate_hz, r.n_swaps) for r in lb]
    assert not np.array_equal(a.traces.p_joint, c.traces.p_joint)


@pytest.mark.parametrize("mode", [SPIKING, RATE])
def test_checkpoint_mid_training_continues_bit_identically(tmp_path, mode):
    ref, ref_log = _train(5, mode)
    part, _ = _train(5, mode, stop_after=17)
    assert part.pending > 0
    part.save(tmp_path / "ck.zip")
    resumed = Network.load(tmp_path / "ck.zip")
    _, log = _train(5, mode, net=resumed)
    for x, y in zip(_state(ref), _state(resumed)):
        np.testing.assert_array_equal(x, y)
    assert [(r.mean_rate_hz, r.n_swaps) for r in log] == [(r.mean_rate_hz, r.n_swaps) for r in ref_log[1:]]


def test_checkpoint_bytes_are_deterministic(tmp_path):
    net, _ = _train(6, stop_after=5)
    net.save(tmp_path / "a.zip")
    Network.load(tmp_path / "a.zip").save(tmp_path / "b.zip")
    assert (tmp_path / "a.zip").read_bytes() == (tmp_path / "b.zip").read_bytes()


def test_load_rejects_foreign_zip(tmp_path):
    import zipfile

    with zipfile.ZipFile(tmp_path / "x.zip", "w") as zf:
        zf.writestr("header.json", '{"format": "other"}')
    with pytest.raises(ContractViolation):
        Network.load(tmp_path / "x.zip")


# -- features -----------------------------------------------------------------


def test_extract_features_is_frozen_and_shaped():
    net, _ = _train(7, RATE)
    joint = net.traces.p_joint.copy()
    ds = _dataset(6, seed=1)
    feats, labels = extract_features(net, ds, RATE.frozen(), SHORT)
    np.testing.assert_array_equal(net.traces.p_joint, joint)
    assert feats.shape == (6, 12)
    np.testing.assert_array_equal(labels, ds.labels)
    # rate features are mean activations: they sum to 1 in every hypercolumn
    np.testing.assert_allclose(feats.reshape(6, 3, 4).sum(axis=2), 1.0, atol=1e-12)
    with pytest.raises(ContractViolation):
        extract_features(net, ds, RATE, SHORT)


def test_spiking_features_are_normalized_counts():
    net, _ = _train(8)
    feats, _ = extract_features(net, _dataset(4), SPIKING.frozen(), SHORT)
    assert np.all(feats >= 0)
    # a 40 ms window at 50 Hz gives 2 spikes at f_max; feats are counts / 2
    np.testing.assert_allclose(feats * 2, np.round(feats * 2))
