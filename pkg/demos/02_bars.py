"""Unsupervised learning on a toy problem.

Images are single horizontal or vertical bars at random positions.  One
hidden hypercolumn of four minicolumns, fully connected, is trained in rate
mode with bias regulation on.  Afterwards each minicolumn's share of the
activity for either orientation is printed, together with the correlation
of its filter (ON weight minus OFF weight per pixel) with a vertical-minus-
horizontal template, and a text rendering of the filter.

The split is usually partial: one minicolumn tends to respond to most
images while the others pick up subsets.

    python demos/02_bars.py
"""

import numpy as np

from bcpnn import BiasRegulation, LayerGeometry, Network, ProtocolParams, RunMode, SimParams, extract_features, train_unsupervised
from bcpnn.dataio import ImageDataset
from bcpnn.metrics import receptive_fields


def bars(n=60, seed=0):
    rng = np.random.default_rng(seed)
    imgs = np.zeros((n, 28, 28))
    for k in range(n):
        pos = rng.integers(4, 24)
        if k % 2:
            imgs[k, :, pos - 2 : pos + 2] = 1.0
        else:
            imgs[k, pos - 2 : pos + 2, :] = 1.0
    return ImageDataset(imgs.reshape(n, -1), np.arange(n) % 2, "bars")


def show(filt):
    chars = " .:-=+*#%@"
    f = filt[::2, ::2]
    scale = np.abs(f).max() or 1.0
    for row in f:
        print("".join(chars[int(round((len(chars) - 1) * max(v, 0) / scale))] for v in row))


if __name__ == "__main__":
    ds = bars(seed=1)
    params = SimParams(tau_p_ms=1000.0, seed=1)
    net = Network(
        LayerGeometry(784, 2), LayerGeometry(1, 4), params, p_conn=1.0, refresh_every=50,
        init_noise=0.1, bias_regulation=BiasRegulation(),
    )  # fmt: skip
    protocol = ProtocolParams(t_pat_ms=100, t_gap_ms=50, n_epochs=10, n_patterns=60)
    train_unsupervised(net, ds, protocol, RunMode("rate"))

    feats, labels = extract_features(net, ds, RunMode("rate", "frozen"), protocol)
    _, filters = receptive_fields(net)
    vertical = np.zeros((28, 28))
    vertical[:, 12:16] = 1.0
    template = (vertical - vertical.T).reshape(-1)
    for m, filt in enumerate(filters[0]):
        r = np.corrcoef(filt.reshape(-1), template)[0, 1]
        print(
            f"minicolumn {m}: activity share {feats[labels == 1, m].mean():.2f} on vertical, "
            f"{feats[labels == 0, m].mean():.2f} on horizontal bars; template correlation {r:+.2f}"
        )
        show(filt - filt.mean())
        print()
