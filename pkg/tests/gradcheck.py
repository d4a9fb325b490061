"""Finite-difference probe of the full penalised objective through the model."""
import numpy as np

from abmgc.boid import sample_world, simulate
from abmgc.core import Rng
from abmgc.training import TrainConfig, setup


def objective_probes(n_probes=100, seed=0, step=1e-5, learn_d_ignore=True):
    """Return (analytic, finite-difference) gradient pairs for random parameter entries."""
    series = simulate(sample_world(4, Rng(seed)), 30)
    cfg = TrainConfig(K=2, lam=0.3, beta=0.7, gamma=2.0, hidden=6, seed=seed, a_v=3.0,
                      learn_d_ignore=learn_d_ignore)
    model, batch, obj, _ = setup(series, cfg)
    if learn_d_ignore:
        model.d_ignore[0] = 0.4

    def total():
        fwd = model.forward(batch)
        return obj(fwd.psi, fwd.pred, batch.y, grad=False)[0].total

    fwd = model.forward(batch)
    loss, g_psi, g_pred = obj(fwd.psi, fwd.pred, batch.y)
    grads = model.backward(batch, fwd, g_pred, g_psi)
    params = model.params()
    names = sorted(params)
    sizes = np.array([params[k].size for k in names], float)
    g = np.random.default_rng(seed + 1)
    pairs = []
    for n in range(n_probes):
        # every 20th probe hits the navigation offset so the sigmoid chain is covered
        if "d_ignore" in params and n % 20 == 0:
            name = "d_ignore"
        else:
            name = names[g.choice(len(names), p=sizes / sizes.sum())]
        flat = params[name].reshape(-1)
        idx = int(g.integers(flat.size))
        old = flat[idx]
        flat[idx] = old + step
        up = total()
        flat[idx] = old - step
        down = total()
        flat[idx] = old
        pairs.append((grads[name].reshape(-1)[idx], (up - down) / (2 * step)))
    return np.array(pairs)


def relative_errors(pairs, floor=1e-8):
    a, f = pairs[:, 0], pairs[:, 1]
    return np.abs(a - f) / np.maximum(np.maximum(np.abs(a), np.abs(f)), floor)
