"""Finite-difference verification of every backward pass.

Runs the whole stack in double precision and compares the analytic
gradient of the scalar log-loss against central differences, parameter
by parameter.
"""

import numpy as np

from .ops import logloss

FD_STEP = 1e-5
MAX_PARAMS = 10_000


def scalar_loss(network, x, y):
    p = network.forward(x)
    loss, _ = logloss(float(np.ravel(p)[0]), y)
    return float(loss)


def grad_check(network, x, y, step=FD_STEP):
    """Max relative error between analytic and central-difference grads.

    Relative error uses denominator max(|analytic|, |numeric|, 1e-8).
    The network must hold float64 parameters and end in a probability
    output.
    """
    params = network.params()
    n_params = sum(p.size for p in params)
    if n_params > MAX_PARAMS:
        raise ValueError(f"network too large for exhaustive check: {n_params} params")
    for p in params:
        if p.dtype != np.float64:
            raise ValueError("gradient checking requires float64 parameters")

    prob = network.forward(x)
    _, dldp = logloss(float(np.ravel(prob)[0]), y)
    seed = np.full_like(np.asarray(prob), float(dldp))
    network.backward(seed)
    analytic = [g.copy() for g in network.grads()]

    worst = 0.0
    for p, g in zip(params, analytic):
        flat = p.reshape(-1)
        gflat = g.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + step
            up = scalar_loss(network, x, y)
            flat[i] = orig - step
            down = scalar_loss(network, x, y)
            flat[i] = orig
            numeric = (up - down) / (2.0 * step)
            denom = max(abs(gflat[i]), abs(numeric), 1e-8)
            worst = max(worst, abs(gflat[i] - numeric) / denom)
    return worst
