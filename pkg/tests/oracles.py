"""Reference computations that share no code with the package's gradient paths."""

import math

import numpy as np


def central_diff(f, x, h=1e-5):
    x = np.array(x, dtype=np.float64)
    g = np.zeros_like(x)
    for ix in np.ndindex(x.shape):
        orig = x[ix]
        x[ix] = orig + h
        fp = f(x)
        x[ix] = orig - h
        fm = f(x)
        x[ix] = orig
        g[ix] = (fp - fm) / (2 * h)
    return g


def rel_err(a, b):
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    scale = max(np.linalg.norm(a), np.linalg.norm(b), 1e-12)
    return float(np.linalg.norm(a - b) / scale)


def cos_py(a, b):
    dot = sum(x * y for x, y in zip(a, b))
    na = math.sqrt(sum(x * x for x in a))
    nb = math.sqrt(sum(y * y for y in b))
    return dot / (na * nb)


def infonce_direct(batch, i, j, tau=1.0):
    """-log(ExpSim(z_i, z_j) / sum_{k != i} ExpSim(z_i, z_k)) in plain Python."""
    rows = [list(map(float, r)) for r in batch]
    num = math.exp(cos_py(rows[i], rows[j]) / tau)
    den = sum(math.exp(cos_py(rows[i], rows[k]) / tau) for k in range(len(rows)) if k != i)
    return -math.log(num / den)


def neg_cos_py(a, b, tau=1.0):
    return -cos_py(a, b) / tau
