"""Regenerates oracles.json: seeded random inputs with reference outputs
evaluated in 50-digit arithmetic.

    python3 gen_oracles.py > oracles.json
"""

import json

import mpmath as mp
import numpy as np

mp.mp.dps = 50
N = 1000
rng = np.random.default_rng(20240917)


def log_uniform(lo, hi, n):
    return np.exp(rng.uniform(np.log(lo), np.log(hi), n))


def f(x):
    return float(x)


def posterior(y, phi_n, xi, alpha):
    y, phi_n, xi, alpha = map(mp.mpf, (y, phi_n, xi, alpha))
    return 1 / (1 + alpha * (1 + xi) * mp.exp(-(y / phi_n) * xi / (1 + xi)))


def target(y, phi_x, phi_n, eps=1e-10):
    y, phi_x, phi_n = map(mp.mpf, (y, phi_x, phi_n))
    xi = phi_x / phi_n
    if xi < mp.mpf(eps):
        return mp.mpf(0)
    return 1 / (1 + (1 + 1 / xi) * mp.exp(-(y / phi_n) * xi / (1 + xi)))


def gain(xi, gamma):
    xi, gamma = mp.mpf(xi), mp.mpf(gamma)
    v = gamma * xi / (1 + xi)
    if v <= 0:
        return mp.mpf(1)
    return min(mp.mpf(1), xi / (1 + xi) * mp.exp(mp.e1(v) / 2))


def log_err(r, e):
    terms = [abs(10 * mp.log10(mp.mpf(a) / mp.mpf(b))) for a, b in zip(r, e)]
    return mp.fsum(terms) / len(terms)


def kl(t, e, full, eps=mp.mpf("1e-7")):
    terms = []
    for t0, e0 in zip(t, e):
        tc = min(max(mp.mpf(t0), eps), 1 - eps)
        ec = min(max(mp.mpf(e0), eps), 1 - eps)
        if full:
            terms.append(tc * mp.log(tc / ec) + (1 - tc) * mp.log((1 - tc) / (1 - ec)))
        elif t0 == 0:
            terms.append(mp.mpf(0))
        else:
            terms.append(tc * mp.log(tc / ec))
    return mp.fsum(terms) / len(terms)


def prob_matrix(shape):
    m = rng.uniform(0, 1, shape)
    m[rng.uniform(size=shape) < 0.15] = 0.0
    m[rng.uniform(size=shape) < 0.05] = 1.0
    return m


out = {}

y, phi_n = log_uniform(1e-6, 1e3, N), log_uniform(1e-4, 1e2, N)
xi, alpha = 10 ** rng.uniform(-1.0, 3.0, N), log_uniform(0.1, 10.0, N)
y = y * phi_n
out["posterior"] = [
    {"y": f(a), "phi_n": f(b), "xi": f(c), "alpha": f(d), "p": f(posterior(a, b, c, d))}
    for a, b, c, d in zip(y, phi_n, xi, alpha)
]

phi_n = log_uniform(1e-4, 1e2, N)
phi_x = phi_n * log_uniform(1e-3, 1e3, N)
phi_x[:50] = 0.0
y = (phi_x + phi_n) * log_uniform(1e-3, 20.0, N)
out["target"] = [
    {"y": f(a), "phi_x": f(b), "phi_n": f(c), "p": f(target(a, b, c))} for a, b, c in zip(y, phi_x, phi_n)
]

xi = log_uniform(10 ** -2.5, 1e3, N)
gamma = log_uniform(1e-3, 1e3, N)
out["lsa_gain"] = [{"xi": f(a), "gamma": f(b), "g": f(gain(a, b))} for a, b in zip(xi, gamma)]

v = log_uniform(1e-6, 50.0, N)
out["e1"] = [{"v": f(a), "e1": f(mp.e1(a))} for a in v]

cases = []
for _ in range(N):
    r, e = log_uniform(1e-8, 1e4, 12), log_uniform(1e-8, 1e4, 12)
    cases.append({"reference": [f(a) for a in r], "estimate": [f(a) for a in e], "value": f(log_err(r, e))})
out["log_err"] = cases

cases = []
for _ in range(N):
    t, e = prob_matrix(12), prob_matrix(12)
    cases.append(
        {
            "target": [f(a) for a in t],
            "estimate": [f(a) for a in e],
            "target_term": f(kl(t, e, False)),
            "full_binary": f(kl(t, e, True)),
        }
    )
out["kl"] = cases

print(json.dumps(out))
