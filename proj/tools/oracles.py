#!/usr/bin/env python3
"""Reference values for the unit tests, computed with numpy/scipy.

Run it to regenerate the constants frozen in tests/unit/*.cpp.
"""
import numpy as np
from scipy.linalg import fractional_matrix_power, cholesky

np.set_printoptions(precision=17)


def arccos(g):
    d = np.sqrt(np.diag(g))
    s = np.outer(d, d)
    c = np.clip(g / s, -1.0, 1.0)
    t = np.arccos(c)
    return s / np.pi * (np.sin(t) + (np.pi - t) * c)


def kipf(n, edges):
    a = np.eye(n)
    for u, v in edges:
        a[u, v] = a[v, u] = 1.0
    d = a.sum(1) ** -0.5
    return d[:, None] * a * d[None, :]


def kl(g, k):
    n = g.shape[0]
    return 0.5 * (np.trace(np.linalg.solve(k, g)) - np.linalg.slogdet(g)[1] + np.linalg.slogdet(k)[1] - n)


def cka(k1, k2):
    n = k1.shape[0]
    c = np.eye(n) - np.ones((n, n)) / n
    a, b = c @ k1 @ c, c @ k2 @ c
    return np.sum(a * b) / np.sqrt(np.sum(a * a) * np.sum(b * b))


def show(name, v):
    print(name, "=", repr(np.asarray(v).tolist()))


G = np.array([[2.0, 0.5, -0.3], [0.5, 1.0, 0.2], [-0.3, 0.2, 1.5]])
K = np.array([[1.5, 0.2, 0.0], [0.2, 1.0, 0.1], [0.0, 0.1, 2.0]])
show("arccos(G)", arccos(G))
show("kl(G, K)", kl(G, K))
show("cka(G, K)", cka(G, K))

A = kipf(4, [(0, 1), (1, 2), (1, 3)])
show("kipf star", A)

# Two-layer arccos NNGP on the star graph.
X = np.array([[1.0, 0.0], [0.5, 0.5], [0.0, 1.0], [-0.4, 0.8]])
g = 0.5 * X @ X.T
for _ in range(2):
    g = A @ arccos(g) @ A
show("nngp arccos depth 2", g)

# Linear closed form, 3-node path, lambda 0.5, depth 2.
P = kipf(3, [(0, 1), (1, 2)])
Al = 0.5 * np.eye(3) + 0.5 * P
G0 = np.array([[1.0, 0.3, 0.1], [0.3, 1.2, -0.2], [0.1, -0.2, 0.9]])
Y = np.array([[1.0, 0.0], [0.0, 1.0], [1.0, 0.0]])
Gout = Y @ Y.T / 2 + 0.1 * np.eye(3)
L = 2
Ai = np.linalg.inv(Al)
M1 = np.linalg.matrix_power(Ai, L) @ Gout @ np.linalg.matrix_power(Ai, L)
M2 = Al @ G0 @ Al
grams = []
for l in range(1, L + 1):
    Ap = np.linalg.matrix_power(Al, l - 1)
    Gl = Ap @ np.real(fractional_matrix_power(M1 @ np.linalg.inv(M2), l / (L + 1))) @ M2 @ Ap
    grams.append((Gl + Gl.T) / 2)
    show(f"closed form layer {l}", grams[-1])
obj = -sum(kl(gl, Al @ gp @ Al) for gl, gp in zip(grams + [Gout], [G0] + grams))
show("linear objective", obj)

# Full-rank objective, linear kernel, Gaussian likelihood with noise 1e-3, nu = (1, 2).
G1 = np.array([[1.1, 0.2, 0.0], [0.2, 0.9, 0.1], [0.0, 0.1, 1.3]])
G2 = np.array([[0.8, 0.1, 0.2], [0.1, 1.0, 0.0], [0.2, 0.0, 1.1]])
noise = 1e-3
cov = Al @ G2 @ Al + noise * np.eye(3)
ll = 0.0
for c in range(Y.shape[1]):
    y = Y[:, c]
    ll += -0.5 * (y @ np.linalg.solve(cov, y) + np.linalg.slogdet(cov)[1] + 3 * np.log(2 * np.pi))
full = ll - 1.0 * kl(G1, Al @ G0 @ Al) - 2.0 * kl(G2, Al @ G1 @ Al)
show("full rank objective", full)
show("gaussian loglik", ll)

# Parameterized KL shortcut.
Lp = np.array([[1.2, 0, 0], [0.3, 0.8, 0], [-0.1, 0.4, 1.1]])
H = cholesky(K, lower=True)
Gp = H @ Lp @ Lp.T @ H.T
show("gram_from_params", Gp)
show("kl(Gp, K)", kl(Gp, K))
