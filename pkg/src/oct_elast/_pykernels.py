"""Numpy implementations of the Born-sum kernels (fallback for the compiled module)."""

from __future__ import annotations

import numpy as np

from .spectra import form_factor

_CHUNK = 64


def born_sum_formfactor(pos, x3, kappa, R):
    pos = np.asarray(pos, dtype=float)
    if pos.shape[0] == 0:
        return 0j
    X = np.column_stack([-pos[:, 0], -pos[:, 1], x3 - pos[:, 2]])
    d = np.sqrt(np.einsum("ij,ij->i", X, X))
    cosb = X[:, 2] / d
    g = np.exp(1j * kappa * d) / (4 * np.pi * d)
    h = form_factor(R * kappa * np.sqrt(2.0 * (1.0 + cosb)) + 0j)
    terms = np.exp(-1j * kappa * pos[:, 2]) * g * (4 * np.pi * R**3) * h
    acc = 0j
    for t in terms:  # same left-to-right order as the compiled loop
        acc += t
    return acc


def born_sum_quadrature(pos, x3, kappa, r, wr, ct, wt, cphi, wphi):
    pos = np.asarray(pos, dtype=float)
    r, wr, ct, wt, cphi, wphi = (np.asarray(v, dtype=float) for v in (r, wr, ct, wt, cphi, wphi))
    st = np.sqrt(1.0 - ct**2)
    u3 = r[:, None] * ct[None, :]  # (nr, nt)
    w_rt = wr[:, None] * wt[None, :] * (r**2)[:, None]
    ph = np.exp(-1j * kappa * u3)
    acc = 0j
    for start in range(0, pos.shape[0], _CHUNK):
        p = pos[start : start + _CHUNK]
        X1, X2, X3 = -p[:, 0], -p[:, 1], x3 - p[:, 2]
        rho = np.hypot(X1, X2)
        XX = X1**2 + X2**2 + X3**2
        base = XX[:, None, None] + (r**2)[None, :, None] - 2.0 * X3[:, None, None] * u3[None]
        cross = 2.0 * rho[:, None, None, None] * (r[:, None] * st[None, :])[None, :, :, None] * cphi
        dist = np.sqrt(base[..., None] - cross)
        inner = np.sum(wphi * np.exp(1j * kappa * dist) / dist, axis=-1)
        ball = np.sum(w_rt * ph * inner, axis=(1, 2))
        for v in np.exp(-1j * kappa * p[:, 2]) * ball / (4 * np.pi):
            acc += v
    return acc
