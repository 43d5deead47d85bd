"""Damped Gauss-Newton for small real parameter vectors."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class GNResult:
    x: np.ndarray
    cost: float
    iterations: int
    converged: bool


def _as_real(r):
    r = np.asarray(r)
    if np.iscomplexobj(r):
        return np.concatenate([r.real.ravel(), r.imag.ravel()])
    return r.ravel().astype(float)


def fd_jacobian(fun, x, r0, scale):
    J = np.empty((r0.size, x.size))
    for i in range(x.size):
        h = 1e-7 * max(abs(x[i]), scale[i])
        xp = x.copy()
        xm = x.copy()
        xp[i] += h
        xm[i] -= h
        J[:, i] = (_as_real(fun(xp)) - _as_real(fun(xm))) / (2 * h)
    return J


def gauss_newton(fun, x0, *, scale=None, max_iter: int = 20, rtol: float = 1e-10, floor: float = 1e-8, project=None) -> GNResult:
    """Minimize ``||fun(x)||^2`` with a multiplicative trust factor on the Gauss-Newton step.

    The factor starts at 1, is halved whenever a step does not lower the cost
    (down to ``floor``) and doubled (up to 1) after a success. Iteration stops
    when the accepted update is below ``rtol`` relative to ``|x|`` (per
    component, against ``scale`` for components near zero). ``project`` may
    map a trial point back into the admissible set.
    """
    x = np.asarray(x0, dtype=float).copy()
    scale = np.ones_like(x) if scale is None else np.asarray(scale, dtype=float)
    r = _as_real(fun(x))
    cost = float(r @ r)
    lam = 1.0
    for it in range(1, max_iter + 1):
        if cost == 0.0:
            return GNResult(x, cost, it - 1, True)
        J = fd_jacobian(fun, x, r, scale)
        colnorm = np.linalg.norm(J, axis=0)
        colnorm[colnorm == 0] = 1.0
        step, *_ = np.linalg.lstsq(J / colnorm, -r, rcond=None)
        step /= colnorm
        accepted = False
        while lam >= floor:
            trial = x + lam * step
            if project is not None:
                trial = project(trial)
            rt = _as_real(fun(trial))
            ct = float(rt @ rt)
            if np.isfinite(ct) and ct < cost:
                accepted = True
                break
            lam *= 0.5
        if not accepted:
            # no descent along the step: at the noise floor or stuck
            return GNResult(x, cost, it, bool(np.all(np.abs(step) <= 1e3 * rtol * np.maximum(np.abs(x), scale))))
        dx = trial - x
        x, r, cost = trial, rt, ct
        lam = min(1.0, 2.0 * lam)
        if np.all(np.abs(dx) <= rtol * np.maximum(np.abs(x), scale)):
            return GNResult(x, cost, it, True)
    return GNResult(x, cost, max_iter, False)
