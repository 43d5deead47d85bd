"""Dispersion models, complex refractive indices, contrast and the ball form factor.

Frequencies are angular (rad/s in whatever time unit the scenario uses) and
everything is vectorized over numpy arrays of frequencies.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Union

import numpy as np

from .errors import BranchAmbiguity, DegenerateBackground, OutOfBand, SchemaError


@dataclass(frozen=True)
class Constant:
    """Frequency independent susceptibility."""

    chi: complex

    def __call__(self, omega):
        omega = np.asarray(omega, dtype=float)
        return np.full(omega.shape, complex(self.chi)) if omega.ndim else complex(self.chi)


@dataclass(frozen=True)
class Lorentz:
    """Single Lorentz oscillator ``s * w_r**2 / (w_r**2 - w**2 - i*gamma*w)``.

    Passive (Im chi >= 0 for w >= 0) whenever ``gamma > 0`` and ``s >= 0``.
    """

    s: float
    omega_r: float
    gamma: float

    def __call__(self, omega):
        omega = np.asarray(omega, dtype=float)
        wr2 = self.omega_r**2
        out = self.s * wr2 / (wr2 - omega**2 - 1j * self.gamma * omega)
        return out if out.ndim else complex(out)


@dataclass(frozen=True, eq=False)
class Tabulated:
    """Samples ``(omega, chi)`` interpolated linearly in real and imaginary part."""

    omegas: np.ndarray
    chi: np.ndarray

    def __post_init__(self):
        omegas = np.asarray(self.omegas, dtype=float)
        chi = np.asarray(self.chi, dtype=complex)
        if omegas.ndim != 1 or omegas.shape != chi.shape or omegas.size < 2:
            raise ValueError("tabulated model needs matching 1-d sample arrays (>= 2 points)")
        if np.any(np.diff(omegas) <= 0):
            raise ValueError("tabulated frequencies must be strictly increasing")
        object.__setattr__(self, "omegas", omegas)
        object.__setattr__(self, "chi", chi)

    def __call__(self, omega):
        omega = np.asarray(omega, dtype=float)
        lo, hi = self.omegas[0], self.omegas[-1]
        span = hi - lo
        if np.any(omega < lo - 1e-12 * span) or np.any(omega > hi + 1e-12 * span):
            raise OutOfBand(f"frequency outside tabulated range [{lo}, {hi}]")
        out = np.interp(omega, self.omegas, self.chi.real) + 1j * np.interp(
            omega, self.omegas, self.chi.imag
        )
        return out if out.ndim else complex(out)

    def __eq__(self, other):
        return (
            isinstance(other, Tabulated)
            and np.array_equal(self.omegas, other.omegas)
            and np.array_equal(self.chi, other.chi)
        )


DispersionModel = Union[Constant, Lorentz, Tabulated]

VACUUM = Constant(0.0)


def susceptibility_eval(model: DispersionModel, omega):
    """Evaluate ``model`` at ``omega`` (scalar or array)."""
    return model(omega)


def refractive_index(chi):
    """Principal square root of ``1 + chi``.

    For passive media (Im chi >= 0) the result lies in the closed upper half
    plane with positive real part.

    Raises
    ------
    BranchAmbiguity
        If ``1 + chi`` lies on the closed negative real axis.
    """
    w = 1.0 + np.asarray(chi, dtype=complex)
    if np.any((w.imag == 0.0) & (w.real <= 0.0)):
        raise BranchAmbiguity("1 + chi on the negative real axis; square-root branch undefined")
    n = np.sqrt(w)
    return n if n.ndim else complex(n)


def contrast(chi_p, chi_bg):
    """Normalized particle contrast ``(chi_p - chi_bg) / (1 + chi_bg)``."""
    chi_p = np.asarray(chi_p, dtype=complex)
    chi_bg = np.asarray(chi_bg, dtype=complex)
    den = 1.0 + chi_bg
    if np.any(den == 0):
        raise DegenerateBackground("1 + chi_bg = 0")
    out = (chi_p - chi_bg) / den
    return out if out.ndim else complex(out)


_SERIES_CUTOFF = 1e-2
# h(x) = sum_k (-1)**(k+1) * 2k * x**(2k-2) / (2k+1)!, k >= 1
_MACLAURIN = np.array(
    [(-1) ** (k + 1) * 2 * k / math.factorial(2 * k + 1) for k in range(1, 14)]
)


def form_factor(xi):
    """Ball form factor ``h(xi) = (sin xi - xi cos xi) / xi**3``, with ``h(0) = 1/3``.

    Accepts real or complex input; the result is even in ``xi``.
    Below ``|xi| = 1e-2`` the three-term series ``1/3 - xi**2/30 + xi**4/840`` is
    used. Between ``1e-2`` and 1 the closed form suffers cancellation in
    ``sin - xi cos``, so the same function is summed from its Maclaurin series
    to full precision there.
    """
    xi = np.asarray(xi)
    is_complex = np.iscomplexobj(xi)
    x = xi.astype(complex if is_complex else float)
    ax = np.abs(x)
    out = np.empty_like(x)

    small = ax < _SERIES_CUTOFF
    x2 = x[small] ** 2
    out[small] = 1.0 / 3.0 - x2 / 30.0 + x2 * x2 / 840.0

    mid = (~small) & (ax < 1.0)
    if np.any(mid):
        x2 = x[mid] ** 2
        acc = np.zeros_like(x2)
        for c in _MACLAURIN[::-1]:
            acc = acc * x2 + c
        out[mid] = acc

    big = ax >= 1.0
    xb = x[big]
    out[big] = (np.sin(xb) - xb * np.cos(xb)) / xb**3
    return out if out.ndim else out[()]


def check_passivity(model: DispersionModel, omegas, *, tol: float = 0.0) -> bool:
    """Return True if Im chi >= -tol on the non-negative part of ``omegas``; warn otherwise."""
    omegas = np.asarray(omegas, dtype=float)
    w = omegas[omegas >= 0]
    if w.size == 0:
        return True
    ok = bool(np.all(np.imag(model(w)) >= -tol))
    if not ok:
        warnings.warn(f"dispersion model {model!r} is not passive on the grid", stacklevel=2)
    return ok


def model_to_json(model: DispersionModel) -> dict:
    if isinstance(model, Constant):
        c = complex(model.chi)
        return {"kind": "constant", "chi": [c.real, c.imag]}
    if isinstance(model, Lorentz):
        return {"kind": "lorentz", "s": model.s, "omega_r": model.omega_r, "gamma": model.gamma}
    if isinstance(model, Tabulated):
        return {
            "kind": "tabulated",
            "samples": [[float(w), float(c.real), float(c.imag)] for w, c in zip(model.omegas, model.chi)],
        }
    raise TypeError(f"not a dispersion model: {model!r}")


def model_from_json(obj: dict) -> DispersionModel:
    try:
        kind = obj["kind"]
        if kind == "constant":
            re, im = obj["chi"]
            return Constant(complex(re, im))
        if kind == "lorentz":
            return Lorentz(float(obj["s"]), float(obj["omega_r"]), float(obj["gamma"]))
        if kind == "tabulated":
            rows = np.asarray(obj["samples"], dtype=float)
            return Tabulated(rows[:, 0], rows[:, 1] + 1j * rows[:, 2])
    except (KeyError, TypeError, ValueError, IndexError) as exc:
        raise SchemaError(f"bad dispersion model {obj!r}: {exc}") from exc
    raise SchemaError(f"unknown dispersion model kind {obj.get('kind')!r}")
