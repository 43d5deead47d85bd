"""Monte Carlo check of the ensemble-averaged Born field of a random particle slab.

Particles are balls of radius ``R`` with centres uniform in the box
``[-L/2, L/2]^2 x [Z, zeta]``; the areal density ``rho = N / L^2`` is held fixed
as ``L`` grows. Fields are evaluated on the vertical axis, where the scalar
Born sum applies.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from . import kernels
from .errors import InsideBall, OriginSingularity
from .spectra import form_factor

METHODS = ("quadrature", "formfactor")
DEFAULT_NODES = 24


def green(kappa, r):
    """Outgoing Helmholtz fundamental solution ``exp(i kappa r) / (4 pi r)``."""
    r = np.asarray(r, dtype=float)
    if np.any(r == 0):
        raise OriginSingularity("Green's function evaluated at r = 0")
    out = np.exp(1j * np.asarray(kappa) * r) / (4 * np.pi * r)
    return out if out.ndim else complex(out)


@dataclass(frozen=True)
class McGeometry:
    L: float
    N: int
    Z: float
    zeta: float
    R: float

    def __post_init__(self):
        if not self.Z < self.zeta:
            raise ValueError("need Z < zeta")
        if not 0 <= self.R < 0.5 * (self.zeta - self.Z):
            raise ValueError("need 0 <= R < (zeta - Z)/2")
        if self.L <= 0 or self.N < 0:
            raise ValueError("need L > 0 and N >= 0")

    @classmethod
    def from_density(cls, rho: float, L: float, Z: float, zeta: float, R: float) -> McGeometry:
        return cls(float(L), int(round(rho * L * L)), float(Z), float(zeta), float(R))

    @property
    def density(self) -> float:
        return self.N / self.L**2


@dataclass(frozen=True, eq=False)
class ParticleConfiguration:
    positions: np.ndarray  # (N, 3), C-contiguous

    def __post_init__(self):
        object.__setattr__(self, "positions", np.ascontiguousarray(self.positions, dtype=float).reshape(-1, 3))

    @property
    def N(self) -> int:
        return self.positions.shape[0]

    def mirrored(self) -> ParticleConfiguration:
        """Image under the horizontal reflection (x1, x2) -> (-x1, -x2)."""
        p = self.positions.copy()
        p[:, :2] *= -1
        return ParticleConfiguration(p)


def sample_configuration(geom: McGeometry, seed: int, key: tuple[int, ...] = ()) -> ParticleConfiguration:
    """Draw ``geom.N`` iid uniform centres; a pure function of ``(seed, key)``.

    A Philox counter-based stream is keyed from ``(seed, *key)``; particle ``l``
    consumes counter block ``l`` so any configuration can be regenerated in
    isolation.
    """
    ss = np.random.SeedSequence([int(seed) & 0xFFFFFFFFFFFFFFFF, *[int(k) for k in key]])
    rng = np.random.Generator(np.random.Philox(ss))
    u = rng.random((geom.N, 3))
    pos = np.empty_like(u)
    pos[:, 0] = (u[:, 0] - 0.5) * geom.L
    pos[:, 1] = (u[:, 1] - 0.5) * geom.L
    pos[:, 2] = geom.Z + u[:, 2] * (geom.zeta - geom.Z)
    return ParticleConfiguration(pos)


def count_overlaps(config: ParticleConfiguration, R: float) -> int:
    """Number of particle pairs closer than ``2R`` (overlaps are kept, only counted)."""
    p = config.positions
    if R <= 0 or p.shape[0] < 2:
        return 0
    total = 0
    for i in range(0, p.shape[0], 256):
        d2 = np.sum((p[i : i + 256, None, :] - p[None, :, :]) ** 2, axis=-1)
        rows = np.arange(i, min(i + 256, p.shape[0]))
        mask = np.arange(p.shape[0])[None, :] > rows[:, None]
        total += int(np.count_nonzero((d2 < 4 * R * R) & mask))
    return total


@lru_cache(maxsize=8)
def ball_nodes(R: float, nodes: int = DEFAULT_NODES):
    """Tensor Gauss-Legendre nodes in (r, cos theta, phi) for a ball of radius ``R``.

    The phi rule on (0, 2 pi) is symmetric about pi and the integrand depends on
    phi only through cos phi, so each mirror pair is returned once with the
    summed weight (an odd middle node keeps its own weight).
    """
    x, w = np.polynomial.legendre.leggauss(nodes)
    r = 0.5 * R * (x + 1)
    wr = 0.5 * R * w
    ct, wt = x.copy(), w.copy()
    half = nodes // 2
    ph = np.pi * (x[:half] + 1)
    wph = 2.0 * np.pi * w[:half]
    if nodes % 2:
        ph = np.append(ph, np.pi)
        wph = np.append(wph, np.pi * w[half])
    return (
        np.ascontiguousarray(r),
        np.ascontiguousarray(wr),
        np.ascontiguousarray(ct),
        np.ascontiguousarray(wt),
        np.ascontiguousarray(np.cos(ph)),
        np.ascontiguousarray(wph),
    )


def ball_source_integral(kappa, X, R: float, method: str = "quadrature", nodes: int = DEFAULT_NODES):
    """Integral over the ball ``|u| < R`` of ``G(kappa, X - u) exp(-i kappa u3)``.

    ``formfactor`` is the far-field form ``G(kappa, |X|) 4 pi R^3 h(R kappa sqrt(2 (1 + cos b)))``
    with ``cos b = X3 / |X|``: the momentum transfer between the incident
    direction and the direction to the observer.
    """
    X = np.asarray(X, dtype=float)
    d = float(np.linalg.norm(X))
    if d <= R:
        raise InsideBall(f"|X| = {d} <= R = {R}")
    kappa = complex(kappa)
    # the kernels sum over particles at sigma with observer x e3; use sigma = (-X1, -X2, 0), x = X3
    pos = np.ascontiguousarray([[-X[0], -X[1], 0.0]])
    if method == "formfactor":
        return complex(kernels.born_sum_formfactor(pos, X[2], kappa, float(R)))
    if method == "quadrature":
        return complex(kernels.born_sum_quadrature(pos, X[2], kappa, *ball_nodes(float(R), nodes)))
    raise ValueError(f"method must be one of {METHODS}")


def born_scattered(config: ParticleConfiguration, kappa, x3: float, R: float, method: str = "formfactor", nodes: int = DEFAULT_NODES):
    """``sum_l exp(-i kappa s_l3) B(kappa, x3 e3 - s_l)`` over the particles of ``config``."""
    pos = config.positions
    if pos.shape[0] == 0:
        return 0j
    d2 = pos[:, 0] ** 2 + pos[:, 1] ** 2 + (x3 - pos[:, 2]) ** 2
    if np.any(d2 <= R * R):
        raise InsideBall("observation point inside a particle")
    kappa = complex(kappa)
    if method == "formfactor":
        return complex(kernels.born_sum_formfactor(pos, float(x3), kappa, float(R)))
    if method == "quadrature":
        return complex(kernels.born_sum_quadrature(pos, float(x3), kappa, *ball_nodes(float(R), nodes)))
    raise ValueError(f"method must be one of {METHODS}")


def born_field(config, omega: float, x3: float, phi, n, R: float, beam, method: str = "formfactor", *, c: float = 1.0, include_incident: bool = True, nodes: int = DEFAULT_NODES):
    """Scalar Born field on the axis: incident wave plus ``k^2 phi f sum_l ...``."""
    k = omega * complex(n) / c
    f = complex(beam.f(omega))
    e0 = f * np.exp(-1j * k * x3)
    scat = k * k * complex(phi) * f * born_scattered(config, k, x3, R, method, nodes) if config.N else 0j
    return e0 + scat if include_incident else scat


def _worker_count(workers: int | None) -> int:
    cap = os.environ.get("OCT_ELAST_THREADS")
    w = workers if workers is not None else (os.cpu_count() or 1)
    if cap:
        w = min(w, max(1, int(cap)))
    return max(1, int(w))


@dataclass(frozen=True)
class EnsembleResult:
    L: np.ndarray
    N: np.ndarray
    M: int
    means: np.ndarray  # total field (incident + mean scattered)
    scattered_means: np.ndarray
    stderrs: np.ndarray
    overlaps: np.ndarray  # mean overlapping pairs per configuration (0 unless requested)


def ensemble_average(
    rho: float,
    Z: float,
    zeta: float,
    R: float,
    L_schedule,
    M: int,
    omega: float,
    x3: float,
    phi,
    n,
    beam,
    *,
    seed: int = 0,
    method: str = "formfactor",
    c: float = 1.0,
    workers: int | None = None,
    nodes: int = DEFAULT_NODES,
    config_offset: int = 0,
    overlaps: bool = False,
) -> EnsembleResult:
    """Mean and standard error of the Born field over ``M`` configurations per box size.

    Configuration ``m`` of box ``i`` is drawn with key ``(i, m)``; per-item results
    are reduced with ``math.fsum`` so the output does not depend on ``workers``.
    The standard error is ``sqrt((var Re + var Im) / M)``.
    """
    if M < 2:
        raise ValueError("need M >= 2 configurations for a standard error")
    Ls = np.asarray(L_schedule, dtype=float)
    k = omega * complex(n) / c
    f = complex(beam.f(omega))
    e0 = f * np.exp(-1j * k * x3)
    pref = k * k * complex(phi) * f
    nw = _worker_count(workers)
    means = np.empty(Ls.size, dtype=complex)
    smeans = np.empty(Ls.size, dtype=complex)
    errs = np.empty(Ls.size)
    Ns = np.empty(Ls.size, dtype=int)
    ovl = np.empty(Ls.size)
    for i, L in enumerate(Ls):
        geom = McGeometry.from_density(rho, L, Z, zeta, R)
        Ns[i] = geom.N

        def one(m, geom=geom, i=i):
            cfg = sample_configuration(geom, seed, (i, config_offset + m))
            s = born_scattered(cfg, k, x3, R, method, nodes) if pref != 0 else 0j
            return pref * s, (count_overlaps(cfg, R) if overlaps else 0)

        if nw == 1:
            items = [one(m) for m in range(M)]
        else:
            with ThreadPoolExecutor(max_workers=nw) as ex:
                items = list(ex.map(one, range(M)))
        vals = np.array([v for v, _ in items], dtype=complex)
        mre = math.fsum(vals.real) / M
        mim = math.fsum(vals.imag) / M
        var = (math.fsum((vals.real - mre) ** 2) + math.fsum((vals.imag - mim) ** 2)) / (M - 1)
        smeans[i] = complex(mre, mim)
        means[i] = e0 + smeans[i]
        errs[i] = math.sqrt(var / M)
        ovl[i] = math.fsum(o for _, o in items) / M
    return EnsembleResult(Ls, Ns, M, means, smeans, errs, ovl)


def finite_box_expectation(
    rho_eff: float,
    Z: float,
    zeta: float,
    R: float,
    L: float,
    omega: float,
    x3: float,
    phi,
    n: float,
    beam,
    *,
    c: float = 1.0,
    n_theta: int = 96,
    n_s: int = 192,
    n_y: int = 24,
) -> complex:
    """Exact expectation of the form-factor Born sum for a finite box of side ``L``.

    Deterministic quadrature of ``N E[exp(-i k y3) B(k, x3 e3 - y)]`` with ``y``
    uniform in the box. The square is integrated in polar coordinates using its
    8-fold symmetry; the radial variable is the distance ``s`` to the observer,
    which turns ``rho drho G`` into ``exp(i k s) / (4 pi) ds``.
    ``rho_eff`` is the realised density ``N / L^2``. Only real ``n`` is supported.
    """
    k = omega * n / c
    f = complex(beam.f(omega))
    xt, wt = np.polynomial.legendre.leggauss(n_theta)
    th = 0.125 * np.pi * (xt + 1)
    wth = 0.125 * np.pi * wt * 8.0
    xy, wy = np.polynomial.legendre.leggauss(n_y)
    y3 = Z + 0.5 * (zeta - Z) * (xy + 1)
    wy3 = 0.5 * (zeta - Z) * wy
    xs, ws = np.polynomial.legendre.leggauss(n_s)
    total = 0j
    for yy, wyy in zip(y3, wy3):
        h = x3 - yy
        smax = np.sqrt((0.5 * L / np.cos(th)) ** 2 + h * h)  # (n_theta,)
        s = h + 0.5 * (smax[:, None] - h) * (xs[None, :] + 1)
        wsv = 0.5 * (smax[:, None] - h) * ws[None, :]
        cosb = h / s
        integrand = np.exp(1j * k * s) / (4 * np.pi) * 4 * np.pi * R**3 * form_factor(R * k * np.sqrt(2 * (1 + cosb)))
        plane = np.sum(wth[:, None] * wsv * integrand)
        total += wyy * np.exp(-1j * k * yy) * plane
    density = rho_eff / (zeta - Z)
    return k * k * complex(phi) * f * density * total
