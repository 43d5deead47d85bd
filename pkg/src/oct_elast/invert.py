"""Constructive inverses for the compression-sweep data and the layer-stripping driver.

Each ``recover_*`` function fits one data functional on an (omega, delta) grid:
the first interface (``m0``), an interior interface (``mj``) or a random
sublayer (``Mj``). :func:`layer_strip` chains them from the top down on
measured detector fields.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ._gn import gauss_newton
from .errors import (
    ContrastDegenerate,
    DecayHypothesisViolated,
    DegenerateLift,
    NoConvergence,
    NonPhysicalDensity,
    ShrinkConditionViolated,
    UnwrapAliased,
)
from .forward import VARIANTS, SublayerParams, _cexpm1, datum_m0, datum_mj
from .medium import ScanGrid


@dataclass(frozen=True, eq=False)
class DataGrid:
    values: np.ndarray  # (n_omega, n_delta)
    grid: ScanGrid
    kind: str
    variant: str = "derived"
    c: float = 1.0

    def __post_init__(self):
        v = np.asarray(self.values, dtype=complex)
        if v.shape != self.grid.shape:
            raise ValueError(f"values shape {v.shape} does not match grid {self.grid.shape}")
        if self.kind not in ("m0", "mj", "Mj"):
            raise ValueError(f"unknown data kind {self.kind!r}")
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown variant {self.variant!r}")
        if self.grid.deltas.size < 5:
            raise ValueError("inversion needs at least 5 compression states")
        object.__setattr__(self, "values", v)

    @property
    def omegas(self):
        return self.grid.omegas

    @property
    def deltas(self):
        return self.grid.deltas


@dataclass
class RecoveryReport:
    kind: str
    params: dict
    residual: float
    flags: list = field(default_factory=list)

    def __post_init__(self):
        if not self.residual >= 0:
            raise ValueError("residual must be non-negative")


@dataclass(frozen=True)
class DepthPrior:
    """Admissible heights of a boundary at rest and of its compression rate."""

    z: tuple[float, float]
    z_rate: tuple[float, float] = (-1.0, 1.0)


@dataclass(frozen=True)
class SublayerPrior:
    zeta: tuple[float, float]
    Z: tuple[float, float]
    zeta_rate: tuple[float, float] = (0.0, 1.0)
    Z_rate: tuple[float, float] = (0.0, 1.0)


def _relmisfit(model, data) -> float:
    den = np.linalg.norm(data)
    return float(np.linalg.norm(model - data) / den) if den > 0 else float(np.linalg.norm(model))


# --- first interface -----------------------------------------------------------


def mobius_lift_solve(u, deltas):
    """Fit ``u(delta) = ((a + delta b)/(a + delta b + 2)) P`` on at least four deltas.

    Writing the model as ``u (d0 + d1 delta) = n0 + n1 delta`` makes it linear
    and homogeneous in ``(d0, d1, n0, n1) ~ (a + 2, b, a P, b P)``. The null
    vector of the stacked rows ``[u, delta u, -1, -delta]`` fixes that
    4-vector up to scale, and the scale follows from ``d0 - n0 / P = 2``.

    Returns
    -------
    a, b, P : complex
    residual : float
        Relative misfit of the fitted model plus ``|c2 c3 - c1 c4|`` for
        ``c = (a, b, a P, b P)``.
    """
    u = np.asarray(u, dtype=complex)
    d = np.asarray(deltas, dtype=float)
    if u.shape != d.shape or np.unique(d).size < 4:
        raise ValueError("need u on at least four distinct deltas")
    scale = np.max(np.abs(u))
    if not scale > 1e-300:
        raise DegenerateLift("no contrast: data vanish identically")
    A = np.column_stack([u, d * u, -np.ones_like(u), -d + 0j]) / 1.0
    _, sv, vh = np.linalg.svd(A)
    v = np.conj(vh[-1])
    d0, d1, n0, n1 = v
    tiny = 1e-12 * np.max(np.abs(v))
    if abs(d1) <= tiny and abs(n1) <= tiny:
        raise DegenerateLift("no compression dependence (n' = 0): a and P are not separable")
    if abs(d1) <= tiny:
        raise DegenerateLift("denominator slope vanishes")
    P = n1 / d1
    gap = d0 - n0 / P
    if abs(gap) <= tiny:
        raise DegenerateLift("scale of the lift is undetermined")
    lam = 2.0 / gap
    c = lam * np.array([d0, d1, n0, n1])
    c[0] -= 2.0
    a, b = c[0], c[1]
    model = (a + d * b) / (a + d * b + 2) * P
    resid = _relmisfit(model, u) + abs(c[1] * c[2] - c[0] * c[3])
    return complex(a), complex(b), complex(P), float(resid)


def phase_to_depth(P, omegas, prior: tuple[float, float], c: float = 1.0):
    """Depth ``z`` from ``P(w) ~ exp(-2 i w z / c)`` by unwrapping along ``omegas``.

    Returns ``(z, ambiguous)``; ``ambiguous`` is True when ``z`` falls outside
    ``prior``.

    Raises
    ------
    UnwrapAliased
        If ``2 max(d omega) max|prior| / c >= pi``.
    """
    P = np.asarray(P, dtype=complex)
    w = np.asarray(omegas, dtype=float)
    zmax = max(abs(prior[0]), abs(prior[1]))
    dw = np.max(np.diff(w)) if w.size > 1 else 0.0
    if 2 * dw * zmax / c >= np.pi:
        raise UnwrapAliased(f"step {dw} too coarse for depths up to {zmax}")
    ph = np.unwrap(np.angle(P))
    if w.size == 1:
        z = -c * ph[0] / (2 * w[0])
    else:
        X = np.column_stack([-2 * w / c, np.ones_like(w)])
        (z, b), *_ = np.linalg.lstsq(X, ph, rcond=None)
        k = np.round(b / (2 * np.pi))
        if abs(b - 2 * np.pi * k) < 0.1:
            # the intercept is a whole number of turns: refit the slope through it
            z = float(np.sum(w * (ph - 2 * np.pi * k)) / np.sum(-2 * w * w / c))
    z = float(z)
    return z, not (prior[0] <= z <= prior[1])


def _affine_fit(y, d):
    """Per-row least squares of ``y[i, :] ~ p[i] + d * q[i]``."""
    X = np.column_stack([np.ones_like(d), d])
    coef, *_ = np.linalg.lstsq(X, y.T, rcond=None)
    return coef[0], coef[1]


def recover_first_interface(data: DataGrid, prior: tuple[float, float]) -> RecoveryReport:
    """Recover ``n1(w)``, ``n1'(w)`` and ``z1`` from the ``m0`` data."""
    w, d, c = data.omegas, data.deltas, data.c
    P = np.empty(w.size, dtype=complex)
    for i in range(w.size):
        _, _, P[i], _ = mobius_lift_solve(data.values[i], d)
    z1, amb = phase_to_depth(P, w, prior, c)
    flags = ["phase-unwrap-ambiguity"] if amb else []
    v = data.values / np.exp(-2j * w * z1 / c)[:, None]
    a, b = _affine_fit(2 * v / (1 - v), d)
    n1, n1r = 1 + a, b
    model = datum_m0(n1[:, None], n1r[:, None], z1, w[:, None], d[None, :], c)
    return RecoveryReport("m0", {"n": n1, "n_rate": n1r, "z": z1, "z_rate": 0.0}, _relmisfit(model, data.values), flags)


# --- interior interface -----------------------------------------------------


def _interface_projection(data: DataGrid, nj, njr, z, zr):
    w, d, c = data.omegas, data.deltas, data.c
    A = nj[:, None] + d[None, :] * njr[:, None]
    zb = z + d * zr
    E = np.exp(-2j * (w[:, None] / c) * A * zb[None, :])
    u = data.values / E
    B = A * (1 + u) / (1 - u)
    n2, n2r = _affine_fit(B, d)
    Bf = n2[:, None] + d[None, :] * n2r[:, None]
    model = (Bf - A) / (Bf + A) * E
    return model, n2, n2r


def _as_omega_array(x, w):
    return np.asarray(x, dtype=complex) * np.ones(w.shape)


def _interface_candidates(data: DataGrid, nj, njr, prior: DepthPrior):
    """Starting points for (z, z'): log-magnitude quadratic, phase slope and a prior grid."""
    w, d, c = data.omegas, data.deltas, data.c
    vals = data.values
    cands = []
    # decay law: the delta^2 coefficient of log|m_j| is 2 (w/c) Im(n') z'
    good = njr.imag > 0
    with np.errstate(divide="ignore", invalid="ignore"):
        L = np.log(np.abs(vals))
    if np.any(good) and np.all(np.isfinite(L[good])):
        q = np.polynomial.polynomial.polyfit(d, L[good].T, 2)  # (3, n_good)
        k = 2 * w[good] / c
        zr = float(np.sum(q[2] * k * njr[good].imag) / np.sum((k * njr[good].imag) ** 2))
        lin = q[1] / k - nj[good].imag * zr
        z = float(np.sum(lin * njr[good].imag) / np.sum(njr[good].imag ** 2))
        cands.append((z, zr))
    # phase slope along omega for each delta gives the compressed depth
    if w.size >= 2:
        ph = np.unwrap(np.angle(vals), axis=0)
        zb = np.empty(d.size)
        for j, dj in enumerate(d):
            x = -2 * (w * (nj + dj * njr)).real / c
            X = np.column_stack([x, np.ones_like(x)])
            (zb[j], _), *_ = np.linalg.lstsq(X, ph[:, j], rcond=None)
        zr, z = np.polyfit(d, zb, 1)[0], np.polyfit(d, zb, 1)[1]
        cands.append((float(z), float(zr)))
    for z in np.linspace(prior.z[0], prior.z[1], 9):
        for zr in np.linspace(prior.z_rate[0], prior.z_rate[1], 9):
            cands.append((float(z), float(zr)))
    return cands


def recover_interface(data: DataGrid, n_j, n_j_rate, prior: DepthPrior) -> RecoveryReport:
    """Recover ``n_{j+1}``, ``n_{j+1}'`` (per frequency), ``z_{j+1}`` and ``z_{j+1}'`` from ``mj`` data.

    Variable projection: for a trial ``(z, z')`` the exponential is divided out
    and the remaining Fresnel factor inverted for an index affine in delta,
    which is fitted in closed form. ``(z, z')`` are refined by damped
    Gauss-Newton on the full-model residual.
    """
    w = data.omegas
    nj = _as_omega_array(n_j, w)
    njr = _as_omega_array(n_j_rate, w)
    if not np.any(njr.imag > 0):
        raise DecayHypothesisViolated("no frequency with Im n_j' > 0")
    if not np.any(np.abs(data.values) > 0):
        raise ContrastDegenerate("invisible interface: the data vanish identically")

    def resid(x):
        model, _, _ = _interface_projection(data, nj, njr, x[0], x[1])
        return model - data.values

    def score(x):
        with np.errstate(all="ignore"):
            r = resid(x)
        v = float(np.sum(np.abs(r) ** 2))
        return v if np.isfinite(v) else np.inf

    cands = _interface_candidates(data, nj, njr, prior)
    ranked = sorted(cands, key=lambda x: score(np.array(x)))
    span = max(abs(prior.z[0]), abs(prior.z[1]), 1e-3)
    scale = np.array([span, max(abs(prior.z_rate[0]), abs(prior.z_rate[1]), 1e-3)])
    best = None
    for x0 in ranked[:3]:
        res = gauss_newton(resid, np.array(x0), scale=scale * 1e-3, max_iter=50)
        if best is None or res.cost < best.cost:
            best = res
    z, zr = best.x
    model, n2, n2r = _interface_projection(data, nj, njr, z, zr)
    mis = _relmisfit(model, data.values)
    flags = []
    if not best.converged:
        if mis > 1e-6:
            raise NoConvergence(f"interface refinement stalled at misfit {mis:.3g}")
        flags.append("refinement-iteration-cap")
    if not (prior.z[0] <= z <= prior.z[1]):
        flags.append("depth-outside-prior")
    return RecoveryReport("mj", {"n": n2, "n_rate": n2r, "z": float(z), "z_rate": float(zr)}, mis, flags)


# --- random sublayer ---------------------------------------------------------


def solve_rho_nu(c0, c1, c2, n, n_rate, *, rtol: float = 1e-8):
    """Invert ``rho (nu^2 - n^2) = c0``, ``2 rho (nu nu' - n n') = c1``, ``rho (nu'^2 - n'^2) = c2``.

    Eliminating ``nu`` and ``nu'`` leaves an equation linear in ``rho``; ``nu`` is
    the root with positive real part.

    Raises
    ------
    ContrastDegenerate
        If ``c1 n n' - c0 n'^2 - c2 n^2`` vanishes (particles indistinguishable
        from the host at this frequency).
    NonPhysicalDensity
        If ``rho`` is not (numerically) real and positive.
    """
    c0, c1, c2 = complex(c0), complex(c1), complex(c2)
    n, nr = complex(n), complex(n_rate)
    den = c1 * n * nr - c0 * nr**2 - c2 * n**2
    size = abs(c1 * n * nr) + abs(c0 * nr**2) + abs(c2 * n**2)
    if size == 0 or abs(den) <= 1e-12 * size:
        raise ContrastDegenerate("contrast condition fails: n'/n = nu'/nu")
    rho = (c0 * c2 - 0.25 * c1 * c1) / den
    if abs(rho.imag) > rtol * abs(rho) or not rho.real > 0:
        raise NonPhysicalDensity(f"recovered density {rho} is not real and positive")
    rho = rho.real
    nu = np.sqrt(c0 / rho + n * n)
    if nu.real < 0:
        nu = -nu
    nur = (0.5 * c1 / rho + n * nr) / nu
    return float(rho), complex(nu), complex(nur)


def sublayer_shape(variant: str, w, nbar, zeta_b, Z_b, c: float = 1.0):
    """The delta-dependent exponential factor of ``M_j`` without the ``rho (nu^2 - n^2)`` amplitude."""
    k = w * nbar / c
    if variant == "paper":
        return np.exp(-0.5j * k * (zeta_b + 3 * Z_b)) - np.exp(-0.5j * k * (3 * zeta_b + Z_b))
    dd = zeta_b - Z_b
    safe = np.where(dd == 0, 1.0, dd)
    ratio = np.where(dd == 0, 2j * k, -_cexpm1(-2j * k * dd) / safe)
    return np.exp(-2j * k * Z_b) * ratio


class _SublayerModel:
    def __init__(self, data: DataGrid, nj, njr):
        self.data = data
        self.nj = nj
        self.njr = njr
        w, d = data.omegas, data.deltas
        self.nbar = nj[:, None] + d[None, :] * njr[:, None]
        self.powers = np.stack([np.ones_like(d), d, d * d], axis=-1)  # (n_delta, 3)

    def shape(self, g):
        zeta, zr, Z, Zr = g
        d = self.data.deltas
        return sublayer_shape(self.data.variant, self.data.omegas[:, None], self.nbar, zeta + d * zr, Z + d * Zr, self.data.c)

    def coefficients(self, X):
        """Per-frequency least squares of ``data ~ X (c0 + c1 delta + c2 delta^2)``.

        The design is ``X`` times a fixed Vandermonde block, so the 3x3 normal
        equations assemble from ``|X|^2`` in one contraction.
        """
        P = self.powers
        G = np.einsum("wd,dk,dl->wkl", np.abs(X) ** 2, P, P)
        rhs = np.einsum("wd,dk->wk", np.conj(X) * self.data.values, P)
        return np.linalg.solve(G, rhs[..., None])[..., 0]  # (n_omega, 3)

    def _model(self, X, cf):
        return X * (cf @ self.powers.T)

    def projected_residual(self, g):
        X = self.shape(g)
        return self._model(X, self.coefficients(X)) - self.data.values

    def constrained(self, rho, g):
        """Model with (nu, nu') taken from (c0, c1) at fixed rho; returns model, nu, nu'."""
        X = self.shape(g)
        cf = self.coefficients(X)
        nu = np.sqrt(cf[:, 0] / rho + self.nj**2)
        nu = np.where(nu.real < 0, -nu, nu)
        nur = (0.5 * cf[:, 1] / rho + self.nj * self.njr) / nu
        c2 = rho * (nur**2 - self.njr**2)
        full = np.stack([cf[:, 0], cf[:, 1], c2], axis=-1)
        return self._model(X, full), nu, nur


def _sublayer_grid(prior: SublayerPrior, m: int = 6):
    out = []
    for zeta in np.linspace(*prior.zeta, m):
        for Z in np.linspace(*prior.Z, m):
            if not Z < zeta:
                continue
            for zr in np.linspace(*prior.zeta_rate, m):
                for Zr in np.linspace(*prior.Z_rate, m):
                    if Zr > zr > 0:
                        out.append((zeta, zr, Z, Zr))
    return out


def _profile_candidates(data: DataGrid, nj, njr, prior: SublayerPrior, spectrum=None):
    """Geometry from the two returns in the delay profile of each compression state.

    Needs a uniform frequency grid with enough bandwidth to separate the top
    and bottom of the sublayer; returns an empty list otherwise.
    """
    w, d, c = data.omegas, data.deltas, data.c
    if w.size < 64:
        return []
    dw = np.diff(w)
    if np.any(np.abs(dw - dw.mean()) > 1e-9 * dw.mean()):
        return []
    N = 8 * w.size
    taper = np.hanning(w.size) if spectrum is None else np.abs(spectrum)
    period = 2 * np.pi / dw.mean()
    t = np.arange(N) * period / N
    tops, bots = [], []
    for j, dj in enumerate(d):
        nb = np.mean((nj + dj * njr).real)
        prof = np.abs(np.fft.fft(taper * data.values[:, j], n=N))
        # the two exponents sit at delays -n p / c and -n q / c with p < q
        tt = (t + 0.5 * period) % period - 0.5 * period
        depth = -c * tt / nb  # equals p or q (variant-specific combinations of zeta, Z)
        i1 = int(np.argmax(prof))
        sep = 4 * np.pi / (w[-1] - w[0]) * c / nb
        mask = np.abs(depth - depth[i1]) > sep
        if not np.any(mask):
            return []
        i2 = int(np.argmax(np.where(mask, prof, 0)))
        p, q = sorted((depth[i1], depth[i2]))
        if data.variant == "paper":
            # p = (zeta + 3Z)/2 and q = (3 zeta + Z)/2
            Z_b, zeta_b = (3 * p - q) / 4, (3 * q - p) / 4
        else:
            Z_b, zeta_b = p / 2, q / 2
        tops.append(zeta_b)
        bots.append(Z_b)
    zr, zeta = np.polyfit(d, tops, 1)
    Zr, Z = np.polyfit(d, bots, 1)
    return [(float(zeta), float(zr), float(Z), float(Zr))]


def recover_random_layer(data: DataGrid, n_j, n_j_rate, prior: SublayerPrior, *, spectrum=None) -> RecoveryReport:
    """Recover ``(rho, nu(w), nu'(w), zeta, zeta', Z, Z')`` from ``Mj`` data.

    The geometry is found by variable projection: for trial bounds the data
    divided by the exponential factor must be quadratic in delta at every
    frequency, with coefficients ``(c0, c1, c2)`` fitted in closed form. The
    density follows from :func:`solve_rho_nu` (median over frequencies), then
    ``(rho, geometry)`` is refined by damped Gauss-Newton with ``(nu, nu')``
    projected from ``(c0, c1)`` at each step.
    """
    w = data.omegas
    nj = _as_omega_array(n_j, w)
    njr = _as_omega_array(n_j_rate, w)
    if not np.any(njr.imag > 0):
        raise DecayHypothesisViolated("no frequency with Im n_j' > 0")
    if not np.any(np.abs(data.values) > 0):
        raise ContrastDegenerate("the data vanish identically")
    model = _SublayerModel(data, nj, njr)

    def vp_cost(g):
        with np.errstate(all="ignore"):
            try:
                r = model.projected_residual(np.asarray(g))
            except np.linalg.LinAlgError:
                return np.inf
        v = float(np.sum(np.abs(r) ** 2))
        return v if np.isfinite(v) else np.inf

    cands = _profile_candidates(data, nj, njr, prior, spectrum) + _sublayer_grid(prior)
    ranked = sorted(cands, key=vp_cost)
    gscale = np.array(
        [
            max(abs(prior.zeta[0]), abs(prior.zeta[1])),
            max(abs(prior.zeta_rate[1]), 1e-3),
            max(abs(prior.Z[0]), abs(prior.Z[1])),
            max(abs(prior.Z_rate[1]), 1e-3),
        ]
    )
    best = None
    for g0 in ranked[:2]:
        res = gauss_newton(lambda g: model.projected_residual(g), np.array(g0), scale=gscale * 1e-3, max_iter=60)
        if best is None or res.cost < best.cost:
            best = res
    g = best.x
    cf = model.coefficients(model.shape(g))
    rhos = []
    for i in range(w.size):
        try:
            rho_i, _, _ = solve_rho_nu(cf[i, 0], cf[i, 1], cf[i, 2], nj[i], njr[i], rtol=1e-2)
            rhos.append(rho_i)
        except (ContrastDegenerate, NonPhysicalDensity):
            continue
    if not rhos:
        raise ContrastDegenerate("no frequency satisfies the contrast condition")
    rho0 = float(np.median(rhos))

    def full_resid(x):
        m, _, _ = model.constrained(x[0], x[1:])
        return m - data.values

    x0 = np.concatenate([[rho0], g])
    res = gauss_newton(full_resid, x0, scale=np.concatenate([[abs(rho0)], gscale]) * 1e-3, max_iter=60)
    rho, g = res.x[0], res.x[1:]
    m, nu, nur = model.constrained(rho, g)
    mis = _relmisfit(m, data.values)
    flags = []
    if not res.converged:
        if mis > 1e-6:
            raise NoConvergence(f"sublayer refinement stalled at misfit {mis:.3g}")
        flags.append("refinement-iteration-cap")
    zeta, zr, Z, Zr = (float(v) for v in g)
    if not (Zr > zr > 0):
        raise ShrinkConditionViolated(f"recovered rates zeta'={zr:.6g}, Z'={Zr:.6g} violate Z' > zeta' > 0")
    if not rho > 0:
        raise NonPhysicalDensity(f"recovered density {rho} <= 0")
    params = {"rho": float(rho), "nu": nu, "nu_rate": nur, "zeta": zeta, "zeta_rate": zr, "Z": Z, "Z_rate": Zr}
    return RecoveryReport("Mj", params, mis, flags)


def sublayer_params_at(report: RecoveryReport, i: int) -> SublayerParams:
    p = report.params
    return SublayerParams(p["rho"], complex(p["nu"][i]), complex(p["nu_rate"][i]), p["zeta"], p["zeta_rate"], p["Z"], p["Z_rate"])


# --- layer stripping -----------------------------------------------------------

GATING_OVERLAP = "GatingOverlap"


@dataclass(frozen=True)
class LayerPrior:
    """What the inversion is told about one layer before seeing data.

    ``top`` bounds the upper boundary (the first layer must have zero rate:
    the detector sits at a fixed distance from the surface). ``sublayer`` is
    given when the layer contains a random particle slab; ``R`` is the particle
    radius assumed by the calibration of that slab.
    """

    top: DepthPrior
    sublayer: SublayerPrior | None = None
    R: float = 0.0


@dataclass(frozen=True)
class StripMetadata:
    beam: object  # forward.IncidentBeam
    layers: tuple[LayerPrior, ...]
    x0: float = 1.0
    c: float = 1.0
    variant: str = "derived"
    band_floor: float = 1e-2  # use frequencies where |f| >= band_floor * max |f|
    pad_sigmas: float = 8.0
    taper_sigmas: float = 4.0

    def __post_init__(self):
        object.__setattr__(self, "layers", tuple(self.layers))
        if not self.layers:
            raise ValueError("need at least one layer")
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown variant {self.variant!r}")
        if self.layers[0].top.z_rate != (0.0, 0.0):
            raise ValueError("the first boundary must not move (detector distance is fixed)")


@dataclass
class StripReport:
    omegas: np.ndarray
    layers: list
    global_misfit: float | None
    flags: list = field(default_factory=list)
    complete: bool = False

    def to_json(self) -> dict:
        def rows(v):
            v = np.asarray(v, dtype=complex) * np.ones(self.omegas.shape)
            return [[float(w), float(x.real), float(x.imag)] for w, x in zip(self.omegas, v)]

        out = []
        for L in self.layers:
            sub = L.get("sublayer")
            if sub is not None:
                sub = {
                    "rho": sub["rho"],
                    "nu": rows(sub["nu"]),
                    "nu_rate": rows(sub["nu_rate"]),
                    "zeta": sub["zeta"],
                    "zeta_rate": sub["zeta_rate"],
                    "Z": sub["Z"],
                    "Z_rate": sub["Z_rate"],
                }
            out.append(
                {
                    "n": rows(L["n"]),
                    "n_rate": rows(L["n_rate"]),
                    "z": L["z"],
                    "z_rate": L["z_rate"],
                    "sublayer": sub,
                    "residual": L["residual"],
                    "flags": list(L["flags"]),
                }
            )
        return {"layers": out, "global_misfit": self.global_misfit, "flags": list(self.flags), "complete": self.complete}


def _pulse_sigma(f, omegas) -> float:
    """RMS duration of the incident pulse envelope (1/width for a Gaussian spectrum)."""
    t, period = _time_axis(omegas)
    p = np.abs(np.fft.ifft(f)) ** 2
    tc = (t + 0.5 * period) % period - 0.5 * period
    m = np.sum(tc * p) / np.sum(p)
    return float(np.sqrt(2 * np.sum((tc - m) ** 2 * p) / np.sum(p)))


def _time_axis(omegas):
    from .detect import time_axis

    return time_axis(omegas)


def _interval_at(iv, rate, delta):
    a, b = iv
    lo = a + min(delta * rate[0], delta * rate[1])
    hi = b + max(delta * rate[0], delta * rate[1])
    return lo, hi


def _group_range(n, omegas):
    ng = np.gradient(omegas * n.real, omegas) if omegas.size > 1 else n.real
    return float(np.min(ng)), float(np.max(ng))


class _Stripper:
    def __init__(self, E, grid: ScanGrid, meta: StripMetadata):
        from .detect import check_uniform

        self.meta = meta
        self.grid = grid
        self.deltas = grid.deltas
        w = grid.omegas
        f = np.asarray(meta.beam.f(w), dtype=complex) * np.ones(w.shape)
        amp = np.abs(f)
        idx = np.nonzero(amp >= meta.band_floor * amp.max())[0]
        self.band = slice(int(idx[0]), int(idx[-1]) + 1)
        self.w = w[self.band]
        self.f = f[self.band]
        self.E_full = np.asarray(E, dtype=complex)
        self.E = self.E_full[self.band]
        self.reflectors = self._reflector_list()
        self.gating = len(self.reflectors) > 1
        if self.gating:
            check_uniform(w)
            self.sigma_t = _pulse_sigma(f, w)
            self.pad = meta.pad_sigmas * self.sigma_t
        self.known = []  # per layer: dict with n, n_rate, z, z_rate, sublayer, residual, flags
        self.events = []  # (name, [(lo, hi) per delta])
        self.gates = []  # (name, [GatingWindow per delta])
        self.cores = {}  # name -> unsmeared primary intervals
        self.flags = []

    def _reflector_list(self):
        out = [("m0", 0)]
        J = len(self.meta.layers)
        for j, lp in enumerate(self.meta.layers):
            if lp.sublayer is not None:
                out.append(("Mj", j))
            if j + 1 < J:
                out.append(("mj", j))
        return out

    # known medium at a compression state

    def _n(self, j, d):
        L = self.known[j]
        return L["n"] + d * L["n_rate"]

    def _z(self, j, d):
        L = self.known[j]
        return L["z"] + d * L["z_rate"]

    def _T(self, j, d):
        from .forward import slab_amplitudes

        s = self.known[j]["sublayer"]
        return slab_amplitudes(
            s["rho"],
            s["nu"] + d * s["nu_rate"],
            s["zeta"] + d * s["zeta_rate"],
            s["Z"] + d * s["Z_rate"],
            self.meta.layers[j].R,
            self._n(j, d),
            self.w,
            self.meta.variant,
            self.meta.c,
        )[2]

    def two_way(self, j, d, below_sublayer: bool):
        """Two-way transmission from the background into layer ``j`` (0-based)."""
        c = self.meta.c
        tw = np.ones(self.w.shape, dtype=complex)
        n_above = np.ones(self.w.shape, dtype=complex)
        for i in range(j + 1):
            n_i = self._n(i, d)
            tw = tw * (2 * n_above / (n_above + n_i)) * (2 * n_i / (n_above + n_i))
            if i < j:
                tw = tw * np.exp(2j * self.w / c * n_i * (self._z(i, d) - self._z(i + 1, d)))
            if self.known[i]["sublayer"] is not None and (i < j or below_sublayer):
                tw = tw * (1 + self._T(i, d)) ** 2
            n_above = n_i
        return tw

    # delay predictions

    def _top_delay(self, j, d, spread: bool = True):
        """Delay interval of the boundary on top of (known) layer ``j``."""
        c = self.meta.c
        z1 = self._z(0, d)
        lo = hi = (self.meta.x0 - 2 * z1) / c
        for i in range(j):
            g0, g1 = _group_range(self._n(i, d), self.w)
            thick = self._z(i, d) - self._z(i + 1, d)
            lo += 2 * g0 * thick / c
            hi += 2 * g1 * thick / c
            if spread:
                lo, hi = self._sublayer_spread(i, d, lo, hi)
        return lo, hi

    def _sublayer_spread(self, i, d, lo, hi):
        s = self.known[i]["sublayer"]
        if s is None or self.meta.variant != "paper":
            return lo, hi
        _, g1 = _group_range(self._n(i, d), self.w)
        th = (s["zeta"] - s["Z"]) + d * (s["zeta_rate"] - s["Z_rate"])
        return lo - g1 * th / self.meta.c, hi + g1 * th / self.meta.c

    def predict(self, kind, j, d, recovered: bool = False, spread: bool = True):
        """Delay interval of a reflector's primary return, from priors or from the recovered values.

        ``spread=False`` leaves out the smearing by the delayed transmission
        terms of paper-variant sublayers above the reflector.
        """
        c = self.meta.c
        lp = self.meta.layers
        if kind == "m0":
            if recovered:
                a = b = self._z(0, d)
            else:
                a, b = _interval_at(lp[0].top.z, lp[0].top.z_rate, d)
            return (self.meta.x0 - 2 * b) / c, (self.meta.x0 - 2 * a) / c
        lo, hi = self._top_delay(j, d, spread)
        g0, g1 = _group_range(self._n(j, d), self.w)
        zt = self._z(j, d)
        if kind == "Mj":
            if recovered:
                s = self.known[j]["sublayer"]
                top, bot = s["zeta"] + d * s["zeta_rate"], s["Z"] + d * s["Z_rate"]
            else:
                sp = lp[j].sublayer
                top = _interval_at(sp.zeta, sp.zeta_rate, d)[1]
                bot = _interval_at(sp.Z, sp.Z_rate, d)[0]
            return lo + 2 * g0 * (zt - top) / c, hi + 2 * g1 * (zt - bot) / c
        if recovered:
            a = b = self._z(j + 1, d)
        else:
            a, b = _interval_at(lp[j + 1].top.z, lp[j + 1].top.z_rate, d)
        lo, hi = lo + 2 * g0 * (zt - b) / c, hi + 2 * g1 * (zt - a) / c
        if spread and self.known[j]["sublayer"] is not None:
            lo, hi = self._sublayer_spread(j, d, lo, hi)
        return lo, hi

    # gating

    def _window(self, iv):
        from .detect import GatingWindow

        lo, hi = iv
        taper = self.meta.taper_sigmas * self.sigma_t
        H = 0.5 * (hi - lo) + self.pad + taper
        return GatingWindow(0.5 * (lo + hi), H, taper / H)

    def _conflicts(self, gate, iv, period):
        """True when an event interval reaches into the gate (with the pulse padding)."""
        lo, hi = iv[0] - self.pad, iv[1] + self.pad
        a, b = gate.t_center - gate.t_halfwidth, gate.t_center + gate.t_halfwidth
        # circular delay axis: compare against the nearest periodic copy
        shift = np.round((0.5 * (a + b) - 0.5 * (lo + hi)) / period) * period
        return not (hi + shift < a or lo + shift > b)

    def gates_for(self, kind, j, recovered: bool):
        return [self._window(self.predict(kind, j, d, recovered)) for d in self.deltas]

    def prior_overlap(self, name, kind, j) -> None:
        """After a failed recovery, flag known returns that already sat inside the prior-wide gate."""
        _, period = _time_axis(self.grid.omegas)
        gates = self.gates_for(kind, j, recovered=False)
        clash = [
            f"{other} in gate of {name}"
            for other, ivs in self.events
            if any(self._conflicts(g, iv, period) for g, iv in zip(gates, ivs))
        ]
        if clash:
            self.flags.insert(0, GATING_OVERLAP)
            for L in self.known:
                if GATING_OVERLAP not in L["flags"]:
                    L["flags"].append(GATING_OVERLAP)
            self.flags.append("overlap: " + "; ".join(sorted(set(clash))))

    def register(self, name, kind, j, gates) -> bool:
        """Record the recovered return and its first-order multiples; False when any gate is contaminated."""
        _, period = _time_axis(self.grid.omegas)
        prim = [self.predict(kind, j, d, recovered=True) for d in self.deltas]
        core = [self.predict(kind, j, d, recovered=True, spread=False) for d in self.deltas]
        new_events = [(name, prim)]
        for other, ivs in self.events:
            if "*" in other:
                continue
            ocore = self.cores[other]
            mult = []
            for p, pc, q, qc in zip(prim, core, ivs, ocore):
                # path delay 2 tau_m - tau_l from the unsmeared returns, widened once by each smear
                smear = (pc[0] - p[0]) + (qc[0] - q[0]), (p[1] - pc[1]) + (q[1] - qc[1])
                mult.append((2 * pc[0] - qc[1] - smear[0], 2 * pc[1] - qc[0] + smear[1]))
            new_events.append((f"{name}*{other}", mult))
        self.cores[name] = core
        clash = []
        for other, ivs in self.events:
            if any(self._conflicts(g, iv, period) for g, iv in zip(gates, ivs)):
                clash.append(f"{other} in gate of {name}")
        for gname, gs in self.gates:
            for other, ivs in new_events:
                if any(self._conflicts(g, iv, period) for g, iv in zip(gs, ivs)):
                    clash.append(f"{other} in gate of {gname}")
        for other, ivs in new_events[1:]:
            if any(self._conflicts(g, iv, period) for g, iv in zip(gates, ivs)):
                clash.append(f"{other} in gate of {name}")
        self.events.extend(new_events)
        self.gates.append((name, gates))
        if clash:
            self.flags.append(GATING_OVERLAP)
            for L in self.known:
                if GATING_OVERLAP not in L["flags"]:
                    L["flags"].append(GATING_OVERLAP)
            self.flags.append("overlap: " + "; ".join(sorted(set(clash))))
            return False
        return True

    def gated(self, gates):
        from .detect import time_gate

        if gates is None:
            return self.E
        out = np.empty_like(self.E_full)
        for k, g in enumerate(gates):
            out[:, k] = time_gate(self.E_full[:, k], self.grid.omegas, g)
        return out[self.band]

    # normalization

    def normalize(self, Eg, kind, j):
        from .detect import DatumContext, normalize_to_datum

        m = self.meta
        beam = m.beam
        if kind == "m0":
            return normalize_to_datum(Eg, self.w, beam, DatumContext("m0", m.x0, m.c))
        out = np.empty_like(Eg)
        for k, d in enumerate(self.deltas):
            ctx = DatumContext(
                kind,
                m.x0,
                m.c,
                z1=self._z(0, d),
                n_layer=self._n(j, d),
                z_layer_top=self._z(j, d),
                two_way=self.two_way(j, d, below_sublayer=(kind == "mj")),
                variant=m.variant,
                R=m.layers[j].R,
            )
            out[:, k] = normalize_to_datum(Eg[:, k], self.w, beam, ctx)
        return out

    def band_grid(self):
        return ScanGrid(self.w, self.deltas)

    def recover(self, kind, j, gates):
        """Invert one reflector from the gated field and install the result in ``known``."""
        m = self.meta
        data = self.normalize(self.gated(gates), kind, j)
        dg = DataGrid(data, self.band_grid(), kind, m.variant, m.c)
        if kind == "m0":
            entry = self._layer_entry(recover_first_interface(dg, m.layers[0].top.z))
            self.known[:1] = [entry]
        elif kind == "mj":
            L = self.known[j]
            entry = self._layer_entry(recover_interface(dg, L["n"], L["n_rate"], m.layers[j + 1].top))
            self.known[j + 1 :] = [entry]
        else:
            L = self.known[j]
            rep = recover_random_layer(dg, L["n"], L["n_rate"], m.layers[j].sublayer, spectrum=self.f)
            L["sublayer"] = rep.params
            L["sub_residual"] = rep.residual
            L["sub_flags"] = list(rep.flags)

    def run(self) -> StripReport:
        from .errors import OctElastError

        for kind, j in self.reflectors:
            name = {"m0": "interface 1", "Mj": f"sublayer {j + 1}", "mj": f"interface {j + 2}"}[kind]
            try:
                if not self.gating:
                    self.recover(kind, j, None)
                    continue
                # prior-wide gate first, then a tight gate around the recovered return
                self.recover(kind, j, self.gates_for(kind, j, recovered=False))
                gates = self.gates_for(kind, j, recovered=True)
                self.recover(kind, j, gates)
            except OctElastError as exc:
                self.flags.append(f"{name}: {type(exc).__name__}: {exc}")
                if self.gating:
                    self.prior_overlap(name, kind, j)
                return self.finish()
            if not self.register(name, kind, j, gates):
                return self.finish()
        return self.finish(complete=True)

    @staticmethod
    def _layer_entry(rep: RecoveryReport) -> dict:
        p = rep.params
        return {
            "n": np.asarray(p["n"], dtype=complex),
            "n_rate": np.asarray(p["n_rate"], dtype=complex),
            "z": float(p["z"]),
            "z_rate": float(p["z_rate"]),
            "sublayer": None,
            "residual": rep.residual,
            "flags": list(rep.flags),
        }

    def finish(self, complete: bool = False) -> StripReport:
        for L in self.known:
            if "sub_residual" in L:
                L["residual"] = max(L["residual"], L.pop("sub_residual"))
                L["flags"].extend(L.pop("sub_flags"))
        misfit = None
        if complete:
            try:
                misfit = self.resimulate_misfit()
            except Exception as exc:  # noqa: BLE001 - reported, not raised
                self.flags.append(f"re-simulation failed: {type(exc).__name__}: {exc}")
                complete = False
        return StripReport(self.w, self.known, misfit, self.flags, complete and not self.flags)

    def resimulate_misfit(self) -> float:
        from .forward import detector_field
        from .medium import compress

        stack = recovered_stack(self.known, self.w, self.meta, self.deltas)
        model = np.empty_like(self.E)
        for k, d in enumerate(self.deltas):
            model[:, k] = detector_field(compress(stack, d), self.meta.beam, self.w, self.meta.x0, variant=self.meta.variant)
        return _relmisfit(model, self.E)


def recovered_stack(layers, omegas, meta: StripMetadata, deltas=(0.0,)):
    """Medium built from recovered per-frequency values (valid on ``omegas`` only)."""
    from .medium import ComplexTable, Layer, LayerBoundary, MediumStack, RandomSublayer
    from .spectra import Tabulated

    w = np.asarray(omegas, dtype=float)
    out = []
    for j, L in enumerate(layers):
        sub = None
        s = L["sublayer"]
        if s is not None:
            sub = RandomSublayer(
                rho=s["rho"],
                nu_model=Tabulated(w, np.asarray(s["nu"]) ** 2 - 1),
                nu_rate=ComplexTable(np.asarray(s["nu_rate"]), w),
                zeta=s["zeta"],
                zeta_rate=s["zeta_rate"],
                Z=s["Z"],
                Z_rate=s["Z_rate"],
                R=meta.layers[j].R,
            )
        out.append(
            Layer(
                optics=Tabulated(w, np.asarray(L["n"]) ** 2 - 1),
                optics_rate=ComplexTable(np.asarray(L["n_rate"]) * np.ones(w.shape), w),
                boundary_top=LayerBoundary(L["z"], L["z_rate"]),
                sublayer=sub,
            )
        )
    return MediumStack(tuple(out), delta_range=(float(np.min(deltas)), float(np.max(deltas))), c=meta.c)


def layer_strip(measurements, meta: StripMetadata) -> StripReport:
    """Recover the stack from the top down.

    For each reflector in depth order the retrieved field is time-gated around
    the delay predicted from the priors and the layers recovered so far,
    normalized to its data functional and inverted. Gates are checked against
    every predicted primary and first-order multiple; a conflict stops the
    descent with a :data:`GATING_OVERLAP` flag. The returned report is partial
    (``complete=False``) whenever any flag is raised; ``global_misfit`` is the
    relative misfit between the field re-simulated from the recovered stack
    and the retrieved field on the frequency band used.
    """
    E = measurements.retrieved_field()
    return _Stripper(E, measurements.grid, meta).run()
