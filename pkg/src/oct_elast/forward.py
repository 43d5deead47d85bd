"""Closed-form frequency-domain responses of layered media at normal incidence.

Conventions
-----------
Time-harmonic fields carry ``exp(-i w t)``; a downgoing plane wave in a medium of
index ``n`` is ``f * exp(-i k x3)`` with ``k = w n / c``. Passive media have
``Im n >= 0`` so waves decay in their direction of travel.

Every :class:`TwoPort` states the planes its amplitudes are referenced to:
downgoing/upgoing waves above are ``a exp(-i k (x3 - z_top))`` and
``b exp(i k (x3 - z_top))``, and likewise with ``z_bottom`` below. Composition
inserts the propagation phase of the gap between two elements explicitly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    DegenerateInterface,
    GeometryViolated,
    MaxTermsExceeded,
    PoleHit,
    SeriesDiverges,
    ZeroSpectrum,
)
from .medium import CompressedStack, CompressedSublayer
from .spectra import form_factor

VARIANTS = ("paper", "derived")
SERIES_TOL = 1e-13
MAX_TERMS = 10_000
_FOUR_PI_SQ_SQ = (2 * np.pi) ** 4


def _scalar(x):
    x = np.asarray(x)
    return x[()] if x.ndim == 0 else x


def _check_variant(variant: str) -> None:
    if variant not in VARIANTS:
        raise ValueError(f"variant must be one of {VARIANTS}, got {variant!r}")


# --- incident beam ---------------------------------------------------------


@dataclass(frozen=True)
class GaussianSpectrum:
    """``amplitude * exp(-(w - center)**2 / (2 width**2))``: a pulse centred at t = 0."""

    center: float
    width: float
    amplitude: float = 1.0

    def __call__(self, omega):
        omega = np.asarray(omega, dtype=float)
        return _scalar(self.amplitude * np.exp(-0.5 * ((omega - self.center) / self.width) ** 2) + 0j)

    def to_json(self) -> dict:
        return {"kind": "gaussian", "center": self.center, "width": self.width, "amplitude": self.amplitude}


@dataclass(frozen=True)
class ConstantSpectrum:
    value: complex = 1.0

    def __call__(self, omega):
        omega = np.asarray(omega, dtype=float)
        return _scalar(np.full(omega.shape, complex(self.value)))

    def to_json(self) -> dict:
        v = complex(self.value)
        return {"kind": "constant", "value": [v.real, v.imag]}


@dataclass(frozen=True, eq=False)
class TabulatedSpectrum:
    omegas: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "omegas", np.asarray(self.omegas, dtype=float))
        object.__setattr__(self, "values", np.asarray(self.values, dtype=complex))

    def __call__(self, omega):
        omega = np.asarray(omega, dtype=float)
        re = np.interp(omega, self.omegas, self.values.real, left=0.0, right=0.0)
        im = np.interp(omega, self.omegas, self.values.imag, left=0.0, right=0.0)
        return _scalar(re + 1j * im)

    def to_json(self) -> dict:
        return {
            "kind": "tabulated",
            "samples": [[float(w), float(v.real), float(v.imag)] for w, v in zip(self.omegas, self.values)],
        }


def spectrum_from_json(obj: dict):
    kind = obj.get("kind")
    if kind == "gaussian":
        return GaussianSpectrum(float(obj["center"]), float(obj["width"]), float(obj.get("amplitude", 1.0)))
    if kind == "constant":
        v = obj.get("value", [1.0, 0.0])
        return ConstantSpectrum(complex(v[0], v[1]) if isinstance(v, (list, tuple)) else complex(v))
    if kind == "tabulated":
        rows = np.asarray(obj["samples"], dtype=float)
        return TabulatedSpectrum(rows[:, 0], rows[:, 1] + 1j * rows[:, 2])
    raise ValueError(f"unknown spectrum kind {kind!r}")


@dataclass(frozen=True)
class IncidentBeam:
    """Downgoing plane wave with spectrum ``f`` and horizontal unit polarization ``eta``."""

    spectrum: object = ConstantSpectrum()
    eta: tuple[float, float] = (1.0, 0.0)

    def __post_init__(self):
        eta = tuple(float(v) for v in self.eta)
        if len(eta) != 2 or abs(np.hypot(*eta) - 1.0) > 1e-12:
            raise ValueError("polarization must be a horizontal unit 2-vector")
        object.__setattr__(self, "eta", eta)

    def f(self, omega):
        return self.spectrum(omega)

    def scaled(self, factor: complex) -> IncidentBeam:
        return IncidentBeam(_ScaledSpectrum(self.spectrum, factor), self.eta)


@dataclass(frozen=True)
class _ScaledSpectrum:
    base: object
    factor: complex

    def __call__(self, omega):
        return self.factor * np.asarray(self.base(omega))

    def to_json(self) -> dict:
        raise TypeError("scaled spectra are not serializable")


# --- interfaces and two-ports ----------------------------------------------


def fresnel(n_a, n_b):
    """Normal-incidence reflection and transmission from medium ``a`` into ``b``.

    Returns ``r = (n_a - n_b)/(n_a + n_b)`` and ``t = 2 n_a/(n_a + n_b) = 1 + r``.
    """
    n_a = np.asarray(n_a, dtype=complex)
    n_b = np.asarray(n_b, dtype=complex)
    s = n_a + n_b
    if np.any(s == 0):
        raise DegenerateInterface("n_a + n_b = 0")
    return _scalar((n_a - n_b) / s), _scalar(2 * n_a / s)


def single_interface_response(omega, beam: IncidentBeam, n_a, n_b, z_interface: float, c: float = 1.0):
    """Reflected amplitude (referenced to z = 0) and transmitted amplitude (referenced to the interface)."""
    omega = np.asarray(omega, dtype=float)
    r, t = fresnel(n_a, n_b)
    f = beam.f(omega)
    ka = omega * np.asarray(n_a) / c
    reflected = f * r * np.exp(-2j * ka * z_interface)
    transmitted = f * t * np.exp(-1j * ka * z_interface)
    return _scalar(reflected), _scalar(transmitted)


@dataclass(frozen=True)
class TwoPort:
    r_top: np.ndarray
    t_down: np.ndarray
    r_bottom: np.ndarray
    t_up: np.ndarray
    z_top: float
    z_bottom: float

    def shifted_top(self, z_ref: float, k_above):
        """``r_top`` re-referenced to the plane ``z_ref`` in the medium above."""
        return self.r_top * np.exp(2j * k_above * (z_ref - self.z_top))


def interface_twoport(n_a, n_b, z: float) -> TwoPort:
    r, t = fresnel(n_a, n_b)
    t_up = 2 * np.asarray(n_b, dtype=complex) / (np.asarray(n_a) + np.asarray(n_b))
    return TwoPort(np.asarray(r), np.asarray(t), -np.asarray(r), t_up, z, z)


def slab_amplitudes(rho: float, nu, zeta: float, Z: float, R: float, n, omega, variant: str = "derived", c: float = 1.0):
    """Relative reflection from above (K), from below (K') and transmission correction (T).

    With the particle slab ``Z < x3 < zeta`` (particle index ``nu``) in a
    homogeneous medium of index ``n``, a downgoing wave ``f exp(-i k x3)``
    produces the averaged upgoing field ``f K exp(i k x3)`` above the slab and
    ``f (1 + T) exp(-i k x3)`` below it.
    """
    _check_variant(variant)
    omega = np.asarray(omega, dtype=float)
    n = np.asarray(n, dtype=complex)
    k = omega * n / c
    nu = np.asarray(nu, dtype=complex)
    phi = (nu**2 - n**2) / n**2
    if not Z < zeta:
        raise GeometryViolated(f"sublayer needs Z < zeta, got Z={Z}, zeta={zeta}")
    if variant == "paper":
        mu = 0.5 * (zeta + Z)
        pref = _FOUR_PI_SQ_SQ * rho * phi
        hb = form_factor(2 * R * k)
        K = pref * hb * (np.exp(-1j * k * Z) - np.exp(-1j * k * zeta)) * np.exp(-1j * k * mu)
        Kp = pref * hb * (np.exp(1j * k * zeta) - np.exp(1j * k * Z)) * np.exp(1j * k * mu)
        T = pref / 3.0 * (np.exp(-1j * k * Z) - np.exp(-1j * k * zeta)) * np.exp(1j * k * mu)
    else:
        vol = np.pi * R**3
        hb = form_factor(2 * R * k)
        K = phi * rho * vol * hb * (np.exp(-2j * k * Z) - np.exp(-2j * k * zeta)) / (zeta - Z)
        Kp = phi * rho * vol * hb * (np.exp(2j * k * zeta) - np.exp(2j * k * Z)) / (zeta - Z)
        T = phi * rho * (4.0 * np.pi / 3.0) * R**3 * (0.5j * k)
    return K, Kp, T


def _sublayer_amplitudes(sub: CompressedSublayer, n, omega, variant: str, c: float):
    return slab_amplitudes(sub.rho, sub.nu(np.asarray(omega, dtype=float)), sub.zeta, sub.Z, sub.R, n, omega, variant, c)


def sublayer_twoport(sub: CompressedSublayer, n, omega, variant: str = "derived", c: float = 1.0) -> TwoPort:
    """Averaged first-order two-port of a particle slab, referenced to ``zeta`` (top) and ``Z`` (bottom)."""
    K, Kp, T = _sublayer_amplitudes(sub, n, omega, variant, c)
    k = np.asarray(omega, dtype=float) * np.asarray(n, dtype=complex) / c
    t = (1.0 + T) * np.exp(1j * k * (sub.zeta - sub.Z))
    return TwoPort(K * np.exp(2j * k * sub.zeta), t, Kp * np.exp(-2j * k * sub.Z), t, sub.zeta, sub.Z)


def series_reflectance(upper: TwoPort, lower_r_top, gap_phase, tol: float = SERIES_TOL, max_terms: int = MAX_TERMS):
    """Multiple-bounce sum for ``upper`` stacked on a reflector ``lower_r_top`` across a gap.

    ``r = r_top + t_down t_up sum_{k>=0} r_l p^2 (r_bottom r_l p^2)^k`` truncated at
    the first ``K`` terms whose geometric tail is below ``tol``. ``lower_r_top``
    may be a :class:`TwoPort` or its top reflection coefficient.

    Returns
    -------
    (r_total, terms_used)
        ``terms_used`` counts the ``r_top`` term plus the bounce terms and is
        the maximum over any broadcast frequencies.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    rl = lower_r_top.r_top if isinstance(lower_r_top, TwoPort) else lower_r_top
    rl = np.asarray(rl, dtype=complex)
    p2 = np.asarray(gap_phase, dtype=complex) ** 2
    a = np.asarray(upper.t_down) * np.asarray(upper.t_up) * rl * p2
    s = np.asarray(upper.r_bottom) * rl * p2
    q = np.abs(s)
    if np.any(q >= 1):
        raise SeriesDiverges(f"bounce ratio |r_b r_t p^2| = {q.max():.6g} >= 1")
    aa = np.abs(a)
    with np.errstate(divide="ignore", invalid="ignore"):
        need = np.where(
            aa == 0,
            0.0,
            np.where(
                q == 0,
                1.0,
                np.ceil(np.log(tol * (1 - q) / np.where(aa == 0, 1, aa)) / np.log(np.where(q == 0, 0.5, q))),
            ),
        )
    need = np.where(aa / (1 - q) < tol, 0.0, np.maximum(need, 1.0))
    K = int(need.max()) if need.size else 0
    if K > max_terms:
        raise MaxTermsExceeded(f"{K} terms needed, max_terms={max_terms}")
    Kk = need.astype(float)
    # partial geometric sum a (1 - s^K)/(1 - s)
    partial = a * (1 - s**Kk) / (1 - s)
    return _scalar(np.asarray(upper.r_top) + partial), 1 + K


def closed_form_reflectance(upper: TwoPort, lower_r_top, gap_phase):
    rl = lower_r_top.r_top if isinstance(lower_r_top, TwoPort) else lower_r_top
    p2 = np.asarray(gap_phase, dtype=complex) ** 2
    return upper.r_top + upper.t_down * upper.t_up * rl * p2 / (1 - upper.r_bottom * rl * p2)


# --- stacks -----------------------------------------------------------------


def stack_elements(stack: CompressedStack, omega, variant: str = "derived"):
    """Scattering elements from top to bottom with the index of the medium below each.

    Returns a list of ``(TwoPort, n_below)``; the medium above element 0 is the
    background and the last layer is a half-space.
    """
    omega = np.asarray(omega, dtype=float)
    c = stack.c
    out = []
    n_above = np.asarray(stack.n_background(omega), dtype=complex) * np.ones_like(omega, dtype=complex)
    for layer in stack.layers:
        n_here = np.asarray(layer.n(omega), dtype=complex) * np.ones_like(omega, dtype=complex)
        out.append((interface_twoport(n_above, n_here, layer.z), n_here))
        if layer.sublayer is not None:
            out.append((sublayer_twoport(layer.sublayer, n_here, omega, variant, c), n_here))
        n_above = n_here
    return out


def _compose_series(elements, omega, c, tol, max_terms):
    omega = np.asarray(omega, dtype=float)
    lower, _ = elements[-1]
    r = lower.r_top
    z_lower = lower.z_top
    terms = 1
    for e, n_gap in reversed(elements[:-1]):
        p = np.exp(1j * omega * n_gap / c * (e.z_bottom - z_lower))
        r, used = series_reflectance(e, r, p, tol, max_terms)
        terms = max(terms, used)
        z_lower = e.z_top
    return np.asarray(r), z_lower, terms


def _twoport_to_transfer(tp: TwoPort):
    """T with [a_top, b_top] = T [a_bottom, b_bottom] (bottom = upgoing-in / downgoing-out side)."""
    td = tp.t_down
    return (1 / td, -tp.r_bottom / td, tp.r_top / td, tp.t_up - tp.r_top * tp.r_bottom / td)


def _interface_transfer(n_a, n_b):
    # continuity of the field and its normal derivative
    eta = n_b / n_a
    return (0.5 * (1 + eta), 0.5 * (1 - eta), 0.5 * (1 - eta), 0.5 * (1 + eta))


def _compose_oracle(stack: CompressedStack, omega, variant):
    omega = np.asarray(omega, dtype=float)
    c = stack.c
    ones = np.ones_like(omega, dtype=complex)
    items = []  # (kind, payload, z_top, z_bottom, n_below)
    n_above = np.asarray(stack.n_background(omega), dtype=complex) * ones
    for layer in stack.layers:
        n_here = np.asarray(layer.n(omega), dtype=complex) * ones
        if np.any(n_above == 0):
            raise DegenerateInterface("zero index above interface")
        items.append((_interface_transfer(n_above, n_here), layer.z, layer.z, n_here))
        if layer.sublayer is not None:
            tp = sublayer_twoport(layer.sublayer, n_here, omega, variant, c)
            items.append((_twoport_to_transfer(tp), tp.z_top, tp.z_bottom, n_here))
        n_above = n_here
    A = ones.copy()
    B = np.zeros_like(ones)
    z_cur = None
    for T, z_top, z_bottom, n_below in reversed(items):
        if z_cur is not None:
            k = omega * n_below / c
            d = z_bottom - z_cur
            A, B = A * np.exp(-1j * k * d), B * np.exp(1j * k * d)
        A, B = T[0] * A + T[1] * B, T[2] * A + T[3] * B
        z_cur = z_top
    return B / A, z_cur


def stack_response(
    stack: CompressedStack,
    omega,
    mode: str = "series",
    variant: str = "derived",
    *,
    z_ref: float = 0.0,
    tol: float = SERIES_TOL,
    max_terms: int = MAX_TERMS,
    return_terms: bool = False,
):
    """Reflectance of the whole stack for a downgoing wave, referenced to the plane ``z_ref``.

    ``mode="series"`` composes interfaces and sublayers bottom-up with
    :func:`series_reflectance`; ``mode="oracle"`` multiplies 2x2 transfer
    matrices. An empty stack reflects nothing.
    """
    omega = np.asarray(omega, dtype=float)
    _check_variant(variant)
    if not stack.layers:
        out = np.zeros(omega.shape, dtype=complex)
        return (_scalar(out), 0) if return_terms else _scalar(out)
    k0 = omega * np.asarray(stack.n_background(omega), dtype=complex) / stack.c
    if mode == "series":
        r, z_top, terms = _compose_series(stack_elements(stack, omega, variant), omega, stack.c, tol, max_terms)
    elif mode == "oracle":
        r, z_top = _compose_oracle(stack, omega, variant)
        terms = 0
    else:
        raise ValueError(f"mode must be 'series' or 'oracle', got {mode!r}")
    out = _scalar(r * np.exp(2j * k0 * (z_ref - z_top)))
    return (out, terms) if return_terms else out


def detector_field(stack: CompressedStack, beam: IncidentBeam, omega, x0: float, mode="series", variant="derived"):
    """Scattered field at height ``x0`` above the stack (the incident wave is not included)."""
    omega = np.asarray(omega, dtype=float)
    k0 = omega * np.asarray(stack.n_background(omega), dtype=complex) / stack.c
    return _scalar(beam.f(omega) * stack_response(stack, omega, mode, variant) * np.exp(1j * k0 * x0))


# --- batched plain stacks ---------------------------------------------------


def layered_reflectance_series(n, z, omega, c: float = 1.0, tol: float = SERIES_TOL, max_terms: int = MAX_TERMS):
    """Reflectance at z = 0 of plain interface stacks, batched over leading axes.

    ``n[..., 0]`` is the medium above the first interface, ``n[..., -1]`` the
    half-space below; ``z[..., j]`` is the height of interface ``j``.
    ``omega`` broadcasts against the leading axes.
    """
    n = np.asarray(n, dtype=complex)
    z = np.asarray(z, dtype=float)
    omega = np.asarray(omega, dtype=float)
    J = z.shape[-1]
    if n.shape[-1] != J + 1:
        raise ValueError("need one more index than interfaces")
    r_b, _ = fresnel(n[..., J - 1], n[..., J])
    R = np.asarray(r_b)
    terms = 1
    for i in range(J - 2, -1, -1):
        na, nb = n[..., i], n[..., i + 1]
        tp = interface_twoport(na, nb, 0.0)
        p = np.exp(1j * omega * nb / c * (z[..., i] - z[..., i + 1]))
        R, used = series_reflectance(tp, R, p, tol, max_terms)
        R = np.asarray(R)
        terms = max(terms, used)
    k0 = omega * n[..., 0] / c
    return R * np.exp(-2j * k0 * z[..., 0]), terms


def layered_reflectance_oracle(n, z, omega, c: float = 1.0):
    """Transfer-matrix counterpart of :func:`layered_reflectance_series`."""
    n = np.asarray(n, dtype=complex)
    z = np.asarray(z, dtype=float)
    omega = np.asarray(omega, dtype=float)
    J = z.shape[-1]
    A = np.ones(np.broadcast_shapes(n.shape[:-1], omega.shape), dtype=complex)
    B = np.zeros_like(A)
    for i in range(J - 1, -1, -1):
        if i < J - 1:
            k = omega * n[..., i + 1] / c
            d = z[..., i] - z[..., i + 1]
            A, B = A * np.exp(-1j * k * d), B * np.exp(1j * k * d)
        m11, m12, m21, m22 = _interface_transfer(n[..., i], n[..., i + 1])
        A, B = m11 * A + m12 * B, m21 * A + m22 * B
    k0 = omega * n[..., 0] / c
    return (B / A) * np.exp(-2j * k0 * z[..., 0])


# --- averaged random layer ---------------------------------------------------


def expected_scatter(
    sub: CompressedSublayer,
    n,
    beam: IncidentBeam,
    omega,
    x3: float,
    side: str = "reflect",
    variant: str = "derived",
    *,
    n_rate=0.0,
    c: float = 1.0,
):
    """Averaged first-order field perturbation of a particle slab in a medium of index ``n``.

    ``n`` is the background index at rest; the compression state of ``sub``
    is applied through ``n_rate``. Reflection is observed above the slab
    (``x3 > zeta + R``), transmission below it (``x3 < Z - R``).
    """
    _check_variant(variant)
    omega = np.asarray(omega, dtype=float)
    nb = np.asarray(n, dtype=complex) + sub.delta * np.asarray(n_rate, dtype=complex)
    k = omega * nb / c
    f = beam.f(omega)
    K, _, T = _sublayer_amplitudes(sub, nb, omega, variant, c)
    if side == "reflect":
        if not x3 > sub.zeta + sub.R:
            raise GeometryViolated(f"reflection needs x3 > zeta + R, got x3={x3}")
        return _scalar(f * K * np.exp(1j * k * x3))
    if side == "transmit":
        if not x3 < sub.Z - sub.R:
            raise GeometryViolated(f"transmission needs x3 < Z - R, got x3={x3}")
        return _scalar(f * T * np.exp(-1j * k * x3))
    raise ValueError("side must be 'reflect' or 'transmit'")


# --- data functionals ----------------------------------------------------


def _cexpm1(x):
    """``exp(x) - 1`` for complex ``x`` without cancellation near 0."""
    x = np.asarray(x, dtype=complex)
    a, b = x.real, x.imag
    return np.expm1(a) * np.cos(b) - 2 * np.sin(0.5 * b) ** 2 + 1j * np.exp(a) * np.sin(b)


def datum_m0(n1, n1_rate, z1: float, omega, delta, c: float = 1.0):
    """``((n1 - 1)/(n1 + 1)) exp(-2 i w z1 / c)`` with ``n1 -> n1 + delta n1'``."""
    nb = np.asarray(n1, dtype=complex) + np.asarray(delta) * np.asarray(n1_rate, dtype=complex)
    if np.any(nb == -1):
        raise PoleHit("n1 + delta n1' = -1")
    omega = np.asarray(omega, dtype=float)
    return _scalar((nb - 1) / (nb + 1) * np.exp(-2j * omega * z1 / c))


def datum_mj(n_j, n_j_rate, n_next, n_next_rate, z_next: float, z_next_rate: float, omega, delta, c: float = 1.0):
    delta = np.asarray(delta, dtype=float)
    a = np.asarray(n_j, dtype=complex) + delta * np.asarray(n_j_rate, dtype=complex)
    b = np.asarray(n_next, dtype=complex) + delta * np.asarray(n_next_rate, dtype=complex)
    if np.any(a + b == 0):
        raise PoleHit("n_j + n_{j+1} = 0")
    zb = z_next + delta * z_next_rate
    omega = np.asarray(omega, dtype=float)
    return _scalar((b - a) / (b + a) * np.exp(-2j * omega / c * a * zb))


@dataclass(frozen=True)
class SublayerParams:
    """Unknowns of one random sublayer: density, particle index and geometry with rates."""

    rho: float
    nu: complex
    nu_rate: complex
    zeta: float
    zeta_rate: float
    Z: float
    Z_rate: float

    def as_tuple(self):
        return (self.rho, self.nu, self.nu_rate, self.zeta, self.zeta_rate, self.Z, self.Z_rate)


def datum_Mj(S: SublayerParams, n_j, n_j_rate, omega, delta, variant: str = "derived", c: float = 1.0):
    """Sublayer data functional; ``S.nu`` and ``S.nu_rate`` may be arrays over ``omega``.

    Only the rest geometry is checked: compression states may move the bounds
    past each other, where the formula is still evaluated.
    """
    _check_variant(variant)
    if not (S.Z < S.zeta):
        raise GeometryViolated(f"sublayer needs Z < zeta at rest, got Z={S.Z}, zeta={S.zeta}")
    delta = np.asarray(delta, dtype=float)
    omega = np.asarray(omega, dtype=float)
    nb = np.asarray(n_j, dtype=complex) + delta * np.asarray(n_j_rate, dtype=complex)
    nub = np.asarray(S.nu, dtype=complex) + delta * np.asarray(S.nu_rate, dtype=complex)
    zeta = S.zeta + delta * S.zeta_rate
    Z = S.Z + delta * S.Z_rate
    amp = S.rho * (nub**2 - nb**2)
    k = omega / c * nb
    if variant == "paper":
        out = amp * (np.exp(-0.5j * k * (zeta + 3 * Z)) - np.exp(-0.5j * k * (3 * zeta + Z)))
    else:
        d = zeta - Z
        # (e^{-2ikZ} - e^{-2ik zeta})/d = e^{-2ikZ} (1 - e^{-2ik d})/d, stable as d -> 0
        x = -2j * k * d
        safe = np.where(d == 0, 1.0, d)
        ratio = np.where(d == 0, 2j * k, -_cexpm1(x) / safe)
        out = amp * np.exp(-2j * k * Z) * ratio
    return _scalar(out)


def calibration(variant: str, R: float, k):
    """Factor relating the relative sublayer reflection ``K`` to ``M_j / n_j^2``."""
    _check_variant(variant)
    hb = form_factor(2 * R * np.asarray(k))
    if variant == "paper":
        return _FOUR_PI_SQ_SQ * hb
    if R <= 0:
        raise ValueError("derived-variant calibration needs a particle radius R > 0")
    return np.pi * R**3 * hb


def require_spectrum(f, what: str = "incident spectrum"):
    f = np.asarray(f)
    if np.any(f == 0):
        raise ZeroSpectrum(f"{what} vanishes on the grid")
    return f
