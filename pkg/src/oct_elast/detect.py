"""Spectrometer intensities, three-measurement phase retrieval and time gating.

Fields are the scattered field at the detector height ``x0`` on the axis. The
detector records ``|E|`` and ``|E + ref_i|`` for two reference waves; the field
is recovered by intersecting the three circles, written as a 2x2 linear system.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    CollinearReferences,
    InconsistentIntensities,
    NonuniformGrid,
    SchemaError,
    ZeroSpectrum,
)
from .medium import ComplexTable, ScanGrid

EPS_COLLINEAR = 1e-9
MIN_GATE_SAMPLES = 256


@dataclass(frozen=True)
class DetectorSetup:
    """Detector height above the stack and the two reference waves at the detector."""

    x0: float = 1.0
    ref1: ComplexTable = field(default_factory=lambda: ComplexTable.constant(1.0))
    ref2: ComplexTable = field(default_factory=lambda: ComplexTable.constant(1j))

    def references(self, omega):
        omega = np.asarray(omega, dtype=float)
        r1 = np.asarray(self.ref1(omega), dtype=complex) * np.ones(omega.shape)
        r2 = np.asarray(self.ref2(omega), dtype=complex) * np.ones(omega.shape)
        return r1, r2

    def check(self, omega) -> None:
        r1, r2 = self.references(omega)
        _check_triangle(r1, r2)

    @classmethod
    def with_scale(cls, x0: float, scale: float) -> DetectorSetup:
        """Default references ``A`` and ``iA``."""
        return cls(float(x0), ComplexTable.constant(scale), ComplexTable.constant(1j * scale))


def _check_triangle(r1, r2):
    det = np.imag(np.conj(r1) * r2)
    bad = np.abs(det) <= EPS_COLLINEAR * np.abs(r1) * np.abs(r2)
    if np.any(bad):
        raise CollinearReferences("0, ref1 and ref2 are (nearly) collinear")
    return det


def intensities(E, r1, r2):
    """``(|E|, |E + r1|, |E + r2|)``."""
    E = np.asarray(E, dtype=complex)
    return np.abs(E), np.abs(E + r1), np.abs(E + r2)


def phase_retrieve(m0, m1, m2, r1, r2, *, tol=None, return_residual: bool = False):
    """Recover ``E`` from ``m0 = |E|`` and ``m_i = |E + r_i|``.

    Solves ``2 Re(E conj r_i) = m_i^2 - m0^2 - |r_i|^2`` for ``(Re E, Im E)`` and
    checks the result against the circle ``|E| = m0``.

    Raises
    ------
    CollinearReferences
        If ``Im(conj(r1) r2)`` is below ``1e-9 |r1| |r2|``.
    InconsistentIntensities
        If ``| |E| - m0 |`` exceeds ``tol`` (default ``1e-6 max(m0, 1)``).
    """
    m0, m1, m2 = (np.asarray(m, dtype=float) for m in (m0, m1, m2))
    r1 = np.asarray(r1, dtype=complex)
    r2 = np.asarray(r2, dtype=complex)
    det = _check_triangle(r1, r2)
    b1 = 0.5 * ((m1 - m0) * (m1 + m0) - np.abs(r1) ** 2)
    b2 = 0.5 * ((m2 - m0) * (m2 + m0) - np.abs(r2) ** 2)
    # [[r1x, r1y], [r2x, r2y]] @ [Ex, Ey] = [b1, b2]
    ex = (b1 * r2.imag - b2 * r1.imag) / det
    ey = (r1.real * b2 - r2.real * b1) / det
    E = ex + 1j * ey
    resid = np.abs(np.abs(E) - m0)
    lim = 1e-6 * np.maximum(m0, 1.0) if tol is None else tol
    if np.any(resid > lim):
        raise InconsistentIntensities(f"third circle misses the intersection by {resid.max():.3g}")
    E = E if E.ndim else complex(E)
    if return_residual:
        return E, (resid if resid.ndim else float(resid))
    return E


# --- normalization ----------------------------------------------------------


@dataclass(frozen=True)
class DatumContext:
    """What is known about the medium above the reflector being normalized.

    ``kind`` is ``m0`` (first interface), ``mj`` (interface at the bottom of a
    known layer) or ``Mj`` (random sublayer inside a known layer). For the last
    two, ``n_layer`` is the compressed index of the layer the reflector sits in,
    ``z_layer_top`` the compressed height of its top boundary and
    ``two_way`` the accumulated downward times upward transmission from the
    background to that boundary.
    """

    kind: str
    x0: float
    c: float = 1.0
    z1: float = 0.0
    n_layer: object = None
    z_layer_top: float = 0.0
    two_way: object = 1.0
    variant: str = "derived"
    R: float = 0.0


def _col(a, ndim: int):
    """Append trailing axes so per-frequency arrays broadcast against (n_omega, n_delta)."""
    a = np.asarray(a)
    if 1 <= a.ndim < ndim:
        return a.reshape(a.shape + (1,) * (ndim - a.ndim))
    return a


def normalize_to_datum(E, omega, beam, ctx: DatumContext):
    """Map the detector field of one isolated return to the matching data functional.

    ``E`` has shape ``(n_omega,)`` or ``(n_omega, n_delta)``; per-frequency
    inputs broadcast along the first axis.
    """
    from .forward import calibration

    omega = np.asarray(omega, dtype=float)
    E = np.asarray(E, dtype=complex)
    nd = E.ndim
    f = np.asarray(beam.f(omega), dtype=complex)
    if np.any(f == 0):
        raise ZeroSpectrum("incident spectrum vanishes on the grid")
    k0 = _col(omega / ctx.c, nd)
    base = _col(f, nd) * np.exp(1j * k0 * ctx.x0)
    if ctx.kind == "m0":
        return -E / base
    if ctx.kind not in ("mj", "Mj"):
        raise ValueError(f"unknown datum kind {ctx.kind!r}")
    n = _col(np.asarray(ctx.n_layer, dtype=complex), nd)
    kj = k0 * n
    tw = _col(np.asarray(ctx.two_way, dtype=complex), nd)
    K = E * np.exp(-2j * kj * ctx.z_layer_top) / (base * np.exp(-2j * k0 * ctx.z1) * tw)
    if ctx.kind == "mj":
        return -K
    return n**2 * K / calibration(ctx.variant, ctx.R, kj)


# --- time gating -------------------------------------------------------------


@dataclass(frozen=True)
class GatingWindow:
    """Raised-cosine window: flat within ``t_halfwidth (1 - taper)`` of the centre, zero beyond ``t_halfwidth``."""

    t_center: float
    t_halfwidth: float
    taper: float = 0.25

    def __post_init__(self):
        if not self.t_halfwidth > 0:
            raise ValueError("t_halfwidth must be positive")
        if not 0.0 <= self.taper <= 1.0:
            raise ValueError("taper must lie in [0, 1]")

    def __call__(self, t, period: float | None = None):
        t = np.asarray(t, dtype=float)
        d = t - self.t_center
        if period is not None:
            d = (d + 0.5 * period) % period - 0.5 * period
        a = np.abs(d)
        flat = self.t_halfwidth * (1.0 - self.taper)
        w = np.zeros_like(a)
        w[a <= flat] = 1.0
        roll = (a > flat) & (a < self.t_halfwidth)
        if np.any(roll):
            x = (a[roll] - flat) / (self.t_halfwidth - flat)
            w[roll] = 0.5 * (1.0 + np.cos(np.pi * x))
        return w


def check_uniform(omegas, rtol: float = 1e-9) -> float:
    """Return the step of a uniform grid with at least 256 samples."""
    omegas = np.asarray(omegas, dtype=float)
    if omegas.ndim != 1 or omegas.size < MIN_GATE_SAMPLES:
        raise NonuniformGrid(f"time gating needs >= {MIN_GATE_SAMPLES} uniform samples, got {omegas.size}")
    d = np.diff(omegas)
    step = d.mean()
    if np.any(np.abs(d - step) > rtol * abs(step)):
        raise NonuniformGrid("frequency grid is not uniform")
    return float(step)


def time_axis(omegas) -> tuple[np.ndarray, float]:
    """Delay of each FFT bin and the (circular) period ``2 pi / d omega``."""
    step = check_uniform(omegas)
    N = np.asarray(omegas).size
    period = 2 * np.pi / step
    return np.arange(N) * period / N, period


def time_gate(spectrum, omegas, window: GatingWindow, axis: int = 0):
    """Window the delay-domain response of ``spectrum`` sampled on ``omegas``.

    A factor ``exp(i w tau)`` in the spectrum is a return at delay ``tau``; the
    delay axis is circular with period ``2 pi / d omega``.
    """
    t, period = time_axis(omegas)
    S = np.asarray(spectrum, dtype=complex)
    w = window(t, period)
    shape = [1] * S.ndim
    shape[axis] = -1
    s = np.fft.fft(S, axis=axis)
    return np.fft.ifft(s * w.reshape(shape), axis=axis)


# --- measurement files -------------------------------------------------------


@dataclass(frozen=True, eq=False)
class MeasurementSet:
    """Per (omega, delta): intensities with references and/or the complex field."""

    grid: ScanGrid
    field: np.ndarray | None = None  # (n_omega, n_delta)
    m: np.ndarray | None = None  # (3, n_omega, n_delta)
    ref1: np.ndarray | None = None  # (n_omega,)
    ref2: np.ndarray | None = None

    def retrieved_field(self) -> np.ndarray:
        if self.m is None:
            if self.field is None:
                raise SchemaError("measurement set has neither intensities nor field")
            return self.field
        r1 = self.ref1[:, None]
        r2 = self.ref2[:, None]
        return phase_retrieve(self.m[0], self.m[1], self.m[2], r1, r2)


def _fmt(x: float) -> str:
    return "%.17g" % x


FIELD_HEADER = ["omega", "delta", "re", "im"]
INTENSITY_HEADER = ["omega", "delta", "m0", "m1", "m2", "ref1_re", "ref1_im", "ref2_re", "ref2_im"]


def write_field_csv(path, grid: ScanGrid, E) -> None:
    E = np.asarray(E, dtype=complex)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(FIELD_HEADER)
        for i, om in enumerate(grid.omegas):
            for j, de in enumerate(grid.deltas):
                w.writerow([_fmt(om), _fmt(de), _fmt(E[i, j].real), _fmt(E[i, j].imag)])


def write_intensity_csv(path, grid: ScanGrid, m, ref1, ref2) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(INTENSITY_HEADER)
        for i, om in enumerate(grid.omegas):
            for j, de in enumerate(grid.deltas):
                w.writerow(
                    [_fmt(om), _fmt(de)]
                    + [_fmt(m[k][i, j]) for k in range(3)]
                    + [_fmt(ref1[i].real), _fmt(ref1[i].imag), _fmt(ref2[i].real), _fmt(ref2[i].imag)]
                )


def read_measurements(path) -> MeasurementSet:
    """Read either CSV schema; rows must cover the full (omega, delta) lattice."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise SchemaError(f"{path}: empty file")
    header = [h.strip() for h in rows[0]]
    if header not in (FIELD_HEADER, INTENSITY_HEADER):
        raise SchemaError(f"{path}: unknown header {header}")
    try:
        data = np.array([[float(v) for v in r] for r in rows[1:] if r], dtype=float)
    except ValueError as exc:
        raise SchemaError(f"{path}: non-numeric value ({exc})") from exc
    if data.ndim != 2 or data.shape[0] == 0 or data.shape[1] != len(header):
        raise SchemaError(f"{path}: ragged or empty table")
    omegas = np.unique(data[:, 0])
    deltas = np.unique(data[:, 1])
    if data.shape[0] != omegas.size * deltas.size:
        raise SchemaError(f"{path}: {data.shape[0]} rows do not fill a {omegas.size}x{deltas.size} grid")
    grid = ScanGrid(omegas, deltas)
    order = np.lexsort((data[:, 1], data[:, 0]))
    data = data[order]
    if not (np.array_equal(data[:, 0], np.repeat(omegas, deltas.size)) and np.array_equal(data[:, 1], np.tile(deltas, omegas.size))):
        raise SchemaError(f"{path}: duplicate or missing grid points")
    shp = (omegas.size, deltas.size)
    if header == FIELD_HEADER:
        return MeasurementSet(grid, field=(data[:, 2] + 1j * data[:, 3]).reshape(shp))
    m = np.stack([data[:, k].reshape(shp) for k in (2, 3, 4)])
    r1 = (data[:, 5] + 1j * data[:, 6]).reshape(shp)[:, 0]
    r2 = (data[:, 7] + 1j * data[:, 8]).reshape(shp)[:, 0]
    return MeasurementSet(grid, m=m, ref1=r1, ref2=r2)
