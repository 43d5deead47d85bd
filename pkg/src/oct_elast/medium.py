"""Layer stack description, random sublayers and the affine compression law.

Coordinates: ``x3`` points up, the detector sits above the stack and layer
``j`` occupies ``z[j+1] < x3 < z[j]``. The deepest layer is a half-space.
A compression state ``delta`` moves every boundary and index affinely,
``z(delta) = z + delta * z_rate``, ``n(w, delta) = n(w) + delta * n_rate(w)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import OrderingViolated, OutOfBand, SchemaError
from .spectra import VACUUM, DispersionModel, model_from_json, model_to_json, refractive_index


@dataclass(frozen=True, eq=False)
class ComplexTable:
    """Complex function of frequency stored as samples, or a constant when ``omegas`` is None."""

    values: np.ndarray
    omegas: np.ndarray | None = None

    def __post_init__(self):
        vals = np.atleast_1d(np.asarray(self.values, dtype=complex))
        if self.omegas is None:
            if vals.size != 1:
                raise ValueError("constant table takes exactly one value")
        else:
            om = np.asarray(self.omegas, dtype=float)
            if om.shape != vals.shape:
                raise ValueError("omegas and values must have the same shape")
            if om.size > 1 and np.any(np.diff(om) <= 0):
                raise ValueError("table frequencies must be strictly increasing")
            object.__setattr__(self, "omegas", om)
        object.__setattr__(self, "values", vals)

    @classmethod
    def constant(cls, value: complex) -> ComplexTable:
        return cls(np.array([complex(value)]))

    @property
    def is_constant(self) -> bool:
        return self.omegas is None

    def __call__(self, omega):
        omega = np.asarray(omega, dtype=float)
        if self.omegas is None:
            out = np.full(omega.shape, self.values[0])
            return out if out.ndim else complex(out)
        if self.omegas.size == 1:
            if not np.allclose(omega, self.omegas[0]):
                raise OutOfBand("single-sample table evaluated off its frequency")
            out = np.full(omega.shape, self.values[0])
            return out if out.ndim else complex(out)
        lo, hi = self.omegas[0], self.omegas[-1]
        tol = 1e-12 * (hi - lo)
        if np.any(omega < lo - tol) or np.any(omega > hi + tol):
            raise OutOfBand(f"table evaluated outside [{lo}, {hi}]")
        out = np.interp(omega, self.omegas, self.values.real) + 1j * np.interp(
            omega, self.omegas, self.values.imag
        )
        return out if out.ndim else complex(out)

    def __eq__(self, other):
        if not isinstance(other, ComplexTable):
            return NotImplemented
        same_grid = (self.omegas is None and other.omegas is None) or (
            self.omegas is not None
            and other.omegas is not None
            and np.array_equal(self.omegas, other.omegas)
        )
        return same_grid and np.array_equal(self.values, other.values)

    def to_json(self) -> list:
        if self.omegas is None:
            v = complex(self.values[0])
            return [[0.0, v.real, v.imag]]
        return [[float(w), float(v.real), float(v.imag)] for w, v in zip(self.omegas, self.values)]

    @classmethod
    def from_json(cls, rows) -> ComplexTable:
        """Rows ``[[omega, re, im], ...]``; a single row is read as a constant."""
        try:
            arr = np.asarray(rows, dtype=float)
            if arr.ndim == 1 and arr.size == 2:  # bare [re, im]
                return cls.constant(complex(arr[0], arr[1]))
            if arr.ndim != 2 or arr.shape[1] != 3:
                raise ValueError("expected rows of [omega, re, im]")
            if arr.shape[0] == 1:
                return cls.constant(complex(arr[0, 1], arr[0, 2]))
            return cls(arr[:, 1] + 1j * arr[:, 2], arr[:, 0])
        except (TypeError, ValueError) as exc:
            raise SchemaError(f"bad complex table: {exc}") from exc


def as_table(obj) -> ComplexTable:
    if isinstance(obj, ComplexTable):
        return obj
    if callable(obj):
        raise TypeError("rates must be ComplexTable instances or constants")
    return ComplexTable.constant(complex(obj))


@dataclass(frozen=True)
class LayerBoundary:
    z: float
    z_rate: float = 0.0

    def at(self, delta: float) -> float:
        return self.z + delta * self.z_rate


@dataclass(frozen=True)
class RandomSublayer:
    """Slab ``Z < x3 < zeta`` of identical balls of radius ``R``, ``rho`` per unit area."""

    rho: float
    nu_model: DispersionModel
    nu_rate: ComplexTable
    zeta: float
    zeta_rate: float
    Z: float
    Z_rate: float
    R: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "nu_rate", as_table(self.nu_rate))
        if not self.rho > 0:
            raise ValueError("particle density rho must be positive")
        if self.R < 0:
            raise ValueError("particle radius must be non-negative")
        if not self.Z < self.zeta:
            raise OrderingViolated(f"sublayer requires Z < zeta, got Z={self.Z}, zeta={self.zeta}")

    def nu(self, omega):
        return refractive_index(self.nu_model(omega))

    def at(self, delta: float) -> CompressedSublayer:
        return CompressedSublayer(
            rho=self.rho,
            zeta=self.zeta + delta * self.zeta_rate,
            Z=self.Z + delta * self.Z_rate,
            R=self.R,
            nu_model=self.nu_model,
            nu_rate=self.nu_rate,
            delta=delta,
        )


@dataclass(frozen=True)
class Layer:
    optics: DispersionModel
    optics_rate: ComplexTable
    boundary_top: LayerBoundary
    sublayer: RandomSublayer | None = None

    def __post_init__(self):
        object.__setattr__(self, "optics_rate", as_table(self.optics_rate))

    def index(self, omega):
        return refractive_index(self.optics(omega))

    def index_rate(self, omega):
        return self.optics_rate(omega)


@dataclass(frozen=True)
class ScanGrid:
    """Frequency / compression sampling lattice."""

    omegas: np.ndarray
    deltas: np.ndarray

    def __post_init__(self):
        om = np.asarray(self.omegas, dtype=float)
        de = np.asarray(self.deltas, dtype=float)
        if om.ndim != 1 or om.size < 1 or np.any(np.diff(om) <= 0):
            raise ValueError("omegas must be a strictly increasing 1-d list")
        if de.ndim != 1 or de.size < 1 or np.any(np.diff(de) <= 0):
            raise ValueError("deltas must be a strictly increasing 1-d list")
        if not np.any(de == 0.0):
            raise ValueError("deltas must contain the rest state 0")
        object.__setattr__(self, "omegas", om)
        object.__setattr__(self, "deltas", de)

    def __eq__(self, other):
        return (
            isinstance(other, ScanGrid)
            and np.array_equal(self.omegas, other.omegas)
            and np.array_equal(self.deltas, other.deltas)
        )

    @property
    def shape(self) -> tuple[int, int]:
        return self.omegas.size, self.deltas.size

    def is_uniform(self, rtol: float = 1e-9) -> bool:
        if self.omegas.size < 2:
            return False
        d = np.diff(self.omegas)
        return bool(np.all(np.abs(d - d.mean()) <= rtol * abs(d.mean())))

    @classmethod
    def linspace(cls, w_min: float, w_max: float, n: int, deltas) -> ScanGrid:
        return cls(np.linspace(w_min, w_max, n), np.sort(np.asarray(deltas, dtype=float)))


@dataclass(frozen=True)
class CompressedSublayer:
    rho: float
    zeta: float
    Z: float
    R: float
    nu_model: DispersionModel
    nu_rate: ComplexTable
    delta: float

    def nu(self, omega):
        return refractive_index(self.nu_model(omega)) + self.delta * self.nu_rate(omega)


@dataclass(frozen=True)
class CompressedLayer:
    z: float
    optics: DispersionModel
    optics_rate: ComplexTable
    delta: float
    sublayer: CompressedSublayer | None = None

    def n(self, omega):
        return refractive_index(self.optics(omega)) + self.delta * self.optics_rate(omega)


@dataclass(frozen=True)
class CompressedStack:
    layers: tuple[CompressedLayer, ...]
    background: DispersionModel
    delta: float
    c: float = 1.0

    def n_background(self, omega):
        return refractive_index(self.background(omega))

    @property
    def boundaries(self) -> np.ndarray:
        return np.array([layer.z for layer in self.layers])


def _check_ordering(layers, delta: float) -> None:
    tops = [layer.boundary_top.at(delta) for layer in layers]
    for j in range(len(tops) - 1):
        if not tops[j] > tops[j + 1]:
            raise OrderingViolated(
                f"boundaries {j + 1} and {j + 2} cross at delta={delta}: {tops[j]} <= {tops[j + 1]}"
            )
    for j, layer in enumerate(layers):
        sub = layer.sublayer
        if sub is None:
            continue
        zeta = sub.zeta + delta * sub.zeta_rate
        Z = sub.Z + delta * sub.Z_rate
        bottom = tops[j + 1] if j + 1 < len(tops) else -np.inf
        if not (bottom < Z - sub.R and Z < zeta and zeta + sub.R < tops[j]):
            raise OrderingViolated(
                f"sublayer of layer {j + 1} leaves its layer at delta={delta}: "
                f"need {bottom} < Z={Z} < zeta={zeta} < {tops[j]}"
            )


@dataclass(frozen=True)
class MediumStack:
    """Ordered layers (top to bottom) below a homogeneous background.

    Ordering is checked eagerly at both ends of ``delta_range``; since every
    position is affine in delta this covers the whole interval.
    """

    layers: tuple[Layer, ...]
    background: DispersionModel = VACUUM
    delta_range: tuple[float, float] = (0.0, 0.0)
    c: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "layers", tuple(self.layers))
        lo, hi = (float(v) for v in self.delta_range)
        if lo > hi:
            raise ValueError("delta_range must be (lo, hi) with lo <= hi")
        object.__setattr__(self, "delta_range", (lo, hi))
        if self.c <= 0:
            raise ValueError("speed of light must be positive")
        for d in {lo, hi, 0.0}:
            _check_ordering(self.layers, d)

    @property
    def J(self) -> int:
        return len(self.layers)


def compress(stack: MediumStack, delta: float) -> CompressedStack:
    """Apply the affine compression law at ``delta``.

    Raises
    ------
    OrderingViolated
        If any boundary crossing occurs at this ``delta``.
    """
    delta = float(delta)
    _check_ordering(stack.layers, delta)
    layers = tuple(
        CompressedLayer(
            z=layer.boundary_top.at(delta),
            optics=layer.optics,
            optics_rate=layer.optics_rate,
            delta=delta,
            sublayer=None if layer.sublayer is None else layer.sublayer.at(delta),
        )
        for layer in stack.layers
    )
    return CompressedStack(layers, stack.background, delta, stack.c)


@dataclass(frozen=True)
class Diagnostic:
    layer: int  # 1-based; 0 for stack-wide issues
    code: str
    message: str


def validate(stack: MediumStack, grid: ScanGrid) -> list[Diagnostic]:
    """Check the hypotheses the recovery steps rely on. Never raises."""
    out: list[Diagnostic] = []
    w = grid.omegas
    J = stack.J

    bg = stack.background(w)
    if not np.allclose(bg, 0.0):
        out.append(Diagnostic(0, "background-not-vacuum", "background is not vacuum; layer stripping assumes n0 = 1"))
    if J and stack.layers[0].boundary_top.z_rate != 0.0:
        out.append(Diagnostic(1, "detector-distance", "z1' != 0: the detector distance must stay fixed"))

    for j, layer in enumerate(stack.layers, start=1):
        n = layer.index(w)
        nr = layer.index_rate(w)
        if np.all(nr == 0):
            out.append(Diagnostic(j, "first-interface-degenerate", "first-interface recovery degenerate: n' = 0 on the grid"))
        needs_decay = layer.sublayer is not None or j < J
        if needs_decay and not np.any(nr.imag > 0):
            out.append(Diagnostic(j, "decay-hypothesis", "no grid frequency with Im n' > 0"))
        sub = layer.sublayer
        if sub is None:
            continue
        if not (sub.Z_rate > sub.zeta_rate > 0):
            out.append(Diagnostic(j, "shrink-condition", "shrink condition violated: need Z' > zeta' > 0"))
        nu = sub.nu(w)
        nur = sub.nu_rate(w)
        # n'/n != nu'/nu  <=>  n' nu - nu' n != 0
        if not np.any(np.abs(nr * nu - nur * n) > 1e-12 * np.abs(n * nu)):
            out.append(Diagnostic(j, "contrast-degenerate", "n'/n = nu'/nu at every grid frequency"))

    for d in (stack.delta_range[0], stack.delta_range[1], grid.deltas[0], grid.deltas[-1]):
        try:
            _check_ordering(stack.layers, d)
        except OrderingViolated as exc:
            out.append(Diagnostic(0, "ordering", str(exc)))
            break
    return out


# --- JSON -----------------------------------------------------------------


def sublayer_to_json(sub: RandomSublayer) -> dict:
    return {
        "rho": sub.rho,
        "nu": model_to_json(sub.nu_model),
        "nu_rate": sub.nu_rate.to_json(),
        "zeta": sub.zeta,
        "zeta_rate": sub.zeta_rate,
        "Z": sub.Z,
        "Z_rate": sub.Z_rate,
        "R": sub.R,
    }


def stack_to_json(stack: MediumStack) -> dict:
    return {
        "c": stack.c,
        "background": model_to_json(stack.background),
        "delta_range": list(stack.delta_range),
        "layers": [
            {
                "optics": model_to_json(layer.optics),
                "optics_rate": layer.optics_rate.to_json(),
                "z": layer.boundary_top.z,
                "z_rate": layer.boundary_top.z_rate,
                "sublayer": None if layer.sublayer is None else sublayer_to_json(layer.sublayer),
            }
            for layer in stack.layers
        ],
    }


def stack_from_json(obj: dict, delta_range: tuple[float, float] | None = None) -> MediumStack:
    try:
        layers = []
        for L in obj["layers"]:
            sub = None
            s = L.get("sublayer")
            if s:
                sub = RandomSublayer(
                    rho=float(s["rho"]),
                    nu_model=model_from_json(s["nu"]),
                    nu_rate=ComplexTable.from_json(s.get("nu_rate", [[0.0, 0.0, 0.0]])),
                    zeta=float(s["zeta"]),
                    zeta_rate=float(s.get("zeta_rate", 0.0)),
                    Z=float(s["Z"]),
                    Z_rate=float(s.get("Z_rate", 0.0)),
                    R=float(s.get("R", 0.0)),
                )
            layers.append(
                Layer(
                    optics=model_from_json(L["optics"]),
                    optics_rate=ComplexTable.from_json(L.get("optics_rate", [[0.0, 0.0, 0.0]])),
                    boundary_top=LayerBoundary(float(L["z"]), float(L.get("z_rate", 0.0))),
                    sublayer=sub,
                )
            )
        if delta_range is None:
            delta_range = tuple(obj.get("delta_range", (0.0, 0.0)))
        background = model_from_json(obj["background"]) if "background" in obj else VACUUM
        return MediumStack(tuple(layers), background, delta_range, float(obj.get("c", 1.0)))
    except (KeyError, TypeError) as exc:
        raise SchemaError(f"bad medium description: {exc}") from exc
