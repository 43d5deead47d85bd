"""Scenario files: medium, sampling grid, beam, detector, noise and inversion priors.

A scenario is a JSON object::

    {
      "medium":   {... medium.stack_to_json ...},
      "grid":     {"omegas": {"min": 20, "max": 180, "n": 4096} | [w0, w1, ...],
                   "deltas": [-2, -1.5, ..., 2]},
      "beam":     {"spectrum": {"kind": "gaussian", "center": 100, "width": 10}},
      "detector": {"x0": 1.0, "ref1": [[0, 1, 0]], "ref2": [[0, 0, 1]]},
      "noise":    {"kind": "field-gaussian", "sigma": 1e-4},        (optional)
      "seed":     12345,
      "variant":  "paper" | "derived",
      "mode":     "series" | "oracle",                               (optional)
      "priors":   {"layers": [{"z": [lo, hi], "z_rate": [lo, hi],
                               "sublayer": {"zeta": [..], "Z": [..],
                                            "zeta_rate": [..], "Z_rate": [..]}}]},
      "mc":       {"x3": 1.0, "omegas": [1, 2, 4], "L_schedule": [4, 8],
                   "configs": 1000, "method": "formfactor"}          (optional)
    }
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace

import numpy as np

from .detect import DetectorSetup, MeasurementSet, intensities
from .errors import OrderingViolated, SchemaError
from .forward import VARIANTS, IncidentBeam, detector_field, spectrum_from_json
from .invert import DepthPrior, LayerPrior, StripMetadata, SublayerPrior
from .medium import ComplexTable, MediumStack, ScanGrid, compress, stack_from_json, stack_to_json, validate

NOISE_KINDS = ("field-gaussian",)
_NOISE_STREAM = 0x6E6F697365  # separates the noise stream from Monte Carlo streams


@dataclass(frozen=True, eq=False)
class Scenario:
    medium: MediumStack
    grid: ScanGrid
    beam: IncidentBeam
    detector: DetectorSetup
    noise: dict | None = None
    seed: int = 0
    variant: str = "derived"
    mode: str = "series"
    priors: tuple[LayerPrior, ...] | None = None
    mc: dict | None = None

    def diagnostics(self):
        return validate(self.medium, self.grid)

    def metadata(self, margin: float = 0.05) -> StripMetadata:
        """Inversion metadata: the stated priors, else intervals of +-``margin`` around the scenario values."""
        priors = self.priors if self.priors is not None else default_priors(self.medium, margin)
        return StripMetadata(self.beam, priors, x0=self.detector.x0, c=self.medium.c, variant=self.variant)


def default_priors(stack: MediumStack, margin: float = 0.05) -> tuple[LayerPrior, ...]:
    out = []
    for j, layer in enumerate(stack.layers):
        b = layer.boundary_top
        rate = (0.0, 0.0) if j == 0 else (b.z_rate - margin, b.z_rate + margin)
        top = DepthPrior((b.z - margin, b.z + margin), rate)
        sp = None
        s = layer.sublayer
        if s is not None:
            sp = SublayerPrior(
                (s.zeta - margin, s.zeta + margin),
                (s.Z - margin, s.Z + margin),
                (max(0.0, s.zeta_rate - margin), s.zeta_rate + margin),
                (max(0.0, s.Z_rate - margin), s.Z_rate + margin),
            )
        out.append(LayerPrior(top, sp, s.R if s is not None else 0.0))
    return tuple(out)


# --- JSON ---------------------------------------------------------------------


def _interval(v, what):
    try:
        lo, hi = (float(x) for x in v)
    except (TypeError, ValueError) as exc:
        raise SchemaError(f"{what} must be [lo, hi]") from exc
    if lo > hi:
        raise SchemaError(f"{what}: lo > hi")
    return lo, hi


def priors_from_json(obj: dict, stack: MediumStack) -> tuple[LayerPrior, ...]:
    rows = obj.get("layers")
    if not isinstance(rows, list) or len(rows) != stack.J:
        raise SchemaError("priors.layers must list one entry per medium layer")
    out = []
    for j, (row, layer) in enumerate(zip(rows, stack.layers)):
        default_rate = (0.0, 0.0) if j == 0 else (-1.0, 1.0)
        top = DepthPrior(_interval(row["z"], f"layer {j + 1} z"), _interval(row.get("z_rate", default_rate), f"layer {j + 1} z_rate"))
        sp = None
        s = row.get("sublayer")
        if s:
            sp = SublayerPrior(
                _interval(s["zeta"], "zeta"),
                _interval(s["Z"], "Z"),
                _interval(s.get("zeta_rate", (0.0, 1.0)), "zeta_rate"),
                _interval(s.get("Z_rate", (0.0, 1.0)), "Z_rate"),
            )
        R = float(row.get("R", layer.sublayer.R if layer.sublayer is not None else 0.0))
        out.append(LayerPrior(top, sp, R))
    return tuple(out)


def priors_to_json(priors) -> dict:
    rows = []
    for p in priors:
        row = {"z": list(p.top.z), "z_rate": list(p.top.z_rate), "R": p.R}
        if p.sublayer is not None:
            s = p.sublayer
            row["sublayer"] = {"zeta": list(s.zeta), "Z": list(s.Z), "zeta_rate": list(s.zeta_rate), "Z_rate": list(s.Z_rate)}
        rows.append(row)
    return {"layers": rows}


def _grid_from_json(obj: dict) -> ScanGrid:
    om = obj["omegas"]
    if isinstance(om, dict):
        omegas = np.linspace(float(om["min"]), float(om["max"]), int(om["n"]))
    else:
        omegas = np.asarray(om, dtype=float)
    return ScanGrid(omegas, np.asarray(obj["deltas"], dtype=float))


def scenario_from_json(obj: dict) -> Scenario:
    try:
        grid = _grid_from_json(obj["grid"])
        d = grid.deltas
        medium = stack_from_json(obj["medium"], (float(d[0]), float(d[-1])))
        b = obj.get("beam", {})
        beam = IncidentBeam(spectrum_from_json(b.get("spectrum", {"kind": "constant"})), tuple(b.get("eta", (1.0, 0.0))))
        dt = obj.get("detector", {})
        detector = DetectorSetup(
            float(dt.get("x0", 1.0)),
            ComplexTable.from_json(dt.get("ref1", [[0.0, 1.0, 0.0]])),
            ComplexTable.from_json(dt.get("ref2", [[0.0, 0.0, 1.0]])),
        )
        noise = obj.get("noise")
        if noise is not None:
            if noise.get("kind") not in NOISE_KINDS:
                raise SchemaError(f"noise kind must be one of {NOISE_KINDS}")
            if not float(noise.get("sigma", 0.0)) >= 0:
                raise SchemaError("noise sigma must be non-negative")
        seed = int(obj.get("seed", 0))
        if not 0 <= seed < 2**64:
            raise SchemaError("seed must be a 64-bit unsigned integer")
        variant = obj.get("variant", "derived")
        if variant not in VARIANTS:
            raise SchemaError(f"variant must be one of {VARIANTS}")
        mode = obj.get("mode", "series")
        if mode not in ("series", "oracle"):
            raise SchemaError("mode must be 'series' or 'oracle'")
        priors = priors_from_json(obj["priors"], medium) if obj.get("priors") else None
    except SchemaError:
        raise
    except OrderingViolated as exc:
        raise SchemaError(f"invalid medium: {exc}") from exc
    except (KeyError, TypeError, ValueError) as exc:
        raise SchemaError(f"bad scenario: {type(exc).__name__}: {exc}") from exc
    detector.check(grid.omegas)
    return Scenario(medium, grid, beam, detector, noise, seed, variant, mode, priors, obj.get("mc"))


def scenario_to_json(sc: Scenario) -> dict:
    out = {
        "medium": stack_to_json(sc.medium),
        "grid": {"omegas": [float(w) for w in sc.grid.omegas], "deltas": [float(d) for d in sc.grid.deltas]},
        "beam": {"spectrum": sc.beam.spectrum.to_json(), "eta": list(sc.beam.eta)},
        "detector": {"x0": sc.detector.x0, "ref1": sc.detector.ref1.to_json(), "ref2": sc.detector.ref2.to_json()},
        "seed": sc.seed,
        "variant": sc.variant,
        "mode": sc.mode,
    }
    if sc.noise is not None:
        out["noise"] = dict(sc.noise)
    if sc.priors is not None:
        out["priors"] = priors_to_json(sc.priors)
    if sc.mc is not None:
        out["mc"] = dict(sc.mc)
    return out


def load_scenario(path) -> Scenario:
    with open(path) as fh:
        try:
            obj = json.load(fh)
        except json.JSONDecodeError as exc:
            raise SchemaError(f"{path}: not valid JSON ({exc})") from exc
    if not isinstance(obj, dict):
        raise SchemaError(f"{path}: scenario must be a JSON object")
    return scenario_from_json(obj)


def save_scenario(sc: Scenario, path) -> None:
    with open(path, "w") as fh:
        json.dump(scenario_to_json(sc), fh, indent=1)


# --- synthesis ------------------------------------------------------------------


def clean_field(sc: Scenario) -> np.ndarray:
    """Noise-free detector field on the (omega, delta) grid."""
    w = sc.grid.omegas
    cols = [detector_field(compress(sc.medium, d), sc.beam, w, sc.detector.x0, sc.mode, sc.variant) for d in sc.grid.deltas]
    return np.stack([np.asarray(c, dtype=complex) * np.ones(w.shape) for c in cols], axis=1)


def add_noise(E, sc: Scenario) -> np.ndarray:
    """Complex Gaussian field noise with standard deviation ``sigma |f(w)|``.

    Drawn from a Philox stream keyed by the scenario seed, so the same
    scenario always produces the same noisy field.
    """
    if not sc.noise or float(sc.noise.get("sigma", 0.0)) == 0.0:
        return E
    sigma = float(sc.noise["sigma"])
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence([sc.seed, _NOISE_STREAM])))
    g = rng.standard_normal((2,) + E.shape)
    amp = sigma * np.abs(np.asarray(sc.beam.f(sc.grid.omegas)))[:, None]
    return E + amp * (g[0] + 1j * g[1]) / np.sqrt(2.0)


def synthesize(sc: Scenario) -> MeasurementSet:
    """Field and spectrometer intensities; noise is on the field, so retrieval returns the noisy field."""
    E = add_noise(clean_field(sc), sc)
    r1, r2 = sc.detector.references(sc.grid.omegas)
    m = intensities(E, r1[:, None], r2[:, None])
    return MeasurementSet(sc.grid, field=E, m=np.stack(m), ref1=r1, ref2=r2)


def truth_table(sc: Scenario, omegas) -> list[dict]:
    """Ground-truth parameters in the layout of the inversion report layers."""
    w = np.asarray(omegas, dtype=float)
    out = []
    for layer in sc.medium.layers:
        entry = {
            "n": np.asarray(layer.index(w), dtype=complex) * np.ones(w.shape),
            "n_rate": np.asarray(layer.index_rate(w), dtype=complex) * np.ones(w.shape),
            "z": layer.boundary_top.z,
            "z_rate": layer.boundary_top.z_rate,
            "sublayer": None,
        }
        s = layer.sublayer
        if s is not None:
            entry["sublayer"] = {
                "rho": s.rho,
                "nu": np.asarray(s.nu(w), dtype=complex) * np.ones(w.shape),
                "nu_rate": np.asarray(s.nu_rate(w), dtype=complex) * np.ones(w.shape),
                "zeta": s.zeta,
                "zeta_rate": s.zeta_rate,
                "Z": s.Z,
                "Z_rate": s.Z_rate,
            }
        out.append(entry)
    return out


def parameter_errors(report_layers, truth_layers, omegas) -> list[dict]:
    """Per-parameter relative errors (max over frequency for per-frequency quantities).

    Absolute error is used where the true value is 0.
    """

    def err(got, want):
        got = np.asarray(got, dtype=complex)
        want = np.asarray(want, dtype=complex)
        den = np.where(np.abs(want) > 0, np.abs(want), 1.0)
        return float(np.max(np.abs(got - want) / den))

    rows = []
    for j, (got, want) in enumerate(zip(report_layers, truth_layers), start=1):
        for key in ("n", "n_rate", "z", "z_rate"):
            rows.append({"layer": j, "parameter": key, "rel_error": err(got[key], want[key])})
        if want["sublayer"] is not None:
            gs = got.get("sublayer")
            for key in ("rho", "nu", "nu_rate", "zeta", "zeta_rate", "Z", "Z_rate"):
                e = err(gs[key], want["sublayer"][key]) if gs is not None else float("nan")
                rows.append({"layer": j, "parameter": f"sublayer.{key}", "rel_error": e})
    return rows


def with_seed(sc: Scenario, seed: int | None) -> Scenario:
    return sc if seed is None else replace(sc, seed=int(seed))
