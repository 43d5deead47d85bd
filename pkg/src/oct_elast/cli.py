"""``oct-elast`` command line: forward synthesis, inversion, Monte Carlo checks and round trips.

Exit codes: 0 success, 2 validation or schema error, 3 I/O error, 4 partial
recovery. Errors are reported on stderr as one JSON object.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from dataclasses import replace

import numpy as np

from .detect import GatingWindow, read_measurements, time_gate, write_field_csv, write_intensity_csv
from .errors import OctElastError, SchemaError
from .forward import expected_scatter
from .invert import layer_strip
from .scenario import load_scenario, parameter_errors, synthesize, truth_table, with_seed

EXIT_OK, EXIT_VALIDATION, EXIT_IO, EXIT_PARTIAL = 0, 2, 3, 4


class CliError(Exception):
    def __init__(self, code: int, message: str, kind: str = "ValidationError"):
        super().__init__(message)
        self.code = code
        self.kind = kind


def _fmt(x) -> str:
    return "%.17g" % x


def _emit_error(code: int, kind: str, message: str) -> int:
    print(json.dumps({"error": kind, "message": message, "exit_code": code}), file=sys.stderr)
    return code


def _warn_diagnostics(sc) -> None:
    for d in sc.diagnostics():
        if d.code == "ordering":
            raise CliError(EXIT_VALIDATION, d.message, "OrderingViolated")
        print(json.dumps({"warning": d.code, "layer": d.layer, "message": d.message}), file=sys.stderr)


def _load(args):
    sc = with_seed(load_scenario(args.scenario), getattr(args, "seed", None))
    if getattr(args, "variant", None):
        sc = replace(sc, variant=args.variant)
    if getattr(args, "mode", None):
        sc = replace(sc, mode=args.mode)
    return sc


def _makedirs(path):
    os.makedirs(path, exist_ok=True)


# --- commands -------------------------------------------------------------------


def cmd_forward(args) -> int:
    sc = _load(args)
    _warn_diagnostics(sc)
    ms = synthesize(sc)
    _makedirs(args.out)
    write_field_csv(os.path.join(args.out, "field.csv"), sc.grid, ms.field)
    write_intensity_csv(os.path.join(args.out, "intensity.csv"), sc.grid, ms.m, ms.ref1, ms.ref2)
    if args.gate_center is not None or args.gate_halfwidth is not None:
        if args.gate_center is None or args.gate_halfwidth is None:
            raise CliError(EXIT_VALIDATION, "--gate-center and --gate-halfwidth go together")
        win = GatingWindow(args.gate_center, args.gate_halfwidth)
        write_field_csv(os.path.join(args.out, "gated_field.csv"), sc.grid, time_gate(ms.field, sc.grid.omegas, win))
    return EXIT_OK


def _run_inversion(ms, sc, out_path) -> tuple[int, object]:
    report = layer_strip(ms, sc.metadata())
    with open(out_path, "w") as fh:
        json.dump(report.to_json(), fh, indent=1)
    if not report.complete:
        print(json.dumps({"partial": True, "flags": report.flags}), file=sys.stderr)
        return EXIT_PARTIAL, report
    return EXIT_OK, report


def cmd_invert(args) -> int:
    sc = _load(args)
    ms = read_measurements(args.measurements)
    if ms.grid != sc.grid:
        raise CliError(EXIT_VALIDATION, "measurement grid does not match the scenario grid", "SchemaError")
    code, _ = _run_inversion(ms, sc, args.out)
    return code


MC_HEADER = [
    "omega", "L", "N", "M", "mean_re", "mean_im", "stderr", "reference_re", "reference_im", "zscore",
    "finite_reference_re", "finite_reference_im", "finite_zscore",
]


def _zscore(mean, ref, err):
    diff = abs(mean - ref)
    if err == 0:
        return 0.0 if diff == 0 else float("inf")
    return diff / err


def cmd_mc_verify(args) -> int:
    from .scatterlab import ensemble_average, finite_box_expectation

    sc = _load(args)
    subs = [(j, L) for j, L in enumerate(sc.medium.layers) if L.sublayer is not None]
    if len(subs) != 1:
        raise CliError(EXIT_VALIDATION, f"mc-verify needs exactly one random sublayer, found {len(subs)}")
    _, layer = subs[0]
    sub = layer.sublayer
    mc = dict(sc.mc or {})
    M = args.configs if args.configs is not None else int(mc.get("configs", 1000))
    if M < 2:
        raise CliError(EXIT_VALIDATION, "--configs must be at least 2 (standard error undefined)")
    Ls = args.L_schedule if args.L_schedule is not None else [float(v) for v in mc.get("L_schedule", (4.0, 8.0))]
    method = args.method or mc.get("method", "formfactor")
    x3 = float(mc.get("x3", sub.zeta + sub.R + 0.5))
    omegas = np.asarray(mc.get("omegas", sc.grid.omegas), dtype=float)
    c = sc.medium.c
    rows = []
    for i, w in enumerate(omegas):
        n = complex(layer.index(w))
        nu = complex(sub.nu(w))
        phi = (nu * nu - n * n) / (n * n)
        res = ensemble_average(
            sub.rho, sub.Z, sub.zeta, sub.R, Ls, M, w, x3, phi, n, sc.beam,
            seed=sc.seed, method=method, c=c, config_offset=i * M,
        )
        k = w * n / c
        e0 = complex(sc.beam.f(w)) * np.exp(-1j * k * x3)  # same expression as the ensemble's incident field
        ref = e0 + complex(expected_scatter(sub.at(0.0), n, sc.beam, w, x3, "reflect", "derived", c=c))
        for k, L in enumerate(res.L):
            if n.imag == 0:
                fin = e0 + finite_box_expectation(res.N[k] / L**2, sub.Z, sub.zeta, sub.R, L, w, x3, phi, n.real, sc.beam, c=c)
            else:
                fin = complex(np.nan, np.nan)
            mean, err = complex(res.means[k]), float(res.stderrs[k])
            rows.append(
                [w, L, int(res.N[k]), M, mean.real, mean.imag, err, ref.real, ref.imag, _zscore(mean, ref, err),
                 fin.real, fin.imag, _zscore(mean, fin, err)]
            )
    with open(args.out, "w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(MC_HEADER)
        for r in rows:
            wr.writerow([_fmt(v) if isinstance(v, float) else str(v) for v in r])
    zmax = max(r[9] for r in rows)
    print(json.dumps({"max_abs_zscore": zmax, "rows": len(rows)}))
    return EXIT_OK


def cmd_roundtrip(args) -> int:
    sc = _load(args)
    _warn_diagnostics(sc)
    ms = synthesize(sc)
    _makedirs(args.out)
    ipath = os.path.join(args.out, "intensity.csv")
    write_intensity_csv(ipath, sc.grid, ms.m, ms.ref1, ms.ref2)
    code, report = _run_inversion(read_measurements(ipath), sc, os.path.join(args.out, "report.json"))
    errs = parameter_errors(report.layers, truth_table(sc, report.omegas), report.omegas)
    with open(os.path.join(args.out, "errors.csv"), "w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(["layer", "parameter", "rel_error"])
        for e in errs:
            wr.writerow([e["layer"], e["parameter"], _fmt(e["rel_error"])])
    finite = [e["rel_error"] for e in errs if np.isfinite(e["rel_error"])]
    summary = {
        "complete": report.complete,
        "global_misfit": report.global_misfit,
        "max_rel_error": max(finite) if finite else None,
        "flags": report.flags,
    }
    with open(os.path.join(args.out, "summary.json"), "w") as fh:
        json.dump(summary, fh, indent=1)
    print(json.dumps(summary))
    return code


# --- entry point ----------------------------------------------------------------


def _float_list(s: str):
    try:
        out = [float(v) for v in s.split(",") if v.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {s!r}") from exc
    if not out:
        raise argparse.ArgumentTypeError("empty list")
    return out


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="oct-elast", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, out_help):
        sp.add_argument("--scenario", required=True, help="scenario JSON file")
        sp.add_argument("--out", required=True, help=out_help)
        sp.add_argument("--seed", type=int, default=None, help="override the scenario seed")
        sp.add_argument("--variant", choices=("paper", "derived"), default=None, help="sublayer model variant")

    f = sub.add_parser("forward", help="synthesize field and intensity CSVs")
    common(f, "output directory")
    f.add_argument("--mode", choices=("series", "oracle"), default=None)
    f.add_argument("--gate-center", type=float, default=None, help="also write a time-gated field (delay units)")
    f.add_argument("--gate-halfwidth", type=float, default=None)
    f.set_defaults(func=cmd_forward)

    i = sub.add_parser("invert", help="layer-stripping inversion of a measurement CSV")
    common(i, "report JSON path")
    i.add_argument("--measurements", required=True, help="field or intensity CSV")
    i.set_defaults(func=cmd_invert)

    m = sub.add_parser("mc-verify", help="Monte Carlo check of the averaged Born field")
    common(m, "CSV path")
    m.add_argument("--configs", type=int, default=None, help="configurations per box size (M)")
    m.add_argument("--L-schedule", dest="L_schedule", type=_float_list, default=None, help="box sides, e.g. 4,8")
    m.add_argument("--method", choices=("formfactor", "quadrature"), default=None)
    m.set_defaults(func=cmd_mc_verify)

    r = sub.add_parser("roundtrip", help="forward -> intensities -> inversion -> parameter errors")
    common(r, "output directory")
    r.add_argument("--mode", choices=("series", "oracle"), default=None)
    r.set_defaults(func=cmd_roundtrip)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except CliError as exc:
        return _emit_error(exc.code, exc.kind, str(exc))
    except (SchemaError, OctElastError, ValueError) as exc:
        return _emit_error(EXIT_VALIDATION, type(exc).__name__, str(exc))
    except OSError as exc:
        return _emit_error(EXIT_IO, type(exc).__name__, str(exc))


if __name__ == "__main__":
    sys.exit(main())
