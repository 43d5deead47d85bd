"""Regenerate the bundled scenario files: ``python3 scenarios/make_scenarios.py``."""

import json
import os

HERE = os.path.dirname(os.path.abspath(__file__))
DELTAS = [-2.0, -1.5, -1.0, -0.5, 0.0, 0.5, 1.0, 1.5, 2.0]


def const(chi_re, chi_im=0.0):
    return {"kind": "constant", "chi": [chi_re, chi_im]}


def rate(re, im):
    return [[0.0, re, im]]


def three_layer(variant):
    rho, R = (5e-4, 0.0) if variant == "paper" else (100.0, 0.01)
    return {
        "medium": {
            "c": 1.0,
            "background": const(0.0),
            "layers": [
                {
                    "optics": {"kind": "lorentz", "s": 0.9, "omega_r": 1000.0, "gamma": 120.0},
                    "optics_rate": rate(0.01, 1.2e-3),
                    "z": 0.5,
                    "z_rate": 0.0,
                    "sublayer": {
                        "rho": rho,
                        "nu": const(1.5**2 - 1, 0.002),
                        "nu_rate": rate(0.05, 5e-4),
                        "zeta": -2.9,
                        "zeta_rate": 0.02,
                        "Z": -3.2,
                        "Z_rate": 0.05,
                        "R": R,
                    },
                },
                {"optics": const(1.7**2 - 1, 0.003), "optics_rate": rate(0.02, 2e-4), "z": -4.83, "z_rate": 0.05, "sublayer": None},
            ],
        },
        "grid": {"omegas": {"min": 20.0, "max": 180.0, "n": 4096}, "deltas": DELTAS},
        "beam": {"spectrum": {"kind": "gaussian", "center": 100.0, "width": 10.0}},
        "detector": {"x0": 1.0, "ref1": [[0.0, 1.0, 0.0]], "ref2": [[0.0, 0.0, 1.0]]},
        "seed": 20240611,
        "variant": variant,
        "priors": {
            "layers": [
                {"z": [0.45, 0.55], "z_rate": [0.0, 0.0], "R": R,
                 "sublayer": {"zeta": [-3.0, -2.8], "Z": [-3.3, -3.1], "zeta_rate": [0.0, 0.1], "Z_rate": [0.0, 0.1]}},
                {"z": [-4.9, -4.75], "z_rate": [-0.1, 0.1]},
            ]
        },
    }


def single_interface():
    return {
        "medium": {"layers": [{"optics": const(1.5**2 - 1), "optics_rate": rate(0.1, 0.0), "z": 0.3, "z_rate": 0.0}]},
        "grid": {"omegas": {"min": 1.0, "max": 2.0, "n": 21}, "deltas": [-0.5, -0.25, 0.0, 0.25, 0.5]},
        "beam": {"spectrum": {"kind": "constant", "value": [1.0, 0.0]}},
        "detector": {"x0": 1.0},
        "seed": 1,
        "variant": "derived",
        "priors": {"layers": [{"z": [0.0, 1.0], "z_rate": [0.0, 0.0]}]},
    }


def vacuum():
    return {
        "medium": {"layers": []},
        "grid": {"omegas": {"min": 1.0, "max": 2.0, "n": 11}, "deltas": [-1.0, 0.0, 1.0]},
        "beam": {"spectrum": {"kind": "constant", "value": [1.0, 0.0]}},
        "seed": 3,
    }


def gating_overlap():
    sc = three_layer("derived")
    # second interface only 0.05 below the first: returns closer than the pulse allows
    sc["medium"]["layers"] = [
        {"optics": const(1.4**2 - 1, 0.01), "optics_rate": rate(0.01, 2e-3), "z": 0.5, "z_rate": 0.0},
        {"optics": const(1.7**2 - 1, 0.003), "optics_rate": rate(0.02, 2e-4), "z": 0.45, "z_rate": 0.002},
    ]
    sc["priors"] = {"layers": [{"z": [0.48, 0.52], "z_rate": [0.0, 0.0]}, {"z": [0.43, 0.47], "z_rate": [-0.005, 0.005]}]}
    return sc


def mc_acceptance():
    return {
        "medium": {
            "layers": [
                {
                    "optics": const(0.0),
                    "optics_rate": rate(0.0, 0.0),
                    "z": 5.0,
                    "sublayer": {"rho": 10.0, "nu": const(0.1), "zeta": 0.6, "Z": 0.4, "R": 0.01,
                                 "zeta_rate": 0.1, "Z_rate": 0.3},
                }
            ]
        },
        "grid": {"omegas": [1.0, 2.0, 4.0], "deltas": [0.0]},
        "beam": {"spectrum": {"kind": "constant", "value": [1.0, 0.0]}},
        "seed": 7,
        "variant": "derived",
        "mc": {"x3": 1.0, "omegas": [1.0, 2.0, 4.0], "L_schedule": [4.0, 8.0], "configs": 1000, "method": "formfactor"},
    }


if __name__ == "__main__":
    files = {
        "three_layer_paper.json": three_layer("paper"),
        "three_layer_derived.json": three_layer("derived"),
        "single_interface.json": single_interface(),
        "vacuum.json": vacuum(),
        "gating_overlap.json": gating_overlap(),
        "mc_acceptance.json": mc_acceptance(),
    }
    for name, obj in files.items():
        with open(os.path.join(HERE, name), "w") as fh:
            json.dump(obj, fh, indent=1)
            fh.write("\n")
