"""Compiled vs numpy Born-sum kernels.

    python3 benchmarks/bench_kernels.py [--particles 640] [--repeat 5]

Prints the best-of-``repeat`` time per call for both evaluators and the
largest relative disagreement between the two backends.
"""

import argparse
import timeit

import numpy as np

from oct_elast import _pykernels
from oct_elast.scatterlab import McGeometry, ball_nodes, sample_configuration

try:
    from oct_elast import _ckernels
except ImportError:  # extension not built
    _ckernels = None


def best(fn, repeat):
    t = timeit.Timer(fn)
    loops, _ = t.autorange()
    return min(t.repeat(repeat, loops)) / loops


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--particles", type=int, default=640)
    ap.add_argument("--nodes", type=int, default=24)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)

    pos = sample_configuration(McGeometry(8.0, args.particles, 0.4, 0.6, 0.01), 1).positions
    k = 2.0 + 0.0j
    nodes = ball_nodes(0.01, args.nodes)
    cases = {
        "formfactor": lambda m: m.born_sum_formfactor(pos, 1.0, k, 0.01),
        f"quadrature {args.nodes}^3": lambda m: m.born_sum_quadrature(pos, 1.0, k, *nodes),
    }
    print(f"{'kernel':<18}{'numpy':>12}{'cython':>12}{'speedup':>10}{'rel diff':>11}")
    for name, call in cases.items():
        tp = best(lambda: call(_pykernels), args.repeat)
        ref = call(_pykernels)
        if _ckernels is None:
            print(f"{name:<18}{tp * 1e3:>10.3f}ms{'n/a':>12}")
            continue
        tc = best(lambda: call(_ckernels), args.repeat)
        diff = abs(call(_ckernels) - ref) / abs(ref)
        print(f"{name:<18}{tp * 1e3:>10.3f}ms{tc * 1e3:>10.3f}ms{tp / tc:>9.1f}x{diff:>11.1e}")


if __name__ == "__main__":
    main()
