"""Time the numba kernels against their numpy fallbacks.

    python3 benchmarks/bench_kernels.py [--repeat 5]

numba timings exclude the first (compiling) call.
"""
import argparse
import time

import numpy as np

from pstlattice import LatticeSpec, design_geometry, propagator
from pstlattice import _accel, kernels
from pstlattice.fabrication import DESIGN_MODEL, realize_couplings


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def cases(rng):
    spec = LatticeSpec.ideal(19, 10.0)
    t = propagator(spec, 5.0).matrix
    a, b = np.ascontiguousarray(t[:, 0]), np.ascontiguousarray(t[:, -1])
    evals = rng.normal(size=19)
    w = rng.normal(size=19) + 1j * rng.normal(size=19)
    zs = np.linspace(0.0, 20.0, 20_001)
    phases = rng.uniform(0, 2 * np.pi, 3600)
    base = realize_couplings(design_geometry(19, 10.0, DESIGN_MODEL), DESIGN_MODEL)
    couplings = np.ascontiguousarray(base * rng.uniform(0.95, 1.05, (5000, base.size)))
    det = np.zeros(19)
    return {
        "scan_intensity (N=19, 20k z)": ("scan_intensity", (evals, w, zs)),
        "pair_correlation (N=19)": ("pair_correlation", (a, b, 1.0)),
        "phase_moments (N=19, M=3600)": ("phase_moments", (a, b, phases)),
        "batch_transfer_fidelity (5000 x N=19)": ("batch_transfer_fidelity", (couplings, det, 10.0, 0, 18)),
    }


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args()
    rng = np.random.default_rng(0)

    print(f"numba available: {_accel.HAVE_NUMBA}")
    print(f"{'kernel':40s} {'numpy [ms]':>12s} {'numba [ms]':>12s} {'speedup':>8s}")
    for label, (name, inputs) in cases(rng).items():
        ref = getattr(kernels, name + "_numpy")
        t_np = best_of(lambda: ref(*inputs), args.repeat)
        if _accel.HAVE_NUMBA:
            jit = getattr(kernels, name + "_numba")
            jit(*inputs)
            t_nb = best_of(lambda: jit(*inputs), args.repeat)
            print(f"{label:40s} {t_np * 1e3:12.3f} {t_nb * 1e3:12.3f} {t_np / t_nb:7.1f}x")
        else:
            print(f"{label:40s} {t_np * 1e3:12.3f} {'-':>12s} {'-':>8s}")


if __name__ == "__main__":
    main()
