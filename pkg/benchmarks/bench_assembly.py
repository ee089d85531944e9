"""Time finite element assembly with the numba and numpy kernels.

    python3 benchmarks/bench_assembly.py --n 8 12 --repeat 3

Each kernel is called once before timing so JIT compilation is excluded.
The two backends must produce the same matrices; the script checks this.
"""
import argparse
import time

import numpy as np

from fsiplate import _accel
from fsiplate.assembly import assemble_divergence, assemble_mass, assemble_stiffness
from fsiplate.mesh import build_box_fluid_mesh
from fsiplate.spaces import Role, build_space

OPS = {
    "mass P2 vector": lambda V, Q: assemble_mass(V),
    "stiffness P2 vector": lambda V, Q: assemble_stiffness(V),
    "divergence P2-P1": lambda V, Q: assemble_divergence(V, Q),
}


def best_time(fn, repeat):
    fn()
    best = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, nargs="+", default=[8, 12])
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)
    backends = ["numpy"] + (["numba"] if _accel.HAVE_NUMBA else [])
    print(f"{'n':>4} {'operation':<22}" + "".join(f"{b:>12}" for b in backends) + f"{'speedup':>10}")
    for n in args.n:
        mesh = build_box_fluid_mesh(n, n, n)
        V = build_space(mesh, 2, 3, Role.VELOCITY)
        Q = build_space(mesh, 1)
        for name, op in OPS.items():
            times, mats = [], []
            for b in backends:
                _accel.set_backend(b)
                times.append(best_time(lambda: op(V, Q), args.repeat))
                mats.append(op(V, Q))
            if len(mats) == 2:
                diff = abs(mats[0] - mats[1]).max()
                assert diff <= 1e-12 * max(abs(mats[0]).max(), 1.0), f"backends disagree on {name}: {diff}"
            speed = f"{times[0] / times[-1]:>9.1f}x" if len(times) == 2 else ""
            print(f"{n:>4} {name:<22}" + "".join(f"{t * 1e3:>10.1f}ms" for t in times) + speed)
    _accel.set_backend("numba" if _accel.HAVE_NUMBA else "numpy")


if __name__ == "__main__":
    main()
