"""Compare the numba and pure-numpy kernel backends on realistic inputs.

    python3 benchmarks/bench_kernels.py --level 3 --repeat 5

Both twins of each kernel are called directly, so the HOPFDEC_DISABLE_NUMBA
flag does not matter here.  Results are checked for agreement before timing.
"""

import argparse
import time

import numpy as np

from hopfdec import _kernels
from hopfdec.complex import build_sphere3_mesh
from hopfdec.forms import S2_SHELL_INNER, S2_SHELL_OUTER, S2_SHELL_WIDTH, simplex_quadrature
from hopfdec.hopf import hopf_fiber, _stereographic
from hopfdec.maps import hopf_values


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def cases(level, fiber_samples):
    mesh = build_sphere3_mesh(level)
    vals = hopf_values(mesh.vertices)
    tris = mesh.simplices[2]
    qp, qw = simplex_quadrature(2)
    shell = (S2_SHELL_INNER, S2_SHELL_OUTER, S2_SHELL_WIDTH)
    top = mesh.simplices[3]
    pa, da = hopf_fiber([0, 0, 1], fiber_samples)
    pb, db = hopf_fiber([1, 0, 0], fiber_samples)
    pole = np.array([0.0, 0.0, 1.0, 0.0])  # on the south fiber, away from both
    xa, dxa = _stereographic(pa, da, pole)
    xb, dxb = _stereographic(pb, db, pole)

    def gram(jac):
        return np.einsum("sik,sjk->sij", jac[0], jac[0])  # frame-independent part

    return [
        (f"s2_pullback ({len(tris)} triangles)",
         lambda: _kernels._s2_pullback_np(vals, tris, qp, qw, *shell),
         lambda: _kernels._s2_pullback_nb(vals, tris, qp, qw, *shell), None),
        (f"gauss_linking ({fiber_samples}^2 pairs)",
         lambda: _kernels._gauss_linking_np(xa, dxa, xb, dxb),
         lambda: _kernels._gauss_linking_nb(xa, dxa, xb, dxb), None),
        (f"affine_jacobians ({len(top)} tets)",
         lambda: _kernels._affine_jacobians_np(mesh.vertices, top, vals),
         lambda: _kernels._affine_jacobians_nb(mesh.vertices, top, vals), gram),
    ]


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--level", type=int, default=3)
    ap.add_argument("--fiber-samples", type=int, default=1024)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    if not _kernels.NUMBA_AVAILABLE:
        raise SystemExit("numba is not importable; nothing to compare")

    print(f"{'kernel':40s} {'numpy [ms]':>11s} {'numba [ms]':>11s} {'speedup':>8s} {'max diff':>10s}")
    for name, f_np, f_nb, view in cases(args.level, args.fiber_samples):
        a, b = f_np(), f_nb()  # also triggers JIT compilation
        if view is not None:
            a, b = view(a), view(b)
        diff = float(np.max(np.abs(np.asarray(a) - np.asarray(b))))
        t_np = best_of(f_np, args.repeat)
        t_nb = best_of(f_nb, args.repeat)
        print(f"{name:40s} {1e3 * t_np:11.2f} {1e3 * t_nb:11.2f} {t_np / t_nb:8.1f} {diff:10.1e}")


if __name__ == "__main__":
    main()
