"""Timing of the hot kernels: numba @njit against the numpy fallback.

Run:  python3 benchmarks/bench_backends.py

The workload mirrors what the solvers and energy reports actually do:
objective / gradient / line-search-delta passes over the atom set of a
1D nonlocal problem (N = 257), one dense assembly, and the zero-extended
bilinear interpolation behind 2D energies.  Select the backend used by
the package itself with ANISOFRAC_NUMBA=0|1|auto.
"""

import time

import numpy as np

from anisofrac import _accel
from anisofrac.energy import get_scheme
from anisofrac.gridfn import FractionalParams, Grid, GridFunction


def timeit(fn, repeats=5):
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    print(f"package backend: {_accel.backend_name()}")
    if not _accel.NUMBA_AVAILABLE:
        print("numba not importable: only the numpy path can be timed")

    grid = Grid(1, ((-1.0, 1.0),), 257)
    u = GridFunction.from_callable(
        grid, lambda x: np.maximum(0.0, 1.0 - np.abs(x))
    )
    scheme = get_scheme(None, grid, None)
    atoms = scheme.atoms(FractionalParams(0.5, 2.0))
    v = u.values.ravel()
    d = np.sin(np.linspace(0, 3, v.size))
    print(f"atom set: {len(atoms)} atoms, {v.size} nodes")

    rows = []

    def add(name, numpy_fn, jit_fn):
        t_np = timeit(numpy_fn)
        if jit_fn is not None:
            jit_fn()  # compile before timing
            t_jit = timeit(jit_fn)
            rows.append((name, t_np, t_jit, t_np / t_jit))
        else:
            rows.append((name, t_np, float("nan"), float("nan")))

    W, I, C, p = atoms.W, atoms.I, atoms.C, atoms.p
    add(
        "objective",
        lambda: _accel.atom_objective_numpy(W, I, C, v, p),
        (lambda: _accel.atom_objective_jit(W, I, C, v, p))
        if _accel.NUMBA_AVAILABLE else None,
    )

    def grad_np():
        g = np.zeros(v.size)
        _accel.atom_gradient_numpy(W, I, C, v, p, g)

    def grad_jit():
        g = np.zeros(v.size)
        _accel._atom_gradient_jit(W, I, C, v, p, g)

    add("gradient", grad_np, grad_jit if _accel.NUMBA_AVAILABLE else None)

    add(
        "line-search delta",
        lambda: _accel.atom_delta_numpy(W, I, C, v, d, 0.5, p),
        (lambda: _accel.atom_delta_jit(W, I, C, v, d, 0.5, p))
        if _accel.NUMBA_AVAILABLE else None,
    )

    def hess_np():
        H = np.zeros((v.size, v.size))
        _accel.atom_hessian_numpy(W, I, C, H)

    def hess_jit():
        H = np.zeros((v.size, v.size))
        _accel._atom_hessian_jit(W, I, C, H)

    add("dense assembly", hess_np, hess_jit if _accel.NUMBA_AVAILABLE else None)

    g2 = Grid(2, ((-1.0, 1.0), (-1.0, 1.0)), 33)
    u2 = GridFunction.from_callable(g2, lambda x, y: np.cos(x) * np.cos(y))
    rng = np.random.default_rng(0)
    pts = rng.uniform(-1.5, 1.5, size=(2_000_000, 2))
    px = np.ascontiguousarray(pts[:, 0])
    py = np.ascontiguousarray(pts[:, 1])
    out = np.empty(pts.shape[0])
    (ax, _), (ay, _) = g2.box
    hx, hy = g2.spacing
    add(
        "bilinear interp (2e6 pts)",
        lambda: _accel.interp_bilinear_numpy(u2.values, ax, ay, hx, hy, px, py, out),
        (lambda: _accel._interp_bilinear_jit(u2.values, ax, ay, hx, hy, px, py, out))
        if _accel.NUMBA_AVAILABLE else None,
    )

    print(f"\n{'kernel':26s} {'numpy':>10s} {'numba':>10s} {'speedup':>8s}")
    for name, t_np, t_jit, speedup in rows:
        jit_s = f"{t_jit * 1e3:8.2f}ms" if np.isfinite(t_jit) else "      --"
        spd = f"{speedup:7.1f}x" if np.isfinite(speedup) else "      --"
        print(f"{name:26s} {t_np * 1e3:8.2f}ms {jit_s} {spd}")


if __name__ == "__main__":
    main()
