"""Backend selection for the hot numeric kernels.

Every routine here exists twice: a pure-numpy implementation
(``*_numpy``) and a numba ``@njit`` version compiled from the same
scalar loops.  The public names (``atom_objective``, ``atom_gradient``,
``atom_hessian_dense``, ``interp_bilinear``) are bound to one of the two
at import time according to the ``ANISOFRAC_NUMBA`` environment
variable:

    auto (default)  use numba when it imports, numpy otherwise
    1 / true / yes  require numba (ImportError propagates)
    0 / false / no  force the numpy path

``benchmarks/bench_backends.py`` times the two paths against each other.

Atom convention: a discrete energy is a sum over "atoms"
``sum_a  W[a] * | sum_k C[a,k] * v[I[a,k]] |**p``
where ``I`` are node indices into the flat value vector ``v`` and unused
slots carry ``I = 0, C = 0.0``.  All quadrature weights (including sign
conventions and multiplicities) live in ``W >= 0``.
"""

from __future__ import annotations

import math
import os

import numpy as np

_FLAG = os.environ.get("ANISOFRAC_NUMBA", "auto").strip().lower()

if _FLAG in ("0", "false", "no", "off"):
    NUMBA_AVAILABLE = False
    _WANT_NUMBA = False
else:
    _WANT_NUMBA = True
    try:
        from numba import njit

        NUMBA_AVAILABLE = True
    except ImportError:
        if _FLAG in ("1", "true", "yes", "on"):
            raise
        NUMBA_AVAILABLE = False

USING_NUMBA = _WANT_NUMBA and NUMBA_AVAILABLE


# ---------------------------------------------------------------------------
# scalar-loop reference implementations (compiled by numba when enabled)
# ---------------------------------------------------------------------------

def _atom_objective_loops(W, I, C, v, p):
    total = 0.0
    n_atoms, width = I.shape
    for a in range(n_atoms):
        ell = 0.0
        for k in range(width):
            ell += C[a, k] * v[I[a, k]]
        total += W[a] * abs(ell) ** p
    return total


def _atom_values_loops(W, I, C, v, p, out):
    n_atoms, width = I.shape
    for a in range(n_atoms):
        ell = 0.0
        for k in range(width):
            ell += C[a, k] * v[I[a, k]]
        out[a] = W[a] * abs(ell) ** p


def _atom_gradient_loops(W, I, C, v, p, grad):
    n_atoms, width = I.shape
    for a in range(n_atoms):
        ell = 0.0
        for k in range(width):
            ell += C[a, k] * v[I[a, k]]
        if ell == 0.0:
            continue
        coeff = W[a] * p * abs(ell) ** (p - 2.0) * ell
        for k in range(width):
            grad[I[a, k]] += coeff * C[a, k]


def _atom_delta_loops(W, I, C, v, d, t, p):
    # sum W * (|ell + t*dell|^p - |ell|^p), evaluated without the
    # catastrophic cancellation of differencing two whole objectives;
    # this is what lets the line search certify decreases far below
    # eps * |objective|
    total = 0.0
    n_atoms, width = I.shape
    for a in range(n_atoms):
        ell = 0.0
        dell = 0.0
        for k in range(width):
            ell += C[a, k] * v[I[a, k]]
            dell += C[a, k] * d[I[a, k]]
        e = t * dell
        if e == 0.0:
            continue
        if ell == 0.0:
            total += W[a] * abs(e) ** p
            continue
        r = e / ell
        if -0.5 < r < 0.5:
            total += W[a] * abs(ell) ** p * math.expm1(p * math.log1p(r))
        else:
            total += W[a] * (abs(ell + e) ** p - abs(ell) ** p)
    return total


def _atom_hessian_loops(W, I, C, H):
    # Hessian of sum W*ell^2 (p = 2 only): 2 * sum W * c_i c_j.
    n_atoms, width = I.shape
    for a in range(n_atoms):
        w2 = 2.0 * W[a]
        for k in range(width):
            ck = C[a, k]
            if ck == 0.0:
                continue
            ik = I[a, k]
            for l in range(width):
                cl = C[a, l]
                if cl == 0.0:
                    continue
                H[ik, I[a, l]] += w2 * ck * cl


def _interp_bilinear_loops(values, ax, ay, hx, hy, px, py, out):
    # Zero-extended bilinear interpolation on a uniform (Nx, Ny) grid.
    nx, ny = values.shape
    m = px.shape[0]
    for i in range(m):
        qx = (px[i] - ax) / hx
        qy = (py[i] - ay) / hy
        if qx < 0.0 or qx > nx - 1.0 or qy < 0.0 or qy > ny - 1.0:
            out[i] = 0.0
            continue
        jx = int(qx)
        if jx > nx - 2:
            jx = nx - 2
        jy = int(qy)
        if jy > ny - 2:
            jy = ny - 2
        tx = qx - jx
        ty = qy - jy
        out[i] = (
            values[jx, jy] * (1.0 - tx) * (1.0 - ty)
            + values[jx + 1, jy] * tx * (1.0 - ty)
            + values[jx, jy + 1] * (1.0 - tx) * ty
            + values[jx + 1, jy + 1] * tx * ty
        )


# ---------------------------------------------------------------------------
# numpy vectorized fallbacks
# ---------------------------------------------------------------------------

def _atom_ell(I, C, v):
    # (A, K) gather + weighted row sum; deterministic axis order.
    return np.einsum("ak,ak->a", C, v[I])


def atom_objective_numpy(W, I, C, v, p):
    ell = _atom_ell(I, C, v)
    return float(np.dot(W, np.abs(ell) ** p))


def atom_values_numpy(W, I, C, v, p, out):
    ell = _atom_ell(I, C, v)
    np.multiply(W, np.abs(ell) ** p, out=out)


def atom_gradient_numpy(W, I, C, v, p, grad):
    ell = _atom_ell(I, C, v)
    absell = np.abs(ell)
    # |ell|^(p-2) * ell is 0 at ell = 0 for p > 1; guard the 0**negative case
    with np.errstate(divide="ignore", invalid="ignore"):
        coeff = W * p * np.where(absell > 0.0, absell ** (p - 2.0) * ell, 0.0)
    np.add.at(grad, I, coeff[:, None] * C)


def power_delta_numpy(a, e, p):
    """|a + e|^p - |a|^p elementwise, cancellation-free for small e."""
    a = np.asarray(a, dtype=float)
    e = np.asarray(e, dtype=float)
    out = np.empty(np.broadcast_shapes(a.shape, e.shape))
    a, e = np.broadcast_arrays(a, e)
    zero_a = a == 0.0
    with np.errstate(divide="ignore", invalid="ignore"):
        r = np.where(zero_a, 0.0, e / np.where(zero_a, 1.0, a))
    small = (~zero_a) & (np.abs(r) < 0.5)
    out[small] = np.abs(a[small]) ** p * np.expm1(p * np.log1p(r[small]))
    rest = ~small
    out[rest] = np.abs(a[rest] + e[rest]) ** p - np.abs(a[rest]) ** p
    return out


def atom_delta_numpy(W, I, C, v, d, t, p):
    ell = _atom_ell(I, C, v)
    e = t * _atom_ell(I, C, d)
    return float(np.dot(W, power_delta_numpy(ell, e, p)))


def atom_hessian_numpy(W, I, C, H):
    n_atoms, width = I.shape
    flat = H.ravel()
    n = H.shape[0]
    for k in range(width):
        for l in range(width):
            np.add.at(flat, I[:, k] * n + I[:, l], 2.0 * W * C[:, k] * C[:, l])


def interp_bilinear_numpy(values, ax, ay, hx, hy, px, py, out):
    nx, ny = values.shape
    qx = (px - ax) / hx
    qy = (py - ay) / hy
    inside = (qx >= 0.0) & (qx <= nx - 1.0) & (qy >= 0.0) & (qy <= ny - 1.0)
    qxc = np.clip(qx, 0.0, nx - 1.0)
    qyc = np.clip(qy, 0.0, ny - 1.0)
    jx = np.minimum(qxc.astype(np.int64), nx - 2)
    jy = np.minimum(qyc.astype(np.int64), ny - 2)
    tx = qxc - jx
    ty = qyc - jy
    vals = (
        values[jx, jy] * (1.0 - tx) * (1.0 - ty)
        + values[jx + 1, jy] * tx * (1.0 - ty)
        + values[jx, jy + 1] * (1.0 - tx) * ty
        + values[jx + 1, jy + 1] * tx * ty
    )
    out[:] = np.where(inside, vals, 0.0)


# ---------------------------------------------------------------------------
# binding
# ---------------------------------------------------------------------------

if USING_NUMBA:
    atom_objective_jit = njit(cache=True)(_atom_objective_loops)
    _atom_values_jit = njit(cache=True)(_atom_values_loops)
    _atom_gradient_jit = njit(cache=True)(_atom_gradient_loops)
    atom_delta_jit = njit(cache=True)(_atom_delta_loops)
    _atom_hessian_jit = njit(cache=True)(_atom_hessian_loops)
    _interp_bilinear_jit = njit(cache=True)(_interp_bilinear_loops)

    atom_objective = atom_objective_jit
    atom_values = _atom_values_jit
    atom_gradient = _atom_gradient_jit
    atom_delta = atom_delta_jit
    atom_hessian_dense = _atom_hessian_jit
    interp_bilinear = _interp_bilinear_jit
else:
    atom_objective = atom_objective_numpy
    atom_values = atom_values_numpy
    atom_gradient = atom_gradient_numpy
    atom_delta = atom_delta_numpy
    atom_hessian_dense = atom_hessian_numpy
    interp_bilinear = interp_bilinear_numpy


def backend_name() -> str:
    return "numba" if USING_NUMBA else "numpy"
