import math

import numpy as np
import pytest

from anisofrac._sphere import sphere_measure, sphere_rule
from anisofrac.gridfn import FractionalParams, Grid, GridFunction
from anisofrac.kernel import Kernel, builtin
from anisofrac.limits import (
    ConvergenceTable,
    LimitDensity,
    TableRow,
    bbm_constant,
    bbm_sweep,
    limit_density,
    limit_matrix,
    ms_constant,
    ms_sweep,
    ms_weight,
    ms_weight_extrapolated,
    ms_weight_limit,
)
from conftest import bump_profile


def _angular_kernel_2d(fn, bounds, name="angular"):
    """x-independent kernel from an even angular profile fn(w)."""

    def ev(x, h):
        x = np.asarray(x, dtype=float)
        h = np.asarray(h, dtype=float)
        shape = np.broadcast_shapes(x.shape, h.shape)[:-1]
        r = np.maximum(np.linalg.norm(h, axis=-1), 1e-300)
        return np.broadcast_to(fn(h / r[..., None]), shape).copy()

    return Kernel(
        evaluate=ev, dimension=2, bounds=bounds,
        radial_limit=lambda x, w: ev(x, w), tail_limit=lambda x, w: ev(x, w),
        name=name,
    )


def test_sphere_rules_integrate_constants():
    for n in (1, 2, 3):
        dirs, w = sphere_rule(n)
        assert w.sum() == pytest.approx(sphere_measure(n), rel=1e-13)
        assert np.allclose(np.linalg.norm(dirs, axis=1), 1.0, atol=1e-12)


def test_bbm_constants():
    assert bbm_constant(2.0, 1) == pytest.approx(1.0, abs=1e-14)
    assert bbm_constant(1.0, 1) == pytest.approx(2.0, abs=1e-14)
    assert bbm_constant(2.0, 2) == pytest.approx(math.pi / 2.0, rel=1e-13)
    # n = 3, p = 2: (1/2) * int_{S^2} w_1^2 = (1/2)(4 pi / 3)
    assert bbm_constant(2.0, 3) == pytest.approx(2.0 * math.pi / 3.0, rel=1e-12)
    with pytest.raises(ValueError):
        bbm_constant(2.0, 4)


def test_ms_constants_closed_forms():
    assert ms_constant(2.0, 1) == pytest.approx(2.0, abs=1e-14)
    assert ms_constant(1.0, 1) == pytest.approx(4.0, abs=1e-14)
    assert ms_constant(2.0, 2) == pytest.approx(2.0 * math.pi, rel=1e-14)
    for n in (1, 2, 3):
        for p in (1.0, 1.5, 2.0, 3.0):
            assert ms_constant(p, n) == pytest.approx(
                2.0 * sphere_measure(n) / p, rel=1e-12
            )


def test_limit_density_two_point_and_circle():
    k1 = builtin("constant", {"c": 1.0})
    ld1 = LimitDensity(k1, 2.0)
    assert limit_density(ld1, np.zeros(1), np.ones(1)) == pytest.approx(1.0)
    assert limit_density(ld1, np.zeros(1), np.zeros(1)) == 0.0
    k2 = builtin("constant", {"c": 1.0, "n": 2})
    ld2 = LimitDensity(k2, 2.0)
    xi = np.array([1.0, 0.0])
    assert limit_density(ld2, np.zeros(2), xi) == pytest.approx(math.pi / 2, rel=1e-12)


def test_limit_density_positive_homogeneity():
    k = builtin("separable-angular", {"n": 2, "c0": 1.0, "c1": 0.5})
    ld = LimitDensity(k, 2.5)
    rng = np.random.default_rng(7)
    xi = rng.standard_normal(2)
    for c in (-3.0, 0.5, 2.0):
        assert limit_density(ld, np.zeros(2), c * xi) == pytest.approx(
            abs(c) ** 2.5 * limit_density(ld, np.zeros(2), xi), rel=1e-12
        )


def test_limit_matrix_isotropic_and_anisotropic():
    k = builtin("constant", {"c": 1.0, "n": 2})
    A = limit_matrix(LimitDensity(k, 2.0), np.zeros(2))
    assert np.allclose(A, (math.pi / 2) * np.eye(2), atol=1e-12)

    # a(w) = 1 + cos^2(theta): closed forms 7 pi / 8 and 5 pi / 8
    ka = _angular_kernel_2d(lambda w: 1.0 + w[..., 0] ** 2, (1.0, 2.0))
    ld = LimitDensity(ka, 2.0)
    Aa = limit_matrix(ld, np.zeros(2))
    assert Aa[0, 0] == pytest.approx(7.0 * math.pi / 8.0, rel=1e-12)
    assert Aa[1, 1] == pytest.approx(5.0 * math.pi / 8.0, rel=1e-12)
    assert abs(Aa[0, 1]) < 1e-12

    # quadratic-form consistency on random directions
    rng = np.random.default_rng(11)
    for _ in range(8):
        xi = rng.standard_normal(2)
        assert float(xi @ Aa @ xi) == pytest.approx(
            limit_density(ld, np.zeros(2), xi), rel=1e-10
        )


def test_limit_matrix_1d_scalar():
    k = builtin("periodic-1d", {"A0": 2.0, "A1": 1.0})
    x = np.array([0.25])
    A = limit_matrix(LimitDensity(k, 2.0), x)
    # (a(-1) + a(1)) / 2 with a = 2 + sin(2 pi x) = 3 at x = 1/4
    assert A.shape == (1, 1)
    assert A[0, 0] == pytest.approx(3.0, rel=1e-12)
    with pytest.raises(ValueError):
        limit_matrix(LimitDensity(k, 3.0), x)


def test_density_sandwich():
    k = builtin("separable-angular", {"n": 2, "c0": 1.0, "c1": 0.5})
    ld = LimitDensity(k, 1.5)
    K = bbm_constant(1.5, 2)
    rng = np.random.default_rng(5)
    for _ in range(32):
        xi = rng.standard_normal(2)
        val = limit_density(ld, np.zeros(2), xi)
        lo = k.m_minus * K * np.linalg.norm(xi) ** 1.5
        hi = k.m_plus * K * np.linalg.norm(xi) ** 1.5
        assert lo * (1 - 1e-5) <= val <= hi * (1 + 1e-5)


def test_ms_weight_constant_closed_form():
    k = builtin("constant", {"c": 1.0})
    lo, hi = ms_weight(k, np.array([1.0]), FractionalParams(0.5, 2.0), r_cut=64.0)
    # 2s * sum_{w=+-1} int_2^inf r^{-2} dr = 2 * 0.5 * 2 * (1/2) = 1
    assert lo == pytest.approx(1.0, abs=1e-10)
    assert hi == pytest.approx(1.0, abs=1e-10)


def test_ms_weight_sandwich_and_linearity():
    kp = builtin("periodic-1d", {"A0": 2.0, "A1": 1.0})
    x = np.array([0.7])
    fp = FractionalParams(0.3, 2.0)
    lo, hi = ms_weight(kp, x, fp, r_cut=50.0)
    n_omega = sphere_measure(1)
    cap = 2.0 ** (1 - fp.s * fp.p) * n_omega / fp.p * abs(x[0]) ** (-fp.s * fp.p)
    assert cap * kp.m_minus - 1e-9 <= lo <= hi <= cap * kp.m_plus + 1e-9

    k1 = builtin("constant", {"c": 1.0})
    k3 = builtin("constant", {"c": 3.0})
    lo1, hi1 = ms_weight(k1, x, fp, r_cut=50.0)
    lo3, hi3 = ms_weight(k3, x, fp, r_cut=50.0)
    assert lo3 == pytest.approx(3.0 * lo1, rel=1e-12)
    assert hi3 == pytest.approx(3.0 * hi1, rel=1e-12)


def test_ms_weight_rejects_origin_and_bad_cut():
    k = builtin("constant", {"c": 1.0})
    with pytest.raises(ValueError):
        ms_weight(k, np.array([0.0]), FractionalParams(0.5, 2.0), r_cut=4.0)
    with pytest.raises(ValueError):
        ms_weight(k, np.array([3.0]), FractionalParams(0.5, 2.0), r_cut=5.0)


def test_ms_weight_interval_nesting():
    kp = builtin("periodic-1d", {"A0": 2.0, "A1": 1.0})
    x = np.array([0.9])
    fp = FractionalParams(0.25, 2.0)
    lo1, hi1 = ms_weight(kp, x, fp, r_cut=16.0)
    lo2, hi2 = ms_weight(kp, x, fp, r_cut=256.0)
    slack = 1e-9 * max(abs(hi1), 1.0)
    assert lo1 - slack <= lo2 and hi2 <= hi1 + slack


def test_ms_weight_limit_identities():
    for n in (1, 2):
        k = builtin("constant", {"c": 1.0, "n": n})
        for p in (1.0, 2.0, 3.0):
            b = ms_weight_limit(k, np.ones(n), p)
            assert b == pytest.approx(ms_constant(p, n), abs=1e-10)
    k2 = builtin("constant", {"c": 2.0})
    assert ms_weight_limit(k2, np.array([1.0]), 2.0) == pytest.approx(
        2.0 * ms_constant(2.0, 1), abs=1e-10
    )


def test_ms_weight_limit_two_point_tail():
    # tail limit 1 + 1/2 on the + direction only: b = (2/p)(1 + 3/2)
    def tail(x, w):
        x = np.asarray(x, dtype=float)
        w = np.asarray(w, dtype=float)
        x, w = np.broadcast_arrays(x, w)
        return 1.0 + 0.5 * (w[..., 0] > 0)

    k = Kernel(
        evaluate=lambda x, h: tail(x, h),
        dimension=1,
        bounds=(1.0, 1.5),
        radial_limit=tail,
        tail_limit=tail,
        name="two-point-tail",
    )
    assert ms_weight_limit(k, np.array([1.0]), 2.0) == pytest.approx(2.5, abs=1e-12)


def test_ms_weight_limit_requires_tail():
    k = builtin("matrix-alpha", {"n": 1, "alpha": 2.0, "m0": 1.0, "m1": 0.5})
    assert k.tail_limit is None
    with pytest.raises(ValueError, match="tail"):
        ms_weight_limit(k, np.array([1.0]), 2.0)


def test_ms_weight_extrapolation_close_to_limit():
    k = builtin("constant", {"c": 1.0})
    b = ms_weight_limit(k, np.array([1.0]), 2.0)
    b_ex = ms_weight_extrapolated(k, np.array([1.0]), 2.0)
    assert abs(b_ex - b) / b < 0.05


def test_bbm_sweep_constant_kernel(bump129):
    from anisofrac.gridfn import gradient_lp

    k = builtin("constant", {"c": 1.0})
    table = bbm_sweep(k, bump129, 2.0)
    ref = gradient_lp(bump129, 2.0) ** 2
    assert table.final.reference == pytest.approx(ref, rel=1e-10)
    assert abs(table.best_estimate() - ref) / ref < 0.02


def test_bbm_sweep_zero_function(grid129):
    z = GridFunction(grid129, np.zeros(129))
    k = builtin("constant", {"c": 1.0})
    table = bbm_sweep(k, z, 2.0)
    assert all(r.value == 0.0 for r in table.rows)


def test_bbm_sweep_periodic_kernel(bump129):
    k = builtin("periodic-1d", {"A0": 2.0, "A1": 1.0})
    table = bbm_sweep(k, bump129, 2.0)
    # reference equals the trapezoid of (2 + sin 2 pi x)|u'|^2 over cells
    centers, grads, vols = bump129.cell_gradients()
    want = float(np.dot(vols, (2.0 + np.sin(2 * np.pi * centers[:, 0])) * grads[:, 0] ** 2))
    assert table.final.reference == pytest.approx(want, rel=1e-12)
    assert table.final.rel_error < 0.03


def test_ms_sweep_constant_and_linearity():
    grid = Grid(1, ((0.75, 2.25),), 129)
    u = GridFunction.from_callable(grid, lambda x: bump_profile((x - 1.5) / 0.5))
    k1 = builtin("constant", {"c": 1.0})
    t1 = ms_sweep(k1, u, 2.0)
    assert t1.final.rel_error < 0.10
    k2 = builtin("constant", {"c": 2.0})
    t2 = ms_sweep(k2, u, 2.0)
    assert t2.final.reference == pytest.approx(2.0 * t1.final.reference, rel=1e-12)
    z = GridFunction(grid, np.zeros(129))
    tz = ms_sweep(k1, z, 2.0)
    assert all(r.value == 0.0 for r in tz.rows)


def test_ms_sweep_requires_tail(grid129, bump129):
    k = builtin("matrix-alpha", {"n": 1, "alpha": 2.0, "m0": 1.0, "m1": 0.5})
    with pytest.raises(ValueError, match="tail"):
        ms_sweep(k, bump129, 2.0)


def test_convergence_table_invariants():
    rows = tuple(
        TableRow(param=s, value=1.0, extrapolated=None, reference=None, rel_error=None)
        for s in (0.25, 0.5, 0.75)
    )
    ConvergenceTable(rows, method="test")
    with pytest.raises(ValueError):
        ConvergenceTable((rows[1], rows[0], rows[2]), method="test")
    short = (
        TableRow(0.25, 1.0, None, None, None),
        TableRow(0.5, 1.0, 0.9, None, None),
    )
    with pytest.raises(ValueError):
        ConvergenceTable(short, method="test")


def test_sweep_extrapolated_from_third_row(bump129):
    k = builtin("constant", {"c": 1.0})
    table = bbm_sweep(k, bump129, 2.0, s_list=[0.75, 0.875, 0.9375])
    assert table.rows[0].extrapolated is None
    assert table.rows[1].extrapolated is None
    assert table.rows[2].extrapolated is not None
