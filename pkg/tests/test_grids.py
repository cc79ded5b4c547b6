import io
import math

import numpy as np
import pytest

from mpcc.grids import (
    DiscreteFunction,
    LineGrid,
    RadialGrid,
    apply_operator,
    composite_integral,
    csv_dump,
    csv_loads,
    dilate,
    dirichlet_seminorm_sq,
    h1_norm_sq,
    sphere_area,
    solve_operator,
    talenti_bump,
    translate,
    unitary_dilate,
)
from mpcc.nonlinearity import NonlinearitySpec


def soliton(grid, shift=0.0):
    return DiscreteFunction.from_samples(grid, math.sqrt(2.0) / np.cosh(grid.nodes - shift))


def rough(grid, seed=0, amp=1.0):
    """Random smooth test function vanishing on the boundary."""
    rng = np.random.default_rng(seed)
    x = grid.nodes
    scale = x[-1]
    vals = np.zeros_like(x)
    for k in range(1, 6):
        vals += rng.normal() / k * np.sin(np.pi * k * (x - x[0]) / (x[-1] - x[0]))
    return DiscreteFunction.from_samples(grid, amp * vals)


# -- quadrature oracles ----------------------------------------------------


def test_zero_function_norms():
    grid = RadialGrid.uniform(4, 10.0, 128)
    z = DiscreteFunction.zero(grid)
    assert dirichlet_seminorm_sq(z) == 0.0
    assert grid.l2_sq(z.values) == 0.0


def test_seminorm_against_fine_quadrature_oracle():
    # N=4 decay profile (1+r^2)^{-1} truncated at R=80, against an
    # independent 1e6-point trapezoid quadrature of the closed form.
    grid = RadialGrid.geometric(4, 80.0, 512, r1=1e-3)
    u = DiscreteFunction.from_samples(grid, 1.0 / (1.0 + grid.nodes**2))
    got = dirichlet_seminorm_sq(u)
    r = np.linspace(0.0, 80.0, 1_000_000)
    du = -2.0 * r / (1.0 + r**2) ** 2
    ref = sphere_area(4) * np.trapezoid(du**2 * r**3, r)
    assert abs(got - ref) / ref < 5e-3


def test_seminorm_quadratic_scaling():
    grid = RadialGrid.uniform(3, 10.0, 128)
    u = rough(grid, seed=1)
    assert dirichlet_seminorm_sq(2.0 * u) == pytest.approx(4.0 * dirichlet_seminorm_sq(u))


def test_h1_norm_soliton_closed_form():
    # sqrt(2) sech: grad part 4/3, L2 part 4, total 16/3
    grid = LineGrid(20.0, 8000)  # h = 0.005
    u = soliton(grid)
    assert h1_norm_sq(u, 1.0) == pytest.approx(16.0 / 3.0, abs=1e-4)
    assert h1_norm_sq(2.0 * u, 1.0) == pytest.approx(4.0 * h1_norm_sq(u, 1.0))


def test_h1_norm_rejects_nonpositive_lambda():
    grid = LineGrid(10.0, 128)
    with pytest.raises(ValueError):
        h1_norm_sq(DiscreteFunction.zero(grid), 0.0)


def test_composite_integral_soliton_quartic():
    grid = LineGrid(20.0, 8000)
    u = soliton(grid)
    spec = NonlinearitySpec.power(4, N=1)
    assert composite_integral(u, spec) == pytest.approx(4.0 / 3.0, abs=1e-4)


def test_composite_integral_radial_oracle():
    grid = RadialGrid.geometric(4, 80.0, 512, r1=1e-3)
    u = DiscreteFunction.from_samples(grid, 1.0 / (1.0 + grid.nodes**2))
    spec = NonlinearitySpec.critical_stem(N=4)
    got = composite_integral(u, spec)
    r = np.linspace(0.0, 80.0, 1_000_000)
    ref = sphere_area(4) * np.trapezoid((1.0 + r**2) ** -4 * r**3, r)
    assert abs(got - ref) / ref < 5e-3


# -- group actions -----------------------------------------------------------


def test_dilate_identity_and_scaling_law():
    grid = RadialGrid.geometric(4, 120.0, 640, r1=1e-3)
    u = talenti_bump(grid)
    assert np.allclose(dilate(u, 1.0).values, u.values)
    a = dirichlet_seminorm_sq(u)
    for t in (0.25, 0.5, 2.0, 4.0):
        at = dirichlet_seminorm_sq(dilate(u, t))
        assert abs(at - t ** (grid.N - 2) * a) / (t ** (grid.N - 2) * a) < 1e-2


def test_dilation_scaling_of_composite_integral():
    grid = RadialGrid.geometric(4, 120.0, 640, r1=1e-3)
    u = talenti_bump(grid)
    spec = NonlinearitySpec.critical_stem(N=4)
    b = composite_integral(u, spec)
    for t in (0.5, 2.0):
        bt = composite_integral(dilate(u, t), spec)
        assert abs(bt - t**grid.N * b) / (t**grid.N * b) < 1e-2


def test_unitary_dilate_preserves_seminorm():
    grid = RadialGrid.geometric(4, 200.0, 768, r1=1e-4)
    u = talenti_bump(grid)
    assert np.allclose(unitary_dilate(u, 0, 2.0).values, u.values)
    a = dirichlet_seminorm_sq(u)
    for j in (-3, -1, 1, 3):
        aj = dirichlet_seminorm_sq(unitary_dilate(u, j, 2.0))
        assert abs(aj - a) / a < 1e-2


def test_dilate_rejects_nonpositive():
    grid = RadialGrid.uniform(3, 10.0, 128)
    with pytest.raises(ValueError):
        dilate(talenti_bump(grid), 0.0)


def test_translate_lattice_exact():
    grid = LineGrid(20.0, 2000)
    u = soliton(grid)
    assert np.allclose(translate(u, 0.0).values, u.values)
    v = translate(u, 10 * grid.h)
    assert h1_norm_sq(v, 1.0) == pytest.approx(h1_norm_sq(u, 1.0), rel=1e-6)


def test_translate_decorrelates_at_large_shift():
    grid = LineGrid(20.0, 2000)
    u = soliton(grid)
    v = translate(u, 30.0)
    ip = grid.integrate(u.values * v.values)
    assert abs(ip) < 1e-6 * grid.l2_sq(u.values)


# -- operator ----------------------------------------------------------------


def test_operator_quadratic_form_consistency_exact():
    for grid in (
        RadialGrid.uniform(3, 12.0, 200),
        RadialGrid.geometric(4, 50.0, 256, r1=1e-3),
        LineGrid(15.0, 300),
    ):
        u = rough(grid, seed=3)
        Au = apply_operator(u, 0.0)
        lhs = grid.integrate(Au.values * u.values)
        rhs = dirichlet_seminorm_sq(u)
        assert abs(lhs - rhs) <= 1e-10 * max(1.0, rhs)


def test_operator_soliton_residual():
    # sqrt(2) sech solves -u'' + u = u^3
    grid = LineGrid(20.0, 8000)
    u = soliton(grid)
    res = apply_operator(u, 1.0).values - u.values**3
    interior = ~grid.dirichlet_mask
    assert np.max(np.abs(res[interior])) <= 1e-3


def test_operator_solve_roundtrip():
    grid = RadialGrid.uniform(4, 10.0, 256)
    u = rough(grid, seed=5)
    w = solve_operator(apply_operator(u, 2.5), 2.5)
    assert np.max(np.abs(w.values - u.values)) < 1e-8 * max(1.0, np.max(np.abs(u.values)))


def test_smallest_eigenvalue_unit_ball_n4():
    # first Dirichlet eigenvalue of the unit ball in R^4 is j_{1,1}^2
    grid = RadialGrid.geometric(4, 1.0, 512, r1=1e-5, domain_kind="ball")
    lam1 = grid.eigen_smallest()[0]
    assert lam1 == pytest.approx(3.8317059702075125**2, rel=5e-3)


# -- construction and IO -----------------------------------------------------


def test_grid_invariants_enforced():
    with pytest.raises(ValueError):
        RadialGrid.uniform(2, 10.0, 128)
    with pytest.raises(ValueError):
        RadialGrid.uniform(4, 10.0, 32)
    with pytest.raises(ValueError):
        LineGrid(-1.0, 128)


def test_discrete_function_boundary_enforced():
    grid = RadialGrid.uniform(4, 10.0, 128)
    vals = np.ones(grid.npoints)
    with pytest.raises(ValueError):
        DiscreteFunction(grid, vals)
    u = DiscreteFunction.from_samples(grid, vals)
    assert u.values[-1] == 0.0
    with pytest.raises(ValueError):
        u.values[0] = 2.0  # immutable


def test_csv_roundtrip():
    grid = RadialGrid.geometric(4, 25.0, 128, r1=1e-3)
    u = talenti_bump(grid, width=2.0)
    buf = io.StringIO()
    csv_dump(u, buf)
    v = csv_loads(buf.getvalue())
    assert v.grid.N == 4
    assert np.allclose(v.values, u.values)
    assert np.allclose(v.grid.nodes, grid.nodes)
