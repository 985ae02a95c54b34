import numpy as np
import pytest

from poiseflow.errors import ConfigError, ShapeError
from poiseflow.grid import (antiderivative_stream, build_grid, diff_y, inner,
                            laplacian_k, norm_sq, solve_poisson, weighted_norm)


def test_weights_integrate_constant():
    for L, n in [(1.0, 16), (1.0, 33), (8.0, 64), (10.0, 96)]:
        g = build_grid(L, n)
        assert abs(g.quad_weights.sum() - 2 * L) < 1e-12 * 2 * L
        assert np.all(g.quad_weights > 0)


def test_nodes_ascending_with_lobatto_endpoints():
    g = build_grid(8.0, 64)
    assert g.nodes[0] == -8.0
    assert g.nodes[-1] == 8.0
    assert np.all(np.diff(g.nodes) > 0)
    assert np.all(np.abs(g.nodes) <= 8.0)


def test_quadrature_of_y_squared():
    # analytic antiderivative: int_{-8}^{8} y^2 dy = 2*8^3/3
    g = build_grid(8.0, 64)
    val = np.sum(g.quad_weights * g.nodes**2)
    assert abs(val - 2 * 8.0**3 / 3.0) < 1e-9


def test_build_grid_rejects_bad_sizes():
    with pytest.raises(ConfigError):
        build_grid(10.0, 4)
    with pytest.raises(ConfigError):
        build_grid(-1.0, 64)
    with pytest.raises(ConfigError):
        build_grid(0.0, 64)


def test_diff_constant_and_cubic():
    g = build_grid(3.0, 24)
    z = diff_y(np.ones(g.n_y, dtype=complex), g)
    assert np.max(np.abs(z)) < 1e-11
    d = diff_y(g.nodes**3, g)
    assert np.max(np.abs(d - 3 * g.nodes**2)) < 1e-9


def test_diff_polynomial_exactness(rng):
    # derivative of any polynomial of degree < n_y - 1 is exact to round-off
    g = build_grid(5.0, 40)
    coeffs = rng.standard_normal(g.n_y - 2)
    p = np.polynomial.polynomial.polyval(g.nodes / 5.0, coeffs)
    dp = np.polynomial.polynomial.polyval(
        g.nodes / 5.0, np.polynomial.polynomial.polyder(coeffs)) / 5.0
    scale = np.max(np.abs(dp)) + 1.0
    assert np.max(np.abs(diff_y(p, g) - dp)) < 1e-10 * scale


def test_diff_gaussian_against_symbolic():
    g = build_grid(10.0, 96)
    f = np.exp(-g.nodes**2 / 2)
    exact = -g.nodes * np.exp(-g.nodes**2 / 2)
    assert np.max(np.abs(diff_y(f, g) - exact)) < 1e-10


def test_diff_shape_error(grid96):
    with pytest.raises(ShapeError):
        diff_y(np.ones(10), grid96)


def test_laplacian_trivials(grid96):
    g = grid96
    out = laplacian_k(g.nodes**2 + 0j, 0.0, g)
    assert np.max(np.abs(out - 2.0)) < 1e-8
    f = np.exp(-g.nodes**2 / 2) + 0j
    exact = (g.nodes**2 - 2) * np.exp(-g.nodes**2 / 2)
    err = np.abs(laplacian_k(f, 1.0, g) - exact)[1:-1]
    assert np.max(err) < 1e-9


def test_laplacian_definition_split(grid96, rng):
    g = grid96
    f = rng.standard_normal(g.n_y) + 1j * rng.standard_normal(g.n_y)
    k = 3.7
    lhs = laplacian_k(f, k, g)
    rhs = laplacian_k(f, 0.0, g) - k * k * f
    assert np.max(np.abs(lhs - rhs)) == 0.0


def test_poisson_manufactured_gaussian(grid96):
    g = grid96
    psi_exact = np.exp(-g.nodes**2 / 2)
    omega = (g.nodes**2 - 2) * psi_exact
    psi = solve_poisson(omega, 1.0, g)
    assert np.max(np.abs(psi - psi_exact)) < 1e-8
    res = laplacian_k(psi, 1.0, g) - omega
    assert np.sqrt(norm_sq(res, g) / norm_sq(omega, g)) < 1e-10
    assert abs(psi[0]) == 0.0 and abs(psi[-1]) == 0.0


def test_poisson_linearity_and_zero(grid96, rng):
    g = grid96
    w1 = rng.standard_normal(g.n_y) + 1j * rng.standard_normal(g.n_y)
    w2 = rng.standard_normal(g.n_y) + 1j * rng.standard_normal(g.n_y)
    a, b = 1.7 - 0.3j, -0.4 + 2.2j
    lhs = solve_poisson(a * w1 + b * w2, 2.0, g)
    rhs = a * solve_poisson(w1, 2.0, g) + b * solve_poisson(w2, 2.0, g)
    scale = np.max(np.abs(rhs)) + 1e-30
    assert np.max(np.abs(lhs - rhs)) < 1e-12 * scale
    assert np.max(np.abs(solve_poisson(np.zeros(g.n_y), 1.0, g))) == 0.0


def test_poisson_rejects_k_zero(grid96):
    with pytest.raises(ConfigError):
        solve_poisson(np.zeros(grid96.n_y), 0.0, grid96)


def test_antiderivative_stream(grid96):
    g = grid96
    v, flag = antiderivative_stream(np.zeros(g.n_y, dtype=complex), g)
    assert np.max(np.abs(v)) == 0.0
    om = -g.nodes * np.exp(-g.nodes**2 / 2)
    v, flag = antiderivative_stream(om, g)
    exact = np.exp(-g.nodes**2 / 2) - np.exp(-g.half_width**2 / 2)
    assert np.max(np.abs(v - exact)) < 1e-9
    assert not flag                        # odd data integrates to zero
    assert abs(v[-1]) < 1e-12              # zero total integral


def test_antiderivative_mean_warning(grid96):
    g = grid96
    om = np.exp(-g.nodes**2 / 2) + 0j     # nonzero mean: no decay at +L
    v, flag = antiderivative_stream(om, g)
    assert flag
    assert abs(v[-1] - np.sqrt(2 * np.pi)) < 1e-9


def test_weighted_norm(grid96):
    g = grid96
    assert weighted_norm(np.zeros(g.n_y), 0, g) == 0.0
    g1 = build_grid(1.0, 48)
    val = weighted_norm(np.ones(g1.n_y), 1, g1)
    assert abs(val - np.sqrt(2.0 / 3.0)) < 1e-12
    f = np.exp(-g.nodes**2) * (1 + 2j)
    assert abs(weighted_norm(2 * f, 1, g) - 2 * weighted_norm(f, 1, g)) < 1e-13
    with pytest.raises(ConfigError):
        weighted_norm(f, 2, g)


def test_inner_products(grid96, rng):
    g = grid96
    f = rng.standard_normal(g.n_y) + 1j * rng.standard_normal(g.n_y)
    h = rng.standard_normal(g.n_y) + 1j * rng.standard_normal(g.n_y)
    ff = inner(f, f, g)
    assert abs(ff.imag) < 1e-13 * abs(ff)
    assert ff.real >= 0.0
    assert abs(inner(f, h, g) - np.conj(inner(h, f, g))) < 1e-12 * abs(inner(f, h, g))
    gaus = np.exp(-g.nodes**2 / 2)
    assert abs(inner(gaus, gaus, g) - np.sqrt(np.pi)) < 1e-9


def test_operator_linearity(grid96, rng):
    g = grid96
    f = rng.standard_normal(g.n_y) + 1j * rng.standard_normal(g.n_y)
    h = rng.standard_normal(g.n_y) + 1j * rng.standard_normal(g.n_y)
    a, b = 0.3 + 1.1j, -2.0 + 0.7j
    for op in (lambda v: diff_y(v, g), lambda v: laplacian_k(v, 2.0, g)):
        lhs = op(a * f + b * h)
        rhs = a * op(f) + b * op(h)
        assert np.max(np.abs(lhs - rhs)) < 1e-10 * (np.max(np.abs(rhs)) + 1)


def test_poisson_spectral_convergence():
    # error drops by >= 10x when n_y doubles from 48 to 96
    errs = {}
    for n in (48, 96):
        g = build_grid(10.0, n)
        psi_exact = np.exp(-g.nodes**2 / 2)
        omega = (g.nodes**2 - 2) * psi_exact
        psi = solve_poisson(omega, 1.0, g)
        errs[n] = np.max(np.abs(psi - psi_exact))
    assert errs[48] / errs[96] >= 10.0


def test_discrete_integration_by_parts(grid128):
    g = grid128
    f = np.exp(-g.nodes**2 / 1.5) * np.exp(1j * 2.0 * g.nodes)
    h = g.nodes * np.exp(-(g.nodes - 0.7)**2 / 2)
    lhs = inner(diff_y(f, g), h, g) + inner(f, diff_y(h, g), g)
    bound = 1e-9 * np.sqrt(norm_sq(f, g) * norm_sq(h, g))
    assert abs(lhs) <= bound


def test_agmon_bound(grid128, rng):
    from poiseflow.state import random_localized_state
    g = grid128
    for _ in range(20):
        f = random_localized_state(g, rng)
        lhs = np.max(np.abs(f))
        rhs = np.sqrt(2.0) * norm_sq(f, g)**0.25 * norm_sq(diff_y(f, g), g)**0.25
        assert lhs <= rhs * (1 + 1e-6)
