"""Leaf recentering, radial-graph inversion, monotonicity certificates."""

import numpy as np
import pytest

from serrin_torsion.curvature import (
    ConformalSphere2D,
    ConstantCurvature,
    FlatSpace,
)
from serrin_torsion.foliation import (
    FoliationChart,
    FoliationError,
    build_foliation_chart,
    certify_foliation,
    critical_center_curve,
    recentering_solve,
    reparametrize,
    solved_profile_curve,
)
from serrin_torsion.serrin import SerrinProblem
from serrin_torsion.sphere_spectral import SphereFunction, get_basis

T_GRID = np.geomspace(0.02, 0.12, 8)


@pytest.fixture(scope="module")
def basis():
    return get_basis(2, 16)


@pytest.fixture(scope="module")
def flat_chart(basis):
    flat = FlatSpace(2)
    curve = lambda t: np.zeros(2)
    profile = lambda t: SphereFunction.constant(basis, 0.0)
    return build_foliation_chart(flat, T_GRID, curve, profile)


@pytest.fixture(scope="module")
def round_setup():
    manifold = ConstantCurvature(2, 1.0)
    problem = SerrinProblem(manifold)
    curve = lambda t: manifold.origin()
    profile = solved_profile_curve(problem, curve)
    return manifold, problem, curve, profile


@pytest.fixture(scope="module")
def conf_setup():
    manifold = ConformalSphere2D()
    problem = SerrinProblem(manifold)
    base, curve = critical_center_curve(problem, eps_ref=0.1, seed=0)
    profile = solved_profile_curve(problem, curve)
    return manifold, problem, base, curve, profile


@pytest.fixture(scope="module")
def conf_chart(conf_setup):
    manifold, _, _, curve, profile = conf_setup
    return build_foliation_chart(manifold, T_GRID, curve, profile)


# -- recentering ---------------------------------------------------------------


def test_flat_recentering_is_scaled_identity(basis):
    flat = FlatSpace(2)
    curve = lambda t: np.zeros(2)
    profile = lambda t: SphereFunction.constant(basis, 0.0)
    w = recentering_solve(flat, 0.1, curve, profile)
    assert np.abs(w - 0.1 * basis.nodes).max() == 0.0


def test_round_common_center_magnitudes(round_setup):
    # common center: the two chart maps cancel, so |w| = t (1 + v(x))
    manifold, _, curve, profile = round_setup
    t = 0.1
    w = recentering_solve(manifold, t, curve, profile)
    expected = t * (1.0 + profile(t).node_values())
    assert np.abs(np.linalg.norm(w, axis=1) - expected).max() < 1e-13


def test_conformal_recentering_residual_and_slope(conf_setup, basis):
    manifold, _, base, curve, profile = conf_setup
    # residual_tol is enforced inside; a successful return certifies 1e-12
    for t in (0.04, 0.12):
        w = recentering_solve(manifold, t, curve, profile)
        mags = np.linalg.norm(w, axis=1)
        assert np.abs(mags - t).max() < 0.02 * t  # w = t x + O(t^2) behavior
        assert np.abs(mags - t).max() / t**2 < 2.0


# -- reparametrization -----------------------------------------------------------


def test_reparametrize_identity_direction(basis):
    t = 0.07
    w = t * basis.nodes
    omega, alpha = reparametrize(w, t, basis)
    assert np.abs(omega - t).max() < 1e-12
    assert np.abs(alpha - basis.nodes).max() < 1e-14


def test_reparametrize_radial_perturbation(basis):
    # w parallel to x leaves the direction map at the identity, so omega
    # equals the radial magnitude itself
    t, delta = 0.1, 0.05
    theta = np.arctan2(basis.nodes[:, 1], basis.nodes[:, 0])
    mags = t * (1.0 + delta * np.cos(theta))
    w = mags[:, None] * basis.nodes
    omega, alpha = reparametrize(w, t, basis)
    assert np.abs(alpha - basis.nodes).max() < 1e-14
    assert np.abs(omega - mags).max() < 1e-10


def test_reparametrize_rejects_vanishing_leaf(basis):
    w = np.zeros_like(basis.nodes)
    with pytest.raises(FoliationError):
        reparametrize(w, 0.1, basis)


def test_reparametrize_rejects_folded_direction_map(basis):
    # direction map theta -> theta + 2 sin(theta) is not injective, the
    # inversion cannot converge
    theta = np.arctan2(basis.nodes[:, 1], basis.nodes[:, 0])
    bent = theta + 2.0 * np.sin(theta)
    w = 0.1 * np.stack([np.cos(bent), np.sin(bent)], axis=1)
    with pytest.raises(FoliationError):
        reparametrize(w, 0.1, basis)


# -- certification ---------------------------------------------------------------


def test_flat_certificate_exact(flat_chart):
    cert = certify_foliation(flat_chart)
    assert cert["nested"]
    assert cert["t1"] == T_GRID[-1]
    assert cert["n_certified"] == len(T_GRID)
    assert abs(cert["min_dt_omega"] - 1.0) < 1e-10
    assert cert["slope_zero_error"] < 1e-10


def test_round_certificate(round_setup):
    manifold, _, curve, profile = round_setup
    chart = build_foliation_chart(manifold, T_GRID, curve, profile)
    cert = certify_foliation(chart)
    assert cert["nested"]
    assert cert["slope_zero_error"] < 1e-3
    assert cert["min_dt_omega"] > 0.99
    # common-center graphs are t (1 + v0(t)) up to tiny angular content
    for i, t in enumerate(T_GRID):
        expected = t * (1.0 + profile(float(t)).node_values())
        assert np.abs(chart.omega[i] - expected).max() < 1e-12


def test_conformal_certificate_end_to_end(conf_chart):
    cert = certify_foliation(conf_chart)
    assert cert["nested"]
    assert cert["n_certified"] == len(T_GRID)
    assert 0.999 <= cert["slope_zero_min"] <= cert["slope_zero_max"] <= 1.001
    assert cert["min_dt_omega"] > 0.99
    # strict nesting restated directly on the sampled graphs
    assert np.all(np.diff(conf_chart.omega, axis=0) > 0)


def test_conformal_limit_slope_invariant(conf_chart):
    rem = (conf_chart.omega - T_GRID[:, None]) / T_GRID[:, None] ** 2
    assert np.abs(rem).max() < 0.1


def test_certificate_needs_enough_leaves(flat_chart):
    short = FoliationChart(
        base=flat_chart.base,
        t_grid=flat_chart.t_grid[:5],
        omega=flat_chart.omega[:5],
        centers=flat_chart.centers[:5],
        profiles=flat_chart.profiles[:5],
    )
    with pytest.raises(ValueError):
        certify_foliation(short)


def test_certificate_grid_mismatch(flat_chart):
    with pytest.raises(ValueError):
        certify_foliation(flat_chart, t_grid=flat_chart.t_grid * 2.0)


def test_certificate_rejects_overlapping_leaves(flat_chart):
    broken = FoliationChart(
        base=flat_chart.base,
        t_grid=flat_chart.t_grid,
        omega=flat_chart.omega[::-1].copy(),
        centers=flat_chart.centers,
        profiles=flat_chart.profiles,
    )
    with pytest.raises(FoliationError):
        certify_foliation(broken)


def test_certificate_prefix_stops_at_first_failure(flat_chart):
    omega = flat_chart.omega.copy()
    omega[-1] = omega[-3]  # last leaf collapses below its predecessor
    chart = FoliationChart(
        base=flat_chart.base,
        t_grid=flat_chart.t_grid,
        omega=omega,
        centers=flat_chart.centers,
        profiles=flat_chart.profiles,
    )
    cert = certify_foliation(chart)
    assert not cert["nested"]
    assert cert["n_certified"] == len(T_GRID) - 1
    assert cert["t1"] == flat_chart.t_grid[-2]


def test_build_validates_grid(basis):
    flat = FlatSpace(2)
    curve = lambda t: np.zeros(2)
    profile = lambda t: SphereFunction.constant(basis, 0.0)
    with pytest.raises(ValueError):
        build_foliation_chart(flat, [0.1], curve, profile)
    with pytest.raises(ValueError):
        build_foliation_chart(flat, [-0.1, 0.1], curve, profile)
    with pytest.raises(ValueError):
        build_foliation_chart(flat, [0.2, 0.1], curve, profile)


# -- solver-driven curve -----------------------------------------------------


def test_critical_center_curve_quadratic_drift(conf_setup):
    manifold, _, base, curve, _ = conf_setup
    assert np.abs(np.asarray(curve(0.0)) - base).max() == 0.0
    pmax = manifold.scalar_max_point()
    assert np.abs(base - pmax).max() < 1e-10
    d1 = manifold.distance(base, curve(0.05))
    d2 = manifold.distance(base, curve(0.1))
    assert abs(d2 / d1 - 4.0) < 1e-6  # exact quadratic interpolant
    assert d2 / 0.1**2 < 1.0  # and the drift itself is tiny


def test_leaf_table_shape(flat_chart):
    rows = flat_chart.leaf_table()
    assert len(rows) == flat_chart.omega.size
    t0, j0, om0 = rows[0]
    assert t0 == T_GRID[0]
    assert j0 == 0
    assert om0 == flat_chart.omega[0, 0]
