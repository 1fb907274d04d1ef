"""Quasi-potential machinery unit tests: perturbation forms, closures,
linearized operator, coupled solver reduction and rotational diagnostics."""

import numpy as np
import pytest

import selfsim as ss
from selfsim import field as fld, potential, quasipotential as qp
from selfsim.errors import ConfigError, NonIntegrableF1

from conftest import quiescent_field


@pytest.fixture
def law():
    return ss.GasLaw(a=1.0, gamma=2.0)


@pytest.fixture
def grid():
    return ss.Grid2D(-0.5, 0.5, -0.5, 0.5, 33, 33)


def smooth(grid, seed=0):
    rng = np.random.default_rng(seed)
    X, Y = grid.meshgrid()
    a, b, c = rng.normal(size=3)
    return ss.ScalarField(grid, a * np.sin(np.pi * X) * np.cos(np.pi * Y)
                          + b * X * Y + c * np.cos(2 * X + Y))


def test_N_terms_discrete_homogeneity(grid):
    """N1, N2, N3 are exactly homogeneous of degree 1, 2, 3 in zeta."""
    psi = smooth(grid, 1)
    zeta = smooth(grid, 2)
    z2 = ss.ScalarField(grid, 2.0 * zeta.values)
    for fn, deg in ((qp.compute_N1, 1), (qp.compute_N2, 2)):
        a = fn(psi, z2).values
        b = 2.0 ** deg * fn(psi, zeta).values
        assert np.max(np.abs(a - b)) < 1e-10 * max(1.0, np.max(np.abs(b)))
    a = qp.compute_N3(z2).values
    assert np.max(np.abs(a - 8.0 * qp.compute_N3(zeta).values)) < 1e-10


def test_N1_vanishes_for_zero_zeta(grid):
    psi = smooth(grid, 3)
    z0 = ss.ScalarField.zeros(grid)
    assert np.all(qp.compute_N1(psi, z0).values == 0.0)
    assert np.all(qp.compute_N2(psi, z0).values == 0.0)
    assert np.all(qp.compute_N3(z0).values == 0.0)


def test_reconstruct_F1_harmonic_golden(grid):
    # zeta = xi1 xi2 is harmonic, so grad F1 = perp_grad zeta = (-xi1, xi2)
    # and F1 = (xi2^2 - xi1^2)/2 anchored at the center node (the origin)
    psi = smooth(grid, 4)
    zeta = ss.ScalarField.from_function(grid, lambda x, y: x * y)
    F1, defect = qp.reconstruct_F1(psi, zeta, anchor=(16, 16))
    X, Y = grid.meshgrid()
    assert np.max(np.abs(F1.values - (Y ** 2 - X ** 2) / 2.0)) < 1e-12
    assert defect < 1e-10


def test_reconstruct_F1_strict_curl_guard(grid):
    psi = quiescent_field(grid)
    zeta = ss.ScalarField.from_function(
        grid, lambda x, y: np.sin(np.pi * x) * np.sin(np.pi * y))
    _, defect = qp.reconstruct_F1(psi, zeta)
    assert defect > 1e-3  # this zeta does not satisfy the transport balance
    with pytest.raises(NonIntegrableF1):
        qp.reconstruct_F1(psi, zeta, strict=True, curl_tol=1e-6)


def test_Q1_and_c2_quasi(law, grid):
    psi = quiescent_field(grid)
    zeta = ss.ScalarField.from_function(grid, lambda x, y: x * y)
    F1, _ = qp.reconstruct_F1(psi, zeta, anchor=(16, 16))
    q1 = qp.compute_Q1(law, psi, zeta, F1)
    gp = fld.gradient(psi)
    pz = fld.perp_gradient(zeta)
    expect = (law.gamma - 1.0) * (F1.values + gp.u * pz.u + gp.v * pz.v)
    assert np.max(np.abs(q1.values - expect)) == 0.0
    c2, clamped = qp.c2_quasi(law, psi, zeta, 1e-3, F1)
    c0, _ = potential.c2_of_phi(law, psi, c2_floor=-np.inf)
    assert np.max(np.abs(c2.values - (c0.values - 1e-3 * q1.values))) < 1e-14
    assert clamped == 0


def test_residual_map_matches_operator_form(law, grid):
    """The affine form c^2 Lap - Hessian quadratic - |grad|^2 + 2 c^2 equals
    the expanded operator discretely, given one consistent Laplacian."""
    phi = smooth(grid, 6)
    phi = ss.ScalarField(grid, quiescent_field(grid).values
                         + 0.05 * phi.values)
    r_affine = qp.residual_map(law, phi).values
    r_expanded = potential.residual_Q(law, phi, c2_floor=-np.inf).values
    assert np.max(np.abs((r_affine - r_expanded)[1:-1, 1:-1])) < 1e-9


def test_residual_map_zero_at_quiescent(law, grid):
    psi = quiescent_field(grid)
    assert np.max(np.abs(qp.residual_map(law, psi).values)) < 1e-12


def test_linearized_annihilates_translation(law, grid):
    psi0 = quiescent_field(grid)
    v = ss.ScalarField.from_function(grid, lambda x, y: x)
    lv = qp.linearized_L(psi0, v, law)
    assert np.max(np.abs(lv.values[1:-1, 1:-1])) < 1e-12


def test_gateaux_slope(law, grid):
    psi0 = quiescent_field(grid)
    v = ss.ScalarField.from_function(
        grid, lambda x, y: np.sin(np.pi * x) * np.sin(np.pi * y))
    out = qp.gateaux_check(psi0, v, law)
    assert 0.9 <= out["slope"] <= 1.1
    with pytest.raises(ConfigError):
        qp.gateaux_check(psi0, v, law, taus=(1e-4, 1e-3))


def test_quasi_config_validation():
    with pytest.raises(ConfigError):
        qp.QuasiConfig(delta_targets=[1e-2, 1e-3])  # not ascending
    with pytest.raises(ConfigError):
        qp.QuasiConfig(delta_targets=[-0.1])
    with pytest.raises(ConfigError):
        qp.QuasiConfig(delta_targets=[1.0])
    with pytest.raises(ConfigError):
        qp.QuasiConfig(outer_tol=0.0)


def test_solve_quasi_delta_zero_reduces_to_potential(law):
    grid = ss.Grid2D(0.1, 0.6, 0.1, 0.6, 17, 17)
    base = potential.PotentialProblem(law=law, grid=grid,
                                      phi_b=quiescent_field(grid))
    phi, _ = potential.epsilon_continuation(base)
    cfg = qp.QuasiConfig(delta_targets=[0.0], anchor=(8, 8))
    state, rep = qp.solve_quasi(cfg, base)
    assert rep.status == "Converged"
    assert np.max(np.abs(state.psi.values - phi.values)) < 1e-8
    assert np.all(state.zeta.values == 0.0)
    assert state.delta == 0.0


def test_full_rotational_residual_potential_limit(law):
    grid = ss.Grid2D(0.1, 0.6, 0.1, 0.6, 17, 17)
    base = potential.PotentialProblem(law=law, grid=grid,
                                      phi_b=quiescent_field(grid))
    phi, _ = potential.epsilon_continuation(base)
    zeta0 = ss.ScalarField.zeros(grid)
    r1, r2 = qp.full_rotational_residual(phi, zeta0, law, anchor=(8, 8))
    # with zeta = 0 the reconstructed closure collapses to c0^2 and r1 is the
    # plain potential residual; the vorticity residual vanishes identically
    lim = np.max(np.abs(qp.residual_map(law, phi).values[1:-1, 1:-1]))
    assert np.max(np.abs(r1.values)) <= lim + 1e-10
    assert np.all(r2.values == 0.0)
