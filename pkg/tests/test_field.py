"""Grid, difference-stencil and F2D-format unit tests."""

import os

import numpy as np
import pytest

import selfsim as ss
from selfsim import field as fld
from selfsim.errors import DimensionMismatch, DomainError, FormatError


@pytest.fixture
def grid():
    return ss.Grid2D(-1.0, 1.0, -0.5, 0.5, 17, 13)


def test_grid_properties(grid):
    assert grid.hx == pytest.approx(2.0 / 16)
    assert grid.hy == pytest.approx(1.0 / 12)
    assert grid.shape == (13, 17)
    assert grid.xi1[0] == -1.0 and grid.xi1[-1] == 1.0
    assert grid.xi2[0] == -0.5 and grid.xi2[-1] == 0.5
    assert grid.diam == pytest.approx(np.hypot(2.0, 1.0))


def test_grid_validation():
    with pytest.raises(DomainError):
        ss.Grid2D(0.0, 0.0, 0.0, 1.0, 5, 5)
    with pytest.raises(DomainError):
        ss.Grid2D(0.0, 1.0, 0.0, 1.0, 2, 5)


def test_field_shape_checks(grid):
    with pytest.raises(DimensionMismatch):
        ss.ScalarField(grid, np.zeros((3, 3)))
    f = ss.ScalarField(grid, np.zeros(grid.nx * grid.ny))
    assert f.values.shape == grid.shape
    c = ss.ScalarField.from_function(grid, lambda x, y: 2.0)
    assert np.all(c.values == 2.0)  # constants broadcast to the grid


def test_diff_stencils_exact_on_quadratics(grid):
    X, Y = grid.meshgrid()
    f = 2.0 * X ** 2 - 3.0 * X * Y + Y ** 2 + 0.5 * X - Y + 4.0
    d1 = fld.diff1(f, grid.hx, axis=1)
    assert np.max(np.abs(d1 - (4.0 * X - 3.0 * Y + 0.5))) < 1e-12
    d2 = fld.diff2(f, grid.hx, axis=1)
    assert np.max(np.abs(d2 - 4.0)) < 1e-11
    d2y = fld.diff2(f, grid.hy, axis=0)
    assert np.max(np.abs(d2y - 2.0)) < 1e-11


def test_hessian_cross_term(grid):
    f = ss.ScalarField.from_function(grid, lambda x, y: x * x * y)
    f11, f12, f22 = fld.hessian(f)
    X, Y = grid.meshgrid()
    assert np.max(np.abs(f11.values - 2.0 * Y)) < 1e-12
    assert np.max(np.abs(f12.values - 2.0 * X)) < 1e-12
    assert np.max(np.abs(f22.values)) < 1e-12


def test_discrete_identities(grid):
    f = ss.ScalarField.from_function(
        grid, lambda x, y: np.sin(2 * x) * np.cos(y) + x * y)
    curl_of_grad = fld.rot(fld.gradient(f)).values
    assert np.max(np.abs(curl_of_grad[1:-1, 1:-1])) < 1e-12
    div_of_perp = fld.divergence(fld.perp_gradient(f)).values
    assert np.max(np.abs(div_of_perp[1:-1, 1:-1])) < 1e-12
    lap = fld.laplacian(f).values
    wide = (fld.diff1(fld.diff1(f.values, grid.hx, 1), grid.hx, 1)
            + fld.diff1(fld.diff1(f.values, grid.hy, 0), grid.hy, 0))
    assert np.array_equal(lap, wide)


def test_f2d_scalar_round_trip(tmp_path, grid):
    rng = np.random.default_rng(7)
    f = ss.ScalarField(grid, rng.normal(size=grid.shape))
    p = tmp_path / "f.f2d"
    fld.write_field(f, p)
    g = fld.read_field(p)
    assert isinstance(g, ss.ScalarField)
    assert g.grid == grid
    assert np.array_equal(g.values, f.values)
    # second serialization is byte-identical (17 significant digits)
    p2 = tmp_path / "g.f2d"
    fld.write_field(g, p2)
    assert p.read_bytes() == p2.read_bytes()


def test_f2d_vector_round_trip(tmp_path, grid):
    rng = np.random.default_rng(8)
    V = ss.VectorField(grid, rng.normal(size=grid.shape),
                       rng.normal(size=grid.shape))
    p = tmp_path / "v.f2d"
    fld.write_field(V, p)
    W = fld.read_field(p)
    assert isinstance(W, ss.VectorField)
    assert np.array_equal(W.u, V.u) and np.array_equal(W.v, V.v)


def test_f2d_comments_and_blank_lines(tmp_path):
    p = tmp_path / "c.f2d"
    p.write_text("# leading comment\n\nF2D 3 3 0 1 0 1 scalar\n"
                 + "\n".join(f"{v}.0  # node" for v in range(9)) + "\n")
    f = fld.read_field(p)
    assert f.values[0, 1] == 1.0 and f.values[2, 2] == 8.0


def test_f2d_format_errors(tmp_path):
    bad_header = tmp_path / "a.f2d"
    bad_header.write_text("F3D 3 3 0 1 0 1 scalar\n" + "0\n" * 9)
    with pytest.raises(FormatError):
        fld.read_field(bad_header)
    bad_kind = tmp_path / "b.f2d"
    bad_kind.write_text("F2D 3 3 0 1 0 1 tensor\n" + "0\n" * 9)
    with pytest.raises(FormatError):
        fld.read_field(bad_kind)
    bad_value = tmp_path / "c.f2d"
    bad_value.write_text("F2D 3 3 0 1 0 1 scalar\n" + "0\n" * 8 + "oops\n")
    with pytest.raises(FormatError) as exc:
        fld.read_field(bad_value)
    assert exc.value.line == 10  # the offending line is reported
    short = tmp_path / "d.f2d"
    short.write_text("F2D 3 3 0 1 0 1 scalar\n" + "0\n" * 5)
    with pytest.raises(DimensionMismatch):
        fld.read_field(short)
    empty = tmp_path / "e.f2d"
    empty.write_text("# nothing\n")
    with pytest.raises(FormatError):
        fld.read_field(empty)
