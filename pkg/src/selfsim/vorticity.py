"""Vorticity transport along pseudo-velocity characteristics.

The stationary vorticity balance div(omega b) + omega = 0 is solved by
backward characteristic tracing: from each node the ODE d(xi)/dr = -b(xi) is
integrated until it leaves the domain, and the damping integral of
(1 + div b) is accumulated along the path, giving

    omega(xi) = omega_b(xi_hit) * exp(-int_0^R (1 + div b) ds).

Nodes whose backward trace stagnates, exceeds the length budget, or lands on
a non-inflow boundary point are *uncovered*: they receive zero and are
counted in the report.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field

import numpy as np

from . import _kernels, field as fld
from .errors import ConfigError, UncoveredNodes
from .field import Grid2D, ScalarField, VectorField
from .hodge import _boundary_normals


@dataclass
class CharacteristicTrace:
    """Recorded polyline of a single characteristic."""

    points: np.ndarray = dc_field(repr=False)  # (n, 2) xi positions
    r: np.ndarray = dc_field(repr=False)       # parameter values
    accumulated: float = 0.0                   # int (1 + div b) ds
    status: str = "exited"                     # exited | stagnation | maxlen


@dataclass
class InflowSet:
    """Frame nodes with inward drift b.nu < -tol (nu = outward normal)."""

    mask: np.ndarray = dc_field(repr=False)          # bool, frame-only
    normal_speed: np.ndarray = dc_field(repr=False)  # b.nu, zero at interior
    count: int = 0


@dataclass
class TransportReport:
    uncovered: int = 0
    stagnated: int = 0
    truncated: int = 0
    exited: int = 0
    traced: int = 0


def inflow_boundary(b: VectorField, tol_inflow: float = 1e-12) -> InflowSet:
    """Classify frame nodes by the sign of b.nu (corners use the unit diagonal)."""
    nux, nuy = _boundary_normals(b.grid)
    speed = nux * b.u + nuy * b.v
    frame = (nux != 0) | (nuy != 0)
    mask = frame & (speed < -tol_inflow)
    return InflowSet(mask=mask, normal_speed=speed,
                     count=int(np.count_nonzero(mask)))


def _trace_args(b: VectorField, step: float, max_len: float, stag_tol: float,
                xs, ys, sgn: float):
    g = b.grid
    gdiv = fld.divergence(b).values
    return (b.u, b.v, gdiv, np.atleast_1d(xs), np.atleast_1d(ys), sgn,
            step, max_len, stag_tol, g.x0, g.x1, g.y0, g.y1,
            g.hx, g.hy, g.nx, g.ny)


def trace_characteristic(b: VectorField, start, step: float | None = None,
                         max_len: float | None = None,
                         stag_tol: float = 1e-14,
                         forward: bool = True) -> CharacteristicTrace:
    """Record one characteristic polyline from ``start`` (diagnostic helper).

    Re-traces step by step so intermediate points are kept; the heavy batch
    path in transport_omega only keeps endpoints.
    """
    g = b.grid
    step = step or 0.5 * min(g.hx, g.hy)
    max_len = max_len or 20.0 * g.diam
    sgn = 1.0 if forward else -1.0
    x, y = float(start[0]), float(start[1])
    pts = [(x, y)]
    rs = [0.0]
    acc = 0.0
    status = "maxlen"
    r = 0.0
    while r < max_len:
        a1, h1x, h1y, st = _kernels.trace_all(
            *_trace_args(b, step, step * 0.999, stag_tol, x, y, sgn))
        # single sub-step: max_len slightly below step forces one iteration
        if st[0] == _kernels.TRACE_STAGNATION:
            status = "stagnation"
            break
        x, y = float(h1x[0]), float(h1y[0])
        acc += float(a1[0])
        r += step
        pts.append((x, y))
        rs.append(r)
        if st[0] == _kernels.TRACE_EXITED:
            status = "exited"
            break
    return CharacteristicTrace(points=np.array(pts), r=np.array(rs),
                               accumulated=acc, status=status)


def _interp_frame(values: np.ndarray, grid: Grid2D, hx_, hy_):
    """Linear interpolation of frame data at boundary hit points.

    Hit points are snapped exactly onto one of the four sides by the tracer;
    interpolation runs along that side between adjacent frame nodes.
    """
    out = np.empty(hx_.shape)
    for k in range(hx_.size):
        x, y = hx_.flat[k], hy_.flat[k]
        if x == grid.x0:
            out.flat[k] = _interp_1d(values[:, 0], grid.y0, grid.hy, grid.ny, y)
        elif x == grid.x1:
            out.flat[k] = _interp_1d(values[:, -1], grid.y0, grid.hy, grid.ny, y)
        elif y == grid.y0:
            out.flat[k] = _interp_1d(values[0, :], grid.x0, grid.hx, grid.nx, x)
        elif y == grid.y1:
            out.flat[k] = _interp_1d(values[-1, :], grid.x0, grid.hx, grid.nx, x)
        else:  # pragma: no cover - tracer snaps exits onto the frame
            out.flat[k] = np.nan
    return out


def _interp_1d(line: np.ndarray, t0: float, h: float, n: int, t: float):
    s = (t - t0) / h
    i = int(np.floor(s))
    i = min(max(i, 0), n - 2)
    a = s - i
    return (1.0 - a) * line[i] + a * line[i + 1]


def _hit_is_inflow(b: VectorField, hx_, hy_, tol_inflow: float):
    """b.nu < -tol at snapped boundary hit points (side normal, not corner)."""
    g = b.grid
    bu = _kernels._bilinear_np(b.u, hx_, hy_, g.x0, g.y0, g.hx, g.hy, g.nx, g.ny)
    bv = _kernels._bilinear_np(b.v, hx_, hy_, g.x0, g.y0, g.hx, g.hy, g.nx, g.ny)
    speed = np.full(hx_.shape, np.inf)
    speed = np.where(hx_ == g.x0, np.minimum(speed, -bu), speed)
    speed = np.where(hx_ == g.x1, np.minimum(speed, bu), speed)
    speed = np.where(hy_ == g.y0, np.minimum(speed, -bv), speed)
    speed = np.where(hy_ == g.y1, np.minimum(speed, bv), speed)
    return speed < -tol_inflow


def transport_omega(b: VectorField, omega_b: ScalarField,
                    step: float | None = None,
                    max_len: float | None = None,
                    stag_tol: float = 1e-14,
                    tol_inflow: float = 1e-12,
                    strict: bool = False
                    ) -> tuple[ScalarField, TransportReport]:
    """Backward semi-Lagrangian solve of div(omega b) + omega = 0.

    omega_b carries the boundary data on the frame of the same grid; only
    inflow frame values are consulted.  ``strict`` raises UncoveredNodes
    instead of zero-filling.
    """
    grid = b.grid
    if omega_b.grid != grid:
        raise ConfigError("omega_b must live on the drift grid")
    step = step or 0.5 * min(grid.hx, grid.hy)
    max_len = max_len or 20.0 * grid.diam
    if step <= 0 or max_len <= 0:
        raise ConfigError("step and max_len must be positive")
    inflow = inflow_boundary(b, tol_inflow=tol_inflow)
    X, Y = grid.meshgrid()
    trace_mask = ~inflow.mask  # inflow frame nodes keep their data verbatim
    xs = X[trace_mask]
    ys = Y[trace_mask]
    acc, hx_, hy_, status = _kernels.trace_all(
        *_trace_args(b, step, max_len, stag_tol, xs, ys, -1.0))
    exited = status == _kernels.TRACE_EXITED
    landed = exited & _hit_is_inflow(b, hx_, hy_, tol_inflow)
    vals = np.zeros(xs.shape)
    vals[landed] = (_interp_frame(omega_b.values, grid,
                                  hx_[landed], hy_[landed])
                    * np.exp(-acc[landed]))
    omega = np.zeros(grid.shape)
    omega[trace_mask] = vals
    omega[inflow.mask] = omega_b.values[inflow.mask]
    report = TransportReport(
        uncovered=int(np.count_nonzero(~landed)),
        stagnated=int(np.count_nonzero(status == _kernels.TRACE_STAGNATION)),
        truncated=int(np.count_nonzero(status == _kernels.TRACE_MAXLEN)),
        exited=int(np.count_nonzero(exited)),
        traced=int(xs.size),
    )
    if strict and report.uncovered:
        raise UncoveredNodes(
            f"{report.uncovered} nodes not reached from the inflow set")
    return ScalarField(grid, omega), report


def transport_residual(omega: ScalarField, b: VectorField) -> ScalarField:
    """Nodewise div(omega b) + omega; frame ring zeroed."""
    grid = omega.grid
    flux = VectorField(grid, omega.values * b.u, omega.values * b.v)
    r = fld.divergence(flux).values + omega.values
    out = np.zeros(grid.shape)
    out[1:-1, 1:-1] = r[1:-1, 1:-1]
    return ScalarField(grid, out)
