"""Nonlinear degenerate elliptic potential-flow solver.

Implements the closure c^2(phi), the quasilinear operator Q and its
epsilon-regularization, frozen-coefficient 9-point linear solves with
Dirichlet frame data, relaxed Picard iteration on the frozen map, and
geometric epsilon-continuation down to the unregularized problem.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import _kernels, field as fld, regime
from .errors import (CapExceeded, ConfigError, IndefiniteSystem,
                     LinearStagnation, NonConvergence)
from .field import Grid2D, ScalarField, VectorField
from .gas import GasLaw


@dataclass
class PotentialProblem:
    """Dirichlet data on the frame plus interior Picard initialization.

    phi_b is a full-grid field: its frame trace is the boundary condition and
    its interior values embody the boundary-data extension used to start the
    iteration.
    """

    law: GasLaw
    grid: Grid2D
    phi_b: ScalarField
    c2_floor: float = 1e-8
    cap_M: float = 1e6

    def __post_init__(self):
        if not np.all(np.isfinite(self.phi_b.values)):
            raise ConfigError("phi_b must be finite")
        if self.c2_floor <= 0 or self.cap_M <= 0:
            raise ConfigError("c2_floor and cap_M must be positive")


@dataclass
class PicardParams:
    relax_theta: float = 0.7
    tol_fixed_point: float = 1e-10
    max_iters: int = 200
    lin_tol: float = 1e-11
    lin_max_iters: int | None = None  # kept for config compatibility; the
    # default linear solver is a direct sparse factorization

    def __post_init__(self):
        if not (0.0 < self.relax_theta <= 1.0):
            raise ConfigError("relax_theta must lie in (0, 1]")
        if min(self.tol_fixed_point, self.lin_tol) <= 0 or self.max_iters <= 0:
            raise ConfigError("tolerances and max_iters must be positive")


@dataclass
class EpsilonSchedule:
    eps0: float = 0.1
    ratio: float = 0.5
    eps_min: float = 1e-6

    def __post_init__(self):
        if not (self.eps0 > self.eps_min > 0):
            raise ConfigError("schedule requires eps0 > eps_min > 0")
        if not (0.0 < self.ratio < 1.0):
            raise ConfigError("ratio must lie in (0, 1)")

    def stages(self) -> list[float]:
        out = []
        eps = self.eps0
        while eps > self.eps_min and not np.isclose(eps, self.eps_min):
            out.append(eps)
            eps *= self.ratio
        out.append(self.eps_min)
        return out


@dataclass
class PicardReport:
    iterations: int = 0
    converged: bool = False
    deltas: list = dc_field(default_factory=list)
    lin_residuals: list = dc_field(default_factory=list)
    final_residual: float = float("nan")
    c2_min: float = float("nan")
    c2_max: float = float("nan")
    clamped: int = 0
    lambda_min: float = float("nan")
    theta_used: float = float("nan")


@dataclass
class SolveReport:
    status: str = "Converged"
    stages: list = dc_field(default_factory=list)
    final_eps: float = float("nan")
    final_residual: float = float("nan")
    c2_min: float = float("nan")
    c2_max: float = float("nan")
    max_L2: float = float("nan")
    max_L2_node: tuple = (0, 0)
    clamped: int = 0
    audit: str = ""
    audit_details: dict = dc_field(default_factory=dict)
    errors: list = dc_field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "status": self.status,
            "stages": self.stages,
            "final_eps": self.final_eps,
            "final_residual": self.final_residual,
            "c2_min": self.c2_min,
            "c2_max": self.c2_max,
            "max_L2": self.max_L2,
            "max_L2_node": list(self.max_L2_node),
            "clamped": self.clamped,
            "audit": self.audit,
            "audit_details": {k: (list(v) if isinstance(v, tuple) else v)
                              for k, v in self.audit_details.items()},
            "errors": self.errors,
        }


def c2_of_phi(law: GasLaw, phi: ScalarField,
              grad_phi: VectorField | None = None,
              c2_floor: float = 1e-8):
    """Sound-speed closure c^2(phi) with floor clamping.

    gamma != 1: c^2 = -(gamma - 1)(phi + |grad phi|^2 / 2); gamma = 1: a^2.
    Returns (c2 field, number of clamped nodes).
    """
    g = law.gamma
    if g == 1.0:
        return ScalarField(phi.grid,
                           np.full(phi.grid.shape, law.a ** 2)), 0
    if grad_phi is None:
        grad_phi = fld.gradient(phi)
    raw = -(g - 1.0) * (phi.values + 0.5 * grad_phi.magnitude_sq())
    clamped = int(np.count_nonzero(raw <= c2_floor))
    return ScalarField(phi.grid, np.maximum(raw, c2_floor)), clamped


def residual_Q(law: GasLaw, phi: ScalarField, eps: float = 0.0,
               rhs: ScalarField | None = None,
               c2_floor: float = 1e-8) -> ScalarField:
    """Interior residual of Q_eps(phi) (minus an optional forcing field).

    Q phi = (c^2 - phi1^2) phi11 - 2 phi1 phi2 phi12 + (c^2 - phi2^2) phi22
            - gamma |grad phi|^2 - 2 (gamma - 1) phi, plus eps * Delta phi.
    The frame ring of the returned field is zero.
    """
    grid = phi.grid
    gp = fld.gradient(phi)
    f11, f12, f22 = fld.hessian(phi)
    c2, _ = c2_of_phi(law, phi, gp, c2_floor=c2_floor)
    g = law.gamma
    r = ((c2.values - gp.u ** 2) * f11.values
         - 2.0 * gp.u * gp.v * f12.values
         + (c2.values - gp.v ** 2) * f22.values
         - g * gp.magnitude_sq()
         - 2.0 * (g - 1.0) * phi.values
         + eps * (f11.values + f22.values))
    if rhs is not None:
        r = r - rhs.values
    out = np.zeros(grid.shape)
    out[1:-1, 1:-1] = r[1:-1, 1:-1]
    return ScalarField(grid, out)


@dataclass
class FrozenSystem:
    """Linearized (frozen-coefficient) operator L_eps at a given iterate w."""

    grid: Grid2D
    eps: float
    coef: tuple = dc_field(repr=False, default=None)
    lambda_min: float = float("nan")
    c2_min: float = float("nan")
    c2_max: float = float("nan")
    clamped: int = 0
    _matrix: sp.csc_matrix | None = dc_field(repr=False, default=None)
    _factor: object | None = dc_field(repr=False, default=None)

    def apply(self, values: np.ndarray) -> np.ndarray:
        """Operator application; frame nodes pass values through (Dirichlet rows)."""
        return _kernels.apply_stencil(self.coef, values)

    def matrix(self) -> sp.csc_matrix:
        if self._matrix is None:
            self._matrix = _stencil_to_matrix(self.grid, self.coef)
        return self._matrix

    def factor(self):
        if self._factor is None:
            self._factor = spla.splu(self.matrix())
        return self._factor


def _stencil_to_matrix(grid: Grid2D, coef) -> sp.csc_matrix:
    ny, nx = grid.shape
    N = nx * ny
    idx = np.arange(N).reshape(ny, nx)
    cc, ce, cw, cn, cs, cne, cnw, cse, csw = coef
    ji = np.s_[1:-1, 1:-1]
    rows_i = idx[ji].ravel()
    data = []
    rows = []
    cols = []
    offsets = [
        (cc, idx[1:-1, 1:-1]), (ce, idx[1:-1, 2:]), (cw, idx[1:-1, :-2]),
        (cn, idx[2:, 1:-1]), (cs, idx[:-2, 1:-1]),
        (cne, idx[2:, 2:]), (cnw, idx[2:, :-2]),
        (cse, idx[:-2, 2:]), (csw, idx[:-2, :-2]),
    ]
    for cf, colidx in offsets:
        rows.append(rows_i)
        cols.append(colidx.ravel())
        data.append(cf[ji].ravel())
    frame = np.ones((ny, nx), bool)
    frame[ji] = False
    fidx = idx[frame]
    rows.append(fidx)
    cols.append(fidx)
    data.append(np.ones(fidx.size))
    A = sp.csc_matrix(
        (np.concatenate(data), (np.concatenate(rows), np.concatenate(cols))),
        shape=(N, N))
    return A


def assemble_frozen(law: GasLaw, w: ScalarField, eps: float,
                    c2_floor: float = 1e-8, cap_M: float = 1e6
                    ) -> FrozenSystem:
    """Coefficients of L_eps frozen at w, as a 9-point stencil system.

    Principal part (c^2(w) - w1^2 + eps, -2 w1 w2, c^2(w) - w2^2 + eps),
    drift -gamma grad w, zero-order -2 (gamma - 1).
    """
    if not np.all(np.isfinite(w.values)):
        raise CapExceeded("iterate contains non-finite values")
    wmax = float(np.max(np.abs(w.values)))
    if wmax > cap_M:
        raise CapExceeded(f"|w|_inf = {wmax:.3e} exceeds cap_M = {cap_M:.3e}")
    grid = w.grid
    gw = fld.gradient(w)
    c2, clamped = c2_of_phi(law, w, gw, c2_floor=c2_floor)
    g = law.gamma
    a11 = c2.values - gw.u ** 2 + eps
    a22 = c2.values - gw.v ** 2 + eps
    cross = -2.0 * gw.u * gw.v
    b1 = -g * gw.u
    b2 = -g * gw.v
    hx2, hy2 = grid.hx ** 2, grid.hy ** 2
    cc = -2.0 * a11 / hx2 - 2.0 * a22 / hy2 - 2.0 * (g - 1.0)
    ce = a11 / hx2 + b1 / (2.0 * grid.hx)
    cw = a11 / hx2 - b1 / (2.0 * grid.hx)
    cn = a22 / hy2 + b2 / (2.0 * grid.hy)
    cs = a22 / hy2 - b2 / (2.0 * grid.hy)
    cd = cross / (4.0 * grid.hx * grid.hy)
    cne = cd
    csw = cd
    cnw = -cd
    cse = -cd
    lam = a11 + a22 - c2.values  # = c^2 - |grad w|^2 + 2 eps - eps
    lambda_min = float(np.min((c2.values - gw.magnitude_sq() + eps)[1:-1, 1:-1]))
    del lam
    return FrozenSystem(
        grid=grid, eps=eps,
        coef=(cc, ce, cw, cn, cs, cne, cnw, cse, csw),
        lambda_min=lambda_min,
        c2_min=float(np.min(c2.values)),
        c2_max=float(np.max(c2.values)),
        clamped=clamped,
    )


def solve_linear_dirichlet(system: FrozenSystem, rhs: ScalarField | None,
                           phi_b: ScalarField,
                           lin_tol: float = 1e-11) -> ScalarField:
    """Solve L_eps phi = rhs (interior) with phi = phi_b on the frame.

    Direct sparse LU; deterministic for fixed inputs.  Raises
    IndefiniteSystem when nodewise ellipticity fails and LinearStagnation
    when the relative residual exceeds lin_tol.
    """
    if system.lambda_min <= 0:
        raise IndefiniteSystem(
            f"min(c^2 - |grad w|^2 + eps) = {system.lambda_min:.3e} <= 0")
    grid = system.grid
    b = np.zeros(grid.shape)
    if rhs is not None:
        b[1:-1, 1:-1] = rhs.values[1:-1, 1:-1]
    b[0, :] = phi_b.values[0, :]
    b[-1, :] = phi_b.values[-1, :]
    b[:, 0] = phi_b.values[:, 0]
    b[:, -1] = phi_b.values[:, -1]
    bv = b.ravel()
    lu = system.factor()
    x = lu.solve(bv)
    # backward-error scale: |r| / (|A| |x| + |b|) with |A| the max row sum
    anorm = max(float(np.max(sum(np.abs(c) for c in system.coef))), 1.0)
    rel = np.inf
    for _ in range(3):  # iterative refinement against the stencil operator
        resid = system.apply(x.reshape(grid.shape)).ravel() - bv
        scale = anorm * float(np.linalg.norm(x)) + float(np.linalg.norm(bv))
        rel = float(np.linalg.norm(resid)) / max(scale, 1.0)
        if not np.isfinite(rel) or rel <= 0.01 * lin_tol:
            break
        x = x - lu.solve(resid)
    if not np.all(np.isfinite(x)) or rel > lin_tol:
        raise LinearStagnation(f"linear relative residual {rel:.3e} > {lin_tol:.3e}")
    return ScalarField(grid, x)


def _with_frame(values: np.ndarray, phi_b: ScalarField) -> np.ndarray:
    out = values.copy()
    out[0, :] = phi_b.values[0, :]
    out[-1, :] = phi_b.values[-1, :]
    out[:, 0] = phi_b.values[:, 0]
    out[:, -1] = phi_b.values[:, -1]
    return out


def picard_solve(problem: PotentialProblem, eps: float,
                 params: PicardParams | None = None,
                 w0: ScalarField | None = None,
                 rhs: ScalarField | None = None
                 ) -> tuple[ScalarField, PicardReport]:
    """Relaxed Picard iteration on the frozen-coefficient map.

    w_{k+1} = (1 - theta) w_k + theta T(w_k) with T(w) the solution of the
    Dirichlet problem for L_eps frozen at w.  On 5 consecutive growing steps
    the relaxation factor is halved once before giving up.
    """
    params = params or PicardParams()
    grid = problem.grid
    w = (w0.values if w0 is not None else problem.phi_b.values).copy()
    w = _with_frame(w, problem.phi_b)
    theta = params.relax_theta
    report = PicardReport(theta_used=theta)
    best = w
    best_delta = np.inf
    growing = 0
    halved = False
    prev_delta = np.inf
    k = 0
    while k < params.max_iters:
        k += 1
        system = assemble_frozen(problem.law, ScalarField(grid, w), eps,
                                 c2_floor=problem.c2_floor,
                                 cap_M=problem.cap_M)
        t = solve_linear_dirichlet(system, rhs, problem.phi_b,
                                   lin_tol=params.lin_tol)
        wn = (1.0 - theta) * w + theta * t.values
        wn = _with_frame(wn, problem.phi_b)
        delta = float(np.max(np.abs(wn - w)))
        report.deltas.append(delta)
        w = wn
        if delta < best_delta:
            best_delta = delta
            best = w
        if delta > prev_delta:
            growing += 1
            if growing >= 5:
                if halved:
                    report.iterations = k
                    raise NonConvergence(
                        "Picard iteration diverging after relaxation halving",
                        best=ScalarField(grid, best), report=report)
                theta *= 0.5
                report.theta_used = theta
                halved = True
                growing = 0
        else:
            growing = 0
        prev_delta = delta
        if delta <= params.tol_fixed_point:
            report.converged = True
            break
    report.iterations = k
    phi = ScalarField(grid, w)
    final_sys = assemble_frozen(problem.law, phi, eps,
                                c2_floor=problem.c2_floor,
                                cap_M=problem.cap_M)
    report.lambda_min = final_sys.lambda_min
    report.c2_min = final_sys.c2_min
    report.c2_max = final_sys.c2_max
    report.clamped = final_sys.clamped
    report.final_residual = float(np.max(np.abs(
        residual_Q(problem.law, phi, eps=eps, rhs=rhs,
                   c2_floor=problem.c2_floor).interior())))
    if not report.converged:
        raise NonConvergence(
            f"no fixed point after {params.max_iters} iterations "
            f"(last delta {report.deltas[-1]:.3e})",
            best=phi, report=report)
    if report.clamped > 0:
        raise NonConvergence(
            f"{report.clamped} nodes clamped at c2_floor in the final iterate",
            best=phi, report=report)
    return phi, report


def epsilon_continuation(problem: PotentialProblem,
                         schedule: EpsilonSchedule | None = None,
                         params: PicardParams | None = None
                         ) -> tuple[ScalarField, SolveReport]:
    """Geometric continuation eps0 -> eps_min, then an optional eps = 0 pass.

    Each stage warm-starts from the previous solution.  On a failed stage the
    last successful solution is returned with status PartialContinuation.
    """
    schedule = schedule or EpsilonSchedule()
    params = params or PicardParams()
    report = SolveReport()
    phi = None
    w0 = problem.phi_b
    for eps in schedule.stages():
        try:
            phi, prep = picard_solve(problem, eps, params, w0=w0)
        except (NonConvergence, IndefiniteSystem, LinearStagnation,
                CapExceeded) as exc:
            report.errors.append(f"eps={eps:g}: {exc}")
            if phi is None:
                raise NonConvergence(
                    f"first continuation stage failed: {exc}",
                    best=getattr(exc, "best", None), report=report) from exc
            report.status = "PartialContinuation"
            break
        report.stages.append({"eps": eps, "iterations": prep.iterations,
                              "delta": prep.deltas[-1],
                              "residual": prep.final_residual})
        report.final_eps = eps
        w0 = phi
    if report.status == "Converged":
        try:
            phi0, prep0 = picard_solve(problem, 0.0, params, w0=phi)
            phi = phi0
            report.stages.append({"eps": 0.0, "iterations": prep0.iterations,
                                  "delta": prep0.deltas[-1],
                                  "residual": prep0.final_residual})
            report.final_eps = 0.0
        except (NonConvergence, IndefiniteSystem, LinearStagnation,
                CapExceeded) as exc:
            report.errors.append(f"eps=0 pass skipped: {exc}")
    _finalize_report(problem, phi, report)
    return phi, report


def _finalize_report(problem: PotentialProblem, phi: ScalarField,
                     report: SolveReport) -> None:
    gp = fld.gradient(phi)
    c2, clamped = c2_of_phi(problem.law, phi, gp, c2_floor=problem.c2_floor)
    rr = regime.classify(VectorField(problem.grid, gp.u, gp.v), c2)
    report.final_residual = float(np.max(np.abs(residual_Q(
        problem.law, phi, eps=report.final_eps if report.final_eps == 0.0
        else report.final_eps, c2_floor=problem.c2_floor).interior())))
    report.c2_min = float(np.min(c2.values))
    report.c2_max = float(np.max(c2.values))
    report.clamped = clamped
    report.max_L2 = rr.max_L2
    report.max_L2_node = rr.max_L2_node
    report.audit = rr.audit.value
    report.audit_details = rr.audit_details
