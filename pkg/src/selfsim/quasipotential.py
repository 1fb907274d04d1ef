"""Quasi-potential (weakly rotational) flows: delta-perturbation machinery.

A quasi-potential pseudo-velocity is U = grad(psi) + delta * perp_grad(zeta~).
Truncating the rotational system at first order in delta couples

    Q(psi) = delta * ((2 + Lap psi) Q1 + N1),       (psi equation)
    Lap(zeta~) = omega~,  div(omega~ grad psi) + omega~ = 0,   (vorticity pair)

with the closures grad(F1) = Lap(zeta) perp_grad(psi) + perp_grad(zeta),
Q1 = (gamma - 1)(F1 + grad psi . perp_grad zeta) and c^2 = c0^2 - delta Q1.
The solver runs block Gauss-Seidel sweeps (transport -> zeta -> closures ->
psi) per delta target, warm-starting each stage, with an optional Newton
correction on the psi equation through the linearized operator L.

Diagnostics reconstruct the untruncated rotational residuals (r1, r2); at a
converged first-order state r1 = O(delta^2).
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field

import numpy as np

from . import field as fld, potential, vorticity
from .errors import (ConfigError, NonConvergence, NonIntegrableF1,
                     SonicEncroachment)
from .field import ScalarField, VectorField
from .gas import GasLaw
from .hodge import _solve_poisson_dirichlet, integrability_residual, reconstruct_F
from .potential import (PicardParams, PotentialProblem, SolveReport,
                        _stencil_to_matrix)

import scipy.sparse.linalg as spla


@dataclass
class QuasiState:
    delta: float
    psi: ScalarField
    zeta: ScalarField          # scaled rotational potential delta * zeta~
    omega_tilde: ScalarField   # unscaled transported vorticity Lap(zeta~)
    F1: ScalarField
    Q1: ScalarField
    N1: ScalarField
    c2: ScalarField

    def __post_init__(self):
        if self.delta < 0:
            raise ConfigError("delta must be non-negative")


@dataclass
class QuasiConfig:
    delta_targets: list = dc_field(default_factory=lambda: [0.0])
    outer_tol: float = 1e-8
    outer_max_iters: int = 50
    newton: bool = False
    zeta_b: ScalarField | None = None  # full-grid; frame trace is Dirichlet data
    anchor: tuple = (0, 0)
    sonic_margin: float = 0.01
    strict: bool = False
    curl_tol: float = 1e-6

    def __post_init__(self):
        t = list(self.delta_targets)
        if not t or any(d < 0 or d >= 1 for d in t) or t != sorted(t):
            raise ConfigError("delta_targets must be ascending within [0, 1)")
        if self.outer_tol <= 0 or self.outer_max_iters <= 0:
            raise ConfigError("outer_tol and outer_max_iters must be positive")


# ---------------------------------------------------------------------------
# pointwise differential forms


def _lap_c(f: ScalarField) -> np.ndarray:
    """Compact Laplacian diff2_x + diff2_y, matching the stencil operators."""
    g = f.grid
    return (fld.diff2(f.values, g.hx, axis=1)
            + fld.diff2(f.values, g.hy, axis=0))


def _hess_form(f: ScalarField, a1, a2, b1, b2):
    """(D^2 f) a . b with the symmetric discrete Hessian."""
    f11, f12, f22 = fld.hessian(f)
    return (f11.values * a1 * b1 + f12.values * (a1 * b2 + a2 * b1)
            + f22.values * a2 * b2)


def _jac_perp_form(zeta: ScalarField, a1, a2, b1, b2):
    """(D perp_grad zeta) a . b;  rows (-z12, -z22 ; z11, z12)."""
    z11, z12, z22 = fld.hessian(zeta)
    return (b1 * (-z12.values * a1 - z22.values * a2)
            + b2 * (z11.values * a1 + z12.values * a2))


def compute_N1(psi: ScalarField, zeta: ScalarField) -> ScalarField:
    """First-order forcing, linear in zeta:

    N1 = (D perp_grad zeta) grad psi . grad psi
         + 2 (D^2 psi) grad psi . perp_grad zeta
         - 2 grad psi . perp_grad zeta.
    """
    gp = fld.gradient(psi)
    pz = fld.perp_gradient(zeta)
    vals = (_jac_perp_form(zeta, gp.u, gp.v, gp.u, gp.v)
            + 2.0 * _hess_form(psi, gp.u, gp.v, pz.u, pz.v)
            - 2.0 * (gp.u * pz.u + gp.v * pz.v))
    return ScalarField(psi.grid, vals)


def compute_N2(psi: ScalarField, zeta: ScalarField) -> ScalarField:
    """Second-order remainder (used only in the rotational diagnostics)."""
    gp = fld.gradient(psi)
    pz = fld.perp_gradient(zeta)
    gz = fld.gradient(zeta)
    vals = (_hess_form(psi, pz.u, pz.v, pz.u, pz.v)
            + _jac_perp_form(zeta, pz.u, pz.v, gp.u, gp.v)
            + _jac_perp_form(zeta, gp.u, gp.v, pz.u, pz.v)
            + gz.u ** 2 + gz.v ** 2)
    return ScalarField(psi.grid, vals)


def compute_N3(zeta: ScalarField) -> ScalarField:
    """Cubic remainder (D perp_grad zeta) perp_grad zeta . perp_grad zeta."""
    pz = fld.perp_gradient(zeta)
    return ScalarField(zeta.grid,
                       _jac_perp_form(zeta, pz.u, pz.v, pz.u, pz.v))


def reconstruct_F1(psi: ScalarField, zeta: ScalarField,
                   anchor: tuple = (0, 0),
                   strict: bool = False, curl_tol: float = 1e-6):
    """Two-leg reconstruction of F1 from grad F1 = Lap(zeta) perp_grad(psi)
    + perp_grad(zeta), anchored with F1 = 0 at the anchor node.

    Returns (F1, curl_defect); the defect is small only when zeta satisfies
    the vorticity transport equation.
    """
    lz = _lap_c(zeta)
    pp = fld.perp_gradient(psi)
    pz = fld.perp_gradient(zeta)
    G = ScalarField(psi.grid, lz * pp.u + pz.u)
    H = ScalarField(psi.grid, lz * pp.v + pz.v)
    defect = integrability_residual(G, H)
    if strict and defect > curl_tol:
        raise NonIntegrableF1(
            f"curl defect {defect:.3e} exceeds {curl_tol:.3e}")
    F1 = reconstruct_F(G, H, C=0.0, anchor=anchor)
    return F1, defect


def compute_Q1(law: GasLaw, psi: ScalarField, zeta: ScalarField,
               F1: ScalarField) -> ScalarField:
    """Q1 = (gamma - 1)(F1 + grad psi . perp_grad zeta)."""
    gp = fld.gradient(psi)
    pz = fld.perp_gradient(zeta)
    return ScalarField(psi.grid, (law.gamma - 1.0)
                       * (F1.values + gp.u * pz.u + gp.v * pz.v))


def c2_quasi(law: GasLaw, psi: ScalarField, zeta: ScalarField, delta: float,
             F1: ScalarField, c2_floor: float = 1e-8):
    """Perturbed closure c^2 = c0^2(psi) - delta Q1, floored with count."""
    if law.gamma == 1.0:
        return ScalarField(psi.grid, np.full(psi.grid.shape, law.a ** 2)), 0
    c0, _ = potential.c2_of_phi(law, psi, c2_floor=-np.inf)
    q1 = compute_Q1(law, psi, zeta, F1)
    raw = c0.values - delta * q1.values
    clamped = int(np.count_nonzero(raw <= c2_floor))
    return ScalarField(psi.grid, np.maximum(raw, c2_floor)), clamped


# ---------------------------------------------------------------------------
# linearized operator and Gateaux check


def residual_map(law: GasLaw, psi: ScalarField,
                 rhs: ScalarField | None = None) -> ScalarField:
    """Unregularized residual c0^2 Lap psi - (D^2 psi) grad psi . grad psi
    - |grad psi|^2 + 2 c0^2 (minus an optional forcing), unclamped closure."""
    gp = fld.gradient(psi)
    g = law.gamma
    if g == 1.0:
        c0 = np.full(psi.grid.shape, law.a ** 2)
    else:
        c0 = -(g - 1.0) * (psi.values + 0.5 * gp.magnitude_sq())
    vals = (c0 * _lap_c(psi)
            - _hess_form(psi, gp.u, gp.v, gp.u, gp.v)
            - gp.magnitude_sq() + 2.0 * c0)
    if rhs is not None:
        vals = vals - rhs.values
    return ScalarField(psi.grid, vals)


def linearized_L(psi0: ScalarField, v: ScalarField, law: GasLaw
                 ) -> ScalarField:
    """Gateaux derivative of residual_map at psi0 in direction v:

    L[v] = c0^2 Lap v - (D^2 v) grad psi0 . grad psi0
           - 2 (D^2 psi0) grad psi0 . grad v
           - [(gamma - 1)(2 + Lap psi0) + 2] grad psi0 . grad v
           - (gamma - 1)(2 + Lap psi0) v.

    At a quiescent base state (Lap psi0 = -2) the zero-order and closure
    drift terms vanish and L[xi1] = 0 identically.
    """
    g = law.gamma
    gp = fld.gradient(psi0)
    gv = fld.gradient(v)
    lp0 = _lap_c(psi0)
    if g == 1.0:
        c0 = np.full(psi0.grid.shape, law.a ** 2)
        closure = 0.0 * lp0
    else:
        c0 = -(g - 1.0) * (psi0.values + 0.5 * gp.magnitude_sq())
        closure = (g - 1.0) * (2.0 + lp0)
    adv = gp.u * gv.u + gp.v * gv.v
    vals = (c0 * _lap_c(v)
            - _hess_form(v, gp.u, gp.v, gp.u, gp.v)
            - 2.0 * _hess_form(psi0, gp.u, gp.v, gv.u, gv.v)
            - (closure + 2.0) * adv
            - closure * v.values)
    return ScalarField(psi0.grid, vals)


def gateaux_check(psi0: ScalarField, v: ScalarField, law: GasLaw,
                  taus=(1e-2, 1e-3, 1e-4)) -> dict:
    """Interior defect |(R(psi0 + tau v) - R(psi0))/tau - L[v]| per tau and
    the least-squares slope of log(defect) against log(tau)."""
    taus = list(taus)
    if any(t <= 0 for t in taus) or taus != sorted(taus, reverse=True):
        raise ConfigError("taus must be positive and decreasing")
    grid = psi0.grid
    base = residual_map(law, psi0).values
    lv = linearized_L(psi0, v, law).values
    defects = []
    for tau in taus:
        pert = ScalarField(grid, psi0.values + tau * v.values)
        quot = (residual_map(law, pert).values - base) / tau
        defects.append(float(np.max(np.abs((quot - lv)[1:-1, 1:-1]))))
    slope = float("nan")
    if len(taus) >= 2 and min(defects) > 0:
        slope = float(np.polyfit(np.log(taus), np.log(defects), 1)[0])
    return {"taus": taus, "defects": defects, "slope": slope}


def _newton_step(problem: PotentialProblem, psi: ScalarField,
                 rhs: ScalarField, law: GasLaw) -> ScalarField:
    """One Newton correction: solve L[v] = -(R(psi) - rhs), v = 0 on frame."""
    grid = psi.grid
    g = law.gamma
    gp = fld.gradient(psi)
    lp = _lap_c(psi)
    psi11, psi12, psi22 = fld.hessian(psi)
    c0 = -(g - 1.0) * (psi.values + 0.5 * gp.magnitude_sq()) \
        if g != 1.0 else np.full(grid.shape, law.a ** 2)
    closure = (g - 1.0) * (2.0 + lp) if g != 1.0 else np.zeros(grid.shape)
    a11 = c0 - gp.u ** 2
    a22 = c0 - gp.v ** 2
    cross = -2.0 * gp.u * gp.v
    d1 = (-2.0 * (psi11.values * gp.u + psi12.values * gp.v)
          - (closure + 2.0) * gp.u)
    d2 = (-2.0 * (psi12.values * gp.u + psi22.values * gp.v)
          - (closure + 2.0) * gp.v)
    hx, hy = grid.hx, grid.hy
    cc = -2.0 * a11 / hx ** 2 - 2.0 * a22 / hy ** 2 - closure
    ce = a11 / hx ** 2 + d1 / (2.0 * hx)
    cw = a11 / hx ** 2 - d1 / (2.0 * hx)
    cn = a22 / hy ** 2 + d2 / (2.0 * hy)
    cs = a22 / hy ** 2 - d2 / (2.0 * hy)
    cd = cross / (4.0 * hx * hy)
    A = _stencil_to_matrix(grid, (cc, ce, cw, cn, cs, cd, -cd, -cd, cd))
    res = residual_map(law, psi, rhs=rhs).values
    b = np.zeros(grid.shape)
    b[1:-1, 1:-1] = -res[1:-1, 1:-1]
    v = spla.spsolve(A, b.ravel())
    return ScalarField(grid, psi.values + v.reshape(grid.shape))


# ---------------------------------------------------------------------------
# coupled solver


def _zeta_tilde(grid, omega_t: ScalarField, zeta_b: ScalarField
                ) -> ScalarField:
    vals = _solve_poisson_dirichlet(grid, omega_t.values, zeta_b.values)
    return ScalarField(grid, vals)


def solve_quasi(config: QuasiConfig, base: PotentialProblem,
                params: PicardParams | None = None
                ) -> tuple[QuasiState, SolveReport]:
    """Delta-continuation solve of the first-order quasi-potential system.

    Per delta target (ascending): block Gauss-Seidel sweeps of transport ->
    zeta-recovery -> (F1, Q1, N1, c^2) -> psi solve, until the joint sup-norm
    change of (psi, zeta~) drops below outer_tol.  Stages warm-start from the
    previous delta; the last converged stage is returned on failure with
    status PartialContinuation.
    """
    params = params or PicardParams()
    grid = base.grid
    law = base.law
    zeta_b = config.zeta_b or ScalarField.zeros(grid)
    if zeta_b.grid != grid:
        raise ConfigError("zeta_b must live on the problem grid")
    omega_b = fld.laplacian(zeta_b)  # inflow data for the transported vorticity
    report = SolveReport()
    psi, prep = potential.epsilon_continuation(base, params=params)
    if prep.status != "Converged":
        report.errors.extend(prep.errors)
    zt = zeta_b.copy()
    state = None
    for delta in config.delta_targets:
        try:
            psi_d, zt_d, stage = _solve_stage(
                config, base, params, delta, psi, zt, zeta_b, omega_b)
        except (NonConvergence, SonicEncroachment, NonIntegrableF1) as exc:
            report.errors.append(f"delta={delta:g}: {exc}")
            if state is None:
                raise
            report.status = "PartialContinuation"
            break
        psi, zt = psi_d, zt_d
        report.stages.append(stage)
        state = _make_state(config, law, delta, psi, zt)
    potential._finalize_report(base, state.psi, report)
    return state, report


def _make_state(config: QuasiConfig, law: GasLaw, delta: float,
                psi: ScalarField, zt: ScalarField) -> QuasiState:
    F1, _ = reconstruct_F1(psi, zt, anchor=config.anchor)
    q1 = compute_Q1(law, psi, zt, F1)
    n1 = compute_N1(psi, zt)
    c2, _ = c2_quasi(law, psi, zt, delta, F1)
    return QuasiState(
        delta=delta, psi=psi,
        zeta=ScalarField(psi.grid, delta * zt.values),
        omega_tilde=ScalarField(psi.grid, _lap_c(zt)),
        F1=F1, Q1=q1, N1=n1, c2=c2)


def _solve_stage(config: QuasiConfig, base: PotentialProblem,
                 params: PicardParams, delta: float,
                 psi: ScalarField, zt: ScalarField,
                 zeta_b: ScalarField, omega_b: ScalarField):
    grid = base.grid
    law = base.law
    stage = {"delta": delta, "outer_iters": 0, "change": float("inf")}
    for it in range(1, config.outer_max_iters + 1):
        b = fld.gradient(psi)
        omega_t, _trep = vorticity.transport_omega(VectorField(grid, b.u, b.v),
                                                   omega_b)
        zt_new = _zeta_tilde(grid, omega_t, zeta_b)
        F1, defect = reconstruct_F1(psi, zt_new, anchor=config.anchor,
                                    strict=config.strict,
                                    curl_tol=config.curl_tol)
        q1 = compute_Q1(law, psi, zt_new, F1)
        n1 = compute_N1(psi, zt_new)
        c2, _ = c2_quasi(law, psi, zt_new, delta, F1,
                         c2_floor=base.c2_floor)
        U = VectorField(grid,
                        b.u + delta * fld.perp_gradient(zt_new).u,
                        b.v + delta * fld.perp_gradient(zt_new).v)
        L2max = float(np.max(U.magnitude_sq() / c2.values))
        if L2max >= 1.0 - config.sonic_margin:
            raise SonicEncroachment(
                f"max pseudo-Mach^2 {L2max:.4f} >= {1 - config.sonic_margin}")
        lp = _lap_c(psi)
        rhs = ScalarField(grid, delta * ((2.0 + lp) * q1.values + n1.values))
        if config.newton:
            psi_new = _newton_step(base, psi, rhs, law)
        else:
            psi_new, _prep = potential.picard_solve(base, 0.0, params,
                                                    w0=psi, rhs=rhs)
        change = max(float(np.max(np.abs(psi_new.values - psi.values))),
                     float(np.max(np.abs(zt_new.values - zt.values))))
        psi, zt = psi_new, zt_new
        stage["outer_iters"] = it
        stage["change"] = change
        stage["max_L2"] = L2max
        stage["curl_defect"] = defect
        if change <= config.outer_tol:
            return psi, zt, stage
    raise NonConvergence(
        f"outer loop: change {stage['change']:.3e} > {config.outer_tol:.3e} "
        f"after {config.outer_max_iters} sweeps", report=stage)


# ---------------------------------------------------------------------------
# untruncated rotational diagnostics


def full_rotational_residual(psi: ScalarField, zeta: ScalarField, law: GasLaw,
                             anchor: tuple = (0, 0), strict: bool = False,
                             curl_tol: float = 1e-6):
    """Residuals (r1, r2) of the untruncated rotational system at
    U = grad psi + perp_grad zeta (zeta already carries its delta scaling).

    r1 uses the reconstructed Bernoulli closure: grad F =
    -Lap(zeta)(perp_grad psi + grad zeta) - perp_grad zeta, F anchored to 0
    at the anchor node, c^2 = (gamma - 1)(F - psi - |U|^2 / 2); then
    r1 = [c^2 Lap psi - (D^2 psi) grad psi . grad psi - |grad psi|^2 + 2 c^2]
         - N1 - N2 - N3.
    r2 = Lap(zeta)(Lap(psi) + 1) + U . grad(Lap zeta).  Frame rings zeroed.
    """
    grid = psi.grid
    lz = _lap_c(zeta)
    pp = fld.perp_gradient(psi)
    gz = fld.gradient(zeta)
    pz = fld.perp_gradient(zeta)
    G = ScalarField(grid, -lz * (pp.u + gz.u) - pz.u)
    H = ScalarField(grid, -lz * (pp.v + gz.v) - pz.v)
    defect = integrability_residual(G, H)
    if strict and defect > curl_tol:
        raise NonIntegrableF1(
            f"curl defect {defect:.3e} exceeds {curl_tol:.3e}")
    F = reconstruct_F(G, H, C=0.0, anchor=anchor)
    gp = fld.gradient(psi)
    Uu = gp.u + pz.u
    Uv = gp.v + pz.v
    if law.gamma == 1.0:
        c2 = np.full(grid.shape, law.a ** 2)
    else:
        c2 = (law.gamma - 1.0) * (F.values - psi.values
                                  - 0.5 * (Uu ** 2 + Uv ** 2))
    r1 = (c2 * _lap_c(psi)
          - _hess_form(psi, gp.u, gp.v, gp.u, gp.v)
          - gp.magnitude_sq() + 2.0 * c2
          - compute_N1(psi, zeta).values
          - compute_N2(psi, zeta).values
          - compute_N3(zeta).values)
    glz = fld.gradient(ScalarField(grid, lz))
    r2 = lz * (_lap_c(psi) + 1.0) + Uu * glz.u + Uv * glz.v
    out1 = np.zeros(grid.shape)
    out2 = np.zeros(grid.shape)
    out1[1:-1, 1:-1] = r1[1:-1, 1:-1]
    out2[1:-1, 1:-1] = r2[1:-1, 1:-1]
    return ScalarField(grid, out1), ScalarField(grid, out2)
