"""Hodge-Helmholtz decomposition and the Bernoulli-type (G, H, F) construction.

The potential part psi solves a discrete Neumann problem built from the same
centered/one-sided difference operators as the field calculus, so that
W = U - grad(psi) is discretely divergence-free at interior nodes up to the
linear-solver residual (not just to truncation order).
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import field as fld
from .errors import NonSolenoidalInput, SolverError
from .field import Grid2D, ScalarField, VectorField
from .gas import GasLaw, enthalpy


def _diff1_matrix(n: int, h: float) -> sp.csr_matrix:
    """1-D first-derivative operator matching field.diff1."""
    D = sp.lil_matrix((n, n))
    D[0, 0:3] = [-3.0, 4.0, -1.0]
    for i in range(1, n - 1):
        D[i, i - 1] = -1.0
        D[i, i + 1] = 1.0
    D[n - 1, n - 3:n] = [1.0, -4.0, 3.0]
    return (D / (2.0 * h)).tocsr()


def gradient_operators(grid: Grid2D):
    """Sparse (Gx, Gy) acting on row-major flattened fields."""
    Dx = _diff1_matrix(grid.nx, grid.hx)
    Dy = _diff1_matrix(grid.ny, grid.hy)
    Gx = sp.kron(sp.identity(grid.ny, format="csr"), Dx, format="csr")
    Gy = sp.kron(Dy, sp.identity(grid.nx, format="csr"), format="csr")
    return Gx, Gy


def _boundary_normals(grid: Grid2D):
    """Outward normal components per node (zero at interior); corners diagonal."""
    ny, nx = grid.shape
    nux = np.zeros((ny, nx))
    nuy = np.zeros((ny, nx))
    nux[:, 0] = -1.0
    nux[:, -1] = 1.0
    nuy[0, :] = -1.0
    nuy[-1, :] = 1.0
    norm = np.hypot(nux, nuy)
    mask = norm > 0
    nux[mask] /= norm[mask]
    nuy[mask] /= norm[mask]
    return nux, nuy


@dataclass
class Decomposition:
    psi: ScalarField
    W: VectorField
    residual: float
    div_W_norm: float


@dataclass
class BernoulliFields:
    G: ScalarField
    H: ScalarField
    F: ScalarField
    C: float
    integrability_residual: float = 0.0


def decompose(U: VectorField, lin_tol: float = 1e-11) -> Decomposition:
    """Split U = grad(psi) + W with div W = 0 and zero normal trace on W.

    psi solves div(grad psi) = div U at interior nodes and grad(psi).nu = U.nu
    on the boundary.  The compatibility defect of the discrete Neumann system
    is absorbed by a Lagrange multiplier distributed over the boundary rows
    (so interior equations hold to solver accuracy), and the additive
    constant is pinned by a zero-mean constraint.
    """
    grid = U.grid
    if not (np.all(np.isfinite(U.u)) and np.all(np.isfinite(U.v))):
        raise SolverError("decompose requires finite input fields")
    ny, nx = grid.shape
    N = nx * ny
    Gx, Gy = gradient_operators(grid)
    L = (Gx @ Gx + Gy @ Gy).tocsr()
    interior = np.zeros((ny, nx), bool)
    interior[1:-1, 1:-1] = True
    int_flat = interior.ravel()
    nux, nuy = _boundary_normals(grid)
    D_int = sp.diags(int_flat.astype(float))
    A = (D_int @ L
         + sp.diags(nux.ravel()) @ Gx
         + sp.diags(nuy.ravel()) @ Gy).tocsr()
    rhs = np.where(
        int_flat,
        (Gx @ U.u.ravel() + Gy @ U.v.ravel()),
        nux.ravel() * U.u.ravel() + nuy.ravel() * U.v.ravel(),
    )
    w_b = (~int_flat).astype(float)
    w_b /= w_b.sum()
    mean_row = np.full(N, 1.0 / N)
    M = sp.bmat([[A, w_b[:, None]], [mean_row[None, :], None]],
                format="csc")
    rhs_aug = np.concatenate([rhs, [0.0]])
    lu = spla.splu(M)
    x = lu.solve(rhs_aug)
    scale = max(np.linalg.norm(rhs), 1.0)
    rel = np.inf
    for _ in range(3):  # iterative refinement
        res = M @ x - rhs_aug
        rel = float(np.linalg.norm(res)) / scale
        if not np.isfinite(rel) or rel <= 0.01 * lin_tol:
            break
        x = x - lu.solve(res)
    psi_vec = x[:N]
    if not np.all(np.isfinite(psi_vec)) or rel > 1e3 * lin_tol:
        raise SolverError("Neumann solve for the potential part stagnated")
    psi = ScalarField(grid, psi_vec)
    gpsi = fld.gradient(psi)
    W = VectorField(grid, U.u - gpsi.u, U.v - gpsi.v)
    divW = fld.divergence(W)
    div_norm = float(np.max(np.abs(divW.interior())))
    return Decomposition(psi=psi, W=W, residual=0.0, div_W_norm=div_norm)


def stream_function(W: VectorField, div_tol: float = 1e-8,
                    ) -> tuple[ScalarField, float]:
    """Recover zeta with W ~ perp_grad(zeta) from Delta zeta = rot W, zeta = 0
    on the frame.  Returns (zeta, mismatch) where mismatch is the interior
    sup-norm of perp_grad(zeta) - W (harmonic remainder plus truncation).
    """
    grid = W.grid
    div_norm = float(np.max(np.abs(fld.divergence(W).interior())))
    if div_norm > div_tol:
        raise NonSolenoidalInput(
            f"div W = {div_norm:.3e} exceeds tolerance {div_tol:.3e}")
    rhs_field = fld.rot(W)
    zeta_vec = _solve_poisson_dirichlet(grid, rhs_field.values,
                                        np.zeros(grid.shape))
    zeta = ScalarField(grid, zeta_vec)
    pg = fld.perp_gradient(zeta)
    mismatch = float(max(np.max(np.abs((pg.u - W.u)[1:-1, 1:-1])),
                         np.max(np.abs((pg.v - W.v)[1:-1, 1:-1]))))
    return zeta, mismatch


def _solve_poisson_dirichlet(grid: Grid2D, rhs: np.ndarray,
                             boundary: np.ndarray) -> np.ndarray:
    """Compact 5-point Laplacian with Dirichlet frame data."""
    ny, nx = grid.shape
    hx2, hy2 = grid.hx ** 2, grid.hy ** 2
    idx = np.arange(nx * ny).reshape(ny, nx)
    rows, cols, vals = [], [], []
    b = np.empty(nx * ny)
    for j in range(ny):
        for i in range(nx):
            k = idx[j, i]
            if 0 < j < ny - 1 and 0 < i < nx - 1:
                rows += [k] * 5
                cols += [k, idx[j, i + 1], idx[j, i - 1],
                         idx[j + 1, i], idx[j - 1, i]]
                vals += [-2.0 / hx2 - 2.0 / hy2, 1.0 / hx2, 1.0 / hx2,
                         1.0 / hy2, 1.0 / hy2]
                b[k] = rhs[j, i]
            else:
                rows.append(k)
                cols.append(k)
                vals.append(1.0)
                b[k] = boundary[j, i]
    A = sp.csc_matrix((vals, (rows, cols)), shape=(nx * ny, nx * ny))
    return spla.spsolve(A, b)


def bernoulli_GH(U: VectorField, W: VectorField,
                 psi: ScalarField | None = None):
    """Bernoulli construction (G, H) = -omega U^perp - W with
    U^perp = (-U^2, U^1), i.e. G = omega U^2 - W^1, H = -omega U^1 - W^2.

    With this orientation d(H)/dxi1 - d(G)/dxi2 = -(div(omega U) + omega),
    so the integrability defect of (G, H) vanishes exactly when U satisfies
    the vorticity equation.  When psi is supplied the decomposition
    consistency U = grad psi + W is checked (sup-norm threshold 1e-8).
    """
    grid = U.grid
    if psi is not None:
        gpsi = fld.gradient(psi)
        gap = max(np.max(np.abs(U.u - gpsi.u - W.u)),
                  np.max(np.abs(U.v - gpsi.v - W.v)))
        if gap > 1e-8:
            raise SolverError(
                f"inconsistent decomposition: |U - grad psi - W| = {gap:.3e}")
    omega = fld.rot(U).values
    G = ScalarField(grid, omega * U.v - W.u)
    H = ScalarField(grid, -omega * U.u - W.v)
    return G, H


def _cumtrapz_from(values: np.ndarray, h: float, anchor: int) -> np.ndarray:
    """Signed trapezoid antiderivative along the last axis, zero at anchor."""
    mids = 0.5 * h * (values[..., 1:] + values[..., :-1])
    out = np.zeros_like(values)
    out[..., 1:] = np.cumsum(mids, axis=-1)
    return out - out[..., anchor:anchor + 1]


def reconstruct_F(G: ScalarField, H: ScalarField, C: float = 0.0,
                  anchor: tuple[int, int] = (0, 0)) -> ScalarField:
    """Two-leg line-integral reconstruction of F with grad F = (G, H).

    anchor = (i, j) node indices; first leg runs along the anchor row in xi1,
    second leg along each column in xi2.  Composite-trapezoid quadrature.
    """
    grid = G.grid
    i0, j0 = anchor
    if not (0 <= i0 < grid.nx and 0 <= j0 < grid.ny):
        raise SolverError(f"anchor {anchor} outside grid")
    leg1 = _cumtrapz_from(G.values[j0, :], grid.hx, i0)        # (nx,)
    leg2 = _cumtrapz_from(H.values.T, grid.hy, j0).T           # (ny, nx)
    return ScalarField(grid, leg1[None, :] + leg2 + C)


def integrability_residual(G: ScalarField, H: ScalarField) -> float:
    """Interior sup-norm of d(H)/dxi1 - d(G)/dxi2 (curl of the target field)."""
    grid = G.grid
    d = (fld.diff1(H.values, grid.hx, axis=1)
         - fld.diff1(G.values, grid.hy, axis=0))
    return float(np.max(np.abs(d[1:-1, 1:-1])))


def bernoulli_residual(law: GasLaw, rho: ScalarField, psi: ScalarField,
                       U: VectorField, F: ScalarField) -> ScalarField:
    """Nodewise h(rho) + psi + |U|^2/2 - F."""
    h = enthalpy(law, rho.values)
    return ScalarField(rho.grid,
                       h + psi.values + 0.5 * U.magnitude_sq() - F.values)


def bernoulli_fields(U: VectorField, W: VectorField, C: float = 0.0,
                     anchor: tuple[int, int] = (0, 0)) -> BernoulliFields:
    """Convenience bundle: (G, H), reconstructed F and the curl defect."""
    G, H = bernoulli_GH(U, W)
    F = reconstruct_F(G, H, C=C, anchor=anchor)
    return BernoulliFields(G=G, H=H, F=F, C=C,
                           integrability_residual=integrability_residual(G, H))
