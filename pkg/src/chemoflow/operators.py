"""Discrete differential operators on the MAC grid and the Helmholtz projection.

Conventions
-----------
* Scalars carry homogeneous Neumann walls, realized by mirror ghosts; the
  corresponding face gradient is zero on boundary faces.
* Divergence-form operators (advection, nonlinear diffusion, taxis) are
  written as face fluxes with exactly zero boundary flux, so their
  integral telescopes to zero: conservation holds to round-off.
* Upwinding on the advective and taxis fluxes keeps cell values of a
  nonnegative transported field nonnegative under the CFL bound
  dt * (max speed_x / hx + max speed_y / hy) <= 1.
* The pressure Poisson problem (pure Neumann) is solved either by cosine
  transforms, which diagonalize the 5-point mirror-ghost Laplacian on a
  uniform grid, or by a sparse LU factorization kept as an independent
  cross-check.  Both are direct solves: the projected velocity is
  discretely solenoidal to round-off.
"""

from __future__ import annotations

import math
import os
from functools import lru_cache

import numpy as np
from scipy import fft as sp_fft
from scipy import sparse
from scipy.sparse.linalg import splu

from .grid import Grid, ScalarField, VectorField
from .model import (
    ModelSpec,
    boundary_cutoff,
    density_cutoff,
    eval_D_eps,
    sensitivity_scale,
)

__all__ = [
    "PoissonSolver",
    "grad",
    "div",
    "laplace",
    "advect_scalar",
    "advect_velocity",
    "nonlinear_diffuse",
    "taxis_flux_div",
    "taxis_face_velocity",
    "project",
]


def _workers() -> int:
    try:
        return max(1, int(os.environ.get("CHEMOFLOW_THREADS", "1")))
    except ValueError:
        return 1


# ----------------------------------------------------------------------
# basic calculus
# ----------------------------------------------------------------------

def grad(f: ScalarField) -> VectorField:
    """Face gradient with homogeneous-Neumann ghosts (boundary faces 0)."""
    g = f.grid
    v = VectorField.zeros(g)
    v.ux[1:-1, :] = (f.values[1:, :] - f.values[:-1, :]) / g.hx
    v.uy[:, 1:-1] = (f.values[:, 1:] - f.values[:, :-1]) / g.hy
    return v


def div(v: VectorField) -> ScalarField:
    """Conservative cell divergence of a face field."""
    g = v.grid
    out = (v.ux[1:, :] - v.ux[:-1, :]) / g.hx + (v.uy[:, 1:] - v.uy[:, :-1]) / g.hy
    return ScalarField(g, out)


def laplace(f: ScalarField) -> ScalarField:
    """5-point Laplacian with Neumann mirror ghosts (= div(grad(f)))."""
    g = f.grid
    p = np.pad(f.values, 1, mode="edge")
    out = (p[2:, 1:-1] - 2.0 * p[1:-1, 1:-1] + p[:-2, 1:-1]) / g.hx**2 + (
        p[1:-1, 2:] - 2.0 * p[1:-1, 1:-1] + p[1:-1, :-2]
    ) / g.hy**2
    return ScalarField(g, out)


def _upwind_flux(vel, left, right):
    # flux through a face from the upwind side; exact zero where vel == 0
    return np.maximum(vel, 0.0) * left + np.minimum(vel, 0.0) * right


def advect_scalar(f: ScalarField, v: VectorField) -> ScalarField:
    """div(v f) in conservative flux form with upwind face values.

    Equals v . grad f for discretely solenoidal v; integrates to zero for
    any v with vanishing boundary-normal entries.
    """
    g = f.grid
    fx = _upwind_flux(v.ux[1:-1, :], f.values[:-1, :], f.values[1:, :])
    fy = _upwind_flux(v.uy[:, 1:-1], f.values[:, :-1], f.values[:, 1:])
    out = np.zeros((g.nx, g.ny))
    out[:-1, :] += fx / g.hx
    out[1:, :] -= fx / g.hx
    out[:, :-1] += fy / g.hy
    out[:, 1:] -= fy / g.hy
    return ScalarField(g, out)


def nonlinear_diffuse(n: ScalarField, spec: ModelSpec) -> ScalarField:
    """div(D_eps(n) grad n) with D_eps at the arithmetic face average of n.

    No-flux boundary faces contribute nothing, so the result integrates
    to zero exactly.
    """
    g = n.grid
    nv = n.values
    dfx = eval_D_eps(0.5 * (nv[:-1, :] + nv[1:, :]), spec)
    dfy = eval_D_eps(0.5 * (nv[:, :-1] + nv[:, 1:]), spec)
    fx = dfx * (nv[1:, :] - nv[:-1, :]) / g.hx
    fy = dfy * (nv[:, 1:] - nv[:, :-1]) / g.hy
    out = np.zeros((g.nx, g.ny))
    out[:-1, :] += fx / g.hx
    out[1:, :] -= fx / g.hx
    out[:, :-1] += fy / g.hy
    out[:, 1:] -= fy / g.hy
    return ScalarField(g, out)


@lru_cache(maxsize=16)
def _face_cutoffs(grid: Grid, epsilon: float):
    """rho_eps sampled at interior x-faces and y-faces (cached per grid/eps)."""
    spec_like = _CutoffSpec(epsilon)
    xf = grid.xf()[1:-1]
    yc = grid.yc()
    rho_x = boundary_cutoff(xf[:, None], yc[None, :], spec_like, grid.lx, grid.ly)
    xc = grid.xc()
    yf = grid.yf()[1:-1]
    rho_y = boundary_cutoff(xc[:, None], yf[None, :], spec_like, grid.lx, grid.ly)
    rho_x.flags.writeable = False
    rho_y.flags.writeable = False
    return rho_x, rho_y


class _CutoffSpec:
    # minimal stand-in so the cutoff helpers can be reused for cached faces
    def __init__(self, epsilon):
        self.epsilon = epsilon


def taxis_face_velocity(n: ScalarField, c: ScalarField, spec: ModelSpec):
    """Chemotactic face velocity w = S_eps(x, n, c) . grad c.

    Returns (wx, wy) on interior x- and y-faces, shapes (nx-1, ny) and
    (nx, ny-1).  Boundary faces carry w = 0 (rho_eps vanishes there).
    """
    g = n.grid
    nv, cv = n.values, c.values
    rho_x, rho_y = _face_cutoffs(g, spec.epsilon)

    n_fx = 0.5 * (nv[:-1, :] + nv[1:, :])
    c_fx = 0.5 * (cv[:-1, :] + cv[1:, :])
    dcdx = (cv[1:, :] - cv[:-1, :]) / g.hx
    scale_x = rho_x * density_cutoff(n_fx, spec) * sensitivity_scale(c_fx, spec)

    n_fy = 0.5 * (nv[:, :-1] + nv[:, 1:])
    c_fy = 0.5 * (cv[:, :-1] + cv[:, 1:])
    dcdy = (cv[:, 1:] - cv[:, :-1]) / g.hy
    scale_y = rho_y * density_cutoff(n_fy, spec) * sensitivity_scale(c_fy, spec)

    if spec.sensitivity_kind == "isotropic":
        return scale_x * dcdx, scale_y * dcdy

    # rotation: needs the transverse gradient component at each face
    ct, st = math.cos(spec.rotation_angle), math.sin(spec.rotation_angle)
    pad = np.pad(cv, 1, mode="edge")
    # d c / dy at interior x-faces: average the four surrounding y-differences
    dy_cells = (pad[1:-1, 2:] - pad[1:-1, :-2]) / (2.0 * g.hy)
    dcdy_at_x = 0.5 * (dy_cells[:-1, :] + dy_cells[1:, :])
    dx_cells = (pad[2:, 1:-1] - pad[:-2, 1:-1]) / (2.0 * g.hx)
    dcdx_at_y = 0.5 * (dx_cells[:, :-1] + dx_cells[:, 1:])
    wx = scale_x * (ct * dcdx - st * dcdy_at_x)
    wy = scale_y * (st * dcdx_at_y + ct * dcdy)
    return wx, wy


def taxis_flux_div(n: ScalarField, c: ScalarField, spec: ModelSpec, faces=None) -> ScalarField:
    """div(n S_eps grad c) with n upwinded by the sign of the face velocity."""
    g = n.grid
    wx, wy = taxis_face_velocity(n, c, spec) if faces is None else faces
    fx = _upwind_flux(wx, n.values[:-1, :], n.values[1:, :])
    fy = _upwind_flux(wy, n.values[:, :-1], n.values[:, 1:])
    out = np.zeros((g.nx, g.ny))
    out[:-1, :] += fx / g.hx
    out[1:, :] -= fx / g.hx
    out[:, :-1] += fy / g.hy
    out[:, 1:] -= fy / g.hy
    return ScalarField(g, out)


def advect_velocity(u: VectorField) -> VectorField:
    """(u . grad) u on the MAC layout, first-order upwind.

    Tangential walls use the no-slip ghost u_ghost = -u_interior; normal
    boundary faces are fixed at zero, so only interior faces get a
    tendency.
    """
    g = u.grid
    ux, uy = u.ux, u.uy
    tend = VectorField.zeros(g)

    # --- ux faces (interior i = 1..nx-1) ---
    ax = ux[1:-1, :]
    ay = 0.25 * (uy[:-1, :-1] + uy[1:, :-1] + uy[:-1, 1:] + uy[1:, 1:])
    back_x = (ux[1:-1, :] - ux[:-2, :]) / g.hx
    fwd_x = (ux[2:, :] - ux[1:-1, :]) / g.hx
    uxp = np.concatenate([-ux[:, :1], ux, -ux[:, -1:]], axis=1)
    back_y = (uxp[1:-1, 1:-1] - uxp[1:-1, :-2]) / g.hy
    fwd_y = (uxp[1:-1, 2:] - uxp[1:-1, 1:-1]) / g.hy
    tend.ux[1:-1, :] = (
        np.maximum(ax, 0.0) * back_x
        + np.minimum(ax, 0.0) * fwd_x
        + np.maximum(ay, 0.0) * back_y
        + np.minimum(ay, 0.0) * fwd_y
    )

    # --- uy faces (interior j = 1..ny-1) ---
    by = uy[:, 1:-1]
    bx = 0.25 * (ux[:-1, :-1] + ux[:-1, 1:] + ux[1:, :-1] + ux[1:, 1:])
    back_y2 = (uy[:, 1:-1] - uy[:, :-2]) / g.hy
    fwd_y2 = (uy[:, 2:] - uy[:, 1:-1]) / g.hy
    uyp = np.concatenate([-uy[:1, :], uy, -uy[-1:, :]], axis=0)
    back_x2 = (uyp[1:-1, 1:-1] - uyp[:-2, 1:-1]) / g.hx
    fwd_x2 = (uyp[2:, 1:-1] - uyp[1:-1, 1:-1]) / g.hx
    tend.uy[:, 1:-1] = (
        np.maximum(bx, 0.0) * back_x2
        + np.minimum(bx, 0.0) * fwd_x2
        + np.maximum(by, 0.0) * back_y2
        + np.minimum(by, 0.0) * fwd_y2
    )
    return tend


# ----------------------------------------------------------------------
# spectral plans
# ----------------------------------------------------------------------

def _dct_eigen(n: int, h: float) -> np.ndarray:
    """Eigenvalues of -d2/dx2 with mirror-ghost Neumann walls (DCT-II basis)."""
    k = np.arange(n)
    return (2.0 - 2.0 * np.cos(np.pi * k / n)) / h**2


def _dst1_eigen(n_cells: int, h: float) -> np.ndarray:
    """Eigenvalues for interior-face unknowns with Dirichlet end faces (DST-I)."""
    k = np.arange(1, n_cells)
    return (2.0 - 2.0 * np.cos(np.pi * k / n_cells)) / h**2


def _dst2_eigen(n: int, h: float) -> np.ndarray:
    """Eigenvalues for cell-offset unknowns with no-slip ghost walls (DST-II)."""
    k = np.arange(1, n + 1)
    return (2.0 - 2.0 * np.cos(np.pi * k / n)) / h**2


@lru_cache(maxsize=8)
def _plans(grid: Grid):
    return {
        "cell_lx": _dct_eigen(grid.nx, grid.hx),
        "cell_ly": _dct_eigen(grid.ny, grid.hy),
        "ux_lx": _dst1_eigen(grid.nx, grid.hx),
        "ux_ly": _dst2_eigen(grid.ny, grid.hy),
        "uy_lx": _dst2_eigen(grid.nx, grid.hx),
        "uy_ly": _dst1_eigen(grid.ny, grid.hy),
    }


def _neumann_matrix(grid: Grid) -> sparse.csr_matrix:
    """Sparse 5-point Neumann Laplacian matching laplace()."""
    nx, ny = grid.nx, grid.ny
    ex = np.ones(nx)
    ey = np.ones(ny)
    tx = sparse.diags([ex[:-1], -2.0 * ex, ex[:-1]], [-1, 0, 1], format="lil")
    tx[0, 0] = -1.0
    tx[-1, -1] = -1.0
    ty = sparse.diags([ey[:-1], -2.0 * ey, ey[:-1]], [-1, 0, 1], format="lil")
    ty[0, 0] = -1.0
    ty[-1, -1] = -1.0
    ix = sparse.identity(nx)
    iy = sparse.identity(ny)
    return (sparse.kron(tx / grid.hx**2, iy) + sparse.kron(ix, ty / grid.hy**2)).tocsr()


class PoissonSolver:
    """Direct solver for the cell-centered Neumann Poisson problem.

    method "dct": cosine-transform diagonalization (default, uniform grids).
    method "lu":  sparse LU with one pinned cell, kept as an independent
                  route for cross-checking the spectral path.

    The same object carries the transform plans used by the semi-implicit
    Helmholtz solves for the signal and the velocity components; it is
    immutable after construction and safe to share.
    """

    def __init__(self, grid: Grid, method: str = "dct", tolerance: float = 1e-10, max_iterations: int = 500):
        if method not in ("dct", "lu"):
            raise ValueError(f"unknown Poisson method {method!r}")
        self.grid = grid
        self.method = method
        self.tolerance = float(tolerance)
        self.max_iterations = int(max_iterations)
        self._eigs = _plans(grid)
        self._workers = _workers()
        self._lu = None
        if method == "lu":
            a = _neumann_matrix(grid).tolil()
            a[0, :] = 0.0
            a[0, 0] = 1.0
            self._lu = splu(a.tocsc())

    # -- pressure Poisson -------------------------------------------------
    def solve(self, rhs: ScalarField) -> ScalarField:
        """Solve laplace(p) = rhs - mean(rhs); returns zero-mean p."""
        g = self.grid
        if self.method == "dct":
            what = sp_fft.dctn(rhs.values, type=2, norm="ortho", workers=self._workers)
            lam = self._eigs["cell_lx"][:, None] + self._eigs["cell_ly"][None, :]
            lam[0, 0] = 1.0  # gauge mode, coefficient zeroed below
            what = -what / lam
            what[0, 0] = 0.0
            lam[0, 0] = 0.0
            p = sp_fft.idctn(what, type=2, norm="ortho", workers=self._workers)
        else:
            b = rhs.values - rhs.values.mean()
            x = self._lu.solve(b.ravel().copy())
            p = x.reshape(g.nx, g.ny)
            p = p - p.mean()
        return ScalarField(g, p)

    def residual(self, p: ScalarField, rhs: ScalarField) -> float:
        """Relative 2-norm residual against the mean-free right-hand side."""
        b = rhs.values - rhs.values.mean()
        r = laplace(p).values - b
        denom = np.linalg.norm(b)
        return float(np.linalg.norm(r) / denom) if denom > 0 else float(np.linalg.norm(r))

    # -- semi-implicit Helmholtz solves -----------------------------------
    def helmholtz_cells(self, b: np.ndarray, alpha: float) -> np.ndarray:
        """(I - alpha * laplace) x = b on cell centers, Neumann walls."""
        bhat = sp_fft.dctn(b, type=2, norm="ortho", workers=self._workers)
        lam = self._eigs["cell_lx"][:, None] + self._eigs["cell_ly"][None, :]
        bhat /= 1.0 + alpha * lam
        return sp_fft.idctn(bhat, type=2, norm="ortho", workers=self._workers)

    def helmholtz_ux(self, b_interior: np.ndarray, alpha: float) -> np.ndarray:
        """(I - alpha * laplace) on interior x-faces, no-slip walls."""
        bh = sp_fft.dst(b_interior, type=1, axis=0, norm="ortho", workers=self._workers)
        bh = sp_fft.dst(bh, type=2, axis=1, norm="ortho", workers=self._workers)
        lam = self._eigs["ux_lx"][:, None] + self._eigs["ux_ly"][None, :]
        bh /= 1.0 + alpha * lam
        bh = sp_fft.idst(bh, type=2, axis=1, norm="ortho", workers=self._workers)
        return sp_fft.idst(bh, type=1, axis=0, norm="ortho", workers=self._workers)

    def helmholtz_uy(self, b_interior: np.ndarray, alpha: float) -> np.ndarray:
        bh = sp_fft.dst(b_interior, type=2, axis=0, norm="ortho", workers=self._workers)
        bh = sp_fft.dst(bh, type=1, axis=1, norm="ortho", workers=self._workers)
        lam = self._eigs["uy_lx"][:, None] + self._eigs["uy_ly"][None, :]
        bh /= 1.0 + alpha * lam
        bh = sp_fft.idst(bh, type=1, axis=1, norm="ortho", workers=self._workers)
        return sp_fft.idst(bh, type=2, axis=0, norm="ortho", workers=self._workers)


def project(v_star: VectorField, solver: PoissonSolver):
    """Helmholtz projection: returns (v, p) with v = v_star - grad p solenoidal.

    p has zero mean; compatibility of the pure-Neumann problem is enforced
    by removing the mean of div(v_star) (which is zero up to round-off for
    fields with no-penetration walls anyway).
    """
    v_star.check_finite()
    if not v_star.normal_boundary_is_zero():
        raise ValueError("projection input must have zero boundary-normal entries")
    rhs = div(v_star)
    p = solver.solve(rhs)
    gp = grad(p)
    v = VectorField(v_star.grid, v_star.ux - gp.ux, v_star.uy - gp.uy)
    v.enforce_no_penetration()
    return v, p
