"""Time integration of the regularized chemotaxis-fluid system.

One step advances, in order:

1. density n: explicit conservative advection + taxis fluxes at the outer
   step, then explicit nonlinear diffusion in substeps that satisfy the
   parabolic stability bound;
2. signal c: explicit upwind advection, implicit consumption via the
   factor 1/(1 + dt*n), implicit diffusion (cosine-transform solve);
3. velocity u: explicit upwind advection, implicit viscous solve
   (sine-transform), buoyancy force dt * n * grad(Phi), projection.

Every sub-update preserves the structure the monitors rely on: n >= 0
exactly under the CFL rule, total mass of n to round-off, the maximum
principle for c, and discrete incompressibility to solver accuracy.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .grid import ScalarField, State, VectorField
from .model import ModelSpec, eval_D_eps
from .operators import (
    PoissonSolver,
    advect_scalar,
    advect_velocity,
    div,
    laplace,
    project,
    taxis_face_velocity,
    taxis_flux_div,
)

__all__ = ["TimeControls", "SolverError", "StepInfo", "step", "run"]

NEGATIVE_DENSITY_TOL = -1e-13


class SolverError(RuntimeError):
    pass


@dataclass(frozen=True)
class TimeControls:
    """Step-size policy.

    The outer dt obeys the advective CFL dt*(speed_x/hx + speed_y/hy) <= cfl,
    where the speed includes both the fluid velocity and the chemotactic
    drift (upwind positivity needs both).  The explicit n-diffusion runs in
    substeps obeying dt_sub * max(D_eps) / h^2 <= cfl/4, scaled by the
    substep safety factor.
    """

    t_end: float
    dt_max: float = 0.01
    cfl: float = 0.4
    dt_min: float = 1e-12
    substep_safety: float = 0.9
    n_diffusion: str = "explicit"
    cu_diffusion: str = "semi-implicit"

    def __post_init__(self):
        if not (0.0 < self.cfl <= 1.0):
            raise ValueError(f"cfl must lie in (0, 1], got {self.cfl}")
        if self.t_end < 0 or self.dt_max <= 0:
            raise ValueError("need t_end >= 0 and dt_max > 0")
        if self.n_diffusion != "explicit":
            raise ValueError("only explicit n-diffusion is supported")
        if self.cu_diffusion not in ("semi-implicit", "explicit"):
            raise ValueError(f"unknown diffusion treatment {self.cu_diffusion!r}")
        if not (0 < self.substep_safety <= 1):
            raise ValueError("substep safety factor must lie in (0, 1]")


@dataclass
class StepInfo:
    dt: float
    substeps: int
    clamped_mass: float


def _advective_dt(state: State, wx, wy, controls: TimeControls) -> float:
    g = state.n.grid
    ux_max, uy_max = state.u.max_speed()
    sx = ux_max + (float(np.abs(wx).max()) if wx.size else 0.0)
    sy = uy_max + (float(np.abs(wy).max()) if wy.size else 0.0)
    rate = sx / g.hx + sy / g.hy
    dt = controls.dt_max if rate == 0.0 else min(controls.dt_max, controls.cfl / rate)
    return dt


def _diffusive_dt(state: State, spec: ModelSpec, controls: TimeControls) -> float:
    g = state.n.grid
    dmax = float(np.max(eval_D_eps(state.n.values, spec)))
    if dmax == 0.0:
        return controls.dt_max
    h2 = 1.0 / (1.0 / g.hx**2 + 1.0 / g.hy**2)
    # dt * dmax * (2/hx^2 + 2/hy^2) <= cfl, i.e. dt*dmax/h^2 <= cfl/4 on squares
    return controls.substep_safety * controls.cfl * h2 / (2.0 * dmax)


def _clamp_negative(n: ScalarField) -> float:
    """Zero tiny negative undershoots; returns the mass added by clamping."""
    v = n.values
    neg = v < 0.0
    if not neg.any():
        return 0.0
    worst = float(v.min())
    if worst < NEGATIVE_DENSITY_TOL:
        raise SolverError(
            f"density undershoot {worst:.3e} exceeds tolerance; flux bug suspected"
        )
    clamped = -float(v[neg].sum()) * n.grid.cell_area
    v[neg] = 0.0
    return clamped


def _step_impl(state: State, spec: ModelSpec, controls: TimeControls, poisson: PoissonSolver, until=None):
    g = state.n.grid
    wx, wy = taxis_face_velocity(state.n, state.c, spec)
    dt_stab = _advective_dt(state, wx, wy, controls)
    if controls.cu_diffusion == "explicit":
        # unit diffusivity for c and u: same parabolic bound, without the
        # substep machinery
        h2 = 1.0 / (1.0 / g.hx**2 + 1.0 / g.hy**2)
        dt_stab = min(dt_stab, controls.cfl * h2 / 2.0)
    if dt_stab < controls.dt_min:
        raise SolverError(
            f"stability violation: dt={dt_stab:.3e} below dt_min at t={state.t}"
        )
    # clip onto the next record tick / final time without leaving slivers:
    # either land exactly, or split the remainder so dt >= dt_stab / 2
    target = controls.t_end if until is None else min(until, controls.t_end)
    remaining = target - state.t
    t_new = None
    if remaining <= dt_stab * (1.0 + 1e-9):
        dt = remaining
        t_new = target
    elif remaining <= 2.0 * dt_stab:
        dt = 0.5 * remaining
    else:
        dt = dt_stab
    if t_new is None:
        t_new = state.t + dt

    # --- (i) density update -------------------------------------------------
    tend = advect_scalar(state.n, state.u).values + taxis_flux_div(
        state.n, state.c, spec, faces=(wx, wy)
    ).values
    n_new = ScalarField(g, state.n.values - dt * tend)
    clamped = _clamp_negative(n_new)

    dt_sub_max = _diffusive_dt(state, spec, controls)
    substeps = max(1, int(math.ceil(dt / dt_sub_max)))
    _diffusion_substeps(n_new.values, spec, dt / substeps, substeps, g)
    clamped += _clamp_negative(n_new)

    # --- (ii) signal update ---------------------------------------------------
    c_mid = state.c.values - dt * advect_scalar(state.c, state.u).values
    c_mid = c_mid / (1.0 + dt * n_new.values)
    if controls.cu_diffusion == "semi-implicit":
        c_vals = poisson.helmholtz_cells(c_mid, dt)
    else:
        c_vals = c_mid + dt * laplace(ScalarField(g, c_mid)).values
    c_new = ScalarField(g, c_vals)

    # --- (iii) velocity update -------------------------------------------------
    adv = advect_velocity(state.u)
    ux_star = state.u.ux - dt * adv.ux
    uy_star = state.u.uy - dt * adv.uy
    if controls.cu_diffusion == "semi-implicit":
        ux_star[1:-1, :] = poisson.helmholtz_ux(ux_star[1:-1, :], dt)
        uy_star[:, 1:-1] = poisson.helmholtz_uy(uy_star[:, 1:-1], dt)
    else:
        visc = _explicit_viscous(state.u, g)
        ux_star += dt * visc[0]
        uy_star += dt * visc[1]
    phx, phy = spec.phi_gradient
    nv = n_new.values
    if phx != 0.0:
        ux_star[1:-1, :] += dt * phx * 0.5 * (nv[:-1, :] + nv[1:, :])
    if phy != 0.0:
        uy_star[:, 1:-1] += dt * phy * 0.5 * (nv[:, :-1] + nv[:, 1:])
    u_star = VectorField(g, ux_star, uy_star)
    u_star.enforce_no_penetration()
    u_new, _pressure = project(u_star, poisson)

    new_state = State(n_new, c_new, u_new, t_new)
    return new_state, StepInfo(dt=dt, substeps=substeps, clamped_mass=clamped)


try:  # optional accelerator for the substep loop; numpy path is equivalent
    from numba import njit as _njit

    @_njit(cache=True, inline="always")
    def _interp_scalar(x, xs, ys):
        n = xs.shape[0]
        if x <= xs[0]:
            return ys[0]
        if x >= xs[n - 1]:
            return ys[n - 1]
        lo = 0
        hi = n - 1
        while hi - lo > 1:
            mid = (lo + hi) // 2
            if xs[mid] <= x:
                lo = mid
            else:
                hi = mid
        t = (x - xs[lo]) / (xs[lo + 1] - xs[lo])
        return ys[lo] + t * (ys[lo + 1] - ys[lo])

    @_njit(cache=True)
    def _substep_kernel(nv, mode, em, delta, knots, vals, eps, cx, cy, substeps, fx, fy):
        nx, ny = nv.shape
        for _ in range(substeps):
            for i in range(nx - 1):
                for j in range(ny):
                    d = 0.5 * (nv[i, j] + nv[i + 1, j])
                    if mode == 0:
                        d = d + delta
                    elif mode == 1:
                        d = (d + delta) ** em
                        if d < eps:
                            d = eps
                    else:
                        d = _interp_scalar(d, knots, vals) + eps
                    fx[i, j] = d * (nv[i + 1, j] - nv[i, j]) * cx
            for i in range(nx):
                for j in range(ny - 1):
                    d = 0.5 * (nv[i, j] + nv[i, j + 1])
                    if mode == 0:
                        d = d + delta
                    elif mode == 1:
                        d = (d + delta) ** em
                        if d < eps:
                            d = eps
                    else:
                        d = _interp_scalar(d, knots, vals) + eps
                    fy[i, j] = d * (nv[i, j + 1] - nv[i, j]) * cy
            for i in range(nx - 1):
                for j in range(ny):
                    nv[i, j] += fx[i, j]
                    nv[i + 1, j] -= fx[i, j]
            for i in range(nx):
                for j in range(ny - 1):
                    nv[i, j] += fy[i, j]
                    nv[i, j + 1] -= fy[i, j]

except ImportError:  # pragma: no cover - exercised only without numba
    _substep_kernel = None


def _diffusion_substeps(nv: np.ndarray, spec: ModelSpec, dt_sub: float, substeps: int, g):
    """Explicit conservative diffusion substeps, in place on nv.

    Same flux-form update as nonlinear_diffuse (same face averages, same
    diffusive flux, exact telescoping), written against preallocated
    buffers since this loop dominates the run time.
    """
    from .model import PorousMedium, _eps_shift

    cx = dt_sub / g.hx**2
    cy = dt_sub / g.hy**2
    porous = isinstance(spec.diffusion, PorousMedium)
    m2 = porous and spec.diffusion.m == 2.0
    delta = _eps_shift(spec) if porous else 0.0

    if _substep_kernel is not None:
        mode = 0 if m2 else (1 if porous else 2)
        em = (spec.diffusion.m - 1.0) if porous else 1.0
        knots = np.asarray(spec.diffusion.knots) if not porous else np.zeros(2)
        vals = np.asarray(spec.diffusion.values) if not porous else np.zeros(2)
        fx = np.empty((g.nx - 1, g.ny))
        fy = np.empty((g.nx, g.ny - 1))
        _substep_kernel(nv, mode, em, delta, knots, vals, spec.epsilon, cx, cy, substeps, fx, fy)
        return

    ax = np.empty((g.nx - 1, g.ny))
    dxb = np.empty_like(ax)
    ay = np.empty((g.nx, g.ny - 1))
    dyb = np.empty_like(ay)
    for _ in range(substeps):
        np.add(nv[1:, :], nv[:-1, :], out=ax)
        ax *= 0.5
        np.add(nv[:, 1:], nv[:, :-1], out=ay)
        ay *= 0.5
        if m2:
            ax += delta
            ay += delta
        else:
            ax[:] = eval_D_eps(ax, spec)
            ay[:] = eval_D_eps(ay, spec)
        np.subtract(nv[1:, :], nv[:-1, :], out=dxb)
        ax *= dxb
        ax *= cx
        np.subtract(nv[:, 1:], nv[:, :-1], out=dyb)
        ay *= dyb
        ay *= cy
        nv[:-1, :] += ax
        nv[1:, :] -= ax
        nv[:, :-1] += ay
        nv[:, 1:] -= ay


def _explicit_viscous(u: VectorField, g):
    uxp = np.concatenate([-u.ux[:, :1], u.ux, -u.ux[:, -1:]], axis=1)
    lap_ux = np.zeros_like(u.ux)
    lap_ux[1:-1, :] = (u.ux[2:, :] - 2 * u.ux[1:-1, :] + u.ux[:-2, :]) / g.hx**2 + (
        uxp[1:-1, 2:] - 2 * uxp[1:-1, 1:-1] + uxp[1:-1, :-2]
    ) / g.hy**2
    uyp = np.concatenate([-u.uy[:1, :], u.uy, -u.uy[-1:, :]], axis=0)
    lap_uy = np.zeros_like(u.uy)
    lap_uy[:, 1:-1] = (u.uy[:, 2:] - 2 * u.uy[:, 1:-1] + u.uy[:, :-2]) / g.hy**2 + (
        uyp[2:, 1:-1] - 2 * uyp[1:-1, 1:-1] + uyp[:-2, 1:-1]
    ) / g.hx**2
    return lap_ux, lap_uy


def step(state: State, spec: ModelSpec, controls: TimeControls, poisson: PoissonSolver) -> State:
    """Advance one time step; see the module docstring for the scheme."""
    new_state, _ = _step_impl(state, spec, controls, poisson)
    return new_state


def _check_finite(state: State):
    if not (
        np.isfinite(state.n.values).all()
        and np.isfinite(state.c.values).all()
        and np.isfinite(state.u.ux).all()
        and np.isfinite(state.u.uy).all()
    ):
        raise SolverError(
            f"non-finite state at t={state.t:.6g}: "
            f"n_max={np.nanmax(state.n.values):.3g}, c_max={np.nanmax(state.c.values):.3g}, "
            f"u_max={np.nanmax(np.abs(state.u.ux)):.3g}"
        )


def _check_initial(state: State):
    state.validate()
    if not state.n.values.any():
        raise ValueError("initial density must not vanish identically")
    d = div(state.u)
    scale = max(1.0, max(state.u.max_speed()))
    if np.abs(d.values).max() > 1e-10 * scale / min(state.n.grid.hx, state.n.grid.hy):
        raise ValueError("initial velocity is not discretely solenoidal")


def run(
    initial: State,
    spec: ModelSpec,
    controls: TimeControls,
    poisson: PoissonSolver,
    sinks=(),
    cadence: float | None = None,
) -> State:
    """Advance to t_end, invoking sinks at the record cadence.

    Sinks are called as sink(state_copy, clamp_total) with an immutable
    snapshot; the first call happens at the initial time.  Steps are
    clipped so records land exactly on cadence ticks, which keeps time
    series from different runs comparable.  Fully deterministic.
    """
    _check_initial(initial)
    state = initial
    clamp_total = 0.0
    for sink in sinks:
        sink(state.copy(frozen=True), clamp_total)
    if controls.t_end <= state.t:
        return state

    tick = 0
    next_tick = None
    if cadence is not None:
        if cadence <= 0:
            raise ValueError("cadence must be positive")
        tick = int(math.floor(state.t / cadence + 1e-12)) + 1
        next_tick = tick * cadence

    while state.t < controls.t_end - 1e-14:
        state, info = _step_impl(state, spec, controls, poisson, until=next_tick)
        clamp_total += info.clamped_mass
        _check_finite(state)
        if next_tick is not None and state.t >= next_tick - 1e-12:
            for sink in sinks:
                sink(state.copy(frozen=True), clamp_total)
            tick += 1
            next_tick = tick * cadence
    if cadence is None:
        for sink in sinks:
            sink(state.copy(frozen=True), clamp_total)
    return state
