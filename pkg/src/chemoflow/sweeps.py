"""Parameter sweeps: regularization-strength Cauchy study, grid refinement.

The epsilon sweep reruns one configuration with a strictly decreasing
list of regularization strengths and reports space-time L2 distances
between consecutive runs, sampled at the shared cadence ticks on the
common grid.  No rate is asserted; decreasing distances indicate Cauchy
behavior of the regularized family.

The refinement sweep runs nested grids and reports observed convergence
orders per field from consecutive-grid differences (unbiased when the
error scales like C*h^p), plus errors against the finest run restricted
by cell-block averaging.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace as dc_replace
from typing import Sequence

import numpy as np

from .config import RunConfig
from .grid import State, make_grid
from .operators import PoissonSolver
from .solver import run

__all__ = ["SweepDistances", "RefinementReport", "eps_sweep", "refinement_sweep"]


@dataclass
class SweepDistances:
    eps_list: tuple
    n: list
    c: list
    u: list


def _collect_run(cfg: RunConfig, t_end: float):
    controls = dc_replace(cfg.controls, t_end=t_end)
    poisson = PoissonSolver(cfg.grid)
    frames = []

    def sink(state: State, clamp):
        frames.append((state.t, state.n.values, state.c.values, state.u.ux, state.u.uy))

    run(cfg.initial_state(), cfg.spec, controls, poisson, sinks=[sink], cadence=cfg.cadence)
    return frames


def _spacetime_l2(frames_a, frames_b, weight_t, cell_area) -> tuple:
    dn = dc = du = 0.0
    for (ta, na, ca, uxa, uya), (tb, nb, cb, uxb, uyb) in zip(frames_a, frames_b):
        if abs(ta - tb) > 1e-9:
            raise ValueError(f"sweep runs recorded at different times: {ta} vs {tb}")
        dn += float(((na - nb) ** 2).sum()) * cell_area * weight_t
        dc += float(((ca - cb) ** 2).sum()) * cell_area * weight_t
        du += (float(((uxa - uxb) ** 2).sum()) + float(((uya - uyb) ** 2).sum())) * cell_area * weight_t
    return math.sqrt(dn), math.sqrt(dc), math.sqrt(du)


def eps_sweep(base: RunConfig, eps_list: Sequence[float], T: float) -> SweepDistances:
    """Distances between runs at consecutive regularization strengths."""
    eps_list = tuple(float(e) for e in eps_list)
    # equal consecutive entries are allowed (they replay deterministically
    # and must report distance 0); increases are not
    if any(e2 > e1 for e1, e2 in zip(eps_list, eps_list[1:])):
        raise ValueError("eps_list must be non-increasing")
    runs = []
    for eps in eps_list:
        cfg = dc_replace(base, spec=dc_replace(base.spec, epsilon=eps))
        runs.append(_collect_run(cfg, T))
    out = SweepDistances(eps_list, [], [], [])
    for fa, fb in zip(runs, runs[1:]):
        if len(fa) != len(fb):
            raise ValueError("sweep runs recorded different numbers of frames")
        dn, dc, du = _spacetime_l2(fa, fb, base.cadence, base.grid.cell_area)
        out.n.append(dn)
        out.c.append(dc)
        out.u.append(du)
    return out


@dataclass
class RefinementReport:
    grids: tuple
    errors_vs_finest: dict
    consecutive_diffs: dict
    orders: dict


def _restrict(values: np.ndarray, factor: int) -> np.ndarray:
    """Block mean over factor x factor cells (exact for nested grids)."""
    nx, ny = values.shape
    return values.reshape(nx // factor, factor, ny // factor, factor).mean(axis=(1, 3))


def _final_fields(cfg: RunConfig, nxy: tuple, T: float):
    grid = make_grid(nxy[0], nxy[1], cfg.grid.lx, cfg.grid.ly)
    cfg_g = dc_replace(cfg, grid=grid)
    controls = dc_replace(cfg.controls, t_end=T)
    final = run(cfg_g.initial_state(), cfg_g.spec, controls, PoissonSolver(grid), sinks=[])
    return final


def refinement_sweep(base: RunConfig, grids: Sequence[tuple], T: float) -> RefinementReport:
    """Run nested grids; report per-field observed orders.

    `grids` is a list of (nx, ny), coarse to fine, each dividing the next.
    Orders come from ratios of consecutive-grid L2 differences; identical
    consecutive grids produce a zero difference and an undefined (nan)
    order, reported as such.
    """
    grids = tuple((int(a), int(b)) for a, b in grids)
    finals = [_final_fields(base, g, T) for g in grids]
    fine = finals[-1]
    fine_n = fine.n.values
    fine_c = fine.c.values

    def l2(a, nx, ny):
        return float(np.sqrt((a**2).sum() * (base.grid.lx / nx) * (base.grid.ly / ny)))

    errors = {"n": [], "c": []}
    for (nx, ny), st in zip(grids[:-1], finals[:-1]):
        fx = grids[-1][0] // nx
        if grids[-1][0] % nx or grids[-1][1] % ny:
            raise ValueError("grids must be nested (each dividing the finest)")
        errors["n"].append(l2(st.n.values - _restrict(fine_n, fx), nx, ny))
        errors["c"].append(l2(st.c.values - _restrict(fine_c, fx), nx, ny))

    diffs = {"n": [], "c": []}
    for (nxa, nya), sta, (nxb, nyb), stb in (
        (grids[i], finals[i], grids[i + 1], finals[i + 1]) for i in range(len(grids) - 1)
    ):
        if nxa == nxb and nya == nyb:
            diffs["n"].append(0.0)
            diffs["c"].append(0.0)
            continue
        fx = nxb // nxa
        diffs["n"].append(l2(sta.n.values - _restrict(stb.n.values, fx), nxa, nya))
        diffs["c"].append(l2(sta.c.values - _restrict(stb.c.values, fx), nxa, nya))

    orders = {}
    for key, d in diffs.items():
        ords = []
        for d1, d2 in zip(d, d[1:]):
            ords.append(math.log2(d1 / d2) if d1 > 0 and d2 > 0 else float("nan"))
        orders[key] = ords
    return RefinementReport(grids, errors, diffs, orders)
