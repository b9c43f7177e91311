"""Coefficient functions of the chemotaxis-fluid model.

Diffusivity D (porous-medium n^(m-1) or tabulated), its regularization
D_eps with the bracket D <= D_eps <= D + 2*eps and D_eps >= eps, the
primitives D1_eps, D2_eps, the cutoff sensitivity S_eps, the threshold
density s0 above which D clears a configured level L, the small-density
ratio kappa = inf D(n)/n, and the truncated reciprocal-diffusion tables
Psi0/Psi1/Psi2.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "PorousMedium",
    "TabulatedDiffusion",
    "ModelSpec",
    "TruncationTable",
    "eval_D",
    "eval_D_eps",
    "eval_D_primitives",
    "eval_S_eps",
    "sensitivity_scale",
    "boundary_cutoff",
    "density_cutoff",
    "threshold_s0",
    "kappa_of",
    "build_truncations",
]

GAMMA_MAX = 5.0 / 6.0


@dataclass(frozen=True)
class PorousMedium:
    """D(n) = n^(m-1). m in (1, 2] is required for simulation configs
    (kappa > 0 fails for m > 2); construction allows any m > 1 so the
    failure mode itself is testable."""

    m: float

    def __post_init__(self):
        if not (math.isfinite(self.m) and self.m > 1.0):
            raise ValueError(f"porous-medium exponent must satisfy m > 1, got {self.m}")


@dataclass(frozen=True)
class TabulatedDiffusion:
    """Piecewise-linear D given by knots/values; constant beyond the last knot.

    Values must be positive on (0, inf); the knot at 0 may carry D(0) = 0.
    """

    knots: tuple
    values: tuple

    def __post_init__(self):
        k = np.asarray(self.knots, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if k.ndim != 1 or k.shape != v.shape or k.size < 2:
            raise ValueError("need matching 1D knots/values with at least 2 entries")
        if not (np.isfinite(k).all() and np.isfinite(v).all()):
            raise ValueError("tabulated diffusion entries must be finite")
        if (np.diff(k) <= 0).any() or k[0] < 0:
            raise ValueError("knots must be strictly increasing and start at >= 0")
        positive_part = v[1:] if k[0] == 0 else v
        if (positive_part <= 0).any() or v[0] < 0:
            raise ValueError("tabulated diffusion must be positive on (0, inf)")
        object.__setattr__(self, "knots", tuple(float(x) for x in k))
        object.__setattr__(self, "values", tuple(float(x) for x in v))


@dataclass(frozen=True)
class ModelSpec:
    """All model coefficients for one run.

    gamma is the sensitivity singularity exponent (response ~ c^-gamma),
    s0_sensitivity the constant bound factor S0, phi_gradient the constant
    gravitational-potential gradient, epsilon the regularization strength,
    L the diffusion threshold level, and M the a-priori bound parameter
    (||c0||_inf <= M, and ||n0||_1 <= M when gamma > 1/2).
    """

    diffusion: object
    gamma: float = 0.5
    s0_sensitivity: float = 1.0
    sensitivity_kind: str = "isotropic"
    rotation_angle: float = 0.0
    phi_gradient: tuple = (0.0, 0.0)
    epsilon: float = 0.05
    L: float = 1.0
    M: float = 1.0

    def __post_init__(self):
        if not (0.0 <= self.gamma <= GAMMA_MAX + 1e-15):
            raise ValueError(
                f"gamma must lie in [0, 5/6], got {self.gamma}"
            )
        # epsilon = 0 is admitted for direct coefficient evaluation (the
        # unregularized limit); simulation configs require epsilon in (0, 1).
        if not (0.0 <= self.epsilon < 1.0):
            raise ValueError(f"epsilon must lie in [0, 1), got {self.epsilon}")
        if self.s0_sensitivity < 0 or not math.isfinite(self.s0_sensitivity):
            raise ValueError(f"S0 must be finite and >= 0, got {self.s0_sensitivity}")
        if self.sensitivity_kind not in ("isotropic", "rotation"):
            raise ValueError(f"unknown sensitivity kind {self.sensitivity_kind!r}")
        if self.L <= 0 or not math.isfinite(self.L):
            raise ValueError(f"L must be finite and > 0, got {self.L}")
        if self.M <= 0 or not math.isfinite(self.M):
            raise ValueError(f"M must be finite and > 0, got {self.M}")
        if len(self.phi_gradient) != 2 or not all(math.isfinite(g) for g in self.phi_gradient):
            raise ValueError("phi_gradient must be a finite 2-vector")
        object.__setattr__(self, "phi_gradient", tuple(float(g) for g in self.phi_gradient))
        if not isinstance(self.diffusion, (PorousMedium, TabulatedDiffusion)):
            raise ValueError("diffusion must be PorousMedium or TabulatedDiffusion")


# ----------------------------------------------------------------------
# diffusivity and primitives
# ----------------------------------------------------------------------

def eval_D(n, spec: ModelSpec):
    """D(n); accepts scalars or arrays, n >= 0."""
    n = np.asarray(n, dtype=float)
    d = spec.diffusion
    if isinstance(d, PorousMedium):
        if d.m == 2.0:
            out = n.copy()
        else:
            out = np.power(n, d.m - 1.0)
    else:
        out = np.interp(n, d.knots, d.values)
    return out if out.ndim else float(out)


def _eps_shift(spec: ModelSpec) -> float:
    # delta with (n + delta)^(m-1) = D_eps for porous-medium diffusion
    m = spec.diffusion.m
    return spec.epsilon ** (1.0 / (m - 1.0)) if spec.epsilon > 0 else 0.0


def eval_D_eps(n, spec: ModelSpec):
    """Regularized diffusivity.

    Porous medium: (n + eps^(1/(m-1)))^(m-1), the closed form satisfying
    the bracket exactly, floored at eps (the shift underflows for m close
    to 1; the floor keeps every bracket inequality intact).  Tabulated:
    D(n) + eps.
    """
    n = np.asarray(n, dtype=float)
    d = spec.diffusion
    if isinstance(d, PorousMedium):
        shifted = n + _eps_shift(spec)
        out = shifted if d.m == 2.0 else np.power(shifted, d.m - 1.0)
        if spec.epsilon > 0:
            out = np.maximum(out, spec.epsilon)
    else:
        out = np.interp(n, d.knots, d.values) + spec.epsilon
    return out if out.ndim else float(out)


def _tabulated_cumulatives(d: TabulatedDiffusion, epsilon: float):
    """Exact piecewise integrals of D_eps = D + eps and of its primitive.

    D_eps is piecewise linear, so D1 is piecewise quadratic and D2
    piecewise cubic; both are assembled exactly at the knots.
    """
    k = np.asarray(d.knots)
    v = np.asarray(d.values) + epsilon
    if k[0] > 0:  # constant extension down to 0
        k = np.concatenate([[0.0], k])
        v = np.concatenate([[v[0]], v])
    dk = np.diff(k)
    # integral of D_eps over each interval (trapezoid, exact)
    seg1 = 0.5 * (v[:-1] + v[1:]) * dk
    I1 = np.concatenate([[0.0], np.cumsum(seg1)])
    # integral of D1 over each interval: D1 is quadratic there; Simpson is exact
    slope = (v[1:] - v[:-1]) / dk
    mid = I1[:-1] + v[:-1] * (dk / 2.0) + 0.5 * slope * (dk / 2.0) ** 2
    seg2 = dk / 6.0 * (I1[:-1] + 4.0 * mid + I1[1:])
    I2 = np.concatenate([[0.0], np.cumsum(seg2)])
    return k, v, I1, I2


def eval_D_primitives(n, spec: ModelSpec):
    """(D1_eps(n), D2_eps(n)) with D1 = int_0^n D_eps and D2 = int_0^n D1.

    Closed forms for porous-medium diffusion; exact piecewise integration
    for tabulated diffusion (the integrands are piecewise polynomials).
    """
    n = np.asarray(n, dtype=float)
    if (n < 0).any():
        raise ValueError("density must be >= 0")
    d = spec.diffusion
    if isinstance(d, PorousMedium):
        m = d.m
        delta = _eps_shift(spec)
        d1 = ((n + delta) ** m - delta**m) / m
        d2 = ((n + delta) ** (m + 1.0) - delta ** (m + 1.0)) / (m * (m + 1.0)) - delta**m * n / m
    else:
        k, v, I1, I2 = _tabulated_cumulatives(d, spec.epsilon)
        idx = np.clip(np.searchsorted(k, n, side="right") - 1, 0, len(k) - 2)
        k0 = k[idx]
        v0 = v[idx]
        slope = (v[idx + 1] - v[idx]) / (k[idx + 1] - k[idx])
        s = n - k0
        # beyond the last knot D_eps is constant: slope of the last segment
        # applies only inside it, so clamp s for the within-segment part
        last = n > k[-1]
        s_in = np.where(last, 0.0, s)
        d1 = I1[idx] + v0 * s_in + 0.5 * slope * s_in**2
        d1_knot = I1[-1]
        d1 = np.where(last, d1_knot + v[-1] * (n - k[-1]), d1)
        d2 = I2[idx] + I1[idx] * s_in + 0.5 * v0 * s_in**2 + slope * s_in**3 / 6.0
        d2 = np.where(
            last,
            I2[-1] + d1_knot * (n - k[-1]) + 0.5 * v[-1] * (n - k[-1]) ** 2,
            d2,
        )
    if n.ndim:
        return d1, d2
    return float(d1), float(d2)


# ----------------------------------------------------------------------
# sensitivity
# ----------------------------------------------------------------------

def _smoothstep(t):
    """C^1 ramp: 0 for t<=0, 1 for t>=1, t^2(3-2t) between."""
    t = np.clip(t, 0.0, 1.0)
    return t * t * (3.0 - 2.0 * t)


def boundary_cutoff(x, y, spec: ModelSpec, lx: float, ly: float):
    """rho_eps: 0 within distance eps of the wall, 1 beyond 2*eps."""
    dist = np.minimum(np.minimum(x, lx - x), np.minimum(y, ly - y))
    eps = spec.epsilon
    if eps == 0.0:
        return np.ones_like(np.asarray(dist, dtype=float))
    return _smoothstep((dist - eps) / eps)


def density_cutoff(n, spec: ModelSpec):
    """chi_eps: 1 on [0, 1/eps], 0 on [2/eps, inf), smoothstep between."""
    eps = spec.epsilon
    if eps == 0.0:
        return np.ones_like(np.asarray(n, dtype=float))
    return 1.0 - _smoothstep(np.asarray(n, dtype=float) * eps - 1.0)


def sensitivity_scale(c, spec: ModelSpec):
    """Scalar prototype factor S0 / (c + eps)^gamma."""
    c = np.asarray(c, dtype=float)
    return spec.s0_sensitivity * np.power(c + spec.epsilon, -spec.gamma)


def _rotation(theta: float) -> np.ndarray:
    ct, st = math.cos(theta), math.sin(theta)
    return np.array([[ct, -st], [st, ct]])


def eval_S_eps(x: float, y: float, n: float, c: float, spec: ModelSpec, lx: float, ly: float) -> np.ndarray:
    """Pointwise regularized sensitivity tensor, as a 2x2 matrix.

    S_eps = rho_eps(x) * chi_eps(n) * s(c + eps) * R, with R the identity
    (isotropic) or a rotation by the configured angle.  Its operator norm
    is bounded by S0 / (c + eps)^gamma, vanishes within eps of the wall
    and for densities beyond 2/eps.
    """
    if c < 0:
        raise ValueError("signal concentration must be >= 0")
    factor = float(boundary_cutoff(x, y, spec, lx, ly)) * float(density_cutoff(n, spec))
    factor *= float(sensitivity_scale(c, spec))
    base = np.eye(2) if spec.sensitivity_kind == "isotropic" else _rotation(spec.rotation_angle)
    return factor * base


# ----------------------------------------------------------------------
# threshold, kappa, truncations
# ----------------------------------------------------------------------

def threshold_s0(spec: ModelSpec, s0_floor: float = 1e-3) -> float:
    """Smallest density s0 with D(s) >= L for all s >= s0.

    Porous medium: monotone bisection.  Tabulated: scan over the knot
    range (constant extension beyond).  Raises if the level L is never
    reached, which violates the liminf condition on D.
    """
    L = spec.L
    d = spec.diffusion
    if isinstance(d, PorousMedium):
        if eval_D(s0_floor, spec) >= L:
            return s0_floor
        lo, hi = s0_floor, max(1.0, s0_floor * 2)
        for _ in range(200):
            if eval_D(hi, spec) >= L:
                break
            hi *= 2.0
        else:
            raise ValueError("L unreachable: diffusion never exceeds the threshold level")
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if eval_D(mid, spec) >= L:
                hi = mid
            else:
                lo = mid
        return hi
    # tabulated: D is constant beyond the last knot
    knots = np.asarray(d.knots)
    tail = float(d.values[-1])
    if tail + 0.0 < L:
        raise ValueError("L unreachable: tabulated diffusion stays below the threshold level")
    samples = np.linspace(0.0, knots[-1], 4097)
    dv = eval_D(samples, spec)
    below = np.nonzero(dv < L)[0]
    if below.size == 0:
        return max(float(samples[1]), s0_floor)
    if below[-1] == len(samples) - 1:
        raise ValueError("L unreachable: tabulated diffusion stays below the threshold level")
    return max(float(samples[below[-1] + 1]), s0_floor)


def kappa_of(s0: float, spec: ModelSpec, samples: int = 4096) -> float:
    """kappa = inf over n in (0, 2*s0) of D(n)/n; must be positive.

    Analytic for porous-medium diffusion (the ratio n^(m-2) is monotone),
    sampled infimum otherwise.  Raises when the ratio degenerates to 0
    near n = 0, which happens exactly for m > 2.
    """
    if s0 <= 0:
        raise ValueError("s0 must be positive")
    d = spec.diffusion
    if isinstance(d, PorousMedium):
        m = d.m
        if m == 2.0:
            return 1.0
        if m < 2.0:
            return float((2.0 * s0) ** (m - 2.0))
        raise ValueError(
            "degenerate near zero: D(n)/n -> 0 as n -> 0 for porous-medium m > 2"
        )
    n = np.geomspace(2.0 * s0 * 1e-9, 2.0 * s0, samples)
    ratio = eval_D(n, spec) / n
    kappa = float(ratio.min())
    # degeneracy heuristic: infimum attained at the smallest samples and
    # still decreasing there means the true infimum is 0
    head = ratio[: samples // 64]
    if kappa <= 0 or (np.argmin(ratio) < samples // 64 and head[0] < head[-1] * 0.5):
        raise ValueError("degenerate near zero: sampled D(n)/n tends to 0")
    return kappa


@dataclass(frozen=True)
class TruncationTable:
    """Sampled truncated reciprocal diffusion Psi0 and primitives Psi1, Psi2.

    Psi0 is 1/D_eps below s0, a linear ramp to zero on [s0, 2*s0], and 0
    beyond; Psi1(s) = -int_s^{2 s0} Psi0, Psi2(s) = -int_s^{2 s0} Psi1.
    Linear interpolation between samples; everything vanishes above 2*s0.
    """

    s0: float
    kappa: float
    s: np.ndarray
    psi0: np.ndarray
    psi1: np.ndarray
    psi2: np.ndarray

    def eval_psi0(self, x):
        return np.interp(np.asarray(x, dtype=float), self.s, self.psi0, right=0.0)

    def eval_psi1(self, x):
        return np.interp(np.asarray(x, dtype=float), self.s, self.psi1, right=0.0)

    def eval_psi2(self, x):
        return np.interp(np.asarray(x, dtype=float), self.s, self.psi2, right=0.0)

    @property
    def psi2_bound(self) -> float:
        return 3.0 * self.s0 / self.kappa


def build_truncations(spec: ModelSpec, s0: float, samples: int = 4096) -> TruncationTable:
    """Tabulate Psi0/Psi1/Psi2 on [0, 2*s0] and verify 0 <= Psi2 <= 3*s0/kappa."""
    if s0 <= 0:
        raise ValueError("s0 must be positive")
    s = np.linspace(0.0, 2.0 * s0, samples)
    deps_s0 = float(eval_D_eps(s0, spec))
    psi0 = np.where(
        s < s0,
        1.0 / np.maximum(eval_D_eps(s, spec), 1e-300),
        (2.0 * s0 - s) / (s0 * deps_s0),
    )
    ds = s[1] - s[0]
    # Psi1(s) = -int_s^{2s0} Psi0: cumulative trapezoid from the right end
    tail0 = np.concatenate([[0.0], np.cumsum((0.5 * (psi0[1:] + psi0[:-1]) * ds)[::-1])])[::-1]
    psi1 = -tail0
    tail1 = np.concatenate([[0.0], np.cumsum((0.5 * (-psi1[1:] - psi1[:-1]) * ds)[::-1])])[::-1]
    psi2 = tail1
    kappa = kappa_of(s0, spec)
    table = TruncationTable(s0=float(s0), kappa=kappa, s=s, psi0=psi0, psi1=psi1, psi2=psi2)
    bound = table.psi2_bound
    if (psi2 < -1e-12 * max(bound, 1.0)).any() or (psi2 > bound * (1.0 + 1e-9) + 1e-12).any():
        raise ValueError(
            "truncation bound violated: Psi2 outside [0, 3*s0/kappa]; "
            "check kappa or the quadrature resolution"
        )
    return table
