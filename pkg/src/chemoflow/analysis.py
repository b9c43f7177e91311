"""Standalone numerical checks of the self-contained integral inequalities.

These run on synthetic smooth fields, independent of the PDE solver:

* a pointwise log-Hessian identity and two integral estimates with the
  fixed constants (4+sqrt(2))^2 and (5+sqrt(2))^2;
* an entropy-weighted product bound of Trudinger type and its superlevel
  variant, whose existential constants K are calibrated on half of a
  field corpus and verified on the held-out half;
* a mean-on-a-subset Poincare inequality, same protocol;
* a windowed-forcing ODE envelope and a doubling-exponent recursion
  limit, exercised on randomized admissible inputs.

Calibration uses a 2x safety factor on the calibration-half maximum, so
the held-out check is a falsifiable statement about a single constant
working corpus-wide.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .grid import Grid, ScalarField, integrate, make_grid

__all__ = [
    "FieldCorpus",
    "log_hessian_identity_residual",
    "trudinger_gap",
    "trudinger_sublevel_gap",
    "ode_envelope",
    "mk_limit_check",
    "equality_mk_sequence",
    "slack_mk_sequence",
    "poincare_subset_gap",
    "LemmaCheckRow",
    "run_lemma_checks",
    "format_report",
]

EST1_CONST = (4.0 + math.sqrt(2.0)) ** 2
EST2_CONST = (5.0 + math.sqrt(2.0)) ** 2


# ----------------------------------------------------------------------
# reproducible field corpus
# ----------------------------------------------------------------------

@dataclass(frozen=True)
class FieldCorpus:
    """Seeded collection of smooth strictly positive fields.

    Fields are random cosine series (zero normal derivative on the walls)
    with an algebraically decaying spectrum, shifted to sit above `floor`
    and rescaled to a per-member random span.  Paired signed fields are
    available for the product-bound checks.
    """

    nx: int = 64
    ny: int = 64
    lx: float = 1.0
    ly: float = 1.0
    n_members: int = 100
    seed: int = 7
    floor: float = 0.1
    max_mode: int = 4
    decay: float = 2.0
    span_lo: float = 0.5
    span_hi: float = 3.0

    @property
    def grid(self) -> Grid:
        return make_grid(self.nx, self.ny, self.lx, self.ly)

    def _raw(self, rng, grid) -> np.ndarray:
        x, y = grid.cell_mesh()
        out = np.zeros((grid.nx, grid.ny))
        for k in range(self.max_mode + 1):
            for m in range(self.max_mode + 1):
                if k == 0 and m == 0:
                    continue
                amp = rng.standard_normal() / (1.0 + k**2 + m**2) ** (self.decay / 2.0)
                out += amp * np.cos(k * np.pi * x / self.lx) * np.cos(m * np.pi * y / self.ly)
        return out

    def member(self, index: int, grid: Grid | None = None):
        """(phi, psi) pair for one member: phi > 0, psi signed."""
        g = grid if grid is not None else self.grid
        rng = np.random.default_rng([self.seed, index])
        raw = self._raw(rng, g)
        span = rng.uniform(self.span_lo, self.span_hi)
        lo, hi = raw.min(), raw.max()
        phi = self.floor + span * (raw - lo) / max(hi - lo, 1e-300)
        raw2 = self._raw(rng, g)
        amp = rng.uniform(0.3, 2.0)
        psi = raw2 * (amp / max(np.abs(raw2).max(), 1e-300))
        return ScalarField(g, phi), ScalarField(g, psi)

    def positive_fields(self):
        return [self.member(i)[0] for i in range(self.n_members)]

    def pairs(self):
        return [self.member(i) for i in range(self.n_members)]


# ----------------------------------------------------------------------
# discrete calculus helpers (cell-centered, second order)
# ----------------------------------------------------------------------

def _grads(values, grid):
    return np.gradient(values, grid.hx, grid.hy, edge_order=2)


def _hessian(values, grid):
    gx, gy = _grads(values, grid)
    gxx, gxy = _grads(gx, grid)
    _, gyy = _grads(gy, grid)
    return gxx, gxy, gyy


def _integral(values, grid) -> float:
    return float(values.sum() * grid.cell_area)


# ----------------------------------------------------------------------
# log-Hessian identity and estimates
# ----------------------------------------------------------------------

def log_hessian_identity_residual(phi: ScalarField, margin: int = 2):
    """Residual of the pointwise identity

        |D2 phi|^2 = phi^2 |D2 ln phi|^2 + (1/phi) grad|grad phi|^2 . grad phi
                     - (1/phi^2) |grad phi|^4

    over interior cells (a `margin`-cell rim is excluded so one-sided
    boundary stencils never enter), together with the two integral gaps

        gap1 = (4+sqrt2)^2 int (|grad phi|^2/phi) |D2 ln phi|^2
               - int |grad phi|^6 / phi^5
        gap2 = (5+sqrt2)^2 int (|grad phi|^2/phi) |D2 ln phi|^2
               - int |D2 phi|^2 |grad phi|^2 / phi^3

    Returns (res_identity, gap1, gap2).
    """
    g = phi.grid
    v = phi.values
    if (v <= 0).any():
        raise ValueError("field must be strictly positive")
    gx, gy = _grads(v, g)
    grad2 = gx**2 + gy**2
    hxx, hxy, hyy = _hessian(v, g)
    hess2 = hxx**2 + 2.0 * hxy**2 + hyy**2

    lv = np.log(v)
    lxx, lxy, lyy = _hessian(lv, g)
    lhess2 = lxx**2 + 2.0 * lxy**2 + lyy**2

    tx, ty = _grads(grad2, g)
    transport = (tx * gx + ty * gy) / v

    lhs = hess2
    rhs = v**2 * lhess2 + transport - grad2**2 / v**2
    sl = (slice(margin, -margin), slice(margin, -margin))
    res_identity = float(np.abs(lhs[sl] - rhs[sl]).max())

    weight = grad2 / v * lhess2
    gap1 = EST1_CONST * _integral(weight, g) - _integral(grad2**3 / v**5, g)
    gap2 = EST2_CONST * _integral(weight, g) - _integral(hess2 * grad2 / v**3, g)
    return res_identity, float(gap1), float(gap2)


# ----------------------------------------------------------------------
# Trudinger-type product bounds
# ----------------------------------------------------------------------

def trudinger_gap(phi: ScalarField, psi: ScalarField, a: float, eta: float, K: float) -> float:
    """RHS - LHS of

        int phi |psi| <= (1/a) int phi ln(phi/mean phi)
                         + (1+eta) a / (8 pi) (int phi) int |grad psi|^2
                         + K a (int phi) (int |psi|)^2 + (K/a) int phi
    """
    if a <= 0 or eta <= 0:
        raise ValueError("need a > 0 and eta > 0")
    g = phi.grid
    pv = phi.values
    if (pv < 0).any() or not pv.any():
        raise ValueError("phi must be nonnegative and not identically zero")
    mass = integrate(phi)
    mean = mass / g.area
    entropy = _integral(np.where(pv > 0, pv * np.log(np.maximum(pv, 1e-300) / mean), 0.0), g)
    gx, gy = _grads(psi.values, g)
    dirichlet = _integral(gx**2 + gy**2, g)
    l1_psi = _integral(np.abs(psi.values), g)
    lhs = _integral(pv * np.abs(psi.values), g)
    rhs = (
        entropy / a
        + (1.0 + eta) * a / (8.0 * math.pi) * mass * dirichlet
        + K * a * mass * l1_psi**2
        + K / a * mass
    )
    return float(rhs - lhs)


def trudinger_sublevel_gap(
    phi: ScalarField,
    L: float,
    s0_tilde: float,
    D_tilde: Callable,
    eta: float,
    K: float,
) -> float:
    """RHS - LHS of the superlevel-entropy bound

        int_{phi > s0t+1} phi ln(phi+1)
            <= (1+eta) K / L (int phi) int D(phi)|grad phi|^2/(phi+1)^2
               + K (int phi)^3 + (K - ln(mean phi)) int phi + K
    """
    g = phi.grid
    pv = phi.values
    if (pv < 0).any() or not pv.any():
        raise ValueError("phi must be nonnegative and not identically zero")
    mass = integrate(phi)
    mean = mass / g.area
    mask = pv > s0_tilde + 1.0
    lhs = _integral(np.where(mask, pv * np.log1p(pv), 0.0), g)
    gx, gy = _grads(pv, g)
    dissip = _integral(np.asarray(D_tilde(pv)) * (gx**2 + gy**2) / (pv + 1.0) ** 2, g)
    rhs = (1.0 + eta) * K / L * mass * dissip + K * mass**3 + (K - math.log(mean)) * mass + K
    return float(rhs - lhs)


def _min_constant_trudinger(phi, psi, a, eta) -> float:
    """Smallest K making the product bound an equality or better."""
    g = phi.grid
    pv = phi.values
    mass = integrate(phi)
    mean = mass / g.area
    entropy = _integral(np.where(pv > 0, pv * np.log(np.maximum(pv, 1e-300) / mean), 0.0), g)
    gx, gy = _grads(psi.values, g)
    dirichlet = _integral(gx**2 + gy**2, g)
    l1_psi = _integral(np.abs(psi.values), g)
    lhs = _integral(pv * np.abs(psi.values), g)
    slack = lhs - entropy / a - (1.0 + eta) * a / (8.0 * math.pi) * mass * dirichlet
    denom = a * mass * l1_psi**2 + mass / a
    return max(0.0, slack / denom)


def _min_constant_sublevel(phi, L, s0_tilde, D_tilde, eta) -> float:
    g = phi.grid
    pv = phi.values
    mass = integrate(phi)
    mean = mass / g.area
    mask = pv > s0_tilde + 1.0
    lhs = _integral(np.where(mask, pv * np.log1p(pv), 0.0), g)
    gx, gy = _grads(pv, g)
    dissip = _integral(np.asarray(D_tilde(pv)) * (gx**2 + gy**2) / (pv + 1.0) ** 2, g)
    denom = (1.0 + eta) / L * mass * dissip + mass**3 + mass + 1.0
    return max(0.0, (lhs + math.log(mean) * mass) / denom)


# ----------------------------------------------------------------------
# ODE envelope and recursion limit
# ----------------------------------------------------------------------

def ode_envelope(y0: float, a: float, b: float, tau: float, t: float) -> float:
    """Bound e^(-a t) y0 + b tau / (1 - e^(-a tau)) for y' + a y <= h with
    windowed forcing (1/tau) int_t^{t+tau} h <= b."""
    if a <= 0 or tau <= 0 or b < 0 or t < 0:
        raise ValueError("need a, tau > 0, b >= 0, t >= 0")
    return y0 * math.exp(-a * t) + b * tau / (1.0 - math.exp(-a * tau))


def equality_mk_sequence(a: float, b: float, logM0: float, k_max: int) -> np.ndarray:
    """log M_k for the recursion run at equality: M_k = a^k M_{k-1}^2 + b^(2^k)."""
    logs = [logM0]
    for k in range(1, k_max + 1):
        logs.append(np.logaddexp(k * math.log(a) + 2.0 * logs[-1], 2.0**k * math.log(b)))
    return np.array(logs)


def slack_mk_sequence(a: float, b: float, logM0: float, k_max: int, seed: int) -> np.ndarray:
    """Admissible sequence with random slack, clipped to stay in [1, inf)."""
    rng = np.random.default_rng(seed)
    logs = [logM0]
    for k in range(1, k_max + 1):
        cap = np.logaddexp(k * math.log(a) + 2.0 * logs[-1], 2.0**k * math.log(b))
        logs.append(max(0.0, cap + math.log(rng.uniform(0.2, 1.0))))
    return np.array(logs)


def mk_limit_check(M0: float, a: float, b: float, k_max: int, generator) -> tuple:
    """Check liminf_k M_k^(1/2^k) <= 2 sqrt(2) a^3 b M0 on a generated sequence.

    `generator(a, b, logM0, k_max)` must return log M_k values satisfying
    M_k <= a^k M_{k-1}^2 + b^(2^k); admissibility is verified here (in log
    space, so large k never overflows).  Returns (liminf_est, bound, ok)
    where liminf_est is the minimum of M_k^(1/2^k) over the tail quarter.
    """
    if a < 1.0 or b < 1.0 or M0 < 1.0:
        raise ValueError("need a >= 1, b >= 1, M0 >= 1")
    logs = np.asarray(generator(a, b, math.log(M0), k_max), dtype=float)
    if logs.shape != (k_max + 1,):
        raise ValueError("generator must produce k_max + 1 log-values")
    if (logs < -1e-12).any():
        raise ValueError("sequence must stay in [1, inf)")
    for k in range(1, k_max + 1):
        cap = np.logaddexp(k * math.log(a) + 2.0 * logs[k - 1], 2.0**k * math.log(b))
        if logs[k] > cap + 1e-9:
            raise ValueError(f"generated sequence violates the recursion at k={k}")
    ks = np.arange(k_max + 1)
    roots = np.exp(logs / 2.0**ks)
    tail = roots[max(1, k_max * 3 // 4):]
    liminf_est = float(tail.min())
    bound = 2.0 * math.sqrt(2.0) * a**3 * b * M0
    return liminf_est, bound, bool(liminf_est <= bound * (1.0 + 1e-9))


# ----------------------------------------------------------------------
# subset-mean Poincare inequality
# ----------------------------------------------------------------------

def poincare_subset_gap(phi: ScalarField, B_mask: np.ndarray, p: float, C: float) -> float:
    """C * (int |grad phi|^p)^(1/p) - (int |phi - mean_B phi|^p)^(1/p)."""
    if p < 1:
        raise ValueError("need p >= 1")
    g = phi.grid
    mask = np.asarray(B_mask, dtype=bool)
    if mask.shape != phi.values.shape:
        raise ValueError("mask shape must match the field")
    nb = int(mask.sum())
    if nb == 0:
        raise ValueError("empty subset B")
    avg = float(phi.values[mask].sum() / nb)
    lhs = _integral(np.abs(phi.values - avg) ** p, g) ** (1.0 / p)
    gx, gy = _grads(phi.values, g)
    rhs = _integral((gx**2 + gy**2) ** (p / 2.0), g) ** (1.0 / p)
    return float(C * rhs - lhs)


def _min_constant_poincare(phi, B_mask, p) -> float:
    g = phi.grid
    mask = np.asarray(B_mask, dtype=bool)
    avg = float(phi.values[mask].sum() / mask.sum())
    lhs = _integral(np.abs(phi.values - avg) ** p, g) ** (1.0 / p)
    gx, gy = _grads(phi.values, g)
    rhs = _integral((gx**2 + gy**2) ** (p / 2.0), g) ** (1.0 / p)
    if rhs == 0.0:
        return 0.0
    return lhs / rhs


# ----------------------------------------------------------------------
# calibrate-and-hold-out report
# ----------------------------------------------------------------------

@dataclass
class LemmaCheckRow:
    name: str
    constant: float
    worst_gap: float
    passed: bool


def run_lemma_checks(
    corpus: FieldCorpus | None = None,
    a_values: Sequence[float] = (0.5, 1.0, 2.0, 4.0),
    eta: float = 1.0,
    safety: float = 2.0,
    rel_tol: float = 1e-8,
) -> list:
    """Full verification pass; returns one row per inequality check.

    Existential constants are calibrated as `safety` times the largest
    minimal constant over the first half of the corpus, then the gap is
    required to be >= -rel_tol * (RHS scale) on the held-out half.
    """
    corpus = corpus or FieldCorpus()
    pairs = corpus.pairs()
    half = len(pairs) // 2
    cal, hold = pairs[:half], pairs[half:]
    rows = []

    # --- log-Hessian identity convergence on an analytic field ---
    res = []
    for nn in (32, 64, 128):
        gg = make_grid(nn, nn, corpus.lx, corpus.ly)
        phi = ScalarField.from_function(gg, lambda x, y: np.exp(x))
        res.append(log_hessian_identity_residual(phi)[0])
    orders = [math.log2(res[i] / res[i + 1]) for i in range(len(res) - 1)]
    order = min(orders)
    rows.append(LemmaCheckRow("log-hessian identity: convergence order", order, order, order >= 1.8))

    # --- log-Hessian integral estimates over the whole corpus ---
    worst1 = worst2 = float("inf")
    for phi, _ in pairs:
        _, g1, g2 = log_hessian_identity_residual(phi)
        worst1 = min(worst1, g1)
        worst2 = min(worst2, g2)
    rows.append(LemmaCheckRow("log-hessian gradient-power estimate", EST1_CONST, worst1, worst1 >= -rel_tol))
    rows.append(LemmaCheckRow("log-hessian mixed-curvature estimate", EST2_CONST, worst2, worst2 >= -rel_tol))

    # --- entropy-weighted product bound ---
    kmin = 0.0
    for phi, psi in cal:
        for a in a_values:
            kmin = max(kmin, _min_constant_trudinger(phi, psi, a, eta))
    K = safety * kmin if kmin > 0 else 1.0
    worst = float("inf")
    ok = True
    for phi, psi in hold:
        for a in a_values:
            gap = trudinger_gap(phi, psi, a, eta, K)
            scale = abs(gap) + abs(integrate(phi)) * K
            worst = min(worst, gap)
            ok = ok and gap >= -rel_tol * scale
    rows.append(LemmaCheckRow("entropy-weighted product bound", K, worst, ok))

    # --- superlevel entropy bound ---
    L, s0t = 1.0, 1.5
    d_tilde = lambda s: np.asarray(s, dtype=float)  # linear growth clears L above s0t
    kmin = 0.0
    for phi, _ in cal:
        kmin = max(kmin, _min_constant_sublevel(phi, L, s0t, d_tilde, eta))
    K2 = safety * kmin if kmin > 0 else 1.0
    worst = float("inf")
    ok = True
    for phi, _ in hold:
        gap = trudinger_sublevel_gap(phi, L, s0t, d_tilde, eta, K2)
        scale = abs(gap) + K2 * max(integrate(phi) ** 3, 1.0)
        worst = min(worst, gap)
        ok = ok and gap >= -rel_tol * scale
    rows.append(LemmaCheckRow("superlevel entropy bound", K2, worst, ok))

    # --- subset-mean Poincare ---
    rng = np.random.default_rng(corpus.seed + 99)
    grid = corpus.grid
    varpi = 0.25 * grid.area

    def random_mask():
        while True:
            cx, cy = rng.uniform(0.2, 0.8, size=2)
            r = rng.uniform(0.3, 0.45)
            x, y = grid.cell_mesh()
            m = (x - cx * grid.lx) ** 2 + (y - cy * grid.ly) ** 2 < (r * grid.lx) ** 2
            if m.sum() * grid.cell_area >= varpi:
                return m

    p = 2.0
    masks = [random_mask() for _ in pairs]
    cmin = 0.0
    for (phi, _), m in zip(cal, masks[:half]):
        cmin = max(cmin, _min_constant_poincare(phi, m, p))
    C = safety * cmin if cmin > 0 else 1.0
    worst = float("inf")
    ok = True
    for (phi, _), m in zip(hold, masks[half:]):
        gap = poincare_subset_gap(phi, m, p, C)
        gx, gy = _grads(phi.values, grid)
        scale = C * _integral((gx**2 + gy**2) ** (p / 2.0), grid) ** (1.0 / p) + 1e-30
        worst = min(worst, gap)
        ok = ok and gap >= -rel_tol * scale
    rows.append(LemmaCheckRow("subset-mean poincare bound", C, worst, ok))

    # --- windowed-forcing ODE envelope ---
    violations = 0
    worst_margin = float("inf")
    for i in range(100):
        margin = _ode_trajectory_margin(seed=corpus.seed * 1000 + i)
        worst_margin = min(worst_margin, margin)
        if margin < -1e-9:
            violations += 1
    rows.append(LemmaCheckRow("windowed-forcing ode envelope", float(violations), worst_margin, violations == 0))

    # --- doubling-exponent recursion limit ---
    ok = True
    worst = float("inf")
    rng = np.random.default_rng(corpus.seed + 5)
    for i in range(100):
        a = float(rng.uniform(1.0, 3.0))
        b = float(rng.uniform(1.0, 2.0))
        m0 = float(rng.uniform(1.0, 4.0))
        gen = (equality_mk_sequence if i % 2 == 0
               else lambda aa, bb, l0, km: slack_mk_sequence(aa, bb, l0, km, seed=i))
        liminf_est, bound, passed = mk_limit_check(m0, a, b, 30, gen)
        worst = min(worst, bound - liminf_est)
        ok = ok and passed
    rows.append(LemmaCheckRow("doubling-exponent recursion limit", 2.0 * math.sqrt(2.0), worst, ok))
    return rows


def _ode_trajectory_margin(seed: int) -> float:
    """Exact integration of y' + a y = h for piecewise-constant admissible h;
    returns min over time of (envelope - y)."""
    rng = np.random.default_rng(seed)
    a = float(rng.uniform(0.2, 3.0))
    b = float(rng.uniform(0.1, 2.0))
    tau = float(rng.uniform(0.3, 2.0))
    y0 = float(rng.uniform(0.0, 3.0))
    t_end = 12.0
    n_pieces = 240
    dt = t_end / n_pieces
    # pointwise h <= b implies every sliding window average <= b
    h = rng.uniform(0.0, b, size=n_pieces)
    if rng.uniform() < 0.3:
        h[:] = b  # saturated forcing
    y = y0
    t = 0.0
    margin = ode_envelope(y0, a, b, tau, 0.0) - y0
    for k in range(n_pieces):
        decay = math.exp(-a * dt)
        y = y * decay + h[k] / a * (1.0 - decay)
        t += dt
        margin = min(margin, ode_envelope(y0, a, b, tau, t) - y)
    return margin


def format_report(rows: Sequence[LemmaCheckRow]) -> str:
    """Plain-text table: check name, calibrated constant, worst gap, verdict."""
    name_w = max(len(r.name) for r in rows) + 2
    lines = [
        f"{'check':<{name_w}}{'constant':>14}{'worst gap':>16}{'result':>9}",
        "-" * (name_w + 39),
    ]
    for r in rows:
        lines.append(
            f"{r.name:<{name_w}}{r.constant:>14.6g}{r.worst_gap:>16.6g}"
            f"{'PASS' if r.passed else 'FAIL':>9}"
        )
    lines.append("")
    return "\n".join(lines)
