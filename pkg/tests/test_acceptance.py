"""Acceptance suite for the benchmark configuration.

One test per acceptance criterion, each printing a PASS/FAIL line.  The
benchmark run R: unit square, 64x64, quadratic porous-medium diffusion,
gamma = 0.5, unit isotropic sensitivity, buoyancy (0, -1), eps = 0.05,
c0 = 1 + 0.5 cos(pi x) cos(pi y), unit-mass Gaussian density bump,
u0 = 0, horizon T = 10, record cadence 0.05.
"""

import math

import numpy as np
import pytest

from chemoflow.analysis import (
    FieldCorpus,
    log_hessian_identity_residual,
    run_lemma_checks,
)
from chemoflow.config import parse_config, reference_config_text
from chemoflow.diagnostics import default_coefficients, functional_envelope, record, select_functional
from chemoflow.grid import ScalarField, integrate, make_grid
from chemoflow.io import emit_snapshot, emit_timeseries
from chemoflow.model import build_truncations
from chemoflow.operators import PoissonSolver
from chemoflow.solver import run
from chemoflow.sweeps import eps_sweep


def _report(name: str, ok: bool, detail: str):
    print(f"ACCEPTANCE {name}: {'PASS' if ok else 'FAIL'} ({detail})")
    assert ok, f"{name}: {detail}"


def _execute_reference(gamma=0.5, t_end=10.0, **overrides):
    cfg = parse_config(reference_config_text(gamma=gamma, t_end=t_end, **overrides))
    spec = cfg.spec
    coeffs = default_coefficients(spec)
    table = build_truncations(spec, coeffs.s0)
    poisson = PoissonSolver(cfg.grid)
    records = []
    snapshots = []

    def sink(state, clamp):
        records.append(record(state, spec, coeffs, table, clamp_mass=clamp))
        if abs(state.t - round(state.t)) < 1e-9:  # one snapshot per unit time
            snapshots.append(emit_snapshot(state))

    run(cfg.initial_state(), spec, cfg.controls, poisson, sinks=[sink], cadence=cfg.cadence)
    return cfg, coeffs, records, emit_timeseries(records), snapshots


@pytest.fixture(scope="module")
def reference(request):
    return _execute_reference()


@pytest.fixture(scope="module")
def reference_gamma07():
    return _execute_reference(gamma=0.7)


class TestReferenceRun:
    def test_mass_conservation(self, reference):
        _, _, records, _, _ = reference
        m0 = records[0].mass_n
        drift = max(abs(r.mass_n - m0) / m0 for r in records)
        clamped = records[-1].clamp_mass
        ok = drift <= 1e-10 and clamped <= 1e-10 * m0
        _report("mass-conservation", ok, f"max drift {drift:.3e}, clamped {clamped:.3e}")

    def test_signal_maximum_principle(self, reference):
        _, _, records, _, _ = reference
        worst = max(b.c_max - a.c_max for a, b in zip(records, records[1:]))
        _report("signal-max-principle", worst <= 1e-12, f"worst per-step increase {worst:.3e}")

    def test_signal_lower_bound(self, reference):
        _, _, records, _, _ = reference
        cmin0 = records[0].c_min
        kprime = 0.0
        ok = True
        margin = float("inf")
        for r in records:
            kprime = max(kprime, r.n_max)
            bound = cmin0 * math.exp(-kprime * r.t) * (1.0 - 1e-6)
            ok = ok and r.c_min >= bound
            margin = min(margin, r.c_min / bound)
        _report("signal-lower-bound", ok, f"min(c_min/bound) {margin:.6f}")

    def test_incompressibility(self, reference):
        _, _, records, _, _ = reference
        worst = max(r.div_u_max for r in records)
        _report("incompressibility", worst <= 1e-8, f"max divergence {worst:.3e}")

    def test_signal_gradient_quartic_bounded(self, reference):
        # boundedness of the quartic signal-gradient integral on the late
        # half of the run: running max grows < 1% past its value at t = 5,
        # or the quantity has decayed so far below its peak that relative
        # growth is below measurement precision
        _, _, records, _, _ = reference
        tail = [r for r in records if r.t >= 5.0 - 1e-9]
        base = tail[0].I_c4
        runmax = max(r.I_c4 for r in tail)
        peak = max(r.I_c4 for r in records)
        growth = (runmax - base) / base if base > 0 else 0.0
        decayed = runmax <= 1e-9 * peak
        _report(
            "signal-gradient-quartic-bounded",
            growth < 0.01 or decayed,
            f"growth {growth:.3e}, tail max {runmax:.3e} vs peak {peak:.3e}",
        )

    def test_density_bounded(self, reference):
        _, _, records, _, _ = reference
        tail = [r for r in records if r.t >= 5.0 - 1e-9]
        base = tail[0].n_max
        runmax = max(r.n_max for r in tail)
        growth = (runmax - base) / base
        _report("density-bounded", growth < 0.01, f"growth {growth:.3e}")

    def test_energy_envelope(self, reference, reference_gamma07):
        _, coeffs, records, _, _ = reference
        rep = functional_envelope(records, coeffs, functional="F", n_mu=20, n_gamma=20)
        ok_f = rep.feasible and rep.residual_nonpos_fraction >= 0.99

        cfg7, coeffs7, records7, _, _ = reference_gamma07
        fn = select_functional(cfg7.spec, n0_mass=records7[0].mass_n)
        rep7 = functional_envelope(records7, coeffs7, functional=fn, n_mu=20, n_gamma=20)
        ok_g = fn == "G" and rep7.feasible and rep7.residual_nonpos_fraction >= 0.99
        _report(
            "energy-envelope",
            ok_f and ok_g,
            f"F: mu={rep.mu:.3g} Gamma={rep.Gamma:.3g} frac={rep.residual_nonpos_fraction:.3f}; "
            f"G: mu={rep7.mu:.3g} Gamma={rep7.Gamma:.3g} frac={rep7.residual_nonpos_fraction:.3f}",
        )

    def test_window_averaged_dissipation(self, reference):
        _, _, records, _, _ = reference
        ts = [r.t for r in records]
        details = []
        ok = True
        for key in ("I_cq", "I_Dlog"):
            vals = [getattr(r, key) for r in records]
            averages = []
            for i, t in enumerate(ts):
                if t < 1.0 - 1e-9:
                    continue
                idx = [j for j, tt in enumerate(ts) if t - 1.0 - 1e-12 < tt <= t + 1e-12]
                acc = sum(
                    0.5 * (vals[a] + vals[b]) * (ts[b] - ts[a]) for a, b in zip(idx, idx[1:])
                )
                averages.append((t, acc))
            t_mid = 0.5 * (averages[0][0] + averages[-1][0])
            runmax_mid = max(v for t, v in averages if t <= t_mid)
            runmax_end = max(v for _, v in averages)
            growth = (runmax_end - runmax_mid) / runmax_mid
            ok = ok and growth < 0.01
            details.append(f"{key} growth {growth:.3e}")
        _report("window-averaged-dissipation", ok, "; ".join(details))


class TestExactSolutions:
    def test_uniform_state(self):
        cfg = parse_config(
            reference_config_text(
                t_end=1.0,
                n0="constant: value=1.0",
                c0="constant: value=1.0",
                cadence=0.1,
            )
        )
        final = run(cfg.initial_state(), cfg.spec, cfg.controls, PoissonSolver(cfg.grid))
        dt = cfg.controls.dt_max
        c_err = abs(final.c.values.max() / math.exp(-1.0) - 1.0)
        u_max = max(np.abs(final.u.ux).max(), np.abs(final.u.uy).max())
        n_err = np.abs(final.n.values - 1.0).max()
        ok = c_err <= 5 * dt and u_max <= 1e-10 and n_err <= 1e-12
        _report(
            "uniform-state-exact",
            ok,
            f"c rel err {c_err:.3e} (tol {5*dt:.2e}), |u| {u_max:.2e}, |n-1| {n_err:.2e}",
        )


class TestStandaloneInequalities:
    def test_log_hessian_identity(self):
        residuals = []
        for nn in (32, 64, 128):
            g = make_grid(nn, nn, 1.0, 1.0)
            phi = ScalarField.from_function(g, lambda x, y: np.exp(x))
            residuals.append(log_hessian_identity_residual(phi)[0])
        orders = [math.log2(a / b) for a, b in zip(residuals, residuals[1:])]
        worst1 = worst2 = float("inf")
        for phi in FieldCorpus(n_members=100).positive_fields():
            _, g1, g2 = log_hessian_identity_residual(phi)
            worst1 = min(worst1, g1)
            worst2 = min(worst2, g2)
        ok = min(orders) >= 1.8 and worst1 >= -1e-8 and worst2 >= -1e-8
        _report(
            "log-hessian-identity",
            ok,
            f"orders {['%.2f' % o for o in orders]}, worst gaps {worst1:.3e}, {worst2:.3e}",
        )

    def test_ode_envelope_domination(self):
        from chemoflow.analysis import ode_envelope

        violations = 0
        for i in range(100):
            rng = np.random.default_rng(31000 + i)
            a = rng.uniform(0.2, 3.0)
            b = rng.uniform(0.1, 2.0)
            tau = rng.uniform(0.3, 2.0)
            y0 = rng.uniform(0.0, 3.0)
            n_pieces, t_end = 240, 12.0
            dt = t_end / n_pieces
            h = rng.uniform(0.0, b, size=n_pieces)
            if i % 4 == 0:
                h[:] = b
            y, t = y0, 0.0
            for k in range(n_pieces):
                decay = math.exp(-a * dt)
                y = y * decay + h[k] / a * (1.0 - decay)
                t += dt
                if y > ode_envelope(y0, a, b, tau, t) + 1e-9:
                    violations += 1
        _report("ode-envelope-domination", violations == 0, f"{violations} violations / 100 trajectories")

    def test_recursion_limit(self):
        from chemoflow.analysis import equality_mk_sequence, mk_limit_check, slack_mk_sequence

        closed = lambda a, b, l0, km: np.array([2.0**k * math.log(2.0) for k in range(km + 1)])
        liminf_est, bound, ok_closed = mk_limit_check(2.0, 1.0, 1.0, 40, closed)
        failures = 0 if ok_closed else 1
        rng = np.random.default_rng(88)
        for i in range(100):
            a = float(rng.uniform(1.0, 3.5))
            b = float(rng.uniform(1.0, 2.5))
            m0 = float(rng.uniform(1.0, 5.0))
            gen = (
                equality_mk_sequence
                if i % 2
                else (lambda aa, bb, l0, km: slack_mk_sequence(aa, bb, l0, km, seed=2000 + i))
            )
            if not mk_limit_check(m0, a, b, 30, gen)[2]:
                failures += 1
        _report(
            "recursion-limit",
            failures == 0,
            f"closed-form liminf {liminf_est:.3f} <= bound {bound:.3f}; failures {failures}",
        )

    def test_calibrated_inequality_gaps(self):
        rows = run_lemma_checks(FieldCorpus(n_members=100))
        wanted = ("entropy-weighted product bound", "superlevel entropy bound",
                  "subset-mean poincare bound")
        picked = [r for r in rows if r.name in wanted]
        assert len(picked) == len(wanted)
        ok = all(r.passed for r in picked)
        detail = "; ".join(f"{r.name}: K={r.constant:.3g} worst gap {r.worst_gap:.3e}" for r in picked)
        _report("calibrated-inequality-gaps", ok, detail)


class TestHarness:
    def test_eps_cauchy(self):
        base = parse_config(reference_config_text(t_end=10.0))
        d = eps_sweep(base, [0.1, 0.05, 0.025, 0.0125], T=10.0)
        ok = all(
            all(b < a for a, b in zip(seq, seq[1:])) and all(v > 0 for v in seq)
            for seq in (d.n, d.c, d.u)
        )
        _report(
            "eps-cauchy",
            ok,
            f"d_n {['%.3e' % v for v in d.n]}, d_c {['%.3e' % v for v in d.c]}, "
            f"d_u {['%.3e' % v for v in d.u]}",
        )

    def test_determinism(self, reference):
        _, _, _, csv_first, snaps_first = reference
        _, _, _, csv_second, snaps_second = _execute_reference()
        ok = csv_first == csv_second and snaps_first == snaps_second
        _report(
            "determinism",
            ok,
            f"CSV identical: {csv_first == csv_second}; "
            f"snapshots identical: {snaps_first == snaps_second} ({len(snaps_first)} blobs)",
        )
