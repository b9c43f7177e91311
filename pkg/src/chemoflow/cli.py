"""Command-line entry point.

Verbs:
    run           advance a configuration, writing the diagnostics CSV
                  (and snapshots when enabled); exit code 0 only if every
                  invariant monitor passed
    sweep-eps     Cauchy study over decreasing regularization strengths
    sweep-grid    refinement study with observed convergence orders
    verify-lemmas run the standalone inequality checks, write the report
    validate      parse + validate a configuration, print violations

The environment variable CHEMOFLOW_THREADS caps transform parallelism
(default 1, which keeps runs bitwise reproducible across machines).
"""

from __future__ import annotations

import argparse
import pathlib
import sys

from .analysis import FieldCorpus, format_report, run_lemma_checks
from .config import ConfigError, parse_config
from .diagnostics import default_coefficients, functional_envelope, record, select_functional
from .grid import integrate
from .io import emit_snapshot, emit_timeseries
from .model import build_truncations
from .operators import PoissonSolver
from .solver import run
from .sweeps import eps_sweep, refinement_sweep


def _load_config(path: str):
    text = pathlib.Path(path).read_text()
    return parse_config(text)


def _monitors(records, initial_mass: float):
    """Evaluate the always-on invariant monitors; returns list of failures."""
    failures = []
    mass_tol = 1e-10 * max(initial_mass, 1e-300)
    if any(abs(r.mass_n - initial_mass) > mass_tol for r in records):
        failures.append("mass conservation drift beyond 1e-10 relative")
    for a, b in zip(records, records[1:]):
        if b.c_max > a.c_max + 1e-12:
            failures.append("signal maximum increased beyond 1e-12")
            break
    if any(r.div_u_max > 1e-8 for r in records):
        failures.append("incompressibility residual above 1e-8")
    if records and records[-1].clamp_mass > 1e-10 * max(initial_mass, 1e-300):
        failures.append("cumulative clamped mass above 1e-10 of initial mass")
    return failures


def _cmd_run(args) -> int:
    cfg = _load_config(args.config)
    outdir = pathlib.Path(args.output or cfg.directory)
    outdir.mkdir(parents=True, exist_ok=True)
    spec = cfg.spec
    coeffs = default_coefficients(spec)
    table = build_truncations(spec, coeffs.s0)
    poisson = PoissonSolver(cfg.grid)
    initial = cfg.initial_state()
    initial_mass = integrate(initial.n)

    records = []
    snaps = []

    def record_sink(state, clamp):
        records.append(record(state, spec, coeffs, table, clamp_mass=clamp))

    sinks = [record_sink]
    if cfg.snapshots:
        sinks.append(lambda state, clamp: snaps.append((state.t, emit_snapshot(state))))

    run(initial, spec, cfg.controls, poisson, sinks=sinks, cadence=cfg.cadence)
    (outdir / "timeseries.csv").write_text(emit_timeseries(records))
    for t, blob in snaps:
        (outdir / f"snapshot_t{t:012.6f}.cns2").write_bytes(blob)

    functional = select_functional(spec, n0_mass=initial_mass)
    report = functional_envelope(records, coeffs, functional=functional)
    print(f"wrote {outdir / 'timeseries.csv'} ({len(records)} records)")
    print(
        f"envelope[{functional}]: feasible={report.feasible} "
        f"mu={report.mu:.4g} Gamma={report.Gamma:.4g} "
        f"nonpos={report.residual_nonpos_fraction:.3f} ok={report.envelope_ok}"
    )
    failures = _monitors(records, initial_mass)
    for f in failures:
        print(f"MONITOR FAIL: {f}", file=sys.stderr)
    if not failures:
        print("all invariant monitors passed")
    return 1 if failures else 0


def _cmd_sweep_eps(args) -> int:
    cfg = _load_config(args.config)
    eps_list = [float(e) for e in args.eps.split(",")]
    d = eps_sweep(cfg, eps_list, args.T)
    print("eps pairs:", [f"{a:g}->{b:g}" for a, b in zip(d.eps_list, d.eps_list[1:])])
    for key in ("n", "c", "u"):
        print(f"d_{key}:", " ".join(f"{v:.6e}" for v in getattr(d, key)))
    dec = all(b < a for seq in (d.n, d.c, d.u) for a, b in zip(seq, seq[1:]))
    print("strictly decreasing:", dec)
    return 0 if dec or len(d.n) < 2 else 1


def _cmd_sweep_grid(args) -> int:
    cfg = _load_config(args.config)
    grids = []
    for part in args.grids.split(";"):
        nx, ny = part.split(",")
        grids.append((int(nx), int(ny)))
    rep = refinement_sweep(cfg, grids, args.T)
    print("grids:", rep.grids)
    for key, ords in rep.orders.items():
        print(f"observed order [{key}]:", " ".join("nan" if o != o else f"{o:.3f}" for o in ords))
    return 0


def _cmd_verify_lemmas(args) -> int:
    corpus = FieldCorpus(n_members=args.members, seed=args.seed)
    rows = run_lemma_checks(corpus)
    text = format_report(rows)
    if args.output:
        pathlib.Path(args.output).write_text(text)
        print(f"wrote {args.output}")
    print(text, end="")
    return 0 if all(r.passed for r in rows) else 1


def _cmd_validate(args) -> int:
    try:
        cfg = _load_config(args.config)
    except ConfigError as exc:
        for v in exc.violations:
            print(f"VIOLATION: {v}", file=sys.stderr)
        return 1
    print(f"config OK: {cfg.grid.nx}x{cfg.grid.ny}, gamma={cfg.spec.gamma}, "
          f"epsilon={cfg.spec.epsilon}, t_end={cfg.controls.t_end}")
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="chemoflow", description=__doc__,
                                     formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="verb", required=True)

    p = sub.add_parser("run", help="run a configuration")
    p.add_argument("config")
    p.add_argument("--output", default=None, help="output directory (default: from config)")
    p.set_defaults(fn=_cmd_run)

    p = sub.add_parser("sweep-eps", help="regularization Cauchy study")
    p.add_argument("config")
    p.add_argument("--eps", default="0.1,0.05,0.025,0.0125")
    p.add_argument("--T", type=float, default=2.0)
    p.set_defaults(fn=_cmd_sweep_eps)

    p = sub.add_parser("sweep-grid", help="refinement study")
    p.add_argument("config")
    p.add_argument("--grids", default="16,16;32,32;64,64")
    p.add_argument("--T", type=float, default=0.1)
    p.set_defaults(fn=_cmd_sweep_grid)

    p = sub.add_parser("verify-lemmas", help="standalone inequality checks")
    p.add_argument("--members", type=int, default=100)
    p.add_argument("--seed", type=int, default=7)
    p.add_argument("--output", default=None, help="report file path")
    p.set_defaults(fn=_cmd_verify_lemmas)

    p = sub.add_parser("validate", help="check a configuration only")
    p.add_argument("config")
    p.set_defaults(fn=_cmd_validate)

    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except ConfigError as exc:
        for v in exc.violations:
            print(f"VIOLATION: {v}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
