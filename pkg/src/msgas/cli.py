"""Command-line entry point ``gas``."""

import argparse
import logging
import sys
from pathlib import Path

from . import conservation as cons
from . import dynamics as dyn
from . import geometry as geo
from . import multisymplectic as ms
from . import runtime
from . import scenario as scn
from . import storage
from . import thermo as th

log = logging.getLogger("msgas")

EXIT_OK = 0
EXIT_BREACH = 1
EXIT_ERROR = 2


def _breaches(laws, rows, tolerance):
    out = []
    for row in rows:
        for name, value in zip(laws, row[1:]):
            tol = tolerance(name)
            if not value <= tol:
                out.append((row[0], name, value, tol))
    return out


def _report_breaches(breaches):
    for t, name, value, tol in breaches:
        print(f"breach: t={storage.format_float(t)} {name}={value:.3e} > {tol:.3e}", file=sys.stderr)


def cmd_run(args):
    sc = scn.load_scenario(args.scenario)
    model = scn.build_model(sc)
    state = scn.build_state(sc, model)
    laws = [name for name in cons.LAWS if name in sc.diagnostics.laws]
    threads = runtime.thread_limit()
    initial = state

    def diagnostics(s):
        return cons.diagnostic_row(model, s, initial, laws, threads)

    result = dyn.run(
        model, state, sc.time.dt, sc.time.t_end, sc.time.integrator,
        diagnostics=diagnostics, cadence=sc.diagnostics.cadence,
    )
    out = Path(args.out or sc.output.dir)
    out.mkdir(parents=True, exist_ok=True)
    storage.write_csv(out / "diagnostics.csv", laws, result.rows)
    storage.save_snapshot(out / "snapshot.json", sc, result.state, result.initial, result.steps)
    print(f"wrote {out / 'diagnostics.csv'} ({len(result.rows)} rows) and {out / 'snapshot.json'}")
    if result.error:
        print(f"run stopped early: {result.error}", file=sys.stderr)
        return EXIT_ERROR
    if args.strict:
        breaches = _breaches(laws, result.rows, sc.diagnostics.tolerance)
        _report_breaches(breaches)
        if breaches:
            return EXIT_BREACH
    return EXIT_OK


def cmd_check(args):
    sc, model, state, initial = storage.load_snapshot(args.snapshot)
    laws = [name for name in cons.LAWS if name in sc.diagnostics.laws]
    threads = runtime.thread_limit()
    rows = [cons.diagnostic_row(model, s, initial, laws, threads) for s in (initial, state)]
    print(storage.csv_header(laws))
    for row in rows:
        print(storage.csv_line(row))
    if args.strict:
        breaches = _breaches(laws, rows, sc.diagnostics.tolerance)
        _report_breaches(breaches)
        if breaches:
            return EXIT_BREACH
    return EXIT_OK


def cmd_forms_verify(args):
    from .forms import fluid

    thermo = th.ThermoModel()
    report = fluid.ideal_closure_check(args.n, thermo, trials=args.trials, tol=args.tol, seed=args.seed)
    width = max(len(k) for k in report.residuals)
    print(f"{'identity':<{width}}  {'residual':>12}  {'scale':>12}  status")
    for label, res, scale, ok in report.rows():
        print(f"{label:<{width}}  {res:12.3e}  {scale:12.3e}  {'ok' if ok else 'FAIL'}")
    print(f"n={args.n} trials={args.trials} tol={args.tol:g}: {'pass' if report.passed else 'FAIL'}")
    return EXIT_OK if report.passed else EXIT_BREACH


def cmd_ms_residual(args):
    sc, model, state, _ = storage.load_snapshot(args.snapshot)
    layout = ms.ZLayout(model.n, state.K_lin)
    K = ms.build_K(layout)
    worst = 0.0
    print(f"t={storage.format_float(state.t)}")
    print(f"{'block':<8}{'rhs':>14}{'eulerian':>14}")
    rhs = ms.residual_blocks(ms.ms_residual(ms.assemble_jet(model, state, layout), K, model.thermo, model.potential), layout)
    eul = ms.residual_blocks(
        ms.ms_residual(ms.assemble_jet(model, state, layout, "eulerian"), K, model.thermo, model.potential), layout
    )
    for name in rhs:
        print(f"{name:<8}{rhs[name]:14.3e}{eul[name]:14.3e}")
        worst = max(worst, rhs[name])
    if args.strict and not worst <= args.tol:
        print(f"breach: rhs-jet residual {worst:.3e} > {args.tol:.3e}", file=sys.stderr)
        return EXIT_BREACH
    return EXIT_OK


def build_parser():
    p = argparse.ArgumentParser(prog="gas", description="Lagrangian gas dynamics with structure diagnostics.")
    p.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="integrate a scenario and write diagnostics.csv and snapshot.json")
    r.add_argument("scenario")
    r.add_argument("--out", help="output directory (overrides the scenario)")
    r.add_argument("--strict", action="store_true", help="exit 1 if any residual exceeds its tolerance")
    r.set_defaults(func=cmd_run)

    c = sub.add_parser("check", help="recompute diagnostics of a snapshot's initial and final states")
    c.add_argument("snapshot")
    c.add_argument("--strict", action="store_true")
    c.set_defaults(func=cmd_check)

    f = sub.add_parser("forms-verify", help="check closure of the ideal of forms at random points")
    f.add_argument("--n", type=int, choices=(2, 3), default=2)
    f.add_argument("--trials", type=int, default=100)
    f.add_argument("--tol", type=float, default=1e-10)
    f.add_argument("--seed", type=int, default=0)
    f.set_defaults(func=cmd_forms_verify)

    m = sub.add_parser("ms-residual", help="multi-symplectic residual blocks of a snapshot")
    m.add_argument("snapshot")
    m.add_argument("--strict", action="store_true")
    m.add_argument("--tol", type=float, default=1e-10, help="bound on the rhs-jet residual")
    m.set_defaults(func=cmd_ms_residual)
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "forms-verify" and args.trials < 1:
            parser.error("--trials must be positive")
        runtime.thread_limit()
        return args.func(args)
    except (scn.ScenarioError, storage.SnapshotError, ValueError, OSError, geo.SingularMapError) as err:
        print(f"gas: error: {err}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
