"""``ph-eq`` command-line interface.

Exit codes: 0 success (or Certified), 2 invalid model, input or domain,
3 solver failure, 4 Refuted, 5 Inconclusive. ``acceptance`` exits 1 when
any criterion fails.
"""

import argparse
import csv
import json
import logging
import sys

import numpy as np

from . import __version__
from . import certificate as cert
from . import degroot_friedkin as df
from . import lotka_volterra as lv
from . import matrix, sis
from .box import ManifoldBox, grid_points
from .dynamics import IntegratorConfig, detect_convergence, fit_decay_rate, integrate
from .errors import ConvergenceError, DomainError, IntegrationError, PreconditionError
from .models import ModelError, load_model

REPORT_SCHEMA = "ph-eq/run-report"
REPORT_SCHEMA_VERSION = 1

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_INPUT = 2
EXIT_SOLVER = 3
EXIT_REFUTED = 4
EXIT_INCONCLUSIVE = 5

VERDICT_EXIT = {
    cert.Verdict.CERTIFIED: EXIT_OK,
    cert.Verdict.REFUTED: EXIT_REFUTED,
    cert.Verdict.INCONCLUSIVE: EXIT_INCONCLUSIVE,
}

log = logging.getLogger("ph_eq")


class UsageError(Exception):
    """Bad flag combination or a model that does not fit the command."""


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if np.isfinite(v) else str(v)
    return obj


def _vector(text):
    try:
        return np.array([float(v) for v in text.split(",")])
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _setting(args, loaded, name, default):
    value = getattr(args, name, None)
    if value is not None:
        return value
    return loaded.experiment.get(name, default)


def _report(args, loaded, results):
    return {
        "schema": REPORT_SCHEMA,
        "schema_version": REPORT_SCHEMA_VERSION,
        "tool_version": __version__,
        "command": args.argv,
        "input": {"path": args.model, "sha256": loaded.sha256, "kind": loaded.kind},
        "results": results,
    }


def _emit_json(args, payload):
    text = json.dumps(_jsonable(payload), indent=2)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text + "\n")
    else:
        print(text)


def _emit_csv(out, header, rows):
    fh = open(out, "w", newline="") if out else sys.stdout
    try:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([repr(float(v)) for v in row])
    finally:
        if out:
            fh.close()


# analyze ------------------------------------------------------------------------

def _analyze_sis(loaded, tol):
    net, ctrl = loaded.model, loaded.control
    pp = matrix.perron_pair(net.linearization())
    results = {"threshold": sis.epidemic_threshold(net), "perron_vector": pp.vector}
    x_star = sis.solve_endemic(net, None, tol)
    results["endemic_equilibrium"] = x_star
    if x_star is not None:
        results["residual"] = float(np.max(np.abs(sis.drift(net, x_star))))
        box, eps = sis.build_invariant_box(net)
        results["invariant_box"] = {"epsilon": eps, **box.to_dict()}
        results["kamke_muller"] = sis.kamke_muller_check(net, box)
        results["hurwitz_at_equilibrium"] = matrix.is_hurwitz(sis.jacobian(net, x_star)).verdict
    if ctrl is not None:
        results["controls"] = ctrl.to_dicts()
        if x_star is not None:
            comp = sis.control_comparison(net, ctrl, tol)
            results["controlled_equilibrium"] = comp.x_bar_star
            results["comparison"] = comp.to_dict()
            if not ctrl.is_zero and np.any(ctrl.h(comp.x_bar_star) > 0):
                path = sis.continuation_alpha(net, ctrl, tol=tol)
                results["continuation"] = [{"alpha": p.alpha, "x": p.x, "slope": p.slope}
                                           for p in path]
    return results


def _analyze_glv(loaded, tol):
    model, region, bound = loaded.model, loaded.region, loaded.bound
    x_star = lv.solve_feasible(model, region, tol=tol)
    results = {"feasible_equilibrium": x_star, "region": region.to_dict(),
               "bound_hurwitz": matrix.is_hurwitz(bound.A).verdict}
    if x_star is not None:
        results["residual"] = float(np.max(np.abs(lv.lv_drift(model, x_star))))
        results["goh"] = lv.check_goh(model, bound, [x_star]).to_dict()
        results["hurwitz_at_equilibrium"] = matrix.is_hurwitz(lv.lv_jacobian(model, x_star)).verdict
    return results


def _analyze_df(loaded, tol):
    model = loaded.model
    fp = df.iterate_fixed_point(model, np.full(model.n, 1.0 / model.n), tol=tol)
    return {"fixed_point": fp.x, "iterations": fp.iterations, "residual": fp.residual,
            "contraction_radius": df.contraction_radius(model, fp.x),
            "contraction_certified": df.certify_contraction(model, fp.x)}


ANALYZERS = {"sis": _analyze_sis, "glv": _analyze_glv, "df": _analyze_df}


def cmd_analyze(args):
    loaded = load_model(args.model)
    tol = args.tol if args.tol is not None else 1e-12
    results = ANALYZERS[loaded.kind](loaded, tol)
    _emit_json(args, _report(args, loaded, results))
    return EXIT_OK


# certify ------------------------------------------------------------------------

def certification_problem(loaded):
    """``(field, jacobian, box)`` for an SIS or GLV model file."""
    if loaded.kind == "sis":
        net, ctrl = loaded.model, loaded.control
        if sis.epidemic_threshold(net) <= 0:
            raise UsageError("certify needs s(-D + B) > 0 (no endemic equilibrium otherwise)")
        box, _ = sis.build_invariant_box(net, ctrl)
        return (sis.vector_field(net, ctrl), lambda x: sis.jacobian(net, x, ctrl), box)
    if loaded.kind == "glv":
        model = loaded.model
        box = loaded.region.inscribed_box(model.n)
        return (lv.vector_field(model), lambda x: lv.lv_jacobian(model, x), box)
    raise UsageError("certify needs an sis or glv model")


def cmd_certify(args):
    loaded = load_model(args.model)
    field, jac, box = certification_problem(loaded)
    config = cert.CertifyConfig(
        seeds_per_dim=_setting(args, loaded, "seeds_per_dim", 5),
        tol=_setting(args, loaded, "tol", 1e-10),
        samples_per_face=_setting(args, loaded, "samples_per_face", 64),
        oracle=not args.no_oracle,
        oracle_grid=args.oracle_grid,
    )
    report = cert.certify_uniqueness(field, jac, box, config)
    results = {"box": box.to_dict(), "certificate": report.to_dict()}
    _emit_json(args, _report(args, loaded, results))
    return VERDICT_EXIT[report.verdict]


# simulate -----------------------------------------------------------------------

def cmd_simulate(args):
    loaded = load_model(args.model)
    x0 = args.x0 if args.x0 is not None else loaded.experiment.get("x0")
    if x0 is None:
        raise UsageError("no initial state: pass --x0 or set experiment.x0")
    x0 = np.asarray(x0, dtype=float)
    if x0.shape != (loaded.n,):
        raise UsageError(f"x0 must have {loaded.n} components")
    T = _setting(args, loaded, "T", 100.0)

    if loaded.kind == "df":
        model = loaded.model
        x = df.check_point(model, x0)
        steps = int(T)
        rows = [[0, *x]]
        for k in range(1, steps + 1):
            x = df.map_G(model, x)
            if k % args.stride == 0 or k == steps:
                rows.append([k, *x])
        header = ["t"] + [f"x_{i + 1}" for i in range(model.n)]
        _emit_csv(args.out, header, rows)
        return EXIT_OK

    if loaded.kind == "sis":
        sis.drift(loaded.model, x0, loaded.control)  # domain check
        field = sis.vector_field(loaded.model, loaded.control)
    else:
        lv.lv_drift(loaded.model, x0)
        field = lv.vector_field(loaded.model)
    config = IntegratorConfig(T=float(T), method=_setting(args, loaded, "method", "rk45"),
                              step=_setting(args, loaded, "step", 0.01),
                              output_stride=args.stride)
    traj = integrate(field, x0, config)
    limit = detect_convergence(traj, field)
    if limit is not None:
        log.info("settled at %s, fitted decay rate %s", limit.tolist(), fit_decay_rate(traj, limit))
    header, rows = traj.to_csv_rows()
    _emit_csv(args.out, header, rows)
    return EXIT_OK


# vector-field -------------------------------------------------------------------

def cmd_vector_field(args):
    loaded = load_model(args.model)
    if loaded.kind == "df" or loaded.n != 2:
        raise UsageError("vector-field needs a two-dimensional sis or glv model")
    grid = _setting(args, loaded, "grid", 25)
    if grid < 1:
        raise UsageError("--grid must be >= 1")
    if loaded.kind == "sis":
        box = ManifoldBox.cube(0.0, 1.0, 2)
        field = sis.vector_field(loaded.model, loaded.control)
    else:
        box = loaded.region.inscribed_box(2)
        field = lv.vector_field(loaded.model)
    pts = grid_points(box, grid)
    vals = field(pts)
    _emit_csv(args.out, ["x1", "x2", "dx1", "dx2"], np.hstack([pts, vals]))
    return EXIT_OK


# acceptance ---------------------------------------------------------------------

def cmd_acceptance(args):
    from .acceptance import CRITERIA, run_criterion

    wanted = args.only or sorted(CRITERIA)
    unknown = [k for k in wanted if k not in CRITERIA]
    if unknown:
        raise UsageError(f"unknown criteria: {unknown}")
    ok = True
    for k in wanted:
        res = run_criterion(k)
        print(res.line(), flush=True)
        ok &= res.passed
    return EXIT_OK if ok else EXIT_FAILED


# entry point --------------------------------------------------------------------

def build_parser():
    parser = argparse.ArgumentParser(
        prog="ph-eq",
        description="Certify existence, uniqueness and stability of equilibria of SIS, "
                    "Lotka-Volterra and DeGroot-Friedkin models. "
                    "PH_EQ_THREADS caps the worker threads.",
        epilog="exit codes: 0 ok/Certified, 2 invalid input, 3 solver failure, "
               "4 Refuted, 5 Inconclusive",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--log-level", default="WARNING",
                        choices=["DEBUG", "INFO", "WARNING", "ERROR"],
                        help="logging verbosity (default WARNING)")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, fn, help_text):
        p = sub.add_parser(name, help=help_text, description=help_text)
        p.set_defaults(func=fn)
        if name != "acceptance":
            p.add_argument("model", help="model JSON file")
        return p

    p = add("analyze", cmd_analyze, "threshold, equilibria, comparison and stability report (JSON)")
    p.add_argument("--tol", type=float, help="residual tolerance (default 1e-12)")
    p.add_argument("--out", help="write the JSON report here instead of stdout")

    p = add("certify", cmd_certify, "index-sum uniqueness certificate (JSON)")
    p.add_argument("--seeds", dest="seeds_per_dim", type=int,
                   help="Newton seeds per dimension (default 5)")
    p.add_argument("--tol", type=float, help="Newton residual tolerance (default 1e-10)")
    p.add_argument("--samples-per-face", type=int, help="boundary samples per face (default 64)")
    p.add_argument("--oracle-grid", type=int, default=200,
                   help="grid size per dimension for the brute-force cross-check (default 200)")
    p.add_argument("--no-oracle", action="store_true", help="skip the grid cross-check")
    p.add_argument("--out", help="write the JSON report here instead of stdout")

    p = add("simulate", cmd_simulate, "integrate a trajectory and write CSV (t, x_1..x_n)")
    p.add_argument("--x0", type=_vector, help="initial state, comma separated")
    p.add_argument("--T", type=float, help="time horizon; iteration count for df (default 100)")
    p.add_argument("--method", choices=["rk45", "rk4"], help="integrator (default rk45)")
    p.add_argument("--step", type=float, help="rk4 step size (default 0.01)")
    p.add_argument("--stride", type=int, default=1, help="keep every k-th step (default 1)")
    p.add_argument("--out", help="CSV path (default stdout)")

    p = add("vector-field", cmd_vector_field, "drift on a grid x grid lattice, CSV x1,x2,dx1,dx2")
    p.add_argument("--grid", type=int, help="lattice points per axis (default 25)")
    p.add_argument("--out", help="CSV path (default stdout)")

    p = add("acceptance", cmd_acceptance, "run the acceptance criteria, one line each")
    p.add_argument("--only", type=int, nargs="+", help="criterion numbers to run")
    return parser


def main(argv=None):
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    args = parser.parse_args(argv)
    args.argv = ["ph-eq", *argv]
    logging.basicConfig(level=args.log_level, format="%(levelname)s %(name)s: %(message)s")
    if getattr(args, "stride", 1) < 1:
        parser.error("--stride must be >= 1")
    try:
        return args.func(args)
    except (ModelError, DomainError, PreconditionError, UsageError, ValueError, OSError) as exc:
        print(f"ph-eq: error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (ConvergenceError, IntegrationError) as exc:
        print(f"ph-eq: solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
