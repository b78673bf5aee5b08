"""Command-line entry point: ``dlsphere <command> [options]``.

Exit codes: 0 success, 1 usage or input error, 2 numerical failure,
3 partial result. ``--config file.json`` supplies option defaults (keys are
option names with dashes or underscores); flags given on the command line
win over it.
"""

import argparse
import datetime
import json
import os
import sys

import numpy as np

from dlsphere import __version__, _backend
from dlsphere import adm as adm_mod
from dlsphere import geometry, io, metrics, model, precond, solver
from dlsphere.errors import (
    ContractViolation,
    DegenerateInputError,
    DiagnosticUnavailable,
    NumericalFailure,
    ParameterError,
    ParseError,
    PartialResultError,
    RecoveryFailure,
    SingularInputError,
)

EXIT_OK, EXIT_USAGE, EXIT_NUMERICAL, EXIT_PARTIAL = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _floats(text):
    return [float(t) for t in text.split(",") if t.strip()]


def _build_parser():
    top = _Parser(prog="dlsphere", description="Complete dictionary recovery over the sphere.")
    top.add_argument("--version", action="version", version=__version__)
    sub = top.add_subparsers(dest="command", parser_class=_Parser)

    def cmd(name, help_text, stochastic):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", help="JSON file of option defaults")
        p.add_argument("--out", help="output path")
        p.add_argument("--deterministic", action="store_true", help="omit timestamps from JSON output")
        if stochastic:
            p.add_argument("--seed", type=int, help="random seed (required)")
        return p

    p = cmd("generate", "sample a synthetic instance into a directory", True)
    p.add_argument("--n", type=int)
    p.add_argument("--p", type=int)
    p.add_argument("--theta", type=float)
    p.add_argument("--dictionary", choices=model.DICTIONARY_KINDS, default="orthogonal")
    p.add_argument("--kappa", type=float)
    p.add_argument("--coef-model", choices=model.VARIANTS, default="bg")
    p.add_argument("--sigma-offdiag", type=float, default=model.DEFAULT_SIGMA_OFFDIAG)
    p.add_argument("--gzip", action="store_true", help="write .csv.gz matrices")

    p = cmd("precondition", "precondition an observation matrix", False)
    p.add_argument("--y")
    p.add_argument("--theta", type=float)
    p.add_argument("--ybar-out", help="CSV path for the preconditioned data")
    p.add_argument("--a0", help="dictionary CSV, enables the perturbation diagnostic")
    p.add_argument("--x0", help="coefficient CSV, enables the perturbation diagnostic")

    p = cmd("solve", "one trust-region run on the sphere", True)
    p.add_argument("--y")
    p.add_argument("--mu", type=float, default=0.01)
    p.add_argument("--theta", type=float, help="precondition with this theta first")
    p.add_argument("--q0", help="CSV start point (random from --seed otherwise)")
    p.add_argument("--max-iters", type=int, default=500)
    p.add_argument("--trace", action="store_true", help="include the iteration trace")

    p = cmd("recover", "full recovery pipeline", True)
    p.add_argument("--y")
    p.add_argument("--theta", type=float)
    p.add_argument("--mu", type=float, default=0.01)
    p.add_argument("--max-restarts", type=int)
    p.add_argument("--dedup-tol", type=float, default=0.1)
    p.add_argument("--force", action="store_true", help="allow theta outside (0, 1/2)")

    p = cmd("landscape", "landscape verification, expectations or surface export", True)
    p.add_argument("--mode", choices=("verify", "expectation", "surface"), default="verify")
    p.add_argument("--x", help="CSV data seen through the chart (verify/surface)")
    p.add_argument("--n", type=int, default=3)
    p.add_argument("--p", type=int, default=10_000)
    p.add_argument("--theta", type=float)
    p.add_argument("--mu", type=float, default=0.05)
    p.add_argument("--samples", type=int, default=100, help="samples per region (verify)")
    p.add_argument("--margin", type=float, default=0.0)
    p.add_argument("--w", type=_floats, help="comma-separated point (expectation)")
    p.add_argument("--num-mc", type=int, default=100_000)
    p.add_argument("--resolution", type=int, default=81)
    p.add_argument("--coef-model", choices=model.VARIANTS, default="bg")
    p.add_argument("--sigma-offdiag", type=float, default=model.DEFAULT_SIGMA_OFFDIAG)

    p = cmd("adm", "alternating minimization and dispersion experiment", True)
    p.add_argument("--y", help="data CSV")
    p.add_argument("--pgm", help="image whose patches form the data")
    p.add_argument("--patch", type=int, default=8)
    p.add_argument("--center", action="store_true")
    p.add_argument("--unit-norm", action="store_true")
    p.add_argument("--lam", type=float, default=2.0)
    p.add_argument("--restarts", type=int, default=1)
    p.add_argument("--max-iters", type=int, default=adm_mod.DEFAULT_MAX_ITERS)
    p.add_argument("--tol", type=float, default=adm_mod.DEFAULT_TOL)

    p = cmd("align", "aligned error of an estimate against a reference dictionary", False)
    p.add_argument("--ahat", help="recovery report JSON or matrix CSV")
    p.add_argument("--a0", help="reference dictionary CSV")
    p.add_argument("--no-normalize", action="store_true")
    return top


REQUIRED = {
    "generate": ("n", "p", "theta", "out"),
    "precondition": ("y", "theta"),
    "solve": ("y",),
    "recover": ("y", "theta"),
    "landscape": ("theta",),
    "adm": (),
    "align": ("ahat", "a0"),
}


def _apply_config(parser, argv):
    """Re-parse with defaults from ``--config`` so explicit flags still win."""
    args = parser.parse_args(argv)
    if args.command is None:
        raise UsageError("a command is required")
    if getattr(args, "config", None):
        try:
            with open(args.config, encoding="utf-8") as fh:
                cfg = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config {args.config}: {exc}") from None
        if not isinstance(cfg, dict):
            raise UsageError("config must be a JSON object")
        subparser = parser._subparsers._group_actions[0].choices[args.command]
        known = {a.dest for a in subparser._actions}
        defaults = {}
        for key, value in cfg.items():
            dest = key.replace("-", "_")
            if dest not in known or dest in ("config", "help"):
                raise UsageError(f"unknown config key {key!r} for {args.command}")
            defaults[dest] = value
        subparser.set_defaults(**defaults)
        args = parser.parse_args(argv)
    need = list(REQUIRED[args.command])
    if hasattr(args, "seed") and not (args.command == "landscape" and args.mode == "surface"):
        need.append("seed")
    missing = [k for k in need if getattr(args, k, None) is None]
    if missing:
        raise UsageError(f"{args.command}: missing required option(s): " + ", ".join("--" + m.replace("_", "-") for m in missing))
    return args


def _envelope(args, payload):
    out = {"command": args.command, "version": __version__, "backend": _backend.backend_name(), "result": payload}
    if not args.deterministic:
        out["created"] = datetime.datetime.now(datetime.timezone.utc).isoformat()
    return out


def _emit(args, payload):
    doc = _envelope(args, payload)
    if args.out:
        io.write_json(args.out, doc)
    else:
        sys.stdout.write(io.dumps(doc))


def _coef_model(args):
    if args.coef_model == "bg":
        return model.CoefficientModel.bg(args.theta)
    if args.coef_model == "independent_uniform":
        return model.CoefficientModel.independent_uniform(args.theta)
    return model.CoefficientModel(args.coef_model, args.theta, args.sigma_offdiag)


def _cmd_generate(args):
    inst = model.make_instance(args.n, args.p, args.theta, args.seed, args.dictionary, args.kappa, _coef_model(args))
    os.makedirs(args.out, exist_ok=True)
    ext = ".csv.gz" if args.gzip else ".csv"
    for name, mat in (("A0", inst.a0), ("X0", inst.x0), ("Y", inst.y)):
        io.write_matrix(os.path.join(args.out, name + ext), mat)
    meta = inst.metadata()
    if not args.deterministic:
        meta["created"] = datetime.datetime.now(datetime.timezone.utc).isoformat()
    io.write_json(os.path.join(args.out, "meta.json"), meta)
    print(f"wrote instance n={inst.n} p={inst.p} to {args.out}")


def _cmd_precondition(args):
    y = io.read_matrix(args.y)
    pre = precond.precondition(y, args.theta)
    payload = {"n": y.shape[0], "p": y.shape[1], "theta": pre.theta_used, "clamp_count": pre.clamp_count}
    if args.a0 and args.x0:
        try:
            payload["xi_norm"] = precond.perturbation_norm(pre.ybar, io.read_matrix(args.a0), io.read_matrix(args.x0))
        except DiagnosticUnavailable as exc:
            payload["xi_norm"] = None
            payload["xi_note"] = str(exc)
    if args.ybar_out:
        io.write_matrix(args.ybar_out, pre.ybar)
        payload["ybar"] = args.ybar_out
    _emit(args, payload)


def _cmd_solve(args):
    y = io.read_matrix(args.y)
    data = precond.precondition(y, args.theta).ybar if args.theta is not None else y
    opts = solver.TrmOptions(max_iters=args.max_iters, seed=args.seed)
    if args.q0:
        q0 = io.read_matrix(args.q0).ravel()
        q0 = q0 / np.linalg.norm(q0)
    else:
        q0 = solver.random_unit(data.shape[0], args.seed, 0)
    res = solver.trm_solve(data, args.mu, q0, opts)
    _emit(args, {"mu": args.mu, "options": opts.to_dict(), "solver_result": res.to_dict(include_trace=args.trace)})


def _cmd_recover(args):
    y = io.read_matrix(args.y)
    opts = solver.TrmOptions(seed=args.seed)
    params = {"theta": args.theta, "mu": args.mu, "seed": args.seed, "max_restarts": args.max_restarts, "dedup_tol": args.dedup_tol}
    try:
        rep = solver.recover_dictionary(y, args.theta, args.mu, opts, args.max_restarts, args.dedup_tol, args.force)
    except PartialResultError as exc:
        ms = exc.report
        _emit(
            args,
            {
                "params": params,
                "partial": True,
                "message": str(exc),
                "restarts_used": ms.restarts_used if ms else None,
                "distinct_directions_found": len(exc.results),
                "directions": [r.q_star.tolist() for r in exc.results],
            },
        )
        raise
    _emit(args, {"params": params, "partial": False, "report": rep.to_dict()})
    print(f"recovered {rep.distinct_directions_found} directions in {rep.restarts_used} restarts", file=sys.stderr)


def _cmd_landscape(args):
    mdl = _coef_model(args)
    if args.mode == "surface":
        seed = 0 if args.seed is None else args.seed
        cfg = geometry.SurfaceConfig(n=args.n, resolution=args.resolution, mu=args.mu, model=mdl, num_mc=args.num_mc, seed=seed)
        if args.x:
            cfg.source, cfg.x = "matrix", io.read_matrix(args.x)
        if not args.out:
            raise UsageError("landscape --mode surface needs --out")
        rows = geometry.export_surface(cfg, args.out)
        print(f"wrote {len(rows)} grid points to {args.out}")
        return
    if args.mode == "verify":
        if args.x:
            x = io.read_matrix(args.x)
        else:
            x = model.sample_coefficients(args.n, args.p, mdl, args.seed)
        rep = geometry.verify_landscape(x, args.mu, args.theta, args.samples, args.seed, margin=args.margin)
        _emit(args, rep.to_dict())
        return
    if args.w is None:
        raise UsageError("landscape --mode expectation needs --w")
    est = geometry.expectation_mc(np.array(args.w), args.theta, args.mu, args.num_mc, args.seed, model=mdl)
    _emit(args, {"w": args.w, "theta": args.theta, "mu": args.mu, "seed": args.seed, "estimate": est.to_dict()})


def _cmd_adm(args):
    if (args.y is None) == (args.pgm is None):
        raise UsageError("adm needs exactly one of --y and --pgm")
    if args.y:
        y = io.read_matrix(args.y)
    else:
        y = io.extract_patches(io.read_pgm(args.pgm), args.patch, center=args.center, unit_norm=args.unit_norm)
    if args.restarts >= 2:
        disp = adm_mod.dispersion_experiment(y, args.lam, args.restarts, args.max_iters, args.seed, tol=args.tol)
        _emit(args, {"lam": args.lam, "seed": args.seed, "dispersion": disp.to_dict()})
    else:
        res = adm_mod.adm_learn(y, args.lam, seed=args.seed, max_iters=args.max_iters, tol=args.tol)
        _emit(args, {"lam": args.lam, "seed": args.seed, "adm_result": res.to_dict(include_matrices=True)})


def _load_ahat(path):
    if str(path).endswith(".json"):
        doc = io.read_json(path)
        for key in ("result", "report"):
            if isinstance(doc, dict) and key in doc:
                doc = doc[key]
        if not isinstance(doc, dict) or "a_hat" not in doc:
            raise ParseError(f"{path}: no a_hat field found")
        return np.array(doc["a_hat"], dtype=float)
    return io.read_matrix(path)


def _cmd_align(args):
    al = metrics.signed_perm_align(_load_ahat(args.ahat), io.read_matrix(args.a0), normalize=not args.no_normalize)
    print(f"aligned_error={al.error_fro:.6e}")
    if args.out:
        io.write_json(args.out, _envelope(args, al.to_dict()))


COMMANDS = {
    "generate": _cmd_generate,
    "precondition": _cmd_precondition,
    "solve": _cmd_solve,
    "recover": _cmd_recover,
    "landscape": _cmd_landscape,
    "adm": _cmd_adm,
    "align": _cmd_align,
}


def main(argv=None):
    argv = sys.argv[1:] if argv is None else list(argv)
    parser = _build_parser()
    try:
        args = _apply_config(parser, argv)
        COMMANDS[args.command](args)
    except SystemExit as exc:  # --help / --version
        return int(exc.code or 0)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except PartialResultError as exc:
        print(f"partial result: {exc}", file=sys.stderr)
        return EXIT_PARTIAL
    except (NumericalFailure, SingularInputError, RecoveryFailure, DegenerateInputError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (ParameterError, ContractViolation, ParseError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
