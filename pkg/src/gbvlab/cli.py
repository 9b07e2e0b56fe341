"""Command-line driver.

Subcommands: check, spectrum, gbv, ly, mollify-sweep.  Every output file
starts with (or embeds) the config digest and the seed, and reruns with the
same config and seed are byte-identical.  Exit codes: 0 success, 1 failed
assumption or inequality, 2 usage or parse error, 3 numerical tolerance
failure.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from .config import ConfigError, load_config, build_system
from .densities import builtin_density
from .errors import QuadratureToleranceError
from .gbv import gbv_upper
from .maps import lambda_estimates
from .measures import GridDensity
from .spectral import (
    HypothesisRefusalError,
    SolverSettings,
    ly_diagnostic,
    make_report,
)
from .densities import random_step_densities
from .transfer import mollify_sweep, ulam_matrix

EXIT_OK = 0
EXIT_ASSUMPTION = 1
EXIT_USAGE = 2
EXIT_TOLERANCE = 3


def _parser():
    ap = argparse.ArgumentParser(prog="gbvlab",
                                 description="transfer-operator bound laboratory")
    sub = ap.add_subparsers(dest="command", required=True)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True, help="INI experiment file")
    common.add_argument("--beta", type=float, default=None)
    common.add_argument("--cells", type=str, default=None, help="N[,N...]")
    common.add_argument("--nmax", type=int, default=None)
    common.add_argument("--kdepth", type=int, default=None)
    common.add_argument("--ensemble", type=int, default=None)
    common.add_argument("--seed", type=int, default=None)
    common.add_argument("--threads", type=int, default=None)
    common.add_argument("--force", action="store_true")
    common.add_argument("--output", type=str, default=None)
    common.add_argument("--format", choices=("csv", "json"), default=None)
    sub.add_parser("check", parents=[common])
    sub.add_parser("spectrum", parents=[common])
    gp = sub.add_parser("gbv", parents=[common])
    gp.add_argument("--density", type=str, default=None,
                    help="builtin density name or a sample file path")
    sub.add_parser("ly", parents=[common])
    sub.add_parser("mollify-sweep", parents=[common])
    return ap


def _merge_run(cfg, args):
    run = dict(cfg.run)
    for key in ("beta", "nmax", "kdepth", "ensemble", "seed", "threads",
                "output", "format"):
        val = getattr(args, key, None)
        if val is not None:
            run[key] = val
    if args.cells is not None:
        run["cells"] = [int(c) for c in args.cells.split(",") if c]
    if getattr(args, "density", None) is not None:
        run["density"] = args.density
    return run


def _require_seed(run):
    if run.get("seed") is None:
        raise ConfigError("run.seed", "a seed is mandatory for randomized routines")
    return int(run["seed"])


def _header(cfg, run):
    return f"# gbvlab config={cfg.digest()} seed={run.get('seed')}"


def _emit(text, path):
    if path:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def cmd_check(cfg, run):
    system = build_system(cfg)
    hyp = system.hypotheses
    bounds = lambda_estimates(system.bmap, system.weight, run["nmax"],
                              grid=run["grid"],
                              refinement_depth=cfg.assumptions["refinement_depth"])
    lines = [_header(cfg, run)]
    lines.append(f"expansion_inf = {hyp.expansion_inf!r}")
    lines.append(f"holder_uniform = {hyp.holder_uniform!r}")
    lines.append(f"sup_series_total = {hyp.sup_series_total!r} "
                 f"(tail {hyp.tail_sup_sum!r})")
    lines.append(f"fprime_Lp = {hyp.fprime_lp!r} (p = {hyp.p!r})")
    lines.append(f"xi_fprime_sup = {hyp.xi_fprime_sup!r}")
    lines.append(f"lambda1_hat({run['nmax']}) = {float(bounds.lam1[-1])!r}")
    lines.append(f"lambda2_hat({run['nmax']}) = {float(bounds.lam2[-1])!r}")
    for name, ok in hyp.checks.items():
        lines.append(f"check [{name}]: {'pass' if ok else 'FAIL'}")
    lines.append("result: " + ("pass" if hyp.passed else "FAIL"))
    text = "\n".join(lines) + "\n"
    if run["format"] == "json":
        payload = {"meta": {"config": cfg.digest(), "seed": run.get("seed")},
                   "hypotheses": hyp.to_dict(),
                   "lambda1_hat": bounds.lam1.tolist(),
                   "lambda2_hat": bounds.lam2.tolist()}
        text = json.dumps(payload, indent=2, sort_keys=True) + "\n"
    _emit(text, run.get("output"))
    if run.get("output"):
        print(f"check: {'pass' if hyp.passed else 'FAIL'} -> {run['output']}")
    return EXIT_OK if hyp.passed else EXIT_ASSUMPTION


def cmd_spectrum(cfg, run):
    seed = _require_seed(run)
    system = build_system(cfg)
    solver = SolverSettings(seed=seed)
    report = make_report(system, beta=run["beta"], N_list=tuple(run["cells"]),
                         n_max=run["nmax"], solver=solver, grid=run["grid"],
                         refinement_depth=cfg.assumptions["refinement_depth"],
                         force=run.get("force", False),
                         threads=run.get("threads") or 1)
    small = [cells for cells in run["cells"] if cells <= 16]
    if run["format"] == "json":
        payload = {"meta": {"config": cfg.digest(), "seed": seed},
                   "report": report.to_dict(),
                   "ulam": {str(cells): ulam_matrix(system, cells).matrix.tolist()
                            for cells in small}}
        text = json.dumps(payload, indent=2, sort_keys=True) + "\n"
    else:
        parts = [_header(cfg, run), "# table: cocycle_bounds",
                 report.cocycle_csv() + "# table: ritz_values", report.ritz_csv()]
        for cells in small:
            parts.append(f"# table: ulam_matrix\n{ulam_matrix(system, cells).to_csv()}")
        text = "\n".join(parts)
    _emit(text, run.get("output"))
    if run.get("output"):
        print(f"spectrum: rho_bound={report.rho_bound!r} "
              f"ess_bound={report.ess_bound!r} -> {run['output']}")
    return EXIT_OK


def _density_from_spec(spec, cells, seed):
    if spec and ("/" in spec or spec.endswith(".txt") or spec.endswith(".dat")):
        with open(spec, "r", encoding="utf-8") as fh:
            vals = [float(v) for v in fh.read().split()]
        return GridDensity(np.asarray(vals))
    return builtin_density(spec or "constant", cells, seed=seed or 0)


def cmd_gbv(cfg, run):
    cells = run["cells"][0]
    density = _density_from_spec(run.get("density"), cells, run.get("seed"))
    beta = run["beta"] if run["beta"] is not None else 0.5
    est = gbv_upper(density, beta, n_k=run["kdepth"])
    lines = [_header(cfg, run),
             f"value = {est.value!r}",
             f"strategy = {est.family.strategy}",
             "k,tv_term,bv_term"]
    for k, tvt, bvt in est.breakdown:
        lines.append(f"{float(k)!r},{float(tvt)!r},{float(bvt)!r}")
    _emit("\n".join(lines) + "\n", run.get("output"))
    if run.get("output"):
        print(f"gbv: value={est.value!r} strategy={est.family.strategy} "
              f"-> {run['output']}")
    return EXIT_OK


def cmd_ly(cfg, run):
    seed = _require_seed(run)
    system = build_system(cfg)
    beta = run["beta"] if run["beta"] is not None else system.weight.alpha
    rng = np.random.default_rng(seed)
    cells = run["cells"][0]
    ensemble = random_step_densities(rng, cells, run["ensemble"])
    n_list = list(range(1, min(run["nmax"], 4) + 1))
    diag = ly_diagnostic(system, beta, ensemble, n_list, n_k=run["kdepth"])
    if run["format"] == "json":
        payload = {"meta": {"config": cfg.digest(), "seed": seed},
                   "ly": diag.to_dict()}
        text = json.dumps(payload, indent=2, sort_keys=True) + "\n"
    else:
        text = _header(cfg, run) + "\n" + diag.to_csv()
    _emit(text, run.get("output"))
    if run.get("output"):
        print(f"ly: C_n={list(diag.c_fixed)!r} -> {run['output']}")
    return EXIT_OK


def cmd_mollify_sweep(cfg, run):
    system = build_system(cfg)
    rows = mollify_sweep(system.bmap, system.weight, run["eps_list"])
    lines = [_header(cfg, run), "eps,sup_error,sup_derivative"]
    for eps, err, der in rows:
        lines.append(f"{float(eps)!r},{float(err)!r},{float(der)!r}")
    _emit("\n".join(lines) + "\n", run.get("output"))
    return EXIT_OK


_COMMANDS = {
    "check": cmd_check,
    "spectrum": cmd_spectrum,
    "gbv": cmd_gbv,
    "ly": cmd_ly,
    "mollify-sweep": cmd_mollify_sweep,
}


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        run = _merge_run(cfg, args)
        run["force"] = args.force
        return _COMMANDS[args.command](cfg, run)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except HypothesisRefusalError as exc:
        print(f"refused: {exc}", file=sys.stderr)
        return EXIT_ASSUMPTION
    except QuadratureToleranceError as exc:
        print(f"tolerance failure: {exc}", file=sys.stderr)
        return EXIT_TOLERANCE


if __name__ == "__main__":
    raise SystemExit(main())
