"""Command-line driver: ``selab <action> --config FILE [--override section.key=value]... [--out DIR]``.

Each run writes ``<stem>.json`` (deterministic for a given config),
``<stem>.meta.json`` (wall clock, versions), CSV tables where the action
produces them, and PNG figures unless ``[output] plots = false``.

Exit codes: 0 on a completed run (NoSolutionEvidence is a result), 2 on
configuration errors, 3 on solver failures that could not be classified.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import platform
import sys
import time
from pathlib import Path

import numpy as np

from . import config as cfgmod
from .config import ACTIONS, ExperimentConfig
from .continuation import (ATLAS_COLUMNS, SWEEP_COLUMNS, atlas, atlas_rows, blowup_profile, bracket_threshold,
                           fold_scan, solve_problem, sweep, sweep_rows, upclosure_violations, write_csv)
from .diagnostics import expected_membership, fit_boundary_rate, h1_membership, lazer_mckenna_check, linear_bounds_check
from .errors import ConfigError, SelabError
from .operator import eigenpair
from .problem import check_hypotheses
from .solve import DIVERGED, STALLED

log = logging.getLogger("selab")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_SOLVER = 3


class SolverFailure(SelabError):
    """A run ended without a classifiable outcome."""


def thread_cap() -> int:
    raw = os.environ.get("SELAB_THREADS", "")
    if raw.strip():
        try:
            value = int(raw)
        except ValueError:
            raise ConfigError(f"SELAB_THREADS must be an integer, got {raw!r}") from None
        if value < 1:
            raise ConfigError("SELAB_THREADS must be at least 1")
        return value
    return os.cpu_count() or 1


def clean(obj):
    """JSON-safe copy: numpy scalars and arrays to Python, non-finite floats to None."""
    if isinstance(obj, dict):
        return {str(k): clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [clean(v) for v in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else None
    return obj


def dumps(obj) -> str:
    return json.dumps(clean(obj), sort_keys=True, indent=2, allow_nan=False) + "\n"


# -- actions; each returns (payload, tables, figures, unclassified)
# tables: {suffix: (columns, rows)}; figures: {suffix: callable(path)}


def _threshold(cfg: ExperimentConfig, mesh) -> tuple[float, float]:
    factor = cfg.problem.critical_lambda_factor
    if factor is None:
        raise ConfigError(f"no closed-form threshold for family {cfg.problem.family!r} with these parameters")
    lam1 = eigenpair(mesh).lambda1
    return lam1, lam1 * factor


def act_solve(cfg, plots):
    mesh = cfg.mesh()
    rep = solve_problem(cfg.problem, mesh)
    payload = {"report": rep.to_dict(), "nodes": mesh.nodes}
    tables, figs = {}, {}
    if rep.converged:
        tables["profile"] = (["x", "u"], [[x, u] for x, u in zip(mesh.nodes, rep.solution)])
        if plots:
            from . import plotting

            figs["profile"] = lambda p: plotting.profile(p, mesh.nodes, rep.solution, title=rep.status)
    return payload, tables, figs, rep.status in (STALLED, DIVERGED)


def act_sweep(cfg, plots):
    mesh = cfg.mesh()
    p = cfg.params
    results = sweep(cfg.problem, p["param"], p["grid"], mesh, warm_start=p["warm_start"])
    payload = {"param": p["param"], "nodes": mesh.nodes,
               "points": [{"value": v, "report": r.to_dict()} for v, r in results]}
    tables = {"sweep": (SWEEP_COLUMNS, sweep_rows(results))}
    figs = {}
    if plots:
        from . import plotting

        figs["sweep"] = lambda path: plotting.sweep(path, [v for v, _ in results], [r.sup_norm for _, r in results],
                                                    [r.status for _, r in results], p["param"])
    return payload, tables, figs, False


def act_bracket(cfg, plots):
    mesh = cfg.mesh()
    p = cfg.params
    br = bracket_threshold(cfg.problem, p["param"], p["lo"], p["hi"], mesh, width_tol=p["width_tol"])
    payload = {"bracket": br.to_dict()}
    reference = None
    factor = cfg.problem.critical_lambda_factor if p["param"] in ("lambda", "lam") else None
    if factor is not None:
        lam1 = eigenpair(mesh).lambda1
        reference = lam1 * factor
        payload["discrete_lambda1"] = lam1
        payload["closed_form_threshold"] = reference
        payload["contains_closed_form"] = br.contains(reference)
    tables = {"history": (["probe", "value", "status"], [[k, v, s] for k, (v, s) in enumerate(br.history)])}
    figs = {}
    if plots:
        from . import plotting

        figs["bracket"] = lambda path: plotting.bracket(path, br.history, br.lo, br.hi, p["param"], reference)
    return payload, tables, figs, False


def act_atlas(cfg, plots):
    mesh = cfg.mesh()
    p = cfg.params
    cells = atlas(cfg.problem, p["lambda_grid"], p["mu_grid"], mesh, workers=thread_cap())
    viol = upclosure_violations(cells)
    verdicts = [c.verdict for c in cells]
    payload = {"cells": [c.to_dict() for c in cells], "upclosure_violations": len(viol),
               "violating_pairs": [[a.to_dict(), b.to_dict()] for a, b in viol],
               "solvable": verdicts.count("Solvable"), "unsolvable": verdicts.count("Unsolvable"),
               "unresolved": verdicts.count("Unresolved")}
    tables = {"atlas": (ATLAS_COLUMNS, atlas_rows(cells))}
    figs = {}
    if plots:
        from . import plotting

        figs["atlas"] = lambda path: plotting.atlas(path, p["lambda_grid"], p["mu_grid"], verdicts)
    return payload, tables, figs, False


def act_blowup(cfg, plots):
    mesh = cfg.mesh()
    p = cfg.params
    lam1, lam_star = _threshold(cfg, mesh)
    lams = lam_star * np.asarray(p["factors"], dtype=float)
    prof = blowup_profile(cfg.problem, lams, mesh, window=p["window"])
    payload = {"profile": prof.to_dict(), "factors": p["factors"], "discrete_lambda1": lam1, "lambda_star": lam_star}
    rows = [[f, lam, m, s] for f, lam, m, s in zip(p["factors"], lams, prof.minima, prof.statuses)]
    tables = {"blowup": (["factor", "lambda", "window_min", "status"], rows)}
    figs = {}
    if plots:
        from . import plotting

        sols = sweep(cfg.problem, "lambda", lams, mesh)

        def draw(path):
            good = [(f, r.solution) for f, (_, r) in zip(p["factors"], sols) if r.converged]
            plotting.curves(path, mesh.nodes, [u for _, u in good], [f"{f:g} lambda*" for f, _ in good], logy=True)

        figs["profiles"] = draw
    unclassified = any(s in (STALLED, DIVERGED) for s in prof.statuses)
    return payload, tables, figs, unclassified


def act_fold(cfg, plots):
    p = cfg.params
    dim = cfg.dimension if cfg.geometry == "radial" else 1
    rep = fold_scan(cfg.problem, p["lambda_grid"], p["centers"], dimension=dim, rel_width=p["rel_width"])
    payload = {"fold": rep.to_dict(), "pattern": "".join(str(c) for c in rep.counts), "dimension": dim}
    tables = {"counts": (["lambda", "count"], [[v, c] for v, c in zip(rep.lambdas, rep.counts)])}
    figs = {}
    if plots:
        from . import plotting

        figs["fold"] = lambda path: plotting.fold(path, rep.lambdas, rep.counts, rep.lambda0_bracket,
                                                  rep.lambda1_bracket)
    return payload, tables, figs, False


def act_rate(cfg, plots):
    mesh = cfg.mesh()
    rep = solve_problem(cfg.problem, mesh)
    if not rep.converged:
        raise SolverFailure(f"rate fit needs a converged solution, got {rep.status} ({rep.reason})")
    fit = fit_boundary_rate(mesh, rep.solution, cfg.params["window"])
    bounds = linear_bounds_check(mesh, rep.solution)
    payload = {"rate": fit.to_dict(), "linear_bounds": bounds.to_dict(), "report": rep.to_dict(include_solution=False)}
    if cfg.params["expected"] is not None:
        exp = cfg.params["expected"]
        payload["expected_sigma"] = exp
        payload["relative_error"] = abs(fit.sigma - exp) / abs(exp)
    d = mesh.boundary_distance
    tables = {"profile": (["x", "d", "u"], [[x, di, u] for x, di, u in zip(mesh.nodes, d, rep.solution)])}
    figs = {}
    if plots:
        from . import plotting

        figs["loglog"] = lambda path: plotting.loglog_fit(path, d, rep.solution, fit.sigma, fit.constant, fit.window)
    return payload, tables, figs, False


def act_h1(cfg, plots):
    meshes = [cfg.mesh(n) for n in cfg.params["n_list"]]
    verdict = h1_membership(cfg.problem, meshes)
    payload = {"membership": verdict.to_dict()}
    prob = cfg.problem
    if prob.family == "weighted_convection" and prob.g.form == "power":
        pc = prob.coefficients.get("p")
        beta = pc.beta if pc is not None and pc.kind == "distance_power" else 0.0
        payload["expected_verdict"] = expected_membership(beta, prob.g.blowup_exponent)
    rows = [[n, h, e, l1] for n, h, e, l1 in zip(verdict.node_counts, verdict.first_cells, verdict.seminorm_sequence,
                                                   verdict.laplacian_l1)]
    tables = {"energies": (["n", "first_cell", "dirichlet_energy", "laplacian_l1"], rows)}
    figs = {}
    if plots:
        from . import plotting

        figs["energies"] = lambda path: plotting.refinement(path, [1.0 / h for h in verdict.first_cells],
                                                            verdict.seminorm_sequence, "1 / first cell",
                                                            "Dirichlet energy", verdict.loglog_slope)
    return payload, tables, figs, False


def act_hyp(cfg, plots):
    return {"hypotheses": check_hypotheses(cfg.problem).to_dict()}, {}, {}, False


def act_eig(cfg, plots):
    mesh = cfg.mesh()
    pair = eigenpair(mesh, tol=cfg.params["tol"])
    payload = {"eigenpair": pair.to_dict(), "nodes": mesh.nodes}
    tables = {"phi": (["x", "phi"], [[x, v] for x, v in zip(mesh.nodes, pair.phi)])}
    figs = {}
    if plots:
        from . import plotting

        figs["phi"] = lambda path: plotting.profile(path, mesh.nodes, pair.phi, title=f"lambda1 = {pair.lambda1:.10g}",
                                                    ylabel="phi1")
    return payload, tables, figs, False


def act_lm(cfg, plots):
    pair = eigenpair(cfg.mesh())
    results = [lazer_mckenna_check(pair, float(s), cfg.params["levels"]) for s in cfg.params["s_values"]]
    payload = {"checks": [r.to_dict() for r in results], "lambda1": pair.lambda1}
    rows = [[r.s, r.verdict, r.values[-1], r.relative_changes[-1]] for r in results]
    tables = {"lm": (["s", "verdict", "finest_value", "last_relative_change"], rows)}
    figs = {}
    if plots:
        from . import plotting

        figs["lm"] = lambda path: plotting.integrability(path, results[0].node_counts,
                                                         {f"s={r.s:g}": r.values for r in results})
    return payload, tables, figs, False


HANDLERS = {"solve": act_solve, "sweep": act_sweep, "bracket": act_bracket, "atlas": act_atlas,
            "blowup": act_blowup, "fold": act_fold, "rate": act_rate, "h1": act_h1, "hyp": act_hyp,
            "eig": act_eig, "lm-check": act_lm}


def run(cfg: ExperimentConfig, out_dir: str | None = None) -> tuple[int, dict]:
    """Execute a parsed config and write its artifacts. Returns (exit code, payload)."""
    out = Path(out_dir if out_dir is not None else cfg.out_dir)
    t0 = time.perf_counter()
    payload, tables, figs, unclassified = HANDLERS[cfg.action](cfg, cfg.plots)
    elapsed = time.perf_counter() - t0
    result = {"action": cfg.action, "config": cfg.resolved(), "result": payload}
    out.mkdir(parents=True, exist_ok=True)
    stem = cfg.name
    (out / f"{stem}.json").write_text(dumps(result), encoding="utf-8")
    for suffix, (columns, rows) in tables.items():
        write_csv(out / f"{stem}_{suffix}.csv", columns, rows)
    for suffix, draw in figs.items():
        draw(out / f"{stem}_{suffix}.png")
    meta = {"wall_clock_seconds": elapsed, "python": platform.python_version(), "numpy": np.__version__,
            "threads": thread_cap(), "finished_unix": time.time()}
    (out / f"{stem}.meta.json").write_text(dumps(meta), encoding="utf-8")
    log.info("wrote %s", out / f"{stem}.json")
    return (EXIT_SOLVER if unclassified else EXIT_OK), result


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="selab", description="Singular elliptic problem laboratory.")
    ap.add_argument("action", choices=ACTIONS + ("verify",))
    ap.add_argument("--config", help="experiment file (not needed for verify)")
    ap.add_argument("--override", action="append", default=[], metavar="SECTION.KEY=VALUE",
                    help="replace one config entry; repeatable")
    ap.add_argument("--out", help="output directory (overrides [output] dir)")
    ap.add_argument("--configs", help="verify: directory of bundled configs to run instead of the packaged ones")
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.action == "verify":
        from .verify import verify_all

        try:
            ok = verify_all(args.configs, out_dir=args.out, overrides=args.override)
        except ConfigError as exc:
            print(f"config error: {exc}", file=sys.stderr)
            return EXIT_CONFIG
        return EXIT_OK if ok else 1
    if not args.config:
        print("config error: --config is required", file=sys.stderr)
        return EXIT_CONFIG
    try:
        cfg = cfgmod.load(args.config, args.override, default_action=args.action)
        if cfg.action != args.action:
            raise ConfigError(f"config declares action {cfg.action!r}, command line asked for {args.action!r}")
        thread_cap()
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        code, _ = run(cfg, args.out)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SelabError as exc:
        print(f"solver error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    if code == EXIT_SOLVER:
        print("solver error: run ended Stalled or Diverged without classification", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
