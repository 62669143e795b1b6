"""Run the bundled experiments and report each quantitative claim as PASS or FAIL.

Each claim names the configs it needs, runs them through the CLI driver and
compares the measured values with the expected ones.
"""

from __future__ import annotations

import math
import sys
import tempfile
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Callable

import numpy as np

from . import config as cfgmod
from .cli import run
from .continuation import solve_problem, sweep
from .diagnostics import EnergyBoundParams, energy_bound_check, reciprocal_residual, convergence_orders
from .errors import ConfigError
from .mesh import build_mesh
from .operator import eigenpair
from .problem import CoefficientSpec, FSpec, GSpec, ProblemInstance
from .solve import exp_transform_solve, solve_singular
from .solve.inequality import ExpTransformConfig, check_inequality, psi_argmax
from .solve.shooting import shoot_radial

PI2 = math.pi**2


@dataclass
class Outcome:
    ok: bool
    measured: str
    expected: str


class Runner:
    def __init__(self, config_dir: Path, out_dir: Path, overrides):
        self.config_dir, self.out_dir, self.overrides = config_dir, out_dir, list(overrides or ())
        self.cache: dict = {}

    def __call__(self, name: str, extra=()) -> dict:
        key = (name, tuple(extra))
        if key not in self.cache:
            path = self.config_dir / f"{name}.cfg"
            if not path.exists():
                raise ConfigError(f"missing bundled config {path.name}")
            cfg = cfgmod.load(path, self.overrides + list(extra))
            cfg.plots = False
            cfg.stem = "_".join([name] + [e.replace("=", "-").replace(".", "_") for e in extra])
            _, result = run(cfg, str(self.out_dir))
            self.cache[key] = result["result"]
        return self.cache[key]


def _pla(m: float = 1.0) -> ProblemInstance:
    return ProblemInstance("pla", GSpec.power(0.5), FSpec.linear(m), {"a": CoefficientSpec.constant(1.0)})


def claim_eigen(run_cfg) -> Outcome:
    lam = run_cfg("eig")["eigenpair"]["lambda1"]
    errs = [abs(eigenpair(build_mesh("interval", n)).lambda1 - PI2) for n in (251, 501, 1001)]
    orders = convergence_orders(errs)
    rel = abs(lam - PI2) / PI2
    ok = rel <= 1e-4 and all(abs(o - 2) <= 0.3 for o in orders)
    return Outcome(ok, f"rel err {rel:.2e}, orders {orders[0]:.3f}, {orders[1]:.3f}", "rel err <= 1e-4, order 2 +- 0.3")


def _bracket(res, target, width):
    b = res["bracket"]
    ok = b["lo"] <= target <= b["hi"] and b["relative_width"] <= width
    return ok, f"[{b['lo']:.5f}, {b['hi']:.5f}] width {b['relative_width']:.4f}"


def claim_pla_threshold(run_cfg) -> Outcome:
    ok1, m1 = _bracket(run_cfg("bracket-pla-m1"), PI2, 0.02)
    ok2, m2 = _bracket(run_cfg("bracket-pla-m2"), PI2 / 2, 0.02)
    return Outcome(ok1 and ok2, f"m=1 {m1}; m=2 {m2}", "contains pi^2 and pi^2/2, width <= 2%")


def claim_blowup(run_cfg) -> Outcome:
    res = run_cfg("blowup-pla")["profile"]
    ref = run_cfg("blowup-pla", ("mesh.n=4001",))["profile"]
    ratio, oracle = res["growth_ratio"], ref["growth_ratio"]
    ok = res["strictly_increasing"] and ratio is not None and abs(ratio - oracle) <= 0.2 * oracle
    mins = ", ".join(f"{v:.4f}" for v in res["window_min"])
    return Outcome(ok, f"minima {mins}; ratio {ratio:.4f}", f"increasing, ratio within 20% of {oracle:.4f} (n=4001)")


def claim_linear_rate(run_cfg) -> Outcome:
    a = run_cfg("rate-pla")
    b = run_cfg("rate-pla", ("mesh.n=2001",))
    sigma = a["rate"]["sigma"]
    la, lb = a["linear_bounds"], b["linear_bounds"]
    stable = all(abs(lb[k] - la[k]) <= 0.2 * abs(la[k]) for k in ("c1", "c2"))
    ok = 0.9 <= sigma <= 1.1 and la["status"] == "Bounded" and lb["status"] == "Bounded" and stable
    return Outcome(ok, f"sigma {sigma:.4f}; c1 {la['c1']:.4f}/{lb['c1']:.4f}, c2 {la['c2']:.4f}/{lb['c2']:.4f}",
                   "sigma in [0.9, 1.1], (c1, c2) stable within 20%")


def claim_ppart_threshold(run_cfg) -> Outcome:
    ok1, m1 = _bracket(run_cfg("bracket-ppart-a0"), PI2, 0.05)
    ok2, m2 = _bracket(run_cfg("bracket-ppart-a1"), PI2 / 2, 0.05)
    return Outcome(ok1 and ok2, f"a=0 {m1}; a=1 {m2}", "contains pi^2 and pi^2/2, width <= 5%")


def claim_cross_solver(run_cfg) -> Outcome:
    mesh = build_mesh("interval", 1001)
    lam = 0.25 * eigenpair(mesh).lambda1
    prob = ProblemInstance("ppart", GSpec.power(0.5), mu=1.0, lam=lam)
    a = exp_transform_solve(prob, mesh)
    b = solve_singular(prob, mesh)
    if not (a.converged and b.converged):
        return Outcome(False, f"statuses {a.status} / {b.status}", "both Converged, sup diff < 1e-3")
    diff = float(np.max(np.abs(a.solution - b.solution)))
    return Outcome(diff < 1e-3, f"sup diff {diff:.2e}", "< 1e-3")


def claim_decay_rates(run_cfg) -> Outcome:
    parts, ok = [], True
    for name, target in (("rate-wc-0-2", 2 / 3), ("rate-wc-1-3", 3 / 4)):
        sigma = run_cfg(name)["rate"]["sigma"]
        ok &= abs(sigma - target) <= 0.1 * target
        parts.append(f"{sigma:.4f}")
    return Outcome(ok, "sigma " + ", ".join(parts), "within 10% of 2/3 and 3/4")


def claim_h1(run_cfg) -> Outcome:
    a = run_cfg("h1-wc-0-2")["membership"]
    b = run_cfg("h1-wc-0-4")["membership"]
    ok = a["verdict"] == "Member" and b["verdict"] == "NonMember" and abs(b["loglog_slope"] - 0.2) <= 0.1
    return Outcome(ok, f"{a['verdict']} (slope {a['loglog_slope']:.4f}), {b['verdict']} (slope {b['loglog_slope']:.4f})",
                   "Member; NonMember with slope 0.2 +- 0.1")


def claim_nonexistence(run_cfg) -> Outcome:
    seen = []
    for lam in (1, 10):
        for mu in (1, 10):
            rep = run_cfg("solve-plamu-nonint", (f"problem.lambda={lam}", f"problem.mu={mu}"))["report"]
            seen.append(rep["status"] == "NoSolutionEvidence" and rep["meta"].get("trigger") == "g_integral_divergent")
    return Outcome(all(seen), f"{sum(seen)}/4 NoSolutionEvidence via g_integral_divergent", "4/4")


def claim_atlas(run_cfg) -> Outcome:
    res = run_cfg("atlas-plamu")
    ok = res["solvable"] > 0 and res["unsolvable"] > 0 and res["upclosure_violations"] == 0
    return Outcome(ok, f"{res['solvable']} solvable, {res['unsolvable']} unsolvable, {res['unresolved']} unresolved, "
                       f"{res['upclosure_violations']} violations", "both regions nonempty, 0 violations")


def claim_fold(run_cfg) -> Outcome:
    res = run_cfg("fold-shi")
    f = res["fold"]
    (a0, b0), (a1, b1) = f["lambda0_bracket"], f["lambda1_bracket"]
    prob = ProblemInstance("radial_shi", GSpec.power(0.5), FSpec.power(0.5))
    low = len(shoot_radial(prob, a0 / 2))
    high = len(shoot_radial(prob, 2 * b1))
    widths = ((b0 - a0) / a0, (b1 - a1) / a1)
    ok = b0 < a1 and max(widths) <= 0.01 and low == 0 and high == 1 and res["pattern"].strip("0").startswith("2")
    return Outcome(ok, f"lambda0 in [{a0:.4f}, {b0:.4f}], lambda1 in [{a1:.4f}, {b1:.4f}], counts {low}/{high}",
                   "lambda0 < lambda1, widths <= 1%, pattern 0/2/1")


def claim_lazer_mckenna(run_cfg) -> Outcome:
    checks = run_cfg("lm-check")["checks"]
    want = {0.25: "Finite", 0.5: "Finite", 0.75: "Finite", 1.25: "Divergent", 1.5: "Divergent", 2.0: "Divergent"}
    got = {c["s"]: c["verdict"] for c in checks}
    return Outcome(all(got.get(s) == v for s, v in want.items()),
                   ", ".join(f"{s:g}:{got.get(s)}" for s in sorted(want)), "Finite for s < 1, Divergent above")


def claim_inequality(run_cfg) -> Outcome:
    rep = check_inequality(samples=100_000, seed=0)
    worst = max(abs(psi_argmax(a, c) - ExpTransformConfig.majorant(a, c).s_bar)
                for a, c in ((0.5, 1.0), (1.0, 2.0), (1.5, 0.3)))
    return Outcome(rep["violations"] == 0 and worst <= 1e-6,
                   f"{rep['violations']} violations in {rep['samples']}, argmax err {worst:.1e}",
                   "0 violations, argmax within 1e-6")


def claim_reciprocal(run_cfg) -> Outcome:
    errs = []
    for n in (201, 401, 801, 1601):
        mesh = build_mesh("interval", n)
        x = mesh.nodes
        with np.errstate(divide="ignore"):
            u = 1.0 / (x * (1.0 - x))
        errs.append(reciprocal_residual(mesh, u, 3.0, 0.1).sup)
    order = math.log2(errs[0] / errs[-1]) / 3
    return Outcome(order >= 1.8, f"order {order:.3f}", ">= 1.8")


def claim_energy(run_cfg) -> Outcome:
    mesh = build_mesh("interval", 1001)
    pair = eigenpair(mesh)
    prob = _pla()
    params = EnergyBoundParams.from_problem(prob)
    if not params.verify(prob.f, prob.g):
        return Outcome(False, "majorants fail on samples", "majorants hold")
    factors = (0.5, 0.9, 0.99, 0.999)
    margins, held = [], 0
    results = sweep(prob, "lambda", [f * pair.lambda1 for f in factors], mesh)
    converged = [(lam, r) for lam, r in results if r.converged]
    for lam, rep in converged:
        chk = energy_bound_check(mesh, rep.solution, params, lam, 1.0, pair)
        held += chk.holds
        margins.append(chk.margin / chk.bound)
    ok = held == len(converged) > 0
    return Outcome(ok, f"{held}/{len(converged)} hold, min relative margin {min(margins, default=math.nan):.3e}",
                   "Holds at every Converged point")


def _monotone_violations(fields) -> float:
    worst = 0.0
    for a, b in zip(fields, fields[1:]):
        worst = max(worst, float(np.max(a - b)))
    return worst


def claim_monotonicity(run_cfg) -> Outcome:
    slack = 1e-9
    worst = 0.0
    mesh = build_mesh("interval", 1001)
    lam1 = eigenpair(mesh).lambda1
    grid = lam1 * np.array([0.1, 0.3, 0.5, 0.7, 0.9, 0.95, 0.99])
    for m in (1.0, 2.0):
        sols = [r.solution for _, r in sweep(_pla(m), "lambda", grid / m, mesh) if r.converged]
        worst = max(worst, _monotone_violations(sols))
    for g, scale in ((GSpec.power(0.5), 1.0), (GSpec.power_plus_constant(0.5, 1.0), 0.5)):
        prob = ProblemInstance("ppart", g, mu=1.0)
        sols = [r.solution for _, r in sweep(prob, "lambda", scale * grid, mesh) if r.converged]
        worst = max(worst, _monotone_violations(sols))
    coarse = build_mesh("interval", 401)
    vals = [1e-4, 0.5, 1, 2, 4, 8, 16, 32]
    template = ProblemInstance("plamu", GSpec.power(0.5), FSpec.power(0.5),
                               {"K": CoefficientSpec.constant(1.0), "h": CoefficientSpec.constant(1.0)})
    table = {}
    for lam in vals:
        for mu in vals:
            rep = solve_problem(template.with_param("lambda", lam).with_param("mu", mu), coarse)
            if rep.converged:
                table[(lam, mu)] = rep.solution
    for (lam, mu), u in table.items():
        i, j = vals.index(lam), vals.index(mu)
        for key in ((vals[i + 1], mu) if i + 1 < len(vals) else None, (lam, vals[j + 1]) if j + 1 < len(vals) else None):
            if key in table:
                worst = max(worst, float(np.max(u - table[key])))
    return Outcome(worst <= slack, f"worst decrease {worst:.2e}", f"<= {slack:g}")


CLAIMS: list[tuple[str, str, Callable]] = [
    ("1", "principal eigenvalue", claim_eigen),
    ("2", "pla threshold lambda1/m", claim_pla_threshold),
    ("3", "blow-up below threshold", claim_blowup),
    ("4", "linear boundary rate", claim_linear_rate),
    ("5", "gradient-term threshold", claim_ppart_threshold),
    ("6", "exp transform vs direct", claim_cross_solver),
    ("7", "weighted decay rates", claim_decay_rates),
    ("8", "H1 membership", claim_h1),
    ("9", "non-integrable absorption", claim_nonexistence),
    ("10", "existence atlas", claim_atlas),
    ("11", "fold in one dimension", claim_fold),
    ("12", "integrability of phi1^-s", claim_lazer_mckenna),
    ("13", "power inequality", claim_inequality),
    ("14", "reciprocal identity", claim_reciprocal),
    ("15", "energy bound", claim_energy),
    ("16", "monotone in parameters", claim_monotonicity),
]


def bundled_config_dir() -> Path:
    return Path(str(resources.files("selab") / "configs"))


def verify_all(config_dir=None, out_dir=None, overrides=(), stream=sys.stdout) -> bool:
    """Run every claim; print one line per claim and return True if all pass."""
    cdir = Path(config_dir) if config_dir else bundled_config_dir()
    if not cdir.is_dir() or not any(cdir.glob("*.cfg")):
        raise ConfigError(f"no configs found in {cdir}")
    with tempfile.TemporaryDirectory() as tmp:
        runner = Runner(cdir, Path(out_dir) if out_dir else Path(tmp), overrides)
        all_ok = True
        for cid, title, fn in CLAIMS:
            try:
                out = fn(runner)
            except ConfigError:
                raise
            except Exception as exc:  # a crashed claim is a failed claim
                out = Outcome(False, f"{type(exc).__name__}: {exc}", "")
            all_ok &= out.ok
            print(f"{'PASS' if out.ok else 'FAIL'}  {cid:>2} {title:<28} measured: {out.measured} | expected: {out.expected}",
                  file=stream, flush=True)
    return all_ok
