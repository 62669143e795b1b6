import math

import numpy as np
import pytest
from scipy import integrate, optimize

from selab.continuation import (FOLD_PATTERN, AtlasCell, atlas, blowup_profile, bracket_threshold, sweep,
                                sweep_csv, sweep_json, upclosure_violations, write_csv)
from selab.errors import BadInitialBracket
from selab.mesh import build_mesh
from selab.problem import CoefficientSpec, FSpec, GSpec, ProblemInstance
from selab.solve.shooting import RadialShooter, shoot_radial

PI2 = math.pi**2
PLA = ProblemInstance("pla", GSpec.power(0.5), FSpec.linear(1.0), {"a": CoefficientSpec.constant(1.0)})
SHI = ProblemInstance("radial_shi", GSpec.power(0.5), FSpec.power(0.5))


def tau(c):
    # time for u'' = -(sqrt u - 1/sqrt u) to fall from c to 0; sqrt(lambda) for a solution with max c
    F = lambda u: 2 / 3 * u**1.5 - 2 * math.sqrt(u)
    # u = c - s^2 removes the inverse square-root singularity at the top
    g = lambda s: 2 * s / math.sqrt(2 * (F(c) - F(c - s * s))) if s > 0 else 2 / math.sqrt(2 * (math.sqrt(c) - 1 / math.sqrt(c)))
    return integrate.quad(g, 0, math.sqrt(c), limit=400, epsabs=1e-13, epsrel=1e-12)[0]


def test_sweep_is_monotone(coarse_mesh):
    res = sweep(PLA, "lambda", PI2 * np.array([0.2, 0.5, 0.8]), coarse_mesh)
    sols = [r.solution for _, r in res]
    assert all(r.converged for _, r in res)
    assert all(np.all(b >= a - 1e-9) for a, b in zip(sols, sols[1:]))


def test_sweep_rejects_unsorted(coarse_mesh):
    with pytest.raises(ValueError):
        sweep(PLA, "lambda", [2.0, 1.0], coarse_mesh)


def test_bracket_pla_contains_eigenvalue(coarse_mesh):
    br = bracket_threshold(PLA, "lambda", 0.5 * PI2, 1.7 * PI2, coarse_mesh, width_tol=0.02)
    assert br.contains(PI2) and br.relative_width <= 0.02
    assert br.history[0][1] == "Converged"


def test_bracket_needs_solvable_lower_end(coarse_mesh):
    with pytest.raises(BadInitialBracket):
        bracket_threshold(PLA, "lambda", 1.2 * PI2, 2 * PI2, coarse_mesh)
    with pytest.raises(BadInitialBracket):
        bracket_threshold(PLA, "lambda", 2.0, 1.0, coarse_mesh)


def test_upclosure_detector():
    cells = [AtlasCell(1, 1, "Converged", 1.0, "Solvable"), AtlasCell(2, 2, "NoSolutionEvidence", math.nan, "Unsolvable"),
             AtlasCell(3, 3, "Converged", 1.0, "Solvable")]
    # unsolvable (2, 2) above the solvable (1, 1) breaks up-closure; (3, 3) above it does not
    viol = upclosure_violations(cells)
    assert len(viol) == 1 and viol[0][0].lam == 1


def test_small_atlas():
    m = build_mesh("interval", 201)
    t = ProblemInstance("plamu", GSpec.power(0.5), FSpec.power(0.5), {"K": CoefficientSpec.constant(1.0)})
    cells = atlas(t, [0.01, 16.0], [0.01, 16.0], m)
    assert [c.verdict for c in cells][0] == "Unsolvable"
    assert cells[-1].verdict == "Solvable"
    assert not upclosure_violations(cells)


def test_blowup_profile_grows(coarse_mesh):
    prof = blowup_profile(PLA, PI2 * np.array([0.9, 0.99]), coarse_mesh)
    assert prof.strictly_increasing and prof.growth_ratio > 3


def test_emitters_round_trip(coarse_mesh, tmp_path):
    res = sweep(PLA, "lambda", [1.0, 2.0], coarse_mesh)
    text = sweep_csv(res)
    header, row = text.splitlines()[:2]
    assert header == "param,status,sup_norm,h1_seminorm,iterations"
    # 17 significant digits in scientific notation
    assert row.split(",")[0] == "1.0000000000000000e+00"
    assert '"param": "lambda"' in sweep_json(res, "lambda")
    path = tmp_path / "t.csv"
    write_csv(path, ["a"], [[0.1]])
    assert path.read_text() == "a\n1.0000000000000001e-01\n"


def test_fold_pattern_regex():
    assert FOLD_PATTERN.match("000222111") and FOLD_PATTERN.match("0012211")
    assert not FOLD_PATTERN.match("0002202111") and not FOLD_PATTERN.match("111")


def test_shooter_oracle_root():
    c = 5.0
    lam = tau(c) ** 2
    sols = shoot_radial(SHI, lam)
    centers = sorted(s.center for s in sols)
    assert len(sols) == 2
    assert min(abs(x - c) for x in centers) < 1e-6 * c


def test_fold_oracle_values():
    # lambda1 = tau(3)^2 where the lower branch leaves through c = 3; lambda0 = min tau^2
    lam1 = tau(3.0 + 1e-12) ** 2
    res = optimize.minimize_scalar(tau, bounds=(3.2, 8.0), method="bounded", options={"xatol": 1e-9})
    lam0 = res.fun**2
    assert lam0 == pytest.approx(6.7798, abs=2e-4) and lam1 == pytest.approx(7.4593, abs=2e-4)
    counts = {lam: len(shoot_radial(SHI, lam)) for lam in (0.9 * lam0, 0.5 * (lam0 + lam1), 1.1 * lam1)}
    assert list(counts.values()) == [0, 2, 1]


def test_shooter_profile_is_positive():
    c = 5.0
    prof = RadialShooter(tau(c) ** 2, 0.5, 0.5).profile(c)
    assert prof.u[0] == c and np.all(prof.u[:-1] > 0) and abs(prof.u[-1]) < 1e-6


def test_shooter_rejects_other_families():
    with pytest.raises(ValueError):
        shoot_radial(PLA, 1.0)
