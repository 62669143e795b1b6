import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import special

from selab.diagnostics import (DIVERGENT, FINITE, INCONCLUSIVE, MEMBER, NON_MEMBER, EnergyBoundParams, expected_membership,
                               convergence_orders, dirichlet_energy, energy_bound_check, fit_boundary_rate,
                               g_majorant, lazer_mckenna_check, linear_bounds_check, membership_from_energies,
                               negative_power_integral, reciprocal_residual)
from selab.errors import WindowTooSparse
from selab.mesh import build_mesh
from selab.operator import eigenpair
from selab.problem import FSpec, GSpec

MESH = build_mesh("interval", 2001, 2.0)


@settings(max_examples=30, deadline=None)
@given(sigma=st.floats(0.2, 2.0), c=st.floats(0.1, 10.0), lo=st.floats(1e-4, 1e-2), span=st.floats(3.0, 50.0))
def test_rate_fit_recovers_exact_power(sigma, c, lo, span):
    u = c * MESH.boundary_distance**sigma
    fit = fit_boundary_rate(MESH, u, (lo, min(lo * span, 0.25)))
    assert fit.sigma == pytest.approx(sigma, abs=1e-8)
    assert fit.constant == pytest.approx(c, rel=1e-7)
    assert fit.symmetric


def test_rate_fit_window_checks():
    u = MESH.boundary_distance
    with pytest.raises(ValueError):
        fit_boundary_rate(MESH, u, (0.1, 0.9))
    coarse = build_mesh("interval", 21)
    with pytest.raises(WindowTooSparse):
        fit_boundary_rate(coarse, coarse.boundary_distance, (0.05, 0.1))


def test_rate_fit_reports_asymmetry():
    m = build_mesh("interval", 2001)
    x = m.nodes
    u = np.where(x <= 0.5, x, np.sqrt(1 - x))
    fit = fit_boundary_rate(m, u, (0.005, 0.1))
    assert fit.sigma == pytest.approx(1.0, abs=1e-10)
    assert fit.other_side_sigma == pytest.approx(0.5, abs=1e-10)
    assert not fit.symmetric


def test_linear_bounds():
    m = build_mesh("interval", 101)
    b = linear_bounds_check(m, 3.0 * m.boundary_distance)
    assert (b.c1, b.c2) == pytest.approx((3.0, 3.0)) and b.status == "Bounded"
    # u ~ d^(2/3) has u/d unbounded: c2 grows with refinement
    ratios = [linear_bounds_check(mm, mm.boundary_distance ** (2 / 3)).ratio
              for mm in (build_mesh("interval", n) for n in (101, 401, 1601))]
    assert ratios[0] < ratios[1] < ratios[2]
    flat = linear_bounds_check(m, m.boundary_distance**2)
    assert flat.c1 > 0 and flat.c1 < 0.02
    assert linear_bounds_check(m, np.zeros(m.n)).status == "BoundViolation"


def test_dirichlet_energy_of_sine():
    m = build_mesh("interval", 4001)
    e = dirichlet_energy(m, np.sin(math.pi * m.nodes))
    assert e == pytest.approx(math.pi**2 / 2, rel=1e-6)


def test_membership_closed_form():
    # energy of a profile with |u'|^2 ~ d^(-6/5): integral from h to 1/2 is 5 (h^(-1/5) - 2^(1/5))
    h = np.geomspace(1e-5, 1e-8, 4)
    verdict, slope, _ = membership_from_energies(5 * (h**-0.2 - 2**0.2), h)
    assert verdict == NON_MEMBER and slope == pytest.approx(0.2, abs=0.05)
    verdict, slope, _ = membership_from_energies(np.full(4, 2.0) - h, h)
    assert verdict == MEMBER and abs(slope) < 1e-3
    verdict, *_ = membership_from_energies(np.log(1 / h), h)
    assert verdict in (INCONCLUSIVE, MEMBER)


@pytest.mark.parametrize("s", [0.25, 0.5, 0.75])
def test_negative_power_integral_beta_oracle(s):
    m = build_mesh("interval", 4001)
    exact = special.gamma((1 - s) / 2) * math.sqrt(math.pi) / (math.pi * special.gamma(1 - s / 2))
    got = negative_power_integral(m, np.sin(math.pi * m.nodes), s)
    assert got == pytest.approx(exact, rel=2e-3 if s < 0.7 else 1e-2)


def test_negative_power_integral_volume():
    m = build_mesh("interval", 101, 2.0)
    assert negative_power_integral(m, np.sin(math.pi * m.nodes), 0.0) == pytest.approx(1.0)


@pytest.mark.parametrize("s,expected", [(0.5, FINITE), (1.5, DIVERGENT), (2.0, DIVERGENT)])
def test_lazer_mckenna(s, expected):
    pair = eigenpair(build_mesh("interval", 201))
    assert lazer_mckenna_check(pair, s).verdict == expected


def test_reciprocal_residual_constant():
    # u = 1, p = 0: Delta v + v^2 = 1 and the identity residual is 1 - 1 = 0 away from the boundary
    m = build_mesh("interval", 51)
    u = np.ones(m.n)
    res = reciprocal_residual(m, u, 0.0, min_distance=0.05)
    assert res.sup < 1e-12


def test_convergence_orders():
    assert convergence_orders([1.0, 0.25, 0.0625]) == pytest.approx([2.0, 2.0])


def test_g_majorants_hold():
    t = np.geomspace(1e-10, 1e6, 4000)
    for g in (GSpec.power(0.5), GSpec.power_plus_constant(0.3, 2.0), GSpec.log()):
        C, D, alpha = g_majorant(g)
        assert np.all(g(t) <= C * t**-alpha + D + 1e-12)
    params = EnergyBoundParams(1.0, 0.0, 1.0, 0.0, 0.5)
    assert params.verify(FSpec.linear(1.0), GSpec.power(0.5))


def test_energy_bound_detects_violation():
    # high-frequency sine: energy (k pi)^2 |u|^2 is far above lam A |u|^2 when a = 0
    m = build_mesh("interval", 2001)
    u = 1e-3 * np.sin(20 * math.pi * m.nodes)
    params = EnergyBoundParams(1.0, 0.0, 1.0, 0.0, 0.5)
    assert energy_bound_check(m, u, params, lam=1.0, a_sup=0.0).status == "Violated"
    smooth = np.sin(math.pi * m.nodes)
    assert energy_bound_check(m, smooth, params, lam=10.0, a_sup=0.0).status == "Holds"


@pytest.mark.parametrize("beta,gamma,expected", [
    (0, 2, MEMBER), (1, 3, MEMBER), (0, 4, NON_MEMBER), (0.25, 4, NON_MEMBER), (0.6, 4, INCONCLUSIVE), (0, 3, INCONCLUSIVE),
])
def test_expected_membership(beta, gamma, expected):
    assert expected_membership(beta, gamma) == expected
