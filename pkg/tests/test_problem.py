import math

import numpy as np
import pytest
from scipy import integrate

from selab.errors import ProblemError
from selab.problem import (CoefficientSpec, FSpec, GSpec, ProblemInstance, check_hypotheses,
                           g_integral_divergent, keller_osserman_integral)
from selab.mesh import build_mesh


@pytest.mark.parametrize("theta", np.round(np.arange(0.1, 2.01, 0.1), 10))
def test_divergence_matches_exponent(theta):
    assert g_integral_divergent(GSpec.power(theta)) == (theta >= 1.0)


def test_log_integral_is_finite():
    assert not g_integral_divergent(GSpec.log())


def test_keller_osserman_half_power():
    # int_0^1 (2 sqrt t)^(-1/2) dt = 2^(-1/2) * 4/3
    assert keller_osserman_integral(GSpec.power(0.5)) == pytest.approx(4 / (3 * math.sqrt(2)), rel=1e-8)


def test_keller_osserman_against_quadrature():
    g = GSpec.power_plus_constant(0.3, 2.0)
    oracle = integrate.quad(lambda t: (t**0.7 / 0.7 + 2 * t) ** -0.5, 0, 1, limit=200)[0]
    assert keller_osserman_integral(g) == pytest.approx(oracle, rel=1e-7)


def test_hypotheses_for_half_power():
    rep = check_hypotheses(ProblemInstance("plamu", GSpec.power(0.5), FSpec.power(0.5)))
    assert rep.flags["g1"] and rep.flags["g2"] and rep.flags["g3"]
    assert not rep.g_integral_divergent
    assert rep.flags["g_positive_nonincreasing"] and rep.flags["f_nonnegative_nondecreasing"]


def test_hypotheses_for_strong_singularity():
    rep = check_hypotheses(ProblemInstance("plamu", GSpec.power(1.5), FSpec.power(0.5)))
    assert rep.g_integral_divergent
    assert not rep.flags["g3"]
    assert rep.to_dict()["keller_osserman_value"] is None


def test_g4_needs_gamma_above_beta_plus_one():
    p = {"p": CoefficientSpec.distance_power(1, 1.0), "q": CoefficientSpec.constant(1.0)}
    ProblemInstance("weighted_convection", GSpec.power(3.0), coefficients=p, grad_exponent=0.5)
    with pytest.raises(ProblemError):
        ProblemInstance("weighted_convection", GSpec.power(1.5), coefficients=p, grad_exponent=0.5)


def test_thresholds():
    pla = ProblemInstance("pla", GSpec.power(0.5), FSpec.linear(2.0))
    assert pla.critical_lambda_factor == pytest.approx(0.5)
    pp = ProblemInstance("ppart", GSpec.power_plus_constant(0.5, 1.0), mu=1.0)
    assert pp.critical_lambda_factor == pytest.approx(0.5)


def test_terms_layout():
    m = build_mesh("interval", 11)
    pr = ProblemInstance("plamu", GSpec.power(0.5), FSpec.power(0.5), {"K": CoefficientSpec.constant(2.0)},
                         lam=3.0, mu=4.0)
    t = pr.terms(m)
    np.testing.assert_allclose(t.g_coef, -2.0)
    np.testing.assert_allclose(t.f_coef, 3.0)
    np.testing.assert_allclose(t.source, 4.0)


def test_with_param():
    pr = ProblemInstance("pla", GSpec.power(0.5))
    assert pr.with_param("lambda", 2.5).lam == 2.5 and pr.with_param("mu", 1.0).mu == 1.0
    with pytest.raises(ProblemError):
        pr.with_param("nu", 1.0)


@pytest.mark.parametrize("bad", [lambda: GSpec("cubic"), lambda: GSpec.power(-1.0), lambda: FSpec.sublinear(1.5),
                                 lambda: ProblemInstance("unknown", GSpec.power(0.5))])
def test_validation(bad):
    with pytest.raises(ProblemError):
        bad()


def test_linear_majorants():
    t = np.geomspace(1e-9, 1e6, 500)
    for f in (FSpec.power(0.5), FSpec.linear(2.0), FSpec.saturating(1.5), FSpec.constant(3.0)):
        A, B = f.linear_majorant()
        assert np.all(f(t) <= A * t + B + 1e-12)
