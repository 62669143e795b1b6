"""Power-versus-quadratic majorisation used to remove a sublinear gradient term."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize_scalar


@dataclass(frozen=True)
class ExpTransformConfig:
    """Coefficients of the exponential transform v = e^{Au} - 1.

    ``majorant`` builds them from s^a <= C^{a/2-1} s^2 + C^{a/2} applied to a
    gradient term q|u'|^a; ``exact`` is the quadratic-gradient case.
    """

    A: float
    B: float
    C: float
    a: float

    @classmethod
    def majorant(cls, a: float, C: float, q_sup: float = 1.0) -> "ExpTransformConfig":
        if not 0 < a < 2:
            raise ValueError("exponent a must lie in (0, 2)")
        if not C > 0:
            raise ValueError("C must be positive")
        return cls(q_sup * C ** (a / 2 - 1), q_sup * C ** (a / 2), float(C), float(a))

    @classmethod
    def exact(cls, lam: float) -> "ExpTransformConfig":
        return cls(float(lam), 0.0, 1.0, 2.0)

    @property
    def s_bar(self) -> float:
        """Maximiser of s^a / (s^2 + C)."""
        if not 0 < self.a < 2:
            return math.inf
        return math.sqrt(self.C * self.a / (2 - self.a))


def majorant_gap(s, a, C):
    """C^{a/2-1} s^2 + C^{a/2} - s^a (nonnegative)."""
    s = np.asarray(s, dtype=float)
    return C ** (a / 2 - 1) * s * s + C ** (a / 2) - s**a


def psi(s, a, C):
    s = np.asarray(s, dtype=float)
    return s**a / (s * s + C)


def psi_argmax(a: float, C: float, xtol: float = 1e-12) -> float:
    """Maximiser of psi by golden-section search on [0, 10 * max(1, sqrt(C))]."""
    hi = 10.0 * max(1.0, math.sqrt(C))
    res = minimize_scalar(lambda s: -psi(s, a, C), bracket=(0.0, 0.5 * hi, hi), method="golden",
                          tol=xtol)
    return float(res.x)


def check_inequality(samples: int = 100_000, seed: int = 0) -> dict:
    """Count violations of the majorant on random (s, a, C)."""
    rng = np.random.default_rng(seed)
    # half uniform on [0, 1e6], half log-uniform so the region near s_bar is probed too
    half = samples // 2
    s = np.concatenate((rng.uniform(0.0, 1e6, half), 10.0 ** rng.uniform(-6.0, 6.0, samples - half)))
    a = rng.uniform(0.0, 1.0, samples)
    a = np.where(a == 0.0, 0.5, a)
    C = 10.0 ** rng.uniform(-3.0, 3.0, samples)
    gap = majorant_gap(s, a, C)
    rhs = C ** (a / 2 - 1) * s * s + C ** (a / 2)
    violations = int(np.sum(gap < -1e-12 * rhs))
    return {"samples": samples, "violations": violations, "min_relative_gap": float(np.min(gap / rhs))}
