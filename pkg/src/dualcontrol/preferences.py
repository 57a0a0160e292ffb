"""Dual CRRA utility over real wealth.

Two isoelastic branches meet at the real-wealth benchmark ``K``: relative risk
aversion ``gamma_d`` below it and ``gamma_u`` above it.  Both branches vanish
at ``x / pi = K`` and have slope ``1 / (K pi)`` there, so the utility is C^1.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError


@dataclass(frozen=True)
class DualCrraPrefs:
    gamma_d: float
    gamma_u: float
    benchmark: float = 1.0

    def __post_init__(self) -> None:
        if not (self.gamma_d > 1.0 and self.gamma_u > 1.0):
            raise DomainError("risk aversions must exceed 1")
        if not self.benchmark > 0.0:
            raise DomainError("benchmark must be positive")

    @property
    def is_crra(self) -> bool:
        return self.gamma_d == self.gamma_u

    @property
    def label(self) -> str:
        return f"({self.gamma_d:g},{self.gamma_u:g})"


def _check_positive(**kwargs):
    out = []
    for name, v in kwargs.items():
        a = np.asarray(v, dtype=float)
        if np.any(~(a > 0)):
            raise DomainError(f"{name} must be positive")
        out.append(a)
    return out


def _ret(a):
    return float(a) if np.ndim(a) == 0 else a


def _iso(ratio, gamma):
    return np.expm1((1.0 - gamma) * np.log(ratio)) / (1.0 - gamma)


def utility(x, pi, prefs: DualCrraPrefs):
    """``U(x, pi)``; branch ``gamma_d`` on ``x/pi <= K``."""
    x, pi = _check_positive(x=x, pi=pi)
    ratio = x / (prefs.benchmark * pi)
    out = np.where(ratio <= 1.0, _iso(ratio, prefs.gamma_d), _iso(ratio, prefs.gamma_u))
    return _ret(out)


def marginal_utility(x, pi, prefs: DualCrraPrefs):
    x, pi = _check_positive(x=x, pi=pi)
    kp = prefs.benchmark * pi
    ratio = x / kp
    g = np.where(ratio <= 1.0, prefs.gamma_d, prefs.gamma_u)
    return _ret(ratio ** (-g) / kp)


def inverse_marginal(y, pi, prefs: DualCrraPrefs):
    """Inverse of :func:`marginal_utility` in wealth; ``x/pi <= K`` iff ``y K pi >= 1``."""
    y, pi = _check_positive(y=y, pi=pi)
    kp = prefs.benchmark * pi
    s = y * kp
    g = np.where(s >= 1.0, prefs.gamma_d, prefs.gamma_u)
    return _ret(kp * s ** (-1.0 / g))


def conjugate(y, pi, prefs: DualCrraPrefs):
    """Convex conjugate ``V(y, pi) = sup_x U(x, pi) - x y``."""
    x = inverse_marginal(y, pi, prefs)
    return _ret(np.asarray(utility(x, pi, prefs)) - np.asarray(y) * x)


def rra_reciprocal(x, pi, prefs: DualCrraPrefs):
    x, pi = _check_positive(x=x, pi=pi)
    ratio = x / (prefs.benchmark * pi)
    return _ret(np.where(ratio <= 1.0, 1.0 / prefs.gamma_d, 1.0 / prefs.gamma_u))
