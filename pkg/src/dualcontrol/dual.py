"""Closed-form dual side with constant shadow price of unhedgeable risk.

With a constant shadow price the artificial kernel ``log M_hat_T`` is
Gaussian given ``F_t``, so the optimal dual terminal wealth
``Pi_T K (eta K M_hat_T)^(-1/gamma_i)`` (branch ``d`` when ``eta K M_hat_T >= 1``)
has truncated-lognormal moments.  Everything on this side is analytic:

* ``kernel_moments``  conditional mean/variance of ``log(M_hat_T / M_hat_t)``
* ``solve_dual``      budget equation in ``eta`` + first-order condition in
  ``lambda_u_hat``, solved jointly
* ``upper_bound``     ``E[V(eta Z_T, Pi_T)] + eta X_0`` for any controls

Monte Carlo estimators of the same quantities (``mc_*``) work from simulated
paths and serve as independent checks.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Literal

import numpy as np
from numpy.typing import NDArray
from scipy.optimize import brentq
from scipy.special import ndtr

from .errors import BracketError, DomainError, NegativeVariance, NoConvergence
from .market import MarketParams, PathSet, log_kernel_at
from .preferences import DualCrraPrefs, conjugate

ETA_BRACKET = (1e-8, 1e8)


@dataclass(frozen=True)
class Controls:
    """Lagrange multiplier ``eta`` and constant shadow price ``lambda_u_hat``."""

    eta: float
    lambda_u_hat: float
    side: Literal["dual", "primal"] = "dual"

    def __post_init__(self) -> None:
        if not self.eta > 0:
            raise DomainError("eta must be positive")

    @property
    def theta_bar(self) -> tuple[float, float]:
        """``(-lambda_u_hat, eta)``, the layout used when reporting controls."""
        return (-self.lambda_u_hat, self.eta)

    def as_side(self, side: Literal["dual", "primal"]) -> "Controls":
        return Controls(self.eta, self.lambda_u_hat, side)


@dataclass(frozen=True)
class KernelMoments:
    """Moments of ``log(M_hat_T / M_hat_t)`` given the real rate at ``t``.

    ``mean`` and ``variance`` are the plain Gaussian moments; ``mu_d`` and
    ``mu_u`` add ``(1 - 1/gamma_i) * variance`` for the two branches.
    ``mean`` (and the ``mu_*``) are arrays when ``r_t`` is.
    """

    mean: NDArray[np.float64] | float
    variance: float
    mu_d: NDArray[np.float64] | float
    mu_u: NDArray[np.float64] | float
    sigma_M: float
    b_factor: float


def kernel_moments(
    t: float,
    T: float,
    r_t,
    params: MarketParams,
    prefs: DualCrraPrefs,
    lambda_u_hat: float,
) -> KernelMoments:
    if not 0.0 <= t <= T:
        raise DomainError("require 0 <= t <= T")
    tau = T - t
    kap, sr = params.kappa, params.sigma_r
    b = -math.expm1(-kap * tau) / kap  # B_{t,T} / sigma_r
    v = params.kernel_variance_rate(lambda_u_hat)
    drift = params.r_bar - params.xi_u * (params.lambda_u - lambda_u_hat) + 0.5 * v
    mean = (params.r_bar - np.asarray(r_t, dtype=float)) * b - drift * tau
    cov_r = float((params.rho @ params.phi_vec)[1])
    var = (
        v * tau
        + sr**2 / kap**2 * (tau - b - 0.5 * kap * b * b)
        - 2.0 * sr / kap * cov_r * (tau - b)
    )
    if var < -1e-10:
        raise NegativeVariance(f"log-kernel variance {var:.3e} < 0")
    var = max(var, 0.0)
    ad = 1.0 - 1.0 / prefs.gamma_d
    au = 1.0 - 1.0 / prefs.gamma_u
    if np.ndim(mean) == 0:
        mean = float(mean)
    return KernelMoments(
        mean=mean,
        variance=var,
        mu_d=mean + ad * var,
        mu_u=mean + au * var,
        sigma_M=math.sqrt(var),
        b_factor=sr * b,
    )


def x_gamma(eta, gamma_i: float, moments: KernelMoments, log_kernel_t=0.0):
    """``E[eta^(-1/g) M_hat_T^(1-1/g) | F_t]`` (untruncated branch value).

    ``log_kernel_t`` is ``log M_hat_t``; at ``t = 0`` it is zero.
    """
    a = 1.0 - 1.0 / gamma_i
    return np.exp(
        -np.log(eta) / gamma_i
        + a * (np.asarray(log_kernel_t) + moments.mean)
        + 0.5 * a * a * moments.variance
    )


def _cdf(num, sigma: float):
    if sigma > 0.0:
        return ndtr(np.asarray(num) / sigma)
    return (np.asarray(num) >= 0.0).astype(float)


def branch_terms(log_y, moments: KernelMoments, prefs: DualCrraPrefs):
    """Per-branch pieces for ``log_y = log(eta K M_hat_t)``.

    Returns ``(c_d, c_u, p_d)``: ``K * (c_d + c_u)`` is real wealth
    ``X_t / Pi_t`` of the dual-optimal plan, ``c_i`` the part paid in branch
    ``i``, and ``p_d`` the conditional probability of the down state.
    """
    s2, s = moments.variance, moments.sigma_M
    out = []
    for g, sign in ((prefs.gamma_d, 1.0), (prefs.gamma_u, -1.0)):
        a = 1.0 - 1.0 / g
        level = np.exp(-log_y / g + a * moments.mean + 0.5 * a * a * s2)
        out.append(level * _cdf(sign * (log_y + moments.mean + a * s2), s))
    p_d = _cdf(log_y + moments.mean, s)
    return out[0], out[1], p_d


def budget_value(eta: float, moments: KernelMoments, prefs: DualCrraPrefs) -> float:
    """Time-0 cost ``E[Z_T X_T]`` of the dual-optimal terminal wealth."""
    k = prefs.benchmark
    c_d, c_u, _ = branch_terms(math.log(eta * k), moments, prefs)
    return float(k * (c_d + c_u))


def shadow_price_update(eta: float, moments: KernelMoments, prefs: DualCrraPrefs,
                        params: MarketParams, x0: float) -> float:
    """Right-hand side of the first-order condition in ``lambda_u_hat``."""
    c_d, c_u, _ = branch_terms(math.log(eta * prefs.benchmark), moments, prefs)
    k = prefs.benchmark
    blend = k * (c_d / prefs.gamma_d + c_u / prefs.gamma_u)
    return float((1.0 - x0 / blend) * params.xi_u)


def solve_budget(moments: KernelMoments, prefs: DualCrraPrefs, x0: float) -> float:
    """Multiplier ``eta`` meeting the budget; the cost is decreasing in ``eta``."""
    lo, hi = (math.log(b) for b in ETA_BRACKET)

    def f(log_eta):
        return budget_value(math.exp(log_eta), moments, prefs) - x0

    f_lo, f_hi = f(lo), f(hi)
    if not (f_lo > 0.0 > f_hi):
        raise BracketError(f"budget root not bracketed in eta in {ETA_BRACKET}")
    return math.exp(brentq(f, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=200))


@dataclass(frozen=True)
class DualSolution:
    controls: Controls
    moments: KernelMoments
    budget_residual: float
    shadow_residual: float
    iterations: int


def solve_dual(
    params: MarketParams,
    prefs: DualCrraPrefs,
    x0: float,
    T: float,
    *,
    damping: float = 0.5,
    tol: float = 1e-12,
    max_iter: int = 200,
    init: float | None = None,
) -> DualSolution:
    """Joint solution of the budget equation and the shadow-price condition.

    Damped fixed point on ``lambda_u_hat`` with a bracketed root-find for
    ``eta`` at every iterate.
    """
    if not x0 > 0:
        raise DomainError("x0 must be positive")
    lam = (1.0 - 0.5 * (prefs.gamma_d + prefs.gamma_u)) * params.xi_u if init is None else init
    for it in range(1, max_iter + 1):
        mom = kernel_moments(0.0, T, params.r0, params, prefs, lam)
        eta = solve_budget(mom, prefs, x0)
        new = shadow_price_update(eta, mom, prefs, params, x0)
        step = new - lam
        if abs(step) < tol:
            lam = new
            break
        lam += damping * step
    else:
        raise NoConvergence(f"shadow price did not converge in {max_iter} iterations")
    mom = kernel_moments(0.0, T, params.r0, params, prefs, lam)
    eta = solve_budget(mom, prefs, x0)
    budget_res = budget_value(eta, mom, prefs) - x0
    shadow_res = shadow_price_update(eta, mom, prefs, params, x0) - lam
    return DualSolution(Controls(eta, lam, "dual"), mom, budget_res, shadow_res, it)


def upper_bound(controls: Controls, params: MarketParams, prefs: DualCrraPrefs, x0: float, T: float) -> float:
    """Dual objective ``E[V(eta Z_T, Pi_T)] + eta X_0`` in closed form.

    Valid for any controls; at the solution of :func:`solve_dual` the budget
    term cancels and this is the value of the artificial-market problem.
    """
    mom = kernel_moments(0.0, T, params.r0, params, prefs, controls.lambda_u_hat)
    log_y = math.log(controls.eta * prefs.benchmark)
    s2, s = mom.variance, mom.sigma_M
    p_d = float(_cdf(log_y + mom.mean, s))
    total = controls.eta * x0
    for g, sign, p in ((prefs.gamma_d, 1.0, p_d), (prefs.gamma_u, -1.0, 1.0 - p_d)):
        a = 1.0 - 1.0 / g
        # E[(eta K M_hat_T)^a ; A_i]
        e_i = math.exp(a * (log_y + mom.mean) + 0.5 * a * a * s2) * float(
            _cdf(sign * (log_y + mom.mean + a * s2), s)
        )
        total += (g * e_i - p) / (1.0 - g)
    return total


# ---------------------------------------------------------------------------
# Monte Carlo estimators on simulated paths


@dataclass(frozen=True)
class McEstimate:
    value: float
    stderr: float

    def within(self, target: float, n_se: float = 3.0) -> bool:
        return abs(self.value - target) <= n_se * self.stderr


def _estimate(sample) -> McEstimate:
    sample = np.asarray(sample, dtype=float)
    return McEstimate(float(sample.mean()), float(sample.std(ddof=1) / math.sqrt(sample.size)))


def mc_kernel_moments(paths: PathSet, params: MarketParams, lambda_u_hat: float):
    """Sample mean and variance of ``log M_hat_T`` with their standard errors."""
    x = log_kernel_at(paths, params, lambda_u_hat)[:, -1]
    n = x.size
    mean = _estimate(x)
    var = float(x.var(ddof=1))
    m4 = float(np.mean((x - x.mean()) ** 4))
    var_se = math.sqrt(max(m4 - var * var, 0.0) / n)
    return mean, McEstimate(var, var_se)


def mc_x_gamma(paths: PathSet, params: MarketParams, controls: Controls, gamma_i: float) -> McEstimate:
    x = log_kernel_at(paths, params, controls.lambda_u_hat)[:, -1]
    return _estimate(np.exp(-math.log(controls.eta) / gamma_i + (1.0 - 1.0 / gamma_i) * x))


def mc_dual_objective(paths: PathSet, params: MarketParams, prefs: DualCrraPrefs,
                      controls: Controls, x0: float) -> McEstimate:
    """Sample estimate of ``E[V(eta Z_T, Pi_T)] + eta X_0``."""
    log_m = log_kernel_at(paths, params, controls.lambda_u_hat)[:, -1]
    log_pi = paths.log_price_index[:, -1]
    y = controls.eta * np.exp(log_m - log_pi)
    return _estimate(conjugate(y, np.exp(log_pi), prefs) + controls.eta * x0)
