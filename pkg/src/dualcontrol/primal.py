"""Projected (admissible) strategy, wealth simulation and the Monte Carlo
lower bound.

The artificial-market optimum exposes wealth to the unhedgeable driver; the
projection keeps its loadings on the traded drivers and sets the ``z_u``
exposure to zero.  On the traded drivers the exposure is a blend of the
tangency loading ``xi - phi`` and the rate hedge ``A_t = -B_{t,T} e_2 + xi``::

    x_bar_t = (xi - phi - A_t) w_t + A_t,
    w_t = sum_i (1/gamma_i) * (value of branch i) / (value of both branches)

Exposures are loadings on the correlated drivers ``(z_s, z_r, z_pi)``; asset
weights follow from ``Sigma_t' x_t = x_bar_t``.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from numpy.typing import NDArray
from scipy.optimize import minimize
from scipy.special import expit, log_ndtr

from .dual import Controls, KernelMoments, _estimate, kernel_moments
from .market import MarketParams, PathSet, b_factor, log_kernel_at, nominal_rate, sigma_matrix
from .preferences import DualCrraPrefs, utility

log = logging.getLogger(__name__)


def _log_branches(log_y, mom: KernelMoments, prefs: DualCrraPrefs):
    s2, s = mom.variance, mom.sigma_M
    out = []
    for g, sign in ((prefs.gamma_d, 1.0), (prefs.gamma_u, -1.0)):
        a = 1.0 - 1.0 / g
        base = -log_y / g + a * mom.mean + 0.5 * a * a * s2
        arg = sign * (log_y + mom.mean + a * s2)
        if s > 0.0:
            tail = log_ndtr(arg / s)
        else:
            tail = np.where(arg >= 0.0, 0.0, -np.inf)
        out.append(base + tail)
    return out


def blend_weight(log_y, mom: KernelMoments, prefs: DualCrraPrefs):
    """``w_t`` for ``log_y = log(eta K M_hat_t)``; lies in ``[1/gamma_d, 1/gamma_u]``."""
    ld, lu = _log_branches(np.asarray(log_y, dtype=float), mom, prefs)
    p_down = expit(ld - lu)
    return p_down / prefs.gamma_d + (1.0 - p_down) / prefs.gamma_u


def rate_hedge(t: float, T: float, params: MarketParams) -> NDArray[np.float64]:
    """``A_t = -B_{t,T} e_2 + xi``."""
    a = params.xi_vec.copy()
    a[1] -= b_factor(T - t, params.kappa, params.sigma_r)
    return a


def exposures(t: float, r_t, log_kernel_t, controls: Controls, params: MarketParams,
              prefs: DualCrraPrefs, T: float):
    """Projected loadings ``x_bar_t`` of log wealth on ``(z_s, z_r, z_pi)``.

    Returns ``(x_bar, w)`` with ``x_bar`` shaped ``(..., 3)``.
    """
    mom = kernel_moments(t, T, r_t, params, prefs, controls.lambda_u_hat)
    log_y = math.log(controls.eta * prefs.benchmark) + np.asarray(log_kernel_t, dtype=float)
    w = blend_weight(log_y, mom, prefs)
    a = rate_hedge(t, T, params)
    x_bar = np.multiply.outer(w, params.exposure_premium - a) + a
    return x_bar, w


def portfolio_weights(t: float, r_t, log_kernel_t, controls: Controls, params: MarketParams,
                      prefs: DualCrraPrefs, T: float,
                      maturities: tuple[float, float] | None = None):
    """Fractions of wealth in (stock, bond 1, bond 2).

    Nothing is allocated to the fictitious asset.  Raises
    :class:`SingularSigma` if the loading matrix is not invertible at ``t``.
    """
    x_bar, _ = exposures(t, r_t, log_kernel_t, controls, params, prefs, T)
    sig = sigma_matrix(t, params, maturities or params.maturities(T))
    return np.linalg.solve(sig.T, np.asarray(x_bar).T).T


def market_value_wealth(t: float, r_t, log_kernel_t, log_price_index_t, controls: Controls,
                        params: MarketParams, prefs: DualCrraPrefs, T: float):
    """Market value at ``t`` of the dual-optimal terminal wealth,
    ``E[Z_T X_T | F_t] / Z_t``."""
    mom = kernel_moments(t, T, r_t, params, prefs, controls.lambda_u_hat)
    log_y = math.log(controls.eta * prefs.benchmark) + np.asarray(log_kernel_t, dtype=float)
    ld, lu = _log_branches(log_y, mom, prefs)
    real = prefs.benchmark * (np.exp(ld) + np.exp(lu))
    out = real * np.exp(np.asarray(log_price_index_t, dtype=float))
    return float(out) if np.ndim(out) == 0 else out


@dataclass
class WealthSample:
    terminal_wealth: NDArray[np.float64]
    terminal_price_index: NDArray[np.float64]
    x0: float
    log_wealth: NDArray[np.float64] | None = None
    weights: NDArray[np.float64] | None = None
    blend: NDArray[np.float64] | None = None

    @property
    def real_wealth(self) -> NDArray[np.float64]:
        return self.terminal_wealth / self.terminal_price_index

    def scaled(self, factor: float) -> "WealthSample":
        """Same strategy from endowment ``factor * x0``; wealth is linear in it."""
        return WealthSample(self.terminal_wealth * factor, self.terminal_price_index, self.x0 * factor)


def simulate_wealth(
    paths: PathSet,
    controls: Controls,
    params: MarketParams,
    prefs: DualCrraPrefs,
    x0: float,
    *,
    retain: bool = False,
    zero_risky: bool = False,
) -> WealthSample:
    """Log-Euler recursion for wealth under the projected strategy.

    Exposures are recomputed at every grid point from ``(r_t, M_hat_t)``;
    only the traded increments enter, so wealth carries no ``z_u`` risk.
    ``zero_risky`` forces a money-market-only strategy.
    """
    T = paths.horizon
    dt = paths.dt
    n, m = paths.n_paths, paths.n_steps
    log_m = log_kernel_at(paths, params, controls.lambda_u_hat)
    lam = params.price_of_risk
    rho = params.rho
    log_x = np.full(n, math.log(x0))
    hist = np.empty((n, m + 1)) if retain else None
    wts = np.empty((n, m, 3)) if retain else None
    blend = np.empty((n, m)) if retain else None
    mats = params.maturities(T)
    for k in range(m):
        t = paths.grid[k]
        if hist is not None:
            hist[:, k] = log_x
        rf = nominal_rate(paths.r[:, k], paths.pi[:, k], params)
        # consumption is identically zero; the slot would enter the drift here
        if zero_risky:
            log_x += rf * dt
            continue
        xb, w = exposures(t, paths.r[:, k], log_m[:, k], controls, params, prefs, T)
        quad = np.einsum("ni,ij,nj->n", xb, rho, xb)
        log_x += (rf + xb @ lam - 0.5 * quad) * dt + np.einsum("ni,ni->n", xb, paths.dz[:, k, :3])
        if wts is not None:
            wts[:, k] = np.linalg.solve(sigma_matrix(t, params, mats).T, xb.T).T
            blend[:, k] = w
    if hist is not None:
        hist[:, m] = log_x
    return WealthSample(
        terminal_wealth=np.exp(log_x),
        terminal_price_index=np.exp(paths.log_price_index[:, -1]),
        x0=x0,
        log_wealth=hist,
        weights=wts,
        blend=blend,
    )


@dataclass(frozen=True)
class LowerBoundEstimate:
    value: float
    stderr: float

    @property
    def ci95(self) -> tuple[float, float]:
        return (self.value - 1.96 * self.stderr, self.value + 1.96 * self.stderr)


def lower_bound(sample: WealthSample, prefs: DualCrraPrefs) -> LowerBoundEstimate:
    """Sample mean of terminal utility with its standard error."""
    est = _estimate(utility(sample.terminal_wealth, sample.terminal_price_index, prefs))
    return LowerBoundEstimate(est.value, est.stderr)


@dataclass
class PrimalOptimum:
    controls: Controls
    value: float
    init_value: float
    evaluations: int
    converged: bool
    history: list[tuple[float, float, float]] = field(default_factory=list)


def optimize_primal(
    paths: PathSet,
    params: MarketParams,
    prefs: DualCrraPrefs,
    x0: float,
    init: Controls,
    *,
    max_evals: int = 200,
    xatol: float = 1e-6,
) -> PrimalOptimum:
    """Nelder-Mead maximisation of the Monte Carlo lower bound over
    ``(lambda_u_hat, eta)``.

    Every evaluation reuses ``paths`` (common random numbers), so the
    objective is a deterministic function of the controls.
    """
    history: list[tuple[float, float, float]] = []

    def objective(p):
        lam_hat, eta = float(p[0]), float(p[1])
        if not eta > 0:
            return math.inf
        sample = simulate_wealth(paths, Controls(eta, lam_hat, "primal"), params, prefs, x0)
        val = lower_bound(sample, prefs).value
        history.append((lam_hat, eta, val))
        return -val

    start = np.array([init.lambda_u_hat, init.eta])
    init_value = -objective(start)
    simplex = np.array([start, start + [5e-3, 0.0], start + [0.0, 0.05 * init.eta]])
    res = minimize(
        objective,
        start,
        method="Nelder-Mead",
        options={"initial_simplex": simplex, "maxfev": max_evals, "xatol": xatol, "fatol": math.inf},
    )
    best_lam, best_eta, best_val = max(history, key=lambda h: h[2])
    if best_val < init_value:
        best_lam, best_eta, best_val = init.lambda_u_hat, init.eta, init_value
    converged = bool(res.success)
    if not converged:
        log.warning("primal optimisation stopped after %d evaluations: %s", res.nfev, res.message)
    return PrimalOptimum(
        controls=Controls(best_eta, best_lam, "primal"),
        value=best_val,
        init_value=init_value,
        evaluations=len(history),
        converged=converged,
        history=history,
    )
