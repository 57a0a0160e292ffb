"""Brennan-Xia economy: Vasicek real rate and expected inflation, price index,
real pricing kernel and a stock plus two nominal bonds.

Brownian drivers are ``z = (z_s, z_r, z_pi)`` with correlation matrix ``rho``
and an independent unhedgeable driver ``z_u``.  Loadings of every process are
expressed on these *correlated* drivers, so quadratic variations carry ``rho``.

The artificial real kernel ``M_hat`` loads ``phi`` on ``z`` and
``xi_u - lambda_u_hat`` on ``z_u``; it equals ``Z^{lambda_u_hat} * Pi`` where
``Z^{lambda_u_hat}`` is the nominal state price density of the fictitiously
completed market.
"""

from __future__ import annotations

import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from numpy.typing import NDArray

from .errors import ConfigError, NotPositiveSemiDefinite, SingularSigma

# Initial real rate.  Not reported with the benchmark inputs; 0.0325 is the
# value at which the closed-form dual reproduces the published bounds.
DEFAULT_R0 = 0.0325


@dataclass(frozen=True)
class MarketParams:
    """Coefficients of the economy.  Defaults are the benchmark inputs.

    ``lambda_s, lambda_r, lambda_pi`` are the reported prices of risk.  The
    simulation does not use them directly: absence of arbitrage pins the
    prices of risk to ``rho @ (xi - phi)`` (see :attr:`price_of_risk`), and the
    reported values are kept for reference and for the reduced economy.
    """

    sigma_s: float = 0.158
    lambda_s: float = 0.343
    lambda_r: float = -0.209
    lambda_pi: float = -0.105
    lambda_u: float = 0.027
    rho_sr: float = -0.129
    rho_spi: float = -0.024
    rho_rpi: float = -0.061
    phi: tuple[float, float, float] = (-0.333, 0.170, 0.120)
    phi_u: float = -0.014
    xi: tuple[float, float, float] = (0.0, 0.0, 0.0)
    xi_u: float = 0.013
    r_bar: float = 0.012
    kappa: float = 0.613
    sigma_r: float = 0.026
    pi_bar: float = 0.054
    alpha: float = 0.027
    sigma_pi: float = 0.014
    r0: float = DEFAULT_R0
    pi0: float = 0.054
    bond_maturities: tuple[float, float] | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "phi", tuple(float(v) for v in self.phi))
        object.__setattr__(self, "xi", tuple(float(v) for v in self.xi))
        if len(self.phi) != 3 or len(self.xi) != 3:
            raise ConfigError("phi and xi must have three entries")
        if self.kappa <= 0 or self.alpha <= 0:
            raise ConfigError("mean-reversion speeds kappa and alpha must be positive")
        if self.sigma_r < 0 or self.sigma_pi < 0:
            raise ConfigError("Vasicek volatilities must be non-negative")
        if self.sigma_s <= 0:
            raise ConfigError("stock volatility must be positive")
        for name in ("rho_sr", "rho_spi", "rho_rpi"):
            if not -1.0 <= getattr(self, name) <= 1.0:
                raise ConfigError(f"{name} must lie in [-1, 1]")
        if self.bond_maturities is not None:
            t1, t2 = self.bond_maturities
            if t1 <= 0 or t2 <= 0:
                raise ConfigError("bond maturities must be positive")
            object.__setattr__(self, "bond_maturities", (float(t1), float(t2)))
        # raises NotPositiveSemiDefinite
        correlation_factor(self.rho)

    @property
    def rho(self) -> NDArray[np.float64]:
        return np.array(
            [
                [1.0, self.rho_sr, self.rho_spi],
                [self.rho_sr, 1.0, self.rho_rpi],
                [self.rho_spi, self.rho_rpi, 1.0],
            ]
        )

    @property
    def rho_hat(self) -> NDArray[np.float64]:
        """4x4 correlation of ``(z, z_u)``; ``z_u`` is independent of ``z``."""
        out = np.eye(4)
        out[:3, :3] = self.rho
        return out

    @property
    def phi_vec(self) -> NDArray[np.float64]:
        return np.asarray(self.phi, dtype=float)

    @property
    def xi_vec(self) -> NDArray[np.float64]:
        return np.asarray(self.xi, dtype=float)

    @property
    def exposure_premium(self) -> NDArray[np.float64]:
        """``xi - phi``: loading of the tangency exposure on the correlated drivers."""
        return self.xi_vec - self.phi_vec

    @property
    def price_of_risk(self) -> NDArray[np.float64]:
        """Arbitrage-consistent prices of risk ``rho (xi - phi)``."""
        return self.rho @ self.exposure_premium

    @property
    def reported_price_of_risk(self) -> NDArray[np.float64]:
        return np.array([self.lambda_s, self.lambda_r, self.lambda_pi])

    def phi_hat(self, lambda_u_hat: float) -> NDArray[np.float64]:
        """Kernel loadings ``[phi, xi_u - lambda_u_hat]`` in the artificial market."""
        return np.append(self.phi_vec, self.xi_u - lambda_u_hat)

    def kernel_variance_rate(self, lambda_u_hat: float) -> float:
        ph = self.phi_hat(lambda_u_hat)
        return float(ph @ self.rho_hat @ ph)

    def maturities(self, horizon: float) -> tuple[float, float]:
        """Bond maturities; defaults to ``(horizon + 5, horizon + 15)``."""
        if self.bond_maturities is not None:
            return self.bond_maturities
        return (horizon + 5.0, horizon + 15.0)


@dataclass(frozen=True)
class SimConfig:
    n_paths: int = 10_000
    dt: float = 0.05
    horizon: float = 5.0
    seed: int = 20_240_517
    x0: float = 1.0

    def __post_init__(self) -> None:
        if self.n_paths < 2:
            raise ConfigError("n_paths must be at least 2")
        if self.dt <= 0 or self.horizon <= 0:
            raise ConfigError("dt and horizon must be positive")
        if self.x0 <= 0:
            raise ConfigError("x0 must be positive")
        if not 0 <= self.seed < 2**64:
            raise ConfigError("seed must be an unsigned 64-bit integer")
        ratio = self.horizon / self.dt
        if abs(ratio - round(ratio)) > 1e-9 * max(1.0, ratio):
            raise ConfigError(f"horizon/dt = {ratio} is not an integer")

    @property
    def n_steps(self) -> int:
        return int(round(self.horizon / self.dt))

    @property
    def grid(self) -> NDArray[np.float64]:
        return np.linspace(0.0, self.horizon, self.n_steps + 1)


@dataclass
class PathSet:
    """Simulated state paths on an equidistant grid.

    Arrays are ``(n_paths, n_steps + 1)``; ``dz`` holds the Brownian increments
    ``(z_s, z_r, z_pi, z_u)`` with shape ``(n_paths, n_steps, 4)``.
    ``log_kernel`` is ``log M_hat`` under shadow price ``lambda_u_hat``.
    """

    grid: NDArray[np.float64]
    r: NDArray[np.float64]
    pi: NDArray[np.float64]
    log_price_index: NDArray[np.float64]
    log_kernel: NDArray[np.float64]
    log_money_market: NDArray[np.float64]
    dz: NDArray[np.float64]
    lambda_u_hat: float
    _zu_cum: NDArray[np.float64] | None = field(default=None, repr=False)

    @property
    def n_paths(self) -> int:
        return self.r.shape[0]

    @property
    def n_steps(self) -> int:
        return self.grid.size - 1

    @property
    def dt(self) -> float:
        return float(self.grid[1] - self.grid[0])

    @property
    def horizon(self) -> float:
        return float(self.grid[-1])

    def zu_cumulative(self) -> NDArray[np.float64]:
        if self._zu_cum is None:
            zu = np.zeros_like(self.r)
            np.cumsum(self.dz[:, :, 3], axis=1, out=zu[:, 1:])
            self._zu_cum = zu
        return self._zu_cum

    def log_nominal_kernel(self) -> NDArray[np.float64]:
        """``log Z^{lambda_u_hat} = log M_hat - log Pi``."""
        return self.log_kernel - self.log_price_index

    def to_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["path", "time", "r", "pi", "log_Pi", "log_M", "log_B"])
            for j in range(self.n_paths):
                for k, t in enumerate(self.grid):
                    w.writerow(
                        [j]
                        + [f"{v:.6g}" for v in (t, self.r[j, k], self.pi[j, k],
                                                 self.log_price_index[j, k],
                                                 self.log_kernel[j, k],
                                                 self.log_money_market[j, k])]
                    )


def correlation_factor(rho_matrix: NDArray[np.float64], tol: float = 1e-12) -> NDArray[np.float64]:
    """Lower-triangular ``L`` with ``L @ L.T == rho_matrix``.

    Unlike :func:`numpy.linalg.cholesky` this accepts singular (semi-definite)
    matrices, e.g. perfectly correlated drivers.
    """
    a = np.asarray(rho_matrix, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError("correlation matrix must be square")
    if not np.allclose(a, a.T, atol=1e-14, rtol=0.0):
        raise ValueError("correlation matrix must be symmetric")
    n = a.shape[0]
    L = np.zeros_like(a)
    for j in range(n):
        pivot = a[j, j] - L[j, :j] @ L[j, :j]
        if pivot < -tol:
            raise NotPositiveSemiDefinite(f"negative pivot {pivot:.3e} at index {j}")
        d = math.sqrt(max(pivot, 0.0))
        L[j, j] = d
        for i in range(j + 1, n):
            s = a[i, j] - L[i, :j] @ L[j, :j]
            if d > 0.0:
                L[i, j] = s / d
            elif abs(s) > 1e-10:
                raise NotPositiveSemiDefinite(f"zero pivot with non-zero column at index {j}")
    return L


def nominal_rate(r, pi, params: MarketParams, lambda_u_eff: float | None = None):
    """``R_f = r + pi - xi' lambda - xi_u lambda_u``.

    ``lambda_u_eff`` overrides the price of unhedgeable risk; by default the
    market's ``lambda_u`` is used.
    """
    lam_u = params.lambda_u if lambda_u_eff is None else lambda_u_eff
    return r + pi - params.xi_vec @ params.price_of_risk - params.xi_u * lam_u


def b_factor(tau, kappa: float, sigma: float):
    """``(sigma/kappa) (1 - exp(-kappa tau))``, the bond duration loading."""
    return sigma / kappa * -np.expm1(-kappa * np.asarray(tau, dtype=float))


def sigma_matrix(t: float, params: MarketParams, maturities: tuple[float, float]) -> NDArray[np.float64]:
    """Loadings of (stock, bond 1, bond 2) on ``(z_s, z_r, z_pi)``."""
    out = np.zeros((3, 3))
    out[0, 0] = params.sigma_s
    for i, mat in enumerate(maturities, start=1):
        tau = mat - t
        if tau <= 0:
            raise SingularSigma(f"bond {i} with maturity {mat} has expired at t={t}")
        out[i, 1] = -b_factor(tau, params.kappa, params.sigma_r)
        out[i, 2] = -b_factor(tau, params.alpha, params.sigma_pi)
    if abs(np.linalg.det(out)) < 1e-14:
        raise SingularSigma(f"asset loading matrix is singular at t={t}")
    return out


def _path_normals(seed: int, start: int, stop: int, n_steps: int) -> NDArray[np.float64]:
    out = np.empty((stop - start, n_steps, 4))
    for j in range(start, stop):
        rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, j])))
        out[j - start] = rng.standard_normal((n_steps, 4))
    return out


def draw_increments(config: SimConfig, rho: NDArray[np.float64], workers: int = 1) -> NDArray[np.float64]:
    """Correlated Brownian increments ``(n_paths, n_steps, 4)``.

    Every path owns a generator seeded from ``(seed, path_index)``, so the
    result does not depend on ``workers``.
    """
    n, m = config.n_paths, config.n_steps
    if workers <= 1:
        eps = _path_normals(config.seed, 0, n, m)
    else:
        bounds = np.linspace(0, n, workers + 1).astype(int)
        with ThreadPoolExecutor(max_workers=workers) as ex:
            parts = ex.map(lambda ab: _path_normals(config.seed, ab[0], ab[1], m),
                           zip(bounds[:-1], bounds[1:]))
            eps = np.concatenate(list(parts), axis=0)
    L = correlation_factor(rho)
    sq = math.sqrt(config.dt)
    dz = np.empty_like(eps)
    dz[:, :, :3] = (eps[:, :, :3] @ L.T) * sq
    dz[:, :, 3] = eps[:, :, 3] * sq
    return dz


def simulate_states(
    params: MarketParams,
    config: SimConfig,
    lambda_u_eff: float | None = None,
    workers: int = 1,
) -> PathSet:
    """Euler-Maruyama simulation of all state variables.

    ``lambda_u_eff`` is the shadow price of unhedgeable risk used for the
    artificial kernel ``M_hat`` (defaults to the market's ``lambda_u``, in
    which case ``M_hat`` is the real kernel ``M``).
    """
    lam_hat = params.lambda_u if lambda_u_eff is None else float(lambda_u_eff)
    if not math.isfinite(lam_hat):
        raise ConfigError("lambda_u_eff must be finite")
    dz = draw_increments(config, params.rho, workers)
    n, m, dt = config.n_paths, config.n_steps, config.dt

    r = np.empty((n, m + 1))
    pi = np.empty((n, m + 1))
    r[:, 0] = params.r0
    pi[:, 0] = params.pi0
    for k in range(m):
        r[:, k + 1] = r[:, k] + params.kappa * (params.r_bar - r[:, k]) * dt + params.sigma_r * dz[:, k, 1]
        pi[:, k + 1] = pi[:, k] + params.alpha * (params.pi_bar - pi[:, k]) * dt + params.sigma_pi * dz[:, k, 2]

    xi_hat = np.append(params.xi_vec, params.xi_u)
    phi_hat = params.phi_hat(lam_hat)
    rho_hat = params.rho_hat

    def integrate(drift, loading):
        out = np.zeros((n, m + 1))
        np.cumsum(drift[:, :-1] * dt + dz @ loading, axis=1, out=out[:, 1:])
        return out

    log_pi = integrate(pi - 0.5 * (xi_hat @ rho_hat @ xi_hat), xi_hat)
    kernel_drift = -r + params.xi_u * (params.lambda_u - lam_hat) - 0.5 * (phi_hat @ rho_hat @ phi_hat)
    log_m = integrate(kernel_drift, phi_hat)
    log_b = np.zeros((n, m + 1))
    np.cumsum(nominal_rate(r[:, :-1], pi[:, :-1], params) * dt, axis=1, out=log_b[:, 1:])

    return PathSet(
        grid=config.grid,
        r=r,
        pi=pi,
        log_price_index=log_pi,
        log_kernel=log_m,
        log_money_market=log_b,
        dz=dz,
        lambda_u_hat=lam_hat,
    )


def log_kernel_at(paths: PathSet, params: MarketParams, lambda_u_hat: float) -> NDArray[np.float64]:
    """``log M_hat`` on the stored paths under a different shadow price.

    Exact re-weighting of the Euler sums: only the ``z_u`` loading and the
    deterministic drift depend on the shadow price.
    """
    lam0, lam1 = paths.lambda_u_hat, float(lambda_u_hat)
    if lam1 == lam0:
        return paths.log_kernel
    xu = params.xi_u
    drift_shift = xu * (lam0 - lam1) - 0.5 * ((xu - lam1) ** 2 - (xu - lam0) ** 2)
    return paths.log_kernel + (lam0 - lam1) * paths.zu_cumulative() + drift_shift * paths.grid


def exact_ou_mean(x0: float, mean: float, speed: float, t):
    """Mean of an Ornstein-Uhlenbeck process started at ``x0``."""
    return mean + (x0 - mean) * np.exp(-speed * np.asarray(t, dtype=float))
