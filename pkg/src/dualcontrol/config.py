"""Experiment configuration: a flat ``key = value`` text file.

Market keys use the coefficient names of :class:`MarketParams`; vectors are
comma separated.  Profiles are written ``gamma_d:gamma_u`` and separated by
whitespace or semicolons, e.g. ``profiles = 5:5 10:2 15:3``.  Lines starting
with ``#`` or ``;`` are comments.  Unknown keys are rejected.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, fields, replace
from pathlib import Path

from .errors import ConfigError, DualControlError
from .market import MarketParams, SimConfig
from .preferences import DualCrraPrefs

MODES = ("inject-dual", "optimize-primal")

_VECTOR_KEYS = {"phi": 3, "xi": 3, "bond_maturities": 2}
_MARKET_KEYS = {f.name for f in fields(MarketParams)}
_SIM_KEYS = {"n_paths", "dt", "seed", "x0"}
_OTHER_KEYS = {"profiles", "benchmark", "horizons", "mode", "outputs", "workers", "max_evals"}


@dataclass(frozen=True)
class ExperimentConfig:
    market: MarketParams
    profiles: tuple[DualCrraPrefs, ...]
    horizons: tuple[float, ...]
    sim: SimConfig
    mode: str = "inject-dual"
    outputs: str = "."
    workers: int = 1
    max_evals: int = 200

    def __post_init__(self) -> None:
        if not self.profiles:
            raise ConfigError("at least one preference profile is required")
        if not self.horizons:
            raise ConfigError("at least one horizon is required")
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.workers < 1 or self.max_evals < 1:
            raise ConfigError("workers and max_evals must be positive")
        for T in self.horizons:
            # validates horizon/dt
            self.sim_for(T)

    def sim_for(self, horizon: float) -> SimConfig:
        return replace(self.sim, horizon=float(horizon))

    def with_overrides(self, **kw) -> "ExperimentConfig":
        sim_kw = {k: kw.pop(k) for k in list(kw) if k in _SIM_KEYS}
        cfg = replace(self, **kw)
        return replace(cfg, sim=replace(cfg.sim, **sim_kw)) if sim_kw else cfg


def _floats(key: str, text: str) -> list[float]:
    try:
        return [float(v) for v in text.replace(",", " ").split()]
    except ValueError as exc:
        raise ConfigError(f"{key}: {exc}") from None


def _scalar(key: str, text: str, kind=float):
    try:
        return kind(text)
    except ValueError:
        raise ConfigError(f"{key}: cannot parse {text!r}") from None


def parse_profiles(text: str, benchmark: float) -> tuple[DualCrraPrefs, ...]:
    out = []
    for item in text.replace(";", " ").split():
        parts = item.split(":")
        if len(parts) != 2:
            raise ConfigError(f"profile {item!r} is not of the form gamma_d:gamma_u")
        gd, gu = (_scalar("profiles", p) for p in parts)
        try:
            out.append(DualCrraPrefs(gd, gu, benchmark))
        except DualControlError as exc:
            raise ConfigError(f"profile {item!r}: {exc}") from None
    return tuple(out)


def parse_config(text: str) -> ExperimentConfig:
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#",))
    cp.optionxform = str
    try:
        cp.read_string("[experiment]\n" + text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}") from None
    raw = dict(cp["experiment"])
    unknown = set(raw) - _MARKET_KEYS - _SIM_KEYS - _OTHER_KEYS
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(sorted(unknown))}")

    market_kw = {}
    for key in _MARKET_KEYS & set(raw):
        if key in _VECTOR_KEYS:
            vals = _floats(key, raw[key])
            if len(vals) != _VECTOR_KEYS[key]:
                raise ConfigError(f"{key} needs {_VECTOR_KEYS[key]} values")
            market_kw[key] = tuple(vals)
        else:
            market_kw[key] = _scalar(key, raw[key])
    sim_kw = {}
    if "n_paths" in raw:
        sim_kw["n_paths"] = _scalar("n_paths", raw["n_paths"], int)
    if "seed" in raw:
        sim_kw["seed"] = _scalar("seed", raw["seed"], int)
    for key in ("dt", "x0"):
        if key in raw:
            sim_kw[key] = _scalar(key, raw[key])

    try:
        market = MarketParams(**market_kw)
        benchmark = _scalar("benchmark", raw.get("benchmark", "1"))
        horizons = tuple(_floats("horizons", raw.get("horizons", "")))
        if any(h <= 0 for h in horizons):
            raise ConfigError("horizons must be positive")
        sim = SimConfig(horizon=horizons[0] if horizons else 1.0, **sim_kw)
        return ExperimentConfig(
            market=market,
            profiles=parse_profiles(raw.get("profiles", ""), benchmark),
            horizons=horizons,
            sim=sim,
            mode=raw.get("mode", "inject-dual").strip(),
            outputs=raw.get("outputs", ".").strip(),
            workers=_scalar("workers", raw.get("workers", "1"), int),
            max_evals=_scalar("max_evals", raw.get("max_evals", "200"), int),
        )
    except ConfigError:
        raise
    except DualControlError as exc:
        raise ConfigError(str(exc)) from None


def load_config(path: str | Path) -> ExperimentConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return parse_config(text)
