"""Plain-text ``key = value`` experiment configuration.

Example::

    # EMU(1) on |B_T|, lattice
    backend = lattice
    T = 1.0
    N = 64
    generator = emu
    generator.mu = 1.0
    claim = abs

Lines starting with ``#`` or ``;`` are comments. Every key has a default
except ``generator`` and ``claim``; unknown keys are rejected.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, fields, replace
from pathlib import Path
from typing import Optional

import numpy as np

from .bsde import TerminalClaim, abs_claim, brownian_claim, constant_claim, square_claim
from .condexp import EnsembleBackend, LatticeBackend, RegressionSpec
from .generators import Generator, by_name
from .operators import TolerancePolicy
from .paths import TimeGrid, simulate_paths
from .rbsde import NO_FLOOR, Obstacle, constant_floor, forward_price


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    generator: str
    claim: str
    backend: str = "lattice"
    T: float = 1.0
    N: int = 8
    M: int = 10_000
    d: int = 1
    seed: int = 0
    stream: int = 0
    generator_mu: float = 1.0
    generator_b: float = 1.0
    generator_r: float = 0.0
    floor: str = "none"
    floor_level: float = 0.0
    floor_C: Optional[float] = None
    floor_discounted: bool = False
    claim_c: float = 0.0
    claim_bound: float = 1.0
    market_spot: float = 100.0
    market_strike: float = 100.0
    market_rate: float = 0.05
    market_sigma: float = 0.2
    regression_degree: int = 4
    regression_ridge: float = 1e-8
    tolerance_lattice: float = 1e-10
    tolerance_se_multiple: float = 3.0
    output: Optional[str] = None
    axioms: tuple = ("D1", "D2", "D3", "D4", "H1", "H2", "SANDWICH", "MIX")
    trials: int = 3
    check_mu: Optional[float] = None
    n_list: tuple = (2, 4, 8, 16)
    oracle_steps: int = 500
    extend_t: int = 0
    extend_schedule: tuple = (1.0, 2.0, 4.0, 8.0)
    dm_s: int = 0
    dm_t: Optional[int] = None

    def __post_init__(self):
        if self.backend not in ("lattice", "ensemble"):
            raise ConfigError(f"backend must be lattice or ensemble, got {self.backend!r}")
        if self.backend == "lattice" and self.d != 1:
            raise ConfigError("the lattice backend is one-dimensional (d = 1)")
        if self.N < 1 or self.M < 1 or self.d < 1:
            raise ConfigError("N, M and d must be positive")

    # ---------------------------------------------------------------- builders

    def grid(self, N: Optional[int] = None) -> TimeGrid:
        return TimeGrid(self.T, self.N if N is None else N)

    def state_map(self):
        return forward_price(self.market_spot, self.market_rate, self.market_sigma)

    def make_backend(self, N: Optional[int] = None):
        grid = self.grid(N)
        if self.backend == "lattice":
            return LatticeBackend(grid)
        spec = RegressionSpec(self.regression_degree, self.regression_ridge)
        return EnsembleBackend(simulate_paths(grid, self.d, self.M, self.seed, self.stream), spec)

    def make_generator(self) -> Generator:
        params = {"mu": self.generator_mu, "b": self.generator_b, "r": self.generator_r}
        try:
            return by_name(self.generator, **params)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    def make_floor(self) -> Obstacle:
        kind = self.floor.lower()
        if kind == "none":
            return NO_FLOOR
        if kind == "zero":
            return constant_floor(0.0)
        if kind == "constant":
            return constant_floor(self.floor_level, self.floor_C)
        if kind == "put":
            K, r, X = self.market_strike, self.market_rate, self.state_map()
            if self.floor_discounted:
                fn = lambda t, x: np.exp(-r * t) * np.maximum(K - x[:, 0], 0.0)  # noqa: E731
            else:
                fn = lambda t, x: np.maximum(K - x[:, 0], 0.0)  # noqa: E731
            return Obstacle(f"put({K:g})", fn, C=K if self.floor_C is None else self.floor_C, state=X)
        raise ConfigError(f"unknown floor {self.floor!r}")

    def make_claim(self) -> TerminalClaim:
        kind = self.claim.lower()
        if kind == "constant":
            return constant_claim(self.claim_c)
        if kind == "brownian":
            return brownian_claim()
        if kind == "abs":
            return abs_claim()
        if kind == "square":
            return square_claim()
        if kind == "bounded_below":
            n0 = self.claim_bound
            return TerminalClaim(f"max(B_T,-{n0:g})", lambda x: np.maximum(x[:, 0], -n0))
        if kind in ("put", "call"):
            K, T, r = self.market_strike, self.T, self.market_rate
            scale = np.exp(-r * T) if self.floor_discounted else 1.0
            sign = 1.0 if kind == "put" else -1.0
            return TerminalClaim(kind, lambda x: scale * np.maximum(sign * (K - x[:, 0]), 0.0),
                                 state=self.state_map())
        raise ConfigError(f"unknown claim {self.claim!r}")

    def policy(self) -> TolerancePolicy:
        return TolerancePolicy(self.tolerance_lattice, self.tolerance_se_multiple)


def _key_to_field(key: str) -> str:
    return key.strip().replace(".", "_")


_FIELDS = {f.name: f for f in fields(ExperimentConfig)}


def _coerce(name: str, raw: str):
    default = ExperimentConfig.__dataclass_fields__[name].default
    raw = raw.strip()
    if name in ("generator", "claim", "backend", "floor"):
        return raw.lower()
    if name == "output":
        return raw or None
    if name == "axioms":
        return tuple(a.strip().upper() for a in raw.split(",") if a.strip())
    if name == "n_list":
        return tuple(int(v) for v in raw.split(",") if v.strip())
    if name == "extend_schedule":
        return tuple(float(v) for v in raw.split(",") if v.strip())
    if name in ("floor_discounted",):
        if raw.lower() in ("1", "true", "yes", "on"):
            return True
        if raw.lower() in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"not a boolean: {raw!r}")
    if name in ("floor_C", "check_mu"):
        return None if raw.lower() in ("", "none") else float(raw)
    if name == "dm_t":
        return None if raw.lower() in ("", "none") else int(raw)
    if isinstance(default, bool):
        return raw.lower() in ("1", "true", "yes")
    if isinstance(default, int):
        return int(raw)
    return float(raw)


def parse_config(text: str) -> ExperimentConfig:
    parser = configparser.ConfigParser(interpolation=None, delimiters=("=",), comment_prefixes=("#", ";"),
                                       inline_comment_prefixes=("#",))
    parser.optionxform = str
    try:
        parser.read_string("[experiment]\n" + text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}") from exc
    values = {}
    for key, raw in parser["experiment"].items():
        name = _key_to_field(key)
        if name not in _FIELDS:
            raise ConfigError(f"unknown config key {key!r}")
        try:
            values[name] = _coerce(name, raw)
        except ValueError as exc:
            raise ConfigError(f"bad value for {key!r}: {exc}") from exc
    for required in ("generator", "claim"):
        if required not in values:
            raise ConfigError(f"missing required key {required!r}")
    try:
        return ExperimentConfig(**values)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


def load_config(path: str | Path, **overrides) -> ExperimentConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    cfg = parse_config(text)
    overrides = {k: v for k, v in overrides.items() if v is not None}
    return replace(cfg, **overrides) if overrides else cfg
