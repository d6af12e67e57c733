"""Independent ground truth: closed forms, full path-tree enumeration, CRR trees."""

from __future__ import annotations

import csv
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional

import numpy as np

from .generators import Generator

MAX_EXHAUSTIVE_STEPS = 20


class OracleError(ValueError):
    pass


@dataclass(frozen=True)
class OracleResult:
    label: str
    value: float
    method: str
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.method not in ("closed_form", "exhaustive", "tree"):
            raise OracleError(f"unknown oracle method {self.method!r}")

    @property
    def params_hash(self) -> str:
        return params_hash(self.label, self.params)


def params_hash(label: str, params: dict) -> str:
    blob = json.dumps({"label": label, **params}, sort_keys=True, default=float)
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def closed_form_linear(mu: float, t: float, w: float, T: float) -> float:
    """y_t = w + mu (T - t): the E^mu value of B_T when Z stays at 1."""
    return w + mu * (T - t)


def path_tree_positions(N: int, T: float) -> list:
    """Positions of every path prefix; prefix p at step i has 2^i entries,
    children 2p (down) and 2p + 1 (up)."""
    sqdt = np.sqrt(T / N)
    out = []
    for i in range(N + 1):
        ups = np.array([bin(p).count("1") for p in range(2**i)])
        out.append((2 * ups - i) * sqdt)
    return out


def exhaustive_expectation(claim: Callable, N: int, T: float, gen: Generator, floor=None,
                           path_functional: bool = False, return_tree: bool = False):
    """Run the backward scheme on the non-recombining tree of all 2^N paths.

    ``claim`` maps terminal positions (2^N, 1) to values, or with
    ``path_functional=True`` the position matrix (2^N, N + 1). ``floor`` is
    either None or a callable (t, positions (n, 1)) -> values. Returns the root
    value (and all levels if ``return_tree``).
    """
    if N > MAX_EXHAUSTIVE_STEPS:
        raise OracleError(f"exhaustive enumeration allows N <= {MAX_EXHAUSTIVE_STEPS}, got {N}")
    dt = T / N
    sqdt = np.sqrt(dt)
    pos = path_tree_positions(N, T)
    if path_functional:
        idx = np.arange(2**N)
        W = np.column_stack([pos[i][idx >> (N - i)] for i in range(N + 1)])
        v = np.asarray(claim(W), dtype=float)
    else:
        v = np.asarray(claim(pos[N][:, None]), dtype=float)
    levels = [v]
    for i in range(N - 1, -1, -1):
        up, down = v[1::2], v[0::2]
        yhat = 0.5 * (up + down)
        z = (0.5 * sqdt * (up - down) / dt)[:, None]
        v = yhat + gen(i * dt, yhat, z) * dt
        if floor is not None:
            v = np.maximum(v, floor(i * dt, pos[i][:, None]))
        levels.append(v)
    if return_tree:
        return levels[::-1]
    return float(v[0])


def binomial_american_put(spot: float, strike: float, r: float, sigma: float, T: float, steps: int) -> float:
    """Cox-Ross-Rubinstein tree with early exercise."""
    if steps < 1 or T <= 0 or sigma <= 0:
        raise OracleError("need steps >= 1, T > 0, sigma > 0")
    dt = T / steps
    u = np.exp(sigma * np.sqrt(dt))
    d = 1.0 / u
    q = (np.exp(r * dt) - d) / (u - d)
    if not 0.0 < q < 1.0:
        raise OracleError(f"degenerate risk-neutral probability {q}")
    disc = np.exp(-r * dt)
    j = np.arange(steps + 1)
    values = np.maximum(strike - spot * u**j * d ** (steps - j), 0.0)
    for i in range(steps - 1, -1, -1):
        j = np.arange(i + 1)
        cont = disc * (q * values[1:] + (1 - q) * values[:-1])
        values = np.maximum(cont, strike - spot * u**j * d ** (i - j))
    return float(values[0])


FIXTURE_FIELDS = ("oracle", "params_hash", "value", "params")


def write_fixtures(results: list, path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(FIXTURE_FIELDS)
        for r in results:
            w.writerow([r.label, r.params_hash, repr(r.value), json.dumps(r.params, sort_keys=True)])


def read_fixtures(path: str | Path) -> dict:
    """{(oracle, params_hash): value}."""
    with open(path, newline="") as fh:
        return {(row["oracle"], row["params_hash"]): float(row["value"]) for row in csv.DictReader(fh)}


def lookup(fixtures: dict, label: str, params: dict) -> Optional[float]:
    return fixtures.get((label, params_hash(label, params)))
