"""Reflected scheme: floors, the increasing process K and its checks, American puts."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

from .bsde import ClaimError, SolutionTriple, TerminalClaim, as_values, backward, backward_step
from .condexp import Backend, EnsembleBackend, LatticeBackend, RegressionSpec, StateMap
from .generators import DISCOUNT, ZERO, Generator
from .paths import ParameterError, TimeGrid, simulate_paths


class TerminalBelowFloorError(ClaimError):
    """Raised when xi < S_T somewhere; the reflected equation needs S_T <= xi."""


@dataclass(frozen=True)
class Obstacle:
    """Floor S(t, state) bounded above by ``C``; ``fn=None`` is the sentinel NO_FLOOR.

    ``fn`` receives (t, x) with x the state of shape (n, d'), where the state
    is ``state(t, W_t)`` or W_t itself.
    """

    name: str
    fn: Optional[Callable[[float, np.ndarray], np.ndarray]] = field(default=None, repr=False)
    C: float = np.inf
    state: Optional[StateMap] = field(default=None, repr=False)
    continuous: bool = True
    offset: float = 0.0

    def __post_init__(self) -> None:
        if self.fn is None:
            return
        if not np.isfinite(self.C):
            raise ParameterError(f"floor {self.name!r} needs a finite upper bound C")
        rng = np.random.default_rng(2024)
        t = rng.uniform(0.0, 1.0)
        w = rng.uniform(-10.0, 10.0, (1000, 1))
        probe = self._raw(t, w)
        if np.any(probe > self.C + 1e-12 * max(1.0, abs(self.C))):
            raise ParameterError(f"floor {self.name!r} exceeds its declared bound C={self.C} "
                                 f"(max probe {probe.max():.6g})")

    @property
    def is_none(self) -> bool:
        return self.fn is None

    def _raw(self, t: float, w: np.ndarray) -> np.ndarray:
        x = w if self.state is None else self.state(t, w)
        x = np.asarray(x, dtype=float).reshape(len(w), -1)
        v = np.asarray(self.fn(t, x), dtype=float) * np.ones(len(w))
        return v + self.offset if self.offset else v

    def values(self, i: int, backend: Backend) -> Optional[np.ndarray]:
        if self.fn is None:
            return None
        return self._raw(backend.grid.t(i), backend.brownian(i))

    def shifted(self, c: float) -> "Obstacle":
        """The floor S + c with bound C + c."""
        if self.fn is None:
            return self
        return replace(self, name=f"{self.name}{c:+g}", C=self.C + c, offset=self.offset + c)


NO_FLOOR = Obstacle("none")


def constant_floor(level: float, C: Optional[float] = None) -> Obstacle:
    return Obstacle(f"const({level:g})", lambda t, x: np.full(len(x), float(level)),
                    C=float(level if C is None else C))


def zero_floor() -> Obstacle:
    return constant_floor(0.0)


def _check_terminal(xi_vals: np.ndarray, floor: Obstacle, backend: Backend) -> None:
    s_T = floor.values(backend.grid.N, backend)
    if s_T is not None and np.any(xi_vals < s_T):
        k = int(np.argmax(s_T - xi_vals))
        raise TerminalBelowFloorError(
            f"terminal-below-floor: xi < S_T at index {k} (xi={xi_vals[k]:.6g}, S_T={s_T[k]:.6g})")


def solve_rbsde(xi, gen: Generator, floor: Obstacle, backend: Backend) -> SolutionTriple:
    """Predict with the plain step, then project: Y_i = max(Y~_i, S_i), dK_i = Y_i - Y~_i."""
    N = backend.grid.N
    x = as_values(xi, backend, N)
    _check_terminal(x, floor, backend)
    return backward(x, N, 0, gen, backend, None if floor.is_none else floor)


def skorokhod_residual(sol: SolutionTriple, floor: Obstacle) -> float:
    """Largest pathwise sum of (Y_i - S_i) dK_i."""
    if floor.is_none:
        return 0.0
    be = sol.backend
    terms = []
    for i in range(sol.start, sol.end):
        dk = sol.dk(i)
        s = floor.values(i, be)
        terms.append(np.where(dk > 0, (sol.y(i) - s) * dk, 0.0))
    if not terms:
        return 0.0
    if be.kind == "ensemble":
        return float(np.max(np.sum(terms, axis=0)))
    # max over lattice paths by dynamic programming
    best = np.zeros(be.size(sol.end))
    for k in range(len(terms) - 1, -1, -1):
        best = terms[k] + np.maximum(best[1:], best[:-1])
    return float(best.max())


@dataclass
class FlatnessReport:
    flat: bool
    violations: list


def flatness_check(sol: SolutionTriple, floor: Obstacle) -> FlatnessReport:
    """dK_i must vanish wherever Y_i > S_i strictly."""
    bad = []
    if not floor.is_none:
        for i in range(sol.start, sol.end):
            gap = sol.y(i) - floor.values(i, sol.backend)
            idx = np.flatnonzero((gap > 0) & (sol.dk(i) != 0))
            bad.extend((i, int(k), float(gap[k]), float(sol.dk(i)[k])) for k in idx)
    return FlatnessReport(not bad, bad)


def _require_z_only(gen: Generator, what: str) -> None:
    if not gen.z_only:
        raise ValueError(f"{what} needs a y-independent generator with g(t, 0) = 0, got {gen.name!r}")


def floor_shift_solve(xi, gen: Generator, floor: Obstacle, C: float, backend: Backend):
    """Solve (xi, S) and (xi - C, S - C); return both and max_i |Y1_i - (Y2_i + C)|."""
    _require_z_only(gen, "floor shift")
    x = as_values(xi, backend)
    first = solve_rbsde(x, gen, floor, backend)
    second = solve_rbsde(x - C, gen, floor.shifted(-C), backend)
    residual = max(float(np.max(np.abs(a - (b + C)))) for a, b in zip(first.Y, second.Y))
    return first, second, residual


def doob_meyer_verify(xi, gen: Generator, floor: Obstacle, backend: Backend, s: int, t: int) -> float:
    """Run the unreflected recursion from Y_t down to s, adding back each dK_j.

    The result must reproduce Y_s: Y + K evolves as a martingale of the
    unreflected operator. Returns max |M_s - Y_s|.
    """
    if backend.kind != "lattice":
        raise TypeError("Doob-Meyer verification is lattice-only")
    _require_z_only(gen, "Doob-Meyer verification")
    if not 0 <= s <= t <= backend.grid.N:
        raise IndexError("need 0 <= s <= t <= N")
    sol = solve_rbsde(xi, gen, floor, backend)
    m = sol.y(t)
    for j in range(t - 1, s - 1, -1):
        m = backward_step(m, j, gen, backend)[0] + sol.dk(j)
    return float(np.max(np.abs(m - sol.y(s))))


@dataclass
class SupermartingaleReport:
    worst_margin: float     # max over (s, t, node) of unreflected_{s,t}[Y_t] - Y_s; <= 0 expected
    min_margin: float       # most negative margin; < 0 shows strict inequality somewhere
    witness: tuple          # (s, t, node) of the worst margin
    passed: bool
    strict_somewhere: bool


def supermartingale_check(xi, gen: Generator, floor: Obstacle, backend: Backend,
                          tol: float = 1e-10) -> SupermartingaleReport:
    """Check unreflected_{s,t}[Y_t] <= Y_s for every grid pair s < t."""
    _require_z_only(gen, "supermartingale check")
    sol = solve_rbsde(xi, gen, floor, backend)
    worst, least, witness = -np.inf, np.inf, (0, 0, 0)
    for t in range(1, backend.grid.N + 1):
        m = sol.y(t)
        for s in range(t - 1, -1, -1):
            m, _ = backward_step(m, s, gen, backend)
            margin = m - sol.y(s)
            k = int(np.argmax(margin))
            if margin[k] > worst:
                worst, witness = float(margin[k]), (s, t, k)
            least = min(least, float(margin.min()))
    return SupermartingaleReport(worst, least, witness, worst <= tol, least < -tol)


def forward_price(spot: float, r: float, sigma: float) -> StateMap:
    def price(t, w):
        return spot * np.exp((r - 0.5 * sigma**2) * t + sigma * w[:, :1])

    price.__name__ = "X"
    return price


def american_put(spot: float, strike: float, r: float, sigma: float, discounted: bool = False):
    """(xi, generator, floor) of the American put on X_t = spot exp((r - sigma^2/2) t + sigma B_t).

    ``discounted=False`` uses g = -r y on undiscounted payoffs; ``True`` works
    with e^{-rt}-discounted payoffs and g = 0, which keeps the driver z-only.
    """
    if spot <= 0 or strike < 0 or sigma < 0:
        raise ParameterError("need spot > 0, strike >= 0, sigma >= 0")
    X = forward_price(spot, r, sigma)
    if discounted:
        def payoff_at(t, x):
            return np.exp(-r * t) * np.maximum(strike - x[:, 0], 0.0)
        gen = ZERO()
    else:
        def payoff_at(t, x):
            return np.maximum(strike - x[:, 0], 0.0)
        gen = DISCOUNT(r)
    floor = Obstacle(f"put({strike:g})", payoff_at, C=float(strike) if strike > 0 else 0.0, state=X)
    return floor, gen, X, payoff_at


def put_state(spot: float, strike: float, r: float, sigma: float) -> StateMap:
    """Regression state (X_t, (K - X_t)^+) for puts; the payoff column carries the kink."""
    X = forward_price(spot, r, sigma)

    def state(t, w):
        x = X(t, w)[:, 0]
        return np.column_stack([x, np.maximum(strike - x, 0.0)])

    state.__name__ = "X,(K-X)+"
    return state


def american_put_problem(spot: float, strike: float, r: float, sigma: float, T: float, discounted: bool = False):
    floor, gen, X, payoff_at = american_put(spot, strike, r, sigma, discounted)
    xi = TerminalClaim(f"put({strike:g})", lambda x: payoff_at(T, x), state=X)
    return xi, gen, floor


def price_american(spot: float, strike: float, r: float, sigma: float, T: float, N: int,
                   backend: str | Backend = "lattice", M: int = 100_000, seed: int = 0,
                   degree: int = 4, ridge: float = 1e-8) -> float:
    """American put value Y_0 of the reflected equation with g = -r y and floor (K - X_t)^+."""
    if not sigma > 0:
        raise ParameterError("sigma must be > 0")
    grid = TimeGrid(T, N)
    xi, gen, floor = american_put_problem(spot, strike, r, sigma, T)
    if isinstance(backend, str):
        if backend == "lattice":
            be: Backend = LatticeBackend(grid)
        elif backend == "ensemble":
            spec = RegressionSpec(degree=degree, ridge=ridge, state=put_state(spot, strike, r, sigma))
            be = EnsembleBackend(simulate_paths(grid, 1, M, seed), spec)
        else:
            raise ParameterError(f"unknown backend {backend!r}")
    else:
        be = backend
    return solve_rbsde(xi, gen, floor, be).y0
