"""Backward Euler scheme for BSDEs and the g-expectations it induces."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .condexp import Backend, LatticeBackend, StateMap
from .generators import EMU, NEG_EMU, Generator


class ClaimError(ValueError):
    pass


@dataclass(frozen=True)
class TerminalClaim:
    """Payoff xi as a function of the terminal Markov state.

    ``payoff`` receives the state with shape (n, d') and returns (n,). On
    ensembles a ``path_payoff`` taking the full W array (M, N + 1, d) may be
    given instead; such claims cannot be used on the lattice.
    """

    name: str
    payoff: Optional[Callable[[np.ndarray], np.ndarray]] = field(default=None, repr=False)
    state: Optional[StateMap] = field(default=None, repr=False)
    path_payoff: Optional[Callable[[np.ndarray], np.ndarray]] = field(default=None, repr=False)

    def at(self, backend: Backend, i: Optional[int] = None) -> np.ndarray:
        """Claim values on the nodes/paths of step ``i`` (default: the terminal step)."""
        i = backend.grid.N if i is None else i
        if self.path_payoff is not None and self.payoff is None:
            if backend.kind == "lattice":
                raise ClaimError(f"claim {self.name!r} is path-dependent; the lattice needs a node function")
            v = self.path_payoff(backend.paths.W[:, : i + 1])
        else:
            w = backend.brownian(i)
            x = w if self.state is None else self.state(backend.grid.t(i), w)
            v = self.payoff(np.asarray(x, dtype=float).reshape(len(w), -1))
        v = np.asarray(v, dtype=float).reshape(-1)
        if not np.all(np.isfinite(v)) or not np.isfinite(np.mean(v * v)):
            raise ClaimError(f"claim {self.name!r} is not finite / square-integrable on the backend")
        return v


def constant_claim(c: float) -> TerminalClaim:
    return TerminalClaim(f"const({c:g})", lambda x: np.full(len(x), float(c)))


def brownian_claim() -> TerminalClaim:
    """xi = first component of B_T."""
    return TerminalClaim("B_T", lambda x: x[:, 0].copy())


def abs_claim() -> TerminalClaim:
    return TerminalClaim("|B_T|", lambda x: np.sqrt(np.sum(x * x, axis=1)))


def square_claim() -> TerminalClaim:
    return TerminalClaim("B_T^2", lambda x: np.sum(x * x, axis=1))


def claim_from_values(name: str, fn: Callable[[np.ndarray], np.ndarray]) -> TerminalClaim:
    return TerminalClaim(name, fn)


def as_values(xi, backend: Backend, i: Optional[int] = None) -> np.ndarray:
    if isinstance(xi, TerminalClaim):
        return xi.at(backend, i)
    v = np.asarray(xi, dtype=float)
    i = backend.grid.N if i is None else i
    if v.ndim == 0:
        v = np.full(backend.size(i), float(v))
    if v.shape != (backend.size(i),):
        raise ClaimError(f"claim has shape {v.shape}, backend step {i} needs ({backend.size(i)},)")
    if not np.all(np.isfinite(v)):
        raise ClaimError("claim values must be finite")
    return v


@dataclass
class SolutionTriple:
    """Discrete (Y, Z, K) on steps ``start..end``.

    ``Y[k]`` and ``dK[k]`` live at absolute step ``start + k``; ``Z[k]`` has
    shape (n, d). ``dK[k]`` is the push applied at step ``start + k`` and
    K_{i+1} - K_i = dK_i, so K_start = 0. On the lattice K itself is path
    dependent and only its increments (node functions) are stored.
    """

    Y: list
    Z: list
    dK: list
    start: int
    end: int
    backend: Backend = field(repr=False)
    generator: str = ""
    floor: str = "none"

    def y(self, i: int) -> np.ndarray:
        return self.Y[i - self.start]

    def z(self, i: int) -> np.ndarray:
        return self.Z[i - self.start]

    def dk(self, i: int) -> np.ndarray:
        return self.dK[i - self.start]

    @property
    def y0(self) -> float:
        return float(self.backend.expectation(self.Y[0], self.start))

    def mean_K(self) -> np.ndarray:
        """E[K_i] for i = start..end."""
        inc = [self.backend.expectation(d, self.start + k) for k, d in enumerate(self.dK)]
        return np.concatenate([[0.0], np.cumsum(inc)])

    def K_paths(self) -> np.ndarray:
        """Pathwise K, shape (M, steps + 1); ensemble only."""
        if self.backend.kind != "ensemble":
            raise TypeError("pathwise K is only stored on ensembles; use dK on the lattice")
        cols = [np.zeros(self.backend.size(self.start))] + list(np.cumsum(np.array(self.dK), axis=0))
        return np.column_stack(cols)


def backward_step(y_next: np.ndarray, i: int, gen: Generator, backend: Backend):
    """One unreflected step: returns (Y_tilde_i, Z_i)."""
    yhat = backend.cond_exp(y_next, i)
    z = backend.z_estimate(y_next, yhat, i)
    y = yhat + gen(backend.grid.t(i), yhat, z) * backend.grid.dt
    if not np.all(np.isfinite(y)):
        raise FloatingPointError(f"overflow in Y at step {i}")
    return y, z


def backward(terminal: np.ndarray, t: int, s: int, gen: Generator, backend: Backend, floor=None) -> SolutionTriple:
    """Run the (reflected when ``floor`` is given) scheme from step t down to step s."""
    if not 0 <= s <= t <= backend.grid.N:
        raise IndexError(f"need 0 <= s <= t <= N, got s={s}, t={t}")
    n = t - s
    Y: list = [None] * (n + 1)
    Z: list = [None] * n
    dK: list = [None] * n
    Y[n] = np.asarray(terminal, dtype=float)
    for k in range(n - 1, -1, -1):
        i = s + k
        ytil, Z[k] = backward_step(Y[k + 1], i, gen, backend)
        bound = None if floor is None else floor.values(i, backend)
        if bound is None:
            Y[k] = ytil
            dK[k] = np.zeros_like(ytil)
        else:
            Y[k] = np.maximum(ytil, bound)
            dK[k] = Y[k] - ytil
    return SolutionTriple(Y, Z, dK, s, t, backend, gen.name, getattr(floor, "name", "none"))


def solve_local(claim_on_subtree: Callable[[int, LatticeBackend], np.ndarray], s: int, t: int, gen: Generator,
                backend: LatticeBackend, floor=None) -> np.ndarray:
    """Evaluate at step s a claim known at step t that also depends on the step-s node.

    ``claim_on_subtree(k, sub)`` returns the claim on step t of the subtree
    rooted at node k of step s. Each subtree is solved separately, which is
    exact because the recursion at a node only sees its descendants.
    """
    if backend.kind != "lattice":
        raise TypeError("subtree evaluation is a lattice-only operation")
    out = np.empty(backend.size(s))
    for k in range(backend.size(s)):
        sub = backend.subtree(s, k)
        leaves = np.asarray(claim_on_subtree(k, sub), dtype=float)
        out[k] = backward(leaves, t, s, gen, sub, floor).Y[0][0]
    return out


def solve_bsde(xi, gen: Generator, backend: Backend) -> SolutionTriple:
    """Y_i = E[Y_{i+1}|F_i] + g(t_i, E[Y_{i+1}|F_i], Z_i) dt with Z_i = E[Y_{i+1} dW_i|F_i] / dt."""
    N = backend.grid.N
    return backward(as_values(xi, backend, N), N, 0, gen, backend)


def e_mu(xi, mu: float, backend: Backend) -> SolutionTriple:
    return solve_bsde(xi, EMU(mu), backend)


def duality_check(X, Y_shift: np.ndarray, mu: float, backend: Backend, t_index: int) -> float:
    """max |E^{-mu}_{t,T}[X + Y] - (Y - E^{mu}_{t,T}[-X])| at step ``t_index``.

    ``Y_shift`` holds the F_t-measurable shift on step ``t_index`` (one value
    per node or path). The two sides are computed by separate solves.
    """
    N = backend.grid.N
    Y_shift = np.asarray(Y_shift, dtype=float)
    if Y_shift.ndim == 0:
        Y_shift = np.full(backend.size(t_index), float(Y_shift))
    neg, pos = NEG_EMU(mu), EMU(mu)
    if backend.kind == "lattice":
        xi_fn = X if isinstance(X, TerminalClaim) else None
        if xi_fn is None:
            x_all = as_values(X, backend, N)

        def shifted(k, sub):
            base = xi_fn.at(sub) if xi_fn is not None else x_all[sub.k0: sub.k0 + sub.size(N)]
            return base + Y_shift[k]

        lhs = solve_local(shifted, t_index, N, neg, backend)
    else:
        lhs = backward(as_values(X, backend, N) + Y_shift, N, t_index, neg, backend).Y[0]
    rhs = Y_shift - backward(-as_values(X, backend, N), N, t_index, pos, backend).Y[0]
    return float(np.max(np.abs(lhs - rhs)))


@dataclass
class MomentBoundReport:
    p: float
    mu: float
    t_index: int
    lhs: float
    rhs: float
    factor: float
    slack: float
    passed: bool


def moment_bound_check(X, mu: float, p: float, backend: Backend, t_index: int = 0,
                       slack: Optional[float] = None) -> MomentBoundReport:
    """Compare E[(E^mu_{t,T}[X])^p] with exp(p mu^2 (T - t) / (2 (p - 1))) E[X^p] for X >= 0."""
    if not 1 < p <= 2:
        raise ValueError(f"p must lie in (1, 2], got {p}")
    N = backend.grid.N
    x = as_values(X, backend, N)
    if np.any(x < 0):
        raise ClaimError("moment bound needs a nonnegative claim")
    y = backward(x, N, t_index, EMU(mu), backend).Y[0]
    T_minus_t = backend.grid.T - backend.grid.t(t_index)
    factor = float(np.exp(p * mu**2 * T_minus_t / (2 * (p - 1))))
    lhs = backend.expectation(np.abs(y) ** p, t_index)
    rhs = factor * backend.expectation(x**p, N)
    if backend.kind == "lattice":
        slack = 1e-6 if slack is None else slack
        passed = lhs <= rhs * (1 + slack)
    else:
        M = backend.size(N)
        se = np.sqrt(np.var(np.abs(y) ** p) / M + factor**2 * np.var(x**p) / M)
        slack = 3 * se if slack is None else slack
        passed = lhs <= rhs + slack
    return MomentBoundReport(p, mu, t_index, float(lhs), float(rhs), factor, float(slack), bool(passed))


def restart_consistency(sol: SolutionTriple, j: int, gen: Generator, floor=None) -> float:
    """Restart the recursion at step j from sol's own Y_j; max deviation from sol on steps < j."""
    re = backward(sol.y(j), j, sol.start, gen, sol.backend, floor)
    return max(float(np.max(np.abs(re.y(i) - sol.y(i)))) for i in range(sol.start, j + 1))



def pathwise_values(sol: SolutionTriple) -> np.ndarray:
    """Per-path estimator Y_end + sum_i (Y_i - E[Y_{i+1}|F_i]).

    Each summand is the driver step plus the reflection push. The regression
    keeps an intercept, so residuals average to zero and the sample mean of
    this estimator is Y at ``start``; its spread gives the standard error.
    """
    be = sol.backend
    v = np.array(sol.y(sol.end), dtype=float)
    for i in range(sol.start, sol.end):
        v = v + sol.y(i) - be.cond_exp(sol.y(i + 1), i)
    return v


def standard_error(sol: SolutionTriple) -> float:
    """Monte-Carlo standard error of ``sol.y0``; 0 on the lattice."""
    if sol.backend.kind == "lattice":
        return 0.0
    v = pathwise_values(sol)
    return float(np.std(v, ddof=1) / np.sqrt(len(v)))
