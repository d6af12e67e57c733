"""Conditional expectations E[. | F_{t_i}] on the two backends.

Values at a step are plain float arrays: one entry per lattice node (node
``j`` at step ``i`` of a lattice rooted at node ``k0`` of step ``i0`` is the
main-lattice node ``k0 + j``) or one entry per sampled path.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy import linalg

from .paths import Lattice, PathEnsemble, TimeGrid, build_lattice

StateMap = Callable[[float, np.ndarray], np.ndarray]


class DegenerateRegressionError(ArithmeticError):
    def __init__(self, step: int, detail: str = ""):
        self.step = step
        super().__init__(f"singular regression normal equations at step {step}" + (f": {detail}" if detail else ""))


@dataclass(frozen=True)
class RegressionSpec:
    """Polynomial least-squares basis used by the ensemble engine.

    ``state`` maps (t, W_t) with W_t of shape (M, d) to the Markov state,
    shape (M, d'); ``None`` means the Brownian position itself.
    """

    degree: int = 4
    ridge: float = 1e-8
    state: Optional[StateMap] = None

    def __post_init__(self) -> None:
        if self.degree < 0:
            raise ValueError("regression degree must be >= 0")
        if not self.ridge >= 0:
            raise ValueError("ridge must be >= 0")

    def describe(self) -> str:
        name = "W" if self.state is None else getattr(self.state, "__name__", "custom")
        return f"poly(deg={self.degree}, ridge={self.ridge:g}, state={name})"


class LatticeBackend:
    """Exact engine on the recombining walk, optionally restricted to the subtree
    rooted at node ``k0`` of step ``i0``."""

    kind = "lattice"
    d = 1

    def __init__(self, grid: TimeGrid, i0: int = 0, k0: int = 0):
        self.grid = grid
        self.lattice: Lattice = build_lattice(grid)
        self.i0 = i0
        self.k0 = k0
        self.sqdt = np.sqrt(grid.dt)

    def __repr__(self) -> str:
        return f"LatticeBackend(T={self.grid.T}, N={self.grid.N}, root=({self.i0}, {self.k0}))"

    def size(self, i: int) -> int:
        return i - self.i0 + 1

    def brownian(self, i: int) -> np.ndarray:
        j = np.arange(self.size(i))
        return ((2 * (self.k0 + j) - i) * self.sqdt)[:, None]

    def state(self, i: int, spec: RegressionSpec | None = None) -> np.ndarray:
        w = self.brownian(i)
        if spec is None or spec.state is None:
            return w
        return spec.state(self.grid.t(i), w)

    def probabilities(self, i: int) -> np.ndarray:
        from scipy.stats import binom

        m = i - self.i0
        return binom.pmf(np.arange(m + 1), m, 0.5)

    def expectation(self, values: np.ndarray, i: int) -> float:
        return float(self.probabilities(i) @ values)

    def cond_exp(self, v_next: np.ndarray, i: int) -> np.ndarray:
        _check_finite(v_next, i + 1)
        return 0.5 * (v_next[1:] + v_next[:-1])

    def cond_exp_weighted(self, v_next: np.ndarray, i: int, j: int = 0) -> np.ndarray:
        """E[v_{i+1} * (W_{i+1} - W_i) | F_i]."""
        if j != 0:
            raise IndexError("lattice backend is one-dimensional")
        _check_finite(v_next, i + 1)
        return 0.5 * self.sqdt * (v_next[1:] - v_next[:-1])

    def z_estimate(self, v_next: np.ndarray, yhat: np.ndarray, i: int) -> np.ndarray:
        return (self.cond_exp_weighted(v_next, i) / self.grid.dt)[:, None]

    def subtree(self, i: int, k: int) -> "LatticeBackend":
        """Backend restricted to descendants of node ``k`` at step ``i``."""
        return LatticeBackend(self.grid, i0=i, k0=self.k0 + k)


class EnsembleBackend:
    """Regression engine on sampled paths.

    Basis columns are demeaned, so the intercept is the sample mean of the
    target and carries no ridge penalty; constants are reproduced up to
    rounding. State columns that are constant across paths at a step are
    dropped, which makes step 0 a plain sample mean.
    """

    kind = "ensemble"

    def __init__(self, paths: PathEnsemble, spec: RegressionSpec | None = None):
        self.paths = paths
        self.grid = paths.grid
        self.spec = spec or RegressionSpec()
        self.d = paths.d
        self._cache: dict[int, tuple[np.ndarray, tuple]] = {}

    def __repr__(self) -> str:
        return f"EnsembleBackend(M={self.paths.M}, N={self.grid.N}, d={self.d}, {self.spec.describe()})"

    def size(self, i: int) -> int:
        return self.paths.M

    def brownian(self, i: int) -> np.ndarray:
        return self.paths.W[:, i]

    def state(self, i: int, spec: RegressionSpec | None = None) -> np.ndarray:
        spec = spec or self.spec
        w = self.brownian(i)
        if spec.state is None:
            return w
        s = np.asarray(spec.state(self.grid.t(i), w), dtype=float)
        return s[:, None] if s.ndim == 1 else s

    def probabilities(self, i: int) -> np.ndarray:
        return np.full(self.paths.M, 1.0 / self.paths.M)

    def expectation(self, values: np.ndarray, i: int) -> float:
        return float(np.mean(values))

    def design(self, i: int) -> np.ndarray:
        return self._fit(i)[0]

    def _fit(self, i: int):
        if i in self._cache:
            return self._cache[i]
        x = self.state(i)
        M = x.shape[0]
        cols = []
        for c in range(x.shape[1]):
            mean, sd = x[:, c].mean(), x[:, c].std()
            if sd <= 1e-12 * (1.0 + abs(mean)):
                continue
            z = (x[:, c] - mean) / sd
            p = np.ones_like(z)
            for _ in range(self.spec.degree):
                p = p * z
                cols.append(p)
        # Demeaned columns make the intercept orthogonal to the rest: it is the
        # sample mean of the target, so constant shifts pass straight through.
        X = np.column_stack(cols) if cols else np.empty((M, 0))
        X = X - X.mean(axis=0)
        # unit-variance columns: a diagonal change of basis, same span, far
        # better conditioned when a state column is mostly zero
        sd = X.std(axis=0)
        X = X[:, sd > 0] / sd[sd > 0]
        cho = None
        if X.shape[1]:
            G = X.T @ X / M
            G[np.diag_indices_from(G)] += self.spec.ridge
            cond = np.linalg.cond(G)
            if not cond <= 1e13:
                raise DegenerateRegressionError(i, f"condition number {cond:.3g}")
            try:
                cho = linalg.cho_factor(G)
            except linalg.LinAlgError as exc:
                raise DegenerateRegressionError(i, str(exc)) from exc
        self._cache[i] = (X, cho)
        return X, cho

    def project(self, target: np.ndarray, i: int) -> np.ndarray:
        """Least-squares projection of ``target`` (per path) onto the step-i basis."""
        X, cho = self._fit(i)
        m = target.mean()
        if cho is None:
            return np.full(len(target), m)
        beta = linalg.cho_solve(cho, X.T @ (target - m) / X.shape[0])
        return m + X @ beta

    def cond_exp(self, v_next: np.ndarray, i: int) -> np.ndarray:
        _check_finite(v_next, i + 1)
        return self.project(v_next, i)

    def cond_exp_weighted(self, v_next: np.ndarray, i: int, j: int = 0) -> np.ndarray:
        _check_finite(v_next, i + 1)
        return self.project(v_next * self.paths.increment(i)[:, j], i)

    def z_estimate(self, v_next: np.ndarray, yhat: np.ndarray, i: int) -> np.ndarray:
        # Centred by the step-i prediction: kills the E[c * dW | F_i] noise term,
        # so Z is invariant under constant shifts of the claim up to rounding.
        r = v_next - yhat
        dW = self.paths.increment(i)
        return np.column_stack([self.project(r * dW[:, j], i) for j in range(self.d)]) / self.grid.dt


Backend = LatticeBackend | EnsembleBackend


def _check_finite(v: np.ndarray, step: int) -> None:
    if not np.all(np.isfinite(v)):
        raise FloatingPointError(f"non-finite values at step {step}")


def cond_exp(values: np.ndarray, i: int, backend: Backend) -> np.ndarray:
    return backend.cond_exp(values, i)


def cond_exp_weighted(values: np.ndarray, i: int, backend: Backend, j: int = 0) -> np.ndarray:
    return backend.cond_exp_weighted(values, i, j)
