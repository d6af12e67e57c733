"""Time grids and the two Brownian backends: sampled ensembles and a recombining lattice."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

# Paths are drawn in fixed-size blocks, each block owning its own counter-based
# stream, so path m depends only on (seed, stream, m) and not on M or on how
# blocks are scheduled.
BLOCK_SIZE = 4096


class ParameterError(ValueError):
    """Invalid size or shape parameter."""


@dataclass(frozen=True)
class TimeGrid:
    """Uniform grid t_i = i*T/N on [0, T]."""

    T: float
    N: int

    def __post_init__(self) -> None:
        if int(self.N) != self.N or self.N < 1:
            raise ParameterError(f"N must be a positive integer, got {self.N}")
        if not np.isfinite(self.T) or self.T <= 0:
            raise ParameterError(f"T must be positive and finite, got {self.T}")

    @property
    def dt(self) -> float:
        return self.T / self.N

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.N + 1) * self.dt

    def t(self, i: int) -> float:
        return i * self.dt


@dataclass(frozen=True)
class PathEnsemble:
    """Sampled Brownian paths; ``W`` has shape (M, N + 1, d) with ``W[:, 0] == 0``."""

    grid: TimeGrid
    W: np.ndarray = field(repr=False)
    seed: int
    stream: int

    @property
    def M(self) -> int:
        return self.W.shape[0]

    @property
    def d(self) -> int:
        return self.W.shape[2]

    def increment(self, i: int) -> np.ndarray:
        """Delta W between steps i and i + 1, shape (M, d)."""
        return self.W[:, i + 1] - self.W[:, i]


def _block_generator(seed: int, stream: int, block: int) -> np.random.Generator:
    ss = np.random.SeedSequence(entropy=int(seed) & 0xFFFFFFFFFFFFFFFF,
                                spawn_key=(int(stream), int(block)))
    return np.random.Generator(np.random.Philox(ss))


def simulate_paths(grid: TimeGrid, d: int, M: int, seed: int, stream: int = 0) -> PathEnsemble:
    """Sample M Brownian paths of dimension d on ``grid``.

    Increments are N(0, dt) per component. Output is a pure function of
    (grid, d, M, seed, stream); path m is also unchanged when M grows.
    """
    if d < 1:
        raise ParameterError(f"d must be >= 1, got {d}")
    if M < 1:
        raise ParameterError(f"M must be >= 1, got {M}")
    N = grid.N
    sqdt = np.sqrt(grid.dt)
    W = np.zeros((M, N + 1, d))
    for b, start in enumerate(range(0, M, BLOCK_SIZE)):
        stop = min(start + BLOCK_SIZE, M)
        rng = _block_generator(seed, stream, b)
        dW = rng.standard_normal((stop - start, N, d)) * sqdt
        np.cumsum(dW, axis=1, out=W[start:stop, 1:])
    return PathEnsemble(grid=grid, W=W, seed=seed, stream=stream)


@dataclass(frozen=True)
class Lattice:
    """Recombining random walk with +-sqrt(dt) moves of probability 1/2.

    Node j at step i (j = 0..i) sits at (2j - i) * sqrt(dt); its children at
    step i + 1 are j (down) and j + 1 (up).
    """

    grid: TimeGrid

    def nodes(self, i: int) -> np.ndarray:
        return (2 * np.arange(i + 1) - i) * np.sqrt(self.grid.dt)

    def probabilities(self, i: int) -> np.ndarray:
        from scipy.stats import binom

        return binom.pmf(np.arange(i + 1), i, 0.5)

    def node_count(self, i: int) -> int:
        return i + 1


def build_lattice(grid: TimeGrid) -> Lattice:
    return Lattice(grid)
