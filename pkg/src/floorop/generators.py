"""BSDE drivers g(t, y, z) with declared Lipschitz metadata."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

Driver = Callable[[float, np.ndarray, np.ndarray], np.ndarray]


class GeneratorError(ValueError):
    pass


def _norm(z: np.ndarray, kind: str) -> np.ndarray:
    if kind == "l2":
        return np.sqrt(np.sum(z * z, axis=-1))
    if kind == "l1":
        return np.sum(np.abs(z), axis=-1)
    raise GeneratorError(f"unknown norm {kind!r}")


@dataclass(frozen=True)
class Generator:
    """Driver g evaluated on vectors: y has shape (n,), z has shape (n, d).

    ``lip_y``/``lip_z`` are declared, not inferred; construction spot-checks
    them (and ``zero_at_zero``) on random probes.
    """

    name: str
    fn: Driver = field(repr=False, compare=False)
    lip_y: float = 0.0
    lip_z: float = 0.0
    y_independent: bool = True
    zero_at_zero: bool = True
    mu: Optional[float] = None
    params: tuple = ()
    norm: str = "l2"
    dim: Optional[int] = None
    spot_check: bool = field(default=True, repr=False, compare=False)

    def __post_init__(self) -> None:
        if self.lip_y < 0 or self.lip_z < 0:
            raise GeneratorError("Lipschitz constants must be >= 0")
        if self.mu is not None and self.mu < 0:
            raise GeneratorError("dominating mu must be >= 0")
        if self.spot_check:
            self._spot_check()

    def __call__(self, t: float, y: np.ndarray, z: np.ndarray) -> np.ndarray:
        y = np.asarray(y, dtype=float)
        z = np.asarray(z, dtype=float)
        if z.ndim == 1:
            z = z[:, None]
        return np.asarray(self.fn(t, y, z), dtype=float) * np.ones(y.shape)

    @property
    def z_only(self) -> bool:
        return self.y_independent and self.zero_at_zero

    def _spot_check(self, count: int = 1000) -> None:
        dim = self.dim or 2
        rng = np.random.default_rng(12345)
        t = rng.uniform(0.0, 1.0)
        y = rng.uniform(-10, 10, count)
        z1 = rng.uniform(-10, 10, (count, dim))
        z2 = rng.uniform(-10, 10, (count, dim))
        g1 = self(t, y, z1)
        if not np.all(np.isfinite(g1)):
            raise GeneratorError(f"{self.name}: non-finite evaluation on probe grid")
        if self.zero_at_zero and self.y_independent:
            g0 = self(t, y, np.zeros((count, dim)))
            if np.max(np.abs(g0)) > 1e-12:
                raise GeneratorError(f"{self.name}: declared g(t, 0) = 0 but found {np.max(np.abs(g0)):.3g}")
        if self.y_independent:
            gy = self(t, y[::-1].copy(), z1)
            if np.max(np.abs(gy - g1)) > 1e-12:
                raise GeneratorError(f"{self.name}: declared y-independent but value moves with y")
        dz = _norm(z1 - z2, self.norm)
        ratio = np.abs(g1 - self(t, y, z2)) / np.where(dz > 0, dz, 1.0)
        if np.max(ratio) > self.lip_z * (1 + 1e-10) + 1e-12:
            raise GeneratorError(f"{self.name}: z-Lipschitz ratio {np.max(ratio):.6g} exceeds declared {self.lip_z}")


def ZERO() -> Generator:
    return Generator("zero", lambda t, y, z: np.zeros(y.shape), mu=0.0)


def LINEAR(b) -> Generator:
    """g(t, z) = <b, z>."""
    b_arr = np.atleast_1d(np.asarray(b, dtype=float))
    return Generator(
        "linear",
        lambda t, y, z: z @ b_arr,
        lip_z=float(np.sqrt(b_arr @ b_arr)),
        mu=float(np.sqrt(b_arr @ b_arr)),
        params=tuple(b_arr),
        dim=b_arr.size,
    )


def EMU(mu: float, norm: str = "l2") -> Generator:
    """g(t, z) = mu * |z|, the reference dominating driver."""
    if mu < 0:
        raise GeneratorError("mu must be >= 0")
    return Generator("emu", lambda t, y, z: mu * _norm(z, norm), lip_z=mu, mu=mu, params=(mu,), norm=norm)


def NEG_EMU(mu: float, norm: str = "l2") -> Generator:
    if mu < 0:
        raise GeneratorError("mu must be >= 0")
    return Generator("neg_emu", lambda t, y, z: -mu * _norm(z, norm), lip_z=mu, mu=mu, params=(mu,), norm=norm)


def DISCOUNT(r: float) -> Generator:
    """g(t, y, z) = -r y."""
    return Generator(
        "discount",
        lambda t, y, z: -r * y,
        lip_y=abs(r),
        y_independent=False,
        zero_at_zero=True,
        params=(r,),
    )


def custom(name: str, fn: Driver, lip_y: float = 0.0, lip_z: float = 0.0, *, y_independent: bool = True,
           zero_at_zero: bool = True, mu: Optional[float] = None, spot_check: bool = True) -> Generator:
    return Generator(name, fn, lip_y=lip_y, lip_z=lip_z, y_independent=y_independent,
                     zero_at_zero=zero_at_zero, mu=mu, spot_check=spot_check)


BUILTINS = {
    "zero": lambda **kw: ZERO(),
    "linear": lambda b=1.0, **kw: LINEAR(b),
    "emu": lambda mu=1.0, **kw: EMU(mu),
    "neg_emu": lambda mu=1.0, **kw: NEG_EMU(mu),
    "discount": lambda r=0.0, **kw: DISCOUNT(r),
}


def by_name(name: str, **params) -> Generator:
    try:
        factory = BUILTINS[name.lower()]
    except KeyError:
        raise GeneratorError(f"unknown generator {name!r}; choose from {sorted(BUILTINS)}") from None
    return factory(**params)


@dataclass
class LipschitzReport:
    worst_z_ratio: float
    worst_y_ratio: float
    declared_z: float
    declared_y: float
    ok: bool
    offending: Optional[tuple] = None


def validate_generator(gen: Generator, probe_count: int = 1000, box: float = 10.0, dim: int | None = None,
                       seed: int = 0) -> LipschitzReport:
    """Probe random pairs in [-box, box] and compare Lipschitz ratios to the declared constants."""
    if probe_count < 1:
        raise GeneratorError("probe_count must be >= 1")
    dim = dim or gen.dim or 1
    rng = np.random.default_rng(seed)
    t = rng.uniform(0.0, 1.0, probe_count)
    y1, y2 = rng.uniform(-box, box, (2, probe_count))
    z1, z2 = rng.uniform(-box, box, (2, probe_count, dim))
    gz1 = np.array([gen(tk, y1[k:k + 1], z1[k:k + 1])[0] for k, tk in enumerate(t)])
    gz2 = np.array([gen(tk, y1[k:k + 1], z2[k:k + 1])[0] for k, tk in enumerate(t)])
    gy2 = np.array([gen(tk, y2[k:k + 1], z1[k:k + 1])[0] for k, tk in enumerate(t)])
    dz = _norm(z1 - z2, gen.norm)
    dy = np.abs(y1 - y2)
    rz = np.abs(gz1 - gz2) / np.where(dz > 0, dz, np.inf)
    ry = np.abs(gz1 - gy2) / np.where(dy > 0, dy, np.inf)
    bad_z = rz > gen.lip_z * (1 + 1e-10) + 1e-300
    bad_y = ry > gen.lip_y * (1 + 1e-10) + 1e-300
    offending = None
    if bad_z.any():
        k = int(np.argmax(np.where(bad_z, rz, -np.inf)))
        offending = ("z", float(t[k]), float(y1[k]), z1[k].tolist(), z2[k].tolist(), float(rz[k]))
    elif bad_y.any():
        k = int(np.argmax(np.where(bad_y, ry, -np.inf)))
        offending = ("y", float(t[k]), float(y1[k]), float(y2[k]), z1[k].tolist(), float(ry[k]))
    return LipschitzReport(float(rz.max()), float(ry.max()), gen.lip_z, gen.lip_y, offending is None, offending)
