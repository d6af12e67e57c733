"""Dynamic operators E_{s,t} built from the reflected scheme, and their axiom checks."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .bsde import ClaimError, TerminalClaim, as_values, backward, solve_local
from .condexp import Backend
from .generators import EMU, NEG_EMU, Generator
from .rbsde import NO_FLOOR, Obstacle

AXIOMS = ("D1", "D2", "D3", "D4", "H1", "H2", "SANDWICH", "MIX")
# axioms whose claims mix an F_s factor into an F_t claim; the regression engine
# only sees the step-i state, so these are lattice-only.
_LOCAL_AXIOMS = {"D4", "H2", "MIX"}

StepClaim = Callable[[int], np.ndarray]
Event = Callable[[int], np.ndarray]


class ClaimBelowFloorError(ClaimError):
    pass


class UnsupportedOnBackend(TypeError):
    pass


@dataclass(frozen=True)
class TolerancePolicy:
    """Lattice checks use an absolute tolerance; ensemble checks allow
    ``se_multiple`` Monte-Carlo standard errors of the claims involved."""

    lattice_abs: float = 1e-10
    se_multiple: float = 3.0

    def tolerance(self, backend: Backend, *inputs: np.ndarray) -> float:
        if backend.kind == "lattice":
            return self.lattice_abs
        M = backend.size(backend.grid.N)
        var = sum(float(np.var(x)) for x in inputs)
        return self.se_multiple * np.sqrt(var / M) + self.lattice_abs


class DynamicOperator:
    """E_{s,t}[Y] := value at step s of the (reflected) scheme restarted from Y at step t.

    ``claim`` is either an array on step t, or on the lattice a callable
    ``(k, subtree) -> array`` giving the claim below node k of step s.
    """

    def __init__(self, backend: Backend, generator: Generator, floor: Obstacle = NO_FLOOR,
                 mu: Optional[float] = None, name: str = ""):
        self.backend = backend
        self.generator = generator
        self.floor = floor
        self.mu = generator.mu if mu is None else mu
        self.name = name or f"{generator.name}/{floor.name}"

    def __repr__(self) -> str:
        return f"{type(self).__name__}({self.name}, {self.backend!r})"

    def floor_at(self, i: int) -> Optional[np.ndarray]:
        return self.floor.values(i, self.backend)

    def _check_domain(self, values: np.ndarray, i: int, offset: int = 0) -> None:
        s = self.floor_at(i)
        if s is None:
            return
        s = s[offset: offset + len(values)]
        if np.any(values < s - 1e-12):
            k = int(np.argmax(s - values))
            raise ClaimBelowFloorError(f"claim below floor at step {i}, index {offset + k}")

    def evaluate(self, s: int, t: int, claim) -> np.ndarray:
        floor = None if self.floor.is_none else self.floor
        if callable(claim):
            def checked(k, sub):
                leaves = np.asarray(claim(k, sub), dtype=float)
                self._check_domain(leaves, t, sub.k0)
                return leaves
            return solve_local(checked, s, t, self.generator, self.backend, floor)
        values = as_values(claim, self.backend, t)
        self._check_domain(values, t)
        if s == t:
            return values
        return backward(values, t, s, self.generator, self.backend, floor).Y[0]

    def path(self, t: int, claim: np.ndarray, s: int = 0):
        """Full solution from step t down to s (for strict-above-floor tests)."""
        floor = None if self.floor.is_none else self.floor
        return backward(as_values(claim, self.backend, t), t, s, self.generator, self.backend, floor)


class ZetaShiftedOperator(DynamicOperator):
    """E^zeta_{s,t}[X] := E_{s,t}[X + zeta_t] - zeta_s with zeta_u = E_{u,T}[zeta]."""

    def __init__(self, base: DynamicOperator, zeta: np.ndarray):
        super().__init__(base.backend, base.generator, base.floor, base.mu, f"zeta[{base.name}]")
        self.base = base
        N = base.backend.grid.N
        sol = base.path(N, zeta, 0)
        self._zeta = [sol.y(i) for i in range(N + 1)]

    def zeta(self, i: int) -> np.ndarray:
        return self._zeta[i]

    def evaluate(self, s: int, t: int, claim) -> np.ndarray:
        z_t = self._zeta[t]
        if callable(claim):
            def shifted(k, sub):
                return np.asarray(claim(k, sub), dtype=float) + z_t[sub.k0: sub.k0 + sub.size(t)]
            return self.base.evaluate(s, t, shifted) - self._zeta[s]
        return self.base.evaluate(s, t, as_values(claim, self.backend, t) + z_t) - self._zeta[s]


def zeta_shift(op: DynamicOperator, zeta) -> ZetaShiftedOperator:
    z = as_values(zeta, op.backend)
    if np.any(z < 0):
        raise ClaimError("zeta must be nonnegative")
    return ZetaShiftedOperator(op, z)


def rbsde_operator(backend: Backend, generator: Generator, floor: Obstacle = NO_FLOOR,
                   mu: Optional[float] = None) -> DynamicOperator:
    return DynamicOperator(backend, generator, floor, mu)


# ---------------------------------------------------------------- trial inputs

def claim_source(claim, backend: Backend) -> StepClaim:
    """Turn a TerminalClaim (or a constant) into a step-indexed claim."""
    if isinstance(claim, TerminalClaim):
        return lambda i: claim.at(backend, i)
    if callable(claim):
        return claim
    if np.ndim(claim) == 0:
        return lambda i: np.full(backend.size(i), float(claim))
    raise TypeError("claims must be TerminalClaim, constant or step -> array callables")


def random_claim(backend: Backend, seed: int, low: float = 0.0, high: float = 1.0,
                 floor: Obstacle = NO_FLOOR) -> StepClaim:
    """Independent uniform node values on every step, lifted onto the floor when one is given."""
    def claim(i: int) -> np.ndarray:
        rng = np.random.default_rng([seed, i])
        v = rng.uniform(low, high, backend.size(i))
        s = floor.values(i, backend)
        return v if s is None else s + np.abs(v)
    return claim


def sign_event(backend: Backend) -> Event:
    return lambda i: (backend.brownian(i)[:, 0] >= 0).astype(float)


def random_event(backend: Backend, seed: int, p: float = 0.5) -> Event:
    return lambda i: (np.random.default_rng([seed, 7, i]).uniform(size=backend.size(i)) < p).astype(float)


# ---------------------------------------------------------------- reports

@dataclass
class AxiomReport:
    axiom: str
    backend: str
    violation: float
    tolerance: float
    passed: bool
    witness_step: int = -1
    witness_index: int = -1
    l2_violation: float = 0.0
    trial: int = 0
    note: str = ""

    CSV_HEADER = "axiom,backend,violation,tolerance,pass,witness_step,witness_index"

    def csv_row(self) -> str:
        return (f"{self.axiom},{self.backend},{self.violation:.6e},{self.tolerance:.6e},"
                f"{str(self.passed).lower()},{self.witness_step},{self.witness_index}")


class _Worst:
    """Tracks the largest violation and where it happened."""

    def __init__(self):
        self.value = 0.0
        self.step = -1
        self.index = -1
        self.sq = []
        self.tol = 0.0

    def add(self, excess: np.ndarray, step: int, tol: float = 0.0) -> None:
        excess = np.atleast_1d(np.asarray(excess, dtype=float))
        self.sq.append(float(np.mean(np.maximum(excess, 0.0) ** 2)))
        self.tol = max(self.tol, tol)
        k = int(np.argmax(excess))
        if excess[k] > self.value or self.step < 0:
            self.value, self.step, self.index = max(float(excess[k]), 0.0), step, k

    def report(self, axiom: str, backend: Backend, trial: int, note: str = "") -> AxiomReport:
        l2 = float(np.sqrt(max(self.sq))) if self.sq else 0.0
        return AxiomReport(axiom, backend.kind, self.value, self.tol, self.value <= self.tol,
                           self.step, self.index, l2, trial, note)


def _pairs(N: int, times):
    return list(times) if times is not None else [(s, t) for t in range(N + 1) for s in range(t + 1)]


def check_axiom(op: DynamicOperator, axiom: str, trial: Sequence, *, events: Sequence[Event] = (),
                constants: Sequence[float] = (), mu: Optional[float] = None, times=None,
                policy: TolerancePolicy = TolerancePolicy(), trial_index: int = 0) -> AxiomReport:
    """Evaluate one axiom's defining (in)equality nodewise over the grid.

    ``trial`` holds one or two step-indexed claims (see ``claim_source``).
    ``times`` overrides the (s, t) pairs examined; for D3 it is a list of
    (r, s, t) triples. Violations are measured so that 0 means exact.
    """
    axiom = axiom.upper()
    if axiom not in AXIOMS:
        raise ValueError(f"unknown axiom id {axiom!r}")
    be = op.backend
    N = be.grid.N
    if be.kind != "lattice":
        if axiom in _LOCAL_AXIOMS:
            raise UnsupportedOnBackend(f"{axiom} needs subtree evaluation and is lattice-only")
        if times is None:
            times = [(0, 0, N)] if axiom == "D3" else [(0, N)]
    claims = [claim_source(c, be) for c in trial]
    a = claims[0]
    b = claims[1] if len(claims) > 1 else claims[0]
    worst = _Worst()
    floor_C = op.floor.C if not op.floor.is_none else 0.0
    consts = list(constants) or [floor_C, floor_C + 1.0]
    if any(c < floor_C for c in consts):
        raise ValueError(f"constants must dominate the floor bound C={floor_C}")
    mu = op.mu if mu is None else mu
    if axiom in ("H1", "SANDWICH") and mu is None:
        raise ValueError(f"{axiom} needs a declared mu")
    if not events and axiom in ("D4", "MIX"):
        events = [sign_event(be), random_event(be, 11)]
    note = ""

    if axiom == "D1":
        for s, t in _pairs(N, times):
            if s == t:
                continue
            hi, lo = np.maximum(a(t), b(t)), np.minimum(a(t), b(t))
            e_hi, e_lo = op.evaluate(s, t, hi), op.evaluate(s, t, lo)
            worst.add(e_lo - e_hi, s, policy.tolerance(be, hi, lo))
            if be.kind == "lattice" and np.any(hi > lo):
                sol = op.path(t, lo, s)
                above = all(op.floor_at(u) is None or np.all(sol.y(u) > op.floor_at(u)) for u in range(s, t + 1))
                if above and not np.any(e_hi > e_lo):
                    worst.add(np.array([float(np.max(hi - lo))]), s)
                    note = "strictness failed"

    elif axiom == "D2":
        for s, t in _pairs(N, times):
            for c in consts:
                if be.kind == "lattice":
                    y = np.maximum(a(s), c)
                    e = op.evaluate(s, t, lambda k, sub, y=y: np.full(sub.size(t), y[k]))
                else:
                    y = np.full(be.size(s), float(c))
                    e = op.evaluate(s, t, np.full(be.size(t), float(c)))
                worst.add(np.abs(e - y), s, policy.tolerance(be))

    elif axiom == "D3":
        triples = times if times is not None else [
            (r, s, t) for t in range(N + 1) for s in range(t + 1) for r in range(s + 1)]
        for r, s, t in triples:
            y = a(t)
            lhs = op.evaluate(r, s, op.evaluate(s, t, y))
            rhs = op.evaluate(r, t, y)
            worst.add(np.abs(lhs - rhs), r, policy.tolerance(be, y))

    elif axiom == "D4":
        for (s, t), ev, c in itertools.product(_pairs(N, times), events, consts):
            ind = ev(s)
            y = b(t)
            lhs = op.evaluate(s, t, lambda k, sub: ind[k] * y[sub.k0: sub.k0 + sub.size(t)] + c) - c
            rhs = ind * (op.evaluate(s, t, y + c) - c)
            worst.add(np.abs(lhs - rhs), s, policy.tolerance(be))

    elif axiom == "MIX":
        for (s, t), ev in itertools.product(_pairs(N, times), events):
            ind = ev(s)
            x, y = a(t), b(t)

            def mixed(k, sub):
                sl = slice(sub.k0, sub.k0 + sub.size(t))
                return x[sl] if ind[k] else y[sl]

            lhs = op.evaluate(s, t, mixed)
            rhs = op.evaluate(s, t, x) * ind + op.evaluate(s, t, y) * (1 - ind)
            worst.add(np.abs(lhs - rhs), s, policy.tolerance(be))

    elif axiom in ("H1", "SANDWICH"):
        upper, lower = EMU(mu), NEG_EMU(mu)
        x, y = a(N), b(N)
        if np.any(y < 0):
            raise ClaimError(f"{axiom} needs a nonnegative increment claim")
        if axiom == "SANDWICH" and np.any(x < 0):
            raise ClaimError("SANDWICH needs nonnegative claims")
        steps = sorted({s for s, _ in _pairs(N, times)}) if times is not None else range(N + 1)
        full_sum = op.path(N, x + y)
        full_x = op.path(N, x)
        up = backward(y, N, 0, upper, be)
        lo = backward(y, N, 0, lower, be) if axiom == "SANDWICH" else None
        tol = policy.tolerance(be, x, y)
        l2_parts = []
        for t in steps:
            diff = full_sum.y(t) - full_x.y(t)
            excess = diff - up.y(t)
            if lo is not None:
                excess = np.maximum(excess, lo.y(t) - diff)
            worst.add(excess, t, tol)
            l2_parts.append(float(np.sqrt(be.expectation(np.maximum(excess, 0) ** 2, t))))
        note = f"l2={max(l2_parts):.3e}"

    elif axiom == "H2":
        x = a(N)
        sol_x = op.path(N, x)
        strictly_above = all(op.floor_at(u) is None or np.all(sol_x.y(u) > op.floor_at(u))
                             for u in range(N + 1))
        steps = sorted({s for s, _ in _pairs(N, times)}) if times is not None else range(N + 1)
        for t in steps:
            y = np.abs(b(t))
            lhs = op.evaluate(t, N, lambda k, sub: x[sub.k0: sub.k0 + sub.size(N)] + y[k])
            rhs = sol_x.y(t) + y
            excess = lhs - rhs
            if strictly_above:
                excess = np.abs(excess)
            worst.add(excess, t, policy.tolerance(be))
        note = "equality branch" if strictly_above else "inequality branch"

    return worst.report(axiom, be, trial_index, note)


def check_axioms(op: DynamicOperator, axioms: Sequence[str], trials: Sequence[Sequence], **kwargs) -> list:
    """One report per (axiom, trial), ordered by axiom then trial."""
    return [check_axiom(op, ax, tr, trial_index=k, **kwargs)
            for ax in axioms for k, tr in enumerate(trials)]


# ---------------------------------------------------------------- extension

@dataclass
class CauchyReport:
    schedule: list
    differences: list       # ||Y_{n_{k+1}} - Y_{n_k}||_2
    bounds: list            # exp(mu^2 (T - t) / 2) * ||X 1{-n_{k+1} <= X <= -n_k}||_2
    passed: bool
    stabilized_at: Optional[float] = None


def truncated_value(op: DynamicOperator, X: np.ndarray, t: int, n: float) -> np.ndarray:
    """E_{t,T}[X 1{X >= -n} + n] - n."""
    N = op.backend.grid.N
    return op.evaluate(t, N, np.where(X >= -n, X, 0.0) + n) - n


def extend_operator(op: DynamicOperator, X, t: int, schedule: Sequence[float],
                    policy: TolerancePolicy = TolerancePolicy()):
    """Truncation extension of a zero-floor operator to claims unbounded below.

    Returns the sequence of truncated values at step t and a Cauchy report;
    the last element is the extended value.
    """
    sched = list(schedule)
    if any(b <= a for a, b in zip(sched, sched[1:])):
        raise ValueError("n-schedule must be strictly increasing")
    if not op.floor.is_none and op.floor.C > 0:
        raise ValueError("extension needs an operator whose domain contains the nonnegative claims")
    if op.mu is None:
        raise ValueError("extension bound needs a declared mu")
    be = op.backend
    N = be.grid.N
    x = as_values(X, be, N)
    seq = [truncated_value(op, x, t, n) for n in sched]
    factor = np.exp(op.mu**2 * (be.grid.T - be.grid.t(t)) / 2)
    diffs, bounds = [], []
    ok = True
    for (n, m), (yn, ym) in zip(zip(sched, sched[1:]), zip(seq, seq[1:])):
        d = float(np.sqrt(be.expectation((ym - yn) ** 2, t)))
        band = np.where((x >= -m) & (x <= -n), x, 0.0)
        bound = float(factor * np.sqrt(be.expectation(band**2, N)))
        slack = policy.tolerance(be, band)
        diffs.append(d)
        bounds.append(bound)
        ok &= d <= bound * (1 + 1e-9) + slack
    # the +n / -n shifts leave rounding noise, so "stable" means the truncated
    # claims coincide and the values agree to the lattice tolerance
    truncs = [np.where(x >= -n, x, 0.0) for n in sched]
    tol = policy.tolerance(be, x)
    stable = None
    for k in range(len(seq)):
        if all(np.array_equal(truncs[k], tr) and np.max(np.abs(seq[k] - later)) <= tol
               for tr, later in zip(truncs[k:], seq[k:])):
            stable = sched[k]
            break
    return seq, CauchyReport(sched, diffs, bounds, bool(ok), stable)


def extended_value(op: DynamicOperator, X, t: int, n: Optional[float] = None) -> np.ndarray:
    """Extended operator at step t; on bounded claims n = max(-min X, 0) is already exact."""
    x = as_values(X, op.backend)
    if n is None:
        n = max(float(-x.min()), 0.0)
    return truncated_value(op, x, t, n)


# ---------------------------------------------------------------- representation

@dataclass
class RepresentationReport:
    axiom_reports: list
    agreement_residual: float
    agreement_trials: int
    passed: bool = field(init=False)

    def __post_init__(self):
        self.passed = all(r.passed for r in self.axiom_reports) and self.agreement_residual <= 1e-10


def representation_check(generator: Generator, floor: Obstacle, backend: Backend, trials: Sequence[Sequence],
                         mu: Optional[float] = None, policy: TolerancePolicy = TolerancePolicy()
                         ) -> RepresentationReport:
    """Round trip: the operator built from (g, S) satisfies D1-D4, H1, H2, and agrees
    with the unreflected g-expectation on claims whose solution stays above the floor."""
    mu = generator.mu if mu is None else mu
    if not generator.z_only:
        raise ValueError("representation needs a z-only generator with g(t, 0) = 0")
    if mu is None or generator.lip_z > mu:
        raise ValueError(f"need lip_z <= mu (lip_z={generator.lip_z}, mu={mu})")
    if not floor.is_none and not np.isfinite(floor.C):
        raise ValueError("floor must be bounded above")
    op = DynamicOperator(backend, generator, floor, mu)
    axioms = ("D1", "D2", "D3", "D4", "H1", "H2") if backend.kind == "lattice" else ("D1", "D2", "D3", "H1")
    reports = []
    for ax in axioms:
        for k, tr in enumerate(trials):
            tr = list(tr)
            if ax == "H1":
                tr = [tr[0], _nonneg(tr[-1], backend)]
            if ax in ("D4", "H2"):
                tr = [tr[0], _nonneg(tr[-1], backend)]
            reports.append(check_axiom(op, ax, tr, mu=mu, policy=policy, trial_index=k))
    plain = DynamicOperator(backend, generator, NO_FLOOR, mu)
    N = backend.grid.N
    resid, used = 0.0, 0
    for tr in trials:
        x = claim_source(tr[0], backend)(N)
        sol = op.path(N, x)
        if floor.is_none or all(np.all(sol.y(u) > floor.values(u, backend)) for u in range(N + 1)):
            ref = plain.path(N, x)
            resid = max(resid, max(float(np.max(np.abs(sol.y(u) - ref.y(u)))) for u in range(N + 1)))
            used += 1
    return RepresentationReport(reports, resid, used)


def _nonneg(claim, backend: Backend) -> StepClaim:
    src = claim_source(claim, backend)
    return lambda i: np.abs(src(i))
