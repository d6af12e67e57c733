"""Command-line front end.

Exit codes: 0 success, 1 a check failed, 2 configuration error, 3 numerical error.
"""

from __future__ import annotations

import argparse
import io
import sys
from typing import Optional, Sequence

import numpy as np

from .bsde import ClaimError
from .condexp import DegenerateRegressionError
from .config import ConfigError, ExperimentConfig, load_config
from .generators import GeneratorError
from .operators import (AXIOMS, AxiomReport, DynamicOperator, UnsupportedOnBackend, check_axiom,
                        extend_operator, random_claim)
from .oracles import binomial_american_put
from .paths import ParameterError
from .rbsde import doob_meyer_verify, price_american, skorokhod_residual, solve_rbsde

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2, 3


def _emit(text: str, cfg: ExperimentConfig) -> None:
    if cfg.output:
        with open(cfg.output, "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _csv(header: str, rows) -> str:
    buf = io.StringIO()
    buf.write(header + "\n")
    for row in rows:
        buf.write(",".join(_fmt(v) for v in row) + "\n")
    return buf.getvalue()


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return str(v).lower()
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def cmd_solve(cfg: ExperimentConfig) -> int:
    be = cfg.make_backend()
    sol = solve_rbsde(cfg.make_claim(), cfg.make_generator(), cfg.make_floor(), be)
    K = sol.mean_K()
    rows = []
    for i in range(cfg.N + 1):
        z = None if i == cfg.N else be.expectation(np.sqrt(np.sum(sol.z(i) ** 2, axis=1)), i)
        rows.append((i, be.grid.t(i), be.expectation(sol.y(i), i), z, K[i]))
    _emit(_csv("step,t,mean_Y,mean_abs_Z,mean_K", rows), cfg)
    return EXIT_OK


def cmd_check_axioms(cfg: ExperimentConfig) -> int:
    if not cfg.axioms:
        raise ConfigError("empty axiom list")
    unknown = [a for a in cfg.axioms if a not in AXIOMS]
    if unknown:
        raise ConfigError(f"unknown axioms {unknown}; choose from {list(AXIOMS)}")
    be = cfg.make_backend()
    floor = cfg.make_floor()
    op = DynamicOperator(be, cfg.make_generator(), floor, cfg.check_mu)
    reports: list[AxiomReport] = []
    for ax in cfg.axioms:
        for k in range(cfg.trials):
            trial = (random_claim(be, cfg.seed * 1000 + 2 * k, floor=floor),
                     random_claim(be, cfg.seed * 1000 + 2 * k + 1))
            try:
                reports.append(check_axiom(op, ax, trial, policy=cfg.policy(), trial_index=k))
            except UnsupportedOnBackend as exc:
                raise ConfigError(str(exc)) from exc
    _emit(AxiomReport.CSV_HEADER + "\n" + "".join(r.csv_row() + "\n" for r in reports), cfg)
    return EXIT_OK if all(r.passed for r in reports) else EXIT_FAIL


def cmd_price_american(cfg: ExperimentConfig) -> int:
    kw = dict(spot=cfg.market_spot, strike=cfg.market_strike, r=cfg.market_rate, sigma=cfg.market_sigma, T=cfg.T)
    if cfg.backend == "lattice":
        price = price_american(N=cfg.N, backend="lattice", **kw)
    else:
        price = price_american(N=cfg.N, backend="ensemble", M=cfg.M, seed=cfg.seed,
                               degree=cfg.regression_degree, ridge=cfg.regression_ridge, **kw)
    oracle = binomial_american_put(cfg.market_spot, cfg.market_strike, cfg.market_rate, cfg.market_sigma,
                                   cfg.T, cfg.oracle_steps)
    rel = abs(price - oracle) / oracle if oracle else abs(price)
    _emit(_csv("price,oracle,rel_error", [(price, oracle, rel)]), cfg)
    return EXIT_OK


def cmd_convergence(cfg: ExperimentConfig) -> int:
    ns = sorted(set(cfg.n_list))
    if len(ns) < 2:
        raise ConfigError("convergence needs at least two values in n_list")
    gen, floor, claim = cfg.make_generator(), cfg.make_floor(), cfg.make_claim()
    values = [solve_rbsde(claim, gen, floor, cfg.make_backend(n)).y0 for n in ns]
    ref = values[-1]
    rows = [(n, v, abs(v - ref)) for n, v in zip(ns, values)]
    _emit(_csv("N,Y0,abs_error", rows), cfg)
    return EXIT_OK


def cmd_extend(cfg: ExperimentConfig) -> int:
    be = cfg.make_backend()
    op = DynamicOperator(be, cfg.make_generator(), cfg.make_floor(), cfg.check_mu)
    seq, rep = extend_operator(op, cfg.make_claim(), cfg.extend_t, cfg.extend_schedule, cfg.policy())
    rows = []
    for k, (n, y) in enumerate(zip(rep.schedule, seq)):
        diff = rep.differences[k - 1] if k else None
        bound = rep.bounds[k - 1] if k else None
        rows.append((n, be.expectation(y, cfg.extend_t), diff, bound))
    _emit(_csv("n,mean_Y,diff_l2,bound", rows), cfg)
    return EXIT_OK if rep.passed else EXIT_FAIL


def cmd_doob_meyer(cfg: ExperimentConfig) -> int:
    if cfg.backend != "lattice":
        raise ConfigError("doob-meyer needs the lattice backend")
    be = cfg.make_backend()
    gen, floor, claim = cfg.make_generator(), cfg.make_floor(), cfg.make_claim()
    t = cfg.N if cfg.dm_t is None else cfg.dm_t
    residual = doob_meyer_verify(claim, gen, floor, be, cfg.dm_s, t)
    sol = solve_rbsde(claim, gen, floor, be)
    sk = skorokhod_residual(sol, floor)
    K = sol.mean_K()
    rows = [(i, be.expectation(sol.y(i), i), K[i], residual if i == 0 else None, sk if i == 0 else None)
            for i in range(cfg.N + 1)]
    _emit(_csv("step,mean_Y,mean_K,martingale_residual,skorokhod_residual", rows), cfg)
    return EXIT_OK if residual <= 1e-12 and sk <= 1e-12 else EXIT_FAIL


COMMANDS = {
    "solve": cmd_solve,
    "check-axioms": cmd_check_axioms,
    "price-american": cmd_price_american,
    "convergence": cmd_convergence,
    "extend": cmd_extend,
    "doob-meyer": cmd_doob_meyer,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="floorop", description="Reflected BSDE solvers and operator checks")
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("config", help="plain-text key = value configuration file")
        sp.add_argument("--out", help="output CSV path (overrides 'output')")
        sp.add_argument("--seed", type=int, help="override the configured seed")
        if name == "check-axioms":
            sp.add_argument("--axioms", help="comma-separated axiom ids (overrides 'axioms')")
        if name == "convergence":
            sp.add_argument("--n-list", help="comma-separated step counts (overrides 'n_list')")
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        overrides = {"output": args.out, "seed": args.seed}
        if getattr(args, "axioms", None) is not None:
            overrides["axioms"] = tuple(a.strip().upper() for a in args.axioms.split(",") if a.strip())
        if getattr(args, "n_list", None) is not None:
            overrides["n_list"] = tuple(int(v) for v in args.n_list.split(",") if v.strip())
        cfg = load_config(args.config, **overrides)
        return COMMANDS[args.command](cfg)
    except (ConfigError, ParameterError, GeneratorError, ClaimError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (FloatingPointError, DegenerateRegressionError, ArithmeticError) as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
