"""Command-line driver: ``timemachine {estimate,grid,oracle,compare}``.

Exit codes: 0 success, 1 configuration error, 2 runtime or capacity error.
"""

from __future__ import annotations

import argparse
import math
import os
import sys
from pathlib import Path

from .config import ExperimentConfig, load_config
from .errors import ConfigError, TimeMachineError
from .estimator import EstimateRequest, estimate, grid_sweep, relative_sd
from .oracle import (
    exact_biased_likelihood,
    exact_last_exit_marginal,
    exact_likelihood,
    pim_sample_distribution,
)
from .report import GRID_HEADER, fmt, grid_charts, grid_rows, write_csv

COMPARE_HEADER = (
    "mu,ntm,oracle_l,oracle_lb,target,mc_mean,mc_se,z,mean_events,sd_loglik,sd_ratio"
)
ORACLE_HEADER = "mu,m,likelihood,ordered_likelihood,biased_likelihood,biased_ordered,bias_gap"
LEVELS_HEADER = "mu,m,configuration,last_exit,pim"


def _parse_grid(text):
    try:
        start, stop, count = text.split(":")
        return {"start": float(start), "stop": float(stop), "count": int(count)}
    except ValueError:
        raise ConfigError(f"--mu-grid: expected start:stop:count, got {text!r}") from None


def _parse_levels(text):
    try:
        return [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise ConfigError(f"--ntm: expected a comma-separated list of integers, got {text!r}") from None


def apply_overrides(cfg: ExperimentConfig, args) -> ExperimentConfig:
    doc = cfg.to_dict()
    if args.out is not None:
        doc["output"] = args.out
    if args.seed is not None:
        doc["seed"] = args.seed
    if args.workers is not None:
        doc["workers"] = args.workers
    elif os.environ.get("TM_WORKERS"):
        try:
            doc["workers"] = int(os.environ["TM_WORKERS"])
        except ValueError:
            raise ConfigError("TM_WORKERS: expected an integer") from None
    if args.mu is not None:
        doc["model"]["mu"] = args.mu
        doc.pop("mu_grid", None)
    if args.mu_grid is not None:
        doc["mu_grid"] = _parse_grid(args.mu_grid)
    if args.ntm is not None:
        doc["tm_levels"] = _parse_levels(args.ntm)
    return ExperimentConfig.from_dict(doc)


def _output_dir(cfg) -> Path:
    out = Path(cfg.output)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ConfigError(f"output: cannot create {out}: {exc.strerror}") from None
    if not os.access(out, os.W_OK):
        raise ConfigError(f"output: {out} is not writable")
    return out


def _request(cfg, y, ntm, timing) -> EstimateRequest:
    return EstimateRequest(
        model=cfg.mutation_model,
        data=y,
        stop_population=ntm,
        replicates=cfg.replicates,
        repeats=cfg.repeats,
        seed=cfg.seed,
        weighting=cfg.weighting,
        workers=cfg.workers,
        chunk_size=cfg.chunk_size,
        timing=timing,
    )


def cmd_estimate(cfg: ExperimentConfig, args) -> int:
    mus = cfg.mus()
    if len(mus) != 1 or len(cfg.tm_levels) != 1:
        raise ConfigError("estimate: needs a single mu and a single tm level (use grid otherwise)")
    out = _output_dir(cfg)
    y = cfg.counts()
    req = _request(cfg, y, cfg.tm_levels[0], args.timing)
    req = EstimateRequest(**{**req.__dict__, "model": cfg.mutation_model.with_mu(mus[0])})
    est = estimate(req)
    write_csv(out / "estimate.csv", GRID_HEADER, grid_rows([est.row]), "estimate")
    write_csv(
        out / "repeats.csv",
        "repeat,loglik",
        [[k, float(v)] for k, v in enumerate(est.log_likelihoods)],
        "estimate",
    )
    r = est.row
    print(
        f"mu={fmt(r.mu)} ntm={r.ntm} n={r.n} mean_loglik={fmt(r.mean_loglik)} "
        f"sd_loglik={fmt(r.sd_loglik)} mean_events={fmt(r.mean_events)}"
    )
    return 0


def cmd_grid(cfg: ExperimentConfig, args) -> int:
    if cfg.mu_grid is None:
        raise ConfigError("mu_grid: required for grid (or pass --mu-grid)")
    out = _output_dir(cfg)
    y = cfg.counts()
    result, _ = grid_sweep(_request(cfg, y, 1, args.timing), cfg.mus(), cfg.tm_levels)
    write_csv(out / "grid.csv", GRID_HEADER, grid_rows(result.rows), "grid")
    if args.plot:
        grid_charts(result, out, cfg.scenario)
    for t in sorted(set(cfg.tm_levels)):
        print(f"ntm={t} argmax_mu={fmt(result.argmax_mu(t))}")
    return 0


def _oracle_levels(cfg, n):
    if cfg.oracle_m is not None:
        return sorted(set(cfg.oracle_m))
    levels = sorted({t for t in cfg.tm_levels if t >= 2})
    return levels or list(range(2, n + 1))


def cmd_oracle(cfg: ExperimentConfig, args) -> int:
    out = _output_dir(cfg)
    y = cfg.counts()
    n = sum(y)
    rows, level_rows = [], []
    for mu in cfg.mus():
        model = cfg.mutation_model.with_mu(mu)
        lik, ordered = exact_likelihood(model, y)
        for m in _oracle_levels(cfg, n):
            exact_h = exact_last_exit_marginal(model, m)
            pim_h = pim_sample_distribution(model, m)
            h = exact_h if cfg.oracle_h == "exact" else pim_h
            lb, lb_ordered = exact_biased_likelihood(model, y, m, h)
            gap = abs(lb - lik)
            if cfg.oracle_h == "exact" and gap < 1e-12 * max(lik, 1e-300):
                gap = 0.0
            rows.append([mu, m, lik, ordered, lb, lb_ordered, gap])
            for z in exact_h.support:
                level_rows.append([mu, m, " ".join(map(str, z)), exact_h[z], pim_h[z]])
        print(f"mu={fmt(mu)} likelihood={fmt(lik)} ordered={fmt(ordered)}")
    write_csv(out / "oracle.csv", ORACLE_HEADER, rows, "oracle")
    write_csv(out / "levels.csv", LEVELS_HEADER, level_rows, "oracle")
    return 0


def cmd_compare(cfg: ExperimentConfig, args) -> int:
    out = _output_dir(cfg)
    y = cfg.counts()
    n = sum(y)
    mus = cfg.mus()
    levels = cfg.tm_levels
    result, estimates = grid_sweep(_request(cfg, y, 1, args.timing), mus, levels)
    rows = []
    for a, mu in enumerate(mus):
        model = cfg.mutation_model.with_mu(mu)
        lik, _ = exact_likelihood(model, y)
        sd_base = next((estimates[(a, b)].row.sd_loglik for b, t in enumerate(levels) if t == 1), math.nan)
        for b, t in enumerate(levels):
            est = estimates[(a, b)]
            if t >= 2:
                lb, _ = exact_biased_likelihood(model, y, t, pim_sample_distribution(model, t))
            else:
                lb = lik
            target = lik if t == 1 else lb
            mean, se = est.pooled()
            z = (mean - target) / se if se > 0 else (0.0 if mean == target else math.inf)
            ratio = est.row.sd_loglik / sd_base if sd_base > 0 else math.nan
            rows.append([mu, t, lik, lb, target, mean, se, z, est.row.mean_events, est.row.sd_loglik, ratio])
            print(f"mu={fmt(mu)} ntm={t} target={fmt(target)} mc={fmt(mean)} se={fmt(se)} z={fmt(z)}")
    write_csv(out / "compare.csv", COMPARE_HEADER, rows, "compare")
    for t in sorted(set(levels) - {1}):
        if 1 in levels:
            for mu, ratio in relative_sd(result.level(t), result.level(1)):
                print(f"mu={fmt(mu)} ntm={t} sd_ratio={fmt(ratio)}")
    return 0


COMMANDS = {
    "estimate": cmd_estimate,
    "grid": cmd_grid,
    "oracle": cmd_oracle,
    "compare": cmd_compare,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="timemachine",
        description="Coalescent likelihoods by backward importance sampling with early stopping.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, fn in COMMANDS.items():
        p = sub.add_parser(name, help=(fn.__doc__ or "").strip() or None)
        p.add_argument("--config", required=True, help="experiment JSON file")
        p.add_argument("--out", help="output directory (overrides config)")
        p.add_argument("--seed", type=int, help="master seed (u64)")
        p.add_argument("--workers", type=int, help="worker processes (default: $TM_WORKERS or config)")
        p.add_argument("--plot", action="store_true", help="write SVG charts (grid)")
        p.add_argument("--timing", action="store_true", help="record wall time in mean_wall_ms")
        p.add_argument("--mu", type=float, help="single mutation rate")
        p.add_argument("--mu-grid", help="start:stop:count")
        p.add_argument("--ntm", help="comma-separated stopping levels")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = apply_overrides(load_config(args.config), args)
        return COMMANDS[args.command](cfg, args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except (TimeMachineError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
