"""Command-line front end.

Exit status: 0 on success, 2 on invalid configuration, 3 on runtime failure.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import distributions, gaussproc, localtime, montecarlo, stats
from .empirical import Sample
from .rng import SEED_ENV, RngStream

COMMANDS = ("gof", "gof-estimated", "two-sample", "k-sample", "changepoint",
            "power", "rate", "lil", "localtime", "limits")

EXIT_OK, EXIT_INVALID, EXIT_RUNTIME = 0, 2, 3


@dataclass
class RunConfig:
    command: str
    p: list = field(default_factory=lambda: [0])
    q: int = 1
    r: float = 2.0
    alpha: float = 0.05
    n: int | None = None
    n_list: list = field(default_factory=list)
    seed: int | None = None
    reps: int = 10_000
    null_reps: int | None = None
    inputs: list = field(default_factory=list)
    column: str | None = None
    output: str | None = None
    csv: str | None = None
    dist: str = "uniform"
    params: list = field(default_factory=list)
    table: str | None = None
    stat: str = "ks"
    method: str = "null-mc"
    family: str = "exponential"
    alts: list = field(default_factory=list)
    weighted: bool = False
    integrator: str = "pooled"
    grid: int = gaussproc.DEFAULT_GRID
    paths: int = 20
    threads: int | None = None

    def resolved_seed(self) -> int:
        if self.seed is not None:
            return int(self.seed)
        return int(os.environ.get(SEED_ENV, "0"))


def validate(cfg: RunConfig) -> list[str]:
    """Violations of the preconditions of the target command, as messages."""
    errs = []
    if cfg.command not in COMMANDS:
        return [f"command must be one of {', '.join(COMMANDS)}"]
    if not 0 < cfg.alpha < 1:
        errs.append("alpha must lie in (0,1)")
    if any(int(p) != p or p < 0 for p in cfg.p):
        errs.append("p must be a nonnegative integer")
    if cfg.r < 1:
        errs.append("r ≥ 1")
    if cfg.q < 1:
        errs.append("q ≥ 1")
    if cfg.reps < 1:
        errs.append("reps must be >= 1")
    if cfg.threads is not None and cfg.threads < 1:
        errs.append("threads must be >= 1")
    if cfg.grid < 2:
        errs.append("grid must be >= 2")
    if cfg.seed is None and SEED_ENV in os.environ:
        try:
            int(os.environ[SEED_ENV])
        except ValueError:
            errs.append(f"{SEED_ENV} must be an integer")
    for path in cfg.inputs:
        if not Path(path).is_file():
            errs.append(f"input file not found: {path}")
    if cfg.table and not Path(cfg.table).is_file():
        errs.append(f"table file not found: {cfg.table}")
    if cfg.dist not in distributions.REGISTRY and not cfg.table:
        errs.append(f"dist must be one of {sorted(distributions.REGISTRY)}")
    if cfg.stat not in stats.STATISTICS:
        errs.append(f"stat must be one of {', '.join(stats.STATISTICS)}")

    c = cfg.command
    single_p = c in ("gof", "gof-estimated", "two-sample", "k-sample", "changepoint", "rate", "lil", "localtime")
    if single_p and len(cfg.p) != 1:
        errs.append("p takes a single value for this command")
    needs = {"gof": 1, "gof-estimated": 1, "changepoint": 1, "two-sample": 2}
    if c in needs and len(cfg.inputs) != needs[c]:
        errs.append(f"{c} needs exactly {needs[c]} input file(s)")
    if c == "k-sample" and len(cfg.inputs) < 2:
        errs.append("K ≥ 2")
    if c == "gof":
        if cfg.method not in ("null-mc", "limiting-law"):
            errs.append("method must be null-mc or limiting-law")
        if cfg.method == "null-mc" and cfg.reps * cfg.alpha < 5:
            errs.append("reps * alpha must be >= 5")
    if c == "gof-estimated":
        if cfg.family not in stats.FAMILIES:
            errs.append(f"family must be one of {sorted(stats.FAMILIES)}")
        if cfg.reps < 99:
            errs.append("bootstrap reps must be >= 99")
    if c == "two-sample" and cfg.integrator not in ("pooled", "f0"):
        errs.append("integrator must be pooled or f0")
    if c == "power":
        if cfg.n is None or cfg.n < 1:
            errs.append("n must be >= 1")
        else:
            pc = _power_config(cfg)
            errs.extend(e for e in pc.validate() if e not in errs)
    if c in ("rate", "lil", "localtime"):
        if len(cfg.n_list) < 2:
            errs.append("n-list needs at least two sizes")
        elif cfg.n_list != sorted(cfg.n_list):
            errs.append("n-list must be ascending")
    if c == "lil" and cfg.n_list and min(cfg.n_list) < 16:
        errs.append("n-list entries must be >= 16")
    if c == "localtime":
        if cfg.p and cfg.p[0] < 1:
            errs.append("p ≥ 1 for the local-time walk")
        if cfg.n_list and (len(set(cfg.n_list)) < 3 or max(cfg.n_list) < 10 * min(cfg.n_list)):
            errs.append("n-list needs at least 3 sizes spanning a factor of 10")
    if c == "limits" and cfg.stat not in gaussproc.QUANTILE_FUNCTIONALS:
        errs.append(f"limits supports stat in {sorted(gaussproc.QUANTILE_FUNCTIONALS)}")
    if cfg.paths < 1:
        errs.append("paths must be >= 1")
    return errs


def _f0(cfg: RunConfig) -> distributions.DistSpec:
    if cfg.table:
        data = np.loadtxt(cfg.table, delimiter=",", ndmin=2, comments="#")
        return distributions.tabulated(data[:, 0], data[:, 1], label=Path(cfg.table).name)
    return distributions.from_name(cfg.dist, cfg.params)


def _read(cfg: RunConfig, i: int = 0) -> Sample:
    return Sample.read(cfg.inputs[i], cfg.column)


def _power_config(cfg: RunConfig) -> montecarlo.PowerStudyConfig:
    alts = cfg.alts or list(montecarlo.PowerStudyConfig.alternatives)
    return montecarlo.PowerStudyConfig(
        n=cfg.n, p_list=list(cfg.p), alternatives=alts, alpha=cfg.alpha,
        M_null=cfg.null_reps or cfg.reps, M_power=cfg.reps, seed=cfg.resolved_seed(),
        stat=cfg.stat, r=cfg.r)


def _emit(cfg: RunConfig, payload: str) -> None:
    if not payload.endswith("\n"):
        payload += "\n"
    if cfg.output:
        Path(cfg.output).write_text(payload, encoding="utf-8", newline="\n")
    else:
        sys.stdout.write(payload)


def _emit_json(cfg: RunConfig, obj) -> None:
    _emit(cfg, json.dumps(obj, indent=2, sort_keys=True))


def _write_rows(path: str, header: list, rows) -> None:
    import csv

    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def dispatch(cfg: RunConfig) -> int:
    """Run a validated configuration and write its artifacts."""
    seed = cfg.resolved_seed()
    p = int(cfg.p[0])
    c = cfg.command
    if c == "gof":
        rep = stats.gof_test(_read(cfg), _f0(cfg), p, cfg.stat, cfg.alpha, cfg.method, cfg.reps,
                             seed, cfg.r, cfg.grid, cfg.threads)
        _emit(cfg, rep.to_json())
    elif c == "gof-estimated":
        fam = stats.FAMILIES[cfg.family]()
        rep = stats.estimated_gof(_read(cfg), fam, p, cfg.reps, RngStream(seed), cfg.alpha)
        _emit(cfg, rep.to_json())
    elif c == "two-sample":
        f0 = _f0(cfg) if cfg.integrator == "f0" else None
        s, t = stats.two_sample_statistics(_read(cfg, 0), _read(cfg, 1), p, cfg.q, f0)
        _emit_json(cfg, {"S": s, "T": t, "p": p, "q": cfg.q, "integrator": cfg.integrator})
    elif c == "k-sample":
        samples = [_read(cfg, i) for i in range(len(cfg.inputs))]
        res = stats.ksample_statistics(samples, _f0(cfg), p)
        _emit_json(cfg, {"S": res.S, "T": res.T, "p": p, "K": len(samples)})
    elif c == "changepoint":
        res = stats.changepoint_scan(_read(cfg), p, cfg.weighted)
        if cfg.csv:
            res.write_csv(cfg.csv)
        _emit_json(cfg, {"statistic": res.statistic, "argmax_k": res.argmax_k,
                         "argmax_t": res.argmax_t, "weighted": res.weighted, "p": p})
    elif c == "power":
        table = montecarlo.power_study(_power_config(cfg), cfg.threads)
        if cfg.csv:
            Path(cfg.csv).write_text(table.to_csv(), encoding="utf-8", newline="\n")
        _emit(cfg, table.to_json())
    elif c == "rate":
        res = montecarlo.rate_study(p, cfg.n_list, cfg.reps, cfg.grid, RngStream(seed), cfg.threads)
        if cfg.csv:
            _write_rows(cfg.csv, ["n", "ks_distance"], [(n, repr(d)) for n, d in res])
        _emit_json(cfg, {"p": p, "M": cfg.reps, "distances": [[n, d] for n, d in res]})
    elif c == "lil":
        res = montecarlo.lil_diagnostic(p, cfg.n_list, cfg.paths, RngStream(seed))
        if cfg.csv:
            res.write_csv(cfg.csv)
        _emit_json(cfg, {"p": p, "constant": res.constant, "n_list": res.n_list,
                         "trajectories": res.trajectories.tolist()})
    elif c == "localtime":
        slope = localtime.growth_exponent(p, cfg.n_list, RngStream(seed), cfg.paths)
        if cfg.csv:
            localtime.write_growth_csv(cfg.csv, p, cfg.n_list, RngStream(seed), cfg.paths)
        _emit_json(cfg, {"p": p, "n_list": cfg.n_list, "paths": cfg.paths, "slope": slope})
    elif c == "limits":
        rows = [gaussproc.quantile_row(cfg.stat, int(pp), cfg.grid, cfg.reps, seed, cfg.threads) for pp in cfg.p]
        if cfg.csv:
            gaussproc.write_quantile_table(rows, cfg.csv)
        _emit_json(cfg, rows)
    return EXIT_OK


def _ints(text: str) -> list[int]:
    return [int(v) for v in text.split(",") if v.strip()]


def _floats(text: str) -> list[float]:
    return [float(v) for v in text.split(",") if v.strip()]


def _words(text: str) -> list[str]:
    return [v.strip() for v in text.split(",") if v.strip()]


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="ipef", description="Tests and simulations built on p-fold integrated empirical d.f.s")
    sub = ap.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help=f"root seed (default: ${SEED_ENV} or 0)")
    common.add_argument("--threads", type=int, default=None, help="worker threads (default: all cores)")
    common.add_argument("--output", "-o", help="write the JSON result here instead of stdout")
    common.add_argument("--csv", help="also write a CSV table here")
    common.add_argument("--alpha", type=float, default=0.05)
    common.add_argument("--reps", type=int, default=10_000, help="Monte Carlo or bootstrap replicates")

    data = argparse.ArgumentParser(add_help=False)
    data.add_argument("--column", help="CSV column holding the data (default: one value per line)")
    data.add_argument("--dist", default="uniform", help="null d.f.: uniform, exponential or normal")
    data.add_argument("--params", type=_floats, default=[], help="comma-separated distribution parameters")
    data.add_argument("--table", help="two-column CSV (t, F(t)) defining a piecewise-linear null d.f.")

    def order(p, default="0"):
        p.add_argument("--p", type=_ints, default=_ints(default), help="order of integration")

    s = sub.add_parser("gof", parents=[common, data], help="one-sample goodness of fit")
    order(s)
    s.add_argument("--input", dest="inputs", action="append", default=[], required=True)
    s.add_argument("--stat", default="ks", choices=stats.STATISTICS)
    s.add_argument("--r", type=float, default=2.0)
    s.add_argument("--method", default="null-mc", choices=["null-mc", "limiting-law"])
    s.add_argument("--grid", type=int, default=gaussproc.DEFAULT_GRID)

    s = sub.add_parser("gof-estimated", parents=[common, data], help="goodness of fit with estimated parameters")
    order(s)
    s.add_argument("--input", dest="inputs", action="append", default=[], required=True)
    s.add_argument("--family", default="exponential", choices=sorted(stats.FAMILIES))
    s.set_defaults(reps=500)

    s = sub.add_parser("two-sample", parents=[common, data], help="two-sample statistics")
    order(s)
    s.add_argument("--q", type=int, default=1)
    s.add_argument("--input", dest="inputs", action="append", default=[], required=True)
    s.add_argument("--integrator", default="pooled", choices=["pooled", "f0"])

    s = sub.add_parser("k-sample", parents=[common, data], help="K-sample statistics")
    order(s)
    s.add_argument("--input", dest="inputs", action="append", default=[], required=True)

    s = sub.add_parser("changepoint", parents=[common, data], help="change-point scan")
    order(s)
    s.add_argument("--input", dest="inputs", action="append", default=[], required=True)
    s.add_argument("--weighted", action="store_true")

    s = sub.add_parser("power", parents=[common], help="power study over alternatives A/B/C")
    order(s, "0,1,2,3")
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--alts", type=_words, default=[])
    s.add_argument("--null-reps", type=int, default=None)
    s.add_argument("--stat", default="ks", choices=stats.STATISTICS)
    s.add_argument("--r", type=float, default=2.0)

    s = sub.add_parser("rate", parents=[common], help="distance to the limit law along n")
    order(s)
    s.add_argument("--n-list", type=_ints, default=[10, 50, 250, 1250])
    s.add_argument("--grid", type=int, default=gaussproc.DEFAULT_GRID)

    s = sub.add_parser("lil", parents=[common], help="iterated-logarithm diagnostic")
    order(s)
    s.add_argument("--n-list", type=_ints, default=[16, 64, 256, 1024, 4096])
    s.add_argument("--paths", type=int, default=20)

    s = sub.add_parser("localtime", parents=[common], help="self-intersection growth exponent")
    order(s, "1")
    s.add_argument("--n-list", type=_ints, default=[2 ** k for k in range(10, 17)])
    s.add_argument("--paths", type=int, default=20)

    s = sub.add_parser("limits", parents=[common], help="quantiles of limiting functionals")
    order(s, "0,1,2,3")
    s.add_argument("--stat", default="ks", choices=sorted(gaussproc.QUANTILE_FUNCTIONALS))
    s.add_argument("--grid", type=int, default=gaussproc.DEFAULT_GRID)
    return ap


def config_from_args(ns: argparse.Namespace) -> RunConfig:
    names = set(RunConfig.__dataclass_fields__)
    return RunConfig(**{k: v for k, v in vars(ns).items() if k in names and v is not None})


def main(argv=None) -> int:
    ns = build_parser().parse_args(argv)
    cfg = config_from_args(ns)
    problems = validate(cfg)
    if problems:
        for msg in problems:
            print(f"ipef {cfg.command}: {msg}", file=sys.stderr)
        return EXIT_INVALID
    try:
        return dispatch(cfg)
    except (OSError, ValueError, RuntimeError) as exc:
        print(f"ipef {cfg.command}: error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
