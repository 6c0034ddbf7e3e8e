"""Seeded Monte Carlo engine: alternatives, critical values, power and rate studies.

Every study draws from substreams addressed by ``(seed, cell, block)`` so
results are identical for any thread count.
"""
from __future__ import annotations

import csv
import json
import math
import re
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy import stats as sps

from . import gaussproc
from .distributions import DistSpec
from .rng import RngStream, as_stream, blocked_draws
from .stats import null_statistics, statistic_from_uniform

KINDS = ("A", "B", "C")


@dataclass(frozen=True)
class Alternative:
    """Alternative d.f. on [0, 1] of kind A, B or C with shape ``k``, or a custom one."""

    kind: str
    k: float = 1.0
    dist: DistSpec | None = None

    def __post_init__(self):
        if self.kind == "custom":
            if self.dist is None:
                raise ValueError("custom alternative needs a DistSpec")
        elif self.kind not in KINDS:
            raise ValueError(f"unknown alternative kind {self.kind!r}")
        elif not self.k > 0:
            raise ValueError("shape k must be positive")

    @property
    def label(self) -> str:
        if self.kind == "custom":
            return self.dist.label
        return f"{self.kind}{self.k:g}"

    @classmethod
    def parse(cls, text: str) -> "Alternative":
        m = re.fullmatch(r"\s*([ABC])\s*([0-9]*\.?[0-9]+(?:[eE][-+]?\d+)?)\s*", text)
        if not m:
            raise ValueError(f"cannot parse alternative {text!r} (expected e.g. 'A2' or 'C1.5')")
        return cls(m.group(1), float(m.group(2)))

    def cdf(self, x):
        x = np.clip(np.asarray(x, dtype=float), 0.0, 1.0)
        k = self.k
        c = 2.0 ** (k - 1)
        if self.kind == "custom":
            return self.dist.cdf(x)
        if self.kind == "A":
            return 1.0 - (1.0 - x) ** k
        if self.kind == "B":
            return np.where(x < 0.5, c * x ** k, 1.0 - c * (1.0 - x) ** k)
        d = np.abs(x - 0.5)
        return np.clip(0.5 + np.sign(x - 0.5) * c * d ** k, 0.0, 1.0)

    def inv_cdf(self, u):
        u = np.asarray(u, dtype=float)
        k = self.k
        c = 2.0 ** (1 - k)
        if self.kind == "custom":
            return self.dist.inv_cdf(u)
        if self.kind == "A":
            return 1.0 - (1.0 - u) ** (1.0 / k)
        if self.kind == "B":
            lo = (np.minimum(u, 0.5) * c) ** (1.0 / k)
            hi = 1.0 - (np.minimum(1.0 - u, 0.5) * c) ** (1.0 / k)
            return np.where(u < 0.5, lo, hi)
        d = (np.abs(u - 0.5) * c) ** (1.0 / k)
        return np.clip(np.where(u < 0.5, 0.5 - d, 0.5 + d), 0.0, 1.0)


def sample_alternative(alt: Alternative, n: int, rng=None):
    from .empirical import Sample

    gen = rng if isinstance(rng, np.random.Generator) else as_stream(rng).generator()
    return Sample(alt.inv_cdf(gen.random(n)))


def null_critical_value(stat: str, p: int, n: int, alpha: float, M: int, rng=None,
                        r: float = 2.0, threads: int | None = 1) -> float:
    """``ceil(M (1 - alpha))``-th order statistic of ``M`` null draws."""
    if not 0 < alpha < 1:
        raise ValueError("alpha must lie in (0,1)")
    if M * alpha < 5:
        raise ValueError("need M * alpha >= 5")
    draws = np.sort(null_statistics(stat, p, n, M, rng, r, threads))
    return float(draws[math.ceil(M * (1 - alpha)) - 1])


# --------------------------------------------------------------------------
# power studies


@dataclass
class PowerStudyConfig:
    n: int
    p_list: Sequence[int] = (0, 1, 2, 3)
    alternatives: Sequence[str] = ("A1.5", "A2", "B1.5", "B2", "B3", "C1.5", "C2", "C3")
    alpha: float = 0.05
    M_null: int = 10_000
    M_power: int = 10_000
    seed: int = 0
    stat: str = "ks"
    r: float = 2.0

    def validate(self) -> list[str]:
        errs = []
        if self.n < 1:
            errs.append("n must be >= 1")
        if not 0 < self.alpha < 1:
            errs.append("alpha must lie in (0,1)")
        if self.M_null < 1 or self.M_power < 1:
            errs.append("M_null and M_power must be >= 1")
        if self.M_null * self.alpha < 5:
            errs.append("M_null * alpha must be >= 5")
        if not self.p_list or any(int(p) != p or p < 0 for p in self.p_list):
            errs.append("p values must be nonnegative integers")
        if self.r < 1:
            errs.append("r ≥ 1")
        for a in self.alternatives:
            try:
                Alternative.parse(a)
            except ValueError as exc:
                errs.append(str(exc))
        return errs


@dataclass
class PowerTable:
    config: dict
    critical_values: dict  # p -> critical value
    counts: dict  # alternative label -> list of rejection counts (one per p)

    @property
    def p_list(self) -> list[int]:
        return list(self.config["p_list"])

    def rate(self, alt: str, p: int) -> float:
        return self.counts[alt][self.p_list.index(p)] / self.config["M_power"]

    def percent(self, alt: str, p: int) -> int:
        """Rejection percentage rounded half-up, computed in integers."""
        c, m = self.counts[alt][self.p_list.index(p)], self.config["M_power"]
        return (200 * c + m) // (2 * m)

    def to_csv(self) -> str:
        lines = ["alternative," + ",".join(f"S^({p})" for p in self.p_list)]
        for alt in self.counts:
            lines.append(alt + "," + ",".join(str(self.percent(alt, p)) for p in self.p_list))
        return "\n".join(lines) + "\n"

    def to_json(self) -> str:
        payload = {
            "config": self.config,
            "critical_values": {str(p): v for p, v in self.critical_values.items()},
            "counts": self.counts,
            "percent": {a: [self.percent(a, p) for p in self.p_list] for a in self.counts},
        }
        return json.dumps(payload, indent=2)

    def write(self, csv_path=None, json_path=None) -> None:
        if csv_path:
            Path(csv_path).write_text(self.to_csv(), encoding="utf-8", newline="\n")
        if json_path:
            Path(json_path).write_text(self.to_json() + "\n", encoding="utf-8", newline="\n")


POWER_BLOCK = 1000


def power_study(config: PowerStudyConfig, threads: int | None = 1) -> PowerTable:
    """Rejection counts for every (alternative, p) cell.

    Critical values come from fresh null draws per ``p``; the alternative
    samples of one row are shared by all ``p`` columns.
    """
    errs = config.validate()
    if errs:
        raise ValueError("; ".join(errs))
    root = RngStream(config.seed)
    p_list = [int(p) for p in config.p_list]
    crit = {p: null_critical_value(config.stat, p, config.n, config.alpha, config.M_null,
                                   root.child(0, p), config.r, threads) for p in p_list}
    crit_vec = np.array([crit[p] for p in p_list])
    counts = {}
    for idx, name in enumerate(config.alternatives):
        alt = Alternative.parse(name)

        def block(gen, count, alt=alt):
            x = np.sort(alt.inv_cdf(gen.random((count, config.n))), axis=1)
            vals = np.stack([statistic_from_uniform(config.stat, x, p, config.r) for p in p_list], axis=-1)
            return vals > crit_vec

        rej = blocked_draws(block, config.M_power, root.child(1, idx), POWER_BLOCK, threads)
        counts[alt.label] = [int(c) for c in rej.sum(axis=0)]
    cfg = asdict(config)
    cfg["p_list"] = p_list
    cfg["alternatives"] = list(config.alternatives)
    return PowerTable(cfg, crit, counts)


# --------------------------------------------------------------------------
# convergence and LIL diagnostics


def ks_distance(a, b) -> float:
    return float(sps.ks_2samp(a, b).statistic)


def rate_study(p: int, n_list: Sequence[int], M: int, m_grid: int = gaussproc.DEFAULT_GRID,
               rng=None, threads: int | None = 1) -> list[tuple[int, float]]:
    """Kolmogorov distance between the null law of ``S_n^(p)`` and its limit, per ``n``."""
    if list(n_list) != sorted(n_list):
        raise ValueError("n_list must be ascending")
    root = as_stream(rng)
    limit = gaussproc.sample_limit_ks(p, m_grid, root.child(0), size=M, threads=threads)
    out = []
    for j, n in enumerate(n_list):
        finite = null_statistics("ks", p, int(n), M, root.child(1, j), threads=threads)
        out.append((int(n), ks_distance(finite, limit)))
    return out


def lil_constant(p: int) -> float:
    """``(p+1/2)^(p+1/2) / (p! (p+1)^(p+1))``."""
    return (p + 0.5) ** (p + 0.5) / (math.factorial(p) * (p + 1) ** (p + 1))


@dataclass
class LilResult:
    p: int
    constant: float
    n_list: list
    trajectories: np.ndarray = field(repr=False)  # shape (n_paths, len(n_list))

    def write_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["path", "n", "value", "reference"])
            for i, row in enumerate(self.trajectories):
                for n, v in zip(self.n_list, row):
                    w.writerow([i, n, repr(float(v)), repr(self.constant)])


def lil_diagnostic(p: int, n_list: Sequence[int], n_paths: int, rng=None) -> LilResult:
    """``S_n^(p) / sqrt(loglog n)`` along nested uniform samples."""
    n_list = [int(n) for n in n_list]
    if min(n_list) < 16:
        raise ValueError("n_list entries must be >= 16")
    if n_list != sorted(n_list):
        raise ValueError("n_list must be ascending")
    root = as_stream(rng)
    traj = np.empty((n_paths, len(n_list)))
    for i in range(n_paths):
        u = root.child(i).generator().random(n_list[-1])
        for j, n in enumerate(n_list):
            traj[i, j] = statistic_from_uniform("ks", np.sort(u[:n]), p) / math.sqrt(math.log(math.log(n)))
    return LilResult(p, lil_constant(p), n_list, traj)
