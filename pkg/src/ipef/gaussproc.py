"""Grid simulation of the Gaussian limit processes.

All processes live on a uniform grid of ``m`` points in [0, 1] (both ends
included).  Brownian bridges are built from Gaussian increments as
``W(u) - u W(1)``, which has the exact finite-dimensional law on the grid.
Suprema taken over the grid slightly under-estimate the continuous ones.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from .rng import RngStream, as_stream, blocked_draws

DEFAULT_GRID = 2048
_BLOCK_FLOATS = 1 << 22


@dataclass(frozen=True)
class PathGrid:
    grid: np.ndarray
    values: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.grid.shape != self.values.shape or self.grid.size < 2:
            raise ValueError("grid and values must have equal length >= 2")
        if self.grid[0] != 0.0 or self.grid[-1] != 1.0:
            raise ValueError("grid must start at 0 and end at 1")


@dataclass(frozen=True)
class KieferSheet:
    """``n_steps`` independent bridges; running sums give ``K(k, .)``."""

    grid: np.ndarray
    rows: np.ndarray  # shape (n_steps, m)

    @property
    def n_steps(self) -> int:
        return self.rows.shape[0]

    def partial_sums(self) -> np.ndarray:
        """Array of shape ``(n_steps + 1, m)`` whose row k is ``K(k, .)``."""
        out = np.zeros((self.n_steps + 1, self.grid.size))
        np.cumsum(self.rows, axis=0, out=out[1:])
        return out

    def at(self, k: int) -> np.ndarray:
        if not 0 <= k <= self.n_steps:
            raise ValueError("k outside [0, n_steps]")
        return self.rows[:k].sum(axis=0) if k else np.zeros(self.grid.size)


def uniform_grid(m: int) -> np.ndarray:
    if m < 2:
        raise ValueError("grid needs at least 2 points")
    return np.linspace(0.0, 1.0, m)


def bridges(gen: np.random.Generator, count: int, m: int) -> np.ndarray:
    """``count`` Brownian bridge paths on the m-point grid, shape (count, m)."""
    u = uniform_grid(m)
    du = 1.0 / (m - 1)
    w = np.zeros((count, m))
    if m > 2:
        np.cumsum(gen.standard_normal((count, m - 1)) * math.sqrt(du), axis=1, out=w[:, 1:])
    else:
        w[:, 1] = gen.standard_normal(count)
    b = w - u * w[:, -1:]
    b[:, -1] = 0.0
    return b


def _block(m: int) -> int:
    return max(1, _BLOCK_FLOATS // m)


def _draws(fn, size, m, rng, threads):
    """Scalar functional draws; one draw (float) when ``size`` is None.

    ``fn(paths, gen)`` maps a block of bridge paths to one value per path.
    """
    stream = as_stream(rng)
    n = 1 if size is None else int(size)
    out = blocked_draws(lambda g, c: fn(bridges(g, c, m), g), n, stream, _block(m), threads)
    return float(out[0]) if size is None else out


def abs_sup_between_nodes(paths: np.ndarray, w: np.ndarray, gen: np.random.Generator) -> np.ndarray:
    """Sup of ``w(u)|B(u)|`` over the continuum, given the grid values.

    Between two nodes the bridge is again a Brownian bridge, whose maximum
    and minimum have closed-form conditional laws; both are drawn by
    inversion.  ``w`` must be nondecreasing: its right-node value bounds the
    weight on each cell.
    """
    m = paths.shape[1]
    du = 1.0 / (m - 1)
    a, b = paths[:, :-1], paths[:, 1:]
    e_hi = -2.0 * du * np.log1p(-gen.random(a.shape))
    e_lo = -2.0 * du * np.log1p(-gen.random(a.shape))
    d2 = (a - b) ** 2
    hi = 0.5 * (a + b + np.sqrt(d2 + e_hi))
    lo = 0.5 * (a + b - np.sqrt(d2 + e_lo))
    return (np.maximum(hi, -lo) * w[1:]).max(axis=1)


def simulate_bridge(m: int, rng: RngStream | int | None = None) -> PathGrid:
    stream = as_stream(rng)
    path = bridges(stream.child(0).generator(), 1, m)[0]
    return PathGrid(uniform_grid(m), path, {"process": "bridge", "m": m})


def weight(u: np.ndarray, p: int) -> np.ndarray:
    return u ** p / math.factorial(p)


def bp_transform(path: PathGrid, p: int) -> PathGrid:
    """Pointwise ``u^p B(u) / p!``."""
    if p < 0:
        raise ValueError("p must be nonnegative")
    if p == 0:
        return path
    meta = dict(path.meta, p=p)
    return PathGrid(path.grid, weight(path.grid, p) * path.values, meta)


def _trapezoid(f: np.ndarray, du: float) -> np.ndarray:
    return du * (f.sum(axis=-1) - 0.5 * (f[..., 0] + f[..., -1]))


def _sup_functional(w: np.ndarray, continuous: bool):
    if continuous:
        return lambda b, g: abs_sup_between_nodes(b, w, g)
    return lambda b, g: np.abs(b * w).max(axis=1)


def sample_limit_ks(p: int, m: int = DEFAULT_GRID, rng=None, size: int | None = None,
                    threads: int | None = 1, continuous: bool = True):
    """Draw(s) of ``sup_u |u^p B(u)| / p!``.

    With ``continuous=False`` the sup is taken over grid nodes only, which is
    biased low by roughly ``0.58 / sqrt(m)``.
    """
    w = weight(uniform_grid(m), p)
    return _draws(_sup_functional(w, continuous), size, m, rng, threads)


def sample_limit_cvm(p: int, m: int = DEFAULT_GRID, rng=None, size: int | None = None, threads: int | None = 1):
    """Draw(s) of ``int_0^1 (u^p B(u) / p!)^2 du`` (trapezoid rule)."""
    w = weight(uniform_grid(m), p)
    du = 1.0 / (m - 1)
    return _draws(lambda b, g: _trapezoid((b * w) ** 2, du), size, m, rng, threads)


def sample_limit_omega(p: int, r: float, m: int = DEFAULT_GRID, rng=None, size: int | None = None,
                       threads: int | None = 1):
    """Draw(s) of ``(int_0^1 |u^p B(u) / p!|^r du)^(1/r)``."""
    w = weight(uniform_grid(m), p)
    du = 1.0 / (m - 1)
    return _draws(lambda b, g: _trapezoid(np.abs(b * w) ** r, du) ** (1.0 / r), size, m, rng, threads)


def two_sample_limit_constants(p: int, q: int) -> tuple[float, float]:
    """Exponent and scale ``(a, c)`` of the two-sample limit ``c u^a B(u)``."""
    if q < 1:
        raise ValueError("q must be >= 1")
    a = p * q + q - 1
    c = (p + 1) * q / math.factorial(p + 1) ** q
    return float(a), c


def sample_limit_weighted_bridge_sup(a: float, c: float, m: int = DEFAULT_GRID, rng=None,
                                     size: int | None = None, threads: int | None = 1,
                                     continuous: bool = True):
    """Draw(s) of ``sup_u c u^a |B(u)|``."""
    if a < 0 or c <= 0:
        raise ValueError("need a >= 0 and c > 0")
    w = c * uniform_grid(m) ** a
    return _draws(_sup_functional(w, continuous), size, m, rng, threads)


def ksample_limit_process(p: int, weights, paths: np.ndarray, grid: np.ndarray) -> np.ndarray:
    """``u^(2p)/p!^2 [sum_k B_k^2 - (sum_k w_k B_k)^2]`` for given bridge rows."""
    w = np.asarray(weights, dtype=float)
    quad = (paths ** 2).sum(axis=0) - (w[:, None] * paths).sum(axis=0) ** 2
    return grid ** (2 * p) / math.factorial(p) ** 2 * quad


def sample_limit_ksample(p: int, weights, m: int = DEFAULT_GRID, rng=None, paths: np.ndarray | None = None):
    """One draw ``(sup, integral)`` of the K-sample limit process.

    ``weights`` are ``sqrt(n_k / |n|)`` and must have unit Euclidean norm.
    ``paths`` (shape ``(K, m)``) replaces the simulated bridges when given.
    """
    w = np.asarray(weights, dtype=float)
    if w.ndim != 1 or w.size < 2:
        raise ValueError("K-sample limit needs K >= 2 weights")
    if np.any(w < 0) or abs(float(np.sum(w ** 2)) - 1.0) > 1e-9:
        raise ValueError("weights must be nonnegative with sum of squares 1")
    grid = uniform_grid(m)
    if paths is None:
        paths = bridges(as_stream(rng).child(0).generator(), w.size, m)
    proc = ksample_limit_process(p, w, np.asarray(paths, dtype=float), grid)
    return float(proc.max()), float(_trapezoid(proc, 1.0 / (m - 1)))


def simulate_kiefer(n_steps: int, m: int = DEFAULT_GRID, rng=None) -> KieferSheet:
    if n_steps < 1:
        raise ValueError("n_steps must be >= 1")
    gen = as_stream(rng).child(0).generator()
    return KieferSheet(uniform_grid(m), bridges(gen, n_steps, m))


def kiefer_batch(count: int, n_steps: int, m: int, rng=None, threads: int | None = 1) -> np.ndarray:
    """``count`` independent sheets of partial sums, shape (count, n_steps+1, m)."""
    if n_steps < 1:
        raise ValueError("n_steps must be >= 1")

    def block(g, c):
        rows = bridges(g, c * n_steps, m).reshape(c, n_steps, m)
        out = np.zeros((c, n_steps + 1, m))
        np.cumsum(rows, axis=1, out=out[:, 1:])
        return out

    return blocked_draws(block, count, as_stream(rng), max(1, _BLOCK_FLOATS // (m * n_steps)), threads)


def tie_down(k_sums: np.ndarray, grid: np.ndarray, p: int = 0) -> np.ndarray:
    """Tie partial sums ``K(k, .)`` (axis -2) down in time and apply ``u^p/p!``."""
    n = k_sums.shape[-2] - 1
    s = (np.arange(n + 1) / n)[:, None]
    tied = (k_sums - s * k_sums[..., -1:, :]) / math.sqrt(n)
    return tied * weight(grid, p)


def tied_down_kiefer(sheet: KieferSheet, p: int = 0) -> np.ndarray:
    """``u^p/p! (K(k,u) - (k/n) K(n,u)) / sqrt(n)`` for k = 0..n, shape (n+1, m)."""
    return tie_down(sheet.partial_sums(), sheet.grid, p)


def changepoint_weight(t) -> np.ndarray:
    """``sqrt(t(1-t) loglog(1/(t(1-t))))`` with the loglog argument kept >= e."""
    t = np.asarray(t, dtype=float)
    v = t * (1.0 - t)
    with np.errstate(divide="ignore"):
        arg = np.maximum(1.0 / v, math.e)
    return np.sqrt(v * np.log(np.log(arg)))


def sample_limit_changepoint(p: int, n_steps: int, m: int = DEFAULT_GRID,
                             weight_fn: Callable | None = None, rng=None) -> float:
    """One draw of the (optionally weighted) sup of the tied-down Kiefer process.

    Time is discretised at ``s = k / n_steps``.  With a weight function the
    sup runs over ``k = 1..n_steps-1`` and each row is divided by ``w(k/n)``.
    """
    if n_steps < 2:
        raise ValueError("n_steps must be >= 2")
    tied = np.abs(tied_down_kiefer(simulate_kiefer(n_steps, m, rng), p))
    if weight_fn is None:
        return float(tied.max())
    s = np.arange(1, n_steps) / n_steps
    w = np.asarray(weight_fn(s), dtype=float)
    if not np.all(np.isfinite(w)) or np.any(w <= 0):
        raise ValueError("weight function must be positive and finite on (0, 1)")
    return float((tied[1:-1] / w[:, None]).max())


QUANTILE_FUNCTIONALS = {
    "ks": sample_limit_ks,
    "cvm": sample_limit_cvm,
}


def quantile_row(functional: str, p: int, m: int, n_draws: int, seed: int, threads: int | None = 1) -> dict:
    try:
        sampler = QUANTILE_FUNCTIONALS[functional]
    except KeyError:
        raise ValueError(f"unknown functional {functional!r}") from None
    draws = sampler(p, m, RngStream(seed).child(p), size=n_draws, threads=threads)
    q90, q95, q99 = np.quantile(draws, [0.90, 0.95, 0.99])
    return {"functional": functional, "p": p, "m": m, "n_draws": n_draws, "seed": seed,
            "q90": float(q90), "q95": float(q95), "q99": float(q99)}


QUANTILE_COLUMNS = ["functional", "p", "m", "n_draws", "seed", "q90", "q95", "q99"]


def write_quantile_table(rows, path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=QUANTILE_COLUMNS, lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in row.items()})
