"""Test statistics built on the p-fold integrated empirical d.f.

One-sample statistics depend on the data only through ``u_i = F0(X_i)``;
the ``*_from_uniform`` functions work on arrays of sorted ``u`` values of
shape ``(..., n)`` so that null distributions can be simulated in bulk.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, NamedTuple, Sequence

import numpy as np
from scipy import special

from . import gaussproc
from .distributions import DistSpec
from .empirical import Sample, integrated_values
from .rng import RngStream, as_stream, blocked_draws

METHODS = ("null-mc", "limiting-law", "parametric-bootstrap")
STATISTICS = ("ks", "cvm", "omega")

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(32)


# --------------------------------------------------------------------------
# reports


@dataclass
class TestReport:
    statistic: float
    p: int
    critical_value: float
    p_value: float
    reject: bool
    method: str
    seed: int
    n_replications: int
    alpha: float
    statistic_name: str = "ks"
    n_dropped: int = 0
    extra: dict = field(default_factory=dict)

    __test__ = False  # not a pytest class

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}")

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "TestReport":
        return cls(**json.loads(text))


def decide(statistic: float, reference: np.ndarray, alpha: float) -> tuple[float, float, bool]:
    """Critical value, p-value and decision from a reference sample.

    The critical value is the ``ceil(M (1 - alpha))``-th order statistic of
    the ``M`` reference draws; the p-value is ``(1 + #{ref >= stat}) / (M + 1)``.
    """
    ref = np.sort(np.asarray(reference, dtype=float))
    m = ref.size
    if m == 0:
        raise ValueError("empty reference distribution")
    idx = min(m, max(1, math.ceil(m * (1.0 - alpha)))) - 1
    crit = float(ref[idx])
    pval = (1.0 + float(np.sum(ref >= statistic))) / (m + 1.0)
    return crit, pval, bool(statistic > crit)


# --------------------------------------------------------------------------
# one-sample statistics on uniformised data


def _ks_core(u, left_counts, right_counts, n: int, p: int):
    c = 1.0 / math.factorial(p + 1)
    g = c * u ** (p + 1)
    hi = integrated_values(right_counts, n, p)
    lo = integrated_values(left_counts, n, p)
    d = np.maximum(np.abs(hi - g), np.abs(lo - g)).max(axis=-1)
    plateau = abs(float(integrated_values(n, n, p)) - c)
    return math.sqrt(n) * np.maximum(d, plateau)


def ks_from_uniform(u_sorted, p: int):
    """``S_n^(p)`` for sorted uniformised samples (distinct values), shape (..., n)."""
    u = np.asarray(u_sorted, dtype=float)
    n = u.shape[-1]
    i = np.arange(n)
    return _ks_core(u, i, i + 1, n, p)


def _cvm_core(edges, values, n: int, p: int):
    """``n * int_0^1 (v(u) - u^(p+1)/(p+1)!)^2 du`` for a step function ``v``.

    ``edges`` has shape (..., J+2) running from 0 to 1; ``values`` (..., J+1)
    holds the step value on each cell.
    """
    c = 1.0 / math.factorial(p + 1)
    a, b = edges[..., :-1], edges[..., 1:]
    v = values
    piece = (v * v * (b - a)
             - 2.0 * v * c * (b ** (p + 2) - a ** (p + 2)) / (p + 2)
             + c * c * (b ** (2 * p + 3) - a ** (2 * p + 3)) / (2 * p + 3))
    return n * piece.sum(axis=-1)


def _cells(u):
    shape = u.shape[:-1]
    return np.concatenate([np.zeros(shape + (1,)), u, np.ones(shape + (1,))], axis=-1)


def cvm_from_uniform(u_sorted, p: int):
    """Exact ``T_n^(p)`` for sorted uniformised samples, shape (..., n)."""
    u = np.asarray(u_sorted, dtype=float)
    n = u.shape[-1]
    vals = integrated_values(np.arange(n + 1), n, p)
    return _cvm_core(_cells(u), np.broadcast_to(vals, u.shape[:-1] + (n + 1,)), n, p)


def _abs_power_integral(v: float, a: float, b: float, p: int, r: float) -> float:
    """``int_a^b |v - u^(p+1)/(p+1)!|^r du``, split at the sign change."""
    if b <= a:
        return 0.0
    c = 1.0 / math.factorial(p + 1)
    cross = (v / c) ** (1.0 / (p + 1)) if v > 0 else 0.0
    total = 0.0
    for lo, hi in ((a, min(b, cross)), (max(a, cross), b)):
        if hi > lo:
            half = 0.5 * (hi - lo)
            x = lo + half * (_GL_NODES + 1.0)
            total += half * float(np.dot(_GL_WEIGHTS, np.abs(v - c * x ** (p + 1)) ** r))
    return total


def omega_from_uniform(u_sorted, p: int, r: float) -> float:
    """``omega_{n,p,r}`` for one sorted uniformised sample."""
    if r < 1:
        raise ValueError("r must be >= 1")
    u = np.asarray(u_sorted, dtype=float)
    n = u.size
    edges = np.concatenate([[0.0], u, [1.0]])
    if p == 0:
        # closed form: antiderivative (u - s)|u - s|^r / (r + 1) on each cell
        s = np.arange(n + 1) / n
        hi = edges[1:] - s
        lo = edges[:-1] - s
        total = np.sum(hi * np.abs(hi) ** r - lo * np.abs(lo) ** r) / (r + 1)
    else:
        vals = integrated_values(np.arange(n + 1), n, p)
        total = sum(_abs_power_integral(float(vals[i]), float(edges[i]), float(edges[i + 1]), p, r)
                    for i in range(n + 1))
    return math.sqrt(n) * max(total, 0.0) ** (1.0 / r)


def _distinct_counts(sorted_vals: np.ndarray):
    """Distinct values with the counts ``#{< z}`` and ``#{<= z}``."""
    z, first = np.unique(sorted_vals, return_index=True)
    right = np.append(first[1:], sorted_vals.size)
    return z, first, right


def _uniformised(sample: Sample, f0: DistSpec):
    z, left, right = _distinct_counts(sample.sorted)
    u = np.clip(np.asarray(f0.cdf(z), dtype=float), 0.0, 1.0)
    return u, left, right


def ks_integrated(sample: Sample, f0: DistSpec, p: int) -> float:
    """``sup_t |sqrt(n) (F_n^(p)(t) - F0(t)^(p+1)/(p+1)!)|``, exact scan."""
    u, left, right = _uniformised(sample, f0)
    return float(_ks_core(u, left, right, sample.n, p))


def cvm_integrated(sample: Sample, f0: DistSpec, p: int) -> float:
    """``n int (F_n^(p) - F0^(p))^2 dF0`` by exact piecewise integration."""
    u, left, right = _uniformised(sample, f0)
    n = sample.n
    vals = integrated_values(np.concatenate([[0], right]), n, p)
    return float(_cvm_core(np.concatenate([[0.0], u, [1.0]]), vals, n, p))


def omega_integrated(sample: Sample, f0: DistSpec, p: int, r: float) -> float:
    """``sqrt(n) (int |F_n^(p) - F0^(p)|^r dF0)^(1/r)``."""
    if r < 1:
        raise ValueError("r must be >= 1")
    u, left, right = _uniformised(sample, f0)
    if np.all(right - left == 1):
        return omega_from_uniform(u, p, r)
    # ties: integrate cell by cell with the actual counts
    n = sample.n
    edges = np.concatenate([[0.0], u, [1.0]])
    vals = integrated_values(np.concatenate([[0], right]), n, p)
    total = sum(_abs_power_integral(float(vals[i]), float(edges[i]), float(edges[i + 1]), p, r)
                for i in range(vals.size))
    return math.sqrt(n) * total ** (1.0 / r)


def statistic_from_uniform(stat: str, u_sorted, p: int, r: float = 2.0):
    """Dispatch on ``stat``; vectorised over leading axes."""
    if stat == "ks":
        return ks_from_uniform(u_sorted, p)
    if stat == "cvm":
        return cvm_from_uniform(u_sorted, p)
    if stat == "omega":
        u = np.asarray(u_sorted, dtype=float)
        if u.ndim == 1:
            return omega_from_uniform(u, p, r)
        flat = u.reshape(-1, u.shape[-1])
        return np.array([omega_from_uniform(row, p, r) for row in flat]).reshape(u.shape[:-1])
    raise ValueError(f"unknown statistic {stat!r}; choose from {STATISTICS}")


def one_sample_statistic(stat: str, sample: Sample, f0: DistSpec, p: int, r: float = 2.0) -> float:
    if stat == "ks":
        return ks_integrated(sample, f0, p)
    if stat == "cvm":
        return cvm_integrated(sample, f0, p)
    if stat == "omega":
        return omega_integrated(sample, f0, p, r)
    raise ValueError(f"unknown statistic {stat!r}; choose from {STATISTICS}")


NULL_BLOCK = 1000


def null_statistics(stat: str, p: int, n: int, m_reps: int, rng=None, r: float = 2.0,
                    threads: int | None = 1) -> np.ndarray:
    """``m_reps`` draws of a one-sample statistic under uniform data."""
    def block(gen, count):
        u = np.sort(gen.random((count, n)), axis=1)
        return statistic_from_uniform(stat, u, p, r)

    return blocked_draws(block, m_reps, as_stream(rng), NULL_BLOCK, threads)


def limit_statistics(stat: str, p: int, m_reps: int, rng=None, r: float = 2.0, m: int = gaussproc.DEFAULT_GRID,
                     threads: int | None = 1) -> np.ndarray:
    if stat == "ks":
        return gaussproc.sample_limit_ks(p, m, rng, size=m_reps, threads=threads)
    if stat == "cvm":
        return gaussproc.sample_limit_cvm(p, m, rng, size=m_reps, threads=threads)
    if stat == "omega":
        return gaussproc.sample_limit_omega(p, r, m, rng, size=m_reps, threads=threads)
    raise ValueError(f"unknown statistic {stat!r}")


def gof_test(sample: Sample, f0: DistSpec, p: int, stat: str = "ks", alpha: float = 0.05,
             method: str = "null-mc", reps: int = 10_000, seed: int = 0, r: float = 2.0,
             grid: int = gaussproc.DEFAULT_GRID, threads: int | None = 1) -> TestReport:
    """Goodness-of-fit test of ``H0: F = f0`` with a simulated reference law."""
    value = one_sample_statistic(stat, sample, f0, p, r)
    stream = RngStream(seed)
    if method == "null-mc":
        ref = null_statistics(stat, p, sample.n, reps, stream, r, threads)
    elif method == "limiting-law":
        ref = limit_statistics(stat, p, reps, stream, r, grid, threads)
    else:
        raise ValueError("gof_test supports 'null-mc' and 'limiting-law'")
    crit, pval, rej = decide(value, ref, alpha)
    extra = {"r": r} if stat == "omega" else {}
    return TestReport(value, p, crit, pval, rej, method, seed, reps, alpha, stat, 0, extra)


# --------------------------------------------------------------------------
# two-sample and K-sample


def _counts_at(sorted_vals: np.ndarray, z: np.ndarray) -> np.ndarray:
    return np.searchsorted(sorted_vals, z, side="right")


def two_sample_process(x: Sample, y: Sample, p: int, q: int, t: float) -> float:
    """``sqrt(mn/(m+n)) [F_m^(p)(t)^q - G_n^(p)(t)^q]``."""
    if q < 1:
        raise ValueError("q must be >= 1")
    m, n = x.n, y.n
    fx = float(integrated_values(x.count(t), m, p))
    gy = float(integrated_values(y.count(t), n, p))
    return math.sqrt(m * n / (m + n)) * (fx ** q - gy ** q)


def _two_sample_path(x: Sample, y: Sample, p: int, q: int):
    z = np.unique(np.concatenate([x.sorted, y.sorted]))
    m, n = x.n, y.n
    fx = integrated_values(_counts_at(x.sorted, z), m, p)
    gy = integrated_values(_counts_at(y.sorted, z), n, p)
    return z, math.sqrt(m * n / (m + n)) * (fx ** q - gy ** q)


def two_sample_statistics(x: Sample, y: Sample, p: int, q: int = 1, f0: DistSpec | None = None):
    """``(S, T)`` for the modified two-sample process.

    ``T`` integrates against the pooled empirical d.f. unless ``f0`` is
    given, in which case ``dF0`` is used.
    """
    if q < 1:
        raise ValueError("q must be >= 1")
    z, xi = _two_sample_path(x, y, p, q)
    s = float(np.abs(xi).max(initial=0.0))
    if f0 is None:
        mult = _counts_at(x.sorted, z) - np.searchsorted(x.sorted, z, side="left")
        mult = mult + _counts_at(y.sorted, z) - np.searchsorted(y.sorted, z, side="left")
        t = float(np.sum(mult * xi ** 2) / (x.n + y.n))
    else:
        u = np.clip(np.asarray(f0.cdf(z), dtype=float), 0.0, 1.0)
        widths = np.diff(np.append(u, 1.0))
        t = float(np.sum(xi ** 2 * widths))
    return s, t


class KSampleResult(NamedTuple):
    S: float
    T: float
    process: Callable[[float], float]


def ksample_process(samples: Sequence[Sample], p: int, t) -> np.ndarray:
    """``sum_k n_k (F_k^(p)(t) - D^(p)(t))^2`` with ``D`` the size-weighted average."""
    t = np.asarray(t, dtype=float)
    sizes = np.array([s.n for s in samples], dtype=float)
    vals = np.array([integrated_values(s.count(t), s.n, p) for s in samples])
    d = np.tensordot(sizes, vals, axes=1) / sizes.sum()
    return np.tensordot(sizes, (vals - d) ** 2, axes=1)


def ksample_statistics(samples: Sequence[Sample], f0: DistSpec, p: int) -> KSampleResult:
    if len(samples) < 2:
        raise ValueError("K-sample statistics need K >= 2")
    if any(s.n < 1 for s in samples):
        raise ValueError("empty sample")
    z = np.unique(np.concatenate([s.sorted for s in samples]))
    xi = ksample_process(samples, p, z)
    u = np.clip(np.asarray(f0.cdf(z), dtype=float), 0.0, 1.0)
    widths = np.diff(np.append(u, 1.0))
    s_stat = float(xi.max(initial=0.0))
    t_stat = float(np.sum(xi * widths))

    def process(t):
        out = ksample_process(samples, p, t)
        return float(out) if np.ndim(out) == 0 else out

    return KSampleResult(s_stat, t_stat, process)


# --------------------------------------------------------------------------
# change-point


@dataclass
class ChangePointResult:
    statistic: float
    argmax_k: int
    argmax_t: float
    weighted: bool
    p: int
    profile: list = field(default_factory=list)  # (k, t, value) per split

    def write_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["k", "t", "value"])
            for k, t, v in self.profile:
                w.writerow([k, repr(float(t)), repr(float(v))])


def changepoint_process(sample: Sample, p: int, k: int, t: float) -> float:
    """``k(n-k)/n^(3/2) (F_k^(p)-(t) - F_(n-k)^(p)+(t))`` in observation order."""
    n = sample.n
    if not 0 <= k <= n:
        raise ValueError("k outside [0, n]")
    if k in (0, n):
        return 0.0
    head = np.sum(sample.values[:k] <= t)
    tail = np.sum(sample.values[k:] <= t)
    diff = float(integrated_values(head, k, p)) - float(integrated_values(tail, n - k, p))
    return k * (n - k) / n ** 1.5 * diff


def changepoint_scan(sample: Sample, p: int, weighted: bool = False,
                     weight_fn: Callable | None = None) -> ChangePointResult:
    """Sup over splits ``k = 1..n-1`` and over ``t`` of the scan process.

    Both sides are step functions jumping only at the observations, so the
    right-hand values at the distinct observations (plus 0 below the
    minimum) exhaust the sup in ``t``.
    """
    n = sample.n
    if n < 2:
        raise ValueError("change-point scan needs n >= 2")
    if weighted and n < 4:
        raise ValueError("weighted change-point scan needs n >= 4")
    z, ranks = np.unique(sample.values, return_inverse=True)
    onehot = np.zeros((n + 1, z.size))
    onehot[np.arange(1, n + 1), ranks] = 1.0
    prefix = np.cumsum(np.cumsum(onehot, axis=0), axis=1)  # prefix[k, j] = #{i <= k: X_i <= z_j}
    k = np.arange(1, n)[:, None]
    head = integrated_values(prefix[1:n], k, p)
    tail = integrated_values(prefix[n] - prefix[1:n], n - k, p)
    scan = (k * (n - k) / n ** 1.5) * np.abs(head - tail)
    if weighted:
        w = np.asarray((weight_fn or gaussproc.changepoint_weight)(np.arange(1, n) / n), dtype=float)
        if not np.all(np.isfinite(w)) or np.any(w <= 0):
            raise ValueError("weight must be positive and finite at k/n")
        scan = scan / w[:, None]
    jbest = scan.argmax(axis=1)
    rowmax = scan[np.arange(n - 1), jbest]
    kbest = int(rowmax.argmax())
    profile = [(int(i + 1), float(z[jbest[i]]), float(rowmax[i])) for i in range(n - 1)]
    return ChangePointResult(float(rowmax[kbest]), kbest + 1, float(z[jbest[kbest]]), weighted, p, profile)


# --------------------------------------------------------------------------
# estimated parameters


def _col(theta, i):
    return np.asarray(theta, dtype=float)[..., i, None]


@dataclass(frozen=True)
class ParametricFamily:
    """Vectorised parametric family.

    ``cdf(x, theta)``: ``x`` shape (..., n), ``theta`` shape (..., d).
    ``estimate(x)``: (..., n) -> (..., d).
    ``sample(theta, shape, gen)``: draws of the given shape from one member.
    ``grad(x, theta)``: (..., n) -> (..., n, d), gradient of the cdf in theta.
    ``influence(x, theta)``: (..., n) -> (..., n, d), the function ``l`` in
    ``sqrt(n)(theta_hat - theta) = n^-1/2 sum l(X_i) + o(1)``.
    """

    name: str
    dim: int
    cdf: Callable
    estimate: Callable
    sample: Callable
    inv_cdf: Callable | None = None
    grad: Callable | None = None
    influence: Callable | None = None


def _exp_cdf(x, th):
    lam = _col(th, 0)
    return np.where(x > 0, -np.expm1(-lam * np.maximum(x, 0.0)), 0.0)


def exponential_family() -> ParametricFamily:
    """Exponential with rate ``lambda``; MLE ``1 / mean``."""
    return ParametricFamily(
        name="exponential",
        dim=1,
        cdf=_exp_cdf,
        estimate=lambda x: 1.0 / np.mean(x, axis=-1, keepdims=True),
        sample=lambda th, shape, g: g.exponential(1.0 / float(np.asarray(th).ravel()[0]), shape),
        inv_cdf=lambda u, th: -np.log1p(-np.asarray(u)) / _col(th, 0),
        grad=lambda x, th: (np.maximum(x, 0.0) * np.exp(-_col(th, 0) * np.maximum(x, 0.0)))[..., None],
        influence=lambda x, th: (_col(th, 0) - _col(th, 0) ** 2 * np.asarray(x))[..., None],
    )


def normal_family() -> ParametricFamily:
    """Normal with ``(mu, sigma)``; MLE mean and (biased) standard deviation."""

    def cdf(x, th):
        return special.ndtr((np.asarray(x) - _col(th, 0)) / _col(th, 1))

    def est(x):
        return np.stack([np.mean(x, axis=-1), np.std(x, axis=-1)], axis=-1)

    def draw(th, shape, g):
        mu, sigma = np.asarray(th, dtype=float).ravel()[:2]
        return mu + sigma * g.standard_normal(shape)

    def grad(x, th):
        mu, sigma = _col(th, 0), _col(th, 1)
        z = (np.asarray(x) - mu) / sigma
        phi = np.exp(-0.5 * z * z) / math.sqrt(2 * math.pi)
        return np.stack([-phi / sigma, -z * phi / sigma], axis=-1)

    def infl(x, th):
        mu, sigma = _col(th, 0), _col(th, 1)
        d = np.asarray(x) - mu
        return np.stack([d, (d * d - sigma * sigma) / (2 * sigma)], axis=-1)

    return ParametricFamily("normal", 2, cdf, est, draw,
                            inv_cdf=lambda u, th: _col(th, 0) + _col(th, 1) * special.ndtri(np.asarray(u)),
                            grad=grad, influence=infl)


def uniform_scale_family() -> ParametricFamily:
    """Uniform on ``(0, theta)``; estimator ``max(X)``."""
    return ParametricFamily(
        name="uniform-scale",
        dim=1,
        cdf=lambda x, th: np.clip(np.asarray(x) / _col(th, 0), 0.0, 1.0),
        estimate=lambda x: np.max(x, axis=-1, keepdims=True),
        sample=lambda th, shape, g: float(np.asarray(th).ravel()[0]) * g.random(shape),
        inv_cdf=lambda u, th: np.asarray(u) * _col(th, 0),
    )


FAMILIES = {
    "exponential": exponential_family,
    "normal": normal_family,
    "uniform-scale": uniform_scale_family,
}


def estimated_statistics(x_sorted, family: ParametricFamily, p: int):
    """``sup_t |alpha_hat_n^(p)(t)|`` for sorted samples (..., n); returns (stat, theta)."""
    x = np.asarray(x_sorted, dtype=float)
    theta = np.asarray(family.estimate(x), dtype=float)
    u = np.clip(family.cdf(x, theta), 0.0, 1.0)
    return ks_from_uniform(u, p), theta


def estimated_gof(sample: Sample, family: ParametricFamily, p: int, B: int = 500, rng=None,
                  alpha: float = 0.05, max_drop: float = 0.10, block: int = 250) -> TestReport:
    """KS-type test of a composite hypothesis calibrated by parametric bootstrap.

    Each replicate draws ``n`` points from ``F(., theta_hat)``, re-fits and
    recomputes the statistic.  Replicates whose fit is not finite are dropped.
    """
    if B < 99:
        raise ValueError("need at least 99 bootstrap replicates")
    stream = as_stream(rng)
    stat, theta = estimated_statistics(sample.sorted, family, p)
    stat = float(stat)
    if not np.all(np.isfinite(theta)):
        raise ValueError("estimator failed on the observed sample")
    n = sample.n

    def run(gen, count):
        xs = np.sort(family.sample(theta, (count, n), gen), axis=1)
        with np.errstate(all="ignore"):
            vals, th = estimated_statistics(xs, family, p)
        bad = ~np.all(np.isfinite(th), axis=-1) | ~np.isfinite(vals)
        return np.where(bad, np.nan, vals)

    ref = blocked_draws(run, B, stream, block, 1)
    dropped = int(np.sum(np.isnan(ref)))
    if dropped > max_drop * B:
        raise RuntimeError(f"estimator failed on {dropped} of {B} bootstrap replicates")
    crit, pval, rej = decide(stat, ref[~np.isnan(ref)], alpha)
    return TestReport(stat, p, crit, pval, rej, "parametric-bootstrap", stream.seed, B, alpha,
                      "ks-estimated", dropped, {"theta_hat": [float(v) for v in np.ravel(theta)],
                                                "family": family.name})


def simulate_estimated_limit(family: ParametricFamily, theta0, p: int, m: int = 513, n_steps: int = 1,
                             rng=None, influence: Callable | None = None, return_parts: bool = False):
    """One draw of ``sup_t |G_n^(p)(t)|`` on the image of a uniform u-grid.

    ``K(n, u)`` comes from a simulated Kiefer sheet; the vector ``W(n)`` is
    the discrete stochastic integral ``sum_j l(Q(u_j*)) (K(n,u_{j+1}) - K(n,u_j))``
    with ``u_j*`` the cell midpoints.
    """
    if family.grad is None:
        raise ValueError(f"family {family.name!r} provides no cdf gradient")
    infl = influence or family.influence
    if infl is None:
        raise ValueError("an influence function l(x, theta) is required")
    if family.inv_cdf is None:
        raise ValueError("family needs a quantile function")
    theta0 = np.asarray(theta0, dtype=float)
    sheet = gaussproc.simulate_kiefer(n_steps, m, rng)
    grid = sheet.grid
    k_n = sheet.at(n_steps)
    mids = 0.5 * (grid[:-1] + grid[1:])
    lvals = np.asarray(infl(family.inv_cdf(mids, theta0), theta0), dtype=float).reshape(mids.size, -1)
    w_n = lvals.T @ np.diff(k_n)  # shape (d,)
    with np.errstate(all="ignore"):
        t = np.asarray(family.inv_cdf(grid, theta0), dtype=float).ravel()
        grad = np.asarray(family.grad(t, theta0), dtype=float).reshape(grid.size, -1)
    grad = np.where(np.isfinite(grad), grad, 0.0)
    g = (k_n - grad @ w_n) / math.sqrt(n_steps)
    gp = grid ** p / math.factorial(p) * g
    sup = float(np.abs(gp).max())
    if return_parts:
        return sup, {"W": w_n / math.sqrt(n_steps), "G": g, "grid": grid}
    return sup
