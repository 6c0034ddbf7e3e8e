"""Partial-sum random walk of the integrated empirical process and its local times.

The walk has increments ``((1 - U_i)^p - 1/(p+1)) / p!``.  Local times use
the window ``I = [-1/2, 1/2]`` (closed); the self-intersection kernel
``int 1_I(a - x) 1_I(b - x) dx`` equals ``max(0, 1 - |a - b|)``.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np
from scipy import integrate

from .rng import as_stream


@dataclass(frozen=True)
class WalkPath:
    p: int
    steps: np.ndarray  # partial sums S_1..S_n

    @property
    def n(self) -> int:
        return int(self.steps.size)


def increments(u, p: int) -> np.ndarray:
    return ((1.0 - np.asarray(u, dtype=float)) ** p - 1.0 / (p + 1)) / math.factorial(p)


def walk(p: int, n: int, rng=None) -> WalkPath:
    if p < 1:
        raise ValueError("p must be >= 1")
    gen = rng if isinstance(rng, np.random.Generator) else as_stream(rng).generator()
    s = np.cumsum(increments(gen.random(n), p))
    s.setflags(write=False)
    return WalkPath(p, s)


def local_time(path: WalkPath, x: float, n: int | None = None) -> int:
    """``#{i <= n : |S_i - x| <= 1/2}``."""
    n = path.n if n is None else int(n)
    if not 0 <= n <= path.n:
        raise ValueError("horizon exceeds path length")
    return int(np.count_nonzero(np.abs(path.steps[:n] - x) <= 0.5))


def pair_kernel(a, b):
    return np.maximum(0.0, 1.0 - np.abs(np.asarray(a) - np.asarray(b)))


def _self_intersection_sorted(s: np.ndarray) -> float:
    # for each j, pairs i < j (in sorted order) with s_j - s_i < 1 contribute 1 - s_j + s_i
    n = s.size
    prefix = np.concatenate([[0.0], np.cumsum(s)])
    lo = np.searchsorted(s, s - 1.0, side="right")
    j = np.arange(n)
    cnt = j - lo
    return float(np.sum(cnt * (1.0 - s) + (prefix[j] - prefix[lo])))


def self_intersection(path: WalkPath, t: float = 1.0, exact: bool = False):
    """``L_n(t) = sum_{i<j<=floor(nt)} max(0, 1 - |S_i - S_j|)``.

    Sorting plus prefix sums gives O(n log n).  With ``exact=True`` the
    float partial sums are converted to ``Fraction`` and the same sweep is
    done in rational arithmetic.
    """
    if not 0 < t <= 1:
        raise ValueError("t must lie in (0, 1]")
    m = math.floor(path.n * t)
    if m < 2:
        raise ValueError("need floor(n t) >= 2")
    s = np.sort(path.steps[:m])
    if not exact:
        return _self_intersection_sorted(s)
    vals = [Fraction(float(v)) for v in s]
    total = Fraction(0)
    acc = Fraction(0)  # sum of s_i over the active window
    lo = 0
    for j, v in enumerate(vals):
        while v - vals[lo] >= 1:
            acc -= vals[lo]
            lo += 1
        total += (j - lo) * (1 - v) + acc
        acc += v
    return total


def self_intersection_naive(path: WalkPath, t: float = 1.0, exact: bool = False):
    m = math.floor(path.n * t)
    s = path.steps[:m]
    if exact:
        fs = [Fraction(float(v)) for v in s]
        return sum((max(Fraction(0), 1 - abs(a - b)) for i, a in enumerate(fs) for b in fs[i + 1:]), Fraction(0))
    return float(sum(pair_kernel(s[i], s[i + 1:]).sum() for i in range(m - 1)))


def growth_from_paths(paths: Sequence[np.ndarray], n_list: Sequence[int]) -> float:
    """Mean over paths of the least-squares slope of ``log L_n(1)`` on ``log n``."""
    logn = np.log(np.asarray(n_list, dtype=float))
    slopes = []
    for steps in paths:
        steps = np.asarray(steps, dtype=float)
        ell = [_self_intersection_sorted(np.sort(steps[:n])) for n in n_list]
        slopes.append(np.polyfit(logn, np.log(ell), 1)[0])
    return float(np.mean(slopes))


def growth_exponent(p: int, n_list: Sequence[int], rng=None, n_paths: int = 20) -> float:
    """Growth exponent of the self-intersection local time, averaged over paths."""
    n_list = [int(n) for n in n_list]
    if len(set(n_list)) < 3 or max(n_list) < 10 * min(n_list):
        raise ValueError("n_list needs at least 3 sizes spanning a factor of 10")
    root = as_stream(rng)
    paths = (walk(p, max(n_list), root.child(i)).steps for i in range(n_paths))
    return growth_from_paths(paths, n_list)


def char_fn(p: int, z: float) -> complex:
    """``int_0^1 exp(i z (u^p - 1/(p+1))) du`` by adaptive quadrature."""
    if p < 1:
        raise ValueError("p must be >= 1")
    phase = lambda u: z * (u ** p - 1.0 / (p + 1))
    lim = max(50, int(abs(z)) * 2)
    re_part = integrate.quad(lambda u: math.cos(phase(u)), 0, 1, epsabs=1e-10, epsrel=1e-10, limit=lim)[0]
    im_part = integrate.quad(lambda u: math.sin(phase(u)), 0, 1, epsabs=1e-10, epsrel=1e-10, limit=lim)[0]
    return complex(re_part, im_part)


def write_growth_csv(path, p: int, n_list: Sequence[int], rng=None, n_paths: int = 20) -> None:
    """Rows ``(path, n, L_n)`` for plotting."""
    root = as_stream(rng)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["path", "n", "L"])
        for i in range(n_paths):
            steps = walk(p, max(n_list), root.child(i)).steps
            for n in n_list:
                w.writerow([i, n, repr(_self_intersection_sorted(np.sort(steps[:n])))])


def write_local_time_csv(path, walk_path: WalkPath, xs, horizons) -> None:
    """Rows ``(n, x, lambda)`` of the neighbourhood local time."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["n", "x", "lambda"])
        for n in horizons:
            for x in xs:
                w.writerow([int(n), repr(float(x)), local_time(walk_path, x, n)])
