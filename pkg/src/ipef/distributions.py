"""Continuous distributions described by a d.f. and its quantile function."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import special


@dataclass(frozen=True)
class DistSpec:
    """A continuous d.f. together with its generalized inverse.

    Both callables must accept and return numpy arrays (broadcasting).
    """

    cdf: Callable[[np.ndarray], np.ndarray]
    inv_cdf: Callable[[np.ndarray], np.ndarray]
    label: str
    params: tuple = field(default=())

    def sample(self, n: int, gen: np.random.Generator) -> np.ndarray:
        return self.inv_cdf(gen.random(n))


def uniform(a: float = 0.0, b: float = 1.0) -> DistSpec:
    if not b > a:
        raise ValueError("uniform requires b > a")
    w = b - a

    def cdf(t):
        return np.clip((np.asarray(t, dtype=float) - a) / w, 0.0, 1.0)

    def inv(u):
        return a + w * np.asarray(u, dtype=float)

    return DistSpec(cdf, inv, "uniform", (a, b))


def exponential(rate: float = 1.0) -> DistSpec:
    if not rate > 0:
        raise ValueError("exponential rate must be positive")

    def cdf(t):
        t = np.asarray(t, dtype=float)
        return np.where(t > 0, -np.expm1(-rate * np.maximum(t, 0.0)), 0.0)

    def inv(u):
        return -np.log1p(-np.asarray(u, dtype=float)) / rate

    return DistSpec(cdf, inv, "exponential", (rate,))


def normal(mu: float = 0.0, sigma: float = 1.0) -> DistSpec:
    if not sigma > 0:
        raise ValueError("normal sigma must be positive")

    def cdf(t):
        return special.ndtr((np.asarray(t, dtype=float) - mu) / sigma)

    def inv(u):
        return mu + sigma * special.ndtri(np.asarray(u, dtype=float))

    return DistSpec(cdf, inv, "normal", (mu, sigma))


def tabulated(t: np.ndarray, f: np.ndarray, label: str = "table") -> DistSpec:
    """Monotone piecewise-linear d.f. through the knots ``(t_i, f_i)``.

    ``f`` must be nondecreasing, start at 0 and end at 1.  Flat stretches
    are allowed; the inverse returns the left end of a flat stretch.
    """
    t = np.asarray(t, dtype=float)
    f = np.asarray(f, dtype=float)
    if t.ndim != 1 or t.shape != f.shape or t.size < 2:
        raise ValueError("table needs two equal-length columns with >= 2 rows")
    if np.any(np.diff(t) <= 0):
        raise ValueError("table t column must be strictly increasing")
    if np.any(np.diff(f) < 0):
        raise ValueError("table F column must be nondecreasing")
    if abs(f[0]) > 1e-12 or abs(f[-1] - 1.0) > 1e-12:
        raise ValueError("table F column must run from 0 to 1")

    def cdf(x):
        return np.interp(np.asarray(x, dtype=float), t, f, left=0.0, right=1.0)

    def inv(u):
        u = np.asarray(u, dtype=float)
        # leftmost knot interval containing u
        j = np.clip(np.searchsorted(f, u, side="left"), 1, f.size - 1)
        f0, f1 = f[j - 1], f[j]
        t0, t1 = t[j - 1], t[j]
        span = np.where(f1 > f0, f1 - f0, 1.0)
        return np.where(f1 > f0, t0 + (u - f0) * (t1 - t0) / span, t0)

    return DistSpec(cdf, inv, label, ())


REGISTRY: dict[str, Callable[..., DistSpec]] = {
    "uniform": uniform,
    "exponential": exponential,
    "normal": normal,
}


def from_name(name: str, params: list[float] | tuple = ()) -> DistSpec:
    try:
        factory = REGISTRY[name]
    except KeyError:
        raise ValueError(f"unknown distribution {name!r}; "
                         f"choose from {sorted(REGISTRY)}") from None
    return factory(*params)
