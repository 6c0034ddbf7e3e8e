"""Empirical d.f.s and their p-fold integrated versions.

Everything here depends on the data only through the count ``k = n F_n(t)``.
The p-fold integrated empirical d.f. is

    F_n^(p)(t) = C(k + p, p + 1) / n^(p+1),

the number of nondecreasing index tuples ``1 <= i_1 <= ... <= i_{p+1} <= k``
divided by ``n^(p+1)``.  Its population counterpart is
``F(t)^(p+1) / (p+1)!``.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Sequence

import numpy as np

from .distributions import DistSpec

EXACT_LIMIT = 60  # n + p above this switches to floating point


class Sample:
    """Immutable batch of observations with cached order statistics."""

    __slots__ = ("values", "sorted", "n")

    def __init__(self, values):
        arr = np.array(values, dtype=float).ravel()
        if arr.size == 0:
            raise ValueError("a sample needs at least one observation")
        if not np.all(np.isfinite(arr)):
            raise ValueError("sample contains non-finite values")
        arr.setflags(write=False)
        srt = np.sort(arr)
        srt.setflags(write=False)
        self.values = arr
        self.sorted = srt
        self.n = int(arr.size)

    def __len__(self) -> int:
        return self.n

    def __repr__(self) -> str:
        return f"Sample(n={self.n})"

    def count(self, t, left: bool = False):
        """``#{i : X_i <= t}`` (or ``< t`` when ``left``), vectorised over t."""
        side = "left" if left else "right"
        return np.searchsorted(self.sorted, t, side=side)

    @classmethod
    def from_text(cls, text: str) -> "Sample":
        """One decimal per line; blank lines and ``#`` comments are skipped."""
        vals = []
        for lineno, line in enumerate(text.splitlines(), start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            try:
                vals.append(float(line))
            except ValueError:
                raise ValueError(f"line {lineno}: cannot parse {line!r}") from None
        return cls(vals)

    @classmethod
    def from_csv(cls, text: str, column: str) -> "Sample":
        reader = csv.DictReader(io.StringIO(text))
        if reader.fieldnames is None or column not in reader.fieldnames:
            raise ValueError(f"CSV has no column {column!r}")
        vals = []
        for rowno, row in enumerate(reader, start=2):
            cell = (row[column] or "").strip()
            if not cell:
                continue
            try:
                vals.append(float(cell))
            except ValueError:
                raise ValueError(f"row {rowno}: cannot parse {cell!r}") from None
        return cls(vals)

    @classmethod
    def read(cls, path: str | Path, column: str | None = None) -> "Sample":
        text = Path(path).read_text(encoding="utf-8")
        if column is not None:
            return cls.from_csv(text, column)
        return cls.from_text(text)


@dataclass(frozen=True)
class IntegratedEdfValue:
    u_count: int
    value: float
    p: int
    exact: Fraction | None = None


def _check_p(p: int) -> int:
    if int(p) != p or p < 0:
        raise ValueError(f"order p must be a nonnegative integer, got {p!r}")
    return int(p)


def edf_eval(sample: Sample, t, left: bool = False):
    """Empirical d.f. at ``t``; ``left=True`` gives the left limit."""
    return sample.count(t, left=left) / sample.n


def integrated_fraction(k: int, n: int, p: int) -> Fraction:
    return Fraction(math.comb(k + p, p + 1), n ** (p + 1))


def integrated_values(k, n: int, p: int) -> np.ndarray:
    """Floating-point ``C(k+p, p+1) / n^(p+1)`` for an array of counts.

    Evaluated as ``prod_{i=0..p} ((k + i) / n) / (p+1)!`` which neither
    overflows nor loses relative accuracy for large ``n``.
    """
    k = np.asarray(k, dtype=float)
    out = np.ones_like(k)
    for i in range(p + 1):
        out = out * ((k + i) / n)
    return out / math.factorial(p + 1)


def integrated_from_count(k: int, n: int, p: int) -> IntegratedEdfValue:
    p = _check_p(p)
    k = int(k)
    if n + p <= EXACT_LIMIT:
        exact = integrated_fraction(k, n, p)
        return IntegratedEdfValue(k, float(exact), p, exact)
    return IntegratedEdfValue(k, float(integrated_values(k, n, p)), p, None)


def integrated_edf(sample: Sample, p: int, t: float, left: bool = False) -> IntegratedEdfValue:
    """p-fold integrated empirical d.f. at ``t`` via the binomial closed form."""
    return integrated_from_count(int(sample.count(t, left=left)), sample.n, p)


def integrated_edf_oracle(sample: Sample, p: int, t: float) -> float:
    """Direct evaluation of the iterated Stieltjes integral.

    Uses only the recursion ``F^(p)(t) = (1/n) sum_{X_i <= t} F^(p-1)(X_i)``
    with ``F^(0) = F_n``; meant as a test oracle for small inputs.
    """
    p = _check_p(p)
    if sample.n > 12 or p > 4:
        raise ValueError("oracle limited to n <= 12 and p <= 4")
    xs = list(sample.values)
    n = sample.n

    def rec(order: int, s: float) -> Fraction:
        if order == 0:
            return Fraction(sum(1 for x in xs if x <= s), n)
        return sum((rec(order - 1, x) for x in xs if x <= s), Fraction(0)) / n

    return float(rec(p, t))


def theoretical_integrated(u, p: int):
    """``u^(p+1) / (p+1)!``, the integrated d.f. written in ``u = F(t)``."""
    p = _check_p(p)
    u = np.asarray(u, dtype=float)
    if np.any((u < 0) | (u > 1)):
        raise ValueError("u must lie in [0, 1]")
    out = u ** (p + 1) / math.factorial(p + 1)
    return float(out) if out.ndim == 0 else out


def alpha_np(sample: Sample, f0: DistSpec, p: int, t: float) -> float:
    """Integrated empirical process ``sqrt(n) (F_n^(p)(t) - F0^(p)(t))``."""
    v = integrated_edf(sample, p, t).value
    g = theoretical_integrated(float(f0.cdf(t)), p)
    return math.sqrt(sample.n) * (v - g)


def _power_sum(k: int, p: int, start: int) -> Fraction:
    return Fraction(sum(i ** p for i in range(start, k + start)))


def tilde_integrated_edf(sample: Sample, p: int, t: float) -> float:
    """``int_{-inf}^t F_n(s)^p dF_n(s) = n^-(p+1) sum_{i=1}^{k} i^p``."""
    p = _check_p(p)
    k = int(sample.count(t))
    return float(_power_sum(k, p, 1) / sample.n ** (p + 1))


def breve_integrated_edf(sample: Sample, p: int, t: float) -> float:
    """``int_{-inf}^t (F_n(t) - F_n(s))^p dF_n(s) = n^-(p+1) sum_{i=0}^{k-1} i^p``."""
    p = _check_p(p)
    k = int(sample.count(t))
    # 0**0 == 1 keeps the p = 0 case equal to F_n(t)
    return float(_power_sum(k, p, 0) / sample.n ** (p + 1))


def tilde_theoretical(u, p: int):
    return np.asarray(u, dtype=float) ** (p + 1) / (p + 1)


def poly_integrated_edf(sample: Sample, coeffs, t: float) -> float:
    """Integrated e.d.f. indexed by ``P(x, y) = sum a_ij x^i y^j``.

    ``coeffs[i][j]`` multiplies ``x^i y^j``; the value is
    ``sum_ij a_ij F_n(t)^j tilde_F_n^(i)(t)``.
    """
    a = np.atleast_2d(np.asarray(coeffs, dtype=float))
    if not np.all(np.isfinite(a)):
        raise ValueError("coefficients must be finite")
    fn = float(edf_eval(sample, t))
    total = 0.0
    for i in range(a.shape[0]):
        if not np.any(a[i]):
            continue
        ti = tilde_integrated_edf(sample, i, t)
        for j in range(a.shape[1]):
            if a[i, j]:
                total += a[i, j] * fn ** j * ti
    return total


def poly_theoretical(coeffs, u) -> float:
    """``sum_ij a_ij / (i+1) u^(i+j+1)``."""
    a = np.atleast_2d(np.asarray(coeffs, dtype=float))
    i, j = np.indices(a.shape)
    return float(np.sum(a / (i + 1) * float(u) ** (i + j + 1)))


def representation_coefficients(p: int) -> list[Fraction]:
    """Coefficients ``a_1 .. a_p`` with

        F_n^(p) = F_n^(p+1)/(p+1)! + sum_k a_k F_n^k / n^(p-k+1).

    They are the coefficients of ``prod_{i=1..p} (x + i)`` divided by
    ``(p+1)!`` (rationals, in general not integers).
    """
    p = _check_p(p)
    poly = [1]  # ascending coefficients of prod (x + i)
    for i in range(1, p + 1):
        nxt = [0] * (len(poly) + 1)
        for d, c in enumerate(poly):
            nxt[d] += c * i
            nxt[d + 1] += c
        poly = nxt
    f = math.factorial(p + 1)
    # x^(k-1) coefficient of prod(x+i) pairs with F_n^k
    return [Fraction(poly[k - 1], f) for k in range(1, p + 1)]


def weighted_pooled_integrated(samples: Sequence[Sample], p: int, t: float, left: bool = False) -> float:
    """Size-weighted average of per-sample integrated e.d.f.s.

    This is how the pooled K-sample reference curve is *defined* for the
    K-sample statistics; for ``p >= 1`` it differs from the integrated
    e.d.f. of the concatenated sample.
    """
    total = sum(s.n for s in samples)
    return sum(s.n * integrated_edf(s, p, t, left=left).value for s in samples) / total
