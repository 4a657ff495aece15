"""rho-variation seminorms of sampled paths.

The seminorm is the supremum over increasing subsequences of
(sum |increments|^rho)^(1/rho).  The quadratic dynamic program is exact
for sampled data because the supremum is attained on a subsequence of the
sample points.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations

import numpy as np

from .errors import BadOrderError, BadSplitError, EmptyPathError, TooLongError

# increments below this are flushed to zero before the rho-th power so that
# |d|^rho cannot underflow to a denormal mess for large rho
_TINY_INCREMENT = 1e-300


@dataclass(frozen=True)
class SampledPath:
    """Strictly increasing times with finite values."""

    times: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if t.ndim != 1 or v.ndim != 1 or t.size != v.size:
            raise EmptyPathError("times and values must be 1-d of equal length")
        if t.size == 0:
            raise EmptyPathError("path needs at least one point")
        if not np.all(np.isfinite(t)) or not np.all(np.isfinite(v)):
            raise EmptyPathError("path entries must be finite")
        if t.size > 1 and not np.all(np.diff(t) > 0):
            raise EmptyPathError("times must be strictly increasing")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "values", v)

    def __len__(self):
        return self.times.size


def _check_order(rho: float) -> float:
    rho = float(rho)
    if not np.isfinite(rho) or rho < 1.0:
        raise BadOrderError(f"variation order must be >= 1, got {rho}")
    return rho


def variation_values(values: np.ndarray, rho: float) -> float:
    """Seminorm of a value sequence (time stamps are irrelevant to the value)."""
    rho = _check_order(rho)
    v = np.asarray(values, dtype=float)
    if v.ndim != 1 or v.size == 0:
        raise EmptyPathError("need a nonempty 1-d value array")
    n = v.size
    if n == 1:
        return 0.0
    best = np.zeros(n)
    for j in range(1, n):
        d = np.abs(v[j] - v[:j])
        d[d < _TINY_INCREMENT] = 0.0
        best[j] = np.max(best[:j] + d ** rho)
    return float(np.max(best) ** (1.0 / rho))


def variation(path: SampledPath, rho: float) -> float:
    return variation_values(path.values, rho)


def variation_batch(values: np.ndarray, rho: float) -> np.ndarray:
    """Row-wise seminorms for a (paths, length) array, one DP sweep shared."""
    rho = _check_order(rho)
    v = np.asarray(values, dtype=float)
    if v.ndim != 2 or v.shape[1] == 0:
        raise EmptyPathError("need a (paths, length) array")
    m, n = v.shape
    best = np.zeros((m, n))
    for j in range(1, n):
        d = np.abs(v[:, j, None] - v[:, :j])
        d[d < _TINY_INCREMENT] = 0.0
        best[:, j] = np.max(best[:, :j] + d ** rho, axis=1)
    return np.max(best, axis=1) ** (1.0 / rho)


def variation_exhaustive(values: np.ndarray, rho: float) -> float:
    """Enumerate every subsequence by bitmask; independent of the prefix DP.

    The value of mask m is the value of m without its lowest index plus the
    first increment, so masks are filled in popcount order.  Lengths above 20
    are refused (2^20 masks).
    """
    rho = _check_order(rho)
    v = np.asarray(values, dtype=float)
    if v.ndim != 1 or v.size == 0:
        raise EmptyPathError("need a nonempty 1-d value array")
    n = v.size
    if n > 20:
        raise TooLongError(f"exhaustive enumeration capped at 20 points, got {n}")
    if n == 1:
        return 0.0
    d = np.abs(v[:, None] - v[None, :])
    d[d < _TINY_INCREMENT] = 0.0
    d = d ** rho
    masks = np.arange(1 << n, dtype=np.int64)
    pc = np.bitwise_count(masks)
    log2 = np.full(1 << n, -1, dtype=np.int64)
    log2[1 << np.arange(n)] = np.arange(n)
    g = np.zeros(1 << n)
    for k in range(2, n + 1):
        m = masks[pc == k]
        lo1 = m & -m
        rest = m ^ lo1
        lo2 = rest & -rest
        g[m] = d[log2[lo1], log2[lo2]] + g[rest]
    return float(np.max(g) ** (1.0 / rho))


def variation_exhaustive_slow(values: np.ndarray, rho: float) -> float:
    """Plain itertools enumeration; cross-check for the bitmask oracle."""
    rho = _check_order(rho)
    v = [float(x) for x in values]
    n = len(v)
    if n == 0:
        raise EmptyPathError("need a nonempty value sequence")
    if n > 12:
        raise TooLongError("slow enumeration capped at 12 points")
    best = 0.0
    for k in range(2, n + 1):
        for idx in combinations(range(n), k):
            s = sum(abs(v[b] - v[a]) ** rho for a, b in zip(idx, idx[1:]))
            best = max(best, s)
    return best ** (1.0 / rho)


def discrete_variation(values: np.ndarray, rho: float, check_l2_bound: bool = False) -> float:
    """Variation of a sequence indexed by integers.

    With check_l2_bound and rho == 2 the result is asserted against the
    provable bound 2 * l2-norm (each entry enters at most two increments).
    """
    out = variation_values(np.asarray(values, dtype=float), rho)
    if check_l2_bound and rho == 2.0:
        cap = 2.0 * float(np.linalg.norm(np.asarray(values, dtype=float)))
        if out > cap * (1 + 1e-12):
            raise AssertionError(f"v(2)={out} exceeds 2*l2={cap}")
    return out


def variation_properties(path: SampledPath, rho1: float, rho2: float,
                         split: int) -> dict:
    """Monotonicity in rho and superadditivity across a shared split point.

    Returns the four seminorms; callers assert the inequalities.  split is
    an interior index of the path.
    """
    rho1, rho2 = _check_order(rho1), _check_order(rho2)
    n = len(path)
    if not 0 < split < n - 1:
        raise BadSplitError(f"split {split} not interior to a path of {n} points")
    v = path.values
    lo = variation_values(v[: split + 1], rho1)
    hi = variation_values(v[split:], rho1)
    full1 = variation_values(v, rho1)
    full2 = variation_values(v, rho2)
    return {
        "rho1": full1,
        "rho2": full2,
        "left": lo,
        "right": hi,
        "monotone_ok": full2 <= full1 * (1 + 1e-12) if rho2 >= rho1 else None,
        "subadditive_ok": full1 <= (lo + hi) * (1 + 1e-12),
        "superadditive_ok": full1 >= (lo ** rho1 + hi ** rho1) ** (1 / rho1) * (1 - 1e-12),
    }


def derivative_bound_check(fn, dfn, interval, rho: float, grid_size: int = 512):
    """Sampled v(rho) against the integral of |derivative| over the interval.

    fn, dfn are callables of t.  Returns (variation, integral).  For C^1
    paths the variation can never exceed the integral.
    """
    from scipy.integrate import quad

    rho = _check_order(rho)
    a, b = float(interval[0]), float(interval[1])
    ts = np.linspace(a, b, grid_size)
    vals = np.array([fn(t) for t in ts])
    var = variation_values(vals, rho)
    total, _ = quad(lambda t: abs(dfn(t)), a, b, limit=400)
    return var, total
