"""Multi-index arithmetic and graded enumeration.

A multi-index j = (j_1, ..., j_d) is a d-tuple of non-negative integers with
|j| = sum(j). Basis functions, coefficient vectors and derivative orders are
all labeled by multi-indices; everything downstream assumes the deterministic
graded-lexicographic order produced here (sort by |j|, ties broken
lexicographically), which keeps each degree shell contiguous.
"""

from __future__ import annotations

import itertools
from functools import lru_cache
from math import comb, lgamma

import numpy as np


def compositions(total: int, parts: int):
    """Yield all multi-indices with |j| = total in lexicographic order."""
    if parts == 1:
        yield (total,)
        return
    for first in range(total + 1):
        for rest in compositions(total - first, parts - 1):
            yield (first,) + rest


@lru_cache(maxsize=None)
def enumerate_upto(d: int, max_degree: int) -> tuple[tuple[int, ...], ...]:
    """All multi-indices with |j| <= max_degree, graded-lex ordered.

    Returns exactly C(max_degree + d, d) indices, no duplicates, and the
    restriction to |j| <= max_degree - 1 is a prefix of the result.
    """
    if d < 1:
        raise ValueError(f"dimension must be >= 1, got {d}")
    if max_degree < 0:
        raise ValueError(f"max degree must be >= 0, got {max_degree}")
    out = []
    for degree in range(max_degree + 1):
        out.extend(compositions(degree, d))
    return tuple(out)


def count_upto(d: int, max_degree: int) -> int:
    """Number of multi-indices with |j| <= max_degree: C(max_degree + d, d)."""
    return comb(max_degree + d, d)


def count_exact_degree(d: int, k: int) -> int:
    """Number of multi-indices with |j| = k: the stars-and-bars count C(d-1+k, d-1)."""
    if d < 1 or k < 0:
        raise ValueError("need d >= 1 and k >= 0")
    return comb(d - 1 + k, d - 1)


def factorial_ratio(numerator: int, denominator: int) -> float:
    """numerator! / denominator! in floating point via log-gamma.

    These ratios only feed bound verifiers, so float is fine and avoids
    huge integers.
    """
    return float(np.exp(lgamma(numerator + 1) - lgamma(denominator + 1)))


def multi_factorial(j) -> float:
    """j! = prod(j_i!) as a float."""
    return float(np.exp(sum(lgamma(ji + 1) for ji in j)))


def hockey_stick_holds(q: int, p: int) -> bool:
    """Exact check of C(q, p-1) = sum_{n=p-1}^{q} C(n-1, p-2)."""
    lhs = comb(q, p - 1)
    rhs = sum(comb(n - 1, p - 2) for n in range(p - 1, q + 1))
    return lhs == rhs


def shell_growth_bound_holds(d: int, q: int, n: int) -> bool:
    """Exact check of C(d+q+2-n, d-1) * C(d+2, d-1)^n <= C(d+2, d-1)^(q+1)."""
    base = comb(d + 2, d - 1)
    return comb(d + q + 2 - n, d - 1) * base**n <= base ** (q + 1)


class GradedBasis:
    """Dense graded-lex index space for |j| <= max_degree in d dimensions.

    Caches the position lookup and the raising/lowering index maps that the
    ladder operators and the coefficient cascade are built from.
    """

    def __init__(self, d: int, max_degree: int):
        self.d = d
        self.max_degree = max_degree
        self.indices = enumerate_upto(d, max_degree)
        self.size = len(self.indices)
        self.position = {j: i for i, j in enumerate(self.indices)}
        self.degrees = np.array([sum(j) for j in self.indices])

    @lru_cache(maxsize=None)
    def ladder_maps(self, axis: int):
        """(src, dst, factor) triplets for the raising operator along axis.

        Raising sends j -> j + e_axis with factor sqrt(j_axis + 1); targets
        beyond max_degree are dropped (callers guarantee they never matter).
        Lowering is the transpose with the same factors.
        """
        src, dst, fac = [], [], []
        for i, j in enumerate(self.indices):
            if sum(j) == self.max_degree:
                continue
            up = list(j)
            up[axis] += 1
            src.append(i)
            dst.append(self.position[tuple(up)])
            fac.append(np.sqrt(j[axis] + 1.0))
        return np.array(src), np.array(dst), np.array(fac)

    def raise_axis(self, vec: np.ndarray, axis: int) -> np.ndarray:
        src, dst, fac = self.ladder_maps(axis)
        out = np.zeros_like(vec)
        out[dst] = fac * vec[src]
        return out

    def lower_axis(self, vec: np.ndarray, axis: int) -> np.ndarray:
        src, dst, fac = self.ladder_maps(axis)
        out = np.zeros_like(vec)
        out[src] = fac * vec[dst]
        return out


@lru_cache(maxsize=None)
def graded_basis(d: int, max_degree: int) -> GradedBasis:
    return GradedBasis(d, max_degree)


def iter_exact_degree(d: int, k: int):
    """Iterate multi-indices with |j| = k in lexicographic order."""
    return compositions(k, d)


def axis_expansion(m) -> list[int]:
    """Flatten a multi-index m into a list of axes, axis i repeated m_i times."""
    return list(
        itertools.chain.from_iterable([i] * mi for i, mi in enumerate(m))
    )
