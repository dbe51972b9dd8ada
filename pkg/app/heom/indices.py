"""
Multi-indices (n, m) of the auxiliary matrices and their triangular truncation.
"""
from math import comb
from typing import Iterator, NamedTuple

import numpy as np

from app.core.errors import TruncationError


class MultiIndex(NamedTuple):
    n: tuple[int, ...]
    m: tuple[int, ...]

    @property
    def depth(self) -> int:
        return sum(self.n) + sum(self.m)

    @property
    def modes(self) -> int:
        return len(self.n)

    def shifted(self, mode: int, dn: int = 0, dm: int = 0) -> "MultiIndex":
        n = list(self.n)
        m = list(self.m)
        n[mode] += dn
        m[mode] += dm
        return MultiIndex(tuple(n), tuple(m))

    def swapped(self) -> "MultiIndex":
        return MultiIndex(self.m, self.n)

    @classmethod
    def zero(cls, modes: int) -> "MultiIndex":
        return cls((0,) * modes, (0,) * modes)


def aux_count(modes: int, k_max: int) -> int:
    """K = (2M + k_max)! / ((2M)! k_max!)."""
    if modes < 1 or k_max < 0:
        raise ValueError(f"need modes >= 1 and k_max >= 0, got ({modes}, {k_max})")
    count = comb(2 * modes + k_max, k_max)
    if count > np.iinfo(np.int64).max:
        raise TruncationError(f"auxiliary count for M={modes}, k_max={k_max} overflows a 64-bit integer")
    return count


def _compositions(total: int, parts: int) -> Iterator[tuple[int, ...]]:
    """Vectors of `parts` nonnegative integers summing to `total`, descending lexicographic."""
    if parts == 1:
        yield (total,)
        return
    for head in range(total, -1, -1):
        for tail in _compositions(total - head, parts - 1):
            yield (head,) + tail


def enumerate_indices(modes: int, k_max: int) -> tuple[list[MultiIndex], int]:
    """
    All (n, m) with sum(n + m) <= k_max in graded order: by depth, then by the
    concatenated vector (n_1..n_M, m_1..m_M) in descending lexicographic order.

    Returns:
        (indices, K) with K equal to the closed-form count
    """
    count = aux_count(modes, k_max)
    indices = [
        MultiIndex(vec[:modes], vec[modes:])
        for depth in range(k_max + 1)
        for vec in _compositions(depth, 2 * modes)
    ]
    if len(indices) != count:
        raise TruncationError(f"enumerated {len(indices)} indices but the closed form gives {count}")
    return indices, count
