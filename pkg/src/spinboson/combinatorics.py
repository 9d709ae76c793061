"""Pairings (Wick contractions) over time-ordered point indices.

Points are identified by their rank in ascending time order, so every
definition here depends only on index order. A pairing on ``m`` points is a
perfect matching of ``{0, ..., m-1}`` whose pairs are stored as ``(a, b)``
with ``a < b``.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Iterator

import numpy as np

__all__ = [
    "DEFAULT_MAX_ORDER",
    "Pairing",
    "PairingFamily",
    "UnsupportedOrderError",
    "count_connected",
    "connected_index_table",
    "double_factorial",
    "enumerate_connected",
    "enumerate_pairings",
    "is_inchworm_proper",
    "linked_components",
    "pairing_index_table",
    "pairs_linked",
    "sample_connected",
]

DEFAULT_MAX_ORDER = 9
ENUMERATION_LIMIT = 16

Pair = tuple[int, int]


class UnsupportedOrderError(ValueError):
    """Raised when a diagram order exceeds the configured enumeration cap."""


@dataclass(frozen=True)
class Pairing:
    pairs: tuple[Pair, ...]

    def __post_init__(self):
        seen = set()
        for a, b in self.pairs:
            if not a < b:
                raise ValueError(f"pair {(a, b)} is not internally ordered")
            if a in seen or b in seen:
                raise ValueError(f"index reused in {self.pairs}")
            seen.update((a, b))

    def is_perfect(self) -> bool:
        """True when the indices are exactly ``0 .. n_points - 1``."""
        return sorted(i for p in self.pairs for i in p) == list(range(self.n_points))

    @property
    def n_points(self) -> int:
        return 2 * len(self.pairs)

    def __len__(self):
        return len(self.pairs)

    def __iter__(self) -> Iterator[Pair]:
        return iter(self.pairs)


@dataclass(frozen=True)
class PairingFamily:
    m: int
    members: tuple[Pairing, ...]

    def __len__(self):
        return len(self.members)

    def __iter__(self) -> Iterator[Pairing]:
        return iter(self.members)

    def __getitem__(self, i) -> Pairing:
        return self.members[i]


def double_factorial(n: int) -> int:
    """``n!!`` with the convention ``(-1)!! = 0!! = 1``."""
    out = 1
    while n > 1:
        out *= n
        n -= 2
    return out


def _check_even(m: int) -> None:
    if m < 0 or m % 2:
        raise ValueError(f"number of points must be even and nonnegative, got {m}")


def _matchings(points: tuple[int, ...]) -> Iterator[tuple[Pair, ...]]:
    # The smallest unmatched index is always paired first, which fixes the
    # lexicographic enumeration order.
    if not points:
        yield ()
        return
    first, rest = points[0], points[1:]
    for i, partner in enumerate(rest):
        remaining = rest[:i] + rest[i + 1:]
        for tail in _matchings(remaining):
            yield ((first, partner),) + tail


@lru_cache(maxsize=None)
def enumerate_pairings(m: int) -> PairingFamily:
    """All ``(m-1)!!`` perfect matchings of ``m`` time-ordered points."""
    _check_even(m)
    if m > ENUMERATION_LIMIT:
        raise UnsupportedOrderError(f"refusing to enumerate {double_factorial(m - 1)} pairings (m={m})")
    members = tuple(Pairing(p) for p in _matchings(tuple(range(m))))
    return PairingFamily(m, members)


def pairs_linked(p1: Pair, p2: Pair) -> bool:
    """True when the two arcs interleave, i.e. exactly one endpoint of each
    lies strictly inside the other."""
    (a, b), (c, d) = p1, p2
    return a < c < b < d or c < a < d < b


def linked_components(q: Pairing | tuple[Pair, ...]) -> list[Pairing]:
    """Linked component decomposition of ``q``.

    Blocks are the connected components of the graph whose vertices are the
    pairs of ``q`` and whose edges join linked pairs. Blocks are returned in
    order of their smallest index and keep the original point indices.
    """
    pairs = list(q)
    n = len(pairs)
    parent = list(range(n))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for i in range(n):
        for j in range(i + 1, n):
            if pairs_linked(pairs[i], pairs[j]):
                parent[find(i)] = find(j)

    blocks: dict[int, list[Pair]] = {}
    for i, p in enumerate(pairs):
        blocks.setdefault(find(i), []).append(p)
    ordered = sorted(blocks.values(), key=lambda blk: min(a for a, _ in blk))
    return [Pairing(tuple(sorted(blk))) for blk in ordered]


def is_inchworm_proper(q: Pairing | tuple[Pair, ...], split: int) -> bool:
    """Every linked component of ``q`` reaches an index ``>= split``."""
    return all(max(b for _, b in block) >= split for block in linked_components(q))


@lru_cache(maxsize=None)
def enumerate_connected(total_points: int) -> PairingFamily:
    """Pairings of ``total_points`` points forming a single linked component."""
    _check_even(total_points)
    if total_points < 2:
        raise ValueError("a connected pairing needs at least two points")
    family = enumerate_pairings(total_points)
    members = tuple(q for q in family if len(linked_components(q)) == 1)
    return PairingFamily(total_points, members)


@lru_cache(maxsize=None)
def count_connected(m: int) -> int:
    """Number of connected pairings on ``m + 1`` points (``m`` odd)."""
    if m < 1 or m % 2 == 0:
        raise ValueError(f"count_connected expects a positive odd order, got {m}")
    if m == 1:
        return 1
    total = sum(count_connected(j) * count_connected(m - 1 - j) for j in range(1, m - 1, 2))
    return (m - 1) // 2 * total


def _check_order(m: int, cap: int) -> None:
    if m < 1 or m % 2 == 0:
        raise ValueError(f"connected-diagram order must be a positive odd integer, got {m}")
    if m > cap:
        raise UnsupportedOrderError(f"order {m} exceeds the enumeration cap {cap}")


def sample_connected(rng: np.random.Generator, m: int, cap: int = DEFAULT_MAX_ORDER) -> Pairing:
    """Uniformly random connected pairing on ``m + 1`` points."""
    _check_order(m, cap)
    family = enumerate_connected(m + 1)
    return family[int(rng.integers(len(family)))]


@lru_cache(maxsize=None)
def connected_index_table(m: int, cap: int = DEFAULT_MAX_ORDER) -> np.ndarray:
    """Connected family on ``m + 1`` points as an int array of shape
    ``(N_m, (m + 1) // 2, 2)``, for use inside compiled kernels."""
    _check_order(m, cap)
    family = enumerate_connected(m + 1)
    table = np.array([q.pairs for q in family], dtype=np.int64)
    table.setflags(write=False)
    return table


@lru_cache(maxsize=None)
def pairing_index_table(m: int) -> np.ndarray:
    """Full family on ``m`` points as an int array of shape ``((m-1)!!, m // 2, 2)``."""
    family = enumerate_pairings(m)
    table = np.array([q.pairs for q in family], dtype=np.int64).reshape(len(family), m // 2, 2)
    table.setflags(write=False)
    return table
