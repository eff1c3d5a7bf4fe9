"""Linear algebra over F2 with vectors packed into Python ints."""
from __future__ import annotations

from typing import Iterable


def popcount(x: int) -> int:
    return bin(x).count("1")


def echelon_basis(vectors: Iterable[int]) -> list[int]:
    """Reduced echelon basis, pivot = highest set bit, sorted by descending pivot.

    Every pivot bit is set in exactly one basis vector.
    """
    basis: dict[int, int] = {}
    for v in vectors:
        v = int(v)
        for pivot in sorted(basis, reverse=True):
            if (v >> pivot) & 1:
                v ^= basis[pivot]
        if v:
            p = v.bit_length() - 1
            for q in list(basis):
                if (basis[q] >> p) & 1:
                    basis[q] ^= v
            basis[p] = v
    return [basis[p] for p in sorted(basis, reverse=True)]


def pivot(v: int) -> int:
    return v.bit_length() - 1


def reduce(v: int, basis: list[int]) -> int:
    """Remainder of ``v`` modulo the span of an echelon basis."""
    for b in basis:
        if (v >> pivot(b)) & 1:
            v ^= b
    return v


def coordinates(v: int, basis: list[int]) -> int | None:
    """Bit ``i`` of the result is the coefficient of ``basis[i]``; None if outside the span."""
    coords = 0
    for i, b in enumerate(basis):
        if (v >> pivot(b)) & 1:
            v ^= b
            coords |= 1 << i
    return coords if v == 0 else None


def span_element(coords: int, basis: list[int], offset: int = 0) -> int:
    x = offset
    i = 0
    while coords:
        if coords & 1:
            x ^= basis[i]
        coords >>= 1
        i += 1
    return x


def rank(vectors: Iterable[int]) -> int:
    return len(echelon_basis(vectors))
