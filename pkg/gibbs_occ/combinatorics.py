"""Iterative enumerators and exact helpers for compositions and partitions.

Orderings are part of the contract so fixtures stay stable:

* ``compositions(k, n)`` walks non-negative compositions in ascending
  lexicographic order, starting at ``(0, ..., 0, k)`` and ending at ``(k, 0, ..., 0)``.
* ``partitions(k)`` yields partitions with parts in non-increasing order, starting
  at ``[k]`` and ending at ``[1, ..., 1]`` (ZS1 order).
"""

import math
from fractions import Fraction
from functools import lru_cache
from typing import Iterator, List, Sequence, Tuple, Union

Rational = Union[int, Fraction]


def count_compositions(k: int, n: int) -> int:
    """Number of non-negative compositions of k into n parts."""
    if n == 0:
        return 1 if k == 0 else 0
    return math.comb(k + n - 1, n - 1)


def compositions(k: int, n: int) -> Iterator[Tuple[int, ...]]:
    """Non-negative compositions of k into n parts, ascending lexicographic order."""
    if n < 1:
        if k == 0:
            yield ()
        return
    a = [0] * n
    a[-1] = k
    while True:
        yield tuple(a)
        j = n - 1
        while j >= 0 and a[j] == 0:
            j -= 1
        if j <= 0:
            return
        a[j - 1] += 1
        rest = a[j] - 1
        a[j] = 0
        a[-1] = rest


def positive_compositions(k: int, p: int) -> Iterator[Tuple[int, ...]]:
    """Compositions of k into exactly p positive parts."""
    if p < 1 or p > k:
        if p == 0 and k == 0:
            yield ()
        return
    for c in compositions(k - p, p):
        yield tuple(part + 1 for part in c)


def partitions(k: int) -> Iterator[List[int]]:
    """Integer partitions of k in ZS1 order, parts non-increasing."""
    if k == 0:
        yield []
        return
    x = [1] * k
    x[0] = k
    m, h = 1, 1
    yield x[:1]
    while x[0] != 1:
        if x[h - 1] == 2:
            m += 1
            x[h - 1] = 1
            h -= 1
        else:
            r = x[h - 1] - 1
            t = m - h + 1
            x[h - 1] = r
            while t >= r:
                h += 1
                x[h - 1] = r
                t -= r
            if t == 0:
                m = h
            else:
                m = h + 1
                if t > 1:
                    h += 1
                    x[h - 1] = t
        yield x[:m]


def parts_to_aff(parts: Sequence[int], k: int) -> Tuple[int, ...]:
    """Frequency-of-frequencies vector (a_1, ..., a_k) of a multiset of positive parts."""
    aff = [0] * k
    for part in parts:
        if part > 0:
            aff[part - 1] += 1
    return tuple(aff)


def counts_to_aff(counts: Sequence[int], k: int) -> Tuple[int, ...]:
    return parts_to_aff([c for c in counts if c > 0], k)


def aff_vectors(k: int, max_parts: int = None) -> Iterator[Tuple[int, ...]]:
    """Frequency-of-frequencies vectors of the partitions of k, optionally capped in part count."""
    for parts in partitions(k):
        if max_parts is not None and len(parts) > max_parts:
            continue
        yield parts_to_aff(parts, k)


@lru_cache(maxsize=None)
def factorial(n: int) -> int:
    return math.factorial(n)


def falling(x: Rational, r: int) -> Rational:
    """Falling factorial {x}_r = x(x-1)...(x-r+1)."""
    out: Rational = 1
    for j in range(r):
        out *= x - j
    return out


def rising(x: Rational, r: int) -> Rational:
    """Pochhammer (x)_r = x(x+1)...(x+r-1)."""
    out: Rational = 1
    for j in range(r):
        out *= x + j
    return out


def gen_binomial(x: Rational, q: int) -> Rational:
    """C(x, q) for rational x."""
    return Fraction(falling(x, q), factorial(q))


def multinomial(counts: Sequence[int]) -> int:
    out = factorial(sum(counts))
    for c in counts:
        out //= factorial(c)
    return out


@lru_cache(maxsize=64)
def stirling2_rows(K: int) -> Tuple[Tuple[int, ...], ...]:
    """Second-kind Stirling numbers S[l][p], 0 <= p <= l <= K."""
    rows = [[1]]
    for l in range(K):
        prev = rows[-1]
        row = [0] * (l + 2)
        for p in range(1, l + 2):
            left = prev[p - 1] if p - 1 <= l else 0
            here = p * prev[p] if p <= l else 0
            row[p] = here + left
        rows.append(row)
    return tuple(tuple(r) for r in rows)


def format_number(value) -> str:
    """Rationals as "p/q", floats as their shortest round-trip decimal."""
    if isinstance(value, bool):
        raise TypeError("booleans are not numbers here")
    if isinstance(value, (int, Fraction)):
        return str(Fraction(value))
    return repr(float(value))


def log_abs_rational(value: Rational) -> float:
    """log|value| for rationals of any size."""
    value = Fraction(value)
    if value == 0:
        return float("-inf")
    return math.log(abs(value.numerator)) - math.log(value.denominator)
