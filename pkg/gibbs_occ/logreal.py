"""Non-negative reals stored as logarithms.

Every sigma and Bell quantity is non-negative, so no sign is tracked. Exact zero
is ``log == -inf``; it absorbs multiplication and is the identity for addition.
"""

import math
from dataclasses import dataclass
from functools import total_ordering
from typing import Iterable, Union

import numpy as np
from scipy.special import logsumexp

from gibbs_occ.errors import DomainError

NEG_INF = float("-inf")


def log_sum(values: Union[Iterable[float], np.ndarray]) -> float:
    """log(sum(exp(values))) accumulated in descending-magnitude order."""
    arr = np.asarray(values, dtype=float).ravel()
    arr = arr[arr > NEG_INF]
    if arr.size == 0:
        return NEG_INF
    return float(logsumexp(np.sort(arr)[::-1]))


def log_diff(a: float, b: float) -> float:
    """log(exp(a) - exp(b)) for a >= b."""
    if b == NEG_INF:
        return a
    if b > a:
        raise DomainError("log_diff requires a >= b", a=a, b=b)
    if a == b:
        return NEG_INF
    return a + math.log(-math.expm1(b - a))


@total_ordering
@dataclass(frozen=True)
class LogReal:
    """A non-negative real held as its logarithm."""

    log: float

    @classmethod
    def zero(cls) -> "LogReal":
        return cls(NEG_INF)

    @classmethod
    def one(cls) -> "LogReal":
        return cls(0.0)

    @classmethod
    def from_value(cls, value: float) -> "LogReal":
        if value < 0:
            raise DomainError("LogReal holds non-negative values only", value=value)
        return cls(math.log(value) if value > 0 else NEG_INF)

    @property
    def is_zero(self) -> bool:
        return self.log == NEG_INF

    @property
    def value(self) -> float:
        return math.exp(self.log)

    def __float__(self) -> float:
        return self.value

    def __add__(self, other: "LogReal") -> "LogReal":
        if self.is_zero:
            return other
        if other.is_zero:
            return self
        return LogReal(float(np.logaddexp(self.log, other.log)))

    def __mul__(self, other: "LogReal") -> "LogReal":
        if self.is_zero or other.is_zero:
            return LogReal.zero()
        return LogReal(self.log + other.log)

    def __truediv__(self, other: "LogReal") -> "LogReal":
        if other.is_zero:
            raise ZeroDivisionError("division by exact zero")
        if self.is_zero:
            return self
        return LogReal(self.log - other.log)

    def __pow__(self, exponent: int) -> "LogReal":
        if exponent == 0:
            return LogReal.one()
        if self.is_zero:
            return self
        return LogReal(self.log * exponent)

    def __lt__(self, other: "LogReal") -> bool:
        return self.log < other.log

    def __repr__(self) -> str:
        return f"LogReal(log={self.log!r})"
