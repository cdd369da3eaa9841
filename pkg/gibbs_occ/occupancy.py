"""Exact finite-n occupancy laws of the Gibbs-Poisson allocation model.

k balls are dropped into n boxes; box m receives K(m) balls, and the joint law is

    P(K = (k_1, ..., k_n)) = multinomial(k; k_1..k_n) * prod_m sigma_{k_m}(theta) / sigma_k(n theta).

All probabilities are evaluated in log space unless ``exact=True``.
"""

import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Dict, Iterable, List, Sequence, Tuple, Union

import numpy as np

from gibbs_occ.bellpoly import (
    bell_sigma_alternating,
    check_positive_theta,
    require_exact,
    sigma_bell_triangle,
    sigma_table,
)
from gibbs_occ.combinatorics import (
    compositions,
    count_compositions,
    counts_to_aff,
    factorial,
    falling,
    log_abs_rational,
    multinomial,
)
from gibbs_occ.config import get_settings
from gibbs_occ.errors import ContractError, DomainError, InstanceTooLargeError
from gibbs_occ.logreal import NEG_INF, log_diff, log_sum
from gibbs_occ.weights import WeightSequence

logger = logging.getLogger(__name__)

Number = Union[int, Fraction, float]
Probability = Union[float, Fraction]


@dataclass(frozen=True)
class OccupancySample:
    """A realized occupancy vector with its derived statistics."""

    n: int
    k: int
    counts: Tuple[int, ...]
    p: int
    aff: Tuple[int, ...]

    def __post_init__(self):
        if len(self.counts) != self.n:
            raise ContractError("counts must have one entry per box", n=self.n)
        if any(c < 0 for c in self.counts) or sum(self.counts) != self.k:
            raise ContractError("counts must be non-negative and sum to k", k=self.k)
        if sum(self.aff) != self.p or sum((i + 1) * a for i, a in enumerate(self.aff)) != self.k:
            raise ContractError("frequency-of-frequencies vector inconsistent with counts")
        if self.k >= 1 and not 1 <= self.p <= min(self.n, self.k):
            raise ContractError("distinct count outside [1, min(n, k)]")

    @classmethod
    def from_counts(cls, counts: Sequence[int]) -> "OccupancySample":
        counts = tuple(int(c) for c in counts)
        k = sum(counts)
        return cls(
            n=len(counts),
            k=k,
            counts=counts,
            p=sum(1 for c in counts if c > 0),
            aff=counts_to_aff(counts, k),
        )


@dataclass(frozen=True)
class Pmf:
    """A probability mass function over an integer support."""

    support: Tuple[int, ...]
    probabilities: Tuple[Probability, ...]
    exact: bool = False

    def __getitem__(self, value: int) -> Probability:
        try:
            return self.probabilities[self.support.index(value)]
        except ValueError:
            return Fraction(0) if self.exact else 0.0

    def as_array(self) -> np.ndarray:
        return np.array([float(p) for p in self.probabilities])

    def total(self) -> Probability:
        if self.exact:
            return sum(self.probabilities, Fraction(0))
        return math.fsum(self.probabilities)

    def mean(self) -> Probability:
        if self.exact:
            return sum((s * p for s, p in zip(self.support, self.probabilities)), Fraction(0))
        return math.fsum(s * p for s, p in zip(self.support, self.probabilities))

    def variance(self) -> Probability:
        mean = self.mean()
        if self.exact:
            return sum((s * s * p for s, p in zip(self.support, self.probabilities)), Fraction(0)) - mean ** 2
        return math.fsum(s * s * p for s, p in zip(self.support, self.probabilities)) - mean ** 2

    def total_variation(self, other: "Pmf") -> float:
        values = set(self.support) | set(other.support)
        return 0.5 * sum(abs(float(self[v]) - float(other[v])) for v in values)

    def rows(self) -> List[Tuple[int, Probability]]:
        return list(zip(self.support, self.probabilities))


def point_mass(value: int, exact: bool) -> Pmf:
    return Pmf((value,), (Fraction(1) if exact else 1.0,), exact)


class LogArith:
    """Log-space evaluation of products and ratios of sigma values at multiples of theta."""

    exact = False
    zero = NEG_INF
    one = 0.0

    def __init__(self, w: WeightSequence, theta: Number, K: int):
        check_positive_theta(theta)
        self.w, self.theta, self.K = w, theta, K

    def sigma(self, multiple: Number, j: int) -> float:
        if multiple == 0:
            return 0.0 if j == 0 else NEG_INF
        return sigma_table(self.w, self.theta * multiple, self.K).log(j)

    def sigma_row(self, multiple: Number) -> np.ndarray:
        if multiple == 0:
            row = np.full(self.K + 1, NEG_INF)
            row[0] = 0.0
            return row
        return sigma_table(self.w, self.theta * multiple, self.K).log_values

    def const(self, value: Number) -> float:
        if value == 0:
            return NEG_INF
        if isinstance(value, (int, Fraction)):
            return log_abs_rational(value)
        return math.log(value)

    @staticmethod
    def mul(*xs: float) -> float:
        if any(x == NEG_INF for x in xs):
            return NEG_INF
        return math.fsum(xs)

    @staticmethod
    def div(a: float, b: float) -> float:
        if b == NEG_INF:
            raise ZeroDivisionError("division by a zero probability mass")
        return NEG_INF if a == NEG_INF else a - b

    @staticmethod
    def power(x: float, e: int) -> float:
        if e == 0:
            return 0.0
        return NEG_INF if x == NEG_INF else x * e

    @staticmethod
    def add(xs: Iterable[float]) -> float:
        return log_sum(list(xs))

    @staticmethod
    def finish(x: float) -> float:
        return math.exp(x)


class ExactArith:
    """Rational evaluation mirroring LogArith."""

    exact = True
    zero = Fraction(0)
    one = Fraction(1)

    def __init__(self, w: WeightSequence, theta: Number, K: int):
        check_positive_theta(theta)
        require_exact(w, K, theta)
        self.w, self.theta, self.K = w, Fraction(theta), K

    def sigma(self, multiple: Number, j: int) -> Fraction:
        if multiple == 0:
            return Fraction(1 if j == 0 else 0)
        return sigma_table(self.w, self.theta * multiple, self.K, exact=True).exact_value(j)

    def sigma_row(self, multiple: Number) -> Tuple[Fraction, ...]:
        if multiple == 0:
            return (Fraction(1),) + (Fraction(0),) * self.K
        return sigma_table(self.w, self.theta * multiple, self.K, exact=True).exact

    @staticmethod
    def const(value: Number) -> Fraction:
        return Fraction(value)

    @staticmethod
    def mul(*xs: Fraction) -> Fraction:
        return math.prod(xs, start=Fraction(1))

    @staticmethod
    def div(a: Fraction, b: Fraction) -> Fraction:
        return a / b

    @staticmethod
    def power(x: Fraction, e: int) -> Fraction:
        return x ** e

    @staticmethod
    def add(xs: Iterable[Fraction]) -> Fraction:
        return sum(xs, Fraction(0))

    @staticmethod
    def finish(x: Fraction) -> Fraction:
        return x


def _log_int(value: int) -> float:
    # math.log handles arbitrarily large ints
    return math.log(value)


def make_arith(w: WeightSequence, theta: Number, K: int, exact: bool):
    return ExactArith(w, theta, K) if exact else LogArith(w, theta, K)


def _check_nk(n: int, k: int) -> None:
    if n < 1:
        raise DomainError("n must be at least 1", n=n)
    if k < 0:
        raise DomainError("k must be non-negative", k=k)


def _pad(vector: Sequence[int], length: int, name: str) -> Tuple[int, ...]:
    vector = tuple(int(v) for v in vector)
    if any(v < 0 for v in vector):
        raise ContractError(f"{name} entries must be non-negative")
    if len(vector) > length:
        if any(vector[length:]):
            raise ContractError(f"{name} is longer than {length}")
        vector = vector[:length]
    return vector + (0,) * (length - len(vector))


def joint_pmf(w: WeightSequence, theta: Number, n: int, k: int, counts: Sequence[int],
              exact: bool = False) -> Probability:
    """P(K_{n,k} = counts)."""
    _check_nk(n, k)
    counts = tuple(int(c) for c in counts)
    if len(counts) != n or any(c < 0 for c in counts):
        raise ContractError("counts must be n non-negative integers", n=n)
    if sum(counts) != k:
        raise ContractError("counts must sum to k", k=k, total=sum(counts))
    ar = make_arith(w, theta, k, exact)
    terms = [ar.const(multinomial(counts))] + [ar.sigma(1, c) for c in counts]
    return ar.finish(ar.div(ar.mul(*terms), ar.sigma(n, k)))


def partialsum_pmf(w: WeightSequence, theta: Number, n: int, m: int, k: int, exact: bool = False) -> Pmf:
    """Law of K(1) + ... + K(m): C(k,l) sigma_l(m theta) sigma_{k-l}((n-m) theta) / sigma_k(n theta)."""
    _check_nk(n, k)
    if not 1 <= m < n:
        raise DomainError("partial sums need 1 <= m < n", m=m, n=n)
    ar = make_arith(w, theta, k, exact)
    denom = ar.sigma(n, k)
    probs = tuple(
        ar.finish(ar.div(ar.mul(ar.const(math.comb(k, l)), ar.sigma(m, l), ar.sigma(n - m, k - l)), denom))
        for l in range(k + 1)
    )
    return Pmf(tuple(range(k + 1)), probs, exact)


def component_pmf(w: WeightSequence, theta: Number, n: int, k: int, exact: bool = False) -> Pmf:
    """Law of a typical box occupancy K(1)."""
    _check_nk(n, k)
    if n == 1:
        return point_mass(k, exact)
    return partialsum_pmf(w, theta, n, 1, k, exact)


def pnk_pmf(w: WeightSequence, theta: Number, n: int, k: int, exact: bool = False) -> Pmf:
    """Law of the number of distinct species P_{n,k}: {n}_p B_{k,p}(sigma(theta)) / sigma_k(n theta)."""
    _check_nk(n, k)
    if k == 0:
        return point_mass(0, exact)
    ar = make_arith(w, theta, k, exact)
    bt = sigma_bell_triangle(w, theta, k, exact)
    denom = ar.sigma(n, k)
    support = tuple(range(1, min(n, k) + 1))
    if exact:
        probs = tuple(falling(n, p) * bt.exact_value(k, p) / denom for p in support)
    else:
        probs = tuple(math.exp(_log_int(falling(n, p)) + bt.log(k, p) - denom) for p in support)
    return Pmf(support, probs, exact)


def pnk_pmf_alternating(w: WeightSequence, theta: Number, n: int, k: int) -> Pmf:
    """Exact P_{n,k} law through the alternating sum over sigma_k(q theta)."""
    _check_nk(n, k)
    if k == 0:
        return point_mass(0, True)
    tri = bell_sigma_alternating(w, theta, k)
    denom = ExactArith(w, theta, k).sigma(n, k)
    support = tuple(range(1, min(n, k) + 1))
    return Pmf(support, tuple(falling(n, p) * tri[k][p] / denom for p in support), True)


def pnk_pgf(w: WeightSequence, theta: Number, n: int, k: int, u: Number, exact: bool = False) -> Probability:
    """E(u^{P_{n,k}}) = sum_{p<n} C(n,p) u^(n-p) (1-u)^p sigma_k((n-p) theta) / sigma_k(n theta)."""
    _check_nk(n, k)
    if not 0 <= u <= 1:
        raise DomainError("u must lie in [0, 1]", u=u)
    ar = make_arith(w, theta, k, exact)
    denom = ar.sigma(n, k)
    u_ = ar.const(u)
    v_ = ar.const(1 - u)
    terms = [
        ar.mul(ar.const(math.comb(n, p)), ar.power(u_, n - p), ar.power(v_, p), ar.sigma(n - p, k))
        for p in range(n)
    ]
    return ar.finish(ar.div(ar.add(terms), denom))


def pnk_mean_var(w: WeightSequence, theta: Number, n: int, k: int,
                 exact: bool = False) -> Tuple[Probability, Probability]:
    """Mean n(1 - s1) and variance n(s1 + (n-1) s2 - n s1^2), s_j = sigma_k((n-j) theta)/sigma_k(n theta)."""
    _check_nk(n, k)
    if k == 0:
        return (Fraction(0), Fraction(0)) if exact else (0.0, 0.0)
    if n == 1:
        return (Fraction(1), Fraction(0)) if exact else (1.0, 0.0)
    ar = make_arith(w, theta, k, exact)
    denom = ar.sigma(n, k)
    if exact:
        s1 = ar.sigma(n - 1, k) / denom
        s2 = ar.sigma(n - 2, k) / denom
        return n * (1 - s1), n * (s1 + (n - 1) * s2 - n * s1 * s1)
    log_s1 = ar.div(ar.sigma(n - 1, k), denom)
    s1 = math.exp(log_s1)
    s2 = math.exp(ar.div(ar.sigma(n - 2, k), denom))
    mean = n * math.exp(log_diff(0.0, min(log_s1, 0.0)))
    variance = n * (s1 + (n - 1) * s2 - n * s1 * s1)
    return mean, max(variance, 0.0)


def _check_aff(aff: Sequence[int], k: int) -> Tuple[int, ...]:
    aff = _pad(aff, k, "aff")
    if sum((i + 1) * a for i, a in enumerate(aff)) != k:
        raise ContractError("frequency-of-frequencies must satisfy sum i a_i = k", k=k)
    return aff


def aff_pmf(w: WeightSequence, theta: Number, n: int, k: int, aff: Sequence[int], p: int,
            exact: bool = False) -> Probability:
    """P(A_{n,k} = a, P_{n,k} = p) = {n}_p k!/sigma_k(n theta) prod (sigma_i/i!)^{a_i}/a_i!."""
    _check_nk(n, k)
    aff = _check_aff(aff, k)
    if sum(aff) != p:
        raise ContractError("frequency-of-frequencies must satisfy sum a_i = p", p=p)
    ar = make_arith(w, theta, k, exact)
    if p > n:
        return ar.finish(ar.zero)
    terms = [ar.const(falling(n, p)), ar.const(factorial(k))]
    for i, a in enumerate(aff, start=1):
        if a:
            terms.append(ar.div(ar.power(ar.div(ar.sigma(1, i), ar.const(factorial(i))), a),
                                ar.const(factorial(a))))
    return ar.finish(ar.div(ar.mul(*terms), ar.sigma(n, k)))


def aff_factorial_moments(w: WeightSequence, theta: Number, n: int, k: int, r: Sequence[int],
                          exact: bool = False) -> Probability:
    """E prod_i {A_{n,k}(i)}_{r_i} = {n}_r {k}_kappa sigma_{k-kappa}((n-r) theta)/sigma_k(n theta) prod (sigma_i/i!)^{r_i}."""
    _check_nk(n, k)
    r = _pad(r, max(k, len(r)), "r")
    total = sum(r)
    kappa = sum(i * ri for i, ri in enumerate(r, start=1))
    if total > n:
        raise ContractError("sum of r exceeds n", r=total, n=n)
    if kappa > k:
        raise ContractError("sum of i r_i exceeds k", kappa=kappa, k=k)
    ar = make_arith(w, theta, k, exact)
    terms = [ar.const(falling(n, total)), ar.const(falling(k, kappa)), ar.sigma(n - total, k - kappa)]
    for i, ri in enumerate(r, start=1):
        if ri:
            terms.append(ar.power(ar.div(ar.sigma(1, i), ar.const(factorial(i))), ri))
    return ar.finish(ar.div(ar.mul(*terms), ar.sigma(n, k)))


def k_factorial_moments(w: WeightSequence, theta: Number, n: int, k: int, l: Sequence[int],
                        exact: bool = False) -> Probability:
    """E prod_m {K(m)}_{l_m} as a sum over compositions shifted by l."""
    _check_nk(n, k)
    l = _pad(l, n, "l")
    excess = k - sum(l)
    if excess < 0:
        return Fraction(0) if exact else 0.0
    ar = make_arith(w, theta, k, exact)
    occupied = [lm for lm in l if lm > 0]
    base_row = ar.sigma_row(n - len(occupied))
    series = [ar.div(base_row[j], ar.const(factorial(j))) for j in range(excess + 1)]
    for lm in occupied:
        row = ar.sigma_row(1)
        factor = [ar.div(row[lm + j], ar.const(factorial(j))) for j in range(excess + 1)]
        series = [
            ar.add(ar.mul(series[i], factor[t - i]) for i in range(t + 1))
            for t in range(excess + 1)
        ]
    value = ar.div(ar.mul(ar.const(factorial(k)), series[excess]), ar.sigma(n, k))
    return ar.finish(value)


def succession_step(theta: Number, n: int, k: int, law: Pmf) -> Pmf:
    """Ewens law of succession: law of P_{n,k+1} from the law of P_{n,k} (log-series weights)."""
    exact = law.exact
    if exact:
        theta = Fraction(theta)
    support = tuple(range(1, min(n, k + 1) + 1))
    denom = n * theta + k
    probs = []
    for p in support:
        new, stay = law[p - 1], law[p]
        probs.append((n - p + 1) * theta / denom * new + (p * theta + k) / denom * stay)
    return Pmf(support, tuple(probs), exact)


@dataclass
class OracleLaw:
    """Exact joint law over all compositions; the ground truth for small instances."""

    weights: WeightSequence
    theta: Number
    n: int
    k: int
    compositions: List[Tuple[int, ...]] = field(default_factory=list)
    probabilities: List[Fraction] = field(default_factory=list)

    def total(self) -> Fraction:
        return sum(self.probabilities, Fraction(0))

    def expectation(self, fn: Callable[[Tuple[int, ...]], Number]) -> Fraction:
        return sum((Fraction(fn(c)) * q for c, q in zip(self.compositions, self.probabilities)), Fraction(0))

    def _law_of(self, stat: Callable[[Tuple[int, ...]], int]) -> Dict[int, Fraction]:
        out: Dict[int, Fraction] = {}
        for c, q in zip(self.compositions, self.probabilities):
            key = stat(c)
            out[key] = out.get(key, Fraction(0)) + q
        return out

    def partialsum_pmf(self, m: int) -> Pmf:
        law = self._law_of(lambda c: sum(c[:m]))
        support = tuple(range(self.k + 1))
        return Pmf(support, tuple(law.get(v, Fraction(0)) for v in support), True)

    def component_pmf(self) -> Pmf:
        return self.partialsum_pmf(1)

    def pnk_pmf(self) -> Pmf:
        law = self._law_of(lambda c: sum(1 for x in c if x > 0))
        support = tuple(sorted(law))
        return Pmf(support, tuple(law[v] for v in support), True)

    def aff_law(self) -> Dict[Tuple[int, ...], Fraction]:
        out: Dict[Tuple[int, ...], Fraction] = {}
        for c, q in zip(self.compositions, self.probabilities):
            key = counts_to_aff(c, self.k)
            out[key] = out.get(key, Fraction(0)) + q
        return out

    def k_moment(self, l: Sequence[int]) -> Fraction:
        l = _pad(l, self.n, "l")
        return self.expectation(lambda c: math.prod(falling(x, lm) for x, lm in zip(c, l)))

    def aff_moment(self, r: Sequence[int]) -> Fraction:
        def stat(c):
            aff = counts_to_aff(c, self.k)
            return math.prod(falling(aff[i - 1] if i <= self.k else 0, ri) for i, ri in enumerate(r, start=1))

        return self.expectation(stat)


def enumerate_oracle(w: WeightSequence, theta: Number, n: int, k: int) -> OracleLaw:
    """Exact probability of every composition of k into n boxes."""
    _check_nk(n, k)
    size = count_compositions(k, n)
    cap = get_settings().oracle_max_compositions
    if size > cap:
        raise InstanceTooLargeError(f"{size} compositions exceed the oracle cap {cap}", n=n, k=k)
    ar = ExactArith(w, theta, k)
    row = ar.sigma_row(1)
    denom = ar.sigma(n, k)
    law = OracleLaw(w, theta, n, k)
    for c in compositions(k, n):
        q = Fraction(multinomial(c))
        for x in c:
            q *= row[x]
        law.compositions.append(c)
        law.probabilities.append(q / denom)
    logger.debug(f"oracle {w} theta={theta} n={n} k={k}: {size} compositions")
    return law
