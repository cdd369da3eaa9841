"""Partition polynomials sigma_k(theta), Bell coefficient triangles and Stirling numbers.

Two arithmetic modes are supported everywhere:

* log-space floats (default), stable for large orders since every quantity is
  non-negative;
* exact rationals (``exact=True``), available when the weights and theta are
  rational and the order does not exceed ``Settings.exact_max_order``.
"""

import json
import logging
import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.special import gammaln

from gibbs_occ.combinatorics import (
    factorial,
    falling,
    format_number,
    gen_binomial,
    log_abs_rational,
    multinomial,
    positive_compositions,
    rising,
    stirling2_rows,
)
from gibbs_occ.config import get_settings
from gibbs_occ.errors import ContractError, DomainError, InstanceTooLargeError
from gibbs_occ.logreal import NEG_INF, LogReal, log_sum
from gibbs_occ.weights import Family, WeightSequence, is_rational, log_phi_array

logger = logging.getLogger(__name__)

Number = Union[int, Fraction, float]
ExactTriangle = Tuple[Tuple[Fraction, ...], ...]

SIGMA_FROM_SIGMA1_MAX_K = 12


def log_binomial_row(k: int) -> np.ndarray:
    """log C(k, l) for l = 0..k."""
    l = np.arange(k + 1, dtype=float)
    return gammaln(k + 1.0) - gammaln(l + 1.0) - gammaln(k - l + 1.0)


def check_positive_theta(theta: Number) -> None:
    if not theta > 0:
        raise DomainError("theta must be positive", theta=theta)


def require_exact(w: WeightSequence, K: int, *thetas: Number) -> None:
    """Raise unless exact-rational mode is available for this instance."""
    if not w.exact_capable:
        raise DomainError(f"exact mode unavailable for {w.to_spec()}")
    for theta in thetas:
        if theta is not None and not is_rational(theta):
            raise DomainError("exact mode needs a rational parameter", value=theta)
    cap = get_settings().exact_max_order
    if K > cap:
        raise InstanceTooLargeError(f"exact mode is capped at K={cap}", K=K)


def _log_of(values: Sequence[Fraction]) -> np.ndarray:
    return np.array([log_abs_rational(v) for v in values], dtype=float)


@dataclass(frozen=True, eq=False)
class SigmaTable:
    """sigma_k(theta) for k = 0..K."""

    weights: WeightSequence
    theta: Number
    K: int
    log_values: np.ndarray
    exact: Optional[Tuple[Fraction, ...]] = None

    def log(self, k: int) -> float:
        return float(self.log_values[k])

    def value(self, k: int) -> float:
        return math.exp(self.log_values[k])

    def at(self, k: int) -> LogReal:
        return LogReal(float(self.log_values[k]))

    def exact_value(self, k: int) -> Fraction:
        if self.exact is None:
            raise DomainError("table was built in log mode")
        return self.exact[k]

    def to_json(self) -> str:
        doc = {
            "family": self.weights.to_spec(),
            "theta": format_number(self.theta),
            "K": self.K,
            "log_values": [None if v == NEG_INF else float(v) for v in self.log_values],
        }
        if self.exact is not None:
            doc["exact"] = [format_number(v) for v in self.exact]
        return json.dumps(doc)

    @classmethod
    def from_json(cls, text: str) -> "SigmaTable":
        from gibbs_occ.weights import parse_family, parse_number

        doc = json.loads(text)
        theta_text = doc["theta"]
        theta: Number = float(theta_text) if any(c in theta_text for c in "eE.") and "/" not in theta_text \
            else parse_number(theta_text)
        log_values = np.array([NEG_INF if v is None else v for v in doc["log_values"]], dtype=float)
        exact = tuple(parse_number(v) for v in doc["exact"]) if "exact" in doc else None
        table = cls(parse_family(doc["family"]), theta, int(doc["K"]), log_values, exact)
        table.validate()
        return table

    def validate(self) -> None:
        """Check the structural invariants of the table."""
        if len(self.log_values) != self.K + 1:
            raise ContractError("sigma table length does not match K")
        if self.log_values[0] != 0.0:
            raise ContractError("sigma_0 must be 1")
        if np.any(np.isnan(self.log_values)):
            raise ContractError("sigma table holds NaN")
        if self.exact is not None and (self.exact[0] != 1 or any(v < 0 for v in self.exact)):
            raise ContractError("exact sigma table violates sigma_0 = 1 or non-negativity")


@lru_cache(maxsize=4096)
def sigma_table(w: WeightSequence, theta: Number, K: int, exact: bool = False) -> SigmaTable:
    """sigma_0..sigma_K at theta through sigma_{k+1} = theta sum_l C(k,l) phi_{k-l+1} sigma_l."""
    check_positive_theta(theta)
    if K < 0:
        raise DomainError("K must be non-negative", K=K)
    w.check_order(K)
    if exact:
        require_exact(w, K, theta)
        phi = w.phi_exact_upto(K)
        th = Fraction(theta)
        values: List[Fraction] = [Fraction(1)]
        for k in range(K):
            acc = Fraction(0)
            for l in range(k + 1):
                coeff = phi[k - l + 1]
                if coeff:
                    acc += math.comb(k, l) * coeff * values[l]
            values.append(th * acc)
        log_values = _log_of(values)
        log_values.setflags(write=False)
        logger.debug(f"exact sigma table {w} theta={theta} K={K}")
        return SigmaTable(w, theta, K, log_values, tuple(values))

    log_phi = log_phi_array(w, K) if K > 0 else np.array([NEG_INF])
    log_theta = math.log(theta)
    log_values = np.full(K + 1, NEG_INF)
    log_values[0] = 0.0
    for k in range(K):
        l = np.arange(k + 1)
        terms = log_binomial_row(k) + log_phi[k - l + 1] + log_values[: k + 1]
        log_values[k + 1] = log_theta + log_sum(terms)
    log_values.setflags(write=False)
    logger.debug(f"log sigma table {w} theta={theta} K={K}")
    return SigmaTable(w, theta, K, log_values)


def log_sigma_at(w: WeightSequence, theta: Number, k: int) -> float:
    """log sigma_k(theta) with sigma_k(0) = [k == 0]."""
    if theta == 0:
        return 0.0 if k == 0 else NEG_INF
    return sigma_table(w, theta, k).log(k)


def exact_sigma_at(w: WeightSequence, theta: Number, k: int) -> Fraction:
    if theta == 0:
        return Fraction(1 if k == 0 else 0)
    return sigma_table(w, theta, k, exact=True).exact_value(k)


@dataclass(frozen=True)
class StirlingTable:
    """Second-kind Stirling numbers S(l, p) for 0 <= p <= l <= K."""

    K: int
    rows: Tuple[Tuple[int, ...], ...]

    def s(self, l: int, p: int) -> int:
        if p < 0 or p > l:
            return 0
        return self.rows[l][p]

    def log_matrix(self) -> np.ndarray:
        out = np.full((self.K + 1, self.K + 1), NEG_INF)
        for l, row in enumerate(self.rows):
            for p, v in enumerate(row):
                if v:
                    out[l, p] = math.log(v)
        return out


def stirling_table(K: int) -> StirlingTable:
    return StirlingTable(K, stirling2_rows(K))


@dataclass(frozen=True, eq=False)
class BellTriangle:
    """Bell coefficients B_{k,p}, 0 <= p <= k <= K, either of phi or of sigma(theta)."""

    kind: str
    weights: WeightSequence
    K: int
    log_entries: np.ndarray
    exact: Optional[ExactTriangle] = None
    theta: Optional[Number] = None

    def log(self, k: int, p: int) -> float:
        if p < 0 or p > k:
            return NEG_INF
        return float(self.log_entries[k, p])

    def value(self, k: int, p: int) -> float:
        return math.exp(self.log(k, p))

    def entry(self, k: int, p: int) -> LogReal:
        return LogReal(self.log(k, p))

    def exact_value(self, k: int, p: int) -> Fraction:
        if self.exact is None:
            raise DomainError("triangle was built in log mode")
        if p < 0 or p > k:
            return Fraction(0)
        return self.exact[k][p]

    def to_json(self) -> str:
        doc = {
            "kind": self.kind,
            "family": self.weights.to_spec(),
            "K": self.K,
            "log_entries": [
                [None if v == NEG_INF else float(v) for v in self.log_entries[k, : k + 1]]
                for k in range(self.K + 1)
            ],
        }
        if self.theta is not None:
            doc["theta"] = format_number(self.theta)
        if self.exact is not None:
            doc["exact"] = [[format_number(v) for v in row] for row in self.exact]
        return json.dumps(doc)


@lru_cache(maxsize=256)
def bell_triangle_phi(w: WeightSequence, K: int, exact: bool = False) -> BellTriangle:
    """B_{k,l}(phi) from l B_{k,l} = sum_{j=l-1}^{k-1} C(k,j) phi_{k-j} B_{j,l-1}."""
    if K < 1:
        raise DomainError("Bell triangle needs K >= 1", K=K)
    w.check_order(K)
    if exact:
        require_exact(w, K)
        phi = w.phi_exact_upto(K)
        B = [[Fraction(0)] * (K + 1) for _ in range(K + 1)]
        B[0][0] = Fraction(1)
        for l in range(1, K + 1):
            for k in range(l, K + 1):
                acc = Fraction(0)
                for j in range(l - 1, k):
                    if phi[k - j] and B[j][l - 1]:
                        acc += math.comb(k, j) * phi[k - j] * B[j][l - 1]
                B[k][l] = acc / l
        exact_rows = tuple(tuple(B[k][: k + 1]) for k in range(K + 1))
        log_entries = np.full((K + 1, K + 1), NEG_INF)
        for k in range(K + 1):
            log_entries[k, : k + 1] = _log_of(exact_rows[k])
        log_entries.setflags(write=False)
        return BellTriangle("phi", w, K, log_entries, exact_rows)

    log_phi = log_phi_array(w, K)
    log_entries = np.full((K + 1, K + 1), NEG_INF)
    log_entries[0, 0] = 0.0
    for l in range(1, K + 1):
        log_l = math.log(l)
        for k in range(l, K + 1):
            j = np.arange(l - 1, k)
            terms = log_binomial_row(k)[j] + log_phi[k - j] + log_entries[j, l - 1]
            log_entries[k, l] = log_sum(terms) - log_l
    log_entries.setflags(write=False)
    logger.debug(f"log Bell triangle of phi {w} K={K}")
    return BellTriangle("phi", w, K, log_entries)


def _check_phi_triangle(bt: BellTriangle, k: int) -> None:
    if bt.kind != "phi":
        raise ContractError("expected a Bell triangle of phi")
    if k > bt.K or k < 0:
        raise ContractError(f"order {k} outside triangle of size {bt.K}")


def log_sigma_poly(bt: BellTriangle, k: int, gamma: float) -> float:
    """log sigma_k(gamma) = log sum_l B_{k,l}(phi) gamma^l."""
    _check_phi_triangle(bt, k)
    if k == 0:
        return 0.0
    l = np.arange(1, k + 1)
    return log_sum(bt.log_entries[k, 1 : k + 1] + l * math.log(gamma))


def exact_sigma_poly(bt: BellTriangle, k: int, gamma: Number) -> Fraction:
    _check_phi_triangle(bt, k)
    g = Fraction(gamma)
    return sum((bt.exact_value(k, l) * g ** l for l in range(k + 1)), Fraction(0))


def log_sigma_prime(bt: BellTriangle, gamma: float, k: int) -> float:
    """log sigma'_k(gamma)."""
    _check_phi_triangle(bt, k)
    if k == 0:
        return NEG_INF
    l = np.arange(1, k + 1)
    return log_sum(np.log(l) + bt.log_entries[k, 1 : k + 1] + (l - 1) * math.log(gamma))


def sigma_prime(bt: BellTriangle, gamma: Number, k: int) -> Number:
    """sigma'_k(gamma) = sum_l l B_{k,l}(phi) gamma^(l-1); exact when the triangle and gamma are."""
    _check_phi_triangle(bt, k)
    if not gamma > 0:
        raise DomainError("gamma must be positive", gamma=gamma)
    if bt.exact is not None and is_rational(gamma):
        g = Fraction(gamma)
        return sum((l * bt.exact_value(k, l) * g ** (l - 1) for l in range(1, k + 1)), Fraction(0))
    return math.exp(log_sigma_prime(bt, float(gamma), k))


def bell_triangle_sigma(st: SigmaTable, stirling: StirlingTable, bt_phi: BellTriangle) -> BellTriangle:
    """B_{k,p}(sigma(theta)) = sum_{l=p}^{k} B_{k,l}(phi) S(l,p) theta^l."""
    if bt_phi.kind != "phi":
        raise ContractError("bell_triangle_sigma needs a triangle of phi")
    if bt_phi.weights != st.weights:
        raise ContractError("sigma table and Bell triangle use different weights")
    if bt_phi.K != st.K or stirling.K != st.K:
        raise ContractError(
            "mismatched orders", sigma_K=st.K, bell_K=bt_phi.K, stirling_K=stirling.K
        )
    K, theta = st.K, st.theta
    if st.exact is not None and bt_phi.exact is not None and is_rational(theta):
        th = Fraction(theta)
        powers = [th ** l for l in range(K + 1)]
        rows = []
        for k in range(K + 1):
            row = []
            for p in range(k + 1):
                acc = Fraction(0)
                for l in range(p, k + 1):
                    s = stirling.s(l, p)
                    if s:
                        acc += bt_phi.exact_value(k, l) * s * powers[l]
                row.append(acc)
            rows.append(tuple(row))
        exact_rows = tuple(rows)
        log_entries = np.full((K + 1, K + 1), NEG_INF)
        for k in range(K + 1):
            log_entries[k, : k + 1] = _log_of(exact_rows[k])
        log_entries.setflags(write=False)
        return BellTriangle("sigma", st.weights, K, log_entries, exact_rows, theta)

    log_S = stirling.log_matrix()
    log_theta = math.log(theta)
    log_entries = np.full((K + 1, K + 1), NEG_INF)
    log_entries[0, 0] = 0.0
    for k in range(1, K + 1):
        l = np.arange(k + 1)
        base = bt_phi.log_entries[k, : k + 1] + l * log_theta
        for p in range(1, k + 1):
            log_entries[k, p] = log_sum(base[p:] + log_S[p : k + 1, p])
    log_entries.setflags(write=False)
    return BellTriangle("sigma", st.weights, K, log_entries, None, theta)


@lru_cache(maxsize=1024)
def sigma_bell_triangle(w: WeightSequence, theta: Number, K: int, exact: bool = False) -> BellTriangle:
    """Convenience wrapper building the three inputs of bell_triangle_sigma."""
    st = sigma_table(w, theta, K, exact)
    if K == 0:
        return BellTriangle("sigma", w, 0, np.zeros((1, 1)), ((Fraction(1),),) if exact else None, theta)
    return bell_triangle_sigma(st, stirling_table(K), bell_triangle_phi(w, K, exact))


def sigma_from_sigma1(sigma1: SigmaTable, theta: Number, K: int) -> SigmaTable:
    """sigma_k(theta) rebuilt from sigma_k(1) through compositions and C(theta, q)."""
    if sigma1.theta != 1:
        raise ContractError("sigma_from_sigma1 needs a table at theta = 1", theta=sigma1.theta)
    if K > SIGMA_FROM_SIGMA1_MAX_K:
        raise InstanceTooLargeError(
            f"verification route only: K <= {SIGMA_FROM_SIGMA1_MAX_K}", K=K
        )
    if K > sigma1.K:
        raise ContractError("input table is shorter than K", K=K, available=sigma1.K)
    check_positive_theta(theta)
    exact_mode = sigma1.exact is not None and is_rational(theta)
    if exact_mode:
        base = sigma1.exact
        binom = [gen_binomial(Fraction(theta), q) for q in range(K + 1)]
        zero: Number = Fraction(0)
    else:
        base = [sigma1.value(k) for k in range(sigma1.K + 1)]
        binom = [math.prod(float(theta) - j for j in range(q)) / factorial(q) for q in range(K + 1)]
        zero = 0.0
    values = [Fraction(1) if exact_mode else 1.0]
    for k in range(1, K + 1):
        total = zero
        for q in range(1, k + 1):
            inner = zero
            for comp in positive_compositions(k, q):
                term = multinomial(comp)
                for part in comp:
                    term = term * base[part]
                inner += term
            total += binom[q] * inner
        values.append(total)
    if exact_mode:
        log_values = _log_of(values)
        exact = tuple(values)
    else:
        log_values = np.array([math.log(v) if v > 0 else NEG_INF for v in values])
        exact = None
    log_values.setflags(write=False)
    return SigmaTable(sigma1.weights, theta, K, log_values, exact)


# Verification routes


def bell_phi_bruteforce(w: WeightSequence, k: int, l: int) -> Fraction:
    """B_{k,l}(phi) = (k!/l!) sum over compositions m of k into l parts of prod phi_m / m!."""
    if l == 0:
        return Fraction(1 if k == 0 else 0)
    phi = w.phi_exact_upto(k)
    total = Fraction(0)
    for comp in positive_compositions(k, l):
        term = Fraction(1)
        for part in comp:
            term *= phi[part] / factorial(part)
        total += term
    return total * factorial(k) / factorial(l)


def bell_sigma_alternating(w: WeightSequence, theta: Number, K: int) -> ExactTriangle:
    """B_{k,p}(sigma(theta)) = (1/p!) sum_q (-1)^(p-q) C(p,q) sigma_k(q theta), exact only."""
    require_exact(w, K, theta)
    th = Fraction(theta)
    tables = {q: sigma_table(w, th * q, K, exact=True) for q in range(1, K + 1)}
    rows = [(Fraction(1),)]
    for k in range(1, K + 1):
        row = [Fraction(0)]
        for p in range(1, k + 1):
            acc = Fraction(0)
            for q in range(1, p + 1):
                acc += (-1) ** (p - q) * math.comb(p, q) * tables[q].exact_value(k)
            row.append(acc / factorial(p))
        rows.append(tuple(row))
    return tuple(rows)


def bell_sigma_power_series(w: WeightSequence, theta: Number, K: int) -> ExactTriangle:
    """B_{k,p}(sigma(theta)) = (k!/p!) [x^k] (Z_theta(x) - 1)^p by truncated polynomial powers."""
    require_exact(w, K, theta)
    st = sigma_table(w, theta, K, exact=True)
    base = [Fraction(0)] + [st.exact_value(j) / factorial(j) for j in range(1, K + 1)]
    power = [Fraction(1)] + [Fraction(0)] * K
    coeffs = [power]
    for _ in range(K):
        nxt = [Fraction(0)] * (K + 1)
        for i, a in enumerate(coeffs[-1]):
            if not a:
                continue
            for j in range(1, K + 1 - i):
                if base[j]:
                    nxt[i + j] += a * base[j]
        coeffs.append(nxt)
    rows = []
    for k in range(K + 1):
        rows.append(tuple(coeffs[p][k] * factorial(k) / factorial(p) for p in range(k + 1)))
    return tuple(rows)


def sigma_prime_recurrence(w: WeightSequence, theta: Number, K: int, exact: bool = False) -> List[Number]:
    """sigma'_k(theta) = sum_{l<k} C(k,l) phi_{k-l} sigma_l(theta) for k = 0..K."""
    st = sigma_table(w, theta, K, exact)
    if exact:
        phi = w.phi_exact_upto(K)
        return [
            sum((math.comb(k, l) * phi[k - l] * st.exact_value(l) for l in range(k)), Fraction(0))
            for k in range(K + 1)
        ]
    log_phi = log_phi_array(w, K)
    out: List[Number] = [0.0]
    for k in range(1, K + 1):
        l = np.arange(k)
        out.append(math.exp(log_sum(log_binomial_row(k)[:k] + log_phi[k - l] + st.log_values[:k])))
    return out


def sigma_convolution(w: WeightSequence, theta: Number, theta2: Number, K: int) -> List[Fraction]:
    """sum_l C(k,l) sigma_l(theta) sigma_{k-l}(theta2), exact."""
    a = sigma_table(w, theta, K, exact=True)
    b = sigma_table(w, theta2, K, exact=True)
    return [
        sum((math.comb(k, l) * a.exact_value(l) * b.exact_value(k - l) for l in range(k + 1)), Fraction(0))
        for k in range(K + 1)
    ]


def closed_form_triangle(w: WeightSequence, K: int) -> ExactTriangle:
    """Known closed forms or three-term recurrences of B_{k,p}(phi)."""
    require_exact(w, K)
    f = w.family
    rows: List[List[Fraction]] = [[Fraction(1)]]
    if f in (Family.LOGSERIES, Family.NEGBIN, Family.ENGEN):
        alpha = Fraction(1) if f == Family.LOGSERIES else Fraction(w.alpha)
        sign = {Family.LOGSERIES: 0, Family.NEGBIN: 1, Family.ENGEN: -1}[f]
        for k in range(K):
            prev = rows[-1] + [Fraction(0)]
            row = [Fraction(0)] * (k + 2)
            for p in range(1, k + 2):
                row[p] = alpha * prev[p - 1] + (k + sign * p * alpha) * prev[p]
            rows.append(row)
        return tuple(tuple(r) for r in rows)
    for k in range(1, K + 1):
        row = [Fraction(0)]
        for p in range(1, k + 1):
            if f == Family.CAYLEY:
                value = Fraction(math.comb(k - 1, p - 1) * k ** (k - p))
            elif f == Family.TREE:
                a, b = Fraction(w.a), Fraction(w.b)
                value = math.comb(k - 1, p - 1) * Fraction(falling(a * k, k - p)) * b ** (k - p)
            elif f == Family.NEWENGEN:
                value = math.comb(k, p) * Fraction(rising(Fraction(w.alpha) * p, k - p))
            elif f == Family.LINEAR:
                value = Fraction(1 if p == k else 0)
            else:
                raise DomainError(f"no closed-form triangle for {f.value}")
            row.append(value)
        rows.append(row)
    return tuple(tuple(r) for r in rows)


def lah_triangle(K: int) -> ExactTriangle:
    """Lah numbers C(k-1,p-1) k!/p!, which are B_{k,p}(sigma(1)) of the log-series family."""
    rows = [(Fraction(1),)]
    for k in range(1, K + 1):
        rows.append((Fraction(0),) + tuple(
            Fraction(math.comb(k - 1, p - 1) * factorial(k), factorial(p)) for p in range(1, k + 1)
        ))
    return tuple(rows)


N1_KINDS = ("linear", "exponential", "tree")


def n1_star_sigma(kind: str, alpha: Fraction, k: int, theta: Fraction) -> Fraction:
    """sigma*_k(theta) of the inner weight function phi*."""
    if kind == "linear":
        return (alpha * theta) ** k
    if kind == "exponential":
        rows = stirling2_rows(max(k, 1))
        return alpha ** k * sum((rows[k][p] * theta ** p for p in range(k + 1)), Fraction(0))
    if kind == "tree":
        if k == 0:
            return Fraction(1)
        return theta * (theta + alpha * k) ** (k - 1)
    raise DomainError(f"unknown inner family {kind!r}")


def n1_weights(kind: str, alpha: Fraction, K: int) -> WeightSequence:
    """phi(x) = x exp(phi*(x)), i.e. phi_m = m sigma*_{m-1}(1)."""
    values = tuple(m * n1_star_sigma(kind, Fraction(alpha), m - 1, Fraction(1)) for m in range(1, K + 1))
    return WeightSequence(Family.CUSTOM, custom=values)


def n1_identity(kind: str, alpha: Number, K: int) -> Tuple[ExactTriangle, ExactTriangle]:
    """Both sides of B_{k,p}(m sigma*_{m-1}(1)) = C(k,p) sigma*_{k-p}(p) for 1 <= p <= k <= K."""
    alpha = Fraction(alpha)
    lhs_tri = bell_triangle_phi(n1_weights(kind, alpha, K), K, exact=True)
    lhs, rhs = [], []
    for k in range(1, K + 1):
        lhs.append(tuple(lhs_tri.exact_value(k, p) for p in range(1, k + 1)))
        rhs.append(tuple(math.comb(k, p) * n1_star_sigma(kind, alpha, k - p, Fraction(p)) for p in range(1, k + 1)))
    return tuple(lhs), tuple(rhs)
