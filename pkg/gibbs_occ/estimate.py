"""Estimators of the number of species n (theta known) and of the diversity gamma.

Data are a sample size k and the observed number of distinct species P.
"""

import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from typing import Any, Dict, List, Optional, Union

import numpy as np
from scipy.optimize import brentq

from gibbs_occ.bellpoly import (
    bell_triangle_phi,
    log_sigma_poly,
    log_sigma_prime,
    sigma_bell_triangle,
    sigma_table,
)
from gibbs_occ.combinatorics import falling, rising
from gibbs_occ.config import get_settings
from gibbs_occ.errors import ContractError, DiagnosticError, DomainError
from gibbs_occ.logreal import NEG_INF
from gibbs_occ.occupancy import pnk_pmf
from gibbs_occ.starlimit import StarConfig, star_pnk_pmf
from gibbs_occ.weights import Family, WeightSequence, as_float, is_rational

logger = logging.getLogger(__name__)

Number = Union[int, Fraction, float]

TIE_TOLERANCE = 1e-12
MAX_DOUBLINGS = 200
APPROX_N_CAP = 1e9


class Method(str, Enum):
    MLE = "MLE"
    RATIO = "Ratio"
    CLOSED_FORM = "ClosedForm"


@dataclass(frozen=True)
class SampleSummary:
    """Observed sample size k and number of distinct species P."""

    k: int
    P: int

    def __post_init__(self):
        if self.k < 1 or self.P < 1:
            raise ContractError("sample summary needs k >= 1 and P >= 1", k=self.k, P=self.P)


@dataclass
class Estimate:
    """Estimation attributes."""

    value: Number
    method: Method
    boundary: Optional[str] = None
    residual: Optional[float] = None
    diagnostics: Dict[str, Any] = field(default_factory=dict)

    @property
    def is_sentinel(self) -> bool:
        return self.boundary is not None and (self.value == 0 or self.value == math.inf)


# Likelihoods


def log_likelihood_n(w: WeightSequence, theta: float, s: SampleSummary, n: int) -> float:
    """log P(P_{n,k} = P) for integer n."""
    if n < s.P:
        return NEG_INF
    bt_sigma = sigma_bell_triangle(w, theta, s.k)
    bt_phi = bell_triangle_phi(w, s.k)
    return math.log(falling(n, s.P)) + bt_sigma.log(s.k, s.P) - log_sigma_poly(bt_phi, s.k, n * float(theta))


def log_likelihood_gamma(w: WeightSequence, s: SampleSummary, gamma: float) -> float:
    """log P*(P_k = P) as a function of gamma."""
    bt = bell_triangle_phi(w, s.k)
    return s.P * math.log(gamma) + bt.log(s.k, s.P) - log_sigma_poly(bt, s.k, gamma)


def exhaustive_mle_n(w: WeightSequence, theta: float, s: SampleSummary, n_max: int) -> List[int]:
    """All maximizers of n -> P(P_{n,k} = P) over P <= n <= n_max."""
    values = np.array([log_likelihood_n(w, theta, s, n) for n in range(s.P, n_max + 1)])
    best = values.max()
    return [s.P + i for i in np.flatnonzero(values >= best - TIE_TOLERANCE * max(1.0, abs(best)))]


# Number of species


def mle_n(w: WeightSequence, theta: Number, s: SampleSummary) -> Estimate:
    """Largest n whose likelihood ratio L(n)/L(n-1) reaches 1, found by doubling and bisection.

    On a tie L(n-1) = L(n) the upper maximizer n is reported; both are listed
    in ``diagnostics["maximizers"]``.
    """
    k, P = s.k, s.P
    if P > k:
        raise ContractError("observed species exceed the sample size", k=k, P=P)
    if k == 1:
        return Estimate(1, Method.MLE, diagnostics={"note": "likelihood constant in n"})
    theta = float(theta)
    bt = bell_triangle_phi(w, k)
    cap = get_settings().mle_scan_cap
    evaluations = 0

    def log_ratio(n: int) -> float:
        nonlocal evaluations
        evaluations += 1
        return (math.log(n) - math.log(n - P)
                + log_sigma_poly(bt, k, (n - 1) * theta) - log_sigma_poly(bt, k, n * theta))

    def climbing(n: int) -> bool:
        return log_ratio(n) > -TIE_TOLERANCE

    if not climbing(P + 1):
        n_hat, bracket = P, (P, P + 1)
    else:
        lo, hi, step = P + 1, None, 1
        while hi is None:
            candidate = lo + step
            if candidate > cap:
                if climbing(cap):
                    logger.info(f"n likelihood still increasing at the scan cap {cap} (k={k}, P={P})")
                    boundary = "P=k" if P == k else "scan cap"
                    return Estimate(math.inf, Method.MLE, boundary=boundary,
                                    diagnostics={"evaluations": evaluations, "scan_cap": cap})
                hi = cap
                break
            if climbing(candidate):
                lo = candidate
                step *= 2
            else:
                hi = candidate
        while hi - lo > 1:
            mid = (lo + hi) // 2
            if climbing(mid):
                lo = mid
            else:
                hi = mid
        n_hat, bracket = lo, (lo, hi)

    maximizers = [n_hat]
    if n_hat > P and abs(log_ratio(n_hat)) <= TIE_TOLERANCE:
        maximizers = [n_hat - 1, n_hat]
        logger.info(f"two adjacent maximizers {maximizers} (k={k}, P={P}); reporting {n_hat}")
    return Estimate(
        n_hat,
        Method.MLE,
        diagnostics={
            "evaluations": evaluations,
            "bracket": list(bracket),
            "maximizers": maximizers,
            "log_likelihood": log_likelihood_n(w, theta, s, n_hat),
        },
    )


def expected_distinct(w: WeightSequence, theta: float, k: int, n: float) -> float:
    """n (1 - sigma_k((n-1) theta) / sigma_k(n theta)) for real n >= 1."""
    if n <= 1:
        return float(n)
    bt = bell_triangle_phi(w, k)
    log_ratio = log_sigma_poly(bt, k, (n - 1) * theta) - log_sigma_poly(bt, k, n * theta)
    return -n * math.expm1(log_ratio)


def approx_mle_n(w: WeightSequence, theta: Number, s: SampleSummary) -> Estimate:
    """Real n solving P = n (1 - sigma_k((n-1) theta) / sigma_k(n theta))."""
    k, P = s.k, s.P
    if P > k:
        raise DomainError("observed species exceed the sample size", k=k, P=P)
    theta = float(theta)
    if P == 1:
        return Estimate(1.0, Method.MLE, residual=0.0, diagnostics={"note": "P=1 root at n=1"})
    if P == k:
        return Estimate(math.inf, Method.MLE, boundary="P=k",
                        diagnostics={"note": "no finite solution"})

    def g(n: float) -> float:
        return expected_distinct(w, theta, k, n) - P

    lo, hi, doublings = float(P), 2.0 * P, 0
    while g(hi) < 0:
        lo, hi = hi, 2.0 * hi
        doublings += 1
        if hi > APPROX_N_CAP:
            raise DiagnosticError("no finite solution up to n=1e9", k=k, P=P)
    root = brentq(g, lo, hi, xtol=1e-12, rtol=1e-14)
    residual = abs(g(root))
    if residual >= 1e-8:
        logger.warning(f"approx_mle_n residual {residual} above tolerance (k={k}, P={P})")
    return Estimate(root, Method.MLE, residual=residual,
                    diagnostics={"bracket": [lo, hi], "doublings": doublings})


def alt_n(w: WeightSequence, theta: Number, s: SampleSummary, exact: bool = False) -> Estimate:
    """n~ = P + B_{k,P-1}(sigma(theta)) / B_{k,P}(sigma(theta))."""
    k, P = s.k, s.P
    if P > k:
        raise DomainError("B_{k,P} vanishes for P > k", k=k, P=P)
    bt = sigma_bell_triangle(w, theta, k, exact)
    if exact:
        value = P + bt.exact_value(k, P - 1) / bt.exact_value(k, P)
    else:
        value = P + float(bt.entry(k, P - 1) / bt.entry(k, P))
    return Estimate(value, Method.RATIO)


# Diversity gamma


def star_expected_distinct(w: WeightSequence, k: int, gamma: float) -> float:
    """gamma sigma'_k(gamma) / sigma_k(gamma)."""
    bt = bell_triangle_phi(w, k)
    return math.exp(math.log(gamma) + log_sigma_prime(bt, gamma, k) - log_sigma_poly(bt, k, gamma))


def mle_gamma(w: WeightSequence, s: SampleSummary) -> Estimate:
    """gamma^ solving P = gamma sigma'_k(gamma) / sigma_k(gamma)."""
    k, P = s.k, s.P
    if P > k:
        raise DomainError("observed species exceed the sample size", k=k, P=P)
    if P == 1:
        return Estimate(0.0, Method.MLE, boundary="P=1")
    if P == k:
        return Estimate(math.inf, Method.MLE, boundary="P=k")

    def h(log_gamma: float) -> float:
        return star_expected_distinct(w, k, math.exp(log_gamma)) - P

    lo, hi, doublings = 0.0, 0.0, 0
    while h(lo) > 0:
        lo -= math.log(2.0)
        doublings += 1
        if doublings > MAX_DOUBLINGS:
            raise DiagnosticError("no lower bracket for gamma", k=k, P=P)
    while h(hi) < 0:
        hi += math.log(2.0)
        doublings += 1
        if doublings > MAX_DOUBLINGS:
            raise DiagnosticError("no upper bracket for gamma", k=k, P=P)
    if lo == hi:
        lo -= math.log(2.0)

    diagnostics: Dict[str, Any] = {"doublings": doublings}
    grid = np.linspace(lo, hi, 65)
    values = np.array([h(x) for x in grid])
    if np.any(np.diff(values) < 0):
        diagnostics["non_monotone"] = True
        logger.warning(f"gamma -> E*(P_k) is not monotone on the bracket for {w} (k={k}, P={P})")
    crossing = int(np.flatnonzero((values[:-1] <= 0) & (values[1:] >= 0))[0])
    lo, hi = grid[crossing], grid[crossing + 1]
    diagnostics["bracket"] = [math.exp(lo), math.exp(hi)]
    log_root = brentq(h, lo, hi, xtol=1e-15, rtol=1e-15)
    gamma_hat = math.exp(log_root)
    residual = abs(h(log_root))
    if residual >= 1e-8:
        logger.warning(f"mle_gamma residual {residual} above tolerance (k={k}, P={P})")
    diagnostics["log_likelihood"] = log_likelihood_gamma(w, s, gamma_hat)
    return Estimate(gamma_hat, Method.MLE, residual=residual, diagnostics=diagnostics)


def _exact_or_float(*params: Number) -> bool:
    return all(is_rational(p) for p in params)


def alt_gamma_closed_form(w: WeightSequence, s: SampleSummary) -> Optional[Number]:
    """gamma~ for families with an explicit Bell-ratio, or None."""
    k, P = s.k, s.P
    f = w.family
    if f == Family.NEGBIN and w.alpha == 1:
        return Fraction(P * (P - 1), k - P + 1)
    if f == Family.CAYLEY:
        return Fraction(k * (P - 1), k - P + 1)
    if f == Family.TREE:
        if _exact_or_float(w.a, w.b):
            a, b = Fraction(w.a), Fraction(w.b)
            return b * (P - 1) * ((a - 1) * k + P) / (k - P + 1)
        a, b = as_float(w.a), as_float(w.b)
        return b * (P - 1) * ((a - 1) * k + P) / (k - P + 1)
    if f == Family.NEWENGEN:
        if _exact_or_float(w.alpha):
            alpha = Fraction(w.alpha)
            return Fraction(P, k - P + 1) * rising(alpha * (P - 1), k - P + 1) / rising(alpha * P, k - P)
        alpha = as_float(w.alpha)
        return P / (k - P + 1) * rising(alpha * (P - 1), k - P + 1) / rising(alpha * P, k - P)
    return None


def alt_gamma_bell(w: WeightSequence, s: SampleSummary, exact: bool = False) -> Number:
    """gamma~ = B_{k,P-1}(phi) / B_{k,P}(phi) from the Bell triangle."""
    bt = bell_triangle_phi(w, s.k, exact)
    if exact:
        return bt.exact_value(s.k, s.P - 1) / bt.exact_value(s.k, s.P)
    return math.exp(bt.log(s.k, s.P - 1) - bt.log(s.k, s.P))


def alt_gamma(w: WeightSequence, s: SampleSummary, exact: bool = False) -> Estimate:
    """Ratio estimator of gamma, short-circuiting families with a closed form."""
    k, P = s.k, s.P
    if P > k:
        raise DomainError("B_{k,P} vanishes for P > k", k=k, P=P)
    if P == 1:
        return Estimate(Fraction(0) if exact else 0.0, Method.RATIO, boundary="P=1")
    closed = alt_gamma_closed_form(w, s)
    if closed is not None:
        value = closed if exact else float(closed)
        return Estimate(value, Method.CLOSED_FORM)
    return Estimate(alt_gamma_bell(w, s, exact), Method.RATIO)


# Exact expectations

ESTIMATORS = ("alt_n", "alt_gamma", "mle_n")


def exact_expectation(w: WeightSequence, estimator: str, k: int, theta: Optional[Number] = None,
                      n: Optional[int] = None, gamma: Optional[Number] = None) -> Fraction:
    """Exact mean of an estimator of (k, P) under the finite-n law (n, theta) or the star law (gamma).

    Raises DomainError when the estimator is infinite on an outcome of positive
    probability, as mle_n is at P=k whenever k <= n.
    """
    if estimator not in ESTIMATORS:
        raise DomainError(f"unknown estimator {estimator!r}", allowed=",".join(ESTIMATORS))
    if n is not None:
        if theta is None:
            raise ContractError("the finite-n law needs theta")
        law = pnk_pmf(w, theta, n, k, exact=True)
    elif gamma is not None:
        law = star_pnk_pmf(w, StarConfig(gamma, max(k, 1)), k, exact=True)
    else:
        raise ContractError("give n and theta for the finite-n law, or gamma for the star law")

    total = Fraction(0)
    for p, prob in law.rows():
        s = SampleSummary(k, p)
        if estimator == "alt_n":
            value = alt_n(w, theta if theta is not None else gamma, s, exact=True).value
        elif estimator == "alt_gamma":
            value = alt_gamma(w, s, exact=True).value
        else:
            value = mle_n(w, theta if theta is not None else gamma, s).value
        if isinstance(value, float) and not math.isfinite(value):
            if prob:
                raise DomainError(f"{estimator} is infinite at P={p}, which has positive probability; "
                                  "the expectation diverges", k=k, P=p)
            continue
        total += Fraction(value) * prob
    return total


def star_alt_gamma_mean(w: WeightSequence, gamma: Number, k: int) -> Fraction:
    """E*(gamma~) = gamma (1 - (phi_1 gamma)^k / sigma_k(gamma)), exact."""
    g = Fraction(gamma)
    st = sigma_table(w, g, k, exact=True)
    return g * (1 - (w.phi_exact(1) * g) ** k / st.exact_value(k))
