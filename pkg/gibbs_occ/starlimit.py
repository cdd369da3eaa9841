"""Infinitely-many-species limit: n -> infinity, theta -> 0 with n theta -> gamma.

Laws are built directly from the weights and sigma_k(gamma); no numerical limit is taken.
"""

import logging
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import List, Optional, Sequence, Union

import numpy as np
from scipy.integrate import quad

from gibbs_occ.bellpoly import bell_triangle_phi, log_sigma_prime, sigma_prime, sigma_table
from gibbs_occ.combinatorics import factorial, falling
from gibbs_occ.errors import ContractError, DomainError
from gibbs_occ.occupancy import Pmf, make_arith, point_mass
from gibbs_occ.weights import Family, WeightSequence, invert_levy_tail, is_rational

logger = logging.getLogger(__name__)

Number = Union[int, Fraction, float]
Probability = Union[float, Fraction]

STATISTICS = ("all-same-species", "pk", "rank-m-only")


@dataclass(frozen=True)
class StarConfig:
    """Diversity parameter gamma and the largest sample size tabulated."""

    gamma: Number
    K: int = 64

    def __post_init__(self):
        if not self.gamma > 0:
            raise DomainError("gamma must be positive", gamma=self.gamma)
        if self.K < 1:
            raise DomainError("K must be at least 1", K=self.K)


def _check_k(cfg: StarConfig, k: int) -> None:
    if k < 0:
        raise DomainError("k must be non-negative", k=k)
    if k > cfg.K:
        raise DomainError(f"k={k} exceeds the configured table size K={cfg.K}")


def _phi_over_factorial(ar, w: WeightSequence, i: int):
    if ar.exact:
        return w.phi_exact(i) / factorial(i)
    return ar.div(w.log_phi(i), ar.const(factorial(i)))


def _bell(ar, w: WeightSequence, k: int, p: int):
    bt = bell_triangle_phi(w, k, ar.exact)
    return bt.exact_value(k, p) if ar.exact else bt.log(k, p)


def _check_counts(counts: Sequence[int]) -> tuple:
    counts = tuple(int(c) for c in counts)
    if not counts:
        raise ContractError("counts must not be empty")
    if any(c < 1 for c in counts):
        raise ContractError("star-limit counts must all be positive")
    return counts


def star_joint_pmf(w: WeightSequence, cfg: StarConfig, counts: Sequence[int], exact: bool = False) -> Probability:
    """P*(species counts = counts, P_k = p) = (k!/p!) gamma^p / sigma_k(gamma) prod phi_{k_q}/k_q!."""
    counts = _check_counts(counts)
    k, p = sum(counts), len(counts)
    _check_k(cfg, k)
    ar = make_arith(w, cfg.gamma, k, exact)
    terms = [ar.const(factorial(k)), ar.power(ar.const(cfg.gamma), p)]
    terms += [_phi_over_factorial(ar, w, c) for c in counts]
    return ar.finish(ar.div(ar.mul(*terms), ar.mul(ar.const(factorial(p)), ar.sigma(1, k))))


def star_joint_conditional(w: WeightSequence, counts: Sequence[int], exact: bool = False) -> Probability:
    """Law of the counts given P_k = p; free of gamma."""
    counts = _check_counts(counts)
    k, p = sum(counts), len(counts)
    ar = make_arith(w, Fraction(1) if exact else 1.0, k, exact)
    terms = [ar.const(factorial(k))] + [_phi_over_factorial(ar, w, c) for c in counts]
    return ar.finish(ar.div(ar.mul(*terms), ar.mul(ar.const(factorial(p)), _bell(ar, w, k, p))))


def star_pnk_pmf(w: WeightSequence, cfg: StarConfig, k: int, exact: bool = False) -> Pmf:
    """P*(P_k = p) = gamma^p B_{k,p}(phi) / sigma_k(gamma), p = 1..k."""
    _check_k(cfg, k)
    if k == 0:
        return point_mass(0, exact)
    ar = make_arith(w, cfg.gamma, k, exact)
    denom = ar.sigma(1, k)
    g = ar.const(cfg.gamma)
    probs = tuple(
        ar.finish(ar.div(ar.mul(ar.power(g, p), _bell(ar, w, k, p)), denom)) for p in range(1, k + 1)
    )
    return Pmf(tuple(range(1, k + 1)), probs, exact)


def star_pgf(w: WeightSequence, cfg: StarConfig, k: int, u: Number, exact: bool = False) -> Probability:
    """E*(u^{P_k}) = sigma_k(gamma u) / sigma_k(gamma)."""
    _check_k(cfg, k)
    if not 0 <= u <= 1:
        raise DomainError("u must lie in [0, 1]", u=u)
    ar = make_arith(w, cfg.gamma, k, exact)
    return ar.finish(ar.div(ar.sigma(u, k), ar.sigma(1, k)))


def star_mean(w: WeightSequence, cfg: StarConfig, k: int) -> Probability:
    """E*(P_k) = gamma sigma'_k(gamma) / sigma_k(gamma)."""
    _check_k(cfg, k)
    if k == 0:
        return 0.0
    bt = bell_triangle_phi(w, k)
    st = sigma_table(w, cfg.gamma, k)
    return math.exp(math.log(cfg.gamma) + log_sigma_prime(bt, float(cfg.gamma), k) - st.log(k))


def star_aff_pmf(w: WeightSequence, cfg: StarConfig, aff: Sequence[int], exact: bool = False) -> Probability:
    """P*(A = a, P_k = p) = gamma^p k!/sigma_k(gamma) prod (phi_i/i!)^{a_i}/a_i!."""
    aff = tuple(int(a) for a in aff)
    if any(a < 0 for a in aff):
        raise ContractError("aff entries must be non-negative")
    k = sum(i * a for i, a in enumerate(aff, start=1))
    if k < 1:
        raise ContractError("aff must describe a sample of size k >= 1")
    _check_k(cfg, k)
    p = sum(aff)
    ar = make_arith(w, cfg.gamma, k, exact)
    terms = [ar.power(ar.const(cfg.gamma), p), ar.const(factorial(k))]
    for i, a in enumerate(aff, start=1):
        if a:
            terms.append(ar.div(ar.power(_phi_over_factorial(ar, w, i), a), ar.const(factorial(a))))
    return ar.finish(ar.div(ar.mul(*terms), ar.sigma(1, k)))


def star_aff_conditional(w: WeightSequence, aff: Sequence[int], exact: bool = False) -> Probability:
    """Law of A given P_k = p; free of gamma."""
    aff = tuple(int(a) for a in aff)
    k = sum(i * a for i, a in enumerate(aff, start=1))
    if k < 1 or any(a < 0 for a in aff):
        raise ContractError("aff must describe a sample of size k >= 1")
    p = sum(aff)
    ar = make_arith(w, Fraction(1) if exact else 1.0, k, exact)
    terms = [ar.const(factorial(k))]
    for i, a in enumerate(aff, start=1):
        if a:
            terms.append(ar.div(ar.power(_phi_over_factorial(ar, w, i), a), ar.const(factorial(a))))
    return ar.finish(ar.div(ar.mul(*terms), _bell(ar, w, k, p)))


def star_aff_moments(w: WeightSequence, cfg: StarConfig, k: int, r: Sequence[int],
                     exact: bool = False) -> Probability:
    """E* prod_i {A_k(i)}_{r_i} = gamma^r {k}_kappa sigma_{k-kappa}(gamma)/sigma_k(gamma) prod (phi_i/i!)^{r_i}."""
    _check_k(cfg, k)
    r = tuple(int(x) for x in r)
    if any(x < 0 for x in r):
        raise ContractError("r entries must be non-negative")
    total = sum(r)
    kappa = sum(i * x for i, x in enumerate(r, start=1))
    if kappa > k:
        return Fraction(0) if exact else 0.0
    ar = make_arith(w, cfg.gamma, k, exact)
    terms = [ar.power(ar.const(cfg.gamma), total), ar.const(falling(k, kappa)), ar.sigma(1, k - kappa)]
    for i, x in enumerate(r, start=1):
        if x:
            terms.append(ar.power(_phi_over_factorial(ar, w, i), x))
    return ar.finish(ar.div(ar.mul(*terms), ar.sigma(1, k)))


def star_pnk_recursion(w: WeightSequence, cfg: StarConfig, K: int) -> List[Pmf]:
    """Exact laws of P_1..P_K from the sequential urn recursion of the negbin and Engen families."""
    if w.family not in (Family.NEGBIN, Family.ENGEN):
        raise DomainError(f"no urn recursion for {w.family.value}")
    if not (is_rational(cfg.gamma) and is_rational(w.alpha)):
        raise DomainError("the urn recursion runs in exact arithmetic only")
    alpha, gamma = Fraction(w.alpha), Fraction(cfg.gamma)
    sign = 1 if w.family == Family.NEGBIN else -1
    st = sigma_table(w, gamma, K, exact=True)
    laws = [Pmf((1,), (Fraction(1),), True)]
    for k in range(1, K):
        prev = laws[-1]
        ratio = st.exact_value(k) / st.exact_value(k + 1)
        probs = tuple(
            ratio * (alpha * gamma * prev[p - 1] + (k + sign * p * alpha) * prev[p]) for p in range(1, k + 2)
        )
        laws.append(Pmf(tuple(range(1, k + 2)), probs, True))
    return laws


def single_species_rank_prob(w: WeightSequence, cfg: StarConfig, k: int, m: int) -> float:
    """Probability that all k draws fall in the m-th largest species.

    Equals E[Delta_(m)^k] / sigma_k(gamma) with Delta_(m) = pi_bar^{-1}(Gamma_m / gamma)
    and Gamma_m a Gamma(m) variable.
    """
    if not w.levy_tail_support:
        raise DomainError(f"no Lévy tail implemented for {w.family.value}")
    if m < 1 or k < 1:
        raise DomainError("rank and sample size must be positive", m=m, k=k)
    gamma = float(cfg.gamma)
    log_norm = math.lgamma(m) + sigma_table(w, gamma, k).log(k)

    def integrand(x: float) -> float:
        # beyond this the log-series inverse tail is below 1e-300
        if x <= 0 or (not w.finite_activity and x / gamma >= 690.0):
            return 0.0
        t = float(invert_levy_tail(w, np.array([x / gamma]))[0])
        if t <= 0:
            return 0.0
        return math.exp(-x + (m - 1) * math.log(x) + k * math.log(t) - log_norm)

    upper = gamma if w.finite_activity else math.inf
    value, err = quad(integrand, 0.0, upper, limit=200, epsabs=1e-13, epsrel=1e-10)
    logger.debug(f"rank-{m} probability {w} gamma={gamma} k={k}: {value} (quadrature error {err})")
    return value


def analytic_target(w: WeightSequence, cfg: StarConfig, k: int, statistic: str,
                    p: Optional[int] = None, m: Optional[int] = None) -> float:
    """Closed-form value of a biased-sampling statistic."""
    if statistic == "all-same-species":
        return float(star_pnk_pmf(w, cfg, k)[1])
    if statistic == "pk":
        if p is None:
            raise DomainError("statistic pk needs p")
        return float(star_pnk_pmf(w, cfg, k)[p])
    if statistic == "rank-m-only":
        if m is None:
            raise DomainError("statistic rank-m-only needs m")
        return single_species_rank_prob(w, cfg, k, m)
    raise DomainError(f"unknown statistic {statistic!r}", allowed=",".join(STATISTICS))


def star_sigma_prime(w: WeightSequence, cfg: StarConfig, k: int, exact: bool = False) -> Probability:
    """sigma'_k(gamma) from the Bell triangle of phi."""
    return sigma_prime(bell_triangle_phi(w, k, exact), cfg.gamma, k)
