"""Generator weight families and their evaluators.

A weight sequence (phi_m)_{m>=1} is the list of Taylor coefficients of the local
exponential generating function phi(x) = sum_m phi_m x^m / m!. phi_0 is fixed to 0.
"""

import json
import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from functools import lru_cache
from pathlib import Path
from typing import Optional, Tuple, Union

import mpmath
import numpy as np
from scipy.optimize import brentq
from scipy.special import exp1, gammainc, gammaincc, gammaln, lambertw

from gibbs_occ.combinatorics import factorial, falling, rising
from gibbs_occ.config import get_settings
from gibbs_occ.errors import DomainError, UnsupportedFamilyError, WeightsExhaustedError
from gibbs_occ.logreal import NEG_INF

logger = logging.getLogger(__name__)

Param = Union[int, Fraction, float]
Conjectured = "conjectured"


class Family(str, Enum):
    LOGSERIES = "logseries"
    NEGBIN = "negbin"
    ENGEN = "engen"
    CAYLEY = "cayley"
    TREE = "tree"
    POLYLOG = "polylog"
    MITTAGLEFFLER = "mittagleffler"
    BELL = "bell"
    LINEAR = "linear"
    NEWENGEN = "newengen"
    BINARYTREE = "binarytree"
    CUSTOM = "custom"


_REQUIRED_PARAMS = {
    Family.NEGBIN: ("alpha",),
    Family.ENGEN: ("alpha",),
    Family.TREE: ("a", "b"),
    Family.POLYLOG: ("alpha",),
    Family.MITTAGLEFFLER: ("alpha",),
    Family.NEWENGEN: ("alpha",),
}

_IN_S = {
    Family.LOGSERIES: True,
    Family.NEGBIN: True,
    Family.ENGEN: True,
    Family.CAYLEY: True,
    Family.TREE: Conjectured,
    Family.POLYLOG: True,
    Family.MITTAGLEFFLER: True,
    Family.BELL: True,
    Family.LINEAR: True,
    Family.NEWENGEN: True,
    Family.BINARYTREE: False,
    Family.CUSTOM: None,
}

# sigma_k(theta) in ZR-, where asserted
_ZR_MINUS = {Family.LOGSERIES: True, Family.CAYLEY: True, Family.ENGEN: False}


def is_rational(value: Param) -> bool:
    return isinstance(value, (int, Fraction)) and not isinstance(value, bool)


def as_float(value: Param) -> float:
    return float(value)


@dataclass(frozen=True)
class WeightSequence:
    """An immutable weight family with its parameters."""

    family: Family
    alpha: Optional[Param] = None
    a: Optional[Param] = None
    b: Optional[Param] = None
    custom: Tuple[Fraction, ...] = field(default=())

    def __post_init__(self):
        object.__setattr__(self, "family", Family(self.family))
        for name in _REQUIRED_PARAMS.get(self.family, ()):
            if getattr(self, name) is None:
                raise DomainError(f"family {self.family.value} requires parameter {name}")
        f = self.family
        if f == Family.NEGBIN and not self.alpha > 0:
            raise DomainError("negbin requires alpha > 0", alpha=self.alpha)
        if f in (Family.ENGEN, Family.MITTAGLEFFLER) and not 0 < self.alpha < 1:
            raise DomainError(f"{f.value} requires 0 < alpha < 1", alpha=self.alpha)
        if f == Family.POLYLOG and not self.alpha > 0:
            raise DomainError("polylog requires alpha > 0", alpha=self.alpha)
        if f == Family.NEWENGEN and not 0 < self.alpha <= 1:
            raise DomainError("newengen requires 0 < alpha <= 1", alpha=self.alpha)
        if f == Family.TREE and not ((self.b > 0 and self.a >= 1) or (self.a < 0 and self.b < 0)):
            raise DomainError("tree requires (b > 0, a >= 1) or (a < 0, b < 0)", a=self.a, b=self.b)
        if f == Family.CUSTOM:
            values = tuple(Fraction(v) for v in self.custom)
            object.__setattr__(self, "custom", values)
            if not values:
                raise DomainError("custom weight list is empty")
            if any(v < 0 for v in values):
                raise DomainError("custom weights must be non-negative")
        if not self.phi(1) > 0:
            raise DomainError("phi_1 must be positive", family=f.value)

    # Descriptors

    @property
    def radius(self) -> float:
        """Convergence radius x0 of phi."""
        f = self.family
        if f in (Family.LOGSERIES, Family.NEGBIN, Family.ENGEN, Family.POLYLOG, Family.NEWENGEN):
            return 1.0
        if f == Family.CAYLEY:
            return math.exp(-1.0)
        if f == Family.BINARYTREE:
            return 1.0 / math.sqrt(2.0)
        if f == Family.TREE:
            a, b = as_float(self.a), as_float(self.b)
            return (1.0 / (a * b)) * (1.0 - 1.0 / a) ** (a - 1.0)
        return math.inf

    @property
    def in_s(self) -> Union[bool, str, None]:
        return _IN_S[self.family]

    @property
    def levy_tail_support(self) -> bool:
        return self.family in (Family.LOGSERIES, Family.NEGBIN)

    @property
    def finite_activity(self) -> bool:
        """Lévy measure with finite total mass (compound-Poisson subordinator)."""
        return self.family == Family.NEGBIN

    @property
    def max_order(self) -> Optional[int]:
        return len(self.custom) if self.family == Family.CUSTOM else None

    @property
    def exact_capable(self) -> bool:
        f = self.family
        if f in (Family.LOGSERIES, Family.CAYLEY, Family.BELL, Family.LINEAR,
                 Family.BINARYTREE, Family.CUSTOM):
            return True
        if f in (Family.NEGBIN, Family.ENGEN, Family.NEWENGEN):
            return is_rational(self.alpha)
        if f == Family.TREE:
            return is_rational(self.a) and is_rational(self.b)
        if f == Family.POLYLOG:
            return is_rational(self.alpha) and Fraction(self.alpha).denominator == 1
        return False

    def check_order(self, K: int) -> None:
        if self.max_order is not None and K > self.max_order:
            raise WeightsExhaustedError(
                f"custom weights supply {self.max_order} terms, order {K} requested",
                requested=K, available=self.max_order,
            )

    def to_spec(self) -> str:
        """Family identifier in the CLI/config syntax."""
        f = self.family
        if f in _REQUIRED_PARAMS:
            params = ",".join(f"{name}={getattr(self, name)}" for name in _REQUIRED_PARAMS[f])
            return f"{f.value}:{params}"
        if f == Family.CUSTOM:
            return "custom:values=" + ";".join(str(v) for v in self.custom)
        return f.value

    # Coefficients

    def phi_exact(self, m: int) -> Optional[Fraction]:
        """phi_m as an exact rational, or None when the family has no rational form."""
        if m < 1:
            raise DomainError("weight index must be >= 1", m=m)
        f = self.family
        if f == Family.CUSTOM:
            self.check_order(m)
            return self.custom[m - 1]
        if not self.exact_capable:
            return None
        if f == Family.LOGSERIES:
            return Fraction(factorial(m - 1))
        if f == Family.NEGBIN:
            return Fraction(rising(Fraction(self.alpha), m))
        if f == Family.ENGEN:
            alpha = Fraction(self.alpha)
            return alpha * rising(1 - alpha, m - 1)
        if f == Family.CAYLEY:
            return Fraction(m ** (m - 1))
        if f == Family.TREE:
            a, b = Fraction(self.a), Fraction(self.b)
            value = Fraction(falling(a * m, m - 1)) * b ** (m - 1)
            if value < 0:
                raise DomainError("tree weights turned negative", m=m, a=self.a, b=self.b)
            return value
        if f == Family.POLYLOG:
            return Fraction(factorial(m), m ** int(self.alpha))
        if f == Family.BELL:
            return Fraction(1)
        if f == Family.LINEAR:
            return Fraction(1 if m == 1 else 0)
        if f == Family.NEWENGEN:
            return m * Fraction(rising(Fraction(self.alpha), m - 1))
        if f == Family.BINARYTREE:
            if m % 2 == 0:
                return Fraction(0)
            j = (m + 1) // 2
            catalan = math.comb(2 * (j - 1), j - 1) // j
            return Fraction(factorial(m) * catalan, 2 ** (j - 1))
        return None

    def log_phi(self, m: int) -> float:
        """log(phi_m), -inf for a zero weight."""
        return float(log_phi_array(self, m)[m])

    def phi(self, m: int) -> float:
        exact = self.phi_exact(m)
        if exact is not None:
            return float(exact)
        return math.exp(self.log_phi(m))

    def phi_exact_upto(self, K: int) -> Tuple[Fraction, ...]:
        """(phi_0, ..., phi_K) as rationals, phi_0 = 0."""
        self.check_order(K)
        if not self.exact_capable:
            raise DomainError(f"exact mode unavailable for {self.to_spec()}")
        return _phi_exact_upto(self, K)

    # Function values

    def phi_eval(self, x: float) -> float:
        """phi(x) for x below the radius of convergence."""
        self._check_point(x)
        if x == 0:
            return 0.0
        f = self.family
        if f == Family.LOGSERIES:
            return -math.log1p(-x)
        if f == Family.NEGBIN:
            return math.expm1(-as_float(self.alpha) * math.log1p(-x))
        if f == Family.ENGEN:
            return -math.expm1(as_float(self.alpha) * math.log1p(-x))
        if f == Family.CAYLEY:
            return float(-lambertw(-x, 0).real)
        if f == Family.TREE:
            return self._tree_eval(x)
        if f == Family.POLYLOG:
            return float(mpmath.polylog(as_float(self.alpha), x))
        if f == Family.MITTAGLEFFLER:
            return self._mittag_leffler_eval(x)
        if f == Family.BELL:
            return math.expm1(x)
        if f == Family.LINEAR:
            return x
        if f == Family.NEWENGEN:
            return x * math.exp(-as_float(self.alpha) * math.log1p(-x))
        if f == Family.BINARYTREE:
            return 2.0 * x / (1.0 + math.sqrt(1.0 - 2.0 * x * x))
        return self.phi_series(x)

    def phi_series(self, x: float, max_terms: int = 1_000_000) -> float:
        """phi(x) by summing the Taylor series to the configured relative tolerance."""
        if x == 0:
            return 0.0
        rtol = get_settings().series_rtol
        limit = max_terms if self.max_order is None else self.max_order
        total = 0.0
        quiet = 0
        log_abs_x = math.log(abs(x))
        chunk = 256
        start = 1
        while start <= limit:
            stop = min(start + chunk - 1, limit)
            logs = log_phi_array(self, stop)[start:stop + 1]
            m = np.arange(start, stop + 1)
            terms = np.exp(logs + m * log_abs_x - gammaln(m + 1.0))
            if x < 0:
                terms = np.where(m % 2 == 1, -terms, terms)
            for term in terms:
                total += term
                if abs(term) <= rtol * abs(total):
                    quiet += 1
                else:
                    quiet = 0
                if quiet >= 8:
                    return total
            start = stop + 1
            chunk = min(chunk * 2, 65536)
        if self.max_order is not None:
            return total
        raise DomainError("series did not converge", x=x, family=self.family.value)

    def phi_xderiv(self, x: float) -> float:
        """x * phi'(x)."""
        self._check_point(x)
        f = self.family
        if f == Family.LOGSERIES:
            return x / (1.0 - x)
        if f == Family.NEGBIN:
            alpha = as_float(self.alpha)
            return alpha * x * (1.0 - x) ** (-alpha - 1.0)
        if f == Family.ENGEN:
            alpha = as_float(self.alpha)
            return alpha * x * (1.0 - x) ** (alpha - 1.0)
        if f == Family.CAYLEY:
            value = self.phi_eval(x)
            return value / (1.0 - value)
        if f == Family.BELL:
            return x * math.exp(x)
        if f == Family.LINEAR:
            return x
        if f == Family.NEWENGEN:
            alpha = as_float(self.alpha)
            return x * (1.0 - x) ** (-alpha) + alpha * x * x * (1.0 - x) ** (-alpha - 1.0)
        return self._xderiv_series(x)

    # Lévy tail

    def levy_tail(self, t: float) -> float:
        """pi_bar(t): Lévy mass of the jumps above t."""
        self._require_levy_tail()
        if self.family == Family.LOGSERIES:
            if t <= 0:
                raise DomainError("log-series Lévy tail is infinite at t <= 0", t=t)
            return float(exp1(t))
        if t < 0:
            raise DomainError("Lévy tail requires t >= 0", t=t)
        return float(gammaincc(as_float(self.alpha), t))

    def levy_tail_array(self, t: np.ndarray) -> np.ndarray:
        if self.family == Family.LOGSERIES:
            return exp1(t)
        return gammaincc(as_float(self.alpha), t)

    def levy_tail_inverse(self, u: float) -> float:
        """t with pi_bar(t) = u, by bracketing on the decreasing tail."""
        self._require_levy_tail()
        if not u > 0:
            raise DomainError("Lévy tail inverse requires u > 0", u=u)
        if self.finite_activity:
            if u > 1:
                raise DomainError("u exceeds the total Lévy mass 1", u=u)
            if u == 1:
                return 0.0
        return float(invert_levy_tail(self, np.array([u]))[0])

    def levy_truncated_mean(self, t: float) -> float:
        """Integral of s pi(ds) over (0, t]: expected mass of jumps at most t per unit gamma."""
        self._require_levy_tail()
        if t <= 0:
            return 0.0
        if self.family == Family.LOGSERIES:
            return -math.expm1(-t)
        alpha = as_float(self.alpha)
        return alpha * float(gammainc(alpha + 1.0, t))

    # Internals

    def _check_point(self, x: float) -> None:
        x0 = self.radius
        if x >= x0:
            raise DomainError(f"x={x} is not below the radius of convergence {x0}", x=x)
        if self.in_s is False and abs(x) >= x0:
            raise DomainError(f"|x| must stay below {x0} for {self.family.value}", x=x)

    def _require_levy_tail(self) -> None:
        if not self.levy_tail_support:
            raise UnsupportedFamilyError(f"no Lévy tail implemented for {self.family.value}")

    def _tree_eval(self, x: float) -> float:
        a, b = as_float(self.a), as_float(self.b)
        if x > 0:
            return self.phi_series(x)
        # phi = x (1 + b phi)^a has a unique root on the negative side
        lower = -1.0 / b if b > 0 else -1.0
        if b < 0:
            while lower - x * (1.0 + b * lower) ** a > 0:
                lower *= 2.0
        return brentq(lambda y: y - x * (1.0 + b * y) ** a, lower, 0.0, xtol=1e-300, rtol=1e-15)

    def _mittag_leffler_eval(self, x: float) -> float:
        alpha = mpmath.mpf(as_float(self.alpha))
        with mpmath.workdps(60):
            total = mpmath.mpf(0)
            term_scale = mpmath.mpf(0)
            m = 1
            while True:
                term = mpmath.power(x, m) / mpmath.gamma(1 + m * alpha)
                total += term
                term_scale = max(term_scale, abs(term))
                if m > 2 and abs(term) < mpmath.mpf(10) ** -40 * max(term_scale, 1):
                    break
                m += 1
            return float(total)

    def _xderiv_series(self, x: float) -> float:
        if x == 0:
            return 0.0
        limit = self.max_order or 1_000_000
        rtol = get_settings().series_rtol
        total, m = 0.0, 1
        log_abs_x = math.log(abs(x))
        logs = log_phi_array(self, min(limit, 1024))
        while m <= limit:
            if m >= len(logs):
                logs = log_phi_array(self, min(limit, 2 * len(logs)))
            term = m * math.exp(logs[m] + m * log_abs_x - gammaln(m + 1.0))
            if x < 0 and m % 2 == 1:
                term = -term
            total += term
            if m > 8 and abs(term) <= rtol * abs(total) and self.max_order is None:
                break
            m += 1
        return total

    def __str__(self) -> str:
        return self.to_spec()


@lru_cache(maxsize=256)
def _phi_exact_upto(w: WeightSequence, K: int) -> Tuple[Fraction, ...]:
    return (Fraction(0),) + tuple(w.phi_exact(m) for m in range(1, K + 1))


@lru_cache(maxsize=256)
def log_phi_array(w: WeightSequence, K: int) -> np.ndarray:
    """log(phi_m) for m = 0..K, with log(phi_0) = -inf."""
    w.check_order(K)
    m = np.arange(K + 1, dtype=float)
    out = np.full(K + 1, NEG_INF)
    if K == 0:
        out.setflags(write=False)
        return out
    mm = m[1:]
    f = w.family
    with np.errstate(divide="ignore"):
        if f == Family.LOGSERIES:
            vals = gammaln(mm)
        elif f == Family.NEGBIN:
            alpha = as_float(w.alpha)
            vals = gammaln(alpha + mm) - gammaln(alpha)
        elif f == Family.ENGEN:
            alpha = as_float(w.alpha)
            vals = math.log(alpha) + gammaln(mm - alpha) - gammaln(1.0 - alpha)
        elif f == Family.CAYLEY:
            vals = (mm - 1.0) * np.log(mm)
        elif f == Family.TREE:
            a, b = as_float(w.a), as_float(w.b)
            am = a * mm
            if a >= 1:
                vals = gammaln(am + 1.0) - gammaln(am - mm + 2.0)
            else:
                vals = gammaln(-am + mm - 1.0) - gammaln(-am)
            vals = vals + (mm - 1.0) * math.log(abs(b))
        elif f == Family.POLYLOG:
            vals = gammaln(mm + 1.0) - as_float(w.alpha) * np.log(mm)
        elif f == Family.MITTAGLEFFLER:
            vals = gammaln(mm + 1.0) - gammaln(1.0 + mm * as_float(w.alpha))
        elif f == Family.BELL:
            vals = np.zeros_like(mm)
        elif f == Family.LINEAR:
            vals = np.where(mm == 1, 0.0, NEG_INF)
        elif f == Family.NEWENGEN:
            alpha = as_float(w.alpha)
            vals = np.log(mm) + gammaln(alpha + mm - 1.0) - gammaln(alpha)
        elif f == Family.BINARYTREE:
            j = (mm + 1.0) / 2.0
            n = j - 1.0
            log_catalan = gammaln(2.0 * n + 1.0) - gammaln(n + 2.0) - gammaln(n + 1.0)
            vals = np.where(mm % 2 == 1, gammaln(mm + 1.0) + log_catalan - n * math.log(2.0), NEG_INF)
        else:
            vals = np.log(np.array([float(v) for v in w.custom[:K]]))
    out[1:] = vals
    out.setflags(write=False)
    return out


def invert_levy_tail(w: WeightSequence, u: np.ndarray, iterations: int = 160) -> np.ndarray:
    """Vectorized inverse of pi_bar by bisection in log t.

    Entries with u at or above the total mass of a finite-activity tail map to 0.
    """
    u = np.asarray(u, dtype=float)
    lo = np.full(u.shape, math.log(1e-300))
    hi = np.full(u.shape, math.log(1e3))
    top = w.levy_tail_array(np.exp(lo))
    if not w.finite_activity and np.any(u > top):
        raise DomainError("u exceeds the representable range of the Lévy tail", u=float(u.max()))
    for _ in range(iterations):
        mid = 0.5 * (lo + hi)
        above = w.levy_tail_array(np.exp(mid)) > u
        lo = np.where(above, mid, lo)
        hi = np.where(above, hi, mid)
    t = np.exp(0.5 * (lo + hi))
    if w.finite_activity:
        t = np.where(u >= 1.0, 0.0, t)
    return t


def zr_minus_status(w: WeightSequence) -> Optional[bool]:
    """Whether sigma_k(theta) has only real non-positive roots, where this is known."""
    return _ZR_MINUS.get(w.family)


def parse_number(text: str) -> Fraction:
    try:
        return Fraction(text.strip())
    except (ValueError, ZeroDivisionError) as e:
        raise DomainError(f"cannot parse number {text!r}") from e


def load_custom_weights(path: Union[str, Path]) -> Tuple[Fraction, ...]:
    """Read a JSON array of non-negative decimal strings."""
    try:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as e:
        raise DomainError(f"cannot read custom weights from {path}: {e}") from e
    if not isinstance(raw, list):
        raise DomainError("custom weights file must hold a JSON array")
    return tuple(parse_number(str(item)) for item in raw)


def parse_family(family_id: str) -> WeightSequence:
    """Build a WeightSequence from an identifier such as ``negbin:alpha=0.5``."""
    name, _, rest = family_id.strip().partition(":")
    try:
        family = Family(name.lower())
    except ValueError:
        raise DomainError(f"unknown family {name!r}", family=name) from None
    params = {}
    for item in filter(None, (p.strip() for p in rest.split(","))):
        key, sep, value = item.partition("=")
        if not sep:
            raise DomainError(f"malformed family parameter {item!r}")
        params[key.strip().lower()] = value.strip()
    if family == Family.CUSTOM:
        if "file" in params:
            return WeightSequence(family, custom=load_custom_weights(params["file"]))
        if "values" in params:
            return WeightSequence(family, custom=tuple(parse_number(v) for v in params["values"].split(";")))
        raise DomainError("custom family needs file=... or values=...")
    allowed = set(_REQUIRED_PARAMS.get(family, ()))
    unknown = set(params) - allowed
    if unknown:
        raise DomainError(f"unexpected parameters {sorted(unknown)} for {family.value}")
    return WeightSequence(family, **{key: parse_number(value) for key, value in params.items()})
