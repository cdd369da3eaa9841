"""Seeded samplers: sequential occupancy draws, compound-Poisson rejection,
subordinator jumps and length-biased estimates of the star-limit laws."""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Dict, List, Optional, Tuple

import numpy as np
from scipy.optimize import brentq
from scipy.special import gammaln

from gibbs_occ.config import get_settings
from gibbs_occ.errors import ContractError, DiagnosticError, DomainError, UnsupportedFamilyError
from gibbs_occ.occupancy import OccupancySample, component_pmf
from gibbs_occ.starlimit import STATISTICS, StarConfig
from gibbs_occ.weights import WeightSequence, invert_levy_tail, log_phi_array

logger = logging.getLogger(__name__)

MIN_ACCEPTANCE = 1e-6
REJECTION_BATCH = 4096


@dataclass(frozen=True)
class RngStream:
    """A reproducible random stream identified by (seed, stream id)."""

    seed: int
    stream: int = 0

    def generator(self) -> np.random.Generator:
        sequence = np.random.SeedSequence(self.seed, spawn_key=(self.stream,))
        return np.random.Generator(np.random.PCG64(sequence))


def _generator(rng) -> np.random.Generator:
    if isinstance(rng, RngStream):
        return rng.generator()
    if isinstance(rng, np.random.Generator):
        return rng
    if rng is None:
        return RngStream(get_settings().default_seed).generator()
    return RngStream(int(rng)).generator()


# Exact sequential sampler


@lru_cache(maxsize=4096)
def _component_probabilities(w: WeightSequence, theta, n: int, k: int) -> Tuple[np.ndarray, np.ndarray]:
    law = component_pmf(w, theta, n, k)
    probs = law.as_array()
    return np.array(law.support), probs / probs.sum()


def sample_occupancy_batch(w: WeightSequence, theta, n: int, k: int, size: int, rng=None) -> np.ndarray:
    """size x n array of exact draws, one box at a time from the component law of the remaining balls."""
    if n < 1 or k < 0:
        raise DomainError("need n >= 1 and k >= 0", n=n, k=k)
    gen = _generator(rng)
    counts = np.zeros((size, n), dtype=np.int64)
    remaining = np.full(size, k, dtype=np.int64)
    for box in range(n - 1):
        boxes_left = n - box
        for r in np.unique(remaining):
            rows = np.flatnonzero(remaining == r)
            if r == 0:
                continue
            support, probs = _component_probabilities(w, theta, boxes_left, int(r))
            counts[rows, box] = gen.choice(support, size=rows.size, p=probs)
        remaining -= counts[:, box]
    counts[:, n - 1] = remaining
    return counts


def sample_occupancy_exact(w: WeightSequence, theta, n: int, k: int, rng=None) -> OccupancySample:
    """One exact draw of (K(1), ..., K(n))."""
    return OccupancySample.from_counts(sample_occupancy_batch(w, theta, n, k, 1, rng)[0])


# Compound-Poisson abundances


def _check_x(w: WeightSequence, x: float) -> None:
    if not 0 < x < w.radius:
        raise DomainError(f"x must lie in (0, {w.radius})", x=x)


@lru_cache(maxsize=256)
def jump_pmf(w: WeightSequence, x: float) -> Tuple[np.ndarray, np.ndarray]:
    """Support and probabilities of a single jump, phi_m x^m / (phi(x) m!), with the tail truncated."""
    _check_x(w, x)
    settings = get_settings()
    log_norm = math.log(w.phi_eval(x))
    size = 64
    while True:
        top = size if w.max_order is None else min(size, w.max_order)
        m = np.arange(1, top + 1)
        logs = log_phi_array(w, top)[1:] + m * math.log(x) - gammaln(m + 1.0) - log_norm
        probs = np.exp(logs)
        covered = probs.sum()
        if 1.0 - covered < settings.jump_tail_mass or top == w.max_order:
            break
        if size >= settings.max_jump_support:
            raise DiagnosticError("jump pmf support cap reached before the tail mass target",
                                  x=x, support=size, uncovered=1.0 - covered)
        size = min(2 * size, settings.max_jump_support)
    keep = np.flatnonzero(probs > 0)
    logger.debug(f"jump pmf of {w} at x={x}: {m[keep][-1]} atoms, uncovered mass {1.0 - covered:.3e}")
    return m[keep], probs[keep] / probs[keep].sum()


def sample_xi_batch(w: WeightSequence, theta, x: float, size: int, rng=None) -> np.ndarray:
    """size independent draws of xi = sum of a Poisson(theta phi(x)) number of jumps."""
    gen = _generator(rng)
    support, probs = jump_pmf(w, float(x))
    counts = gen.poisson(float(theta) * w.phi_eval(float(x)), size=size)
    jumps = gen.choice(support, size=int(counts.sum()), p=probs)
    owner = np.repeat(np.arange(size), counts)
    return np.bincount(owner, weights=jumps, minlength=size).astype(np.int64)


def sample_xi(w: WeightSequence, theta, x: float, rng=None) -> int:
    return int(sample_xi_batch(w, theta, x, 1, rng)[0])


def tune_x(w: WeightSequence, theta, n: int, k: int) -> float:
    """x solving theta x phi'(x) = k / n."""
    target = k / (n * float(theta))
    x0 = w.radius
    hi = x0 * (1.0 - 1e-9) if math.isfinite(x0) else 1.0
    if not math.isfinite(x0):
        while w.phi_xderiv(hi) < target:
            hi *= 2.0
    elif w.phi_xderiv(hi) < target:
        return hi
    x = brentq(lambda v: w.phi_xderiv(v) - target, 0.0, hi, xtol=1e-14, rtol=1e-12)
    logger.debug(f"tuned x={x} for n={n}, k={k}")
    return x


def sample_occupancy_rejection_batch(w: WeightSequence, theta, n: int, k: int, size: int,
                                     x: Optional[float] = None, rng=None) -> Tuple[np.ndarray, float]:
    """size accepted draws of (xi_1, ..., xi_n | sum = k) and the observed acceptance rate."""
    if n < 1 or k < 0:
        raise DomainError("need n >= 1 and k >= 0", n=n, k=k)
    if k == 0:
        return np.zeros((size, n), dtype=np.int64), 1.0
    gen = _generator(rng)
    x = tune_x(w, theta, n, k) if x is None else float(x)
    _check_x(w, x)
    accepted: List[np.ndarray] = []
    have, attempts = 0, 0
    while have < size:
        draws = sample_xi_batch(w, theta, x, REJECTION_BATCH * n, gen).reshape(REJECTION_BATCH, n)
        attempts += REJECTION_BATCH
        hits = draws[draws.sum(axis=1) == k]
        accepted.append(hits)
        have += hits.shape[0]
        if attempts >= 1_000_000 and have / attempts < MIN_ACCEPTANCE:
            raise DiagnosticError("rejection acceptance rate below 1e-6", x=x, attempts=attempts, accepted=have)
    rate = have / attempts
    if rate < 1e-3:
        logger.warning(f"low rejection acceptance {rate:.2e} for n={n}, k={k}, x={x}")
    return np.concatenate(accepted)[:size], rate


def sample_occupancy_rejection(w: WeightSequence, theta, n: int, k: int, x: Optional[float] = None,
                               rng=None) -> OccupancySample:
    counts, _ = sample_occupancy_rejection_batch(w, theta, n, k, 1, x, rng)
    return OccupancySample.from_counts(counts[0])


# Subordinator jumps


@dataclass(frozen=True)
class SubordinatorJumps:
    """Ranked jumps above a cutoff of a subordinator run to time gamma."""

    gamma: float
    cutoff: float
    gamma_points: np.ndarray
    jumps: np.ndarray
    total: float
    truncation_bound: float
    finite_activity: bool = False

    @property
    def count(self) -> int:
        return int(self.jumps.size)

    def frequencies(self) -> np.ndarray:
        if self.total <= 0:
            return np.zeros(0)
        return self.jumps / self.total


def default_cutoff(w: WeightSequence) -> float:
    """Cutoff whose discarded small-jump mass is below 0.1% of E(Y) per unit gamma."""
    if not w.levy_tail_support:
        raise UnsupportedFamilyError(f"no Lévy tail implemented for {w.family.value}")
    if w.finite_activity:
        return 0.0
    target = 1e-3 * w.phi(1)
    return math.exp(brentq(lambda s: w.levy_truncated_mean(math.exp(s)) - 0.5 * target, -700.0, 0.0))


def sample_subordinator(w: WeightSequence, cfg: StarConfig, cutoff: Optional[float] = None,
                        rng=None) -> SubordinatorJumps:
    """Jumps pi_bar^{-1}(Gamma_k / gamma) for the Poisson points Gamma_k below gamma pi_bar(cutoff)."""
    if not w.levy_tail_support:
        raise UnsupportedFamilyError(f"no Lévy tail implemented for {w.family.value}")
    t = default_cutoff(w) if cutoff is None else float(cutoff)
    if t < 0 or (t == 0 and not w.finite_activity):
        raise DomainError("cutoff must be positive for infinite-activity families", cutoff=t)
    gen = _generator(rng)
    gamma = float(cfg.gamma)
    level = gamma * w.levy_tail(t)
    cap = get_settings().max_jumps

    chunks: List[np.ndarray] = []
    last = 0.0
    chunk = int(level + 5.0 * math.sqrt(level) + 16)
    while last <= level:
        points = last + np.cumsum(gen.exponential(1.0, size=chunk))
        chunks.append(points)
        last = float(points[-1])
        if sum(c.size for c in chunks) > cap + chunk:
            raise DiagnosticError("subordinator jump count exceeds the memory cap", cap=cap, cutoff=t)
    points = np.concatenate(chunks)
    points = points[points < level]
    if points.size > cap:
        raise DiagnosticError("subordinator jump count exceeds the memory cap", cap=cap, cutoff=t)

    jumps = invert_levy_tail(w, points / gamma) if points.size else np.zeros(0)
    jumps = np.minimum.accumulate(jumps) if jumps.size else jumps
    return SubordinatorJumps(
        gamma=gamma,
        cutoff=t,
        gamma_points=points,
        jumps=jumps,
        total=float(jumps.sum()),
        truncation_bound=gamma * w.levy_truncated_mean(t),
        finite_activity=w.finite_activity,
    )


@dataclass(frozen=True)
class RankedFrequencySlopes:
    exponential_rate: float
    power_exponent: float
    ranks: int


def ranked_frequency_slopes(jumps: np.ndarray, max_rank: Optional[int] = None) -> RankedFrequencySlopes:
    """Slopes of -log S_(k) against k and of log S_(k) against log k."""
    jumps = np.asarray(jumps, dtype=float)
    if max_rank is not None:
        jumps = jumps[:max_rank]
    jumps = jumps[jumps > 0]
    if jumps.size < 3:
        raise ContractError("need at least three positive jumps", jumps=jumps.size)
    freqs = jumps / jumps.sum()
    ranks = np.arange(1, jumps.size + 1, dtype=float)
    rate = np.polyfit(ranks, -np.log(freqs), 1)[0]
    exponent = np.polyfit(np.log(ranks), np.log(freqs), 1)[0]
    return RankedFrequencySlopes(float(rate), float(exponent), int(jumps.size))


# Length-biased estimates


@dataclass
class BiasedEstimate:
    """Weighted estimate of a star-limit statistic from subordinator runs."""

    statistic: str
    estimate: float
    se: float
    ess: float
    unweighted: float
    truncation_bound: float
    runs: int
    cutoff: float
    finite_activity: bool = False
    diagnostics: Dict[str, float] = field(default_factory=dict)


def _statistic_value(statistic: str, counts: np.ndarray, k: int, p: Optional[int], m: Optional[int]) -> float:
    if statistic == "all-same-species":
        return float(counts.size > 0 and counts.max() == k)
    if statistic == "pk":
        return float(np.count_nonzero(counts) == p)
    return float(counts.size >= m and counts[m - 1] == k)


def _biased_runs(w: WeightSequence, cfg: StarConfig, k: int, statistic: str, cutoff: float, runs: int,
                 stream: RngStream, p: Optional[int], m: Optional[int]) -> Tuple[np.ndarray, np.ndarray]:
    gen = stream.generator()
    values = np.zeros(runs)
    log_weights = np.full(runs, -np.inf)
    for i in range(runs):
        path = sample_subordinator(w, cfg, cutoff, gen)
        if path.total <= 0:
            continue
        counts = gen.multinomial(k, path.frequencies())
        values[i] = _statistic_value(statistic, counts, k, p, m)
        log_weights[i] = k * math.log(path.total)
    return values, log_weights


def star_biased_estimate(w: WeightSequence, cfg: StarConfig, k: int, statistic: str,
                         cutoff: Optional[float] = None, runs: int = 10_000, seed: Optional[int] = None,
                         p: Optional[int] = None, m: Optional[int] = None,
                         threads: Optional[int] = None) -> BiasedEstimate:
    """Estimate a statistic of the star-limit sample by multinomial draws from normalized jumps, weighted by Y^k."""
    if statistic not in STATISTICS:
        raise DomainError(f"unknown statistic {statistic!r}", allowed=",".join(STATISTICS))
    if statistic == "pk" and (p is None or not 1 <= p <= k):
        raise DomainError("statistic pk needs 1 <= p <= k", p=p, k=k)
    if statistic == "rank-m-only" and (m is None or m < 1):
        raise DomainError("statistic rank-m-only needs m >= 1", m=m)
    if k < 1 or runs < 1:
        raise DomainError("need k >= 1 and runs >= 1", k=k, runs=runs)
    if w.finite_activity:
        logger.warning(f"{w} has finite Lévy mass; biased-sampling estimates are reported without guarantee")
    settings = get_settings()
    t = default_cutoff(w) if cutoff is None else float(cutoff)
    seed = settings.default_seed if seed is None else seed
    workers = max(1, min(threads or settings.threads, settings.threads, runs))
    shares = [runs // workers + (1 if i < runs % workers else 0) for i in range(workers)]

    logger.info(f"star-biased {statistic} for {w}, gamma={cfg.gamma}, k={k}: {runs} runs on {workers} workers")
    with ThreadPoolExecutor(max_workers=workers) as pool:
        futures = [
            pool.submit(_biased_runs, w, cfg, k, statistic, t, share, RngStream(seed, i), p, m)
            for i, share in enumerate(shares)
        ]
        results = [f.result() for f in futures]
    values = np.concatenate([r[0] for r in results])
    log_weights = np.concatenate([r[1] for r in results])

    if not np.isfinite(log_weights).any():
        raise DiagnosticError("every run produced an empty subordinator path", runs=runs)
    weights = np.exp(log_weights - log_weights.max())
    total = weights.sum()
    estimate = float(np.dot(weights, values) / total)
    se = float(math.sqrt(np.dot(weights ** 2, (values - estimate) ** 2)) / total)
    ess = float(total ** 2 / np.dot(weights, weights))
    if ess < settings.min_ess:
        raise DiagnosticError(
            f"effective sample size {ess:.1f} below {settings.min_ess}; increase runs or reduce k",
            ess=ess, runs=runs, k=k,
        )
    return BiasedEstimate(
        statistic=statistic,
        estimate=estimate,
        se=se,
        ess=ess,
        unweighted=float(values.mean()),
        truncation_bound=float(cfg.gamma) * w.levy_truncated_mean(t),
        runs=runs,
        cutoff=t,
        finite_activity=w.finite_activity,
        diagnostics={"workers": workers, "empty_paths": int(np.count_nonzero(~np.isfinite(log_weights)))},
    )
