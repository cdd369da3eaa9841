"""Identity and Monte Carlo suites run by ``verify``."""

import logging
import math
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from typing import Any, Callable, Dict, Iterable, List, Optional, Sequence

import numpy as np
from scipy import stats

from gibbs_occ.bellpoly import (
    N1_KINDS,
    bell_phi_bruteforce,
    bell_sigma_alternating,
    bell_sigma_power_series,
    bell_triangle_phi,
    closed_form_triangle,
    lah_triangle,
    n1_identity,
    sigma_bell_triangle,
    sigma_convolution,
    sigma_prime,
    sigma_prime_recurrence,
    sigma_table,
)
from gibbs_occ.combinatorics import aff_vectors, rising
from gibbs_occ.errors import GibbsOccError
from gibbs_occ.occupancy import (
    aff_factorial_moments,
    aff_pmf,
    component_pmf,
    enumerate_oracle,
    pnk_pmf,
    pnk_pmf_alternating,
)
from gibbs_occ.sample import (
    RngStream,
    sample_occupancy_batch,
    sample_occupancy_rejection_batch,
    sample_subordinator,
    sample_xi_batch,
    star_biased_estimate,
)
from gibbs_occ.starlimit import StarConfig, analytic_target
from gibbs_occ.weights import Family, WeightSequence, parse_family

logger = logging.getLogger(__name__)

IDENTITY_FAMILIES = ("logseries", "negbin:alpha=2", "engen:alpha=1/2", "cayley", "tree:a=2,b=1",
                     "newengen:alpha=1/2", "linear")
CLOSED_FORM_FAMILIES = (Family.LOGSERIES, Family.NEGBIN, Family.ENGEN, Family.CAYLEY, Family.TREE,
                        Family.NEWENGEN, Family.LINEAR)
EXACT_THETAS = (Fraction(1, 2), Fraction(1), Fraction(7, 3))
P_THRESHOLD = 1e-3


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str = ""


@dataclass
class SuiteReport:
    """Outcome of a verification suite."""

    suite: str
    checks: List[CheckResult] = field(default_factory=list)
    parameters: Dict[str, Any] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def add(self, name: str, passed: bool, detail: str = "") -> None:
        self.checks.append(CheckResult(name, bool(passed), detail))
        if not passed:
            logger.warning(f"{self.suite}: {name} failed {detail}")

    def run(self, name: str, check: Callable[[], Any]) -> None:
        """Run a check that returns (passed, detail) or raises."""
        try:
            passed, detail = check()
        except GibbsOccError as e:
            passed, detail = False, f"{e.code}: {e.message}"
        self.add(name, passed, detail)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "suite": self.suite,
            "passed": self.passed,
            "parameters": self.parameters,
            "checks": [asdict(c) for c in self.checks],
        }


def _rows_equal(a: Sequence[Sequence[Fraction]], b: Sequence[Sequence[Fraction]]) -> bool:
    return [tuple(r) for r in a] == [tuple(r) for r in b]


def _triangle_rows(bt, K: int) -> List[tuple]:
    return [tuple(bt.exact_value(k, p) for p in range(k + 1)) for k in range(K + 1)]


# Identity suite


def _closed_sigma(w: WeightSequence, K: int):
    mismatches = []
    for theta in EXACT_THETAS:
        st = sigma_table(w, theta, K, exact=True)
        for k in range(K + 1):
            if w.family == Family.LOGSERIES:
                expected = Fraction(rising(theta, k))
            else:
                expected = Fraction(1) if k == 0 else theta * (k + theta) ** (k - 1)
            if st.exact_value(k) != expected:
                mismatches.append((str(theta), k))
    return not mismatches, f"mismatches={mismatches[:5]}"


def _bell_checks(report: SuiteReport, w: WeightSequence, family_id: str, K: int) -> None:
    bt = bell_triangle_phi(w, K, exact=True)
    if w.family in CLOSED_FORM_FAMILIES:
        report.run(f"{family_id}: Bell triangle vs closed form",
                   lambda: (_rows_equal(_triangle_rows(bt, K), closed_form_triangle(w, K)), f"K={K}"))
    small = min(K, 8)
    report.run(f"{family_id}: Bell triangle vs composition sum", lambda: (
        all(bt.exact_value(k, l) == bell_phi_bruteforce(w, k, l)
            for k in range(small + 1) for l in range(k + 1)), f"K={small}"))

    theta, theta2 = Fraction(1), Fraction(1, 2)
    report.run(f"{family_id}: sigma convolution", lambda: (
        sigma_convolution(w, theta, theta2, K)
        == [sigma_table(w, theta + theta2, K, exact=True).exact_value(k) for k in range(K + 1)], f"K={K}"))

    routes = _triangle_rows(sigma_bell_triangle(w, theta, K, exact=True), K)
    report.run(f"{family_id}: sigma triangle by power series",
               lambda: (_rows_equal(routes, bell_sigma_power_series(w, theta, K)), f"K={K}"))
    report.run(f"{family_id}: sigma triangle by alternating sum",
               lambda: (_rows_equal(routes, bell_sigma_alternating(w, theta, K)), f"K={K}"))
    report.run(f"{family_id}: sigma derivative recurrence", lambda: (
        sigma_prime_recurrence(w, theta, K, exact=True)
        == [sigma_prime(bt, theta, k) for k in range(K + 1)], f"K={K}"))


def _occupancy_checks(report: SuiteReport, w: WeightSequence, family_id: str, K: int) -> None:
    theta, n = Fraction(1), 3
    k_top = min(K, 8)

    def normalization():
        bad = []
        for k in range(1, k_top + 1):
            total = sum(
                (aff_pmf(w, theta, n, k, aff, sum(aff), exact=True) for aff in aff_vectors(k)),
                Fraction(0),
            )
            if total != 1:
                bad.append(k)
        return not bad, f"failing k={bad}"

    def mean_aff():
        bad = []
        for k in range(1, k_top + 1):
            comp = component_pmf(w, theta, n, k, exact=True)
            for i in range(1, k + 1):
                r = [0] * k
                r[i - 1] = 1
                if aff_factorial_moments(w, theta, n, k, r, exact=True) != n * comp[i]:
                    bad.append((k, i))
        return not bad, f"failing (k, i)={bad[:5]}"

    def moment_vs_law():
        bad = []
        for k in range(2, min(K, 6) + 1):
            law = {aff: aff_pmf(w, theta, n, k, aff, sum(aff), exact=True) for aff in aff_vectors(k)}
            for r in ([1, 1], [2], [0, 1], [3]):
                kappa = sum(i * x for i, x in enumerate(r, start=1))
                if sum(r) > n or kappa > k:
                    continue
                direct = sum(
                    (q * math.prod(math.perm(aff[i], x) for i, x in enumerate(r) if i < len(aff))
                     for aff, q in law.items()),
                    Fraction(0),
                )
                if direct != aff_factorial_moments(w, theta, n, k, r, exact=True):
                    bad.append((k, tuple(r)))
        return not bad, f"failing (k, r)={bad[:5]}"

    def alternating_pnk():
        return all(pnk_pmf(w, theta, n, k, exact=True) == pnk_pmf_alternating(w, theta, n, k)
                   for k in range(1, k_top + 1)), f"n={n}"

    report.run(f"{family_id}: frequency-of-frequencies normalization", normalization)
    report.run(f"{family_id}: E A(i) = n P(K(1) = i)", mean_aff)
    report.run(f"{family_id}: factorial moments vs law", moment_vs_law)
    report.run(f"{family_id}: P_n,k law by alternating sum", alternating_pnk)


def run_identity_suite(k_max: int = 10, families: Optional[Iterable[str]] = None) -> SuiteReport:
    """Exact identities between independent computation routes."""
    family_ids = list(families) if families else list(IDENTITY_FAMILIES)
    weights = [(family_id, parse_family(family_id)) for family_id in family_ids]
    report = SuiteReport("identities", parameters={"k_max": k_max, "families": family_ids})
    logger.info(f"identity suite: k_max={k_max}, {len(family_ids)} families")

    for family_id, w in weights:
        if w.family in (Family.LOGSERIES, Family.CAYLEY):
            report.run(f"{family_id}: closed-form sigma", lambda w=w: _closed_sigma(w, k_max))
        _bell_checks(report, w, family_id, k_max)
        _occupancy_checks(report, w, family_id, k_max)

    if any(w.family == Family.LOGSERIES for _, w in weights):
        w = parse_family("logseries")
        report.run("logseries: sigma triangle at theta=1 is Lah", lambda: (
            _rows_equal(_triangle_rows(sigma_bell_triangle(w, Fraction(1), k_max, exact=True), k_max),
                        lah_triangle(k_max)), f"K={k_max}"))
    for kind in N1_KINDS:
        report.run(f"inner {kind}: Bell polynomial of x exp(phi*)", lambda kind=kind: (
            lambda sides: (sides[0] == sides[1], f"K={k_max}"))(n1_identity(kind, Fraction(1), k_max)))

    logger.info(f"identity suite: {sum(c.passed for c in report.checks)}/{len(report.checks)} passed")
    return report


# Monte Carlo suite


def _empirical_tv(pmf: Dict[Any, float], samples: Iterable[Any], size: int) -> float:
    counts: Dict[Any, int] = {}
    for s in samples:
        counts[s] = counts.get(s, 0) + 1
    keys = set(pmf) | set(counts)
    return 0.5 * sum(abs(counts.get(key, 0) / size - float(pmf.get(key, 0))) for key in keys)


def _contingency_p(a: np.ndarray, b: np.ndarray) -> float:
    values = np.union1d(a, b)
    table = np.array([[np.count_nonzero(a == v) for v in values], [np.count_nonzero(b == v) for v in values]])
    table = table[:, table.sum(axis=0) > 0]
    if table.shape[1] < 2:
        return 1.0
    return float(stats.chi2_contingency(table)[1])


def run_montecarlo_suite(seed: int = 0, runs: int = 200_000, subordinator_runs: int = 10_000,
                         biased_runs: int = 10_000) -> SuiteReport:
    """Seed-pinned statistical checks of every sampler against its analytic law."""
    report = SuiteReport("montecarlo", parameters={
        "seed": seed, "runs": runs, "subordinator_runs": subordinator_runs, "biased_runs": biased_runs,
    })
    logseries = parse_family("logseries")
    logger.info(f"Monte Carlo suite: seed={seed}, runs={runs}")

    def sequential_vs_oracle():
        oracle = enumerate_oracle(logseries, Fraction(1), 3, 4)
        draws = sample_occupancy_batch(logseries, 1, 3, 4, runs, RngStream(seed, 1))
        law = {c: q for c, q in zip(oracle.compositions, oracle.probabilities)}
        tv = _empirical_tv(law, map(tuple, draws.tolist()), runs)
        return tv < 0.01, f"TV={tv:.4g}"

    def linear_multinomial():
        linear = parse_family("linear")
        n, k, size = 3, 5, min(runs, 100_000)
        draws = sample_occupancy_batch(linear, 1, n, k, size, RngStream(seed, 2))
        observed = np.bincount(draws[:, 0], minlength=k + 1)
        expected = stats.binom.pmf(np.arange(k + 1), k, 1.0 / n) * size
        p = stats.chisquare(observed, expected).pvalue
        return p > P_THRESHOLD, f"p={p:.4g}"

    def rejection_vs_sequential():
        n, k, size = 4, 6, min(runs, 100_000)
        exact = sample_occupancy_batch(logseries, 1, n, k, size, RngStream(seed, 3))
        rejected, rate = sample_occupancy_rejection_batch(logseries, 1, n, k, size, rng=RngStream(seed, 4))
        p = _contingency_p(np.count_nonzero(exact, axis=1), np.count_nonzero(rejected, axis=1))
        return p > P_THRESHOLD, f"p={p:.4g}, acceptance={rate:.3g}"

    def xi_zero_mass():
        theta, x, size = 1.0, 0.5, min(runs, 100_000)
        draws = sample_xi_batch(logseries, theta, x, size, RngStream(seed, 5))
        target = math.exp(-theta * logseries.phi_eval(x))
        observed = np.mean(draws == 0)
        se = math.sqrt(target * (1.0 - target) / size)
        return abs(observed - target) < 3 * se, f"observed={observed:.5f}, target={target:.5f}"

    def subordinator_count():
        cfg, t = StarConfig(2.0), 0.01
        gen = RngStream(seed, 6).generator()
        counts = np.array([sample_subordinator(logseries, cfg, t, gen).count for _ in range(subordinator_runs)])
        target = 2.0 * logseries.levy_tail(t)
        se = math.sqrt(target / subordinator_runs)
        return abs(counts.mean() - target) < 3 * se, f"mean={counts.mean():.4f}, target={target:.4f}"

    def biased(family_id: str, cutoff: Optional[float]):
        def check():
            w = parse_family(family_id)
            cfg, k = StarConfig(1.0), 3
            result = star_biased_estimate(w, cfg, k, "all-same-species", cutoff, biased_runs, seed)
            target = analytic_target(w, cfg, k, "all-same-species")
            ok = abs(result.estimate - target) < 3 * result.se + result.truncation_bound
            return ok, f"estimate={result.estimate:.4f}±{result.se:.4f}, target={target:.4f}"
        return check

    report.run("sequential sampler vs oracle (logseries n=3 k=4)", sequential_vs_oracle)
    report.run("sequential sampler on linear weights is multinomial", linear_multinomial)
    report.run("rejection vs sequential on P_n,k (logseries n=4 k=6)", rejection_vs_sequential)
    report.run("xi zero mass", xi_zero_mass)
    report.run("subordinator jump count mean", subordinator_count)
    report.run("biased all-same-species (logseries)", biased("logseries", None))
    report.run("biased all-same-species (negbin alpha=1)", biased("negbin:alpha=1", 0.0))

    logger.info(f"Monte Carlo suite: {sum(c.passed for c in report.checks)}/{len(report.checks)} passed")
    return report
