import math
from fractions import Fraction

import pytest

from gibbs_occ.bellpoly import bell_triangle_phi, sigma_prime, sigma_table
from gibbs_occ.combinatorics import aff_vectors, falling, positive_compositions, rising
from gibbs_occ.errors import ContractError, DomainError
from gibbs_occ.occupancy import pnk_pmf
from gibbs_occ.starlimit import (
    StarConfig,
    analytic_target,
    single_species_rank_prob,
    star_aff_conditional,
    star_aff_moments,
    star_aff_pmf,
    star_joint_conditional,
    star_joint_pmf,
    star_mean,
    star_pgf,
    star_pnk_pmf,
    star_pnk_recursion,
    star_sigma_prime,
)
from gibbs_occ.weights import parse_family


def test_star_config_validation():
    with pytest.raises(DomainError):
        StarConfig(0.0)
    with pytest.raises(DomainError):
        StarConfig(1.0, K=0)


def test_star_joint_single_species(cayley):
    gamma, k = Fraction(2), 6
    expected = gamma * cayley.phi_exact(k) / sigma_table(cayley, gamma, k, exact=True).exact_value(k)
    assert star_joint_pmf(cayley, StarConfig(gamma), (k,), exact=True) == expected


@pytest.mark.parametrize("k", [1, 4, 8])
def test_star_joint_total_mass(exact_family, k):
    cfg = StarConfig(Fraction(3, 2))
    total = Fraction(0)
    for p in range(1, k + 1):
        for counts in positive_compositions(k, p):
            total += star_joint_pmf(exact_family, cfg, counts, exact=True)
    assert total == 1


@pytest.mark.parametrize("family_id", ["logseries", "cayley", "engen:alpha=1/2", "mittagleffler:alpha=1/2"])
def test_star_joint_conditional_free_of_gamma(family_id):
    w = parse_family(family_id)
    counts = (3, 1, 2)
    values = []
    for gamma in (0.5, 3.0):
        cfg = StarConfig(gamma)
        values.append(star_joint_pmf(w, cfg, counts) / star_pnk_pmf(w, cfg, 6)[3])
    assert values[0] == pytest.approx(values[1], rel=1e-12)
    assert star_joint_conditional(w, counts) == pytest.approx(values[0], rel=1e-12)


def test_star_joint_conditional_logseries_is_ewens(logseries):
    counts = (3, 1, 2)
    k, p = 6, 3
    stirling_first = bell_triangle_phi(logseries, k, exact=True).exact_value(k, p)
    expected = Fraction(math.factorial(k), math.factorial(p) * stirling_first) / math.prod(counts)
    assert star_joint_conditional(logseries, counts, exact=True) == expected


def test_star_joint_rejects_zero_counts(logseries):
    with pytest.raises(ContractError):
        star_joint_pmf(logseries, StarConfig(1.0), (2, 0, 1))
    with pytest.raises(DomainError):
        star_joint_pmf(logseries, StarConfig(1.0, K=4), (3, 2))


def test_star_pnk_pmf(exact_family):
    gamma, k = Fraction(5, 3), 9
    law = star_pnk_pmf(exact_family, StarConfig(gamma), k, exact=True)
    sigma = sigma_table(exact_family, gamma, k, exact=True).exact_value(k)
    assert law.total() == 1
    assert law[k] == (gamma * exact_family.phi_exact(1)) ** k / sigma
    assert law.support == tuple(range(1, k + 1))


def test_star_pnk_pmf_small_orders(cayley):
    assert star_pnk_pmf(cayley, StarConfig(2.0), 1).rows() == [(1, pytest.approx(1.0))]
    assert star_pnk_pmf(cayley, StarConfig(2.0), 0).rows() == [(0, 1.0)]


@pytest.mark.parametrize("family_id", ["logseries", "cayley", "negbin:alpha=1/2", "polylog:alpha=2", "bell"])
@pytest.mark.parametrize("u", [0.3, 0.7, 1.0])
def test_star_pgf_identity(family_id, u):
    w = parse_family(family_id)
    cfg = StarConfig(1.7)
    law = star_pnk_pmf(w, cfg, 10)
    assert law.total() == pytest.approx(1.0, abs=1e-12)
    direct = math.fsum(u ** p * q for p, q in law.rows())
    assert star_pgf(w, cfg, 10, u) == pytest.approx(direct, rel=1e-10)


@pytest.mark.parametrize("family_id", ["logseries", "cayley", "engen:alpha=1/2"])
def test_star_mean(family_id):
    w = parse_family(family_id)
    cfg = StarConfig(2.3)
    assert star_mean(w, cfg, 12) == pytest.approx(star_pnk_pmf(w, cfg, 12).mean(), rel=1e-10)


@pytest.mark.parametrize("family_id", ["logseries", "cayley"])
@pytest.mark.parametrize("gamma", [0.5, 2.0])
def test_star_limit_of_finite_laws(family_id, gamma):
    w = parse_family(family_id)
    k, n = 10, 10 ** 4
    star = star_pnk_pmf(w, StarConfig(gamma), k)
    assert pnk_pmf(w, gamma / n, n, k).total_variation(star) < 2e-3


@pytest.mark.parametrize("family_id", ["logseries", "cayley", "negbin:alpha=2", "engen:alpha=1/2"])
def test_star_limit_convergence_is_monotone(family_id):
    w = parse_family(family_id)
    gamma, k = 1.5, 8
    star = star_pnk_pmf(w, StarConfig(gamma), k)
    distances = [pnk_pmf(w, gamma / n, n, k).total_variation(star) for n in (10 ** 2, 10 ** 3, 10 ** 4)]
    assert distances[0] > distances[1] > distances[2]


@pytest.mark.parametrize("gamma", [Fraction(1, 3), Fraction(2)])
def test_star_aff_pmf_k2(cayley, gamma):
    cfg = StarConfig(gamma)
    sigma2 = sigma_table(cayley, gamma, 2, exact=True).exact_value(2)
    singletons = star_aff_pmf(cayley, cfg, (2, 0), exact=True)
    pair = star_aff_pmf(cayley, cfg, (0, 1), exact=True)
    assert singletons == gamma ** 2 / sigma2
    assert pair == gamma * cayley.phi_exact(2) / sigma2
    assert singletons + pair == 1


@pytest.mark.parametrize("k", [3, 6, 8])
def test_star_aff_pmf_normalization(exact_family, k):
    cfg = StarConfig(Fraction(4, 5))
    total = sum((star_aff_pmf(exact_family, cfg, a, exact=True) for a in aff_vectors(k)), Fraction(0))
    assert total == 1


def test_star_aff_two_species_aggregate(logseries):
    gamma, k = Fraction(3), 7
    cfg = StarConfig(gamma)
    two = sum((star_aff_pmf(logseries, cfg, a, exact=True) for a in aff_vectors(k) if sum(a) == 2), Fraction(0))
    sigma = sigma_table(logseries, gamma, k, exact=True).exact_value(k)
    assert two == gamma ** 2 * bell_triangle_phi(logseries, k, exact=True).exact_value(k, 2) / sigma


def test_star_aff_conditional_free_of_gamma():
    w = parse_family("engen:alpha=1/2")
    k = 7
    for a in aff_vectors(k):
        p = sum(a)
        for gamma in (Fraction(1, 2), Fraction(3)):
            cfg = StarConfig(gamma)
            joint = star_aff_pmf(w, cfg, a, exact=True)
            assert joint / star_pnk_pmf(w, cfg, k, exact=True)[p] == star_aff_conditional(w, a, exact=True)


def test_star_aff_moments_boundaries(cayley):
    gamma, k = Fraction(2), 5
    cfg = StarConfig(gamma)
    sigma = sigma_table(cayley, gamma, k, exact=True).exact_value(k)
    assert star_aff_moments(cayley, cfg, k, (0, 0, 0, 0, 1), exact=True) == gamma * cayley.phi_exact(k) / sigma
    assert star_aff_moments(cayley, cfg, k, (0,) * k, exact=True) == 1
    assert star_aff_moments(cayley, cfg, k, (0, 0, 2), exact=True) == 0


def test_star_aff_moments_match_enumeration(exact_family):
    gamma, k = Fraction(7, 4), 8
    cfg = StarConfig(gamma)
    laws = {a: star_aff_pmf(exact_family, cfg, a, exact=True) for a in aff_vectors(k)}
    for i in range(1, k + 1):
        r = [0] * k
        r[i - 1] = 1
        expected = sum((a[i - 1] * q for a, q in laws.items()), Fraction(0))
        assert star_aff_moments(exact_family, cfg, k, r, exact=True) == expected
    r = [2, 1] + [0] * (k - 2)
    expected = sum((falling(a[0], 2) * a[1] * q for a, q in laws.items()), Fraction(0))
    assert star_aff_moments(exact_family, cfg, k, r, exact=True) == expected


def test_star_aff_moments_watterson(logseries):
    gamma, k = Fraction(5, 2), 9
    cfg = StarConfig(gamma)
    for i in range(1, k + 1):
        r = [0] * k
        r[i - 1] = 1
        expected = gamma / i * falling(k, i) * rising(gamma, k - i) / rising(gamma, k)
        assert star_aff_moments(logseries, cfg, k, r, exact=True) == expected


@pytest.mark.parametrize("family_id", ["negbin:alpha=1/2", "negbin:alpha=3", "engen:alpha=1/3"])
@pytest.mark.parametrize("gamma", [Fraction(1, 2), Fraction(9, 4)])
def test_urn_recursions(family_id, gamma):
    w = parse_family(family_id)
    cfg = StarConfig(gamma)
    laws = star_pnk_recursion(w, cfg, 15)
    for k, law in enumerate(laws, start=1):
        assert law == star_pnk_pmf(w, cfg, k, exact=True)


def test_urn_recursion_needs_family(logseries):
    with pytest.raises(DomainError):
        star_pnk_recursion(logseries, StarConfig(Fraction(1)), 4)
    with pytest.raises(DomainError):
        star_pnk_recursion(parse_family("negbin:alpha=1/2"), StarConfig(0.5), 4)


@pytest.mark.parametrize("family_id", ["logseries", "cayley", "negbin:alpha=2"])
def test_small_gamma_dominance(family_id):
    w = parse_family(family_id)
    gamma, k = 1e-4, 6
    bt = bell_triangle_phi(w, k)
    correction = bt.value(k, 2) / bt.value(k, 1)
    assert star_pnk_pmf(w, StarConfig(gamma), k)[1] >= 1 - 10 * gamma * correction


@pytest.mark.parametrize("family_id", ["logseries", "negbin:alpha=1"])
def test_rank_probabilities_sum_to_single_species(family_id):
    w = parse_family(family_id)
    cfg = StarConfig(0.5)
    k = 3
    total = math.fsum(single_species_rank_prob(w, cfg, k, m) for m in range(1, 26))
    assert total == pytest.approx(float(star_pnk_pmf(w, cfg, k)[1]), rel=1e-6)


def test_rank_probability_requires_levy_tail(cayley):
    with pytest.raises(DomainError):
        single_species_rank_prob(cayley, StarConfig(1.0), 3, 1)


def test_analytic_targets(logseries):
    cfg = StarConfig(1.0)
    law = star_pnk_pmf(logseries, cfg, 4)
    assert analytic_target(logseries, cfg, 4, "all-same-species") == pytest.approx(law[1])
    assert analytic_target(logseries, cfg, 4, "pk", p=3) == pytest.approx(law[3])
    with pytest.raises(DomainError):
        analytic_target(logseries, cfg, 4, "pk")
    with pytest.raises(DomainError):
        analytic_target(logseries, cfg, 4, "nosuch")


def test_star_sigma_prime(cayley):
    cfg = StarConfig(Fraction(3, 2))
    bt = bell_triangle_phi(cayley, 6, exact=True)
    assert star_sigma_prime(cayley, cfg, 6, exact=True) == sigma_prime(bt, Fraction(3, 2), 6)
    # sigma_k(gamma) = gamma (k + gamma)^(k-1)
    gamma, k = 1.5, 6
    derivative = (k + gamma) ** (k - 1) + gamma * (k - 1) * (k + gamma) ** (k - 2)
    assert star_sigma_prime(cayley, StarConfig(gamma), k) == pytest.approx(derivative, rel=1e-12)
