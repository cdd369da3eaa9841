import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from gibbs_occ.bellpoly import sigma_table
from gibbs_occ.combinatorics import aff_vectors, factorial, falling, multinomial, rising
from gibbs_occ.config import get_settings
from gibbs_occ.errors import ContractError, DomainError, InstanceTooLargeError
from gibbs_occ.occupancy import (
    OccupancySample,
    Pmf,
    aff_factorial_moments,
    aff_pmf,
    component_pmf,
    enumerate_oracle,
    joint_pmf,
    k_factorial_moments,
    partialsum_pmf,
    pnk_mean_var,
    pnk_pgf,
    pnk_pmf,
    pnk_pmf_alternating,
    succession_step,
)
from gibbs_occ.weights import parse_family


def test_occupancy_sample_statistics():
    s = OccupancySample.from_counts([2, 0, 1, 1])
    assert (s.n, s.k, s.p) == (4, 4, 3)
    assert s.aff == (2, 1, 0, 0)
    with pytest.raises(ContractError):
        OccupancySample(n=2, k=3, counts=(1, 1), p=2, aff=(2, 0, 0))


def test_component_pmf_logseries(logseries):
    law = component_pmf(logseries, Fraction(1), 2, 2, exact=True)
    assert law.probabilities == (Fraction(1, 3),) * 3
    assert law.total() == 1


@pytest.mark.parametrize("n,k", [(2, 5), (3, 7), (5, 10)])
def test_component_pmf_linear_is_binomial(linear, n, k):
    law = component_pmf(linear, 1.7, n, k)
    np.testing.assert_allclose(law.as_array(), stats.binom.pmf(np.arange(k + 1), k, 1.0 / n), rtol=1e-12)


def test_component_pmf_single_box(logseries):
    law = component_pmf(logseries, 1.0, 1, 4)
    assert law.rows() == [(4, 1.0)]


@pytest.mark.parametrize("family_id", ["logseries", "cayley", "engen:alpha=1/2", "mittagleffler:alpha=1/2",
                                  "polylog:alpha=3/2", "binarytree"])
def test_component_pmf_normalized(family_id):
    law = component_pmf(parse_family(family_id), 0.8, 6, 20)
    assert law.total() == pytest.approx(1.0, abs=1e-12)


def test_partialsum_pmf(cayley):
    theta = Fraction(2)
    assert partialsum_pmf(cayley, theta, 4, 1, 6, exact=True) == component_pmf(cayley, theta, 4, 6, exact=True)
    left = partialsum_pmf(cayley, theta, 5, 2, 6, exact=True)
    right = partialsum_pmf(cayley, theta, 5, 3, 6, exact=True)
    for l in range(7):
        assert left[l] == right[6 - l]
    assert left.total() == 1


def test_partialsum_pmf_linear(linear):
    law = partialsum_pmf(linear, 3.0, 5, 2, 8)
    np.testing.assert_allclose(law.as_array(), stats.binom.pmf(np.arange(9), 8, 2 / 5), rtol=1e-12)


def test_partialsum_pmf_rejects_m(logseries):
    with pytest.raises(DomainError):
        partialsum_pmf(logseries, 1.0, 3, 3, 4)


def test_joint_pmf_linear_is_multinomial(linear):
    counts = (2, 0, 3, 1)
    expected = stats.multinomial.pmf(counts, n=6, p=[0.25] * 4)
    assert joint_pmf(linear, 0.4, 4, 6, counts) == pytest.approx(expected, rel=1e-12)


def test_joint_pmf_single_box(cayley):
    assert joint_pmf(cayley, Fraction(3), 1, 5, (5,), exact=True) == 1


def test_joint_pmf_logseries_is_dirichlet_multinomial(logseries):
    theta = Fraction(7, 3)
    counts = (3, 0, 2)
    n, k = 3, 5
    expected = factorial(k) / rising(n * theta, k)
    for c in counts:
        expected *= rising(theta, c) / factorial(c)
    assert joint_pmf(logseries, theta, n, k, counts, exact=True) == expected


@given(perm=st.permutations([3, 0, 2, 1, 1]))
@settings(max_examples=30, deadline=None)
def test_joint_pmf_exchangeable(perm):
    w = parse_family("negbin:alpha=1/2")
    reference = joint_pmf(w, Fraction(3, 2), 5, 7, (3, 0, 2, 1, 1), exact=True)
    assert joint_pmf(w, Fraction(3, 2), 5, 7, perm, exact=True) == reference


def test_joint_pmf_contract(logseries):
    with pytest.raises(ContractError):
        joint_pmf(logseries, 1.0, 2, 3, (1, 1))
    with pytest.raises(ContractError):
        joint_pmf(logseries, 1.0, 3, 3, (1, 1))


def test_pnk_pmf_single_species_entry(cayley):
    theta, n, k = Fraction(1, 2), 4, 6
    law = pnk_pmf(cayley, theta, n, k, exact=True)
    sigma = sigma_table(cayley, theta, k, exact=True).exact_value(k)
    sigma_n = sigma_table(cayley, n * theta, k, exact=True).exact_value(k)
    assert law[1] == n * sigma / sigma_n


def test_pnk_pmf_linear(linear):
    assert pnk_pmf(linear, Fraction(1), 2, 2, exact=True).probabilities == (Fraction(1, 2), Fraction(1, 2))


def test_pnk_pmf_matches_oracle(logseries):
    oracle = enumerate_oracle(logseries, Fraction(1), 3, 3)
    assert len(oracle.compositions) == 10
    assert pnk_pmf(logseries, Fraction(1), 3, 3, exact=True) == oracle.pnk_pmf()


def test_pnk_pmf_support(logseries):
    assert pnk_pmf(logseries, 1.0, 5, 3).support == (1, 2, 3)
    assert pnk_pmf(logseries, 1.0, 3, 5).support == (1, 2, 3)
    assert pnk_pmf(logseries, 1.0, 3, 0).rows() == [(0, 1.0)]


@pytest.mark.parametrize("family_id", ["logseries", "cayley", "newengen:alpha=1/2"])
def test_pnk_pmf_alternating_form(family_id):
    w = parse_family(family_id)
    theta = Fraction(1, 2)
    for n in range(1, 9):
        for k in range(1, 9):
            assert pnk_pmf_alternating(w, theta, n, k) == pnk_pmf(w, theta, n, k, exact=True)


@pytest.mark.parametrize("family_id", ["logseries", "cayley", "engen:alpha=1/2", "mittagleffler:alpha=1/2"])
@pytest.mark.parametrize("u", [0.3, 0.7, 1.0])
def test_pnk_pgf_identity(family_id, u):
    w = parse_family(family_id)
    law = pnk_pmf(w, 0.9, 6, 12)
    direct = math.fsum(u ** p * q for p, q in law.rows())
    assert pnk_pgf(w, 0.9, 6, 12, u) == pytest.approx(direct, rel=1e-10, abs=1e-12)


def test_pnk_pgf_exact(cayley):
    theta, u = Fraction(2), Fraction(3, 10)
    law = pnk_pmf(cayley, theta, 4, 7, exact=True)
    assert pnk_pgf(cayley, theta, 4, 7, u, exact=True) == sum(u ** p * q for p, q in law.rows())


def test_pnk_mean_var_linear(linear):
    assert pnk_mean_var(linear, Fraction(1), 2, 2, exact=True) == (Fraction(3, 2), Fraction(1, 4))
    assert pnk_mean_var(linear, 1.0, 1, 5) == (1.0, 0.0)


@pytest.mark.parametrize("family_id", ["logseries", "cayley", "negbin:alpha=3/2", "bell"])
def test_pnk_mean_var_match_pmf(family_id):
    w = parse_family(family_id)
    law = pnk_pmf(w, 1.25, 7, 15)
    mean, variance = pnk_mean_var(w, 1.25, 7, 15)
    assert mean == pytest.approx(law.mean(), rel=1e-10)
    assert variance == pytest.approx(law.variance(), rel=1e-8)


def test_aff_pmf_logseries(logseries):
    theta = Fraction(1)
    assert aff_pmf(logseries, theta, 2, 2, (2, 0), 2, exact=True) == Fraction(1, 3)
    assert aff_pmf(logseries, theta, 2, 2, (0, 1), 1, exact=True) == Fraction(2, 3)


def test_aff_pmf_single_species(cayley):
    theta, n, k = Fraction(2, 3), 5, 6
    aff = (0,) * (k - 1) + (1,)
    assert aff_pmf(cayley, theta, n, k, aff, 1, exact=True) == pnk_pmf(cayley, theta, n, k, exact=True)[1]


@pytest.mark.parametrize("n,k", [(1, 4), (2, 6), (3, 8), (8, 8), (6, 3)])
def test_aff_pmf_normalization(exact_family, n, k):
    theta = Fraction(3, 4)
    total = sum(
        (aff_pmf(exact_family, theta, n, k, a, sum(a), exact=True) for a in aff_vectors(k, max_parts=n)),
        Fraction(0),
    )
    assert total == 1


def test_aff_normalization_identity(cayley):
    theta, n, k = Fraction(5, 2), 5, 7
    sigma = sigma_table(cayley, theta, k, exact=True)
    total = Fraction(0)
    for a in aff_vectors(k, max_parts=n):
        term = Fraction(factorial(k), factorial(n - sum(a)))
        for i, ai in enumerate(a, start=1):
            term *= (sigma.exact_value(i) / factorial(i)) ** ai / factorial(ai)
        total += term
    assert total == sigma_table(cayley, n * theta, k, exact=True).exact_value(k) / factorial(n)


def test_aff_pmf_contract(logseries):
    with pytest.raises(ContractError):
        aff_pmf(logseries, 1.0, 3, 4, (1, 1, 0, 0), 2)
    with pytest.raises(ContractError):
        aff_pmf(logseries, 1.0, 3, 4, (2, 1, 0, 0), 2)


def test_aff_moment_is_expected_cell_count(exact_family):
    theta, n, k = Fraction(7, 3), 4, 6
    law = component_pmf(exact_family, theta, n, k, exact=True)
    total = Fraction(0)
    for i in range(1, k + 1):
        r = [0] * k
        r[i - 1] = 1
        expected = aff_factorial_moments(exact_family, theta, n, k, r, exact=True)
        assert expected == n * law[i]
        total += i * expected
    assert total == k


def test_aff_moments_match_oracle(logseries):
    theta, n, k = Fraction(1), 3, 3
    oracle = enumerate_oracle(logseries, theta, n, k)
    for r in [(3, 0, 0), (1, 1, 0), (0, 0, 1), (2, 0, 0), (0, 1, 0)]:
        assert aff_factorial_moments(logseries, theta, n, k, r, exact=True) == oracle.aff_moment(r)
    # all three boxes hold one ball each
    assert aff_factorial_moments(logseries, theta, n, k, (3, 0, 0), exact=True) == \
        factorial(n) * joint_pmf(logseries, theta, n, k, (1, 1, 1), exact=True)


def test_aff_moments_contract(logseries):
    with pytest.raises(ContractError):
        aff_factorial_moments(logseries, 1.0, 2, 4, (3, 0, 0, 0))
    with pytest.raises(ContractError):
        aff_factorial_moments(logseries, 1.0, 3, 4, (0, 0, 2, 0))


def test_k_moments(cayley):
    theta, n, k = Fraction(3, 2), 3, 4
    oracle = enumerate_oracle(cayley, theta, n, k)
    assert k_factorial_moments(cayley, theta, n, k, (0, 0, 0), exact=True) == 1
    assert k_factorial_moments(cayley, theta, n, k, (k, 0, 0), exact=True) == \
        factorial(k) * component_pmf(cayley, theta, n, k, exact=True)[k]
    for l in [(1, 1, 0), (2, 1, 1), (1, 0, 0), (0, 3, 0)]:
        assert k_factorial_moments(cayley, theta, n, k, l, exact=True) == oracle.k_moment(l)
    assert k_factorial_moments(cayley, theta, n, k, (3, 2, 0), exact=True) == 0


def test_k_moments_logseries(logseries):
    oracle = enumerate_oracle(logseries, Fraction(1), 2, 3)
    assert k_factorial_moments(logseries, Fraction(1), 2, 3, (1, 1), exact=True) == oracle.k_moment((1, 1))
    assert k_factorial_moments(logseries, 1.0, 2, 3, (1, 1)) == pytest.approx(float(oracle.k_moment((1, 1))))


def test_oracle_marginals(logseries, cayley):
    oracle = enumerate_oracle(logseries, Fraction(1), 3, 4)
    assert oracle.total() == 1
    assert oracle.component_pmf() == component_pmf(logseries, Fraction(1), 3, 4, exact=True)
    assert oracle.partialsum_pmf(2) == partialsum_pmf(logseries, Fraction(1), 3, 2, 4, exact=True)

    oracle = enumerate_oracle(cayley, Fraction(2), 3, 5)
    assert oracle.pnk_pmf() == pnk_pmf(cayley, Fraction(2), 3, 5, exact=True)
    for a, q in oracle.aff_law().items():
        assert aff_pmf(cayley, Fraction(2), 3, 5, a, sum(a), exact=True) == q


def test_oracle_refuses_large_instances(logseries, monkeypatch):
    monkeypatch.setenv("GIBBS_OCC_ORACLE_MAX_COMPOSITIONS", "100")
    get_settings.cache_clear()
    with pytest.raises(InstanceTooLargeError):
        enumerate_oracle(logseries, Fraction(1), 5, 10)


def test_law_of_succession(logseries):
    for theta in (Fraction(1), Fraction(5, 2)):
        for n in range(1, 13):
            for k in range(1, 12):
                law = pnk_pmf(logseries, theta, n, k, exact=True)
                assert succession_step(theta, n, k, law) == pnk_pmf(logseries, theta, n, k + 1, exact=True)


@pytest.mark.parametrize("family_id", ["logseries", "cayley", "tree:a=2,b=1", "newengen:alpha=1/2"])
def test_log_and_exact_modes_agree(family_id):
    w = parse_family(family_id)
    exact = pnk_pmf(w, Fraction(5, 4), 6, 9, exact=True)
    logs = pnk_pmf(w, 1.25, 6, 9)
    np.testing.assert_allclose(logs.as_array(), exact.as_array(), rtol=1e-12)
    assert joint_pmf(w, 1.25, 3, 5, (2, 0, 3)) == pytest.approx(
        float(joint_pmf(w, Fraction(5, 4), 3, 5, (2, 0, 3), exact=True)), rel=1e-12)


def test_pmf_helpers():
    law = Pmf((1, 2, 3), (0.2, 0.5, 0.3))
    assert law[4] == 0.0
    assert law.mean() == pytest.approx(2.1)
    assert law.variance() == pytest.approx(0.49)
    assert law.total_variation(Pmf((1, 2), (0.5, 0.5))) == pytest.approx(0.3)
    assert falling(4, 2) == 12
    assert multinomial((1, 1)) == 2
