import json
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import quad

from gibbs_occ.errors import DomainError, UnsupportedFamilyError, WeightsExhaustedError
from gibbs_occ.weights import Family, WeightSequence, parse_family

LOG_CONVEX_FAMILIES = (
    "logseries",
    "negbin:alpha=2",
    "negbin:alpha=1/3",
    "engen:alpha=1/2",
    "cayley",
    "newengen:alpha=1/2",
    "bell",
    "polylog:alpha=2",
)


def test_logseries_weights_are_factorials(logseries):
    assert logseries.phi_exact(4) == 6
    assert logseries.phi_exact(1) == 1


def test_linear_weights(linear):
    assert linear.phi_exact(1) == 1
    assert linear.phi_exact(2) == 0
    assert linear.log_phi(2) == -math.inf


def test_cayley_weights(cayley):
    assert cayley.phi_exact(3) == 9


def test_binary_tree_weights():
    w = parse_family("binarytree")
    assert w.phi_exact(2) == 0
    assert w.phi_exact(3) == 3
    assert w.phi_exact(5) == 5 * 4 * 3 * 2 * 2 / 4


def test_newengen_weights():
    w = parse_family("newengen:alpha=1/2")
    # m (alpha)_{m-1} at m = 3: 3 * (1/2)(3/2)
    assert w.phi_exact(3) == Fraction(9, 4)


@pytest.mark.parametrize("family_id", ["logseries", "negbin:alpha=2", "engen:alpha=1/2", "cayley", "tree:a=2,b=1",
                                  "polylog:alpha=2", "newengen:alpha=1/2", "binarytree"])
@given(m=st.integers(min_value=1, max_value=40))
@settings(max_examples=25, deadline=None)
def test_log_phi_matches_exact(family_id, m):
    w = parse_family(family_id)
    exact = w.phi_exact(m)
    if exact == 0:
        assert w.log_phi(m) == -math.inf
    else:
        assert w.log_phi(m) == pytest.approx(math.log(exact), rel=1e-12, abs=1e-12)


@pytest.mark.parametrize("family_id", LOG_CONVEX_FAMILIES)
def test_weights_are_log_convex(family_id):
    w = parse_family(family_id)
    phi = w.phi_exact_upto(51)
    for m in range(2, 51):
        assert phi[m + 1] * phi[m - 1] >= phi[m] ** 2


def test_weights_are_non_negative(exact_family):
    assert all(v >= 0 for v in exact_family.phi_exact_upto(30))


def test_phi_eval_logseries(logseries):
    assert logseries.phi_eval(0.5) == pytest.approx(math.log(2.0), rel=1e-14)


@pytest.mark.parametrize("family_id", ["logseries", "negbin:alpha=1/2", "cayley", "bell", "linear", "binarytree",
                                  "mittagleffler:alpha=1/2", "tree:a=2,b=1"])
def test_phi_eval_at_zero(family_id):
    assert parse_family(family_id).phi_eval(0.0) == 0.0


def test_phi_eval_polylog_at_minus_one():
    w = parse_family("polylog:alpha=2")
    assert w.phi_eval(-1.0) == pytest.approx(-math.pi ** 2 / 12, rel=1e-12)


CLOSED_FORM_IDS = ("logseries", "negbin:alpha=1/2", "engen:alpha=1/2", "cayley", "tree:a=2,b=1", "newengen:alpha=1/2",
                   "binarytree", "polylog:alpha=2")
INTERIOR_FRACTIONS = (-0.8, -0.4, 0.15, 0.45, 0.75)


@pytest.mark.parametrize("family_id", CLOSED_FORM_IDS)
@pytest.mark.parametrize("fraction", INTERIOR_FRACTIONS)
def test_closed_form_matches_series(family_id, fraction):
    w = parse_family(family_id)
    x = fraction * w.radius
    assert w.phi_eval(x) == pytest.approx(w.phi_series(x), rel=1e-10)


@pytest.mark.parametrize("family_id", ["bell", "mittagleffler:alpha=1/2"])
@pytest.mark.parametrize("x", [-1.5, -0.5, 0.3, 1.0, 2.0])
def test_entire_closed_form_matches_series(family_id, x):
    w = parse_family(family_id)
    assert w.phi_eval(x) == pytest.approx(w.phi_series(x), rel=1e-10)


def test_phi_eval_rejects_points_beyond_radius(logseries, cayley):
    with pytest.raises(DomainError):
        logseries.phi_eval(1.0)
    with pytest.raises(DomainError):
        cayley.phi_eval(0.5)


def test_radius(cayley):
    assert cayley.radius == pytest.approx(math.exp(-1.0))
    assert parse_family("bell").radius == math.inf
    # tree with a = 2, b = 1: (1/2)(1/2) = 1/4
    assert parse_family("tree:a=2,b=1").radius == pytest.approx(0.25)


def test_parse_family_parameters():
    w = parse_family("negbin:alpha=1/2")
    assert w.family == Family.NEGBIN
    assert w.alpha == Fraction(1, 2)
    assert parse_family(w.to_spec()) == w

    tree = parse_family("tree:a=2,b=1")
    assert (tree.a, tree.b) == (2, 1)


@pytest.mark.parametrize("family_id", ["nosuch", "negbin", "negbin:alpha=-1", "engen:alpha=3/2",
                                  "logseries:alpha=1", "negbin:alpha", "tree:a=1/2,b=1", "custom:"])
def test_parse_family_rejects(family_id):
    with pytest.raises(DomainError):
        parse_family(family_id)


def test_custom_values_and_exhaustion():
    w = parse_family("custom:values=1;2;3/2")
    assert w.phi_exact_upto(3) == (0, 1, 2, Fraction(3, 2))
    with pytest.raises(WeightsExhaustedError):
        w.phi_exact(4)
    with pytest.raises(WeightsExhaustedError):
        w.phi_exact_upto(5)


def test_custom_file(tmp_path):
    path = tmp_path / "weights.json"
    path.write_text(json.dumps(["1", "1", "2"]))
    w = parse_family(f"custom:file={path}")
    assert w.custom == (1, 1, 2)


def test_custom_file_with_zero_first_weight(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text(json.dumps(["0", "1"]))
    with pytest.raises(DomainError):
        parse_family(f"custom:file={path}")


def test_custom_weights_must_be_non_negative():
    with pytest.raises(DomainError):
        WeightSequence(Family.CUSTOM, custom=(Fraction(1), Fraction(-1)))


def test_negbin_levy_tail(negbin1):
    assert negbin1.levy_tail(1.0) == pytest.approx(math.exp(-1.0), rel=1e-14)
    assert negbin1.levy_tail(0.0) == pytest.approx(1.0)
    assert negbin1.levy_tail_inverse(math.exp(-1.0)) == pytest.approx(1.0, rel=1e-10)
    with pytest.raises(DomainError):
        negbin1.levy_tail_inverse(1.5)


def test_logseries_levy_tail_diverges_at_zero(logseries):
    assert logseries.levy_tail(1e-6) > 10.0
    with pytest.raises(DomainError):
        logseries.levy_tail(0.0)


def test_logseries_levy_tail_inverse_against_quadrature(logseries):
    u, _ = quad(lambda s: math.exp(-s) / s, 2.0, np.inf, epsabs=1e-14, epsrel=1e-13)
    assert logseries.levy_tail_inverse(u) == pytest.approx(2.0, rel=1e-9)


@pytest.mark.parametrize("u", [1e-3, 1e-2, 0.1, 0.5, 1.0, 3.0, 10.0])
def test_logseries_levy_tail_round_trip(logseries, u):
    assert logseries.levy_tail(logseries.levy_tail_inverse(u)) == pytest.approx(u, rel=1e-10)


@pytest.mark.parametrize("u", [1e-3, 1e-2, 0.1, 0.5, 0.9])
def test_negbin_levy_tail_round_trip(u):
    w = parse_family("negbin:alpha=1/2")
    assert w.levy_tail(w.levy_tail_inverse(u)) == pytest.approx(u, rel=1e-10)


def test_levy_tail_unsupported(cayley):
    assert not cayley.levy_tail_support
    with pytest.raises(UnsupportedFamilyError):
        cayley.levy_tail(1.0)


def test_activity_flags(logseries, negbin1):
    assert negbin1.finite_activity
    assert not logseries.finite_activity
    assert parse_family("binarytree").in_s is False
    assert parse_family("tree:a=2,b=1").in_s == "conjectured"
