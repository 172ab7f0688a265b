from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qelastica.jetalg import (
    JetPoly, NotExact, antiderivative, apply_recursion, euler_operator,
    hamiltonian_density, is_total_derivative, kdv_rhs, normal_form,
    total_derivative, u0, u1, u2, u3, u4, u5, variational_pairing,
)

D = total_derivative


# random differential polynomials: up to 6 terms, jet order <= 4, degree <= 3
monomials = st.lists(st.integers(0, 2), min_size=1, max_size=5).filter(lambda m: sum(m) <= 3)
coefs = st.fractions(min_value=-5, max_value=5, max_denominator=6)
jetpolys = st.dictionaries(monomials.map(tuple), coefs, max_size=6).map(JetPoly)


def test_total_derivative_examples():
    assert D(u0) == u1
    assert D(u0**2) == 2 * u0 * u1
    assert D(3 * u0**2 + u2) == 6 * u0 * u1 + u3
    assert D(JetPoly.const(7)) == JetPoly()


def test_euler_operator_examples():
    assert euler_operator(u0**2 / 2) == u0
    # hand application of sum (-D)^m d/du_m
    assert euler_operator(u0**3 + u1**2 / 2) == 3 * u0**2 - u2


def test_zero_coefficients_are_dropped():
    p = u0 * u1 - u1 * u0
    assert p.is_zero and p.terms == {} and p.max_jet_order == 0
    assert (u0 + u3 - u3).max_jet_order == 0


@settings(max_examples=60, deadline=None)
@given(jetpolys, jetpolys)
def test_derivation_law(p, q):
    assert D(p * q) == D(p) * q + p * D(q)


@settings(max_examples=60, deadline=None)
@given(jetpolys)
def test_euler_kills_total_derivatives(q):
    assert euler_operator(D(q)).is_zero


@settings(max_examples=60, deadline=None)
@given(jetpolys)
def test_antiderivative_inverts_D(q):
    assert D(antiderivative(D(q))) == D(q)
    assert is_total_derivative(D(q))


@settings(max_examples=40, deadline=None)
@given(jetpolys)
def test_text_round_trip(p):
    assert JetPoly.from_text(p.to_text()) == p


def test_antiderivative_rejects_non_exact():
    with pytest.raises(NotExact):
        antiderivative(u0 * u1**2)
    with pytest.raises(NotExact):
        antiderivative(JetPoly.const(1))
    assert not is_total_derivative(u0**2)


def test_recursion_examples():
    assert apply_recursion(u1) == u3 + 6 * u0 * u1
    assert apply_recursion(JetPoly()) == JetPoly()
    assert apply_recursion(apply_recursion(u1)) == D(
        10 * u0**3 + 5 * u1**2 + 10 * u0 * u2 + u4)
    with pytest.raises(NotExact):
        apply_recursion(u0**2)


def test_hierarchy_goldens():
    assert kdv_rhs(1) == u1
    assert kdv_rhs(2) == D(3 * u0**2 + u2)
    assert kdv_rhs(3) == 30 * u0**2 * u1 + 20 * u1 * u2 + 10 * u0 * u3 + u5
    assert kdv_rhs(3).to_text() == "1 * u5 + 10 * u0 u3 + 20 * u1 u2 + 30 * u0^2 u1"


def test_density_goldens():
    assert hamiltonian_density(0) == u0 / 2
    assert hamiltonian_density(1) == u0**2 / 2
    assert hamiltonian_density(2) == u0**3 - u1**2 / 2
    assert hamiltonian_density(3) == Fraction(5, 2) * u0**4 - 5 * u0 * u1**2 + u2**2 / 2


def test_opposite_h2_sign_fails_the_identity():
    flipped = u0**3 + u1**2 / 2
    assert D(euler_operator(flipped)) != kdv_rhs(2)


@pytest.mark.parametrize("n", [1, 2, 3, 4])
def test_densities_generate_the_flows(n):
    assert D(euler_operator(hamiltonian_density(n))) == kdv_rhs(n)


@pytest.mark.parametrize("n", [1, 2, 3])
@pytest.mark.parametrize("m", [1, 2, 3])
def test_flows_commute(n, m):
    assert variational_pairing(n, m).is_zero


def test_normal_form_is_canonical_mod_image_of_D():
    p = u0**3 + u0 * u2
    q = p + D(u0 * u1 + u2**2)
    assert normal_form(p) == normal_form(q)
    assert normal_form(u0 * u2) == -(u1**2)
    assert normal_form(D(u0**4)).is_zero


def test_eigen_flow_truncation():
    # Linearized at u = 0 the recursion is D^2, and a plane wave u = eps e^{i w s}
    # is an eigenvector with k = -w^2; the linear part of Omega^m u_1 must then
    # evaluate to k^m u_1 on the jets u_j = eps (i w)^j.
    w, eps = 1.7, 1e-3
    jets = [eps * (1j * w) ** j for j in range(12)]
    k = -w * w
    p = u1
    for m in range(1, 5):
        p = apply_recursion(p)
        linear = JetPoly({mono: c for mono, c in p.terms.items() if sum(mono) == 1})
        assert linear(jets) == pytest.approx(k**m * jets[1], rel=1e-12)
