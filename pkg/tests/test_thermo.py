import numpy as np
import pytest

from conftest import random_h
from fermitherm.canonical import GivensSchedule, youla_factorize
from fermitherm.model import CoefficientMatrix, ThermoParams, argument_matrices, fermi_dirac, grand_partition_closed_form
from fermitherm.thermo import (
    IntegrityError,
    build_thermo_state,
    dense_gibbs_operator,
    dense_thermo_oracle,
    first_space_operators,
    log_partition_from_alpha,
    log_partition_from_state,
    match_alpha,
    occupations_from_reduced,
    occupations_from_state,
    partition_function_from_state,
    reduced_thermo_state,
    unfold_thermo_state,
)


def test_reduced_state_infinite_temperature(rng):
    th = build_thermo_state(random_h(rng, 3), ThermoParams(0.0))
    np.testing.assert_allclose(th.reduced.to_dense()[0], 1.0)
    assert th.reduced.norm == pytest.approx(1.0)
    assert partition_function_from_state(th.state) == pytest.approx(8.0)


def test_reduced_state_single_pair():
    alpha, A0 = 1.4, 0.3
    fact = youla_factorize(np.array([[0.0, alpha], [-alpha, 0.0]]))
    s = reduced_thermo_state(fact, A0)
    assert s.amplitude((0, 0)) == pytest.approx(np.exp(A0) * np.cosh(alpha / 4))
    assert s.amplitude((1, 1)) == pytest.approx(np.exp(A0) * np.sinh(alpha / 4))


def test_reduced_state_single_site_oracle():
    eps, mu, beta = 0.8, -0.3, 1.1
    h = CoefficientMatrix(np.array([[eps]]))
    p = ThermoParams(beta, mu)
    th = build_thermo_state(h, p)
    np.testing.assert_allclose(th.state.to_dense(), dense_thermo_oracle(h, p), atol=1e-12)
    assert th.factorization.alpha[0] == pytest.approx(-2 * beta * (eps - mu))


def test_unfold_empty_schedule(rng):
    s = build_thermo_state(random_h(rng, 2), ThermoParams(0.5)).reduced
    t = unfold_thermo_state(s, GivensSchedule(4))
    np.testing.assert_array_equal(t.to_dense(), s.to_dense())


def test_unfold_diagonal_single_site():
    th = build_thermo_state(CoefficientMatrix(np.array([[2.0]])), ThermoParams(0.4, 1.0))
    np.testing.assert_allclose(th.state.to_dense(), th.reduced.to_dense(), atol=1e-14)


@pytest.mark.parametrize("n, beta, mu", [(2, 0.7, 0.3), (3, 0.5, 0.2), (4, 1.3, -0.6)])
def test_unfolded_state_matches_oracle(rng, n, beta, mu):
    h = random_h(rng, n)
    p = ThermoParams(beta, mu)
    th = build_thermo_state(h, p)
    np.testing.assert_allclose(th.state.to_dense(), dense_thermo_oracle(h, p), atol=1e-9)


def test_unfold_reducible_and_degenerate():
    h = np.zeros((4, 4))
    h[:2, :2] = [[0, 1], [1, 0]]
    h[2:, 2:] = [[0, 1], [1, 0]]
    h = CoefficientMatrix(h)
    for p in (ThermoParams(0.9, 0.0), ThermoParams(0.9, 1.0)):
        np.testing.assert_allclose(build_thermo_state(h, p).state.to_dense(), dense_thermo_oracle(h, p), atol=1e-9)


def test_dense_oracle_examples():
    h = CoefficientMatrix(np.array([[0.0]]))
    v = dense_thermo_oracle(h, ThermoParams(0.0))
    np.testing.assert_allclose(v, [1, 0, 0, 0])
    beta, mu = 1.2, 0.7
    v = dense_thermo_oracle(h, ThermoParams(beta, mu))
    alpha = 2 * beta * mu
    scale = np.exp(beta * mu / 2)
    np.testing.assert_allclose(v, [scale * np.cosh(alpha / 4), 0, 0, scale * np.sinh(alpha / 4)], atol=1e-14)


def test_partition_function_single_site():
    eps, beta, mu = 0.4, 2.0, -0.1
    th = build_thermo_state(CoefficientMatrix(np.array([[eps]])), ThermoParams(beta, mu))
    assert partition_function_from_state(th.state) == pytest.approx(1 + np.exp(-beta * (eps - mu)), rel=1e-13)


def test_partition_function_three_way(rng):
    h = random_h(rng, 3)
    p = ThermoParams(1.7, 0.25)
    th = build_thermo_state(h, p)
    eps = th.eps
    ref = grand_partition_closed_form(eps, p)[1]
    assert log_partition_from_state(th.state) == pytest.approx(ref, rel=1e-12)
    assert log_partition_from_alpha(th.factorization.alpha, th.A0) == pytest.approx(ref, rel=1e-12)
    assert np.log(np.trace(dense_gibbs_operator(h, p))) == pytest.approx(ref, rel=1e-12)


def test_partition_function_overflow_safe():
    h = CoefficientMatrix.tridiagonal(6)
    p = ThermoParams(400.0, 3.0)
    th = build_thermo_state(h, p, chi=256, tau=1e-14)
    ref = grand_partition_closed_form(th.eps, p)[1]
    assert log_partition_from_state(th.state) == pytest.approx(ref, rel=1e-10)


def test_occupations_examples():
    h = CoefficientMatrix(np.array([[0.0, 1.0], [1.0, 0.0]]))
    th = build_thermo_state(h, ThermoParams(1.0))
    f = occupations_from_reduced(th.reduced, th.factorization, th.A0)
    np.testing.assert_allclose(f, [1 / (np.exp(-1) + 1), 1 / (np.e + 1)], atol=1e-12)
    th = build_thermo_state(h, ThermoParams(0.0))
    np.testing.assert_allclose(occupations_from_reduced(th.reduced, th.factorization, th.A0), 0.5)
    th = build_thermo_state(CoefficientMatrix(np.diag([1.0, 2.0])), ThermoParams(3.0, 1.0))
    assert occupations_from_reduced(th.reduced, th.factorization, th.A0)[0] == pytest.approx(0.5)


def test_occupations_cross_check(rng):
    h = random_h(rng, 4)
    p = ThermoParams(0.9, 0.2)
    th = build_thermo_state(h, p)
    fd = fermi_dirac(th.eps, p)
    np.testing.assert_allclose(occupations_from_reduced(th.reduced, th.factorization, th.A0, fd), fd, atol=1e-12)
    np.testing.assert_allclose(occupations_from_state(th.state, th.modes), fd, atol=1e-10)
    with pytest.raises(IntegrityError):
        occupations_from_reduced(th.reduced, th.factorization, th.A0, fd[::-1] + 0.1)


def test_occupations_dense_oracle(rng):
    h = random_h(rng, 2)
    p = ThermoParams(1.0, 0.0)
    th = build_thermo_state(h, p)
    rho = dense_gibbs_operator(h, p)
    rho /= np.trace(rho)
    c = first_space_operators(2)
    for k in range(2):
        f_op = sum(th.modes[j, k] * c[j] for j in range(2))
        assert np.trace(f_op.T @ f_op @ rho) == pytest.approx(fermi_dirac(th.eps[k], p), abs=1e-12)


def test_match_alpha_signs(rng):
    h = random_h(rng, 3)
    p = ThermoParams(0.6, 0.1)
    fact = match_alpha(youla_factorize(argument_matrices(h, p).A), np.linalg.eigvalsh(h.h), p)
    np.testing.assert_allclose(-fact.alpha / 2, p.beta * (np.linalg.eigvalsh(h.h) - p.mu), atol=1e-12)
    assert np.linalg.det(fact.U) > 0
    with pytest.raises(IntegrityError):
        match_alpha(youla_factorize(argument_matrices(h, p).A), np.linalg.eigvalsh(h.h) + 1, p)
