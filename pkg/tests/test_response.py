import numpy as np
import pytest

from conftest import (
    golden_phi_2m3,
    golden_phi_8m2,
    random_stable_diagonalizable,
    rng,
    siso_system,
)
from statespace_kit import numkit
from statespace_kit.errors import (
    IllConditionedVandermonde,
    NotDiagonalizable,
    RepeatedEigenvalues,
)
from statespace_kit.model import NonlinearModel, ltv_model, state_space
from statespace_kit.response import (
    fundamental_matrix_ltv,
    peano_baker,
    simulate,
    stm_cayley_hamilton,
    stm_modal,
    stm_series,
)

A_GOLD = np.array([[0.0, 1.0], [8.0, -2.0]])


# ---------------------------------------------------------------------------
# constant-coefficient propagators


@pytest.mark.parametrize("builder", [stm_series, stm_cayley_hamilton, stm_modal])
def test_golden_propagator_all_methods(builder):
    stm = builder(A_GOLD)
    for t in (0.0, 0.1, 0.5, 1.0):
        np.testing.assert_allclose(stm(t, 0.0), golden_phi_8m2(t), atol=1e-8)


def test_propagator_at_equal_times_is_identity():
    for builder in (stm_series, stm_cayley_hamilton, stm_modal):
        stm = builder(A_GOLD)
        np.testing.assert_allclose(stm(0.7, 0.7), np.eye(2), atol=1e-10)


def test_cayley_hamilton_coefficients():
    stm = stm_cayley_hamilton(np.array([[0.0, 1.0], [-2.0, -3.0]]))
    for t in (0.25, 1.0):
        b0, b1 = stm.evaluator.beta(t)
        assert abs(b0 - (2 * np.exp(-t) - np.exp(-2 * t))) <= 1e-10
        assert abs(b1 - (np.exp(-t) - np.exp(-2 * t))) <= 1e-10


def test_cayley_hamilton_rejects_repeated_spectrum():
    with pytest.raises(RepeatedEigenvalues):
        stm_cayley_hamilton(3.0 * np.eye(2))


def test_cayley_hamilton_conditioning_guard():
    # nearly coincident eigenvalues leave the coefficient system unusable
    A = np.diag([1.0, 1.0 + 1e-13])
    with pytest.raises((IllConditionedVandermonde, RepeatedEigenvalues)):
        stm_cayley_hamilton(A)


def test_modal_rejects_defective_matrix():
    with pytest.raises(NotDiagonalizable):
        stm_modal(np.array([[0.0, 1.0], [0.0, 0.0]]))


def test_modal_diagonal_input():
    stm = stm_modal(np.diag([-1.0, -3.0]))
    np.testing.assert_allclose(stm(2.0, 0.0),
                               np.diag([np.exp(-2.0), np.exp(-6.0)]), atol=1e-12)


def test_cross_method_agreement_random():
    gen = rng(41)
    for _ in range(20):
        n = int(gen.integers(2, 6))
        A = random_stable_diagonalizable(gen, n)
        t = float(gen.uniform(0.0, 3.0))
        ref = stm_series(A)(t, 0.0)
        assert np.max(np.abs(stm_cayley_hamilton(A)(t, 0.0) - ref)) <= 1e-7
        assert np.max(np.abs(stm_modal(A)(t, 0.0) - ref)) <= 1e-7


def test_semigroup_and_inverse_laws():
    stm = stm_series(A_GOLD)
    t0, t1, t2 = 0.0, 0.4, 1.1
    lhs = stm(t2, t0)
    rhs = stm(t2, t1) @ stm(t1, t0)
    assert np.max(np.abs(lhs - rhs)) <= 1e-6 * max(1.0, np.max(np.abs(lhs)))
    np.testing.assert_allclose(stm(t0, t1) @ stm(t1, t0), np.eye(2), atol=1e-6)


# ---------------------------------------------------------------------------
# time-varying propagators


def commutator_fixture():
    F = np.array([[0.0, 1.0], [0.0, 0.0]])
    G = np.array([[0.0, 0.0], [1.0, 0.0]])

    def A_of_t(t):
        eF = np.array([[1.0, t], [0.0, 1.0]])
        eFm = np.array([[1.0, -t], [0.0, 1.0]])
        return eFm @ G @ eF

    def phi_exact(t, s):
        eFm = np.array([[1.0, -t], [0.0, 1.0]])
        eFs = np.array([[1.0, s], [0.0, 1.0]])
        return eFm @ numkit.expm(F + G, t - s) @ eFs

    return A_of_t, phi_exact


def test_ltv_constant_coefficient_reduction():
    A = np.array([[0.0, 1.0], [-2.0, -3.0]])
    model = ltv_model(lambda t: A)
    stm = fundamental_matrix_ltv(model, 0.0, 2.0, max_step=1e-3)
    for t in (0.5, 1.3, 2.0):
        np.testing.assert_allclose(stm(t, 0.0), golden_phi_2m3(t), atol=1e-6)


def test_ltv_conjugated_field_closed_form():
    A_of_t, phi_exact = commutator_fixture()
    model = ltv_model(A_of_t)
    stm = fundamental_matrix_ltv(model, 0.0, 2.0)
    for (t, s) in [(1.0, 0.0), (2.0, 0.0), (1.5, 0.5)]:
        np.testing.assert_allclose(stm(t, s), phi_exact(t, s), atol=1e-5)


def test_ltv_identity_at_equal_times():
    A_of_t, _ = commutator_fixture()
    stm = fundamental_matrix_ltv(ltv_model(A_of_t), 0.0, 1.0)
    np.testing.assert_allclose(stm(0.6, 0.6), np.eye(2), atol=1e-10)


def test_ltv_adjoint_relation():
    A_of_t, _ = commutator_fixture()
    fwd = fundamental_matrix_ltv(ltv_model(A_of_t), 0.0, 1.5)
    adj = fundamental_matrix_ltv(
        ltv_model(lambda t: -A_of_t(t).T), 0.0, 1.5)
    for (t1, t0) in [(1.5, 0.0), (1.0, 0.25)]:
        assert np.max(np.abs(adj(t1, t0) - fwd(t0, t1).T)) <= 1e-6


def test_ltv_semigroup():
    A_of_t, _ = commutator_fixture()
    stm = fundamental_matrix_ltv(ltv_model(A_of_t), 0.0, 2.0)
    lhs = stm(1.8, 0.2)
    rhs = stm(1.8, 1.0) @ stm(1.0, 0.2)
    assert np.max(np.abs(lhs - rhs)) <= 1e-6


# ---------------------------------------------------------------------------
# iterated-integral approximation


def test_iterated_integral_quadratic_truncation():
    A = np.array([[0.0, 1.0], [-1.0, -1.0]])
    dt = 0.3
    out = peano_baker(lambda t: A, 0.0, dt, iterations=2)
    expected = np.eye(2) + A * dt + A @ A * dt ** 2 / 2.0
    np.testing.assert_allclose(out, expected, atol=1e-12)


def test_iterated_integral_zero_span():
    A = np.array([[0.0, 1.0], [-1.0, -1.0]])
    np.testing.assert_allclose(peano_baker(lambda t: A, 0.5, 0.5, iterations=3),
                               np.eye(2), atol=1e-14)


def test_iterated_integral_accepts_model():
    A_of_t, phi_exact = commutator_fixture()
    out = peano_baker(ltv_model(A_of_t), 0.0, 0.5, iterations=12)
    np.testing.assert_allclose(out, phi_exact(0.5, 0.0), atol=1e-6)


def test_iterated_integral_contraction():
    A_of_t, _ = commutator_fixture()
    ref = fundamental_matrix_ltv(ltv_model(A_of_t), 0.0, 1.0)(1.0, 0.0)
    errs = []
    for k in range(1, 7):
        errs.append(np.max(np.abs(peano_baker(A_of_t, 0.0, 1.0, iterations=k) - ref)))
    # halves or better per iteration until the quadrature floor takes over
    for a, b in zip(errs, errs[1:]):
        if a <= 1e-5:
            break
        assert b <= 0.5 * a
    assert errs[-1] <= 1e-5


# ---------------------------------------------------------------------------
# simulation


def test_simulate_unforced_golden_column():
    sys = state_space(A_GOLD, np.zeros((2, 0)), np.eye(2))
    times = np.linspace(0.0, 0.5, 51)
    traj = simulate(sys, [1.0, 0.0], times)
    for t_check in (0.1, 0.5):
        i = int(np.argmin(np.abs(times - t_check)))
        np.testing.assert_allclose(traj.states[i], golden_phi_8m2(t_check)[:, 0],
                                   atol=1e-6)
    assert not traj.truncated


def test_simulate_zero_state_stays_zero():
    sys = siso_system([[0.0, 1.0], [-2.0, -3.0]], [0.0, 1.0], [1.0, 0.0])
    traj = simulate(sys, [0.0, 0.0], np.linspace(0.0, 1.0, 11))
    np.testing.assert_allclose(traj.states, 0.0, atol=1e-14)
    np.testing.assert_allclose(traj.outputs, 0.0, atol=1e-14)


def test_simulate_scalar_constant_input_closed_form():
    a, b, ubar, x0 = -0.5, 2.0, 1.5, 0.7
    sys = siso_system([[a]], [b], [1.0])
    times = np.linspace(0.0, 2.0, 81)
    traj = simulate(sys, [x0], times, u=lambda t: np.array([ubar]))
    exact = np.exp(a * times) * x0 + (b * ubar / a) * (np.exp(a * times) - 1.0)
    np.testing.assert_allclose(traj.states[:, 0], exact, atol=1e-7)
    np.testing.assert_allclose(traj.inputs[:, 0], ubar, atol=1e-14)


def test_simulate_lti_forced_convergence_order():
    # smooth forcing; quadrature error should drop by at least 2^3.5 per halving
    a, w = -1.0, 3.0
    sys = siso_system([[a]], [1.0], [1.0])
    x0 = 0.4

    def u(t):
        return np.array([np.sin(w * t)])

    def exact(t):
        amp = a ** 2 + w ** 2
        xp = (-a * np.sin(w * t) - w * np.cos(w * t)) / amp
        return xp + (x0 - (-w / amp)) * np.exp(a * t)

    times = np.linspace(0.0, 2.0, 5)
    errs = []
    for step in (0.1, 0.05, 0.025):
        traj = simulate(sys, [x0], times, u=u, max_step=step)
        errs.append(np.max(np.abs(traj.states[:, 0] - exact(times))))
    assert errs[1] <= errs[0] / 2 ** 3.5 * 1.2
    assert errs[2] <= errs[1] / 2 ** 3.5 * 1.2


def test_simulate_ltv_homogeneous_against_closed_form():
    A_of_t, phi_exact = commutator_fixture()
    model = ltv_model(A_of_t)
    times = np.linspace(0.0, 1.5, 61)
    x0 = np.array([1.0, -0.5])
    traj = simulate(model, x0, times)
    np.testing.assert_allclose(traj.states[-1], phi_exact(1.5, 0.0) @ x0,
                               atol=1e-6)


def test_simulate_nonlinear_linear_field():
    model = NonlinearModel(f=lambda x, u, t: -x, h=lambda x, u, t: x,
                           n=1, m=0, p=1)
    times = np.linspace(0.0, 2.0, 101)
    traj = simulate(model, [1.0], times)
    np.testing.assert_allclose(traj.states[:, 0], np.exp(-times), atol=1e-7)


def test_simulate_blow_up_truncates_without_raising():
    model = NonlinearModel(f=lambda x, u, t: x * x, h=lambda x, u, t: x,
                           n=1, m=0, p=1)
    with np.errstate(over="ignore"):
        traj = simulate(model, [1.0], np.linspace(0.0, 2.0, 201))
    assert traj.truncated
    assert np.all(np.isfinite(traj.states))
    assert traj.times[-1] < 2.0


def test_trajectory_fields_aligned():
    sys = siso_system([[-1.0]], [1.0], [2.0])
    times = np.linspace(0.0, 1.0, 21)
    traj = simulate(sys, [1.0], times, u=lambda t: np.array([0.3]))
    assert traj.states.shape == (21, 1)
    assert traj.inputs.shape == (21, 1)
    assert traj.outputs.shape == (21, 1)
    np.testing.assert_allclose(traj.outputs, 2.0 * traj.states, atol=1e-12)
