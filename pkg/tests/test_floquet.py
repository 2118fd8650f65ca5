import numpy as np
import pytest

from kicked_top.dynamics.floquet import (
    FloquetOperator,
    build_floquet,
    check_recurrence,
    entanglement_free_check,
    evolve,
    kick_operator,
    recurrence_residual,
    resonance_beta,
    resonance_case,
)
from kicked_top.dynamics.spin_algebra import (
    CoherentStateParams,
    build_spin_system,
    coherent_state,
    unitary_from_hermitian,
)
from kicked_top.errors import ConfigError, DimensionMismatchError


def _max_abs(m):
    return float(np.max(np.abs(m)))


def test_zero_kick_gives_diagonal_rotation(spin10):
    F = build_floquet(spin10, 0.7, 0.0)
    expected = np.diag(np.exp(-1j * 0.7 * spin10.m_values))
    assert _max_abs(F.unitary - expected) < 1e-12


def test_trivial_parameters_give_identity(spin10):
    F = build_floquet(spin10, 0.0, 0.0)
    assert _max_abs(F.unitary - np.eye(spin10.dim)) < 1e-12
    result = check_recurrence(F)
    assert result is not None and result.period == 1


@pytest.mark.parametrize("alpha, beta", [(np.pi / 2, 10 * np.pi), (0.3, 1.7), (1.1, 0.0)])
def test_floquet_is_unitary(spin10, alpha, beta):
    U = build_floquet(spin10, alpha, beta).unitary
    assert _max_abs(U @ U.conj().T - np.eye(spin10.dim)) < 1e-12


def test_kick_matches_direct_exponential(spin10):
    beta = 2.3
    direct = unitary_from_hermitian(spin10.Jy @ spin10.Jy / (2.0 * spin10.j), beta)
    assert _max_abs(kick_operator(spin10, beta) - direct) < 1e-10


def test_kick_acts_before_rotation(spin10):
    alpha, beta = 0.4, 1.3
    rotation = np.diag(np.exp(-1j * alpha * spin10.m_values))
    F = build_floquet(spin10, alpha, beta)
    assert _max_abs(F.unitary - rotation @ kick_operator(spin10, beta)) < 1e-12


def test_with_alpha_reuses_kick(spin10):
    F = build_floquet(spin10, np.pi / 2, 10 * np.pi)
    G = F.with_alpha(0.9)
    assert G.kick is F.kick
    assert _max_abs(G.unitary - build_floquet(spin10, 0.9, 10 * np.pi).unitary) < 1e-12


def test_resonance_beta_values():
    assert resonance_beta(10, 1, 2) == pytest.approx(20 * np.pi)
    assert resonance_beta(10, 1, 4) == pytest.approx(10 * np.pi)
    assert resonance_beta(56, 1, 8) == pytest.approx(28 * np.pi)
    assert resonance_beta(3, 3, 4) == pytest.approx(9 * np.pi)


@pytest.mark.parametrize("r, s", [(2, 4), (0, 1), (1, 0), (1.5, 2), (-1, 3)])
def test_resonance_beta_rejects_bad_fractions(r, s):
    with pytest.raises(ConfigError):
        resonance_beta(10, r, s)


def test_resonance_case_lookup():
    assert resonance_case("ii") == (1, 4)
    assert resonance_case(" III ") == (1, 8)
    with pytest.raises(ConfigError):
        resonance_case("iv")


@pytest.mark.parametrize("n_spins", [4, 8, 20])
@pytest.mark.parametrize("case, period", [("i", 2), ("ii", 8), ("iii", 48)])
def test_resonant_periods(n_spins, case, period):
    s = build_spin_system(n_spins)
    r, q = resonance_case(case)
    F = build_floquet(s, np.pi / 2, resonance_beta(s.j, r, q))
    result = check_recurrence(F, max_period=100, tol=1e-8)
    assert result is not None
    assert result.period == period
    assert result.residual < 1e-8
    assert abs(abs(result.global_phase) - 1.0) < 1e-12


def test_recurrence_is_minimal(spin10):
    F = build_floquet(spin10, np.pi / 2, resonance_beta(spin10.j, 1, 4))
    result = check_recurrence(F)
    for n in range(1, result.period):
        assert recurrence_residual(F, n)[0] >= 1e-8
    assert recurrence_residual(F, 2 * result.period)[0] < 1e-8


def test_generic_beta_has_no_recurrence(spin10):
    F = build_floquet(spin10, np.pi / 2, 1.0)
    assert check_recurrence(F, max_period=100) is None


def test_recurrence_ignores_global_phase(spin10):
    F = build_floquet(spin10, np.pi / 2, resonance_beta(spin10.j, 1, 4))
    shifted = FloquetOperator(system=spin10, alpha=F.alpha, beta=F.beta,
                              unitary=np.exp(0.37j) * F.unitary, kick=F.kick)
    assert check_recurrence(shifted).period == check_recurrence(F).period


@pytest.mark.parametrize("max_period, tol", [(0, 1e-8), (10, 0.0), (10, -1.0)])
def test_check_recurrence_rejects_bad_arguments(spin10, max_period, tol):
    F = build_floquet(spin10, np.pi / 2, 1.0)
    with pytest.raises(ConfigError):
        check_recurrence(F, max_period=max_period, tol=tol)


def test_pure_rotation_is_entanglement_free(spin10):
    assert entanglement_free_check(build_floquet(spin10, 0.8, 0.0))


def test_period_two_kick_is_entanglement_free(spin10):
    # exp(-i pi J_y^2) = exp(-i pi J_y) for integer j: a rotation
    F = build_floquet(spin10, np.pi / 2, resonance_beta(spin10.j, 1, 2))
    assert entanglement_free_check(F)


def test_generic_kick_is_not_entanglement_free(spin10):
    assert not entanglement_free_check(build_floquet(spin10, np.pi / 2, 1.0))


def test_resonant_kick_splits_states_before_recurrence(spin10):
    F = build_floquet(spin10, np.pi / 2, resonance_beta(spin10.j, 1, 4))
    assert not entanglement_free_check(F, steps=3)
    assert entanglement_free_check(F, steps=8)


def test_evolve_matches_matrix_power(spin10, psi_generic):
    F = build_floquet(spin10, np.pi / 2, 10 * np.pi)
    direct = np.linalg.matrix_power(F.unitary, 5) @ psi_generic
    assert np.allclose(evolve(F, psi_generic, 5), direct, atol=1e-12)
    assert np.array_equal(evolve(F, psi_generic, 0), psi_generic.astype(complex))


def test_evolve_rejects_wrong_dimension(spin10):
    F = build_floquet(spin10, np.pi / 2, 1.0)
    psi = coherent_state(build_spin_system(10), CoherentStateParams(0.3, 0.2))
    with pytest.raises(DimensionMismatchError):
        evolve(F, psi, 1)
