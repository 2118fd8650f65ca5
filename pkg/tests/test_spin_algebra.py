import numpy as np
import pytest

from kicked_top.dynamics.spin_algebra import (
    CoherentStateParams,
    build_spin_system,
    coherent_amplitude_moduli,
    coherent_state,
    expectation,
    great_circle_angle,
    unitary_from_hermitian,
    variance,
)
from kicked_top.errors import ConfigError, DimensionMismatchError, NonHermitianError


def _max_abs(m):
    return float(np.max(np.abs(m)))


def test_spin_one_jz_is_diagonal(spin1):
    assert spin1.j == 1
    assert spin1.dim == 3
    assert np.array_equal(spin1.Jz, np.diag([1.0, 0.0, -1.0]).astype(complex))


@pytest.mark.parametrize("n_spins", [2, 10, 40, 112])
def test_algebra_identities(n_spins):
    s = build_spin_system(n_spins)
    for op in (s.Jx, s.Jy, s.Jz):
        assert _max_abs(op - op.conj().T) < 1e-12
    assert _max_abs(s.Jx @ s.Jy - s.Jy @ s.Jx - 1j * s.Jz) < 1e-10
    assert _max_abs(s.Jy @ s.Jz - s.Jz @ s.Jy - 1j * s.Jx) < 1e-10
    assert _max_abs(s.Jz @ s.Jx - s.Jx @ s.Jz - 1j * s.Jy) < 1e-10
    casimir = s.Jx @ s.Jx + s.Jy @ s.Jy + s.Jz @ s.Jz
    assert _max_abs(casimir - s.j * (s.j + 1) * np.eye(s.dim)) < 1e-10


def test_algebra_identities_at_large_n():
    s = build_spin_system(400)
    tol = 1e-12 * s.j * (s.j + 1)
    for op in (s.Jx, s.Jy, s.Jz):
        assert _max_abs(op - op.conj().T) < tol
    assert _max_abs(s.Jx @ s.Jy - s.Jy @ s.Jx - 1j * s.Jz) < tol
    assert _max_abs(s.Jy @ s.Jz - s.Jz @ s.Jy - 1j * s.Jx) < tol
    assert _max_abs(s.Jz @ s.Jx - s.Jx @ s.Jz - 1j * s.Jy) < tol
    casimir = s.Jx @ s.Jx + s.Jy @ s.Jy + s.Jz @ s.Jz
    assert _max_abs(casimir - 40200.0 * np.eye(s.dim)) < tol


def test_casimir_value_for_j56():
    s = build_spin_system(112)
    casimir = s.Jx @ s.Jx + s.Jy @ s.Jy + s.Jz @ s.Jz
    assert np.allclose(np.diag(casimir).real, 3192.0, atol=1e-9)


def test_ladder_operators_match_cartesian_combinations():
    s = build_spin_system(8)
    assert np.array_equal(s.Jplus, s.Jx + 1j * s.Jy)
    assert np.array_equal(s.Jminus, s.Jx - 1j * s.Jy)
    m = s.m_values
    expected = np.sqrt(s.j * (s.j + 1) - m[1:] * (m[1:] + 1))
    assert np.allclose(np.diag(s.Jplus, 1).real, expected)
    assert np.allclose(s.lowering_amplitudes, expected)
    assert np.allclose(np.diag(s.Jplus @ s.Jminus).real, s.raise_lower_diagonal)


def test_operators_are_read_only(spin1):
    with pytest.raises(ValueError):
        spin1.Jz[0, 0] = 5.0


@pytest.mark.parametrize("bad", [0, 1, 3, 21, -4, 2.5])
def test_rejects_odd_or_small_n(bad):
    with pytest.raises(ConfigError):
        build_spin_system(bad)


def test_jy_eigenbasis_has_exact_spectrum():
    s = build_spin_system(20)
    values, vectors = s.jy_eigenbasis
    assert np.array_equal(values, np.arange(-10, 11, dtype=float))
    assert _max_abs(vectors @ np.diag(values) @ vectors.conj().T - s.Jy) < 1e-10


def test_coherent_state_at_north_pole(spin10):
    for phi in (0.0, 1.3, 5.0):
        psi = coherent_state(spin10, CoherentStateParams(0.0, phi))
        expected = np.zeros(spin10.dim)
        expected[0] = 1.0
        assert np.allclose(psi, expected, atol=1e-15)


def test_coherent_state_at_south_pole(spin10):
    psi = coherent_state(spin10, CoherentStateParams(np.pi, 0.0))
    assert abs(abs(psi[-1]) - 1.0) < 1e-12
    assert _max_abs(psi[:-1]) < 1e-12


@pytest.mark.parametrize("n_spins, theta, phi", [(2, np.pi / 2, 0.0), (2, 0.7, 2.1), (6, 2.3, 4.0), (20, 1.1, 0.4)])
def test_coherent_state_matches_rotation_of_highest_weight(n_spins, theta, phi):
    s = build_spin_system(n_spins)
    # exp[i theta (Jx sin phi - Jy cos phi)] = exp(-i theta H) with H = -(Jx sin phi - Jy cos phi)
    H = -(s.Jx * np.sin(phi) - s.Jy * np.cos(phi))
    top = np.zeros(s.dim, dtype=complex)
    top[0] = 1.0
    oracle = unitary_from_hermitian(H, theta) @ top
    psi = coherent_state(s, CoherentStateParams(theta, phi))
    assert np.allclose(psi, oracle, atol=1e-10)
    assert psi[0].real >= 0 and abs(psi[0].imag) < 1e-15


@pytest.mark.parametrize("theta", [0.0, 0.4, np.pi / 2, 2.0, np.pi])
def test_coherent_state_moments(spin10, theta):
    psi = coherent_state(spin10, CoherentStateParams(theta, 0.9))
    assert abs(np.linalg.norm(psi) - 1.0) < 1e-12
    j = spin10.j
    assert expectation(spin10.Jz, psi).real == pytest.approx(j * np.cos(theta), rel=1e-8, abs=1e-10)
    assert variance(spin10.Jz, psi) == pytest.approx(0.5 * j * np.sin(theta) ** 2, rel=1e-8, abs=1e-10)


def test_coherent_overlap_depends_on_great_circle_angle(rng):
    for n_spins in (2, 8, 40):
        s = build_spin_system(n_spins)
        for _ in range(5):
            p1 = CoherentStateParams(rng.uniform(0, np.pi), rng.uniform(0, 2 * np.pi))
            p2 = CoherentStateParams(rng.uniform(0, np.pi), rng.uniform(0, 2 * np.pi))
            overlap = abs(np.vdot(coherent_state(s, p1), coherent_state(s, p2))) ** 2
            gamma = great_circle_angle(p1, p2)
            assert overlap == pytest.approx(np.cos(gamma / 2) ** (4 * s.j), abs=1e-8)


def test_coherent_amplitudes_large_j_do_not_overflow():
    moduli = coherent_amplitude_moduli(2000, 1.2)
    assert np.all(np.isfinite(moduli))
    assert abs(np.linalg.norm(moduli) - 1.0) < 1e-10


def test_canonical_angle_reduction():
    p = CoherentStateParams(3 * np.pi / 2, 0.0)
    assert p.theta == pytest.approx(np.pi / 2)
    assert p.phi == pytest.approx(np.pi)
    q = CoherentStateParams(0.5, -0.5)
    assert 0.0 <= q.phi < 2 * np.pi
    assert q.phi == pytest.approx(2 * np.pi - 0.5)


def test_unitary_of_diagonal_generator():
    U = unitary_from_hermitian(np.diag([1.0, -1.0]), np.pi)
    assert np.allclose(U, -np.eye(2), atol=1e-15)


def test_unitary_of_jz(spin1):
    U = unitary_from_hermitian(spin1.Jz, np.pi / 2)
    assert np.allclose(U, np.diag([np.exp(-1j * np.pi / 2), 1.0, np.exp(1j * np.pi / 2)]), atol=1e-15)


def test_unitary_of_jy_matches_taylor_series(spin1):
    A = -1j * np.pi * spin1.Jy
    series = np.eye(3, dtype=complex)
    term = np.eye(3, dtype=complex)
    for k in range(1, 60):
        term = term @ A / k
        series = series + term
    assert _max_abs(unitary_from_hermitian(spin1.Jy, np.pi) - series) < 1e-12


def test_unitary_is_unitary_for_random_hermitian(rng):
    a = rng.normal(size=(30, 30)) + 1j * rng.normal(size=(30, 30))
    H = a + a.conj().T
    U = unitary_from_hermitian(H, 0.37)
    assert _max_abs(U @ U.conj().T - np.eye(30)) < 1e-10


def test_unitary_rejects_non_hermitian():
    with pytest.raises(NonHermitianError):
        unitary_from_hermitian(np.array([[0.0, 1.0], [0.0, 0.0]]), 1.0)


def test_unitary_rejects_non_square():
    with pytest.raises(DimensionMismatchError):
        unitary_from_hermitian(np.zeros((2, 3)), 1.0)
