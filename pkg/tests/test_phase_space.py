import numpy as np
import pytest

from kicked_top.dynamics.dissipative_evolution import density_from_pure
from kicked_top.dynamics.floquet import build_floquet, evolve, resonance_beta
from kicked_top.dynamics.phase_space import (
    best_coherent_fit,
    count_peaks,
    husimi,
    recurrence_fidelity,
)
from kicked_top.dynamics.spin_algebra import (
    CoherentStateParams,
    build_spin_system,
    coherent_state,
    great_circle_angle,
)
from kicked_top.errors import ConfigError, DimensionMismatchError
from tests.conftest import random_state


def _cat(system, first, second):
    psi = coherent_state(system, first) + coherent_state(system, second)
    return psi / np.linalg.norm(psi)


def test_coherent_state_peaks_at_its_grid_point(spin10):
    grid = husimi(spin10, np.zeros(spin10.dim), 64, 128)
    theta, phi = grid.thetas[20], grid.phis[40]
    psi = coherent_state(spin10, CoherentStateParams(theta, phi))
    grid = husimi(spin10, psi, 64, 128)
    assert grid.values[20, 40] == pytest.approx(1.0, abs=1e-12)
    assert np.unravel_index(np.argmax(grid.values), grid.values.shape) == (20, 40)
    best = grid.argmax_angles()
    assert best.theta == pytest.approx(theta)
    assert best.phi == pytest.approx(phi)


def test_top_state_matches_closed_form(spin10):
    psi = np.zeros(spin10.dim, dtype=complex)
    psi[0] = 1.0
    grid = husimi(spin10, psi, 32, 16)
    expected = np.cos(grid.thetas / 2) ** (4 * spin10.j)
    assert np.allclose(grid.values, expected[:, None], atol=1e-12)


def test_normalization_of_coherent_state(spin10, psi_generic):
    grid = husimi(spin10, psi_generic)
    assert grid.normalization(spin10.j) == pytest.approx(1.0, rel=1e-3)
    assert grid.values.min() >= 0.0 and grid.values.max() <= 1.0


def test_density_matrix_husimi_is_linear(spin10):
    a = coherent_state(spin10, CoherentStateParams(0.6, 0.2))
    b = coherent_state(spin10, CoherentStateParams(2.1, 3.9))
    rho = 0.3 * density_from_pure(a) + 0.7 * density_from_pure(b)
    mixed = husimi(spin10, rho, 32, 64)
    expected = 0.3 * husimi(spin10, a, 32, 64).values + 0.7 * husimi(spin10, b, 32, 64).values
    assert np.allclose(mixed.values, expected, atol=1e-12)


def test_pure_density_matches_vector(spin10, psi_generic):
    from_vector = husimi(spin10, psi_generic, 32, 64).values
    from_density = husimi(spin10, density_from_pure(psi_generic), 32, 64).values
    assert np.allclose(from_vector, from_density, atol=1e-12)


def test_fine_grid_aliasing_matches_direct_overlaps(rng):
    s = build_spin_system(40)
    psi = random_state(rng, s.dim)
    grid = husimi(s, psi, 9, 16)
    direct = np.empty_like(grid.values)
    for a, theta in enumerate(grid.thetas):
        for b, phi in enumerate(grid.phis):
            direct[a, b] = abs(np.vdot(coherent_state(s, CoherentStateParams(theta, phi)), psi)) ** 2
    assert np.allclose(grid.values, direct, atol=1e-12)


def test_single_packet_counts_once(spin10, psi_generic):
    assert count_peaks(husimi(spin10, psi_generic)) == 1


def test_packet_on_phi_seam_counts_once(spin10):
    psi = coherent_state(spin10, CoherentStateParams(np.pi / 2, 0.0))
    grid = husimi(spin10, psi)
    assert grid.values[:, 0].max() > 0.99
    assert count_peaks(grid) == 1


def test_cat_state_counts_twice(spin10):
    psi = _cat(spin10, CoherentStateParams(np.pi / 2, 0.0), CoherentStateParams(np.pi / 2, np.pi))
    assert count_peaks(husimi(spin10, psi)) == 2


@pytest.mark.parametrize("threshold", [0.0, 1.0, -0.2])
def test_count_peaks_rejects_bad_threshold(spin10, psi_generic, threshold):
    with pytest.raises(ConfigError):
        count_peaks(husimi(spin10, psi_generic, 16, 16), threshold)


def test_grid_and_shape_validation(spin10, psi_generic):
    with pytest.raises(ConfigError):
        husimi(spin10, psi_generic, 4, 64)
    with pytest.raises(DimensionMismatchError):
        husimi(spin10, np.ones(5), 16, 16)
    with pytest.raises(DimensionMismatchError):
        recurrence_fidelity(psi_generic, np.ones(5))


def test_grid_frame_is_theta_major(spin10, psi_generic):
    grid = husimi(spin10, psi_generic, 8, 8)
    frame = grid.to_frame()
    assert list(frame.columns) == ["theta", "phi", "value"]
    assert len(frame) == 64
    assert frame["theta"].iloc[0] == frame["theta"].iloc[7] == 0.0
    assert frame["value"].iloc[9] == grid.values[1, 1]


def test_resonant_packet_counts():
    s = build_spin_system(112)
    psi0 = coherent_state(s, CoherentStateParams(np.pi / 4, np.pi / 4))
    F = build_floquet(s, np.pi / 2, resonance_beta(s.j, 1, 4))
    expected = {0: 1, 3: 2, 6: 4, 8: 1}
    for step, count in expected.items():
        psi = evolve(F, psi0, step)
        assert count_peaks(husimi(s, psi)) == count, f"step {step}"
        assert count_peaks(husimi(s, psi, 256, 512)) == count, f"step {step} (fine grid)"
    assert recurrence_fidelity(psi0, evolve(F, psi0, 8)) == pytest.approx(1.0, abs=1e-9)


def test_best_coherent_fit_recovers_direction(spin10):
    target = CoherentStateParams(1.0, 2.0)
    fitted, fidelity = best_coherent_fit(spin10, coherent_state(spin10, target))
    assert fidelity > 1.0 - 1e-9
    assert great_circle_angle(fitted, target) < 1e-4


def test_best_coherent_fit_of_cat_state_is_poor(spin10):
    psi = _cat(spin10, CoherentStateParams(np.pi / 2, 0.0), CoherentStateParams(np.pi / 2, np.pi))
    _, fidelity = best_coherent_fit(spin10, psi)
    assert fidelity < 0.6
