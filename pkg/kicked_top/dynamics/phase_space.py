"""
@description
Husimi distributions on the Bloch sphere, wavepacket counting and
recurrence fidelity.

Key features:
- husimi(sys, state, n_theta, n_phi): P(Theta, Phi) = <Theta,Phi|rho|Theta,Phi> on a uniform grid
- count_peaks(grid, rel_threshold): connected super-level components, Phi-periodic
- recurrence_fidelity(psi0, psit): |<psi0|psit>|^2
- best_coherent_fit(sys, psi): closest coherent state (grid search + local ascent)

@dependencies
- numpy (FFT over Phi), scipy.ndimage.label, scipy.optimize.minimize, scipy.linalg.eigh
- pandas for the tabular export of a grid

@notes
- For a fixed Theta the overlap sum_k r_k(Theta) psi_k e^{-i k Phi} is a
  discrete Fourier series in Phi, so each grid row costs one FFT.
- Density matrices are split into eigenvectors; P is their weighted sum.
"""

from dataclasses import dataclass, field
from typing import Tuple, Union

import numpy as np
import pandas as pd
from scipy import linalg, ndimage, optimize

from kicked_top.dynamics.spin_algebra import (
    CoherentStateParams,
    SpinSystem,
    coherent_amplitude_moduli,
    coherent_state,
    mean_spin_direction,
)
from kicked_top.errors import ConfigError, DimensionMismatchError
from kicked_top.utils.logger import get_logger

logger = get_logger(__name__)

DEFAULT_N_THETA = 128
DEFAULT_N_PHI = 256
DEFAULT_PEAK_THRESHOLD = 0.5
MIN_GRID = 8


@dataclass(frozen=True)
class HusimiGrid:
    thetas: np.ndarray
    phis: np.ndarray
    values: np.ndarray = field(repr=False)

    @property
    def n_theta(self) -> int:
        return len(self.thetas)

    @property
    def n_phi(self) -> int:
        return len(self.phis)

    def normalization(self, j: int) -> float:
        """(2j+1)/(4 pi) * sum P sin(Theta) dTheta dPhi; 1 for a normalized state."""
        d_theta = np.pi / (self.n_theta - 1)
        d_phi = 2.0 * np.pi / self.n_phi
        weights = np.sin(self.thetas)[:, None]
        return float((2 * j + 1) / (4.0 * np.pi) * np.sum(self.values * weights) * d_theta * d_phi)

    def argmax_angles(self) -> CoherentStateParams:
        a, b = np.unravel_index(int(np.argmax(self.values)), self.values.shape)
        return CoherentStateParams(float(self.thetas[a]), float(self.phis[b]))

    def to_frame(self) -> pd.DataFrame:
        """Long format: one (theta, phi, value) row per grid point, theta-major."""
        theta_col, phi_col = np.meshgrid(self.thetas, self.phis, indexing="ij")
        return pd.DataFrame({
            "theta": theta_col.ravel(),
            "phi": phi_col.ravel(),
            "value": self.values.ravel(),
        })


def _grid_axes(n_theta: int, n_phi: int) -> Tuple[np.ndarray, np.ndarray]:
    if n_theta < MIN_GRID or n_phi < MIN_GRID:
        raise ConfigError(f"Husimi grid must be at least {MIN_GRID}x{MIN_GRID}, got {n_theta}x{n_phi}")
    thetas = np.linspace(0.0, np.pi, n_theta)
    phis = 2.0 * np.pi * np.arange(n_phi) / n_phi
    return thetas, phis


def _overlap_rows(j: int, psi: np.ndarray, thetas: np.ndarray, n_phi: int) -> np.ndarray:
    """<Theta_a, Phi_b|psi> for the whole grid."""
    dim = 2 * j + 1
    rows = np.empty((len(thetas), n_phi), dtype=complex)
    pad = (-dim) % n_phi
    for a, theta in enumerate(thetas):
        coeffs = coherent_amplitude_moduli(j, theta) * psi
        if dim > n_phi:
            # alias k -> k mod n_phi before the length-n_phi transform
            coeffs = np.concatenate([coeffs, np.zeros(pad, dtype=complex)]).reshape(-1, n_phi).sum(axis=0)
        rows[a] = np.fft.fft(coeffs, n=n_phi)
    return rows


def _pure_husimi(j: int, psi: np.ndarray, thetas: np.ndarray, n_phi: int) -> np.ndarray:
    return np.abs(_overlap_rows(j, psi, thetas, n_phi)) ** 2


def husimi(system: SpinSystem, state: np.ndarray,
           n_theta: int = DEFAULT_N_THETA, n_phi: int = DEFAULT_N_PHI) -> HusimiGrid:
    """
    Husimi function of a pure state vector or a density matrix.

    :param system: Spin system
    :param state: Vector of length dim, or dim x dim density matrix
    :param n_theta: Number of Theta samples (poles included)
    :param n_phi: Number of Phi samples
    :return: HusimiGrid
    """
    thetas, phis = _grid_axes(n_theta, n_phi)
    state = np.asarray(state)
    if state.shape == (system.dim,):
        values = _pure_husimi(system.j, state, thetas, n_phi)
    elif state.shape == (system.dim, system.dim):
        weights, vectors = linalg.eigh(0.5 * (state + state.conj().T))
        keep = weights > 1e-14 * max(float(np.max(weights)), 0.0)
        values = np.zeros((n_theta, n_phi))
        for w, vec in zip(weights[keep], vectors[:, keep].T):
            values += w * _pure_husimi(system.j, vec, thetas, n_phi)
    else:
        raise DimensionMismatchError(f"state shape {state.shape} does not match dim {system.dim}")
    return HusimiGrid(thetas=thetas, phis=phis, values=np.clip(values, 0.0, 1.0))


def count_peaks(grid: HusimiGrid, rel_threshold: float = DEFAULT_PEAK_THRESHOLD) -> int:
    """
    Number of 8-connected components of {P > rel_threshold * max P},
    with the Phi axis treated as periodic.
    """
    if not 0.0 < rel_threshold < 1.0:
        raise ConfigError(f"rel_threshold must lie in (0, 1), got {rel_threshold}")
    mask = grid.values > rel_threshold * float(np.max(grid.values))
    labels, count = ndimage.label(mask, structure=np.ones((3, 3), dtype=int))
    if count == 0:
        return 0

    parent = list(range(count + 1))

    def find(x: int) -> int:
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    first, last = labels[:, 0], labels[:, -1]
    n_rows = labels.shape[0]
    for a in range(n_rows):
        if not first[a]:
            continue
        for b in (a - 1, a, a + 1):
            if 0 <= b < n_rows and last[b]:
                root_a, root_b = find(first[a]), find(last[b])
                if root_a != root_b:
                    parent[root_a] = root_b

    return len({find(label) for label in range(1, count + 1)})


def recurrence_fidelity(psi0: np.ndarray, psit: np.ndarray) -> float:
    """|<psi0|psit>|^2."""
    if psi0.shape != psit.shape:
        raise DimensionMismatchError(f"shapes differ: {psi0.shape} vs {psit.shape}")
    return float(np.abs(np.vdot(psi0, psit)) ** 2)


def best_coherent_fit(system: SpinSystem, psi: np.ndarray,
                      n_theta: int = 32, n_phi: int = 64) -> Tuple[CoherentStateParams, float]:
    """
    Coherent state with the largest overlap with psi.

    Seeds: the Husimi maximum on a coarse grid and the mean-spin direction;
    the better seed is refined by Nelder-Mead on -P(Theta, Phi).

    :return: (direction, fidelity)
    """
    grid = husimi(system, psi, n_theta, n_phi)
    seeds = [grid.argmax_angles(), mean_spin_direction(system, psi)]

    def objective(x: np.ndarray) -> float:
        return -recurrence_fidelity(coherent_state(system, CoherentStateParams(x[0], x[1])), psi)

    start = min(seeds, key=lambda p: objective(np.array([p.theta, p.phi])))
    result = optimize.minimize(
        objective,
        x0=np.array([start.theta, start.phi]),
        method="Nelder-Mead",
        options={"xatol": 1e-10, "fatol": 1e-15, "maxiter": 4000},
    )
    best = CoherentStateParams(float(result.x[0]), float(result.x[1]))
    return best, float(-result.fun)
