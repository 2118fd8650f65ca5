"""
@description
Collective angular-momentum operators and SU(2) coherent states in the
(2j+1)-dimensional symmetric subspace of N = 2j spins.

Key features:
- build_spin_system(N): dense J_x, J_y, J_z, J_+, J_- in the J_z basis m = j..-j
- coherent_state(sys, params): |Theta, Phi> = exp[i Theta (J_x sin Phi - J_y cos Phi)] |j, j>
- unitary_from_hermitian(H, scale): exp(-i scale H) by Hermitian eigendecomposition
- expectation / variance quadratic forms, Bloch-vector geometry helpers

@dependencies
- numpy for dense matrices
- scipy.linalg.eigh for the exponential, scipy.special for log-binomials

@notes
- Coherent-state phase convention: <j,m|Theta,Phi> =
  sqrt(C(2j, j+m)) cos(Theta/2)^(j+m) sin(Theta/2)^(j-m) exp(i (j-m) Phi).
  This is the rotated highest-weight state exactly; the m = +j amplitude is
  real and non-negative.
- Only even N (integer j) is supported.
"""

from dataclasses import dataclass
from functools import cached_property
from typing import Tuple

import numpy as np
from scipy import linalg
from scipy.special import gammaln, xlogy

from kicked_top.errors import ConfigError, DimensionMismatchError, NonHermitianError
from kicked_top.utils.logger import get_logger

logger = get_logger(__name__)

HERMITIAN_TOL = 1e-10


def _frozen(matrix: np.ndarray) -> np.ndarray:
    matrix.setflags(write=False)
    return matrix


@dataclass(frozen=True, eq=False)
class SpinSystem:
    """
    Collective spin operators for N = 2j spins.

    All matrices are dense complex (dim x dim) in the basis |j, m>,
    m = j, j-1, ..., -j, and are read-only after construction.
    """

    j: int
    Jx: np.ndarray
    Jy: np.ndarray
    Jz: np.ndarray
    Jplus: np.ndarray
    Jminus: np.ndarray

    @property
    def dim(self) -> int:
        return 2 * self.j + 1

    @property
    def n_spins(self) -> int:
        return 2 * self.j

    @cached_property
    def m_values(self) -> np.ndarray:
        """Diagonal of J_z, descending."""
        return _frozen(np.arange(self.j, -self.j - 1, -1, dtype=float))

    @cached_property
    def lowering_amplitudes(self) -> np.ndarray:
        """Sub-diagonal of J_-: <m-1|J_-|m> for m = j..-j+1."""
        return _frozen(np.real(np.diag(self.Jminus, -1)).copy())

    @cached_property
    def raise_lower_diagonal(self) -> np.ndarray:
        """Diagonal of J_+ J_-, i.e. j(j+1) - m(m-1)."""
        m = self.m_values
        return _frozen(self.j * (self.j + 1) - m * (m - 1))

    @cached_property
    def jy_eigenbasis(self) -> Tuple[np.ndarray, np.ndarray]:
        """
        Eigen-decomposition of J_y with the spectrum snapped to the exact
        integers -j..j (eigh returns them ascending).

        :return: (eigenvalues, eigenvectors as columns)
        """
        values, vectors = linalg.eigh(self.Jy)
        exact = np.arange(-self.j, self.j + 1, dtype=float)
        drift = float(np.max(np.abs(values - exact)))
        if drift > 1e-6:
            raise NonHermitianError(f"J_y spectrum drifted by {drift:.3e} from -j..j")
        return _frozen(exact), _frozen(vectors)


@dataclass(frozen=True)
class CoherentStateParams:
    """
    Bloch-sphere direction of a spin coherent state.

    Angles are reduced on construction to theta in [0, pi], phi in [0, 2 pi).
    """

    theta: float
    phi: float

    def __post_init__(self):
        theta = float(self.theta) % (2.0 * np.pi)
        phi = float(self.phi)
        if theta > np.pi:
            theta = 2.0 * np.pi - theta
            phi += np.pi
        object.__setattr__(self, "theta", theta)
        object.__setattr__(self, "phi", phi % (2.0 * np.pi))

    def bloch_vector(self) -> np.ndarray:
        return np.array([
            np.sin(self.theta) * np.cos(self.phi),
            np.sin(self.theta) * np.sin(self.phi),
            np.cos(self.theta),
        ])


def build_spin_system(n_spins: int) -> SpinSystem:
    """
    Build the collective operators for N spins in the symmetric subspace.

    :param n_spins: Number of spins N; must be even and >= 2 (integer j)
    :return: SpinSystem with j = N/2
    :raises ConfigError: if N is odd or smaller than 2
    """
    if int(n_spins) != n_spins or n_spins < 2 or int(n_spins) % 2:
        raise ConfigError(f"N must be an even integer >= 2, got {n_spins!r}")
    j = int(n_spins) // 2
    m = np.arange(j, -j - 1, -1, dtype=float)

    # <m+1|J_+|m> sits on the first super-diagonal for a descending basis
    ladder = np.sqrt(j * (j + 1.0) - m[1:] * (m[1:] + 1.0))
    raising = np.diag(ladder, 1).astype(complex)
    lowering = raising.conj().T

    jx = 0.5 * (raising + lowering)
    jy = -0.5j * (raising - lowering)
    jz = np.diag(m).astype(complex)

    # halves are exact, so these reproduce the ladder matrices bit for bit
    jplus = jx + 1j * jy
    jminus = jx - 1j * jy

    logger.debug("[spin_algebra] Built spin system N=%d (j=%d, dim=%d)", n_spins, j, 2 * j + 1)
    return SpinSystem(
        j=j,
        Jx=_frozen(jx),
        Jy=_frozen(jy),
        Jz=_frozen(jz),
        Jplus=_frozen(jplus),
        Jminus=_frozen(jminus),
    )


def coherent_amplitude_moduli(j: int, theta: float) -> np.ndarray:
    """
    Moduli sqrt(C(2j, k)) cos(theta/2)^(2j-k) sin(theta/2)^k for k = j - m = 0..2j.

    Evaluated in log space so that large j does not overflow; exact zeros
    at the poles are kept.
    """
    k = np.arange(2 * j + 1, dtype=float)
    n = 2.0 * j
    log_binom = gammaln(n + 1.0) - gammaln(k + 1.0) - gammaln(n - k + 1.0)
    c = abs(np.cos(theta / 2.0))
    s = abs(np.sin(theta / 2.0))
    with np.errstate(divide="ignore"):
        log_mod = 0.5 * log_binom + xlogy(n - k, c) + xlogy(k, s)
    return np.exp(log_mod)


def coherent_state(system: SpinSystem, params: CoherentStateParams) -> np.ndarray:
    """
    Spin coherent state pointing along (Theta, Phi).

    :param system: The spin system
    :param params: Bloch direction
    :return: Normalized complex vector of length dim
    """
    moduli = coherent_amplitude_moduli(system.j, params.theta)
    k = np.arange(system.dim)
    psi = moduli * np.exp(1j * k * params.phi)
    # the closed form is normalized analytically; this removes the last ulp
    return psi / np.linalg.norm(psi)


def unitary_from_hermitian(H: np.ndarray, scale: float) -> np.ndarray:
    """
    Compute exp(-i * scale * H) for a Hermitian H.

    :param H: Square Hermitian matrix
    :param scale: Real prefactor
    :return: Unitary matrix
    :raises NonHermitianError: if H deviates from H^dagger by more than 1e-10
    """
    H = np.asarray(H)
    if H.ndim != 2 or H.shape[0] != H.shape[1]:
        raise DimensionMismatchError(f"expected a square matrix, got shape {H.shape}")
    asymmetry = float(np.max(np.abs(H - H.conj().T))) if H.size else 0.0
    if asymmetry > HERMITIAN_TOL:
        raise NonHermitianError(f"generator is not Hermitian (max |H - H^+| = {asymmetry:.3e})")

    diagonal = np.diag(H)
    if not np.count_nonzero(H - np.diag(diagonal)):
        return np.diag(np.exp(-1j * scale * np.real(diagonal)))

    values, vectors = linalg.eigh(H)
    return (vectors * np.exp(-1j * scale * values)) @ vectors.conj().T


def expectation(op: np.ndarray, psi: np.ndarray) -> complex:
    """<psi|op|psi>."""
    return complex(np.vdot(psi, op @ psi))


def variance(op: np.ndarray, psi: np.ndarray) -> float:
    """<psi|op^2|psi> - <psi|op|psi>^2 for Hermitian op."""
    op_psi = op @ psi
    second = np.real(np.vdot(op_psi, op_psi))
    first = np.real(np.vdot(psi, op_psi))
    return float(second - first ** 2)


def mean_spin_direction(system: SpinSystem, psi: np.ndarray) -> CoherentStateParams:
    """Direction of <J>; the pole +z when <J> vanishes."""
    vec = np.array([
        np.real(expectation(system.Jx, psi)),
        np.real(expectation(system.Jy, psi)),
        np.real(expectation(system.Jz, psi)),
    ])
    norm = np.linalg.norm(vec)
    if norm < 1e-12:
        return CoherentStateParams(0.0, 0.0)
    vec = vec / norm
    return CoherentStateParams(float(np.arccos(np.clip(vec[2], -1.0, 1.0))),
                               float(np.arctan2(vec[1], vec[0])))


def great_circle_angle(p1: CoherentStateParams, p2: CoherentStateParams) -> float:
    """Angle between two Bloch directions."""
    cos_gamma = float(np.dot(p1.bloch_vector(), p2.bloch_vector()))
    return float(np.arccos(np.clip(cos_gamma, -1.0, 1.0)))
