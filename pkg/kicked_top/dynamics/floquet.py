"""
@description
One-period Floquet operator of the quantum kicked top, resonance parameters
and exact-recurrence detection.

Key features:
- build_floquet(sys, alpha, beta): U = exp(-i alpha J_z) exp(-i beta J_y^2 / (2j))
- resonance_beta(j, r, s): beta = 4 pi j r / s for coprime (r, s)
- check_recurrence(F, max_period, tol): smallest n with U^n = e^{i phi} I
- entanglement_free_check(F): does one period map coherent states to coherent states?

@dependencies
- numpy
- kicked_top.dynamics.spin_algebra for the operators and coherent states
- kicked_top.dynamics.phase_space for the best-fit coherent state

@notes
- The kick is assembled in the J_y eigenbasis with the exact integer spectrum,
  so resonant phases beta m^2 / (2j) carry no eigen-solver error.
- Recurrence is tested up to one global phase (phase of tr(U^n)).
- Powers are built by repeated multiplication of the stored unitary.
"""

from dataclasses import dataclass, field
from math import gcd
from typing import Dict, Iterable, Optional, Sequence, Tuple

import numpy as np

from kicked_top.dynamics.spin_algebra import (
    CoherentStateParams,
    SpinSystem,
    coherent_state,
)
from kicked_top.dynamics.phase_space import best_coherent_fit
from kicked_top.errors import ConfigError, DimensionMismatchError
from kicked_top.utils.logger import get_logger

logger = get_logger(__name__)

DEFAULT_RECURRENCE_TOL = 1e-8
ENTANGLEMENT_FREE_TOL = 1e-6

# named resonance cases studied at alpha = pi/2: (r, s)
RESONANCE_CASES: Dict[str, Tuple[int, int]] = {
    "i": (1, 2),    # beta = 2 pi j, period 2
    "ii": (1, 4),   # beta = pi j, period 8
    "iii": (1, 8),  # beta = pi j / 2, period 48
}


@dataclass(frozen=True, eq=False)
class FloquetOperator:
    """
    U(alpha, beta) for one kick period, kept together with its kick factor
    so that alpha can be varied without rebuilding the kick.
    """

    system: SpinSystem
    alpha: float
    beta: float
    unitary: np.ndarray = field(repr=False)
    kick: np.ndarray = field(repr=False)
    period_T: float = 1.0

    @property
    def dim(self) -> int:
        return self.system.dim

    def with_alpha(self, alpha: float) -> "FloquetOperator":
        """Same kick, different rotation angle."""
        return FloquetOperator(
            system=self.system,
            alpha=alpha,
            beta=self.beta,
            unitary=_rotate(self.system, alpha, self.kick),
            kick=self.kick,
            period_T=self.period_T,
        )


@dataclass(frozen=True)
class RecurrenceResult:
    period: int
    global_phase: complex
    residual: float


def _rotate(system: SpinSystem, alpha: float, kick: np.ndarray) -> np.ndarray:
    # exp(-i alpha J_z) is diagonal: scale rows of the kick
    unitary = np.exp(-1j * alpha * system.m_values)[:, None] * kick
    unitary.setflags(write=False)
    return unitary


def kick_operator(system: SpinSystem, beta: float) -> np.ndarray:
    """exp(-i beta J_y^2 / (2j)) from the J_y eigenbasis."""
    values, vectors = system.jy_eigenbasis
    phases = np.exp(-1j * beta * values ** 2 / (2.0 * system.j))
    kick = (vectors * phases) @ vectors.conj().T
    kick.setflags(write=False)
    return kick


def build_floquet(system: SpinSystem, alpha: float, beta: float, period_T: float = 1.0) -> FloquetOperator:
    """
    Build the one-period unitary; the kick acts on the state first, then the rotation.

    :param system: Spin system
    :param alpha: Rotation angle per period (the parameter to estimate)
    :param beta: Kick strength
    :param period_T: Kick period; only used to label times t = n T
    :return: FloquetOperator
    """
    kick = kick_operator(system, beta)
    logger.debug("[floquet] Built U for j=%d alpha=%.6g beta=%.6g", system.j, alpha, beta)
    return FloquetOperator(
        system=system,
        alpha=float(alpha),
        beta=float(beta),
        unitary=_rotate(system, alpha, kick),
        kick=kick,
        period_T=float(period_T),
    )


def resonance_beta(j: float, r: int, s: int) -> float:
    """
    Resonant kick strength 4 pi j r / s.

    :raises ConfigError: if r, s are not positive coprime integers
    """
    if int(r) != r or int(s) != s or r < 1 or s < 1:
        raise ConfigError(f"r and s must be positive integers, got r={r!r}, s={s!r}")
    if gcd(int(r), int(s)) != 1:
        raise ConfigError(f"r={r} and s={s} are not coprime; pass the reduced fraction")
    return 4.0 * np.pi * j * int(r) / int(s)


def resonance_case(name: str) -> Tuple[int, int]:
    """(r, s) for the named cases 'i', 'ii', 'iii'."""
    try:
        return RESONANCE_CASES[name.strip().lower()]
    except KeyError:
        raise ConfigError(f"unknown resonance case {name!r}; expected one of {sorted(RESONANCE_CASES)}")


def evolve(F: FloquetOperator, psi: np.ndarray, n: int) -> np.ndarray:
    """Apply U n times to psi."""
    if psi.shape != (F.dim,):
        raise DimensionMismatchError(f"state has shape {psi.shape}, expected ({F.dim},)")
    out = np.asarray(psi, dtype=complex)
    for _ in range(int(n)):
        out = F.unitary @ out
    return out


def _phase_residual(power: np.ndarray) -> Tuple[float, complex]:
    trace = np.trace(power)
    phase = trace / abs(trace) if abs(trace) > 1e-300 else 1.0 + 0.0j
    residual = float(np.max(np.abs(power - phase * np.eye(power.shape[0]))))
    return residual, complex(phase)


def recurrence_residual(F: FloquetOperator, n: int) -> Tuple[float, complex]:
    """
    Distance of U^n from its best global-phase multiple of the identity.

    :return: (max-norm residual, global phase)
    """
    power = np.eye(F.dim, dtype=complex)
    for _ in range(int(n)):
        power = F.unitary @ power
    return _phase_residual(power)


def check_recurrence(F: FloquetOperator, max_period: int = 100,
                     tol: float = DEFAULT_RECURRENCE_TOL) -> Optional[RecurrenceResult]:
    """
    Find the smallest n <= max_period with U^n = e^{i phi} I within tol.

    :return: RecurrenceResult, or None if no power qualifies
    """
    if max_period < 1:
        raise ConfigError(f"max_period must be >= 1, got {max_period}")
    if tol <= 0:
        raise ConfigError(f"tol must be positive, got {tol}")

    power = np.eye(F.dim, dtype=complex)
    best = (np.inf, 0)
    for n in range(1, int(max_period) + 1):
        power = F.unitary @ power
        residual, phase = _phase_residual(power)
        if residual < tol:
            logger.info("[floquet] Recurrence at n=%d (residual %.3e) for j=%d beta=%.6g",
                        n, residual, F.system.j, F.beta)
            return RecurrenceResult(period=n, global_phase=phase, residual=residual)
        best = min(best, (residual, n))
    logger.info("[floquet] No recurrence up to n=%d (best residual %.3e at n=%d)",
                max_period, best[0], best[1])
    return None


def default_probe_states() -> Sequence[CoherentStateParams]:
    return (
        CoherentStateParams(np.pi / 2, np.pi / 4),
        CoherentStateParams(np.pi / 4, np.pi / 4),
        CoherentStateParams(2.0, 4.0),
    )


def entanglement_free_check(F: FloquetOperator,
                            samples: Optional[Iterable[CoherentStateParams]] = None,
                            steps: int = 1,
                            tol: float = ENTANGLEMENT_FREE_TOL) -> bool:
    """
    True iff evolving every sampled coherent state by `steps` periods lands on
    another coherent state (best-fit fidelity > 1 - tol).
    """
    probes = list(samples) if samples is not None else list(default_probe_states())
    for params in probes:
        psi = evolve(F, coherent_state(F.system, params), steps)
        fitted, fidelity = best_coherent_fit(F.system, psi)
        logger.debug("[floquet] probe (%.3f, %.3f) -> best fit (%.3f, %.3f) fidelity %.12f",
                     params.theta, params.phi, fitted.theta, fitted.phi, fidelity)
        if fidelity <= 1.0 - tol:
            return False
    return True
