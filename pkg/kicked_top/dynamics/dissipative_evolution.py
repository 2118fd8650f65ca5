"""
@description
Density-matrix evolution under the noisy stroboscopic map
rho(t+T) = U [exp(Gamma T) rho(t)] U^dagger with collective superradiant
damping, plus mixed-state fidelity and the mixed-state QFI.

Key features:
- apply_superradiant_generator(sys, rho, gamma): gamma (2 J_- rho J_+ - {J_+ J_-, rho})
- dissipative_step(F, traj, substeps): fixed-step RK4 over one period, then U . U^dagger;
  carries d rho / d alpha when the trajectory has one
- fidelity_mixed(rho1, rho2): Uhlmann fidelity ||sqrt(rho1) sqrt(rho2)||_1^2
- qfi_mixed: 4 (1 - F_eps) / eps^2 over alpha +/- eps branches, Richardson-extrapolated
- qfi_from_derivative / simulate_dissipative_trace: the eps -> 0 limit of the same
  echo, evaluated from rho and d rho / d alpha at every checkpoint

@dependencies
- numpy, scipy.linalg (eigh, eigvalsh, svdvals)
- kicked_top.dynamics.pure_evolution for the echo extrapolation and trace types

@notes
- Only the dissipator acts between kicks; the rotation lives inside U.
- The generator is applied through the ladder structure (J_- is one
  sub-diagonal, J_+ J_- is diagonal), so one call is O(dim^2).
- The generator's eigenvalues are -gamma (d_a + d_b) with d = diag(J_+ J_-);
  the substep size is chosen against the largest of them.
- "collective" normalization uses gamma as written; "scaled" writes the
  dissipator in J/j, i.e. divides gamma by j^2.
"""

from dataclasses import dataclass, field
from math import ceil, inf
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy import linalg

from kicked_top.dynamics.floquet import FloquetOperator, build_floquet
from kicked_top.dynamics.pure_evolution import (
    DEFAULT_EPS_LADDER,
    EchoEstimate,
    QfiTrace,
    echo_estimate,
    trace_params,
    validate_eps_ladder,
)
from kicked_top.dynamics.spin_algebra import SpinSystem
from kicked_top.errors import ConfigError, DimensionMismatchError, NumericalIntegrityError
from kicked_top.utils.logger import get_logger

logger = get_logger(__name__)

TARGET_DECAY_STEP = 0.01      # gamma N h
GUARD_DECAY_STEP = 0.05
TARGET_STIFF_STEP = 0.5       # h lambda_max
GUARD_STIFF_STEP = 2.5        # RK4 real-axis stability ends near 2.78
TRACE_RENORM_TOL = 1e-10
POSITIVITY_TOL = 1e-6
CLIP_RELATIVE = 1e-14
CLIP_WARN = 1e-8
SLD_CUTOFF = 1e-12            # eigenvalue pairs with lambda_k + lambda_l below this * max are dropped
TARGET_ECHO_LOSS = 1e-3       # 1 - F at the largest eps of a calibrated mixed ladder
EPS_RESCALE_LIMIT = 1e3
NORMALIZATIONS = ("collective", "scaled")


@dataclass(frozen=True)
class DensityTrajectory:
    rho: np.ndarray = field(repr=False)
    step: int
    gamma: float
    alpha: float
    trace_error: float = 0.0
    trace_correction: float = 0.0
    min_eigenvalue: float = float("nan")
    drho: Optional[np.ndarray] = field(default=None, repr=False)

    @classmethod
    def start(cls, rho0: np.ndarray, gamma: float, alpha: float,
              with_derivative: bool = False) -> "DensityTrajectory":
        rho0 = np.asarray(rho0, dtype=complex)
        drho = np.zeros_like(rho0) if with_derivative else None
        return cls(rho=rho0, step=0, gamma=float(gamma), alpha=float(alpha), drho=drho)


def density_from_pure(psi: np.ndarray) -> np.ndarray:
    """|psi><psi|."""
    psi = np.asarray(psi, dtype=complex)
    return np.outer(psi, psi.conj())


def purity(rho: np.ndarray) -> float:
    """tr(rho^2); for Hermitian rho this is the squared Frobenius norm."""
    return float(np.sum(np.abs(rho) ** 2))


def effective_decay_rate(system: SpinSystem, gamma: float, normalization: str = "collective") -> float:
    """
    Coefficient handed to the generator.

    :param normalization: "collective" (gamma unchanged) or "scaled" (gamma / j^2)
    """
    if normalization not in NORMALIZATIONS:
        raise ConfigError(f"unknown decay normalization {normalization!r}; expected one of {NORMALIZATIONS}")
    if gamma < 0:
        raise ConfigError(f"gamma must be >= 0, got {gamma}")
    if normalization == "scaled":
        return float(gamma) / float(system.j) ** 2
    return float(gamma)


def apply_superradiant_generator(system: SpinSystem, rho: np.ndarray, gamma: float) -> np.ndarray:
    """
    Gamma rho = gamma (2 J_- rho J_+ - J_+ J_- rho - rho J_+ J_-).

    :param system: Spin system providing the ladder amplitudes
    :param rho: dim x dim matrix
    :param gamma: Collective decay rate
    :return: New matrix, Hermitian and traceless when rho is Hermitian
    """
    if rho.shape != (system.dim, system.dim):
        raise DimensionMismatchError(f"rho has shape {rho.shape}, expected ({system.dim}, {system.dim})")
    ladder = system.lowering_amplitudes
    diag = system.raise_lower_diagonal
    out = np.zeros_like(rho, dtype=complex)
    # (J_- rho J_+)[a, b] = l[a-1] rho[a-1, b-1] l[b-1]
    out[1:, 1:] = 2.0 * ladder[:, None] * rho[:-1, :-1] * ladder[None, :]
    out -= (diag[:, None] + diag[None, :]) * rho
    return gamma * out


def fastest_decay_rate(system: SpinSystem, gamma: float) -> float:
    return 2.0 * gamma * float(np.max(system.raise_lower_diagonal))


def default_substeps(system: SpinSystem, gamma: float, period_T: float = 1.0) -> int:
    """Smallest count with gamma N h <= 0.01 and h lambda_max <= 0.5."""
    if gamma < 0:
        raise ConfigError(f"gamma must be >= 0, got {gamma}")
    if gamma == 0:
        return 1
    by_decay = ceil(gamma * system.n_spins * period_T / TARGET_DECAY_STEP)
    by_stiffness = ceil(fastest_decay_rate(system, gamma) * period_T / TARGET_STIFF_STEP)
    return max(1, by_decay, by_stiffness)


def check_step_guard(system: SpinSystem, gamma: float, period_T: float, substeps: int) -> None:
    """
    :raises ConfigError: if substeps < 1
    :raises NumericalIntegrityError: if the substep is too coarse for RK4
    """
    if int(substeps) != substeps or substeps < 1:
        raise ConfigError(f"substeps must be a positive integer, got {substeps!r}")
    h = period_T / substeps
    decay = gamma * system.n_spins * h
    stiff = fastest_decay_rate(system, gamma) * h
    if decay >= GUARD_DECAY_STEP or stiff > GUARD_STIFF_STEP:
        raise NumericalIntegrityError(
            f"substep h={h:.3e} too coarse (gamma N h = {decay:.3e}, h lambda_max = {stiff:.3e}); "
            f"use at least {default_substeps(system, gamma, period_T)} substeps"
        )


def integrate_dissipator(system: SpinSystem, rho: np.ndarray, gamma: float,
                         duration: float, substeps: int) -> np.ndarray:
    """Classical RK4 for d rho/dt = Gamma rho with `substeps` equal steps."""
    if gamma == 0:
        return rho.copy()
    h = duration / substeps
    out = rho
    for _ in range(substeps):
        k1 = apply_superradiant_generator(system, out, gamma)
        k2 = apply_superradiant_generator(system, out + 0.5 * h * k1, gamma)
        k3 = apply_superradiant_generator(system, out + 0.5 * h * k2, gamma)
        k4 = apply_superradiant_generator(system, out + h * k3, gamma)
        out = out + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return out


def min_eigenvalue(rho: np.ndarray) -> float:
    return float(linalg.eigvalsh(rho, subset_by_index=[0, 0])[0])


def _positivity_error(step: int, lowest: float, substeps: int, period_T: float) -> NumericalIntegrityError:
    return NumericalIntegrityError(
        f"positivity lost at step {step}: min eigenvalue {lowest:.3e} "
        f"(substeps={substeps}, h={period_T / substeps:.3e}); increase substeps"
    )


def dissipative_step(F: FloquetOperator, traj: DensityTrajectory, substeps: Optional[int] = None,
                     check_positivity: bool = True) -> DensityTrajectory:
    """
    One noisy period: dissipator over T, then conjugation by U.

    When traj.drho is set it is advanced too:
    d rho' = -i [J_z, rho'] + U exp(Gamma T)(d rho) U^dagger.

    :param F: Floquet operator (U at the branch's alpha)
    :param traj: Current state
    :param substeps: RK4 steps per period; default_substeps when None
    :param check_positivity: compute the minimum eigenvalue and abort below -1e-6
    :return: DensityTrajectory one step later
    :raises NumericalIntegrityError: on a positivity violation or a too-coarse substep
    """
    system = F.system
    if traj.rho.shape != (F.dim, F.dim):
        raise DimensionMismatchError(f"rho has shape {traj.rho.shape}, expected ({F.dim}, {F.dim})")
    if substeps is None:
        substeps = default_substeps(system, traj.gamma, F.period_T)
    check_step_guard(system, traj.gamma, F.period_T, substeps)

    U = F.unitary
    rho = integrate_dissipator(system, traj.rho, traj.gamma, F.period_T, substeps)
    rho = U @ rho @ U.conj().T
    rho = 0.5 * (rho + rho.conj().T)

    drho = None
    if traj.drho is not None:
        m = system.m_values
        drho = integrate_dissipator(system, traj.drho, traj.gamma, F.period_T, substeps)
        drho = U @ drho @ U.conj().T - 1j * (m[:, None] - m[None, :]) * rho
        drho = 0.5 * (drho + drho.conj().T)

    trace = float(np.real(np.trace(rho)))
    trace_error = trace - 1.0
    correction = traj.trace_correction
    if abs(trace_error) > TRACE_RENORM_TOL:
        if drho is not None:
            drho = (drho - rho * float(np.real(np.trace(drho))) / trace) / trace
        rho = rho / trace
        correction += abs(trace_error)
        logger.debug("[dissipative_evolution] step %d: renormalized trace error %.3e",
                     traj.step + 1, trace_error)

    lowest = float("nan")
    if check_positivity:
        lowest = min_eigenvalue(rho)
        if lowest < -POSITIVITY_TOL:
            raise _positivity_error(traj.step + 1, lowest, substeps, F.period_T)

    return DensityTrajectory(rho=rho, step=traj.step + 1, gamma=traj.gamma, alpha=traj.alpha,
                             trace_error=trace_error, trace_correction=correction, min_eigenvalue=lowest,
                             drho=drho)


def _matrix_sqrt(rho: np.ndarray) -> Tuple[np.ndarray, float]:
    values, vectors = linalg.eigh(0.5 * (rho + rho.conj().T))
    cutoff = CLIP_RELATIVE * max(float(np.max(values)), 0.0)
    small = values < cutoff
    clipped = float(np.sum(np.abs(values[small & (values < 0)])))
    values = np.where(small, 0.0, values)
    return (vectors * np.sqrt(values)) @ vectors.conj().T, clipped


def fidelity_mixed(rho1: np.ndarray, rho2: np.ndarray) -> float:
    """
    Uhlmann fidelity (tr |sqrt(rho1) sqrt(rho2)|)^2.

    Square roots come from eigh with eigenvalues below 1e-14 * max set to 0;
    the trace norm is the sum of singular values.
    """
    if rho1.shape != rho2.shape:
        raise DimensionMismatchError(f"shapes differ: {rho1.shape} vs {rho2.shape}")
    sqrt1, clipped1 = _matrix_sqrt(rho1)
    sqrt2, clipped2 = _matrix_sqrt(rho2)
    if clipped1 + clipped2 > CLIP_WARN:
        logger.warning("[dissipative_evolution] Clipped negative eigenvalue weight %.3e in fidelity",
                       clipped1 + clipped2)
    return _fidelity_from_roots(sqrt1, sqrt2)


def _fidelity_from_roots(sqrt1: np.ndarray, sqrt2: np.ndarray) -> float:
    trace_norm = float(np.sum(linalg.svdvals(sqrt1 @ sqrt2)))
    return float(min(1.0, trace_norm ** 2))


def qfi_from_derivative(rho: np.ndarray, drho: np.ndarray) -> Tuple[float, float]:
    """
    lim_{eps -> 0} 4 (1 - F(rho, rho + eps drho)) / eps^2
    = 2 sum_{k,l} |<k|drho|l>|^2 / (lambda_k + lambda_l) in the eigenbasis of rho.

    Pairs with lambda_k + lambda_l below SLD_CUTOFF * max(lambda) are dropped.

    :return: (qfi, smallest eigenvalue of rho before clipping)
    """
    if rho.shape != drho.shape:
        raise DimensionMismatchError(f"shapes differ: {rho.shape} vs {drho.shape}")
    values, vectors = linalg.eigh(0.5 * (rho + rho.conj().T))
    lowest = float(values[0])
    values = np.clip(values, 0.0, None)
    d = vectors.conj().T @ drho @ vectors
    total = values[:, None] + values[None, :]
    keep = total > SLD_CUTOFF * max(float(values[-1]), 1e-300)
    qfi = 2.0 * float(np.sum(np.abs(d[keep]) ** 2 / total[keep]))
    return qfi, lowest


def decay_horizon(system: SpinSystem, gamma: float) -> float:
    """Periods after which superradiant decay dominates: ceil(1 / (gamma N)), inf for gamma = 0."""
    if gamma <= 0:
        return inf
    return float(ceil(1.0 / (gamma * system.n_spins)))


def mixed_eps_scale(system: SpinSystem, gamma: float, n: int) -> float:
    """j sqrt(max(1, min(n, decay_horizon))): the pure generator scale, frozen once decay dominates."""
    return float(system.j * np.sqrt(max(1.0, min(float(n), decay_horizon(system, gamma)))))


def qfi_mixed(system: SpinSystem, alpha: float, beta: float, gamma: float, psi0: np.ndarray, n: int,
              eps_list: Sequence[float] = DEFAULT_EPS_LADDER, substeps: Optional[int] = None,
              period_T: float = 1.0) -> EchoEstimate:
    """
    Echo-based QFI of the noisy map after n periods.

    Branches at alpha and alpha +/- eps share the same noise. The ladder is
    divided by mixed_eps_scale, then a pilot branch at the largest entry
    rescales it so that 1 - F there is about TARGET_ECHO_LOSS; the Uhlmann
    fidelity of nearby mixed states is only good to ~1e-8.
    """
    ladder = validate_eps_ladder(eps_list)
    if gamma < 0:
        raise ConfigError(f"gamma must be >= 0, got {gamma}")
    if n == 0:
        return EchoEstimate(value=0.0, residual=0.0, samples=tuple((e, 0.0) for e in ladder))

    base = build_floquet(system, alpha, beta, period_T)
    if substeps is None:
        substeps = default_substeps(system, gamma, period_T)
    rho0 = density_from_pure(psi0)

    def run(F: FloquetOperator) -> np.ndarray:
        traj = DensityTrajectory.start(rho0, gamma, F.alpha)
        for step in range(int(n)):
            traj = dissipative_step(F, traj, substeps, check_positivity=step == n - 1)
        return traj.rho

    reference, _ = _matrix_sqrt(run(base))

    def loss(eps: float) -> float:
        shifted, _ = _matrix_sqrt(run(base.with_alpha(alpha + eps)))
        return 1.0 - _fidelity_from_roots(reference, shifted)

    scale = mixed_eps_scale(system, gamma, n)
    largest = max(ladder) / scale
    pilot = loss(largest)
    factor = EPS_RESCALE_LIMIT if pilot <= 0.0 else float(np.sqrt(TARGET_ECHO_LOSS / pilot))
    factor = float(np.clip(factor, 1.0 / EPS_RESCALE_LIMIT, EPS_RESCALE_LIMIT))
    logger.debug("[dissipative_evolution] pilot 1-F %.3e at eps %.3e; ladder rescaled by %.3g",
                 pilot, largest, factor)

    def sample(eps: float) -> Tuple[float, float]:
        return loss(eps), loss(-eps)

    return echo_estimate(sample, [factor * e / scale for e in ladder], "dissipative_evolution")


def simulate_dissipative_trace(F: FloquetOperator, psi0: np.ndarray, gamma: float,
                               checkpoints: Sequence[int],
                               substeps: Optional[int] = None,
                               check_positivity_every_step: bool = False,
                               delta: float = 0.0) -> QfiTrace:
    """
    Mixed QFI at each checkpoint from rho and d rho / d alpha carried along
    one trajectory; see qfi_from_derivative.

    Positivity is checked at every checkpoint (and at every step when asked).
    Extra columns: gamma, substeps, trace_error, min_eigenvalue, purity.

    :param gamma: coefficient handed to the generator (already normalized)
    """
    wanted = np.unique(np.asarray(checkpoints, dtype=int))
    if len(wanted) == 0:
        raise ConfigError("at least one checkpoint is required")
    system = F.system
    if substeps is None:
        substeps = default_substeps(system, gamma, F.period_T)
    check_step_guard(system, gamma, F.period_T, substeps)

    traj = DensityTrajectory.start(density_from_pure(psi0), gamma, F.alpha, with_derivative=True)
    columns: Dict[str, List[float]] = {"qfi": [], "trace_error": [], "min_eigenvalue": [], "purity": []}
    for target in wanted:
        while traj.step < target:
            traj = dissipative_step(F, traj, substeps, check_positivity_every_step)
        qfi, lowest = qfi_from_derivative(traj.rho, traj.drho)
        if lowest < -POSITIVITY_TOL:
            raise _positivity_error(traj.step, lowest, substeps, F.period_T)
        columns["qfi"].append(qfi)
        columns["trace_error"].append(traj.trace_error)
        columns["min_eigenvalue"].append(lowest)
        columns["purity"].append(purity(traj.rho))

    logger.info("[dissipative_evolution] N=%d gamma=%.3g: %d steps, %d substeps/period, final QFI %.6e, "
                "cumulative trace correction %.3e", system.n_spins, gamma, int(wanted[-1]), substeps,
                columns["qfi"][-1], traj.trace_correction)

    n_rows = len(wanted)
    extras = {name: np.array(values) for name, values in columns.items() if name != "qfi"}
    extras["gamma"] = np.full(n_rows, float(gamma))
    extras["substeps"] = np.full(n_rows, int(substeps))
    return QfiTrace(
        steps=wanted,
        qfi=np.array(columns["qfi"]),
        params=trace_params(F, "dissipative", delta=delta, gamma=float(gamma), substeps=int(substeps),
                            sld_cutoff=SLD_CUTOFF),
        extras=extras,
    )
