"""
@description
Stroboscopic propagation of pure states with the exact alpha-derivative,
and the quantum Fisher information (QFI) from either the derivative or the
Loschmidt echo.

Key features:
- PureTrajectory / step_with_derivative: psi <- U psi, dpsi <- -i J_z U psi + U dpsi
- qfi_pure: 4 (<dpsi|dpsi> - |<psi|dpsi>|^2)
- loschmidt_echo / qfi_from_echo: 4 (1 - F_eps) / eps^2, Richardson-extrapolated in eps^2
- simulate_pure_trace / simulate_echo_trace: QfiTrace over log-spaced checkpoints

@dependencies
- numpy, pandas (trace tables)
- kicked_top.dynamics.floquet for U(alpha)

@notes
- dU/dalpha = -i J_z U because U = exp(-i alpha J_z) K with K alpha-independent.
- psi is never renormalized; drift beyond 1e-10 per 1e4 steps raises
  NumericalIntegrityError.
- Echo samples are symmetric (alpha +/- eps) and eps is divided by the
  generator scale j sqrt(max(1, n)).
- 1 - F is taken as the squared norm of the component of psi_b orthogonal
  to psi_a, both normalized, so neither norm drift nor the cancellation in
  1 - |<a|b>|^2 reaches the samples.
"""

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from kicked_top.dynamics.floquet import FloquetOperator, build_floquet, evolve
from kicked_top.dynamics.spin_algebra import SpinSystem
from kicked_top.errors import ConfigError, DimensionMismatchError, NumericalIntegrityError
from kicked_top.utils.logger import get_logger

logger = get_logger(__name__)

DEFAULT_EPS_LADDER = (1e-3, 5e-4, 2.5e-4)
EXTRAPOLATION_WARN = 1e-3
DIVERGENCE_FLOOR = 1e-9     # relative sample spread ignored by the divergence check
NORM_DRIFT_TOL = 1e-10
NORM_DRIFT_HORIZON = 10_000


@dataclass(frozen=True)
class PureTrajectory:
    psi: np.ndarray = field(repr=False)
    dpsi: np.ndarray = field(repr=False)
    step: int
    alpha0: float

    @classmethod
    def start(cls, psi0: np.ndarray, alpha0: float) -> "PureTrajectory":
        """Initial state; it does not depend on alpha, so dpsi = 0."""
        psi0 = np.asarray(psi0, dtype=complex)
        return cls(psi=psi0, dpsi=np.zeros_like(psi0), step=0, alpha0=float(alpha0))

    @property
    def norm_drift(self) -> float:
        return abs(float(np.linalg.norm(self.psi)) - 1.0)


@dataclass
class QfiTrace:
    """
    QFI against stroboscopic step. `extras` holds additional per-step columns
    (fidelity, trace_error, ...) of the same length as `steps`.
    """

    steps: np.ndarray
    qfi: np.ndarray
    params: Dict[str, object]
    extras: Dict[str, np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        self.steps = np.asarray(self.steps, dtype=int)
        self.qfi = np.asarray(self.qfi, dtype=float)
        if self.steps.shape != self.qfi.shape:
            raise DimensionMismatchError("steps and qfi must have the same length")

    @property
    def period_T(self) -> float:
        return float(self.params.get("period_T", 1.0))

    def to_frame(self) -> pd.DataFrame:
        frame = pd.DataFrame({
            "step": self.steps,
            "t": self.steps * self.period_T,
            "qfi": self.qfi,
        })
        for name, column in self.extras.items():
            frame[name] = column
        return frame


@dataclass(frozen=True)
class EchoEstimate:
    """
    Richardson-extrapolated echo QFI with the raw (eps, 4(1-F)/eps^2) samples.
    `diverging` marks ladders whose samples move apart as eps shrinks.
    """

    value: float
    residual: float
    samples: Tuple[Tuple[float, float], ...]
    diverging: bool = False


def step_with_derivative(F: FloquetOperator, traj: PureTrajectory) -> PureTrajectory:
    """
    Advance one period, carrying the exact derivative d psi / d alpha.

    :raises DimensionMismatchError: if the trajectory does not match U
    """
    if traj.psi.shape != (F.dim,) or traj.dpsi.shape != (F.dim,):
        raise DimensionMismatchError(f"trajectory of shape {traj.psi.shape} does not match dim {F.dim}")
    u_psi = F.unitary @ traj.psi
    dpsi = -1j * F.system.m_values * u_psi + F.unitary @ traj.dpsi
    return PureTrajectory(psi=u_psi, dpsi=dpsi, step=traj.step + 1, alpha0=traj.alpha0)


def qfi_pure(traj: PureTrajectory) -> float:
    """4 (<dpsi|dpsi> - |<psi|dpsi>|^2), clipped at 0."""
    norm_sq = np.real(np.vdot(traj.dpsi, traj.dpsi))
    overlap = np.vdot(traj.psi, traj.dpsi)
    return max(0.0, float(4.0 * (norm_sq - abs(overlap) ** 2)))


def check_norm_drift(traj: PureTrajectory) -> None:
    allowed = NORM_DRIFT_TOL * max(1.0, traj.step / NORM_DRIFT_HORIZON)
    if traj.norm_drift > allowed:
        raise NumericalIntegrityError(
            f"norm drift {traj.norm_drift:.3e} at step {traj.step} exceeds {allowed:.1e}; U is not unitary enough"
        )


def loschmidt_echo(system: SpinSystem, alpha: float, beta: float, epsilon: float,
                   psi0: np.ndarray, n: int, F: Optional[FloquetOperator] = None) -> float:
    """
    F_eps(n) = |<psi0| U_alpha(n)^dagger U_{alpha+eps}(n) |psi0>|^2.

    :param F: optional prebuilt operator at (alpha, beta) to reuse its kick
    """
    if n < 0:
        raise ConfigError(f"n must be >= 0, got {n}")
    if n == 0 or epsilon == 0.0:
        return 1.0
    base = F if F is not None else build_floquet(system, alpha, beta)
    psi_a = evolve(base, psi0, n)
    psi_b = evolve(base.with_alpha(alpha + epsilon), psi0, n)
    return 1.0 - pure_infidelity(psi_a, psi_b)


def pure_infidelity(psi_a: np.ndarray, psi_b: np.ndarray) -> float:
    """
    1 - |<a|b>|^2 / (<a|a> <b|b>), evaluated as || b - <a|b> a ||^2 on the
    normalized vectors.
    """
    a = psi_a / np.linalg.norm(psi_a)
    b = psi_b / np.linalg.norm(psi_b)
    orthogonal = b - np.vdot(a, b) * a
    return float(min(1.0, np.real(np.vdot(orthogonal, orthogonal))))


def generator_scale(j: int, n: int) -> float:
    """Divisor applied to the echo eps ladder after n periods: j sqrt(max(1, n))."""
    return float(j * np.sqrt(max(1, n)))


def validate_eps_ladder(eps_list: Sequence[float]) -> Tuple[float, ...]:
    ladder = tuple(float(e) for e in eps_list)
    if len(ladder) < 2 or len(set(ladder)) != len(ladder):
        raise ConfigError(f"epsilon ladder needs >= 2 distinct values, got {ladder}")
    if any(e <= 0.0 for e in ladder):
        raise ConfigError(f"epsilon ladder must be positive, got {ladder}")
    return ladder


def richardson_in_eps_squared(eps: Sequence[float], values: Sequence[float]) -> Tuple[float, float]:
    """
    Extrapolate q(eps) = q0 + c1 eps^2 + c2 eps^4 to eps -> 0.

    :return: (q0, relative difference to the next-lower-order extrapolation)
    """
    x = np.asarray(eps, dtype=float) ** 2
    y = np.asarray(values, dtype=float)
    order = np.argsort(x)
    x, y = x[order], y[order]
    degree = min(len(x) - 1, 2)
    q0 = float(np.polyfit(x, y, degree)[-1])
    lower = float(np.polyfit(x[:degree], y[:degree], degree - 1)[-1]) if degree > 1 else float(y[0])
    scale = max(abs(q0), 1e-300)
    return q0, abs(q0 - lower) / scale


def samples_diverge(eps: Sequence[float], values: Sequence[float]) -> bool:
    """
    True when the two smallest-eps samples differ by more than the next pair.

    Truncation error shrinks like eps^2 as eps decreases; roundoff in 1 - F
    grows like 1/eps^2, so a spread that widens toward small eps means the
    ladder is too fine.
    """
    if len(eps) < 3:
        return False
    order = np.argsort(np.asarray(eps, dtype=float))
    q = np.asarray(values, dtype=float)[order]
    finest = abs(q[1] - q[0])
    coarser = abs(q[2] - q[1])
    return bool(finest > coarser and finest > DIVERGENCE_FLOOR * max(abs(q[0]), 1e-300))


def echo_estimate(sample_fn, eps_values: Sequence[float], label: str) -> EchoEstimate:
    """
    Richardson-extrapolate symmetric echo samples.

    :param sample_fn: eps -> (1 - F(+eps), 1 - F(-eps))
    """
    samples = []
    for eps in eps_values:
        loss_plus, loss_minus = sample_fn(eps)
        q = 2.0 * (loss_plus + loss_minus) / eps ** 2
        samples.append((eps, q))
    eps_list, q_list = [s[0] for s in samples], [s[1] for s in samples]
    value, residual = richardson_in_eps_squared(eps_list, q_list)
    diverging = samples_diverge(eps_list, q_list)
    if residual > EXTRAPOLATION_WARN:
        logger.warning("[%s] Echo extrapolation residual %.2e exceeds %.0e (samples %s)",
                       label, residual, EXTRAPOLATION_WARN, samples)
    if diverging:
        logger.warning("[%s] Echo samples spread apart as eps shrinks; roundoff dominates the "
                       "finest ladder entries (samples %s)", label, samples)
    return EchoEstimate(value=max(0.0, value), residual=residual, samples=tuple(samples), diverging=diverging)


def qfi_from_echo(system: SpinSystem, alpha: float, beta: float, psi0: np.ndarray, n: int,
                  eps_list: Sequence[float] = DEFAULT_EPS_LADDER,
                  F: Optional[FloquetOperator] = None) -> EchoEstimate:
    """
    QFI from the small-eps curvature of the Loschmidt echo.

    The ladder is divided by generator_scale(j, n) before use.
    """
    ladder = validate_eps_ladder(eps_list)
    if n == 0:
        return EchoEstimate(value=0.0, residual=0.0, samples=tuple((e, 0.0) for e in ladder))

    base = F if F is not None else build_floquet(system, alpha, beta)
    psi_a = evolve(base, psi0, n)
    scale = generator_scale(system.j, n)

    def sample(eps: float) -> Tuple[float, float]:
        out = []
        for sign in (1.0, -1.0):
            psi_b = evolve(base.with_alpha(alpha + sign * eps), psi0, n)
            out.append(pure_infidelity(psi_a, psi_b))
        return out[0], out[1]

    return echo_estimate(sample, [e / scale for e in ladder], "pure_evolution")


def checkpoint_steps(n_max: int, dense_until: int = 64, per_decade: int = 24, stride: int = 1) -> np.ndarray:
    """
    All steps <= dense_until, then log-spaced steps up to n_max, rounded to
    multiples of `stride`; n_max is always included.
    """
    if n_max < 0:
        raise ConfigError(f"n_max must be >= 0, got {n_max}")
    steps = set(range(0, min(dense_until, n_max) + 1))
    if n_max > dense_until:
        decades = np.log10(n_max) - np.log10(max(dense_until, 1))
        count = max(2, int(np.ceil(decades * per_decade)) + 1)
        for value in np.geomspace(max(dense_until, 1), n_max, count):
            rounded = int(round(value / stride)) * stride
            if dense_until < rounded <= n_max:
                steps.add(rounded)
        steps.add(int(n_max))
    return np.array(sorted(steps), dtype=int)


def trace_params(F: FloquetOperator, method: str, **extra) -> Dict[str, object]:
    params = {
        "N": F.system.n_spins,
        "alpha": F.alpha,
        "beta": F.beta,
        "period_T": F.period_T,
        "method": method,
    }
    params.update(extra)
    return params


def simulate_pure_trace(F: FloquetOperator, psi0: np.ndarray, checkpoints: Sequence[int],
                        delta: float = 0.0) -> QfiTrace:
    """
    Exact-derivative QFI at each checkpoint, plus the return fidelity |<psi0|psi_n>|^2.
    """
    wanted = np.unique(np.asarray(checkpoints, dtype=int))
    traj = PureTrajectory.start(psi0, F.alpha)
    qfi: List[float] = []
    fidelity: List[float] = []
    for target in wanted:
        while traj.step < target:
            traj = step_with_derivative(F, traj)
        check_norm_drift(traj)
        qfi.append(qfi_pure(traj))
        fidelity.append(float(np.abs(np.vdot(psi0, traj.psi)) ** 2))
    logger.info("[pure_evolution] Exact trace N=%d beta=%.6g to step %d: final QFI %.6e",
                F.system.n_spins, F.beta, int(wanted[-1]) if len(wanted) else 0, qfi[-1] if qfi else 0.0)
    return QfiTrace(
        steps=wanted,
        qfi=np.array(qfi),
        params=trace_params(F, "pure-exact", delta=delta, norm_drift_tol=NORM_DRIFT_TOL),
        extras={"fidelity": np.array(fidelity)},
    )


def simulate_echo_trace(F: FloquetOperator, psi0: np.ndarray, checkpoints: Sequence[int],
                        eps_list: Sequence[float] = DEFAULT_EPS_LADDER, delta: float = 0.0) -> QfiTrace:
    """Echo-based QFI, evaluated independently at each checkpoint."""
    wanted = np.unique(np.asarray(checkpoints, dtype=int))
    ladder = validate_eps_ladder(eps_list)
    values, residuals = [], []
    for n in wanted:
        estimate = qfi_from_echo(F.system, F.alpha, F.beta, psi0, int(n), ladder, F=F)
        values.append(estimate.value)
        residuals.append(estimate.residual)
    return QfiTrace(
        steps=wanted,
        qfi=np.array(values),
        params=trace_params(F, "pure-echo", delta=delta, eps_ladder=list(ladder),
                            extrapolation_warn=EXTRAPOLATION_WARN),
        extras={"extrapolation_residual": np.array(residuals)},
    )
