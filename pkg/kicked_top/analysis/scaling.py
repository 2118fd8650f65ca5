"""
@description
Power-law exponents and saturation times of QFI data.

Key features:
- fit_power_law(xs, ys, fit_range, stride): OLS on (log x, log y) with slope standard error
- detect_saturation(trace, level): first step reaching `level` of the running maximum
- plateau_value(trace, t_max): median QFI once saturated
- exponent_range_sensitivity(trace, ranges): exponent for several fit windows
- even_n_ladder(n_min, n_max, count): log-spaced even spin numbers

@dependencies
- numpy, pandas, scipy.stats.linregress
"""

from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy import stats

from kicked_top.dynamics.pure_evolution import QfiTrace
from kicked_top.errors import ConfigError, FitError
from kicked_top.utils.logger import get_logger

logger = get_logger(__name__)

DEFAULT_TIME_RANGE = (10.0, 1e4)
DEFAULT_SATURATION_LEVEL = 0.95
MIN_FIT_POINTS = 3
RISING_TOL = 1e-3   # relative growth over the last checkpoint interval


@dataclass(frozen=True)
class ScalingFit:
    """y ~ exp(log_prefactor) * x ** exponent over fit_range."""

    exponent: float
    log_prefactor: float
    fit_range: Tuple[float, float]
    r_squared: float
    n_points: int
    stderr: float

    def predict(self, x) -> np.ndarray:
        return np.exp(self.log_prefactor) * np.asarray(x, dtype=float) ** self.exponent

    def as_dict(self) -> dict:
        return {
            "exponent": self.exponent,
            "stderr": self.stderr,
            "log_prefactor": self.log_prefactor,
            "fit_range": list(self.fit_range),
            "r_squared": self.r_squared,
            "n_points": self.n_points,
        }


def fit_power_law(xs: Sequence[float], ys: Sequence[float],
                  fit_range: Optional[Tuple[float, float]] = None,
                  stride: Optional[int] = None) -> ScalingFit:
    """
    Least-squares line through (log x, log y).

    :param xs: Abscissae (time steps or spin numbers)
    :param ys: Values, e.g. QFI
    :param fit_range: Inclusive (lo, hi) window on xs; all points when None
    :param stride: Keep only xs that are integer multiples of stride
    :return: ScalingFit
    :raises FitError: fewer than 3 points selected, or a selected value <= 0 or NaN
    """
    x = np.asarray(xs, dtype=float)
    y = np.asarray(ys, dtype=float)
    if x.shape != y.shape:
        raise FitError(f"xs and ys differ in length ({x.size} vs {y.size})")
    if np.any(np.isnan(y)):
        raise FitError(f"{int(np.sum(np.isnan(y)))} value(s) are NaN")

    keep = np.ones(x.shape, dtype=bool)
    if fit_range is not None:
        lo, hi = fit_range
        if not lo < hi:
            raise ConfigError(f"fit range must satisfy lo < hi, got {fit_range}")
        keep &= (x >= lo) & (x <= hi)
    if stride is not None:
        keep &= np.isclose(np.mod(x, stride), 0.0)
    x, y = x[keep], y[keep]

    if x.size < MIN_FIT_POINTS:
        raise FitError(f"need at least {MIN_FIT_POINTS} points in range {fit_range}, got {x.size}")
    if np.any(x <= 0) or np.any(y <= 0):
        raise FitError("power-law fit needs strictly positive xs and ys")

    result = stats.linregress(np.log(x), np.log(y))
    r_squared = float(np.clip(result.rvalue ** 2, 0.0, 1.0))
    return ScalingFit(
        exponent=float(result.slope),
        log_prefactor=float(result.intercept),
        fit_range=(float(x.min()), float(x.max())),
        r_squared=r_squared,
        n_points=int(x.size),
        stderr=float(result.stderr),
    )


def fit_trace(trace: QfiTrace, fit_range: Optional[Tuple[float, float]] = DEFAULT_TIME_RANGE,
              stride: Optional[int] = None) -> ScalingFit:
    """Time exponent of a QFI trace; step 0 and any zero values are dropped."""
    positive = (trace.steps > 0) & (trace.qfi > 0)
    return fit_power_law(trace.steps[positive], trace.qfi[positive], fit_range, stride)


def detect_saturation(trace: QfiTrace, level: float = DEFAULT_SATURATION_LEVEL) -> Optional[int]:
    """
    Smallest step with qfi >= level * max(qfi), or None while the trace
    still rises at its last point (maximum there and relative growth over
    the last interval above RISING_TOL).
    """
    if not 0.0 < level < 1.0:
        raise ConfigError(f"saturation level must lie in (0, 1), got {level}")
    qfi = trace.qfi
    if qfi.size == 0:
        return None
    peak = int(np.argmax(qfi))
    if qfi.size > 1 and peak == qfi.size - 1 and qfi[-1] > qfi[-2] * (1.0 + RISING_TOL):
        return None
    reached = np.flatnonzero(qfi >= level * qfi[peak])
    return int(trace.steps[reached[0]])


def plateau_value(trace: QfiTrace, t_max: Optional[int]) -> float:
    """Median QFI over checkpoints at or after t_max; NaN when t_max is None."""
    if t_max is None:
        return float("nan")
    return float(np.median(trace.qfi[trace.steps >= t_max]))


def exponent_range_sensitivity(trace: QfiTrace, ranges: Sequence[Tuple[float, float]],
                               stride: Optional[int] = None) -> pd.DataFrame:
    """Fitted exponent for each window; windows with too few points give NaN."""
    rows = []
    for lo, hi in ranges:
        try:
            fit = fit_trace(trace, (lo, hi), stride)
            rows.append({"lo": lo, "hi": hi, "exponent": fit.exponent, "stderr": fit.stderr,
                         "n_points": fit.n_points})
        except FitError as e:
            logger.debug("[scaling] window (%g, %g) skipped: %s", lo, hi, e)
            rows.append({"lo": lo, "hi": hi, "exponent": np.nan, "stderr": np.nan, "n_points": 0})
    return pd.DataFrame(rows, columns=["lo", "hi", "exponent", "stderr", "n_points"])


def even_n_ladder(n_min: int, n_max: int, count: int) -> Tuple[int, ...]:
    """Roughly log-spaced even N from n_min to n_max (both rounded to even, duplicates dropped)."""
    if n_min < 2 or n_max < n_min or count < 1:
        raise ConfigError(f"invalid ladder request ({n_min}, {n_max}, {count})")
    raw = np.geomspace(n_min, n_max, count)
    ladder = sorted({max(2, 2 * int(round(v / 2.0))) for v in raw})
    return tuple(ladder)
