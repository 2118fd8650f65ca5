"""
@description
Parameter sweeps over N, time, gamma or delta, run in parallel and cached
on disk by a content hash of the sweep definition.

Key features:
- SweepSpec: variable, values, fixed parameters, method; validated and canonically ordered
- run_sweep(spec, workers): one QFI trace per point, merged into a single table
- time_exponents / n_exponent / saturation_table: reducers feeding the figure bundles

@dependencies
- multiprocessing.Pool for point-level parallelism
- pandas for the result table, hashlib/json for cache keys
- kicked_top.db.results_store for the cache

@notes
- Rows are sorted by (value, step) so the table never depends on completion order.
- Symbolic alpha/beta are evaluated per point because they may depend on j.
- A failing point is reported as SweepPointError naming the point.
"""

import hashlib
import json
import time
from dataclasses import dataclass, field
from multiprocessing import Pool
from typing import Any, Dict, List, Mapping, Optional, Tuple

import numpy as np
import pandas as pd

from kicked_top import __version__
from kicked_top.analysis.scaling import (
    DEFAULT_SATURATION_LEVEL,
    DEFAULT_TIME_RANGE,
    ScalingFit,
    detect_saturation,
    plateau_value,
    fit_power_law,
    fit_trace,
)
from kicked_top.db.results_store import load_cached_sweep, save_cached_sweep
from kicked_top.dynamics.dissipative_evolution import effective_decay_rate, simulate_dissipative_trace
from kicked_top.dynamics.floquet import build_floquet
from kicked_top.dynamics.pure_evolution import (
    DEFAULT_EPS_LADDER,
    QfiTrace,
    checkpoint_steps,
    simulate_echo_trace,
    simulate_pure_trace,
)
from kicked_top.dynamics.spin_algebra import CoherentStateParams, build_spin_system, coherent_state
from kicked_top.errors import ConfigError, FitError, SweepPointError
from kicked_top.utils.config_loader import METHODS, evaluate_expression
from kicked_top.utils.logger import get_logger

logger = get_logger(__name__)

VARIABLES = ("N", "t", "gamma", "delta")

DEFAULT_FIXED: Dict[str, Any] = {
    "alpha": "pi/2",
    "beta": "pi*j+delta",
    "delta": 0.0,
    "gamma": 0.0,
    "theta": float(np.pi / 4),
    "phi": float(np.pi / 4),
    "period_T": 1.0,
    "n_max": 1000,
    "dense_until": 64,
    "per_decade": 24,
    "stride": 1,
    "checkpoints": None,
    "eps_ladder": list(DEFAULT_EPS_LADDER),
    "substeps": None,
    "decay_normalization": "collective",
}

POINT_COLUMNS = ["value", "N", "beta", "delta", "gamma", "method"]


@dataclass(frozen=True)
class SweepSpec:
    variable: str
    values: Tuple[float, ...]
    fixed: Mapping[str, Any] = field(default_factory=dict)
    method: str = "pure-exact"

    def __post_init__(self):
        if self.variable not in VARIABLES:
            raise ConfigError(f"unknown sweep variable {self.variable!r}; expected one of {VARIABLES}")
        if self.method not in METHODS:
            raise ConfigError(f"unknown method {self.method!r}; expected one of {METHODS}")
        values = tuple(sorted(float(v) for v in self.values))
        if not values:
            raise ConfigError("a sweep needs at least one value")
        if len(set(values)) != len(values):
            raise ConfigError(f"sweep values must be distinct, got {self.values}")
        if self.variable in ("N", "t"):
            values = tuple(int(v) for v in values)

        unknown = set(self.fixed) - set(DEFAULT_FIXED) - {"N"}
        if unknown:
            raise ConfigError(f"unknown fixed parameters {sorted(unknown)}")
        fixed = dict(DEFAULT_FIXED)
        fixed.update(self.fixed)
        if self.variable != "N" and "N" not in self.fixed:
            raise ConfigError("fixed parameters must include N")
        if self.variable == "gamma" and self.method != "dissipative":
            raise ConfigError("a gamma sweep requires method 'dissipative'")
        if self.variable == "gamma" and values[0] < 0:
            raise ConfigError("gamma values must be >= 0")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "fixed", fixed)

    def points(self) -> List[Dict[str, Any]]:
        """One parameter dict per simulation; a time sweep is a single trajectory."""
        base = dict(self.fixed)
        base["method"] = self.method
        if self.variable == "t":
            point = dict(base, checkpoints=list(self.values), value=None)
            return [point]
        return [dict(base, **{self.variable: value, "value": value}) for value in self.values]

    def content_hash(self) -> str:
        payload = {
            "variable": self.variable,
            "values": list(self.values),
            "fixed": {k: self.fixed[k] for k in sorted(self.fixed)},
            "method": self.method,
            "tool_version": __version__,
        }
        text = json.dumps(payload, sort_keys=True, default=str)
        return hashlib.sha256(text.encode("utf-8")).hexdigest()

    def as_dict(self) -> Dict[str, Any]:
        return {"variable": self.variable, "values": list(self.values), "fixed": dict(self.fixed),
                "method": self.method}


@dataclass
class SweepResult:
    frame: pd.DataFrame
    runtimes: Dict[str, float]
    spec: SweepSpec
    from_cache: bool = False

    def trace_for(self, value) -> QfiTrace:
        rows = self.frame[self.frame["value"] == value]
        if rows.empty:
            raise KeyError(value)
        first = rows.iloc[0]
        params = {"N": int(first["N"]), "beta": float(first["beta"]), "delta": float(first["delta"]),
                  "gamma": float(first["gamma"]), "method": first["method"],
                  "period_T": float(self.spec.fixed["period_T"])}
        return QfiTrace(steps=rows["step"].to_numpy(), qfi=rows["qfi"].to_numpy(), params=params)

    def values(self) -> List:
        return list(pd.unique(self.frame["value"]))


def simulate_point(point: Mapping[str, Any]) -> QfiTrace:
    """Run the simulation one sweep point describes."""
    system = build_spin_system(int(point["N"]))
    delta = float(point["delta"])
    alpha = evaluate_expression(point["alpha"], j=system.j, delta=delta)
    beta = evaluate_expression(point["beta"], j=system.j, delta=delta)
    F = build_floquet(system, alpha, beta, float(point["period_T"]))
    psi0 = coherent_state(system, CoherentStateParams(float(point["theta"]), float(point["phi"])))

    if point.get("checkpoints") is not None:
        checkpoints = np.array(sorted(int(s) for s in point["checkpoints"]))
    else:
        checkpoints = checkpoint_steps(int(point["n_max"]), int(point["dense_until"]),
                                       int(point["per_decade"]), int(point["stride"]))

    method = point["method"]
    if method == "pure-exact":
        return simulate_pure_trace(F, psi0, checkpoints, delta=delta)
    if method == "pure-echo":
        return simulate_echo_trace(F, psi0, checkpoints, point["eps_ladder"], delta=delta)
    rate = effective_decay_rate(system, float(point["gamma"]), point["decay_normalization"])
    return simulate_dissipative_trace(F, psi0, rate, checkpoints, substeps=point["substeps"], delta=delta)


def _run_point(point: Dict[str, Any]):
    # exceptions are returned, not raised, so the parent can attach the point
    started = time.perf_counter()
    try:
        trace = simulate_point(point)
    except Exception as e:
        return None, time.perf_counter() - started, e
    frame = trace.to_frame()
    value = point["value"]
    frame.insert(0, "value", frame["step"] if value is None else value)
    frame.insert(1, "N", int(point["N"]))
    frame.insert(2, "beta", float(trace.params["beta"]))
    frame.insert(3, "delta", float(point["delta"]))
    if "gamma" in frame.columns:
        frame = frame.drop(columns=["gamma"])
    frame.insert(4, "gamma", float(point["gamma"]) if point["method"] == "dissipative" else 0.0)
    frame.insert(5, "method", point["method"])
    return frame, time.perf_counter() - started, None


def _point_label(point: Mapping[str, Any]) -> Dict[str, Any]:
    return {k: point[k] for k in ("N", "delta", "gamma", "method", "value") if k in point}


def run_sweep(spec: SweepSpec, workers: int = 1, use_cache: bool = True,
              cache_dir: Optional[str] = None) -> SweepResult:
    """
    Execute every point of the sweep.

    :param spec: Sweep definition
    :param workers: Process count; 1 runs in-process
    :param use_cache: Read and write the on-disk cache
    :param cache_dir: Cache location override
    :return: SweepResult with rows sorted by (value, step)
    :raises SweepPointError: when any point fails
    """
    key = spec.content_hash()
    if use_cache:
        cached = load_cached_sweep(key, cache_dir)
        if cached is not None:
            frame, metadata = cached
            return SweepResult(frame=frame, runtimes=metadata.get("runtimes", {}), spec=spec, from_cache=True)

    points = spec.points()
    logger.info("[sweep] Running %d point(s) over %s with %s (workers=%d)",
                len(points), spec.variable, spec.method, workers)
    if workers > 1 and len(points) > 1:
        with Pool(processes=min(workers, len(points))) as pool:
            outputs = pool.map(_run_point, points)
    else:
        outputs = [_run_point(p) for p in points]

    frames, runtimes = [], {}
    for point, (frame, runtime, error) in zip(points, outputs):
        label = _point_label(point)
        if error is not None:
            logger.error("[sweep] Point %s failed after %.2fs: %s", label, runtime, error)
            raise SweepPointError(label, error)
        logger.info("[sweep] Point %s finished in %.2fs", label, runtime)
        frames.append(frame)
        runtimes[str(point["value"])] = runtime

    frame = pd.concat(frames, ignore_index=True)
    frame = frame.sort_values(["value", "step"], kind="mergesort").reset_index(drop=True)
    result = SweepResult(frame=frame, runtimes=runtimes, spec=spec)
    if use_cache:
        save_cached_sweep(key, frame, {"spec": spec.as_dict(), "runtimes": runtimes}, cache_dir)
    return result


def time_exponents(result: SweepResult, fit_range: Optional[Tuple[float, float]] = DEFAULT_TIME_RANGE,
                   stride: Optional[int] = None) -> pd.DataFrame:
    """Time exponent of each point's trace."""
    rows = []
    for value in result.values():
        trace = result.trace_for(value)
        row = {"value": value, "N": trace.params["N"], "delta": trace.params["delta"],
               "gamma": trace.params["gamma"]}
        try:
            fit = fit_trace(trace, fit_range, stride)
            row.update(exponent=fit.exponent, stderr=fit.stderr, r_squared=fit.r_squared, n_points=fit.n_points)
        except FitError as e:
            logger.warning("[sweep] No time fit for value %s: %s", value, e)
            row.update(exponent=np.nan, stderr=np.nan, r_squared=np.nan, n_points=0)
        rows.append(row)
    return pd.DataFrame(rows)


def n_exponent(result: SweepResult, step: int, fit_range: Optional[Tuple[float, float]] = None) -> ScalingFit:
    """QFI-vs-N exponent at one stroboscopic step."""
    rows = result.frame[result.frame["step"] == step]
    return fit_power_law(rows["N"].to_numpy(), rows["qfi"].to_numpy(), fit_range)


def saturation_table(result: SweepResult, level: float = DEFAULT_SATURATION_LEVEL) -> pd.DataFrame:
    """
    Per point: t_max (None while still rising), the maximum QFI, the QFI at
    t_max and the plateau value (median QFI from t_max on).
    """
    rows = []
    for value in result.values():
        trace = result.trace_for(value)
        t_max = detect_saturation(trace, level)
        at_t_max = float(trace.qfi[trace.steps == t_max][0]) if t_max is not None else np.nan
        rows.append({
            "value": value,
            "N": trace.params["N"],
            "gamma": trace.params["gamma"],
            "t_max": t_max,
            "qfi_max": float(np.max(trace.qfi)),
            "qfi_at_t_max": at_t_max,
            "qfi_saturated": plateau_value(trace, t_max),
        })
    return pd.DataFrame(rows)
