"""
@description
Defines a command controller that accepts a validated RunConfig and runs the
matching workflow: recurrence search, QFI traces, Husimi snapshots or a
figure-reproduction bundle.

Key features:
- cmd_recurrence / cmd_qfi / cmd_husimi / cmd_reproduce return JSON-ready reports
- execute_command(config) dispatches, writes the run manifest and maps errors to exit codes
- Figure bundles (fig2, fig3a, fig3b, fig4a, fig4b, fig4c) at desk scale

@dependencies
- kicked_top.dynamics for the simulations
- kicked_top.analysis for sweeps and fits
- kicked_top.db.results_store for CSV/JSON output

@notes
- Exit codes: 0 success, 1 unexpected error, 2 invalid config, 3 no recurrence found, 4 numerical abort.
- fig3*/fig4* use reduced N ladders and require desk_scale.
"""

import os
import time
from datetime import datetime, timezone
from typing import Any, Callable, Dict, List, Sequence, Tuple

import numpy as np
import pandas as pd

from kicked_top.analysis.scaling import ScalingFit, even_n_ladder, exponent_range_sensitivity, fit_power_law
from kicked_top.analysis.sweep import SweepSpec, n_exponent, run_sweep, saturation_table, time_exponents
from kicked_top.db.results_store import (
    close_results_store,
    init_results_store,
    write_grid,
    write_json,
    write_table,
    write_text,
    write_manifest,
)
from kicked_top.dynamics.dissipative_evolution import (
    DensityTrajectory,
    density_from_pure,
    dissipative_step,
    effective_decay_rate,
)
from kicked_top.dynamics.floquet import FloquetOperator, build_floquet, check_recurrence
from kicked_top.dynamics.phase_space import count_peaks, husimi, recurrence_fidelity
from kicked_top.dynamics.spin_algebra import CoherentStateParams, build_spin_system, coherent_state
from kicked_top.errors import (
    EXIT_NO_RECURRENCE,
    EXIT_OK,
    ConfigError,
    FitError,
    KickedTopError,
    exit_code_for,
)
from kicked_top.utils.config_loader import RunConfig
from kicked_top.utils.logger import get_logger

logger = get_logger(__name__)

FIGURES = ("fig2", "fig3a", "fig3b", "fig4a", "fig4b", "fig4c")

FIG2_N = 112
FIG2_SNAPSHOTS = (0, 3, 6, 8)
FIG2_PEAKS = (1, 2, 4, 1)
FIG3_N = (20, 56, 112, 200)
FIG3_DELTAS = (0.0, 1.5, 2.0)
FIG3_STEPS = (10, 100, 1000)
FIG4_N = (20, 56, 100, 160, 200)
FIG4A_N = (20, 56, 100)
FIG4_GAMMAS = (3e-4, 5e-4, 7e-4)
FIG4_GAMMA = 5e-4
FIG4_N_MAX = 20_000
FIG4_NORMALIZATION = "scaled"
T_MAX_SLACK = 0.15      # relative, about one checkpoint spacing at 24 per decade
SENSITIVITY_RANGES = ((10, 1e2), (10, 1e3), (10, 1e4), (1e2, 1e4), (1e3, 1e4))


def _fixed_from_config(config: RunConfig) -> Dict[str, Any]:
    return {
        "alpha": config.alpha,
        "beta": config.beta_expression(),
        "delta": config.delta,
        "gamma": config.gamma,
        "theta": config.theta,
        "phi": config.phi,
        "period_T": config.period_T,
        "n_max": config.n_max,
        "dense_until": config.dense_until,
        "per_decade": config.per_decade,
        "stride": config.stride,
        "eps_ladder": list(config.eps_ladder),
        "substeps": config.substeps,
        "decay_normalization": config.decay_normalization,
    }


def _operator(config: RunConfig, n_spins: int) -> FloquetOperator:
    system = build_spin_system(n_spins)
    return build_floquet(system, config.alpha_for(system.j), config.beta_for(system.j), config.period_T)


def _sweep(config: RunConfig, spec: SweepSpec):
    return run_sweep(spec, workers=config.workers, use_cache=config.use_cache, cache_dir=config.cache_dir)


def cmd_recurrence(config: RunConfig) -> Dict[str, Any]:
    """
    Smallest recurrence period of U for every configured N.

    :return: report with one entry per N; exit_code 3 if any N has no recurrence
    """
    entries = []
    for n_spins in config.n_spins:
        F = _operator(config, n_spins)
        result = check_recurrence(F, config.max_period, config.tol)
        entry = {"N": n_spins, "j": F.system.j, "alpha": F.alpha, "beta": F.beta,
                 "max_period": config.max_period, "tol": config.tol}
        if result is None:
            entry.update(period=None, residual=None, global_phase=None)
        else:
            entry.update(period=result.period, residual=result.residual,
                         global_phase=[result.global_phase.real, result.global_phase.imag])
        entries.append(entry)
    write_json("recurrence.json", {"results": entries})
    found = all(e["period"] is not None for e in entries)
    return {"command": "recurrence", "results": entries, "exit_code": EXIT_OK if found else EXIT_NO_RECURRENCE}


def cmd_qfi(config: RunConfig) -> Dict[str, Any]:
    """QFI trace per N with the configured method; optional time-exponent fits."""
    spec = SweepSpec(variable="N", values=config.n_spins, fixed=_fixed_from_config(config), method=config.method)
    result = _sweep(config, spec)
    files = []
    for value in result.values():
        rows = result.frame[result.frame["value"] == value].reset_index(drop=True)
        meta = dict(spec.as_dict(), N=int(value))
        files.append(write_table(f"traces/qfi_N{int(value)}", rows, meta))

    report: Dict[str, Any] = {"command": "qfi", "method": config.method, "traces": files, "exit_code": EXIT_OK}
    if config.fit:
        fits = time_exponents(result, config.fit_range)
        write_table("fits", fits, {"fit_range": list(config.fit_range)})
        sensitivity = pd.concat(
            [exponent_range_sensitivity(result.trace_for(v), SENSITIVITY_RANGES).assign(value=v)
             for v in result.values()],
            ignore_index=True,
        )
        write_table("fit_range_sensitivity", sensitivity, {"ranges": [list(r) for r in SENSITIVITY_RANGES]})
        report["fits"] = fits.to_dict(orient="records")
    return report


def husimi_snapshots(F: FloquetOperator, initial: CoherentStateParams, snapshots: Sequence[int],
                     config: RunConfig, prefix: str = "husimi") -> pd.DataFrame:
    """
    Husimi grid at each snapshot step, written as one CSV per snapshot.

    With gamma > 0 the state is a density matrix evolved by the noisy map.
    :return: summary table (step, peaks, fidelity, argmax_theta, argmax_phi, max_value)
    """
    system = F.system
    psi0 = coherent_state(system, initial)
    noisy = config.gamma > 0
    rate = effective_decay_rate(system, config.gamma, config.decay_normalization)
    state = DensityTrajectory.start(density_from_pure(psi0), rate, F.alpha) if noisy else psi0
    step = 0
    rows = []
    for target in sorted(set(int(s) for s in snapshots)):
        while step < target:
            state = dissipative_step(F, state, config.substeps) if noisy else F.unitary @ state
            step += 1
        current = state.rho if noisy else state
        grid = husimi(system, current, config.n_theta, config.n_phi)
        fidelity = float(np.real(np.vdot(psi0, current @ psi0))) if noisy else recurrence_fidelity(psi0, current)
        peak = grid.argmax_angles()
        rows.append({
            "step": target,
            "t": target * F.period_T,
            "peaks": count_peaks(grid, config.rel_threshold),
            "fidelity": fidelity,
            "argmax_theta": peak.theta,
            "argmax_phi": peak.phi,
            "max_value": float(np.max(grid.values)),
            "normalization": grid.normalization(system.j),
        })
        write_grid(f"{prefix}/husimi_t{target}", grid, {
            "N": system.n_spins, "alpha": F.alpha, "beta": F.beta, "gamma": config.gamma, "decay_normalization": config.decay_normalization, "step": target,
            "theta0": initial.theta, "phi0": initial.phi,
        })
        logger.info("[command_controller] snapshot t=%d: %d peak(s), fidelity %.10f",
                    target, rows[-1]["peaks"], fidelity)
    return pd.DataFrame(rows)


def cmd_husimi(config: RunConfig) -> Dict[str, Any]:
    """Husimi snapshots for the first configured N, plus a peak-count summary."""
    F = _operator(config, config.n_spins[0])
    initial = CoherentStateParams(config.theta, config.phi)
    summary = husimi_snapshots(F, initial, config.snapshots, config)
    write_table("husimi_summary", summary, {"N": F.system.n_spins, "alpha": F.alpha, "beta": F.beta,
                                            "rel_threshold": config.rel_threshold})
    return {"command": "husimi", "N": F.system.n_spins, "snapshots": summary.to_dict(orient="records"),
            "exit_code": EXIT_OK}


def _verdict(ok: bool) -> str:
    return "ok" if ok else "OUT OF RANGE"


def _fig2(config: RunConfig) -> Tuple[Dict[str, Any], List[str]]:
    system = build_spin_system(FIG2_N)
    F = build_floquet(system, np.pi / 2, np.pi * system.j)
    summary = husimi_snapshots(F, CoherentStateParams(config.theta, config.phi), FIG2_SNAPSHOTS, config)
    write_table("husimi_summary", summary, {"N": FIG2_N, "alpha": F.alpha, "beta": F.beta})
    peaks = tuple(int(p) for p in summary["peaks"])
    final_fidelity = float(summary["fidelity"].iloc[-1])
    fits = {"peaks": list(peaks), "expected_peaks": list(FIG2_PEAKS), "fidelity_t8": final_fidelity}
    lines = [
        f"j = {system.j}, alpha = pi/2, beta = pi j, initial (theta, phi) = ({config.theta:.4f}, {config.phi:.4f})",
        f"peak counts at t/T = {FIG2_SNAPSHOTS}: {peaks} (expected {FIG2_PEAKS}) {_verdict(peaks == FIG2_PEAKS)}",
        f"recurrence fidelity at t = 8T: {final_fidelity:.12f} {_verdict(abs(1 - final_fidelity) < 1e-8)}",
    ]
    return fits, lines


def _fig3a(config: RunConfig) -> Tuple[Dict[str, Any], List[str]]:
    fits, lines = {}, ["time exponent of I(t) over t/T in [10, 1e4], sampled at multiples of 8"]
    for delta in FIG3_DELTAS:
        fixed = dict(_fixed_from_config(config), alpha="pi/2", beta="pi*j+delta", delta=delta,
                     gamma=0.0, n_max=10_000, stride=8)
        result = _sweep(config, SweepSpec(variable="N", values=FIG3_N, fixed=fixed, method="pure-exact"))
        table = time_exponents(result, (10.0, 1e4), stride=8)
        for row in table.itertuples():
            write_table(f"traces/qfi_N{row.N}_delta{delta:g}",
                        result.frame[result.frame["value"] == row.value].reset_index(drop=True),
                        {"N": row.N, "delta": delta, "method": "pure-exact"})
        tolerance = 0.05 if delta == 0 else 0.1
        fits[f"delta={delta:g}"] = table.to_dict(orient="records")
        for row in table.itertuples():
            lines.append(f"delta = {delta:g}, N = {row.N}: a = {row.exponent:.4f} +/- {row.stderr:.4f} "
                         f"(target 2 +/- {tolerance}) {_verdict(abs(row.exponent - 2) <= tolerance)}")
    return fits, lines


def _fig3b(config: RunConfig) -> Tuple[Dict[str, Any], List[str]]:
    ladder = even_n_ladder(20, 200, 6)
    fixed = dict(_fixed_from_config(config), alpha="pi/2", beta="pi*j", delta=0.0, gamma=0.0,
                 checkpoints=list(FIG3_STEPS))
    result = _sweep(config, SweepSpec(variable="N", values=ladder, fixed=fixed, method="pure-exact"))
    write_table("qfi_vs_N", result.frame, {"N_ladder": list(ladder), "steps": list(FIG3_STEPS)})
    fits, lines = {}, [f"QFI vs N over the even-N ladder {ladder}"]
    for step in FIG3_STEPS:
        fit = n_exponent(result, step)
        fits[f"t={step}"] = fit.as_dict()
        lines.append(f"t/T = {step}: a = {fit.exponent:.4f} +/- {fit.stderr:.4f} (target 2 +/- 0.1) "
                     f"{_verdict(abs(fit.exponent - 2) <= 0.1)}")
    return fits, lines


def _dissipative_sweep(config: RunConfig, gamma: float, ladder: Sequence[int]):
    fixed = dict(_fixed_from_config(config), alpha="pi/2", beta="pi*j", delta=0.0, gamma=gamma,
                 decay_normalization=FIG4_NORMALIZATION, n_max=FIG4_N_MAX, stride=1)
    return _sweep(config, SweepSpec(variable="N", values=ladder, fixed=fixed, method="dissipative"))


def _write_dissipative_traces(result, gamma: float) -> None:
    for value in result.values():
        write_table(f"traces/qfi_N{int(value)}_gamma{gamma:g}",
                    result.frame[result.frame["value"] == value].reset_index(drop=True),
                    {"N": int(value), "gamma": gamma, "method": "dissipative"})


def _fig4a(config: RunConfig) -> Tuple[Dict[str, Any], List[str]]:
    result = _dissipative_sweep(config, FIG4_GAMMA, FIG4A_N)
    _write_dissipative_traces(result, FIG4_GAMMA)
    table = saturation_table(result)
    lines = [f"gamma = {FIG4_GAMMA:g} ({FIG4_NORMALIZATION} decay): QFI saturation (95% of the running maximum)"]
    for row in table.itertuples():
        lines.append(f"N = {row.N}: t_max = {row.t_max}, max QFI = {row.qfi_max:.6e}, "
                     f"plateau = {row.qfi_saturated:.6e} "
                     f"{_verdict(row.t_max is not None and not pd.isna(row.t_max))}")
    return {"saturation": table.to_dict(orient="records")}, lines


def _monotone_non_increasing(values: Sequence[float], slack: float = T_MAX_SLACK) -> bool:
    """Each value at most (1 + slack) times its predecessor; missing values fail."""
    clean = [v for v in values if v is not None and not pd.isna(v)]
    return len(clean) == len(values) and all(b <= a * (1.0 + slack) for a, b in zip(clean, clean[1:]))


def _fig4b(config: RunConfig) -> Tuple[Dict[str, Any], List[str]]:
    fits, lines = {}, [f"t_max vs N at fixed gamma, {FIG4_NORMALIZATION} decay (expected non-increasing in N "
                       f"within {T_MAX_SLACK:.0%})"]
    for gamma in FIG4_GAMMAS:
        result = _dissipative_sweep(config, gamma, FIG4_N)
        _write_dissipative_traces(result, gamma)
        table = saturation_table(result)
        fits[f"gamma={gamma:g}"] = table.to_dict(orient="records")
        t_max = list(table["t_max"])
        lines.append(f"gamma = {gamma:g}: t_max = {t_max} {_verdict(_monotone_non_increasing(t_max))}")
    return fits, lines


def _fig4c(config: RunConfig) -> Tuple[Dict[str, Any], List[str]]:
    result = _dissipative_sweep(config, FIG4_GAMMA, FIG4_N)
    _write_dissipative_traces(result, FIG4_GAMMA)
    table = saturation_table(result)
    write_table("saturated_qfi_vs_N", table, {"gamma": FIG4_GAMMA, "decay_normalization": FIG4_NORMALIZATION})
    fit: ScalingFit = fit_power_law(table["N"].to_numpy(), table["qfi_saturated"].to_numpy())
    ok = 1.5 <= fit.exponent <= 2.0
    lines = [
        f"plateau QFI vs N at gamma = {FIG4_GAMMA:g} ({FIG4_NORMALIZATION} decay), N = {FIG4_N}",
        f"a = {fit.exponent:.4f} +/- {fit.stderr:.4f} (desk-scale band [1.5, 2.0]; large-N value 1.8) {_verdict(ok)}",
    ]
    return {"n_exponent": fit.as_dict()}, lines


_FIGURE_RUNNERS: Dict[str, Callable[[RunConfig], Tuple[Dict[str, Any], List[str]]]] = {
    "fig2": _fig2,
    "fig3a": _fig3a,
    "fig3b": _fig3b,
    "fig4a": _fig4a,
    "fig4b": _fig4b,
    "fig4c": _fig4c,
}


def validate_figure(config: RunConfig) -> str:
    figure = (config.figure or "").strip().lower()
    if figure not in FIGURES:
        raise ConfigError(f"unknown figure id {config.figure!r}; expected one of {FIGURES}")
    if figure != "fig2" and not config.desk_scale:
        raise ConfigError(f"{figure} runs only at reduced size; pass --desk-scale")
    return figure


def cmd_reproduce(config: RunConfig) -> Dict[str, Any]:
    """Run one figure pipeline and write fits.json and summary.txt next to its traces."""
    figure = validate_figure(config)
    exit_code = EXIT_OK
    try:
        fits, lines = _FIGURE_RUNNERS[figure](config)
    except FitError as e:
        logger.error("[command_controller] %s fit failed: %s", figure, e)
        fits, lines = {"error": str(e)}, [f"fit failed: {e}"]
        exit_code = exit_code_for(e)
    write_json("fits.json", fits)
    write_text("summary.txt", "\n".join([f"{figure} (desk scale)"] + lines))
    return {"command": "reproduce", "figure": figure, "summary": lines, "exit_code": exit_code}


COMMAND_HANDLERS: Dict[str, Callable[[RunConfig], Dict[str, Any]]] = {
    "recurrence": cmd_recurrence,
    "qfi": cmd_qfi,
    "husimi": cmd_husimi,
    "reproduce": cmd_reproduce,
}


def execute_command(config: RunConfig) -> Tuple[int, Dict[str, Any]]:
    """
    Run config.command, writing its outputs and manifest under config.out_dir
    (reproduce bundles go to out_dir/<figure>).

    :param config: Validated run configuration
    :return: (exit code, report)
    """
    started_at = datetime.now(timezone.utc)
    started = time.perf_counter()
    handler = COMMAND_HANDLERS.get(config.command)
    report: Dict[str, Any] = {"command": config.command}
    initialized = False

    try:
        if handler is None:
            raise ConfigError(f"unknown command {config.command!r}")
        out_dir = config.out_dir
        if config.command == "reproduce":
            out_dir = os.path.join(out_dir, validate_figure(config))
        init_results_store(out_dir)
        initialized = True
        report = handler(config)
        exit_code = report.pop("exit_code", EXIT_OK)

    except KickedTopError as ex:
        logger.error("[command_controller] Command '%s' failed: %s", config.command, ex)
        report["error"] = str(ex)
        exit_code = exit_code_for(ex)

    except Exception as ex:
        logger.exception("[command_controller] Unexpected error in command '%s': %s", config.command, ex)
        report["error"] = repr(ex)
        exit_code = exit_code_for(ex)

    if initialized:
        write_manifest(config.command, config.to_dict(), started_at, time.perf_counter() - started)
        close_results_store()
    report["exit_code"] = exit_code
    return exit_code, report
