import numpy as np
import pytest

from kicked_top.analysis.scaling import (
    detect_saturation,
    even_n_ladder,
    exponent_range_sensitivity,
    fit_power_law,
    fit_trace,
    plateau_value,
)
from kicked_top.dynamics.pure_evolution import QfiTrace
from kicked_top.errors import ConfigError, FitError


def _trace(steps, qfi):
    return QfiTrace(steps=steps, qfi=qfi, params={"N": 20})


def test_exact_power_law_is_recovered():
    x = np.arange(1, 101)
    fit = fit_power_law(x, 3.0 * x ** 2.0)
    assert fit.exponent == pytest.approx(2.0, abs=1e-12)
    assert fit.log_prefactor == pytest.approx(np.log(3.0), abs=1e-10)
    assert fit.r_squared == pytest.approx(1.0, abs=1e-12)
    assert fit.n_points == 100
    assert fit.predict([10.0])[0] == pytest.approx(300.0, rel=1e-10)


def test_noisy_power_law_is_recovered():
    rng = np.random.default_rng(7)
    x = np.arange(1, 1001, dtype=float)
    y = 5.0 * x ** 1.8 * np.exp(rng.normal(scale=0.05, size=x.size))
    fit = fit_power_law(x, y)
    assert fit.exponent == pytest.approx(1.8, abs=0.05)
    assert 0.0 < fit.stderr < 0.01
    assert fit.r_squared > 0.99


def test_nan_values_are_rejected():
    x = np.arange(1, 6, dtype=float)
    with pytest.raises(FitError, match="NaN"):
        fit_power_law(x, np.array([1.0, 2.0, np.nan, 4.0, 5.0]))


def test_fit_range_selects_window():
    x = np.arange(1, 101, dtype=float)
    y = np.where(x < 50, x ** 2, 2500.0 * (x / 50.0))
    fit = fit_power_law(x, y, fit_range=(50, 100))
    assert fit.exponent == pytest.approx(1.0, abs=1e-12)
    assert fit.fit_range == (50.0, 100.0)
    assert fit.n_points == 51


def test_stride_keeps_multiples_only():
    x = np.arange(1, 41, dtype=float)
    y = np.where(x % 8 == 0, x ** 2, 1.0)
    fit = fit_power_law(x, y, stride=8)
    assert fit.n_points == 5
    assert fit.exponent == pytest.approx(2.0, abs=1e-12)


def test_fit_errors():
    with pytest.raises(FitError):
        fit_power_law([1.0, 2.0], [1.0, 4.0])
    with pytest.raises(FitError):
        fit_power_law([1.0, 2.0, 3.0], [1.0, -4.0, 9.0])
    with pytest.raises(FitError):
        fit_power_law([1.0, 2.0, 3.0], [1.0, 4.0])
    with pytest.raises(FitError):
        fit_power_law(np.arange(1, 10), np.arange(1, 10), fit_range=(100, 1000))
    with pytest.raises(ConfigError):
        fit_power_law(np.arange(1, 10), np.arange(1, 10), fit_range=(5, 5))


def test_fit_trace_drops_step_zero():
    steps = np.arange(0, 30)
    trace = _trace(steps, 0.5 * steps.astype(float) ** 2)
    fit = fit_trace(trace, fit_range=None)
    assert fit.exponent == pytest.approx(2.0, abs=1e-12)
    assert fit.n_points == 29


def test_saturation_of_plateau():
    steps = np.arange(0, 100)
    qfi = np.minimum(steps.astype(float), 50.0)
    assert detect_saturation(_trace(steps, qfi)) == 48
    assert detect_saturation(_trace(steps, qfi), level=0.5) == 25


def test_plateau_value_is_median_after_saturation():
    steps = np.arange(0, 100)
    qfi = np.minimum(steps.astype(float), 50.0)
    trace = _trace(steps, qfi)
    assert plateau_value(trace, detect_saturation(trace)) == 50.0
    assert np.isnan(plateau_value(trace, None))


def test_saturation_of_peaked_trace():
    steps = np.arange(0, 100)
    qfi = steps * np.exp(-steps / 20.0)
    t_max = detect_saturation(_trace(steps, qfi))
    assert t_max is not None
    assert t_max < 20
    assert qfi[t_max] >= 0.95 * qfi.max()


def test_still_rising_trace_has_no_saturation():
    steps = np.arange(0, 50)
    assert detect_saturation(_trace(steps, steps.astype(float) ** 2)) is None


def test_flat_end_counts_as_saturated():
    steps = np.arange(0, 50)
    qfi = np.minimum(steps.astype(float), 40.0)
    qfi[-1] = 40.0 * (1.0 + 1e-5)
    assert detect_saturation(_trace(steps, qfi)) == 39


def test_saturation_level_validation():
    with pytest.raises(ConfigError):
        detect_saturation(_trace([0, 1], [0.0, 1.0]), level=1.0)
    assert detect_saturation(_trace([], [])) is None


def test_range_sensitivity_marks_short_windows():
    steps = np.arange(0, 200)
    trace = _trace(steps, steps.astype(float) ** 2)
    frame = exponent_range_sensitivity(trace, [(10, 100), (10, 199), (500, 1000)])
    assert list(frame.columns) == ["lo", "hi", "exponent", "stderr", "n_points"]
    assert frame["exponent"].iloc[0] == pytest.approx(2.0, abs=1e-10)
    assert frame["exponent"].iloc[1] == pytest.approx(2.0, abs=1e-10)
    assert np.isnan(frame["exponent"].iloc[2])
    assert frame["n_points"].iloc[2] == 0


def test_even_n_ladder():
    ladder = even_n_ladder(20, 200, 5)
    assert ladder[0] == 20 and ladder[-1] == 200
    assert all(n % 2 == 0 for n in ladder)
    assert list(ladder) == sorted(set(ladder))
    assert even_n_ladder(2, 4, 10) == (2, 4)
    with pytest.raises(ConfigError):
        even_n_ladder(1, 10, 3)
    with pytest.raises(ConfigError):
        even_n_ladder(20, 10, 3)
