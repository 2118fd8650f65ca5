"""
@description
Loads YAML run configurations, parses symbolic parameter expressions and
assembles the validated RunConfig every command consumes.

Key features:
- load_yaml_config(file_path): reads a YAML file and returns the contents as a Python dict
- evaluate_expression(expr, **symbols): "pi/2", "pi*j", "pi*j+delta" -> float
- RunConfig: frozen, validated at construction
- build_run_config(command, flags, file_data): defaults < environment < flags < file

@dependencies
- PyYAML: for parsing YAML
- Python's ast module for the expression whitelist

@notes
- A missing config file yields an empty dict and a warning; a malformed one raises ConfigError.
- A file value that overrides a conflicting explicit flag is applied with a warning.
- Environment variables: KICKED_TOP_WORKERS, KICKED_TOP_CACHE_DIR, KICKED_TOP_LOG_LEVEL.
"""

import ast
import operator
import os
from dataclasses import asdict, dataclass, fields
from typing import Any, Dict, Mapping, Optional, Tuple

import numpy as np
import yaml

from kicked_top.dynamics.dissipative_evolution import NORMALIZATIONS
from kicked_top.dynamics.floquet import resonance_case
from kicked_top.dynamics.pure_evolution import DEFAULT_EPS_LADDER, validate_eps_ladder
from kicked_top.errors import ConfigError
from kicked_top.utils.logger import get_logger

logger = get_logger(__name__)

COMMANDS = ("recurrence", "qfi", "husimi", "reproduce")
METHODS = ("pure-exact", "pure-echo", "dissipative")

_BINARY = {
    ast.Add: operator.add,
    ast.Sub: operator.sub,
    ast.Mult: operator.mul,
    ast.Div: operator.truediv,
    ast.Pow: operator.pow,
}
_UNARY = {ast.USub: operator.neg, ast.UAdd: operator.pos}


def load_yaml_config(file_path: str) -> Dict[str, Any]:
    """
    Load a YAML file and return its contents as a dictionary.

    :param file_path: The path to the YAML file.
    :return: A dictionary representing the YAML contents. Empty dict if the file is missing.
    :raises ConfigError: if the file cannot be parsed or is not a mapping
    """
    if not os.path.isfile(file_path):
        logger.warning("[config_loader] YAML config file not found: %s", file_path)
        return {}

    try:
        with open(file_path, "r", encoding="utf-8") as f:
            data = yaml.safe_load(f)
    except yaml.YAMLError as e:
        raise ConfigError(f"cannot parse YAML file '{file_path}': {e}") from e
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise ConfigError(f"YAML file '{file_path}' must contain a mapping at top level")
    return data


def evaluate_expression(expr: Any, **symbols: float) -> float:
    """
    Evaluate a numeric literal or an arithmetic expression over pi and the given symbols.

    :param expr: Number or string such as "pi*j/2"
    :param symbols: Values for names like j, delta
    :return: The value as float
    :raises ConfigError: on syntax errors, unknown names or disallowed constructs
    """
    if isinstance(expr, (int, float, np.integer, np.floating)) and not isinstance(expr, bool):
        return float(expr)
    if not isinstance(expr, str):
        raise ConfigError(f"expected a number or an expression string, got {expr!r}")
    names = {"pi": float(np.pi)}
    names.update({k: float(v) for k, v in symbols.items() if v is not None})
    try:
        tree = ast.parse(expr.strip(), mode="eval")
    except SyntaxError as e:
        raise ConfigError(f"cannot parse expression {expr!r}: {e.msg}") from e

    def walk(node: ast.AST) -> float:
        if isinstance(node, ast.Expression):
            return walk(node.body)
        if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)) \
                and not isinstance(node.value, bool):
            return float(node.value)
        if isinstance(node, ast.Name):
            if node.id not in names:
                raise ConfigError(f"unknown symbol {node.id!r} in {expr!r}")
            return names[node.id]
        if isinstance(node, ast.BinOp) and type(node.op) in _BINARY:
            return _BINARY[type(node.op)](walk(node.left), walk(node.right))
        if isinstance(node, ast.UnaryOp) and type(node.op) in _UNARY:
            return _UNARY[type(node.op)](walk(node.operand))
        raise ConfigError(f"unsupported construct {type(node).__name__} in {expr!r}")

    try:
        return float(walk(tree))
    except ZeroDivisionError as e:
        raise ConfigError(f"division by zero in {expr!r}") from e


def _as_tuple(value: Any, cast) -> Tuple:
    if isinstance(value, (list, tuple)):
        return tuple(cast(v) for v in value)
    if isinstance(value, str) and "," in value:
        return tuple(cast(v) for v in value.split(",") if v.strip())
    return (cast(value),)


def _as_int(value: Any) -> int:
    number = float(value)
    if number != int(number):
        raise ConfigError(f"expected an integer, got {value!r}")
    return int(number)


@dataclass(frozen=True)
class RunConfig:
    """
    Parameters for one CLI invocation. alpha and beta stay symbolic because
    they may depend on j; theta and phi are resolved to floats.
    """

    command: str = "qfi"
    n_spins: Tuple[int, ...] = (20,)
    alpha: str = "pi/2"
    beta: str = "pi*j+delta"
    resonance: Optional[str] = None
    delta: float = 0.0
    gamma: float = 0.0
    theta: float = float(np.pi / 4)
    phi: float = float(np.pi / 4)
    period_T: float = 1.0
    method: str = "pure-exact"
    n_max: int = 1000
    dense_until: int = 64
    per_decade: int = 24
    stride: int = 1
    max_period: int = 100
    tol: float = 1e-8
    snapshots: Tuple[int, ...] = (0, 3, 6, 8)
    n_theta: int = 128
    n_phi: int = 256
    rel_threshold: float = 0.5
    eps_ladder: Tuple[float, ...] = DEFAULT_EPS_LADDER
    substeps: Optional[int] = None
    decay_normalization: str = "collective"
    fit: bool = True
    fit_range: Tuple[float, float] = (10.0, 1e4)
    figure: Optional[str] = None
    desk_scale: bool = False
    out_dir: str = "results"
    workers: int = 1
    use_cache: bool = True
    cache_dir: Optional[str] = None
    log_level: str = "INFO"

    def __post_init__(self):
        if self.command not in COMMANDS:
            raise ConfigError(f"unknown command {self.command!r}; expected one of {COMMANDS}")
        if not self.n_spins:
            raise ConfigError("at least one N is required")
        for n in self.n_spins:
            if n < 2 or n % 2:
                raise ConfigError(f"N must be an even integer >= 2, got {n}")
        if self.gamma < 0:
            raise ConfigError(f"gamma must be >= 0, got {self.gamma}")
        if self.method not in METHODS:
            raise ConfigError(f"unknown method {self.method!r}; expected one of {METHODS}")
        if self.n_theta < 8 or self.n_phi < 8:
            raise ConfigError(f"Husimi grid must be at least 8x8, got {self.n_theta}x{self.n_phi}")
        if not 0.0 < self.rel_threshold < 1.0:
            raise ConfigError(f"rel_threshold must lie in (0, 1), got {self.rel_threshold}")
        validate_eps_ladder(self.eps_ladder)
        if self.n_max < 0 or self.dense_until < 0 or self.per_decade < 1 or self.stride < 1:
            raise ConfigError("n_max, dense_until must be >= 0 and per_decade, stride >= 1")
        if self.max_period < 1 or self.tol <= 0:
            raise ConfigError(f"max_period must be >= 1 and tol > 0, got {self.max_period}, {self.tol}")
        if any(s < 0 for s in self.snapshots):
            raise ConfigError(f"snapshot steps must be >= 0, got {self.snapshots}")
        if self.substeps is not None and self.substeps < 1:
            raise ConfigError(f"substeps must be >= 1, got {self.substeps}")
        if self.decay_normalization not in NORMALIZATIONS:
            raise ConfigError(f"unknown decay normalization {self.decay_normalization!r}; "
                              f"expected one of {NORMALIZATIONS}")
        if self.workers < 1:
            raise ConfigError(f"workers must be >= 1, got {self.workers}")
        if self.period_T <= 0:
            raise ConfigError(f"period_T must be positive, got {self.period_T}")
        if not self.fit_range[0] < self.fit_range[1]:
            raise ConfigError(f"fit_range must satisfy lo < hi, got {self.fit_range}")
        if self.resonance is not None:
            resonance_case(self.resonance)
        # fail at parse time rather than inside a worker
        self.alpha_for(1)
        self.beta_for(1)

    def beta_expression(self) -> str:
        if self.resonance is None:
            return self.beta
        r, s = resonance_case(self.resonance)
        return f"4*pi*j*{r}/{s}+delta"

    def alpha_for(self, j: int) -> float:
        return evaluate_expression(self.alpha, j=j, delta=self.delta)

    def beta_for(self, j: int) -> float:
        return evaluate_expression(self.beta_expression(), j=j, delta=self.delta)

    def to_dict(self) -> Dict[str, Any]:
        data = asdict(self)
        return {k: list(v) if isinstance(v, tuple) else v for k, v in data.items()}


_COERCE = {
    "n_spins": lambda v: _as_tuple(v, _as_int),
    "snapshots": lambda v: _as_tuple(v, _as_int),
    "eps_ladder": lambda v: _as_tuple(v, float),
    "fit_range": lambda v: _as_tuple(v, float),
    "theta": evaluate_expression,
    "phi": evaluate_expression,
    "delta": evaluate_expression,
    "gamma": float,
    "tol": float,
    "rel_threshold": float,
    "period_T": evaluate_expression,
    "alpha": str,
    "beta": str,
    "n_max": _as_int,
    "dense_until": _as_int,
    "per_decade": _as_int,
    "stride": _as_int,
    "max_period": _as_int,
    "n_theta": _as_int,
    "n_phi": _as_int,
    "workers": _as_int,
    "substeps": lambda v: None if v is None else _as_int(v),
    "decay_normalization": lambda v: str(v).lower(),
    "fit": bool,
    "desk_scale": bool,
    "use_cache": bool,
    "log_level": lambda v: str(v).upper(),
}
_ALIASES = {"N": "n_spins", "eps": "eps_ladder", "out": "out_dir"}
_FIELDS = {f.name for f in fields(RunConfig)}


def _normalize(source: Mapping[str, Any], origin: str) -> Dict[str, Any]:
    out = {}
    for key, value in source.items():
        name = _ALIASES.get(key, key)
        if name not in _FIELDS:
            raise ConfigError(f"unknown {origin} setting {key!r}")
        try:
            out[name] = _COERCE.get(name, lambda v: v)(value)
        except (TypeError, ValueError) as e:
            if isinstance(e, ConfigError):
                raise
            raise ConfigError(f"invalid {origin} value for {key!r}: {value!r}") from e
    return out


def _file_settings(command: str, file_data: Mapping[str, Any]) -> Dict[str, Any]:
    """Flatten top-level keys, `logging.level` and the section named after the command."""
    flat = {}
    for key, value in file_data.items():
        if key in COMMANDS:
            continue
        if key == "logging" and isinstance(value, dict):
            if "level" in value:
                flat["log_level"] = value["level"]
            continue
        flat[key] = value
    section = file_data.get(command) or {}
    if not isinstance(section, dict):
        raise ConfigError(f"config section {command!r} must be a mapping")
    flat.update(section)
    return flat


def _env_settings() -> Dict[str, Any]:
    env = {}
    if os.getenv("KICKED_TOP_WORKERS"):
        env["workers"] = os.environ["KICKED_TOP_WORKERS"]
    if os.getenv("KICKED_TOP_CACHE_DIR"):
        env["cache_dir"] = os.environ["KICKED_TOP_CACHE_DIR"]
    if os.getenv("KICKED_TOP_LOG_LEVEL"):
        env["log_level"] = os.environ["KICKED_TOP_LOG_LEVEL"]
    return env


def build_run_config(command: str, flags: Optional[Mapping[str, Any]] = None,
                     file_data: Optional[Mapping[str, Any]] = None) -> RunConfig:
    """
    Merge settings into a RunConfig.

    :param command: One of recurrence, qfi, husimi, reproduce
    :param flags: Only the flags given explicitly on the command line
    :param file_data: Parsed YAML config (may be empty)
    :return: Validated RunConfig
    :raises ConfigError: on unknown keys or invalid values
    """
    merged: Dict[str, Any] = {"command": command}
    merged.update(_normalize(_env_settings(), "environment"))
    explicit = _normalize(flags or {}, "flag")
    merged.update(explicit)

    from_file = _normalize(_file_settings(command, file_data or {}), "config file")
    for name, value in from_file.items():
        if name in explicit and explicit[name] != value:
            logger.warning("[config_loader] config file sets %s=%r, overriding flag value %r",
                           name, value, explicit[name])
    merged.update(from_file)
    return RunConfig(**merged)
