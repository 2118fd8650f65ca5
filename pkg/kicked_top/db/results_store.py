"""
@description
Handles writing and reading simulation results on disk.
Provides a simple interface to:
 - Initialize an output directory for one command run
 - Write QFI traces, Husimi grids and tables as CSV with JSON metadata sidecars
 - Write fit summaries, text summaries and the run manifest
 - Cache sweep tables keyed by the sweep's content hash

Key features:
- init_results_store(out_dir): sets the global output directory, creating it if needed
- write_trace() / write_grid() / write_table(): CSV + "<name>.json" sidecar
- query_table(): reads a CSV written earlier back into a DataFrame
- load_cached_sweep() / save_cached_sweep(): on-disk sweep cache
- close_results_store(): forgets the output directory

@dependencies
- pandas for CSV tables
- json for sidecars and manifests

@notes
- Floats are written with "%.12e" and a fixed column order so identical runs give identical files.
- The cache directory comes from KICKED_TOP_CACHE_DIR (default ~/.cache/kicked_top).
- Cache failures are logged and ignored; a run never fails because of its cache.
"""

import json
import os
from datetime import datetime, timezone
from typing import Any, Dict, Optional, Tuple

import numpy as np
import pandas as pd

from kicked_top import __version__
from kicked_top.dynamics.phase_space import HusimiGrid
from kicked_top.dynamics.pure_evolution import QfiTrace
from kicked_top.utils.logger import get_logger

logger = get_logger(__name__)

FLOAT_FORMAT = "%.12e"
MANIFEST_NAME = "manifest.json"

_out_dir: Optional[str] = None


def _jsonable(value: Any) -> Any:
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return [_jsonable(v) for v in value.tolist()]
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (np.floating,)):
        return float(value)
    if isinstance(value, complex):
        return {"re": value.real, "im": value.imag}
    return value


def init_results_store(out_dir: str) -> str:
    """
    Set the global output directory, creating it if it does not exist.

    :param out_dir: Directory for this run's files
    :return: The absolute output directory
    """
    global _out_dir
    _out_dir = os.path.abspath(out_dir)
    os.makedirs(_out_dir, exist_ok=True)
    logger.info("[results_store] Writing results to %s", _out_dir)
    return _out_dir


def get_output_dir() -> Optional[str]:
    return _out_dir


def _path(name: str) -> Optional[str]:
    if _out_dir is None:
        logger.warning("[results_store] Attempting to write '%s' but the results store is not initialized.", name)
        return None
    path = os.path.join(_out_dir, name)
    os.makedirs(os.path.dirname(path), exist_ok=True)
    return path


def write_json(name: str, data: Dict[str, Any]) -> Optional[str]:
    path = _path(name)
    if path is None:
        return None
    with open(path, "w", encoding="utf-8") as f:
        json.dump(_jsonable(data), f, indent=2, sort_keys=True)
        f.write("\n")
    return path


def write_text(name: str, text: str) -> Optional[str]:
    path = _path(name)
    if path is None:
        return None
    with open(path, "w", encoding="utf-8") as f:
        f.write(text if text.endswith("\n") else text + "\n")
    return path


def write_table(name: str, frame: pd.DataFrame, metadata: Optional[Dict[str, Any]] = None) -> Optional[str]:
    """
    Write `frame` to "<name>.csv" and, if given, `metadata` to "<name>.json".

    :param name: Path relative to the output directory, without extension
    :return: The CSV path, or None if the store is not initialized
    """
    path = _path(name + ".csv")
    if path is None:
        return None
    frame.to_csv(path, index=False, float_format=FLOAT_FORMAT)
    if metadata is not None:
        sidecar = dict(metadata)
        sidecar.setdefault("tool_version", __version__)
        sidecar["columns"] = list(frame.columns)
        write_json(name + ".json", sidecar)
    logger.info("[results_store] Wrote %d rows to %s", len(frame), path)
    return path


def write_trace(name: str, trace: QfiTrace) -> Optional[str]:
    """QFI trace CSV (step, t, qfi, extras) with its parameters as sidecar."""
    return write_table(name, trace.to_frame(), dict(trace.params))


def write_grid(name: str, grid: HusimiGrid, metadata: Dict[str, Any]) -> Optional[str]:
    """Husimi grid as long-format (theta, phi, value) rows."""
    meta = dict(metadata)
    meta.update({"n_theta": grid.n_theta, "n_phi": grid.n_phi})
    return write_table(name, grid.to_frame(), meta)


def write_manifest(command: str, params: Dict[str, Any], started_at: datetime, wall_time_s: float) -> Optional[str]:
    """manifest.json with enough information to re-run the command."""
    return write_json(MANIFEST_NAME, {
        "command": command,
        "params": params,
        "tool_version": __version__,
        "started_at": started_at.astimezone(timezone.utc).isoformat(),
        "wall_time_s": round(float(wall_time_s), 3),
    })


def query_table(name: str) -> pd.DataFrame:
    """
    Read "<name>.csv" from the output directory.

    :return: DataFrame, empty when the store is not initialized or the file is missing
    """
    if _out_dir is None:
        logger.warning("[results_store] Attempting to read '%s' but the results store is not initialized.", name)
        return pd.DataFrame()
    path = os.path.join(_out_dir, name + ".csv")
    if not os.path.isfile(path):
        logger.warning("[results_store] No table at %s", path)
        return pd.DataFrame()
    return pd.read_csv(path)


def get_cache_dir(cache_dir: Optional[str] = None) -> str:
    if cache_dir:
        return os.path.expanduser(cache_dir)
    return os.path.expanduser(os.getenv("KICKED_TOP_CACHE_DIR", os.path.join("~", ".cache", "kicked_top")))


def load_cached_sweep(key: str, cache_dir: Optional[str] = None) -> Optional[Tuple[pd.DataFrame, Dict[str, Any]]]:
    """
    :return: (table, metadata) for a cached sweep, or None on a miss
    """
    base = os.path.join(get_cache_dir(cache_dir), key)
    if not (os.path.isfile(base + ".csv") and os.path.isfile(base + ".json")):
        logger.info("[results_store] Cache miss for sweep %s", key[:12])
        return None
    try:
        frame = pd.read_csv(base + ".csv")
        with open(base + ".json", "r", encoding="utf-8") as f:
            metadata = json.load(f)
    except (OSError, ValueError) as e:
        logger.error("[results_store] Unreadable cache entry %s: %s", base, e)
        return None
    logger.info("[results_store] Cache hit for sweep %s", key[:12])
    return frame, metadata


def save_cached_sweep(key: str, frame: pd.DataFrame, metadata: Dict[str, Any],
                      cache_dir: Optional[str] = None) -> None:
    directory = get_cache_dir(cache_dir)
    base = os.path.join(directory, key)
    try:
        os.makedirs(directory, exist_ok=True)
        frame.to_csv(base + ".csv", index=False, float_format=FLOAT_FORMAT)
        with open(base + ".json", "w", encoding="utf-8") as f:
            json.dump(_jsonable(metadata), f, indent=2, sort_keys=True)
        logger.info("[results_store] Cached sweep %s in %s", key[:12], directory)
    except OSError as e:
        logger.error("[results_store] Error writing cache entry %s: %s", base, e)


def close_results_store() -> None:
    """
    Forget the output directory (e.g. at the end of a command).
    """
    global _out_dir
    if _out_dir:
        logger.info("[results_store] Results store closed (%s).", _out_dir)
        _out_dir = None
