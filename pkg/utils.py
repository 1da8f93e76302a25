"""
Utility functions for run outputs: JSON/CSV export, memory sampling
"""

import json
from pathlib import Path
from typing import Any, Dict, List, Union

import numpy as np
import pandas as pd
import psutil

from config import CSV_COLUMNS

PathLike = Union[str, Path]


def _to_builtin(value: Any) -> Any:
    """numpy scalars and arrays to plain JSON types; NaN becomes null"""
    if isinstance(value, dict):
        return {str(k): _to_builtin(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_to_builtin(v) for v in value]
    if isinstance(value, np.ndarray):
        return _to_builtin(value.tolist())
    if isinstance(value, np.generic):
        value = value.item()
    if isinstance(value, Path):
        return str(value)
    if isinstance(value, float) and not np.isfinite(value):
        return None
    return value


def load_json(path: PathLike) -> Dict[str, Any]:
    """Load a JSON object; raises ValueError for unreadable or non-object files"""
    path = Path(path)
    try:
        with open(path, 'r', encoding='utf-8') as f:
            data = json.load(f)
    except (OSError, json.JSONDecodeError) as e:
        raise ValueError(f"Cannot read JSON file {path}: {e}") from e
    if not isinstance(data, dict):
        raise ValueError(f"{path} must hold a JSON object, got {type(data).__name__}")
    return data


def save_json(data: Dict[str, Any], path: PathLike) -> str:
    """Export data to JSON file"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, 'w', encoding='utf-8') as f:
        json.dump(_to_builtin(data), f, indent=2, ensure_ascii=False)
    return str(path)


def save_report_csv(frame: pd.DataFrame, path: PathLike) -> str:
    """
    Write a per-step report with the fixed column layout.
    Missing values are empty cells; floats use shortest round-trip text.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame.reindex(columns=CSV_COLUMNS).to_csv(path, index=False, na_rep="")
    return str(path)


def records(frame: pd.DataFrame) -> List[Dict[str, Any]]:
    return _to_builtin(frame.to_dict(orient='records'))


def rss_mb() -> float:
    """Resident memory of this process in MB"""
    return psutil.Process().memory_info().rss / 1024.0 ** 2


def get_file_size(filepath: Path) -> str:
    """Get human readable file size"""
    try:
        size = float(Path(filepath).stat().st_size)
    except OSError:
        return "0 B"
    for unit in ['B', 'KB', 'MB', 'GB', 'TB']:
        if size < 1024.0:
            return f"{size:.1f} {unit}"
        size /= 1024.0
    return f"{size:.1f} PB"
