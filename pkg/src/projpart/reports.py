"""JSON report envelopes with exact rationals and no run-dependent fields,
so the same config always serializes to the same bytes."""

from __future__ import annotations

import dataclasses
import json
import platform
from fractions import Fraction
from importlib import metadata
from typing import Any

import numpy as np

from .projgeom import Flat

SCHEMA = 1


def to_jsonable(obj: Any) -> Any:
    if isinstance(obj, Fraction):
        return obj.numerator if obj.denominator == 1 else f"{obj.numerator}/{obj.denominator}"
    if isinstance(obj, Flat):
        return [list(r) for r in obj.basis]
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple, set, frozenset)):
        items = sorted(obj) if isinstance(obj, (set, frozenset)) else obj
        return [to_jsonable(v) for v in items]
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, float):
        return round(obj, 10)
    if hasattr(obj, "to_dict"):
        return to_jsonable(obj.to_dict())
    if dataclasses.is_dataclass(obj):
        return to_jsonable(dataclasses.asdict(obj))
    return obj


def versions() -> dict[str, str]:
    try:
        pkg = metadata.version("artifact")
    except metadata.PackageNotFoundError:
        pkg = "unknown"
    return {"artifact": pkg, "numpy": np.__version__, "python": platform.python_version(), "schema": str(SCHEMA)}


def envelope(operation: str, config: dict, result: Any, mode: str = "exhaustive", seed: int | None = None) -> dict:
    return {
        "operation": operation,
        "config": to_jsonable(config),
        "mode": mode,
        "seed": seed,
        "result": to_jsonable(result),
        "versions": versions(),
    }


def dumps(obj: Any) -> str:
    return json.dumps(to_jsonable(obj), sort_keys=True, indent=2) + "\n"


def error_record(exc: BaseException, operation: str | None = None) -> dict:
    return {"error": type(exc).__name__, "message": str(exc), "operation": operation}
