"""JSON and CSV helpers shared by the CLI and the harness."""

from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np

from .array import ArrayGeometry, example_sla, ula


def geometry_from_dict(data: dict | None) -> ArrayGeometry:
    """Geometry from a JSON-style dict.

    Accepted forms: ``{"kind": "ula", "n_tx": 6, "n_rx": 8}`` (optional
    ``tx_spacing_m``, ``wavelength_m``), ``{"kind": "sla"}`` and explicit
    ``{"tx_positions_m": [...], "rx_positions_m": [...], "wavelength_m": ...}``.
    ``None`` gives the default 6x8 ULA.
    """
    if data is None:
        return ula()
    if isinstance(data, ArrayGeometry):
        return data
    kind = data.get("kind", "custom" if "tx_positions_m" in data else "ula")
    wavelength = data.get("wavelength_m")
    extra = {} if wavelength is None else {"wavelength": float(wavelength)}
    if kind == "ula":
        return ula(int(data.get("n_tx", 6)), int(data.get("n_rx", 8)), tx_spacing=data.get("tx_spacing_m"),
                   **extra)
    if kind == "sla":
        return example_sla(**extra)
    if kind == "custom":
        return ArrayGeometry.from_dict(data)
    raise ValueError(f"unknown geometry kind {kind!r}")


def geometry_to_dict(geom: ArrayGeometry) -> dict:
    return {"kind": "custom", "name": geom.name, **geom.to_dict()}


def load_geometry(path) -> ArrayGeometry:
    return geometry_from_dict(json.loads(Path(path).read_text()))


def save_geometry(geom: ArrayGeometry, path) -> None:
    write_json(geometry_to_dict(geom), path)


def jsonable(obj):
    """Recursively convert numpy types; non-finite floats become strings."""
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return jsonable(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else str(x)
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    return obj


def dumps(obj) -> str:
    return json.dumps(jsonable(obj), indent=2)


def write_json(obj, path) -> None:
    Path(path).write_text(dumps(obj) + "\n")


def read_json(path) -> dict:
    return json.loads(Path(path).read_text())
