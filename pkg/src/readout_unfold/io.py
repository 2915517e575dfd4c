"""JSON and CSV file formats.

Every JSON document carries ``"schema": "v1"`` and a ``"type"`` tag.
Matrices are stored row-major with rows indexed by the *measured* state and
columns by the *true* state (column-stochastic orientation)::

    {"schema": "v1", "type": "response_matrix", "n_qubits": 2, "n_bins": 4,
     "rows": [[...], ...]}

Vectors are ``{"schema": "v1", "type": ..., "n_qubits": n, "values": [...]}``
with type ``count_vector``, ``probability_vector`` or ``unfold_result``;
any of them is accepted wherever a vector is read.  ``n_qubits`` is ``null``
for binned spectra whose length is not a power of two.

CSV files always have a header row, use ``.`` as decimal separator, and write
floats with 17 significant digits.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
from pathlib import Path

import numpy as np

from . import __version__
from .core import ResponseMatrix, as_response, n_qubits_for, validate_counts, validate_vector
from .errors import ValidationError
from .response import CalibrationData, NoiseModel

SCHEMA = "v1"


def _nq(size: int):
    try:
        return n_qubits_for(size)
    except ValidationError:
        return None


def _dump(doc: dict, path) -> None:
    text = json.dumps(doc, allow_nan=False) + "\n"
    Path(path).write_text(text)


def _load(path, expected: tuple[str, ...]) -> dict:
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path}: invalid JSON ({exc})") from exc
    if not isinstance(doc, dict):
        raise ValidationError(f"{path}: expected a JSON object")
    if doc.get("schema") != SCHEMA:
        raise ValidationError(f"{path}: unsupported schema {doc.get('schema')!r}")
    if doc.get("type") not in expected:
        raise ValidationError(f"{path}: expected type {' or '.join(expected)}, got {doc.get('type')!r}")
    return doc


def _field(doc: dict, key: str, path):
    try:
        return doc[key]
    except KeyError:
        raise ValidationError(f"{path}: missing field {key!r}") from None


def response_doc(R) -> dict:
    R = as_response(R)
    return {
        "schema": SCHEMA,
        "type": "response_matrix",
        "n_qubits": R.n_qubits,
        "n_bins": R.size,
        "rows": R.entries.tolist(),
    }


def write_response(R, path) -> None:
    _dump(response_doc(R), path)


def read_response(path) -> ResponseMatrix:
    doc = _load(path, ("response_matrix",))
    R = as_response(np.asarray(_field(doc, "rows", path), dtype=float))
    if doc.get("n_qubits") is not None and R.n_qubits != doc["n_qubits"]:
        raise ValidationError(f"{path}: n_qubits={doc['n_qubits']} does not match a {R.size}x{R.size} matrix")
    return R


def write_counts(counts, path) -> None:
    counts = validate_counts(counts)
    _dump({"schema": SCHEMA, "type": "count_vector", "n_qubits": _nq(counts.size), "values": counts.tolist()}, path)


def write_probabilities(values, path) -> None:
    values = validate_vector(values)
    doc = {
        "schema": SCHEMA,
        "type": "probability_vector",
        "n_qubits": _nq(values.size),
        "values": values.tolist(),
        "total": float(values.sum()),
    }
    _dump(doc, path)


def write_unfold_result(result, path) -> None:
    est = np.asarray(result.estimate, dtype=float)
    doc = {
        "schema": SCHEMA,
        "type": "unfold_result",
        "n_qubits": _nq(est.size),
        "method": result.method,
        "iterations_used": int(result.iterations_used),
        "residual_norm": float(result.residual_norm),
        "converged": bool(result.converged),
        "values": est.tolist(),
    }
    _dump(doc, path)


VECTOR_TYPES = ("count_vector", "probability_vector", "unfold_result")


def read_vector(path) -> np.ndarray:
    """Read any vector document; count vectors come back as integers."""
    doc = _load(path, VECTOR_TYPES)
    values = _field(doc, "values", path)
    if doc["type"] == "count_vector":
        return validate_counts(values)
    return validate_vector(values, nonnegative=doc["type"] != "unfold_result")


def read_counts(path) -> np.ndarray:
    """Read a vector that must hold whole counts (any vector type is accepted)."""
    return validate_counts(read_vector(path))


def write_calibration(calib: CalibrationData, path) -> None:
    doc = {
        "schema": SCHEMA,
        "type": "calibration",
        "n_qubits": calib.n_qubits,
        "shots_per_state": calib.shots_per_state,
        "histograms": calib.histograms.tolist(),
    }
    _dump(doc, path)


def read_calibration(path) -> CalibrationData:
    doc = _load(path, ("calibration",))
    return CalibrationData(
        int(_field(doc, "n_qubits", path)),
        int(_field(doc, "shots_per_state", path)),
        np.asarray(_field(doc, "histograms", path)),
    )


def write_noise_model(nm: NoiseModel, path) -> None:
    _dump({"schema": SCHEMA, "type": "noise_model", "n_qubits": nm.n_qubits, "p01": list(nm.p01), "p10": list(nm.p10)}, path)


def read_noise_model(path) -> NoiseModel:
    doc = _load(path, ("noise_model",))
    return NoiseModel(tuple(_field(doc, "p01", path)), tuple(_field(doc, "p10", path)))


def uncertainty_doc(report) -> dict:
    return {
        "schema": SCHEMA,
        "type": "uncertainty_report",
        "iterations": report.iterations,
        "per_state": {k: np.asarray(v, dtype=float).tolist() for k, v in report.per_state.items()},
        "averaged": report.averaged,
        "total": report.total,
    }


def write_json(doc: dict, path) -> None:
    _dump(doc, path)


def fmt(x) -> str:
    """CSV cell: 17 significant digits, empty for missing values."""
    if x is None:
        return ""
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    x = float(x)
    if math.isnan(x):
        return ""
    return format(x, ".17g")


def write_csv(path, header: list[str], rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([c if isinstance(c, str) else fmt(c) for c in row])


SCAN_HEADER = ["N", "stat_m", "stat_R", "nonclosure", "systematic_R", "total", "bias", "mse"]


def scan_rows(table):
    for r in table.rows:
        a = r.report.averaged if r.report is not None else {}
        total = r.report.total if r.report is not None else None
        yield [r.iterations, a.get("stat_m"), a.get("stat_R"), a.get("nonclosure"), a.get("systematic_R"), total, r.bias, r.mse]


def write_scan_csv(table, path) -> None:
    write_csv(path, SCAN_HEADER, scan_rows(table))


def digest(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def write_manifest(path, subcommand: str, parameters: dict, inputs: dict, outputs: list) -> None:
    """Record everything that determines a run next to its outputs."""
    doc = {
        "schema": SCHEMA,
        "type": "run_manifest",
        "subcommand": subcommand,
        "version": __version__,
        "parameters": parameters,
        "inputs": {name: {"path": str(p), "sha256": digest(p)} for name, p in inputs.items() if p is not None},
        "outputs": [str(o) for o in outputs],
    }
    _dump(doc, path)
