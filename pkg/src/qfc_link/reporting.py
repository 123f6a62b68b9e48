"""Deterministic file output and the CSV readers of the CLI.

Writers produce byte-stable artifacts: floats are serialized with
repr (shortest round-trip form), line endings are LF, JSON keys are
sorted. Every run directory gets a manifest.json listing the SHA-256
of each artifact, the config hash and the seed, so a run can be
audited and reruns can be diffed. The manifest's created_utc stamp is
the only non-reproducible byte in a run directory.

Readers validate shape early and report the offending file, row and
column; malformed input raises ConfigError (the file never reached
the computation).
"""

from __future__ import annotations

import csv
import hashlib
import json
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from .conversion import DepletionSample
from .errors import ConfigError
from .verification import CoincidenceHistogram, FransonPoint, FransonScan

__all__ = [
    "write_csv",
    "write_json",
    "file_sha256",
    "write_manifest",
    "read_depletion_csv",
    "read_franson_csv",
    "read_histogram_csv",
    "read_expectations_csv",
]


def _format_cell(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        raise TypeError("booleans have no CSV representation here")
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if isinstance(value, str):
        return value
    raise TypeError(f"cannot serialize {type(value).__name__} into CSV")


def write_csv(path: str | Path, header: list[str], rows) -> Path:
    """Write one CSV file with LF endings and repr-formatted floats."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(_format_cell(v) for v in row))
    path.write_text("\n".join(lines) + "\n", newline="")
    return path


def write_json(path: str | Path, payload: dict) -> Path:
    """Write one JSON file: sorted keys, 2-space indent, trailing newline."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n",
                    newline="")
    return path


def file_sha256(path: str | Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            digest.update(chunk)
    return digest.hexdigest()


def write_manifest(out_dir: str | Path, config_path: str | Path | None,
                   seed: int, artifacts: list[Path], tool_version: str) -> Path:
    """Hash every artifact of a run into out_dir/manifest.json."""
    out_dir = Path(out_dir)
    manifest = {
        "config_sha256": file_sha256(config_path) if config_path else None,
        "created_utc": datetime.now(timezone.utc).isoformat(timespec="seconds"),
        "files": {p.name: file_sha256(p) for p in artifacts},
        "seed": seed,
        "tool_version": tool_version,
    }
    return write_json(out_dir / "manifest.json", manifest)


def _read_rows(path: str | Path, required: list[str],
               optional: list[str] = ()) -> tuple[list[dict], list[str]]:
    """Shared CSV scaffolding: header check, row dicts, diagnostics."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    reader = csv.reader(text.splitlines())
    try:
        header = next(reader)
    except StopIteration:
        raise ConfigError(f"{path}: empty file") from None
    header = [h.strip() for h in header]
    missing = [c for c in required if c not in header]
    if missing:
        raise ConfigError(f"{path}: missing column(s) {missing}, got {header}")
    unknown = [c for c in header if c not in (*required, *optional)]
    if unknown:
        raise ConfigError(f"{path}: unknown column(s) {unknown}")
    rows = []
    for lineno, row in enumerate(reader, start=2):
        if not row or all(not cell.strip() for cell in row):
            continue
        if len(row) != len(header):
            raise ConfigError(
                f"{path}:{lineno}: expected {len(header)} cells, got {len(row)}")
        rows.append({name: cell.strip() for name, cell in zip(header, row)})
    if not rows:
        raise ConfigError(f"{path}: no data rows")
    return rows, header


def _cell_float(path, row_idx, row: dict, column: str) -> float:
    try:
        return float(row[column])
    except ValueError as exc:
        raise ConfigError(
            f"{path}:{row_idx}: column {column!r}: {row[column]!r} "
            "is not a number") from exc


def read_depletion_csv(path: str | Path) -> list[DepletionSample]:
    """Depletion measurement: columns power_w, efficiency [, sigma]."""
    rows, header = _read_rows(path, ["power_w", "efficiency"], ["sigma"])
    samples = []
    for i, row in enumerate(rows, start=2):
        sigma = None
        if "sigma" in header and row["sigma"] != "":
            sigma = _cell_float(path, i, row, "sigma")
        try:
            samples.append(DepletionSample(
                circulating_power=_cell_float(path, i, row, "power_w"),
                measured_internal_efficiency=_cell_float(path, i, row,
                                                         "efficiency"),
                efficiency_uncertainty=sigma,
            ))
        except ValueError as exc:
            raise ConfigError(f"{path}:{i}: {exc}") from exc
    return samples


def read_franson_csv(path: str | Path) -> FransonScan:
    """Franson scan in long format: phase_rad, port, counts, time_s."""
    rows, _ = _read_rows(path, ["phase_rad", "port", "counts", "time_s"])
    points = []
    for i, row in enumerate(rows, start=2):
        try:
            points.append(FransonPoint(
                phase=_cell_float(path, i, row, "phase_rad"),
                port=row["port"],
                counts=_cell_float(path, i, row, "counts"),
                time_s=_cell_float(path, i, row, "time_s"),
            ))
        except ValueError as exc:
            raise ConfigError(f"{path}:{i}: {exc}") from exc
    return FransonScan(points=points)


def read_histogram_csv(path: str | Path,
                       integration_time: float) -> CoincidenceHistogram:
    """Delay histogram: columns delay_s, counts, uniformly spaced delays.

    The zero-delay (center) bin is the one whose delay is closest to 0.
    """
    rows, _ = _read_rows(path, ["delay_s", "counts"])
    delays = np.array([_cell_float(path, i, r, "delay_s")
                       for i, r in enumerate(rows, start=2)])
    counts = np.array([_cell_float(path, i, r, "counts")
                       for i, r in enumerate(rows, start=2)])
    if delays.size < 2:
        raise ConfigError(f"{path}: need at least 2 bins")
    steps = np.diff(delays)
    width = float(np.median(steps))
    if width <= 0 or np.any(np.abs(steps - width) > 1e-6 * abs(width)):
        raise ConfigError(f"{path}: delay bins are not uniformly increasing")
    center = int(np.argmin(np.abs(delays)))
    try:
        return CoincidenceHistogram(
            bin_width=width, counts=counts,
            integration_time=integration_time, center_bin_index=center)
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def read_expectations_csv(path: str | Path) -> list[dict]:
    """Measured chained-Bell terms: a_index, b_index, sign, expectation, sigma.

    Indices are 1-based in the file. Empty expectation/sigma cells are
    allowed here (they mark not-yet-measured terms) and surface as None;
    downstream analysis decides whether that is fatal.
    """
    rows, _ = _read_rows(path, ["a_index", "b_index", "sign", "expectation",
                                "sigma"])
    out = []
    for i, row in enumerate(rows, start=2):
        a = _cell_float(path, i, row, "a_index")
        b = _cell_float(path, i, row, "b_index")
        sign = _cell_float(path, i, row, "sign")
        if a != int(a) or b != int(b) or int(a) < 1 or int(b) < 1:
            raise ConfigError(f"{path}:{i}: indices must be integers >= 1")
        if sign not in (-1.0, 1.0):
            raise ConfigError(f"{path}:{i}: sign must be -1 or 1")
        out.append({
            "a_index": int(a),
            "b_index": int(b),
            "sign": int(sign),
            "expectation": (None if row["expectation"] == ""
                            else _cell_float(path, i, row, "expectation")),
            "sigma": (None if row["sigma"] == ""
                      else _cell_float(path, i, row, "sigma")),
        })
    return out
