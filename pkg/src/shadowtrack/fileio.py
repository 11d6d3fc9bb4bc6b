"""File formats for scenario data, solver output, and run manifests.

CSV files are UTF-8, RFC-4180 quoted, with '.' as the decimal mark and a
fixed '\\n' line ending. Two comment lines precede the header row:

    # schema=<schema id>
    # manifest=<sha256 of the producing run manifest>

The manifest line is present on files written by the command-line tool
and absent on hand-made inputs. Floats are serialized with ``repr`` (the
shortest round-trip form); NaN becomes an empty cell. Manifests and
scenario configs are JSON with sorted keys, so a rerun with identical
inputs reproduces every output byte for byte.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
from dataclasses import dataclass
from typing import Iterable, Mapping, Optional, Sequence, Tuple

import numpy as np

from .errors import IOFailure, SchemaError
from .geometry import (
    PROVENANCE_VALUES,
    PolarObservation,
    RawPositionEstimate,
)
from .matrices import build_time_grid
from .solver import (
    ScalarObservationSeries,
    ShadowingTrajectory,
    VectorObservationSeries,
)
from .tracker import TrackPoint

SCHEMA_SCALAR_OBS = "shadowtrack.scalar-observations.v1"
SCHEMA_VECTOR_OBS = "shadowtrack.vector-observations.v1"
SCHEMA_SCALAR_TRUTH = "shadowtrack.scalar-truth.v1"
SCHEMA_PLANAR_TRUTH = "shadowtrack.planar-truth.v1"
SCHEMA_BEARINGS = "shadowtrack.bearings.v1"
SCHEMA_SENSOR_TRACKS = "shadowtrack.sensor-tracks.v1"
SCHEMA_POLAR_OBS = "shadowtrack.polar-observations.v1"
SCHEMA_RANGE_PAIRS = "shadowtrack.range-pair-observations.v1"
SCHEMA_TRAJECTORY = "shadowtrack.trajectory.v1"
SCHEMA_TRACK = "shadowtrack.track-estimates.v1"
SCHEMA_RAW_ESTIMATES = "shadowtrack.raw-estimates.v1"
MANIFEST_FORMAT = "shadowtrack.manifest.v1"


def format_float(value: float) -> str:
    value = float(value)
    if math.isnan(value):
        return ""
    return repr(value)


def _format_cell(value: object) -> str:
    if value is None:
        return ""
    if isinstance(value, str):
        return value
    if isinstance(value, (bool, np.bool_)):
        raise SchemaError(f"boolean cell {value!r} has no serialization")
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return format_float(value)


def parse_float(cell: str, *, row: int, column: str) -> float:
    if cell == "":
        return math.nan
    try:
        return float(cell)
    except ValueError:
        raise SchemaError(
            f"cannot parse {cell!r} as a number", row=row, column=column
        ) from None


@dataclass(frozen=True)
class Table:
    """Parsed CSV: schema id, comment metadata, header names, string rows."""

    schema: str
    meta: Mapping[str, str]
    names: Tuple[str, ...]
    rows: Tuple[Tuple[str, ...], ...]

    def column_index(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise SchemaError(f"missing column {name!r}", column=name) from None

    def floats(self, name: str) -> np.ndarray:
        idx = self.column_index(name)
        return np.array(
            [parse_float(row[idx], row=i, column=name) for i, row in enumerate(self.rows)]
        )

    def strings(self, name: str) -> list:
        idx = self.column_index(name)
        return [row[idx] for row in self.rows]


def write_table(
    path: str,
    schema: str,
    names: Sequence[str],
    rows: Iterable[Sequence[object]],
    *,
    manifest_digest: Optional[str] = None,
) -> None:
    buffer = io.StringIO()
    buffer.write(f"# schema={schema}\n")
    if manifest_digest is not None:
        buffer.write(f"# manifest={manifest_digest}\n")
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(list(names))
    width = len(names)
    for row in rows:
        cells = [_format_cell(value) for value in row]
        if len(cells) != width:
            raise SchemaError(
                f"row has {len(cells)} cells, header has {width}"
            )
        writer.writerow(cells)
    try:
        with open(path, "w", encoding="utf-8", newline="") as handle:
            handle.write(buffer.getvalue())
    except OSError as exc:
        raise IOFailure(f"cannot write {path}: {exc}") from exc


def read_table(path: str, *, expect_schema: Optional[str] = None) -> Table:
    try:
        with open(path, "r", encoding="utf-8", newline="") as handle:
            raw_lines = handle.read().split("\n")
    except OSError as exc:
        raise IOFailure(f"cannot read {path}: {exc}") from exc
    meta: dict[str, str] = {}
    body: list[str] = []
    for line in raw_lines:
        if line.startswith("#"):
            stripped = line.lstrip("#").strip()
            key, sep, value = stripped.partition("=")
            if sep:
                meta[key.strip()] = value.strip()
        elif line != "" or body:
            body.append(line)
    while body and body[-1] == "":
        body.pop()
    schema = meta.get("schema")
    if schema is None:
        raise SchemaError(f"{path} has no '# schema=' header line")
    if expect_schema is not None and schema != expect_schema:
        raise SchemaError(
            f"{path} holds schema {schema!r}, expected {expect_schema!r}"
        )
    parsed = list(csv.reader(body))
    if not parsed:
        raise SchemaError(f"{path} has no header row")
    names = tuple(parsed[0])
    rows = []
    for i, row in enumerate(parsed[1:]):
        if len(row) != len(names):
            raise SchemaError(
                f"expected {len(names)} cells, found {len(row)}", row=i
            )
        rows.append(tuple(row))
    return Table(schema=schema, meta=dict(meta), names=names, rows=tuple(rows))


def write_json(path: str, payload: Mapping[str, object]) -> None:
    text = json.dumps(payload, indent=2, sort_keys=True) + "\n"
    try:
        with open(path, "w", encoding="utf-8", newline="") as handle:
            handle.write(text)
    except OSError as exc:
        raise IOFailure(f"cannot write {path}: {exc}") from exc


def read_json(path: str) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as handle:
            text = handle.read()
    except OSError as exc:
        raise IOFailure(f"cannot read {path}: {exc}") from exc
    try:
        payload = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path} is not valid JSON: {exc}") from exc
    if not isinstance(payload, dict):
        raise SchemaError(f"{path} must hold a JSON object")
    return payload


def manifest_digest(manifest: Mapping[str, object]) -> str:
    """Hash of the canonical JSON form of a manifest (digest key excluded)."""
    core = {key: value for key, value in manifest.items() if key != "digest"}
    canonical = json.dumps(core, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def write_manifest(path: str, manifest: Mapping[str, object]) -> str:
    """Write a manifest JSON with its own digest embedded; returns the digest."""
    digest = manifest_digest(manifest)
    payload = dict(manifest)
    payload["digest"] = digest
    write_json(path, payload)
    return digest


# --- scenario and solver series ----------------------------------------


def write_scalar_observations(
    path: str,
    times: np.ndarray,
    values: np.ndarray,
    weights: np.ndarray,
    *,
    manifest_digest: Optional[str] = None,
) -> None:
    rows = zip(times, values, weights)
    write_table(
        path, SCHEMA_SCALAR_OBS, ("t", "value", "weight"), rows,
        manifest_digest=manifest_digest,
    )


def read_scalar_observations(path: str) -> ScalarObservationSeries:
    table = read_table(path, expect_schema=SCHEMA_SCALAR_OBS)
    return ScalarObservationSeries(
        grid=build_time_grid(table.floats("t")),
        values=table.floats("value"),
        weights=table.floats("weight"),
    )


def write_vector_observations(
    path: str,
    times: np.ndarray,
    values: np.ndarray,
    informations: np.ndarray,
    *,
    manifest_digest: Optional[str] = None,
) -> None:
    rows = (
        (
            times[i],
            values[i, 0],
            values[i, 1],
            informations[i, 0, 0],
            informations[i, 0, 1],
            informations[i, 1, 1],
        )
        for i in range(len(times))
    )
    write_table(
        path, SCHEMA_VECTOR_OBS, ("t", "x", "y", "ixx", "ixy", "iyy"), rows,
        manifest_digest=manifest_digest,
    )


def read_vector_observations(path: str) -> VectorObservationSeries:
    table = read_table(path, expect_schema=SCHEMA_VECTOR_OBS)
    times = table.floats("t")
    values = np.column_stack([table.floats("x"), table.floats("y")])
    ixx, ixy, iyy = table.floats("ixx"), table.floats("ixy"), table.floats("iyy")
    informations = np.stack(
        [np.array([[ixx[i], ixy[i]], [ixy[i], iyy[i]]]) for i in range(len(times))]
    )
    return VectorObservationSeries(
        grid=build_time_grid(times), values=values, informations=informations
    )


def write_truth(
    path: str,
    times: np.ndarray,
    truth: np.ndarray,
    *,
    manifest_digest: Optional[str] = None,
) -> None:
    truth = np.asarray(truth, dtype=float)
    if truth.ndim == 1:
        write_table(
            path, SCHEMA_SCALAR_TRUTH, ("t", "value"), zip(times, truth),
            manifest_digest=manifest_digest,
        )
    else:
        write_table(
            path,
            SCHEMA_PLANAR_TRUTH,
            ("t", "x", "y"),
            ((times[i], truth[i, 0], truth[i, 1]) for i in range(len(times))),
            manifest_digest=manifest_digest,
        )


def read_truth(path: str) -> Tuple[np.ndarray, np.ndarray]:
    table = read_table(path)
    if table.schema == SCHEMA_SCALAR_TRUTH:
        return table.floats("t"), table.floats("value")
    if table.schema == SCHEMA_PLANAR_TRUTH:
        return table.floats("t"), np.column_stack(
            [table.floats("x"), table.floats("y")]
        )
    raise SchemaError(f"{path} holds schema {table.schema!r}, expected a truth table")


def write_bearings(
    path: str,
    times: np.ndarray,
    bearings: np.ndarray,
    variances: np.ndarray,
    *,
    manifest_digest: Optional[str] = None,
) -> None:
    rows = (
        (times[i], bearings[i, 0], bearings[i, 1], variances[i, 0], variances[i, 1])
        for i in range(len(times))
    )
    write_table(
        path,
        SCHEMA_BEARINGS,
        ("t", "bearing_a", "bearing_b", "variance_a", "variance_b"),
        rows,
        manifest_digest=manifest_digest,
    )


def read_bearings(path: str) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    table = read_table(path, expect_schema=SCHEMA_BEARINGS)
    times = table.floats("t")
    bearings = np.column_stack(
        [table.floats("bearing_a"), table.floats("bearing_b")]
    )
    variances = np.column_stack(
        [table.floats("variance_a"), table.floats("variance_b")]
    )
    return times, bearings, variances


def write_sensor_tracks(
    path: str,
    times: np.ndarray,
    positions_a: np.ndarray,
    positions_b: np.ndarray,
    *,
    manifest_digest: Optional[str] = None,
) -> None:
    rows = (
        (
            times[i],
            positions_a[i, 0],
            positions_a[i, 1],
            positions_b[i, 0],
            positions_b[i, 1],
        )
        for i in range(len(times))
    )
    write_table(
        path, SCHEMA_SENSOR_TRACKS, ("t", "ax", "ay", "bx", "by"), rows,
        manifest_digest=manifest_digest,
    )


def read_sensor_tracks(path: str) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    table = read_table(path, expect_schema=SCHEMA_SENSOR_TRACKS)
    times = table.floats("t")
    positions_a = np.column_stack([table.floats("ax"), table.floats("ay")])
    positions_b = np.column_stack([table.floats("bx"), table.floats("by")])
    return times, positions_a, positions_b


def write_polar_observations(
    path: str,
    times: np.ndarray,
    observations: Sequence[PolarObservation],
    *,
    manifest_digest: Optional[str] = None,
) -> None:
    rows = (
        (
            times[i],
            obs.distance,
            obs.bearing,
            obs.distance_variance,
            obs.bearing_variance,
        )
        for i, obs in enumerate(observations)
    )
    write_table(
        path,
        SCHEMA_POLAR_OBS,
        ("t", "range", "bearing", "range_variance", "bearing_variance"),
        rows,
        manifest_digest=manifest_digest,
    )


def read_polar_observations(
    path: str,
) -> Tuple[np.ndarray, Tuple[PolarObservation, ...]]:
    table = read_table(path, expect_schema=SCHEMA_POLAR_OBS)
    times = table.floats("t")
    ranges = table.floats("range")
    bearings = table.floats("bearing")
    var_r = table.floats("range_variance")
    var_b = table.floats("bearing_variance")
    observations = tuple(
        PolarObservation(
            distance=ranges[i],
            bearing=bearings[i],
            distance_variance=var_r[i],
            bearing_variance=var_b[i],
        )
        for i in range(len(times))
    )
    return times, observations


def write_range_pairs(
    path: str,
    times: np.ndarray,
    ranges: np.ndarray,
    variances: np.ndarray,
    *,
    manifest_digest: Optional[str] = None,
) -> None:
    rows = (
        (times[i], ranges[i, 0], ranges[i, 1], variances[i, 0], variances[i, 1])
        for i in range(len(times))
    )
    write_table(
        path,
        SCHEMA_RANGE_PAIRS,
        ("t", "range_a", "range_b", "variance_a", "variance_b"),
        rows,
        manifest_digest=manifest_digest,
    )


def read_range_pairs(path: str) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    table = read_table(path, expect_schema=SCHEMA_RANGE_PAIRS)
    times = table.floats("t")
    ranges = np.column_stack([table.floats("range_a"), table.floats("range_b")])
    variances = np.column_stack(
        [table.floats("variance_a"), table.floats("variance_b")]
    )
    return times, ranges, variances


def write_trajectory(
    path: str,
    trajectory: ShadowingTrajectory,
    *,
    manifest_digest: Optional[str] = None,
) -> None:
    """Write t, position, velocity, acceleration columns.

    Accelerations are per interval, so the final row's acceleration
    cells are empty; a sqrt(eta)-scaled copy rides along for plots that
    compare acceleration traces across smoothing strengths.
    """
    times = trajectory.grid.times
    scale = math.sqrt(trajectory.eta)
    count = times.size
    if trajectory.dim == 1:
        names = ("t", "p", "v", "a", "a_scaled")
        rows = []
        for i in range(count):
            accel = trajectory.accelerations[i] if i < count - 1 else math.nan
            rows.append(
                (
                    times[i],
                    trajectory.positions[i],
                    trajectory.velocities[i],
                    accel,
                    accel * scale,
                )
            )
        write_table(path, SCHEMA_TRAJECTORY, names, rows, manifest_digest=manifest_digest)
        return
    names = ("t", "px", "py", "vx", "vy", "ax", "ay", "ax_scaled", "ay_scaled")
    rows = []
    for i in range(count):
        if i < count - 1:
            ax, ay = trajectory.accelerations[i]
        else:
            ax, ay = math.nan, math.nan
        rows.append(
            (
                times[i],
                trajectory.positions[i, 0],
                trajectory.positions[i, 1],
                trajectory.velocities[i, 0],
                trajectory.velocities[i, 1],
                ax,
                ay,
                ax * scale,
                ay * scale,
            )
        )
    write_table(path, SCHEMA_TRAJECTORY, names, rows, manifest_digest=manifest_digest)


def write_track_points(
    path: str,
    points: Sequence[TrackPoint],
    *,
    manifest_digest: Optional[str] = None,
) -> None:
    if not points:
        raise SchemaError("no track points to write")
    dim = points[0].position.size
    if dim == 1:
        names = ("t", "p", "v", "a", "weight", "provenance", "usable_points")
        rows = (
            (
                pt.time,
                pt.position[0],
                pt.velocity[0],
                pt.acceleration[0],
                pt.weight,
                pt.provenance,
                pt.usable_points,
            )
            for pt in points
        )
    else:
        names = (
            "t", "px", "py", "vx", "vy", "ax", "ay",
            "weight", "provenance", "usable_points",
        )
        rows = (
            (
                pt.time,
                pt.position[0],
                pt.position[1],
                pt.velocity[0],
                pt.velocity[1],
                pt.acceleration[0],
                pt.acceleration[1],
                pt.weight,
                pt.provenance,
                pt.usable_points,
            )
            for pt in points
        )
    write_table(path, SCHEMA_TRACK, names, rows, manifest_digest=manifest_digest)


def write_raw_estimates(
    path: str,
    times: np.ndarray,
    estimates: Sequence[RawPositionEstimate],
    *,
    manifest_digest: Optional[str] = None,
) -> None:
    rows = (
        (
            times[i],
            est.position[0],
            est.position[1],
            est.information[0, 0],
            est.information[0, 1],
            est.information[1, 1],
            est.weight,
            est.provenance,
        )
        for i, est in enumerate(estimates)
    )
    write_table(
        path,
        SCHEMA_RAW_ESTIMATES,
        ("t", "x", "y", "ixx", "ixy", "iyy", "w", "provenance"),
        rows,
        manifest_digest=manifest_digest,
    )


def read_raw_estimates(
    path: str,
) -> Tuple[np.ndarray, Tuple[RawPositionEstimate, ...]]:
    table = read_table(path, expect_schema=SCHEMA_RAW_ESTIMATES)
    times = table.floats("t")
    xs, ys = table.floats("x"), table.floats("y")
    ixx, ixy, iyy = table.floats("ixx"), table.floats("ixy"), table.floats("iyy")
    ws = table.floats("w")
    provenance = table.strings("provenance")
    estimates = []
    for i in range(len(times)):
        label = provenance[i]
        if label not in PROVENANCE_VALUES:
            raise SchemaError(
                f"unknown provenance {label!r}", row=i, column="provenance"
            )
        estimates.append(
            RawPositionEstimate(
                position=np.array([xs[i], ys[i]]),
                information=np.array([[ixx[i], ixy[i]], [ixy[i], iyy[i]]]),
                weight=ws[i],
                provenance=label,
            )
        )
    return times, tuple(estimates)
