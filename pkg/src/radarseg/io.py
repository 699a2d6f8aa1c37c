"""On-disk formats: return datasets, track logs, sample archives, checkpoints, CSVs.

Every file records the schema version and the hash of the configuration
that produced it. Readers refuse files written under a different schema.
"""
from __future__ import annotations

import csv
import io
import json
import struct
from pathlib import Path

import numpy as np

from .config import SCHEMA_VERSION
from .labeling import Corridor, SensorTrack, TargetSpec, TargetTrack
from .returns import CLASS_NAMES, ClassLabel, Returns


class DataError(ValueError):
    """Missing, malformed or incompatible upstream artifact."""


def header_comment(config_hash: str) -> str:
    return f"schema={SCHEMA_VERSION} config_hash={config_hash}"


def _check_schema(header: dict, path) -> None:
    got = header.get("schema")
    if got != SCHEMA_VERSION:
        raise DataError(f"{path}: schema version {got!r} does not match supported version {SCHEMA_VERSION}")


def _existing(path) -> Path:
    p = Path(path)
    if not p.is_file():
        raise DataError(f"input file not found: {p}")
    return p


def _dumps(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), allow_nan=False)


# -- returns (JSON Lines) ---------------------------------------------------------

RETURN_KEYS = ("t", "r", "az", "el", "x", "y", "z", "doppler", "rcs", "label")


def manifest_path(path) -> Path:
    p = Path(path)
    return p.with_name(p.name + ".manifest.json")


def write_returns(path, returns: Returns, config_hash: str, seed: int, kind: str = "returns") -> None:
    """JSON Lines: a header object, then one return per line.

    Unlabeled returns (code 0) omit the ``label`` key. A sidecar manifest
    holds per-class counts.
    """
    path = Path(path)
    header = {"schema": SCHEMA_VERSION, "kind": kind, "config_hash": config_hash, "seed": int(seed),
              "count": len(returns), "keys": list(RETURN_KEYS)}
    cols = [returns.t, returns.r, returns.az, returns.el, returns.x, returns.y, returns.z,
            returns.doppler, returns.rcs]
    with path.open("w", encoding="utf-8", newline="\n") as fh:
        fh.write(_dumps(header) + "\n")
        for i, row in enumerate(zip(*(c.tolist() for c in cols))):
            rec = dict(zip(RETURN_KEYS[:-1], row))
            code = int(returns.label[i])
            if code:
                rec["label"] = code
            fh.write(_dumps(rec) + "\n")
    counts = {CLASS_NAMES[c.value]: int(np.sum(returns.label == c.value)) for c in ClassLabel}
    counts["unlabeled"] = int(np.sum(returns.label == 0))
    manifest = {"schema": SCHEMA_VERSION, "config_hash": config_hash, "seed": int(seed),
                "count": len(returns), "class_counts": counts}
    manifest_path(path).write_text(json.dumps(manifest, sort_keys=True, indent=2) + "\n")


def read_returns(path):
    """Load ``(Returns, header)`` from a JSON Lines dataset."""
    path = _existing(path)
    with path.open(encoding="utf-8") as fh:
        first = fh.readline()
        try:
            header = json.loads(first)
        except json.JSONDecodeError as exc:
            raise DataError(f"{path}: malformed header line") from exc
        _check_schema(header, path)
        rows = []
        for n, line in enumerate(fh, start=2):
            try:
                rec = json.loads(line)
                rows.append((rec["t"], rec["r"], rec["az"], rec["el"], rec["doppler"], rec["rcs"],
                             rec.get("label", 0), rec["x"], rec["y"], rec["z"]))
            except (json.JSONDecodeError, KeyError, TypeError) as exc:
                raise DataError(f"{path}:{n}: malformed return record") from exc
    if len(rows) != header.get("count", len(rows)):
        raise DataError(f"{path}: header announces {header['count']} returns, found {len(rows)}")
    if not rows:
        return Returns.empty(), header
    a = np.array(rows, dtype=np.float64)
    try:
        ret = Returns(a[:, 0], a[:, 1], a[:, 2], a[:, 3], a[:, 4], a[:, 5], a[:, 6].astype(np.uint8))
    except ValueError as exc:
        raise DataError(f"{path}: {exc}") from exc
    drift = np.abs(np.stack([ret.x, ret.y, ret.z], axis=1) - a[:, 7:10]).max()
    if drift > 1e-6:
        raise DataError(f"{path}: cartesian fields disagree with polar fields by {drift:.3g} m")
    return ret, header


# -- tracks (JSON) ------------------------------------------------------------------

def write_tracks(path, sensor_segments, target_tracks, corridors, config_hash: str, seed: int) -> None:
    doc = {
        "schema": SCHEMA_VERSION, "config_hash": config_hash, "seed": int(seed),
        "sensor": [{"t": t.tolist(), "xyz": p.tolist(), "yaw": y.tolist()} for t, p, y in sensor_segments],
        "targets": [{"class": int(tr.spec.cls), "w": tr.spec.w, "l": tr.spec.l, "h": tr.spec.h,
                     "t": np.asarray(tr.times).tolist(), "xyz": np.asarray(tr.positions).tolist()}
                    for tr in target_tracks],
        "corridors": [{"class": int(cls), "polygon": [list(v) for v in c.polygon], "z_min": c.z_min,
                       "z_max": c.z_max, "t_min": t0, "t_max": t1} for c, t0, t1, cls in corridors],
    }
    Path(path).write_text(_dumps(doc) + "\n")


def read_tracks(path):
    """Load ``(sensor_tracks, target_tracks, corridors, header)``."""
    path = _existing(path)
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: malformed track file") from exc
    _check_schema(doc, path)
    try:
        sensors = [SensorTrack(s["t"], s["xyz"], s["yaw"]) for s in doc["sensor"]]
        targets = [TargetTrack(np.asarray(d["t"]), np.asarray(d["xyz"]),
                               TargetSpec(ClassLabel(d["class"]), d["w"], d["l"], d["h"]))
                   for d in doc["targets"]]
        corridors = [(Corridor(tuple(map(tuple, d["polygon"])), d["z_min"], d["z_max"]),
                      d["t_min"], d["t_max"], ClassLabel(d["class"])) for d in doc["corridors"]]
    except (KeyError, TypeError, ValueError) as exc:
        raise DataError(f"{path}: invalid track record ({exc})") from exc
    header = {k: doc[k] for k in ("schema", "config_hash", "seed") if k in doc}
    return sensors, targets, corridors, header


# -- sample archive (binary) ------------------------------------------------------------

SAMPLE_MAGIC = b"RSAMPLE\x00"
CHECKPOINT_MAGIC = b"RSCKPT\x00\x00"
_PREFIX = struct.Struct("<8sII")  # magic, schema version, header length


def _write_container(fh, magic, header: dict) -> None:
    blob = _dumps(header).encode("utf-8")
    fh.write(_PREFIX.pack(magic, SCHEMA_VERSION, len(blob)))
    fh.write(blob)


def _read_container(data: bytes, magic, path):
    if len(data) < _PREFIX.size:
        raise DataError(f"{path}: truncated file")
    got, version, n = _PREFIX.unpack_from(data)
    if got != magic:
        raise DataError(f"{path}: not a {magic.rstrip(bytes(1)).decode()} file")
    if version != SCHEMA_VERSION:
        raise DataError(f"{path}: schema version {version} does not match supported version {SCHEMA_VERSION}")
    start = _PREFIX.size
    try:
        header = json.loads(data[start:start + n].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise DataError(f"{path}: malformed header") from exc
    return header, start + n


def write_samples(path, X, y, frame_start, tf: float, config_hash: str, seed: int, extra=None) -> None:
    """Binary archive of encoded samples (layout documented in the README)."""
    X = np.asarray(X, dtype="<f4")
    y = np.asarray(y, dtype=np.uint8)
    n, pc, nf = X.shape
    header = {"schema": SCHEMA_VERSION, "config_hash": config_hash, "seed": int(seed), "n_samples": n,
              "pc": pc, "tf": float(tf), "features": ["x", "y", "z", "rcs", "doppler"], **(extra or {})}
    starts = np.asarray(frame_start, dtype="<f8")
    with Path(path).open("wb") as fh:
        _write_container(fh, SAMPLE_MAGIC, header)
        for i in range(n):
            fh.write(starts[i].tobytes())
            fh.write(X[i].tobytes())
            fh.write(y[i].tobytes())


def read_samples(path):
    """Load ``(X, y, frame_start, header)``."""
    path = _existing(path)
    data = path.read_bytes()
    header, off = _read_container(data, SAMPLE_MAGIC, path)
    n, pc = int(header["n_samples"]), int(header["pc"])
    rec = np.dtype([("start", "<f8"), ("points", "<f4", (pc, 5)), ("labels", "u1", (pc,))])
    if len(data) - off != n * rec.itemsize:
        raise DataError(f"{path}: payload holds {len(data) - off} bytes, expected {n * rec.itemsize}")
    arr = np.frombuffer(data, dtype=rec, count=n, offset=off)
    return (arr["points"].astype(np.float32), arr["labels"].copy(), arr["start"].astype(np.float64), header)


# -- checkpoints ------------------------------------------------------------------------------

def write_checkpoint(path, params: dict, header: dict) -> None:
    """Versioned header plus named float32 tensors, in header order."""
    names = sorted(params)
    tensors = [{"name": k, "shape": list(np.shape(params[k]))} for k in names]
    with Path(path).open("wb") as fh:
        _write_container(fh, CHECKPOINT_MAGIC, {**header, "schema": SCHEMA_VERSION, "tensors": tensors})
        for k in names:
            fh.write(np.ascontiguousarray(params[k], dtype="<f4").tobytes())


def read_checkpoint(path):
    """Load ``(params, header)``."""
    path = _existing(path)
    data = path.read_bytes()
    header, off = _read_container(data, CHECKPOINT_MAGIC, path)
    params = {}
    for t in header.get("tensors", []):
        shape = tuple(t["shape"])
        count = int(np.prod(shape)) if shape else 1
        if off + 4 * count > len(data):
            raise DataError(f"{path}: truncated tensor {t['name']}")
        params[t["name"]] = np.frombuffer(data, "<f4", count, off).reshape(shape).astype(np.float32)
        off += 4 * count
    if off != len(data):
        raise DataError(f"{path}: {len(data) - off} trailing bytes")
    return params, header


# -- CSV ----------------------------------------------------------------------------------------

HISTORY_COLUMNS = ("epoch", "train_loss", "val_loss", "val_accuracy", "best_val_loss", "reg")


def history_to_csv(history, config_hash: str) -> str:
    buf = io.StringIO()
    buf.write(f"# {header_comment(config_hash)}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(HISTORY_COLUMNS)
    for row in history:
        w.writerow([row["epoch"]] + [repr(float(row[k])) for k in HISTORY_COLUMNS[1:]])
    return buf.getvalue()


def read_csv_rows(path):
    """Rows of a CSV written by this package (comment lines skipped)."""
    path = _existing(path)
    lines = [ln for ln in path.read_text().splitlines() if not ln.startswith("#")]
    return list(csv.DictReader(lines))
