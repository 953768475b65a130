"""Binary and CSV persistence of shot datasets.

Binary layout (little endian):

    magic    8 bytes  b"MACRORLZ"
    version  u16
    dtype    u8       1 = int8 spins, 2 = uint16 photon counts
    pad      u8
    shots    u64
    windows  u32
    seed     u64
    digest   32 bytes sha256 of the schedule
    n_plus   f64      NaN without readout
    n_minus  f64
    meta     u32 length + UTF-8 JSON of the schedule
    data     shots * windows values, row major
"""

from __future__ import annotations

import csv
import io
import json
import math
import struct
from pathlib import Path

import numpy as np

from .errors import ConfigError, DomainError
from .schedule import MeasurementSchedule
from .trajectory_mc import ReadoutModel, ShotDataset

MAGIC = b"MACRORLZ"
VERSION = 1
_HEADER = struct.Struct("<8sHBBQIQ32sdd I")
_DTYPES = {1: np.dtype("<i1"), 2: np.dtype("<u2")}


class DatasetFormatError(ConfigError):
    """Malformed or inconsistent dataset file."""


def _dtype_code(ds: ShotDataset) -> int:
    return 2 if ds.is_photon else 1


def to_bytes(ds: ShotDataset) -> bytes:
    meta = json.dumps(ds.schedule.to_dict(), sort_keys=True, separators=(",", ":")).encode()
    n_plus, n_minus = (math.nan, math.nan) if ds.readout is None else (ds.readout.n_plus, ds.readout.n_minus)
    code = _dtype_code(ds)
    head = _HEADER.pack(MAGIC, VERSION, code, 0, ds.shots, len(ds.schedule), ds.seed,
                        ds.schedule.digest(), n_plus, n_minus, len(meta))
    data = np.ascontiguousarray(ds.outputs, dtype=_DTYPES[code]).tobytes()
    return head + meta + data


def from_bytes(buf: bytes) -> ShotDataset:
    if len(buf) < _HEADER.size:
        raise DatasetFormatError("file shorter than the header")
    magic, version, code, _, shots, windows, seed, digest, n_plus, n_minus, meta_len = _HEADER.unpack_from(buf)
    if magic != MAGIC:
        raise DatasetFormatError(f"bad magic {magic!r}")
    if version != VERSION:
        raise DatasetFormatError(f"unsupported version {version}")
    if code not in _DTYPES:
        raise DatasetFormatError(f"unknown dtype code {code}")
    off = _HEADER.size
    schedule = MeasurementSchedule.from_dict(json.loads(buf[off:off + meta_len].decode()))
    if schedule.digest() != digest:
        raise DatasetFormatError("schedule digest mismatch")
    if len(schedule) != windows:
        raise DatasetFormatError("window count disagrees with schedule")
    off += meta_len
    dtype = _DTYPES[code]
    expected = shots * windows * dtype.itemsize
    if len(buf) - off != expected:
        raise DatasetFormatError(f"expected {expected} data bytes, found {len(buf) - off}")
    native = np.int8 if code == 1 else np.uint16
    data = np.frombuffer(buf, dtype=dtype, offset=off).reshape(shots, windows).astype(native)
    readout = None if math.isnan(n_plus) else ReadoutModel(n_plus, n_minus)
    return ShotDataset(data, schedule, seed, readout)


def save_binary(ds: ShotDataset, path) -> Path:
    path = Path(path)
    try:
        path.write_bytes(to_bytes(ds))
    except OSError as exc:
        raise OSError(f"cannot write dataset to {path}: {exc}") from exc
    return path


def load_binary(path) -> ShotDataset:
    path = Path(path)
    try:
        buf = path.read_bytes()
    except OSError as exc:
        raise OSError(f"cannot read dataset {path}: {exc}") from exc
    return from_bytes(buf)


# CSV: comment lines carry the provenance, then a header of window labels.


def to_csv(ds: ShotDataset) -> str:
    out = io.StringIO()
    out.write(f"# seed={ds.seed}\n")
    if ds.readout is not None:
        out.write(f"# readout={ds.readout.n_plus!r},{ds.readout.n_minus!r}\n")
    out.write("# schedule=" + json.dumps(ds.schedule.to_dict(), sort_keys=True, separators=(",", ":")) + "\n")
    w = csv.writer(out, lineterminator="\n")
    w.writerow(ds.schedule.labels)
    w.writerows(ds.outputs.tolist())
    return out.getvalue()


def from_csv(text: str) -> ShotDataset:
    meta, body = {}, []
    for line in text.splitlines():
        if line.startswith("# "):
            key, _, val = line[2:].partition("=")
            meta[key] = val
        elif line:
            body.append(line)
    try:
        seed = int(meta["seed"])
        schedule = MeasurementSchedule.from_dict(json.loads(meta["schedule"]))
    except (KeyError, ValueError) as exc:
        raise DatasetFormatError(f"missing or bad CSV metadata: {exc}") from exc
    rows = list(csv.reader(body))
    if not rows or tuple(rows[0]) != schedule.labels:
        raise DatasetFormatError("CSV header does not match the schedule labels")
    readout = None
    if "readout" in meta:
        n_plus, n_minus = (float(x) for x in meta["readout"].split(","))
        readout = ReadoutModel(n_plus, n_minus)
    dtype = np.int8 if readout is None else np.uint16
    try:
        data = np.array([[int(x) for x in r] for r in rows[1:]], dtype=np.int64)
    except ValueError as exc:
        raise DatasetFormatError(f"non-integer CSV entry: {exc}") from exc
    data = data.reshape(-1, len(schedule))
    info = np.iinfo(dtype)
    if data.size and (data.min() < info.min or data.max() > info.max):
        raise DomainError("CSV values out of range for the dataset type")
    return ShotDataset(data.astype(dtype), schedule, seed, readout)


def save_csv(ds: ShotDataset, path) -> Path:
    path = Path(path)
    path.write_text(to_csv(ds))
    return path


def load_csv(path) -> ShotDataset:
    return from_csv(Path(path).read_text())
