"""Binary checkpoints and loss-history CSVs.

Checkpoint layout, little endian:

    b"CWM1"
    u32 channels, u32 nodes                  model input shape
    u32 len, utf-8 JSON                      model metadata
    u32 n_specs, then per spec:
        u16 kind tag, u32 len, utf-8 JSON    layer parameters
    u32 n_orderings, then per ordering:
        u32 n, n x i64                       position -> vertex
    u32 n_tensors, then per tensor:
        u32 ndim, ndim x u64, f64 values     declaration order
"""

from __future__ import annotations

import csv
import io
import json
import struct
from pathlib import Path

import numpy as np

from ..errors import MeshParseError
from ..sfc import SfcOrdering
from .layers import KIND_TAGS, LayerSpec
from .model import Model, build_model
from .training import TrainReport

MAGIC = b"CWM1"
_KINDS = {v: k for k, v in KIND_TAGS.items()}


def _blob(buf: io.BytesIO, data: bytes) -> None:
    buf.write(struct.pack("<I", len(data)))
    buf.write(data)


def checkpoint_bytes(model: Model) -> bytes:
    buf = io.BytesIO()
    buf.write(MAGIC)
    buf.write(struct.pack("<II", *model.input_shape))
    _blob(buf, json.dumps(model.meta, sort_keys=True).encode())
    buf.write(struct.pack("<I", len(model.specs)))
    for spec in model.specs:
        buf.write(struct.pack("<H", KIND_TAGS[spec.kind]))
        _blob(buf, json.dumps(spec.params, sort_keys=True).encode())
    buf.write(struct.pack("<I", len(model.orderings)))
    for o in model.orderings:
        buf.write(struct.pack("<I", o.n))
        buf.write(np.asarray(o.to_vertex, dtype="<i8").tobytes())
    arrays = model.arrays()
    buf.write(struct.pack("<I", len(arrays)))
    for a in arrays:
        buf.write(struct.pack("<I", a.ndim))
        buf.write(struct.pack(f"<{a.ndim}Q", *a.shape))
        buf.write(np.ascontiguousarray(a, dtype="<f8").tobytes())
    return buf.getvalue()


def save_checkpoint(model: Model, path: str | Path) -> None:
    Path(path).write_bytes(checkpoint_bytes(model))


class _Reader:
    def __init__(self, data: bytes):
        self.data, self.pos = data, 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise MeshParseError("checkpoint is truncated")
        out = self.data[self.pos:self.pos + n]
        self.pos += n
        return out

    def unpack(self, fmt: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))

    def blob(self) -> bytes:
        (n,) = self.unpack("<I")
        return self.take(n)


def load_checkpoint(path: str | Path) -> Model:
    r = _Reader(Path(path).read_bytes())
    if r.take(4) != MAGIC:
        raise MeshParseError("not a curveweave model checkpoint")
    shape = r.unpack("<II")
    meta = json.loads(r.blob())
    (n_specs,) = r.unpack("<I")
    specs = []
    for _ in range(n_specs):
        (tag,) = r.unpack("<H")
        if tag not in _KINDS:
            raise MeshParseError(f"unknown layer tag {tag}")
        specs.append(LayerSpec(_KINDS[tag], json.loads(r.blob())))
    (n_ord,) = r.unpack("<I")
    orderings = []
    for _ in range(n_ord):
        (n,) = r.unpack("<I")
        orderings.append(SfcOrdering(np.frombuffer(r.take(8 * n), dtype="<i8").astype(np.int64)))
    model = build_model(specs, orderings, None, shape, meta=meta)
    (n_arr,) = r.unpack("<I")
    targets = model.arrays()
    if n_arr != len(targets):
        raise MeshParseError(f"checkpoint holds {n_arr} tensors, model needs {len(targets)}")
    for t in targets:
        (ndim,) = r.unpack("<I")
        dims = r.unpack(f"<{ndim}Q")
        if tuple(dims) != t.shape:
            raise MeshParseError(f"tensor shape {dims} does not match {t.shape}")
        t[...] = np.frombuffer(r.take(8 * t.size), dtype="<f8").reshape(t.shape)
    if r.pos != len(r.data):
        raise MeshParseError("trailing bytes after the last tensor")
    return model


def format_loss_csv(report: TrainReport) -> str:
    out = io.StringIO()
    w = csv.writer(out, lineterminator="\n")
    w.writerow(["epoch", "train_mse", "val_mse"])
    for epoch, t, v in report.rows():
        w.writerow([epoch, repr(float(t)), repr(float(v))])
    return out.getvalue()


def save_loss_csv(report: TrainReport, path: str | Path) -> None:
    Path(path).write_text(format_loss_csv(report))


def load_loss_csv(path: str | Path) -> TrainReport:
    report = TrainReport()
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0] != ["epoch", "train_mse", "val_mse"]:
        raise MeshParseError("bad loss CSV header", 1)
    for i, row in enumerate(rows[1:], start=2):
        if len(row) != 3:
            raise MeshParseError("expected 3 columns", i)
        report.train_mse.append(float(row[1]))
        report.val_mse.append(float(row[2]))
    return report
