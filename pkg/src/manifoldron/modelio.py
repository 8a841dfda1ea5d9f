"""Binary model files.

Layout (all integers little-endian)::

    b"MFLD"                 magic
    u16                     format version
    u32                     header length H
    H bytes                 UTF-8 JSON header
    payload                 arrays back to back, as listed in header["arrays"]
    u32                     CRC-32 of everything before it

The header records the model kind, scalar settings and, for every array, its
name, dtype (``<f8`` or ``<i8``) and shape.  Only points, simplices, targets
and settings are stored; envelopes and KD trees are rebuilt on load, which is
deterministic, so a loaded model predicts bit-identically.
"""

from __future__ import annotations

import json
import struct
import zlib
from dataclasses import asdict
from pathlib import Path
from typing import Union

import numpy as np

from .classifier import BaseManifoldron, FitConfig, ManifoldronEnsemble
from .errors import ModelFormatError
from .manifold import ClassModel, SimplicialComplex, envelope
from .regressor import RegressorModel

MAGIC = b"MFLD"
VERSION = 1
_DTYPES = {"<f8": np.dtype("<f8"), "<i8": np.dtype("<i8")}

Model = Union[ManifoldronEnsemble, RegressorModel]


class _Writer:
    def __init__(self) -> None:
        self.specs: list[dict] = []
        self.blobs: list[bytes] = []

    def add(self, name: str, array, dtype: str) -> str:
        a = np.ascontiguousarray(np.asarray(array), dtype=_DTYPES[dtype])
        self.specs.append({"name": name, "dtype": dtype, "shape": list(a.shape)})
        self.blobs.append(a.tobytes())
        return name


def _class_record(w: _Writer, prefix: str, model: ClassModel) -> dict:
    return {
        "label": model.complex.class_label,
        "k": model.k,
        "points": w.add(prefix + "points", model.points, "<f8"),
        "simplices": w.add(prefix + "simplices", model.complex.simplices, "<i8"),
    }


def serialize(model: Model) -> bytes:
    """Encode a fitted classifier ensemble or regressor."""
    w = _Writer()
    if isinstance(model, ManifoldronEnsemble):
        cfg = asdict(model.config)
        cfg["nf_range"] = list(cfg["nf_range"]) if cfg["nf_range"] is not None else None
        header = {
            "kind": "classifier",
            "n_features": model.n_features,
            "label_names": model.label_names,
            "config": cfg,
            "bases": [
                {
                    "mask": list(b.feature_mask),
                    "k": b.k,
                    "distance_mode": b.distance_mode,
                    "tol": b.tol,
                    "classes": [_class_record(w, f"b{i}c{c}_", b.class_models[c]) for c in b.labels],
                }
                for i, b in enumerate(model.bases)
            ],
        }
    elif isinstance(model, RegressorModel):
        header = {
            "kind": "regressor",
            "k": model.k,
            "points": w.add("points", model.points, "<f8"),
            "targets": w.add("targets", model.targets, "<f8"),
            "simplices": w.add("simplices", model.complex.simplices, "<i8"),
        }
    else:
        raise TypeError(f"cannot serialize {type(model).__name__}")
    header["arrays"] = w.specs
    head = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    body = MAGIC + struct.pack("<HI", VERSION, len(head)) + head + b"".join(w.blobs)
    return body + struct.pack("<I", zlib.crc32(body))


def _read_arrays(header: dict, payload: memoryview) -> dict[str, np.ndarray]:
    out = {}
    pos = 0
    for spec in header["arrays"]:
        dtype = _DTYPES.get(spec["dtype"])
        if dtype is None:
            raise ModelFormatError(f"unsupported dtype {spec['dtype']!r}")
        count = int(np.prod(spec["shape"], dtype=np.int64))
        size = count * dtype.itemsize
        if pos + size > len(payload):
            raise ModelFormatError("model file is truncated")
        out[spec["name"]] = np.frombuffer(payload[pos:pos + size], dtype=dtype).reshape(spec["shape"]).copy()
        pos += size
    if pos != len(payload):
        raise ModelFormatError("model file has trailing bytes")
    return out


def _class_model(rec: dict, arrays: dict[str, np.ndarray]) -> ClassModel:
    pts = arrays[rec["points"]]
    cx = SimplicialComplex(arrays[rec["simplices"]], pts.shape[1], rec["label"])
    return ClassModel(points=pts, complex=cx, envelope=envelope(cx, pts), k=rec["k"])


def deserialize(data: bytes) -> Model:
    """Decode bytes produced by :func:`serialize`.

    Raises
    ------
    ModelFormatError
        Wrong magic, unsupported version, checksum mismatch or truncation.
    """
    data = bytes(data)
    if len(data) < 14 or data[:4] != MAGIC:
        raise ModelFormatError("not a model file (bad magic)")
    version, head_len = struct.unpack_from("<HI", data, 4)
    if version != VERSION:
        raise ModelFormatError(f"model format version {version} is not supported (expected {VERSION})")
    (crc,) = struct.unpack("<I", data[-4:])
    if zlib.crc32(data[:-4]) != crc:
        raise ModelFormatError("model file is corrupted or truncated (checksum mismatch)")
    start = 10
    if start + head_len > len(data) - 4:
        raise ModelFormatError("model file is truncated")
    try:
        header = json.loads(data[start:start + head_len].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ModelFormatError(f"unreadable model header: {exc}") from None
    arrays = _read_arrays(header, memoryview(data)[start + head_len:-4])
    try:
        if header["kind"] == "classifier":
            cfg = dict(header["config"])
            if cfg.get("nf_range") is not None:
                cfg["nf_range"] = tuple(cfg["nf_range"])
            bases = []
            for b in header["bases"]:
                models = {int(rec["label"]): _class_model(rec, arrays) for rec in b["classes"]}
                bases.append(BaseManifoldron(models, tuple(b["mask"]), b["k"], b["distance_mode"], b["tol"]))
            return ManifoldronEnsemble(bases, header["n_features"], FitConfig(**cfg), header["label_names"])
        if header["kind"] == "regressor":
            pts = arrays[header["points"]]
            cx = SimplicialComplex(arrays[header["simplices"]], pts.shape[1])
            return RegressorModel(pts, arrays[header["targets"]], cx, header["k"])
    except (KeyError, TypeError) as exc:
        raise ModelFormatError(f"model header is missing or has a bad field: {exc}") from None
    raise ModelFormatError(f"unknown model kind {header.get('kind')!r}")


def save_model(model: Model, path: Union[str, Path]) -> None:
    Path(path).write_bytes(serialize(model))


def load_model(path: Union[str, Path]) -> Model:
    try:
        data = Path(path).read_bytes()
    except OSError as exc:
        raise ModelFormatError(f"cannot read model {path}: {exc.strerror}") from None
    return deserialize(data)
