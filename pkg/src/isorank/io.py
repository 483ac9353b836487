"""JSON and binary serialization of instances, streams, batches and fits.

Every JSON document carries ``"schema": "isorank/1"`` and a ``"type"`` tag.
Matrices are stored row-major as nested lists.  The binary form is a numpy
``.npz`` archive holding the same fields; masks and counts keep their integer
dtypes so both forms round-trip exactly.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .sampling import BatchedObservations, ObservationStream, SignalInstance

SCHEMA = "isorank/1"


class SchemaError(ValueError):
    pass


def _check(doc: dict, kind: str) -> dict:
    if doc.get("schema") != SCHEMA:
        raise SchemaError(f"expected schema {SCHEMA!r}, got {doc.get('schema')!r}")
    if doc.get("type") != kind:
        raise SchemaError(f"expected type {kind!r}, got {doc.get('type')!r}")
    return doc


def instance_to_dict(inst: SignalInstance, stream: ObservationStream | None = None) -> dict:
    doc = {"schema": SCHEMA, "type": "instance", "n": inst.n, "d": inst.d, "lambda": inst.lam,
           "M": inst.M.tolist(), "pi_star": inst.pi_star.tolist()}
    if stream is not None:
        doc["records"] = stream_records(stream)
    return doc


def instance_from_dict(doc: dict) -> SignalInstance:
    _check(doc, "instance")
    M = np.array(doc["M"], dtype=float).reshape(doc["n"], doc["d"])
    return SignalInstance(M, np.array(doc["pi_star"], dtype=np.int64), float(doc["lambda"]))


def stream_records(stream: ObservationStream) -> list:
    return [[int(i), int(k), float(y)] for i, k, y in zip(stream.rows, stream.cols, stream.values)]


def stream_to_dict(stream: ObservationStream) -> dict:
    return {"schema": SCHEMA, "type": "stream", "n": stream.n, "d": stream.d,
            "lambda": stream.lam, "records": stream_records(stream)}


def stream_from_dict(doc: dict) -> ObservationStream:
    if doc.get("type") == "instance":
        _check(doc, "instance")
    else:
        _check(doc, "stream")
    recs = np.array(doc.get("records", []), dtype=float).reshape(-1, 3)
    return ObservationStream(doc["n"], doc["d"], float(doc["lambda"]), recs[:, 0].astype(np.int64),
                             recs[:, 1].astype(np.int64), recs[:, 2])


def batches_to_dict(b: BatchedObservations) -> dict:
    return {"schema": SCHEMA, "type": "batches", "T": b.T, "n": b.n, "d": b.d,
            "lambda0": b.lambda0, "lambda1": b.lambda1, "Y": b.Y.tolist(),
            "B": b.B.astype(np.int8).tolist(), "r": b.r.tolist()}


def batches_from_dict(doc: dict) -> BatchedObservations:
    _check(doc, "batches")
    return BatchedObservations(int(doc["T"]), np.array(doc["Y"], dtype=float),
                               np.array(doc["B"], dtype=bool), np.array(doc["r"], dtype=np.int64),
                               float(doc["lambda0"]), float(doc["lambda1"]))


def matrix_to_dict(M: np.ndarray, **extra) -> dict:
    M = np.asarray(M, dtype=float)
    return {"schema": SCHEMA, "type": "matrix", "n": M.shape[0], "d": M.shape[1],
            "M": M.tolist(), **extra}


def matrix_from_dict(doc: dict) -> np.ndarray:
    _check(doc, "matrix")
    return np.array(doc["M"], dtype=float).reshape(doc["n"], doc["d"])


def dumps(doc: dict) -> str:
    return json.dumps(doc, separators=(",", ":"))


def save_json(doc: dict, path) -> None:
    Path(path).write_text(dumps(doc) + "\n")


def load_json(path) -> dict:
    return json.loads(Path(path).read_text())


# compact binary form

def save_npz(path, obj) -> None:
    if isinstance(obj, SignalInstance):
        np.savez_compressed(path, schema=SCHEMA, type="instance", M=obj.M, pi_star=obj.pi_star,
                            lam=obj.lam)
    elif isinstance(obj, ObservationStream):
        np.savez_compressed(path, schema=SCHEMA, type="stream", n=obj.n, d=obj.d, lam=obj.lam,
                            rows=obj.rows, cols=obj.cols, values=obj.values)
    elif isinstance(obj, BatchedObservations):
        np.savez_compressed(path, schema=SCHEMA, type="batches", T=obj.T, Y=obj.Y, B=obj.B,
                            r=obj.r, lambda0=obj.lambda0, lambda1=obj.lambda1)
    else:
        raise TypeError(f"cannot serialize {type(obj).__name__}")


def load_npz(path):
    with np.load(path, allow_pickle=False) as z:
        if str(z["schema"]) != SCHEMA:
            raise SchemaError(f"expected schema {SCHEMA!r}")
        kind = str(z["type"])
        if kind == "instance":
            return SignalInstance(z["M"], z["pi_star"], float(z["lam"]))
        if kind == "stream":
            return ObservationStream(int(z["n"]), int(z["d"]), float(z["lam"]), z["rows"],
                                     z["cols"], z["values"])
        if kind == "batches":
            return BatchedObservations(int(z["T"]), z["Y"], z["B"], z["r"], float(z["lambda0"]),
                                       float(z["lambda1"]))
    raise SchemaError(f"unknown binary type {kind!r}")
