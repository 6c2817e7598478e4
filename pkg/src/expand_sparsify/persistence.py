"""Model file format.

A model file is::

    EASMODEL <version>\\n
    <one-line JSON header>\\n
    <payload>

The header records the shapes, the projection metadata, the payload length
and its SHA-256.  The payload holds, in order, the projection rows
(row-major), the row ids, thresholds, readout, fit counts, dead mask and
global target mean.  With ``encoding="binary"`` these are little-endian
IEEE-754 doubles / int64 / uint8; with ``encoding="decimal"`` each array is
one text line of space-separated values, floats written with 17 significant
digits so they read back exactly.
"""

import hashlib
import json
import os

import numpy as np

from .approximator import EasApproximator
from .exceptions import ChecksumError, ModelFileError, VersionError
from .projection import ProjectionMatrix
from .sparsify import ThresholdVector

MAGIC = "EASMODEL"
FORMAT_VERSION = 1
ENCODINGS = ("decimal", "binary")


def _arrays(model):
    return [
        ("rows", model.W.rows.ravel(), "<f8"),
        ("row_ids", model.W.row_ids, "<i8"),
        ("taus", model.tau.taus, "<f8"),
        ("readout", model.readout.ravel(), "<f8"),
        ("counts", model.counts, "<i8"),
        ("dead_mask", model.dead_mask.astype(np.uint8), "u1"),
        ("global_mean", np.atleast_1d(model.global_mean), "<f8"),
    ]


def _encode_decimal(values, dtype):
    if dtype == "<f8":
        return " ".join("%.17g" % v for v in values)
    return " ".join(str(int(v)) for v in values)


def save_model(model, path, encoding="binary"):
    """Write ``model`` to ``path``; the file is replaced atomically."""
    if encoding not in ENCODINGS:
        raise ModelFileError(f"unknown encoding {encoding!r}; expected one of {ENCODINGS}")
    arrays = _arrays(model)
    if encoding == "binary":
        payload = b"".join(np.ascontiguousarray(a, dtype=dt).tobytes() for _, a, dt in arrays)
    else:
        payload = "".join(f"{name} {_encode_decimal(a, dt)}\n" for name, a, dt in arrays).encode("ascii")
    header = {
        "version": FORMAT_VERSION,
        "encoding": encoding,
        "n": model.n,
        "d": model.d,
        "k": model.tau.k,
        "n_outputs": model.n_outputs,
        "multi_output": model.readout.ndim == 2,
        "dist": model.W.dist,
        "sigma": model.W.sigma,
        "seed": model.W.seed,
        "quantile_level": model.tau.quantile_level,
        "sample_size": model.tau.sample_size,
        "source_seed": model.tau.source_seed,
        "exclude_dead": model.exclude_dead,
        "payload_bytes": len(payload),
        "sha256": hashlib.sha256(payload).hexdigest(),
    }
    blob = f"{MAGIC} {FORMAT_VERSION}\n{json.dumps(header, sort_keys=True)}\n".encode("ascii") + payload
    tmp = f"{os.fspath(path)}.tmp"
    try:
        with open(tmp, "wb") as fh:
            fh.write(blob)
        os.replace(tmp, path)
    except OSError as exc:
        raise ModelFileError(f"cannot write {path}: {exc}") from exc


def _read_header(fh, path):
    first = fh.readline().decode("ascii", errors="replace").split()
    if len(first) != 2 or first[0] != MAGIC:
        raise ModelFileError(f"{path} is not a model file")
    if first[1] != str(FORMAT_VERSION):
        raise VersionError(f"{path} has format version {first[1]}, this build reads {FORMAT_VERSION}")
    line = fh.readline()
    try:
        header = json.loads(line)
    except ValueError:
        raise ChecksumError(f"{path}: corrupt header") from None
    if header.get("version") != FORMAT_VERSION:
        raise VersionError(f"{path} has format version {header.get('version')}")
    return header


def read_header(path):
    try:
        with open(path, "rb") as fh:
            return _read_header(fh, path)
    except ModelFileError:
        raise
    except OSError as exc:
        raise ModelFileError(f"cannot read {path}: {exc}") from exc


def load_model(path):
    """Read a model written by :func:`save_model`.

    Raises
    ------
    VersionError
        Unsupported format version.
    ChecksumError
        Truncated or corrupted payload.
    ModelFileError
        Anything else that stops the file from being read.
    """
    try:
        with open(path, "rb") as fh:
            header = _read_header(fh, path)
            payload = fh.read()
    except ModelFileError:
        raise
    except OSError as exc:
        raise ModelFileError(f"cannot read {path}: {exc}") from exc
    if len(payload) != header["payload_bytes"]:
        raise ChecksumError(f"{path}: payload has {len(payload)} bytes, header says {header['payload_bytes']}")
    if hashlib.sha256(payload).hexdigest() != header["sha256"]:
        raise ChecksumError(f"{path}: checksum mismatch")

    n, d, c = header["n"], header["d"], header["n_outputs"]
    sizes = [("rows", d * n, "<f8"), ("row_ids", d, "<i8"), ("taus", d, "<f8"), ("readout", d * c, "<f8"),
             ("counts", d, "<i8"), ("dead_mask", d, "u1"), ("global_mean", c, "<f8")]
    arrays = {}
    if header["encoding"] == "binary":
        offset = 0
        for name, count, dt in sizes:
            nbytes = count * np.dtype(dt).itemsize
            arrays[name] = np.frombuffer(payload, dtype=dt, count=count, offset=offset)
            offset += nbytes
    elif header["encoding"] == "decimal":
        lines = payload.decode("ascii").splitlines()
        if len(lines) != len(sizes):
            raise ModelFileError(f"{path}: expected {len(sizes)} array lines, found {len(lines)}")
        for line, (name, count, dt) in zip(lines, sizes):
            label, _, body = line.partition(" ")
            if label != name:
                raise ModelFileError(f"{path}: expected array {name!r}, found {label!r}")
            conv = float if dt == "<f8" else int
            values = np.array([conv(v) for v in body.split()], dtype=dt)
            if values.size != count:
                raise ModelFileError(f"{path}: array {name!r} has {values.size} values, expected {count}")
            arrays[name] = values
    else:
        raise ModelFileError(f"{path}: unknown encoding {header['encoding']!r}")

    W = ProjectionMatrix(arrays["rows"].reshape(d, n), header["dist"], header["sigma"], header["seed"],
                         arrays["row_ids"])
    tau = ThresholdVector(arrays["taus"], header["quantile_level"], header["sample_size"], header["source_seed"],
                          header["k"])
    readout = arrays["readout"].reshape(d, c) if header["multi_output"] else arrays["readout"].copy()
    multi = header["multi_output"]
    global_mean = arrays["global_mean"].copy() if multi else np.float64(arrays["global_mean"][0])
    return EasApproximator(W, tau, readout, arrays["counts"].astype(np.int64), arrays["dead_mask"].astype(bool),
                           global_mean, bool(header["exclude_dead"]))


def describe(model):
    """Summary dict used by the ``inspect`` CLI verb."""
    return {
        "n": model.n,
        "d": model.d,
        "k": model.tau.k,
        "dist": model.W.dist,
        "sigma": model.W.sigma,
        "seed": model.W.seed,
        "quantile_level": model.tau.quantile_level,
        "calibration_size": model.tau.sample_size,
        "n_outputs": model.n_outputs,
        "dead_units": int(model.dead_mask.sum()),
        "mean_fit_count": float(model.counts.mean()),
        "pruned": bool(model.W.row_ids.size and not np.array_equal(model.W.row_ids, np.arange(model.d))),
    }
