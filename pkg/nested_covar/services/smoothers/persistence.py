# nested_covar/services/smoothers/persistence.py
"""
Versioned binary container for fitted surfaces.

Byte layout (little endian):

    offset  size  field
    0       4     magic b"CVSM"
    4       2     format version (uint16)
    6       4     header length H (uint32)
    10      H     UTF-8 JSON header
    10+H    ...   payload: raw array bytes, concatenated

The header records family, input dimension d, sample size m, the
scenario block size the training draws were made with,
hyperparameters, metadata, an array manifest (name, dtype, shape, offset,
nbytes into the payload) and the SHA-256 of the payload.
"""
import hashlib
import json
import logging
import os
import struct
from pathlib import Path
from typing import Union

import numpy as np

from ...config import settings
from ...errors import CorruptArtifact, ResultsIOError, VersionMismatch
from ...models.surface import SmootherFamily, Standardization, SurfaceModel

logger = logging.getLogger(__name__)

MAGIC = b"CVSM"
_PREFIX = struct.Struct("<4sHI")
_STANDARDIZATION = ("location", "scale", "constant")


def to_bytes(model: SurfaceModel) -> bytes:
    arrays = {f"param.{name}": np.asarray(value) for name, value in model.parameters.items()}
    for name in _STANDARDIZATION:
        arrays[f"std.{name}"] = np.asarray(getattr(model.standardization, name))

    manifest, chunks, offset = [], [], 0
    for name, array in arrays.items():
        data = np.ascontiguousarray(array).astype(array.dtype.newbyteorder("<"), copy=False).tobytes()
        manifest.append({
            "name": name,
            "dtype": array.dtype.newbyteorder("<").str,
            "shape": list(array.shape),
            "offset": offset,
            "nbytes": len(data),
        })
        chunks.append(data)
        offset += len(data)
    payload = b"".join(chunks)

    header = json.dumps(
        {
            "family": model.family.value,
            "d": model.dimension,
            "m": model.sample_size,
            "scenario_block": model.metadata.get("scenario_block", settings.SCENARIO_BLOCK),
            "hyperparameters": model.hyperparameters,
            "metadata": model.metadata,
            "arrays": manifest,
            "sha256": hashlib.sha256(payload).hexdigest(),
        },
        sort_keys=True,
    ).encode("utf-8")
    return _PREFIX.pack(MAGIC, settings.ARTIFACT_VERSION, len(header)) + header + payload


def from_bytes(blob: bytes) -> SurfaceModel:
    """
    Raises:
        CorruptArtifact: bad magic, truncated data, malformed header or checksum mismatch
        VersionMismatch: container written by a different format version
    """
    if len(blob) < _PREFIX.size:
        raise CorruptArtifact(f"artifact is {len(blob)} bytes, shorter than its fixed prefix")
    magic, version, header_length = _PREFIX.unpack_from(blob)
    if magic != MAGIC:
        raise CorruptArtifact(f"bad magic {magic!r}")
    if version != settings.ARTIFACT_VERSION:
        raise VersionMismatch(f"artifact format version {version}, this build reads {settings.ARTIFACT_VERSION}")

    body = _PREFIX.size + header_length
    if len(blob) < body:
        raise CorruptArtifact("artifact truncated inside its header")
    try:
        header = json.loads(blob[_PREFIX.size:body].decode("utf-8"))
        manifest = header["arrays"]
        family = SmootherFamily(header["family"])
    except (UnicodeDecodeError, ValueError, KeyError) as e:
        raise CorruptArtifact(f"malformed artifact header: {e}") from e

    payload = blob[body:]
    expected = sum(entry["nbytes"] for entry in manifest)
    if len(payload) != expected:
        raise CorruptArtifact(f"payload holds {len(payload)} bytes, manifest declares {expected}")
    if hashlib.sha256(payload).hexdigest() != header.get("sha256"):
        raise CorruptArtifact("payload checksum mismatch")

    arrays = {}
    for entry in manifest:
        raw = payload[entry["offset"]:entry["offset"] + entry["nbytes"]]
        arrays[entry["name"]] = np.frombuffer(raw, dtype=np.dtype(entry["dtype"])).reshape(entry["shape"]).copy()

    standardization = Standardization(*(arrays.pop(f"std.{name}") for name in _STANDARDIZATION))
    parameters = {name[len("param."):]: value for name, value in arrays.items()}
    metadata = {**header["metadata"], "scenario_block": header.get("scenario_block")}
    return SurfaceModel(family, parameters, header["hyperparameters"], standardization, metadata)


def save_model(model: SurfaceModel, path: Union[str, Path]) -> Path:
    path = Path(path)
    blob = to_bytes(model)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        staging = path.with_suffix(path.suffix + ".tmp")
        staging.write_bytes(blob)
        os.replace(staging, path)
    except OSError as e:
        logger.error(f"Failed to write surface artifact {path}: {e}")
        raise ResultsIOError(f"cannot write {path}: {e}") from e
    logger.info(f"Saved {model.family.value} surface ({len(blob)} bytes) to {path}")
    return path


def load_model(path: Union[str, Path]) -> SurfaceModel:
    path = Path(path)
    try:
        blob = path.read_bytes()
    except OSError as e:
        raise CorruptArtifact(f"cannot read surface artifact {path}: {e}") from e
    return from_bytes(blob)
