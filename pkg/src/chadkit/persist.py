"""Model persistence.

File layout (also described in docs/model_format.md):

    bytes 0..7    little-endian uint64: byte length H of the JSON header
    bytes 8..8+H  UTF-8 JSON header
    remainder     every parameter flattened C-order as little-endian
                  float64, concatenated in the header's "params" order

The header carries the schema (with vocabularies), its hash, the model and
transform configuration, the normalization stats, and the parameter names
and shapes. A saved model is therefore self-contained for scoring.
"""
from __future__ import annotations

import json
import struct

import numpy as np

from .autoencoder import FieldTransformSpec
from .data import NormalizationStats, RecordSchema
from .errors import DataError
from .model import ChadModel, ModelConfig

FORMAT_VERSION = 1


def save_model(path, model: ChadModel, stats: NormalizationStats):
    params = model.params()
    names = sorted(params)
    header = {
        "format_version": FORMAT_VERSION,
        "schema": model.schema.to_json(),
        "schema_hash": model.schema.hash(),
        "model_config": model.config.to_json(),
        "transform_spec": model.autoencoder.transform.spec.to_json(),
        "normalization": stats.to_json(),
        "params": [{"name": n, "shape": list(params[n].shape)} for n in names],
    }
    blob = json.dumps(header, sort_keys=True, separators=(",", ":")).encode()
    with open(path, "wb") as f:
        f.write(struct.pack("<Q", len(blob)))
        f.write(blob)
        for name in names:
            f.write(np.ascontiguousarray(params[name], dtype="<f8").tobytes())


def load_model(path):
    """Rebuild (model, stats) from a saved file."""
    with open(path, "rb") as f:
        raw_len = f.read(8)
        if len(raw_len) != 8:
            raise DataError(f"{path}: truncated model file")
        (header_len,) = struct.unpack("<Q", raw_len)
        blob = f.read(header_len)
        if len(blob) != header_len:
            raise DataError(f"{path}: truncated model header")
        header = json.loads(blob.decode())
        if header.get("format_version") != FORMAT_VERSION:
            raise DataError(
                f"{path}: unsupported format version {header.get('format_version')}")
        payload = f.read()

    schema = RecordSchema.from_json(header["schema"])
    config = ModelConfig.from_json(header["model_config"])
    spec = FieldTransformSpec.from_json(header["transform_spec"])
    stats = NormalizationStats.from_json(header["normalization"])
    model = ChadModel(schema, config, np.random.default_rng(0), spec)

    params = model.params()
    offset = 0
    for entry in header["params"]:
        name, shape = entry["name"], tuple(entry["shape"])
        if name not in params or params[name].shape != shape:
            raise DataError(f"{path}: unexpected parameter {name} {shape}")
        count = int(np.prod(shape)) if shape else 1
        nbytes = count * 8
        chunk = payload[offset:offset + nbytes]
        if len(chunk) != nbytes:
            raise DataError(f"{path}: truncated payload at parameter {name}")
        params[name][...] = np.frombuffer(chunk, dtype="<f8").reshape(shape)
        offset += nbytes
    if offset != len(payload):
        raise DataError(f"{path}: {len(payload) - offset} trailing payload bytes")
    return model, stats
