# app/channel/channel_io.py
"""On-disk channel record: a JSON metadata sidecar plus a raw complex64 payload.

``<stem>.json`` holds S, Q, sampling, carrier, noise floor, label and
``format_version``; ``<stem>.bin`` holds S*Q entries, row-major over time,
each entry as little-endian float32 real then imaginary.
"""

import json
import math
from pathlib import Path
from typing import Tuple, Union

import numpy as np
from pydantic import ValidationError

from app.channel.errors import ChannelValidationError, RecordFormatError
from app.channel.schema import ChannelRecord, RecordMetadata
from app.config.settings import settings
from utils.logger import logger

PAYLOAD_DTYPE = np.dtype("<c8")
SUPPORTED_VERSIONS = {settings.RECORD_FORMAT_VERSION}

PathLike = Union[str, Path]


def record_paths(path: PathLike) -> Tuple[Path, Path]:
    """Return ``(metadata_path, payload_path)`` for a record stem or either file."""
    base = Path(path)
    if base.suffix in (".json", ".bin"):
        base = base.with_suffix("")
    return base.with_name(base.name + ".json"), base.with_name(base.name + ".bin")


def write_record(record: ChannelRecord, path: PathLike):
    payload = record.data.astype(PAYLOAD_DTYPE)
    if not np.all(np.isfinite(payload)):
        raise ChannelValidationError("record does not fit float32 storage (overflow to inf)")

    floor_db = record.noise_floor_db
    if floor_db is not None and not math.isfinite(floor_db):
        # the sidecar is strict JSON; a non-finite floor is stored as unknown
        logger.warning(f"Noise floor {floor_db} is not finite, writing null")
        floor_db = None

    meta_path, payload_path = record_paths(path)
    meta = RecordMetadata(
        S=record.s,
        Q=record.q,
        t_s=record.t_s,
        f_s=record.f_s,
        f_carrier=record.f_carrier,
        noise_floor_db=floor_db,
        label=record.label,
    )
    meta_path.parent.mkdir(parents=True, exist_ok=True)
    payload_path.write_bytes(np.ascontiguousarray(payload).tobytes(order="C"))
    meta_path.write_text(json.dumps(meta.model_dump(), indent=2, allow_nan=False), encoding="utf-8")
    logger.debug(f"Wrote record {record.s}x{record.q} to {payload_path}")


def read_record(path: PathLike) -> ChannelRecord:
    meta_path, payload_path = record_paths(path)
    for file_path in (meta_path, payload_path):
        if not file_path.exists():
            raise FileNotFoundError(file_path)

    try:
        meta = RecordMetadata.model_validate(json.loads(meta_path.read_text(encoding="utf-8")))
    except (UnicodeDecodeError, json.JSONDecodeError, ValidationError) as e:
        raise RecordFormatError(f"invalid metadata in {meta_path}: {e}") from e

    if meta.format_version not in SUPPORTED_VERSIONS:
        raise RecordFormatError(
            f"unsupported format_version {meta.format_version} (supported: {sorted(SUPPORTED_VERSIONS)})"
        )
    if meta.S < 1 or meta.Q < 1:
        raise RecordFormatError(f"invalid dimensions S={meta.S}, Q={meta.Q}")

    raw = payload_path.read_bytes()
    expected = meta.S * meta.Q * PAYLOAD_DTYPE.itemsize
    if len(raw) != expected:
        raise RecordFormatError(
            f"payload size mismatch: {len(raw)} bytes, expected {expected} for {meta.S}x{meta.Q}"
        )

    data = np.frombuffer(raw, dtype=PAYLOAD_DTYPE).reshape(meta.S, meta.Q)
    if not np.all(np.isfinite(data)):
        raise RecordFormatError(f"payload {payload_path} contains NaN or Inf")

    try:
        return ChannelRecord(
            data=data,
            t_s=meta.t_s,
            f_s=meta.f_s,
            f_carrier=meta.f_carrier,
            noise_floor_db=meta.noise_floor_db,
            label=meta.label,
        )
    except ValidationError as e:
        raise RecordFormatError(f"invalid record {meta_path}: {e}") from e
