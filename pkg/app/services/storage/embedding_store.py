"""Embedding files: little-endian float32 payload with an integrity digest.

Packed layout::

    magic      8s   b"OTPEMB01"
    count      u64
    dim        u32
    classes    u32
    flags      u8   bit0 normalized, bit1 labels, bit2 true labels
    dtype      2s   b"f4"
    endianness 1s   b"<"
    rng_seed   u64
    digest     8s   blake2b-64 of everything after the header
    payload    count * dim * f32
    labels     count * i32 (optional)
    true       count * i32 (optional)

The sidecar layout stores the same body in ``<path>`` and the header as JSON
in ``<path>.json``.
"""
import hashlib
import struct
from pathlib import Path
from typing import Literal, Optional

import numpy as np
from pydantic import ValidationError

from app.core.errors import (
    ChecksumMismatchError,
    EmbeddingFormatError,
    MissingLabelsError,
    ReportError,
    TruncatedPayloadError,
)
from app.core.logging import logger
from app.schemas.features import EmbeddingHeader, FeatureMatrix, LabeledDataset

MAGIC = b"OTPEMB01"
HEADER = struct.Struct("<8sQIIB2s1sQ8s")
SIDECAR_SUFFIX = ".json"

FLAG_NORMALIZED = 1
FLAG_LABELS = 2
FLAG_TRUE_LABELS = 4

Layout = Literal["packed", "sidecar"]


def digest_bytes(body: bytes) -> str:
    return hashlib.blake2b(body, digest_size=8).hexdigest()


def file_digest(path) -> str:
    """Digest of a whole file, recorded in run manifests."""
    return digest_bytes(Path(path).read_bytes())


def _sidecar_path(path: Path) -> Path:
    return path.with_name(path.name + SIDECAR_SUFFIX)


# ============================================================================
# Encoding
# ============================================================================

def _encode_body(data: np.ndarray, labels: Optional[np.ndarray],
                 true_labels: Optional[np.ndarray]) -> bytes:
    parts = [np.ascontiguousarray(data, dtype="<f4").tobytes()]
    for vector in (labels, true_labels):
        if vector is not None:
            parts.append(np.ascontiguousarray(vector, dtype="<i4").tobytes())
    return b"".join(parts)


def _pack_header(header: EmbeddingHeader) -> bytes:
    flags = ((FLAG_NORMALIZED if header.normalized else 0)
             | (FLAG_LABELS if header.has_labels else 0)
             | (FLAG_TRUE_LABELS if header.has_true_labels else 0))
    return HEADER.pack(MAGIC, header.count, header.dim, header.class_count, flags,
                       header.dtype.encode(), header.endianness.encode(),
                       header.rng_seed, bytes.fromhex(header.digest))


def _write(path: Path, data: np.ndarray, class_count: int, normalized: bool,
           labels: Optional[np.ndarray], true_labels: Optional[np.ndarray],
           rng_seed: int, layout: Layout) -> EmbeddingHeader:
    body = _encode_body(data, labels, true_labels)
    header = EmbeddingHeader(
        count=data.shape[0], dim=data.shape[1], class_count=class_count,
        normalized=normalized, has_labels=labels is not None,
        has_true_labels=true_labels is not None, rng_seed=rng_seed,
        digest=digest_bytes(body),
    )
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        if layout == "sidecar":
            path.write_bytes(body)
            _sidecar_path(path).write_text(header.model_dump_json(indent=2))
        else:
            path.write_bytes(_pack_header(header) + body)
    except OSError as exc:
        raise ReportError(f"cannot write embedding file {path}: {exc}") from exc
    logger.info(f"Wrote {header.count}x{header.dim} embeddings to {path} ({layout})")
    return header


def save_features(path, dataset: LabeledDataset,
                  layout: Layout = "packed") -> EmbeddingHeader:
    """Write a labelled dataset; features are stored as float32."""
    return _write(Path(path), dataset.features.data, dataset.class_count,
                  dataset.features.normalized, dataset.observed_labels,
                  dataset.true_labels, dataset.rng_seed, layout)


def save_matrix(path, matrix: FeatureMatrix,
                layout: Layout = "packed") -> EmbeddingHeader:
    """Write an unlabelled matrix, e.g. class prototypes (one row per class)."""
    return _write(Path(path), matrix.data, matrix.rows, matrix.normalized,
                  None, None, 0, layout)


# ============================================================================
# Decoding
# ============================================================================

def _read_header(path: Path) -> tuple[EmbeddingHeader, bytes]:
    try:
        raw = path.read_bytes()
    except OSError as exc:
        raise EmbeddingFormatError(f"cannot read {path}: {exc}") from exc
    try:
        if raw[:len(MAGIC)] == MAGIC:
            if len(raw) < HEADER.size:
                raise EmbeddingFormatError(
                    f"header needs {HEADER.size} bytes, file has {len(raw)}"
                )
            (_, count, dim, classes, flags, dtype, endianness,
             rng_seed, digest) = HEADER.unpack_from(raw)
            header = EmbeddingHeader(
                count=count, dim=dim, class_count=classes,
                dtype=dtype.decode("ascii", "replace"),
                endianness=endianness.decode("ascii", "replace"),
                normalized=bool(flags & FLAG_NORMALIZED),
                has_labels=bool(flags & FLAG_LABELS),
                has_true_labels=bool(flags & FLAG_TRUE_LABELS),
                rng_seed=rng_seed, digest=digest.hex(),
            )
            return header, raw[HEADER.size:]
        sidecar = _sidecar_path(path)
        if sidecar.is_file():
            return EmbeddingHeader.model_validate_json(sidecar.read_text()), raw
    except ValidationError as exc:
        raise EmbeddingFormatError(f"malformed header in {path}: {exc}") from exc
    raise EmbeddingFormatError(
        f"{path} is neither a packed embedding file nor has a sidecar"
    )


def _decode(path) -> tuple[EmbeddingHeader, np.ndarray, Optional[np.ndarray],
                           Optional[np.ndarray]]:
    path = Path(path)
    header, body = _read_header(path)
    label_bytes = 4 * header.count
    expected = (header.payload_bytes + label_bytes * header.has_labels
                + label_bytes * header.has_true_labels)
    if len(body) < expected:
        raise TruncatedPayloadError(expected, len(body))
    if len(body) > expected:
        raise EmbeddingFormatError(
            f"{len(body) - expected} trailing bytes after the payload"
        )
    if digest_bytes(body) != header.digest:
        raise ChecksumMismatchError(f"digest mismatch in {path}")

    data = np.frombuffer(body, dtype="<f4", count=header.count * header.dim)
    data = data.astype(np.float64).reshape(header.count, header.dim)
    offset = header.payload_bytes
    labels = true_labels = None
    if header.has_labels:
        labels = np.frombuffer(body, dtype="<i4", count=header.count, offset=offset)
        labels = labels.astype(np.int64)
        offset += label_bytes
    if header.has_true_labels:
        true_labels = np.frombuffer(body, dtype="<i4", count=header.count,
                                    offset=offset)
        true_labels = true_labels.astype(np.int64)
    return header, data, labels, true_labels


def load_matrix(path) -> tuple[EmbeddingHeader, FeatureMatrix]:
    """Read the feature payload only.

    float32 storage cannot hold unit norms to 1e-9, so the matrix comes back
    unflagged; callers re-normalize when the header says the rows were unit.
    """
    header, data, _, _ = _decode(path)
    return header, FeatureMatrix(data=data, normalized=False)


def load_features(path) -> LabeledDataset:
    header, data, labels, true_labels = _decode(path)
    if labels is None:
        raise MissingLabelsError(f"{path} carries no labels")
    class_count = header.class_count or int(labels.max(initial=-1)) + 1
    return LabeledDataset(
        features=FeatureMatrix(data=data, normalized=False),
        observed_labels=labels,
        true_labels=true_labels,
        class_count=max(class_count, 1),
        rng_seed=header.rng_seed,
    )


def read_header(path) -> EmbeddingHeader:
    return _read_header(Path(path))[0]
