"""Embedding file storage."""
from app.services.storage.embedding_store import (
    file_digest,
    load_features,
    load_matrix,
    read_header,
    save_features,
    save_matrix,
)

__all__ = [
    "file_digest",
    "load_features",
    "load_matrix",
    "read_header",
    "save_features",
    "save_matrix",
]
