"""
Embedding database: build from a checkpoint, persist, and query.
"""

from .embedding_db import (
    EmbeddingDB,
    QueryHit,
    file_sha256,
    build_db,
    query,
    query_by_example,
)

__all__ = ['EmbeddingDB', 'QueryHit', 'file_sha256', 'build_db', 'query', 'query_by_example']
