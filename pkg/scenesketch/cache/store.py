"""
In-process cache for expensive, read-only objects (loaded encoders, text embeddings).
"""
import fnmatch
import threading
from typing import Any, Dict, Optional

from scenesketch.core.logging import logger


class MemoryCache:
    """Thread-safe key/value store shared by every lineage in the process."""

    def __init__(self):
        self._data: Dict[str, Any] = {}
        self._lock = threading.Lock()

    def get(self, key: str) -> Optional[Any]:
        """
        Get value from cache by key.

        Args:
            key: Cache key

        Returns:
            Cached value or None if not found
        """
        with self._lock:
            return self._data.get(key)

    def set(self, key: str, value: Any) -> None:
        with self._lock:
            self._data[key] = value

    def exists(self, key: str) -> bool:
        with self._lock:
            return key in self._data

    def delete_pattern(self, pattern: str) -> int:
        """
        Delete all keys matching a glob pattern.

        Args:
            pattern: Key pattern (e.g., 'encoder:*')

        Returns:
            Number of keys deleted
        """
        with self._lock:
            keys = [k for k in self._data if fnmatch.fnmatchcase(k, pattern)]
            for k in keys:
                del self._data[k]
        if keys:
            logger.debug(f"Evicted {len(keys)} cache entries matching {pattern}")
        return len(keys)


# Create a single instance to be imported throughout the package
cache = MemoryCache()
