"""
Unit tests for the in-process cache.
"""
import pytest

from scenesketch.cache.cache_decorators import _generate_key_from_args, cached
from scenesketch.cache.store import MemoryCache, cache


class _Named:
    def __init__(self, cache_id: str):
        self.cache_id = cache_id


@pytest.mark.unit
class TestMemoryCache:
    """Test the key/value store."""

    def test_set_get(self):
        """Test basic storage."""
        store = MemoryCache()
        store.set("encoder:a", 1)
        assert store.get("encoder:a") == 1
        assert store.exists("encoder:a")
        assert store.get("missing") is None

    def test_delete_pattern(self):
        """Test glob deletion returns the number of removed keys."""
        store = MemoryCache()
        store.set("encoder:a", 1)
        store.set("encoder:b", 2)
        store.set("class_embeddings:x", 3)
        assert store.delete_pattern("encoder:*") == 2
        assert store.exists("class_embeddings:x")


@pytest.mark.unit
class TestCachedDecorator:
    """Test memoisation of expensive constructors."""

    def test_memoises(self):
        """Test that a second call with the same arguments hits the cache."""
        calls = []

        @cached("test")
        def build(name, size=1):
            calls.append(name)
            return [name, size]

        first = build("a", size=2)
        assert build("a", size=2) is first
        assert len(calls) == 1
        build("b", size=2)
        assert len(calls) == 2

    def test_cleared_between_calls(self):
        """Test that deleting the prefix forces a rebuild."""
        calls = []

        @cached("test")
        def build():
            calls.append(1)
            return object()

        build()
        cache.delete_pattern("test:*")
        build()
        assert len(calls) == 2

    def test_key_uses_cache_id(self):
        """Test that objects are keyed by their cache_id, not their identity."""
        assert _generate_key_from_args((_Named("toy@64"),), {}) == _generate_key_from_args((_Named("toy@64"),), {})
        assert _generate_key_from_args((_Named("toy@64"),), {}) != _generate_key_from_args((_Named("toy@32"),), {})
