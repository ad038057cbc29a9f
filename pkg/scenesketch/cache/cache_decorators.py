"""
Cache decorators for memoising expensive constructors and embeddings.
"""
import hashlib
import json
from functools import wraps
from typing import Any, Callable

from scenesketch.cache.store import cache
from scenesketch.core.logging import logger


def cached(key_prefix: str):
    """
    Decorator to memoise function results in the process cache.

    Args:
        key_prefix: Prefix for the cache key

    Usage:
        @cached('encoder')
        def get_encoder(backend, weights_path=None):
            return load(...)
    """
    def decorator(func: Callable) -> Callable:
        @wraps(func)
        def wrapper(*args, **kwargs) -> Any:
            # Generate cache key from function args
            args_key = _generate_key_from_args(args, kwargs)
            cache_key = f"{key_prefix}:{args_key}"

            cached_value = cache.get(cache_key)
            if cached_value is not None:
                logger.debug(f"Cache hit for key: {cache_key}")
                return cached_value

            logger.debug(f"Cache miss for key: {cache_key}")
            result = func(*args, **kwargs)
            cache.set(cache_key, result)
            return result
        return wrapper
    return decorator


def _generate_key_from_args(args: tuple, kwargs: dict) -> str:
    """
    Generate a unique cache key from function arguments.

    Args:
        args: Positional arguments
        kwargs: Keyword arguments

    Returns:
        MD5 hash of the arguments
    """
    # Encoders and other heavy objects are keyed by their registered name
    filtered_args = [getattr(arg, "cache_id", arg) for arg in args]
    key_data = {
        'args': [str(arg) for arg in filtered_args],
        'kwargs': {k: str(getattr(v, "cache_id", v)) for k, v in kwargs.items()}
    }
    key_string = json.dumps(key_data, sort_keys=True)
    return hashlib.md5(key_string.encode()).hexdigest()
