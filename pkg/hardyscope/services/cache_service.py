"""

This module caches expensive shared objects (spectral operators, cube families)
across the experiment runners.


Entries are keyed by the SHA-256 of the canonical JSON of whatever determines
them, so certification, the lemma suite and the equivalence study over the same
config reuse one eigendecomposition.
"""

import hashlib
import json
import logging
import threading

logger = logging.getLogger(__name__)

# Global cache for built objects to avoid recomputing them for every experiment
_object_cache = {}
_cache_lock = threading.Lock()
_cache_stats = {"hits": 0, "misses": 0}


def cache_key(*parts):
    """

    Hash JSON-serializable parts into a cache key.


    Args:
        *parts: Dictionaries, strings or numbers identifying the object.

    Returns:
        str: Hex SHA-256 digest of the canonical JSON of the parts.
    """
    text = json.dumps(list(parts), sort_keys=True, default=str)
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def get_or_build(key, factory):
    """

    Return the cached object for `key`, building it with `factory` on a miss.


    Args:
        key (str): Cache key from cache_key().
        factory (callable): Zero-argument builder.

    Returns:
        object: The cached or freshly built object.
    """
    with _cache_lock:
        if key in _object_cache:
            _cache_stats["hits"] += 1
            return _object_cache[key]
        _cache_stats["misses"] += 1

    # Build outside the lock; a concurrent duplicate build is discarded
    built = factory()
    with _cache_lock:
        cached = _object_cache.setdefault(key, built)
    logger.debug("Cached object %s", key[:12])
    return cached


def clear_cache():
    """Drop every cached object and reset the statistics."""
    with _cache_lock:
        _object_cache.clear()
        _cache_stats["hits"] = 0
        _cache_stats["misses"] = 0


def cache_info():
    """

    Return cache statistics.


    Returns:
        dict: {"entries", "hits", "misses"}.
    """
    with _cache_lock:
        return {"entries": len(_object_cache), **_cache_stats}
