"""File-based cache of per-pair analysis results.

Entries live in ``<cache_dir>/<key[:2]>/<key>.json``.  Each entry records
the tool version that produced it; an entry written by another version is
treated like an expired one, since formulation changes alter the numbers.
"""

import json
import threading
import time
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Iterator, Optional

from .utils import atomic_write_text

CACHE_FORMAT = 1


def _tool_version() -> str:
    from . import __version__

    return __version__


@dataclass
class CacheEntry:
    """One cached result."""

    key: str
    kind: str
    value: Any
    created_at: float
    ttl: int
    version: str

    def is_expired(self, now: Optional[float] = None) -> bool:
        return (time.time() if now is None else now) > self.created_at + self.ttl

    def is_usable(self, version: str) -> bool:
        return self.version == version and not self.is_expired()

    def to_dict(self) -> dict:
        return {
            "format": CACHE_FORMAT,
            "key": self.key,
            "kind": self.kind,
            "version": self.version,
            "created_at": self.created_at,
            "ttl": self.ttl,
            "value": self.value,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "CacheEntry":
        if data.get("format") != CACHE_FORMAT:
            raise ValueError(f"unsupported cache format {data.get('format')!r}")
        return cls(
            key=data["key"],
            kind=data["kind"],
            value=data["value"],
            created_at=float(data["created_at"]),
            ttl=int(data["ttl"]),
            version=data["version"],
        )


class CacheManager:
    """TTL cache of JSON values keyed by content hashes.

    Floats are written with ``repr`` precision by ``json``, so a cached
    analysis reproduces the original numbers bit for bit.  Safe to share
    between the worker threads of a sweep.
    """

    def __init__(self, cache_dir: Optional[Path] = None, default_ttl: int = 86400, version: Optional[str] = None):
        """Initialize cache manager.

        Args:
            cache_dir: Directory for cache files
            default_ttl: Default time-to-live in seconds
            version: Version stamp for new entries (default: the installed tool version)
        """
        self.cache_dir = Path(cache_dir) if cache_dir is not None else Path.home() / ".twochan" / "cache"
        self.default_ttl = default_ttl
        self.version = version or _tool_version()
        self.hits = 0
        self.misses = 0
        self._lock = threading.Lock()
        self.cache_dir.mkdir(parents=True, exist_ok=True)

    def path_for(self, key: str) -> Path:
        return self.cache_dir / key[:2] / f"{key}.json"

    def _entries(self) -> Iterator[tuple[Path, Optional[CacheEntry]]]:
        """Every entry file with its parsed entry (None if unreadable)."""
        for path in sorted(self.cache_dir.glob("*/*.json")):
            yield path, self._read(path)

    @staticmethod
    def _read(path: Path) -> Optional[CacheEntry]:
        try:
            return CacheEntry.from_dict(json.loads(path.read_text(encoding="utf-8")))
        except (OSError, ValueError, KeyError, TypeError):
            return None

    def _record(self, hit: bool) -> None:
        with self._lock:
            if hit:
                self.hits += 1
            else:
                self.misses += 1

    def get(self, key: str) -> Optional[Any]:
        """Cached value, or None if absent, expired, unreadable or from another version."""
        path = self.path_for(key)
        entry = self._read(path) if path.exists() else None
        if entry is None or not entry.is_usable(self.version):
            if path.exists():
                path.unlink(missing_ok=True)
            self._record(False)
            return None
        self._record(True)
        return entry.value

    def set(self, key: str, value: Any, kind: str = "pair", ttl: Optional[int] = None) -> Path:
        """Store a JSON-serializable value; returns the entry path."""
        entry = CacheEntry(
            key=key,
            kind=kind,
            value=value,
            created_at=time.time(),
            ttl=self.default_ttl if ttl is None else ttl,
            version=self.version,
        )
        return atomic_write_text(self.path_for(key), json.dumps(entry.to_dict()))

    def delete(self, key: str) -> bool:
        try:
            self.path_for(key).unlink()
            return True
        except FileNotFoundError:
            return False

    def clear(self) -> int:
        """Remove every entry; returns how many were removed."""
        count = 0
        for path, _ in self._entries():
            path.unlink(missing_ok=True)
            count += 1
        return count

    def cleanup_expired(self) -> int:
        """Remove expired, unreadable and other-version entries."""
        count = 0
        for path, entry in self._entries():
            if entry is None or not entry.is_usable(self.version):
                path.unlink(missing_ok=True)
                count += 1
        return count

    def get_stats(self) -> dict:
        total = 0
        stale = 0
        size = 0
        kinds: Counter = Counter()
        for path, entry in self._entries():
            total += 1
            size += path.stat().st_size
            if entry is None or not entry.is_usable(self.version):
                stale += 1
            else:
                kinds[entry.kind] += 1
        return {
            "total_entries": total,
            "expired_entries": stale,
            "valid_entries": total - stale,
            "by_kind": dict(kinds),
            "total_size_bytes": size,
            "cache_dir": str(self.cache_dir),
            "version": self.version,
            "session_hits": self.hits,
            "session_misses": self.misses,
        }
