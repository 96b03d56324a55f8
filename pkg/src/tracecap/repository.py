"""Shared trace repository client.

Layout (served over HTTP(S) or as a plain directory):

    manifest.json                      all known refs
    traces/<id>/<version>.trace.json   canonical trace documents
    traces/<id>/latest                 highest version number, as text

Any static file host of this layout works. The local cache mirrors it and is
append-only: versions, once cached, stay resolvable even if the remote drops
them. Sync holds an exclusive lock per cache directory; lookups are
read-only and freely concurrent.
"""

from __future__ import annotations

import hashlib
import json
import os
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Tuple

import requests

from .errors import LayoutError, RemoteUnreachable, TracecapError
from .trace import Trace, UrlPattern, match_url, parse_trace

MANIFEST = "manifest.json"


@dataclass(frozen=True)
class TraceRef:
    id: str
    version: int
    digest: str
    url_pattern: str
    source: str

    def relpath(self) -> str:
        return f"traces/{self.id}/{self.version}.trace.json"

    def to_dict(self) -> Dict[str, object]:
        return {"id": self.id, "version": self.version, "digest": self.digest,
                "url_pattern": self.url_pattern}


@dataclass
class SyncReport:
    added: List[TraceRef] = field(default_factory=list)
    updated: List[TraceRef] = field(default_factory=list)

    @property
    def changed(self) -> int:
        return len(self.added) + len(self.updated)

    def to_dict(self) -> Dict[str, object]:
        return {"added": [r.to_dict() for r in self.added],
                "updated": [r.to_dict() for r in self.updated],
                "changed": self.changed}


def content_digest(data: bytes) -> str:
    return "sha256:" + hashlib.sha256(data).hexdigest()


class _Remote:
    """Uniform fetch over HTTP(S) remotes and local directories."""

    def __init__(self, base: str):
        self.base = base.rstrip("/")
        self.is_http = base.startswith(("http://", "https://"))

    def fetch(self, relpath: str) -> bytes:
        if self.is_http:
            try:
                response = requests.get(f"{self.base}/{relpath}", timeout=30)
            except requests.RequestException as exc:
                raise RemoteUnreachable(f"{self.base}/{relpath}: {exc}") from exc
            if response.status_code == 404:
                raise LayoutError(f"remote is missing {relpath}")
            if response.status_code != 200:
                raise RemoteUnreachable(
                    f"{self.base}/{relpath}: HTTP {response.status_code}")
            return response.content
        path = Path(self.base) / relpath
        if not Path(self.base).is_dir():
            raise RemoteUnreachable(f"no such repository directory: {self.base}")
        if not path.is_file():
            raise LayoutError(f"remote is missing {relpath}")
        return path.read_bytes()


class _CacheLock:
    """Exclusive per-directory lock; sync must not run twice concurrently."""

    def __init__(self, cache_dir: Path, timeout_s: float = 30.0):
        self.path = cache_dir / ".sync.lock"
        self.timeout_s = timeout_s
        self._fd: Optional[int] = None

    def __enter__(self):
        deadline = time.monotonic() + self.timeout_s
        while True:
            try:
                self._fd = os.open(self.path, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
                os.write(self._fd, str(os.getpid()).encode())
                return self
            except FileExistsError:
                if time.monotonic() > deadline:
                    raise TimeoutError(f"sync lock busy: {self.path}") from None
                time.sleep(0.05)

    def __exit__(self, *exc):
        if self._fd is not None:
            os.close(self._fd)
        self.path.unlink(missing_ok=True)


def _parse_manifest(data: bytes, source: str) -> List[TraceRef]:
    try:
        doc = json.loads(data)
        refs = []
        for item in doc["traces"]:
            refs.append(TraceRef(
                id=item["id"], version=int(item["version"]),
                digest=item["digest"], url_pattern=item["url_pattern"],
                source=source,
            ))
    except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
        raise LayoutError(f"malformed manifest from {source}: {exc}") from exc
    seen = set()
    for ref in refs:
        if (ref.id, ref.version) in seen:
            raise LayoutError(f"duplicate (id, version) in manifest: {ref.id} v{ref.version}")
        seen.add((ref.id, ref.version))
    return refs


def sync(remote: str, cache_dir) -> SyncReport:
    """Mirror the remote into the cache; never deletes cached versions."""
    cache = Path(cache_dir)
    cache.mkdir(parents=True, exist_ok=True)
    remote_refs = _parse_manifest(_Remote(remote).fetch(MANIFEST), remote)
    source = _Remote(remote)

    with _CacheLock(cache):
        repo = TraceRepository(cache)
        known = {(r.id, r.version) for r in repo.refs()}
        known_ids = {r.id for r in repo.refs()}
        report = SyncReport()
        for ref in sorted(remote_refs, key=lambda r: (r.id, r.version)):
            if (ref.id, ref.version) in known:
                continue
            data = source.fetch(ref.relpath())
            actual = content_digest(data)
            if actual != ref.digest:
                raise LayoutError(
                    f"digest mismatch for {ref.relpath()}: manifest says "
                    f"{ref.digest}, content is {actual}")
            try:
                parse_trace(data)
            except TracecapError as exc:
                raise LayoutError(f"{ref.relpath()} is not a valid trace: {exc}") from exc
            repo._store(ref, data)
            (report.updated if ref.id in known_ids else report.added).append(ref)
            known_ids.add(ref.id)
        repo._write_manifest()
        return report


class TraceRepository:
    """Read handle on a local cache directory."""

    def __init__(self, cache_dir):
        self.cache_dir = Path(cache_dir)
        self._refs: Dict[Tuple[str, int], TraceRef] = {}
        manifest = self.cache_dir / MANIFEST
        if manifest.is_file():
            for ref in _parse_manifest(manifest.read_bytes(), str(self.cache_dir)):
                self._refs[(ref.id, ref.version)] = ref

    def refs(self) -> List[TraceRef]:
        return sorted(self._refs.values(), key=lambda r: (r.id, r.version))

    def latest(self, trace_id: str) -> Optional[TraceRef]:
        versions = [r for (i, _), r in self._refs.items() if i == trace_id]
        return max(versions, key=lambda r: r.version) if versions else None

    def lookup(self, url: str) -> List[TraceRef]:
        """Latest-version refs whose pattern matches, most specific first
        (longest literal prefix, then newest)."""
        latest: Dict[str, TraceRef] = {}
        for ref in self._refs.values():
            cur = latest.get(ref.id)
            if cur is None or ref.version > cur.version:
                latest[ref.id] = ref
        matches = [r for r in latest.values()
                   if match_url(UrlPattern(r.url_pattern), url)]
        matches.sort(key=lambda r: (-len(UrlPattern(r.url_pattern).literal_prefix()),
                                    -r.version, r.id))
        return matches

    def load(self, ref: TraceRef) -> Trace:
        return parse_trace((self.cache_dir / ref.relpath()).read_bytes())

    # -- cache mutation (sync only) -----------------------------------------

    def _store(self, ref: TraceRef, data: bytes):
        path = self.cache_dir / ref.relpath()
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_bytes(data)
        self._refs[(ref.id, ref.version)] = TraceRef(
            id=ref.id, version=ref.version, digest=ref.digest,
            url_pattern=ref.url_pattern, source=str(self.cache_dir))
        latest = self.latest(ref.id)
        (path.parent / "latest").write_text(str(latest.version), encoding="utf-8")

    def _write_manifest(self):
        doc = {"traces": [r.to_dict() for r in self.refs()]}
        (self.cache_dir / MANIFEST).write_text(
            json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")
