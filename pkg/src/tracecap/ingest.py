"""HTTP ingest endpoint for recorder-exported traces.

``PUT /traces/<id>`` validates the posted document and files it into a local
repository layout (next version, canonical bytes, manifest + latest updated);
``GET /health`` answers liveness probes. Invalid documents come back as 422
with the validation findings so the recorder can show them to the curator.
"""

from __future__ import annotations

import json
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path
from typing import Dict, Optional, Tuple

from .errors import TracecapError
from .repository import MANIFEST, TraceRef, content_digest
from .trace import Trace, parse_trace, serialize_trace, validate_trace


class LocalTraceStore:
    """Writes traces into the repository layout on local disk.

    This is the ingest-side writer only; distributing a repository to the
    community still happens by hosting the directory somewhere fetchable.
    """

    def __init__(self, root):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self._lock = threading.Lock()

    def _manifest(self) -> Dict:
        path = self.root / MANIFEST
        if path.is_file():
            return json.loads(path.read_text(encoding="utf-8"))
        return {"traces": []}

    def next_version(self, trace_id: str) -> int:
        manifest = self._manifest()
        versions = [t["version"] for t in manifest["traces"] if t["id"] == trace_id]
        return max(versions, default=0) + 1

    def put(self, trace: Trace) -> TraceRef:
        """File a new version of the trace; returns its repository ref."""
        with self._lock:
            version = self.next_version(trace.id)
            data = serialize_trace(trace)
            ref = TraceRef(id=trace.id, version=version, digest=content_digest(data),
                           url_pattern=trace.url_pattern.pattern, source=str(self.root))
            path = self.root / ref.relpath()
            path.parent.mkdir(parents=True, exist_ok=True)
            path.write_bytes(data)
            (path.parent / "latest").write_text(str(version), encoding="utf-8")
            manifest = self._manifest()
            manifest["traces"].append(ref.to_dict())
            manifest["traces"].sort(key=lambda t: (t["id"], t["version"]))
            (self.root / MANIFEST).write_text(
                json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
            return ref


class IngestServer:
    def __init__(self, repo_dir, port: int = 0, host: str = "127.0.0.1"):
        store = LocalTraceStore(repo_dir)

        class Handler(BaseHTTPRequestHandler):
            protocol_version = "HTTP/1.1"

            def log_message(self, *args):
                pass

            def _reply(self, status: int, doc: Dict):
                body = (json.dumps(doc, indent=2, sort_keys=True) + "\n").encode()
                self.send_response(status)
                self.send_header("Content-Type", "application/json")
                self.send_header("Content-Length", str(len(body)))
                self.end_headers()
                self.wfile.write(body)

            def do_GET(self):
                if self.path == "/health":
                    self._reply(200, {"status": "ok"})
                else:
                    self._reply(404, {"error": "unknown path"})

            def do_PUT(self):
                if not self.path.startswith("/traces/"):
                    self._reply(404, {"error": "unknown path"})
                    return
                path_id = self.path[len("/traces/"):]
                length = int(self.headers.get("Content-Length", 0))
                body = self.rfile.read(length)
                status, doc = _ingest(store, path_id, body)
                self._reply(status, doc)

        class Server(ThreadingHTTPServer):
            daemon_threads = True
            request_queue_size = 64

        self.server = Server((host, port), Handler)
        self.port = self.server.server_address[1]
        self.endpoint = f"http://{host}:{self.port}"
        self._thread = threading.Thread(target=self.server.serve_forever,
                                        name="serve-ingest", daemon=True)

    def start(self) -> "IngestServer":
        self._thread.start()
        return self

    def stop(self):
        self.server.shutdown()
        self.server.server_close()
        self._thread.join(timeout=5)


def _ingest(store: LocalTraceStore, path_id: str, body: bytes) -> Tuple[int, Dict]:
    try:
        trace = parse_trace(body)
    except TracecapError as exc:
        return 422, {"findings": [{"severity": "error", "path": "document",
                                   "message": str(exc)}]}
    report = validate_trace(trace)
    if not report.ok():
        return 422, report.to_dict()
    if trace.id != path_id:
        return 422, {"findings": [{
            "severity": "error", "path": "id",
            "message": f"document id {trace.id!r} does not match path id {path_id!r}"}]}
    ref = store.put(trace)
    return 201, {"id": ref.id, "version": ref.version, "digest": ref.digest,
                 "findings": report.to_dict()["findings"]}
