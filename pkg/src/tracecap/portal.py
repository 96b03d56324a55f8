"""Deterministic local portal emulating two templated page classes.

"Repository" pages list files plus an optional archive download; "deck"
pages paginate through slides with per-slide notes. Every page of a class is
rendered from the same template, so one trace recorded against any page of
the class drives all of them. The portal also exposes ``/__stats`` (hit
counts, max observed concurrency) for test probes, can delay every response
by a fixed amount, and can serve TLS with a self-signed certificate.
"""

from __future__ import annotations

import io
import json
import ssl
import tempfile
import threading
import time
import zipfile
from dataclasses import dataclass, field
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path
from typing import Dict, List, Optional

from .errors import BindError
from .tlsca import self_signed_server_context

STYLE_CSS = "body { font-family: sans-serif; margin: 2rem; }\n"


@dataclass(frozen=True)
class RepoSpec:
    name: str
    file_count: int
    with_zip: bool = True


@dataclass(frozen=True)
class DeckSpec:
    name: str
    slide_count: int
    note_count: int = 0
    scripted: bool = False  # in-page mutation pagination instead of hrefs


@dataclass
class PortalSpec:
    repos: List[RepoSpec] = field(default_factory=list)
    decks: List[DeckSpec] = field(default_factory=list)
    delay_ms: int = 0
    tls: bool = False

    def __post_init__(self):
        names = [r.name for r in self.repos] + [d.name for d in self.decks]
        if len(names) != len(set(names)):
            raise ValueError("portal spec names must be unique")

    @classmethod
    def from_dict(cls, doc: Dict) -> "PortalSpec":
        return cls(
            repos=[RepoSpec(r["name"], r["file_count"], r.get("with_zip", True))
                   for r in doc.get("repos", [])],
            decks=[DeckSpec(d["name"], d["slide_count"], d.get("note_count", 0),
                            d.get("scripted", False))
                   for d in doc.get("decks", [])],
            delay_ms=doc.get("delay_ms", 0),
            tls=doc.get("tls", False),
        )


# ---------------------------------------------------------------------------
# page rendering (pure functions of the PortalSpec: no timestamps, no randomness)

def _page(title: str, body: str) -> bytes:
    html = (f"<!doctype html>\n<html><head><title>{title}</title>\n"
            f'<link rel="stylesheet" href="/static/style.css">\n'
            f"</head><body>\n{body}\n</body></html>\n")
    return html.encode("utf-8")


def _notes_panel(deck: DeckSpec) -> str:
    links = "".join(
        f'<a class="note" href="/deck/{deck.name}/note/{i}">note {i}</a>\n'
        for i in range(1, deck.note_count + 1))
    return f'<div id="notes">\n{links}</div>'


def render_repo(repo: RepoSpec) -> bytes:
    files = "".join(
        f'<a class="file" href="/repo/{repo.name}/file/{i}">file-{i}.txt</a>\n'
        for i in range(1, repo.file_count + 1))
    body = f"<h1>{repo.name}</h1>\n<div id=\"files\">\n{files}</div>\n"
    if repo.with_zip:
        body += f'<a id="zip" href="/repo/{repo.name}/archive.zip">download archive</a>\n'
    return _page(f"repository {repo.name}", body)


def render_slide(deck: DeckSpec, index: int) -> bytes:
    if index < deck.slide_count:
        nav = f'<a id="next" href="/deck/{deck.name}/slide/{index + 1}">next</a>'
    else:
        nav = '<a id="next" aria-disabled="true">next</a>'
    body = (f"<h1>{deck.name} — slide {index} of {deck.slide_count}</h1>\n"
            f"{nav}\n{_notes_panel(deck)}")
    return _page(f"{deck.name} slide {index}", body)


def render_deck_landing(deck: DeckSpec) -> bytes:
    if deck.scripted:
        script = f"""
<button id="next">next</button>
<div id="stage" data-slide="1" data-count="{deck.slide_count}"></div>
<script>
const stage = document.getElementById('stage');
const next = document.getElementById('next');
function load(i) {{
  fetch('/deck/{deck.name}/slide-data/' + i + '.json')
    .then(r => r.json()).then(d => {{ stage.textContent = d.caption; }});
  stage.dataset.slide = i;
  if (i >= {deck.slide_count}) {{ next.setAttribute('disabled', ''); }}
}}
next.addEventListener('click', () => load(parseInt(stage.dataset.slide) + 1));
load(1);
</script>"""
        body = f"<h1>{deck.name}</h1>\n{script}\n{_notes_panel(deck)}"
    else:
        body = (f"<h1>{deck.name}</h1>\n"
                f'<a id="open" href="/deck/{deck.name}/slide/1">open deck</a>\n'
                f"{_notes_panel(deck)}")
    return _page(f"deck {deck.name}", body)


def render_zip(repo: RepoSpec) -> bytes:
    buf = io.BytesIO()
    with zipfile.ZipFile(buf, "w", zipfile.ZIP_DEFLATED) as zf:
        for i in range(1, repo.file_count + 1):
            info = zipfile.ZipInfo(f"{repo.name}/file-{i}.txt", date_time=(2026, 1, 1, 0, 0, 0))
            zf.writestr(info, f"contents of file {i} in {repo.name}\n")
    return buf.getvalue()


def _routes(spec: PortalSpec) -> Dict[str, tuple]:
    routes: Dict[str, tuple] = {"/static/style.css": ("text/css", STYLE_CSS.encode())}
    for repo in spec.repos:
        routes[f"/repo/{repo.name}"] = ("text/html; charset=utf-8", render_repo(repo))
        for i in range(1, repo.file_count + 1):
            routes[f"/repo/{repo.name}/file/{i}"] = (
                "text/plain; charset=utf-8",
                f"contents of file {i} in {repo.name}\n".encode())
        if repo.with_zip:
            routes[f"/repo/{repo.name}/archive.zip"] = ("application/zip", render_zip(repo))
    for deck in spec.decks:
        routes[f"/deck/{deck.name}"] = ("text/html; charset=utf-8", render_deck_landing(deck))
        for i in range(1, deck.slide_count + 1):
            if deck.scripted:
                routes[f"/deck/{deck.name}/slide-data/{i}.json"] = (
                    "application/json",
                    json.dumps({"slide": i, "caption": f"{deck.name} slide {i}"}).encode())
            else:
                routes[f"/deck/{deck.name}/slide/{i}"] = (
                    "text/html; charset=utf-8", render_slide(deck, i))
        for i in range(1, deck.note_count + 1):
            routes[f"/deck/{deck.name}/note/{i}"] = (
                "text/plain; charset=utf-8",
                f"speaker note {i} for {deck.name}\n".encode())
    return routes


# ---------------------------------------------------------------------------
# server

class _Stats:
    def __init__(self):
        self.lock = threading.Lock()
        self.hits: Dict[str, int] = {}
        self.total = 0
        self.active = 0
        self.max_concurrent = 0

    def enter(self, path: str):
        with self.lock:
            self.hits[path] = self.hits.get(path, 0) + 1
            self.total += 1
            self.active += 1
            self.max_concurrent = max(self.max_concurrent, self.active)

    def leave(self):
        with self.lock:
            self.active -= 1

    def snapshot(self) -> Dict:
        with self.lock:
            return {"hits": dict(self.hits), "total": self.total,
                    "active": self.active, "max_concurrent": self.max_concurrent}


class PortalHandle:
    def __init__(self, spec: PortalSpec, server: ThreadingHTTPServer,
                 thread: threading.Thread, stats: _Stats,
                 cert_pem: Optional[bytes]):
        self.spec = spec
        self._server = server
        self._thread = thread
        self._stats = stats
        self.cert_pem = cert_pem
        self._cert_file: Optional[Path] = None
        host, port = server.server_address[:2]
        self.port = port
        scheme = "https" if spec.tls else "http"
        self.base_url = f"{scheme}://{host}:{port}"

    def url(self, path: str) -> str:
        return self.base_url + path

    def stats(self) -> Dict:
        return self._stats.snapshot()

    @property
    def cert_file(self) -> Optional[str]:
        """Certificate PEM on disk, for clients that verify by file path."""
        if self.cert_pem is None:
            return None
        if self._cert_file is None:
            handle = tempfile.NamedTemporaryFile(
                prefix="tracecap-portal-", suffix=".pem", delete=False)
            handle.write(self.cert_pem)
            handle.close()
            self._cert_file = Path(handle.name)
        return str(self._cert_file)

    def stop(self):
        self._server.shutdown()
        self._server.server_close()
        self._thread.join(timeout=5)
        if self._cert_file is not None:
            self._cert_file.unlink(missing_ok=True)


def serve(spec: PortalSpec, port: int = 0, host: str = "127.0.0.1") -> PortalHandle:
    """Start the portal; ``port=0`` picks an ephemeral port."""
    routes = _routes(spec)
    stats = _Stats()
    delay_s = spec.delay_ms / 1000.0

    class Handler(BaseHTTPRequestHandler):
        protocol_version = "HTTP/1.1"

        def log_message(self, *args):  # quiet
            pass

        def do_GET(self):
            path = self.path.split("?", 1)[0]
            if path == "/__stats":
                self._send(200, "application/json",
                           json.dumps(stats.snapshot()).encode())
                return
            stats.enter(path)
            try:
                if delay_s:
                    time.sleep(delay_s)
                hit = routes.get(path)
                if hit is None:
                    self._send(404, "text/plain; charset=utf-8", b"not found\n")
                else:
                    self._send(200, hit[0], hit[1])
            finally:
                stats.leave()

        def _send(self, status: int, ctype: str, body: bytes):
            self.send_response(status)
            self.send_header("Content-Type", ctype)
            self.send_header("Content-Length", str(len(body)))
            self.end_headers()
            self.wfile.write(body)

    class Server(ThreadingHTTPServer):
        daemon_threads = True
        request_queue_size = 128  # concurrent crawls overflow the default backlog

    try:
        server = Server((host, port), Handler)
    except OSError as exc:
        raise BindError(f"could not bind portal on {host}:{port}: {exc}") from exc

    cert_pem = None
    if spec.tls:
        ctx, cert_pem = self_signed_server_context(host)
        server.socket = ctx.wrap_socket(server.socket, server_side=True)

    thread = threading.Thread(target=server.serve_forever, name="fixture-portal", daemon=True)
    thread.start()
    return PortalHandle(spec, server, thread, stats, cert_pem)


# ---------------------------------------------------------------------------
# mock-driver description of the same site

def page_script(spec: PortalSpec, base_url: str) -> Dict:
    """Describe the portal for the mock driver.

    The same PortalSpec yields the served pages and this description, which
    is what lets the mock backend and a real browser pointed at the served
    portal produce identical inventories.
    """
    style = base_url + "/static/style.css"
    pages: Dict[str, Dict] = {}

    for repo in spec.repos:
        elements = [{"id": "files", "tag": "div"}]
        for i in range(1, repo.file_count + 1):
            elements.append({
                "tag": "a", "classes": ["file"], "parent": "files",
                "href": f"{base_url}/repo/{repo.name}/file/{i}",
            })
        if repo.with_zip:
            elements.append({
                "id": "zip", "tag": "a",
                "href": f"{base_url}/repo/{repo.name}/archive.zip",
            })
        pages[f"{base_url}/repo/{repo.name}"] = {"elements": elements, "assets": [style]}

    for deck in spec.decks:
        notes = [{"id": "notes", "tag": "div"}] + [
            {"tag": "a", "classes": ["note"], "parent": "notes",
             "href": f"{base_url}/deck/{deck.name}/note/{i}"}
            for i in range(1, deck.note_count + 1)
        ]
        landing_key = f"{base_url}/deck/{deck.name}"
        if deck.scripted:
            # One browser URL; pagination mutates state without navigation.
            for i in range(1, deck.slide_count + 1):
                key = landing_key if i == 1 else f"state:{deck.name}/{i}"
                page = {
                    "url": landing_key,
                    "elements": [{"id": "next", "tag": "button",
                                  "disabled": i >= deck.slide_count}] + notes,
                    "assets": [style, f"{base_url}/deck/{deck.name}/slide-data/1.json"]
                              if i == 1 else [],
                }
                if i < deck.slide_count:
                    page["transitions"] = {"next": {
                        "goto": f"state:{deck.name}/{i + 1}",
                        "fetches": [f"{base_url}/deck/{deck.name}/slide-data/{i + 1}.json"],
                    }}
                pages[key] = page
        else:
            pages[landing_key] = {
                "elements": [{"id": "open", "tag": "a",
                              "href": f"{base_url}/deck/{deck.name}/slide/1"}] + notes,
                "assets": [style],
            }
            for i in range(1, deck.slide_count + 1):
                nav = {"id": "next", "tag": "a"}
                if i < deck.slide_count:
                    nav["href"] = f"{base_url}/deck/{deck.name}/slide/{i + 1}"
                else:
                    nav["aria_disabled"] = True
                pages[f"{base_url}/deck/{deck.name}/slide/{i}"] = {
                    "elements": [nav] + notes, "assets": [style],
                }

    return {"pages": pages}
