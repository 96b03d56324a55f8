"""Capturing forward proxy: the browser's whole view of the web goes through
here and every exchange is persisted to WARC.

HTTPS is intercepted by answering CONNECT with a tunnel terminated against a
per-host leaf certificate signed by the session CA. Both legs speak
HTTP/1.1; upstream responses are re-serialized with an exact Content-Length,
and the bytes delivered to the browser are byte-identical to the bytes stored
in the response record's block. The proxy also exposes the network-idle
signal that plan execution uses to decide when an interaction has settled.
"""

from __future__ import annotations

import base64
import hashlib
import http.client
import io
import logging
import socket
import tempfile
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Dict, List, Optional, Set, Tuple
from urllib.parse import urlsplit

from .errors import BindError
from .tlsca import SessionCa, trust_context
from .warc import RecordType, WarcRecord, WarcWriter, new_record_id, warc_date

logger = logging.getLogger(__name__)

SPILL_THRESHOLD = 8 * 1024 * 1024  # response bodies beyond this stay on disk
SOFTWARE = "tracecap/0.1.0"

_HOP_BY_HOP = {
    "connection", "keep-alive", "proxy-authenticate", "proxy-authorization",
    "proxy-connection", "te", "trailers", "transfer-encoding", "upgrade",
}


@dataclass
class ExchangeSummary:
    target_uri: Optional[str]
    method: str
    status: Optional[int]
    payload_digest: Optional[str]
    bytes: int
    started: float
    finished: Optional[float]
    disposition: str  # recorded | duplicate-skipped | connect-tunnel | error
    detail: str = ""

    def to_dict(self) -> Dict[str, object]:
        return {
            "target_uri": self.target_uri, "method": self.method,
            "status": self.status, "payload_digest": self.payload_digest,
            "bytes": self.bytes, "started": self.started, "finished": self.finished,
            "disposition": self.disposition, "detail": self.detail,
        }


@dataclass
class CaptureLog:
    entries: List[ExchangeSummary] = field(default_factory=list)
    warc_path: Optional[Path] = None

    def recorded(self) -> List[ExchangeSummary]:
        return [e for e in self.entries if e.disposition == "recorded" and e.method != "WARCINFO"]


@dataclass
class IdleState:
    idle: bool
    in_flight: int
    since_ms: int


class CaptureProxy:
    """One live proxy instance; see ``start_proxy``. Thread-safe throughout."""

    def __init__(self, port: int = 0, host: str = "127.0.0.1",
                 warc_output: Optional[Path] = None,
                 ca: Optional[SessionCa] = None,
                 upstream_ca_pem: Optional[bytes] = None,
                 upstream_timeout: float = 30.0,
                 drain_timeout: float = 30.0,
                 clock: Optional[Callable[[], float]] = None):
        self.host = host
        self.requested_port = port
        self.warc_output = Path(warc_output) if warc_output else None
        self.ca = ca or SessionCa()
        self.upstream_timeout = upstream_timeout
        self.drain_timeout = drain_timeout
        self._clock = clock or time.monotonic
        # Upstream verification is off by default: a capture proxy archives
        # whatever the origin serves, including hosts with broken chains.
        self._upstream_ctx = trust_context(upstream_ca_pem)

        self._lock = threading.Lock()
        self._in_flight = 0
        self._last_activity = self._clock()
        self._entries: List[ExchangeSummary] = []
        self._seen: Set[Tuple[str, str]] = set()
        self._writer: Optional[WarcWriter] = None
        self._writer_lock = threading.Lock()
        self._records_written = 0
        self._listener: Optional[socket.socket] = None
        self._accept_thread: Optional[threading.Thread] = None
        self._stopped = False
        self._final_log: Optional[CaptureLog] = None
        self.port: Optional[int] = None

    # -- lifecycle ---------------------------------------------------------

    def start(self) -> "CaptureProxy":
        try:
            listener = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
            listener.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
            listener.bind((self.host, self.requested_port))
            listener.listen(64)
        except OSError as exc:
            raise BindError(f"could not bind proxy on {self.host}:{self.requested_port}: {exc}") from exc
        self._listener = listener
        self.port = listener.getsockname()[1]

        if self.warc_output is not None:
            gzip_records = str(self.warc_output).endswith(".gz")
            self._writer = WarcWriter(self.warc_output, gzip_records=gzip_records)
            self._write_warcinfo()

        self._accept_thread = threading.Thread(
            target=self._accept_loop, name=f"proxy-accept-{self.port}", daemon=True)
        self._accept_thread.start()
        return self

    @property
    def endpoint(self) -> str:
        return f"{self.host}:{self.port}"

    @property
    def ca_certificate(self) -> bytes:
        return self.ca.certificate_pem

    @property
    def in_flight(self) -> int:
        with self._lock:
            return self._in_flight

    @property
    def capture_log(self) -> List[ExchangeSummary]:
        with self._lock:
            return list(self._entries)

    def idle_state(self, quiet_ms: int) -> IdleState:
        """Idle iff nothing is in flight and the line has been silent for
        at least quiet_ms."""
        with self._lock:
            now = self._clock()
            since_ms = int((now - self._last_activity) * 1000)
            idle = self._in_flight == 0 and since_ms >= quiet_ms
            return IdleState(idle=idle, in_flight=self._in_flight, since_ms=since_ms)

    def stop(self) -> CaptureLog:
        """Close the listener, drain open exchanges (bounded), finalize the
        WARC. Idempotent: repeated calls return the same log."""
        if self._final_log is not None:
            return self._final_log
        self._stopped = True
        if self._listener is not None:
            try:
                self._listener.close()
            except OSError:
                pass
        deadline = time.monotonic() + self.drain_timeout
        while time.monotonic() < deadline:
            with self._lock:
                if self._in_flight == 0:
                    break
            time.sleep(0.02)
        with self._lock:
            leftover = self._in_flight
            if leftover:
                now = time.time()
                self._entries.append(ExchangeSummary(
                    target_uri=None, method="DRAIN", status=None, payload_digest=None,
                    bytes=0, started=now, finished=now, disposition="error",
                    detail=f"{leftover} exchange(s) still open at drain timeout"))
        with self._writer_lock:
            if self._writer is not None:
                self._writer.close()
        self._final_log = CaptureLog(entries=self.capture_log, warc_path=self.warc_output)
        return self._final_log

    # -- bookkeeping -------------------------------------------------------

    def _exchange_started(self):
        with self._lock:
            self._in_flight += 1
            self._last_activity = self._clock()

    def _exchange_finished(self):
        with self._lock:
            self._in_flight -= 1
            self._last_activity = self._clock()

    def _log(self, entry: ExchangeSummary):
        with self._lock:
            self._entries.append(entry)

    def _write_warcinfo(self):
        fields = (f"software: {SOFTWARE}\r\n"
                  f"format: WARC File Format 1.1\r\n"
                  f"capture-proxy: {self.host}:{self.port}\r\n").encode()
        record = WarcRecord(
            record_type=RecordType.WARCINFO, record_id=new_record_id(),
            date=warc_date(), content_type="application/warc-fields",
            block=fields,
        ).finalize_digests()
        with self._writer_lock:
            self._writer.write_record(record)
        now = time.time()
        self._log(ExchangeSummary(
            target_uri=None, method="WARCINFO", status=None, payload_digest=None,
            bytes=len(fields), started=now, finished=now, disposition="recorded"))

    # -- connection handling -----------------------------------------------

    def _accept_loop(self):
        while not self._stopped:
            try:
                conn, _addr = self._listener.accept()
            except OSError:
                return
            threading.Thread(target=self._handle_connection, args=(conn,),
                             daemon=True).start()

    def _handle_connection(self, conn: socket.socket):
        conn.settimeout(self.upstream_timeout + 30)
        try:
            reader = conn.makefile("rb")
            self._serve_requests(conn, reader, scheme="http", tunnel_host=None)
        except (OSError, ValueError):
            pass
        finally:
            try:
                conn.close()
            except OSError:
                pass

    def _serve_requests(self, conn: socket.socket, reader: io.BufferedReader,
                        scheme: str, tunnel_host: Optional[Tuple[str, int]]):
        while not self._stopped:
            request_line = reader.readline()
            if not request_line:
                return
            try:
                method, target, version = request_line.decode("latin-1").strip().split(" ", 2)
            except ValueError:
                conn.sendall(b"HTTP/1.1 400 Bad Request\r\nContent-Length: 0\r\n\r\n")
                return
            header_pairs = _read_headers(reader)

            if method.upper() == "CONNECT":
                self._handle_connect(conn, target)
                return  # tunnel loop took over (or failed); either way done here

            body = _read_body(reader, header_pairs)
            close_after = _wants_close(version, header_pairs)
            try:
                self._proxy_exchange(conn, method, target, header_pairs, body,
                                     scheme, tunnel_host)
            except BrokenPipeError:
                return
            if close_after:
                return

    def _handle_connect(self, conn: socket.socket, target: str):
        host, _, port_text = target.partition(":")
        port = int(port_text or "443")
        now = time.time()
        self._log(ExchangeSummary(
            target_uri=f"{host}:{port}", method="CONNECT", status=200,
            payload_digest=None, bytes=0, started=now, finished=now,
            disposition="connect-tunnel"))
        conn.sendall(b"HTTP/1.1 200 Connection Established\r\n\r\n")
        try:
            tls = self.ca.server_context(host).wrap_socket(conn, server_side=True)
        except (OSError, ValueError) as exc:
            logger.debug("TLS handshake with client failed for %s: %s", host, exc)
            return
        try:
            reader = tls.makefile("rb")
            self._serve_requests(tls, reader, scheme="https", tunnel_host=(host, port))
        finally:
            try:
                tls.close()
            except OSError:
                pass

    # -- a single exchange ---------------------------------------------------

    def _proxy_exchange(self, conn, method: str, target: str,
                        header_pairs: List[Tuple[str, str]], body: bytes,
                        scheme: str, tunnel_host: Optional[Tuple[str, int]]):
        started = time.time()
        if tunnel_host is None:
            # absolute-form request straight at the proxy
            parts = urlsplit(target)
            scheme = parts.scheme or "http"
            host = parts.hostname or ""
            port = parts.port or (443 if scheme == "https" else 80)
            path = parts.path or "/"
            if parts.query:
                path += "?" + parts.query
        else:
            host, port = tunnel_host
            path = target
        uri = _target_uri(scheme, host, port, path)

        self._exchange_started()
        try:
            outcome = self._fetch_and_relay(conn, method, scheme, host, port,
                                            path, uri, header_pairs, body, started)
        except Exception as exc:
            logger.debug("exchange %s failed: %s", uri, exc)
            self._log(ExchangeSummary(
                target_uri=uri, method=method, status=502, payload_digest=None,
                bytes=0, started=started, finished=time.time(),
                disposition="error", detail=str(exc)))
            try:
                msg = b"upstream fetch failed"
                conn.sendall(b"HTTP/1.1 502 Bad Gateway\r\nContent-Type: text/plain\r\n"
                             + f"Content-Length: {len(msg)}\r\n\r\n".encode() + msg)
            except OSError:
                pass
            return
        finally:
            self._exchange_finished()
        self._log(outcome)

    def _fetch_and_relay(self, conn, method, scheme, host, port, path, uri,
                         header_pairs, body, started) -> ExchangeSummary:
        fwd_headers = {}
        for key, value in header_pairs:
            if key.lower() in _HOP_BY_HOP or key.lower() == "content-length":
                continue
            fwd_headers[key] = value
        fwd_headers.setdefault("Host", _host_header(host, port, scheme))
        if body:
            fwd_headers["Content-Length"] = str(len(body))

        if scheme == "https":
            upstream = http.client.HTTPSConnection(
                host, port, timeout=self.upstream_timeout, context=self._upstream_ctx)
        else:
            upstream = http.client.HTTPConnection(host, port, timeout=self.upstream_timeout)
        try:
            upstream.request(method, path, body=body or None, headers=fwd_headers)
            resp = upstream.getresponse()

            payload_sha = hashlib.sha1()
            spool = tempfile.SpooledTemporaryFile(max_size=SPILL_THRESHOLD)
            total = 0
            while True:
                chunk = resp.read(1 << 16)
                if not chunk:
                    break
                payload_sha.update(chunk)
                spool.write(chunk)
                total += len(chunk)

            head_lines = [f"HTTP/1.1 {resp.status} {resp.reason}"]
            for key, value in resp.getheaders():
                if key.lower() in _HOP_BY_HOP or key.lower() == "content-length":
                    continue
                head_lines.append(f"{key}: {value}")
            head_lines.append(f"Content-Length: {total}")
            head = ("\r\n".join(head_lines) + "\r\n\r\n").encode("latin-1")

            digest = "sha1:" + _b32(payload_sha.digest())
            duplicate = False
            if method.upper() == "GET":
                with self._lock:
                    duplicate = (uri, digest) in self._seen
                    self._seen.add((uri, digest))

            if not duplicate and self._writer is not None:
                self._store_records(method, uri, path, fwd_headers, body,
                                    head, spool, total, digest)

            conn.sendall(head)
            spool.seek(0)
            while True:
                chunk = spool.read(1 << 16)
                if not chunk:
                    break
                conn.sendall(chunk)
            spool.close()

            return ExchangeSummary(
                target_uri=uri, method=method, status=resp.status,
                payload_digest=digest, bytes=total, started=started,
                finished=time.time(),
                disposition="duplicate-skipped" if duplicate else "recorded")
        finally:
            upstream.close()

    def _store_records(self, method, uri, path, fwd_headers, body,
                       head: bytes, spool, body_length: int, digest: str):
        date = warc_date()
        response_id = new_record_id()

        block_sha = hashlib.sha1(head)
        spool.seek(0)
        while True:
            chunk = spool.read(1 << 16)
            if not chunk:
                break
            block_sha.update(chunk)

        response = WarcRecord(
            record_type=RecordType.RESPONSE, record_id=response_id, date=date,
            content_type="application/http;msgtype=response", target_uri=uri,
            block=b"", block_digest="sha1:" + _b32(block_sha.digest()),
            payload_digest=digest,
        )
        request_lines = [f"{method} {path} HTTP/1.1"]
        request_lines += [f"{k}: {v}" for k, v in fwd_headers.items()]
        request_block = ("\r\n".join(request_lines) + "\r\n\r\n").encode("latin-1") + body
        request = WarcRecord(
            record_type=RecordType.REQUEST, record_id=new_record_id(), date=date,
            content_type="application/http;msgtype=request", target_uri=uri,
            concurrent_to=response_id, block=request_block,
        ).finalize_digests()

        spool.seek(0)
        with self._writer_lock:
            self._writer.write_record_streamed(response, head, spool, body_length)
            self._writer.write_record(request)
            self._records_written += 2


def _b32(digest: bytes) -> str:
    return base64.b32encode(digest).decode("ascii")


def _target_uri(scheme: str, host: str, port: int, path: str) -> str:
    default = 443 if scheme == "https" else 80
    authority = host if port == default else f"{host}:{port}"
    return f"{scheme}://{authority}{path}"


def _host_header(host: str, port: int, scheme: str) -> str:
    default = 443 if scheme == "https" else 80
    return host if port == default else f"{host}:{port}"


def _read_headers(reader) -> List[Tuple[str, str]]:
    pairs: List[Tuple[str, str]] = []
    while True:
        line = reader.readline()
        if line in (b"\r\n", b"\n", b""):
            return pairs
        text = line.decode("latin-1").rstrip("\r\n")
        if ":" not in text:
            continue
        key, value = text.split(":", 1)
        pairs.append((key.strip(), value.strip()))


def _header(pairs: List[Tuple[str, str]], name: str) -> Optional[str]:
    for key, value in pairs:
        if key.lower() == name.lower():
            return value
    return None


def _read_body(reader, header_pairs) -> bytes:
    encoding = (_header(header_pairs, "Transfer-Encoding") or "").lower()
    if "chunked" in encoding:
        chunks = []
        while True:
            size_line = reader.readline().strip()
            size = int(size_line.split(b";")[0], 16)
            if size == 0:
                reader.readline()  # trailing CRLF after last-chunk
                return b"".join(chunks)
            chunks.append(reader.read(size))
            reader.readline()
    length = int(_header(header_pairs, "Content-Length") or 0)
    return reader.read(length) if length else b""


def _wants_close(version: str, header_pairs) -> bool:
    connection = (_header(header_pairs, "Connection") or "").lower()
    if "close" in connection:
        return True
    return version.upper() == "HTTP/1.0" and "keep-alive" not in connection


def start_proxy(port: int = 0, warc_output=None, **kwargs) -> CaptureProxy:
    """Start a capture proxy. ``warc_output=None`` runs in discard mode:
    exchanges are relayed and counted for the idle signal but nothing is
    written (used for live inventory runs)."""
    return CaptureProxy(port=port, warc_output=warc_output, **kwargs).start()
