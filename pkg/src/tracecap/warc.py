"""WARC/1.1 record model, writer, and reader.

Records are written with CRLF header blocks and sha1+base32 digests, plain or
gzip-per-record (each record an independently decompressible gzip member).
Plain-mode output round-trips byte-identically through the reader.
"""

from __future__ import annotations

import base64
import gzip
import hashlib
import io
import uuid
import zlib
from dataclasses import dataclass, field
from datetime import datetime, timezone
from enum import Enum
from pathlib import Path
from typing import BinaryIO, Dict, Iterator, List, Optional, Tuple

from .errors import CorruptRecord, InvalidRecord

WARC_VERSION = "WARC/1.1"
CRLF = b"\r\n"


class RecordType(str, Enum):
    WARCINFO = "warcinfo"
    REQUEST = "request"
    RESPONSE = "response"
    METADATA = "metadata"


def payload_digest(payload: bytes) -> str:
    """sha1 of the payload, base32 (RFC 4648, uppercase, unpadded)."""
    return "sha1:" + base64.b32encode(hashlib.sha1(payload).digest()).decode("ascii")


def new_record_id() -> str:
    return f"urn:uuid:{uuid.uuid4()}"


def warc_date(moment: Optional[datetime] = None) -> str:
    moment = moment or datetime.now(timezone.utc)
    return moment.astimezone(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


@dataclass
class WarcRecord:
    """One ISO-28500 record. ``block`` is the full record block; for
    request/response records that is a complete HTTP message."""

    record_type: RecordType
    record_id: str
    date: str
    content_type: str
    block: bytes
    target_uri: Optional[str] = None
    concurrent_to: Optional[str] = None
    block_digest: Optional[str] = None
    payload_digest: Optional[str] = None
    extra_headers: Dict[str, str] = field(default_factory=dict)

    def finalize_digests(self) -> "WarcRecord":
        """Fill block digest (and HTTP payload digest) from the block bytes."""
        self.block_digest = payload_digest(self.block)
        if self.record_type in (RecordType.REQUEST, RecordType.RESPONSE) \
                and self.payload_digest is None:
            self.payload_digest = payload_digest(http_payload(self.block))
        return self


def http_payload(block: bytes) -> bytes:
    """Body of an HTTP message block (bytes after the header terminator)."""
    sep = block.find(b"\r\n\r\n")
    return b"" if sep < 0 else block[sep + 4:]


def _header_lines(record: WarcRecord, content_length: int) -> bytes:
    lines = [
        WARC_VERSION,
        f"WARC-Type: {record.record_type.value}",
        f"WARC-Record-ID: <{record.record_id}>",
        f"WARC-Date: {record.date}",
    ]
    if record.target_uri is not None:
        lines.append(f"WARC-Target-URI: {record.target_uri}")
    if record.concurrent_to is not None:
        lines.append(f"WARC-Concurrent-To: <{record.concurrent_to}>")
    if record.block_digest is not None:
        lines.append(f"WARC-Block-Digest: {record.block_digest}")
    if record.payload_digest is not None:
        lines.append(f"WARC-Payload-Digest: {record.payload_digest}")
    lines.append(f"Content-Type: {record.content_type}")
    lines.append(f"Content-Length: {content_length}")
    for key in sorted(record.extra_headers):
        lines.append(f"{key}: {record.extra_headers[key]}")
    return "\r\n".join(lines).encode("utf-8") + CRLF + CRLF


class WarcWriter:
    """Append-only writer for one WARC file. Single-writer contract."""

    def __init__(self, path, gzip_records: bool = True):
        self.path = Path(path)
        self.gzip_records = gzip_records
        self._fh: Optional[BinaryIO] = open(self.path, "wb")
        self._offset = 0

    def write_record(self, record: WarcRecord) -> Dict[str, int]:
        """Append one record; returns its byte offset and on-disk length."""
        if self._fh is None:
            raise InvalidRecord("writer is closed")
        if record.block_digest is None:
            record.finalize_digests()
        elif record.block_digest != payload_digest(record.block):
            raise InvalidRecord(
                f"block digest {record.block_digest} does not match block contents")
        return self._append(_header_lines(record, len(record.block)),
                            [record.block], len(record.block))

    def write_record_streamed(self, record: WarcRecord, block_head: bytes,
                              body: BinaryIO, body_length: int) -> Dict[str, int]:
        """Append a record whose HTTP body streams from a spill file.

        ``record.block`` is ignored; digests must be precomputed by the
        caller since the body is not materialized here.
        """
        if self._fh is None:
            raise InvalidRecord("writer is closed")
        if record.block_digest is None:
            raise InvalidRecord("streamed records require a precomputed block digest")
        total = len(block_head) + body_length

        def chunks() -> Iterator[bytes]:
            yield block_head
            while True:
                chunk = body.read(1 << 16)
                if not chunk:
                    return
                yield chunk

        return self._append(_header_lines(record, total), chunks(), total)

    def _append(self, header: bytes, block_chunks, block_length: int) -> Dict[str, int]:
        offset = self._offset
        if self.gzip_records:
            buf = io.BytesIO()
            with gzip.GzipFile(fileobj=buf, mode="wb", mtime=0) as gz:
                gz.write(header)
                for chunk in block_chunks:
                    gz.write(chunk)
                gz.write(CRLF + CRLF)
            data = buf.getvalue()
            self._fh.write(data)
            length = len(data)
        else:
            self._fh.write(header)
            written = 0
            for chunk in block_chunks:
                self._fh.write(chunk)
                written += len(chunk)
            self._fh.write(CRLF + CRLF)
            length = len(header) + written + 4
        self._fh.flush()
        self._offset += length
        return {"offset": offset, "length": length}

    def close(self):
        if self._fh is not None:
            self._fh.close()
            self._fh = None

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


# ---------------------------------------------------------------------------
# reading

def _parse_record_bytes(data: bytes, offset: int) -> WarcRecord:
    """Parse one uncompressed record (without trailing CRLFCRLF)."""
    head_end = data.find(b"\r\n\r\n")
    if head_end < 0:
        raise CorruptRecord(offset, "missing header terminator")
    head = data[:head_end].decode("utf-8", errors="replace")
    lines = head.split("\r\n")
    version = lines[0]
    if version not in ("WARC/1.1", "WARC/1.0"):
        raise CorruptRecord(offset, f"unexpected version line {version!r}")
    headers: Dict[str, str] = {}
    for line in lines[1:]:
        if ":" not in line:
            raise CorruptRecord(offset, f"malformed header line {line!r}")
        key, value = line.split(":", 1)
        headers[key.strip()] = value.strip()

    known = {"WARC-Type", "WARC-Record-ID", "WARC-Date", "WARC-Target-URI",
             "WARC-Concurrent-To", "WARC-Block-Digest", "WARC-Payload-Digest",
             "Content-Type", "Content-Length"}
    try:
        length = int(headers["Content-Length"])
        record_type = RecordType(headers["WARC-Type"])
    except KeyError as exc:
        raise CorruptRecord(offset, f"missing mandatory header {exc}") from exc
    except ValueError as exc:
        raise CorruptRecord(offset, str(exc)) from exc

    block_start = head_end + 4
    block = data[block_start:block_start + length]
    if len(block) != length:
        raise CorruptRecord(offset, "truncated block")

    record = WarcRecord(
        record_type=record_type,
        record_id=headers.get("WARC-Record-ID", "").strip("<>"),
        date=headers.get("WARC-Date", ""),
        content_type=headers.get("Content-Type", ""),
        block=block,
        target_uri=headers.get("WARC-Target-URI"),
        concurrent_to=(headers.get("WARC-Concurrent-To") or None),
        block_digest=headers.get("WARC-Block-Digest"),
        payload_digest=headers.get("WARC-Payload-Digest"),
        extra_headers={k: v for k, v in headers.items() if k not in known},
    )
    if record.concurrent_to:
        record.concurrent_to = record.concurrent_to.strip("<>")
    if record.block_digest and record.block_digest != payload_digest(block):
        raise CorruptRecord(offset, "block digest mismatch")
    return record


def _iter_plain(data: bytes) -> Iterator[Tuple[WarcRecord, int, int]]:
    pos = 0
    while pos < len(data):
        head_end = data.find(b"\r\n\r\n", pos)
        if head_end < 0:
            raise CorruptRecord(pos, "missing header terminator")
        head = data[pos:head_end].decode("utf-8", errors="replace")
        length = None
        for line in head.split("\r\n"):
            if line.lower().startswith("content-length:"):
                try:
                    length = int(line.split(":", 1)[1].strip())
                except ValueError:
                    raise CorruptRecord(pos, "unreadable Content-Length") from None
        if length is None:
            raise CorruptRecord(pos, "missing Content-Length")
        end = head_end + 4 + length
        if data[end:end + 4] != CRLF + CRLF:
            raise CorruptRecord(pos, "truncated record (missing trailing CRLFs)")
        yield _parse_record_bytes(data[pos:end], pos), pos, end + 4 - pos
        pos = end + 4


def _iter_gzip(data: bytes, skip_corrupt: bool) -> Iterator[Tuple[WarcRecord, int, int]]:
    pos = 0
    while pos < len(data):
        decomp = zlib.decompressobj(wbits=31)
        try:
            plain = decomp.decompress(data[pos:])
            if not decomp.eof:
                raise CorruptRecord(pos, "truncated gzip member")
            consumed = len(data) - pos - len(decomp.unused_data)
            if not plain.endswith(CRLF + CRLF):
                raise CorruptRecord(pos, "record missing trailing CRLFs")
            record = _parse_record_bytes(plain[:-4], pos)
        except (zlib.error, CorruptRecord) as exc:
            if skip_corrupt:
                next_member = data.find(b"\x1f\x8b", pos + 2)
                if next_member < 0:
                    return
                pos = next_member
                continue
            if isinstance(exc, CorruptRecord):
                raise
            raise CorruptRecord(pos, f"gzip member unreadable: {exc}") from exc
        yield record, pos, consumed
        pos += consumed


def read_records(path, skip_corrupt: bool = False) -> Iterator[Tuple[WarcRecord, int, int]]:
    """Yield (record, offset, on-disk length) in file order.

    Handles plain and gzip-per-record files; block digests are verified
    against the stored bytes. A corrupt record raises CorruptRecord; with
    ``skip_corrupt`` (gzip mode only) iteration resumes at the next member.
    """
    data = Path(path).read_bytes()
    if data[:2] == b"\x1f\x8b":
        yield from _iter_gzip(data, skip_corrupt)
    else:
        yield from _iter_plain(data)


def read_record_at(path, offset: int, length: int) -> WarcRecord:
    """Parse exactly one record located by a (offset, length) index entry."""
    with open(path, "rb") as fh:
        fh.seek(offset)
        data = fh.read(length)
    if data[:2] == b"\x1f\x8b":
        data = gzip.decompress(data)
    if not data.endswith(CRLF + CRLF):
        raise CorruptRecord(offset, "record missing trailing CRLFs")
    return _parse_record_bytes(data[:-4], offset)


def serialize_record(record: WarcRecord) -> bytes:
    """Plain-mode byte form of a record (used by round-trip checks)."""
    return _header_lines(record, len(record.block)) + record.block + CRLF + CRLF
