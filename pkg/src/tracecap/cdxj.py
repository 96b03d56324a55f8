"""CDXJ index generation: one line per response record, sorted for lookup.

Line format: ``<SURT key> <14-digit timestamp> <JSON payload>`` where the
payload locates the record via (filename, offset, length).
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Iterable, List
from urllib.parse import parse_qsl, urlencode, urlsplit

from .errors import CorruptRecord
from .warc import RecordType, http_payload, payload_digest, read_record_at, read_records


@dataclass(frozen=True)
class CdxjLine:
    key: str
    timestamp: str
    fields: Dict[str, object]

    def render(self) -> str:
        return f"{self.key} {self.timestamp} {json.dumps(self.fields, sort_keys=True)}"


def surt_key(url: str) -> str:
    """Sort-friendly URI key: reversed lowercase host, path, sorted query.

    ``https://www.Example.com/A/b?z=1&a=2`` -> ``com,example,www)/A/b?a=2&z=1``.
    Default ports are dropped; the scheme is not part of the key.
    """
    parts = urlsplit(url)
    host = (parts.hostname or "").lower()
    key = ",".join(reversed(host.split(".")))
    port = parts.port
    if port and port not in (80, 443):
        key += f":{port}"
    key += ")" + (parts.path or "/")
    if parts.query:
        pairs = sorted(parse_qsl(parts.query, keep_blank_values=True))
        key += "?" + urlencode(pairs)
    return key


def _cdxj_timestamp(warc_date: str) -> str:
    digits = "".join(c for c in warc_date if c.isdigit())
    return digits[:14].ljust(14, "0")


def _http_status_and_mime(block: bytes) -> tuple:
    head = block.split(b"\r\n\r\n", 1)[0].decode("latin-1", errors="replace")
    lines = head.split("\r\n")
    status = 0
    pieces = lines[0].split(" ", 2)
    if len(pieces) >= 2 and pieces[1].isdigit():
        status = int(pieces[1])
    mime = "unk"
    for line in lines[1:]:
        if line.lower().startswith("content-type:"):
            mime = line.split(":", 1)[1].split(";")[0].strip()
            break
    return status, mime


def build_cdxj(warc_path) -> List[CdxjLine]:
    """Index every response record of a WARC file, sorted by (key, timestamp).

    Each produced (offset, length) is verified to resolve back to exactly the
    indexed record before the index is returned.
    """
    warc_path = Path(warc_path)
    lines: List[CdxjLine] = []
    for record, offset, length in read_records(warc_path):
        if record.record_type is not RecordType.RESPONSE or not record.target_uri:
            continue
        status, mime = _http_status_and_mime(record.block)
        digest = record.payload_digest or payload_digest(http_payload(record.block))
        lines.append(CdxjLine(
            key=surt_key(record.target_uri),
            timestamp=_cdxj_timestamp(record.date),
            fields={
                "url": record.target_uri,
                "mime": mime,
                "status": status,
                "digest": digest.split(":", 1)[-1],
                "length": length,
                "offset": offset,
                "filename": warc_path.name,
            },
        ))
        check = read_record_at(warc_path, offset, length)
        if check.record_id != record.record_id:
            raise CorruptRecord(offset, "index entry does not resolve to its record")
    lines.sort(key=lambda ln: (ln.key, ln.timestamp))
    return lines


def write_cdxj(lines: Iterable[CdxjLine], path) -> None:
    text = "".join(line.render() + "\n" for line in lines)
    Path(path).write_text(text, encoding="utf-8")


def read_cdxj(path) -> List[CdxjLine]:
    lines: List[CdxjLine] = []
    for raw in Path(path).read_text(encoding="utf-8").splitlines():
        if not raw.strip():
            continue
        key, timestamp, payload = raw.split(" ", 2)
        lines.append(CdxjLine(key=key, timestamp=timestamp, fields=json.loads(payload)))
    return lines
