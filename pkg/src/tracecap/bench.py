"""Capture overhead benchmarking.

The baseline is a deliberately dumb concurrent GET crawler: it fetches a
known URI list with browser-like headers and nothing else (no rendering, no
sub-resource discovery), so its runtime is the minimal time needed to fetch
the same bytes. The overhead report is the per-resource delta between
trace-driven capture time and that baseline.
"""

from __future__ import annotations

import csv
import io
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

import requests

from .errors import LengthMismatch
from .warc import RecordType, read_records

DEFAULT_WORKERS = 16

BROWSER_HEADERS = {
    "User-Agent": ("Mozilla/5.0 (X11; Linux x86_64) AppleWebKit/537.36 "
                   "(KHTML, like Gecko) Chrome/119.0.0.0 Safari/537.36"),
    "Accept": ("text/html,application/xhtml+xml,application/xml;q=0.9,"
               "image/avif,image/webp,*/*;q=0.8"),
    "Accept-Language": "en-US,en;q=0.9",
}


def extract_uris(warc_path) -> List[str]:
    """Distinct response-record target URIs, in file order."""
    seen = set()
    ordered: List[str] = []
    for record, _offset, _length in read_records(warc_path):
        if record.record_type is not RecordType.RESPONSE or not record.target_uri:
            continue
        if record.target_uri not in seen:
            seen.add(record.target_uri)
            ordered.append(record.target_uri)
    return ordered


@dataclass
class FetchOutcome:
    uri: str
    status: Optional[int]
    bytes: int
    ms: int
    error: Optional[str] = None


@dataclass
class CrawlTiming:
    uris: int
    workers: int
    total_ms: int
    outcomes: List[FetchOutcome] = field(default_factory=list)

    def to_dict(self) -> Dict[str, object]:
        return {
            "uris": self.uris, "workers": self.workers, "total_ms": self.total_ms,
            "outcomes": [
                {"uri": o.uri, "status": o.status, "bytes": o.bytes,
                 "ms": o.ms, "error": o.error}
                for o in self.outcomes
            ],
        }


def baseline_crawl(uris: Sequence[str], workers: int = DEFAULT_WORKERS,
                   timeout_ms: int = 30000, user_agent: Optional[str] = None,
                   verify=True) -> CrawlTiming:
    """Plain GET of every URI exactly once through a bounded worker pool.

    Per-URI failures land in the outcomes, never abort the crawl. Redirects
    are followed up to 5 hops.
    """
    if workers < 1:
        raise ValueError("workers must be >= 1")
    headers = dict(BROWSER_HEADERS)
    if user_agent:
        headers["User-Agent"] = user_agent

    def fetch(uri: str) -> FetchOutcome:
        started = time.monotonic()
        try:
            with requests.Session() as session:
                session.max_redirects = 5
                response = session.get(uri, headers=headers,
                                       timeout=timeout_ms / 1000.0, verify=verify)
                size = len(response.content)
                return FetchOutcome(uri=uri, status=response.status_code, bytes=size,
                                    ms=int((time.monotonic() - started) * 1000))
        except requests.RequestException as exc:
            return FetchOutcome(uri=uri, status=None, bytes=0,
                                ms=int((time.monotonic() - started) * 1000),
                                error=str(exc))

    started = time.monotonic()
    if uris:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(fetch, uris))
    else:
        outcomes = []
    total_ms = int((time.monotonic() - started) * 1000)
    return CrawlTiming(uris=len(uris), workers=workers, total_ms=total_ms,
                       outcomes=outcomes)


@dataclass
class OverheadReport:
    resources: List[str]
    tracer_ms: List[int]
    baseline_ms: List[int]
    deltas_ms: List[int]
    mean_delta_ms: float
    min_delta_ms: int
    max_delta_ms: int
    slowdown: float  # total tracer time / total baseline time

    def to_dict(self) -> Dict[str, object]:
        return {
            "resources": self.resources,
            "tracer_ms": self.tracer_ms,
            "baseline_ms": self.baseline_ms,
            "deltas_ms": self.deltas_ms,
            "mean_delta_ms": self.mean_delta_ms,
            "min_delta_ms": self.min_delta_ms,
            "max_delta_ms": self.max_delta_ms,
            "slowdown": self.slowdown,
        }

    def to_csv(self) -> str:
        """Plot-ready distribution: one row per resource."""
        buf = io.StringIO()
        writer = csv.writer(buf)
        writer.writerow(["resource_url", "tracer_ms", "baseline_ms", "delta_ms"])
        for row in zip(self.resources, self.tracer_ms, self.baseline_ms, self.deltas_ms):
            writer.writerow(row)
        return buf.getvalue()


def _total_ms(item) -> int:
    if isinstance(item, (int, float)):
        return int(item)
    return int(item.total_ms)  # CaptureResult or CrawlTiming


def overhead_report(tracer: Sequence, baseline: Sequence,
                    resources: Optional[Sequence[str]] = None) -> OverheadReport:
    """Per-resource deltas between capture and baseline crawl runtimes.

    Accepts CaptureResult/CrawlTiming objects or plain millisecond values;
    the lists must be aligned by resource. The slowdown factor is the ratio
    of total runtimes and requires a nonzero baseline.
    """
    if len(tracer) != len(baseline):
        raise LengthMismatch(
            f"{len(tracer)} capture timings vs {len(baseline)} baseline timings")
    if resources is not None and len(resources) != len(tracer):
        raise LengthMismatch("resource list not aligned with timings")
    tracer_ms = [_total_ms(t) for t in tracer]
    baseline_ms = [_total_ms(b) for b in baseline]
    if resources is None:
        resources = [getattr(t, "target_url", f"resource-{i}")
                     for i, t in enumerate(tracer)]
    deltas = [t - b for t, b in zip(tracer_ms, baseline_ms)]
    baseline_total = sum(baseline_ms)
    if baseline_total <= 0:
        raise ValueError("slowdown undefined: baseline total is zero")
    return OverheadReport(
        resources=list(resources),
        tracer_ms=tracer_ms,
        baseline_ms=baseline_ms,
        deltas_ms=deltas,
        mean_delta_ms=sum(deltas) / len(deltas) if deltas else 0.0,
        min_delta_ms=min(deltas) if deltas else 0,
        max_delta_ms=max(deltas) if deltas else 0,
        slowdown=sum(tracer_ms) / baseline_total,
    )
