"""Archival quality measurement.

The expected URI inventory comes from driving the live resource with its
trace (no WARC written); the captured inventory comes from reading a WARC.
Comparing the two yields per-resource availability ratios, aggregated into a
threshold table: for each cutoff x, the percentage of resources whose ratio
meets it.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence, Set
from urllib.parse import urlsplit, urlunsplit

from .compiler import DEFAULT_CATEGORY, compile_trace
from .driver import SessionConfig, open_session
from .errors import EmptyInput, TraceMismatch
from .proxy import start_proxy
from .trace import Trace, match_url
from .warc import RecordType, read_records

logger = logging.getLogger(__name__)

THRESHOLDS = tuple(range(0, 101, 10))
_EPS = 1e-9


# ---------------------------------------------------------------------------
# URI normalization

def _remove_dot_segments(path: str) -> str:
    remaining = path
    output: List[str] = []
    while remaining:
        if remaining.startswith("../"):
            remaining = remaining[3:]
        elif remaining.startswith("./"):
            remaining = remaining[2:]
        elif remaining.startswith("/./"):
            remaining = "/" + remaining[3:]
        elif remaining == "/.":
            remaining = "/"
        elif remaining.startswith("/../"):
            remaining = "/" + remaining[4:]
            if output:
                output.pop()
        elif remaining == "/..":
            remaining = "/"
            if output:
                output.pop()
        elif remaining in (".", ".."):
            remaining = ""
        else:
            start = 1 if remaining.startswith("/") else 0
            cut = remaining.find("/", start)
            if cut < 0:
                output.append(remaining)
                remaining = ""
            else:
                output.append(remaining[:cut])
                remaining = remaining[cut:]
    return "".join(output)


def normalize_uri(uri: str) -> str:
    """Equality form for URI comparison: lowercase scheme/host, fragment
    stripped, dot-segments resolved; the query survives untouched."""
    parts = urlsplit(uri)
    host = parts.netloc.lower()
    path = _remove_dot_segments(parts.path) if parts.path else parts.path
    return urlunsplit((parts.scheme.lower(), host, path, parts.query, ""))


# ---------------------------------------------------------------------------
# inventories

@dataclass
class UriInventory:
    """URIs of interest for one resource, bucketed by curatorial category.

    The resource's own URI is never part of its inventory. ``partial`` marks
    inventories where optional steps were skipped.
    """

    resource_url: str
    categories: Dict[str, Set[str]] = field(default_factory=dict)
    partial: bool = False

    @property
    def total(self) -> int:
        return sum(len(s) for s in self.categories.values())

    def to_dict(self) -> Dict[str, object]:
        return {
            "resource_url": self.resource_url,
            "categories": {k: sorted(v) for k, v in sorted(self.categories.items())},
            "total": self.total,
            "partial": self.partial,
        }

    @classmethod
    def from_dict(cls, doc: Dict) -> "UriInventory":
        return cls(
            resource_url=doc["resource_url"],
            categories={k: set(v) for k, v in doc.get("categories", {}).items()},
            partial=doc.get("partial", False),
        )


def build_inventory(resource_url: str, trace: Trace,
                    entries: Iterable, partial: bool) -> UriInventory:
    """Assemble an inventory from recorded (category, uri) entries.

    Every category the trace declares appears, even when empty: a skipped
    optional action yields an empty set, not a missing key.
    """
    categories: Dict[str, Set[str]] = {}
    labels = set(trace.categories.values())
    if len(trace.categories) < len(trace.actions):
        labels.add(DEFAULT_CATEGORY)
    for label in labels:
        categories[label] = set()
    own = normalize_uri(resource_url)
    for entry in entries:
        if normalize_uri(entry.uri) == own:
            continue
        categories.setdefault(entry.category, set()).add(entry.uri)
    return UriInventory(resource_url=resource_url, categories=categories, partial=partial)


def live_inventory(url: str, trace: Trace, config: SessionConfig) -> UriInventory:
    """Drive the live resource with its trace and collect the URIs the
    curatorial decisions expect; nothing is archived (discard proxy)."""
    if not match_url(trace.url_pattern, url):
        raise TraceMismatch(f"trace {trace.id} does not apply to {url}")
    proxy = start_proxy(warc_output=None)
    session = None
    try:
        session = open_session(SessionConfig(
            backend=config.backend,
            proxy_endpoint=proxy.endpoint,
            user_agent=config.user_agent,
            page_script=config.page_script,
            webdriver_endpoint=config.webdriver_endpoint,
            proxy_ca_pem=proxy.ca_certificate,
            idle_probe=proxy.idle_state,
            extra_capabilities=config.extra_capabilities,
        ))
        outcomes = session.execute_plan(compile_trace(trace), url, retry_step=True)
    finally:
        report = session.close() if session else None
        proxy.stop()
    partial = any(o.status == "skipped" for o in outcomes)
    return build_inventory(url, trace, report.inventory, partial)


def warc_inventory(warc_path, statuses: Optional[Set[int]] = None) -> Set[str]:
    """Distinct target URIs of response records whose status passes the
    filter (default: 200 only)."""
    allowed = {200} if statuses is None else set(statuses)
    uris: Set[str] = set()
    for record, _offset, _length in read_records(warc_path):
        if record.record_type is not RecordType.RESPONSE or not record.target_uri:
            continue
        status_line = record.block.split(b"\r\n", 1)[0].decode("latin-1", errors="replace")
        pieces = status_line.split(" ")
        status = int(pieces[1]) if len(pieces) > 1 and pieces[1].isdigit() else 0
        if status in allowed:
            uris.add(record.target_uri)
    return uris


# ---------------------------------------------------------------------------
# comparison

@dataclass
class CategoryQuality:
    expected: int
    captured: int
    ratio: float


@dataclass
class ResourceQuality:
    resource_url: str
    categories: Dict[str, CategoryQuality]
    overall: float

    def to_dict(self) -> Dict[str, object]:
        return {
            "resource_url": self.resource_url,
            "categories": {
                k: {"expected": v.expected, "captured": v.captured, "ratio": v.ratio}
                for k, v in sorted(self.categories.items())
            },
            "overall": self.overall,
        }

    @classmethod
    def from_dict(cls, doc: Dict) -> "ResourceQuality":
        return cls(
            resource_url=doc["resource_url"],
            categories={k: CategoryQuality(v["expected"], v["captured"], v["ratio"])
                        for k, v in doc.get("categories", {}).items()},
            overall=doc["overall"],
        )


def compare(expected: UriInventory, captured: Set[str]) -> ResourceQuality:
    """Availability of the expected URIs within the captured set.

    Captured counts only the intersection, so ratios live in [0, 1]; an
    empty expectation is trivially satisfied (ratio 1).
    """
    captured_norm = {normalize_uri(u) for u in captured}
    categories: Dict[str, CategoryQuality] = {}
    expected_total = 0
    hit_total = 0
    for label, uris in expected.categories.items():
        wanted = {normalize_uri(u) for u in uris}
        hits = len(wanted & captured_norm)
        ratio = hits / len(wanted) if wanted else 1.0
        categories[label] = CategoryQuality(expected=len(wanted), captured=hits, ratio=ratio)
        expected_total += len(wanted)
        hit_total += hits
    overall = hit_total / expected_total if expected_total else 1.0
    return ResourceQuality(resource_url=expected.resource_url,
                           categories=categories, overall=overall)


# ---------------------------------------------------------------------------
# aggregation

@dataclass
class ThresholdTable:
    """Distribution report: cell(0) is the share of resources capturing
    nothing; cell(x>0) the share with at least x percent availability."""

    thresholds: Sequence[int]
    rows: Dict[str, List[float]]
    resource_counts: Dict[str, int] = field(default_factory=dict)

    def to_dict(self) -> Dict[str, object]:
        return {
            "thresholds": list(self.thresholds),
            "rows": {k: list(v) for k, v in sorted(self.rows.items())},
            "resource_counts": dict(sorted(self.resource_counts.items())),
        }

    def render(self) -> str:
        width = 8
        header = "category".ljust(14) + "".join(str(t).rjust(width) for t in self.thresholds)
        lines = [header]
        for label in sorted(self.rows, key=lambda k: (k != "overall", k)):
            cells = "".join(f"{cell:.2f}".rjust(width) for cell in self.rows[label])
            lines.append(label.ljust(14) + cells)
        return "\n".join(lines) + "\n"


def _ratio_for(quality: ResourceQuality, category: str) -> Optional[float]:
    if category == "overall":
        return quality.overall
    entry = quality.categories.get(category)
    return entry.ratio if entry is not None else None


def aggregate_row(qualities: Sequence[ResourceQuality], category: str) -> List[float]:
    """One table row for a category label (or "overall"), cells rounded to
    two decimals."""
    ratios = [r for r in (_ratio_for(q, category) for q in qualities) if r is not None]
    if not ratios:
        raise EmptyInput(f"no resources carry category {category!r}")
    n = len(ratios)
    row: List[float] = []
    for threshold in THRESHOLDS:
        if threshold == 0:
            count = sum(1 for r in ratios if r == 0.0)
        else:
            count = sum(1 for r in ratios if r * 100 >= threshold - _EPS)
        row.append(round(count / n * 100, 2))
    return row


def aggregate(qualities: Sequence[ResourceQuality]) -> ThresholdTable:
    """Threshold table over all categories present, plus the overall row."""
    if not qualities:
        raise EmptyInput("no resource qualities to aggregate")
    labels = sorted({label for q in qualities for label in q.categories})
    rows: Dict[str, List[float]] = {"overall": aggregate_row(qualities, "overall")}
    counts: Dict[str, int] = {"overall": len(qualities)}
    for label in labels:
        present = [q for q in qualities if label in q.categories]
        rows[label] = aggregate_row(qualities, label)
        counts[label] = len(present)
    return ThresholdTable(thresholds=THRESHOLDS, rows=rows, resource_counts=counts)
