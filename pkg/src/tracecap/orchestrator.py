"""End-to-end capture: trace selection, proxy + session lifecycle, WARC and
index finalization, and the batch worker pool.

Each capture owns one proxy and one driver session; concurrent captures
never share either, which keeps idle detection and WARC attribution
unambiguous.
"""

from __future__ import annotations

import hashlib
import json
import logging
import re
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional

from .cdxj import build_cdxj, write_cdxj
from .compiler import compile_trace
from .driver import SessionConfig, open_session
from .errors import CaptureEnvironmentError, TraceMismatch, TracecapError
from .proxy import start_proxy
from .quality import UriInventory, build_inventory
from .repository import TraceRepository
from .trace import Trace, match_url
from .driver.session import StepOutcome

logger = logging.getLogger(__name__)


@dataclass
class CaptureConfig:
    out_dir: Path
    backend: str = "mock"
    page_script: Optional[dict] = None
    webdriver_endpoint: Optional[str] = None
    user_agent: str = "tracecap/0.1"
    extra_capabilities: Optional[dict] = None
    workers: int = 1


@dataclass
class CaptureResult:
    target_url: str
    trace_id: Optional[str]
    trace_version: Optional[int]  # repository version when known
    status: str  # ok | partial | failed
    warc_path: Optional[str] = None
    cdxj_path: Optional[str] = None
    inventory: Optional[UriInventory] = None
    timings: Dict[str, object] = field(default_factory=dict)
    errors: List[str] = field(default_factory=list)

    @property
    def total_ms(self) -> int:
        return int(self.timings.get("total_ms", 0))

    def to_dict(self) -> Dict[str, object]:
        return {
            "target_url": self.target_url,
            "trace_id": self.trace_id,
            "trace_version": self.trace_version,
            "status": self.status,
            "warc_path": self.warc_path,
            "cdxj_path": self.cdxj_path,
            "inventory": self.inventory.to_dict() if self.inventory else None,
            "timings": self.timings,
            "errors": self.errors,
        }


def _capture_id(url: str) -> str:
    short = hashlib.sha1(url.encode()).hexdigest()[:10]
    slug = re.sub(r"[^a-z0-9]+", "-", url.split("://", 1)[-1].lower()).strip("-")[:48]
    return f"{slug}-{short}"


def _status_from(outcomes: List[StepOutcome]) -> str:
    if any(o.status == "failed" for o in outcomes):
        return "failed"
    if any(o.status == "skipped" for o in outcomes):
        return "partial"
    return "ok"


def capture(url: str, trace: Trace, config: CaptureConfig,
            trace_version: Optional[int] = None) -> CaptureResult:
    """Capture one resource guided by its trace.

    Steps that fail for network or missing-element reasons are retried once
    before counting as failed; whatever was recorded up to a failure stays
    in the WARC (the landing page survives a broken selector).
    """
    if not match_url(trace.url_pattern, url):
        raise TraceMismatch(f"trace {trace.id!r} pattern {trace.url_pattern.pattern!r} "
                            f"does not match {url}")
    capture_dir = Path(config.out_dir) / _capture_id(url)
    capture_dir.mkdir(parents=True, exist_ok=True)
    warc_path = capture_dir / "capture.warc.gz"
    cdxj_path = capture_dir / "index.cdxj"

    started = time.monotonic()
    try:
        proxy = start_proxy(warc_output=warc_path)
    except TracecapError as exc:
        raise CaptureEnvironmentError(f"proxy startup failed: {exc}") from exc
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
    except TracecapError as exc:
        proxy.stop()
        raise CaptureEnvironmentError(f"driver startup failed: {exc}") from exc

    try:
        outcomes = session.execute_plan(compile_trace(trace), url, retry_step=True)
    finally:
        report = session.close()
        proxy.stop()

    inventory = build_inventory(url, trace, report.inventory,
                                partial=any(o.status == "skipped" for o in outcomes))
    write_cdxj(build_cdxj(warc_path), cdxj_path)

    result = CaptureResult(
        target_url=url,
        trace_id=trace.id,
        trace_version=trace_version,
        status=_status_from(outcomes),
        warc_path=str(warc_path),
        cdxj_path=str(cdxj_path),
        inventory=inventory,
        timings={
            "total_ms": int((time.monotonic() - started) * 1000),
            "per_step": [
                {"op": o.op, "action_index": o.action_index,
                 "status": o.status, "ms": o.duration_ms}
                for o in outcomes
            ],
        },
        errors=list(report.errors),
    )
    (capture_dir / "result.json").write_text(
        json.dumps(result.to_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return result


def capture_batch(urls: List[str], repo: TraceRepository,
                  config: CaptureConfig) -> List[CaptureResult]:
    """Capture many resources through a bounded worker pool.

    Each URL is matched to its best trace (most specific pattern, newest
    version); results come back in input order and one resource's failure
    never touches the others.
    """
    if config.workers < 1:
        raise ValueError("workers must be >= 1")

    def one(url: str) -> CaptureResult:
        try:
            refs = repo.lookup(url)
            if not refs:
                raise TraceMismatch(f"no trace in repository matches {url}")
            ref = refs[0]
            return capture(url, repo.load(ref), config, trace_version=ref.version)
        except TracecapError as exc:
            logger.warning("capture of %s failed: %s", url, exc)
            return CaptureResult(
                target_url=url, trace_id=None, trace_version=None,
                status="failed", errors=[f"{type(exc).__name__}: {exc}"])

    if not urls:
        return []
    with ThreadPoolExecutor(max_workers=config.workers) as pool:
        return list(pool.map(one, urls))
