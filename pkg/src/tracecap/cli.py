"""Command-line entry point.

Reports go to stdout as canonical JSON (``--out`` redirects to a file,
``--pretty`` switches table-shaped reports to a human layout). Exit codes:
0 success, 1 operation error, 2 usage error.
"""

from __future__ import annotations

import argparse
import json
import os
import signal
import sys
from pathlib import Path
from typing import Optional

from .bench import baseline_crawl, extract_uris, overhead_report
from .compiler import compile_trace, render_plan
from .driver import SessionConfig
from .errors import TracecapError
from .ingest import IngestServer
from .orchestrator import CaptureConfig, capture, capture_batch
from .portal import PortalSpec, serve
from .quality import (
    ResourceQuality,
    UriInventory,
    aggregate,
    aggregate_row,
    compare,
    live_inventory,
    warc_inventory,
)
from .repository import TraceRepository, sync
from .trace import UrlPattern, match_url, parse_trace, validate_trace

WEBDRIVER_ENV = "TRACER_WEBDRIVER_ENDPOINT"


def _emit(args, doc, pretty_text: Optional[str] = None) -> None:
    if getattr(args, "pretty", False) and pretty_text is not None:
        text = pretty_text
    else:
        text = json.dumps(doc, indent=2, sort_keys=True) + "\n"
    if getattr(args, "out", None):
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _load_trace(path: str):
    return parse_trace(Path(path).read_bytes())


def _output_flags(parser: argparse.ArgumentParser) -> None:
    # also accepted before the subcommand; SUPPRESS keeps the outer value
    parser.add_argument("--out", default=argparse.SUPPRESS,
                        help="write the JSON report to a file instead of stdout")
    parser.add_argument("--pretty", action="store_true", default=argparse.SUPPRESS,
                        help="human-readable layout where available")


def _session_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--backend", choices=["mock", "webdriver"], default="mock")
    parser.add_argument("--page-script", help="PageScript JSON file (mock backend)")
    parser.add_argument("--webdriver-endpoint",
                        default=os.environ.get(WEBDRIVER_ENV),
                        help=f"WebDriver protocol URL (default ${WEBDRIVER_ENV})")
    parser.add_argument("--user-agent", default="tracecap/0.1")


def _session_config(args) -> SessionConfig:
    page_script = None
    if args.page_script:
        page_script = json.loads(Path(args.page_script).read_text(encoding="utf-8"))
    return SessionConfig(
        backend=args.backend,
        page_script=page_script,
        webdriver_endpoint=args.webdriver_endpoint,
        user_agent=args.user_agent,
    )


def _capture_config(args) -> CaptureConfig:
    session = _session_config(args)
    return CaptureConfig(
        out_dir=Path(args.out_dir),
        backend=session.backend,
        page_script=session.page_script,
        webdriver_endpoint=session.webdriver_endpoint,
        user_agent=session.user_agent,
        workers=getattr(args, "workers", 1),
    )


# --- trace -----------------------------------------------------------------

def cmd_trace_validate(args) -> int:
    report = validate_trace(_load_trace(args.trace))
    _emit(args, report.to_dict())
    return 0 if report.ok() else 1


def cmd_trace_plan(args) -> int:
    plan = compile_trace(_load_trace(args.trace))
    out = render_plan(plan)
    if args.out:
        Path(args.out).write_text(out, encoding="utf-8")
    else:
        sys.stdout.write(out)
    return 0


def cmd_trace_match(args) -> int:
    if args.pattern_from:
        pattern = _load_trace(args.pattern_from).url_pattern
    else:
        pattern = UrlPattern(args.pattern)
    matched = match_url(pattern, args.url)
    _emit(args, {"match": matched, "pattern": pattern.pattern, "url": args.url})
    return 0 if matched else 1


# --- repo --------------------------------------------------------------------

def cmd_repo_sync(args) -> int:
    report = sync(args.remote, args.cache)
    _emit(args, report.to_dict())
    return 0


def cmd_repo_lookup(args) -> int:
    refs = TraceRepository(args.cache).lookup(args.url)
    _emit(args, {"url": args.url, "matches": [r.to_dict() for r in refs]})
    return 0


# --- capture ----------------------------------------------------------------

def cmd_capture_one(args) -> int:
    result = capture(args.url, _load_trace(args.trace), _capture_config(args))
    _emit(args, result.to_dict())
    return 0 if result.status != "failed" else 1


def cmd_capture_batch(args) -> int:
    urls = [line.strip() for line in Path(args.urls).read_text().splitlines()
            if line.strip() and not line.startswith("#")]
    if args.trace_repo:
        sync(args.trace_repo, args.cache)
    repo = TraceRepository(args.cache)
    results = capture_batch(urls, repo, _capture_config(args))
    _emit(args, {"results": [r.to_dict() for r in results]})
    return 0 if all(r.status != "failed" for r in results) else 1


# --- quality -----------------------------------------------------------------

def cmd_quality_live(args) -> int:
    inventory = live_inventory(args.url, _load_trace(args.trace), _session_config(args))
    _emit(args, inventory.to_dict())
    return 0


def cmd_quality_warc(args) -> int:
    statuses = set(args.status) if args.status else None
    uris = warc_inventory(args.warc, statuses=statuses)
    _emit(args, {"warc": args.warc, "uris": sorted(uris)})
    return 0


def cmd_quality_compare(args) -> int:
    expected = UriInventory.from_dict(
        json.loads(Path(args.expected).read_text(encoding="utf-8")))
    if args.warc:
        captured = warc_inventory(args.warc)
    else:
        captured = {line.strip() for line in Path(args.captured).read_text().splitlines()
                    if line.strip()}
    quality = compare(expected, captured)
    _emit(args, quality.to_dict())
    return 0


def cmd_quality_aggregate(args) -> int:
    doc = json.loads(Path(args.input).read_text(encoding="utf-8"))
    items = doc if isinstance(doc, list) else doc["qualities"]
    qualities = [ResourceQuality.from_dict(item) for item in items]
    if args.category:
        row = aggregate_row(qualities, args.category)
        _emit(args, {"category": args.category,
                     "thresholds": list(range(0, 101, 10)), "cells": row})
    else:
        table = aggregate(qualities)
        _emit(args, table.to_dict(), pretty_text=table.render())
    return 0


# --- bench ---------------------------------------------------------------------

def cmd_bench_crawl(args) -> int:
    if args.uris_from_warc:
        uris = extract_uris(args.uris_from_warc)
    else:
        uris = [line.strip() for line in Path(args.uris).read_text().splitlines()
                if line.strip()]
    verify = args.ca if args.ca else not args.insecure
    timing = baseline_crawl(uris, workers=args.workers,
                            timeout_ms=args.timeout_ms, verify=verify)
    _emit(args, timing.to_dict())
    return 0


def cmd_bench_overhead(args) -> int:
    tracer_doc = json.loads(Path(args.tracer).read_text(encoding="utf-8"))
    baseline_doc = json.loads(Path(args.baseline).read_text(encoding="utf-8"))
    tracer_items = tracer_doc["results"] if isinstance(tracer_doc, dict) else tracer_doc
    baseline_items = baseline_doc if isinstance(baseline_doc, list) else [baseline_doc]
    tracer_ms = [item["timings"]["total_ms"] for item in tracer_items]
    resources = [item["target_url"] for item in tracer_items]
    baseline_ms = [item["total_ms"] for item in baseline_items]
    report = overhead_report(tracer_ms, baseline_ms, resources=resources)
    if args.csv:
        Path(args.csv).write_text(report.to_csv(), encoding="utf-8")
    _emit(args, report.to_dict())
    return 0


# --- servers ---------------------------------------------------------------------

def cmd_proxy(args) -> int:
    from .proxy import start_proxy

    proxy = start_proxy(port=args.port, warc_output=args.warc_out)
    if args.ca_out:
        Path(args.ca_out).write_bytes(proxy.ca_certificate)
    sys.stdout.write(json.dumps({"endpoint": proxy.endpoint,
                                 "warc": args.warc_out,
                                 "ca": args.ca_out}) + "\n")
    sys.stdout.flush()
    _wait_for_interrupt()
    log = proxy.stop()
    _emit(args, {"exchanges": [e.to_dict() for e in log.entries]})
    return 0


def cmd_fixture_serve(args) -> int:
    spec = PortalSpec.from_dict(json.loads(Path(args.spec).read_text(encoding="utf-8")))
    handle = serve(spec, port=args.port)
    sys.stdout.write(json.dumps({"base_url": handle.base_url,
                                 "stats": handle.url("/__stats")}) + "\n")
    sys.stdout.flush()
    _wait_for_interrupt()
    handle.stop()
    return 0


def cmd_serve_ingest(args) -> int:
    server = IngestServer(args.repo, port=args.port).start()
    sys.stdout.write(json.dumps({"endpoint": server.endpoint,
                                 "health": f"{server.endpoint}/health"}) + "\n")
    sys.stdout.flush()
    _wait_for_interrupt()
    server.stop()
    return 0


def _wait_for_interrupt():
    event = __import__("threading").Event()
    for sig in (signal.SIGINT, signal.SIGTERM):
        signal.signal(sig, lambda *_: event.set())
    event.wait()


# --- parser -----------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tracecap")
    parser.add_argument("--out", help="write the JSON report to a file instead of stdout")
    parser.add_argument("--pretty", action="store_true",
                        help="human-readable layout where available")
    sub = parser.add_subparsers(dest="command", required=True)

    def _finish(leaf, func):
        _output_flags(leaf)
        leaf.set_defaults(func=func)

    trace = sub.add_parser("trace", help="trace file operations").add_subparsers(
        dest="subcommand", required=True)
    p = trace.add_parser("validate")
    p.add_argument("trace")
    _finish(p, cmd_trace_validate)
    p = trace.add_parser("plan")
    p.add_argument("trace")
    _finish(p, cmd_trace_plan)
    p = trace.add_parser("match")
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--pattern-from", help="take the pattern from a trace file")
    group.add_argument("--pattern")
    p.add_argument("url")
    _finish(p, cmd_trace_match)

    repo = sub.add_parser("repo", help="shared trace repository").add_subparsers(
        dest="subcommand", required=True)
    p = repo.add_parser("sync")
    p.add_argument("--remote", required=True, help="repository URL or directory")
    p.add_argument("--cache", required=True)
    _finish(p, cmd_repo_sync)
    p = repo.add_parser("lookup")
    p.add_argument("--cache", required=True)
    p.add_argument("url")
    _finish(p, cmd_repo_lookup)

    cap = sub.add_parser("capture", help="capture resources to WARC").add_subparsers(
        dest="subcommand", required=True)
    p = cap.add_parser("one")
    p.add_argument("--url", required=True)
    p.add_argument("--trace", required=True)
    p.add_argument("--out-dir", required=True)
    _session_flags(p)
    _finish(p, cmd_capture_one)
    p = cap.add_parser("batch")
    p.add_argument("--urls", required=True, help="file with one URL per line")
    p.add_argument("--cache", required=True, help="trace repository cache directory")
    p.add_argument("--trace-repo", help="remote repository to sync before capturing")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--workers", type=int, default=4)
    _session_flags(p)
    _finish(p, cmd_capture_batch)

    quality = sub.add_parser("quality", help="archival quality evaluation").add_subparsers(
        dest="subcommand", required=True)
    p = quality.add_parser("live-inventory")
    p.add_argument("--url", required=True)
    p.add_argument("--trace", required=True)
    _session_flags(p)
    _finish(p, cmd_quality_live)
    p = quality.add_parser("warc-inventory")
    p.add_argument("warc")
    p.add_argument("--status", type=int, action="append",
                   help="allowed HTTP status (repeatable; default 200)")
    _finish(p, cmd_quality_warc)
    p = quality.add_parser("compare")
    p.add_argument("--expected", required=True, help="UriInventory JSON file")
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--warc")
    group.add_argument("--captured", help="file with one captured URI per line")
    _finish(p, cmd_quality_compare)
    p = quality.add_parser("aggregate")
    p.add_argument("--in", dest="input", required=True,
                   help="JSON list of ResourceQuality documents")
    p.add_argument("--category")
    _finish(p, cmd_quality_aggregate)

    bench = sub.add_parser("bench", help="overhead benchmarking").add_subparsers(
        dest="subcommand", required=True)
    p = bench.add_parser("crawl")
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--uris", help="file with one URI per line")
    group.add_argument("--uris-from-warc", help="extract the URI set from a WARC")
    p.add_argument("--workers", type=int, default=16)
    p.add_argument("--timeout-ms", type=int, default=30000)
    p.add_argument("--ca", help="CA bundle for TLS verification")
    p.add_argument("--insecure", action="store_true", help="skip TLS verification")
    _finish(p, cmd_bench_crawl)
    p = bench.add_parser("overhead")
    p.add_argument("--tracer", required=True, help="capture batch results JSON")
    p.add_argument("--baseline", required=True, help="crawl timing JSON (list)")
    p.add_argument("--csv", help="also write the per-resource delta CSV here")
    _finish(p, cmd_bench_overhead)

    p = sub.add_parser("proxy", help="run a standalone capture proxy")
    p.add_argument("--port", type=int, default=0)
    p.add_argument("--warc-out", help="WARC output path (omit for discard mode)")
    p.add_argument("--ca-out", help="export the session CA certificate PEM here")
    _finish(p, cmd_proxy)

    p = sub.add_parser("fixture", help="fixture portal").add_subparsers(
        dest="subcommand", required=True).add_parser("serve")
    p.add_argument("--spec", required=True, help="PortalSpec JSON file")
    p.add_argument("--port", type=int, default=0)
    _finish(p, cmd_fixture_serve)

    p = sub.add_parser("serve-ingest", help="HTTP endpoint receiving recorder exports")
    p.add_argument("--repo", required=True, help="local repository directory")
    p.add_argument("--port", type=int, default=0)
    _finish(p, cmd_serve_ingest)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except TracecapError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 1
    except FileNotFoundError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 1


if __name__ == "__main__":
    sys.exit(main())
