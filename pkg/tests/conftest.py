"""Shared fixtures: a running fixture portal and the standard traces that
drive its two page classes."""

import json
import sys

import pytest

from tracecap.portal import DeckSpec, PortalSpec, RepoSpec, page_script, serve
from tracecap.trace import Trace, parse_trace

PROVENANCE = {
    "created_on": "https://portal.example/repo/sample",
    "user_agent": "tracecap-tests/1.0",
    "created_at": "2026-01-01T00:00:00Z",
}


def repo_trace(base_url: str, wait_ms: int = 20, zip_on_missing: str = "skip") -> Trace:
    """Files via click-all, archive via a single click."""
    return parse_trace(json.dumps({
        "trace_version": "1.0",
        "id": "repo-files-and-zip",
        "url_pattern": f"{base_url}/repo/*",
        "actions": [
            {"kind": "click-all",
             "scope_selector": {"strategy": "element-id", "value": "files"},
             "link_selector": {"strategy": "html-class", "value": "file"},
             "wait_after_ms": wait_ms},
            {"kind": "click",
             "selector": {"strategy": "element-id", "value": "zip"},
             "wait_after_ms": wait_ms, "on_missing": zip_on_missing},
        ],
        "categories": {"0": "files", "1": "zip"},
        "provenance": PROVENANCE,
    }).encode())


def deck_trace(base_url: str, wait_ms: int = 20) -> Trace:
    """Open the deck, page through every slide, then visit each note."""
    return parse_trace(json.dumps({
        "trace_version": "1.0",
        "id": "deck-slides-and-notes",
        "url_pattern": f"{base_url}/deck/*",
        "actions": [
            {"kind": "click",
             "selector": {"strategy": "element-id", "value": "open"},
             "wait_after_ms": wait_ms},
            {"kind": "repeat-click",
             "selector": {"strategy": "element-id", "value": "next"},
             "until": "element-disabled", "wait_after_ms": wait_ms},
            {"kind": "click-all",
             "scope_selector": {"strategy": "element-id", "value": "notes"},
             "link_selector": {"strategy": "html-class", "value": "note"},
             "wait_after_ms": wait_ms},
        ],
        "categories": {"0": "slides", "1": "slides", "2": "notes"},
        "provenance": PROVENANCE,
    }).encode())


@pytest.fixture(scope="module")
def portal():
    spec = PortalSpec(
        repos=[RepoSpec("alpha", 5, with_zip=True),
               RepoSpec("bare", 3, with_zip=False),
               RepoSpec("empty", 0, with_zip=True)],
        decks=[DeckSpec("talk", 10, note_count=2),
               DeckSpec("full", 12, note_count=3),
               DeckSpec("mono", 1, note_count=0),
               DeckSpec("scripted", 6, note_count=1, scripted=True)],
    )
    handle = serve(spec)
    yield handle
    handle.stop()


@pytest.fixture(scope="module")
def portal_script(portal):
    return page_script(portal.spec, portal.base_url)


def pytest_runtest_logreport(report):
    """One pass/fail line per acceptance criterion."""
    if report.when != "call" or "test_acceptance" not in report.nodeid:
        return
    name = report.nodeid.split("::")[-1]
    status = "PASS" if report.passed else ("SKIP" if report.skipped else "FAIL")
    sys.stderr.write(f"[acceptance] {name}: {status} ({report.duration:.2f}s)\n")
