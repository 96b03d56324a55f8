"""End-to-end capture: single resources, failure modes, the batch pool."""

import json
from pathlib import Path

import pytest

from tracecap.errors import TraceMismatch
from tracecap.orchestrator import CaptureConfig, capture, capture_batch
from tracecap.quality import compare, live_inventory, warc_inventory
from tracecap.repository import TraceRepository, content_digest
from tracecap.driver import SessionConfig
from tracecap.trace import parse_trace, serialize_trace

from conftest import PROVENANCE, deck_trace, repo_trace


def config_for(portal_script, tmp_path, workers=1) -> CaptureConfig:
    return CaptureConfig(out_dir=tmp_path / "captures", backend="mock",
                         page_script=portal_script, workers=workers)


def test_capture_repo_ok_six_uris(portal, portal_script, tmp_path):
    trace = repo_trace(portal.base_url)
    url = portal.url("/repo/alpha")
    result = capture(url, trace, config_for(portal_script, tmp_path))
    assert result.status == "ok"
    assert result.inventory.total == 6
    captured = warc_inventory(result.warc_path)
    expected = {u for uris in result.inventory.categories.values() for u in uris}
    assert expected <= captured
    assert Path(result.cdxj_path).is_file()
    assert Path(result.warc_path).with_name("result.json").is_file()


def test_capture_checks_pattern_before_starting(portal, portal_script, tmp_path):
    trace = repo_trace("https://unrelated.example")
    with pytest.raises(TraceMismatch):
        capture(portal.url("/repo/alpha"), trace, config_for(portal_script, tmp_path))
    assert not (tmp_path / "captures").exists() or \
        not list((tmp_path / "captures").glob("*/capture.warc.gz"))


def test_capture_missing_selector_fails_but_keeps_landing(portal, portal_script, tmp_path):
    trace = repo_trace(portal.base_url, zip_on_missing="fail")
    url = portal.url("/repo/bare")  # no zip link on this page
    result = capture(url, trace, config_for(portal_script, tmp_path))
    assert result.status == "failed"
    assert result.errors
    retried = [s for s in result.timings["per_step"] if s["op"] == "resolve"]
    assert retried  # the missing resolve ran (and was retried once)
    assert url in warc_inventory(result.warc_path)


def test_capture_skip_yields_partial(portal, portal_script, tmp_path):
    trace = repo_trace(portal.base_url, zip_on_missing="skip")
    result = capture(portal.url("/repo/bare"), trace, config_for(portal_script, tmp_path))
    assert result.status == "partial"
    assert result.inventory.categories["zip"] == set()
    quality = compare(result.inventory, warc_inventory(result.warc_path))
    assert quality.overall == 1.0


def test_capture_quality_invariant(portal, portal_script, tmp_path):
    """Live inventory is contained in the WARC response URI set."""
    trace = deck_trace(portal.base_url)
    url = portal.url("/deck/talk")
    live = live_inventory(url, trace, SessionConfig(backend="mock",
                                                    page_script=portal_script))
    result = capture(url, trace, config_for(portal_script, tmp_path))
    assert result.status == "ok"
    assert compare(live, warc_inventory(result.warc_path)).overall == 1.0


def test_capture_deterministic_inventory_on_mock(portal, portal_script, tmp_path):
    trace = repo_trace(portal.base_url)
    url = portal.url("/repo/alpha")
    first = capture(url, trace, config_for(portal_script, tmp_path / "a"))
    second = capture(url, trace, config_for(portal_script, tmp_path / "b"))
    assert first.inventory.to_dict() == second.inventory.to_dict()
    from tracecap.cdxj import read_cdxj
    keys_a = [(l.key, l.fields["digest"]) for l in read_cdxj(first.cdxj_path)]
    keys_b = [(l.key, l.fields["digest"]) for l in read_cdxj(second.cdxj_path)]
    assert keys_a == keys_b


def build_portal_repo(portal, tmp_path) -> TraceRepository:
    cache = tmp_path / "trace-cache"
    (cache / "traces").mkdir(parents=True)
    manifest = {"traces": []}
    for trace in (repo_trace(portal.base_url), deck_trace(portal.base_url)):
        data = serialize_trace(trace)
        path = cache / "traces" / trace.id / "1.trace.json"
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_bytes(data)
        (path.parent / "latest").write_text("1")
        manifest["traces"].append({"id": trace.id, "version": 1,
                                   "digest": content_digest(data),
                                   "url_pattern": trace.url_pattern.pattern})
    (cache / "manifest.json").write_text(json.dumps(manifest))
    return TraceRepository(cache)


def test_batch_mixed_urls_in_order(portal, portal_script, tmp_path):
    repo = build_portal_repo(portal, tmp_path)
    urls = [portal.url("/repo/alpha"), portal.url("/deck/talk"),
            "https://nomatch.example/x", portal.url("/repo/bare")]
    results = capture_batch(urls, repo, config_for(portal_script, tmp_path, workers=3))
    assert [r.target_url for r in results] == urls
    assert results[0].status == "ok" and results[0].trace_version == 1
    assert results[1].status == "ok"
    assert results[2].status == "failed"
    assert "TraceMismatch" in results[2].errors[0]
    assert results[3].status == "partial"  # zip skipped


def test_batch_empty_list(portal, portal_script, tmp_path):
    repo = build_portal_repo(portal, tmp_path)
    assert capture_batch([], repo, config_for(portal_script, tmp_path)) == []


def test_batch_isolation_distinct_warcs(portal, portal_script, tmp_path):
    repo = build_portal_repo(portal, tmp_path)
    urls = [portal.url("/repo/alpha"), portal.url("/repo/empty")]
    results = capture_batch(urls, repo, config_for(portal_script, tmp_path, workers=2))
    warcs = {r.warc_path for r in results}
    assert len(warcs) == 2
    inv_a = warc_inventory(results[0].warc_path)
    inv_b = warc_inventory(results[1].warc_path)
    assert portal.url("/repo/alpha") in inv_a and portal.url("/repo/alpha") not in inv_b
    assert portal.url("/repo/empty") in inv_b and portal.url("/repo/empty") not in inv_a
