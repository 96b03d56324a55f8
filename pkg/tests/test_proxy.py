"""Capture proxy: completeness, dedup, idle boundary, TLS interception."""

import http.client
import threading
import time

import pytest

from tracecap.portal import DeckSpec, PortalSpec, RepoSpec, serve
from tracecap.proxy import CaptureProxy, start_proxy
from tracecap.tlsca import trust_context
from tracecap.warc import RecordType, read_records


@pytest.fixture(scope="module")
def tls_portal():
    handle = serve(PortalSpec(repos=[RepoSpec("secure", 8, with_zip=True)], tls=True))
    yield handle
    handle.stop()


def proxy_get(proxy, url: str, tls: bool):
    """Fetch through the proxy the way a CA-trusting browser would."""
    from urllib.parse import urlsplit
    parts = urlsplit(url)
    path = parts.path or "/"
    if parts.query:
        path += "?" + parts.query
    if tls:
        conn = http.client.HTTPSConnection(
            proxy.host, proxy.port, timeout=15,
            context=trust_context(proxy.ca_certificate))
        conn.set_tunnel(parts.hostname, parts.port or 443)
        conn.request("GET", path)
    else:
        conn = http.client.HTTPConnection(proxy.host, proxy.port, timeout=15)
        conn.request("GET", url, headers={"Host": parts.netloc})
    response = conn.getresponse()
    body = response.read()
    conn.close()
    return response.status, body


def test_port_zero_assigns_concrete_port():
    proxy = start_proxy(warc_output=None)
    try:
        assert proxy.port and proxy.port > 0
    finally:
        proxy.stop()


def test_https_get_writes_linked_request_response(tmp_path, tls_portal):
    warc = tmp_path / "cap.warc.gz"
    proxy = start_proxy(warc_output=warc)
    try:
        status, body = proxy_get(proxy, tls_portal.url("/repo/secure"), tls=True)
        assert status == 200 and b"file-1.txt" in body
    finally:
        proxy.stop()
    records = [r for r, _, _ in read_records(warc)]
    by_type = {}
    for record in records:
        by_type.setdefault(record.record_type, []).append(record)
    assert len(by_type[RecordType.WARCINFO]) == 1
    assert len(by_type[RecordType.RESPONSE]) == 1
    assert len(by_type[RecordType.REQUEST]) == 1
    response, request = by_type[RecordType.RESPONSE][0], by_type[RecordType.REQUEST][0]
    assert request.concurrent_to == response.record_id
    assert response.target_uri == request.target_uri == tls_portal.url("/repo/secure")


def test_response_bytes_match_warc_block(tmp_path, tls_portal):
    warc = tmp_path / "cap.warc.gz"
    proxy = start_proxy(warc_output=warc)
    try:
        status, body = proxy_get(proxy, tls_portal.url("/repo/secure/file/1"), tls=True)
    finally:
        proxy.stop()
    response = next(r for r, _, _ in read_records(warc)
                    if r.record_type is RecordType.RESPONSE)
    stored_body = response.block.split(b"\r\n\r\n", 1)[1]
    assert stored_body == body


def test_duplicate_get_skipped_but_logged(tmp_path, tls_portal):
    warc = tmp_path / "cap.warc.gz"
    proxy = start_proxy(warc_output=warc)
    try:
        url = tls_portal.url("/repo/secure/file/2")
        proxy_get(proxy, url, tls=True)
        proxy_get(proxy, url, tls=True)
    finally:
        log = proxy.stop()
    gets = [e for e in log.entries if e.method == "GET"]
    assert [e.disposition for e in gets] == ["recorded", "duplicate-skipped"]
    responses = [r for r, _, _ in read_records(warc)
                 if r.record_type is RecordType.RESPONSE]
    assert len(responses) == 1


def test_completeness_50_resources(tmp_path, tls_portal):
    warc = tmp_path / "cap.warc.gz"
    proxy = start_proxy(warc_output=warc)
    try:
        urls = [tls_portal.url(f"/repo/secure/file/1?copy={i}") for i in range(50)]
        threads = [threading.Thread(target=proxy_get, args=(proxy, u, True))
                   for u in urls]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
    finally:
        log = proxy.stop()
    counts = {}
    for record, _, _ in read_records(warc):
        counts[record.record_type] = counts.get(record.record_type, 0) + 1
    assert counts[RecordType.WARCINFO] == 1
    assert counts[RecordType.RESPONSE] == 50
    assert counts[RecordType.REQUEST] == 50
    assert len(log.recorded()) == 50


def test_idle_boundary_exact_quiet_ms():
    fake_now = [1000.0]
    proxy = CaptureProxy(clock=lambda: fake_now[0])
    # no listener needed: idle_state is pure bookkeeping
    proxy._exchange_started()
    state = proxy.idle_state(0)
    assert not state.idle and state.in_flight == 1
    proxy._exchange_finished()  # traffic ends at t=1000

    fake_now[0] = 1000.0 + 0.499  # quiet_ms - 1
    assert not proxy.idle_state(500).idle
    fake_now[0] = 1000.0 + 0.500  # exactly quiet_ms
    assert proxy.idle_state(500).idle


def test_fresh_proxy_is_idle_at_zero_quiet():
    proxy = start_proxy(warc_output=None)
    try:
        assert proxy.idle_state(0).idle
        assert not proxy.idle_state(10_000).idle  # just started, not quiet long enough
    finally:
        proxy.stop()


def test_stop_with_no_traffic_logs_only_warcinfo(tmp_path):
    proxy = start_proxy(warc_output=tmp_path / "empty.warc.gz")
    log = proxy.stop()
    assert [e.method for e in log.entries] == ["WARCINFO"]


def test_stop_waits_for_open_exchange(tmp_path):
    portal = serve(PortalSpec(repos=[RepoSpec("slow", 1)], delay_ms=700))
    warc = tmp_path / "cap.warc.gz"
    proxy = start_proxy(warc_output=warc)
    try:
        thread = threading.Thread(
            target=proxy_get, args=(proxy, portal.url("/repo/slow/file/1"), False))
        thread.start()
        deadline = time.monotonic() + 5
        while proxy.in_flight == 0 and time.monotonic() < deadline:
            time.sleep(0.01)
        assert proxy.in_flight == 1
        log = proxy.stop()  # must drain the 700 ms exchange
        thread.join()
    finally:
        portal.stop()
    assert any(e.disposition == "recorded" and e.method == "GET" for e in log.entries)
    responses = [r for r, _, _ in read_records(warc)
                 if r.record_type is RecordType.RESPONSE]
    assert len(responses) == 1


def test_double_stop_returns_same_log(tmp_path):
    proxy = start_proxy(warc_output=tmp_path / "x.warc.gz")
    first = proxy.stop()
    second = proxy.stop()
    assert first is second


def test_plain_http_absolute_form(tmp_path):
    portal = serve(PortalSpec(repos=[RepoSpec("plain", 2)]))
    warc = tmp_path / "cap.warc.gz"
    proxy = start_proxy(warc_output=warc)
    try:
        status, body = proxy_get(proxy, portal.url("/repo/plain"), tls=False)
        assert status == 200 and b"plain" in body
    finally:
        proxy.stop()
        portal.stop()
    uris = [r.target_uri for r, _, _ in read_records(warc)
            if r.record_type is RecordType.RESPONSE]
    assert uris == [portal.url("/repo/plain")]


def test_upstream_failure_yields_502_and_error_entry():
    proxy = start_proxy(warc_output=None)
    try:
        status, body = proxy_get(proxy, "http://127.0.0.1:9/unreachable", tls=False)
        assert status == 502
    finally:
        log = proxy.stop()
    assert any(e.disposition == "error" for e in log.entries)


def test_ca_key_never_in_warc(tmp_path, tls_portal):
    warc = tmp_path / "cap.warc.gz"
    proxy = start_proxy(warc_output=warc)
    try:
        proxy_get(proxy, tls_portal.url("/repo/secure"), tls=True)
    finally:
        proxy.stop()
    blob = b"".join(r.block for r, _, _ in read_records(warc))
    assert b"PRIVATE KEY" not in blob
