"""Fixture portal: page construction, determinism, stats probes."""

import json
import urllib.request

import pytest

from tracecap.portal import DeckSpec, PortalSpec, RepoSpec, page_script, render_repo, serve


def fetch(url: str) -> bytes:
    with urllib.request.urlopen(url, timeout=10) as resp:
        return resp.read()


def test_repo_page_has_exactly_six_target_links(portal):
    html = fetch(portal.url("/repo/alpha")).decode()
    assert html.count('class="file"') == 5
    assert html.count('id="zip"') == 1


def test_zip_off_repo_has_no_zip_link(portal):
    html = fetch(portal.url("/repo/bare")).decode()
    assert 'id="zip"' not in html


def test_deck_next_disabled_only_on_last_slide(portal):
    for i in range(1, 10):
        html = fetch(portal.url(f"/deck/talk/slide/{i}")).decode()
        assert f'href="/deck/talk/slide/{i + 1}"' in html
        assert "aria-disabled" not in html
    last = fetch(portal.url("/deck/talk/slide/10")).decode()
    assert 'aria-disabled="true"' in last


def test_rendering_is_deterministic():
    spec = RepoSpec("same", 4)
    assert render_repo(spec) == render_repo(spec)


def test_stats_counts_hits(portal):
    before = json.loads(fetch(portal.url("/__stats")))
    fetch(portal.url("/repo/alpha/file/1"))
    fetch(portal.url("/repo/alpha/file/1"))
    after = json.loads(fetch(portal.url("/__stats")))
    delta = after["hits"].get("/repo/alpha/file/1", 0) - \
        before["hits"].get("/repo/alpha/file/1", 0)
    assert delta == 2
    assert after["max_concurrent"] >= 1


def test_stats_endpoint_not_self_counted(portal):
    before = json.loads(fetch(portal.url("/__stats")))
    after = json.loads(fetch(portal.url("/__stats")))
    assert "/__stats" not in after["hits"]
    assert after["total"] == before["total"]


def test_duplicate_names_rejected():
    with pytest.raises(ValueError):
        PortalSpec(repos=[RepoSpec("x", 1)], decks=[DeckSpec("x", 1, 0)])


def test_unknown_path_404(portal):
    import urllib.error
    with pytest.raises(urllib.error.HTTPError) as err:
        fetch(portal.url("/nothing/here"))
    assert err.value.code == 404


def test_page_script_mirrors_served_site(portal):
    script = page_script(portal.spec, portal.base_url)
    repo = script["pages"][portal.url("/repo/alpha")]
    hrefs = [e.get("href") for e in repo["elements"] if e.get("href")]
    html = fetch(portal.url("/repo/alpha")).decode()
    for href in hrefs:
        assert href.replace(portal.base_url, "") in html


def test_spec_from_dict_round_trip():
    doc = {"repos": [{"name": "r", "file_count": 2, "with_zip": False}],
           "decks": [{"name": "d", "slide_count": 3, "note_count": 1, "scripted": True}],
           "delay_ms": 5, "tls": False}
    spec = PortalSpec.from_dict(doc)
    assert spec.repos[0].with_zip is False
    assert spec.decks[0].scripted is True
    assert spec.delay_ms == 5
