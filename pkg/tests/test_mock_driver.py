"""Mock backend semantics: resolution order, staleness, loops, skip rules."""

import pytest

from tracecap.compiler import StepOp, compile_trace
from tracecap.driver import MockBackend, PageScript, SessionConfig, open_session
from tracecap.driver.session import DriverSession
from tracecap.errors import DriverError, ElementNotFound, StaleElement
from tracecap.trace import Selector, SelectorStrategy

from conftest import deck_trace, repo_trace


def two_pager() -> PageScript:
    return PageScript.from_dict({"pages": {
        "https://site.test/a": {
            "elements": [
                {"id": "first", "tag": "a", "classes": ["x"], "href": "https://site.test/b"},
                {"id": "second", "tag": "a", "classes": ["x"], "href": "https://site.test/b"},
            ],
        },
        "https://site.test/b": {"elements": [{"id": "back", "tag": "div"}]},
    }})


def session_for(script: PageScript) -> DriverSession:
    return open_session(SessionConfig(backend="mock", page_script={"pages": {}})) \
        if script is None else DriverSession(MockBackend(script), SessionConfig(backend="mock"))


def test_open_session_requires_page_script():
    with pytest.raises(DriverError):
        open_session(SessionConfig(backend="mock"))


def test_fresh_session_is_at_epoch_zero():
    backend = MockBackend(two_pager())
    assert backend.epoch == 0
    assert backend.current_url() == ""


def test_resolution_in_document_order_and_stable():
    backend = MockBackend(two_pager())
    backend.navigate("https://site.test/a")
    refs = backend.find(Selector(SelectorStrategy.HTML_CLASS, "x"))
    assert [r.handle for r in refs] == ["first", "second"]
    again = backend.find(Selector(SelectorStrategy.HTML_CLASS, "x"))
    assert [r.handle for r in again] == ["first", "second"]


def test_css_and_xpath_subsets():
    backend = MockBackend(two_pager())
    backend.navigate("https://site.test/a")
    assert len(backend.find(Selector(SelectorStrategy.CSS, "#first"))) == 1
    assert len(backend.find(Selector(SelectorStrategy.CSS, "a.x"))) == 2
    assert len(backend.find(Selector(SelectorStrategy.XPATH, "//a[@id='second']"))) == 1
    assert len(backend.find(Selector(SelectorStrategy.XPATH, "//*[@id='first']"))) == 1


def test_stale_reference_across_navigation():
    backend = MockBackend(two_pager())
    backend.navigate("https://site.test/a")
    ref = backend.find(Selector(SelectorStrategy.ELEMENT_ID, "first"))[0]
    backend.click(ref)  # navigates to /b
    assert backend.current_url() == "https://site.test/b"
    with pytest.raises(StaleElement):
        backend.click(ref)


def test_back_restores_previous_page():
    backend = MockBackend(two_pager())
    backend.navigate("https://site.test/a")
    ref = backend.find(Selector(SelectorStrategy.ELEMENT_ID, "first"))[0]
    backend.click(ref)
    backend.back()
    assert backend.current_url() == "https://site.test/a"
    assert backend.find(Selector(SelectorStrategy.ELEMENT_ID, "first"))


def deck_script(slides: int) -> PageScript:
    pages = {}
    for i in range(1, slides + 1):
        nav = {"id": "next", "tag": "a"}
        if i < slides:
            nav["href"] = f"https://decks.test/d/slide/{i + 1}"
        else:
            nav["aria_disabled"] = True
        pages[f"https://decks.test/d/slide/{i}"] = {"elements": [nav]}
    return PageScript.from_dict({"pages": pages})


def brute_force_expected_clicks(slides: int, max_iterations: int = 1000) -> int:
    """Independent oracle: walk the transition table, counting clicks on a
    non-disabled next control."""
    clicks = 0
    current = 1
    while clicks < max_iterations:
        disabled = current >= slides
        if disabled:
            break
        clicks += 1
        current += 1
    return clicks


@pytest.mark.parametrize("slides", [1, 2, 10])
def test_repeat_click_element_disabled_click_count(slides):
    trace = deck_trace("https://decks.test")
    plan = compile_trace(trace)
    loop = next(s for s in plan.steps if s.op is StepOp.LOOP)
    backend = MockBackend(deck_script(slides))
    session = DriverSession(backend, SessionConfig(backend="mock"))
    backend.navigate(f"https://decks.test/d/slide/1")
    outcome = session.execute_step(loop)
    assert outcome.status == "ok"
    assert session.click_count == brute_force_expected_clicks(slides)


def test_repeat_click_max_only_exact_count():
    import json
    from tracecap.trace import parse_trace
    from conftest import PROVENANCE
    trace = parse_trace(json.dumps({
        "trace_version": "1.0", "id": "bounded",
        "url_pattern": "https://decks.test/**",
        "actions": [{"kind": "repeat-click",
                     "selector": {"strategy": "element-id", "value": "next"},
                     "until": "max-only", "max_iterations": 5, "wait_after_ms": 0}],
        "provenance": PROVENANCE,
    }).encode())
    backend = MockBackend(deck_script(100))
    session = DriverSession(backend, SessionConfig(backend="mock"))
    outcomes = session.execute_plan(compile_trace(trace), "https://decks.test/d/slide/1")
    assert session.click_count == 5
    assert outcomes[-1].detail["iterations"] == 5


def test_missing_selector_fail_vs_skip():
    script = PageScript.from_dict({"pages": {"https://site.test/a": {"elements": []}}})
    backend = MockBackend(script)
    session = DriverSession(backend, SessionConfig(backend="mock"))
    backend.navigate("https://site.test/a")

    from tracecap.compiler import PlanStep, StepOp
    from tracecap.trace import OnMissing
    selector = Selector(SelectorStrategy.ELEMENT_ID, "ghost")

    hard = session.execute_step(PlanStep(op=StepOp.RESOLVE, action_index=0,
                                         selector=selector, binding="b0",
                                         on_missing=OnMissing.FAIL))
    assert hard.status == "failed"
    assert hard.error_kind == "element"

    soft = session.execute_step(PlanStep(op=StepOp.RESOLVE, action_index=0,
                                         selector=selector, binding="b1",
                                         on_missing=OnMissing.SKIP))
    assert soft.status == "skipped"
    assert soft.error is None
    follow = session.execute_step(PlanStep(op=StepOp.CLICK, action_index=0, binding="b1"))
    assert follow.status == "skipped"


def test_close_session_idempotent():
    backend = MockBackend(two_pager())
    session = DriverSession(backend, SessionConfig(backend="mock"))
    backend.navigate("https://site.test/a")
    first = session.close()
    second = session.close()
    assert first is second


def test_click_all_inventory_five_files(portal, portal_script):
    from tracecap.proxy import start_proxy
    proxy = start_proxy(warc_output=None)
    try:
        session = open_session(SessionConfig(
            backend="mock", proxy_endpoint=proxy.endpoint,
            page_script=portal_script, proxy_ca_pem=proxy.ca_certificate,
            idle_probe=proxy.idle_state))
        trace = repo_trace(portal.base_url)
        session.execute_plan(compile_trace(trace), portal.url("/repo/alpha"))
        report = session.close()
        assert len(report.inventory_by_category()["files"]) == 5
    finally:
        proxy.stop()


def test_scripted_deck_state_transitions(portal, portal_script):
    """In-page pagination: URL never changes, clicks emit slide fetches."""
    from tracecap.proxy import start_proxy
    proxy = start_proxy(warc_output=None)
    try:
        backend = MockBackend(PageScript.from_dict(portal_script),
                              proxy_endpoint=proxy.endpoint,
                              proxy_ca_pem=proxy.ca_certificate)
        session = DriverSession(backend, SessionConfig(backend="mock"))
        url = portal.url("/deck/scripted")
        backend.navigate(url)
        next_sel = Selector(SelectorStrategy.ELEMENT_ID, "next")
        clicks = 0
        while True:
            ref = backend.find(next_sel)[0]
            if ref.disabled:
                break
            backend.click(ref)
            clicks += 1
        assert clicks == 5  # 6 slides, landing shows the first
        assert backend.current_url() == url
        fetched = [u for u in backend.fetch_log if "slide-data" in u]
        assert len(fetched) == 6  # initial asset + 5 click fetches
    finally:
        proxy.stop()
