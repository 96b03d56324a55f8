"""Scriptable in-process browser used in CI.

A PageScript declares a deterministic fake site: pages keyed by URL (or by
state key for in-page mutations), each with elements and transition rules.
The mock behaves like a minimal browser: navigation and declared resource
fetches are real HTTP requests issued through the session's capture proxy,
so the proxy, WARC store, and idle signal are exercised for real.
"""

from __future__ import annotations

import http.client
import re
import socket
from dataclasses import dataclass, field
from typing import Dict, List, Optional
from urllib.parse import urljoin, urlsplit

from ..errors import BackendError, NavigationTimeout, StaleElement
from ..tlsca import trust_context
from ..trace import Selector, SelectorStrategy
from .session import ElementRef


@dataclass
class MockElement:
    key: str  # internal handle; equals id when one is set
    tag: str = "div"
    id: Optional[str] = None
    classes: List[str] = field(default_factory=list)
    href: Optional[str] = None
    disabled: bool = False
    aria_disabled: bool = False
    parent: Optional[str] = None


@dataclass
class MockPage:
    key: str
    url: str
    elements: List[MockElement] = field(default_factory=list)
    assets: List[str] = field(default_factory=list)
    transitions: Dict[str, dict] = field(default_factory=dict)


class PageScript:
    """Validated page table. Deterministic by construction: no randomness,
    transitions may only reference defined pages or external URLs."""

    def __init__(self, pages: Dict[str, MockPage]):
        self.pages = pages
        self._by_url: Dict[str, str] = {}
        for key, page in pages.items():
            self._by_url.setdefault(page.url, key)
        for key, page in pages.items():
            for element_key, rule in page.transitions.items():
                if not any(e.key == element_key for e in page.elements):
                    raise ValueError(
                        f"page {key!r}: transition for unknown element {element_key!r}")
                goto = rule.get("goto")
                if goto and goto not in pages and not goto.startswith(("http://", "https://")):
                    raise ValueError(f"page {key!r}: transition goto {goto!r} is neither "
                                     f"a defined page nor an external URL")

    @classmethod
    def from_dict(cls, doc: dict) -> "PageScript":
        pages: Dict[str, MockPage] = {}
        for key, raw in doc.get("pages", {}).items():
            elements = []
            for i, el in enumerate(raw.get("elements", [])):
                el_id = el.get("id")
                elements.append(MockElement(
                    key=el_id or f"__e{i}",
                    tag=el.get("tag", "div"),
                    id=el_id,
                    classes=list(el.get("classes", [])),
                    href=el.get("href"),
                    disabled=bool(el.get("disabled", False)),
                    aria_disabled=bool(el.get("aria_disabled", False)),
                    parent=el.get("parent"),
                ))
            pages[key] = MockPage(
                key=key,
                url=raw.get("url", key),
                elements=elements,
                assets=list(raw.get("assets", [])),
                transitions=dict(raw.get("transitions", {})),
            )
        return cls(pages)

    def page_for_url(self, url: str) -> Optional[MockPage]:
        key = self._by_url.get(url)
        return self.pages.get(key) if key else None


_BLANK = MockPage(key="__blank", url="")

_XPATH_RE = re.compile(r"^//(\*|[a-zA-Z][\w-]*)(?:\[@(id|class)='([^']*)'\])?$")


def _matches(element: MockElement, selector: Selector) -> bool:
    strategy, value = selector.strategy, selector.value
    if strategy is SelectorStrategy.ELEMENT_ID:
        return element.id == value
    if strategy is SelectorStrategy.HTML_CLASS:
        return value in element.classes
    if strategy is SelectorStrategy.CSS:
        return _matches_css(element, value)
    if strategy is SelectorStrategy.XPATH:
        m = _XPATH_RE.match(value.strip())
        if not m:
            raise BackendError(f"mock driver supports only simple xpaths, got {value!r}")
        tag, attr, attr_value = m.groups()
        if tag != "*" and element.tag != tag:
            return False
        if attr == "id":
            return element.id == attr_value
        if attr == "class":
            return attr_value in element.classes
        return True
    return False


def _matches_css(element: MockElement, css: str) -> bool:
    # compound simple selector only: tag, #id, .class in any combination
    css = css.strip()
    if not css or " " in css or ">" in css:
        raise BackendError(f"mock driver supports only compound css selectors, got {css!r}")
    for part in re.findall(r"[#.]?[^#.]+", css):
        if part.startswith("#"):
            if element.id != part[1:]:
                return False
        elif part.startswith("."):
            if part[1:] not in element.classes:
                return False
        elif element.tag != part:
            return False
    return True


class MockBackend:
    """In-process page-script browser; one instance per session."""

    session_id = "mock"

    def __init__(self, script: PageScript, proxy_endpoint: Optional[str] = None,
                 proxy_ca_pem: Optional[bytes] = None, user_agent: str = "tracecap/0.1",
                 timeout_s: float = 60.0):
        self.script = script
        self.user_agent = user_agent
        self.timeout_s = timeout_s
        self.epoch = 0
        self.page: MockPage = _BLANK
        self.url: str = ""
        self._history: List[tuple] = []
        self._proxy_host: Optional[str] = None
        self._proxy_port: Optional[int] = None
        if proxy_endpoint:
            host, _, port = proxy_endpoint.partition(":")
            self._proxy_host, self._proxy_port = host, int(port)
        self._tls_ctx = trust_context(proxy_ca_pem) if proxy_ca_pem else trust_context(None)
        self.fetch_log: List[str] = []

    # -- primitive browser operations ---------------------------------------

    def navigate(self, url: str):
        self._history.append((self.page, self.url))
        self._load(url, fetch=True)

    def back(self):
        if not self._history:
            return
        page, url = self._history.pop()
        self.page, self.url = page, url
        self.epoch += 1

    def current_url(self) -> str:
        return self.url

    def find(self, selector: Selector) -> List[ElementRef]:
        return [self._ref(e) for e in self.page.elements if _matches(e, selector)]

    def find_within(self, scope: ElementRef, selector: Selector) -> List[ElementRef]:
        self._check_epoch(scope)
        inside = {scope.handle}
        grown = True
        while grown:  # transitive children of the scope element
            grown = False
            for element in self.page.elements:
                if element.parent in inside and element.key not in inside:
                    inside.add(element.key)
                    grown = True
        return [self._ref(e) for e in self.page.elements
                if e.key in inside and e.key != scope.handle and _matches(e, selector)]

    def click(self, ref: ElementRef):
        self._check_epoch(ref)
        element = next((e for e in self.page.elements if e.key == ref.handle), None)
        if element is None:
            raise StaleElement(f"element {ref.handle} not on current page")
        rule = self.page.transitions.get(element.key)
        if rule is not None:
            for uri in rule.get("fetches", []):
                self._fetch(uri)
            goto = rule.get("goto")
            if goto:
                if goto in self.script.pages:
                    target = self.script.pages[goto]
                    if target.url != self.url:
                        self.navigate(target.url)
                    else:  # in-page mutation: same document, new state
                        self.page = target
                        for uri in target.assets:
                            self._fetch(uri)
                else:
                    self.navigate(goto)
        elif element.tag == "a" and element.href:
            self.navigate(urljoin(self.url, element.href))

    def close(self):
        self.page = _BLANK
        self.url = ""

    # -- internals -----------------------------------------------------------

    def _ref(self, element: MockElement) -> ElementRef:
        href = urljoin(self.url, element.href) if element.href else None
        return ElementRef(handle=element.key, document_epoch=self.epoch,
                          tag=element.tag, href=href,
                          disabled=element.disabled or element.aria_disabled)

    def _check_epoch(self, ref: ElementRef):
        if ref.document_epoch != self.epoch:
            raise StaleElement(
                f"element {ref.handle} is from epoch {ref.document_epoch}, "
                f"current is {self.epoch}")

    def _load(self, url: str, fetch: bool):
        if fetch:
            self._fetch(url)
        page = self.script.page_for_url(url) or self.script.pages.get(url)
        self.page = page or MockPage(key="__external", url=url)
        self.url = url
        self.epoch += 1
        if page is not None:
            for asset in page.assets:
                self._fetch(asset)

    def _fetch(self, url: str):
        """GET through the capture proxy, like a browser would."""
        self.fetch_log.append(url)
        if self._proxy_host is None:
            return
        parts = urlsplit(url)
        host = parts.hostname or ""
        headers = {"User-Agent": self.user_agent, "Accept": "*/*"}
        try:
            if parts.scheme == "https":
                port = parts.port or 443
                conn = http.client.HTTPSConnection(
                    self._proxy_host, self._proxy_port,
                    timeout=self.timeout_s, context=self._tls_ctx)
                conn.set_tunnel(host, port)
                path = parts.path or "/"
                if parts.query:
                    path += "?" + parts.query
                conn.request("GET", path, headers=headers)
            else:
                conn = http.client.HTTPConnection(
                    self._proxy_host, self._proxy_port, timeout=self.timeout_s)
                conn.request("GET", url, headers=dict(headers, Host=parts.netloc))
            response = conn.getresponse()
            while response.read(1 << 16):
                pass
            conn.close()
        except socket.timeout as exc:
            raise NavigationTimeout(f"fetch of {url} timed out") from exc
        except OSError as exc:
            raise BackendError(f"fetch of {url} failed: {exc}") from exc
