"""W3C WebDriver wire-protocol client (plain HTTP + JSON).

Talks to any conformant endpoint (chromedriver, geckodriver, a Selenium
grid). The session is created with a manual proxy capability pointing at the
capture proxy and acceptInsecureCerts so the session CA's leaf certificates
are accepted without provisioning a trust store.
"""

from __future__ import annotations

import json
from typing import Dict, List, Optional

import requests

from ..errors import (
    BackendError,
    CapabilityRejected,
    DriverUnreachable,
    NavigationTimeout,
    StaleElement,
)
from ..trace import Selector, SelectorStrategy
from .session import ElementRef

ELEMENT_KEY = "element-6066-11e4-a52e-4f735466cecf"


def _locator(selector: Selector) -> Dict[str, str]:
    if selector.strategy is SelectorStrategy.ELEMENT_ID:
        value = selector.value.replace("\\", "\\\\").replace('"', '\\"')
        return {"using": "css selector", "value": f'[id="{value}"]'}
    if selector.strategy is SelectorStrategy.HTML_CLASS:
        value = selector.value.replace("\\", "\\\\").replace('"', '\\"')
        return {"using": "css selector", "value": f'[class~="{value}"]'}
    if selector.strategy is SelectorStrategy.CSS:
        return {"using": "css selector", "value": selector.value}
    return {"using": "xpath", "value": selector.value}


class WebDriverBackend:
    """One protocol session on a remote endpoint."""

    def __init__(self, endpoint: str, proxy_endpoint: Optional[str] = None,
                 user_agent: str = "tracecap/0.1",
                 extra_capabilities: Optional[dict] = None,
                 navigation_timeout_s: float = 60.0):
        if not endpoint:
            raise DriverUnreachable("no webdriver endpoint configured")
        self.endpoint = endpoint.rstrip("/")
        self.http = requests.Session()
        self.epoch = 0
        self.user_agent = user_agent

        always_match: Dict[str, object] = {"acceptInsecureCerts": True}
        if proxy_endpoint:
            always_match["proxy"] = {
                "proxyType": "manual",
                "httpProxy": proxy_endpoint,
                "sslProxy": proxy_endpoint,
            }
        if extra_capabilities:
            always_match.update(extra_capabilities)
        try:
            created = self._raw("POST", "/session",
                                {"capabilities": {"alwaysMatch": always_match}})
        except requests.ConnectionError as exc:
            raise DriverUnreachable(f"webdriver endpoint {endpoint} unreachable: {exc}") from exc
        value = created.get("value", {})
        self.session_id = value.get("sessionId")
        if not self.session_id:
            raise CapabilityRejected(f"session not created: {json.dumps(value)[:300]}")
        self._cmd("POST", "/timeouts", {"pageLoad": int(navigation_timeout_s * 1000)})

    # -- wire helpers --------------------------------------------------------

    def _raw(self, method: str, path: str, body: Optional[dict] = None) -> dict:
        url = self.endpoint + path
        response = self.http.request(
            method, url, json=body if body is not None else ({} if method == "POST" else None),
            timeout=120)
        try:
            payload = response.json()
        except ValueError:
            payload = {"value": {"error": "unknown", "message": response.text[:300]}}
        if response.status_code >= 400:
            value = payload.get("value") or {}
            error = value.get("error", "unknown")
            message = value.get("message", "")
            if error == "stale element reference":
                raise StaleElement(message)
            if error == "timeout":
                raise NavigationTimeout(message)
            if error in ("session not created", "invalid argument") and path == "/session":
                raise CapabilityRejected(f"{error}: {message}")
            raise BackendError(f"{error}: {message}", status=error)
        return payload

    def _cmd(self, method: str, path: str, body: Optional[dict] = None):
        return self._raw(method, f"/session/{self.session_id}{path}", body)

    # -- primitive browser operations ----------------------------------------

    def navigate(self, url: str):
        self._cmd("POST", "/url", {"url": url})
        self.epoch += 1

    def back(self):
        self._cmd("POST", "/back")
        self.epoch += 1

    def current_url(self) -> str:
        return self._cmd("GET", "/url")["value"]

    def find(self, selector: Selector) -> List[ElementRef]:
        found = self._cmd("POST", "/elements", _locator(selector))["value"]
        return [self._ref(item[ELEMENT_KEY]) for item in found]

    def find_within(self, scope: ElementRef, selector: Selector) -> List[ElementRef]:
        found = self._cmd("POST", f"/element/{scope.handle}/elements",
                          _locator(selector))["value"]
        return [self._ref(item[ELEMENT_KEY]) for item in found]

    def click(self, ref: ElementRef):
        self._cmd("POST", f"/element/{ref.handle}/click")

    def close(self):
        try:
            self._raw("DELETE", f"/session/{self.session_id}")
        except (BackendError, requests.RequestException):
            pass

    # -- internals -------------------------------------------------------------

    def _ref(self, handle: str) -> ElementRef:
        tag = self._cmd("GET", f"/element/{handle}/name")["value"] or ""
        href = None
        if tag.lower() == "a":
            href = self._cmd("GET", f"/element/{handle}/property/href")["value"] or None
        disabled = bool(self._cmd("GET", f"/element/{handle}/property/disabled")["value"])
        if not disabled:
            aria = self._cmd("GET", f"/element/{handle}/attribute/aria-disabled")["value"]
            disabled = aria == "true"
        return ElementRef(handle=handle, document_epoch=self.epoch,
                          tag=tag.lower(), href=href, disabled=disabled)
