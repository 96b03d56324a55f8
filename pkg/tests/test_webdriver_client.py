"""WebDriver wire client: reachable-endpoint errors and locator mapping.

Protocol behavior against a real browser is exercised by the gated
equivalence test; these cover what needs no endpoint.
"""

import pytest

from tracecap.driver.webdriver import WebDriverBackend, _locator
from tracecap.errors import DriverUnreachable
from tracecap.trace import Selector, SelectorStrategy


def test_endpoint_down_is_driver_unreachable():
    with pytest.raises(DriverUnreachable):
        WebDriverBackend(endpoint="http://127.0.0.1:9", proxy_endpoint="127.0.0.1:1")


def test_missing_endpoint_is_driver_unreachable():
    with pytest.raises(DriverUnreachable):
        WebDriverBackend(endpoint="")


@pytest.mark.parametrize("selector,expected", [
    (Selector(SelectorStrategy.ELEMENT_ID, "zip"),
     {"using": "css selector", "value": '[id="zip"]'}),
    (Selector(SelectorStrategy.ELEMENT_ID, 'we"ird'),
     {"using": "css selector", "value": '[id="we\\"ird"]'}),
    (Selector(SelectorStrategy.HTML_CLASS, "file"),
     {"using": "css selector", "value": '[class~="file"]'}),
    (Selector(SelectorStrategy.CSS, "#files a.file"),
     {"using": "css selector", "value": "#files a.file"}),
    (Selector(SelectorStrategy.XPATH, "//a[@id='x']"),
     {"using": "xpath", "value": "//a[@id='x']"}),
])
def test_locator_mapping(selector, expected):
    assert _locator(selector) == expected
