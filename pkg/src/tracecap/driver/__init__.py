"""Browser driver: executes compiled plans through a uniform session.

Two backends: ``mock`` (in-process, driven by a page script, used in CI) and
``webdriver`` (a real browser spoken to over the W3C wire protocol). Both
route all page traffic through the session's capture proxy and produce the
same inventory log for the same site.
"""

from .session import (
    DriverSession,
    ElementRef,
    InventoryEntry,
    SessionConfig,
    SessionReport,
    StepOutcome,
    open_session,
)
from .mock import MockBackend, PageScript
from .webdriver import WebDriverBackend

__all__ = [
    "DriverSession", "ElementRef", "InventoryEntry", "SessionConfig",
    "SessionReport", "StepOutcome", "open_session",
    "MockBackend", "PageScript", "WebDriverBackend",
]
