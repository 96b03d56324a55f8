"""Backend-neutral session: owns plan-step execution, bindings, inventory.

A session is bound to one proxy endpoint for its whole life and runs one
plan at a time. Backends supply primitive operations (navigate, find, click,
back); everything about step semantics lives here so the mock and the wire
backend cannot drift apart.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional

from ..compiler import ActionPlan, PlanStep, StepOp
from ..errors import DriverError, ElementNotFound, StaleElement
from ..trace import OnMissing, Selector, UntilCondition

logger = logging.getLogger(__name__)

_IDLE_POLL_S = 0.02


class _StepFailed(DriverError):
    """Inner-step failure propagated out of a composite step."""

    def __init__(self, outcome: "StepOutcome"):
        self.outcome = outcome
        super().__init__(outcome.error or outcome.op)


@dataclass
class ElementRef:
    """Handle to one element plus the metadata steps need after the element
    itself may be gone (clicking an anchor navigates away from it)."""

    handle: str
    document_epoch: int
    tag: str = ""
    href: Optional[str] = None
    disabled: bool = False


@dataclass
class InventoryEntry:
    category: str
    uri: str
    action_index: Optional[int]


@dataclass
class StepOutcome:
    op: str
    action_index: Optional[int]
    status: str  # ok | skipped | failed
    duration_ms: int = 0
    error: Optional[str] = None
    error_kind: Optional[str] = None  # network | element | stale | backend
    detail: Dict[str, object] = field(default_factory=dict)

    @property
    def failed(self) -> bool:
        return self.status == "failed"


@dataclass
class SessionReport:
    inventory: List[InventoryEntry]
    outcomes: List[StepOutcome]
    errors: List[str]

    def inventory_by_category(self) -> Dict[str, List[str]]:
        grouped: Dict[str, List[str]] = {}
        for entry in self.inventory:
            grouped.setdefault(entry.category, [])
            if entry.uri not in grouped[entry.category]:
                grouped[entry.category].append(entry.uri)
        return grouped


@dataclass
class SessionConfig:
    backend: str  # "mock" | "webdriver"
    proxy_endpoint: Optional[str] = None
    user_agent: str = "tracecap/0.1"
    page_script: Optional[dict] = None  # mock only
    webdriver_endpoint: Optional[str] = None
    proxy_ca_pem: Optional[bytes] = None
    idle_probe: Optional[Callable[[int], object]] = None
    extra_capabilities: Optional[dict] = None
    navigation_timeout_s: float = 60.0


class DriverSession:
    """Executes plan steps on a backend. Confined to one worker at a time."""

    def __init__(self, backend, config: SessionConfig):
        self.backend = backend
        self.config = config
        self.session_id = backend.session_id
        self.proxy_endpoint = config.proxy_endpoint
        self._bindings: Dict[str, List[ElementRef]] = {}
        self._skipped_bindings: set = set()
        self._last_click_navigation: Optional[str] = None
        self._inventory: List[InventoryEntry] = []
        self._outcomes: List[StepOutcome] = []
        self._errors: List[str] = []
        self._report: Optional[SessionReport] = None
        self._click_count = 0

    # -- public surface ------------------------------------------------------

    @property
    def click_count(self) -> int:
        return self._click_count

    def execute_plan(self, plan: ActionPlan, url: str,
                     retry_step: bool = False) -> List[StepOutcome]:
        """Run all steps; a failed step aborts the rest of the plan.

        With ``retry_step`` a step failing for network or missing-element
        reasons is executed a second time before counting as failed.
        """
        outcomes: List[StepOutcome] = []
        for step in plan.steps:
            outcome = self.execute_step(step, url=url)
            if outcome.failed and retry_step and outcome.error_kind in ("network", "element"):
                logger.info("retrying step %s after %s", step.op.value, outcome.error)
                outcome = self.execute_step(step, url=url)
                outcome.detail["retried"] = True
            outcomes.append(outcome)
            if outcome.failed:
                break
        return outcomes

    def execute_step(self, step: PlanStep, url: Optional[str] = None) -> StepOutcome:
        started = time.monotonic()
        outcome = StepOutcome(op=step.op.value, action_index=step.action_index, status="ok")
        try:
            if step.op is StepOp.NAVIGATE:
                target = step.url_template.format(url=url) if url else step.url_template
                self._navigate(target)
                outcome.detail["url"] = target
            elif step.op is StepOp.RESOLVE:
                self._do_resolve(step, outcome)
            elif step.op is StepOp.CLICK:
                self._do_click(step, outcome)
            elif step.op is StepOp.WAIT_IDLE:
                self._wait_idle(step.quiet_ms, step.cap_ms)
            elif step.op is StepOp.RECORD_TARGET:
                self._do_record(step, outcome)
            elif step.op is StepOp.CLICK_EACH_AND_RETURN:
                self._do_click_each(step, outcome)
            elif step.op is StepOp.LOOP:
                self._do_loop(step, outcome)
        except DriverError as exc:
            outcome.status = "failed"
            outcome.error = str(exc)
            outcome.error_kind = _classify(exc)
            self._errors.append(f"{step.op.value}: {exc}")
        outcome.duration_ms = int((time.monotonic() - started) * 1000)
        self._outcomes.append(outcome)
        return outcome

    def close(self) -> SessionReport:
        """Release the backend; idempotent, always returns the same report."""
        if self._report is None:
            try:
                self.backend.close()
            except Exception as exc:
                logger.warning("backend teardown failed: %s", exc)
            self._report = SessionReport(
                inventory=list(self._inventory),
                outcomes=list(self._outcomes),
                errors=list(self._errors),
            )
        return self._report

    # -- step implementations --------------------------------------------------

    def _navigate(self, target: str):
        self._bindings.clear()
        self._last_click_navigation = None
        self.backend.navigate(target)

    def _do_resolve(self, step: PlanStep, outcome: StepOutcome):
        refs = self.backend.find(step.selector)
        if not refs and step.on_missing is OnMissing.FAIL:
            raise ElementNotFound(
                f"{step.selector.strategy.value} {step.selector.value!r} matched nothing")
        self._bindings[step.binding] = refs
        if not refs:
            self._skipped_bindings.add(step.binding)
            outcome.status = "skipped"
        else:
            self._skipped_bindings.discard(step.binding)
        outcome.detail["matches"] = len(refs)

    def _first_bound(self, binding: str) -> Optional[ElementRef]:
        refs = self._bindings.get(binding, [])
        return refs[0] if refs else None

    def _do_click(self, step: PlanStep, outcome: StepOutcome):
        if step.binding in self._skipped_bindings:
            outcome.status = "skipped"
            return
        ref = self._first_bound(step.binding)
        if ref is None:
            raise ElementNotFound(f"binding {step.binding} is empty")
        before = self.backend.current_url()
        self.backend.click(ref)
        self._click_count += 1
        after = self.backend.current_url()
        self._last_click_navigation = after if after != before else None

    def _do_record(self, step: PlanStep, outcome: StepOutcome):
        if step.binding in self._skipped_bindings:
            outcome.status = "skipped"
            return
        ref = self._first_bound(step.binding)
        if ref is None:
            raise ElementNotFound(f"binding {step.binding} is empty")
        uri = ref.href if (ref.tag == "a" and ref.href) else self._last_click_navigation
        if uri:
            self._inventory.append(InventoryEntry(
                category=step.category, uri=uri, action_index=step.action_index))
            outcome.detail["uri"] = uri

    def _wait_idle(self, quiet_ms: int, cap_ms: int):
        probe = self.config.idle_probe
        if probe is None:
            return
        deadline = time.monotonic() + cap_ms / 1000.0
        while time.monotonic() < deadline:
            state = probe(quiet_ms)
            if getattr(state, "idle", False):
                return
            time.sleep(_IDLE_POLL_S)

    def _do_click_each(self, step: PlanStep, outcome: StepOutcome):
        if step.binding in self._skipped_bindings:
            outcome.status = "skipped"
            return
        scope = self._first_bound(step.binding)
        if scope is None:
            raise ElementNotFound(f"binding {step.binding} is empty")
        links = self.backend.find_within(scope, step.link_selector)
        origin = self.backend.current_url()
        visited = 0
        failures = []
        for link in links:  # snapshot: hrefs were captured at resolution
            if link.href:
                self._inventory.append(InventoryEntry(
                    category=step.category, uri=link.href, action_index=step.action_index))
            try:
                if link.href:
                    self.backend.navigate(link.href)
                else:
                    self.backend.click(link)
                    self._click_count += 1
                visited += 1
                self._wait_idle(step.quiet_ms, step.cap_ms)
                if self.backend.current_url() != origin:
                    self.backend.back()
            except DriverError as exc:
                failures.append(str(exc))
        outcome.detail.update({"links": len(links), "visited": visited})
        if failures:
            outcome.status = "failed"
            outcome.error = "; ".join(failures)
            outcome.error_kind = "network"
            self._errors.append(f"click_each_and_return: {outcome.error}")

    def _do_loop(self, step: PlanStep, outcome: StepOutcome):
        resolve_step = step.body[0]
        iterations = 0
        while iterations < step.max_iterations:
            refs = self.backend.find(resolve_step.selector)
            if not refs:
                if step.until is UntilCondition.ELEMENT_ABSENT:
                    break
                if resolve_step.on_missing is OnMissing.SKIP:
                    outcome.status = "skipped" if iterations == 0 else outcome.status
                    break
                raise ElementNotFound(
                    f"{resolve_step.selector.strategy.value} "
                    f"{resolve_step.selector.value!r} matched nothing in loop")
            ref = refs[0]
            if step.until is UntilCondition.ELEMENT_DISABLED and ref.disabled:
                break
            self._bindings[resolve_step.binding] = refs
            for inner in step.body[1:]:
                inner_outcome = self.execute_step(inner)
                if inner_outcome.failed:
                    raise _StepFailed(inner_outcome)
            iterations += 1
        outcome.detail["iterations"] = iterations


def _classify(exc: DriverError) -> str:
    from ..errors import BackendError, NavigationTimeout

    if isinstance(exc, _StepFailed):
        return exc.outcome.error_kind or "backend"
    if isinstance(exc, ElementNotFound):
        return "element"
    if isinstance(exc, StaleElement):
        return "stale"
    if isinstance(exc, NavigationTimeout):
        return "network"
    if isinstance(exc, BackendError):
        return "backend"
    return "network"


def open_session(config: SessionConfig) -> DriverSession:
    """Open a session on the configured backend, routed through the proxy."""
    from .mock import MockBackend, PageScript
    from .webdriver import WebDriverBackend

    if config.backend == "mock":
        if config.page_script is None:
            raise DriverError("mock backend requires a page_script")
        backend = MockBackend(
            PageScript.from_dict(config.page_script),
            proxy_endpoint=config.proxy_endpoint,
            proxy_ca_pem=config.proxy_ca_pem,
            user_agent=config.user_agent,
            timeout_s=config.navigation_timeout_s,
        )
    elif config.backend == "webdriver":
        backend = WebDriverBackend(
            endpoint=config.webdriver_endpoint,
            proxy_endpoint=config.proxy_endpoint,
            user_agent=config.user_agent,
            extra_capabilities=config.extra_capabilities,
            navigation_timeout_s=config.navigation_timeout_s,
        )
    else:
        raise DriverError(f"unknown backend {config.backend!r}")
    return DriverSession(backend, config)
